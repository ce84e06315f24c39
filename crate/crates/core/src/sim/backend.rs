use std::collections::HashMap;

use super::library::{DISTRACTOR_HINTS, MODE_LIBRARY};
use super::world::{render_ranking, simulate_outcome, simulate_similarity_judge, SimScenario, SimWorld};
use crate::data::Catalog;
use crate::llm::{
    BackendFailure, ChatBackend, ChatRequest, Role, HINTS_INSTRUCTION, HINT_MARKER, LIST_CLOSE, LIST_OPEN, LIST_SEP,
    SIMILARITY_MIDDLE, SIMILARITY_PREFIX, SIMILARITY_SUFFIX, TASK_INSTRUCTION,
};
use crate::seed::stable_hash;

/// Chat backend that answers every pipeline prompt from a [`SimScenario`].
///
/// Ranking prompts are decoded back into item ids through the catalog titles;
/// the target is recovered from the history sequence, which the generated
/// world keeps unique.
pub struct SimulatedLlm {
    catalog: Catalog,
    scenario: SimScenario,
    by_title: HashMap<String, String>,
    targets: HashMap<Vec<String>, String>,
}

struct RankingPrompt<'a> {
    history: Vec<String>,
    candidates: Vec<String>,
    hint: Option<&'a str>,
}

fn fail(message: impl Into<String>) -> BackendFailure {
    BackendFailure { status: None, message: message.into(), transient: false }
}

impl SimulatedLlm {
    pub fn new(world: &SimWorld) -> Self {
        let by_title = world
            .catalog
            .items()
            .iter()
            .map(|i| (i.title.clone(), i.item_id.clone()))
            .collect();
        let targets = world
            .sessions
            .iter()
            .filter_map(|s| s.target.clone().map(|t| (s.items.clone(), t)))
            .collect();
        Self { catalog: world.catalog.clone(), scenario: world.scenario.clone(), by_title, targets }
    }

    pub fn scenario(&self) -> &SimScenario {
        &self.scenario
    }

    fn ids(&self, list: &str) -> Result<Vec<String>, BackendFailure> {
        list.split(LIST_SEP)
            .map(|t| self.by_title.get(t.trim()).cloned().ok_or_else(|| fail(format!("unknown title `{t}`"))))
            .collect()
    }

    fn parse_ranking<'a>(&self, text: &'a str) -> Result<RankingPrompt<'a>, BackendFailure> {
        let braced = |from: usize| -> Option<(usize, usize)> {
            let open = text[from..].find(LIST_OPEN)? + from;
            let close = text[open..].find(LIST_CLOSE)? + open;
            Some((open + LIST_OPEN.len(), close))
        };
        let (h0, h1) = braced(0).ok_or_else(|| fail("no history list"))?;
        let (c0, c1) = braced(h1).ok_or_else(|| fail("no candidate list"))?;
        let rest = &text[c1..];
        let hint = rest
            .find(TASK_INSTRUCTION)
            .map(|i| &rest[i + TASK_INSTRUCTION.len()..])
            .and_then(|tail| tail.strip_prefix(HINT_MARKER))
            .map(str::trim)
            .filter(|h| !h.is_empty());
        Ok(RankingPrompt { history: self.ids(&text[h0..h1])?, candidates: self.ids(&text[c0..c1])?, hint })
    }

    fn rank(&self, text: &str) -> Result<String, BackendFailure> {
        let p = self.parse_ranking(text)?;
        let target = self.targets.get(&p.history).map(String::as_str);
        let out = simulate_outcome(&p.history, target, &p.candidates, p.hint, &self.catalog, &self.scenario);
        Ok(render_ranking(&p.history, target, &p.candidates, out.rank, &self.catalog, &self.scenario))
    }

    /// History of the reflection conversation, taken from its first turn.
    fn reflected_history(&self, request: &ChatRequest) -> Result<Vec<String>, BackendFailure> {
        let first = request
            .messages
            .iter()
            .find(|m| m.role == Role::User && m.content.starts_with("Question: "))
            .ok_or_else(|| fail("reflection turn without the original question"))?;
        Ok(self.parse_ranking(&first.content)?.history)
    }

    fn mode_of(&self, history: &[String]) -> Option<&'static super::library::ModeTemplate> {
        let m = self.scenario.session_mode(history, &self.catalog)?;
        let tag = &self.scenario.mode(m)?.tag;
        MODE_LIBRARY.iter().find(|t| t.tag == tag)
    }

    fn causes(&self, request: &ChatRequest) -> Result<String, BackendFailure> {
        let history = self.reflected_history(request)?;
        let why = self.mode_of(&history).map_or("ranked by surface similarity of titles", |t| t.description);
        Ok(format!(
            "The earlier list {why}. It also leaned on titles that merely looked similar to the history, \
             and it did not weigh how the session hangs together as a whole."
        ))
    }

    fn hints(&self, request: &ChatRequest) -> Result<String, BackendFailure> {
        let history = self.reflected_history(request)?;
        let key = stable_hash(history.iter().map(String::as_bytes));
        let n = DISTRACTOR_HINTS.len() as u64;
        let mut lines: Vec<&str> = vec![
            DISTRACTOR_HINTS[(key % n) as usize],
            DISTRACTOR_HINTS[((key / n) % (n - 1) + key % n + 1) as usize % n as usize],
        ];
        match self.mode_of(&history) {
            Some(t) => {
                let p = t.paraphrases[((key >> 32) % t.paraphrases.len() as u64) as usize];
                lines.insert(((key >> 40) % 3) as usize, p);
            }
            None => lines.push(DISTRACTOR_HINTS[((key >> 32) % n) as usize]),
        }
        Ok(lines.iter().enumerate().map(|(i, l)| format!("{}. {l}", i + 1)).collect::<Vec<_>>().join("\n"))
    }

    fn judge(&self, text: &str) -> Result<String, BackendFailure> {
        let body = text
            .strip_prefix(SIMILARITY_PREFIX)
            .and_then(|t| t.strip_suffix(SIMILARITY_SUFFIX))
            .ok_or_else(|| fail("malformed similarity prompt"))?;
        let (candidate, existing) = body.split_once(SIMILARITY_MIDDLE).ok_or_else(|| fail("malformed similarity prompt"))?;
        let similar = existing
            .split(LIST_SEP)
            .any(|h| simulate_similarity_judge(candidate, h, &self.scenario) == 1);
        Ok(if similar { "1" } else { "0" }.to_string())
    }
}

impl ChatBackend for SimulatedLlm {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendFailure> {
        let last = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| fail("no user turn"))?;
        let text = last.content.as_str();
        if text.starts_with("Question: ") {
            Ok("Several predictions matched only the wording of earlier titles. \
                The list ignored what the watched items have in common beyond their names."
                .to_string())
        } else if text.starts_with("The correct answer is ") {
            self.causes(request)
        } else if text == HINTS_INSTRUCTION {
            self.hints(request)
        } else if text.starts_with(SIMILARITY_PREFIX) {
            self.judge(text)
        } else if text.contains(TASK_INSTRUCTION) {
            self.rank(text)
        } else {
            Err(fail("prompt not recognised by the simulator"))
        }
    }
}
