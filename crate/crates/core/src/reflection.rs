//! Three-turn self-reflection on a missed recommendation: infer mistakes
//! without the answer, explain the miss once the target is revealed, then
//! condense the causes into short hints.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::data::{CandidateSet, Session};
use crate::error::{Error, Result};
use crate::llm::{
    render_causes_prompt, render_mistakes_prompt, render_summarize_prompt, ChatTurn, RankedOutput,
};
use crate::recommender::Recommender;

pub const MAX_HINT_CHARS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionTrace {
    pub session_id: String,
    pub base_output: RankedOutput,
    pub mistakes_analysis: String,
    pub causes_analysis: String,
    pub raw_hints_reply: String,
    pub candidate_hints: Vec<String>,
}

fn bullet() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d{1,2}[.)]|[-*•])\s+(.*)$").unwrap())
}

fn leading_label() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // "**Era preference**:" or "Hint 2:" style prefixes of at most five words
    RE.get_or_init(|| Regex::new(r"^(?:\*\*[^*]{1,60}\*\*\s*:?|[A-Za-z][\w' ]{0,40}:)\s+").unwrap())
}

fn truncate_hint(text: &str) -> String {
    if text.chars().count() <= MAX_HINT_CHARS {
        return text.to_string();
    }
    let head: String = text.chars().take(MAX_HINT_CHARS).collect();
    match head.rfind(['.', '!', '?']) {
        Some(i) if i > 0 => head[..=i].to_string(),
        _ => head.trim_end().to_string(),
    }
}

/// Pull bullet items (numbered or dashed) out of a hints reply, trimming
/// labels and dropping any hint that names the target title.
pub fn extract_hints(raw_hints_reply: &str, target_title: Option<&str>) -> Vec<String> {
    let target = target_title.map(|t| t.trim().to_lowercase()).filter(|t| !t.is_empty());
    let mut hints = Vec::new();
    for line in raw_hints_reply.lines() {
        let Some(cap) = bullet().captures(line) else { continue };
        let mut body = cap[1].trim().to_string();
        if let Some(m) = leading_label().find(&body) {
            if body[m.end()..].split_whitespace().count() >= 3 && m.as_str().split_whitespace().count() <= 5 {
                body = body[m.end()..].to_string();
            }
        }
        let body = body.replace("**", "");
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        if let Some(t) = &target {
            if body.to_lowercase().contains(t.as_str()) {
                log::info!("dropping hint that leaks the target title: {body:?}");
                continue;
            }
        }
        hints.push(truncate_hint(body));
    }
    hints
}

/// Run the reflection conversation for a session whose base ranking missed.
pub fn run_reflection_chain(
    session: &Session,
    candidates: &CandidateSet,
    base_output: &RankedOutput,
    recommender: &Recommender<'_>,
) -> Result<ReflectionTrace> {
    let target = session.require_target()?;
    if base_output.ranked_item_ids.iter().any(|id| id == target) {
        return Err(Error::NotAMiss(session.session_id.clone()));
    }
    let target_title = recommender.catalog.title(target)?;
    let basic = recommender.prompt(session, candidates, None)?;
    let base_reply = if base_output.raw_text.trim().is_empty() {
        "(no answer)"
    } else {
        base_output.raw_text.as_str()
    };

    let gateway = recommender.gateway;
    let mut turns = vec![ChatTurn::user(render_mistakes_prompt(&basic.text, base_reply).text)];
    let mistakes = gateway.complete_chat(&turns)?;
    turns.push(ChatTurn::assistant(nonblank(&mistakes)));
    turns.push(ChatTurn::user(render_causes_prompt(target_title).text));
    let causes = gateway.complete_chat(&turns)?;
    turns.push(ChatTurn::assistant(nonblank(&causes)));
    turns.push(ChatTurn::user(render_summarize_prompt().text));
    let raw_hints = gateway.complete_chat(&turns)?;

    let candidate_hints = extract_hints(&raw_hints, Some(target_title));
    Ok(ReflectionTrace {
        session_id: session.session_id.clone(),
        base_output: base_output.clone(),
        mistakes_analysis: mistakes,
        causes_analysis: causes,
        raw_hints_reply: raw_hints,
        candidate_hints,
    })
}

// assistant turns must be non-empty on the wire
fn nonblank(s: &str) -> String {
    if s.trim().is_empty() {
        "(no answer)".to_string()
    } else {
        s.to_string()
    }
}
