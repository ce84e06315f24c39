//! Prompt templates for recommendation, reflection and hint similarity.

use serde::{Deserialize, Serialize};

use crate::data::{Catalog, CandidateSet, Session};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Basic,
    HintEnhanced,
    ReflectMistakes,
    ReflectCauses,
    SummarizeHints,
    Similarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub kind: PromptKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

/// Wording of the recommendation prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    #[default]
    Movie,
    Item,
}

impl Domain {
    fn words(self) -> (&'static str, &'static str, &'static str) {
        match self {
            Domain::Movie => ("watched", "movies", "a movie for me to watch"),
            Domain::Item => ("purchased", "items", "an item for me to purchase"),
        }
    }
}

pub const LIST_OPEN: &str = "{";
pub const LIST_CLOSE: &str = "}";
pub const LIST_SEP: &str = "; ";
pub const HINT_MARKER: &str = " Hint: ";
pub const TASK_INSTRUCTION: &str =
    "Please recommend from the candidate set. List the top 10 recommendations in numbered bullet points.";
pub const MISTAKES_INSTRUCTION: &str =
    "Now, know that none of these answers is the target. Infer about possible mistakes in the ChatGPT's predictions.";
pub const CAUSES_INSTRUCTION: &str = "Analyze why ChatGPT missed the target item from a wide variety of aspects. Explain the causes for the oversights based on earlier analysis.";
pub const HINTS_INSTRUCTION: &str = "Provide short hints for AI to try again according to each point of the previous step, without information leakage of the target item.";
pub const SIMILARITY_PREFIX: &str = "Does hint [";
pub const SIMILARITY_MIDDLE: &str = "] convey a similar idea for these hints: [";
pub const SIMILARITY_SUFFIX: &str = "]? Return 1 if true, else return 0.";

fn titles<'a>(ids: &'a [String], catalog: &'a Catalog) -> Result<Vec<&'a str>> {
    ids.iter().map(|id| catalog.title(id)).collect()
}

fn braced(titles: &[&str]) -> String {
    format!("{LIST_OPEN}{}{LIST_CLOSE}", titles.join(LIST_SEP))
}

/// The basic recommendation prompt: session titles in interaction order, the
/// candidate titles in candidate-set order, and the task instruction.
pub fn render_basic_prompt(
    session: &Session,
    candidates: &CandidateSet,
    catalog: &Catalog,
    domain: Domain,
) -> Result<PromptText> {
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    if session.is_empty() {
        return Err(Error::invalid(format!("session `{}` has no items", session.session_id)));
    }
    let history = titles(&session.items, catalog)?;
    let pool = titles(&candidates.candidates, catalog)?;
    let (verb, plural, ask) = domain.words();
    let text = format!(
        "I {verb} the following {plural} in order: {}. Based on these interactions, recommend {ask} next from a candidate set: {}. {TASK_INSTRUCTION}",
        braced(&history),
        braced(&pool),
    );
    Ok(PromptText {
        text,
        kind: PromptKind::Basic,
        session_id: Some(session.session_id.clone()),
    })
}

/// Basic prompt followed by the hint clause. A blank hint yields the basic
/// prompt unchanged (the "no hint" action).
pub fn render_hint_prompt(
    session: &Session,
    candidates: &CandidateSet,
    catalog: &Catalog,
    domain: Domain,
    hint: &str,
) -> Result<PromptText> {
    let mut p = render_basic_prompt(session, candidates, catalog, domain)?;
    let hint = hint.trim();
    if !hint.is_empty() {
        p.text.push_str(HINT_MARKER);
        p.text.push_str(hint);
        p.kind = PromptKind::HintEnhanced;
    }
    Ok(p)
}

pub fn render_mistakes_prompt(basic_prompt: &str, base_reply: &str) -> PromptText {
    PromptText {
        text: format!("Question: {basic_prompt}\nChatGPT: {}\n{MISTAKES_INSTRUCTION}", base_reply.trim()),
        kind: PromptKind::ReflectMistakes,
        session_id: None,
    }
}

pub fn render_causes_prompt(target_title: &str) -> PromptText {
    PromptText {
        text: format!("The correct answer is {target_title}. {CAUSES_INSTRUCTION}"),
        kind: PromptKind::ReflectCauses,
        session_id: None,
    }
}

pub fn render_summarize_prompt() -> PromptText {
    PromptText {
        text: HINTS_INSTRUCTION.to_string(),
        kind: PromptKind::SummarizeHints,
        session_id: None,
    }
}

pub fn render_similarity_prompt(candidate_hint: &str, existing_hints: &[&str]) -> Result<PromptText> {
    if existing_hints.is_empty() {
        return Err(Error::invalid("similarity prompt needs at least one existing hint"));
    }
    Ok(PromptText {
        text: format!(
            "{SIMILARITY_PREFIX}{}{SIMILARITY_MIDDLE}{}{SIMILARITY_SUFFIX}",
            candidate_hint.trim(),
            existing_hints.iter().map(|h| h.trim()).collect::<Vec<_>>().join(LIST_SEP)
        ),
        kind: PromptKind::Similarity,
        session_id: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Item;

    fn fixture() -> (Session, CandidateSet, Catalog) {
        let titles = ["Titanic", "Leaving Las Vegas", "Casino Royale", "Batman", "Aladdin"];
        let catalog = Catalog::new(
            titles
                .iter()
                .enumerate()
                .map(|(i, t)| Item {
                    item_id: format!("m{i}"),
                    title: t.to_string(),
                    attributes: Default::default(),
                })
                .collect(),
        )
        .unwrap();
        let session = Session::new("s1", vec!["m0".into(), "m1".into()]).with_target("m4");
        let cands = CandidateSet {
            session_id: "s1".into(),
            candidates: vec!["m2".into(), "m4".into(), "m3".into()],
            target_index: 1,
        };
        (session, cands, catalog)
    }

    #[test]
    fn basic_prompt_layout() {
        let (s, c, cat) = fixture();
        let p = render_basic_prompt(&s, &c, &cat, Domain::Movie).unwrap();
        assert_eq!(
            p.text,
            "I watched the following movies in order: {Titanic; Leaving Las Vegas}. Based on these \
             interactions, recommend a movie for me to watch next from a candidate set: {Casino Royale; \
             Aladdin; Batman}. Please recommend from the candidate set. List the top 10 recommendations \
             in numbered bullet points."
        );
        assert_eq!(p.kind, PromptKind::Basic);
        assert_eq!(p, render_basic_prompt(&s, &c, &cat, Domain::Movie).unwrap());
    }

    #[test]
    fn item_domain_wording() {
        let (s, c, cat) = fixture();
        let p = render_basic_prompt(&s, &c, &cat, Domain::Item).unwrap();
        assert!(p.text.starts_with("I purchased the following items in order:"));
        assert!(p.text.contains("recommend an item for me to purchase next"));
    }

    #[test]
    fn empty_candidates_rejected() {
        let (s, mut c, cat) = fixture();
        c.candidates.clear();
        assert!(render_basic_prompt(&s, &c, &cat, Domain::Movie).is_err());
    }

    #[test]
    fn unknown_item_named() {
        let (mut s, c, cat) = fixture();
        s.items.push("ghost".into());
        match render_basic_prompt(&s, &c, &cat, Domain::Movie) {
            Err(Error::UnknownItem(id)) => assert_eq!(id, "ghost"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hint_clause_appended() {
        let (s, c, cat) = fixture();
        let base = render_basic_prompt(&s, &c, &cat, Domain::Movie).unwrap();
        let hinted = render_hint_prompt(&s, &c, &cat, Domain::Movie, "Consider the release years of movies.").unwrap();
        assert_eq!(hinted.text, format!("{} Hint: Consider the release years of movies.", base.text));
        assert_eq!(hinted.kind, PromptKind::HintEnhanced);

        let blank = render_hint_prompt(&s, &c, &cat, Domain::Movie, "  ").unwrap();
        assert_eq!(blank.text, base.text);

        let other = render_hint_prompt(&s, &c, &cat, Domain::Movie, "Focus on comedy.").unwrap();
        assert_eq!(&other.text[..base.text.len()], base.text);
        assert_ne!(other.text, hinted.text);
    }

    #[test]
    fn similarity_prompt_lists() {
        let one = render_similarity_prompt("A", &["B"]).unwrap();
        assert_eq!(one.text, "Does hint [A] convey a similar idea for these hints: [B]? Return 1 if true, else return 0.");
        let three = render_similarity_prompt("A", &["B", "C", "D"]).unwrap();
        assert!(three.text.contains("[B; C; D]"));
        assert_eq!(three, render_similarity_prompt("A", &["B", "C", "D"]).unwrap());
        assert!(render_similarity_prompt("A", &[]).is_err());
    }

    #[test]
    fn reflection_prompts() {
        let p2 = render_mistakes_prompt("P1", "1. Casino Royale\n2. Batman");
        assert!(p2.text.starts_with("Question: P1\nChatGPT: 1. Casino Royale"));
        assert!(p2.text.ends_with(MISTAKES_INSTRUCTION));
        let p3 = render_causes_prompt("Aladdin");
        assert!(p3.text.starts_with("The correct answer is Aladdin. Analyze why ChatGPT missed"));
        assert_eq!(render_summarize_prompt().text, HINTS_INSTRUCTION);
    }
}
