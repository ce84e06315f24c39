//! Turning free-form LLM replies back into structured values.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::data::{Catalog, CandidateSet};
use crate::error::{Error, Result};

pub const MAX_RANKED: usize = 10;

/// A parsed top-k list. Every id is a member of the session's candidate set
/// and appears once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedOutput {
    pub session_id: String,
    pub ranked_item_ids: Vec<String>,
    pub raw_text: String,
    #[serde(default)]
    pub unmatched_lines: Vec<String>,
    /// Set when nothing in the reply could be matched.
    #[serde(default)]
    pub parse_warning: bool,
}

impl RankedOutput {
    /// 1-based rank of `item_id`, if present.
    pub fn rank_of(&self, item_id: &str) -> Option<usize> {
        self.ranked_item_ids.iter().position(|x| x == item_id).map(|p| p + 1)
    }
}

fn year_suffix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(\s*\d{4}\s*\)\s*$").unwrap())
}

fn number_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // a list number at line start, after a semicolon, or after a wide gap
    RE.get_or_init(|| Regex::new(r"(?:^|;\s*|\s{2,})(\d{1,2})[.)]\s+").unwrap())
}

/// Case-fold, drop a trailing "(1999)", strip punctuation and leading/trailing
/// articles.
pub fn normalize_title(title: &str) -> String {
    let lowered = title.trim().to_lowercase();
    let no_year = year_suffix().replace(&lowered, "");
    let cleaned: String = no_year
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let mut tokens: Vec<&str> = cleaned.split_whitespace().collect();
    if tokens.len() > 1 && matches!(tokens[0], "the" | "a" | "an") {
        tokens.remove(0);
    }
    if tokens.len() > 1 && tokens[tokens.len() - 1] == "the" {
        tokens.pop();
    }
    tokens.join(" ")
}

/// Split a reply into its numbered entries. Lines without a leading number
/// are ignored; several entries on one line ("1. A; 2. B") are separated.
pub fn numbered_entries(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in raw.lines() {
        let line = line.trim().trim_start_matches(['-', '*', '•']).trim();
        let marks: Vec<_> = number_marker().captures_iter(line).map(|c| c.get(0).unwrap()).collect();
        if marks.first().map(|m| m.start()) != Some(0) {
            continue;
        }
        for (i, m) in marks.iter().enumerate() {
            let end = marks.get(i + 1).map(|n| n.start()).unwrap_or(line.len());
            let entry = line[m.end()..end].trim().trim_end_matches(';').trim();
            if !entry.is_empty() {
                out.push(entry.to_string());
            }
        }
    }
    out
}

fn entry_variants(entry: &str) -> Vec<String> {
    let stripped = entry.replace("**", "").replace(['"', '“', '”'], "");
    let base = stripped.trim();
    let mut variants = vec![base.to_string()];
    for sep in [" - ", " – ", " — ", ": ", " ("] {
        if let Some(idx) = base.find(sep) {
            variants.push(base[..idx].trim().to_string());
        }
    }
    variants
}

/// Map a numbered reply onto candidate ids. Entries that name no candidate are
/// recorded in `unmatched_lines`; duplicates keep their first position.
pub fn parse_ranked_list(raw: &str, candidates: &CandidateSet, catalog: &Catalog) -> RankedOutput {
    let mut by_title: HashMap<String, &str> = HashMap::new();
    for id in &candidates.candidates {
        if let Some(item) = catalog.get(id) {
            by_title.entry(normalize_title(&item.title)).or_insert(id.as_str());
        }
    }
    let mut ranked: Vec<String> = Vec::new();
    let mut unmatched = Vec::new();
    for entry in numbered_entries(raw) {
        let hit = entry_variants(&entry)
            .iter()
            .find_map(|v| by_title.get(&normalize_title(v)).copied());
        match hit {
            Some(id) => {
                if ranked.len() < MAX_RANKED && !ranked.iter().any(|r| r == id) {
                    ranked.push(id.to_string());
                }
            }
            None => unmatched.push(entry),
        }
    }
    let parse_warning = ranked.is_empty();
    if parse_warning {
        log::warn!("no candidate matched in reply for session {}", candidates.session_id);
    }
    RankedOutput {
        session_id: candidates.session_id.clone(),
        ranked_item_ids: ranked,
        raw_text: raw.to_string(),
        unmatched_lines: unmatched,
        parse_warning,
    }
}

/// 1 iff the first standalone `0`/`1` token in the reply is `1`.
pub fn parse_binary_flag(raw: &str) -> Result<u8> {
    raw.split(|c: char| !c.is_ascii_alphanumeric())
        .find_map(|tok| match tok {
            "0" => Some(0),
            "1" => Some(1),
            _ => None,
        })
        .ok_or_else(|| Error::UnparseableJudge(raw.to_string()))
}
