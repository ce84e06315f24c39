use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::library::{ModeTemplate, BRANDS, MODE_LIBRARY, TITLE_ADJECTIVES, TITLE_NOUNS};
use crate::data::{CandidateSet, Catalog, Item, Session};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::llm::MAX_RANKED;
use crate::seed::{derive_seed, rng_for, stable_hash, unit_interval};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub attribute: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorMode {
    pub mode_id: usize,
    pub tag: String,
    pub description: String,
    /// A session triggers the mode when this is the plurality value of the
    /// attribute over its history.
    pub trigger: Trigger,
    pub correcting_tag: String,
}

/// Hint text containing a token that starts with `pattern` carries the tag of
/// `mode_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagPattern {
    pub pattern: String,
    pub mode_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub error_modes: Vec<ErrorMode>,
    pub hint_tag_map: Vec<TagPattern>,
    /// Chance that an uncorrected, non-popular session still ranks the
    /// target in the top 10.
    pub base_skill: f64,
    pub seed: u64,
    /// A correcting hint places the target somewhere in `1..=corrected_max_rank`.
    pub corrected_max_rank: usize,
    /// Share of sessions whose target is so popular the basic prompt already
    /// ranks it first, whatever the hint.
    pub popular_fraction: f64,
}

impl SimScenario {
    /// Scenario over the first `num_modes` library entries.
    pub fn from_library(num_modes: usize, base_skill: f64, seed: u64) -> Result<Self> {
        if num_modes == 0 || num_modes > MODE_LIBRARY.len() {
            return Err(Error::invalid(format!("num_modes must be in 1..={}", MODE_LIBRARY.len())));
        }
        let templates = &MODE_LIBRARY[..num_modes];
        Ok(Self {
            error_modes: templates
                .iter()
                .enumerate()
                .map(|(mode_id, t)| ErrorMode {
                    mode_id,
                    tag: t.tag.to_string(),
                    description: t.description.to_string(),
                    trigger: Trigger { attribute: "genre".into(), value: t.genre.into() },
                    correcting_tag: t.tag.to_string(),
                })
                .collect(),
            hint_tag_map: templates
                .iter()
                .enumerate()
                .map(|(mode_id, t)| TagPattern { pattern: t.stem.to_string(), mode_id })
                .collect(),
            base_skill,
            seed,
            corrected_max_rank: 3,
            popular_fraction: 0.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for m in &self.error_modes {
            if !ids.insert(m.mode_id) {
                return Err(Error::invalid(format!("duplicate mode id {}", m.mode_id)));
            }
        }
        for p in &self.hint_tag_map {
            if !ids.contains(&p.mode_id) || p.pattern.trim().is_empty() {
                return Err(Error::invalid(format!("bad hint tag pattern `{}`", p.pattern)));
            }
        }
        if !(0.0..=1.0).contains(&self.base_skill) || !(0.0..=1.0).contains(&self.popular_fraction) {
            return Err(Error::invalid("base_skill and popular_fraction must lie in [0, 1]"));
        }
        if self.corrected_max_rank == 0 || self.corrected_max_rank > MAX_RANKED {
            return Err(Error::invalid("corrected_max_rank must be in 1..=10"));
        }
        Ok(())
    }

    pub fn mode(&self, mode_id: usize) -> Option<&ErrorMode> {
        self.error_modes.iter().find(|m| m.mode_id == mode_id)
    }

    /// Mode tags a hint carries.
    pub fn hint_tags(&self, hint: &str) -> BTreeSet<usize> {
        let tokens = tokens(hint);
        self.hint_tag_map
            .iter()
            .filter(|p| {
                let pat = p.pattern.to_lowercase();
                tokens.iter().any(|t| t.starts_with(&pat))
            })
            .map(|p| p.mode_id)
            .collect()
    }

    /// The mode a session triggers, if any. Ties in the plurality go to the
    /// mode listed first.
    pub fn session_mode(&self, history: &[String], catalog: &Catalog) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for m in &self.error_modes {
            let count = history
                .iter()
                .filter_map(|id| catalog.get(id))
                .filter(|item| item.attributes.get(&m.trigger.attribute) == Some(&m.trigger.value))
                .count();
            if count > 0 && best.is_none_or(|(_, c)| count > c) {
                best = Some((m.mode_id, count));
            }
        }
        // The triggering value must be the plurality over all values of the
        // attribute, not just over mode values.
        let (mode_id, count) = best?;
        let attr = &self.mode(mode_id)?.trigger.attribute;
        let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
        for item in history.iter().filter_map(|id| catalog.get(id)) {
            if let Some(v) = item.attributes.get(attr) {
                *tally.entry(v.as_str()).or_default() += 1;
            }
        }
        (tally.values().all(|&c| c <= count)).then_some(mode_id)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let s: SimScenario = serde_json::from_slice(&bytes)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Lowercased alphanumeric tokens.
pub(crate) fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// What the simulated recommender does for one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOutcome {
    pub mode: Option<usize>,
    pub base_rank: Option<usize>,
    pub rank: Option<usize>,
}

fn ranking_key(history: &[String], target: Option<&str>, candidates: &[String], seed: u64) -> u64 {
    let seed = seed.to_le_bytes();
    let mut parts: Vec<&[u8]> = vec![&seed[..], b"history"];
    parts.extend(history.iter().map(|s| s.as_bytes()));
    parts.push(b"target");
    parts.push(target.unwrap_or("").as_bytes());
    parts.push(b"candidates");
    parts.extend(candidates.iter().map(|s| s.as_bytes()));
    stable_hash(parts)
}

fn sub(key: u64, label: &str) -> u64 {
    derive_seed(key, label)
}

/// Where the target lands for a prompt. The basic outcome depends only on
/// the session and candidates; a hint can only pull the target up, and only
/// when it carries the session mode's tag.
pub fn simulate_outcome(
    history: &[String],
    target: Option<&str>,
    candidates: &[String],
    hint: Option<&str>,
    catalog: &Catalog,
    scenario: &SimScenario,
) -> SimOutcome {
    let mode = scenario.session_mode(history, catalog);
    let in_pool = target.is_some_and(|t| candidates.iter().any(|c| c == t));
    if !in_pool {
        return SimOutcome { mode, base_rank: None, rank: None };
    }
    let key = ranking_key(history, target, candidates, scenario.seed);
    let popular = unit_interval(stable_hash([&scenario.seed.to_le_bytes()[..], b"popular", target.unwrap_or("").as_bytes()]))
        < scenario.popular_fraction;
    let base_rank = if popular {
        Some(1)
    } else if unit_interval(sub(key, "base")) < scenario.base_skill {
        Some(1 + (sub(key, "base-rank") % MAX_RANKED as u64) as usize)
    } else {
        None
    };
    let mut rank = base_rank;
    if let (Some(m), Some(h)) = (mode, hint) {
        let tags = scenario.hint_tags(h);
        if tags.contains(&m) && unit_interval(sub(key, "correct")) < 1.0 / tags.len() as f64 {
            let planted = 1 + (sub(key, "planted") % scenario.corrected_max_rank as u64) as usize;
            rank = Some(rank.map_or(planted, |r| r.min(planted)));
        }
    }
    SimOutcome { mode, base_rank, rank }
}

/// Numbered top-10 reply in the shape the real parser expects.
pub fn render_ranking(
    history: &[String],
    target: Option<&str>,
    candidates: &[String],
    rank: Option<usize>,
    catalog: &Catalog,
    scenario: &SimScenario,
) -> String {
    let key = ranking_key(history, target, candidates, scenario.seed);
    let mut others: Vec<&String> = candidates.iter().filter(|c| Some(c.as_str()) != target).collect();
    others.shuffle(&mut rng_for(key, "order"));
    let mut list: Vec<&str> = others.iter().map(|s| s.as_str()).collect();
    list.truncate(MAX_RANKED);
    if let (Some(t), Some(r)) = (target, rank) {
        if list.len() == MAX_RANKED {
            list.pop();
        }
        list.insert((r - 1).min(list.len()), t);
    }
    list.iter()
        .enumerate()
        .map(|(i, id)| format!("{}. {}", i + 1, catalog.title(id).unwrap_or(id)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Simulated recommender reply for `session` (its target must be set for a
/// hit to be possible).
pub fn simulate_ranking(
    session: &Session,
    candidates: &CandidateSet,
    hint: Option<&str>,
    catalog: &Catalog,
    scenario: &SimScenario,
) -> String {
    let target = session.target.as_deref();
    let out = simulate_outcome(&session.items, target, &candidates.candidates, hint, catalog, scenario);
    render_ranking(&session.items, target, &candidates.candidates, out.rank, catalog, scenario)
}

/// 1 iff the normalized-token Jaccard similarity is at least 0.5 or both
/// hints carry a common mode tag.
pub fn simulate_similarity_judge(h1: &str, h2: &str, scenario: &SimScenario) -> u8 {
    let a: BTreeSet<String> = tokens(h1).into_iter().collect();
    let b: BTreeSet<String> = tokens(h2).into_iter().collect();
    let union = a.union(&b).count();
    let jaccard = if union == 0 { 1.0 } else { a.intersection(&b).count() as f64 / union as f64 };
    let shared_tag = !scenario.hint_tags(h1).is_disjoint(&scenario.hint_tags(h2));
    (jaccard >= 0.5 || shared_tag) as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub num_items: usize,
    pub num_sessions: usize,
    pub num_modes: usize,
    pub seed: u64,
    pub base_skill: f64,
    pub popular_fraction: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability each history item comes from the session's mode genre.
    pub purity: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            num_items: 1000,
            num_sessions: 2000,
            num_modes: 5,
            seed: 0,
            base_skill: 0.2,
            popular_fraction: 0.0,
            min_len: 3,
            max_len: 6,
            purity: 0.8,
        }
    }
}

/// A generated catalog, sessions with targets, and the scenario that drives
/// the simulated recommender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimWorld {
    pub catalog: Catalog,
    pub sessions: Vec<Session>,
    pub scenario: SimScenario,
}

impl SimWorld {
    pub fn session_mode(&self, session: &Session) -> Option<usize> {
        self.scenario.session_mode(&session.items, &self.catalog)
    }

    /// Best single action for a session: the hint carrying the session mode's
    /// tag and the fewest other tags; 0 when no hint matches.
    pub fn oracle_action(&self, session: &Session, kb: &KnowledgeBase) -> usize {
        let Some(mode) = self.session_mode(session) else { return 0 };
        kb.hints
            .iter()
            .filter_map(|h| {
                let tags = self.scenario.hint_tags(&h.text);
                tags.contains(&mode).then_some((tags.len(), h.hint_id))
            })
            .min()
            .map_or(0, |(_, id)| id + 1)
    }

    /// Canonical correcting hint for every mode plus `distractors` stem-free
    /// hints, in that order.
    pub fn canonical_hints(&self, distractors: usize) -> Vec<String> {
        let mut out: Vec<String> = self
            .scenario
            .error_modes
            .iter()
            .filter_map(|m| MODE_LIBRARY.iter().find(|t| t.tag == m.tag))
            .map(|t| t.paraphrases[0].to_string())
            .collect();
        out.extend(super::library::DISTRACTOR_HINTS.iter().take(distractors).map(|s| s.to_string()));
        out
    }
}

pub fn generate_synthetic_world(num_items: usize, num_sessions: usize, num_modes: usize, seed: u64) -> Result<SimWorld> {
    generate_world(&WorldConfig { num_items, num_sessions, num_modes, seed, ..WorldConfig::default() })
}

pub fn generate_world(cfg: &WorldConfig) -> Result<SimWorld> {
    let mut scenario = SimScenario::from_library(cfg.num_modes, cfg.base_skill, cfg.seed)?;
    scenario.popular_fraction = cfg.popular_fraction;
    scenario.validate()?;
    if cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(Error::invalid("need 1 <= min_len <= max_len"));
    }
    if !(0.0..=1.0).contains(&cfg.purity) {
        return Err(Error::invalid("purity must lie in [0, 1]"));
    }
    let per_genre = cfg.num_items / cfg.num_modes;
    if per_genre < cfg.max_len + 2 {
        return Err(Error::CatalogTooSmall { needed: (cfg.max_len + 2) * cfg.num_modes, available: cfg.num_items });
    }
    let templates: &[ModeTemplate] = &MODE_LIBRARY[..cfg.num_modes];

    let mut rng = rng_for(cfg.seed, "world-items");
    let mut items = Vec::with_capacity(cfg.num_items);
    let mut by_genre: Vec<Vec<String>> = vec![Vec::new(); cfg.num_modes];
    for i in 0..cfg.num_items {
        let g = i % cfg.num_modes;
        let id = format!("i{i:05}");
        let title = format!(
            "{} {} {}",
            TITLE_ADJECTIVES[rng.gen_range(0..TITLE_ADJECTIVES.len())],
            TITLE_NOUNS[rng.gen_range(0..TITLE_NOUNS.len())],
            i + 1
        );
        let mut attributes = BTreeMap::new();
        attributes.insert("genre".to_string(), templates[g].genre.to_string());
        attributes.insert("year".to_string(), rng.gen_range(1950..=2020).to_string());
        attributes.insert("brand".to_string(), BRANDS[rng.gen_range(0..BRANDS.len())].to_string());
        by_genre[g].push(id.clone());
        items.push(Item { item_id: id, title, attributes });
    }
    let catalog = Catalog::new(items)?;
    let all_ids: Vec<String> = catalog.items().iter().map(|i| i.item_id.clone()).collect();

    let mut rng = rng_for(cfg.seed, "world-sessions");
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut sessions = Vec::with_capacity(cfg.num_sessions);
    let mut attempts = 0usize;
    while sessions.len() < cfg.num_sessions {
        attempts += 1;
        if attempts > 100 * cfg.num_sessions + 1000 {
            return Err(Error::invalid("could not generate enough distinct sessions"));
        }
        let mode = rng.gen_range(0..cfg.num_modes);
        let len = rng.gen_range(cfg.min_len..=cfg.max_len);
        let mut history: Vec<String> = Vec::with_capacity(len);
        while history.len() < len {
            let pool = if rng.gen_bool(cfg.purity) { &by_genre[mode] } else { &all_ids };
            let pick = pool[rng.gen_range(0..pool.len())].clone();
            if !history.contains(&pick) {
                history.push(pick);
            }
        }
        if scenario.session_mode(&history, &catalog) != Some(mode) || seen.contains(&history) {
            continue;
        }
        let target = loop {
            let t = &by_genre[mode][rng.gen_range(0..by_genre[mode].len())];
            if !history.contains(t) {
                break t.clone();
            }
        };
        seen.insert(history.clone());
        sessions.push(Session::new(format!("w{:05}", sessions.len()), history).with_target(target));
    }
    Ok(SimWorld { catalog, sessions, scenario })
}
