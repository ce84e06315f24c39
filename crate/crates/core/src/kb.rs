//! The hint knowledge base and its admission gates.
//!
//! A reflected hint is admitted only if it turns its source session's miss
//! into a hit (effectiveness) and the similarity judge finds it distinct from
//! every stored hint (non-redundancy).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{sample_candidate_set, Catalog, CandidateSet, Session};
use crate::error::{Error, Result};
use crate::llm::{parse_binary_flag, render_similarity_prompt, ChatTurn, LlmGateway, RankedOutput};
use crate::recommender::Recommender;
use crate::reflection::{run_reflection_chain, ReflectionTrace};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub session_id: String,
    pub base_rank: Option<usize>,
    pub enhanced_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub hint_id: usize,
    pub text: String,
    pub source_session: String,
    #[serde(default)]
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub capacity: usize,
    pub hints: Vec<Hint>,
}

impl KnowledgeBase {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, hints: Vec::new() }
    }

    /// Build directly from texts (ids assigned densely, no evidence).
    pub fn from_texts<S: AsRef<str>>(capacity: usize, texts: &[S]) -> Result<Self> {
        let mut kb = Self::new(capacity);
        for t in texts {
            kb.push(t.as_ref(), "manual", Vec::new())?;
        }
        Ok(kb)
    }

    pub fn len(&self) -> usize {
        self.hints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hints.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.hints.len() >= self.capacity
    }

    pub fn texts(&self) -> Vec<&str> {
        self.hints.iter().map(|h| h.text.as_str()).collect()
    }

    pub fn get(&self, hint_id: usize) -> Option<&Hint> {
        self.hints.get(hint_id)
    }

    fn push(&mut self, text: &str, source: &str, evidence: Vec<Evidence>) -> Result<usize> {
        if self.is_full() {
            return Err(Error::KnowledgeBaseFull(self.capacity));
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::invalid("hint text is empty"));
        }
        let hint_id = self.hints.len();
        self.hints.push(Hint {
            hint_id,
            text: text.to_string(),
            source_session: source.to_string(),
            evidence,
        });
        Ok(hint_id)
    }

    /// Content hash over capacity and hint texts; policies are bound to it.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.capacity as u64).to_le_bytes());
        for hint in &self.hints {
            h.update((hint.text.len() as u64).to_le_bytes());
            h.update(hint.text.as_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let kb: KnowledgeBase = serde_json::from_slice(&bytes)?;
        if kb.hints.len() > kb.capacity {
            return Err(Error::invalid("knowledge base exceeds its capacity"));
        }
        if kb.hints.iter().enumerate().any(|(i, h)| h.hint_id != i) {
            return Err(Error::invalid("hint ids must be dense and ordered"));
        }
        Ok(kb)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Pairwise "do these hints say the same thing" oracle.
pub trait SimilarityJudge: Sync {
    /// Raw judge reply for one (candidate, existing) pair.
    fn judge(&self, candidate: &str, existing: &str) -> Result<String>;
}

impl SimilarityJudge for LlmGateway {
    fn judge(&self, candidate: &str, existing: &str) -> Result<String> {
        let prompt = render_similarity_prompt(candidate, &[existing])?;
        self.complete_chat(&[ChatTurn::user(prompt.text)])
    }
}

/// Whether `hint` flips this session from miss to hit, plus the enhanced output.
pub fn is_effective(
    hint: &str,
    session: &Session,
    candidates: &CandidateSet,
    base_output: &RankedOutput,
    recommender: &Recommender<'_>,
) -> Result<(bool, RankedOutput)> {
    let target = session.require_target()?;
    let enhanced = recommender.rank(session, candidates, Some(hint))?;
    let hit_now = enhanced.rank_of(target).is_some();
    let hit_before = base_output.rank_of(target).is_some();
    Ok((hit_now && !hit_before, enhanced))
}

/// True iff the judge calls the candidate similar to at least one stored hint.
/// Unparseable replies count as similar.
pub fn is_redundant(candidate_hint: &str, kb: &KnowledgeBase, judge: &dyn SimilarityJudge) -> Result<bool> {
    let mut total = 0u32;
    for h in &kb.hints {
        let reply = judge.judge(candidate_hint, &h.text)?;
        total += match parse_binary_flag(&reply) {
            Ok(v) => v as u32,
            Err(_) => {
                log::warn!("unparseable similarity reply {reply:?}; treating as similar");
                1
            }
        };
        if total > 0 {
            break;
        }
    }
    Ok(total > 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Admitted,
    Ineffective,
    Redundant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionDecision {
    pub session_id: String,
    pub hint: String,
    pub verdict: Verdict,
    pub hint_id: Option<usize>,
    pub enhanced_rank: Option<usize>,
}

/// Admission gate switch; `Off` reproduces the unfiltered ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionFilter {
    #[default]
    On,
    Off,
}

#[allow(clippy::too_many_arguments)]
pub fn try_admit(
    candidate_hint: &str,
    session: &Session,
    candidates: &CandidateSet,
    base_output: &RankedOutput,
    kb: &mut KnowledgeBase,
    recommender: &Recommender<'_>,
    judge: &dyn SimilarityJudge,
    filter: AdmissionFilter,
) -> Result<AdmissionDecision> {
    if kb.is_full() {
        return Err(Error::KnowledgeBaseFull(kb.capacity));
    }
    let target = session.require_target()?;
    let decision = |verdict, hint_id, enhanced_rank| AdmissionDecision {
        session_id: session.session_id.clone(),
        hint: candidate_hint.to_string(),
        verdict,
        hint_id,
        enhanced_rank,
    };
    if filter == AdmissionFilter::Off {
        let evidence = vec![Evidence {
            session_id: session.session_id.clone(),
            base_rank: base_output.rank_of(target),
            enhanced_rank: None,
        }];
        let id = kb.push(candidate_hint, &session.session_id, evidence)?;
        return Ok(decision(Verdict::Admitted, Some(id), None));
    }

    let (effective, enhanced) = is_effective(candidate_hint, session, candidates, base_output, recommender)?;
    let enhanced_rank = enhanced.rank_of(target);
    if !effective {
        log::debug!("reject (ineffective) {candidate_hint:?}");
        return Ok(decision(Verdict::Ineffective, None, enhanced_rank));
    }
    if is_redundant(candidate_hint, kb, judge)? {
        log::debug!("reject (redundant) {candidate_hint:?}");
        return Ok(decision(Verdict::Redundant, None, enhanced_rank));
    }
    let evidence = vec![Evidence {
        session_id: session.session_id.clone(),
        base_rank: base_output.rank_of(target),
        enhanced_rank,
    }];
    let id = kb.push(candidate_hint, &session.session_id, evidence)?;
    log::info!("admitted hint {id}: {candidate_hint:?}");
    Ok(decision(Verdict::Admitted, Some(id), enhanced_rank))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KbBuildConfig {
    pub capacity: usize,
    pub candidate_size: usize,
    /// Sessions to sample before giving up; `None` means 50 x capacity.
    pub sample_budget: Option<usize>,
    pub filter: AdmissionFilter,
    pub seed: u64,
}

impl Default for KbBuildConfig {
    fn default() -> Self {
        Self {
            capacity: 20,
            candidate_size: 50,
            sample_budget: None,
            filter: AdmissionFilter::On,
            seed: 0,
        }
    }
}

impl KbBuildConfig {
    pub fn budget(&self) -> usize {
        self.sample_budget.unwrap_or(50 * self.capacity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbBuildOutcome {
    pub kb: KnowledgeBase,
    pub traces: Vec<ReflectionTrace>,
    pub decisions: Vec<AdmissionDecision>,
    pub sessions_sampled: usize,
    pub misses: usize,
    pub warning: Option<String>,
}

/// Sample training sessions until the knowledge base is full or the sample
/// budget runs out; every miss is reflected on and its hints pass the gates.
pub fn build_knowledge_base(
    train_sessions: &[Session],
    catalog: &Catalog,
    config: &KbBuildConfig,
    recommender: &Recommender<'_>,
    judge: &dyn SimilarityJudge,
) -> Result<KbBuildOutcome> {
    if config.capacity == 0 {
        return Err(Error::invalid("knowledge base capacity must be >= 1"));
    }
    let pool: Vec<&Session> = train_sessions.iter().filter(|s| s.target.is_some()).collect();
    let mut kb = KnowledgeBase::new(config.capacity);
    let mut traces = Vec::new();
    let mut decisions = Vec::new();
    let mut sampled = 0;
    let mut misses = 0;
    let budget = config.budget();
    let cand_seed = derive_seed(config.seed, "kb-candidates");

    let mut order: Vec<usize> = Vec::new();
    let mut round = 0u64;
    'outer: while !kb.is_full() && sampled < budget && !pool.is_empty() {
        if order.is_empty() {
            use rand::seq::SliceRandom;
            order = (0..pool.len()).collect();
            order.shuffle(&mut rng_for(config.seed, &format!("kb-order/{round}")));
            order.reverse();
            round += 1;
        }
        let session = pool[order.pop().expect("refilled above")];
        sampled += 1;
        let candidates = sample_candidate_set(session, catalog, config.candidate_size, cand_seed)?;
        let base = recommender.rank(session, &candidates, None)?;
        if base.rank_of(session.require_target()?).is_some() {
            continue;
        }
        misses += 1;
        let trace = run_reflection_chain(session, &candidates, &base, recommender)?;
        for hint in &trace.candidate_hints {
            if kb.is_full() {
                traces.push(trace.clone());
                break 'outer;
            }
            decisions.push(try_admit(hint, session, &candidates, &base, &mut kb, recommender, judge, config.filter)?);
        }
        traces.push(trace);
    }
    let warning = (!kb.is_full()).then(|| {
        let msg = format!(
            "sample budget exhausted after {sampled} sessions with {}/{} hints admitted",
            kb.len(),
            kb.capacity
        );
        log::warn!("{msg}");
        msg
    });
    Ok(KbBuildOutcome {
        kb,
        traces,
        decisions,
        sessions_sampled: sampled,
        misses,
        warning,
    })
}
