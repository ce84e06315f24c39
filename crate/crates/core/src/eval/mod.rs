//! Leave-one-out evaluation, ablation variants and significance testing.

mod metrics;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use metrics::{hr_at_k, ndcg_at_k, Metric};

use crate::agent::ActionSelector;
use crate::data::{sample_candidate_set, Catalog, Session};
use crate::encoder::{encode_session, EncoderSpec};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::recommender::Recommender;
use crate::seed::{derive_seed, rng_for};

/// Which prompt an evaluation run renders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Basic prompt, no hint.
    NoHint,
    /// One knowledge-base hint drawn uniformly per session.
    RandomHint,
    /// Every knowledge-base hint concatenated in id order.
    AllHints,
    /// Greedy action of a trained selector.
    Agent,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::NoHint, Variant::RandomHint, Variant::AllHints, Variant::Agent];

    /// Command-line spelling.
    pub fn cli_name(self) -> &'static str {
        match self {
            Variant::NoHint => "no-hint",
            Variant::RandomHint => "random",
            Variant::AllHints => "all",
            Variant::Agent => "agent",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-hint" | "no_hint" => Ok(Variant::NoHint),
            "random" | "random_hint" | "random-hint" => Ok(Variant::RandomHint),
            "all" | "all_hints" | "all-hints" => Ok(Variant::AllHints),
            "agent" => Ok(Variant::Agent),
            _ => Err(Error::invalid(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub metrics: Vec<Metric>,
    pub test_sample_size: usize,
    pub candidate_size: usize,
    pub variant: Variant,
    pub runs: usize,
    /// Per-run seeds; derived from `sample_seed` when empty.
    pub seeds: Vec<u64>,
    /// Seed of the fixed test subsample.
    pub sample_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            metrics: Metric::DEFAULT_SET.to_vec(),
            test_sample_size: 2000,
            candidate_size: 50,
            variant: Variant::NoHint,
            runs: 5,
            seeds: Vec::new(),
            sample_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidate_size < 2 {
            return Err(Error::invalid("candidate_size must be >= 2"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("runs must be >= 1"));
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.runs {
            return Err(Error::invalid(format!("{} seeds given for {} runs", self.seeds.len(), self.runs)));
        }
        if self.metrics.is_empty() {
            return Err(Error::invalid("no metrics configured"));
        }
        Ok(())
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.runs).map(|r| derive_seed(self.sample_seed, &format!("eval-run/{r}"))).collect()
        } else {
            self.seeds.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub mean: f64,
    /// Sample standard deviation of the per-run means (0 for a single run).
    pub std: f64,
    pub per_run: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub run: usize,
    pub seed: u64,
    pub session_id: String,
    pub variant: Variant,
    /// Hint used, if any. `AllHints` rows leave this empty.
    pub hint_id: Option<usize>,
    /// 1-based rank of the target in the parsed list; `None` is a miss.
    pub target_rank: Option<usize>,
    /// Nothing in the reply matched a candidate.
    pub parse_warning: bool,
    /// Aligned with `EvalConfig::metrics`.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub sessions_evaluated: usize,
    pub metrics: Vec<MetricSummary>,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn summary(&self, metric: Metric) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric)
    }

    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.summary(metric).map(|m| m.mean)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// One line per evaluated (run, session).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = ["run", "seed", "session_id", "variant", "hint_id", "target_rank", "parse_warning"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.config.metrics.iter().map(Metric::to_string));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.run.to_string(),
                row.seed.to_string(),
                row.session_id.clone(),
                row.variant.to_string(),
                row.hint_id.map(|h| h.to_string()).unwrap_or_default(),
                row.target_rank.map(|r| r.to_string()).unwrap_or_default(),
                row.parse_warning.to_string(),
            ];
            rec.extend(row.scores.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Fixed test subsample shared by every run.
pub fn sample_test_sessions(test: &[Session], size: usize, seed: u64) -> Vec<&Session> {
    let mut idx: Vec<usize> = (0..test.len()).collect();
    if size < test.len() {
        idx.shuffle(&mut rng_for(seed, "eval-sample"));
        idx.truncate(size);
    }
    idx.into_iter().map(|i| &test[i]).collect()
}

/// Score one variant over `runs` x sampled sessions.
///
/// Each run re-seeds negative sampling; the session subsample stays fixed.
/// Sessions are scored in parallel and reduced in subsample order, so the
/// report does not depend on scheduling.
pub fn evaluate(
    test_sessions: &[Session],
    catalog: &Catalog,
    kb: Option<&KnowledgeBase>,
    selector: Option<&dyn ActionSelector>,
    encoder: &EncoderSpec,
    recommender: &Recommender<'_>,
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let variant = config.variant;
    let kb_needed = matches!(variant, Variant::RandomHint | Variant::AllHints | Variant::Agent);
    let kb = match (kb, kb_needed) {
        (Some(kb), _) => Some(kb),
        (None, true) => return Err(Error::invalid(format!("variant `{variant}` needs a knowledge base"))),
        (None, false) => None,
    };
    if variant == Variant::Agent && selector.is_none() {
        return Err(Error::invalid("variant `agent` needs a policy"));
    }
    if matches!(variant, Variant::RandomHint | Variant::AllHints) && kb.is_some_and(KnowledgeBase::is_empty) {
        return Err(Error::invalid(format!("variant `{variant}` needs a non-empty knowledge base")));
    }
    let sample = sample_test_sessions(test_sessions, config.test_sample_size, config.sample_seed);
    if sample.is_empty() {
        return Err(Error::TooFewSessions { needed: 1, got: 0 });
    }
    let all_hints = kb.map(|kb| kb.texts().join(" "));

    // Agent actions depend only on the session, so pick them once.
    let agent_actions: Option<Vec<usize>> = match (variant, selector) {
        (Variant::Agent, Some(sel)) => Some(
            sample
                .par_iter()
                .map(|s| {
                    let z = encode_session(s, catalog, encoder)?;
                    sel.select(s, &z)
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };

    let seeds = config.run_seeds();
    let mut rows = Vec::with_capacity(seeds.len() * sample.len());
    for (run, &seed) in seeds.iter().enumerate() {
        let run_rows = sample
            .par_iter()
            .enumerate()
            .map(|(k, session)| {
                let target = session.require_target()?;
                let candidates = sample_candidate_set(session, catalog, config.candidate_size, seed)?;
                let (hint_id, hint): (Option<usize>, Option<&str>) = match variant {
                    Variant::NoHint => (None, None),
                    Variant::RandomHint => {
                        let kb = kb.expect("checked above");
                        let id = rng_for(seed, &format!("random-hint/{}", session.session_id)).gen_range(0..kb.len());
                        (Some(id), Some(kb.hints[id].text.as_str()))
                    }
                    Variant::AllHints => (None, all_hints.as_deref()),
                    Variant::Agent => {
                        let kb = kb.expect("checked above");
                        let action = agent_actions.as_ref().expect("computed above")[k];
                        if action == 0 {
                            (None, None)
                        } else {
                            let h = kb
                                .get(action - 1)
                                .ok_or_else(|| Error::invalid(format!("policy chose action {action} beyond the knowledge base")))?;
                            (Some(h.hint_id), Some(h.text.as_str()))
                        }
                    }
                };
                let ranked = recommender.rank(session, &candidates, hint)?;
                Ok(EvalRow {
                    run,
                    seed,
                    session_id: session.session_id.clone(),
                    variant,
                    hint_id,
                    target_rank: ranked.rank_of(target),
                    parse_warning: ranked.parse_warning,
                    scores: config.metrics.iter().map(|m| m.score(&ranked, target)).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.extend(run_rows);
    }

    let per_session = sample.len() as f64;
    let metrics = config
        .metrics
        .iter()
        .enumerate()
        .map(|(j, &metric)| {
            let per_run: Vec<f64> = (0..seeds.len())
                .map(|r| rows[r * sample.len()..(r + 1) * sample.len()].iter().map(|row| row.scores[j]).sum::<f64>() / per_session)
                .collect();
            let mean = per_run.iter().sum::<f64>() / per_run.len() as f64;
            let std = if per_run.len() > 1 {
                (per_run.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (per_run.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            MetricSummary { metric, mean, std, per_run }
        })
        .collect();

    Ok(EvalReport {
        config: config.clone(),
        sessions_evaluated: sample.len(),
        metrics,
        rows,
    })
}

/// Two-sided one-sample t-test on paired differences, df = n - 1.
pub fn paired_t_test(diffs: &[f64]) -> Result<(f64, f64)> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs at least two differences"));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if mean == 0.0 {
        return Ok((0.0, 1.0));
    }
    if var == 0.0 {
        return Ok((mean.signum() * f64::INFINITY, 0.0));
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let p = 2.0 * dist.cdf(-t.abs());
    Ok((t, p.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-sided p-value by Simpson integration of the t density.
    fn t_pvalue_oracle(t: f64, df: f64) -> f64 {
        let ln_gamma = |x: f64| statrs::function::gamma::ln_gamma(x);
        let c = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp() / (df * std::f64::consts::PI).sqrt();
        let pdf = |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        let n = 200_000;
        let h = t.abs() / n as f64;
        let mut s = pdf(0.0) + pdf(t.abs());
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(i as f64 * h);
        }
        1.0 - 2.0 * s * h / 3.0
    }

    #[test]
    fn t_test_known_values() {
        let (t, p) = paired_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((t - 4.2426).abs() < 1e-3);
        assert!((p - 0.013).abs() < 1e-3);
        assert!((p - t_pvalue_oracle(t, 4.0)).abs() < 1e-8);
    }

    #[test]
    fn t_test_symmetry_and_edges() {
        let (t1, p1) = paired_t_test(&[0.3, -0.1, 0.5, 0.2]).unwrap();
        let (t2, p2) = paired_t_test(&[-0.3, 0.1, -0.5, -0.2]).unwrap();
        assert_eq!(t1, -t2);
        assert_eq!(p1, p2);
        assert_eq!(paired_t_test(&[0.0, 0.0, 0.0]).unwrap().1, 1.0);
        assert_eq!(paired_t_test(&[0.2, 0.2]).unwrap().1, 0.0);
        assert!(paired_t_test(&[1.0]).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.cli_name().parse::<Variant>().unwrap(), v);
        }
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn subsample_is_fixed_and_bounded() {
        let sessions: Vec<Session> = (0..50).map(|i| Session::new(format!("s{i}"), vec!["a".into()])).collect();
        let a: Vec<_> = sample_test_sessions(&sessions, 10, 3).iter().map(|s| s.session_id.clone()).collect();
        let b: Vec<_> = sample_test_sessions(&sessions, 10, 3).iter().map(|s| s.session_id.clone()).collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert_eq!(sample_test_sessions(&sessions, 100, 3).len(), 50);
    }
}
