//! One function per subcommand. Each reads its inputs, runs the pipeline
//! stage and writes a stamped artifact into the output directory.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use re2llm_core::agent::{few_shot_subset, train_agent, ActionSelector, EpisodeStats, PolicyCheckpoint};
use re2llm_core::data::{prepare_dataset, read_jsonl, sample_candidate_set, InteractionRecord, Item};
use re2llm_core::encoder::encode_session;
use re2llm_core::eval::{evaluate, EvalReport, Variant};
use re2llm_core::kb::{build_knowledge_base, AdmissionDecision, KnowledgeBase};
use re2llm_core::llm::{BackendKind, HttpChatBackend, LlmGateway, PromptText, RankedOutput};
use re2llm_core::reflection::ReflectionTrace;
use re2llm_core::sim::{run_closed_loop, simulated_gateway, ClosedLoopConfig, SimWorld};
use re2llm_core::{Catalog, DatasetSplit, Recommender, Session};

use crate::artifact::{self, RunInfo};
use crate::config::Resolved;

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetBody {
    pub catalog: Catalog,
    pub split: DatasetSplit,
    /// Sessions surviving the support filter, before augmentation.
    pub raw_sessions: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KbBody {
    #[serde(flatten)]
    pub kb: KnowledgeBase,
    pub sessions_sampled: usize,
    pub misses: usize,
    pub warning: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KbLogBody {
    pub decisions: Vec<AdmissionDecision>,
    pub traces: Vec<ReflectionTrace>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyBody {
    #[serde(flatten)]
    pub checkpoint: PolicyCheckpoint,
    pub curve: Vec<EpisodeStats>,
    pub warning: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportsBody {
    pub reports: Vec<EvalReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecommendBody {
    pub session_id: String,
    pub action: usize,
    pub hint: Option<String>,
    pub prompt: PromptText,
    pub ranked: RankedOutput,
    pub target: Option<String>,
    pub target_rank: Option<usize>,
}

/// Shared state for one command invocation.
pub struct Ctx<'a> {
    pub resolved: &'a Resolved,
    pub command: &'static str,
}

impl Ctx<'_> {
    fn cfg(&self) -> &crate::config::RunConfig {
        &self.resolved.config
    }

    fn run_info(&self) -> RunInfo {
        RunInfo::new(self.command, self.cfg().seed, &self.resolved.flat)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg().out.join(name)
    }

    fn write<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf> {
        let path = self.out(name);
        artifact::write(&path, &self.run_info(), body)?;
        Ok(path)
    }

    fn dataset(&self) -> Result<DatasetBody> {
        let path = self.cfg().dataset_path();
        Ok(artifact::read::<DatasetBody>(&path).context("loading the prepared dataset (run prepare-data first)")?.body)
    }

    fn kb(&self) -> Result<KnowledgeBase> {
        let path = self.cfg().kb_path();
        Ok(artifact::read::<KnowledgeBase>(&path).context("loading the knowledge base (run build-kb first)")?.body)
    }

    fn policy(&self, kb: &KnowledgeBase) -> Result<re2llm_core::Policy> {
        let path = self.cfg().policy_path();
        let ckpt = PolicyCheckpoint::load(&path, kb)
            .with_context(|| format!("loading policy {} (run train-agent first)", path.display()))?;
        Ok(ckpt.policy()?)
    }

    fn gateway(&self) -> Result<LlmGateway> {
        let profile = self.cfg().llm.profile.clone();
        match profile.backend {
            BackendKind::Http => Ok(LlmGateway::new(HttpChatBackend::from_env(), profile)?),
            BackendKind::Simulated => {
                let path = self.cfg().world_path();
                let world = artifact::read::<SimWorld>(&path)
                    .context("the simulated backend needs a world file (run simulate, or set llm.backend to http)")?
                    .body;
                Ok(simulated_gateway(&world, profile)?)
            }
        }
    }
}

pub fn prepare_data(ctx: &Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg();
    let need = |p: &Option<PathBuf>, key: &str| p.clone().ok_or_else(|| anyhow!("prepare-data needs `{key}`"));
    let interactions: Vec<InteractionRecord> = read_jsonl(need(&cfg.data.interactions, "data.interactions")?)?;
    let items: Vec<Item> = read_jsonl(need(&cfg.data.items, "data.items")?)?;
    let catalog = Catalog::new(items)?;
    let prepared = prepare_dataset(&interactions, &catalog, &cfg.data.prepare)?;
    let split = &prepared.split;
    println!(
        "{} sessions after filtering; train {} samples, validation {}, test {}; {} items",
        prepared.raw_sessions,
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        prepared.catalog.len()
    );
    let path = ctx.write(
        "dataset.json",
        &DatasetBody { catalog: prepared.catalog, split: prepared.split, raw_sessions: prepared.raw_sessions },
    )?;
    println!("dataset: {}", path.display());
    Ok(())
}

pub fn build_kb(ctx: &Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg();
    let data = ctx.dataset()?;
    let gateway = ctx.gateway()?;
    let rec = Recommender::new(&gateway, &data.catalog, cfg.domain);
    let built = build_knowledge_base(&data.split.train, &data.catalog, &cfg.kb.build, &rec, &gateway)?;
    if let Some(w) = &built.warning {
        log::warn!("{w}");
    }
    println!(
        "{} hints admitted from {} sampled sessions ({} misses reflected)",
        built.kb.len(),
        built.sessions_sampled,
        built.misses
    );
    for h in &built.kb.hints {
        println!("  [{}] {}", h.hint_id, h.text);
    }
    let path = ctx.write(
        "kb.json",
        &KbBody {
            kb: built.kb,
            sessions_sampled: built.sessions_sampled,
            misses: built.misses,
            warning: built.warning,
        },
    )?;
    ctx.write("kb_log.json", &KbLogBody { decisions: built.decisions, traces: built.traces })?;
    println!("knowledge base: {}", path.display());
    log_stats(&gateway);
    Ok(())
}

pub fn train(ctx: &Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg();
    let data = ctx.dataset()?;
    let kb = ctx.kb()?;
    let gateway = ctx.gateway()?;
    let rec = Recommender::new(&gateway, &data.catalog, cfg.domain);
    let few = few_shot_subset(&data.split.train, cfg.train.few_shot, cfg.train.config.seed);
    let out = train_agent(&few, &data.catalog, &kb, &cfg.encoder, &rec, &cfg.train.config)?;
    if let Some(w) = &out.warning {
        log::warn!("{w}");
    }
    if let (Some(first), Some(last)) = (out.curve.first(), out.curve.last()) {
        println!(
            "trained {} episodes on {} sessions; mean reward {:.4} -> {:.4}",
            out.episodes_trained,
            few.len(),
            first.mean_reward,
            last.mean_reward
        );
    }
    let body = PolicyBody {
        checkpoint: PolicyCheckpoint::new(&out.policy, &kb, &cfg.train.config, out.episodes_trained),
        curve: out.curve,
        warning: out.warning,
    };
    let path = ctx.write("policy.json", &body)?;
    println!("policy: {}", path.display());
    log_stats(&gateway);
    Ok(())
}

pub fn evaluate_variant(ctx: &Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg();
    let variant = cfg.eval.variant;
    let data = ctx.dataset()?;
    let kb = match variant {
        Variant::NoHint => None,
        _ => Some(ctx.kb()?),
    };
    let policy = match (variant, &kb) {
        (Variant::Agent, Some(kb)) => Some(ctx.policy(kb)?),
        _ => None,
    };
    let gateway = ctx.gateway()?;
    let rec = Recommender::new(&gateway, &data.catalog, cfg.domain);
    let selector = policy.as_ref().map(|p| p as &dyn ActionSelector);
    let report = evaluate(&data.split.test, &data.catalog, kb.as_ref(), selector, &cfg.encoder, &rec, &cfg.eval)?;
    print_report(&report);
    let path = ctx.write(&format!("report-{}.json", variant.cli_name()), &report)?;
    println!("report: {}", path.display());
    log_stats(&gateway);
    Ok(())
}

pub fn recommend(ctx: &Ctx<'_>, session_id: &str) -> Result<()> {
    let cfg = ctx.cfg();
    let data = ctx.dataset()?;
    let session = find_session(&data.split, session_id)?;
    let kb = ctx.kb()?;
    let policy = ctx.policy(&kb)?;
    let gateway = ctx.gateway()?;
    let rec = Recommender::new(&gateway, &data.catalog, cfg.domain);

    let candidates = sample_candidate_set(session, &data.catalog, cfg.eval.candidate_size, cfg.seed)?;
    let z = encode_session(session, &data.catalog, &cfg.encoder)?;
    let action = policy.greedy(&z)?;
    let hint = (action > 0).then(|| kb.hints[action - 1].text.clone());
    let (prompt, ranked) = rec.rank_traced(session, &candidates, hint.as_deref())?;
    let target_rank = session.target.as_deref().and_then(|t| ranked.rank_of(t));

    println!("prompt:\n{}\n", prompt.text);
    match &hint {
        Some(h) => println!("hint (action {action}): {h}\n"),
        None => println!("hint: none (action 0)\n"),
    }
    println!("ranked:");
    for (i, id) in ranked.ranked_item_ids.iter().enumerate() {
        let mark = if session.target.as_deref() == Some(id) { "  <- target" } else { "" };
        println!("{:>3}. {} [{id}]{mark}", i + 1, data.catalog.title(id)?);
    }
    if ranked.parse_warning {
        println!("(no line of the reply matched a candidate)");
    }

    let safe: String = session_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    let body = RecommendBody {
        session_id: session.session_id.clone(),
        action,
        hint,
        prompt,
        ranked,
        target: session.target.clone(),
        target_rank,
    };
    let path = ctx.write(&format!("recommend-{safe}.json"), &body)?;
    println!("trace: {}", path.display());
    Ok(())
}

pub fn simulate(ctx: &Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg();
    let loop_cfg = ClosedLoopConfig {
        world: cfg.sim.clone(),
        split_seed: cfg.seed,
        kb: cfg.kb.build.clone(),
        few_shot: cfg.train.few_shot,
        train: cfg.train.config.clone(),
        encoder: cfg.encoder.clone(),
        eval: cfg.eval.clone(),
        variants: Variant::ALL.to_vec(),
    };
    let out = run_closed_loop(&loop_cfg, cfg.llm.profile.clone())?;

    ctx.write("world.json", &out.world)?;
    ctx.write(
        "dataset.json",
        &DatasetBody { catalog: out.world.catalog.clone(), split: out.split.clone(), raw_sessions: out.world.sessions.len() },
    )?;
    let kb = out.kb.kb.clone();
    ctx.write(
        "kb.json",
        &KbBody { kb: kb.clone(), sessions_sampled: out.kb.sessions_sampled, misses: out.kb.misses, warning: out.kb.warning.clone() },
    )?;
    ctx.write("kb_log.json", &KbLogBody { decisions: out.kb.decisions, traces: out.kb.traces })?;
    ctx.write(
        "policy.json",
        &PolicyBody {
            checkpoint: PolicyCheckpoint::new(&out.training.policy, &kb, &cfg.train.config, out.training.episodes_trained),
            curve: out.training.curve,
            warning: out.training.warning,
        },
    )?;
    println!(
        "world: {} items, {} sessions, {} modes; knowledge base: {} hints",
        out.world.catalog.len(),
        out.world.sessions.len(),
        out.world.scenario.error_modes.len(),
        kb.len()
    );
    for r in &out.reports {
        print_report(r);
    }
    let path = ctx.write("report.json", &ReportsBody { reports: out.reports })?;
    println!("artifacts in {}", path.parent().unwrap_or(Path::new(".")).display());
    Ok(())
}

fn find_session<'a>(split: &'a DatasetSplit, id: &str) -> Result<&'a Session> {
    split
        .test
        .iter()
        .chain(&split.validation)
        .chain(&split.train)
        .find(|s| s.session_id == id)
        .ok_or_else(|| anyhow!("no session `{id}` in the prepared dataset"))
        .and_then(|s| {
            if s.target.is_none() {
                bail!("session `{id}` has no held-out target")
            }
            Ok(s)
        })
}

fn print_report(report: &EvalReport) {
    let parts: Vec<String> = report
        .metrics
        .iter()
        .map(|m| format!("{} {:.4} ± {:.4}", m.metric, m.mean, m.std))
        .collect();
    println!("{:<8} {}", report.config.variant.cli_name(), parts.join("  "));
}

fn log_stats(gateway: &LlmGateway) {
    let s = gateway.stats();
    log::info!(
        "llm: {} requests, {} cache hits ({:.0}%), {} backend calls, {} retries",
        s.requests,
        s.cache_hits,
        100.0 * s.hit_rate(),
        s.backend_calls,
        s.retries
    );
}
