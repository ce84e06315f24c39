//! Full offline pipeline on a small simulated world.

use re2llm_core::agent::{PolicyCheckpoint, TrainConfig};
use re2llm_core::eval::{EvalConfig, Metric, Variant};
use re2llm_core::kb::{KbBuildConfig, KnowledgeBase};
use re2llm_core::llm::LlmProfile;
use re2llm_core::sim::{run_closed_loop, ClosedLoopConfig, ClosedLoopOutcome, WorldConfig};

fn small() -> ClosedLoopConfig {
    ClosedLoopConfig {
        world: WorldConfig { num_items: 400, num_sessions: 400, num_modes: 3, seed: 21, ..WorldConfig::default() },
        split_seed: 21,
        kb: KbBuildConfig { capacity: 6, seed: 21, ..KbBuildConfig::default() },
        few_shot: 200,
        train: TrainConfig { episodes: 15, seed: 21, ..TrainConfig::default() },
        eval: EvalConfig { runs: 2, test_sample_size: 60, ..EvalConfig::default() },
        ..ClosedLoopConfig::default()
    }
}

fn ndcg(out: &ClosedLoopOutcome, v: Variant) -> f64 {
    out.reports.iter().find(|r| r.config.variant == v).unwrap().mean(Metric::Ndcg(10)).unwrap()
}

#[test]
fn pipeline_is_deterministic_and_agent_helps() {
    let a = run_closed_loop(&small(), LlmProfile::default()).unwrap();
    let b = run_closed_loop(&small(), LlmProfile::default()).unwrap();
    assert_eq!(a.kb.kb, b.kb.kb);
    assert_eq!(a.training.policy, b.training.policy);
    assert_eq!(
        serde_json::to_string(&a.reports).unwrap(),
        serde_json::to_string(&b.reports).unwrap()
    );

    assert_eq!(a.kb.kb.len(), 3);
    assert_eq!(a.reports.len(), Variant::ALL.len());
    assert!(ndcg(&a, Variant::Agent) > ndcg(&a, Variant::NoHint));
    for r in &a.reports {
        assert_eq!(r.rows.len(), 2 * 60);
        assert_eq!(r.summary(Metric::Ndcg(10)).unwrap().per_run.len(), 2);
    }
}

#[test]
fn artifacts_round_trip_through_disk() {
    let out = run_closed_loop(&small(), LlmProfile::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let kb_path = dir.path().join("kb.json");
    out.kb.kb.save(&kb_path).unwrap();
    let kb = KnowledgeBase::load(&kb_path).unwrap();
    assert_eq!(kb, out.kb.kb);

    let ckpt_path = dir.path().join("policy.json");
    PolicyCheckpoint::new(&out.training.policy, &kb, &small().train, out.training.episodes_trained)
        .save(&ckpt_path)
        .unwrap();
    let loaded = PolicyCheckpoint::load(&ckpt_path, &kb).unwrap();
    assert_eq!(loaded.policy().unwrap(), out.training.policy);

    let report_path = dir.path().join("report.csv");
    out.reports[0].write_csv(&report_path).unwrap();
    let csv = std::fs::read_to_string(&report_path).unwrap();
    assert_eq!(csv.lines().count(), 1 + out.reports[0].rows.len());
}
