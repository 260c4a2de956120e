//! Campaign-level behavior on synthetic panels.

use alphaloop_core::discovery::{
    oos_report, read_log, resume_campaign, run_campaign, write_log, AgentState, BaselineGenerator,
    Campaign, CampaignConfig, CandidateStatus, GeneratorOutput, HypothesisGenerator, LogEntry,
    NullGenerator, Proposal, ReplayGenerator, Source, SplitSpec,
};
use alphaloop_core::panel::build_primitives;
use alphaloop_core::synth::{generate, synth_panel, SynthConfig, SynthKind};
use alphaloop_core::Panel;
use chrono::NaiveDate;
use rand_chacha::ChaCha8Rng;

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

fn split() -> SplitSpec {
    SplitSpec::new(d(2016, 1, 1), d(2016, 9, 30), d(2016, 10, 1), d(2020, 12, 31)).unwrap()
}

fn small_cfg() -> SynthConfig {
    SynthConfig {
        n_stocks: 60,
        n_days: 400,
        ..SynthConfig::default()
    }
}

fn log_bytes(log: &[LogEntry]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_log(&mut buf, log).unwrap();
    buf
}

fn baseline(cfg: &CampaignConfig) -> BaselineGenerator {
    BaselineGenerator::new(&cfg.generator, cfg.budget)
}

#[test]
fn planted_signal_is_promoted_and_holds_out_of_sample() {
    let (panel, _) = synth_panel(&SynthConfig::default()).unwrap();
    let cfg = CampaignConfig::default();
    let out = run_campaign(&panel, &split(), &cfg, &mut baseline(&cfg)).unwrap();
    assert!(!out.state.library.is_empty());
    let oos = oos_report(&out.state.library, &panel, &split(), &cfg.eval).unwrap();
    assert!(oos
        .iter()
        .any(|r| r.monotonicity.unwrap_or(0.0) >= 0.9 && r.metrics.sharpe.unwrap_or(0.0) >= 2.0));
}

#[test]
fn empty_generator_leaves_state_unchanged_but_logs_rounds() {
    let (panel, _) = synth_panel(&small_cfg()).unwrap();
    let cfg = CampaignConfig {
        rounds: 3,
        ..CampaignConfig::default()
    };
    let out = run_campaign(&panel, &split(), &cfg, &mut NullGenerator).unwrap();
    assert!(out.state.library.is_empty() && out.state.held.is_empty());
    assert_eq!(out.state.round, 3);
    assert_eq!(out.log.len(), 3);
    let seqs: Vec<u64> = out.log.iter().map(LogEntry::seq).collect();
    assert_eq!(seqs, vec![0, 1, 2]);
}

#[test]
fn identical_runs_produce_identical_logs() {
    let (panel, _) = synth_panel(&small_cfg()).unwrap();
    let cfg = CampaignConfig::default();
    let a = run_campaign(&panel, &split(), &cfg, &mut baseline(&cfg)).unwrap();
    let b = run_campaign(&panel, &split(), &cfg, &mut baseline(&cfg)).unwrap();
    assert_eq!(log_bytes(&a.log), log_bytes(&b.log));
    assert_eq!(a.state.to_json(), b.state.to_json());
    let other = CampaignConfig { seed: 43, ..cfg.clone() };
    let c = run_campaign(&panel, &split(), &other, &mut baseline(&other)).unwrap();
    assert_ne!(log_bytes(&a.log), log_bytes(&c.log));
}

#[test]
fn checkpoint_resume_equals_uninterrupted_run() {
    let (panel, _) = synth_panel(&small_cfg()).unwrap();
    let cfg = CampaignConfig::default();
    let full = run_campaign(&panel, &split(), &cfg, &mut baseline(&cfg)).unwrap();

    let mut c = Campaign::new(&panel, &split(), &cfg).unwrap();
    let mut gen = baseline(&cfg);
    c.step(&mut gen).unwrap();
    c.step(&mut gen).unwrap();
    let out = c.finish();
    let state = AgentState::from_json(&out.state.to_json()).unwrap();
    let log = read_log(log_bytes(&out.log).as_slice()).unwrap();

    let resumed = resume_campaign(&panel, &split(), &cfg, state, log, &mut baseline(&cfg)).unwrap();
    assert_eq!(log_bytes(&full.log), log_bytes(&resumed.log));
    assert_eq!(full.state, resumed.state);
}

#[test]
fn resume_rejects_mismatched_checkpoint() {
    let (panel, _) = synth_panel(&small_cfg()).unwrap();
    let cfg = CampaignConfig::default();
    let out = run_campaign(&panel, &split(), &cfg, &mut NullGenerator).unwrap();
    let mut truncated = out.log.clone();
    truncated.pop();
    assert!(Campaign::resume(&panel, &split(), &cfg, out.state.clone(), truncated).is_err());
    let other = CampaignConfig { seed: 1, ..cfg };
    assert!(Campaign::resume(&panel, &split(), &other, out.state, out.log).is_err());
}

#[test]
fn replay_reproduces_decisions() {
    let (panel, _) = synth_panel(&small_cfg()).unwrap();
    let cfg = CampaignConfig::default();
    let original = run_campaign(&panel, &split(), &cfg, &mut baseline(&cfg)).unwrap();
    let mut replay = ReplayGenerator::from_log(&original.log);
    let again = run_campaign(&panel, &split(), &cfg, &mut replay).unwrap();
    let cands = |log: &[LogEntry]| log.iter().filter_map(LogEntry::as_candidate).cloned().collect::<Vec<_>>();
    assert_eq!(cands(&original.log), cands(&again.log));
    assert_eq!(original.state.library, again.state.library);
}

#[test]
fn out_of_sample_data_cannot_reach_the_loop() {
    let scfg = small_cfg();
    let obs = generate(&scfg).unwrap().observations;
    let cut = split().is_end;
    let perturbed: Vec<_> = obs
        .iter()
        .cloned()
        .map(|mut o| {
            if o.date > cut {
                o.ret = -3.0 * o.ret + 0.01;
                o.volume *= 7.0;
                o.price += 1.0;
            }
            o
        })
        .collect();
    let a = build_primitives(Panel::from_observations(obs).unwrap());
    let b = build_primitives(Panel::from_observations(perturbed).unwrap());
    let cfg = CampaignConfig::default();
    let ra = run_campaign(&a, &split(), &cfg, &mut baseline(&cfg)).unwrap();
    let rb = run_campaign(&b, &split(), &cfg, &mut baseline(&cfg)).unwrap();
    assert_eq!(log_bytes(&ra.log), log_bytes(&rb.log));
}

struct Scripted(Vec<&'static str>);

impl HypothesisGenerator for Scripted {
    fn propose(&mut self, _: &AgentState, _: usize, _: &mut ChaCha8Rng) -> GeneratorOutput {
        GeneratorOutput {
            proposals: self
                .0
                .iter()
                .map(|t| Proposal {
                    text: t.to_string(),
                    rationale: String::new(),
                    source: Source::Llm,
                    parent: None,
                })
                .collect(),
            events: Vec::new(),
        }
    }
}

#[test]
fn invalid_and_duplicate_proposals_are_logged_not_evaluated() {
    let (panel, _) = synth_panel(&small_cfg()).unwrap();
    let cfg = CampaignConfig {
        rounds: 2,
        ..CampaignConfig::default()
    };
    let mut gen = Scripted(vec!["lead(ret, 1)", "cs_rank(volume)", "cs_rank( volume )", "rolling_mean(ret, 0)"]);
    let out = run_campaign(&panel, &split(), &cfg, &mut gen).unwrap();
    let r1: Vec<_> = out
        .log
        .iter()
        .filter_map(LogEntry::as_candidate)
        .filter(|r| r.round == 1)
        .map(|r| r.status)
        .collect();
    assert_eq!(
        r1,
        vec![
            CandidateStatus::Rejected,
            CandidateStatus::Evaluated,
            CandidateStatus::Duplicate,
            CandidateStatus::Rejected
        ]
    );
    let first = out.log.iter().find_map(LogEntry::as_candidate).unwrap();
    assert!(first.error.as_deref().unwrap().contains("lead"));
    // Round 2 re-proposes the same batch: the evaluated one is now known.
    let r2_evaluated = out
        .log
        .iter()
        .filter_map(LogEntry::as_candidate)
        .filter(|r| r.round == 2 && r.status == CandidateStatus::Evaluated)
        .count();
    assert_eq!(r2_evaluated, 0);
}

#[test]
fn null_panel_promotes_little() {
    let scfg = SynthConfig {
        kind: SynthKind::Null,
        ..small_cfg()
    };
    let (panel, _) = synth_panel(&scfg).unwrap();
    let cfg = CampaignConfig::default();
    let out = run_campaign(&panel, &split(), &cfg, &mut baseline(&cfg)).unwrap();
    assert!(out.state.library.len() <= 2, "{} promoted on noise", out.state.library.len());
}
