//! `discover`: the in-sample discovery campaign.
//!
//! The state and log are checkpointed after every round, so an interrupted
//! run continues with `--resume` and produces the same files as an
//! uninterrupted one.

use std::io::Write;
use std::path::Path;

use alphaloop_core::discovery::{
    read_log, write_log, AgentState, BaselineGenerator, Campaign, HypothesisGenerator, LlmGenerator,
    LogEntry, ReplayGenerator,
};
use anyhow::{bail, Context, Result};

use crate::context::RunContext;
use crate::files::{create, load_panel, open, write_json, write_stamp_line, LIBRARY, LOG, STATE};
use crate::Common;

pub fn run(c: &Common, resume: bool, replay: Option<&Path>) -> Result<()> {
    let ctx = RunContext::load(c)?;
    let cfg = &ctx.cfg;
    let panel = load_panel(&ctx)?;

    let baseline = BaselineGenerator::new(&cfg.campaign.generator, cfg.campaign.budget);
    let mut generator: Box<dyn HypothesisGenerator> = match replay {
        Some(path) => {
            let log = read_log(open(path)?).with_context(|| format!("invalid log {}", path.display()))?;
            Box::new(ReplayGenerator::from_log(&log))
        }
        None if !cfg.llm.endpoint.is_empty() => {
            Box::new(LlmGenerator::new(cfg.llm.clone(), cfg.campaign.budget, baseline))
        }
        None => Box::new(baseline),
    };

    let mut campaign = if resume {
        let (state_path, log_path) = (ctx.out(STATE), ctx.out(LOG));
        if !state_path.exists() || !log_path.exists() {
            bail!("nothing to resume: {} or {} is missing", state_path.display(), log_path.display());
        }
        let state = AgentState::from_json(&std::fs::read_to_string(&state_path)?)
            .with_context(|| format!("invalid {}", state_path.display()))?;
        let log = read_log(open(&log_path)?).with_context(|| format!("invalid {}", log_path.display()))?;
        Campaign::resume(&panel, &ctx.split, &cfg.campaign, state, log)?
    } else {
        Campaign::new(&panel, &ctx.split, &cfg.campaign)?
    };

    checkpoint(&ctx, &campaign.state, &campaign.log)?;
    while campaign.step(generator.as_mut())? {
        checkpoint(&ctx, &campaign.state, &campaign.log)?;
        let s = &campaign.state;
        eprintln!("round {}: library {} held {}", s.round, s.library.len(), s.held.len());
    }
    let out = campaign.finish();
    write_json(&ctx, LIBRARY, &out.state.library)?;

    let candidates = out.log.iter().filter(|e| e.as_candidate().is_some()).count();
    println!(
        "{} rounds, {} candidates logged, {} promoted; library written to {}",
        out.state.round,
        candidates,
        out.state.library.len(),
        ctx.out(LIBRARY).display()
    );
    Ok(())
}

fn checkpoint(ctx: &RunContext, state: &AgentState, log: &[LogEntry]) -> Result<()> {
    let mut w = create(&ctx.out(LOG))?;
    write_stamp_line(&mut w, &ctx.stamp)?;
    write_log(&mut w, log)?;
    w.flush()?;
    std::fs::write(ctx.out(STATE), state.to_json())?;
    Ok(())
}
