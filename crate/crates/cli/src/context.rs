//! Config loading, overrides and the output stamp.

use std::path::PathBuf;

use alphaloop_core::backtest::CostModel;
use alphaloop_core::config::{ModelChoice, RunConfig, SplitSection};
use alphaloop_core::discovery::SplitSpec;
use alphaloop_core::report::Stamp;
use anyhow::{Context, Result};

use crate::Common;

pub struct RunContext {
    pub cfg: RunConfig,
    pub split: SplitSpec,
    pub stamp: Stamp,
}

impl RunContext {
    pub fn load(c: &Common) -> Result<RunContext> {
        let mut cfg = RunConfig::load(&c.config)?;
        if let Some(seed) = c.seed {
            cfg.campaign.seed = seed;
            cfg.synth.seed = seed;
        }
        if let Some(out) = &c.out {
            cfg.paths.out = out.clone();
        }
        if let Some(s) = &c.split {
            cfg.split = SplitSection::Dates(SplitSpec::parse(s).context("--split")?);
        }
        if let Some(bps) = c.cost_bps {
            cfg.cost = CostModel::new(bps).context("--cost-bps")?;
        }
        if let Some(m) = &c.model {
            cfg.aggregation.model = m.parse::<ModelChoice>()?;
        }
        if let Some(e) = &c.llm_endpoint {
            cfg.llm.endpoint = e.clone();
        }
        cfg.validate()?;
        let split = cfg.split.resolve()?;
        let stamp = Stamp {
            config_hash: cfg.hash(),
            seed: cfg.campaign.seed,
        };
        std::fs::create_dir_all(&cfg.paths.out)
            .with_context(|| format!("cannot create {}", cfg.paths.out.display()))?;
        Ok(RunContext { cfg, split, stamp })
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.cfg.paths.out.join(name)
    }
}
