use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_with, sub_seed, RunOptions, RunOutput, ScenarioConfig, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// UAV flight altitudes in metres.
    Altitude(Vec<f64>),
    /// Independent repetitions of the base scenario.
    Replicates(u32),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Altitude(v) => v.len(),
            SweepAxis::Replicates(n) => *n as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub index: usize,
    pub label: String,
    pub seed: u64,
    pub result: Result<RunOutput, SimError>,
}

/// Per-run configurations; run `i` gets seed `sub_seed(base.seed, i)`.
pub fn sweep_configs(base: &ScenarioConfig, axis: &SweepAxis) -> Vec<(String, ScenarioConfig)> {
    let with_seed = |i: usize, mut c: ScenarioConfig| {
        c.seed = sub_seed(base.seed, i as u64);
        c
    };
    match axis {
        SweepAxis::Altitude(alts) => alts
            .iter()
            .enumerate()
            .map(|(i, &a)| (format!("altitude={a}"), with_seed(i, base.with_altitude(a))))
            .collect(),
        SweepAxis::Replicates(n) => {
            (0..*n as usize).map(|i| (format!("replicate={i}"), with_seed(i, base.clone()))).collect()
        }
    }
}

/// Runs every point of `axis`. A failing run does not stop the others;
/// results come back in axis order whether or not they ran in parallel.
pub fn run_sweep(base: &ScenarioConfig, axis: &SweepAxis, opts: &RunOptions, parallel: bool) -> Vec<SweepRun> {
    let configs = sweep_configs(base, axis);
    let one = |(index, (label, cfg)): (usize, (String, ScenarioConfig))| SweepRun {
        index,
        label,
        seed: cfg.seed,
        result: run_with(&cfg, opts),
    };
    if parallel {
        configs.into_par_iter().enumerate().map(one).collect()
    } else {
        configs.into_iter().enumerate().map(one).collect()
    }
}
