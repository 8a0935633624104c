//! Repeated searches over one hyperparameter axis.

use std::str::FromStr;

use serde::Serialize;

use crate::engine::{search, NoObserver, RunConfig};
use crate::evaluation::Evaluator;
use crate::space::SearchSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    AntCount,
    Greediness,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ant_count" | "ant-count" | "ants" => Ok(Self::AntCount),
            "greediness" => Ok(Self::Greediness),
            other => Err(format!("unknown sweep axis {other:?}; use ant_count or greediness")),
        }
    }
}

impl SweepAxis {
    /// `base` with the axis set to `value`. Ant counts must be whole.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig, String> {
        let mut config = base.clone();
        match self {
            Self::AntCount => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(format!("ant_count {value} must be a positive integer"));
                }
                config.ant_count = value as usize;
            }
            Self::Greediness => config.greediness = value,
        }
        Ok(config)
    }

    /// Default grids: ant counts doubling from 1, greediness in quarter steps.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Self::AntCount => vec![1.0, 2.0, 4.0, 8.0, 16.0],
            Self::Greediness => vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

pub const DEFAULT_TRIALS: usize = 5;

/// One search in a sweep. Failed runs keep their row with `error` set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub trial: usize,
    pub best_score: Option<f64>,
    pub evaluations: u64,
    pub wall_ms: u64,
    pub error: Option<String>,
}

/// Runs one search per (value, trial). Trial `t` uses seed `base.seed + t`,
/// so every value sees the same seeds.
pub fn run_sweep<F>(
    base: &RunConfig,
    space: &SearchSpace,
    axis: SweepAxis,
    values: &[f64],
    trials: usize,
    mut make_evaluator: F,
) -> Vec<SweepRow>
where
    F: FnMut(&RunConfig) -> Result<Box<dyn Evaluator>, String>,
{
    let mut rows = Vec::with_capacity(values.len() * trials);
    for &value in values {
        for trial in 0..trials {
            #[cfg(not(target_arch = "wasm32"))]
            let start = std::time::Instant::now();
            let outcome = axis.apply(base, value).and_then(|mut config| {
                config.seed = base.seed.wrapping_add(trial as u64);
                let mut evaluator = make_evaluator(&config)?;
                search(config, space, &mut evaluator, &mut NoObserver).map_err(|e| e.to_string())
            });
            #[cfg(not(target_arch = "wasm32"))]
            let wall_ms = start.elapsed().as_millis() as u64;
            #[cfg(target_arch = "wasm32")]
            let wall_ms = 0;
            rows.push(match outcome {
                Ok(o) => SweepRow {
                    value,
                    trial,
                    best_score: o.best.accuracy(),
                    evaluations: o.evaluations,
                    wall_ms,
                    error: None,
                },
                Err(e) => SweepRow {
                    value,
                    trial,
                    best_score: None,
                    evaluations: 0,
                    wall_ms,
                    error: Some(e),
                },
            });
        }
    }
    rows
}

/// Writes rows as RFC 4180 CSV with a fixed header.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
