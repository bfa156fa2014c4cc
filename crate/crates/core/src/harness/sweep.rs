//! One-parameter tuning sweeps sharing a base scenario and seed.

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{self, MetricsReport};
use super::runner::run_scenario;
use super::scenario::Scenario;
use super::trace::Trace;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Horizon,
    Alpha,
    Beta,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Horizon => "N",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Beta => "beta",
        }
    }

    /// Default values swept when none are given.
    pub fn default_values(&self) -> Vec<f64> {
        match self {
            SweepAxis::Horizon => vec![1.0, 2.0, 5.0, 10.0, 20.0],
            SweepAxis::Alpha => vec![1e-8, 1e-7, 1e-6],
            SweepAxis::Beta => vec![1e-6, 1e-4, 1e-2],
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(&self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        match self {
            SweepAxis::Horizon => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!("horizon must be a positive integer, got {value}")));
                }
                s.tuning.horizon = value as usize;
            }
            SweepAxis::Alpha => s.tuning.alpha = value,
            SweepAxis::Beta => s.tuning.beta = value,
        }
        s.validate()?;
        Ok(s)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" | "horizon" => Ok(SweepAxis::Horizon),
            "alpha" => Ok(SweepAxis::Alpha),
            "beta" => Ok(SweepAxis::Beta),
            other => Err(Error::Config(format!("unknown sweep axis '{other}' (N, alpha, beta)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub metrics: MetricsReport,
    pub completed: bool,
    #[serde(skip)]
    pub trace: Trace,
}

/// One run per value, in the order given.
pub fn sweep(base: &Scenario, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    let runs: Vec<Scenario> = values.iter().map(|v| axis.apply(base, *v)).collect::<Result<_>>()?;
    runs.par_iter()
        .zip(values.par_iter())
        .map(|(s, v)| {
            let trace = run_scenario(s)?;
            Ok(SweepPoint {
                value: *v,
                metrics: metrics::compute(&trace),
                completed: trace.completed(),
                trace,
            })
        })
        .collect()
}

pub fn sweep_csv(axis: SweepAxis, points: &[SweepPoint]) -> String {
    let mut out = format!(
        "{},line,rmse_ul_s,response_time_s,settling_time_s,overshoot_pct,estimate_bias_ul_s,estimate_std_ul_s\n",
        axis.as_str()
    );
    let opt = |v: Option<f64>| v.map_or(String::from("nan"), |x| format!("{x:.8e}"));
    for p in points {
        for (i, l) in p.metrics.lines.iter().enumerate() {
            out.push_str(&format!(
                "{:.8e},{},{:.8e},{},{},{:.8e},{:.8e},{:.8e}\n",
                p.value,
                i + 1,
                l.rmse,
                opt(l.response_time),
                opt(l.settling_time),
                l.overshoot_pct,
                l.estimate_bias,
                l.estimate_std
            ));
        }
    }
    out
}
