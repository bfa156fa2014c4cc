//! MPC versus PI on the same scenarios, plants and noise.

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{self, MetricsReport};
use super::runner::run_scenario;
use super::scenario::{ControllerKind, Scenario};
use super::trace::Trace;
use crate::{Result, LINES};

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub scenario: String,
    pub controller: ControllerKind,
    /// µl/s
    pub rmse: [f64; LINES],
    pub completed: bool,
    pub metrics: MetricsReport,
    #[serde(skip)]
    pub trace: Trace,
}

/// Runs every scenario under both controllers with the scenario's seed.
/// Rows come back in scenario order, MPC before PI.
pub fn compare(scenarios: &[Scenario]) -> Result<Vec<CompareRow>> {
    let jobs: Vec<Scenario> = scenarios
        .iter()
        .flat_map(|s| {
            [ControllerKind::Mpc, ControllerKind::Pi].map(|c| Scenario {
                controller: c,
                ..s.clone()
            })
        })
        .collect();
    jobs.par_iter()
        .map(|s| {
            let trace = run_scenario(s)?;
            let m = metrics::compute(&trace);
            Ok(CompareRow {
                scenario: s.name.clone(),
                controller: s.controller,
                rmse: m.rmse(),
                completed: trace.completed(),
                metrics: m,
                trace,
            })
        })
        .collect()
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("scenario,controller,rmse_1_ul_s,rmse_2_ul_s,rmse_3_ul_s,completed\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.8e},{:.8e},{:.8e},{}\n",
            r.scenario,
            r.controller.as_str(),
            r.rmse[0],
            r.rmse[1],
            r.rmse[2],
            r.completed
        ));
    }
    out
}
