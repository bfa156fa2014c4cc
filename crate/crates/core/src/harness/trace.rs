//! Per-step closed-loop records and their CSV / JSON artifacts.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::scenario::Scenario;
use crate::units::si_to_ul_s;
use crate::{Result, LINES};

/// One control period. Flows in m³/s, pressures in Pa.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub time: f64,
    pub refs: [f64; LINES],
    pub true_flows: [f64; LINES],
    pub measured_flows: [f64; LINES],
    pub estimated_flows: [f64; LINES],
    pub estimated_junction_pressure: f64,
    pub applied: [f64; LINES],
    pub du: [f64; LINES],
    pub status: String,
}

/// Solver diagnostics for one period (MPC runs only).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverRecord {
    pub step: usize,
    pub status: String,
    pub qp_status: String,
    pub iterations: usize,
    pub active_set_size: usize,
    pub kkt_residual: f64,
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFault {
    pub time: f64,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub scenario: Scenario,
    pub version: String,
    pub records: Vec<Record>,
    pub solver: Vec<SolverRecord>,
    /// Wall-clock seconds spent in the estimator and controller per period.
    #[serde(skip)]
    pub step_seconds: Vec<f64>,
    /// Wall-clock seconds for the whole run.
    pub wall_seconds: f64,
    pub fault: Option<RunFault>,
}

pub const TRACE_HEADER: &str = "time_s,\
ref_1_ul_s,ref_2_ul_s,ref_3_ul_s,\
true_1_ul_s,true_2_ul_s,true_3_ul_s,\
meas_1_ul_s,meas_2_ul_s,meas_3_ul_s,\
est_1_ul_s,est_2_ul_s,est_3_ul_s,\
est_junction_pa,\
u_1_pa,u_2_pa,u_3_pa,\
du_1_pa,du_2_pa,du_3_pa,\
status";

fn push_num(out: &mut String, v: f64) {
    write!(out, ",{v:.8e}").expect("write to string");
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn completed(&self) -> bool {
        self.fault.is_none()
    }

    /// Trace CSV: header row then one row per period, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(256 * (self.records.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            write!(out, "{:.8e}", r.time).expect("write to string");
            for group in [&r.refs, &r.true_flows, &r.measured_flows, &r.estimated_flows] {
                for v in group {
                    push_num(&mut out, si_to_ul_s(*v));
                }
            }
            push_num(&mut out, r.estimated_junction_pressure);
            for group in [&r.applied, &r.du] {
                for v in group {
                    push_num(&mut out, *v);
                }
            }
            out.push(',');
            out.push_str(&r.status);
            out.push('\n');
        }
        out
    }

    pub fn solver_csv(&self) -> String {
        let mut out = String::from("step,status,qp_status,iterations,active_set_size,kkt_residual\n");
        for s in &self.solver {
            writeln!(
                out,
                "{},{},{},{},{},{:.8e}",
                s.step, s.status, s.qp_status, s.iterations, s.active_set_size, s.kkt_residual
            )
            .expect("write to string");
        }
        out
    }

    /// Run summary: scenario echo, version, fault, timing.
    pub fn summary_json(&self, metrics: &impl Serialize) -> String {
        let steps = self.step_seconds.len().max(1) as f64;
        let max_step = self.step_seconds.iter().cloned().fold(0.0, f64::max);
        let v = serde_json::json!({
            "version": self.version,
            "scenario": self.scenario,
            "records": self.records.len(),
            "completed": self.completed(),
            "fault": self.fault,
            "metrics": metrics,
            "timing": {
                "wall_seconds": self.wall_seconds,
                "mean_step_seconds": self.step_seconds.iter().sum::<f64>() / steps,
                "max_step_seconds": max_step,
            },
        });
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }

    /// Writes `trace.csv`, `solver_log.csv` (MPC runs) and `run.json` into `dir`.
    pub fn write_dir(&self, dir: &Path, metrics: &impl Serialize) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trace.csv"), self.to_csv())?;
        if !self.solver.is_empty() {
            std::fs::write(dir.join("solver_log.csv"), self.solver_csv())?;
        }
        std::fs::write(dir.join("run.json"), self.summary_json(metrics))?;
        Ok(())
    }
}
