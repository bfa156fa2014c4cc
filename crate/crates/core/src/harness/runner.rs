//! Closed-loop simulation: measure, filter, decide, hold the input for one
//! period while the plant integrates.

use std::time::Instant;

use nalgebra::DVector;

use super::scenario::{ControllerKind, PlantKind, ProcessNoisePreset, Scenario};
use super::trace::{Record, RunFault, SolverRecord, Trace};
use crate::baseline::{default_pi_gains, PiController};
use crate::estimator::{KalmanFilter, KfConfig};
use crate::linmodel::{build_continuous, discretize_zoh, state, DiscreteModel};
use crate::mpc::{Mpc, MpcConfig, StepStatus};
use crate::plant::{Lumped, PhysParams, Plant, PlantState, RegulatorCoeffs, Sensor};
use crate::{Error, Result, LINES};

/// Consecutive held steps tolerated before the run is aborted.
pub const MAX_HELD_STEPS: usize = 10;

/// The simulated system.
enum SimPlant {
    Full(Box<Plant>),
    Linear { model: DiscreteModel, x: DVector<f64>, time: f64 },
}

impl SimPlant {
    fn true_flows(&self) -> [f64; LINES] {
        match self {
            SimPlant::Full(p) => p.state().chip_flows(),
            SimPlant::Linear { model, x, .. } => {
                let y = &model.h * x;
                [y[0], y[1], y[2]]
            }
        }
    }

    fn sensed_flows(&self) -> [f64; LINES] {
        match self {
            SimPlant::Full(p) => p.state().measured_flows(),
            SimPlant::Linear { .. } => self.true_flows(),
        }
    }

    fn advance(&mut self, u: &[f64; LINES], dt: f64) -> Result<()> {
        match self {
            SimPlant::Full(p) => p.advance(u, dt),
            SimPlant::Linear { model, x, time } => {
                *x = model.step(x, &DVector::from_row_slice(u));
                *time += dt;
                if x.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::IntegrationFault {
                        time: *time,
                        reason: "linear plant state is not finite".into(),
                        snapshot: x.as_slice().to_vec(),
                    })
                }
            }
        }
    }
}

enum Controller {
    Mpc(Box<Mpc>),
    Pi(PiController),
}

/// Physical parameters of the simulated plant (perturbed, with the chosen
/// regulator preset).
pub fn plant_params(s: &Scenario) -> Result<Lumped> {
    let mut phys = PhysParams::default();
    phys.regulators = RegulatorCoeffs::preset(s.regulator_preset);
    Ok(phys.lumped()?.perturbed(&s.perturbations))
}

/// Controller and filter configuration for a scenario.
pub fn mpc_config(s: &Scenario) -> MpcConfig {
    let l = s.constraints.resolve();
    MpcConfig {
        horizon: s.tuning.horizon,
        sample_period: s.sample_period_s,
        alpha: s.tuning.alpha,
        u_min: l.u_min,
        u_max: l.u_max,
        du_rate: l.du_rate,
        y_min: l.y_min,
        y_max: l.y_max,
        soft_output_constraints: s.tuning.soft_output_constraints,
        ..MpcConfig::default()
    }
}

pub fn kf_config(s: &Scenario) -> Result<KfConfig> {
    match s.tuning.process_noise {
        ProcessNoisePreset::Default => KfConfig::with_beta(s.tuning.beta),
        ProcessNoisePreset::Lab => Ok(KfConfig::lab()),
    }
}

fn build_plant(s: &Scenario) -> Result<SimPlant> {
    let params = plant_params(s)?;
    Ok(match s.plant {
        PlantKind::Full => SimPlant::Full(Box::new(Plant::new(params, PlantState::rest()))),
        PlantKind::Linear => {
            let model = discretize_zoh(&build_continuous(&params), s.sample_period_s)?;
            let x = DVector::zeros(model.states());
            SimPlant::Linear { model, x, time: 0.0 }
        }
    })
}

fn build_controller(s: &Scenario, model: &DiscreteModel) -> Result<Controller> {
    Ok(match s.controller {
        ControllerKind::Mpc => Controller::Mpc(Box::new(Mpc::new(model, mpc_config(s), [0.0; LINES])?)),
        ControllerKind::Pi => {
            let l = s.constraints.resolve();
            let gains = default_pi_gains();
            let cfgs = std::array::from_fn(|i| {
                let mut c = gains[i].scaled(s.tuning.pi_gain_scale);
                c.u_min = l.u_min[i];
                c.u_max = l.u_max[i];
                c
            });
            Controller::Pi(PiController::new(cfgs, s.sample_period_s)?)
        }
    })
}

/// Runs a scenario. Configuration errors are returned as `Err`; faults during
/// the run stop it and are reported in `Trace::fault` with the records so far.
pub fn run_scenario(s: &Scenario) -> Result<Trace> {
    s.validate()?;
    let wall = Instant::now();
    let period = s.sample_period_s;
    let model = DiscreteModel::from_params(&PhysParams::default(), period)?;
    let mut plant = build_plant(s)?;
    let mut sensor = Sensor::new(s.noise_std(), s.rng_seed)?;
    let mut kf = KalmanFilter::new(model.clone(), kf_config(s)?)?;
    let mut controller = build_controller(s, &model)?;

    let steps = s.steps();
    let mut trace = Trace {
        scenario: s.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        records: Vec::with_capacity(steps),
        solver: Vec::new(),
        step_seconds: Vec::with_capacity(steps),
        wall_seconds: 0.0,
        fault: None,
    };
    let mut u_prev = [0.0; LINES];
    let mut held_run = 0;
    let horizon = s.tuning.horizon;

    for k in 0..steps {
        let t = k as f64 * period;
        let truth = plant.true_flows();
        let y = sensor.measure_flows(plant.sensed_flows(), t).flows;
        let tick = Instant::now();
        let outcome = (|| -> Result<([f64; LINES], String, Option<SolverRecord>)> {
            let est = kf.step(&u_prev, &y)?.estimate.clone();
            match &mut controller {
                Controller::Mpc(mpc) => {
                    let refs: Vec<[f64; LINES]> = if s.tuning.reference_preview {
                        (1..=horizon).map(|j| s.reference(t + j as f64 * period)).collect()
                    } else {
                        vec![s.reference(t)]
                    };
                    let out = mpc.step(&est, &y, &refs)?;
                    let rec = SolverRecord {
                        step: k,
                        status: out.status.as_str().into(),
                        qp_status: out.qp_status.as_str().into(),
                        iterations: out.iterations,
                        active_set_size: out.active_set_size,
                        kkt_residual: out.kkt_residual,
                    };
                    held_run = if out.status == StepStatus::Held { held_run + 1 } else { 0 };
                    Ok((out.u, out.status.as_str().into(), Some(rec)))
                }
                Controller::Pi(pi) => {
                    let r = s.reference(t);
                    let e = std::array::from_fn(|i| r[i] - y[i]);
                    Ok((pi.step(&e), "pi".into(), None))
                }
            }
        })();
        trace.step_seconds.push(tick.elapsed().as_secs_f64());

        let (u, status, solver) = match outcome {
            Ok(v) => v,
            Err(e) => {
                trace.fault = Some(fault_at(t, &e));
                break;
            }
        };
        let est = &kf.state().estimate;
        trace.records.push(Record {
            time: t,
            refs: s.reference(t),
            true_flows: truth,
            measured_flows: y,
            estimated_flows: std::array::from_fn(|i| est[state::Q + i]),
            estimated_junction_pressure: est[state::P_M],
            applied: u,
            du: std::array::from_fn(|i| u[i] - u_prev[i]),
            status,
        });
        if let Some(r) = solver {
            trace.solver.push(r);
        }
        if held_run > MAX_HELD_STEPS {
            let e = Error::Solver(format!("no feasible input for {held_run} consecutive periods"));
            trace.fault = Some(fault_at(t, &e));
            break;
        }
        if let Err(e) = plant.advance(&u, period) {
            trace.fault = Some(fault_at(t, &e));
            break;
        }
        u_prev = u;
    }
    trace.wall_seconds = wall.elapsed().as_secs_f64();
    Ok(trace)
}

fn fault_at(t: f64, e: &Error) -> RunFault {
    RunFault {
        time: t,
        message: e.to_string(),
        exit_code: e.exit_code(),
    }
}
