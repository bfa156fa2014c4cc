//! Checks of the reduced linear model against the full plant and against
//! independent integration.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linmodel::{build_continuous, discretize_zoh, matrix_to_csv, ContinuousModel, DiscreteModel, MODEL_DIM};
use crate::ode::Rk4;
use crate::plant::{Lumped, PhysParams, Plant, PlantState, SteadyState};
use crate::{Result, LINES};

/// Equal setpoints at which full and reduced models are compared (Pa).
pub const VALIDATION_SETPOINTS: [f64; 2] = [10_000.0, 150_000.0];
/// Length of the step-response comparison (s).
pub const TRANSIENT_HORIZON: f64 = 2.0;
const TRANSIENT_SAMPLE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetpointComparison {
    pub setpoint_pa: f64,
    /// Steady flows of the full plant (µl/s).
    pub full_ul_s: [f64; LINES],
    /// Steady flows of the reduced model (µl/s).
    pub reduced_ul_s: [f64; LINES],
    /// Largest steady-state difference in % of the full-plant flow.
    pub steady_diff_pct: f64,
    /// Largest step-response difference from rest over the comparison
    /// horizon, in % of the steady flow.
    pub transient_diff_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub setpoints: Vec<SetpointComparison>,
    /// Reduced-model DC gain against the resistor-network solution (relative).
    pub dc_gain_error: f64,
    /// One ZOH step against fine RK4 integration (relative, scaled states).
    pub zoh_error: f64,
    /// `F(T)² − F(2T)` and `F(T)G(T) + G(T) − G(2T)` (scaled, absolute).
    pub semigroup_error: f64,
    pub sample_period: f64,
}

/// Characteristic magnitudes of the reduced states: flows, pressures,
/// regulator derivatives.
pub fn state_scales() -> DVector<f64> {
    DVector::from_fn(MODEL_DIM, |i, _| match i {
        0..=3 => 1e-9,
        4 | 5 | 8 | 10 => 1e4,
        6 | 9 | 11 => 1e5,
        _ => 1e6,
    })
}

fn scaled_max(v: &DVector<f64>) -> f64 {
    v.iter().zip(state_scales().iter()).map(|(a, s)| (a / s).abs()).fold(0.0, f64::max)
}

fn compare_setpoint(p: &Lumped, m: &ContinuousModel, setpoint: f64) -> Result<SetpointComparison> {
    let u = [setpoint; LINES];
    let full = SteadyState::solve(p, u).flows;
    let reduced = &m.h * m.steady_state(&DVector::from_column_slice(&u))?;
    let steady = (0..LINES).map(|i| ((reduced[i] - full[i]) / full[i]).abs()).fold(0.0, f64::max);

    let d = discretize_zoh(m, TRANSIENT_SAMPLE)?;
    let uv = DVector::from_column_slice(&u);
    let mut plant = Plant::new(p.clone(), PlantState::rest());
    let mut x = DVector::zeros(MODEL_DIM);
    let scale = full.iter().map(|q| q.abs()).fold(0.0, f64::max);
    let mut transient: f64 = 0.0;
    let n = (TRANSIENT_HORIZON / TRANSIENT_SAMPLE).round() as usize;
    for _ in 0..n {
        plant.advance(&u, TRANSIENT_SAMPLE)?;
        x = d.step(&x, &uv);
        let y = &d.h * &x;
        let q = plant.state().chip_flows();
        for i in 0..LINES {
            transient = transient.max((q[i] - y[i]).abs() / scale);
        }
    }
    Ok(SetpointComparison {
        setpoint_pa: setpoint,
        full_ul_s: full.map(crate::units::si_to_ul_s),
        reduced_ul_s: std::array::from_fn(|i| crate::units::si_to_ul_s(reduced[i])),
        steady_diff_pct: 100.0 * steady,
        transient_diff_pct: 100.0 * transient,
    })
}

fn dc_gain_error(p: &Lumped, m: &ContinuousModel) -> Result<f64> {
    let gain = m.dc_gain()?;
    let mut worst: f64 = 0.0;
    for u in [[1e4, 2e4, 3e4], [1.5e5, 0.0, 7e4], [5e4; LINES]] {
        let q = &gain * DVector::from_column_slice(&u);
        let oracle = SteadyState::solve(p, u).flows;
        let scale = oracle.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..LINES {
            worst = worst.max((q[i] - oracle[i]).abs() / scale);
        }
    }
    Ok(worst)
}

fn zoh_error(m: &ContinuousModel, d: &DiscreteModel) -> Result<f64> {
    let u = DVector::from_column_slice(&[2e4, 5e4, 1e4]);
    let x0 = m.steady_state(&DVector::from_column_slice(&[1e4, 1e4, 3e4]))?;
    let bu = &m.b * &u;
    let mut x: Vec<f64> = x0.iter().copied().collect();
    let substeps = (d.sample_period / 1e-5).round() as usize;
    Rk4::new(MODEL_DIM).integrate(
        |_t, s: &[f64], dx: &mut [f64]| -> Result<()> {
            let y = &m.a * DVector::from_column_slice(s) + &bu;
            dx.copy_from_slice(y.as_slice());
            Ok(())
        },
        0.0,
        &mut x,
        d.sample_period,
        substeps,
    )?;
    let want = DVector::from_vec(x);
    Ok(scaled_max(&(d.step(&x0, &u) - &want)) / scaled_max(&want))
}

fn semigroup_error(m: &ContinuousModel, d1: &DiscreteModel) -> Result<f64> {
    let d2 = discretize_zoh(m, 2.0 * d1.sample_period)?;
    let s = state_scales();
    let si = DMatrix::from_diagonal(&s.map(|v| 1.0 / v));
    let sd = DMatrix::from_diagonal(&s);
    let f_err = &si * (&d1.f * &d1.f - &d2.f) * &sd;
    let g_err = &si * (&d1.f * &d1.g + &d1.g - &d2.g) * 1e4;
    Ok(f_err.abs().max().max(g_err.abs().max()))
}

pub fn validate_model(params: &PhysParams, sample_period: f64) -> Result<ValidationReport> {
    let p = params.lumped()?;
    let m = build_continuous(&p);
    let d = discretize_zoh(&m, sample_period)?;
    let setpoints = VALIDATION_SETPOINTS.iter().map(|s| compare_setpoint(&p, &m, *s)).collect::<Result<_>>()?;
    Ok(ValidationReport {
        setpoints,
        dc_gain_error: dc_gain_error(&p, &m)?,
        zoh_error: zoh_error(&m, &d)?,
        semigroup_error: semigroup_error(&m, &d)?,
        sample_period,
    })
}

/// Discrete model matrices as CSV text, keyed by file stem.
pub fn model_matrices(params: &PhysParams, sample_period: f64) -> Result<Vec<(&'static str, String)>> {
    let d = DiscreteModel::from_params(params, sample_period)?;
    Ok(vec![("F", matrix_to_csv(&d.f)), ("G", matrix_to_csv(&d.g)), ("H", matrix_to_csv(&d.h))])
}

impl ValidationReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("setpoint_pa,full_ul_s,reduced_ul_s,steady_diff_pct,transient_diff_pct\n");
        for s in &self.setpoints {
            out.push_str(&format!(
                "{:.0},{:.6},{:.6},{:.3e},{:.3}\n",
                s.setpoint_pa, s.full_ul_s[0], s.reduced_ul_s[0], s.steady_diff_pct, s.transient_diff_pct
            ));
        }
        out.push_str(&format!("dc_gain_error,{:.3e}\n", self.dc_gain_error));
        out.push_str(&format!("zoh_error,{:.3e}\n", self.zoh_error));
        out.push_str(&format!("semigroup_error,{:.3e}\n", self.semigroup_error));
        out
    }
}
