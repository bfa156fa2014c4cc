//! Discrete Kalman filter on the simplified model.

use crate::linmodel::{DiscreteModel, MODEL_DIM};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Flow-state count in the process-noise block structure (three inlets and
/// the outlet).
const FLOW_STATES: usize = 4;
const PRESSURE_STATES: usize = MODEL_DIM - FLOW_STATES;

/// Nominal process-noise magnitudes per block before the `β` factor.
const FLOW_VARIANCE: f64 = 1e-18;
const PRESSURE_VARIANCE: f64 = 1e8;

/// Sensor noise variance: ±0.3 µl/s read as 3σ.
pub const MEASUREMENT_VARIANCE: f64 = 1e-20;

/// Tolerance for symmetry / PSD checks, relative to the diagonal scale.
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct KfConfig {
    pub process_noise: DMatrix<f64>,
    pub measurement_noise: DMatrix<f64>,
    pub initial_estimate: DVector<f64>,
    pub initial_covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KfState {
    pub estimate: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// Innovation `y − H x'` of the last update.
    pub innovation: DVector<f64>,
    /// Innovation covariance `H P' Hᵀ + R` of the last update.
    pub innovation_covariance: DMatrix<f64>,
}

fn block_diag(flow: &[f64], pressure: &[f64]) -> DMatrix<f64> {
    let diag: Vec<f64> = flow.iter().chain(pressure).copied().collect();
    DMatrix::from_diagonal(&DVector::from_vec(diag))
}

/// Process noise covariance with block magnitudes scaled by `β`.
pub fn default_q_kf(beta: f64) -> Result<DMatrix<f64>> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("β must be positive, got {beta}")));
    }
    let flow = [1.0, 1.0, 1.0, 9.0].map(|v| beta * v * FLOW_VARIANCE);
    Ok(block_diag(&flow, &[beta * PRESSURE_VARIANCE; PRESSURE_STATES]))
}

/// Hand-adjusted process noise used on the laboratory rig.
pub fn lab_q_kf() -> DMatrix<f64> {
    let flow = [50.0, 1.0, 10.0, 100.0].map(|v| v * 1e-20);
    let pressure = [10.0, 10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0].map(|v| v * 1e5);
    block_diag(&flow, &pressure)
}

pub fn default_r_kf() -> DMatrix<f64> {
    DMatrix::identity(3, 3) * MEASUREMENT_VARIANCE
}

/// Initial covariance: identity scaled per block to the nominal noise
/// magnitudes.
pub fn default_p0() -> DMatrix<f64> {
    block_diag(&[FLOW_VARIANCE; FLOW_STATES], &[PRESSURE_VARIANCE; PRESSURE_STATES])
}

/// Checks symmetry and positive semi-definiteness after normalizing by the
/// diagonal, so matrices mixing m³/s and Pa scales are judged fairly.
pub fn check_psd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension(format!("{name} must be square, got {}x{}", n, m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{name} has non-finite entries")));
    }
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    if let Some(v) = d.iter().find(|v| **v < 0.0) {
        return Err(Error::Domain(format!("{name} has negative diagonal entry {v}")));
    }
    let s: Vec<f64> = d.iter().map(|v| if *v > 0.0 { 1.0 / v.sqrt() } else { 0.0 }).collect();
    let normalized = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * s[i] * s[j]);
    let asym = (&normalized - normalized.transpose()).abs().max();
    if asym > PSD_TOL {
        return Err(Error::Domain(format!("{name} is not symmetric (normalized asymmetry {asym:e})")));
    }
    let min_eig = normalized.symmetric_eigenvalues().min();
    if min_eig < -PSD_TOL {
        return Err(Error::Domain(format!("{name} is not positive semi-definite (min eigenvalue {min_eig:e})")));
    }
    Ok(())
}

impl KfConfig {
    pub fn new(
        process_noise: DMatrix<f64>,
        measurement_noise: DMatrix<f64>,
        initial_estimate: DVector<f64>,
        initial_covariance: DMatrix<f64>,
    ) -> Result<Self> {
        check_psd(&process_noise, "process noise")?;
        check_psd(&measurement_noise, "measurement noise")?;
        check_psd(&initial_covariance, "initial covariance")?;
        let n = process_noise.nrows();
        if initial_estimate.len() != n || initial_covariance.nrows() != n {
            return Err(Error::Dimension(format!(
                "filter dimensions disagree: Q {n}, x0 {}, P0 {}",
                initial_estimate.len(),
                initial_covariance.nrows()
            )));
        }
        Ok(Self {
            process_noise,
            measurement_noise,
            initial_estimate,
            initial_covariance,
        })
    }

    /// Filter for the 13-state model starting at rest, with `β`-scaled
    /// process noise.
    pub fn with_beta(beta: f64) -> Result<Self> {
        Self::new(default_q_kf(beta)?, default_r_kf(), DVector::zeros(MODEL_DIM), default_p0())
    }

    pub fn lab() -> Self {
        Self::new(lab_q_kf(), default_r_kf(), DVector::zeros(MODEL_DIM), default_p0()).expect("valid constants")
    }

    pub fn initial_state(&self) -> KfState {
        let n = self.initial_estimate.len();
        let p = self.measurement_noise.nrows();
        KfState {
            estimate: self.initial_estimate.clone(),
            covariance: self.initial_covariance.clone(),
            gain: DMatrix::zeros(n, p),
            innovation: DVector::zeros(p),
            innovation_covariance: DMatrix::zeros(p, p),
        }
    }
}

/// Predict with the previous input, then correct with the measurement.
/// The covariance update uses the Joseph form followed by symmetrization.
pub fn kf_step(state: &KfState, u_prev: &[f64], y: &[f64], model: &DiscreteModel, cfg: &KfConfig) -> Result<KfState> {
    let n = model.states();
    if state.estimate.len() != n || u_prev.len() != model.inputs() || y.len() != model.outputs() {
        return Err(Error::Dimension(format!(
            "filter step expects {n} states, {} inputs, {} outputs",
            model.inputs(),
            model.outputs()
        )));
    }
    if u_prev.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite filter input".into()));
    }
    let u = DVector::from_column_slice(u_prev);
    let y = DVector::from_column_slice(y);
    let h = &model.h;

    let x_prior = &model.f * &state.estimate + &model.g * u;
    let p_prior = &model.f * &state.covariance * model.f.transpose() + &cfg.process_noise;

    let pht = &p_prior * h.transpose();
    let s = h * &pht + &cfg.measurement_noise;
    let s = (&s + s.transpose()) * 0.5;
    let chol = s.clone().cholesky().ok_or_else(|| Error::Singular {
        context: "innovation covariance".into(),
        condition: condition_estimate(&s),
    })?;
    // K = P'Hᵀ S⁻¹, via S Kᵀ = H P'
    let gain = chol.solve(&pht.transpose()).transpose();
    let innovation = &y - h * &x_prior;
    let estimate = &x_prior + &gain * &innovation;

    let ikh = DMatrix::identity(n, n) - &gain * h;
    let p = &ikh * &p_prior * ikh.transpose() + &gain * &cfg.measurement_noise * gain.transpose();
    let covariance = (&p + p.transpose()) * 0.5;

    Ok(KfState {
        estimate,
        covariance,
        gain,
        innovation,
        innovation_covariance: s,
    })
}

/// Eigenvalue-ratio condition number of a symmetric matrix.
fn condition_estimate(s: &DMatrix<f64>) -> f64 {
    let ev = s.clone().symmetric_eigenvalues();
    let max = ev.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min = ev.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

impl KfState {
    /// Normalized innovation squared of the last update.
    pub fn nis(&self) -> f64 {
        match self.innovation_covariance.clone().cholesky() {
            Some(c) => self.innovation.dot(&c.solve(&self.innovation)),
            None => f64::NAN,
        }
    }
}

/// Filter bundled with its model and configuration.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    model: DiscreteModel,
    config: KfConfig,
    state: KfState,
}

impl KalmanFilter {
    pub fn new(model: DiscreteModel, config: KfConfig) -> Result<Self> {
        if config.initial_estimate.len() != model.states() || config.measurement_noise.nrows() != model.outputs() {
            return Err(Error::Dimension("filter configuration does not match the model".into()));
        }
        let state = config.initial_state();
        Ok(Self { model, config, state })
    }

    pub fn step(&mut self, u_prev: &[f64], y: &[f64]) -> Result<&KfState> {
        self.state = kf_step(&self.state, u_prev, y, &self.model, &self.config)?;
        Ok(&self.state)
    }

    pub fn state(&self) -> &KfState {
        &self.state
    }

    pub fn model(&self) -> &DiscreteModel {
        &self.model
    }

    pub fn config(&self) -> &KfConfig {
        &self.config
    }
}
