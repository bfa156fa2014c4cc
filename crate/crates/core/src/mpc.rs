//! Receding-horizon controller on the incremental model.
//!
//! Outputs enter the cost in µl/s (`MpcConfig::output_scale`), which is the
//! unit in which the increment weight `α` is meaningful; pressures stay in Pa.

use crate::linmodel::{build_extended, DiscreteModel, ExtendedModel};
use crate::qpsolve::{self, QpProblem, QpStatus};
use crate::units::UL_PER_S;
use crate::{Error, Result, LINES};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Quadratic weight of the output-constraint slack, in (µl/s)⁻².
pub const SLACK_WEIGHT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub horizon: usize,
    pub sample_period: f64,
    pub alpha: f64,
    pub u_min: [f64; LINES],
    pub u_max: [f64; LINES],
    /// Largest input rate of change, Pa/s.
    pub du_rate: [f64; LINES],
    /// Output bounds in m³/s; infinite entries are dropped.
    pub y_min: [f64; LINES],
    pub y_max: [f64; LINES],
    pub soft_output_constraints: bool,
    /// Factor applied to flows (m³/s) before they enter the cost.
    pub output_scale: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            sample_period: 0.1,
            alpha: 1e-7,
            u_min: [0.0; LINES],
            u_max: [150_000.0; LINES],
            du_rate: [100_000.0; LINES],
            y_min: [0.0; LINES],
            y_max: [f64::INFINITY; LINES],
            soft_output_constraints: false,
            output_scale: 1.0 / UL_PER_S,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return bad(format!("sample period must be positive, got {}", self.sample_period));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.output_scale > 0.0 && self.output_scale.is_finite()) {
            return bad(format!("output scale must be positive, got {}", self.output_scale));
        }
        for i in 0..LINES {
            if !(self.u_min[i].is_finite() && self.u_max[i].is_finite() && self.u_min[i] <= self.u_max[i]) {
                return bad(format!("line {}: input bounds [{}, {}] are invalid", i + 1, self.u_min[i], self.u_max[i]));
            }
            if !(self.du_rate[i] >= 0.0) {
                return bad(format!("line {}: rate bound must be non-negative", i + 1));
            }
            if self.y_min[i].is_nan() || self.y_max[i].is_nan() || self.y_min[i] > self.y_max[i] {
                return bad(format!("line {}: output bounds [{}, {}] are invalid", i + 1, self.y_min[i], self.y_max[i]));
            }
        }
        Ok(())
    }

    /// Per-step increment bound `rate·T`.
    pub fn du_max(&self) -> [f64; LINES] {
        self.du_rate.map(|r| r * self.sample_period)
    }

    pub fn bounds(&self) -> ConstraintBounds {
        ConstraintBounds {
            u_min: self.u_min.to_vec(),
            u_max: self.u_max.to_vec(),
            du_max: self.du_max().to_vec(),
            y_min: self.y_min.iter().map(|v| v * self.output_scale).collect(),
            y_max: self.y_max.iter().map(|v| v * self.output_scale).collect(),
        }
    }
}

/// Output predictions over the horizon: `Y = Ψ x + Φ ΔU`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrices {
    pub psi: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub horizon: usize,
}

pub fn build_prediction(ext: &ExtendedModel, horizon: usize) -> PredictionMatrices {
    let n = ext.states();
    let m = ext.inputs();
    let p = ext.outputs();
    let mut psi = DMatrix::zeros(p * horizon, n);
    // markov[k] = H F^k G
    let mut markov = Vec::with_capacity(horizon);
    let mut hf = ext.h.clone();
    for k in 0..horizon {
        markov.push(&hf * &ext.g);
        hf = &hf * &ext.f;
        psi.view_mut((k * p, 0), (p, n)).copy_from(&hf);
    }
    let mut phi = DMatrix::zeros(p * horizon, m * horizon);
    for i in 0..horizon {
        for j in 0..=i {
            phi.view_mut((i * p, j * m), (p, m)).copy_from(&markov[i - j]);
        }
    }
    PredictionMatrices { psi, phi, horizon }
}

/// Hessian and gradient of `‖Y − Y_d‖² + α‖ΔU‖²` in the solver's form.
pub fn build_cost(pred: &PredictionMatrices, x: &DVector<f64>, y_ref: &DVector<f64>, alpha: f64) -> (DMatrix<f64>, DVector<f64>) {
    let d = pred.phi.ncols();
    let phit = pred.phi.transpose();
    let e = (&phit * &pred.phi + DMatrix::identity(d, d) * alpha) * 2.0;
    let e = (&e + e.transpose()) * 0.5;
    let f = &phit * (&pred.psi * x - y_ref) * 2.0;
    (e, f)
}

/// Per-channel bounds in controller units (Pa for inputs, scaled flows for
/// outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBounds {
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub du_max: Vec<f64>,
    pub y_min: Vec<f64>,
    pub y_max: Vec<f64>,
}

/// `C₁`: `N` stacked identity blocks.
pub fn c1(m: usize, horizon: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m * horizon, m, |i, j| if i % m == j { 1.0 } else { 0.0 })
}

/// `C₂`: block lower-triangular matrix of identity blocks, mapping
/// increments to cumulative sums.
pub fn c2(m: usize, horizon: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m * horizon, m * horizon, |i, j| if j / m <= i / m && i % m == j % m { 1.0 } else { 0.0 })
}

/// Stacks absolute-input, increment and output rows into `M ΔU ≤ γ`.
pub fn build_constraints(
    u_prev: &[f64],
    x: &DVector<f64>,
    pred: &PredictionMatrices,
    b: &ConstraintBounds,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = pred.horizon;
    let m = u_prev.len();
    let p = pred.phi.nrows() / n;
    let mn = m * n;
    let pn = p * n;
    let c2 = c2(m, n);
    let mut mat = DMatrix::zeros(4 * mn + 2 * pn, mn);
    let mut gamma = DVector::zeros(4 * mn + 2 * pn);
    mat.view_mut((0, 0), (mn, mn)).copy_from(&(-&c2));
    mat.view_mut((mn, 0), (mn, mn)).copy_from(&c2);
    mat.view_mut((2 * mn, 0), (mn, mn)).copy_from(&(-DMatrix::identity(mn, mn)));
    mat.view_mut((3 * mn, 0), (mn, mn)).fill_with_identity();
    mat.view_mut((4 * mn, 0), (pn, mn)).copy_from(&(-&pred.phi));
    mat.view_mut((4 * mn + pn, 0), (pn, mn)).copy_from(&pred.phi);
    let free = &pred.psi * x;
    for k in 0..n {
        for i in 0..m {
            let r = k * m + i;
            gamma[r] = -b.u_min[i] + u_prev[i];
            gamma[mn + r] = b.u_max[i] - u_prev[i];
            gamma[2 * mn + r] = b.du_max[i];
            gamma[3 * mn + r] = b.du_max[i];
        }
        for i in 0..p {
            let r = k * p + i;
            gamma[4 * mn + r] = -b.y_min[i] + free[r];
            gamma[4 * mn + pn + r] = b.y_max[i] - free[r];
        }
    }
    (mat, gamma)
}

/// Adds one slack column shared by all output rows, `ε ≥ 0`, with a
/// quadratic penalty.
fn soften(e: &DMatrix<f64>, f: &DVector<f64>, mat: &DMatrix<f64>, gamma: &DVector<f64>, output_rows: std::ops::Range<usize>) -> QpProblem {
    let d = e.nrows();
    let c = mat.nrows();
    let mut e2 = DMatrix::zeros(d + 1, d + 1);
    e2.view_mut((0, 0), (d, d)).copy_from(e);
    e2[(d, d)] = 2.0 * SLACK_WEIGHT;
    let f2 = f.clone().push(0.0);
    let mut m2 = DMatrix::zeros(c + 1, d + 1);
    m2.view_mut((0, 0), (c, d)).copy_from(mat);
    for r in output_rows {
        m2[(r, d)] = -1.0;
    }
    m2[(c, d)] = -1.0;
    let g2 = gamma.clone().push(0.0);
    QpProblem {
        hessian: e2,
        gradient: f2,
        constraints: m2,
        bounds: g2,
    }
}

/// How the applied action was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Optimal,
    /// Hard output constraints were infeasible; solved with a slack.
    Softened,
    /// No usable QP solution; the previous action was held.
    Held,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepStatus::Optimal => "optimal",
            StepStatus::Softened => "softened",
            StepStatus::Held => "held",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcOutput {
    pub u: [f64; LINES],
    pub du: [f64; LINES],
    pub status: StepStatus,
    pub qp_status: QpStatus,
    pub kkt_residual: f64,
    pub active_set_size: usize,
    pub iterations: usize,
    /// Predicted outputs `Ψx + ΦΔU*` in controller units.
    pub predicted: DVector<f64>,
}

/// Controller memory between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub u_prev: [f64; LINES],
    pub prev_estimate: Option<DVector<f64>>,
    pub last_solution: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct Mpc {
    cfg: MpcConfig,
    ext: ExtendedModel,
    pred: PredictionMatrices,
    state: ControllerState,
}

impl Mpc {
    /// Builds the controller for `model` (outputs in m³/s), starting from
    /// the previous action `u0`.
    pub fn new(model: &DiscreteModel, cfg: MpcConfig, u0: [f64; LINES]) -> Result<Self> {
        cfg.validate()?;
        if model.inputs() != LINES || model.outputs() != LINES {
            return Err(Error::Dimension("controller expects a 3-input, 3-output model".into()));
        }
        if (model.sample_period - cfg.sample_period).abs() > 1e-12 * cfg.sample_period {
            return Err(Error::Config(format!(
                "model period {} differs from controller period {}",
                model.sample_period, cfg.sample_period
            )));
        }
        let scaled = DiscreteModel {
            h: &model.h * cfg.output_scale,
            ..model.clone()
        };
        let ext = build_extended(&scaled);
        let pred = build_prediction(&ext, cfg.horizon);
        let u0 = std::array::from_fn(|i| u0[i].clamp(cfg.u_min[i], cfg.u_max[i]));
        Ok(Self {
            cfg,
            ext,
            pred,
            state: ControllerState {
                u_prev: u0,
                prev_estimate: None,
                last_solution: None,
            },
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    pub fn extended_model(&self) -> &ExtendedModel {
        &self.ext
    }

    pub fn prediction(&self) -> &PredictionMatrices {
        &self.pred
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    /// Extended state `[x̂(k) − x̂(k−1); y(k)]` in controller units.
    pub fn extended_state(&self, estimate: &DVector<f64>, measured: &[f64; LINES]) -> DVector<f64> {
        let n = estimate.len();
        let mut x = DVector::zeros(n + LINES);
        if let Some(prev) = &self.state.prev_estimate {
            x.rows_mut(0, n).copy_from(&(estimate - prev));
        }
        for i in 0..LINES {
            x[n + i] = measured[i] * self.cfg.output_scale;
        }
        x
    }

    /// Stacked horizon reference from future references in m³/s; the last
    /// entry is held when fewer than `N` are supplied.
    pub fn reference_vector(&self, refs: &[[f64; LINES]]) -> Result<DVector<f64>> {
        if refs.is_empty() {
            return Err(Error::Dimension("at least one reference is required".into()));
        }
        let n = self.cfg.horizon;
        let mut y = DVector::zeros(n * LINES);
        for k in 0..n {
            let r = refs[k.min(refs.len() - 1)];
            for i in 0..LINES {
                if !r[i].is_finite() {
                    return Err(Error::Domain("references must be finite".into()));
                }
                y[k * LINES + i] = r[i] * self.cfg.output_scale;
            }
        }
        Ok(y)
    }

    /// One control step: assemble the QP from the filter estimate and the
    /// measurement, solve it, and apply the first increment.
    pub fn step(&mut self, estimate: &DVector<f64>, measured: &[f64; LINES], refs: &[[f64; LINES]]) -> Result<MpcOutput> {
        if estimate.len() + LINES != self.ext.states() {
            return Err(Error::Dimension(format!("estimate has {} states", estimate.len())));
        }
        let x = self.extended_state(estimate, measured);
        let y_ref = self.reference_vector(refs)?;
        let bounds = self.cfg.bounds();
        let (e, f) = build_cost(&self.pred, &x, &y_ref, self.cfg.alpha);
        let (mat, gamma) = build_constraints(&self.state.u_prev, &x, &self.pred, &bounds);
        let mn = LINES * self.cfg.horizon;
        let output_rows = 4 * mn..mat.nrows();
        let warm = self.state.last_solution.as_ref();

        let soft = |warm: Option<&DVector<f64>>| {
            let qp = soften(&e, &f, &mat, &gamma, output_rows.clone());
            let warm = warm.map(|w| w.clone().push(0.0));
            qpsolve::solve(&qp, warm.as_ref())
        };
        let (sol, mut status) = if self.cfg.soft_output_constraints {
            (soft(warm)?, StepStatus::Optimal)
        } else {
            let qp = QpProblem::new(e.clone(), f.clone(), mat.clone(), gamma.clone())?;
            let sol = qpsolve::solve(&qp, warm)?;
            if sol.status == QpStatus::Infeasible {
                (soft(None)?, StepStatus::Softened)
            } else {
                (sol, StepStatus::Optimal)
            }
        };

        let mut du = [0.0; LINES];
        if sol.status == QpStatus::Optimal {
            du.copy_from_slice(&sol.z.as_slice()[..LINES]);
            self.state.last_solution = Some(sol.z.rows(0, mn).into_owned());
        } else {
            status = StepStatus::Held;
            self.state.last_solution = None;
        }

        // enforce the hard input limits exactly on the applied action
        let du_max = self.cfg.du_max();
        let mut u = [0.0; LINES];
        for i in 0..LINES {
            let step = du[i].clamp(-du_max[i], du_max[i]);
            u[i] = (self.state.u_prev[i] + step).clamp(self.cfg.u_min[i], self.cfg.u_max[i]);
            du[i] = u[i] - self.state.u_prev[i];
        }
        let z = match sol.status {
            QpStatus::Optimal => sol.z.rows(0, mn).into_owned(),
            _ => DVector::zeros(mn),
        };
        let predicted = &self.pred.psi * &x + &self.pred.phi * z;

        self.state.u_prev = u;
        self.state.prev_estimate = Some(estimate.clone());
        Ok(MpcOutput {
            u,
            du,
            status,
            qp_status: sol.status,
            kkt_residual: sol.kkt_residual,
            active_set_size: sol.active_set.len(),
            iterations: sol.iterations,
            predicted,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::{ContinuousModel, MODEL_DIM};
    use crate::plant::PhysParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_ext(f: f64, g: f64) -> ExtendedModel {
        ExtendedModel {
            f: DMatrix::from_element(1, 1, f),
            g: DMatrix::from_element(1, 1, g),
            h: DMatrix::from_element(1, 1, 1.0),
        }
    }

    fn plant_model() -> DiscreteModel {
        DiscreteModel::from_params(&PhysParams::default(), 0.1).unwrap()
    }

    #[test]
    fn prediction_small_cases() {
        let p = build_prediction(&scalar_ext(0.5, 2.0), 1);
        assert_eq!((p.psi[0], p.phi[0]), (0.5, 2.0));
        let p = build_prediction(&scalar_ext(0.5, 2.0), 2);
        assert_eq!(p.psi.as_slice(), &[0.5, 0.25]);
        assert_eq!(p.phi, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]));
    }

    #[test]
    fn prediction_matches_simulation() {
        let ext = build_extended(&plant_model());
        let n = 6;
        let pred = build_prediction(&ext, n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = DVector::from_fn(ext.states(), |i, _| if i < 4 || i >= MODEL_DIM { rng.random_range(-1e-9..1e-9) } else { rng.random_range(-1e3..1e3) });
        let du = DVector::from_fn(3 * n, |_, _| rng.random_range(-1e3..1e3));
        let y = &pred.psi * &x0 + &pred.phi * &du;
        let mut x = x0;
        for k in 0..n {
            x = &ext.f * &x + &ext.g * du.rows(3 * k, 3);
            let yk = &ext.h * &x;
            for i in 0..3 {
                assert!((yk[i] - y[3 * k + i]).abs() <= 1e-12 * yk.amax().max(1e-9));
            }
        }
        // block Toeplitz structure
        assert_eq!(pred.phi.view((3, 3), (3, 3)), pred.phi.view((0, 0), (3, 3)));
        assert_eq!(pred.phi.view((0, 0), (3, 3)).into_owned(), &ext.h * &ext.g);
    }

    #[test]
    fn cost_expansion_matches_direct_evaluation() {
        let ext = build_extended(&plant_model());
        let pred = build_prediction(&ext, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DVector::from_fn(ext.states(), |i, _| if i >= MODEL_DIM { rng.random_range(0.0..3.0) } else { 0.0 });
        let yd = DVector::from_fn(12, |_, _| rng.random_range(0.0..3.0));
        let alpha = 1e-7;
        let (e, f) = build_cost(&pred, &x, &yd, alpha);
        let j = |du: &DVector<f64>| (&pred.psi * &x + &pred.phi * du - &yd).norm_squared() + alpha * du.norm_squared();
        let c = j(&DVector::zeros(12));
        for _ in 0..20 {
            let du = DVector::from_fn(12, |_, _| rng.random_range(-1e4..1e4));
            let quad = 0.5 * du.dot(&(&e * &du)) + f.dot(&du) + c;
            assert!((quad - j(&du)).abs() <= 1e-9 * j(&du));
        }
        // on target: f = 0
        let yd = &pred.psi * &x;
        let (_, f) = build_cost(&pred, &x, &yd, alpha);
        assert!(f.amax() == 0.0);
    }

    #[test]
    fn scalar_constraint_instantiation() {
        let pred = build_prediction(&scalar_ext(0.5, 2.0), 1);
        let x = DVector::from_element(1, 4.0);
        let b = ConstraintBounds {
            u_min: vec![-1.0],
            u_max: vec![3.0],
            du_max: vec![0.5],
            y_min: vec![0.0],
            y_max: vec![10.0],
        };
        let (m, g) = build_constraints(&[1.0], &x, &pred, &b);
        assert_eq!(m.as_slice(), &[-1.0, 1.0, -1.0, 1.0, -2.0, 2.0]);
        assert_eq!(g.as_slice(), &[2.0, 2.0, 0.5, 0.5, 2.0, 8.0]);
    }

    #[test]
    fn constraint_rows_and_prefix_sums() {
        let ext = build_extended(&plant_model());
        let pred = build_prediction(&ext, 10);
        let b = MpcConfig::default().bounds();
        let (m, g) = build_constraints(&[0.0; 3], &DVector::zeros(16), &pred, &b);
        assert_eq!((m.nrows(), g.len()), (180, 180));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u_prev = DVector::from_fn(3, |_, _| rng.random_range(0.0..1e5));
        let du = DVector::from_fn(30, |_, _| rng.random_range(-1e3..1e3));
        let u = c1(3, 10) * &u_prev + c2(3, 10) * &du;
        let mut acc = u_prev.clone();
        for k in 0..10 {
            acc += du.rows(3 * k, 3);
            for i in 0..3 {
                assert!((u[3 * k + i] - acc[i]).abs() < 1e-9);
            }
        }
    }

    fn settled(u: [f64; 3]) -> (DiscreteModel, DVector<f64>, [f64; 3]) {
        let params = PhysParams::default();
        let cont = ContinuousModel::from_params(&params).unwrap();
        let x = cont.steady_state(&DVector::from_column_slice(&u)).unwrap();
        let y = &cont.h * &x;
        (plant_model(), x, [y[0], y[1], y[2]])
    }

    #[test]
    fn at_setpoint_increment_vanishes() {
        let u = [2e4, 4e4, 6e4];
        let (model, x, y) = settled(u);
        let mut mpc = Mpc::new(&model, MpcConfig::default(), u).unwrap();
        let out = mpc.step(&x, &y, &[y]).unwrap();
        assert_eq!(out.status, StepStatus::Optimal);
        let norm = out.du.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-6 * 150_000.0, "‖Δu‖ = {norm}");
    }

    fn first_increment(alpha: f64) -> f64 {
        let (model, x, y) = settled([2e4; 3]);
        let cfg = MpcConfig {
            alpha,
            du_rate: [1e9; 3],
            ..MpcConfig::default()
        };
        let mut mpc = Mpc::new(&model, cfg, [2e4; 3]).unwrap();
        let r = [y[0] * 2.0, y[1] * 1.5, y[2] * 3.0];
        let out = mpc.step(&x, &y, &[r]).unwrap();
        out.du.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn larger_alpha_never_increases_first_increment() {
        let alphas = [1e-8, 3e-8, 1e-7, 3e-7, 1e-6];
        let steps: Vec<f64> = alphas.iter().map(|a| first_increment(*a)).collect();
        for w in steps.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{steps:?}");
        }
        assert!(first_increment(1e6) < 1e-3 * steps[0]);
    }

    #[test]
    fn applied_action_respects_caps() {
        let (model, x, y) = settled([5e3; 3]);
        let cfg = MpcConfig {
            u_max: [9_500.0; 3],
            du_rate: [2_000.0; 3],
            ..MpcConfig::default()
        };
        let mut mpc = Mpc::new(&model, cfg, [5e3; 3]).unwrap();
        let mut prev = [5e3; 3];
        for _ in 0..40 {
            let out = mpc.step(&x, &y, &[[5e-9; 3]]).unwrap();
            for i in 0..3 {
                assert!(out.u[i] <= 9_500.0 * (1.0 + 1e-12) && out.u[i] >= 0.0);
                assert!((out.u[i] - prev[i]).abs() <= 200.0 * (1.0 + 1e-12));
            }
            prev = out.u;
        }
    }

    #[test]
    fn predicted_outputs_respect_bounds() {
        let (model, x, y) = settled([3e4; 3]);
        let cap = y[0] * 1.2;
        let cfg = MpcConfig {
            y_max: [cap; 3],
            ..MpcConfig::default()
        };
        let mut mpc = Mpc::new(&model, cfg, [3e4; 3]).unwrap();
        let out = mpc.step(&x, &y, &[[y[0] * 3.0; 3]]).unwrap();
        assert_eq!(out.status, StepStatus::Optimal);
        let tol = 1e-6;
        assert!(out.predicted.iter().all(|v| *v <= cap * 1e9 + tol));
    }

    #[test]
    fn negative_measurement_below_hard_floor_is_softened() {
        let (model, _, _) = settled([0.0; 3]);
        let mut mpc = Mpc::new(&model, MpcConfig::default(), [0.0; 3]).unwrap();
        let out = mpc.step(&DVector::zeros(13), &[-3e-10, 0.0, 0.0], &[[0.0; 3]]).unwrap();
        assert_eq!(out.status, StepStatus::Softened);
        assert!(out.u.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn rejects_invalid_config() {
        let model = plant_model();
        for cfg in [
            MpcConfig { horizon: 0, ..MpcConfig::default() },
            MpcConfig { alpha: 0.0, ..MpcConfig::default() },
            MpcConfig { u_min: [2.0; 3], u_max: [1.0; 3], ..MpcConfig::default() },
            MpcConfig { sample_period: 0.2, ..MpcConfig::default() },
        ] {
            assert!(Mpc::new(&model, cfg, [0.0; 3]).is_err());
        }
    }
}
