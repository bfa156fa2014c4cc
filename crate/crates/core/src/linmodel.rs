//! Simplified 13-state linear model, its zero-order-hold discretization and
//! the incremental (extended) form used by the estimator and the controller.
//!
//! State order: `Q1, Q2, Q3, Q_out, P_M`, then the regulator chains
//! `P1, P1', P1'', P2, P2', P3, P3', P3''`. Inputs are the three regulator
//! setpoints, outputs the three inlet flows.

use crate::plant::{Lumped, PhysParams, REGULATOR_ORDERS};
use crate::{Error, Result, LINES};
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;

pub const MODEL_DIM: usize = 13;
pub const EXTENDED_DIM: usize = MODEL_DIM + LINES;

/// Indices into the simplified state vector.
pub mod state {
    pub const Q: usize = 0;
    pub const Q_OUT: usize = 3;
    pub const P_M: usize = 4;
    /// First state (the regulated pressure) of each regulator chain.
    pub const REG: [usize; 3] = [5, 8, 10];
}

/// Continuous-time model `x' = A x + B u`, `y = H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

/// Discrete-time model `x(k+1) = F x(k) + G u(k)`, `y = H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub sample_period: f64,
}

/// Incremental model on `x = [Δx_m; y]` driven by input increments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedModel {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || h.ncols() != n {
        return Err(Error::Dimension(format!(
            "state matrices disagree: A {}x{}, B {}x{}, H {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(())
}

impl ContinuousModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        check_shapes(&a, &b, &h)?;
        Ok(Self { a, b, h })
    }

    pub fn from_params(params: &PhysParams) -> Result<Self> {
        Ok(build_continuous(&params.lumped()?))
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// Equilibrium state for a constant input, `-A⁻¹ B u`.
    pub fn steady_state(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let d = balance(&self.a);
        let n = self.states();
        let scaled = DMatrix::from_fn(n, n, |i, j| self.a[(i, j)] * d[j] / d[i]);
        let bu = &self.b * u;
        let rhs = DVector::from_fn(n, |i, _| -bu[i] / d[i]);
        let z = scaled.lu().solve(&rhs).ok_or_else(|| Error::Singular {
            context: "continuous state matrix".into(),
            condition: f64::INFINITY,
        })?;
        Ok(DVector::from_fn(n, |i, _| z[i] * d[i]))
    }

    /// Static input-to-output gain `-H A⁻¹ B`.
    pub fn dc_gain(&self) -> Result<DMatrix<f64>> {
        let m = self.b.ncols();
        let mut out = DMatrix::zeros(self.h.nrows(), m);
        for j in 0..m {
            let mut u = DVector::zeros(m);
            u[j] = 1.0;
            out.set_column(j, &(&self.h * self.steady_state(&u)?));
        }
        Ok(out)
    }
}

/// Assembles the simplified model: line and chip channel lumped in series,
/// reservoirs following their regulators and atmospheric outlet.
pub fn build_continuous(p: &Lumped) -> ContinuousModel {
    let n = MODEL_DIM;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, LINES);
    let mut h = DMatrix::zeros(LINES, n);
    let r = p.total_resistance();
    let l = p.total_inertia();
    for i in 0..LINES {
        let q = state::Q + i;
        let reg = state::REG[i];
        a[(q, q)] = -r[i] / l[i];
        a[(q, state::P_M)] = -1.0 / l[i];
        a[(q, reg)] = 1.0 / l[i];
        a[(state::P_M, q)] = 1.0 / p.chip_compressibility;
        h[(i, q)] = 1.0;

        let c = p.regulators.line(i);
        let order = REGULATOR_ORDERS[i];
        for k in 0..order - 1 {
            a[(reg + k, reg + k + 1)] = 1.0;
        }
        let top = reg + order - 1;
        let lead = c[order - 1];
        a[(top, reg)] = -1.0 / lead;
        for k in 0..order - 1 {
            a[(top, reg + k + 1)] = -c[k] / lead;
        }
        b[(top, i)] = 1.0 / lead;
    }
    a[(state::Q_OUT, state::Q_OUT)] = -p.outlet_resistance / p.outlet_inertia;
    a[(state::Q_OUT, state::P_M)] = 1.0 / p.outlet_inertia;
    a[(state::P_M, state::Q_OUT)] = -1.0 / p.chip_compressibility;
    ContinuousModel { a, b, h }
}

/// Power-of-two diagonal `d` such that `D⁻¹ A D` has comparable row and
/// column norms (`D = diag(d)`).
pub fn balance(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut d = DVector::from_element(n, 1.0);
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += (a[(j, i)] * d[i] / d[j]).abs();
                    row += (a[(i, j)] * d[j] / d[i]).abs();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            // choose f = 2^k that brings col·f and row/f closest
            let f = 2f64.powi(((row / col).log2() / 2.0).round() as i32);
            if (col * f + row / f) < 0.95 * (col + row) {
                d[i] *= f;
                converged = false;
            }
        }
    }
    d
}

/// Zero-order-hold discretization via the exponential of the augmented
/// matrix `[[A, B], [0, 0]]·T`, evaluated on a balanced similarity.
pub fn discretize_zoh(model: &ContinuousModel, sample_period: f64) -> Result<DiscreteModel> {
    if !(sample_period > 0.0 && sample_period.is_finite()) {
        return Err(Error::Domain(format!("sample period must be positive, got {sample_period}")));
    }
    let n = model.states();
    let m = model.b.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&model.a);
    aug.view_mut((0, n), (n, m)).copy_from(&model.b);
    aug *= sample_period;
    let d = balance(&aug);
    let balanced = DMatrix::from_fn(n + m, n + m, |i, j| aug[(i, j)] * d[j] / d[i]);
    let e = balanced.exp();
    let e = DMatrix::from_fn(n + m, n + m, |i, j| e[(i, j)] * d[i] / d[j]);
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix exponential produced non-finite entries".into()));
    }
    Ok(DiscreteModel {
        f: e.view((0, 0), (n, n)).into_owned(),
        g: e.view((0, n), (n, m)).into_owned(),
        h: model.h.clone(),
        sample_period,
    })
}

impl DiscreteModel {
    pub fn new(f: DMatrix<f64>, g: DMatrix<f64>, h: DMatrix<f64>, sample_period: f64) -> Result<Self> {
        check_shapes(&f, &g, &h)?;
        if !(sample_period > 0.0) {
            return Err(Error::Domain(format!("sample period must be positive, got {sample_period}")));
        }
        Ok(Self { f, g, h, sample_period })
    }

    /// Default controller model: desk-scale parameters at period `T`.
    pub fn from_params(params: &PhysParams, sample_period: f64) -> Result<Self> {
        discretize_zoh(&ContinuousModel::from_params(params)?, sample_period)
    }

    pub fn states(&self) -> usize {
        self.f.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.g.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.h.nrows()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.f * x + &self.g * u
    }
}

/// Builds `F = [[F_m, 0], [H_m F_m, I]]`, `G = [G_m; H_m G_m]`, `H = [0, I]`.
pub fn build_extended(d: &DiscreteModel) -> ExtendedModel {
    let n = d.states();
    let m = d.inputs();
    let p = d.outputs();
    let mut f = DMatrix::zeros(n + p, n + p);
    f.view_mut((0, 0), (n, n)).copy_from(&d.f);
    f.view_mut((n, 0), (p, n)).copy_from(&(&d.h * &d.f));
    f.view_mut((n, n), (p, p)).fill_with_identity();
    let mut g = DMatrix::zeros(n + p, m);
    g.view_mut((0, 0), (n, m)).copy_from(&d.g);
    g.view_mut((n, 0), (p, m)).copy_from(&(&d.h * &d.g));
    let mut h = DMatrix::zeros(p, n + p);
    h.view_mut((0, n), (p, p)).fill_with_identity();
    ExtendedModel { f, g, h }
}

impl ExtendedModel {
    pub fn states(&self) -> usize {
        self.f.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.g.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.h.nrows()
    }
}

/// Comma-separated rendering of a matrix, one row per line, 17 significant
/// digits.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{Plant, PlantState, SteadyState};

    fn lumped() -> Lumped {
        PhysParams::default().lumped().unwrap()
    }

    /// Characteristic magnitudes of the simplified states.
    fn scales() -> DVector<f64> {
        DVector::from_fn(MODEL_DIM, |i, _| match i {
            0..=3 => 1e-9,
            4 | 5 | 8 | 10 => 1e4,
            6 | 9 | 11 => 1e5,
            _ => 1e6,
        })
    }

    fn scaled_max(v: &DVector<f64>) -> f64 {
        v.iter().zip(scales().iter()).map(|(a, s)| (a / s).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn flow_row_transcribes_momentum_balance() {
        let p = lumped();
        let m = build_continuous(&p);
        let r = p.line_resistance[0] + p.chip_resistance[0];
        let l = p.line_inertia[0] + p.chip_inertia[0];
        assert_eq!(m.a[(0, 0)], -r / l);
        assert_eq!(m.a[(0, state::P_M)], -1.0 / l);
        assert_eq!(m.a[(0, state::REG[0])], 1.0 / l);
        assert_eq!(m.a.row(0).iter().filter(|v| **v != 0.0).count(), 3);
        assert_eq!((m.a.shape(), m.b.shape(), m.h.shape()), ((13, 13), (13, 3), (3, 13)));
        for i in 0..LINES {
            assert_eq!(m.h.row(i).iter().filter(|v| **v != 0.0).count(), 1);
            assert_eq!(m.h[(i, i)], 1.0);
        }
    }

    #[test]
    fn continuous_model_is_hurwitz() {
        let m = build_continuous(&lumped());
        let d = balance(&m.a);
        let scaled = DMatrix::from_fn(13, 13, |i, j| m.a[(i, j)] * d[j] / d[i]);
        for ev in scaled.complex_eigenvalues().iter() {
            assert!(ev.re < 0.0, "eigenvalue {ev}");
        }
    }

    #[test]
    fn dc_gain_matches_resistor_network() {
        let p = lumped();
        let m = build_continuous(&p);
        let gain = m.dc_gain().unwrap();
        for u in [[1e4, 2e4, 3e4], [1.5e5, 0.0, 7e4]] {
            let q = &gain * DVector::from_column_slice(&u);
            let oracle = SteadyState::solve(&p, u);
            for i in 0..LINES {
                let rel = (q[i] - oracle.flows[i]).abs() / oracle.flows.iter().map(|v| v.abs()).fold(0.0, f64::max);
                assert!(rel < 1e-9, "line {i}: {} vs {}", q[i], oracle.flows[i]);
            }
        }
        // identical lines: equal column sums
        let sums: Vec<f64> = (0..LINES).map(|i| gain.row(i).sum()).collect();
        assert!((sums[0] - sums[1]).abs() < 1e-12 * sums[0]);
        assert!((sums[0] - sums[2]).abs() < 1e-12 * sums[0]);
    }

    #[test]
    fn zoh_trivial_cases() {
        let zero = ContinuousModel::new(DMatrix::zeros(2, 2), DMatrix::from_row_slice(2, 1, &[1.0, 3.0]), DMatrix::identity(1, 2)).unwrap();
        let d = discretize_zoh(&zero, 0.5).unwrap();
        assert!((d.f.clone() - DMatrix::identity(2, 2)).abs().max() < 1e-15);
        assert!((d.g[0] - 0.5).abs() < 1e-15 && (d.g[1] - 1.5).abs() < 1e-15);

        let scalar = ContinuousModel::new(DMatrix::from_element(1, 1, -3.0), DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let d = discretize_zoh(&scalar, 0.2).unwrap();
        assert!((d.f[0] - (-0.6f64).exp()).abs() < 1e-15);
        assert!((d.g[0] - 2.0 * (1.0 - (-0.6f64).exp()) / 3.0).abs() < 1e-15);
        assert!(discretize_zoh(&scalar, 0.0).is_err());
    }

    #[test]
    fn zoh_step_matches_fine_integration() {
        let m = build_continuous(&lumped());
        let d = discretize_zoh(&m, 0.1).unwrap();
        let u = DVector::from_column_slice(&[2e4, 5e4, 1e4]);
        let mut x0 = m.steady_state(&DVector::from_column_slice(&[1e4, 1e4, 3e4])).unwrap();
        x0[state::REG[0] + 1] = 4e4;
        let want = {
            let mut rk = crate::ode::Rk4::new(MODEL_DIM);
            let mut x: Vec<f64> = x0.iter().copied().collect();
            let bu = &m.b * &u;
            rk.integrate(
                |_t, s: &[f64], dx: &mut [f64]| -> Result<()> {
                    let y = &m.a * DVector::from_column_slice(s) + &bu;
                    dx.copy_from_slice(y.as_slice());
                    Ok(())
                },
                0.0,
                &mut x,
                0.1,
                10_000,
            )
            .unwrap();
            DVector::from_vec(x)
        };
        let got = d.step(&x0, &u);
        let rel = scaled_max(&(&got - &want)) / scaled_max(&want);
        assert!(rel < 1e-6, "relative mismatch {rel:e}");
    }

    #[test]
    fn zoh_semigroup() {
        let m = build_continuous(&lumped());
        let d1 = discretize_zoh(&m, 0.1).unwrap();
        let d2 = discretize_zoh(&m, 0.2).unwrap();
        let s = scales();
        let si = DMatrix::from_diagonal(&s.map(|v| 1.0 / v));
        let sd = DMatrix::from_diagonal(&s);
        let f_err = &si * (&d1.f * &d1.f - &d2.f) * &sd;
        assert!(f_err.abs().max() < 1e-10, "F mismatch {:e}", f_err.abs().max());
        let g_err = &si * (&d1.f * &d1.g + &d1.g - &d2.g) * 1e4;
        assert!(g_err.abs().max() < 1e-10, "G mismatch {:e}", g_err.abs().max());
    }

    #[test]
    fn discrete_model_is_stable() {
        let d = DiscreteModel::from_params(&PhysParams::default(), 0.1).unwrap();
        let radius = d.f.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max);
        assert!(radius < 1.0, "spectral radius {radius}");
    }

    #[test]
    fn extended_scalar_instantiation() {
        let d = DiscreteModel::new(
            DMatrix::from_element(1, 1, 0.8),
            DMatrix::from_element(1, 1, 0.3),
            DMatrix::from_element(1, 1, 2.0),
            0.1,
        )
        .unwrap();
        let e = build_extended(&d);
        assert_eq!(e.f, DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 1.6, 1.0]));
        assert_eq!(e.g, DMatrix::from_row_slice(2, 1, &[0.3, 0.6]));
        assert_eq!(e.h, DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
    }

    #[test]
    fn extended_block_structure_and_spectrum() {
        let d = DiscreteModel::from_params(&PhysParams::default(), 0.1).unwrap();
        let e = build_extended(&d);
        assert_eq!(e.h.view((0, 0), (3, 13)).abs().max(), 0.0);
        assert_eq!(e.h.view((0, 13), (3, 3)).into_owned(), DMatrix::identity(3, 3));
        assert_eq!(e.f.view((0, 13), (13, 3)).abs().max(), 0.0);
        let eig = e.f.complex_eigenvalues();
        let at_one = eig.iter().filter(|z| (z.re - 1.0).abs() < 1e-9 && z.im.abs() < 1e-9).count();
        let inside = eig.iter().filter(|z| z.norm() < 1.0 - 1e-9).count();
        assert_eq!((at_one, inside), (3, 13));
    }

    #[test]
    fn extended_model_reproduces_outputs() {
        use rand::{Rng, SeedableRng};
        let d = DiscreteModel::from_params(&PhysParams::default(), 0.1).unwrap();
        let e = build_extended(&d);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut x_prev = DVector::zeros(MODEL_DIM);
        let u0 = DVector::from_fn(3, |_, _| rng.random_range(0.0..5e4));
        let mut x = d.step(&x_prev, &u0);
        let mut ext = DVector::zeros(EXTENDED_DIM);
        ext.rows_mut(0, MODEL_DIM).copy_from(&(&x - &x_prev));
        ext.rows_mut(MODEL_DIM, 3).copy_from(&(&d.h * &x));
        let mut u = u0;
        for _ in 0..50 {
            let du = DVector::from_fn(3, |_, _| rng.random_range(-5e3..5e3));
            u += &du;
            x_prev = x.clone();
            x = d.step(&x_prev, &u);
            ext = &e.f * &ext + &e.g * &du;
            let y = &d.h * &x;
            let y_ext = &e.h * &ext;
            assert!((&y - &y_ext).abs().max() < 1e-9 * y.abs().max().max(1e-9));
        }
    }

    #[test]
    fn simplified_and_full_models_agree_in_steady_state() {
        let p = lumped();
        let m = build_continuous(&p);
        let u = [1e4; 3];
        let mut plant = Plant::new(p, PlantState::rest());
        plant.advance(&u, 3.0).unwrap();
        let q = &m.h * m.steady_state(&DVector::from_column_slice(&u)).unwrap();
        for i in 0..LINES {
            let full = plant.state().chip_flows()[i];
            assert!(((full - q[i]) / q[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn csv_rendering() {
        let text = matrix_to_csv(&DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.0, 2.5e-9]));
        let rows: Vec<Vec<f64>> = text.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows, vec![vec![1.0, -0.5], vec![0.0, 2.5e-9]]);
    }
}
