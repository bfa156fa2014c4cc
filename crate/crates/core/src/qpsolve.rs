//! Dense convex QP solver: minimize `½ zᵀE z + fᵀz` subject to `M z ≤ γ`.
//!
//! Dual active-set method (Goldfarb–Idnani). Starting from the unconstrained
//! minimizer, the most violated constraint is added each outer iteration;
//! constraints whose multipliers would turn negative are dropped on the way.
//! The working set is refactorized with a QR decomposition at every step,
//! which is cheap at MPC sizes and keeps the method deterministic.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;

/// Relative tolerance on `E`'s symmetry.
const SYMMETRY_TOL: f64 = 1e-12;
/// Internal feasibility tolerance, relative to each row's scale.
const FEAS_TOL: f64 = 1e-10;
/// Declared tolerances of a returned optimum.
pub const PRIMAL_TOL: f64 = 1e-8;
pub const KKT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub constraints: DMatrix<f64>,
    pub bounds: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Indices of constraints in the final working set, in order of entry.
    pub active_set: Vec<usize>,
    /// One multiplier per constraint row; zero for inactive rows.
    pub multipliers: DVector<f64>,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Diagonal shift added to `E` when its Cholesky factorization failed.
    pub regularization: f64,
    /// For infeasible problems: `y ≥ 0` with `yᵀM = 0` and `yᵀγ < 0`.
    pub certificate: Option<DVector<f64>>,
}

impl QpProblem {
    pub fn new(hessian: DMatrix<f64>, gradient: DVector<f64>, constraints: DMatrix<f64>, bounds: DVector<f64>) -> Result<Self> {
        let p = Self {
            hessian,
            gradient,
            constraints,
            bounds,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn unconstrained(hessian: DMatrix<f64>, gradient: DVector<f64>) -> Result<Self> {
        let d = gradient.len();
        Self::new(hessian, gradient, DMatrix::zeros(0, d), DVector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.gradient.len();
        if self.hessian.shape() != (d, d) || self.constraints.ncols() != d || self.constraints.nrows() != self.bounds.len() {
            return Err(Error::Dimension(format!(
                "QP shapes disagree: E {:?}, f {d}, M {:?}, γ {}",
                self.hessian.shape(),
                self.constraints.shape(),
                self.bounds.len()
            )));
        }
        if self.hessian.iter().chain(self.gradient.iter()).chain(self.constraints.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("QP data must be finite".into()));
        }
        if self.bounds.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("constraint bounds must not be NaN".into()));
        }
        let scale = self.hessian.abs().max().max(f64::MIN_POSITIVE);
        let asym = (&self.hessian - self.hessian.transpose()).abs().max();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Domain(format!("Hessian is not symmetric (asymmetry {asym:e})")));
        }
        Ok(())
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.hessian * z)) + self.gradient.dot(z)
    }

    /// Largest violation `max_j (M_j z − γ_j)`, or 0 when all rows hold.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let mz = &self.constraints * z;
        (0..self.bounds.len()).map(|j| mz[j] - self.bounds[j]).fold(0.0, f64::max)
    }

    /// Primal tolerance `1e-8·(1 + ‖γ‖∞)` over the finite bounds.
    pub fn primal_tolerance(&self) -> f64 {
        let g = self.bounds.iter().filter(|v| v.is_finite()).map(|v| v.abs()).fold(0.0, f64::max);
        PRIMAL_TOL * (1.0 + g)
    }

    /// Plain-text dump: a `qp d c` header followed by the `E`, `f`, `M` and
    /// `gamma` sections, one matrix row per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("qp {} {}\n", self.dim(), self.num_constraints());
        let row = |s: &mut String, vals: &mut dyn Iterator<Item = f64>| {
            let v: Vec<String> = vals.map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(s, "{}", v.join(" "));
        };
        s.push_str("E\n");
        for i in 0..self.dim() {
            row(&mut s, &mut self.hessian.row(i).iter().copied());
        }
        s.push_str("f\n");
        row(&mut s, &mut self.gradient.iter().copied());
        s.push_str("M\n");
        for i in 0..self.num_constraints() {
            row(&mut s, &mut self.constraints.row(i).iter().copied());
        }
        s.push_str("gamma\n");
        row(&mut s, &mut self.bounds.iter().copied());
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("QP text: {msg}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty input"))?.split_whitespace().collect();
        let (d, c) = match header.as_slice() {
            ["qp", d, c] => (
                d.parse::<usize>().map_err(|_| bad("bad dimension"))?,
                c.parse::<usize>().map_err(|_| bad("bad constraint count"))?,
            ),
            _ => return Err(bad("expected `qp <d> <c>` header")),
        };
        let mut section = |name: &str, rows: usize, cols: usize| -> Result<Vec<f64>> {
            if lines.next().map(str::trim) != Some(name) {
                return Err(bad(&format!("expected section `{name}`")));
            }
            let mut out = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = lines.next().ok_or_else(|| bad(&format!("section `{name}` is truncated")))?;
                let vals = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad number `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != cols {
                    return Err(bad(&format!("section `{name}` row has {} values, expected {cols}", vals.len())));
                }
                out.extend(vals);
            }
            Ok(out)
        };
        let e = section("E", d, d)?;
        let f = section("f", 1, d)?;
        let m = section("M", c, d)?;
        let g = section("gamma", 1, c)?;
        Self::new(
            DMatrix::from_row_slice(d, d, &e),
            DVector::from_vec(f),
            DMatrix::from_row_slice(c, d, &m),
            DVector::from_vec(g),
        )
    }
}

/// Solves the QP. `warm_start` only changes the order in which constraints
/// enter the working set: rows active at the supplied point go first.
pub fn solve(problem: &QpProblem, warm_start: Option<&DVector<f64>>) -> Result<QpSolution> {
    problem.validate()?;
    let d = problem.dim();
    let c = problem.num_constraints();
    if let Some(z0) = warm_start {
        if z0.len() != d {
            return Err(Error::Dimension(format!("warm start has length {}, expected {d}", z0.len())));
        }
    }

    let (chol, regularization) = factorize(&problem.hessian)?;
    let l = chol.l();
    let lower_solve = |v: &DVector<f64>| l.solve_lower_triangular(v).expect("nonsingular factor");
    let upper_solve = |v: &DVector<f64>| l.tr_solve_lower_triangular(v).expect("nonsingular factor");

    // constraint j as n_jᵀ z ≥ b_j with n_j = −M_j, b_j = −γ_j
    let normals: Vec<DVector<f64>> = (0..c).map(|j| -problem.constraints.row(j).transpose()).collect();
    let norms: Vec<f64> = normals.iter().map(|n| n.norm()).collect();
    let b: Vec<f64> = problem.bounds.iter().map(|g| -g).collect();

    let preferred: Vec<bool> = match warm_start {
        Some(z0) => {
            let zn = z0.norm();
            (0..c)
                .map(|j| problem.bounds[j].is_finite() && (normals[j].dot(z0) - b[j]).abs() <= 1e-8 * (1.0 + b[j].abs() + norms[j] * zn))
                .collect()
        }
        None => vec![false; c],
    };

    let mut z = -chol.solve(&problem.gradient);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_iter = 50 * (d + c).max(1);
    let mut iterations = 0;

    let finish = |z: DVector<f64>, active: Vec<usize>, u: Vec<f64>, status, iterations, certificate| {
        let mut multipliers = DVector::zeros(c);
        for (k, &j) in active.iter().enumerate() {
            multipliers[j] = u[k];
        }
        let kkt_residual = kkt_residual(problem, &z, &multipliers);
        QpSolution {
            z,
            active_set: active,
            multipliers,
            status,
            kkt_residual,
            iterations,
            regularization,
            certificate,
        }
    };

    if let Some(j) = (0..c).find(|&j| problem.bounds[j] == f64::NEG_INFINITY) {
        // no point satisfies M_j z ≤ −∞; a zero row also has a certificate
        let certificate = (norms[j] == 0.0).then(|| {
            let mut y = DVector::zeros(c);
            y[j] = 1.0;
            y
        });
        return Ok(finish(z, active, u, QpStatus::Infeasible, 0, certificate));
    }

    loop {
        // choose the constraint to add
        let zn = z.norm();
        let mut pick: Option<(usize, bool, f64)> = None;
        for j in 0..c {
            if problem.bounds[j] == f64::INFINITY || active.contains(&j) {
                continue;
            }
            let s = normals[j].dot(&z) - b[j];
            if s >= -FEAS_TOL * (1.0 + b[j].abs() + norms[j] * zn) {
                continue;
            }
            let score = -s / norms[j].max(f64::MIN_POSITIVE);
            let better = match pick {
                None => true,
                Some((_, pref, best)) => (preferred[j] && !pref) || (preferred[j] == pref && score > best),
            };
            if better {
                pick = Some((j, preferred[j], score));
            }
        }
        let Some((p, _, _)) = pick else {
            return Ok(finish(z, active, u, QpStatus::Optimal, iterations, None));
        };
        let mut u_p = 0.0;

        // step toward satisfying constraint p, dropping blockers on the way
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Ok(finish(z, active, u, QpStatus::MaxIter, iterations, None));
            }
            let v = lower_solve(&normals[p]);
            let (r, resid) = if active.is_empty() {
                (DVector::zeros(0), v.clone())
            } else {
                let mut w = DMatrix::zeros(d, active.len());
                for (k, &j) in active.iter().enumerate() {
                    w.set_column(k, &lower_solve(&normals[j]));
                }
                let qr = w.qr();
                let q = qr.q();
                let rr = qr.r();
                let qtv = q.transpose() * &v;
                let r = rr.solve_upper_triangular(&qtv).ok_or_else(|| Error::Solver("dependent working set".into()))?;
                let resid = &v - &q * qtv;
                (r, resid)
            };
            let curvature = resid.norm_squared();
            let full_step = curvature > 1e-14 * v.norm_squared().max(f64::MIN_POSITIVE);

            // dual step length: first active multiplier to hit zero
            let mut t_dual = f64::INFINITY;
            let mut blocker = None;
            for k in 0..active.len() {
                if r[k] > 0.0 {
                    let t = u[k] / r[k];
                    if t < t_dual {
                        t_dual = t;
                        blocker = Some(k);
                    }
                }
            }

            if !full_step {
                let Some(k) = blocker else {
                    // n_p lies in the span of the working set with r ≤ 0
                    let mut y = DVector::zeros(c);
                    y[p] = 1.0;
                    for (i, &j) in active.iter().enumerate() {
                        y[j] = -r[i];
                    }
                    return Ok(finish(z, active, u, QpStatus::Infeasible, iterations, Some(y)));
                };
                for i in 0..active.len() {
                    u[i] -= t_dual * r[i];
                }
                u_p += t_dual;
                active.remove(k);
                u.remove(k);
                continue;
            }

            let step = upper_solve(&resid);
            let s_p = normals[p].dot(&z) - b[p];
            let t_primal = -s_p / curvature;
            let t = t_primal.min(t_dual);
            z += &step * t;
            for i in 0..active.len() {
                u[i] -= t * r[i];
            }
            u_p += t;
            if t_primal <= t_dual {
                active.push(p);
                u.push(u_p);
                break;
            }
            let k = blocker.expect("dual step is finite");
            active.remove(k);
            u.remove(k);
        }
    }
}

/// Cholesky of `E`, retried once with a small diagonal shift.
fn factorize(e: &DMatrix<f64>) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    if let Some(ch) = e.clone().cholesky() {
        return Ok((ch, 0.0));
    }
    let d = e.nrows().max(1) as f64;
    let shift = 1e-10 * e.trace().abs() / d;
    let shift = if shift > 0.0 { shift } else { 1e-10 };
    let min_eig = e.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-10 * e.abs().max().max(1.0) {
        return Err(Error::Domain(format!("Hessian is indefinite (min eigenvalue {min_eig:e})")));
    }
    let shifted = e + DMatrix::identity(e.nrows(), e.nrows()) * shift;
    shifted
        .cholesky()
        .map(|ch| (ch, shift))
        .ok_or_else(|| Error::Solver("Hessian is singular even after regularization".into()))
}

/// Scaled KKT residual: stationarity, dual feasibility and complementarity.
pub fn kkt_residual(problem: &QpProblem, z: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    let ez = &problem.hessian * z;
    let scale = 1.0_f64.max(problem.gradient.amax()).max(ez.amax());
    let finite: Vec<usize> = (0..problem.num_constraints()).filter(|&j| problem.bounds[j].is_finite()).collect();
    let mut grad = ez + &problem.gradient;
    for &j in &finite {
        grad += problem.constraints.row(j).transpose() * lambda[j];
    }
    let mut worst = grad.amax() / scale;
    let obj_scale = 1.0_f64.max(problem.objective(z).abs()).max(z.dot(&(&problem.hessian * z)).abs());
    let mz = &problem.constraints * z;
    for &j in &finite {
        worst = worst.max((-lambda[j]).max(0.0) / scale);
        worst = worst.max((lambda[j] * (problem.bounds[j] - mz[j])).abs() / obj_scale);
    }
    worst
}
