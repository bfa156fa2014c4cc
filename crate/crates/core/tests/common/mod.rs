//! Helpers shared by the integration tests.
#![allow(dead_code)]

use microflow::qpsolve::QpProblem;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random strictly convex problem with a known strictly feasible point.
pub fn random_problem(rng: &mut ChaCha8Rng, d: usize, c: usize) -> QpProblem {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let e = a.transpose() * &a + DMatrix::identity(d, d) * 0.1;
    let e = (&e + e.transpose()) * 0.5;
    let f = DVector::from_fn(d, |_, _| rng.random_range(-5.0..5.0));
    let m = DMatrix::from_fn(c, d, |_, _| rng.random_range(-1.0..1.0));
    let interior = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let slack = DVector::from_fn(c, |_, _| rng.random_range(0.05..1.0));
    let gamma = &m * interior + slack;
    QpProblem::new(e, f, m, gamma).unwrap()
}

/// Exhaustive KKT enumeration: solve the equality-constrained problem for
/// every subset of rows and keep the best primal- and dual-feasible point.
pub fn brute_force(p: &QpProblem) -> DVector<f64> {
    let d = p.dim();
    let c = p.num_constraints();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << c) {
        let rows: Vec<usize> = (0..c).filter(|j| mask & (1 << j) != 0).collect();
        if rows.len() > d {
            continue;
        }
        let k = rows.len();
        let mut kkt = DMatrix::zeros(d + k, d + k);
        let mut rhs = DVector::zeros(d + k);
        kkt.view_mut((0, 0), (d, d)).copy_from(&p.hessian);
        for i in 0..d {
            rhs[i] = -p.gradient[i];
        }
        for (r, &j) in rows.iter().enumerate() {
            for i in 0..d {
                kkt[(d + r, i)] = p.constraints[(j, i)];
                kkt[(i, d + r)] = p.constraints[(j, i)];
            }
            rhs[d + r] = p.bounds[j];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let z = sol.rows(0, d).into_owned();
        if (0..k).any(|r| sol[d + r] < -1e-9) {
            continue;
        }
        if p.max_violation(&z) > 1e-9 {
            continue;
        }
        let obj = p.objective(&z);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, z));
        }
    }
    best.expect("feasible strictly convex problem has a KKT point").1
}
