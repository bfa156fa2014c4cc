//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero on any failure other than the documented β deviation.

mod common;

use std::time::Instant;

use common::{brute_force, random_problem};
use microflow::estimator::{kf_step, KalmanFilter, KfConfig, KfState};
use microflow::harness::{self, compare, metrics, run_scenario, sweep, validate, ControllerKind, MetricsReport, PlantKind, Scenario, SweepAxis};
use microflow::linmodel::{DiscreteModel, MODEL_DIM};
use microflow::plant::PhysParams;
use microflow::qpsolve::{solve, QpStatus};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
    /// Failure explained by a documented contradiction in the requirement.
    known_deviation: bool,
}

fn outcome(id: u8, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail, known_deviation: false }
}

fn builtin(name: &str) -> Scenario {
    harness::builtin(name).unwrap()
}

fn run(s: &Scenario) -> (harness::Trace, MetricsReport) {
    let t = run_scenario(s).unwrap();
    assert!(t.completed(), "{} aborted: {:?}", s.name, t.fault);
    let m = metrics::compute(&t);
    (t, m)
}

fn constraint_hardness() -> Outcome {
    let mut worst_abs: f64 = 0.0;
    let mut violations = 0;
    for name in ["pressure-cap-9500", "triangle-capped"] {
        let s = builtin(name);
        let l = s.constraints.resolve();
        let (t, m) = run(&s);
        violations += m.input_violations;
        for r in &t.records {
            for i in 0..3 {
                worst_abs = worst_abs.max((r.applied[i] - l.u_max[i]) / l.u_max[i]);
                if r.applied[i] > l.u_max[i] * (1.0 + 1e-6) || r.applied[i] < l.u_min[i] - 1e-6 {
                    violations += 1;
                }
            }
        }
    }
    let (t, m) = run(&builtin("rate-cap-2000"));
    let mut max_step: f64 = 0.0;
    let mut prev = [0.0; 3];
    for r in &t.records {
        for i in 0..3 {
            let d = (r.applied[i] - prev[i]).abs();
            max_step = max_step.max(d);
            if d > 200.0 * (1.0 + 1e-6) {
                violations += 1;
            }
        }
        prev = r.applied;
    }
    violations += m.rate_violations;
    outcome(
        1,
        "constraint hardness",
        violations == 0,
        format!("violations {violations}, max (u - u_max)/u_max {worst_abs:.2e}, max |du| {max_step:.6} Pa"),
    )
}

fn offset_free_tracking() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["steps-distinct", "mismatch-20pct"] {
        let (_, m) = run(&builtin(name));
        let settle = m.lines.iter().map(|l| l.settling_time.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
        let err = m.lines.iter().map(|l| l.final_error_rel.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
        pass &= settle < 5.0 && err < 0.01;
        parts.push(format!("{name}: settle {settle:.1} s, final error {:.2e}%", 100.0 * err));
    }
    outcome(2, "offset-free tracking", pass, parts.join("; "))
}

fn qp_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut worst_z, mut worst_obj): (f64, f64) = (0.0, 0.0);
    let cases = 120;
    let mut ok = true;
    for _ in 0..cases {
        let d = rng.random_range(1..=6);
        let c = rng.random_range(0..=8);
        let p = random_problem(&mut rng, d, c);
        let s = solve(&p, None).unwrap();
        ok &= s.status == QpStatus::Optimal;
        let o = brute_force(&p);
        worst_z = worst_z.max((&s.z - &o).amax());
        worst_obj = worst_obj.max((p.objective(&s.z) - p.objective(&o)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        3,
        "QP oracle equivalence",
        ok && worst_z < 1e-6 && worst_obj < 1e-6 && secs < 10.0,
        format!("{cases} problems, max |dz| {worst_z:.1e}, max |dJ| {worst_obj:.1e}, {secs:.2} s"),
    )
}

fn kf_correctness() -> Outcome {
    // scalar hand case
    let m1 = DiscreteModel::new(DMatrix::from_element(1, 1, 1.0), DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0), 1.0).unwrap();
    let c1 = KfConfig::new(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0), DVector::zeros(1), DMatrix::from_element(1, 1, 1.0)).unwrap();
    let s: KfState = kf_step(&c1.initial_state(), &[0.0], &[1.0], &m1, &c1).unwrap();
    let hand = (s.innovation_covariance[0] - 2.0).abs().max((s.gain[0] - 0.5).abs()).max((s.covariance[0] - 0.5).abs());

    // Riccati fixed point by the textbook recursion
    let model = DiscreteModel::from_params(&PhysParams::default(), 0.1).unwrap();
    let cfg = KfConfig::with_beta(1e-4).unwrap();
    let mut p = cfg.initial_covariance.clone();
    for _ in 0..10_000 {
        let pp = &model.f * &p * model.f.transpose() + &cfg.process_noise;
        let sm = &model.h * &pp * model.h.transpose() + &cfg.measurement_noise;
        let k = &pp * model.h.transpose() * sm.try_inverse().unwrap();
        p = (DMatrix::identity(MODEL_DIM, MODEL_DIM) - &k * &model.h) * pp;
        p = (&p + p.transpose()) * 0.5;
    }
    let mut kf = KalmanFilter::new(model.clone(), cfg.clone()).unwrap();
    for _ in 0..2_000 {
        kf.step(&[0.0; 3], &[0.0; 3]).unwrap();
    }
    let pk = &kf.state().covariance;
    let mut riccati: f64 = 0.0;
    for i in 0..MODEL_DIM {
        for j in 0..MODEL_DIM {
            riccati = riccati.max((pk[(i, j)] - p[(i, j)]).abs() / (p[(i, i)] * p[(j, j)]).sqrt());
        }
    }

    // innovation consistency on the matched model
    let mut kf = KalmanFilter::new(model.clone(), cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let q_sd: Vec<f64> = cfg.process_noise.diagonal().iter().map(|v| v.sqrt()).collect();
    let r_sd = 1e-10;
    let u = [2e4, 1e4, 3e4];
    let mut x = DVector::zeros(MODEL_DIM);
    let mut nis = 0.0;
    let steps = 10_000;
    for _ in 0..steps {
        let w = DVector::from_fn(MODEL_DIM, |i, _| { let z: f64 = StandardNormal.sample(&mut rng); q_sd[i] * z });
        x = model.step(&x, &DVector::from_column_slice(&u)) + w;
        let y = &model.h * &x + DVector::from_fn(3, |_, _| { let z: f64 = StandardNormal.sample(&mut rng); r_sd * z });
        nis += kf.step(&u, y.as_slice()).unwrap().nis();
    }
    let nis = nis / steps as f64;
    outcome(
        4,
        "Kalman filter correctness",
        hand < 1e-12 && riccati < 1e-8 && (2.4..=3.6).contains(&nis),
        format!("hand case {hand:.1e}, Riccati distance {riccati:.1e}, mean NIS {nis:.3}"),
    )
}

fn model_reduction() -> Outcome {
    let r = validate::validate_model(&PhysParams::default(), 0.1).unwrap();
    let parts: Vec<String> = r
        .setpoints
        .iter()
        .map(|s| format!("{:.0} Pa steady {:.1e}% transient {:.2}%", s.setpoint_pa, s.steady_diff_pct, s.transient_diff_pct))
        .collect();
    let pass = r.setpoints.len() == 2 && r.setpoints.iter().all(|s| s.steady_diff_pct < 10.0);
    outcome(5, "model-reduction audit", pass, parts.join("; "))
}

fn discretization() -> Outcome {
    let r = validate::validate_model(&PhysParams::default(), 0.1).unwrap();
    outcome(
        6,
        "discretization oracle",
        r.zoh_error < 1e-6 && r.semigroup_error < 1e-10,
        format!("ZOH vs RK4 {:.1e}, semigroup {:.1e}, DC gain {:.1e}", r.zoh_error, r.semigroup_error, r.dc_gain_error),
    )
}

fn mpc_beats_pi() -> Outcome {
    let list: Vec<Scenario> = ["steps-distinct", "steps-equal", "triangle-capped"].iter().map(|n| builtin(n)).collect();
    let rows = compare::compare(&list).unwrap();
    let mut pass = rows.len() == 6;
    let mut parts = Vec::new();
    for pair in rows.chunks(2) {
        let (m, p) = (&pair[0], &pair[1]);
        assert_eq!((m.controller, p.controller), (ControllerKind::Mpc, ControllerKind::Pi));
        pass &= m.completed && p.completed && (0..3).all(|i| m.rmse[i] <= p.rmse[i]);
        parts.push(format!(
            "{} MPC [{:.3} {:.3} {:.3}] PI [{:.3} {:.3} {:.3}]",
            m.scenario, m.rmse[0], m.rmse[1], m.rmse[2], p.rmse[0], p.rmse[1], p.rmse[2]
        ));
    }
    outcome(7, "MPC beats PI (RMSE, µl/s)", pass, parts.join("; "))
}

fn mean_rmse(m: &MetricsReport) -> f64 {
    m.rmse().iter().sum::<f64>() / 3.0
}

fn tuning_trends() -> Outcome {
    let base = builtin("steps-distinct");
    let n = sweep::sweep(&base, SweepAxis::Horizon, &[1.0, 2.0, 5.0, 10.0, 20.0]).unwrap();
    let rm: Vec<f64> = n.iter().map(|p| mean_rmse(&p.metrics)).collect();
    let n_plateau = (rm[4] - rm[3]).abs() <= 0.05 * rm[3] && rm[0] > rm[3] && rm[1] > rm[3] && rm[2] > rm[3];

    let a = sweep::sweep(&base, SweepAxis::Alpha, &[1e-8, 1e-7, 1e-6]).unwrap();
    let os: Vec<f64> = a.iter().map(|p| p.metrics.lines.iter().map(|l| l.overshoot_pct).fold(0.0, f64::max)).collect();
    let alpha_mono = os.windows(2).all(|w| w[1] <= w[0]);

    let betas = [1e-6, 1e-4, 1e-2];
    let mut matched = base.clone();
    matched.duration_s = 30.0;
    matched.plant = PlantKind::Linear;
    matched.noise_std_ul_s = harness::builtin::METER_NOISE_UL_S;
    let noise: Vec<f64> = sweep::sweep(&matched, SweepAxis::Beta, &betas)
        .unwrap()
        .iter()
        .map(|p| p.metrics.lines.iter().map(|l| l.estimate_std * l.estimate_std).sum::<f64>() / 3.0)
        .collect();
    let mut mismatch = builtin("mismatch-20pct");
    mismatch.duration_s = 30.0;
    let bias: Vec<f64> = sweep::sweep(&mismatch, SweepAxis::Beta, &betas)
        .unwrap()
        .iter()
        .map(|p| p.metrics.lines.iter().map(|l| l.estimate_bias.abs()).sum::<f64>() / 3.0)
        .collect();
    let noise_decreasing = noise.windows(2).all(|w| w[1] < w[0]);
    let bias_increasing = bias.windows(2).all(|w| w[1] > w[0]);
    // With process noise proportional to β, filtering theory predicts the
    // opposite ordering; that is what a faithful filter must show.
    let theory_order = noise.windows(2).all(|w| w[1] > w[0]) && bias.windows(2).all(|w| w[1] < w[0]);

    let pass = n_plateau && alpha_mono && noise_decreasing && bias_increasing;
    let mut o = outcome(
        8,
        "tuning trends",
        pass,
        format!(
            "N plateau {} (RMSE {:.3?}); alpha overshoot non-increasing {} ({:.3?} %); \
             beta noise decreasing {} (var {} (µl/s)²); beta bias increasing {} ({} µl/s)",
            yes(n_plateau),
            rm,
            yes(alpha_mono),
            os,
            yes(noise_decreasing),
            sci(&noise),
            yes(bias_increasing),
            sci(&bias)
        ),
    );
    o.known_deviation = !pass && n_plateau && alpha_mono && theory_order;
    o
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn yes(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

fn determinism_and_speed() -> Outcome {
    let mut s = builtin("steps-distinct");
    s.noise_std_ul_s = harness::builtin::METER_NOISE_UL_S;
    s.rng_seed = 7;
    let start = Instant::now();
    let a = run_scenario(&s).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let b = run_scenario(&s).unwrap();
    let identical = a.to_csv() == b.to_csv();
    let solves = a.solver.len();
    outcome(
        9,
        "determinism and performance",
        identical && secs < 10.0 && solves == 600,
        format!("byte-identical {}, 60 s run with {solves} solves in {secs:.2} s wall", yes(identical)),
    )
}

fn main() {
    let checks: [fn() -> Outcome; 9] = [
        constraint_hardness,
        offset_free_tracking,
        qp_oracle,
        kf_correctness,
        model_reduction,
        discretization,
        mpc_beats_pi,
        tuning_trends,
        determinism_and_speed,
    ];
    let mut unexpected = 0;
    let mut passed = 0;
    for check in checks {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {}: {tag} | {}", o.id, o.name, o.detail);
        if o.pass {
            passed += 1;
        } else if o.known_deviation {
            println!(
                "  known deviation: process noise scales with beta, so a larger beta trusts measurements more; \
                 estimate noise rises and mismatch bias falls with beta, the reverse of the stated trend"
            );
        } else {
            unexpected += 1;
        }
    }
    println!("acceptance: {passed}/9 pass, {unexpected} unexpected failure(s)");
    if unexpected > 0 {
        std::process::exit(1);
    }
}
