mod common;

use common::{brute_force, random_problem};
use microflow::qpsolve::{solve, QpProblem, QpStatus};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_enumeration_oracle_on_random_problems() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..150 {
        let d = rng.random_range(1..=6);
        let c = rng.random_range(0..=8);
        let p = random_problem(&mut rng, d, c);
        let s = solve(&p, None).unwrap();
        assert_eq!(s.status, QpStatus::Optimal, "case {case}");
        let oracle = brute_force(&p);
        let dz = (&s.z - &oracle).amax();
        let dobj = (p.objective(&s.z) - p.objective(&oracle)).abs();
        assert!(dz < 1e-6 && dobj < 1e-6, "case {case}: dz {dz:e}, dobj {dobj:e}");
        assert!(p.max_violation(&s.z) <= p.primal_tolerance());
        assert!(s.multipliers.iter().all(|l| *l >= -1e-8));
        assert!(s.kkt_residual <= 1e-6, "case {case}: kkt {}", s.kkt_residual);
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn infeasible_random_systems_carry_valid_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let d = rng.random_range(1..=5);
        let mut p = random_problem(&mut rng, d, 4);
        // contradict row 0: −M_0 z ≤ −γ_0 − 1
        let row = p.constraints.row(0).into_owned();
        let g = p.bounds[0];
        let mut m = p.constraints.clone().insert_row(4, 0.0);
        m.set_row(4, &(-row));
        p.constraints = m;
        p.bounds = p.bounds.clone().push(-g - 1.0);
        let s = solve(&p, None).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
        let y = s.certificate.expect("certificate");
        assert!(y.iter().all(|v| *v >= 0.0));
        let ym = p.constraints.transpose() * &y;
        assert!(ym.amax() < 1e-9 * y.amax().max(1.0));
        assert!(y.dot(&p.bounds) < 0.0);
    }
}

fn problem_strategy() -> impl Strategy<Value = (QpProblem, Vec<DVector<f64>>)> {
    (1usize..=6, 0usize..=10, any::<u64>()).prop_map(|(d, c, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, d, c);
        // random feasible probes: shrink random points toward the interior
        let probes = (0..20)
            .filter_map(|_| {
                let z = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
                (p.max_violation(&z) == 0.0).then_some(z)
            })
            .collect();
        (p, probes)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn optimum_beats_feasible_probes((p, probes) in problem_strategy()) {
        let s = solve(&p, None).unwrap();
        prop_assert_eq!(s.status, QpStatus::Optimal);
        let obj = p.objective(&s.z);
        for z in probes {
            prop_assert!(obj <= p.objective(&z) + 1e-8);
        }
    }

    #[test]
    fn warm_start_does_not_move_the_optimum((p, probes) in problem_strategy()) {
        let cold = solve(&p, None).unwrap();
        let warm = solve(&p, Some(&cold.z)).unwrap();
        prop_assert!((&cold.z - &warm.z).amax() <= 1e-8);
        for z in probes {
            let other = solve(&p, Some(&z)).unwrap();
            prop_assert!((&cold.z - &other.z).amax() <= 1e-8);
        }
    }

    #[test]
    fn argmin_is_scale_invariant((p, _) in problem_strategy(), k in 1e-3f64..1e3) {
        let a = solve(&p, None).unwrap();
        let scaled = QpProblem::new(&p.hessian * k, &p.gradient * k, p.constraints.clone(), p.bounds.clone()).unwrap();
        let b = solve(&scaled, None).unwrap();
        prop_assert!((&a.z - &b.z).amax() <= 1e-8 * (1.0 + a.z.amax()));
    }

    #[test]
    fn text_format_round_trips((p, _) in problem_strategy()) {
        prop_assert_eq!(QpProblem::from_text(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn deterministic((p, _) in problem_strategy()) {
        prop_assert_eq!(solve(&p, None).unwrap(), solve(&p, None).unwrap());
    }
}
