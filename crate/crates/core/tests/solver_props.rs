use condreg::smallsolve::{
    constrained_least_squares, minimize_in_ball, project_to_ball, solve_extremal_system,
    ExtremalError, PgdConfig, QuadraticObjective, Sign, StepRule,
};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, cols), rows)
}

fn direct_objective(rows: &[Vec<f64>], z: &[f64], a: &[f64]) -> f64 {
    rows.iter()
        .zip(z)
        .map(|(y, zj)| {
            let r = y.iter().zip(a).map(|(u, v)| u * v).sum::<f64>() - zj;
            r * r
        })
        .sum()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn extremal_solution_satisfies_its_system(
        (s, rows, z, signs) in (0usize..=3).prop_flat_map(|s| (
            Just(s),
            matrix(s + 1, s),
            proptest::collection::vec(-2.0f64..2.0, s + 1),
            0usize..1 << (s + 1),
        ))
    ) {
        let pattern = Sign::pattern(signs, s + 1);
        match solve_extremal_system(&rows, &z, &pattern) {
            Ok(fit) => {
                prop_assert!(fit.eps_prime >= 0.0);
                for l in 0..=s {
                    let lhs = rows[l].iter().zip(&fit.a).map(|(u, v)| u * v).sum::<f64>() - z[l];
                    let rhs = pattern[l].value::<f64>() * fit.eps_prime;
                    prop_assert!((lhs - rhs).abs() <= 1e-7 * (1.0 + z[l].abs()), "{lhs} vs {rhs}");
                }
            }
            Err(ExtremalError::NegativeEpsPrime) => {
                let flipped: Vec<Sign> = pattern
                    .iter()
                    .map(|s| if *s == Sign::Plus { Sign::Minus } else { Sign::Plus })
                    .collect();
                prop_assert!(solve_extremal_system(&rows, &z, &flipped).is_ok());
            }
            Err(ExtremalError::SingularSystem) => {}
        }
    }

    #[test]
    fn gradient_matches_central_differences(
        (rows, z, a) in (1usize..=5, 1usize..=20).prop_flat_map(|(d, m)| (
            matrix(m, d),
            proptest::collection::vec(-3.0f64..3.0, m),
            proptest::collection::vec(-1.0f64..1.0, d),
        ))
    ) {
        let obj = QuadraticObjective::from_rows(&rows, &z).unwrap();
        prop_assert!((obj.value(&a) - direct_objective(&rows, &z, &a)).abs() <= 1e-9 * (1.0 + obj.value(&a)));
        let g = obj.gradient(&a);
        let h = 1e-5;
        for i in 0..a.len() {
            let mut up = a.clone();
            let mut down = a.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (direct_objective(&rows, &z, &up) - direct_objective(&rows, &z, &down)) / (2.0 * h);
            prop_assert!((g[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "{} vs {fd}", g[i]);
        }
    }

    #[test]
    fn pgd_stays_in_ball_descends_and_beats_feasible_points(
        (rows, z, radius, probe, backtracking) in (1usize..=4, 1usize..=15).prop_flat_map(|(d, m)| (
            matrix(m, d),
            proptest::collection::vec(-3.0f64..3.0, m),
            0.05f64..3.0,
            proptest::collection::vec(-1.0f64..1.0, d),
            any::<bool>(),
        ))
    ) {
        let obj = QuadraticObjective::from_rows(&rows, &z).unwrap();
        let cfg = PgdConfig {
            step_rule: if backtracking { StepRule::Backtracking } else { StepRule::FixedInverseLipschitz },
            ..PgdConfig::default()
        };
        let out = minimize_in_ball(&obj, radius, &cfg);
        prop_assert!(norm(&out.a) <= radius * (1.0 + 1e-12));
        prop_assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(out.trace.len(), out.iterations + 1);
        let mut p = probe.clone();
        project_to_ball(&mut p, radius);
        prop_assert!(out.objective <= obj.value(&p) + 1e-6 * (1.0 + obj.value(&p)));
        let via_rows = constrained_least_squares(&rows, &z, radius, &cfg).unwrap();
        prop_assert_eq!(via_rows, out.a);
    }

    #[test]
    fn projection_is_radial(v in proptest::collection::vec(-10.0f64..10.0, 1..6), radius in 0.1f64..5.0) {
        let mut p = v.clone();
        project_to_ball(&mut p, radius);
        prop_assert!(norm(&p) <= radius * (1.0 + 1e-12));
        if norm(&v) <= radius {
            prop_assert_eq!(p, v);
        } else {
            let scale = p[0] / v[0];
            for (a, b) in p.iter().zip(&v) {
                prop_assert!((a - scale * b).abs() <= 1e-12);
            }
        }
    }
}
