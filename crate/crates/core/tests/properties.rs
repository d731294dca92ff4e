use proptest::prelude::*;

use nehari::constraint::{residuals, scale_to_nehari, ConstraintSpec};
use nehari::energy::{energy, energy_diff, Field, Potential};
use nehari::experiments::{enumerate_patterns, BumpSignature};
use nehari::grid_domain::{build_cutoffs, GridDomain, Rect};
use nehari::io::{fmt_f64, grid_csv, parse_grid_csv};
use nehari::solver::{minimize, SolverConfig};

fn square(n: usize) -> GridDomain {
    GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 1.0)], &[], 1.0 / n as f64).unwrap()
}

fn dumbbell() -> GridDomain {
    GridDomain::build_dumbbell(
        &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.5, 0.0, 2.5, 1.0)],
        &[Rect::new(1.0, 0.375, 1.5, 0.625)],
        0.125,
    )
    .unwrap()
}

fn positive_field(k: usize, n: usize) -> impl Strategy<Value = Field> {
    prop::collection::vec(prop::collection::vec(0.05f64..3.0, n), k).prop_map(Field::from_components)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn riesz_inverts_stiffness(f in prop::collection::vec(-1.0f64..1.0, 49)) {
        let d = square(8);
        let x = Field::from_components(vec![f.clone()]);
        let back = x.riesz(&d).stiffness(&d);
        for (a, b) in back.comp(0).iter().zip(&f) {
            prop_assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn cubic_euler_identity(mu in prop::collection::vec(0.1f64..3.0, 3),
                            b in prop::collection::vec(-2.0f64..2.0, 3),
                            y in prop::collection::vec(-5.0f64..5.0, 3)) {
        let beta = vec![
            vec![0.0, b[0], b[1]],
            vec![b[0], 0.0, b[2]],
            vec![b[1], b[2], 0.0],
        ];
        let p = Potential::cubic(mu, beta).unwrap();
        let mut g = vec![0.0; 3];
        p.grad_into(&y, &mut g);
        let lhs: f64 = g.iter().zip(&y).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - 4.0 * p.value(&y)).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn energy_diff_agrees_with_plain_difference(a in positive_field(2, 49), b in positive_field(2, 49)) {
        let d = square(8);
        let p = Potential::cubic(vec![1.0, 1.5], vec![vec![0.0, -0.5], vec![-0.5, 0.0]]).unwrap();
        let plain = energy(&d, &p, &a) - energy(&d, &p, &b);
        let diff = energy_diff(&d, &p, &a, &b);
        let scale = energy(&d, &p, &a).abs() + energy(&d, &p, &b).abs();
        prop_assert!((plain - diff).abs() <= 1e-12 * scale);
    }

    #[test]
    fn retraction_lands_on_the_constraint(u in positive_field(2, 49), beta in -1.0f64..0.5) {
        let d = square(8);
        let p = Potential::cubic(vec![1.0, 1.0], vec![vec![0.0, beta], vec![beta, 0.0]]).unwrap();
        let spec = ConstraintSpec::ground_state(2, d.len());
        if let Ok(v) = scale_to_nehari(&d, &p, &spec, &u) {
            let r = residuals(&d, &p, &spec, &v).unwrap();
            prop_assert!(r.finite_max() <= 1e-10 * v.norm_sq(&d).max(1.0));
        }
    }

    #[test]
    fn single_component_retraction_is_a_fixed_point(u in positive_field(1, 49)) {
        let d = square(8);
        let p = Potential::single_cubic(1.0).unwrap();
        let spec = ConstraintSpec::ground_state(1, d.len());
        let v = scale_to_nehari(&d, &p, &spec, &u).unwrap();
        let w = scale_to_nehari(&d, &p, &spec, &v).unwrap();
        let diff = v.sub(&w).norm_sq(&d);
        prop_assert!(diff <= 1e-20 * v.norm_sq(&d));
    }

    #[test]
    fn cutoffs_stay_in_range_and_disjoint(ramp in 0.01f64..0.249) {
        let d = dumbbell();
        let c = build_cutoffs(&d, ramp).unwrap();
        for k in 0..d.len() {
            let (a, b) = (c.eta(1)[k], c.eta(2)[k]);
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            prop_assert_eq!(a * b, 0.0);
            prop_assert!(c.grad_sq(1)[k] >= 0.0);
        }
    }

    #[test]
    fn floats_round_trip_exactly(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn grid_dump_round_trip(f in prop::collection::vec(-1e3f64..1e3, 49)) {
        let d = square(8);
        let (widths, values) = parse_grid_csv(&grid_csv(&d, &f, Some("x"))).unwrap();
        prop_assert_eq!(widths, vec![d.nx(); d.ny()]);
        prop_assert_eq!(d.from_grid(&values).unwrap(), f);
    }

    #[test]
    fn pattern_count_and_targets(n in 1usize..4, k in 1usize..3) {
        let pats = enumerate_patterns(n, k);
        prop_assert_eq!(pats.len(), ((1usize << n) - 1).pow(k as u32));
        let mut sigs: Vec<BumpSignature> = pats.iter().map(|p| BumpSignature::target(p, n)).collect();
        sigs.sort();
        sigs.dedup();
        prop_assert_eq!(sigs.len(), pats.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn accepted_steps_strictly_decrease_energy(u in positive_field(1, 49)) {
        let d = square(8);
        let p = Potential::single_cubic(1.0).unwrap();
        let spec = ConstraintSpec::ground_state(1, d.len());
        let cfg = SolverConfig { max_iters: 200, ..SolverConfig::default() };
        let (_, rep) = minimize(&d, &p, &spec, None, &u, &cfg).unwrap();
        for r in &rep.trace[..rep.trace.len() - 1] {
            prop_assert!(r.energy_drop < 0.0);
        }
        for w in rep.trace.windows(2) {
            prop_assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs());
        }
    }
}
