use noether_paths::optimize::grad_check;
use noether_paths::prelude::*;
use proptest::prelude::*;

fn ou() -> SdeSystem {
    isotropic_ou(&OuParams::default()).unwrap()
}

fn ddm() -> SdeSystem {
    constant_drift_1d(&DriftDiffusionParams::default()).unwrap()
}

fn path_2d(flat: &[f64], t_start: f64, duration: f64) -> DiscretizedPath {
    let nodes: Vec<Vector> = flat.chunks(2).map(Vector::from_column_slice).collect();
    DiscretizedPath::from_nodes(&nodes, t_start, duration).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn action_is_nonnegative(flat in prop::collection::vec(-2.0..2.0f64, 6..40), duration in 0.1..5.0f64) {
        let n = flat.len() / 2 * 2;
        let path = path_2d(&flat[..n], 0.0, duration);
        prop_assert!(action(&ou(), &path).unwrap() >= 0.0);
        let piet = piet_network_unverified(&PietParams::default()).unwrap();
        prop_assert!(action(&piet, &path).unwrap() >= 0.0);
    }

    #[test]
    fn ou_action_is_rotation_invariant(flat in prop::collection::vec(-2.0..2.0f64, 6..40), angle in -3.2..3.2f64) {
        let n = flat.len() / 2 * 2;
        let path = path_2d(&flat[..n], 0.0, 1.0);
        let (c, s) = (angle.cos(), angle.sin());
        let rotated: Vec<f64> = flat[..n]
            .chunks(2)
            .flat_map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
            .collect();
        let a = action(&ou(), &path).unwrap();
        let b = action(&ou(), &path_2d(&rotated, 0.0, 1.0)).unwrap();
        prop_assert!(rel(a, b) < 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn autonomous_action_ignores_time_shift(flat in prop::collection::vec(-2.0..2.0f64, 6..40), shift in -10.0..10.0f64) {
        let n = flat.len() / 2 * 2;
        let a = action(&ou(), &path_2d(&flat[..n], 0.0, 2.0)).unwrap();
        let b = action(&ou(), &path_2d(&flat[..n], shift, 2.0)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn drift_diffusion_action_is_translation_invariant(xs in prop::collection::vec(-3.0..3.0f64, 3..30), c in -5.0..5.0f64) {
        let nodes: Vec<Vector> = xs.iter().map(|&x| Vector::from_element(1, x)).collect();
        let moved: Vec<Vector> = xs.iter().map(|&x| Vector::from_element(1, x + c)).collect();
        let a = action(&ddm(), &DiscretizedPath::from_nodes(&nodes, 0.0, 1.0).unwrap()).unwrap();
        let b = action(&ddm(), &DiscretizedPath::from_nodes(&moved, 0.0, 1.0).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn riding_the_drift_costs_nothing(x0 in -5.0..5.0f64, duration in 0.1..10.0f64, k in 2usize..200) {
        let sys = ddm();
        let v = DriftDiffusionParams::default().v;
        let start = Vector::from_element(1, x0);
        let end = Vector::from_element(1, x0 + v * duration);
        let path = init_path(&start, &end, duration, k, InitStrategy::Linear).unwrap();
        prop_assert!(action(&sys, &path).unwrap() < 1e-20);
    }

    #[test]
    fn gradient_matches_differences(flat in prop::collection::vec(-1.5..1.5f64, 8..30)) {
        let n = flat.len() / 2 * 2;
        let path = path_2d(&flat[..n], 0.0, 1.0);
        prop_assert!(grad_check(&ou(), &path, false).unwrap() < 1e-5);
    }

    #[test]
    fn trajectory_csv_round_trips(xs in prop::collection::vec(-1e6..1e6f64, 4..40), t0 in -10.0..10.0f64) {
        let n = xs.len() / 2;
        let times: Vec<f64> = (0..n).map(|k| t0 + 0.25 * k as f64).collect();
        let states: Vec<Vector> = xs[..2 * n].chunks(2).map(Vector::from_column_slice).collect();
        let tr = Trajectory::new(times, states).unwrap();
        let back = Trajectory::read_csv(tr.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back.times(), tr.times());
        prop_assert_eq!(back.states(), tr.states());
    }

    #[test]
    fn transition_time_decreases_with_energy(e1 in -0.03..5.0f64, de in 1e-3..5.0f64, xf in 0.1..3.0f64) {
        let sys = ddm();
        let a = transition_time_1d(&sys, 0.0, xf, e1).unwrap();
        let b = transition_time_1d(&sys, 0.0, xf, e1 + de).unwrap();
        prop_assert!(b < a, "t*({}) = {} vs t*({}) = {}", e1, a, e1 + de, b);
    }

    #[test]
    fn ring_score_is_radial(x in -3.0..3.0f64, y in -3.0..3.0f64, t in 0.0..2.0f64) {
        let p = RingParams::default();
        let s = ring_score(&Vector::from_column_slice(&[x, y]), t, &p);
        let cross = x * s[1] - y * s[0];
        prop_assert!(cross.abs() <= 1e-12 * (1.0 + s.norm() * (x.hypot(y))));
    }

    #[test]
    fn constant_series_has_no_variation(c in -1e3..1e3f64, n in 1usize..50) {
        let v = variation(&vec![c; n]);
        // the mean is a rounded sum
        prop_assert!(v.relative <= 64.0 * f64::EPSILON, "{:?}", v);
    }
}
