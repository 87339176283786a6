//! Wide-target interpolation checks across k and random admissible vectors.

use proptest::prelude::*;

use widthnet::{
    build_wide_target, grid_points, max_grid_relative_error, pwl_to_affine, sample_e0,
    second_layer_values,
};

#[test]
fn interpolation_holds_for_k_3_4_5() {
    for k in [3usize, 4, 5] {
        for seed in 0..20 {
            let a = sample_e0(k, 1000 * k as u64 + seed).unwrap();
            let net = build_wide_target(k, &a, 1).unwrap();
            assert_eq!(net.width(), 2 * k * k);
            assert_eq!(net.depth(), 3);
            let err = max_grid_relative_error(&net, &a).unwrap();
            assert!(err <= 1e-9, "k={} seed={} err={}", k, seed, err);
        }
    }
}

#[test]
fn second_differences_positive_over_many_vectors() {
    for seed in 0..1000 {
        let a = sample_e0(2, seed).unwrap();
        let v = second_layer_values(&a);
        assert!(
            v.iter().all(|x| *x > 0.0),
            "seed {} produced a non-positive second difference",
            seed
        );
    }
}

#[test]
fn telescoping_reconstruction_is_tight() {
    for k in [2usize, 3] {
        let group = 2 * k * k;
        for seed in 0..20 {
            let a = sample_e0(k, 7000 + seed).unwrap();
            let v = second_layer_values(&a);
            for j in 0..k * k {
                for iprime in 0..group {
                    let acc: f64 = (0..=iprime)
                        .map(|i| v[j * group + i] * (iprime - i + 1) as f64)
                        .sum();
                    let want = a.values()[j * group + iprime];
                    assert!(
                        ((acc - want) / want).abs() <= 1e-12,
                        "k={} seed={} group={} entry={}",
                        k,
                        seed,
                        j,
                        iprime
                    );
                }
            }
        }
    }
}

#[test]
fn grid_gaps_within_groups_are_quarter_inverse_k_squared() {
    for k in [2usize, 3, 4, 5] {
        let g = grid_points(k).unwrap();
        let group = 2 * k * k;
        let gap = 1.0 / (4 * k * k) as f64;
        for m in 1..g.len() {
            assert!(g.points()[m] > g.points()[m - 1]);
            if m % group != 0 {
                assert!((g.points()[m] - g.points()[m - 1] - gap).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pwl_reconstruction_is_exact_at_the_knots(
        values in proptest::collection::vec(-10.0f64..10.0, 18),
    ) {
        let (w, bias) = pwl_to_affine(&values, 18).unwrap();
        for (m, want) in values.iter().enumerate() {
            let x = m as f64;
            let got: f64 = bias
                + w.iter()
                    .enumerate()
                    .map(|(i, c)| c * (x - i as f64).max(0.0))
                    .sum::<f64>();
            let tol = 1e-12 * want.abs().max(1.0);
            prop_assert!((got - want).abs() <= tol, "knot {}: {} vs {}", m, got, want);
        }
    }
}
