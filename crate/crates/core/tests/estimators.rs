use netsample::estimators::{self, PairTable};
use proptest::prelude::*;

fn sample(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..max).prop_flat_map(|n| {
        (
            prop::collection::vec(-50.0f64..50.0, n),
            prop::collection::vec(0.01f64..=1.0, n),
        )
    })
}

/// Ordered-pair double sum written out directly: diagonal terms carry
/// `f_i (1 - f_i)`, each listed edge contributes `(i, j)` and `(j, i)`.
fn double_sum(y: &[f64], f: &[f64], edges: &[(usize, usize)], pairs: &PairTable, mu: f64) -> f64 {
    let n = y.len();
    let mut adjacent = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adjacent[a][b] = true;
        adjacent[b][a] = true;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j {
                f[i] * (1.0 - f[i])
            } else if adjacent[i][j] {
                let fij = pairs.get(i, j).unwrap();
                (fij - f[i] * f[j]) / fij
            } else {
                continue;
            };
            total += delta * (y[i] - mu) / f[i] * (y[j] - mu) / f[j];
        }
    }
    let n_hat: f64 = f.iter().map(|v| 1.0 / v).sum();
    total / (n_hat * n_hat)
}

#[test]
fn two_node_edge_variance_by_hand() {
    // y = (1, 0), f = (0.5, 0.5), f_01 = 0.4: mu = 0.5, n_hat = 4
    // diagonal: 2 * 0.5 * 0.25 / 0.5 = 0.5
    // edge: 2 * ((0.4 - 0.25) / 0.4) * (0.5 / 0.5) * (-0.5 / 0.5) = -0.75
    let y = [1.0, 0.0];
    let f = [0.5, 0.5];
    let pairs: PairTable = [(0, 1, 0.4)].into_iter().collect();
    let v = estimators::var_taylor_edges(&y, &f, &[(0, 1)], &pairs, 0.5).unwrap();
    assert!((v.raw - (0.5 - 0.75) / 16.0).abs() < 1e-15);
    assert!(v.clamped);
    assert_eq!(v.variance, 0.0);

    let pairs: PairTable = [(0, 1, 0.2)].into_iter().collect();
    let v = estimators::var_taylor_edges(&y, &f, &[(0, 1)], &pairs, 0.5).unwrap();
    // edge: 2 * (-0.05 / 0.2) * (1) * (-1) = 0.5
    assert!((v.variance - 1.0 / 16.0).abs() < 1e-15);
    assert!(!v.clamped);
}

#[test]
fn missing_pair_is_an_error() {
    let r = estimators::var_taylor_edges(&[1.0, 0.0], &[0.5, 0.5], &[(0, 1)], &PairTable::new(), 0.5);
    assert!(r.is_err());
}

#[test]
fn normal_quantile_reference_values() {
    assert!((estimators::normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
    assert!((estimators::normal_quantile(0.95) - 1.6448536269514722).abs() < 1e-12);
    assert!(estimators::normal_quantile(0.5).abs() < 1e-15);
    assert!((estimators::normal_quantile(1e-10) + 6.361340902404056).abs() < 1e-9);
}

proptest! {
    #[test]
    fn mu_f_is_scale_invariant((y, f) in sample(30), c in 1e-3f64..1e3) {
        let a = estimators::mu_f(&y, &f).unwrap();
        let cf: Vec<f64> = f.iter().map(|v| v * c).collect();
        let b = estimators::mu_f(&y, &cf).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn mu_f_lies_within_the_data((y, f) in sample(30)) {
        let m = estimators::mu_f(&y, &f).unwrap();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-9 && m <= hi + 1e-9);
    }

    #[test]
    fn equal_weights_give_the_sample_mean((y, _) in sample(30), w in 0.01f64..1.0) {
        let f = vec![w; y.len()];
        let a = estimators::mu_f(&y, &f).unwrap();
        let b = estimators::sample_mean(&y).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        let v1 = estimators::var_simple_n(&y, &f, a).unwrap();
        let v2 = estimators::var_sample_mean(&y).unwrap();
        prop_assert!((v1 - v2).abs() <= 1e-9 * v2.max(1e-12));
    }

    #[test]
    fn variances_are_nonnegative_and_ordered((y, f) in sample(30)) {
        let mu = estimators::mu_f(&y, &f).unwrap();
        let diag = estimators::var_taylor_diag(&y, &f, mu).unwrap();
        let cons = estimators::var_taylor_conservative(&y, &f, mu).unwrap();
        prop_assert!(diag >= 0.0);
        prop_assert!(cons >= diag);
        prop_assert!(estimators::var_simple_n(&y, &f, mu).unwrap() >= 0.0);
        prop_assert!(estimators::var_simple_taylor(&y, &f, mu).unwrap() >= 0.0);
        let empty = estimators::var_taylor_edges(&y, &f, &[], &PairTable::new(), mu).unwrap();
        prop_assert!((empty.variance - diag).abs() <= 1e-12 * diag.max(1e-300));
    }

    #[test]
    fn census_has_zero_diagonal_variance(y in prop::collection::vec(-5.0f64..5.0, 2..20)) {
        let f = vec![1.0; y.len()];
        let mu = estimators::mu_f(&y, &f).unwrap();
        prop_assert_eq!(estimators::var_taylor_diag(&y, &f, mu).unwrap(), 0.0);
    }

    #[test]
    fn edge_variance_matches_the_double_sum(
        (y, f) in sample(12),
        seed_edges in prop::collection::vec((0usize..12, 0usize..12, 0.05f64..1.0), 0..20),
    ) {
        let n = y.len();
        let mut edges = Vec::new();
        let mut pairs = PairTable::new();
        for (a, b, u) in seed_edges {
            let (a, b) = (a % n, b % n);
            if a == b || pairs.get(a, b).is_some() {
                continue;
            }
            // any joint frequency not exceeding either marginal
            pairs.insert(a, b, u * f[a].min(f[b]));
            edges.push((a, b));
        }
        let mu = estimators::mu_f(&y, &f).unwrap();
        let v = estimators::var_taylor_edges(&y, &f, &edges, &pairs, mu).unwrap();
        let expect = double_sum(&y, &f, &edges, &pairs, mu);
        prop_assert!((v.raw - expect).abs() <= 1e-9 * expect.abs().max(1e-9));
        prop_assert_eq!(v.clamped, expect < 0.0);
        prop_assert!(v.variance >= 0.0);
    }

    #[test]
    fn interval_half_width_is_z_sd(point in -10.0f64..10.0, variance in 0.0f64..5.0) {
        let ci = estimators::confidence_interval(point, variance, 0.05).unwrap();
        let z = estimators::normal_quantile(0.975);
        prop_assert_eq!(ci.half_width, z * variance.sqrt());
        prop_assert!(ci.lo <= point && point <= ci.hi);
    }

    #[test]
    fn normal_quantile_is_antisymmetric(p in 1e-8f64..0.5) {
        let a = estimators::normal_quantile(p);
        let b = estimators::normal_quantile(1.0 - p);
        prop_assert!((a + b).abs() < 1e-9);
        prop_assert!(a < 0.0);
    }
}
