//! Analytic properties of the inner-product estimator and the label logic,
//! checked by exact enumeration (integer arithmetic on gridded inputs) and
//! by the error-propagation inequality the centroid correction relies on.

use rand::Rng;
use skm_core::rng::stream;
use skm_core::{approx_label, exact_label, CentroidSet, EstimatorConfig, SampleAccessMatrix};

/// Draw integer grid vectors `a, b in [-8, 8]^d`, interpreted as `v = a/4`,
/// `c = b/4`. Returns `(a, b)` with `a` not identically zero.
fn grid_pair(d: usize, rng: &mut skm_core::SkmRng) -> (Vec<i64>, Vec<i64>) {
    loop {
        let a: Vec<i64> = (0..d).map(|_| rng.random_range(-8..=8)).collect();
        if a.iter().all(|&x| x == 0) {
            continue;
        }
        let b: Vec<i64> = (0..d).map(|_| rng.random_range(-8..=8)).collect();
        return (a, b);
    }
}

/// The single-draw estimator samples coordinate `l` with probability
/// `v_l^2 / ||v||^2` and returns `X_l = ||v||^2 c_l / v_l`. On grid inputs the
/// first and second moments are exact rationals:
///
/// * `E[X] = <v, c>` (numerator `sum a_l b_l`, denominator 16) — coordinates
///   with `v_l = 0` are unreachable, but they contribute nothing to the inner
///   product either, so unbiasedness is unconditional;
/// * `E[X^2] = ||v||^2 * sum_{l in supp(v)} c_l^2` (numerator
///   `S * sum_supp b^2`, denominator 256, with `S = sum a^2`), which is at
///   most `||v||^2 ||c||^2` — the bound the group sizes are derived from.
///
/// Verified in exact i128 arithmetic against an f64 enumeration of the
/// estimator's documented sampling distribution.
#[test]
fn single_draw_moments_match_exact_rationals() {
    let mut rng = stream(0x454E554D);
    for case in 0..500 {
        let d = 1 + (case % 8);
        let (a, b) = grid_pair(d, &mut rng);

        let s: i128 = a.iter().map(|&x| (x * x) as i128).sum();
        let ab: i128 = a.iter().zip(b.iter()).map(|(&x, &y)| (x * y) as i128).sum();
        let bb: i128 = b.iter().map(|&y| (y * y) as i128).sum();
        let bb_supp: i128 = a
            .iter()
            .zip(b.iter())
            .filter(|(&x, _)| x != 0)
            .map(|(_, &y)| (y * y) as i128)
            .sum();

        // Cauchy-Schwarz restricted to the support: Var >= 0.
        let ab_supp = ab; // a_l = 0 terms vanish from the full sum anyway.
        assert!(
            s * bb_supp >= ab_supp * ab_supp,
            "variance must be nonnegative"
        );

        // f64 enumeration of the estimator's actual sampling distribution.
        let v: Vec<f64> = a.iter().map(|&x| x as f64 / 4.0).collect();
        let c: Vec<f64> = b.iter().map(|&y| y as f64 / 4.0).collect();
        let v_sq: f64 = v.iter().map(|x| x * x).sum();
        let mut mean = 0.0f64;
        let mut second = 0.0f64;
        for l in 0..d {
            if v[l] == 0.0 {
                continue; // unreachable by the sampler
            }
            let p = v[l] * v[l] / v_sq;
            let x = v_sq * c[l] / v[l];
            mean += p * x;
            second += p * x * x;
        }
        let exact_mean = ab as f64 / 16.0;
        let exact_second = (s * bb_supp) as f64 / 256.0;
        let norm_product_bound = (s * bb) as f64 / 256.0;
        assert!(
            (mean - exact_mean).abs() <= 1e-10 * (1.0 + exact_mean.abs()),
            "case {case}: enumerated mean {mean} vs exact {exact_mean}"
        );
        assert!(
            (second - exact_second).abs() <= 1e-10 * (1.0 + exact_second),
            "case {case}: enumerated second moment {second} vs exact {exact_second}"
        );
        let variance = second - mean * mean;
        assert!(
            variance <= norm_product_bound * (1.0 + 1e-12) + 1e-12,
            "case {case}: variance {variance} exceeds the product-of-norms bound {norm_product_bound}"
        );
    }
}

/// With the zero-noise oracle, every relaxed distance is exactly
/// `||v||^2 + ||c||^2 - 2 <v,c>`, so the relaxed label agrees with the exact
/// one on every instance (no ties in random data).
#[test]
fn oracle_estimator_reproduces_exact_labels() {
    let mut rng = stream(0x4F52414C);
    let cfg = EstimatorConfig {
        oracle: true,
        ..EstimatorConfig::default()
    };
    for case in 0..20 {
        let d = rng.random_range(2..=8);
        let n = rng.random_range(2..=16);
        let k = rng.random_range(1..=4);
        let values: Vec<f64> = (0..n * d)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        let m = SampleAccessMatrix::from_columns(d, n, values).unwrap();
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let c = CentroidSet::from_rows(&rows, 0).unwrap();
        for i in 0..n {
            let exact = exact_label(&m, i, &c).unwrap();
            let relaxed = approx_label(&m, i, &c, 1e-3, 0.1, &cfg, &mut rng).unwrap();
            assert_eq!(
                relaxed.label, exact.label,
                "case {case}, column {i}: oracle label diverged"
            );
            assert_eq!(relaxed.samples_used, 0, "oracle mode must not sample");
            assert!(relaxed.exact, "oracle distances are exact");
            // Distance identity: matches the polarization form exactly,
            // using the structure's stored (compensated) squared column norm.
            let col = (0..d).map(|l| m.entry(i, l).unwrap()).collect::<Vec<_>>();
            let col_sq: f64 = m.col_sq_norm(i).unwrap();
            for (j, cent) in c.iter().enumerate() {
                let c_sq: f64 = cent.iter().map(|x| x * x).sum();
                let dot: f64 = col.iter().zip(cent.iter()).map(|(x, y)| x * y).sum();
                let want = col_sq + c_sq - 2.0 * dot;
                assert_eq!(
                    relaxed.dists_sq[j].to_bits(),
                    want.to_bits(),
                    "case {case}: distance identity must hold bit-exactly"
                );
            }
        }
    }
}

/// Permuting the centroid order permutes the label accordingly when all
/// distances are distinct; exact ties always resolve to the lowest index.
#[test]
fn label_is_equivariant_under_centroid_permutation() {
    let mut rng = stream(0x5045524D);
    for _ in 0..100 {
        let d = rng.random_range(1..=6);
        let k = rng.random_range(2..=5);
        let values: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let m = SampleAccessMatrix::from_columns(d, 1, values).unwrap();
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let c = CentroidSet::from_rows(&rows, 0).unwrap();
        let base = exact_label(&m, 0, &c).unwrap();

        // Rotate the centroid list by r; the winning centroid moves with it.
        let r = rng.random_range(0..k);
        let rotated: Vec<Vec<f64>> = (0..k).map(|j| rows[(j + r) % k].clone()).collect();
        let c_rot = CentroidSet::from_rows(&rotated, 0).unwrap();
        let rotated_label = exact_label(&m, 0, &c_rot).unwrap().label;
        assert_eq!((rotated_label + r) % k, base.label);
    }

    // Duplicate centroids tie exactly; the lowest index must win.
    let m = SampleAccessMatrix::from_columns(2, 1, vec![1.0, 1.0]).unwrap();
    let c = CentroidSet::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]], 0).unwrap();
    assert_eq!(exact_label(&m, 0, &c).unwrap().label, 0);
}

/// The correction-factor analysis rests on: if `|a - a~| <= eps <= a/2`
/// then `|1/a~ - 1/a| <= 2 eps / a^2`. Checked on 10^4 random pairs with a
/// hair of floating-point slack.
#[test]
fn reciprocal_error_propagation_bound() {
    let mut rng = stream(0x52454350);
    for case in 0..10_000 {
        // a spans six orders of magnitude.
        let a = 10f64.powf(rng.random::<f64>() * 6.0 - 3.0);
        let eps = rng.random::<f64>() * a / 2.0;
        let atilde = a - eps + 2.0 * eps * rng.random::<f64>();
        let lhs = (1.0 / atilde - 1.0 / a).abs();
        let rhs = 2.0 * eps / (a * a);
        assert!(
            lhs <= rhs * (1.0 + 1e-9) + f64::MIN_POSITIVE,
            "case {case}: |1/a~ - 1/a| = {lhs} > 2 eps / a^2 = {rhs} (a = {a}, eps = {eps})"
        );
    }
}
