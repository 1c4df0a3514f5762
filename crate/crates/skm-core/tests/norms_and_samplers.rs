//! Cross-checks of the matrix norms against a dense linear-algebra oracle,
//! and distribution tests for every sampler the access structure offers.

use nalgebra::DMatrix;
use rand::Rng;
use skm_core::rng::stream;
use skm_core::{SampleAccessMatrix, SpectralMode};

fn random_matrix(d: usize, n: usize, zero_frac: f64, rng: &mut skm_core::SkmRng) -> Vec<f64> {
    (0..n * d)
        .map(|_| {
            if rng.random::<f64>() < zero_frac {
                0.0
            } else {
                4.0 * (rng.random::<f64>() - 0.5)
            }
        })
        .collect()
}

/// The five norms are ordered: max column norm <= spectral <= Frobenius
/// <= sum of column norms <= entrywise l1. Checked on 1000 random shapes up
/// to 32 x 32 with the spectral value taken from a dense SVD.
#[test]
fn norm_chain_holds_on_random_matrices() {
    let mut rng = stream(0x4E4F524D);
    for case in 0..1000 {
        let d = rng.random_range(1..=32);
        let n = rng.random_range(1..=32);
        let values = random_matrix(d, n, 0.1, &mut rng);
        let m = SampleAccessMatrix::from_columns(d, n, values.clone()).unwrap();
        let norms = m.norms(SpectralMode::FrobeniusUpper).unwrap();

        let dense = DMatrix::from_column_slice(d, n, &values);
        let sigma = dense.singular_values()[0];

        let slack = 1.0 + 1e-9;
        assert!(
            norms.norm_2inf <= sigma * slack + 1e-12,
            "case {case}: max column norm {} exceeds spectral {sigma}",
            norms.norm_2inf
        );
        assert!(
            sigma <= norms.frobenius * slack + 1e-12,
            "case {case}: spectral {sigma} exceeds Frobenius {}",
            norms.frobenius
        );
        assert!(
            norms.frobenius <= norms.norm_21 * slack + 1e-12,
            "case {case}: Frobenius {} exceeds column-norm sum {}",
            norms.frobenius,
            norms.norm_21
        );
        assert!(
            norms.norm_21 <= norms.norm_11 * slack + 1e-12,
            "case {case}: column-norm sum {} exceeds entrywise l1 {}",
            norms.norm_21,
            norms.norm_11
        );
        // The default spectral stand-in is the Frobenius upper bound.
        assert_eq!(norms.spectral_upper, norms.frobenius);
    }
}

#[test]
fn power_iteration_matches_dense_svd() {
    for seed in 0..10u64 {
        let mut rng = stream(0x50574954 ^ seed);
        let (d, n) = (5, 8);
        let values = random_matrix(d, n, 0.0, &mut rng);
        let m = SampleAccessMatrix::from_columns(d, n, values.clone()).unwrap();
        let norms = m
            .norms(SpectralMode::PowerIteration {
                tol: 1e-12,
                max_iters: 200_000,
            })
            .unwrap();
        let sigma = DMatrix::from_column_slice(d, n, &values).singular_values()[0];
        let rel = (norms.spectral_upper - sigma).abs() / sigma;
        assert!(
            rel <= 1e-6,
            "seed {seed}: power iteration {} vs SVD {sigma} (rel {rel})",
            norms.spectral_upper
        );
    }
}

#[test]
fn entries_round_trip_bit_identically() {
    let mut rng = stream(0x524F554E);
    // Mix magnitudes across ~200 orders of magnitude to stress storage.
    let (d, n) = (7, 11);
    let values: Vec<f64> = (0..n * d)
        .map(|_| {
            let mag = 10f64.powi(rng.random_range(-100..=100));
            (rng.random::<f64>() - 0.5) * mag
        })
        .collect();
    let m = SampleAccessMatrix::from_columns(d, n, values.clone()).unwrap();
    for i in 0..n {
        for l in 0..d {
            let got = m.entry(i, l).unwrap();
            assert_eq!(
                got.to_bits(),
                values[i * d + l].to_bits(),
                "entry ({i}, {l}) did not round-trip"
            );
        }
    }
}

fn total_variation(observed: &[u64], expected: &[f64], draws: u64) -> f64 {
    0.5 * observed
        .iter()
        .zip(expected.iter())
        .map(|(&o, &e)| (o as f64 / draws as f64 - e).abs())
        .sum::<f64>()
}

/// Empirical frequencies over one million draws match the analytic
/// distribution within total-variation distance 0.005, for each sampler, on
/// a matrix with at most 64 entries (including zeros, which must never be
/// drawn by the weighted samplers).
#[test]
fn sampler_frequencies_match_analytic_distributions() {
    let mut rng = stream(0x54561234);
    let (d, n) = (8, 8);
    let mut values = random_matrix(d, n, 0.15, &mut rng);
    // Force a fully zero column to prove it is unreachable by weight.
    for l in 0..d {
        values[3 * d + l] = 0.0;
    }
    let m = SampleAccessMatrix::from_columns(d, n, values.clone()).unwrap();
    let draws = 1_000_000u64;

    // Column draws proportional to Euclidean column norms.
    let col_probs: Vec<f64> = (0..n)
        .map(|i| m.col_norm(i).unwrap() / m.norm_21())
        .collect();
    let mut counts = vec![0u64; n];
    for _ in 0..draws {
        counts[m.sample_column_by_norm(&mut rng).unwrap()] += 1;
    }
    let tv = total_variation(&counts, &col_probs, draws);
    assert!(tv <= 0.005, "column-by-norm sampler TV {tv}");
    assert_eq!(counts[3], 0, "zero-norm column drawn by the norm sampler");

    // Row draws within one column, proportional to squared entries.
    let target_col = 1usize;
    let col = values[target_col * d..(target_col + 1) * d].to_vec();
    let col_sq: f64 = col.iter().map(|v| v * v).sum();
    let row_probs: Vec<f64> = col.iter().map(|v| v * v / col_sq).collect();
    let mut counts = vec![0u64; d];
    for _ in 0..draws {
        counts[m.sample_row_in_column(target_col, &mut rng).unwrap()] += 1;
    }
    let tv = total_variation(&counts, &row_probs, draws);
    assert!(tv <= 0.005, "row-in-column sampler TV {tv}");

    // Global entry draws proportional to absolute values.
    let entry_probs: Vec<f64> = values.iter().map(|v| v.abs() / m.norm_11()).collect();
    let mut counts = vec![0u64; n * d];
    for _ in 0..draws {
        let (i, l) = m.sample_entry(&mut rng).unwrap();
        counts[i * d + l] += 1;
    }
    let tv = total_variation(&counts, &entry_probs, draws);
    assert!(tv <= 0.005, "global entry sampler TV {tv}");
    for (flat, (&c, &v)) in counts.iter().zip(values.iter()).enumerate() {
        assert!(
            v != 0.0 || c == 0,
            "zero entry {flat} drawn by the entry sampler"
        );
    }

    // Uniform column draws.
    let mut counts = vec![0u64; n];
    for _ in 0..draws {
        counts[m.sample_column_uniform(&mut rng)] += 1;
    }
    let uniform = vec![1.0 / n as f64; n];
    let tv = total_variation(&counts, &uniform, draws);
    assert!(tv <= 0.005, "uniform column sampler TV {tv}");
}
