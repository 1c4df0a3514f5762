//! Closed-form query/time cost predictions for the sampled iterations, their
//! quantum counterparts, and the matching lower bounds.
//!
//! All formulas are evaluated with unit leading constants and polylog factors
//! written as base-2 logarithms clamped to at least 1, so predictions are
//! order-of-magnitude comparators, not wall-clock estimates. Inputs are
//! echoed into the result so downstream reports are self-describing.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SkmError};
use crate::sample_access::MatrixNorms;

/// Cost-model rows. The `c`/`q` codes mirror the run modes: `1` = exact
/// assignment (column sampling), `2` = sampled assignment (entry sampling).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostAlgorithm {
    /// Classical sampled iteration with exact labels.
    C1,
    /// Classical sampled iteration with relaxed labels.
    C2,
    /// Quantum analogue of `C1`.
    Q1,
    /// Quantum analogue of `C2`.
    Q2,
    /// Classical per-iteration query lower bound.
    LbClassical,
    /// Quantum per-iteration query lower bound.
    LbQuantum,
}

impl CostAlgorithm {
    /// All rows, in display order.
    pub const ALL: [CostAlgorithm; 6] = [
        CostAlgorithm::C1,
        CostAlgorithm::C2,
        CostAlgorithm::Q1,
        CostAlgorithm::Q2,
        CostAlgorithm::LbClassical,
        CostAlgorithm::LbQuantum,
    ];

    /// True for the two rows whose formulas involve `tau`.
    pub fn needs_tau(self) -> bool {
        matches!(self, CostAlgorithm::C2 | CostAlgorithm::Q2)
    }
}

/// Instance parameters entering the cost formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostInputs {
    pub n: u64,
    pub d: u64,
    pub k: u64,
    pub epsilon: f64,
    /// Required (positive) for the sampled-assignment rows, ignored elsewhere.
    pub tau: Option<f64>,
    pub delta: f64,
    /// Use the stronger quantum memory model where it changes the time row.
    pub qrag: bool,
}

/// A cost prediction bundled with the inputs and norms that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub algorithm: CostAlgorithm,
    /// Predicted query count (matrix accesses).
    pub queries: f64,
    /// Predicted time (query count times per-query and bookkeeping factors).
    pub time: f64,
    /// Whether the stronger quantum memory model was applied (only ever true
    /// for the quantum rows).
    pub qrag_applied: bool,
    pub inputs: CostInputs,
    pub norms: MatrixNorms,
}

/// Base-2 logarithm clamped to at least 1, the polylog convention used by
/// every row.
#[inline]
fn lg(x: f64) -> f64 {
    x.log2().max(1.0)
}

/// Predict the cost of one iteration under `algorithm`.
pub fn predict_cost(
    algorithm: CostAlgorithm,
    norms: &MatrixNorms,
    inputs: &CostInputs,
) -> Result<CostEstimate> {
    if inputs.n == 0 || inputs.d == 0 || inputs.k == 0 {
        return Err(SkmError::InvalidParams {
            reason: format!(
                "n, d, k must be positive, got n={}, d={}, k={}",
                inputs.n, inputs.d, inputs.k
            ),
        });
    }
    if !(inputs.epsilon > 0.0) || !inputs.epsilon.is_finite() {
        return Err(SkmError::InvalidParams {
            reason: format!(
                "epsilon must be positive and finite, got {}",
                inputs.epsilon
            ),
        });
    }
    if !(inputs.delta > 0.0 && inputs.delta < 1.0) {
        return Err(SkmError::InvalidDelta {
            delta: inputs.delta,
        });
    }
    let tau = if algorithm.needs_tau() {
        match inputs.tau {
            None => return Err(SkmError::MissingTau),
            Some(t) if !(t > 0.0) || !t.is_finite() => return Err(SkmError::InvalidTau { tau: t }),
            Some(t) => t,
        }
    } else {
        1.0 // unused
    };

    let n = inputs.n as f64;
    let d = inputs.d as f64;
    let k = inputs.k as f64;
    let eps = inputs.epsilon;
    let s = norms.spectral_upper;
    let f = norms.frobenius;
    let n21 = norms.norm_21;
    let n11 = norms.norm_11;
    let n2i = norms.norm_2inf;
    let lf = lg(k / inputs.delta);

    let (queries, time, qrag_applied) = match algorithm {
        CostAlgorithm::C1 => {
            let base = s * s / n + n21 * n21 / (n * n);
            let q = base * (k * k * d / (eps * eps)) * lf;
            let t = base * (k * k * d / (eps * eps)) * (k + lg(n)) * lf;
            (q, t, false)
        }
        CostAlgorithm::C2 => {
            let base = s * s / n + n11 * n11 / (n * n);
            let mid = f * f * n2i * n2i / n;
            let q = base * mid * (k * k * k / (eps * eps * tau * tau)) * lf;
            (q, q * lg(n), false)
        }
        CostAlgorithm::Q1 => {
            let base = k.sqrt() * s / n.sqrt() + d.sqrt() * n21 / n;
            let q = base * (k.powf(1.5) * d / eps) * lf;
            let t = if inputs.qrag {
                q * lg(n)
            } else {
                q * (k.sqrt() + lg(n))
            };
            (q, t, inputs.qrag)
        }
        CostAlgorithm::Q2 => {
            let base = k.sqrt() * s / n.sqrt() + d.sqrt() * n11 / n;
            let mid = f * n2i / n.sqrt();
            let q = base * mid * (k.powf(1.5) / (eps * tau)) * lf;
            let t = if inputs.qrag {
                (base * mid * (k.powf(1.5) / (eps * tau)) * lg(n) + k * d) * lf
            } else {
                base * (mid * (k.powf(1.5) / (eps * tau)) * lg(n) + k * k * d / eps) * lf
            };
            (q, t, inputs.qrag)
        }
        CostAlgorithm::LbClassical => {
            let q = f64::min((f * f / n) * (k * d / (eps * eps)), n * d);
            (q, q, false)
        }
        CostAlgorithm::LbQuantum => {
            let q = f64::min((f / n.sqrt()) * (k * d / eps), n * d);
            (q, q, false)
        }
    };

    Ok(CostEstimate {
        algorithm,
        queries,
        time,
        qrag_applied,
        inputs: *inputs,
        norms: norms.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample_access::SpectralMode;

    fn norms(s2: f64, frob2: f64, n21: f64, n11: f64, n2i: f64) -> MatrixNorms {
        MatrixNorms {
            spectral_upper: s2.sqrt(),
            frobenius: frob2.sqrt(),
            norm_21: n21,
            norm_11: n11,
            norm_2inf: n2i,
            mode: SpectralMode::FrobeniusUpper,
        }
    }

    fn inputs(n: u64, d: u64, k: u64, eps: f64, tau: Option<f64>, delta: f64) -> CostInputs {
        CostInputs {
            n,
            d,
            k,
            epsilon: eps,
            tau,
            delta,
            qrag: false,
        }
    }

    /// Frozen spot value: S^2 = 125, norm_21 = 15, n = d = k = 2, eps = 1,
    /// delta = 0.5 gives (62.5 + 56.25) * 8 * log2(4) = 1900 queries.
    #[test]
    fn spot_value_for_the_exact_assignment_row() {
        let est = predict_cost(
            CostAlgorithm::C1,
            &norms(125.0, 125.0, 15.0, 20.0, 10.0),
            &inputs(2, 2, 2, 1.0, None, 0.5),
        )
        .unwrap();
        assert_eq!(est.queries, 1900.0);
        assert_eq!(est.time, 1900.0 * (2.0 + 1.0));
    }

    #[test]
    fn halving_epsilon_quadruples_c1_and_doubles_q1() {
        let nm = norms(9.0, 9.0, 7.0, 12.0, 2.0);
        for (alg, factor) in [(CostAlgorithm::C1, 4.0), (CostAlgorithm::Q1, 2.0)] {
            let a = predict_cost(alg, &nm, &inputs(64, 8, 4, 0.4, None, 0.1)).unwrap();
            let b = predict_cost(alg, &nm, &inputs(64, 8, 4, 0.2, None, 0.1)).unwrap();
            let ratio = b.queries / a.queries;
            assert!(
                (ratio - factor).abs() < 1e-12,
                "{alg:?}: ratio {ratio} != {factor}"
            );
        }
    }

    #[test]
    fn lower_bounds_saturate_at_full_matrix_size() {
        let nm = norms(400.0, 400.0, 40.0, 80.0, 5.0);
        let est = predict_cost(
            CostAlgorithm::LbClassical,
            &nm,
            &inputs(16, 4, 8, 1e-6, None, 0.1),
        )
        .unwrap();
        assert_eq!(est.queries, 64.0, "tiny epsilon clamps to n*d");
        let est = predict_cost(
            CostAlgorithm::LbQuantum,
            &nm,
            &inputs(16, 4, 8, 1e-9, None, 0.1),
        )
        .unwrap();
        assert_eq!(est.queries, 64.0);
    }

    #[test]
    fn tau_is_required_exactly_for_the_sampled_assignment_rows() {
        let nm = norms(4.0, 4.0, 4.0, 8.0, 1.0);
        for alg in CostAlgorithm::ALL {
            let res = predict_cost(alg, &nm, &inputs(32, 4, 2, 0.5, None, 0.1));
            if alg.needs_tau() {
                assert_eq!(res.unwrap_err(), SkmError::MissingTau, "{alg:?}");
            } else {
                assert!(res.is_ok(), "{alg:?}");
            }
        }
        let res = predict_cost(
            CostAlgorithm::C2,
            &nm,
            &inputs(32, 4, 2, 0.5, Some(0.0), 0.1),
        );
        assert_eq!(res.unwrap_err(), SkmError::InvalidTau { tau: 0.0 });
    }

    #[test]
    fn qrag_changes_only_quantum_time_rows() {
        let nm = norms(25.0, 25.0, 12.0, 30.0, 3.0);
        let base = inputs(128, 16, 4, 0.3, Some(0.2), 0.1);
        let qrag = CostInputs { qrag: true, ..base };
        for alg in CostAlgorithm::ALL {
            let a = predict_cost(alg, &nm, &base).unwrap();
            let b = predict_cost(alg, &nm, &qrag).unwrap();
            assert_eq!(a.queries, b.queries, "{alg:?}: queries must not move");
            match alg {
                CostAlgorithm::Q1 | CostAlgorithm::Q2 => {
                    assert!(b.time < a.time, "{alg:?}: stronger memory is faster");
                    assert!(b.qrag_applied && !a.qrag_applied);
                }
                _ => assert_eq!(a.time, b.time, "{alg:?}: classical rows unaffected"),
            }
        }
    }

    #[test]
    fn queries_never_exceed_time() {
        let nm = norms(25.0, 25.0, 12.0, 30.0, 3.0);
        for alg in CostAlgorithm::ALL {
            for qrag in [false, true] {
                let inp = CostInputs {
                    qrag,
                    ..inputs(1000, 32, 5, 0.2, Some(0.3), 0.05)
                };
                let est = predict_cost(alg, &nm, &inp).unwrap();
                assert!(
                    est.queries <= est.time * (1.0 + 1e-12),
                    "{alg:?} qrag={qrag}: queries {} > time {}",
                    est.queries,
                    est.time
                );
            }
        }
    }
}
