//! Coverage metrics: uniform-coverage ξ and sparse single-policy
//! concentrability κ.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg;
use crate::mdp::{exact_optimal_values, occupancy_measures, population_covariance, SparseLinearMDP};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("support search too large: {combos} candidate supports exceed cap {cap}")]
    SearchSpaceTooLarge { combos: u64, cap: u64 },
}

/// Cap on κ support enumeration.
pub const KAPPA_ENUM_CAP: u64 = 1_000_000;

/// Minimum eigenvalue of a symmetric covariance matrix.
pub fn compute_xi(sigma: &DMatrix<f64>) -> f64 {
    linalg::min_eigenvalue(sigma)
}

/// Average of per-horizon covariances. With a deterministic initial state
/// the step-1 covariance has rank at most `|A|`, so per-horizon minimum
/// eigenvalues are trivially zero; the pooled matrix is the meaningful
/// coverage summary reported by the sweep harness.
pub fn pooled_covariance(mdp: &SparseLinearMDP, nu: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = mdp.ambient_dim;
    let mut acc = DMatrix::zeros(d, d);
    for n in nu {
        acc += population_covariance(mdp, n);
    }
    acc / nu.len() as f64
}

/// Per-horizon sparse concentrability report.
#[derive(Debug, Clone)]
pub struct KappaReport {
    /// `κ_h = max_{|S| ≤ 2s} λ_max([Σ*]_S, [Σ]_S)` per horizon step.
    pub per_h: Vec<f64>,
    /// Whether the denominator needed the 1e-12 jitter at that step.
    pub jitter_used: Vec<bool>,
}

impl KappaReport {
    pub fn max(&self) -> f64 {
        self.per_h.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn any_jitter(&self) -> bool {
        self.jitter_used.iter().any(|&b| b)
    }
}

/// Sparse single-policy concentrability of a behavior occupancy: the
/// largest generalized eigenvalue of the pencil `([Σ*]_S, [Σ]_S)` over all
/// supports of size `2s`, per horizon. `Σ*` comes from the exact optimal
/// policy's occupancy. Singular denominators fall back to a `1e-12` jitter
/// and are flagged.
pub fn compute_kappa(
    mdp: &SparseLinearMDP,
    behavior_nu: &[DMatrix<f64>],
    two_s: usize,
) -> Result<KappaReport, MetricsError> {
    let d = mdp.ambient_dim;
    let k = two_s.clamp(1, d);
    let combos = linalg::binomial(d, k);
    if combos > KAPPA_ENUM_CAP {
        return Err(MetricsError::SearchSpaceTooLarge { combos, cap: KAPPA_ENUM_CAP });
    }
    let (_, pi_star) = exact_optimal_values(mdp);
    let nu_star = occupancy_measures(mdp, &pi_star);
    let mut per_h = Vec::with_capacity(mdp.horizon);
    let mut jitter_used = Vec::with_capacity(mdp.horizon);
    for h in 0..mdp.horizon {
        let sigma_star = population_covariance(mdp, &nu_star[h]);
        let sigma = population_covariance(mdp, &behavior_nu[h]);
        let mut kappa_h = f64::NEG_INFINITY;
        let mut jitter = false;
        linalg::for_each_subset(d, k, |s| {
            let num = linalg::principal_submatrix(&sigma_star, s);
            let den = linalg::principal_submatrix(&sigma, s);
            let lam = match linalg::max_generalized_eigenvalue(&num, &den) {
                Some(l) => l,
                None => {
                    jitter = true;
                    let jittered = &den + DMatrix::<f64>::identity(k, k) * 1e-12;
                    linalg::max_generalized_eigenvalue(&num, &jittered)
                        .unwrap_or(f64::INFINITY)
                }
            };
            kappa_h = kappa_h.max(lam);
        });
        per_h.push(kappa_h);
        jitter_used.push(jitter);
    }
    Ok(KappaReport { per_h, jitter_used })
}
