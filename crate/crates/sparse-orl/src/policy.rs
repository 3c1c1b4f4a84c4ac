//! Policies over finite sparse linear MDPs.
//!
//! Four variants: explicit tabular rows, log-linear (softmax of `⟨φ, υ_h⟩`,
//! the actor's class), greedy-from-Q-weights, and uniform mixtures. Mixtures
//! are episode-level: a member is drawn once per episode and followed
//! throughout, so values and occupancies of a mixture are arithmetic means
//! of the member quantities. Per-state action probabilities are therefore
//! not defined for mixtures; evaluation and rollouts handle them
//! structurally.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mdp::SparseLinearMDP;
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Explicit conditional distributions `probs[h][x][a]`.
    Tabular { probs: Vec<Vec<Vec<f64>>> },
    /// Softmax of `⟨φ(x,a), υ_h⟩` with parameters `upsilon[h]`.
    LogLinear { upsilon: Vec<Vec<f64>> },
    /// Greedy in `clip(⟨φ(x,a), w_h⟩, lo_h, hi_h)`, ties to the lowest
    /// action index.
    GreedyFromWeights { weights: Vec<Vec<f64>>, clip: Vec<(f64, f64)> },
    /// Uniform mixture over member policies, drawn once per episode.
    Mixture { members: Vec<Policy> },
}

impl Policy {
    /// The uniform tabular policy for an MDP.
    pub fn uniform(mdp: &SparseLinearMDP) -> Policy {
        let row = vec![1.0 / mdp.num_actions as f64; mdp.num_actions];
        Policy::Tabular {
            probs: vec![vec![row; mdp.num_states]; mdp.horizon],
        }
    }

    /// Log-linear policy with all-zero logits (equals the uniform policy in
    /// distribution).
    pub fn log_linear_zero(mdp: &SparseLinearMDP) -> Policy {
        Policy::LogLinear {
            upsilon: vec![vec![0.0; mdp.ambient_dim]; mdp.horizon],
        }
    }

    /// A random tabular policy (rows drawn from a flat Dirichlet).
    pub fn random_tabular(mdp: &SparseLinearMDP, r: &mut StreamRng) -> Policy {
        let probs = (0..mdp.horizon)
            .map(|_| {
                (0..mdp.num_states)
                    .map(|_| {
                        let raw: Vec<f64> = (0..mdp.num_actions).map(|_| -r.gen::<f64>().ln()).collect();
                        let z: f64 = raw.iter().sum();
                        raw.iter().map(|v| v / z).collect()
                    })
                    .collect()
            })
            .collect();
        Policy::Tabular { probs }
    }

    /// ε-greedy blend of a base policy with the uniform policy:
    /// `(1−ε)·base + ε·uniform`, materialized as a tabular policy.
    pub fn eps_greedy(mdp: &SparseLinearMDP, base: &Policy, eps: f64) -> Policy {
        let u = 1.0 / mdp.num_actions as f64;
        let probs = (0..mdp.horizon)
            .map(|h| {
                (0..mdp.num_states)
                    .map(|x| {
                        let p = base.action_probs(mdp, h, x);
                        (0..mdp.num_actions).map(|a| (1.0 - eps) * p[a] + eps * u).collect()
                    })
                    .collect()
            })
            .collect();
        Policy::Tabular { probs }
    }

    /// Action distribution at `(h, x)`. Panics for mixtures (they have no
    /// per-state distribution) and on malformed dimensions.
    pub fn action_probs(&self, mdp: &SparseLinearMDP, h: usize, x: usize) -> Vec<f64> {
        match self {
            Policy::Tabular { probs } => probs[h][x].clone(),
            Policy::LogLinear { upsilon } => {
                let ups = &upsilon[h];
                let logits: Vec<f64> = (0..mdp.num_actions)
                    .map(|a| {
                        let phi = mdp.feature(x, a);
                        (0..mdp.ambient_dim).map(|j| phi[j] * ups[j]).sum()
                    })
                    .collect();
                softmax(&logits)
            }
            Policy::GreedyFromWeights { weights, clip } => {
                let w = DVector::from_vec(weights[h].clone());
                let (lo, hi) = clip[h];
                let vals: Vec<f64> =
                    (0..mdp.num_actions).map(|a| mdp.feature(x, a).dot(&w).clamp(lo, hi)).collect();
                let best = argmax_lowest_tie(&vals);
                let mut out = vec![0.0; mdp.num_actions];
                out[best] = 1.0;
                out
            }
            Policy::Mixture { .. } => {
                panic!("mixture policies have no per-state action distribution; handle structurally")
            }
        }
    }

    /// Sanity-check shapes and distribution constraints against an MDP.
    pub fn validate(&self, mdp: &SparseLinearMDP) -> Result<(), String> {
        match self {
            Policy::Tabular { probs } => {
                if probs.len() != mdp.horizon {
                    return Err("tabular horizon mismatch".into());
                }
                for per_h in probs {
                    if per_h.len() != mdp.num_states {
                        return Err("tabular state count mismatch".into());
                    }
                    for row in per_h {
                        if row.len() != mdp.num_actions {
                            return Err("tabular action count mismatch".into());
                        }
                        if row.iter().any(|&p| p < 0.0) {
                            return Err("negative action probability".into());
                        }
                        if (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                            return Err("tabular row does not sum to 1".into());
                        }
                    }
                }
                Ok(())
            }
            Policy::LogLinear { upsilon } => {
                if upsilon.len() != mdp.horizon || upsilon.iter().any(|u| u.len() != mdp.ambient_dim) {
                    return Err("log-linear parameter shape mismatch".into());
                }
                Ok(())
            }
            Policy::GreedyFromWeights { weights, clip } => {
                if weights.len() != mdp.horizon || clip.len() != mdp.horizon {
                    return Err("greedy weights shape mismatch".into());
                }
                if weights.iter().any(|w| w.len() != mdp.ambient_dim) {
                    return Err("greedy weight dimension mismatch".into());
                }
                Ok(())
            }
            Policy::Mixture { members } => {
                if members.is_empty() {
                    return Err("empty mixture".into());
                }
                for m in members {
                    m.validate(mdp)?;
                }
                Ok(())
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("policy serialization")
    }

    pub fn from_json(text: &str) -> Result<Policy, String> {
        serde_json::from_str(text).map_err(|e| format!("policy json: {e}"))
    }

    pub fn content_hash(&self) -> String {
        crate::data::sha256_hex_16(self.to_json().as_bytes())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / z).collect()
}

/// Index of the maximum value, ties resolved to the lowest index.
pub fn argmax_lowest_tie(vals: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in vals.iter().enumerate().skip(1) {
        if v > vals[best] {
            best = i;
        }
    }
    best
}

/// A per-horizon Q-function weight vector, member of the linear class
/// `Q_h = {⟨φ, w⟩ : ∥w∥₁ ≤ H+1−h, ∥w∥₀ ≤ s}`.
#[derive(Debug, Clone)]
pub struct QWeights {
    pub w: DVector<f64>,
    /// Zero-based horizon index (step `h = horizon_index + 1` in 1-based
    /// notation).
    pub horizon_index: usize,
}

impl QWeights {
    /// ℓ1 budget `H + 1 − h` of the class at a zero-based horizon index.
    pub fn l1_budget(horizon: usize, horizon_index: usize) -> f64 {
        (horizon - horizon_index) as f64
    }

    pub fn new(w: DVector<f64>, horizon_index: usize, horizon: usize) -> Result<Self, String> {
        let budget = Self::l1_budget(horizon, horizon_index);
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        if l1 > budget + 1e-9 {
            return Err(format!("l1 norm {l1} exceeds class budget {budget}"));
        }
        Ok(QWeights { w, horizon_index })
    }

    pub fn is_sparse_class_member(&self, s: usize) -> bool {
        self.w.iter().filter(|v| **v != 0.0).count() <= s
    }

    /// Sample a random member of the sparse class (used by property tests):
    /// support of size ≤ s inside the MDP support, ℓ1 norm scaled to a
    /// random fraction of the budget.
    pub fn random_class_member(
        r: &mut StreamRng,
        mdp: &SparseLinearMDP,
        horizon_index: usize,
        s: usize,
    ) -> QWeights {
        let budget = Self::l1_budget(mdp.horizon, horizon_index);
        let k = r.gen_range(1..=s.min(mdp.support.len()));
        let picked = rand::seq::index::sample(r, mdp.support.len(), k);
        let mut w = DVector::zeros(mdp.ambient_dim);
        let mut mass = 0.0;
        let coords: Vec<usize> = picked.iter().map(|i| mdp.support[i]).collect();
        let raw: Vec<f64> = (0..k).map(|_| r.gen_range(-1.0..=1.0)).collect();
        for &v in &raw {
            mass += v.abs();
        }
        if mass > 0.0 {
            let target = budget * r.gen_range(0.1..=1.0);
            for (i, &j) in coords.iter().enumerate() {
                w[j] = raw[i] / mass * target;
            }
        }
        QWeights { w, horizon_index }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_random_sparse_mdp, CoverageMode, FeatureFamily, MdpConfig};
    use proptest::prelude::*;

    fn mdp() -> SparseLinearMDP {
        build_random_sparse_mdp(
            &MdpConfig {
                num_states: 4,
                num_actions: 3,
                horizon: 2,
                ambient_dim: 6,
                sparsity: 2,
                feature_family: FeatureFamily::AnchoredSimplex,
                coverage_mode: CoverageMode::Uniform,
            },
            99,
        )
        .unwrap()
    }

    #[test]
    fn tabular_rows_are_distributions() {
        let m = mdp();
        let mut r = crate::rng::stream(1, "p", 0);
        let pi = Policy::random_tabular(&m, &mut r);
        pi.validate(&m).unwrap();
        let p = pi.action_probs(&m, 1, 2);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_linear_probabilities_sum_to_one() {
        let m = mdp();
        let pi = Policy::LogLinear { upsilon: vec![vec![0.3; m.ambient_dim]; m.horizon] };
        for h in 0..m.horizon {
            for x in 0..m.num_states {
                let p = pi.action_probs(&m, h, x);
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(p.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn zero_logits_equal_uniform() {
        let m = mdp();
        let pi = Policy::log_linear_zero(&m);
        let p = pi.action_probs(&m, 0, 0);
        for v in p {
            assert!((v - 1.0 / m.num_actions as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn greedy_from_weights_breaks_ties_low() {
        let m = mdp();
        let pi = Policy::GreedyFromWeights {
            weights: vec![vec![0.0; m.ambient_dim]; m.horizon],
            clip: vec![(0.0, 2.0); m.horizon],
        };
        // All clipped values equal: lowest action index wins.
        let p = pi.action_probs(&m, 0, 1);
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn qweights_budget_enforced() {
        let w = DVector::from_vec(vec![2.0, 0.0, -1.5]);
        assert!(QWeights::new(w.clone(), 0, 3).is_err());
        assert!(QWeights::new(w, 0, 4).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn softmax_is_shift_invariant(shift in -5.0f64..5.0, a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
            let p = softmax(&[a, b, c]);
            let q = softmax(&[a + shift, b + shift, c + shift]);
            for (x, y) in p.iter().zip(q.iter()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
