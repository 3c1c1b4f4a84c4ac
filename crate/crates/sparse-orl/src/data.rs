//! Offline trajectory datasets: sampling, adversarial corruption, and the
//! regression views consumed by the SRLE oracles.
//!
//! A dataset is `N` episodes of `(x, a, R)` triples rolled out from the
//! initial state under a behavior policy, with stochastic rewards drawn as
//! `Bernoulli(r_h(x,a))` realizations. An adversary may then rewrite up to
//! `⌈εN⌉` whole trajectories; the corruption ledger (`corrupted_mask`)
//! records which ones. Attacks only substitute state-action pairs that
//! exist in the MDP's feature table and keep rewards in `[−H, H]`, so
//! corrupted covariates still satisfy `∥φ∥∞ ≤ 1`.
//!
//! File format (JSON Lines): line 0 is a provenance header, each following
//! line is one trajectory `{"steps":[[x,a,R],...],"corrupted":bool}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mdp::SparseLinearMDP;
use crate::policy::Policy;
use crate::rng::{self, StreamRng};
use crate::srle::{RegressionProblem, RegressionParams};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset must contain at least one trajectory")]
    EmptyDataset,
    #[error("corruption level must satisfy 0 <= epsilon < 1/2, got {0}")]
    BadEpsilon(f64),
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset format: {0}")]
    Format(String),
}

/// One episode: exactly `H` steps of `(state, action, realized reward)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize, f64)>,
}

/// Provenance of a generated dataset, recorded in the file header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mdp_hash: String,
    pub behavior_policy_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub corrupted_mask: Vec<bool>,
    pub epsilon: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Overwrite rewards with `−magnitude·H` (clipped to `[−H, H]`).
    RewardPoison,
    /// Replace each `(x,a)` with the in-MDP pair whose predicted reward
    /// under a one-pass ridge fit disagrees most with the observed reward.
    FeatureSwap,
    /// Reflect rewards: `R ← magnitude·H − R` (clipped to `[−H, H]`).
    ValueFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSelection {
    Random,
    HighRewardFirst,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub magnitude: f64,
    pub target_selection: TargetSelection,
}

/// Ridge weight of the one-pass fit used by the feature-swap attack.
const FEATURE_SWAP_RIDGE: f64 = 1e-3;

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn num_corrupted(&self) -> usize {
        self.corrupted_mask.iter().filter(|&&b| b).count()
    }

    /// Serialize to JSON Lines (header + one line per trajectory).
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Header<'a> {
            schema: &'static str,
            #[serde(flatten)]
            provenance: &'a Provenance,
            epsilon: f64,
            n: usize,
        }
        #[derive(Serialize)]
        struct Line<'a> {
            steps: &'a [(usize, usize, f64)],
            corrupted: bool,
        }
        let mut out = serde_json::to_string(&Header {
            schema: "sparse-orl/1",
            provenance: &self.provenance,
            epsilon: self.epsilon,
            n: self.trajectories.len(),
        })
        .expect("header serialization");
        out.push('\n');
        for (t, &c) in self.trajectories.iter().zip(self.corrupted_mask.iter()) {
            out.push_str(
                &serde_json::to_string(&Line { steps: &t.steps, corrupted: c })
                    .expect("trajectory serialization"),
            );
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Dataset, DataError> {
        #[derive(Deserialize)]
        struct Header {
            #[allow(dead_code)]
            schema: String,
            mdp_hash: String,
            behavior_policy_hash: String,
            seed: u64,
            epsilon: f64,
            n: usize,
        }
        #[derive(Deserialize)]
        struct Line {
            steps: Vec<(usize, usize, f64)>,
            corrupted: bool,
        }
        let mut lines = text.lines();
        let header: Header = serde_json::from_str(
            lines.next().ok_or_else(|| DataError::Format("missing header line".into()))?,
        )
        .map_err(|e| DataError::Format(format!("header: {e}")))?;
        let mut trajectories = Vec::with_capacity(header.n);
        let mut corrupted_mask = Vec::with_capacity(header.n);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let l: Line = serde_json::from_str(line)
                .map_err(|e| DataError::Format(format!("line {}: {e}", i + 1)))?;
            trajectories.push(Trajectory { steps: l.steps });
            corrupted_mask.push(l.corrupted);
        }
        if trajectories.len() != header.n {
            return Err(DataError::Format(format!(
                "header says n={} but found {} trajectories",
                header.n,
                trajectories.len()
            )));
        }
        Ok(Dataset {
            trajectories,
            corrupted_mask,
            epsilon: header.epsilon,
            provenance: Provenance {
                mdp_hash: header.mdp_hash,
                behavior_policy_hash: header.behavior_policy_hash,
                seed: header.seed,
            },
        })
    }
}

/// First 16 hex chars of SHA-256; compact content address for provenance.
pub fn sha256_hex_16(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(16);
    for b in digest.iter().take(8) {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Sample an index from a probability vector. The tail index absorbs any
/// floating-point shortfall.
pub fn sample_categorical(probs: &[f64], r: &mut StreamRng) -> usize {
    let u: f64 = r.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Resolve a (possibly nested) mixture to the concrete member followed for
/// one episode.
fn resolve_member<'a>(pi: &'a Policy, r: &mut StreamRng) -> &'a Policy {
    match pi {
        Policy::Mixture { members } => {
            let k = r.gen_range(0..members.len());
            resolve_member(&members[k], r)
        }
        other => other,
    }
}

/// Roll out one episode from the initial state.
pub fn rollout(mdp: &SparseLinearMDP, pi: &Policy, r: &mut StreamRng) -> Trajectory {
    let member = resolve_member(pi, r);
    let mut x = mdp.initial_state;
    let mut steps = Vec::with_capacity(mdp.horizon);
    for h in 0..mdp.horizon {
        let probs = member.action_probs(mdp, h, x);
        let a = sample_categorical(&probs, r);
        let p_reward = mdp.mean_reward(h, x, a).clamp(0.0, 1.0);
        let reward = if r.gen_bool(p_reward) { 1.0 } else { 0.0 };
        steps.push((x, a, reward));
        let p_next = mdp.transition_distribution(h, x, a);
        x = sample_categorical(p_next.as_slice(), r);
    }
    Trajectory { steps }
}

/// Generate `n` i.i.d. trajectories under `behavior`. Deterministic in
/// `seed`; trajectory `τ` owns the sub-stream `("traj", τ)`.
pub fn generate_dataset(
    mdp: &SparseLinearMDP,
    behavior: &Policy,
    n: usize,
    seed: u64,
) -> Result<Dataset, DataError> {
    if n == 0 {
        return Err(DataError::EmptyDataset);
    }
    let trajectories: Vec<Trajectory> = (0..n)
        .map(|tau| {
            let mut r = rng::stream(seed, "traj", tau as u64);
            rollout(mdp, behavior, &mut r)
        })
        .collect();
    Ok(Dataset {
        corrupted_mask: vec![false; n],
        epsilon: 0.0,
        provenance: Provenance {
            mdp_hash: mdp.content_hash(),
            behavior_policy_hash: behavior.content_hash(),
            seed,
        },
        trajectories,
    })
}

/// `⌈ε·N⌉` with guard against binary-representation spill (0.1 × 50 must
/// give 5, not 6).
pub fn corruption_budget(epsilon: f64, n: usize) -> usize {
    let t = epsilon * n as f64;
    if (t - t.round()).abs() < 1e-9 {
        t.round() as usize
    } else {
        t.ceil() as usize
    }
}

/// Apply a budgeted attack: exactly `⌈εN⌉` trajectories are selected and
/// rewritten; all others are carried over bit-identically.
pub fn corrupt_dataset(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    attack: &AttackSpec,
    epsilon: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(DataError::BadEpsilon(epsilon));
    }
    let n = ds.len();
    if n == 0 {
        return Err(DataError::EmptyDataset);
    }
    let k = corruption_budget(epsilon, n);
    let mut out = ds.clone();
    out.epsilon = epsilon;
    if k == 0 {
        return Ok(out);
    }

    let mut r = rng::stream(seed, "attack", 0);
    let mut selected: Vec<usize> = match attack.target_selection {
        TargetSelection::Random => {
            let mut idx = rand::seq::index::sample(&mut r, n, k.min(n)).into_vec();
            idx.sort_unstable();
            idx
        }
        TargetSelection::HighRewardFirst => {
            let mut order: Vec<usize> = (0..n).collect();
            let total = |t: &Trajectory| t.steps.iter().map(|s| s.2).sum::<f64>();
            order.sort_by(|&i, &j| {
                total(&ds.trajectories[j]).total_cmp(&total(&ds.trajectories[i])).then(i.cmp(&j))
            });
            let mut idx: Vec<usize> = order.into_iter().take(k.min(n)).collect();
            idx.sort_unstable();
            idx
        }
    };
    selected.dedup();

    let h_cap = mdp.horizon as f64;
    match attack.kind {
        AttackKind::RewardPoison => {
            let poisoned = (-attack.magnitude * h_cap).clamp(-h_cap, h_cap);
            for &i in &selected {
                for step in out.trajectories[i].steps.iter_mut() {
                    step.2 = poisoned;
                }
            }
        }
        AttackKind::ValueFlip => {
            for &i in &selected {
                for step in out.trajectories[i].steps.iter_mut() {
                    step.2 = (attack.magnitude * h_cap - step.2).clamp(-h_cap, h_cap);
                }
            }
        }
        AttackKind::FeatureSwap => {
            // One-pass ridge fit per horizon step on the pre-attack data.
            let w_ridge: Vec<DVector<f64>> = (0..mdp.horizon)
                .map(|h| {
                    let d = mdp.ambient_dim;
                    let mut a = DMatrix::<f64>::identity(d, d) * FEATURE_SWAP_RIDGE;
                    let mut b = DVector::<f64>::zeros(d);
                    for t in &ds.trajectories {
                        let (x, act, rew) = t.steps[h];
                        let phi = mdp.feature(x, act);
                        a += phi * phi.transpose() / n as f64;
                        b += phi * (rew / n as f64);
                    }
                    crate::linalg::solve_spd(&a, &b).unwrap_or_else(|| crate::linalg::lstsq(&a, &b))
                })
                .collect();
            for &i in &selected {
                for (h, step) in out.trajectories[i].steps.iter_mut().enumerate() {
                    let observed = step.2;
                    let mut best_pair = (0usize, 0usize);
                    let mut best_gap = f64::NEG_INFINITY;
                    for x in 0..mdp.num_states {
                        for a in 0..mdp.num_actions {
                            let gap = (mdp.feature(x, a).dot(&w_ridge[h]) - observed).abs();
                            if gap > best_gap {
                                best_gap = gap;
                                best_pair = (x, a);
                            }
                        }
                    }
                    step.0 = best_pair.0;
                    step.1 = best_pair.1;
                }
            }
        }
    }
    for &i in &selected {
        out.corrupted_mask[i] = true;
    }
    Ok(out)
}

/// Ridge-regularized empirical feature covariance at step `h`:
/// `Σ̂_h = (1/N) Σ_τ φφᵀ + (λ + ε) I`.
pub fn empirical_covariance(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    h: usize,
    lambda: f64,
    epsilon: f64,
) -> DMatrix<f64> {
    let d = mdp.ambient_dim;
    let n = ds.len() as f64;
    let mut sigma = DMatrix::<f64>::identity(d, d) * (lambda + epsilon);
    for t in &ds.trajectories {
        let (x, a, _) = t.steps[h];
        let phi = mdp.feature(x, a);
        sigma += phi * phi.transpose() / n;
    }
    sigma
}

/// How the continuation value at the next state is aggregated when forming
/// regression targets.
#[derive(Clone, Copy)]
pub enum TargetMode<'a> {
    /// `y = R + Σ_a π_{h+1}(a | x') Q_next(x', a)`.
    Policy(&'a Policy),
    /// `y = R + max_a Q_next(x', a)`.
    Greedy,
}

/// Build the SRLE-compatible regression view of step `h`: covariates are
/// the step-`h` features, targets add the aggregated continuation value at
/// the observed next state (zero at the terminal step).
pub fn srle_dataset_for_policy(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    h: usize,
    mode: TargetMode<'_>,
    q_next: &DMatrix<f64>,
    params: &RegressionParams,
) -> RegressionProblem {
    let n = ds.len();
    let d = mdp.ambient_dim;
    let mut z = DMatrix::zeros(n, d);
    let mut y = DVector::zeros(n);
    let terminal = h + 1 >= mdp.horizon;
    for (tau, t) in ds.trajectories.iter().enumerate() {
        let (x, a, rew) = t.steps[h];
        let phi = mdp.feature(x, a);
        for j in 0..d {
            z[(tau, j)] = phi[j];
        }
        let continuation = if terminal {
            0.0
        } else {
            let xn = t.steps[h + 1].0;
            match mode {
                TargetMode::Greedy => {
                    (0..mdp.num_actions).map(|an| q_next[(xn, an)]).fold(f64::NEG_INFINITY, f64::max)
                }
                TargetMode::Policy(pi) => {
                    let probs = pi.action_probs(mdp, h + 1, xn);
                    (0..mdp.num_actions).map(|an| probs[an] * q_next[(xn, an)]).sum()
                }
            }
        };
        y[tau] = rew + continuation;
    }
    RegressionProblem {
        z,
        y,
        sparsity: params.sparsity,
        l1_budget: params.l1_budget,
        sigma: params.sigma,
        epsilon: ds.epsilon,
        lambda: params.lambda,
        delta: params.delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_random_sparse_mdp, CoverageMode, FeatureFamily, MdpConfig};
    use crate::policy::QWeights;

    fn cfg() -> MdpConfig {
        MdpConfig {
            num_states: 4,
            num_actions: 2,
            horizon: 3,
            ambient_dim: 8,
            sparsity: 2,
            feature_family: FeatureFamily::AnchoredSimplex,
            coverage_mode: CoverageMode::Uniform,
        }
    }

    fn unit_reward_mdp() -> SparseLinearMDP {
        // Anchor-only support with θ = e_anchor: every reward is exactly 1.
        let mut mdp = build_random_sparse_mdp(
            &MdpConfig { sparsity: 1, ambient_dim: 4, ..cfg() },
            5,
        )
        .unwrap();
        let anchor = mdp.support[0];
        for th in mdp.theta.iter_mut() {
            *th = nalgebra::DVector::zeros(mdp.ambient_dim);
            th[anchor] = 1.0;
        }
        mdp.validate().unwrap();
        mdp
    }

    #[test]
    fn unit_reward_mdp_yields_all_one_rewards() {
        let mdp = unit_reward_mdp();
        let ds = generate_dataset(&mdp, &Policy::uniform(&mdp), 20, 1).unwrap();
        for t in &ds.trajectories {
            assert_eq!(t.steps.len(), mdp.horizon);
            for &(_, _, r) in &t.steps {
                assert_eq!(r, 1.0);
            }
        }
    }

    #[test]
    fn empty_request_is_rejected() {
        let mdp = unit_reward_mdp();
        assert!(matches!(
            generate_dataset(&mdp, &Policy::uniform(&mdp), 0, 1),
            Err(DataError::EmptyDataset)
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let mdp = build_random_sparse_mdp(&cfg(), 5).unwrap();
        let pi = Policy::uniform(&mdp);
        let a = generate_dataset(&mdp, &pi, 40, 9).unwrap();
        let b = generate_dataset(&mdp, &pi, 40, 9).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let c = generate_dataset(&mdp, &pi, 40, 10).unwrap();
        assert_ne!(a.to_jsonl(), c.to_jsonl());
    }

    #[test]
    fn jsonl_roundtrip() {
        let mdp = build_random_sparse_mdp(&cfg(), 5).unwrap();
        let ds = generate_dataset(&mdp, &Policy::uniform(&mdp), 12, 3).unwrap();
        let back = Dataset::from_jsonl(&ds.to_jsonl()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn zero_epsilon_corruption_is_identity() {
        let mdp = build_random_sparse_mdp(&cfg(), 5).unwrap();
        let ds = generate_dataset(&mdp, &Policy::uniform(&mdp), 30, 3).unwrap();
        let attack = AttackSpec {
            kind: AttackKind::RewardPoison,
            magnitude: 1.0,
            target_selection: TargetSelection::Random,
        };
        let out = corrupt_dataset(&mdp, &ds, &attack, 0.0, 7).unwrap();
        assert_eq!(out.to_jsonl(), ds.to_jsonl());
    }

    #[test]
    fn corruption_budget_is_exact() {
        assert_eq!(corruption_budget(0.1, 50), 5);
        assert_eq!(corruption_budget(0.15, 10), 2);
        assert_eq!(corruption_budget(0.0, 10), 0);
        assert_eq!(corruption_budget(1.0 / 6.0, 12), 2);
        let mdp = build_random_sparse_mdp(&cfg(), 5).unwrap();
        let ds = generate_dataset(&mdp, &Policy::uniform(&mdp), 50, 3).unwrap();
        let attack = AttackSpec {
            kind: AttackKind::ValueFlip,
            magnitude: 1.0,
            target_selection: TargetSelection::HighRewardFirst,
        };
        let out = corrupt_dataset(&mdp, &ds, &attack, 0.1, 7).unwrap();
        assert_eq!(out.num_corrupted(), 5);
        // Unselected trajectories are bit-identical.
        for i in 0..50 {
            if !out.corrupted_mask[i] {
                assert_eq!(out.trajectories[i], ds.trajectories[i]);
            }
        }
    }

    #[test]
    fn bad_epsilon_rejected() {
        let mdp = build_random_sparse_mdp(&cfg(), 5).unwrap();
        let ds = generate_dataset(&mdp, &Policy::uniform(&mdp), 10, 3).unwrap();
        let attack = AttackSpec {
            kind: AttackKind::RewardPoison,
            magnitude: 1.0,
            target_selection: TargetSelection::Random,
        };
        assert!(matches!(corrupt_dataset(&mdp, &ds, &attack, 0.5, 7), Err(DataError::BadEpsilon(_))));
        assert!(matches!(corrupt_dataset(&mdp, &ds, &attack, -0.1, 7), Err(DataError::BadEpsilon(_))));
    }

    #[test]
    fn reward_poison_sets_rewards_to_minus_h() {
        let mdp = unit_reward_mdp();
        let ds = generate_dataset(&mdp, &Policy::uniform(&mdp), 20, 3).unwrap();
        let attack = AttackSpec {
            kind: AttackKind::RewardPoison,
            magnitude: 1.0,
            target_selection: TargetSelection::Random,
        };
        let out = corrupt_dataset(&mdp, &ds, &attack, 0.2, 7).unwrap();
        let h = mdp.horizon as f64;
        let mut hit = 0;
        for (i, t) in out.trajectories.iter().enumerate() {
            if out.corrupted_mask[i] {
                hit += 1;
                for &(_, _, r) in &t.steps {
                    assert_eq!(r, -h);
                }
            }
        }
        assert_eq!(hit, 4);
    }

    #[test]
    fn feature_swap_keeps_pairs_in_table_and_rewards_fixed() {
        let mdp = build_random_sparse_mdp(&cfg(), 5).unwrap();
        let ds = generate_dataset(&mdp, &Policy::uniform(&mdp), 30, 3).unwrap();
        let attack = AttackSpec {
            kind: AttackKind::FeatureSwap,
            magnitude: 1.0,
            target_selection: TargetSelection::Random,
        };
        let out = corrupt_dataset(&mdp, &ds, &attack, 0.2, 7).unwrap();
        for (i, t) in out.trajectories.iter().enumerate() {
            for (h, &(x, a, r)) in t.steps.iter().enumerate() {
                assert!(x < mdp.num_states && a < mdp.num_actions);
                if out.corrupted_mask[i] {
                    assert_eq!(r, ds.trajectories[i].steps[h].2);
                }
            }
        }
    }

    #[test]
    fn empirical_covariance_matches_two_pass_oracle() {
        let mdp = build_random_sparse_mdp(&cfg(), 5).unwrap();
        let ds = generate_dataset(&mdp, &Policy::uniform(&mdp), 25, 3).unwrap();
        let lambda = 0.3;
        let eps = 0.1;
        let sigma = empirical_covariance(&mdp, &ds, 1, lambda, eps);
        let d = mdp.ambient_dim;
        let mut check = DMatrix::<f64>::zeros(d, d);
        for t in &ds.trajectories {
            let (x, a, _) = t.steps[1];
            let phi = mdp.feature(x, a);
            for i in 0..d {
                for j in 0..d {
                    check[(i, j)] += phi[i] * phi[j] / 25.0;
                }
            }
        }
        for i in 0..d {
            check[(i, i)] += lambda + eps;
        }
        assert!((&sigma - &check).abs().max() < 1e-12);
        assert!(crate::linalg::min_eigenvalue(&sigma) >= lambda + eps - 1e-12);
    }

    #[test]
    fn regression_targets_match_per_row_recomputation() {
        let mdp = build_random_sparse_mdp(&cfg(), 5).unwrap();
        let pi = Policy::uniform(&mdp);
        let ds = generate_dataset(&mdp, &pi, 15, 3).unwrap();
        let mut r = crate::rng::stream(3, "q", 0);
        let q_next =
            DMatrix::from_fn(mdp.num_states, mdp.num_actions, |_, _| r.gen_range(-1.0..1.0));
        let params = RegressionParams {
            sparsity: mdp.sparsity,
            l1_budget: 3.0,
            sigma: 3.0,
            lambda: 0.01,
            delta: 0.05,
        };
        let h = 0;
        for mode in [TargetMode::Greedy, TargetMode::Policy(&pi)] {
            let p = srle_dataset_for_policy(&mdp, &ds, h, mode, &q_next, &params);
            for (tau, t) in ds.trajectories.iter().enumerate() {
                let (x, a, rew) = t.steps[h];
                let xn = t.steps[h + 1].0;
                let phi = mdp.feature(x, a);
                for j in 0..mdp.ambient_dim {
                    assert_eq!(p.z[(tau, j)], phi[j]);
                }
                let cont = match mode {
                    TargetMode::Greedy => (0..mdp.num_actions)
                        .map(|an| q_next[(xn, an)])
                        .fold(f64::NEG_INFINITY, f64::max),
                    TargetMode::Policy(pp) => {
                        let probs = pp.action_probs(&mdp, h + 1, xn);
                        (0..mdp.num_actions).map(|an| probs[an] * q_next[(xn, an)]).sum()
                    }
                };
                assert!((p.y[tau] - (rew + cont)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn terminal_step_targets_are_raw_rewards() {
        let mdp = build_random_sparse_mdp(&cfg(), 5).unwrap();
        let ds = generate_dataset(&mdp, &Policy::uniform(&mdp), 15, 3).unwrap();
        let q_next = DMatrix::from_element(mdp.num_states, mdp.num_actions, 123.0);
        let params = RegressionParams {
            sparsity: 1,
            l1_budget: 1.0,
            sigma: 1.0,
            lambda: 0.0,
            delta: 0.05,
        };
        let h = mdp.horizon - 1;
        let p = srle_dataset_for_policy(&mdp, &ds, h, TargetMode::Greedy, &q_next, &params);
        for (tau, t) in ds.trajectories.iter().enumerate() {
            assert_eq!(p.y[tau], t.steps[h].2);
        }
    }

    #[test]
    fn clean_targets_respect_class_bound() {
        // |y| ≤ H−h+1 whenever the next-step table comes from the sparse
        // class and rewards are clean.
        let mdp = build_random_sparse_mdp(&cfg(), 5).unwrap();
        let pi = Policy::uniform(&mdp);
        let ds = generate_dataset(&mdp, &pi, 40, 11).unwrap();
        let mut r = crate::rng::stream(11, "claim2", 0);
        for h in 0..mdp.horizon {
            let q_next = if h + 1 < mdp.horizon {
                let qw = QWeights::random_class_member(&mut r, &mdp, h + 1, mdp.sparsity);
                DMatrix::from_fn(mdp.num_states, mdp.num_actions, |x, a| mdp.feature(x, a).dot(&qw.w))
            } else {
                DMatrix::zeros(mdp.num_states, mdp.num_actions)
            };
            let params = RegressionParams {
                sparsity: mdp.sparsity,
                l1_budget: (mdp.horizon - h) as f64,
                sigma: (mdp.horizon - h) as f64,
                lambda: 0.0,
                delta: 0.05,
            };
            let bound = (mdp.horizon - h) as f64;
            for mode in [TargetMode::Greedy, TargetMode::Policy(&pi)] {
                let p = srle_dataset_for_policy(&mdp, &ds, h, mode, &q_next, &params);
                for v in p.y.iter() {
                    assert!(v.abs() <= bound + 1e-9, "|y|={} bound={}", v.abs(), bound);
                }
            }
        }
    }
}
