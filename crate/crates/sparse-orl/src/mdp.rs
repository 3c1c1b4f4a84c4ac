//! Finite sparse linear MDPs and exact dynamic programming.
//!
//! The model: an episodic MDP over finite states `X` and actions `A` with
//! horizon `H`, a known feature map `φ: X × A → R^d` with `∥φ∥∞ ≤ 1`, and
//! unknown per-horizon parameters living on a sparse support `S ⊂ [d]`,
//! `|S| = s`:
//!
//! ```text
//! P_h(x' | x, a) = ⟨φ(x,a), μ_h(x')⟩        r_h(x,a) = ⟨φ(x,a), θ_h⟩
//! ```
//!
//! Everything in this module is exact: transition kernels, Bellman backups,
//! policy values, occupancy measures and covariances are computed by direct
//! summation in double precision. These quantities are the ground truth that
//! the learning algorithms elsewhere in the crate are tested against.
//!
//! # Generator families
//!
//! [`build_random_sparse_mdp`] produces instances from two constructive
//! families, both organized around an *anchor* coordinate `i0 ∈ S`:
//!
//! * the anchor feature is constant one, `φ_{i0}(x,a) = 1`, and its measure
//!   `μ_{h,i0} = ρ_h` is a probability distribution over next states;
//! * every other support coordinate `i` carries a signed perturbation
//!   `β_{h,i}` with `Σ_{x'} β_{h,i}(x') = 0`, dominated pointwise:
//!   `Σ_i |β_{h,i}(x')| ≤ margin · ρ_h(x')`.
//!
//! Any feature values in `[−1, 1]` on the non-anchor coordinates then give a
//! valid kernel, rows summing to one by construction. `signed_binary` draws
//! those entries from `{−1, +1}` (near-isotropic covariances), while
//! `anchored_simplex` draws them uniformly from `[−1, 1]`. Coordinates
//! outside `S` are pure distractors: they never influence dynamics or
//! rewards, only the regression problems faced by the learner.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::Policy;
use crate::rng;

/// Sum-to-one tolerance for probability simplexes.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Tolerance for exact-arithmetic identities (DP fixed points and the like).
pub const EXACT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("construction failed after {attempts} rejection rounds (incompatible config?)")]
    ConstructionFailed { attempts: usize },
    #[error("invalid MDP config: {0}")]
    BadConfig(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    SignedBinary,
    AnchoredSimplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMode {
    /// Diverse feature profiles across state-action pairs; behavior-relevant
    /// covariances are near-isotropic on the scaled coordinates.
    Uniform,
    /// Few distinct feature profiles (plus jitter): covariances concentrate
    /// on a low-dimensional cone, so the minimum eigenvalue is tiny while
    /// sparse relative condition numbers stay moderate.
    Narrow,
}

/// Configuration for [`build_random_sparse_mdp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub ambient_dim: usize,
    pub sparsity: usize,
    pub feature_family: FeatureFamily,
    pub coverage_mode: CoverageMode,
}

/// A finite sparse linear MDP. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLinearMDP {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub ambient_dim: usize,
    pub sparsity: usize,
    /// Sorted support indices, `|support| = sparsity`.
    pub support: Vec<usize>,
    /// Feature vectors indexed by `x * num_actions + a`.
    features: Vec<DVector<f64>>,
    /// Reward parameters, one vector per horizon step.
    pub theta: Vec<DVector<f64>>,
    /// Transition measures: `mu[h][x']` is the vector μ_h(x').
    pub mu: Vec<Vec<DVector<f64>>>,
    /// The deterministic initial state.
    pub initial_state: usize,
}

/// Exact state-action and state values, one table per horizon step.
#[derive(Debug, Clone)]
pub struct ValueTables {
    /// `q[h]` is `num_states × num_actions`.
    pub q: Vec<DMatrix<f64>>,
    /// `v[h]` has one entry per state.
    pub v: Vec<DVector<f64>>,
}

/// Backup mode for [`bellman_apply`] and [`projection_weights`].
#[derive(Clone, Copy)]
pub enum BackupMode<'a> {
    /// Expectation over the policy's next action.
    Policy(&'a Policy),
    /// Maximization over the next action.
    Greedy,
}

impl SparseLinearMDP {
    /// Assemble an MDP from explicit parts and validate every invariant.
    /// `features` is indexed by `x * num_actions + a`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        ambient_dim: usize,
        support: Vec<usize>,
        features: Vec<DVector<f64>>,
        theta: Vec<DVector<f64>>,
        mu: Vec<Vec<DVector<f64>>>,
        initial_state: usize,
    ) -> Result<Self, MdpError> {
        let mdp = SparseLinearMDP {
            num_states,
            num_actions,
            horizon,
            ambient_dim,
            sparsity: support.len(),
            support,
            features,
            theta,
            mu,
            initial_state,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    #[inline]
    pub fn feature(&self, x: usize, a: usize) -> &DVector<f64> {
        &self.features[x * self.num_actions + a]
    }

    pub fn features(&self) -> &[DVector<f64>] {
        &self.features
    }

    /// `P_h(· | x, a)` as a dense probability vector over states.
    pub fn transition_distribution(&self, h: usize, x: usize, a: usize) -> DVector<f64> {
        let phi = self.feature(x, a);
        DVector::from_fn(self.num_states, |xn, _| phi.dot(&self.mu[h][xn]))
    }

    /// `r_h(x, a) = ⟨φ(x,a), θ_h⟩`.
    #[inline]
    pub fn mean_reward(&self, h: usize, x: usize, a: usize) -> f64 {
        self.feature(x, a).dot(&self.theta[h])
    }

    /// Reward table at step `h`.
    pub fn reward_table(&self, h: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.num_states, self.num_actions, |x, a| self.mean_reward(h, x, a))
    }

    /// Check every structural invariant. Returns the first violation found.
    pub fn validate(&self) -> Result<(), MdpError> {
        let d = self.ambient_dim;
        let inv = |msg: String| Err(MdpError::Invariant(msg));
        if self.sparsity > d {
            return inv(format!("s = {} exceeds d = {}", self.sparsity, d));
        }
        if self.support.len() != self.sparsity {
            return inv("support size differs from sparsity".into());
        }
        if self.support.windows(2).any(|w| w[0] >= w[1]) || self.support.iter().any(|&i| i >= d) {
            return inv("support must be sorted, unique and within [d]".into());
        }
        if self.num_states < 1 || self.num_actions < 1 || self.horizon < 1 {
            return inv("empty state/action space or zero horizon".into());
        }
        if self.initial_state >= self.num_states {
            return inv("initial state out of range".into());
        }
        if self.features.len() != self.num_states * self.num_actions {
            return inv("feature table size mismatch".into());
        }
        let on_support = |v: &DVector<f64>| -> bool {
            v.iter().enumerate().all(|(i, &vi)| vi == 0.0 || self.support.binary_search(&i).is_ok())
        };
        for phi in &self.features {
            if phi.len() != d {
                return inv("feature dimension mismatch".into());
            }
            if phi.iter().any(|v| v.abs() > 1.0 + 1e-12) {
                return inv("feature sup-norm exceeds 1".into());
            }
        }
        for h in 0..self.horizon {
            let th = &self.theta[h];
            if th.len() != d || !on_support(th) {
                return inv(format!("theta[{h}] not supported on S"));
            }
            if th.iter().map(|v| v.abs()).sum::<f64>() > 1.0 + 1e-12 {
                return inv(format!("theta[{h}] l1 norm exceeds 1"));
            }
            if self.mu[h].len() != self.num_states {
                return inv(format!("mu[{h}] state count mismatch"));
            }
            let mut total = DVector::zeros(d);
            for m in &self.mu[h] {
                if m.len() != d || !on_support(m) {
                    return inv(format!("mu[{h}] not supported on S"));
                }
                total += m;
            }
            // Signed total-measure bound ∥Σ_{x'} μ_h(x')∥₁ ≤ 1. The
            // componentwise-absolute variant is unsatisfiable for
            // action-dependent kernels under ∥φ∥∞ ≤ 1 (Hölder saturation).
            if total.iter().map(|v| v.abs()).sum::<f64>() > 1.0 + 1e-9 {
                return inv(format!("mu[{h}] total signed measure exceeds 1"));
            }
            for x in 0..self.num_states {
                for a in 0..self.num_actions {
                    let p = self.transition_distribution(h, x, a);
                    if p.iter().any(|&v| v < -1e-14) {
                        return inv(format!("negative transition mass at h={h} x={x} a={a}"));
                    }
                    if (p.sum() - 1.0).abs() > SIMPLEX_TOL {
                        return inv(format!("transition row sum != 1 at h={h} x={x} a={a}"));
                    }
                    let r = self.mean_reward(h, x, a);
                    if !(-1e-12..=1.0 + 1e-12).contains(&r) {
                        return inv(format!("reward outside [0,1] at h={h} x={x} a={a}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical JSON document (fixed key order, shortest round-trip floats).
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&MdpJson::from(self)).expect("MDP serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, MdpError> {
        let raw: MdpJson =
            serde_json::from_str(text).map_err(|e| MdpError::BadConfig(format!("mdp json: {e}")))?;
        let mdp = raw.into_mdp()?;
        mdp.validate()?;
        Ok(mdp)
    }

    /// Hex-truncated SHA-256 of the canonical JSON; used as provenance.
    pub fn content_hash(&self) -> String {
        crate::data::sha256_hex_16(self.to_canonical_json().as_bytes())
    }
}

/// Wire format: canonical key order, features flattened row-major by
/// `(x * num_actions + a) * d + j`.
#[derive(Serialize, Deserialize)]
struct MdpJson {
    num_states: usize,
    num_actions: usize,
    #[serde(rename = "H")]
    horizon: usize,
    #[serde(rename = "d")]
    ambient_dim: usize,
    #[serde(rename = "s")]
    sparsity: usize,
    support: Vec<usize>,
    features: Vec<f64>,
    theta: Vec<Vec<f64>>,
    mu: Vec<Vec<Vec<f64>>>,
    x1: usize,
}

impl From<&SparseLinearMDP> for MdpJson {
    fn from(m: &SparseLinearMDP) -> Self {
        MdpJson {
            num_states: m.num_states,
            num_actions: m.num_actions,
            horizon: m.horizon,
            ambient_dim: m.ambient_dim,
            sparsity: m.sparsity,
            support: m.support.clone(),
            features: m.features.iter().flat_map(|v| v.iter().cloned()).collect(),
            theta: m.theta.iter().map(|v| v.iter().cloned().collect()).collect(),
            mu: m
                .mu
                .iter()
                .map(|per_x| per_x.iter().map(|v| v.iter().cloned().collect()).collect())
                .collect(),
            x1: m.initial_state,
        }
    }
}

impl MdpJson {
    fn into_mdp(self) -> Result<SparseLinearMDP, MdpError> {
        let d = self.ambient_dim;
        let n_sa = self.num_states * self.num_actions;
        if self.features.len() != n_sa * d {
            return Err(MdpError::BadConfig("feature array length mismatch".into()));
        }
        let features = (0..n_sa)
            .map(|r| DVector::from_iterator(d, self.features[r * d..(r + 1) * d].iter().cloned()))
            .collect();
        let to_vec = |v: Vec<f64>| -> Result<DVector<f64>, MdpError> {
            if v.len() != d {
                return Err(MdpError::BadConfig("vector length mismatch".into()));
            }
            Ok(DVector::from_vec(v))
        };
        Ok(SparseLinearMDP {
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            ambient_dim: d,
            sparsity: self.sparsity,
            support: self.support,
            features,
            theta: self.theta.into_iter().map(to_vec).collect::<Result<_, _>>()?,
            mu: self
                .mu
                .into_iter()
                .map(|per_x| per_x.into_iter().map(to_vec).collect::<Result<Vec<_>, _>>())
                .collect::<Result<_, _>>()?,
            initial_state: {
                if self.x1 >= self.num_states {
                    return Err(MdpError::BadConfig("x1 out of range".into()));
                }
                self.x1
            },
        })
    }
}

/// Build a random MDP satisfying every structural invariant.
///
/// Deterministic in `(cfg, seed)`. Rejection-samples up to 1000 attempts and
/// returns [`MdpError::ConstructionFailed`] if none validates.
pub fn build_random_sparse_mdp(cfg: &MdpConfig, seed: u64) -> Result<SparseLinearMDP, MdpError> {
    if cfg.sparsity > cfg.ambient_dim || cfg.sparsity == 0 {
        return Err(MdpError::BadConfig("require 1 <= s <= d".into()));
    }
    if cfg.num_states < 2 {
        return Err(MdpError::BadConfig("require num_states >= 2".into()));
    }
    if cfg.num_actions < 1 || cfg.horizon < 1 {
        return Err(MdpError::BadConfig("require num_actions >= 1 and H >= 1".into()));
    }
    const MAX_ATTEMPTS: usize = 1000;
    for attempt in 0..MAX_ATTEMPTS {
        let mdp = sample_candidate(cfg, seed, attempt as u64);
        if mdp.validate().is_ok() {
            return Ok(mdp);
        }
    }
    Err(MdpError::ConstructionFailed { attempts: MAX_ATTEMPTS })
}

fn sample_candidate(cfg: &MdpConfig, seed: u64, attempt: u64) -> SparseLinearMDP {
    let d = cfg.ambient_dim;
    let s = cfg.sparsity;
    let (nx, na, h_len) = (cfg.num_states, cfg.num_actions, cfg.horizon);
    let mut r = rng::stream(seed, "mdp", attempt);

    let mut support: Vec<usize> = rand::seq::index::sample(&mut r, d, s).into_vec();
    support.sort_unstable();
    let anchor = support[0];

    // Feature profiles.
    let draw_profile = |r: &mut rng::StreamRng| -> DVector<f64> {
        DVector::from_fn(d, |j, _| {
            if j == anchor {
                1.0
            } else {
                match cfg.feature_family {
                    FeatureFamily::SignedBinary => {
                        if r.gen::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    FeatureFamily::AnchoredSimplex => r.gen_range(-1.0..=1.0),
                }
            }
        })
    };
    let features: Vec<DVector<f64>> = match cfg.coverage_mode {
        CoverageMode::Uniform => (0..nx * na).map(|_| draw_profile(&mut r)).collect(),
        CoverageMode::Narrow => {
            let k = (s + 2).min(nx * na);
            let bases: Vec<DVector<f64>> = (0..k).map(|_| draw_profile(&mut r)).collect();
            (0..nx * na)
                .map(|_| {
                    let mut phi = bases[r.gen_range(0..k)].clone();
                    for j in 0..d {
                        if j == anchor {
                            continue;
                        }
                        match cfg.feature_family {
                            FeatureFamily::SignedBinary => {
                                if r.gen::<f64>() < 0.02 {
                                    phi[j] = -phi[j];
                                }
                            }
                            FeatureFamily::AnchoredSimplex => {
                                phi[j] = (phi[j] + r.gen_range(-0.05..=0.05)).clamp(-1.0, 1.0);
                            }
                        }
                    }
                    phi
                })
                .collect()
        }
    };

    // Reward parameters: anchor carries 0.5, remaining support coordinates
    // share total magnitude 0.4, so every reward lands in [0.1, 0.9].
    let theta: Vec<DVector<f64>> = (0..h_len)
        .map(|_| {
            let mut th = DVector::zeros(d);
            th[anchor] = 0.5;
            if s > 1 {
                let raw: Vec<f64> = (1..s).map(|_| r.gen_range(-1.0..=1.0)).collect();
                let mass: f64 = raw.iter().map(|v| v.abs()).sum();
                if mass > 0.0 {
                    for (k, &g) in raw.iter().enumerate() {
                        th[support[k + 1]] = 0.4 * g / mass;
                    }
                }
            }
            th
        })
        .collect();

    // Transition measures: anchored base distribution plus dominated
    // zero-mass signed perturbations on the remaining support coordinates.
    const MARGIN: f64 = 0.9;
    let mu: Vec<Vec<DVector<f64>>> = (0..h_len)
        .map(|_| {
            let raw: Vec<f64> = (0..nx).map(|_| r.gen_range(0.2..=1.0)).collect();
            let z: f64 = raw.iter().sum();
            let rho: Vec<f64> = raw.iter().map(|v| v / z).collect();
            let mut betas: Vec<Vec<f64>> = Vec::with_capacity(s.saturating_sub(1));
            for _ in 1..s {
                let mut g: Vec<f64> = (0..nx).map(|_| r.gen_range(-1.0..=1.0)).collect();
                let mean = g.iter().sum::<f64>() / nx as f64;
                for v in g.iter_mut() {
                    *v -= mean;
                }
                betas.push(g);
            }
            let scale = if betas.is_empty() {
                0.0
            } else {
                (0..nx)
                    .map(|x| {
                        let tot: f64 = betas.iter().map(|b| b[x].abs()).sum();
                        if tot > 0.0 {
                            MARGIN * rho[x] / tot
                        } else {
                            f64::INFINITY
                        }
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            let scale = if scale.is_finite() { scale } else { 0.0 };
            (0..nx)
                .map(|x| {
                    let mut m = DVector::zeros(d);
                    m[anchor] = rho[x];
                    for (k, b) in betas.iter().enumerate() {
                        m[support[k + 1]] = scale * b[x];
                    }
                    m
                })
                .collect()
        })
        .collect();

    SparseLinearMDP {
        num_states: nx,
        num_actions: na,
        horizon: h_len,
        ambient_dim: d,
        sparsity: s,
        support,
        features,
        theta,
        mu,
        initial_state: 0,
    }
}

/// One Bellman backup of `f` at step `h`, by exhaustive summation:
/// `r_h(x,a) + Σ_{x'} P_h(x'|x,a) · agg_{a'} f(x', a')` where `agg` is the
/// policy expectation or the max over actions.
pub fn bellman_apply(
    mdp: &SparseLinearMDP,
    h: usize,
    f: &DMatrix<f64>,
    mode: BackupMode<'_>,
) -> DMatrix<f64> {
    let next: DVector<f64> = aggregate_next(mdp, h, f, mode);
    DMatrix::from_fn(mdp.num_states, mdp.num_actions, |x, a| {
        let p = mdp.transition_distribution(h, x, a);
        mdp.mean_reward(h, x, a) + p.dot(&next)
    })
}

/// The per-state aggregation `agg_{a'} f(x', a')` used by Bellman backups:
/// `Σ_{a'} π_{h+1}(a'|x') f(x',a')` in policy mode, `max_{a'} f(x',a')` in
/// greedy mode. `h` is the step of the backup; policies are queried at `h+1`.
pub fn aggregate_next(
    mdp: &SparseLinearMDP,
    h: usize,
    f: &DMatrix<f64>,
    mode: BackupMode<'_>,
) -> DVector<f64> {
    // At the terminal backup the continuation table is zero, so the policy
    // query index is clamped rather than read past the horizon.
    let h_query = (h + 1).min(mdp.horizon - 1);
    DVector::from_fn(mdp.num_states, |xn, _| match mode {
        BackupMode::Greedy => (0..mdp.num_actions).map(|a| f[(xn, a)]).fold(f64::NEG_INFINITY, f64::max),
        BackupMode::Policy(pi) => {
            let probs = pi.action_probs(mdp, h_query, xn);
            (0..mdp.num_actions).map(|a| probs[a] * f[(xn, a)]).sum()
        }
    })
}

/// Exact projection weights of a next-step table: the unique vector `w`
/// with `(B_h f)(x,a) = ⟨φ(x,a), w⟩`, namely
/// `w = θ_h + Σ_{x'} (agg_{a'} f(x',a')) μ_h(x')`.
pub fn projection_weights(
    mdp: &SparseLinearMDP,
    h: usize,
    f: &DMatrix<f64>,
    mode: BackupMode<'_>,
) -> DVector<f64> {
    let next = aggregate_next(mdp, h, f, mode);
    let mut w = mdp.theta[h].clone();
    for xn in 0..mdp.num_states {
        w += &mdp.mu[h][xn] * next[xn];
    }
    w
}

/// Exact `Q^π` and `V^π` by backward induction.
///
/// A mixture policy is evaluated structurally: the tables are arithmetic
/// means of the member tables (a mixture picks one member per episode, so
/// values and occupancies are episode-level averages).
pub fn exact_policy_values(mdp: &SparseLinearMDP, pi: &Policy) -> ValueTables {
    if let Policy::Mixture { members } = pi {
        assert!(!members.is_empty(), "mixture policy must have members");
        let parts: Vec<ValueTables> = members.iter().map(|m| exact_policy_values(mdp, m)).collect();
        let scale = 1.0 / members.len() as f64;
        let q = (0..mdp.horizon)
            .map(|h| {
                let mut acc = parts[0].q[h].clone();
                for p in &parts[1..] {
                    acc += &p.q[h];
                }
                acc * scale
            })
            .collect();
        let v = (0..mdp.horizon)
            .map(|h| {
                let mut acc = parts[0].v[h].clone();
                for p in &parts[1..] {
                    acc += &p.v[h];
                }
                acc * scale
            })
            .collect();
        return ValueTables { q, v };
    }
    let mut q: Vec<DMatrix<f64>> = vec![DMatrix::zeros(mdp.num_states, mdp.num_actions); mdp.horizon];
    let mut v: Vec<DVector<f64>> = vec![DVector::zeros(mdp.num_states); mdp.horizon];
    let mut next = DMatrix::zeros(mdp.num_states, mdp.num_actions);
    for h in (0..mdp.horizon).rev() {
        q[h] = bellman_apply(mdp, h, &next, BackupMode::Policy(pi));
        v[h] = DVector::from_fn(mdp.num_states, |x, _| {
            let probs = pi.action_probs(mdp, h, x);
            (0..mdp.num_actions).map(|a| probs[a] * q[h][(x, a)]).sum()
        });
        next = q[h].clone();
    }
    ValueTables { q, v }
}

/// Exact `Q*`, `V*` and a greedy tabular optimal policy (ties to the lowest
/// action index).
pub fn exact_optimal_values(mdp: &SparseLinearMDP) -> (ValueTables, Policy) {
    let mut q: Vec<DMatrix<f64>> = vec![DMatrix::zeros(mdp.num_states, mdp.num_actions); mdp.horizon];
    let mut v: Vec<DVector<f64>> = vec![DVector::zeros(mdp.num_states); mdp.horizon];
    let mut probs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(mdp.horizon);
    let mut next = DMatrix::zeros(mdp.num_states, mdp.num_actions);
    for h in (0..mdp.horizon).rev() {
        q[h] = bellman_apply(mdp, h, &next, BackupMode::Greedy);
        v[h] = DVector::from_fn(mdp.num_states, |x, _| {
            (0..mdp.num_actions).map(|a| q[h][(x, a)]).fold(f64::NEG_INFINITY, f64::max)
        });
        next = q[h].clone();
    }
    for h in 0..mdp.horizon {
        let mut table = vec![vec![0.0; mdp.num_actions]; mdp.num_states];
        for (x, row) in table.iter_mut().enumerate() {
            let best = (0..mdp.num_actions)
                .max_by(|&a, &b| q[h][(x, a)].partial_cmp(&q[h][(x, b)]).unwrap().then(b.cmp(&a)))
                .unwrap();
            row[best] = 1.0;
        }
        probs.push(table);
    }
    (ValueTables { q, v }, Policy::Tabular { probs })
}

/// `SubOpt(π*, π) = V*_1(x1) − V^π_1(x1)`. Nonnegative up to round-off.
pub fn suboptimality(mdp: &SparseLinearMDP, pi: &Policy) -> f64 {
    let (opt, _) = exact_optimal_values(mdp);
    let val = exact_policy_values(mdp, pi);
    opt.v[0][mdp.initial_state] - val.v[0][mdp.initial_state]
}

/// Exact `Q^π` under replaced reward tables (the transition kernel stays):
/// the evaluation backbone for induced MDPs.
pub fn exact_policy_values_with_rewards(
    mdp: &SparseLinearMDP,
    rewards: &[DMatrix<f64>],
    pi: &Policy,
) -> ValueTables {
    assert_eq!(rewards.len(), mdp.horizon, "one reward table per step");
    let mut q: Vec<DMatrix<f64>> = vec![DMatrix::zeros(mdp.num_states, mdp.num_actions); mdp.horizon];
    let mut v: Vec<DVector<f64>> = vec![DVector::zeros(mdp.num_states); mdp.horizon];
    let mut next = DMatrix::zeros(mdp.num_states, mdp.num_actions);
    for h in (0..mdp.horizon).rev() {
        let backed = bellman_apply(mdp, h, &next, BackupMode::Policy(pi));
        q[h] = DMatrix::from_fn(mdp.num_states, mdp.num_actions, |x, a| {
            backed[(x, a)] - mdp.mean_reward(h, x, a) + rewards[h][(x, a)]
        });
        v[h] = DVector::from_fn(mdp.num_states, |x, _| {
            let probs = pi.action_probs(mdp, h, x);
            (0..mdp.num_actions).map(|a| probs[a] * q[h][(x, a)]).sum()
        });
        next = q[h].clone();
    }
    ValueTables { q, v }
}

/// Occupancy measures `d^π_h(x, a)`, one `num_states × num_actions` table
/// per step; each sums to one. Mixtures average member occupancies.
pub fn occupancy_measures(mdp: &SparseLinearMDP, pi: &Policy) -> Vec<DMatrix<f64>> {
    if let Policy::Mixture { members } = pi {
        assert!(!members.is_empty(), "mixture policy must have members");
        let parts: Vec<Vec<DMatrix<f64>>> = members.iter().map(|m| occupancy_measures(mdp, m)).collect();
        let scale = 1.0 / members.len() as f64;
        return (0..mdp.horizon)
            .map(|h| {
                let mut acc = parts[0][h].clone();
                for p in &parts[1..] {
                    acc += &p[h];
                }
                acc * scale
            })
            .collect();
    }
    let mut out = Vec::with_capacity(mdp.horizon);
    let mut state_dist = DVector::zeros(mdp.num_states);
    state_dist[mdp.initial_state] = 1.0;
    for h in 0..mdp.horizon {
        let mut table = DMatrix::zeros(mdp.num_states, mdp.num_actions);
        for x in 0..mdp.num_states {
            if state_dist[x] == 0.0 {
                continue;
            }
            let probs = pi.action_probs(mdp, h, x);
            for a in 0..mdp.num_actions {
                table[(x, a)] = state_dist[x] * probs[a];
            }
        }
        let mut next_dist = DVector::zeros(mdp.num_states);
        for x in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                let w = table[(x, a)];
                if w == 0.0 {
                    continue;
                }
                let p = mdp.transition_distribution(h, x, a);
                next_dist += p * w;
            }
        }
        out.push(table);
        state_dist = next_dist;
    }
    out
}

/// Population feature covariance `Σ = E_ν[φ φᵀ]` for one occupancy table.
pub fn population_covariance(mdp: &SparseLinearMDP, nu_h: &DMatrix<f64>) -> DMatrix<f64> {
    let d = mdp.ambient_dim;
    let mut sigma = DMatrix::zeros(d, d);
    for x in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let w = nu_h[(x, a)];
            if w == 0.0 {
                continue;
            }
            let phi = mdp.feature(x, a);
            sigma.syger(w, phi, phi, 1.0);
        }
    }
    // syger fills the lower triangle; mirror it.
    for i in 0..d {
        for j in i + 1..d {
            sigma[(i, j)] = sigma[(j, i)];
        }
    }
    sigma
}

/// Per-horizon population covariances for a list of occupancies.
pub fn population_covariances(mdp: &SparseLinearMDP, nu: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    nu.iter().map(|n| population_covariance(mdp, n)).collect()
}
