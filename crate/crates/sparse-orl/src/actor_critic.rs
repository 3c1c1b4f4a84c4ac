//! Pessimistic actor-critic over log-linear policies.
//!
//! The actor is mirror descent on the softmax parameters: with a linear
//! critic estimate `Q̲_t = ⟨φ, w̲_t⟩`, the multiplicative-weights update
//! `π_{t+1} ∝ π_t·exp(η Q̲_t)` collapses to the additive logit update
//! `υ_{t+1} = υ_t + η·w̲_t`. The run's output is the uniform mixture of the
//! first `T` iterate policies.
//!
//! Two critics evaluate a fixed policy pessimistically:
//!
//! * **uniform coverage** — regress policy Bellman targets backward through
//!   an oracle and project onto the class ℓ1 ball by proportional scaling
//!   (which attains the minimal ℓ1 distance);
//! * **pessimistic optimization** — per horizon, minimize the empirical
//!   occupancy-weighted value `E_{d̂^π_h}[⟨φ, w⟩]` subject to the
//!   regression-consistency ellipsoid `∥w − ĉ_h∥²_{Σ̂_h} ≤ α_h²`, the class
//!   ℓ1 ball, and the `∥w∥₀ ≤ s` support constraint. Per candidate support
//!   the constrained minimizer is closed-form (an ellipsoid restricted to a
//!   coordinate plane via its Schur complement); supports are enumerated
//!   exhaustively. Because every trajectory starts at the fixed initial
//!   state, the step-1 surrogate objective coincides exactly with the
//!   initial-state value being lower-bounded.
//!
//! The induced-MDP diagnostics perturb the true reward by the critic's
//! one-step inconsistency; dynamic programming on the perturbed MDP must
//! reproduce the critic's tables identically (a telescoping identity), and
//! the initial-state gap measures how pessimistic the critic actually was.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{empirical_covariance, srle_dataset_for_policy, Dataset, TargetMode};
use crate::linalg;
use crate::mdp::{bellman_apply, exact_policy_values, BackupMode, SparseLinearMDP};
use crate::policy::Policy;
use crate::srle::{run_oracle_tuned, Oracle, RegressionParams, SrleError};

#[derive(Debug, Error)]
pub enum CriticError {
    #[error("oracle failure at step {h}: {source}")]
    Oracle { h: usize, source: SrleError },
    #[error("pessimistic program infeasible at step {h} (alpha too small for the center)")]
    Infeasible { h: usize },
    #[error("support search too large: {combos} candidate supports exceed cap {cap}")]
    SearchSpaceTooLarge { combos: u64, cap: u64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bad critic spec: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticVariant {
    UniformCoverage,
    PessOpt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticSolver {
    /// Greedy per-horizon support choice inside a fresh backward pass.
    Alternating,
    /// Exhaustive enumeration of joint per-horizon support combinations,
    /// scored by the initial-state objective. Tiny instances only; serves
    /// as the oracle for the alternating solver.
    ExactTiny,
}

#[derive(Debug, Clone)]
pub struct CriticSpec {
    pub variant: CriticVariant,
    pub oracle: Oracle,
    /// Per-horizon ellipsoid radii `α_h` (PessOpt only).
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub delta: f64,
    pub solver: CriticSolver,
    /// Outer stabilization passes for the alternating solver.
    pub max_iters: usize,
    /// Trim-rule constant for the gradient-trimming oracles.
    pub trim_constant: f64,
}

impl CriticSpec {
    pub fn uniform(oracle: Oracle, lambda: f64, delta: f64) -> Self {
        CriticSpec {
            variant: CriticVariant::UniformCoverage,
            oracle,
            alpha: Vec::new(),
            lambda,
            delta,
            solver: CriticSolver::Alternating,
            max_iters: 4,
            trim_constant: 1.0,
        }
    }

    pub fn pess_opt(oracle: Oracle, alpha: Vec<f64>, lambda: f64, delta: f64) -> Self {
        CriticSpec {
            variant: CriticVariant::PessOpt,
            oracle,
            alpha,
            lambda,
            delta,
            solver: CriticSolver::Alternating,
            max_iters: 4,
            trim_constant: 1.0,
        }
    }

    /// Default PessOpt radius schedule with all absolute constants at one:
    /// `α_h = (H+1−h)·(s^{1/4}√(log(dHN/δ))/N^{1/4} + √λ + √ε)` for the
    /// subset-search oracle; the mirror-descent oracle adds `ε^{1/4}`.
    pub fn default_alpha(
        oracle: Oracle,
        horizon: usize,
        d: usize,
        s: usize,
        n: usize,
        epsilon: f64,
        lambda: f64,
        delta: f64,
    ) -> Vec<f64> {
        let nf = n as f64;
        let log_term = ((d * horizon * n) as f64 / delta).ln().max(0.0);
        let mut base = lambda.max(0.0).sqrt() + epsilon.max(0.0).sqrt();
        base += match oracle {
            Oracle::Srle3 => log_term.sqrt() / nf.powf(0.25) + epsilon.max(0.0).powf(0.25),
            _ => (s as f64).powf(0.25) * log_term.sqrt() / nf.powf(0.25),
        };
        (0..horizon).map(|h| (horizon - h) as f64 * base).collect()
    }
}

/// Per-horizon slacks of the returned weights against their constraints
/// (values ≤ 0 mean satisfied; tiny positive values are round-off).
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ConstraintSlacks {
    /// `∥w − c∥²_{Σ̂} − α²` (PessOpt; 0 for the uniform critic).
    pub ellipsoid: f64,
    /// `∥w∥₁ − (H+1−h)`.
    pub l1: f64,
    /// Support size minus `s` (PessOpt; 0 for the uniform critic).
    pub l0: i64,
}

impl ConstraintSlacks {
    pub fn max_violation(&self) -> f64 {
        self.ellipsoid.max(self.l1).max(self.l0 as f64)
    }
}

/// Pessimistic evaluation of one policy.
#[derive(Debug, Clone)]
pub struct CriticOutput {
    /// Per-horizon weights `w̲_h`.
    pub weights: Vec<DVector<f64>>,
    /// Materialized tables `Q̲_h(x,a)`: clipped to `±(H+1−h)` for the
    /// uniform critic, raw `⟨φ, w̲_h⟩` for PessOpt.
    pub q_tables: Vec<DMatrix<f64>>,
    pub feasibility: Vec<ConstraintSlacks>,
    /// `Σ_a π(a|x1)·Q̲_1(x1, a)`.
    pub pessimistic_value: f64,
}

fn q_table_from_weights(mdp: &SparseLinearMDP, w: &DVector<f64>, clip: Option<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(mdp.num_states, mdp.num_actions, |x, a| {
        let v = mdp.feature(x, a).dot(w);
        match clip {
            Some(b) => v.clamp(-b, b),
            None => v,
        }
    })
}

fn initial_state_value(mdp: &SparseLinearMDP, pi: &Policy, q1: &DMatrix<f64>) -> f64 {
    let probs = pi.action_probs(mdp, 0, mdp.initial_state);
    (0..mdp.num_actions).map(|a| probs[a] * q1[(mdp.initial_state, a)]).sum()
}

/// Uniform-coverage critic: oracle regression of policy Bellman targets,
/// then proportional scaling onto the class ℓ1 ball.
pub fn critic_uniform(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    pi: &Policy,
    spec: &CriticSpec,
) -> Result<CriticOutput, CriticError> {
    if ds.is_empty() {
        return Err(CriticError::EmptyDataset);
    }
    let h_len = mdp.horizon;
    let mut weights = vec![DVector::zeros(mdp.ambient_dim); h_len];
    let mut q_tables = vec![DMatrix::zeros(mdp.num_states, mdp.num_actions); h_len];
    let mut feasibility = vec![ConstraintSlacks::default(); h_len];
    let mut q_next = DMatrix::zeros(mdp.num_states, mdp.num_actions);
    for h in (0..h_len).rev() {
        let budget = (h_len - h) as f64;
        let params = RegressionParams {
            sparsity: mdp.sparsity,
            l1_budget: budget,
            sigma: budget,
            lambda: spec.lambda,
            delta: spec.delta,
        };
        let problem = srle_dataset_for_policy(mdp, ds, h, TargetMode::Policy(pi), &q_next, &params);
        let rep = run_oracle_tuned(spec.oracle, &problem, spec.trim_constant)
            .map_err(|source| CriticError::Oracle { h, source })?;
        let mut w = rep.weights();
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        if l1 > budget {
            w *= budget / l1;
        }
        let table = q_table_from_weights(mdp, &w, Some(budget));
        feasibility[h] = ConstraintSlacks {
            ellipsoid: 0.0,
            l1: w.iter().map(|v| v.abs()).sum::<f64>() - budget,
            l0: 0,
        };
        weights[h] = w;
        q_tables[h] = table.clone();
        q_next = table;
    }
    let pessimistic_value = initial_state_value(mdp, pi, &q_tables[0]);
    Ok(CriticOutput { weights, q_tables, feasibility, pessimistic_value })
}

/// Empirical policy-reweighted occupancy features
/// `g_h = (1/N) Σ_τ Σ_a π_h(a | x^τ_h) φ(x^τ_h, a)`.
pub fn empirical_occupancy_features(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    pi: &Policy,
) -> Vec<DVector<f64>> {
    let n = ds.len() as f64;
    (0..mdp.horizon)
        .map(|h| {
            let mut g = DVector::zeros(mdp.ambient_dim);
            for t in &ds.trajectories {
                let x = t.steps[h].0;
                let probs = pi.action_probs(mdp, h, x);
                for a in 0..mdp.num_actions {
                    g += mdp.feature(x, a) * (probs[a] / n);
                }
            }
            g
        })
        .collect()
}

/// Exact minimizer of `⟨g, w⟩` over
/// `{supp(w) ⊆ S} ∩ {∥w − c∥²_Σ ≤ α²} ∩ {∥w∥₁ ≤ B}`.
///
/// Restricted to the coordinate plane of `S`, the ellipsoid has center
/// `m_S = c_S + Σ_SS⁻¹ Σ_{S,S^c} c_{S^c}` and squared radius `α² − ρ_S`,
/// where `ρ_S` is the Schur-complement offset `q(m) ≥ 0` paid for zeroing
/// the off-support coordinates of `c`. Returns `None` when the plane misses
/// the ellipsoid or the ℓ1 ball.
pub fn pessimistic_support_minimize(
    sigma: &DMatrix<f64>,
    center: &DVector<f64>,
    alpha: f64,
    l1_budget: f64,
    support: &[usize],
    g: &DVector<f64>,
) -> Option<DVector<f64>> {
    let d = sigma.nrows();
    let comp: Vec<usize> = (0..d).filter(|j| support.binary_search(j).is_err()).collect();
    let a_sub = linalg::principal_submatrix(sigma, support);
    let ch = nalgebra::Cholesky::new(a_sub)?;
    let c_s = linalg::subvector(center, support);
    let c_comp = linalg::subvector(center, &comp);
    // b = Σ_{S,S^c} c_{S^c}
    let b = DVector::from_fn(support.len(), |i, _| {
        comp.iter().enumerate().map(|(k, &j)| sigma[(support[i], j)] * c_comp[k]).sum()
    });
    let a_inv_b = ch.solve(&b);
    let d_quad: f64 = comp
        .iter()
        .enumerate()
        .map(|(k1, &j1)| {
            comp.iter()
                .enumerate()
                .map(|(k2, &j2)| c_comp[k1] * sigma[(j1, j2)] * c_comp[k2])
                .sum::<f64>()
        })
        .sum();
    let rho = (d_quad - b.dot(&a_inv_b)).max(0.0);
    let alpha_sq = alpha * alpha;
    if rho > alpha_sq + 1e-12 {
        return None;
    }
    let m_s = &c_s + &a_inv_b;
    let m_full = linalg::scatter(&m_s, support, d);
    if m_full.iter().map(|v| v.abs()).sum::<f64>() > l1_budget + 1e-12 {
        // Even the restricted center misses the ℓ1 ball; with a convex
        // feasible region and the minimum-norm point unknown, skip the
        // support rather than search it.
        return None;
    }
    let r_eff = (alpha_sq - rho).max(0.0).sqrt();
    let g_s = linalg::subvector(g, support);
    let w_s = if g_s.norm() <= 1e-14 || r_eff == 0.0 {
        m_s
    } else {
        let dir = ch.solve(&g_s);
        let denom = g_s.dot(&dir).max(0.0).sqrt();
        if denom <= 1e-14 {
            m_s
        } else {
            &m_s - dir * (r_eff / denom)
        }
    };
    let w = linalg::scatter(&w_s, support, d);
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    if l1 <= l1_budget + 1e-12 {
        candidates.push(w.clone());
    } else {
        // Proportional scaling first; if that exits the ellipsoid, walk
        // back along the segment to the restricted center (feasible).
        let scaled = &w * (l1_budget / l1);
        let q_scaled = linalg::quad_form(sigma, &(&scaled - center));
        if q_scaled <= alpha_sq + 1e-9 {
            candidates.push(scaled);
        } else {
            let mut t_ok = 0.0f64;
            let mut t_bad = 1.0f64;
            for _ in 0..60 {
                let t = 0.5 * (t_ok + t_bad);
                let cand = &m_full + (&w - &m_full) * t;
                if cand.iter().map(|v| v.abs()).sum::<f64>() <= l1_budget {
                    t_ok = t;
                } else {
                    t_bad = t;
                }
            }
            candidates.push(&m_full + (&w - &m_full) * t_ok);
        }
    }
    // ℓ1-sphere corners: when the ball is the binding constraint, the
    // linear objective is minimized at a vertex.
    for &j in support {
        if g[j] == 0.0 {
            continue;
        }
        let mut corner = DVector::zeros(d);
        corner[j] = -l1_budget * g[j].signum();
        if linalg::quad_form(sigma, &(&corner - center)) <= alpha_sq + 1e-12 {
            candidates.push(corner);
        }
    }
    candidates.into_iter().min_by(|a, b| g.dot(a).total_cmp(&g.dot(b)))
}

struct PerStepSolution {
    w: DVector<f64>,
    slacks: ConstraintSlacks,
}

/// Minimize the step surrogate over every candidate support (lexicographic
/// tie-break) and record feasibility slacks against the full constraints.
fn minimize_over_supports(
    sigma: &DMatrix<f64>,
    center: &DVector<f64>,
    alpha: f64,
    l1_budget: f64,
    s: usize,
    g: &DVector<f64>,
    h: usize,
) -> Result<PerStepSolution, CriticError> {
    let d = sigma.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    linalg::for_each_subset(d, s.clamp(1, d), |support| {
        if let Some(w) = pessimistic_support_minimize(sigma, center, alpha, l1_budget, support, g) {
            let obj = g.dot(&w);
            let better = match &best {
                None => true,
                Some((b, _)) => obj < *b,
            };
            if better {
                best = Some((obj, w));
            }
        }
    });
    let (_, w) = best.ok_or(CriticError::Infeasible { h })?;
    let slacks = ConstraintSlacks {
        ellipsoid: linalg::quad_form(sigma, &(&w - center)) - alpha * alpha,
        l1: w.iter().map(|v| v.abs()).sum::<f64>() - l1_budget,
        l0: w.iter().filter(|v| v.abs() > 1e-12).count() as i64 - s as i64,
    };
    Ok(PerStepSolution { w, slacks })
}

/// PessOpt critic (single-policy concentrability regime).
pub fn critic_pessopt(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    pi: &Policy,
    spec: &CriticSpec,
) -> Result<CriticOutput, CriticError> {
    if ds.is_empty() {
        return Err(CriticError::EmptyDataset);
    }
    if spec.alpha.len() != mdp.horizon {
        return Err(CriticError::BadSpec(format!(
            "alpha schedule has {} entries for horizon {}",
            spec.alpha.len(),
            mdp.horizon
        )));
    }
    if spec.alpha.iter().any(|&a| a < 0.0) {
        return Err(CriticError::BadSpec("alpha radii must be nonnegative".into()));
    }
    let d = mdp.ambient_dim;
    let s = mdp.sparsity.clamp(1, d);
    let combos = linalg::binomial(d, s);
    let cap = match spec.solver {
        CriticSolver::Alternating => crate::srle::SUPPORT_ENUM_CAP,
        // Joint enumeration: the pairwise product must stay tiny.
        CriticSolver::ExactTiny => {
            if combos.saturating_mul(combos) > 100_000 {
                return Err(CriticError::SearchSpaceTooLarge {
                    combos: combos.saturating_mul(combos),
                    cap: 100_000,
                });
            }
            crate::srle::SUPPORT_ENUM_CAP
        }
    };
    if combos > cap {
        return Err(CriticError::SearchSpaceTooLarge { combos, cap });
    }
    let sigma: Vec<DMatrix<f64>> = (0..mdp.horizon)
        .map(|h| empirical_covariance(mdp, ds, h, spec.lambda, ds.epsilon))
        .collect();
    let g = empirical_occupancy_features(mdp, ds, pi);
    match spec.solver {
        CriticSolver::Alternating => pessopt_alternating(mdp, ds, pi, spec, &sigma, &g),
        CriticSolver::ExactTiny => pessopt_exact_tiny(mdp, ds, pi, spec, &sigma, &g),
    }
}

fn oracle_center(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    pi: &Policy,
    spec: &CriticSpec,
    h: usize,
    q_next: &DMatrix<f64>,
) -> Result<DVector<f64>, CriticError> {
    let budget = (mdp.horizon - h) as f64;
    let params = RegressionParams {
        sparsity: mdp.sparsity,
        l1_budget: budget,
        sigma: budget,
        lambda: spec.lambda,
        delta: spec.delta,
    };
    let problem = srle_dataset_for_policy(mdp, ds, h, TargetMode::Policy(pi), q_next, &params);
    Ok(run_oracle_tuned(spec.oracle, &problem, spec.trim_constant)
        .map_err(|source| CriticError::Oracle { h, source })?
        .weights())
}

fn pessopt_alternating(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    pi: &Policy,
    spec: &CriticSpec,
    sigma: &[DMatrix<f64>],
    g: &[DVector<f64>],
) -> Result<CriticOutput, CriticError> {
    let h_len = mdp.horizon;
    let s = mdp.sparsity.clamp(1, mdp.ambient_dim);
    let mut weights = vec![DVector::<f64>::zeros(mdp.ambient_dim); h_len];
    let mut feasibility = vec![ConstraintSlacks::default(); h_len];
    let mut first = true;
    for _pass in 0..spec.max_iters.max(1) {
        let prev = weights.clone();
        let mut q_next = DMatrix::zeros(mdp.num_states, mdp.num_actions);
        for h in (0..h_len).rev() {
            let budget = (h_len - h) as f64;
            let center = oracle_center(mdp, ds, pi, spec, h, &q_next)?;
            let sol =
                minimize_over_supports(&sigma[h], &center, spec.alpha[h], budget, s, &g[h], h)?;
            weights[h] = sol.w;
            feasibility[h] = sol.slacks;
            q_next = q_table_from_weights(mdp, &weights[h], None);
        }
        let drift = weights
            .iter()
            .zip(prev.iter())
            .map(|(a, b)| (a - b).abs().max())
            .fold(0.0f64, f64::max);
        if !first && drift <= 1e-9 {
            break;
        }
        first = false;
        if drift <= 1e-9 {
            // Fresh backward passes are deterministic, so one stable pass
            // suffices; run one confirmation pass and stop.
            continue;
        }
    }
    let q_tables: Vec<DMatrix<f64>> =
        weights.iter().map(|w| q_table_from_weights(mdp, w, None)).collect();
    let pessimistic_value = initial_state_value(mdp, pi, &q_tables[0]);
    Ok(CriticOutput { weights, q_tables, feasibility, pessimistic_value })
}

struct Chain {
    weights: Vec<DVector<f64>>,
    q: DMatrix<f64>,
}

fn pessopt_exact_tiny(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    pi: &Policy,
    spec: &CriticSpec,
    sigma: &[DMatrix<f64>],
    g: &[DVector<f64>],
) -> Result<CriticOutput, CriticError> {
    let h_len = mdp.horizon;
    let d = mdp.ambient_dim;
    let s = mdp.sparsity.clamp(1, d);
    let supports = linalg::subsets(d, s);
    let mut chains = vec![Chain { weights: Vec::new(), q: DMatrix::zeros(mdp.num_states, mdp.num_actions) }];
    for h in (0..h_len).rev() {
        let budget = (h_len - h) as f64;
        let mut next = Vec::with_capacity(chains.len() * supports.len());
        for tail in &chains {
            let center = oracle_center(mdp, ds, pi, spec, h, &tail.q)?;
            for support in &supports {
                if let Some(w) = pessimistic_support_minimize(
                    &sigma[h],
                    &center,
                    spec.alpha[h],
                    budget,
                    support,
                    &g[h],
                ) {
                    let mut weights = Vec::with_capacity(tail.weights.len() + 1);
                    weights.push(w.clone());
                    weights.extend(tail.weights.iter().cloned());
                    next.push(Chain { q: q_table_from_weights(mdp, &w, None), weights });
                }
            }
        }
        if next.is_empty() {
            return Err(CriticError::Infeasible { h });
        }
        if next.len() > 200_000 {
            return Err(CriticError::SearchSpaceTooLarge {
                combos: next.len() as u64,
                cap: 200_000,
            });
        }
        chains = next;
    }
    let best = chains
        .into_iter()
        .min_by(|a, b| g[0].dot(&a.weights[0]).total_cmp(&g[0].dot(&b.weights[0])))
        .expect("nonempty chain set");
    let weights = best.weights;
    let q_tables: Vec<DMatrix<f64>> =
        weights.iter().map(|w| q_table_from_weights(mdp, w, None)).collect();
    // Slacks against the centers induced by the winning chain.
    let mut feasibility = vec![ConstraintSlacks::default(); h_len];
    let mut q_next = DMatrix::zeros(mdp.num_states, mdp.num_actions);
    for h in (0..h_len).rev() {
        let budget = (h_len - h) as f64;
        let center = oracle_center(mdp, ds, pi, spec, h, &q_next)?;
        feasibility[h] = ConstraintSlacks {
            ellipsoid: linalg::quad_form(&sigma[h], &(&weights[h] - &center))
                - spec.alpha[h] * spec.alpha[h],
            l1: weights[h].iter().map(|v| v.abs()).sum::<f64>() - budget,
            l0: weights[h].iter().filter(|v| v.abs() > 1e-12).count() as i64 - s as i64,
        };
        q_next = q_tables[h].clone();
    }
    let pessimistic_value = initial_state_value(mdp, pi, &q_tables[0]);
    Ok(CriticOutput { weights, q_tables, feasibility, pessimistic_value })
}

/// Dispatch on the critic variant.
pub fn run_critic(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    pi: &Policy,
    spec: &CriticSpec,
) -> Result<CriticOutput, CriticError> {
    match spec.variant {
        CriticVariant::UniformCoverage => critic_uniform(mdp, ds, pi, spec),
        CriticVariant::PessOpt => critic_pessopt(mdp, ds, pi, spec),
    }
}

/// Additive logit update `υ'_h = υ_h + η·w̲_h`.
pub fn actor_step(upsilon: &[DVector<f64>], w_underbar: &[DVector<f64>], eta: f64) -> Vec<DVector<f64>> {
    assert!(eta >= 0.0, "step size must be nonnegative");
    upsilon.iter().zip(w_underbar.iter()).map(|(u, w)| u + w * eta).collect()
}

/// Theorem step-size schedules, written in terms of the actual iterate
/// count: `√(log|A|/T)` under uniform coverage and `√(log|A|/(H²T))` for
/// PessOpt. With the theorem setting `T = N` these are exactly the stated
/// `√(log|A|/N)` and `√(log|A|/(H²N))`; for smaller `T` the mirror-descent
/// analysis requires the step to match `T`, not `N`.
pub fn default_actor_step_size(
    variant: CriticVariant,
    num_actions: usize,
    horizon: usize,
    t_iters: usize,
) -> f64 {
    let log_a = (num_actions as f64).ln().max(f64::MIN_POSITIVE);
    match variant {
        CriticVariant::UniformCoverage => (log_a / t_iters as f64).sqrt(),
        CriticVariant::PessOpt => (log_a / ((horizon * horizon * t_iters) as f64)).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AcTraceRow {
    pub t: usize,
    pub pessimistic_value: f64,
    pub constraint_max_slack: f64,
}

#[derive(Debug, Clone)]
pub struct AcRun {
    /// Uniform mixture of the T iterate policies (the algorithm's output).
    pub mixture: Policy,
    pub trace: Vec<AcTraceRow>,
}

/// Run the actor-critic loop for `T` iterations.
///
/// `eta = None` selects the theorem schedule for the critic variant. The
/// `seed` parameter is accepted for interface uniformity; both critics are
/// deterministic functions of the dataset and policy, so it is unused.
pub fn run_actor_critic(
    mdp: &SparseLinearMDP,
    ds: &Dataset,
    spec: &CriticSpec,
    t_iters: usize,
    eta: Option<f64>,
    _seed: u64,
) -> Result<AcRun, CriticError> {
    if t_iters == 0 {
        return Err(CriticError::BadSpec("need T >= 1 iterations".into()));
    }
    let eta = eta.unwrap_or_else(|| {
        default_actor_step_size(spec.variant, mdp.num_actions, mdp.horizon, t_iters)
    });
    let mut upsilon: Vec<DVector<f64>> = vec![DVector::zeros(mdp.ambient_dim); mdp.horizon];
    let mut members = Vec::with_capacity(t_iters);
    let mut trace = Vec::with_capacity(t_iters);
    for t in 1..=t_iters {
        let pi_t = Policy::LogLinear {
            upsilon: upsilon.iter().map(|u| u.iter().cloned().collect()).collect(),
        };
        let out = run_critic(mdp, ds, &pi_t, spec)?;
        let max_slack =
            out.feasibility.iter().map(|s| s.max_violation()).fold(f64::NEG_INFINITY, f64::max);
        trace.push(AcTraceRow {
            t,
            pessimistic_value: out.pessimistic_value,
            constraint_max_slack: max_slack,
        });
        upsilon = actor_step(&upsilon, &out.weights, eta);
        members.push(pi_t);
    }
    Ok(AcRun { mixture: Policy::Mixture { members }, trace })
}

/// Induced-MDP diagnostics (test-only: requires the true MDP).
#[derive(Debug, Clone)]
pub struct InducedMdpDiag {
    /// Perturbed rewards `r̂^π_h = r_h + Q̲_h − (B^π_h Q̲_{h+1})`.
    pub perturbed_reward: Vec<DMatrix<f64>>,
    /// `max_{h,x,a} |Q_{h,M̂} − Q̲_h|`; an exact telescoping identity, so
    /// this must vanish to round-off.
    pub value_match_error: f64,
    /// `V̲_1(x1) − V^π_1(x1)`; nonpositive when the critic was pessimistic.
    pub pessimism_gap: f64,
}

pub fn induced_mdp_diagnostic(
    mdp: &SparseLinearMDP,
    pi: &Policy,
    critic_out: &CriticOutput,
) -> InducedMdpDiag {
    let h_len = mdp.horizon;
    let zero = DMatrix::zeros(mdp.num_states, mdp.num_actions);
    // Perturbed rewards.
    let mut perturbed = Vec::with_capacity(h_len);
    for h in 0..h_len {
        let q_next = critic_out.q_tables.get(h + 1).unwrap_or(&zero);
        let backed = bellman_apply(mdp, h, q_next, BackupMode::Policy(pi));
        let r = mdp.reward_table(h);
        perturbed.push(DMatrix::from_fn(mdp.num_states, mdp.num_actions, |x, a| {
            r[(x, a)] + critic_out.q_tables[h][(x, a)] - backed[(x, a)]
        }));
    }
    // Policy evaluation on the induced MDP (same kernel, perturbed reward).
    let induced = crate::mdp::exact_policy_values_with_rewards(mdp, &perturbed, pi);
    let mut value_match_error = 0.0f64;
    for h in 0..h_len {
        for x in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                value_match_error = value_match_error
                    .max((induced.q[h][(x, a)] - critic_out.q_tables[h][(x, a)]).abs());
            }
        }
    }
    let v_pi = exact_policy_values(mdp, pi).v[0][mdp.initial_state];
    InducedMdpDiag {
        perturbed_reward: perturbed,
        value_match_error,
        pessimism_gap: critic_out.pessimistic_value - v_pi,
    }
}
