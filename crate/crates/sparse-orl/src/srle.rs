//! Sparse robust linear estimators (SRLE1/2/3) and baselines.
//!
//! All three oracles estimate an `s`-sparse parameter from `N` covariate
//! rows with `∥z∥∞ ≤ 1` when up to an `ε` fraction of rows is adversarial:
//!
//! * **SRLE1** — mirror descent over the ℓ1 ball `∥w∥₁ ≤ B` on the squared
//!   loss, with per-iteration gradients replaced by coordinatewise trimmed
//!   means of the per-sample contributions. Intended for well-conditioned
//!   designs; fast rates, ℓ1-norm accuracy.
//! * **SRLE2** — the ℓ0–ℓ2 program: jointly choose a support `|S| ≤ s`, a
//!   retained row set `|C| = ⌈(1−ε)N⌉` and weights minimizing
//!   `(1/N)∥y_C − Z_C w∥² + λ∥w∥²`. Solved per candidate support by
//!   alternating ridge fits with trimmed-residual row selection. Exhaustive
//!   support search is the reference path; iterative hard thresholding is
//!   the cheap one. Statistically strongest, exponential in `s` and `d`.
//! * **SRLE3** — mirror descent in the `(1+q)`-norm geometry, `q = 1/log d`,
//!   with the same trimmed gradients. Polynomial time for any design, but
//!   only prediction-norm (slow rate) accuracy: no support recovery.
//!
//! `Oracle::Ols` is the deliberately non-robust ordinary-least-squares
//! baseline used in separation experiments.
//!
//! Determinism: every tie (residual sorting, support enumeration, threshold
//! selection) is broken by the lowest index, so results depend only on the
//! problem data and options.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum SrleError {
    #[error("loss diverged to a non-finite value (bad step schedule?)")]
    NonFinite,
    #[error("support search space too large: {combos} candidate supports exceed cap {cap}")]
    SearchSpaceTooLarge { combos: u64, cap: u64 },
    #[error("quadratic form was negative ({0}); matrix is not PSD")]
    NegativeQuadratic(f64),
    #[error("bad regression problem: {0}")]
    BadProblem(String),
}

/// A robust sparse regression instance.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    /// `N × d` covariate matrix with `∥row∥∞ ≤ 1`.
    pub z: DMatrix<f64>,
    /// Targets, one per row.
    pub y: DVector<f64>,
    /// Sparsity budget `s`.
    pub sparsity: usize,
    /// ℓ1 budget `B` (a bound on `∥w*∥₁` supplied by the caller).
    pub l1_budget: f64,
    /// Noise-scale bound.
    pub sigma: f64,
    /// Corruption fraction in `[0, 1/2)`.
    pub epsilon: f64,
    /// Ridge weight.
    pub lambda: f64,
    /// Failure probability for trim calibration.
    pub delta: f64,
}

/// Caller-side parameters copied into a [`RegressionProblem`] when it is
/// constructed from a dataset view.
#[derive(Debug, Clone, Copy)]
pub struct RegressionParams {
    pub sparsity: usize,
    pub l1_budget: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub delta: f64,
}

/// Estimate plus solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorReport {
    pub w_hat: Vec<f64>,
    /// Nonzero pattern of `w_hat` (indices with `|w_i| > 1e-12`).
    pub support: Vec<usize>,
    /// Retained row indices; `|C| = ⌈(1−ε)N⌉` for SRLE2, all rows otherwise.
    pub trimmed_set: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the ℓ1 budget was enforced by proportional scaling.
    pub l1_scaled: bool,
}

impl EstimatorReport {
    pub fn weights(&self) -> DVector<f64> {
        DVector::from_vec(self.w_hat.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    Srle1,
    Srle2,
    Srle3,
    /// Untrimmed, unconstrained least squares (non-robust baseline).
    Ols,
}

impl std::fmt::Display for Oracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Oracle::Srle1 => "srle1",
            Oracle::Srle2 => "srle2",
            Oracle::Srle3 => "srle3",
            Oracle::Ols => "ols",
        };
        f.write_str(s)
    }
}

/// Run an oracle with default options.
pub fn run_oracle(oracle: Oracle, p: &RegressionProblem) -> Result<EstimatorReport, SrleError> {
    run_oracle_tuned(oracle, p, 1.0)
}

/// Run an oracle with an explicit trim constant `c` (the calibration knob
/// of the SRLE1/SRLE3 gradient trim rule; ignored by SRLE2 and OLS).
pub fn run_oracle_tuned(
    oracle: Oracle,
    p: &RegressionProblem,
    trim_constant: f64,
) -> Result<EstimatorReport, SrleError> {
    match oracle {
        Oracle::Srle1 => srle1(p, &Srle1Options { trim_constant, ..Srle1Options::default() }),
        Oracle::Srle2 => srle2(p, &Srle2Options::default()),
        Oracle::Srle3 => srle3(p, &Srle3Options { trim_constant, ..Srle3Options::default() }),
        Oracle::Ols => Ok(ols_baseline(p)),
    }
}

/// The ridge weight used by the RL layers: `λ = (s/N)·log(d/(s·δ))`.
pub fn default_ridge_lambda(s: usize, n: usize, d: usize, delta: f64) -> f64 {
    let s = s.max(1) as f64;
    (s / n as f64) * (d as f64 / (s * delta)).ln().max(0.0)
}

fn check_problem(p: &RegressionProblem) -> Result<(), SrleError> {
    if p.z.nrows() == 0 || p.z.nrows() != p.y.len() {
        return Err(SrleError::BadProblem("need N >= 1 rows and matching targets".into()));
    }
    if !(0.0..0.5).contains(&p.epsilon) {
        return Err(SrleError::BadProblem(format!("epsilon {} outside [0, 1/2)", p.epsilon)));
    }
    if p.l1_budget <= 0.0 {
        return Err(SrleError::BadProblem("l1 budget must be positive".into()));
    }
    Ok(())
}

fn nonzero_pattern(w: &DVector<f64>) -> Vec<usize> {
    w.iter().enumerate().filter(|(_, v)| v.abs() > 1e-12).map(|(i, _)| i).collect()
}

/// Symmetric trimmed mean: drop the `k` smallest and `k` largest values.
/// Two selection passes instead of a sort keep this O(n).
fn trimmed_mean(vals: &mut [f64], k: usize) -> f64 {
    let n = vals.len();
    let k = k.min(n.saturating_sub(1) / 2);
    if k == 0 {
        return vals.iter().sum::<f64>() / n as f64;
    }
    let (_, _, upper) = vals.select_nth_unstable_by(k - 1, f64::total_cmp);
    let m = upper.len();
    let (mid, _, _) = upper.select_nth_unstable_by(m - k, f64::total_cmp);
    mid.iter().sum::<f64>() / mid.len() as f64
}

/// Per-tail trim count for the fraction `ε + c·√(log(2d/δ)/N)`: the
/// adversarial budget `⌈εN⌉` is always covered in full, the stochastic
/// guard `⌊c·√(N·log(2d/δ))⌋` comes on top, and the total stays below
/// `N/2`.
fn trim_count(p: &RegressionProblem, c: f64) -> usize {
    let n = p.z.nrows();
    let d = p.z.ncols();
    let adversarial = crate::data::corruption_budget(p.epsilon, n);
    let guard = (c * ((2.0 * d as f64 / p.delta).ln().max(0.0) * n as f64).sqrt()).floor() as usize;
    (adversarial + guard).min(n.saturating_sub(1) / 2)
}

/// Coordinatewise trimmed-mean estimate of the squared-loss gradient
/// `(2/N) Zᵀ(Zw − y)` at `w`.
fn trimmed_gradient(p: &RegressionProblem, w: &DVector<f64>, k: usize) -> DVector<f64> {
    let n = p.z.nrows();
    let d = p.z.ncols();
    let residuals = &p.z * w - &p.y;
    let mut g = DVector::zeros(d);
    let mut buf = vec![0.0; n];
    for j in 0..d {
        for i in 0..n {
            buf[i] = 2.0 * residuals[i] * p.z[(i, j)];
        }
        g[j] = trimmed_mean(&mut buf, k);
    }
    g
}

/// Robust objective for reporting: mean squared residual after dropping the
/// `k` largest squared residuals.
fn trimmed_objective(p: &RegressionProblem, w: &DVector<f64>, k: usize) -> f64 {
    let n = p.z.nrows();
    let residuals = &p.z * w - &p.y;
    let mut sq: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    sq.sort_unstable_by(f64::total_cmp);
    let kept = &sq[..n - k.min(n - 1)];
    kept.iter().sum::<f64>() / kept.len() as f64
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// Constant `1/L̂` with `L̂ = λ_max((2/N)ZᵀZ)`.
    Auto,
    Constant(f64),
    /// `c / √t`.
    InvSqrt(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Srle1Options {
    pub max_iters: usize,
    pub step_schedule: StepSchedule,
    /// Constant `c` in the trim rule; the calibration constant is not
    /// pinned by theory, so it is exposed here.
    pub trim_constant: f64,
}

impl Default for Srle1Options {
    fn default() -> Self {
        Srle1Options { max_iters: 600, step_schedule: StepSchedule::Auto, trim_constant: 1.0 }
    }
}

/// SRLE1: trimmed-gradient mirror descent (Euclidean geometry) on the ℓ1
/// ball `∥w∥₁ ≤ B`.
pub fn srle1(p: &RegressionProblem, opts: &Srle1Options) -> Result<EstimatorReport, SrleError> {
    check_problem(p)?;
    let n = p.z.nrows();
    let k = trim_count(p, opts.trim_constant);
    let hessian = (p.z.transpose() * &p.z) * (2.0 / n as f64);
    let l_hat = linalg::max_eigenvalue(&hessian).max(1e-12);
    let mut w = DVector::zeros(p.z.ncols());
    let mut iterations = 0;
    let mut converged = false;
    for t in 1..=opts.max_iters {
        iterations = t;
        let g = trimmed_gradient(p, &w, k);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(SrleError::NonFinite);
        }
        let step = match opts.step_schedule {
            StepSchedule::Auto => 1.0 / l_hat,
            StepSchedule::Constant(c) => c,
            StepSchedule::InvSqrt(c) => c / (t as f64).sqrt(),
        };
        let w_new = linalg::project_l1_ball(&(&w - g * step), p.l1_budget);
        if w_new.iter().any(|v| !v.is_finite()) {
            return Err(SrleError::NonFinite);
        }
        let delta_l1: f64 = (&w_new - &w).iter().map(|v| v.abs()).sum();
        w = w_new;
        // The trimmed gradient has a small bias plateau near the optimum,
        // so demand stationarity only to the level it can deliver.
        if delta_l1 <= 1e-9 * p.l1_budget.max(1.0) {
            converged = true;
            break;
        }
    }
    let objective = trimmed_objective(p, &w, k);
    if !objective.is_finite() {
        return Err(SrleError::NonFinite);
    }
    Ok(EstimatorReport {
        support: nonzero_pattern(&w),
        trimmed_set: (0..n).collect(),
        w_hat: w.iter().cloned().collect(),
        objective,
        iterations,
        converged,
        l1_scaled: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportSearch {
    Exhaustive,
    Iht,
}

#[derive(Debug, Clone, Copy)]
pub struct Srle2Options {
    pub support_search: SupportSearch,
    pub max_alt_iters: usize,
}

impl Default for Srle2Options {
    fn default() -> Self {
        Srle2Options { support_search: SupportSearch::Exhaustive, max_alt_iters: 100 }
    }
}

/// Cap on exhaustive support enumeration.
pub const SUPPORT_ENUM_CAP: u64 = 1_000_000;

/// Retained-set size `⌈(1−ε)N⌉` (float-spill guarded like the corruption
/// budget).
pub fn retained_count(epsilon: f64, n: usize) -> usize {
    let t = (1.0 - epsilon) * n as f64;
    let m = if (t - t.round()).abs() < 1e-9 { t.round() as usize } else { t.ceil() as usize };
    m.clamp(1, n)
}

/// Ridge fit restricted to `support` over rows `rows`:
/// `argmin (1/N)∥y_C − Z_C w∥² + λ∥w∥²`. `λ = 0` falls back to the
/// minimum-norm least-squares solution.
fn ridge_fit_on(
    p: &RegressionProblem,
    support: &[usize],
    rows: &[usize],
    n_total: usize,
) -> DVector<f64> {
    let s = support.len();
    let zc = DMatrix::from_fn(rows.len(), s, |i, j| p.z[(rows[i], support[j])]);
    let yc = DVector::from_fn(rows.len(), |i, _| p.y[rows[i]]);
    let w_s = if p.lambda > 0.0 {
        let a = (zc.transpose() * &zc) / n_total as f64
            + DMatrix::<f64>::identity(s, s) * p.lambda;
        let b = (zc.transpose() * &yc) / n_total as f64;
        linalg::solve_spd(&a, &b).unwrap_or_else(|| linalg::lstsq(&a, &b))
    } else {
        linalg::lstsq(&zc, &yc)
    };
    linalg::scatter(&w_s, support, p.z.ncols())
}

/// `m` rows with the smallest squared residuals, ties by row index.
fn best_rows(p: &RegressionProblem, w: &DVector<f64>, m: usize) -> Vec<usize> {
    let residuals = &p.z * w - &p.y;
    let mut order: Vec<usize> = (0..p.z.nrows()).collect();
    order.sort_by(|&i, &j| {
        (residuals[i] * residuals[i]).total_cmp(&(residuals[j] * residuals[j])).then(i.cmp(&j))
    });
    let mut keep: Vec<usize> = order.into_iter().take(m).collect();
    keep.sort_unstable();
    keep
}

/// Joint objective `(1/N)∥y_C − Z_C w∥² + λ∥w∥²`.
fn srle2_objective(p: &RegressionProblem, w: &DVector<f64>, rows: &[usize]) -> f64 {
    let residuals = &p.z * w - &p.y;
    let fit: f64 = rows.iter().map(|&i| residuals[i] * residuals[i]).sum();
    fit / p.z.nrows() as f64 + p.lambda * w.norm_squared()
}

struct AlternationOutcome {
    w: DVector<f64>,
    rows: Vec<usize>,
    objective: f64,
    iterations: usize,
    converged: bool,
    l1_scaled: bool,
}

/// Alternate ridge fits with trimmed-residual row selection on a fixed
/// support until the retained set stabilizes.
fn alternate_on_support(
    p: &RegressionProblem,
    support: &[usize],
    m: usize,
    max_alt_iters: usize,
) -> AlternationOutcome {
    let n = p.z.nrows();
    let all_rows: Vec<usize> = (0..n).collect();
    // First fit sees every row; the trim step then takes over.
    let mut w = ridge_fit_on(p, support, &all_rows, n);
    let mut rows = best_rows(p, &w, m);
    let mut objective = srle2_objective(p, &w, &rows);
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_alt_iters {
        iterations += 1;
        let w_new = ridge_fit_on(p, support, &rows, n);
        let obj_fit = srle2_objective(p, &w_new, &rows);
        debug_assert!(obj_fit <= objective + 1e-9, "fit step must not increase the objective");
        let rows_new = best_rows(p, &w_new, m);
        let obj_trim = srle2_objective(p, &w_new, &rows_new);
        debug_assert!(obj_trim <= obj_fit + 1e-9, "trim step must not increase the objective");
        let stable = rows_new == rows;
        w = w_new;
        rows = rows_new;
        objective = obj_trim;
        if stable {
            converged = true;
            break;
        }
    }
    // Enforce the ℓ1 budget by proportional scaling (the minimal-ℓ1-distance
    // feasible point), then re-rank rows for the scaled weights.
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let mut l1_scaled = false;
    if l1 > p.l1_budget + 1e-12 {
        w *= p.l1_budget / l1;
        l1_scaled = true;
        rows = best_rows(p, &w, m);
        objective = srle2_objective(p, &w, &rows);
    }
    AlternationOutcome { w, rows, objective, iterations, converged, l1_scaled }
}

/// SRLE2: trimmed ℓ0–ℓ2 regression.
pub fn srle2(p: &RegressionProblem, opts: &Srle2Options) -> Result<EstimatorReport, SrleError> {
    check_problem(p)?;
    let n = p.z.nrows();
    let d = p.z.ncols();
    let s_eff = p.sparsity.clamp(1, d);
    let m = retained_count(p.epsilon, n);
    let outcome = match opts.support_search {
        SupportSearch::Exhaustive => {
            let combos = linalg::binomial(d, s_eff);
            if combos > SUPPORT_ENUM_CAP {
                return Err(SrleError::SearchSpaceTooLarge { combos, cap: SUPPORT_ENUM_CAP });
            }
            let mut best: Option<AlternationOutcome> = None;
            linalg::for_each_subset(d, s_eff, |support| {
                let cand = alternate_on_support(p, support, m, opts.max_alt_iters);
                let better = match &best {
                    None => true,
                    Some(b) => cand.objective < b.objective,
                };
                if better {
                    best = Some(cand);
                }
            });
            best.expect("at least one candidate support")
        }
        SupportSearch::Iht => iht_search(p, s_eff, m, opts.max_alt_iters),
    };
    Ok(EstimatorReport {
        support: nonzero_pattern(&outcome.w),
        trimmed_set: outcome.rows,
        w_hat: outcome.w.iter().cloned().collect(),
        objective: outcome.objective,
        iterations: outcome.iterations,
        converged: outcome.converged,
        l1_scaled: outcome.l1_scaled,
    })
}

/// Hard-thresholding-pursuit search: gradient step, keep the top-`s`
/// coordinates, refit on that support, re-trim rows.
fn iht_search(p: &RegressionProblem, s: usize, m: usize, max_alt_iters: usize) -> AlternationOutcome {
    let n = p.z.nrows();
    let d = p.z.ncols();
    let all_rows: Vec<usize> = (0..n).collect();
    let mut rows = all_rows;
    let mut w = DVector::<f64>::zeros(d);
    let mut support: Vec<usize> = Vec::new();
    let mut objective = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_alt_iters {
        iterations += 1;
        // Lipschitz constant of the restricted objective on current rows.
        let zc = DMatrix::from_fn(rows.len(), d, |i, j| p.z[(rows[i], j)]);
        let yc = DVector::from_fn(rows.len(), |i, _| p.y[rows[i]]);
        let hess = (zc.transpose() * &zc) * (2.0 / n as f64);
        let l = linalg::max_eigenvalue(&hess).max(1e-12) + 2.0 * p.lambda;
        let grad = (zc.transpose() * (&zc * &w - &yc)) * (2.0 / n as f64) + &w * (2.0 * p.lambda);
        let moved = &w - grad / l;
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&i, &j| moved[j].abs().total_cmp(&moved[i].abs()).then(i.cmp(&j)));
        let mut new_support: Vec<usize> = idx.into_iter().take(s).collect();
        new_support.sort_unstable();
        let w_new = ridge_fit_on(p, &new_support, &rows, n);
        let rows_new = best_rows(p, &w_new, m);
        let stable = new_support == support && rows_new == rows;
        w = w_new;
        support = new_support;
        rows = rows_new;
        objective = srle2_objective(p, &w, &rows);
        if stable {
            converged = true;
            break;
        }
    }
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let mut l1_scaled = false;
    if l1 > p.l1_budget + 1e-12 {
        w *= p.l1_budget / l1;
        l1_scaled = true;
        rows = best_rows(p, &w, m);
        objective = srle2_objective(p, &w, &rows);
    }
    AlternationOutcome { w, rows, objective, iterations, converged, l1_scaled }
}

#[derive(Debug, Clone, Copy)]
pub struct Srle3Options {
    pub max_iters: usize,
    pub trim_constant: f64,
}

impl Default for Srle3Options {
    fn default() -> Self {
        Srle3Options { max_iters: 4000, trim_constant: 1.0 }
    }
}

/// SRLE3: trimmed-gradient mirror descent with the `(1+q)`-norm Bregman
/// geometry, `q = 1/log d`. Returns the averaged iterate.
pub fn srle3(p: &RegressionProblem, opts: &Srle3Options) -> Result<EstimatorReport, SrleError> {
    check_problem(p)?;
    let n = p.z.nrows();
    let d = p.z.ncols();
    let k = trim_count(p, opts.trim_constant);
    let q = if d >= 3 { 1.0 / (d as f64).ln() } else { 1.0 };
    let p_norm = 1.0 + q;
    let p_dual = p_norm / (p_norm - 1.0);

    let norm_p = |v: &DVector<f64>, r: f64| -> f64 {
        v.iter().map(|x| x.abs().powf(r)).sum::<f64>().powf(1.0 / r)
    };
    let to_dual = |v: &DVector<f64>| -> DVector<f64> {
        let np = norm_p(v, p_norm);
        if np == 0.0 {
            return DVector::zeros(d);
        }
        let scale = np.powf(2.0 - p_norm);
        DVector::from_fn(d, |j, _| v[j].signum() * v[j].abs().powf(p_norm - 1.0) * scale)
    };
    let from_dual = |v: &DVector<f64>| -> DVector<f64> {
        let np = norm_p(v, p_dual);
        if np == 0.0 {
            return DVector::zeros(d);
        }
        let scale = np.powf(2.0 - p_dual);
        DVector::from_fn(d, |j, _| v[j].signum() * v[j].abs().powf(p_dual - 1.0) * scale)
    };

    let mut w = DVector::<f64>::zeros(d);
    let mut avg = DVector::<f64>::zeros(d);
    let mut g_max: f64 = 1e-12;
    let mut iterations = 0;
    for t in 1..=opts.max_iters {
        iterations = t;
        let g = trimmed_gradient(p, &w, k);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(SrleError::NonFinite);
        }
        g_max = g_max.max(g.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let eta = p.l1_budget * q.sqrt() / (g_max * (t as f64).sqrt());
        let theta = to_dual(&w) - g * eta;
        let mut w_new = from_dual(&theta);
        let l1: f64 = w_new.iter().map(|v| v.abs()).sum();
        if l1 > p.l1_budget {
            w_new *= p.l1_budget / l1;
        }
        if w_new.iter().any(|v| !v.is_finite()) {
            return Err(SrleError::NonFinite);
        }
        w = w_new;
        avg += &w;
    }
    avg /= iterations.max(1) as f64;
    // The averaged iterate carries the slow-rate guarantee; keep whichever
    // of (average, last) has the better trimmed objective.
    let (obj_avg, obj_last) = (trimmed_objective(p, &avg, k), trimmed_objective(p, &w, k));
    let (w, objective) = if obj_avg <= obj_last { (avg, obj_avg) } else { (w, obj_last) };
    if !objective.is_finite() {
        return Err(SrleError::NonFinite);
    }
    Ok(EstimatorReport {
        support: nonzero_pattern(&w),
        trimmed_set: (0..n).collect(),
        w_hat: w.iter().cloned().collect(),
        objective,
        iterations,
        converged: iterations == opts.max_iters,
        l1_scaled: false,
    })
}

/// Ordinary least squares (minimum-norm), no trimming, no constraints.
pub fn ols_baseline(p: &RegressionProblem) -> EstimatorReport {
    let w = linalg::lstsq(&p.z, &p.y);
    let n = p.z.nrows();
    let residuals = &p.z * &w - &p.y;
    EstimatorReport {
        support: nonzero_pattern(&w),
        trimmed_set: (0..n).collect(),
        w_hat: w.iter().cloned().collect(),
        objective: residuals.norm_squared() / n as f64,
        iterations: 1,
        converged: true,
        l1_scaled: false,
    }
}

/// `∥ŵ − w∥_Σ = √((ŵ−w)ᵀ Σ (ŵ−w))` for PSD `Σ`.
pub fn sigma_norm_error(
    w_hat: &DVector<f64>,
    w_ref: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64, SrleError> {
    let diff = w_hat - w_ref;
    let q = linalg::quad_form(sigma, &diff);
    if q < -1e-10 {
        return Err(SrleError::NegativeQuadratic(q));
    }
    Ok(q.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn signed_design(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut r = crate::rng::stream(seed, "design", 0);
        DMatrix::from_fn(n, d, |_, _| if r.gen::<bool>() { 1.0 } else { -1.0 })
    }

    fn problem(z: DMatrix<f64>, y: DVector<f64>, s: usize, b: f64, eps: f64, lambda: f64) -> RegressionProblem {
        RegressionProblem {
            z,
            y,
            sparsity: s,
            l1_budget: b,
            sigma: 0.5,
            epsilon: eps,
            lambda,
            delta: 0.05,
        }
    }

    #[test]
    fn srle1_recovers_noiseless_well_conditioned_instance() {
        let (n, d) = (50, 5);
        let z = signed_design(n, d, 7);
        let mut w_star = DVector::zeros(d);
        w_star[0] = 1.0;
        let y = &z * &w_star;
        let p = problem(z.clone(), y.clone(), 1, 1.0, 0.0, 0.0);
        let rep = srle1(&p, &Srle1Options::default()).unwrap();
        // Closed-form least squares on the clean data is the oracle.
        let w_ls = crate::linalg::lstsq(&z, &y);
        let err: f64 = (rep.weights() - &w_ls).iter().map(|v| v.abs()).sum();
        assert!(err <= 1e-3, "l1 error {err}");
    }

    #[test]
    fn srle1_zero_targets_give_zero_estimate() {
        let z = signed_design(30, 4, 3);
        let p = problem(z, DVector::zeros(30), 2, 5.0, 0.0, 0.0);
        let rep = srle1(&p, &Srle1Options::default()).unwrap();
        assert!(rep.weights().norm() < 1e-12);
        assert!(rep.converged);
    }

    #[test]
    fn srle1_survives_gross_outliers() {
        let (n, d) = (50, 5);
        let z = signed_design(n, d, 11);
        let mut w_star = DVector::zeros(d);
        w_star[1] = 0.7;
        w_star[3] = -0.3;
        let mut r = crate::rng::stream(11, "noise", 0);
        let noise = DVector::from_fn(n, |_, _| 0.1 * (r.gen::<f64>() - 0.5));
        let mut y = &z * &w_star + noise;
        for i in 0..5 {
            y[i] += 1e3;
        }
        let p = problem(z.clone(), y.clone(), 2, 1.0, 0.1, 0.0);
        let rep = srle1(&p, &Srle1Options::default()).unwrap();
        let err: f64 = (rep.weights() - &w_star).iter().map(|v| v.abs()).sum();
        // Oracle: OLS on the clean rows only.
        let z_clean = z.rows(5, n - 5).into_owned();
        let y_clean = y.rows(5, n - 5).into_owned();
        let w_clean = crate::linalg::lstsq(&z_clean, &y_clean);
        let err_clean: f64 = (&w_clean - &w_star).iter().map(|v| v.abs()).sum();
        assert!(err <= 5.0 * err_clean.max(1e-3), "robust err {err} vs clean fit {err_clean}");
    }

    #[test]
    fn srle2_exact_on_noiseless_identifiable_instance() {
        let (n, d) = (20, 6);
        let z = signed_design(n, d, 13);
        let mut w_star = DVector::zeros(d);
        w_star[2] = 2.0;
        let y = &z * &w_star;
        let p = problem(z, y, 1, 2.0, 0.0, 0.0);
        let rep = srle2(&p, &Srle2Options::default()).unwrap();
        assert_eq!(rep.support, vec![2]);
        assert!((rep.w_hat[2] - 2.0).abs() <= 1e-9);
        assert!(rep.converged);
        assert_eq!(rep.trimmed_set.len(), 20);
    }

    #[test]
    fn srle2_excludes_gross_outliers() {
        let (n, d) = (12, 4);
        let z = signed_design(n, d, 17);
        let mut w_star = DVector::zeros(d);
        w_star[0] = 1.5;
        let mut y = &z * &w_star;
        y[3] += 1e6;
        y[8] -= 1e6;
        let p = problem(z, y, 1, 2.0, 1.0 / 6.0, 1e-6);
        let rep = srle2(&p, &Srle2Options::default()).unwrap();
        assert_eq!(rep.trimmed_set.len(), 10);
        assert!(!rep.trimmed_set.contains(&3));
        assert!(!rep.trimmed_set.contains(&8));
        assert!((rep.w_hat[0] - 1.5).abs() < 1e-3);
    }

    #[test]
    fn srle2_ridge_dominance_shrinks_to_zero() {
        let z = signed_design(15, 4, 19);
        let y = DVector::from_element(15, 1.0);
        let mut p = problem(z, y, 2, 3.0, 0.0, 1e9);
        p.sigma = 1.0;
        let rep = srle2(&p, &Srle2Options::default()).unwrap();
        assert!(rep.weights().norm() < 1e-6, "ridge-dominated weights {:?}", rep.w_hat);
    }

    #[test]
    fn srle2_search_space_cap() {
        let z = DMatrix::<f64>::zeros(4, 60);
        let y = DVector::zeros(4);
        let p = problem(z, y, 10, 1.0, 0.0, 0.0);
        assert!(matches!(
            srle2(&p, &Srle2Options::default()),
            Err(SrleError::SearchSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn iht_never_beats_exhaustive() {
        for seed in 0..8u64 {
            let (n, d, s) = (24, 8, 2); // C(8,2) = 28 ≤ 200
            let z = signed_design(n, d, 100 + seed);
            let mut r = crate::rng::stream(seed, "w", 1);
            let mut w_star = DVector::zeros(d);
            w_star[r.gen_range(0..d)] = 1.0;
            w_star[r.gen_range(0..d)] = -0.5;
            let noise = DVector::from_fn(n, |_, _| 0.05 * (r.gen::<f64>() - 0.5));
            let y = &z * &w_star + noise;
            let p = problem(z, y, s, 2.0, 0.1, 1e-3);
            let ex = srle2(&p, &Srle2Options { support_search: SupportSearch::Exhaustive, max_alt_iters: 100 }).unwrap();
            let ih = srle2(&p, &Srle2Options { support_search: SupportSearch::Iht, max_alt_iters: 100 }).unwrap();
            assert!(ih.objective >= ex.objective - 1e-9, "seed {seed}: iht {} < exhaustive {}", ih.objective, ex.objective);
        }
    }

    #[test]
    fn srle3_zero_targets_give_zero() {
        let z = signed_design(30, 6, 23);
        let p = problem(z, DVector::zeros(30), 2, 4.0, 0.0, 0.0);
        let rep = srle3(&p, &Srle3Options::default()).unwrap();
        assert!(rep.weights().norm() < 1e-12);
    }

    #[test]
    fn srle3_degenerate_rank_one_design_predicts_within_grid_oracle() {
        // Rank-1 Z: only the prediction norm is identifiable.
        let (n, d) = (40, 3);
        let base = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        let mut r = crate::rng::stream(29, "scale", 0);
        let z = DMatrix::from_fn(n, d, |_, j| base[j]);
        let y = DVector::from_fn(n, |_, _| 2.0 + 0.01 * (r.gen::<f64>() - 0.5));
        let p = problem(z.clone(), y.clone(), 1, 3.0, 0.0, 0.0);
        let rep = srle3(&p, &Srle3Options::default()).unwrap();
        let resid = |w: &DVector<f64>| (&z * w - &y).norm_squared() / n as f64;
        let got = resid(&rep.weights());
        // Grid oracle over 10^4 l1-feasible candidates.
        let mut best = f64::INFINITY;
        let steps = 21;
        for i in 0..steps {
            for j in 0..steps {
                for k in 0..steps {
                    let w = DVector::from_vec(vec![
                        -3.0 + 6.0 * i as f64 / (steps - 1) as f64,
                        -3.0 + 6.0 * j as f64 / (steps - 1) as f64,
                        -3.0 + 6.0 * k as f64 / (steps - 1) as f64,
                    ]);
                    if w.iter().map(|v| v.abs()).sum::<f64>() <= 3.0 {
                        best = best.min(resid(&w));
                    }
                }
            }
        }
        assert!(got <= best + 1e-3, "srle3 residual {got} vs grid best {best}");
    }

    #[test]
    fn feasibility_invariants_hold_for_all_oracles() {
        let (n, d, s) = (30, 7, 2);
        let z = signed_design(n, d, 31);
        let mut r = crate::rng::stream(31, "y", 0);
        let y = DVector::from_fn(n, |_, _| r.gen_range(-2.0..2.0));
        let p = problem(z, y, s, 1.7, 0.1, 1e-3);
        let m = retained_count(p.epsilon, n);
        for oracle in [Oracle::Srle1, Oracle::Srle2, Oracle::Srle3] {
            let rep = run_oracle(oracle, &p).unwrap();
            let l1: f64 = rep.w_hat.iter().map(|v| v.abs()).sum();
            assert!(l1 <= p.l1_budget + 1e-9, "{oracle}: l1 {l1}");
            if oracle == Oracle::Srle2 {
                assert!(rep.support.len() <= s, "{oracle}: support {:?}", rep.support);
                assert_eq!(rep.trimmed_set.len(), m);
            }
        }
    }

    #[test]
    fn sigma_norm_error_cases() {
        let w = DVector::from_vec(vec![1.0, 2.0]);
        let sigma = DMatrix::<f64>::identity(2, 2);
        assert_eq!(sigma_norm_error(&w, &w, &sigma).unwrap(), 0.0);
        let v = DVector::from_vec(vec![0.0, 0.0]);
        let e = sigma_norm_error(&w, &v, &sigma).unwrap();
        assert!((e - (5.0f64).sqrt()).abs() < 1e-12);
        // Explicit triple-product oracle on a random PSD matrix.
        let mut r = crate::rng::stream(5, "psd", 0);
        let a = DMatrix::from_fn(2, 2, |_, _| r.gen_range(-1.0..1.0));
        let psd = &a * a.transpose();
        let diff = &w - &v;
        let direct: f64 = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| diff[i] * psd[(i, j)] * diff[j])
            .sum();
        let got = sigma_norm_error(&w, &v, &psd).unwrap();
        assert!((got - direct.sqrt()).abs() < 1e-12);
        // Indefinite matrix triggers the error.
        let neg = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(sigma_norm_error(&w, &v, &neg), Err(SrleError::NegativeQuadratic(_))));
    }

    #[test]
    fn ols_is_exact_on_clean_full_rank_data() {
        let z = signed_design(25, 4, 37);
        let mut w_star = DVector::zeros(4);
        w_star[1] = 0.4;
        let y = &z * &w_star;
        let p = problem(z, y, 4, 10.0, 0.0, 0.0);
        let rep = ols_baseline(&p);
        assert!((rep.weights() - &w_star).norm() < 1e-10);
    }

    #[test]
    fn default_lambda_matches_formula() {
        let lam = default_ridge_lambda(2, 400, 12, 0.05);
        let expect = (2.0 / 400.0) * (12.0f64 / (2.0 * 0.05)).ln();
        assert!((lam - expect).abs() < 1e-15);
    }
}
