//! Shared fixtures and independent oracles for the integration suites.
//!
//! Everything in here is deliberately implemented by the dumbest route
//! available (exhaustive enumeration, direct summation), independent of the
//! library's algorithmic paths, so it can serve as ground truth.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use sparse_orl::linalg;
use sparse_orl::mdp::{
    exact_policy_values, CoverageMode, FeatureFamily, MdpConfig, SparseLinearMDP,
};
use sparse_orl::policy::Policy;
use sparse_orl::srle::RegressionProblem;

/// The committed benchmark family: 8 states, 3 actions, horizon 3.
pub fn bench_cfg(d: usize, s: usize) -> MdpConfig {
    MdpConfig {
        num_states: 8,
        num_actions: 3,
        horizon: 3,
        ambient_dim: d,
        sparsity: s,
        feature_family: FeatureFamily::SignedBinary,
        coverage_mode: CoverageMode::Uniform,
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Exhaustive-enumeration optimal value: evaluate every deterministic
/// Markov policy (`|A|^(H·|X|)` of them) by exact DP and take the best.
pub fn exhaustive_optimal_value(mdp: &SparseLinearMDP) -> f64 {
    let cells = mdp.horizon * mdp.num_states;
    let combos = (mdp.num_actions as u64).checked_pow(cells as u32).expect("enumerable");
    assert!(combos <= 1 << 22, "policy enumeration too large: {combos}");
    let mut best = f64::NEG_INFINITY;
    for code in 0..combos {
        let mut c = code;
        let mut probs = vec![vec![vec![0.0; mdp.num_actions]; mdp.num_states]; mdp.horizon];
        for h in 0..mdp.horizon {
            for x in 0..mdp.num_states {
                let a = (c % mdp.num_actions as u64) as usize;
                c /= mdp.num_actions as u64;
                probs[h][x][a] = 1.0;
            }
        }
        let pi = Policy::Tabular { probs };
        let v = exact_policy_values(mdp, &pi).v[0][mdp.initial_state];
        if v > best {
            best = v;
        }
    }
    best
}

/// Exact joint optimum of the trimmed ℓ0–ℓ2 program by enumerating every
/// retained set `|C| = m` and every support, with closed-form ridge fits.
/// Only feasible for tiny `N`.
pub struct Srle2BruteForce {
    pub w: DVector<f64>,
    pub rows: Vec<usize>,
    pub objective: f64,
}

pub fn srle2_brute_force(p: &RegressionProblem, m: usize) -> Srle2BruteForce {
    let n = p.z.nrows();
    let d = p.z.ncols();
    let s = p.sparsity.clamp(1, d);
    let mut best: Option<Srle2BruteForce> = None;
    linalg::for_each_subset(n, m, |rows| {
        linalg::for_each_subset(d, s, |support| {
            let zc = DMatrix::from_fn(rows.len(), support.len(), |i, j| p.z[(rows[i], support[j])]);
            let yc = DVector::from_fn(rows.len(), |i, _| p.y[rows[i]]);
            let w_s = if p.lambda > 0.0 {
                let a = (zc.transpose() * &zc) / n as f64
                    + DMatrix::<f64>::identity(support.len(), support.len()) * p.lambda;
                let b = (zc.transpose() * &yc) / n as f64;
                linalg::solve_spd(&a, &b).unwrap_or_else(|| linalg::lstsq(&a, &b))
            } else {
                linalg::lstsq(&zc, &yc)
            };
            let mut w = linalg::scatter(&w_s, support, d);
            let l1: f64 = w.iter().map(|v| v.abs()).sum();
            if l1 > p.l1_budget + 1e-12 {
                w *= p.l1_budget / l1;
            }
            let residuals = &p.z * &w - &p.y;
            let fit: f64 = rows.iter().map(|&i| residuals[i] * residuals[i]).sum();
            let objective = fit / n as f64 + p.lambda * w.norm_squared();
            let better = match &best {
                None => true,
                Some(b) => objective < b.objective - 0.0,
            };
            if better {
                best = Some(Srle2BruteForce { w, rows: rows.to_vec(), objective });
            }
        });
    });
    best.expect("nonempty enumeration")
}

/// One PASS/FAIL line per acceptance criterion; panics on failure so the
/// test harness records it.
pub fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {criterion}: {verdict} — {detail}");
    assert!(pass, "criterion {criterion} failed: {detail}");
}
