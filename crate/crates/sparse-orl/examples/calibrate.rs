//! Calibration runs for the committed acceptance baselines.
//!
//! Prints observed medians/rates for the trend experiments so thresholds
//! can be frozen into the acceptance suite. Not part of the test suite.

use nalgebra::DMatrix;
use sparse_orl::actor_critic::*;
use sparse_orl::data::*;
use sparse_orl::harness::metrics::*;
use sparse_orl::lsvi::*;
use sparse_orl::mdp::*;
use sparse_orl::policy::Policy;
use sparse_orl::rng;
use sparse_orl::srle::*;
use std::time::Instant;

fn bench_cfg(d: usize, s: usize) -> MdpConfig {
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

fn median(xs: &mut Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    let t0 = Instant::now();

    if which == "all" || which == "trend_n" {
        // Criterion 7: AC uniform critic + SRLE1, eps = 0, N grid.
        println!("== trend_n: AC uniform+srle1, d=12 s=2 H=3, T in (16,24,36), c=0.25 ==");
        let t = Instant::now();
        let cfg = bench_cfg(12, 2);
        for (n, t_iters) in [(250usize, 16usize), (1000, 24), (4000, 36)] {
            let mut subs = Vec::new();
            for seed in 0..20u64 {
                let mdp = build_random_sparse_mdp(&cfg, rng::mix(seed, "cell-mdp", 0)).unwrap();
                let pi = Policy::uniform(&mdp);
                let ds = generate_dataset(&mdp, &pi, n, rng::mix(seed, "cell-data", 0)).unwrap();
                let lam = default_ridge_lambda(2, n, 12, 0.05);
                let mut spec = CriticSpec::uniform(Oracle::Srle1, lam, 0.05);
                spec.trim_constant = 0.25;
                let run = run_actor_critic(&mdp, &ds, &spec, t_iters, None, seed).unwrap();
                subs.push(suboptimality(&mdp, &run.mixture));
            }
            println!("N={n}: median subopt {:.4} (min {:.4} max {:.4})", median(&mut subs.clone()),
                subs.iter().cloned().fold(f64::INFINITY, f64::min),
                subs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
        println!("trend_n took {:?}", t.elapsed());
    }

    if which == "all" || which == "trend_eps" {
        // Criterion 8: both AC variants + OLS-LSVI baseline across eps.
        println!("== trend_eps: N=600, reward_poison/high_reward_first, uniT=12 pessT=36, scale 0.05 ==");
        let t = Instant::now();
        let cfg = bench_cfg(12, 2);
        let attack = AttackSpec {
            kind: AttackKind::RewardPoison,
            magnitude: 1.0,
            target_selection: TargetSelection::HighRewardFirst,
        };
        let n = 600;
        let mut uni_med = Vec::new();
        let mut pess_med = Vec::new();
        let mut per_seed: Vec<Vec<(f64, f64, f64)>> = Vec::new();
        for eps in [0.0, 0.05, 0.1, 0.2] {
            let mut uni = Vec::new();
            let mut pess = Vec::new();
            let mut ols = Vec::new();
            let mut triples = Vec::new();
            for seed in 0..20u64 {
                let mdp = build_random_sparse_mdp(&cfg, rng::mix(seed, "cell-mdp", 0)).unwrap();
                let pi = Policy::uniform(&mdp);
                let clean = generate_dataset(&mdp, &pi, n, rng::mix(seed, "cell-data", 0)).unwrap();
                let ds = if eps > 0.0 {
                    corrupt_dataset(&mdp, &clean, &attack, eps, rng::mix(seed, "cell-attack", 0)).unwrap()
                } else {
                    clean
                };
                let lam = default_ridge_lambda(2, n, 12, 0.05);
                let mut spec_u = CriticSpec::uniform(Oracle::Srle1, lam, 0.05);
                spec_u.trim_constant = 0.25;
                let su = suboptimality(&mdp, &run_actor_critic(&mdp, &ds, &spec_u, 12, None, seed).unwrap().mixture);
                let mut alpha = CriticSpec::default_alpha(Oracle::Srle2, 3, 12, 2, n, eps, lam, 0.05);
                alpha.iter_mut().for_each(|a| *a *= 0.05);
                let spec_p = CriticSpec::pess_opt(Oracle::Srle2, alpha, lam, 0.05);
                let sp = suboptimality(&mdp, &run_actor_critic(&mdp, &ds, &spec_p, 36, None, seed).unwrap().mixture);
                let so = suboptimality(
                    &mdp,
                    &run_lsvi(&mdp, &ds, Oracle::Ols, &BonusSpec::zero(3), lam, 0.05).unwrap().policy,
                );
                uni.push(su);
                pess.push(sp);
                ols.push(so);
                triples.push((su, sp, so));
            }
            println!(
                "eps={eps}: uniAC med {:.4}, pessAC med {:.4}, olsLSVI med {:.4}",
                median(&mut uni.clone()),
                median(&mut pess.clone()),
                median(&mut ols.clone())
            );
            uni_med.push(median(&mut uni.clone()));
            pess_med.push(median(&mut pess.clone()));
            per_seed.push(triples);
        }
        let last = per_seed.last().unwrap();
        let wins_u = last.iter().filter(|(u, _, o)| u <= o).count();
        let wins_p = last.iter().filter(|(_, p, o)| p <= o).count();
        println!("eps=0.2: uniAC<=ols on {wins_u}/20 seeds, pessAC<=ols on {wins_p}/20 seeds");
        println!("uni medians {uni_med:?}\npess medians {pess_med:?}");
        println!("trend_eps took {:?}", t.elapsed());
    }

    if which == "all" || which == "dim_scaling" {
        // Criterion 9: N=200, s=2, d in {10, 25}.
        println!("== dim_scaling: N=200 s=2, AC pessopt vs dense-bonus LSVI ==");
        let t = Instant::now();
        for d in [10usize, 25] {
            let cfg = bench_cfg(d, 2);
            let mut pess = Vec::new();
            let mut dense = Vec::new();
            for seed in 0..20u64 {
                let mdp = build_random_sparse_mdp(&cfg, rng::mix(seed, "cell-mdp", 0)).unwrap();
                let pi = Policy::uniform(&mdp);
                let ds = generate_dataset(&mdp, &pi, 200, rng::mix(seed, "cell-data", 0)).unwrap();
                let lam = default_ridge_lambda(2, 200, d, 0.05);
                let mut alpha = CriticSpec::default_alpha(Oracle::Srle2, 3, d, 2, 200, 0.0, lam, 0.05);
                alpha.iter_mut().for_each(|a| *a *= 0.05);
                let spec = CriticSpec::pess_opt(Oracle::Srle2, alpha, lam, 0.05);
                pess.push(suboptimality(&mdp, &run_actor_critic(&mdp, &ds, &spec, 36, None, seed).unwrap().mixture));
                let alpha_d = BonusSpec::default_alpha_schedule(3, d, 2, 200, 0.0, lam, 0.05);
                let bonus = BonusSpec::dense(alpha_d);
                dense.push(suboptimality(&mdp, &run_lsvi(&mdp, &ds, Oracle::Srle1, &bonus, lam, 0.05).unwrap().policy));
            }
            println!(
                "d={d}: pessAC med {:.4}, denseLSVI med {:.4}",
                median(&mut pess.clone()),
                median(&mut dense.clone())
            );
        }
        println!("dim_scaling took {:?}", t.elapsed());
    }

    if which == "all" || which == "xi_floor" {
        println!("== xi_floor: pooled covariance min-eig, uniform coverage, 50 seeds ==");
        let cfg = bench_cfg(12, 2);
        let mut xis = Vec::new();
        for seed in 0..50u64 {
            let mdp = build_random_sparse_mdp(&cfg, seed).unwrap();
            let nu = occupancy_measures(&mdp, &Policy::uniform(&mdp));
            xis.push(compute_xi(&pooled_covariance(&mdp, &nu)));
        }
        xis.sort_by(f64::total_cmp);
        println!("xi min {:.4} p10 {:.4} median {:.4}", xis[0], xis[5], xis[25]);
    }

    if which == "all" || which == "lsvi_bench" {
        println!("== lsvi benchmark: d=12 s=2 H=3 N=2000 eps=0 srle1 zero-bonus, 10 seeds ==");
        let cfg = bench_cfg(12, 2);
        let mut subs = Vec::new();
        for seed in 0..10u64 {
            let mdp = build_random_sparse_mdp(&cfg, rng::mix(seed, "cell-mdp", 0)).unwrap();
            let pi = Policy::uniform(&mdp);
            let ds = generate_dataset(&mdp, &pi, 2000, rng::mix(seed, "cell-data", 0)).unwrap();
            let lam = default_ridge_lambda(2, 2000, 12, 0.05);
            let out = run_lsvi(&mdp, &ds, Oracle::Srle1, &BonusSpec::zero(3), lam, 0.05).unwrap();
            subs.push(suboptimality(&mdp, &out.policy));
        }
        println!("subopts {subs:?}");
    }

    if which == "all" || which == "pessimism_rate" {
        println!("== criterion 6: pessimism rate over 30 seeds, alpha_scale grid ==");
        let cfg = bench_cfg(12, 2);
        for scale in [0.15, 0.3, 1.0] {
            let mut ok = 0;
            for seed in 0..30u64 {
                let mdp = build_random_sparse_mdp(&cfg, rng::mix(seed, "cell-mdp", 0)).unwrap();
                let pi = Policy::uniform(&mdp);
                let ds = generate_dataset(&mdp, &pi, 600, rng::mix(seed, "cell-data", 0)).unwrap();
                let lam = default_ridge_lambda(2, 600, 12, 0.05);
                let mut alpha = CriticSpec::default_alpha(Oracle::Srle2, 3, 12, 2, 600, 0.0, lam, 0.05);
                alpha.iter_mut().for_each(|a| *a *= scale);
                let spec = CriticSpec::pess_opt(Oracle::Srle2, alpha, lam, 0.05);
                let out = critic_pessopt(&mdp, &ds, &pi, &spec).unwrap();
                let diag = induced_mdp_diagnostic(&mdp, &pi, &out);
                if diag.pessimism_gap <= 1e-6 {
                    ok += 1;
                }
            }
            println!("alpha_scale {scale}: pessimistic on {ok}/30 seeds");
        }
    }

    if which == "all" || which == "separation" {
        println!("== criterion 3: srle2 vs OLS sigma-norm error at eps=0.2 reward_poison ==");
        let cfg = bench_cfg(10, 2);
        let attack = AttackSpec {
            kind: AttackKind::RewardPoison,
            magnitude: 1.0,
            target_selection: TargetSelection::Random,
        };
        let mut wins = 0;
        let mut ratios = Vec::new();
        for seed in 0..30u64 {
            let mdp = build_random_sparse_mdp(&cfg, rng::mix(seed, "cell-mdp", 0)).unwrap();
            let pi = Policy::uniform(&mdp);
            let clean = generate_dataset(&mdp, &pi, 200, rng::mix(seed, "cell-data", 0)).unwrap();
            let ds = corrupt_dataset(&mdp, &clean, &attack, 0.2, rng::mix(seed, "cell-attack", 0)).unwrap();
            let h = mdp.horizon - 1;
            let params = RegressionParams { sparsity: 2, l1_budget: 1.0, sigma: 1.0, lambda: 1e-4, delta: 0.05 };
            let q = DMatrix::zeros(8, 3);
            let p = srle_dataset_for_policy(&mdp, &ds, h, TargetMode::Greedy, &q, &params);
            let rep = srle2(&p, &Srle2Options::default()).unwrap();
            let base = ols_baseline(&p);
            let nu = occupancy_measures(&mdp, &pi);
            let sigma = population_covariance(&mdp, &nu[h]);
            let w_star = &mdp.theta[h];
            let e_r = sigma_norm_error(&rep.weights(), w_star, &sigma).unwrap();
            let e_o = sigma_norm_error(&base.weights(), w_star, &sigma).unwrap();
            ratios.push(e_o / e_r.max(1e-12));
            if e_r <= e_o / 5.0 {
                wins += 1;
            }
        }
        ratios.sort_by(f64::total_cmp);
        println!("5x wins {wins}/30; ratio min {:.2} p25 {:.2} med {:.2}", ratios[0], ratios[7], ratios[15]);
    }

    if which == "all" || which == "sandwich" {
        println!("== criterion 10: covariance sandwich, N=500, C=1 ==");
        let cfg = bench_cfg(12, 2);
        let mut ok = 0;
        for seed in 0..100u64 {
            let mdp = build_random_sparse_mdp(&cfg, rng::mix(seed, "m", 0)).unwrap();
            let pi = Policy::uniform(&mdp);
            let ds = generate_dataset(&mdp, &pi, 500, rng::mix(seed, "d", 0)).unwrap();
            let h = 1;
            let lam = 1.0 * (2.0 / 500.0) * (12.0f64 / (2.0 * 0.05)).ln();
            let sig_hat = empirical_covariance(&mdp, &ds, h, lam, 0.0);
            let nu = occupancy_measures(&mdp, &pi);
            let sig = population_covariance(&mdp, &nu[h])
                + DMatrix::<f64>::identity(12, 12) * lam;
            let mut all_ok = true;
            for k in 1..=2usize {
                sparse_orl::linalg::for_each_subset(12, k, |s| {
                    let a = sparse_orl::linalg::principal_submatrix(&sig_hat, s);
                    let b = sparse_orl::linalg::principal_submatrix(&sig, s);
                    if let Some(ev) = sparse_orl::linalg::generalized_eigenvalues(&a, &b) {
                        if ev[0] < 1.0 / 3.0 - 1e-12 || ev[ev.len() - 1] > 5.0 / 3.0 + 1e-12 {
                            all_ok = false;
                        }
                    } else {
                        all_ok = false;
                    }
                });
            }
            if all_ok {
                ok += 1;
            }
        }
        println!("sandwich held on {ok}/100 seeds");
    }

    println!("total {:?}", t0.elapsed());
}
