use sparse_orl::actor_critic::*;
use sparse_orl::data::*;
use sparse_orl::lsvi::*;
use sparse_orl::mdp::*;
use sparse_orl::policy::Policy;
use sparse_orl::srle::*;
use std::time::Instant;

fn main() {
    let cfg = MdpConfig {
        num_states: 8, num_actions: 3, horizon: 3, ambient_dim: 12, sparsity: 2,
        feature_family: FeatureFamily::SignedBinary, coverage_mode: CoverageMode::Uniform,
    };
    let mdp = build_random_sparse_mdp(&cfg, 7).unwrap();
    let pi = Policy::uniform(&mdp);
    for n in [250usize, 1000, 4000] {
        let ds = generate_dataset(&mdp, &pi, n, 1).unwrap();
        let lam = default_ridge_lambda(2, n, 12, 0.05);
        let params = RegressionParams { sparsity: 2, l1_budget: 3.0, sigma: 3.0, lambda: lam, delta: 0.05 };
        let q = nalgebra::DMatrix::zeros(8, 3);
        let p = srle_dataset_for_policy(&mdp, &ds, 0, TargetMode::Policy(&pi), &q, &params);
        let t0 = Instant::now();
        let rep = srle1(&p, &Srle1Options::default()).unwrap();
        println!("srle1 n={n}: {:?} iters={} conv={}", t0.elapsed(), rep.iterations, rep.converged);
        let t0 = Instant::now();
        let rep2 = srle2(&p, &Srle2Options::default()).unwrap();
        println!("srle2 n={n}: {:?} iters={}", t0.elapsed(), rep2.iterations);
        let t0 = Instant::now();
        let _ = srle3(&p, &Srle3Options::default()).unwrap();
        println!("srle3 n={n}: {:?}", t0.elapsed());
        // one full AC iteration (critic_uniform, srle1)
        let spec = CriticSpec::uniform(Oracle::Srle1, lam, 0.05);
        let t0 = Instant::now();
        let _ = critic_uniform(&mdp, &ds, &pi, &spec).unwrap();
        println!("critic_uniform n={n}: {:?}", t0.elapsed());
        let alpha = CriticSpec::default_alpha(Oracle::Srle2, 3, 12, 2, n, 0.0, lam, 0.05);
        let spec2 = CriticSpec::pess_opt(Oracle::Srle2, alpha, lam, 0.05);
        let t0 = Instant::now();
        let _ = critic_pessopt(&mdp, &ds, &pi, &spec2).unwrap();
        println!("critic_pessopt n={n}: {:?}", t0.elapsed());
        let t0 = Instant::now();
        let _ = run_lsvi(&mdp, &ds, Oracle::Srle1, &BonusSpec::zero(3), lam, 0.05).unwrap();
        println!("lsvi srle1 n={n}: {:?}", t0.elapsed());
    }
}
