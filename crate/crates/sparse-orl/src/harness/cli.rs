//! Command-line interface.
//!
//! Subcommands: `gen-mdp`, `gen-data`, `corrupt`, `run-lsvi`, `run-ac`,
//! `eval`, `sweep`, `demo-lemma`. Exit codes: 0 on success, 2 on usage or
//! configuration errors, 3 on runtime failures. Stochastic commands require
//! an explicit `--seed`; every artifact they write is a deterministic
//! function of the inputs and that seed.

use std::ffi::OsString;
use std::fmt::Write as _;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::actor_critic::{run_actor_critic, CriticSpec};
use crate::data::{corrupt_dataset, generate_dataset, AttackKind, AttackSpec, Dataset, TargetSelection};
use crate::harness::sweep::{run_sweep, ExperimentConfig};
use crate::lsvi::{demo_max_expectation_gap, lsvi_diagnostics, run_lsvi_tuned, BonusSpec};
use crate::mdp::{
    build_random_sparse_mdp, exact_optimal_values, exact_policy_values, suboptimality,
    CoverageMode, FeatureFamily, MdpConfig, SparseLinearMDP,
};
use crate::policy::Policy;
use crate::srle::{default_ridge_lambda, Oracle};

enum CliError {
    Config(String),
    Runtime(String),
}

type CliResult = Result<(), CliError>;

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "sparse-orl",
    version,
    about = "Corruption-robust offline RL in sparse linear MDPs: generators, robust regression, pessimistic LSVI and actor-critic, exact-DP evaluation."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    SignedBinary,
    AnchoredSimplex,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoverageArg {
    Uniform,
    Narrow,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Srle1,
    Srle2,
    Srle3,
    Ols,
}

impl From<OracleArg> for Oracle {
    fn from(o: OracleArg) -> Oracle {
        match o {
            OracleArg::Srle1 => Oracle::Srle1,
            OracleArg::Srle2 => Oracle::Srle2,
            OracleArg::Srle3 => Oracle::Srle3,
            OracleArg::Ols => Oracle::Ols,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BonusArg {
    Zero,
    SparseMax,
    Dense,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackArg {
    RewardPoison,
    FeatureSwap,
    ValueFlip,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Random,
    HighRewardFirst,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriticArg {
    Uniform,
    PessOpt,
}

#[derive(Args)]
struct MdpDataArgs {
    /// MDP JSON file (provides the known feature map).
    #[arg(long)]
    mdp: String,
    /// Dataset JSONL file.
    #[arg(long)]
    data: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random sparse linear MDP and write it as JSON.
    GenMdp {
        #[arg(long, default_value_t = 8)]
        states: usize,
        #[arg(long, default_value_t = 3)]
        actions: usize,
        #[arg(long, default_value_t = 3)]
        horizon: usize,
        #[arg(long, default_value_t = 12)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        sparsity: usize,
        #[arg(long, value_enum, default_value_t = FamilyArg::SignedBinary)]
        family: FamilyArg,
        #[arg(long, value_enum, default_value_t = CoverageArg::Uniform)]
        coverage: CoverageArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
    /// Roll out an offline dataset under a behavior policy.
    GenData {
        #[arg(long)]
        mdp: String,
        /// `uniform`, `eps-greedy:<eps>` (around the exact optimum), or a
        /// policy JSON path.
        #[arg(long, default_value = "uniform")]
        behavior: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
    /// Apply a budgeted adversarial attack to a dataset.
    Corrupt {
        #[command(flatten)]
        io: MdpDataArgs,
        #[arg(long, value_enum)]
        attack: AttackArg,
        #[arg(long, default_value_t = 1.0)]
        magnitude: f64,
        #[arg(long, value_enum, default_value_t = TargetArg::Random)]
        target: TargetArg,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
    /// Sparse robust LSVI; writes the greedy policy as JSON.
    RunLsvi {
        #[command(flatten)]
        io: MdpDataArgs,
        #[arg(long, value_enum, default_value_t = OracleArg::Srle1)]
        oracle: OracleArg,
        #[arg(long, value_enum, default_value_t = BonusArg::Zero)]
        bonus: BonusArg,
        /// Multiplier on the default bonus radius schedule.
        #[arg(long, default_value_t = 1.0)]
        alpha_scale: f64,
        /// Ridge weight; defaults to (s/N)·log(d/(s·delta)).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Trim-rule constant for srle1/srle3 gradient trimming.
        #[arg(long, default_value_t = 1.0)]
        trim_constant: f64,
        #[arg(long)]
        out: String,
        /// Optional diagnostics CSV (columns h,x,a,bellman_err,bonus).
        #[arg(long)]
        diag: Option<String>,
    },
    /// Sparse robust actor-critic; writes the mixture policy as JSON.
    RunAc {
        #[command(flatten)]
        io: MdpDataArgs,
        #[arg(long, value_enum, default_value_t = CriticArg::Uniform)]
        critic: CriticArg,
        #[arg(long, value_enum, default_value_t = OracleArg::Srle1)]
        oracle: OracleArg,
        /// Actor iterations; defaults to the theorem schedule T = N.
        #[arg(long)]
        t: Option<usize>,
        /// Step size; defaults to the theorem schedule.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        alpha_scale: f64,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Trim-rule constant for srle1/srle3 gradient trimming.
        #[arg(long, default_value_t = 1.0)]
        trim_constant: f64,
        #[arg(long)]
        out: String,
        /// Optional trace CSV (columns t,pessimistic_value,
        /// subopt_if_true_mdp_known,constraint_max_slack).
        #[arg(long)]
        trace: Option<String>,
    },
    /// Evaluate a policy exactly and print its suboptimality gap.
    Eval {
        #[arg(long)]
        mdp: String,
        #[arg(long)]
        policy: String,
    },
    /// Run a sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: String,
        /// Override the config's output CSV path.
        #[arg(long)]
        out: Option<String>,
    },
    /// Monte-Carlo demonstration of the sparse max/expectation gap.
    DemoLemma {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        seed: u64,
    },
}

fn read_file(path: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))
}

fn write_file(path: &str, contents: &str) -> CliResult {
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{path}: {e}")))
}

fn load_mdp(path: &str) -> Result<SparseLinearMDP, CliError> {
    SparseLinearMDP::from_json(&read_file(path)?).map_err(config_err)
}

fn load_dataset(path: &str) -> Result<Dataset, CliError> {
    Dataset::from_jsonl(&read_file(path)?).map_err(config_err)
}

fn parse_behavior(mdp: &SparseLinearMDP, text: &str) -> Result<Policy, CliError> {
    if text == "uniform" {
        return Ok(Policy::uniform(mdp));
    }
    if let Some(eps) = text.strip_prefix("eps-greedy:") {
        let eps: f64 = eps
            .parse()
            .map_err(|_| CliError::Config(format!("bad eps in behavior spec {text:?}")))?;
        if !(0.0..=1.0).contains(&eps) {
            return Err(CliError::Config("eps must lie in [0, 1]".into()));
        }
        let (_, pi_star) = exact_optimal_values(mdp);
        return Ok(Policy::eps_greedy(mdp, &pi_star, eps));
    }
    let policy = Policy::from_json(&read_file(text)?).map_err(config_err)?;
    policy.validate(mdp).map_err(config_err)?;
    Ok(policy)
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.cmd {
        Cmd::GenMdp { states, actions, horizon, dim, sparsity, family, coverage, seed, out } => {
            let cfg = MdpConfig {
                num_states: states,
                num_actions: actions,
                horizon,
                ambient_dim: dim,
                sparsity,
                feature_family: match family {
                    FamilyArg::SignedBinary => FeatureFamily::SignedBinary,
                    FamilyArg::AnchoredSimplex => FeatureFamily::AnchoredSimplex,
                },
                coverage_mode: match coverage {
                    CoverageArg::Uniform => CoverageMode::Uniform,
                    CoverageArg::Narrow => CoverageMode::Narrow,
                },
            };
            let mdp = build_random_sparse_mdp(&cfg, seed).map_err(config_err)?;
            write_file(&out, &mdp.to_canonical_json())?;
            println!("wrote mdp {} (hash {})", out, mdp.content_hash());
            Ok(())
        }
        Cmd::GenData { mdp, behavior, n, seed, out } => {
            let m = load_mdp(&mdp)?;
            let pi = parse_behavior(&m, &behavior)?;
            let ds = generate_dataset(&m, &pi, n, seed).map_err(config_err)?;
            write_file(&out, &ds.to_jsonl())?;
            println!("wrote dataset {} ({} trajectories)", out, ds.len());
            Ok(())
        }
        Cmd::Corrupt { io, attack, magnitude, target, epsilon, seed, out } => {
            let m = load_mdp(&io.mdp)?;
            let ds = load_dataset(&io.data)?;
            let spec = AttackSpec {
                kind: match attack {
                    AttackArg::RewardPoison => AttackKind::RewardPoison,
                    AttackArg::FeatureSwap => AttackKind::FeatureSwap,
                    AttackArg::ValueFlip => AttackKind::ValueFlip,
                },
                magnitude,
                target_selection: match target {
                    TargetArg::Random => TargetSelection::Random,
                    TargetArg::HighRewardFirst => TargetSelection::HighRewardFirst,
                },
            };
            let out_ds = corrupt_dataset(&m, &ds, &spec, epsilon, seed).map_err(config_err)?;
            write_file(&out, &out_ds.to_jsonl())?;
            println!("wrote corrupted dataset {} ({} of {} trajectories rewritten)", out, out_ds.num_corrupted(), out_ds.len());
            Ok(())
        }
        Cmd::RunLsvi { io, oracle, bonus, alpha_scale, lambda, delta, trim_constant, out, diag } => {
            let m = load_mdp(&io.mdp)?;
            let ds = load_dataset(&io.data)?;
            let lambda = lambda
                .unwrap_or_else(|| default_ridge_lambda(m.sparsity, ds.len(), m.ambient_dim, delta));
            let mut alpha = BonusSpec::default_alpha_schedule(
                m.horizon,
                m.ambient_dim,
                m.sparsity,
                ds.len(),
                ds.epsilon,
                lambda,
                delta,
            );
            alpha.iter_mut().for_each(|a| *a *= alpha_scale);
            let spec = match bonus {
                BonusArg::Zero => BonusSpec::zero(m.horizon),
                BonusArg::SparseMax => BonusSpec::sparse_max(alpha, 2 * m.sparsity),
                BonusArg::Dense => BonusSpec::dense(alpha),
            };
            let result = run_lsvi_tuned(&m, &ds, oracle.into(), &spec, lambda, delta, trim_constant)
                .map_err(runtime_err)?;
            write_file(&out, &result.policy.to_json())?;
            println!("wrote policy {}", out);
            if let Some(path) = diag {
                let d = lsvi_diagnostics(&m, &result);
                let mut csv = String::from("h,x,a,bellman_err,bonus\n");
                for h in 0..m.horizon {
                    for x in 0..m.num_states {
                        for a in 0..m.num_actions {
                            let _ = writeln!(
                                csv,
                                "{},{},{},{},{}",
                                h + 1,
                                x,
                                a,
                                d.bellman_error[h][(x, a)],
                                result.bonus[h][(x, a)]
                            );
                        }
                    }
                }
                write_file(&path, &csv)?;
                println!("wrote diagnostics {path}");
            }
            Ok(())
        }
        Cmd::RunAc { io, critic, oracle, t, eta, alpha_scale, lambda, delta, trim_constant, out, trace } => {
            let m = load_mdp(&io.mdp)?;
            let ds = load_dataset(&io.data)?;
            let oracle: Oracle = oracle.into();
            let lambda = lambda
                .unwrap_or_else(|| default_ridge_lambda(m.sparsity, ds.len(), m.ambient_dim, delta));
            let mut spec = match critic {
                CriticArg::Uniform => CriticSpec::uniform(oracle, lambda, delta),
                CriticArg::PessOpt => {
                    let mut alpha = CriticSpec::default_alpha(
                        oracle,
                        m.horizon,
                        m.ambient_dim,
                        m.sparsity,
                        ds.len(),
                        ds.epsilon,
                        lambda,
                        delta,
                    );
                    alpha.iter_mut().for_each(|a| *a *= alpha_scale);
                    CriticSpec::pess_opt(oracle, alpha, lambda, delta)
                }
            };
            spec.trim_constant = trim_constant;
            let t_iters = t.unwrap_or_else(|| ds.len());
            let run = run_actor_critic(&m, &ds, &spec, t_iters, eta, 0).map_err(runtime_err)?;
            write_file(&out, &run.mixture.to_json())?;
            println!("wrote policy {} (mixture of {} iterates)", out, t_iters);
            if let Some(path) = trace {
                let members = match &run.mixture {
                    Policy::Mixture { members } => members.as_slice(),
                    _ => &[],
                };
                let mut csv =
                    String::from("t,pessimistic_value,subopt_if_true_mdp_known,constraint_max_slack\n");
                for (row, member) in run.trace.iter().zip(members.iter()) {
                    let sub = suboptimality(&m, member);
                    let _ = writeln!(
                        csv,
                        "{},{},{},{}",
                        row.t, row.pessimistic_value, sub, row.constraint_max_slack
                    );
                }
                write_file(&path, &csv)?;
                println!("wrote trace {path}");
            }
            Ok(())
        }
        Cmd::Eval { mdp, policy } => {
            let m = load_mdp(&mdp)?;
            let pi = Policy::from_json(&read_file(&policy)?).map_err(config_err)?;
            pi.validate(&m).map_err(config_err)?;
            let (opt, _) = exact_optimal_values(&m);
            let val = exact_policy_values(&m, &pi);
            let v_star = opt.v[0][m.initial_state];
            let v_pi = val.v[0][m.initial_state];
            println!("v_star {v_star}");
            println!("v_policy {v_pi}");
            println!("subopt {}", v_star - v_pi);
            Ok(())
        }
        Cmd::Sweep { config, out } => {
            let mut cfg = ExperimentConfig::from_json(&read_file(&config)?).map_err(config_err)?;
            if let Some(path) = out {
                cfg.output = Some(path);
            }
            let rows = run_sweep(&cfg).map_err(runtime_err)?;
            let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
            println!("sweep complete: {} rows, {} failed cells", rows.len(), failed);
            if let Some(path) = &cfg.output {
                println!("wrote {} and {}.manifest.json", path, path);
            }
            Ok(())
        }
        Cmd::DemoLemma { d, s, lambda, samples, seed } => {
            if d <= 4 * s {
                return Err(CliError::Config(format!("require d > 4s, got d={d}, s={s}")));
            }
            if lambda <= 0.0 {
                return Err(CliError::Config("lambda must be positive".into()));
            }
            let g = demo_max_expectation_gap(d, s, lambda, samples, seed);
            println!("lhs {}", g.lhs);
            println!("rhs {}", g.rhs);
            println!("bound {}", g.bound);
            println!("se {}", g.se);
            println!("gap {}", g.lhs - g.rhs);
            Ok(())
        }
    }
}

/// Parse and run a full argv (including the program name). Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            3
        }
    }
}
