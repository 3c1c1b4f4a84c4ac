//! Seeded experiment sweeps with CSV persistence.
//!
//! A sweep is the Cartesian product of the config grids (`d × s × N × ε`)
//! with the seed list, enumerated in that nested order. Each cell builds
//! its MDP, generates and corrupts data, runs the configured learner, and
//! scores the output policy against exact dynamic programming. Cells run on
//! a rayon pool (`SPARSE_ORL_THREADS` caps its size) and own their derived
//! RNG streams; rows are flushed through a single ordered appender so the
//! output order equals the enumeration order no matter how cells finish.
//!
//! Pairing: the derived streams depend only on the cell's seed (not on the
//! grid values), so cells sharing a seed share the MDP draw and the clean
//! trajectory prefix. Trend comparisons across `N` or `ε` at a fixed seed
//! are therefore paired.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actor_critic::{run_actor_critic, CriticSpec};
use crate::data::{corrupt_dataset, generate_dataset, AttackSpec};
use crate::harness::metrics::{compute_kappa, compute_xi, pooled_covariance};
use crate::lsvi::{run_lsvi_tuned, BonusSpec};
use crate::mdp::{
    build_random_sparse_mdp, exact_optimal_values, occupancy_measures, suboptimality, MdpConfig,
};
use crate::policy::Policy;
use crate::rng;
use crate::srle::{default_ridge_lambda, Oracle};

pub const CONFIG_SCHEMA: &str = "sparse-orl/1";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("bad sweep config: {0}")]
    BadConfig(String),
    #[error("sweep io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Lsvi,
    ActorCritic,
}

impl std::fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlgorithmKind::Lsvi => f.write_str("lsvi"),
            AlgorithmKind::ActorCritic => f.write_str("actor_critic"),
        }
    }
}

/// Behavior policy selection. `eps_greedy_optimal` blends the exact optimal
/// policy with uniform exploration; it is the narrow-coverage companion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BehaviorSpec {
    Uniform,
    EpsGreedyOptimal { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BonusConfig {
    Zero,
    /// `alpha_scale` multiplies the default radius schedule.
    SparseMax { alpha_scale: f64 },
    Dense { alpha_scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriticConfig {
    UniformCoverage,
    PessOpt { alpha_scale: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub d: Vec<usize>,
    pub s: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: String,
    pub mdp: MdpConfig,
    pub behavior: BehaviorSpec,
    pub algorithm: AlgorithmKind,
    pub oracle: Oracle,
    #[serde(default)]
    pub bonus: Option<BonusConfig>,
    #[serde(default)]
    pub critic: Option<CriticConfig>,
    pub grid: GridSpec,
    pub seeds: Vec<u64>,
    pub attack: AttackSpec,
    /// Actor iterations; `None` uses the theorem default `T = N`.
    #[serde(default)]
    pub t_iters: Option<usize>,
    #[serde(default)]
    pub eta: Option<f64>,
    /// Ridge weight; `None` uses `λ = (s/N)·log(d/(sδ))` per cell.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Trim-rule constant for the gradient-trimming oracles (default 1).
    #[serde(default)]
    pub trim_constant: Option<f64>,
    pub delta: f64,
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.schema != CONFIG_SCHEMA {
            return Err(SweepError::BadConfig(format!(
                "schema must be {CONFIG_SCHEMA:?}, got {:?}",
                self.schema
            )));
        }
        if self.grid.n.is_empty()
            || self.grid.epsilon.is_empty()
            || self.grid.d.is_empty()
            || self.grid.s.is_empty()
        {
            return Err(SweepError::BadConfig("all grids must be nonempty".into()));
        }
        if self.seeds.is_empty() {
            return Err(SweepError::BadConfig("need at least one seed".into()));
        }
        if self.grid.epsilon.iter().any(|&e| !(0.0..0.5).contains(&e)) {
            return Err(SweepError::BadConfig("epsilon grid outside [0, 1/2)".into()));
        }
        for (&d, &s) in self.grid.d.iter().flat_map(|d| self.grid.s.iter().map(move |s| (d, s))) {
            if s == 0 || s > d {
                return Err(SweepError::BadConfig(format!("invalid (d={d}, s={s}) pair")));
            }
        }
        match self.algorithm {
            AlgorithmKind::Lsvi if self.bonus.is_none() => {
                Err(SweepError::BadConfig("lsvi requires a bonus config".into()))
            }
            AlgorithmKind::ActorCritic if self.critic.is_none() => {
                Err(SweepError::BadConfig("actor_critic requires a critic config".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SweepError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| SweepError::BadConfig(format!("json: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }
}

/// One sweep cell result. `error` is empty on success; metric columns are
/// NaN when the cell failed.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub oracle: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub epsilon: f64,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub seed: u64,
    pub subopt: f64,
    pub kappa: f64,
    pub xi: f64,
    pub wall_ms: f64,
    pub error: String,
}

pub const CSV_HEADER: [&str; 13] = [
    "algorithm", "oracle", "N", "d", "s", "epsilon", "H", "seed", "subopt", "kappa", "xi",
    "wall_ms", "error",
];

#[derive(Debug, Clone, Copy)]
struct Cell {
    index: usize,
    d: usize,
    s: usize,
    n: usize,
    epsilon: f64,
    seed: u64,
}

fn enumerate_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    let mut index = 0;
    for &d in &cfg.grid.d {
        for &s in &cfg.grid.s {
            for &n in &cfg.grid.n {
                for &epsilon in &cfg.grid.epsilon {
                    for &seed in &cfg.seeds {
                        cells.push(Cell { index, d, s, n, epsilon, seed });
                        index += 1;
                    }
                }
            }
        }
    }
    cells
}

/// Resolve the behavior policy for an MDP.
pub fn resolve_behavior(mdp: &crate::mdp::SparseLinearMDP, spec: BehaviorSpec) -> Policy {
    match spec {
        BehaviorSpec::Uniform => Policy::uniform(mdp),
        BehaviorSpec::EpsGreedyOptimal { eps } => {
            let (_, pi_star) = exact_optimal_values(mdp);
            Policy::eps_greedy(mdp, &pi_star, eps)
        }
    }
}

fn run_cell(cfg: &ExperimentConfig, cell: Cell) -> ResultRow {
    let start = Instant::now();
    let mut row = ResultRow {
        algorithm: cfg.algorithm.to_string(),
        oracle: cfg.oracle.to_string(),
        n: cell.n,
        d: cell.d,
        s: cell.s,
        epsilon: cell.epsilon,
        horizon: cfg.mdp.horizon,
        seed: cell.seed,
        subopt: f64::NAN,
        kappa: f64::NAN,
        xi: f64::NAN,
        wall_ms: f64::NAN,
        error: String::new(),
    };
    let outcome = (|| -> Result<(), String> {
        let mdp_cfg = MdpConfig { ambient_dim: cell.d, sparsity: cell.s, ..cfg.mdp.clone() };
        let mdp = build_random_sparse_mdp(&mdp_cfg, rng::mix(cell.seed, "cell-mdp", 0))
            .map_err(|e| e.to_string())?;
        let behavior = resolve_behavior(&mdp, cfg.behavior);
        let clean = generate_dataset(&mdp, &behavior, cell.n, rng::mix(cell.seed, "cell-data", 0))
            .map_err(|e| e.to_string())?;
        let ds = if cell.epsilon > 0.0 {
            corrupt_dataset(&mdp, &clean, &cfg.attack, cell.epsilon, rng::mix(cell.seed, "cell-attack", 0))
                .map_err(|e| e.to_string())?
        } else {
            clean
        };
        let lambda = cfg
            .lambda
            .unwrap_or_else(|| default_ridge_lambda(cell.s, cell.n, cell.d, cfg.delta));
        let policy = match cfg.algorithm {
            AlgorithmKind::Lsvi => {
                let bonus = match cfg.bonus.expect("validated") {
                    BonusConfig::Zero => BonusSpec::zero(mdp.horizon),
                    BonusConfig::SparseMax { alpha_scale } => {
                        let mut alpha = BonusSpec::default_alpha_schedule(
                            mdp.horizon,
                            cell.d,
                            cell.s,
                            cell.n,
                            cell.epsilon,
                            lambda,
                            cfg.delta,
                        );
                        alpha.iter_mut().for_each(|a| *a *= alpha_scale);
                        BonusSpec::sparse_max(alpha, 2 * cell.s)
                    }
                    BonusConfig::Dense { alpha_scale } => {
                        let mut alpha = BonusSpec::default_alpha_schedule(
                            mdp.horizon,
                            cell.d,
                            cell.s,
                            cell.n,
                            cell.epsilon,
                            lambda,
                            cfg.delta,
                        );
                        alpha.iter_mut().for_each(|a| *a *= alpha_scale);
                        BonusSpec::dense(alpha)
                    }
                };
                run_lsvi_tuned(
                    &mdp,
                    &ds,
                    cfg.oracle,
                    &bonus,
                    lambda,
                    cfg.delta,
                    cfg.trim_constant.unwrap_or(1.0),
                )
                .map_err(|e| e.to_string())?
                .policy
            }
            AlgorithmKind::ActorCritic => {
                let mut spec = match cfg.critic.expect("validated") {
                    CriticConfig::UniformCoverage => {
                        CriticSpec::uniform(cfg.oracle, lambda, cfg.delta)
                    }
                    CriticConfig::PessOpt { alpha_scale } => {
                        let mut alpha = CriticSpec::default_alpha(
                            cfg.oracle,
                            mdp.horizon,
                            cell.d,
                            cell.s,
                            cell.n,
                            cell.epsilon,
                            lambda,
                            cfg.delta,
                        );
                        alpha.iter_mut().for_each(|a| *a *= alpha_scale);
                        CriticSpec::pess_opt(cfg.oracle, alpha, lambda, cfg.delta)
                    }
                };
                spec.trim_constant = cfg.trim_constant.unwrap_or(1.0);
                let t_iters = cfg.t_iters.unwrap_or(cell.n);
                run_actor_critic(&mdp, &ds, &spec, t_iters, cfg.eta, cell.seed)
                    .map_err(|e| e.to_string())?
                    .mixture
            }
        };
        row.subopt = suboptimality(&mdp, &policy);
        let nu = occupancy_measures(&mdp, &behavior);
        row.xi = compute_xi(&pooled_covariance(&mdp, &nu));
        row.kappa = match compute_kappa(&mdp, &nu, 2 * cell.s) {
            Ok(rep) => rep.max(),
            Err(_) => f64::NAN,
        };
        Ok(())
    })();
    if let Err(msg) = outcome {
        row.error = msg;
    }
    row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    row
}

struct OrderedAppender<W: Write> {
    next: usize,
    pending: std::collections::BTreeMap<usize, ResultRow>,
    writer: csv::Writer<W>,
}

impl<W: Write> OrderedAppender<W> {
    fn push(&mut self, index: usize, row: ResultRow) -> Result<(), csv::Error> {
        self.pending.insert(index, row);
        while let Some(row) = self.pending.remove(&self.next) {
            write_row(&mut self.writer, &row)?;
            self.next += 1;
        }
        self.writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, row: &ResultRow) -> Result<(), csv::Error> {
    w.write_record([
        row.algorithm.as_str(),
        row.oracle.as_str(),
        &row.n.to_string(),
        &row.d.to_string(),
        &row.s.to_string(),
        &format_float(row.epsilon),
        &row.horizon.to_string(),
        &row.seed.to_string(),
        &format_float(row.subopt),
        &format_float(row.kappa),
        &format_float(row.xi),
        &format_float(row.wall_ms),
        row.error.as_str(),
    ])
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

/// Serialize rows to CSV with the canonical column set.
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("header");
    for row in rows {
        write_row(&mut w, row).expect("row");
    }
    String::from_utf8(w.into_inner().expect("csv buffer")).expect("utf8 csv")
}

/// Run every cell of a sweep, streaming ordered rows into `sink`.
///
/// Cells execute on a rayon pool sized by `SPARSE_ORL_THREADS` when set.
/// Per-cell failures land in the row's `error` column without aborting the
/// sweep. The returned rows are in enumeration order.
pub fn run_sweep_to<W: Write + Send>(
    cfg: &ExperimentConfig,
    sink: W,
) -> Result<Vec<ResultRow>, SweepError> {
    cfg.validate()?;
    let cells = enumerate_cells(cfg);
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(CSV_HEADER)?;
    let appender = Mutex::new(OrderedAppender {
        next: 0,
        pending: std::collections::BTreeMap::new(),
        writer,
    });
    let pool = build_pool()?;
    let mut indexed: Vec<(usize, ResultRow)> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|cell| {
                let row = run_cell(cfg, *cell);
                let mut guard = appender.lock().expect("appender lock");
                guard.push(cell.index, row.clone()).expect("csv append");
                (cell.index, row)
            })
            .collect()
    });
    indexed.sort_by_key(|(i, _)| *i);
    Ok(indexed.into_iter().map(|(_, r)| r).collect())
}

/// Run a sweep; when `cfg.output` is set, write `<output>` (CSV) and
/// `<output>.manifest.json` (the resolved config).
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, SweepError> {
    match &cfg.output {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            let rows = run_sweep_to(cfg, file)?;
            std::fs::write(format!("{path}.manifest.json"), cfg.to_json())?;
            Ok(rows)
        }
        None => run_sweep_to(cfg, std::io::sink()),
    }
}

fn build_pool() -> Result<rayon::ThreadPool, SweepError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SPARSE_ORL_THREADS") {
        let threads: usize = v
            .parse()
            .map_err(|_| SweepError::BadConfig(format!("SPARSE_ORL_THREADS={v} is not a count")))?;
        builder = builder.num_threads(threads.max(1));
    }
    builder.build().map_err(|e| SweepError::BadConfig(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AttackKind, TargetSelection};
    use crate::mdp::{CoverageMode, FeatureFamily};

    pub(crate) fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            schema: CONFIG_SCHEMA.to_string(),
            mdp: MdpConfig {
                num_states: 4,
                num_actions: 2,
                horizon: 2,
                ambient_dim: 6,
                sparsity: 2,
                feature_family: FeatureFamily::AnchoredSimplex,
                coverage_mode: CoverageMode::Uniform,
            },
            behavior: BehaviorSpec::Uniform,
            algorithm: AlgorithmKind::Lsvi,
            oracle: Oracle::Srle1,
            bonus: Some(BonusConfig::Zero),
            critic: None,
            grid: GridSpec { n: vec![40], epsilon: vec![0.0], d: vec![6], s: vec![2] },
            seeds: vec![1],
            attack: AttackSpec {
                kind: AttackKind::RewardPoison,
                magnitude: 1.0,
                target_selection: TargetSelection::Random,
            },
            t_iters: Some(2),
            eta: None,
            lambda: None,
            trim_constant: None,
            delta: 0.05,
            output: None,
        }
    }

    #[test]
    fn single_cell_sweep_emits_single_row() {
        let cfg = tiny_config();
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert!(row.error.is_empty(), "error: {}", row.error);
        assert!(row.subopt >= -1e-8);
        assert_eq!(row.algorithm, "lsvi");
        assert_eq!(row.n, 40);
    }

    #[test]
    fn sweep_is_deterministic_modulo_wall_clock() {
        let mut cfg = tiny_config();
        cfg.grid.epsilon = vec![0.0, 0.1];
        cfg.seeds = vec![1, 2];
        let strip = |rows: &[ResultRow]| -> Vec<String> {
            rows.iter()
                .map(|r| {
                    format!(
                        "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
                        r.algorithm, r.oracle, r.n, r.d, r.s, r.epsilon, r.horizon, r.seed,
                        r.subopt, r.kappa, r.xi, r.error
                    )
                })
                .collect()
        };
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn errors_are_recorded_not_fatal() {
        let mut cfg = tiny_config();
        // C(60, 2s) support search blows the kappa cap but the cell itself
        // still runs; force an algorithm error instead with a bad oracle
        // condition: a search-space explosion inside srle2.
        cfg.oracle = Oracle::Srle2;
        cfg.grid.d = vec![60];
        cfg.grid.s = vec![12];
        cfg.mdp.num_states = 3;
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(!rows[0].error.is_empty());
        assert!(rows[0].subopt.is_nan());
    }

    #[test]
    fn csv_columns_match_contract() {
        let cfg = tiny_config();
        let mut buf = Vec::new();
        run_sweep_to(&cfg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "algorithm,oracle,N,d,s,epsilon,H,seed,subopt,kappa,xi,wall_ms,error");
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn config_json_roundtrip_and_schema_check() {
        let cfg = tiny_config();
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.grid.n, cfg.grid.n);
        let bad = text.replace("sparse-orl/1", "sparse-orl/99");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }
}
