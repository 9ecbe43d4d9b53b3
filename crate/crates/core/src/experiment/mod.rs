//! Batch experiments behind the command-line tool: threshold optimization,
//! simulation and peak-selection comparison over an SNR sweep, written as
//! CSV files.

pub mod config;
mod csv;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::Error;
use crate::feedback_stats::{
    scheduling_probabilities, stats_for, weights_of, ThresholdAssignment,
};
use crate::simulator::{simulate, SimConfig, SimReport};
use crate::threshold_opt::{optimize, optimize_regions, optimize_two_user, select_regions, RegionStrategy};

pub use self::config::{ConfigError, ExperimentConfig, StrategyName, SweepPoint};
pub use self::csv::{fmt_num, read_thresholds_csv, CsvTable};

pub const THRESHOLDS_CSV: &str = "thresholds.csv";
pub const SIMULATION_CSV: &str = "simulation.csv";
pub const PEAKS_CSV: &str = "peaks.csv";
pub const METADATA_FILE: &str = "metadata.txt";

/// Number of random-region draws behind `loss_random_worst_percent`.
pub const DEFAULT_RANDOM_DRAWS: u64 = 20;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("solver error: {0}")]
    Solver(#[from] Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io { .. } => 1,
        }
    }
}

fn config_err(message: impl Into<String>) -> RunError {
    RunError::Config(ConfigError {
        line: None,
        message: message.into(),
    })
}

/// Optimized thresholds for one sweep point.
#[derive(Debug, Clone)]
pub struct OptimizeRow {
    pub snr_db: Option<f64>,
    pub assignment: ThresholdAssignment,
}

#[derive(Debug, Clone)]
pub struct SimulateRow {
    pub snr_db: Option<f64>,
    pub phi_analytic: f64,
    pub report: SimReport,
    pub analytic_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeaksRow {
    pub snr_db: Option<f64>,
    pub phi_bruteforce: f64,
    pub phi_random: f64,
    pub phi_heuristic: f64,
    pub phi_random_worst: f64,
}

fn loss_percent(best: f64, other: f64) -> f64 {
    100.0 * (best - other) / best
}

impl PeaksRow {
    pub fn loss_random_percent(&self) -> f64 {
        loss_percent(self.phi_bruteforce, self.phi_random)
    }
    pub fn loss_heuristic_percent(&self) -> f64 {
        loss_percent(self.phi_bruteforce, self.phi_heuristic)
    }
    pub fn loss_random_worst_percent(&self) -> f64 {
        loss_percent(self.phi_bruteforce, self.phi_random_worst)
    }
}

fn strategy(cfg: &ExperimentConfig) -> RegionStrategy {
    cfg.strategy.with_seed(cfg.seed)
}

pub fn run_optimize(cfg: &ExperimentConfig) -> Result<Vec<OptimizeRow>, RunError> {
    let points = cfg.points();
    let strat = strategy(cfg);
    points
        .par_iter()
        .map(|p| {
            Ok(OptimizeRow {
                snr_db: p.snr_db,
                assignment: optimize(&p.profiles, strat, &cfg.solver)?,
            })
        })
        .collect()
}

/// Simulates every sweep point at the given thresholds (one vector per point).
pub fn run_simulate(cfg: &ExperimentConfig, thresholds: &[Vec<f64>]) -> Result<Vec<SimulateRow>, RunError> {
    let points = cfg.points();
    if thresholds.len() != points.len() {
        return Err(config_err(format!(
            "{} threshold rows for {} sweep points",
            thresholds.len(),
            points.len()
        )));
    }
    points
        .par_iter()
        .zip(thresholds.par_iter())
        .map(|(p, th)| {
            if th.len() != p.profiles.len() {
                return Err(config_err(format!("{} thresholds for {} users", th.len(), p.profiles.len())));
            }
            let stats = stats_for(&p.profiles, th)?;
            let weights = weights_of(&p.profiles);
            let phi_analytic = crate::feedback_stats::weighted_sum_rate(&stats, &weights)?;
            let report = simulate(&SimConfig {
                n_blocks: cfg.n_blocks,
                seed: cfg.seed,
                profiles: p.profiles.clone(),
                thresholds: th.clone(),
            })?;
            Ok(SimulateRow {
                snr_db: p.snr_db,
                phi_analytic,
                report,
                analytic_fractions: scheduling_probabilities(&stats, &weights)?,
            })
        })
        .collect()
}

/// Compares brute-force, random and heuristic region selection at every
/// sweep point. Random draws use seeds `seed, seed + 1, ...`; `phi_random`
/// is the draw with `seed` itself.
pub fn run_compare_peaks(cfg: &ExperimentConfig, random_draws: u64) -> Result<Vec<PeaksRow>, RunError> {
    if cfg.m() > crate::threshold_opt::MAX_BRUTE_FORCE_USERS {
        return Err(config_err(format!(
            "compare-peaks needs brute force, which is limited to {} users (got {})",
            crate::threshold_opt::MAX_BRUTE_FORCE_USERS,
            cfg.m()
        )));
    }
    let draws = random_draws.max(1);
    cfg.points()
        .par_iter()
        .map(|p| {
            let table: HashMap<Vec<usize>, f64> = if p.profiles.len() == 1 {
                HashMap::from([(vec![0], optimize(&p.profiles, RegionStrategy::BruteForce, &cfg.solver)?.phi)])
            } else {
                let regions = select_regions(&p.profiles, RegionStrategy::BruteForce)?;
                optimize_regions(&p.profiles, regions, &cfg.solver)
                    .into_iter()
                    .filter_map(|(ord, r)| r.ok().map(|a| (ord, a.phi)))
                    .collect()
            };
            if table.is_empty() {
                return Err(Error::AllRegionsFailed("no region converged".into()).into());
            }
            let lookup = |s: RegionStrategy| -> Result<f64, RunError> {
                let ord = select_regions(&p.profiles, s)?.remove(0);
                table
                    .get(&ord)
                    .copied()
                    .ok_or_else(|| RunError::Solver(Error::AllRegionsFailed(format!("region {ord:?} failed"))))
            };
            let phi_bruteforce = table.values().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut worst = f64::INFINITY;
            for k in 0..draws {
                worst = worst.min(lookup(RegionStrategy::Random(cfg.seed.wrapping_add(k)))?);
            }
            Ok(PeaksRow {
                snr_db: p.snr_db,
                phi_bruteforce,
                phi_random: lookup(RegionStrategy::Random(cfg.seed))?,
                phi_heuristic: lookup(RegionStrategy::Heuristic)?,
                phi_random_worst: worst,
            })
        })
        .collect()
}

fn snr_cell(s: Option<f64>) -> String {
    s.map(fmt_num).unwrap_or_default()
}

fn region_label(ord: &[usize]) -> String {
    ord.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join("-")
}

pub fn thresholds_table(m: usize, rows: &[OptimizeRow]) -> CsvTable {
    let mut header = vec!["snr_db".to_string()];
    header.extend((1..=m).map(|i| format!("r_{i}")));
    header.extend(["phi_analytic", "region", "phi_fixed_point", "phi_gap"].map(String::from));
    let mut t = CsvTable::new(header);
    for r in rows {
        let a = &r.assignment;
        let raw = a.fixed_point.as_ref().map_or(a.phi, |p| p.phi);
        let mut row = vec![snr_cell(r.snr_db)];
        row.extend(a.thresholds.iter().map(|&x| fmt_num(x)));
        row.extend([fmt_num(a.phi), region_label(&a.ordering), fmt_num(raw), fmt_num(a.phi - raw)]);
        t.push(row);
    }
    t
}

pub fn simulation_table(m: usize, rows: &[SimulateRow]) -> CsvTable {
    let mut header: Vec<String> = [
        "snr_db",
        "phi_analytic",
        "phi_mc",
        "phi_mc_stderr",
        "phi_full_csi",
        "phi_full_csi_stderr",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=m).map(|i| format!("rate_{i}")));
    header.extend((1..=m).map(|i| format!("frac_{i}")));
    let mut t = CsvTable::new(header);
    for r in rows {
        let rep = &r.report;
        let mut row = vec![
            snr_cell(r.snr_db),
            fmt_num(r.phi_analytic),
            fmt_num(rep.one_bit.mean),
            fmt_num(rep.one_bit.std_error),
            fmt_num(rep.full_csi.mean),
            fmt_num(rep.full_csi.std_error),
        ];
        row.extend(rep.per_user_avg_rate.iter().map(|&x| fmt_num(x)));
        row.extend(rep.scheduling_fraction.iter().map(|&x| fmt_num(x)));
        t.push(row);
    }
    t
}

pub fn peaks_table(rows: &[PeaksRow]) -> CsvTable {
    let mut t = CsvTable::new(
        [
            "snr_db",
            "phi_bruteforce",
            "phi_random",
            "phi_heuristic",
            "loss_random_percent",
            "loss_heuristic_percent",
            "loss_random_worst_percent",
        ]
        .map(String::from)
        .to_vec(),
    );
    for r in rows {
        t.push(vec![
            snr_cell(r.snr_db),
            fmt_num(r.phi_bruteforce),
            fmt_num(r.phi_random),
            fmt_num(r.phi_heuristic),
            fmt_num(r.loss_random_percent()),
            fmt_num(r.loss_heuristic_percent()),
            fmt_num(r.loss_random_worst_percent()),
        ]);
    }
    t
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Parameters of the run, written next to the CSV files.
pub fn metadata(cfg: &ExperimentConfig, command: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {command}");
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "users = {}", cfg.m());
    let weights: Vec<String> = cfg.users.iter().map(|u| fmt_num(u.weight)).collect();
    let _ = writeln!(s, "weights = {}", weights.join(" "));
    match &cfg.sweep {
        Some(sw) => {
            let _ = writeln!(
                s,
                "snr_db_sweep = {} {} {}",
                fmt_num(sw.start),
                fmt_num(sw.stop),
                fmt_num(sw.step)
            );
        }
        None => {
            let snrs: Vec<String> = cfg.users.iter().map(|u| fmt_num(u.avg_snr_db.unwrap_or(f64::NAN))).collect();
            let _ = writeln!(s, "avg_snr_db = {}", snrs.join(" "));
        }
    }
    let _ = writeln!(s, "n_blocks = {}", cfg.n_blocks);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "strategy = {}", cfg.strategy.as_str());
    let _ = writeln!(s, "fixed_point_form = {:?}", cfg.solver.form);
    if cfg.is_default {
        let _ = writeln!(
            s,
            "note = default experiment; the SNR range and block count are this tool's choices"
        );
    }
    s
}

fn write_outputs(
    cfg: &ExperimentConfig,
    out: &Path,
    command: &str,
    tables: &[(&str, &CsvTable)],
) -> Result<Vec<PathBuf>, RunError> {
    ensure_dir(out)?;
    let mut written = Vec::new();
    for (name, table) in tables {
        let path = out.join(name);
        write_file(&path, &table.render())?;
        written.push(path);
    }
    let meta = out.join(METADATA_FILE);
    write_file(&meta, &metadata(cfg, command))?;
    written.push(meta);
    Ok(written)
}

/// Writes `thresholds.csv` and returns a human-readable summary.
pub fn cmd_optimize(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<OptimizeRow>, String), RunError> {
    let rows = run_optimize(cfg)?;
    write_outputs(cfg, out, "optimize", &[(THRESHOLDS_CSV, &thresholds_table(cfg.m(), &rows))])?;
    let mut summary = String::new();
    for r in &rows {
        let a = &r.assignment;
        let _ = writeln!(
            summary,
            "snr {:>8} dB  phi {:.6}  region {}  thresholds [{}]{}",
            snr_cell(r.snr_db),
            a.phi,
            region_label(&a.ordering),
            a.thresholds.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", "),
            if a.region_holds { "" } else { "  (ordering condition not met)" }
        );
    }
    if cfg.m() == 2 {
        for p in cfg.points() {
            let peaks = optimize_two_user(&p.profiles, &cfg.solver)?;
            let _ = writeln!(
                summary,
                "snr {:>8} dB  two-user peaks: user 1 first phi {:.9}, user 2 first phi {:.9}",
                snr_cell(p.snr_db),
                peaks.peak_a.phi,
                peaks.peak_b.phi
            );
        }
    }
    Ok((rows, summary))
}

/// Reads thresholds from `thresholds_csv`, or optimizes them, then simulates.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    thresholds_csv: Option<&Path>,
    out: &Path,
) -> Result<Vec<SimulateRow>, RunError> {
    let thresholds = match thresholds_csv {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            read_thresholds_csv(&text, cfg.m())?
        }
        None => run_optimize(cfg)?.into_iter().map(|r| r.assignment.thresholds).collect(),
    };
    let rows = run_simulate(cfg, &thresholds)?;
    write_outputs(cfg, out, "simulate", &[(SIMULATION_CSV, &simulation_table(cfg.m(), &rows))])?;
    Ok(rows)
}

pub fn cmd_compare_peaks(cfg: &ExperimentConfig, random_draws: u64, out: &Path) -> Result<Vec<PeaksRow>, RunError> {
    let rows = run_compare_peaks(cfg, random_draws)?;
    write_outputs(cfg, out, "compare-peaks", &[(PEAKS_CSV, &peaks_table(&rows))])?;
    Ok(rows)
}

/// Optimize and simulate every sweep point; writes both CSV files.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<OptimizeRow>, Vec<SimulateRow>), RunError> {
    let opt = run_optimize(cfg)?;
    let thresholds: Vec<Vec<f64>> = opt.iter().map(|r| r.assignment.thresholds.clone()).collect();
    let sim = run_simulate(cfg, &thresholds)?;
    write_outputs(
        cfg,
        out,
        "sweep",
        &[
            (THRESHOLDS_CSV, &thresholds_table(cfg.m(), &opt)),
            (SIMULATION_CSV, &simulation_table(cfg.m(), &sim)),
        ],
    )?;
    Ok((opt, sim))
}
