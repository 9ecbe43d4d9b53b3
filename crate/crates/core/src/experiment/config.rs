//! Experiment configuration files.
//!
//! ```toml
//! n_blocks = 1000000
//! seed = 1
//! strategy = "brute"          # brute | random | heuristic
//!
//! [sweep]                     # common SNR for every user
//! snr_db_start = 0.0
//! snr_db_stop = 20.0
//! snr_db_step = 2.0
//!
//! [solver]                    # all optional
//! fixed_point_tol = 1e-8
//! fixed_point_form = "as-printed"   # or "complement"
//!
//! [[user]]
//! weight = 1.1
//! avg_snr_db = 10.0           # only without [sweep]
//! ```

use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use crate::distributions::UserProfile;
use crate::threshold_opt::{FixedPointForm, RegionStrategy, SolverConfig};

/// Weights used when no configuration file is given.
pub const DEFAULT_WEIGHTS: [f64; 5] = [1.1, 1.05, 1.0, 0.95, 0.9];
pub const DEFAULT_N_BLOCKS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SWEEP: (f64, f64, f64) = (0.0, 20.0, 2.0);

/// A configuration problem, with the 1-based line it refers to if known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_blocks: Option<Spanned<i64>>,
    seed: Option<u64>,
    strategy: Option<Spanned<String>>,
    sweep: Option<Spanned<RawSweep>>,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    user: Vec<Spanned<RawUser>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    snr_db_start: f64,
    snr_db_stop: f64,
    snr_db_step: Spanned<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    fixed_point_tol: Option<f64>,
    max_iters: Option<usize>,
    damping: Option<f64>,
    bisection_tol: Option<f64>,
    fd_step: Option<f64>,
    fixed_point_form: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    weight: Spanned<f64>,
    avg_snr_db: Option<Spanned<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserSpec {
    pub weight: f64,
    pub avg_snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub users: Vec<UserSpec>,
    pub sweep: Option<Sweep>,
    pub n_blocks: u64,
    pub seed: u64,
    pub strategy: StrategyName,
    pub solver: SolverConfig,
    /// True when built from [`ExperimentConfig::default_experiment`].
    pub is_default: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyName {
    Brute,
    Random,
    Heuristic,
}

impl StrategyName {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "brute" => Some(Self::Brute),
            "random" => Some(Self::Random),
            "heuristic" => Some(Self::Heuristic),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Brute => "brute",
            Self::Random => "random",
            Self::Heuristic => "heuristic",
        }
    }

    pub fn with_seed(&self, seed: u64) -> RegionStrategy {
        match self {
            Self::Brute => RegionStrategy::BruteForce,
            Self::Random => RegionStrategy::Random(seed),
            Self::Heuristic => RegionStrategy::Heuristic,
        }
    }
}

/// One operating point of an experiment.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    /// Common SNR of all users, if they share one.
    pub snr_db: Option<f64>,
    pub profiles: Vec<UserProfile>,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

fn err_at(text: &str, span: Range<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line_of(text, span)),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Five users with weights 1.1 down to 0.9, common SNR from 0 to 20 dB in
    /// 2 dB steps, 10^6 blocks per point.
    pub fn default_experiment() -> Self {
        let (start, stop, step) = DEFAULT_SWEEP;
        Self {
            users: DEFAULT_WEIGHTS
                .iter()
                .map(|&weight| UserSpec {
                    weight,
                    avg_snr_db: None,
                })
                .collect(),
            sweep: Some(Sweep { start, stop, step }),
            n_blocks: DEFAULT_N_BLOCKS,
            seed: DEFAULT_SEED,
            strategy: StrategyName::Brute,
            solver: SolverConfig::default(),
            is_default: true,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(text, s)),
            message: e.message().trim().to_string(),
        })?;

        let n_blocks = match raw.n_blocks {
            None => DEFAULT_N_BLOCKS,
            Some(n) if *n.get_ref() >= 1 => *n.get_ref() as u64,
            Some(n) => return Err(err_at(text, n.span(), "n_blocks must be at least 1")),
        };
        let strategy = match raw.strategy {
            None => StrategyName::Brute,
            Some(s) => StrategyName::parse(s.get_ref()).ok_or_else(|| {
                err_at(
                    text,
                    s.span(),
                    format!("unknown strategy {:?} (expected brute, random or heuristic)", s.get_ref()),
                )
            })?,
        };

        let sweep = match raw.sweep {
            None => None,
            Some(s) => {
                let span = s.span();
                let s = s.into_inner();
                if !(*s.snr_db_step.get_ref() > 0.0) {
                    return Err(err_at(text, s.snr_db_step.span(), "snr_db_step must be positive"));
                }
                if !(s.snr_db_start.is_finite() && s.snr_db_stop.is_finite()) || s.snr_db_stop < s.snr_db_start {
                    return Err(err_at(text, span, "sweep range is empty (snr_db_stop < snr_db_start)"));
                }
                Some(Sweep {
                    start: s.snr_db_start,
                    stop: s.snr_db_stop,
                    step: *s.snr_db_step.get_ref(),
                })
            }
        };

        if raw.user.is_empty() {
            return Err(ConfigError {
                line: None,
                message: "at least one [[user]] section is required".into(),
            });
        }
        let mut users = Vec::with_capacity(raw.user.len());
        for u in &raw.user {
            let u = u.get_ref();
            let w = *u.weight.get_ref();
            if !(w.is_finite() && w > 0.0) {
                return Err(err_at(text, u.weight.span(), format!("user weight must be positive, got {w}")));
            }
            let snr = match &u.avg_snr_db {
                Some(s) if sweep.is_some() => {
                    return Err(err_at(text, s.span(), "avg_snr_db conflicts with [sweep]; use one or the other"))
                }
                Some(s) if !s.get_ref().is_finite() => {
                    return Err(err_at(text, s.span(), "avg_snr_db must be finite"))
                }
                Some(s) => Some(*s.get_ref()),
                None if sweep.is_none() => {
                    return Err(err_at(text, u.weight.span(), "user needs avg_snr_db when there is no [sweep]"))
                }
                None => None,
            };
            users.push(UserSpec {
                weight: w,
                avg_snr_db: snr,
            });
        }

        let d = SolverConfig::default();
        let s = raw.solver;
        let form = match s.fixed_point_form {
            None => d.form,
            Some(f) => match f.get_ref().as_str() {
                "as-printed" => FixedPointForm::AsPrinted,
                "complement" => FixedPointForm::Complement,
                other => {
                    return Err(err_at(
                        text,
                        f.span(),
                        format!("unknown fixed_point_form {other:?} (expected as-printed or complement)"),
                    ))
                }
            },
        };
        let solver = SolverConfig {
            fixed_point_tol: s.fixed_point_tol.unwrap_or(d.fixed_point_tol),
            max_iters: s.max_iters.unwrap_or(d.max_iters),
            damping: s.damping.unwrap_or(d.damping),
            bisection_tol: s.bisection_tol.unwrap_or(d.bisection_tol),
            fd_step: s.fd_step.unwrap_or(d.fd_step),
            form,
        };
        solver.validate().map_err(|e| ConfigError {
            line: None,
            message: format!("[solver]: {e}"),
        })?;

        Ok(Self {
            users,
            sweep,
            n_blocks,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            strategy,
            solver,
            is_default: false,
        })
    }

    pub fn m(&self) -> usize {
        self.users.len()
    }

    /// Operating points in sweep order.
    pub fn points(&self) -> Vec<SweepPoint> {
        match &self.sweep {
            Some(sw) => sw
                .points()
                .into_iter()
                .map(|snr| SweepPoint {
                    snr_db: Some(snr),
                    profiles: self
                        .users
                        .iter()
                        .map(|u| UserProfile::rayleigh(u.weight, snr).expect("validated"))
                        .collect(),
                })
                .collect(),
            None => {
                let snrs: Vec<f64> = self.users.iter().map(|u| u.avg_snr_db.expect("validated")).collect();
                let common = snrs.windows(2).all(|w| w[0] == w[1]).then(|| snrs[0]);
                vec![SweepPoint {
                    snr_db: common,
                    profiles: self
                        .users
                        .iter()
                        .zip(&snrs)
                        .map(|(u, &s)| UserProfile::rayleigh(u.weight, s).expect("validated"))
                        .collect(),
                }]
            }
        }
    }
}
