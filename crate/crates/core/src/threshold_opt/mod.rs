//! Threshold optimization for one-bit feedback scheduling.
//!
//! Each priority ordering of the users (a "region") hosts one local peak of
//! the objective. Peaks are located by solving the stationarity conditions as
//! a fixed point, and checked against a derivative-free search.

mod region;
mod search;
mod two_user;

pub use region::{fixed_point_in_region, optimize_m_user_region, FixedPointForm};
pub use search::{
    direct_maximize, infer_region, objective_gradient, pattern_search, stationarity_residual,
    Objective, SearchTrace, StationarityReport, MIN_STEP,
};
pub use two_user::{
    optimize_two_user, solve_two_user_peak, verify_two_user_constraints, TwoUserConstraintReport,
    TwoUserPeaks,
};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributions::{RateDistribution, UserProfile};
use crate::error::{Error, Result};
use crate::feedback_stats::{stats_for, weighted_sum_rate, weights_of, ThresholdAssignment};

/// Searches are capped at the rate where `F(r) > 1 - 1e-10`.
pub const R_MAX_TAIL: f64 = 1e-10;

/// Largest user count for which all `M!` regions may be enumerated.
pub const MAX_BRUTE_FORCE_USERS: usize = 8;

pub(crate) fn r_max(dist: &dyn RateDistribution) -> f64 {
    dist.tail_cutoff(R_MAX_TAIL)
}

/// Numerical parameters of the threshold solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub fixed_point_tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub bisection_tol: f64,
    pub fd_step: f64,
    pub form: FixedPointForm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            fixed_point_tol: 1e-8,
            max_iters: 1000,
            damping: 0.5,
            bisection_tol: 1e-9,
            fd_step: 1e-5,
            form: FixedPointForm::AsPrinted,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fixed_point_tol", self.fixed_point_tol),
            ("bisection_tol", self.bisection_tol),
            ("fd_step", self.fd_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// How the priority region to optimize in is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionStrategy {
    /// Every one of the `M!` orderings.
    BruteForce,
    /// One ordering drawn uniformly at random.
    Random(u64),
    /// Users ranked by `μ_i E[R_i]`, which does not depend on thresholds.
    Heuristic,
}

/// All permutations of `0..m` in lexicographic order.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..m).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..m).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..m).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot has a successor");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

pub fn select_regions(profiles: &[UserProfile], strategy: RegionStrategy) -> Result<Vec<Vec<usize>>> {
    let m = profiles.len();
    if m == 0 {
        return Err(Error::InvalidArgument("at least one user is required".into()));
    }
    match strategy {
        RegionStrategy::BruteForce => {
            if m > MAX_BRUTE_FORCE_USERS {
                return Err(Error::InvalidArgument(format!(
                    "brute-force search over {m}! regions refused (limit is {MAX_BRUTE_FORCE_USERS} users)"
                )));
            }
            Ok(permutations(m))
        }
        RegionStrategy::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ord: Vec<usize> = (0..m).collect();
            ord.shuffle(&mut rng);
            Ok(vec![ord])
        }
        RegionStrategy::Heuristic => {
            let score: Vec<f64> = profiles.iter().map(|p| p.weight() * p.dist().mean()).collect();
            let mut ord: Vec<usize> = (0..m).collect();
            ord.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
            Ok(vec![ord])
        }
    }
}

/// Optimizes every region chosen by `strategy` and keeps the best.
///
/// Regions run in parallel; ties in `Φ` go to the lexicographically first
/// ordering. A failing region is skipped with a warning as long as another
/// one succeeds.
pub fn optimize(
    profiles: &[UserProfile],
    strategy: RegionStrategy,
    cfg: &SolverConfig,
) -> Result<ThresholdAssignment> {
    cfg.validate()?;
    if profiles.len() == 1 {
        return single_user(profiles);
    }
    let regions = select_regions(profiles, strategy)?;
    let results = optimize_regions(profiles, regions, cfg);

    let mut best: Option<ThresholdAssignment> = None;
    let mut failures = Vec::new();
    for (ord, res) in results {
        match res {
            Ok(a) => {
                if best.as_ref().map_or(true, |b| a.phi > b.phi) {
                    best = Some(a);
                }
            }
            Err(e) => {
                warn!("region {ord:?} failed: {e}");
                failures.push(format!("{ord:?}: {e}"));
            }
        }
    }
    best.ok_or_else(|| Error::AllRegionsFailed(failures.join("; ")))
}

/// Optimizes each given region in parallel. Results come back sorted by
/// ordering, paired with the ordering itself.
pub fn optimize_regions(
    profiles: &[UserProfile],
    mut regions: Vec<Vec<usize>>,
    cfg: &SolverConfig,
) -> Vec<(Vec<usize>, Result<ThresholdAssignment>)> {
    regions.sort();
    regions.dedup();
    regions
        .into_par_iter()
        .map(|ord| {
            let res = optimize_m_user_region(profiles, &ord, cfg);
            (ord, res)
        })
        .collect()
}

pub(crate) fn single_user(profiles: &[UserProfile]) -> Result<ThresholdAssignment> {
    let thresholds = vec![profiles[0].dist().quantile(0.5)];
    let stats = stats_for(profiles, &thresholds)?;
    let phi = weighted_sum_rate(&stats, &weights_of(profiles))?;
    Ok(ThresholdAssignment {
        thresholds,
        ordering: vec![0],
        phi,
        region_holds: true,
        fixed_point: None,
    })
}
