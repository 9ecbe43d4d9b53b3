//! Derivative-free coordinate pattern search on the objective, plus
//! finite-difference stationarity checks.

use crate::distributions::UserProfile;
use crate::error::Result;
use crate::feedback_stats::{
    conditional_means, region_holds, region_objective, stats_for, validate_permutation,
    weighted_sum_rate, weights_of, ConditionalStats, ThresholdAssignment,
};

use super::{r_max, SolverConfig};

/// Stop once the step falls below this.
pub const MIN_STEP: f64 = 1e-6;
const SHRINK: f64 = 0.5;
const INITIAL_STEP_FRACTION: f64 = 0.25;

/// Outcome of a pattern search, with the objective after every accepted move.
#[derive(Debug, Clone)]
pub struct SearchTrace {
    pub point: Vec<f64>,
    pub value: f64,
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// What a pattern search maximizes.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// The weighted sum rate under the conditional-mean scheduler.
    WeightedSumRate,
    /// The closed form of one priority region.
    Region(&'a [usize]),
}

impl Objective<'_> {
    fn eval(&self, stats: &[ConditionalStats], weights: &[f64]) -> Result<f64> {
        match self {
            Objective::WeightedSumRate => weighted_sum_rate(stats, weights),
            Objective::Region(ord) => Ok(region_objective(stats, weights, ord)),
        }
    }
}

/// Coordinate pattern search on `objective` from `init`.
///
/// Coordinate moves start at `0.25 r_max` and are halved whenever no
/// coordinate improves, until the step drops below [`MIN_STEP`]. Only
/// improving moves are accepted.
pub fn pattern_search(
    profiles: &[UserProfile],
    init: &[f64],
    objective: Objective<'_>,
) -> Result<SearchTrace> {
    if let Objective::Region(ord) = objective {
        validate_permutation(ord, profiles.len())?;
    }
    let weights = weights_of(profiles);
    let caps: Vec<f64> = profiles.iter().map(|p| r_max(p.dist())).collect();
    let mut x: Vec<f64> = init
        .iter()
        .zip(&caps)
        .map(|(&r, &c)| r.max(0.0).min(c))
        .collect();
    let mut stats = stats_for(profiles, &x)?;
    let mut fx = objective.eval(&stats, &weights)?;
    let mut history = vec![fx];
    let mut evaluations = 1;
    let mut step = INITIAL_STEP_FRACTION * caps.iter().cloned().fold(0.0, f64::max);

    while step >= MIN_STEP {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let cand = (x[i] + dir * step).max(0.0).min(caps[i]);
                if cand == x[i] {
                    continue;
                }
                let old = stats[i];
                stats[i] = conditional_means(profiles[i].dist(), cand)?;
                evaluations += 1;
                let f = objective.eval(&stats, &weights)?;
                if f > fx {
                    x[i] = cand;
                    fx = f;
                    history.push(f);
                    improved = true;
                    break;
                }
                stats[i] = old;
            }
        }
        if !improved {
            step *= SHRINK;
        }
    }
    Ok(SearchTrace {
        point: x,
        value: fx,
        history,
        evaluations,
    })
}

/// Priority ordering whose interleaved condition holds at `stats`, if any.
/// Users are ranked by `μ R⁺`, which is the only candidate.
pub fn infer_region(stats: &[ConditionalStats], weights: &[f64]) -> (Vec<usize>, bool) {
    let mut ord: Vec<usize> = (0..stats.len()).collect();
    ord.sort_by(|&a, &b| {
        (weights[b] * stats[b].above_mean)
            .total_cmp(&(weights[a] * stats[a].above_mean))
            .then(a.cmp(&b))
    });
    let holds = region_holds(stats, weights, &ord);
    (ord, holds)
}

/// Derivative-free maximization of `Φ` starting from `init`; the result is
/// never worse than `init`.
pub fn direct_maximize(
    profiles: &[UserProfile],
    init: &[f64],
    _cfg: &SolverConfig,
) -> Result<ThresholdAssignment> {
    let trace = pattern_search(profiles, init, Objective::WeightedSumRate)?;
    let stats = stats_for(profiles, &trace.point)?;
    let (ordering, holds) = infer_region(&stats, &weights_of(profiles));
    Ok(ThresholdAssignment {
        thresholds: trace.point,
        ordering,
        phi: trace.value,
        region_holds: holds,
        fixed_point: None,
    })
}

/// Finite-difference gradient of `Φ`, and for two users the analytic
/// gradient of the active region's closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub finite_difference: Vec<f64>,
    pub analytic: Option<Vec<f64>>,
}

impl StationarityReport {
    pub fn max_abs(&self) -> f64 {
        self.finite_difference.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
    }

    /// Largest gap between the analytic and numerical gradients.
    pub fn analytic_gap(&self) -> Option<f64> {
        self.analytic.as_ref().map(|a| {
            a.iter()
                .zip(&self.finite_difference)
                .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        })
    }
}

/// Central finite differences of `Φ` with step `fd_step` (one-sided at 0).
pub fn stationarity_residual(
    profiles: &[UserProfile],
    thresholds: &[f64],
    cfg: &SolverConfig,
) -> Result<StationarityReport> {
    objective_gradient(profiles, thresholds, Objective::WeightedSumRate, cfg)
}

/// Finite-difference gradient of any [`Objective`]. For two users under the
/// weighted sum rate, the analytic gradient is filled in as well.
pub fn objective_gradient(
    profiles: &[UserProfile],
    thresholds: &[f64],
    objective: Objective<'_>,
    cfg: &SolverConfig,
) -> Result<StationarityReport> {
    if let Objective::Region(ord) = objective {
        validate_permutation(ord, profiles.len())?;
    }
    let weights = weights_of(profiles);
    let base = stats_for(profiles, thresholds)?;
    let h = cfg.fd_step;
    let mut grad = Vec::with_capacity(thresholds.len());
    for i in 0..thresholds.len() {
        let lo = (thresholds[i] - h).max(0.0);
        let hi = thresholds[i] + h;
        let mut s = base.clone();
        s[i] = conditional_means(profiles[i].dist(), hi)?;
        let f_hi = objective.eval(&s, &weights)?;
        s[i] = conditional_means(profiles[i].dist(), lo)?;
        let f_lo = objective.eval(&s, &weights)?;
        grad.push((f_hi - f_lo) / (hi - lo));
    }
    let analytic = if profiles.len() == 2 && matches!(objective, Objective::WeightedSumRate) {
        two_user_gradient(profiles, thresholds, &base, &weights)?
    } else {
        None
    };
    Ok(StationarityReport {
        finite_difference: grad,
        analytic,
    })
}

// Gradient of the closed form of whichever two-user region holds.
fn two_user_gradient(
    profiles: &[UserProfile],
    thresholds: &[f64],
    stats: &[ConditionalStats],
    weights: &[f64],
) -> Result<Option<Vec<f64>>> {
    let (hi, lo) = if region_holds(stats, weights, &[0, 1]) {
        (0, 1)
    } else if region_holds(stats, weights, &[1, 0]) {
        (1, 0)
    } else {
        return Ok(None);
    };
    let (d_hi, d_lo) = (profiles[hi].dist(), profiles[lo].dist());
    let (r_hi, r_lo) = (thresholds[hi], thresholds[lo]);
    let k2 = weights[lo] * d_lo.partial_first_moment(r_lo, f64::INFINITY)?;
    let k1 = weights[hi] * d_lo.survival(r_lo);
    let g_hi = (k2 - k1 * r_hi) * d_hi.pdf(r_hi);
    let g_lo = d_lo.pdf(r_lo)
        * (weights[hi] * d_hi.partial_first_moment(0.0, r_hi)? - weights[lo] * r_lo * d_hi.cdf(r_hi));
    let mut g = vec![0.0; 2];
    g[hi] = g_hi;
    g[lo] = g_lo;
    Ok(Some(g))
}
