//! Conditional rate statistics under one-bit feedback and the weighted-sum
//! rate objective.
//!
//! The objective is available in three forms that must agree on their common
//! domain: the general pairwise form ([`weighted_sum_rate`]), the
//! priority-ordered closed form ([`phi_ordered`]), and the same closed form
//! after relabeling users by a permutation ([`phi_region`]).

use crate::distributions::{RateDistribution, UserProfile};
use crate::error::{Error, Result};

/// Two weighted values closer than this are treated as equal; the lower user
/// index wins the tie.
pub const TIE_TOL: f64 = 1e-12;

/// Probability mass below which a conditional mean is replaced by its
/// degenerate convention.
pub const DEGENERATE_MASS: f64 = 1e-14;

/// Which side of its threshold a user's rate fell on (its feedback bit).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

/// Statistics of one user's rate split at threshold `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalStats {
    pub threshold: f64,
    /// `F(r)`
    pub cdf_at_threshold: f64,
    /// `E[R | R < r]`
    pub below_mean: f64,
    /// `E[R | R > r]`
    pub above_mean: f64,
}

impl ConditionalStats {
    pub fn mean_on(&self, side: Side) -> f64 {
        match side {
            Side::Above => self.above_mean,
            Side::Below => self.below_mean,
        }
    }

    pub fn prob_of(&self, side: Side) -> f64 {
        match side {
            Side::Above => 1.0 - self.cdf_at_threshold,
            Side::Below => self.cdf_at_threshold,
        }
    }
}

/// Optimized thresholds, indexed by original user, with the priority region
/// they were optimized in.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdAssignment {
    pub thresholds: Vec<f64>,
    /// `ordering[k]` is the user with the k-th highest priority.
    pub ordering: Vec<usize>,
    pub phi: f64,
    /// Whether the region's interleaved ordering condition holds at
    /// `thresholds`.
    pub region_holds: bool,
    /// The unpolished fixed-point solution, when a polish step ran.
    pub fixed_point: Option<RawPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawPoint {
    pub thresholds: Vec<f64>,
    pub phi: f64,
}

pub fn conditional_means(dist: &dyn RateDistribution, r: f64) -> Result<ConditionalStats> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold must be non-negative, got {r}"
        )));
    }
    let cdf = dist.cdf(r);
    let surv = dist.survival(r);
    let below_mean = if cdf < DEGENERATE_MASS {
        0.0
    } else {
        dist.partial_first_moment(0.0, r)? / cdf
    };
    let above_mean = if surv < DEGENERATE_MASS {
        r
    } else {
        dist.partial_first_moment(r, f64::INFINITY)? / surv
    };
    Ok(ConditionalStats {
        threshold: r,
        cdf_at_threshold: cdf,
        below_mean,
        above_mean,
    })
}

/// Conditional statistics for every user at its threshold.
pub fn stats_for(profiles: &[UserProfile], thresholds: &[f64]) -> Result<Vec<ConditionalStats>> {
    if profiles.len() != thresholds.len() {
        return Err(Error::InvalidArgument(format!(
            "{} profiles but {} thresholds",
            profiles.len(),
            thresholds.len()
        )));
    }
    profiles
        .iter()
        .zip(thresholds)
        .map(|(p, &r)| conditional_means(p.dist(), r))
        .collect()
}

pub fn weights_of(profiles: &[UserProfile]) -> Vec<f64> {
    profiles.iter().map(UserProfile::weight).collect()
}

/// Strict total order used by every scheduler: larger value wins, and values
/// within [`TIE_TOL`] go to the lower index.
pub fn beats(value_i: f64, index_i: usize, value_j: f64, index_j: usize) -> bool {
    if (value_i - value_j).abs() <= TIE_TOL {
        index_i < index_j
    } else {
        value_i > value_j
    }
}

/// Probability that user `i`, whose bit is `side`, outranks user `j`.
///
/// `i_wins_ties` is true when `i` has the lower index.
pub fn omega(
    stats_i: &ConditionalStats,
    stats_j: &ConditionalStats,
    side: Side,
    mu_i: f64,
    mu_j: f64,
    i_wins_ties: bool,
) -> f64 {
    let (ii, jj) = if i_wins_ties { (0, 1) } else { (1, 0) };
    let v = mu_i * stats_i.mean_on(side);
    let mut p = 0.0;
    for other in [Side::Above, Side::Below] {
        if beats(v, ii, mu_j * stats_j.mean_on(other), jj) {
            p += stats_j.prob_of(other);
        }
    }
    p
}

fn check_lengths(stats: &[ConditionalStats], weights: &[f64]) -> Result<()> {
    if stats.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} stats but {} weights",
            stats.len(),
            weights.len()
        )));
    }
    Ok(())
}

// (P(scheduled | above) , P(scheduled | below)) for user i
fn win_products(i: usize, stats: &[ConditionalStats], weights: &[f64]) -> (f64, f64) {
    let mut above = 1.0;
    let mut below = 1.0;
    for j in (0..stats.len()).filter(|&j| j != i) {
        above *= omega(&stats[i], &stats[j], Side::Above, weights[i], weights[j], i < j);
        below *= omega(&stats[i], &stats[j], Side::Below, weights[i], weights[j], i < j);
    }
    (above, below)
}

/// Long-run average rate delivered to user `i`.
pub fn expected_user_rate(i: usize, stats: &[ConditionalStats], weights: &[f64]) -> Result<f64> {
    check_lengths(stats, weights)?;
    if i >= stats.len() {
        return Err(Error::InvalidArgument(format!(
            "user index {i} out of range for {} users",
            stats.len()
        )));
    }
    let s = &stats[i];
    let (above, below) = win_products(i, stats, weights);
    Ok(s.above_mean * (1.0 - s.cdf_at_threshold) * above + s.below_mean * s.cdf_at_threshold * below)
}

/// Probability that each user is the one scheduled in a block.
pub fn scheduling_probabilities(stats: &[ConditionalStats], weights: &[f64]) -> Result<Vec<f64>> {
    check_lengths(stats, weights)?;
    Ok((0..stats.len())
        .map(|i| {
            let (above, below) = win_products(i, stats, weights);
            (1.0 - stats[i].cdf_at_threshold) * above + stats[i].cdf_at_threshold * below
        })
        .collect())
}

pub fn expected_user_rates(stats: &[ConditionalStats], weights: &[f64]) -> Result<Vec<f64>> {
    (0..stats.len())
        .map(|i| expected_user_rate(i, stats, weights))
        .collect()
}

/// `Φ = Σ μ_i R̃_i`.
pub fn weighted_sum_rate(stats: &[ConditionalStats], weights: &[f64]) -> Result<f64> {
    let rates = expected_user_rates(stats, weights)?;
    Ok(rates.iter().zip(weights).map(|(r, w)| r * w).sum())
}

/// Describes the first broken link of the interleaved chain
/// `μ_1R_1⁺ > … > μ_MR_M⁺ > μ_1R_1⁻ > … > μ_MR_M⁻`, if any.
pub fn ordering_violation(stats: &[ConditionalStats], weights: &[f64]) -> Option<String> {
    let m = stats.len();
    let chain: Vec<(f64, String)> = (0..m)
        .map(|k| (weights[k] * stats[k].above_mean, format!("mu_{0} R_{0}^+", k + 1)))
        .chain((0..m).map(|k| (weights[k] * stats[k].below_mean, format!("mu_{0} R_{0}^-", k + 1))))
        .collect();
    chain.windows(2).find_map(|w| {
        (w[0].0 <= w[1].0).then(|| format!("{} > {} fails ({} <= {})", w[0].1, w[1].1, w[0].0, w[1].0))
    })
}

// Closed form valid on the interleaved-ordering region; inputs in priority order.
fn ordered_closed_form(stats: &[ConditionalStats], weights: &[f64]) -> f64 {
    let mut phi = 0.0;
    let mut all_below = 1.0;
    for (s, &w) in stats.iter().zip(weights) {
        phi += w * s.above_mean * (1.0 - s.cdf_at_threshold) * all_below;
        all_below *= s.cdf_at_threshold;
    }
    if let (Some(s), Some(&w)) = (stats.first(), weights.first()) {
        phi += w * s.below_mean * all_below;
    }
    phi
}

/// Objective for users already sorted by priority, valid only when the
/// interleaved ordering condition holds.
pub fn phi_ordered(stats: &[ConditionalStats], weights: &[f64]) -> Result<f64> {
    check_lengths(stats, weights)?;
    if let Some(v) = ordering_violation(stats, weights) {
        return Err(Error::Precondition(v));
    }
    Ok(ordered_closed_form(stats, weights))
}

pub fn validate_permutation(ordering: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    if ordering.len() != m {
        return Err(Error::InvalidArgument(format!(
            "ordering has {} entries for {m} users",
            ordering.len()
        )));
    }
    for &k in ordering {
        if k >= m || seen[k] {
            return Err(Error::InvalidArgument(format!(
                "ordering {ordering:?} is not a permutation of 0..{m}"
            )));
        }
        seen[k] = true;
    }
    Ok(())
}

/// Region objective for the priority `ordering`: the ordered closed form
/// applied to users relabeled by the permutation. No region check is made.
pub fn phi_region(profiles: &[UserProfile], thresholds: &[f64], ordering: &[usize]) -> Result<f64> {
    validate_permutation(ordering, profiles.len())?;
    let stats = stats_for(profiles, thresholds)?;
    Ok(region_objective(&stats, &weights_of(profiles), ordering))
}

/// [`phi_region`] on precomputed stats; `ordering` must be a valid permutation.
///
/// This is the expected weighted rate of the fixed-priority rule "serve the
/// highest-priority user reporting 1, else the top user", so it never exceeds
/// [`weighted_sum_rate`] and matches it inside the region.
pub fn region_objective(stats: &[ConditionalStats], weights: &[f64], ordering: &[usize]) -> f64 {
    let (s, w) = relabel(stats, weights, ordering);
    ordered_closed_form(&s, &w)
}

/// Stats and weights rearranged into priority order.
pub fn relabel(
    stats: &[ConditionalStats],
    weights: &[f64],
    ordering: &[usize],
) -> (Vec<ConditionalStats>, Vec<f64>) {
    (
        ordering.iter().map(|&k| stats[k]).collect(),
        ordering.iter().map(|&k| weights[k]).collect(),
    )
}

/// Whether the interleaved condition holds for `ordering` at these stats.
pub fn region_holds(stats: &[ConditionalStats], weights: &[f64], ordering: &[usize]) -> bool {
    let (s, w) = relabel(stats, weights, ordering);
    ordering_violation(&s, &w).is_none()
}
