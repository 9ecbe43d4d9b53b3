use crate::distributions::UserProfile;
use crate::error::{Error, Result};
use crate::feedback_stats::{
    conditional_means, region_holds, stats_for, weighted_sum_rate, weights_of, ThresholdAssignment,
};

use super::search::{stationarity_residual, StationarityReport};
use super::{r_max, SolverConfig};

/// The two local peaks of a two-user system and the better of them.
#[derive(Debug, Clone)]
pub struct TwoUserPeaks {
    /// User 0 has priority.
    pub peak_a: ThresholdAssignment,
    /// User 1 has priority.
    pub peak_b: ThresholdAssignment,
    pub best: ThresholdAssignment,
    pub stationarity_a: StationarityReport,
    pub stationarity_b: StationarityReport,
}

pub fn optimize_two_user(profiles: &[UserProfile], cfg: &SolverConfig) -> Result<TwoUserPeaks> {
    if profiles.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "two-user optimization needs exactly 2 users, got {}",
            profiles.len()
        )));
    }
    cfg.validate()?;
    let (peak_a, stationarity_a) = solve_two_user_peak(profiles, 0, cfg)?;
    let (peak_b, stationarity_b) = solve_two_user_peak(profiles, 1, cfg)?;
    let best = if peak_b.phi > peak_a.phi {
        peak_b.clone()
    } else {
        peak_a.clone()
    };
    Ok(TwoUserPeaks {
        peak_a,
        peak_b,
        best,
        stationarity_a,
        stationarity_b,
    })
}

/// Solves the coupled peak conditions with user `high` given priority:
/// `r_high = (μ_low/μ_high) R_low⁺(r_low)` and
/// `r_low = (μ_high/μ_low) R_high⁻(r_high)`.
///
/// Damped iteration from the medians; if that stalls, bisection on the
/// composed scalar residual in `r_high`.
pub fn solve_two_user_peak(
    profiles: &[UserProfile],
    high: usize,
    cfg: &SolverConfig,
) -> Result<(ThresholdAssignment, StationarityReport)> {
    let low = 1 - high;
    let (ph, pl) = (&profiles[high], &profiles[low]);
    let (mu_h, mu_l) = (ph.weight(), pl.weight());

    let upper_map = |r_low: f64| -> Result<f64> {
        Ok(mu_l / mu_h * conditional_means(pl.dist(), r_low)?.above_mean)
    };
    let lower_map = |r_high: f64| -> Result<f64> {
        Ok(mu_h / mu_l * conditional_means(ph.dist(), r_high)?.below_mean)
    };

    let mut r_h = ph.dist().quantile(0.5);
    let mut r_l = pl.dist().quantile(0.5);
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let t_h = upper_map(r_l)?;
        let t_l = lower_map(r_h)?;
        residual = (t_h - r_h).abs().max((t_l - r_l).abs());
        if residual < cfg.fixed_point_tol {
            break;
        }
        r_h += cfg.damping * (t_h - r_h);
        r_l += cfg.damping * (t_l - r_l);
    }

    if residual >= cfg.fixed_point_tol {
        let composed = |r: f64| -> Result<f64> { Ok(r - upper_map(lower_map(r)?)?) };
        let mut lo = 0.0;
        let mut hi = r_max(ph.dist()).max(r_max(pl.dist()));
        let mut doublings = 0;
        while composed(hi)? <= 0.0 {
            hi *= 2.0;
            doublings += 1;
            if doublings > 20 {
                return Err(Error::NoConvergence {
                    iterations: cfg.max_iters,
                    last: vec![r_h, r_l],
                    residual,
                });
            }
        }
        while hi - lo > cfg.bisection_tol {
            let mid = 0.5 * (lo + hi);
            if composed(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        r_h = 0.5 * (lo + hi);
        r_l = lower_map(r_h)?;
        let check = (upper_map(r_l)? - r_h).abs();
        if !(check < cfg.fixed_point_tol.max(10.0 * cfg.bisection_tol)) {
            return Err(Error::NoConvergence {
                iterations: cfg.max_iters,
                last: vec![r_h, r_l],
                residual: check,
            });
        }
    }

    let mut thresholds = vec![0.0; 2];
    thresholds[high] = r_h;
    thresholds[low] = r_l;
    let weights = weights_of(profiles);
    let stats = stats_for(profiles, &thresholds)?;
    let ordering = vec![high, low];
    let assignment = ThresholdAssignment {
        phi: weighted_sum_rate(&stats, &weights)?,
        region_holds: region_holds(&stats, &weights, &ordering),
        thresholds,
        ordering,
        fixed_point: None,
    };
    let report = stationarity_residual(profiles, &assignment.thresholds, cfg)?;
    Ok((assignment, report))
}

/// Feasibility and curvature diagnostics at a two-user point, in the frame
/// where user 0 has priority (swap the profiles to check the other peak).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoUserConstraintReport {
    /// `μ₂R₂⁺ − μ₁R₁⁻`
    pub cross_gap: f64,
    /// `μ₁F₂(r₂)∫₀^{r₁} r f₁ − μ₂F₁(r₁)∫₀^{r₂} r f₂`
    pub gamma2: f64,
    /// `μ₁R₁⁺ − μ₂R₂⁺`
    pub top_gap: f64,
    /// `(K₂ − K₁r₁) f₁'(r₁)`; non-positive where the objective is concave in `r₁`.
    pub concavity_term: f64,
    /// `−K₁f₁(r₁) + (K₂ − K₁r₁) f₁'(r₁)`
    pub second_derivative: f64,
    /// `μ₁r₁ − μ₂r₂`
    pub weighted_threshold_gap: f64,
}

impl TwoUserConstraintReport {
    pub fn constraints_hold(&self) -> bool {
        self.cross_gap > 0.0 && self.gamma2 > 0.0 && self.top_gap > 0.0
    }
}

pub fn verify_two_user_constraints(
    profiles: &[UserProfile],
    thresholds: &[f64],
) -> Result<TwoUserConstraintReport> {
    if profiles.len() != 2 || thresholds.len() != 2 {
        return Err(Error::InvalidArgument("two-user check needs exactly 2 users".into()));
    }
    let (d1, d2) = (profiles[0].dist(), profiles[1].dist());
    let (mu1, mu2) = (profiles[0].weight(), profiles[1].weight());
    let (r1, r2) = (thresholds[0], thresholds[1]);
    let stats = stats_for(profiles, thresholds)?;
    let (s1, s2) = (stats[0], stats[1]);

    let k2 = mu2 * d2.partial_first_moment(r2, f64::INFINITY)?;
    let k1 = mu1 * d2.survival(r2);
    let slope = k2 - k1 * r1;
    let concavity_term = slope * d1.pdf_derivative(r1);
    Ok(TwoUserConstraintReport {
        cross_gap: mu2 * s2.above_mean - mu1 * s1.below_mean,
        gamma2: mu1 * s2.cdf_at_threshold * d1.partial_first_moment(0.0, r1)?
            - mu2 * s1.cdf_at_threshold * d2.partial_first_moment(0.0, r2)?,
        top_gap: mu1 * s1.above_mean - mu2 * s2.above_mean,
        concavity_term,
        second_derivative: -k1 * d1.pdf(r1) + concavity_term,
        weighted_threshold_gap: mu1 * r1 - mu2 * r2,
    })
}
