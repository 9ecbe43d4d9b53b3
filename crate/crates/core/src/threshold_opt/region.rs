use crate::distributions::UserProfile;
use crate::error::{Error, Result};
use crate::feedback_stats::{
    conditional_means, region_holds, stats_for, validate_permutation, weighted_sum_rate,
    weights_of, RawPoint, ThresholdAssignment,
};

use super::search::{pattern_search, Objective};
use super::{r_max, single_user, SolverConfig};

/// Which reading of the recursive threshold equations to iterate.
///
/// The coupling terms appear as `R⁺(1 + F)` and `1 + ΠF` in the published
/// recursion; differentiating the ordered objective directly gives `R⁺(1 − F)`
/// and `1 − ΠF`. Both reduce to the same two-user conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FixedPointForm {
    #[default]
    AsPrinted,
    Complement,
}

impl FixedPointForm {
    fn sign(self) -> f64 {
        match self {
            FixedPointForm::AsPrinted => 1.0,
            FixedPointForm::Complement => -1.0,
        }
    }
}

// Users in priority order.
struct Chain<'a> {
    users: Vec<&'a UserProfile>,
    sign: f64,
}

impl Chain<'_> {
    /// Propagates the recursion from the top user's threshold down to the
    /// last user and back up. Returns the ordered thresholds and the updated
    /// top threshold.
    fn sweep(&self, r_top: f64) -> Result<(Vec<f64>, f64)> {
        let m = self.users.len();
        let mu: Vec<f64> = self.users.iter().map(|u| u.weight()).collect();
        let mut r = vec![0.0; m];
        r[0] = r_top;
        let top = conditional_means(self.users[0].dist(), r_top)?;
        r[m - 1] = mu[0] / mu[m - 1] * top.below_mean;

        let mut stats = vec![None; m];
        stats[m - 1] = Some(conditional_means(self.users[m - 1].dist(), r[m - 1])?);
        for i in (1..m - 1).rev() {
            let next = stats[i + 1].expect("filled on the previous step");
            let f = next.cdf_at_threshold;
            r[i] = (mu[i + 1] / mu[i] * (r[i + 1] * f + next.above_mean * (1.0 + self.sign * f))).max(0.0);
            stats[i] = Some(conditional_means(self.users[i].dist(), r[i])?);
        }

        let second = stats[1].expect("m >= 2");
        let prod: f64 = stats[1..].iter().map(|s| s.expect("filled").cdf_at_threshold).product();
        let f2 = second.cdf_at_threshold;
        let numer = mu[1] * (r[1] * f2 + second.above_mean * (1.0 + self.sign * f2))
            - mu[m - 1] * r[m - 1] * prod;
        let denom = mu[0] * (1.0 + self.sign * prod);
        let next_top = if denom > 0.0 { (numer / denom).max(0.0) } else { r_top };
        Ok((r, next_top))
    }
}

/// Solves the recursive stationarity system for the region `ordering` and
/// returns thresholds indexed by original user.
///
/// Every update is explicit given the current iterate, so one sweep is a
/// scalar map of the top user's threshold. The map is iterated with damping;
/// if that fails to settle, its fixed point is bracketed and bisected.
pub fn fixed_point_in_region(
    profiles: &[UserProfile],
    ordering: &[usize],
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    validate_permutation(ordering, profiles.len())?;
    if profiles.len() < 2 {
        return Err(Error::InvalidArgument("the recursion needs at least 2 users".into()));
    }
    let chain = Chain {
        users: ordering.iter().map(|&k| &profiles[k]).collect(),
        sign: cfg.form.sign(),
    };

    let mut r = chain.users[0].dist().quantile(0.5);
    let mut residual = f64::INFINITY;
    let mut ordered = Vec::new();
    for _ in 0..cfg.max_iters {
        let (rs, next) = chain.sweep(r)?;
        residual = (next - r).abs();
        ordered = rs;
        if residual < cfg.fixed_point_tol {
            break;
        }
        r += cfg.damping * (next - r);
    }

    if residual >= cfg.fixed_point_tol {
        let g = |x: f64| -> Result<f64> { Ok(x - chain.sweep(x)?.1) };
        let mut lo = 0.0;
        let mut hi = chain.users.iter().map(|u| r_max(u.dist())).fold(0.0, f64::max);
        let mut tries = 0;
        while g(hi)? <= 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 20 || g(lo)? > 0.0 {
                return Err(Error::NoConvergence {
                    iterations: cfg.max_iters,
                    last: ordered,
                    residual,
                });
            }
        }
        while hi - lo > cfg.bisection_tol {
            let mid = 0.5 * (lo + hi);
            if g(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        r = 0.5 * (lo + hi);
        let (rs, next) = chain.sweep(r)?;
        residual = (next - r).abs();
        ordered = rs;
        if !(residual < cfg.fixed_point_tol.max(10.0 * cfg.bisection_tol)) {
            return Err(Error::NoConvergence {
                iterations: cfg.max_iters,
                last: ordered,
                residual,
            });
        }
    }

    let mut out = vec![0.0; profiles.len()];
    for (k, &u) in ordering.iter().enumerate() {
        out[u] = ordered[k];
    }
    Ok(out)
}

/// Local peak of the region `ordering`.
///
/// The recursive fixed point is computed first, then refined by a pattern
/// search on the region's closed-form objective, whose stationary point the
/// recursion is meant to find. The search cannot drift to another region's
/// peak. `phi` is the weighted sum rate the scheduler actually achieves at
/// the refined thresholds; `region_holds` says whether the region's ordering
/// condition is met there.
pub fn optimize_m_user_region(
    profiles: &[UserProfile],
    ordering: &[usize],
    cfg: &SolverConfig,
) -> Result<ThresholdAssignment> {
    cfg.validate()?;
    validate_permutation(ordering, profiles.len())?;
    if profiles.len() == 1 {
        return single_user(profiles);
    }
    let weights = weights_of(profiles);
    let raw = fixed_point_in_region(profiles, ordering, cfg)?;
    let raw_phi = weighted_sum_rate(&stats_for(profiles, &raw)?, &weights)?;

    let trace = pattern_search(profiles, &raw, Objective::Region(ordering))?;
    let stats = stats_for(profiles, &trace.point)?;
    Ok(ThresholdAssignment {
        phi: weighted_sum_rate(&stats, &weights)?,
        region_holds: region_holds(&stats, &weights, ordering),
        thresholds: trace.point,
        ordering: ordering.to_vec(),
        fixed_point: Some(RawPoint {
            thresholds: raw,
            phi: raw_phi,
        }),
    })
}
