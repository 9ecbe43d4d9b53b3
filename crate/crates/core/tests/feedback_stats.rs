use onebit::distributions::UserProfile;
use onebit::feedback_stats::{
    conditional_means, phi_ordered, phi_region, region_holds, region_objective, scheduling_probabilities,
    stats_for, weighted_sum_rate, weights_of, ConditionalStats,
};
use onebit::threshold_opt::{optimize_m_user_region, permutations, FixedPointForm, SolverConfig};
use proptest::prelude::*;

/// Expected weighted rate and scheduling probabilities by enumerating all
/// feedback patterns and applying the scheduling rule directly.
fn enumerate(stats: &[ConditionalStats], w: &[f64]) -> (f64, Vec<f64>) {
    let m = stats.len();
    let mut phi = 0.0;
    let mut probs = vec![0.0; m];
    for pattern in 0u32..(1 << m) {
        let above = |k: usize| pattern >> k & 1 == 1;
        let mut p = 1.0;
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for k in 0..m {
            let s = &stats[k];
            let (prob, mean) = if above(k) {
                (1.0 - s.cdf_at_threshold, s.above_mean)
            } else {
                (s.cdf_at_threshold, s.below_mean)
            };
            p *= prob;
            let v = w[k] * mean;
            if v > best_v + 1e-12 {
                best = k;
                best_v = v;
            }
        }
        let s = &stats[best];
        let mean = if above(best) { s.above_mean } else { s.below_mean };
        phi += p * w[best] * mean;
        probs[best] += p;
    }
    (phi, probs)
}

fn profiles(weights: &[f64], snrs: &[f64]) -> Vec<UserProfile> {
    weights
        .iter()
        .zip(snrs)
        .map(|(&w, &s)| UserProfile::rayleigh(w, s).unwrap())
        .collect()
}

fn user_case(max_m: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2..=max_m).prop_flat_map(|m| {
        (
            prop::collection::vec(0.5f64..2.0, m),
            prop::collection::vec(-5.0f64..20.0, m),
            prop::collection::vec(0.0f64..6.0, m),
        )
    })
}

/// Synthetic stats satisfying the interleaved chain in index order.
fn ordered_case(max_m: usize) -> impl Strategy<Value = (Vec<ConditionalStats>, Vec<f64>)> {
    (2..=max_m).prop_flat_map(|m| {
        (
            prop::collection::vec(0.1f64..1.0, 2 * m),
            prop::collection::vec(0.5f64..2.0, m),
            prop::collection::vec(0.01f64..0.99, m),
        )
            .prop_map(move |(gaps, w, f)| {
                let mut v = Vec::with_capacity(2 * m);
                let mut acc = 0.0;
                for g in gaps.iter().rev() {
                    acc += g;
                    v.push(acc);
                }
                v.reverse();
                let stats = (0..m)
                    .map(|k| ConditionalStats {
                        threshold: 1.0,
                        cdf_at_threshold: f[k],
                        below_mean: v[m + k] / w[k],
                        above_mean: v[k] / w[k],
                    })
                    .collect();
                (stats, w)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_matches_enumeration((w, snr, r) in user_case(5)) {
        let p = profiles(&w, &snr);
        let s = stats_for(&p, &r).unwrap();
        let (phi, probs) = enumerate(&s, &w);
        prop_assert!((weighted_sum_rate(&s, &w).unwrap() - phi).abs() < 1e-12 * phi.max(1.0));
        let sp = scheduling_probabilities(&s, &w).unwrap();
        for (a, b) in sp.iter().zip(&probs) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((sp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn objective_is_homogeneous_in_weights((w, snr, r) in user_case(4), c in 0.1f64..10.0) {
        let p = profiles(&w, &snr);
        let s = stats_for(&p, &r).unwrap();
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        let a = weighted_sum_rate(&s, &w).unwrap();
        let b = weighted_sum_rate(&s, &scaled).unwrap();
        prop_assert!((b - c * a).abs() < 1e-10 * b.max(1.0));
    }

    #[test]
    fn ordered_closed_form_equals_general_form((s, w) in ordered_case(4)) {
        let general = weighted_sum_rate(&s, &w).unwrap();
        let ordered = phi_ordered(&s, &w).unwrap();
        prop_assert!((general - ordered).abs() < 1e-12 * general.max(1.0));
    }

    #[test]
    fn region_objective_bounds_general_form((w, snr, r) in user_case(4)) {
        let p = profiles(&w, &snr);
        let s = stats_for(&p, &r).unwrap();
        let phi = weighted_sum_rate(&s, &w).unwrap();
        for ord in permutations(w.len()) {
            let reg = region_objective(&s, &w, &ord);
            prop_assert!(reg <= phi + 1e-12, "{ord:?}: {reg} > {phi}");
            if region_holds(&s, &w, &ord) {
                prop_assert!((reg - phi).abs() < 1e-12 * phi.max(1.0));
            }
        }
    }
}

#[test]
fn region_objective_agrees_at_region_peaks() {
    let w = [1.1, 1.05, 1.0];
    let p = profiles(&w, &[10.0, 10.0, 10.0]);
    let cfg = SolverConfig {
        form: FixedPointForm::Complement,
        ..Default::default()
    };
    let mut covered = 0;
    for ord in permutations(3) {
        let a = optimize_m_user_region(&p, &ord, &cfg).unwrap();
        let s = stats_for(&p, &a.thresholds).unwrap();
        if region_holds(&s, &weights_of(&p), &ord) {
            covered += 1;
            let reg = phi_region(&p, &a.thresholds, &ord).unwrap();
            let phi = weighted_sum_rate(&s, &w).unwrap();
            assert!((reg - phi).abs() < 1e-12, "{ord:?}: {reg} vs {phi}");
        }
    }
    assert!(covered >= 3, "only {covered} regions reached");
    assert!(phi_region(&p, &[1.0, 1.0, 1.0], &[0, 0, 1]).is_err());
}

#[test]
fn two_user_closed_forms() {
    let w = [1.1, 1.05];
    let p = profiles(&w, &[10.0, 10.0]);
    let mut seen = [false; 3];
    for i in 0..40 {
        for j in 0..40 {
            let r = [0.15 * i as f64, 0.15 * j as f64];
            let s = stats_for(&p, &r).unwrap();
            let (s1, s2) = (&s[0], &s[1]);
            let (f1, f2) = (s1.cdf_at_threshold, s2.cdf_at_threshold);
            let (hi1, lo1) = (w[0] * s1.above_mean, w[0] * s1.below_mean);
            let (hi2, lo2) = (w[1] * s2.above_mean, w[1] * s2.below_mean);
            if hi1 <= hi2 + 1e-9 {
                continue;
            }
            let mean1 = p[0].dist().mean();
            let mean2 = p[1].dist().mean();
            let phi = weighted_sum_rate(&s, &w).unwrap();
            let want = if hi2 < lo1 - 1e-9 {
                seen[0] = true;
                w[0] * mean1
            } else if lo1 < lo2 - 1e-9 {
                seen[1] = true;
                hi1 * (1.0 - f1) + w[1] * f1 * mean2
            } else if lo2 < lo1 - 1e-9 && lo1 < hi2 - 1e-9 {
                seen[2] = true;
                let c = hi1 * (1.0 - f1) + lo1 * f1 * f2 + hi2 * f1 * (1.0 - f2);
                let e8 = w[0] * mean1 + (hi2 - lo1) * f1 * (1.0 - f2);
                let e9 = hi1 * (1.0 - f1) + w[1] * f1 * mean2 + (lo1 - lo2) * f1 * f2;
                assert!((c - e8).abs() < 1e-10 && (c - e9).abs() < 1e-10, "{r:?}");
                assert!(e8 >= w[0] * mean1 && e9 >= hi1 * (1.0 - f1) + w[1] * f1 * mean2);
                c
            } else {
                continue;
            };
            assert!((phi - want).abs() < 1e-10, "{r:?}: {phi} vs {want}");
        }
    }
    assert_eq!(seen, [true; 3]);
}

#[test]
fn conditional_means_split_the_mean() {
    let p = UserProfile::rayleigh(1.0, 3.0).unwrap();
    for r in [0.0, 0.2, 1.0, 2.5, 7.0, 40.0] {
        let s = conditional_means(p.dist(), r).unwrap();
        let total = s.cdf_at_threshold * s.below_mean + (1.0 - s.cdf_at_threshold) * s.above_mean;
        assert!((total - p.dist().mean()).abs() < 1e-9, "{r}");
        assert!(s.below_mean <= r + 1e-12 && s.above_mean >= r - 1e-12);
    }
}
