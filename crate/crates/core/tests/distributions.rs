use std::f64::consts::LN_2;

use onebit::distributions::{make_rayleigh_rate, RateDistribution};
use proptest::prelude::*;

/// e^{z} E1(z) = ∫_0^∞ e^{-u} / (z + u) du, by composite Simpson after u = t / (1 - t).
fn scaled_e1_oracle(z: f64) -> f64 {
    let n = 200_000;
    let h = 1.0 / n as f64;
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = t / (1.0 - t);
        (-u).exp() / (z + u) / ((1.0 - t) * (1.0 - t))
    };
    let mut s = g(0.0) + g(1.0);
    for k in 1..n {
        s += g(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// ∫_a^b r f(r) dr for the Rayleigh rate law, via integration by parts in SNR space.
fn partial_moment_oracle(snr: f64, a: f64, b: f64) -> f64 {
    let xa = (2f64.powf(a) - 1.0) / snr;
    let xb = (2f64.powf(b) - 1.0) / snr;
    let c = 1.0 / snr;
    let boundary = (1.0 + snr * xa).log2() * (-xa).exp() - (1.0 + snr * xb).log2() * (-xb).exp();
    // e^{c} E1(c + x) = e^{-x} e^{c + x} E1(c + x)
    let scaled = |x: f64| (-x).exp() * scaled_e1_oracle(c + x);
    boundary + (scaled(xa) - scaled(xb)) / LN_2
}

#[test]
fn partial_moments_match_exponential_integral_form() {
    for db in [-5.0, 0.0, 10.0, 20.0] {
        let d = make_rayleigh_rate(db).unwrap();
        let snr = 10f64.powf(db / 10.0);
        for (a, b) in [(0.0, 0.5), (0.3, 1.7), (1.0, 4.0), (2.5, 9.0)] {
            let got = d.partial_first_moment(a, b).unwrap();
            let want = partial_moment_oracle(snr, a, b);
            assert!((got - want).abs() < 1e-9, "{db} dB [{a}, {b}]: {got} vs {want}");
        }
    }
}

#[test]
fn mean_matches_oracle() {
    for db in [-5.0, 0.0, 5.0, 10.0, 20.0] {
        let d = make_rayleigh_rate(db).unwrap();
        let snr = 10f64.powf(db / 10.0);
        let want = scaled_e1_oracle(1.0 / snr) / LN_2;
        assert!((d.mean() - want).abs() < 1e-9, "{db} dB: {} vs {want}", d.mean());
    }
}

#[test]
fn invalid_snr_rejected() {
    assert!(make_rayleigh_rate(f64::NAN).is_err());
    assert!(make_rayleigh_rate(f64::INFINITY).is_err());
}

proptest! {
    #[test]
    fn cdf_is_monotone_and_bounded(db in -10.0f64..30.0, a in 0.0f64..15.0, d in 0.0f64..5.0) {
        let dist = make_rayleigh_rate(db).unwrap();
        let (fa, fb) = (dist.cdf(a), dist.cdf(a + d));
        prop_assert!((0.0..=1.0).contains(&fa));
        prop_assert!(fb >= fa);
        prop_assert!(dist.pdf(a) >= 0.0);
    }

    #[test]
    fn quantile_inverts_cdf(db in -5.0f64..25.0, p in 0.01f64..0.99) {
        let dist = make_rayleigh_rate(db).unwrap();
        let r = dist.quantile(p);
        prop_assert!((dist.cdf(r) - p).abs() < 1e-9);
    }

    #[test]
    fn partial_moments_are_additive(db in -5.0f64..25.0, a in 0.0f64..5.0, d1 in 0.0f64..3.0, d2 in 0.0f64..3.0) {
        let dist = make_rayleigh_rate(db).unwrap();
        let whole = dist.partial_first_moment(a, a + d1 + d2).unwrap();
        let parts = dist.partial_first_moment(a, a + d1).unwrap() + dist.partial_first_moment(a + d1, a + d1 + d2).unwrap();
        prop_assert!((whole - parts).abs() < 1e-10);
    }
}
