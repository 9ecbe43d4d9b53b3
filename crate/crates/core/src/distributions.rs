//! Per-user achievable-rate laws and the integral primitives built on them.
//!
//! A law only has to supply its density and distribution function; partial
//! first moments, quantiles, tail cut-offs and sampling have generic defaults
//! that concrete laws may override with closed forms.

use std::f64::consts::LN_2;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};

/// Upper-tail mass ignored when an integral runs to infinity.
pub const TAIL_EPS: f64 = 1e-12;

/// Law of the achievable rate `r >= 0` (bits/s/Hz) of one user.
pub trait RateDistribution: Send + Sync + fmt::Debug {
    fn pdf(&self, r: f64) -> f64;

    fn cdf(&self, r: f64) -> f64;

    /// `1 - cdf(r)`. Override when a direct form avoids cancellation.
    fn survival(&self, r: f64) -> f64 {
        1.0 - self.cdf(r)
    }

    /// Derivative of the density. The default is a central difference.
    fn pdf_derivative(&self, r: f64) -> f64 {
        let h = 1e-6 * r.abs().max(1.0);
        (self.pdf(r + h) - self.pdf((r - h).max(0.0))) / (r + h - (r - h).max(0.0))
    }

    /// Smallest `r` with `survival(r) < eps`.
    fn tail_cutoff(&self, eps: f64) -> f64 {
        let mut hi = 1.0;
        while self.survival(hi) >= eps && hi < 1e6 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.survival(mid) < eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Inverse distribution function for `p` in `[0, 1)`.
    fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let mut lo = 0.0;
        let mut hi = self.tail_cutoff((1.0 - p).min(TAIL_EPS));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `∫_a^b r f(r) dr` for `0 <= a <= b` (`b` may be infinite).
    ///
    /// The upper limit is clipped where the remaining tail mass drops below
    /// `TAIL_EPS` times the mass above `a`.
    fn partial_first_moment(&self, a: f64, b: f64) -> Result<f64> {
        if a.is_nan() || b.is_nan() || a < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "partial moment bounds must satisfy 0 <= a <= b, got a={a}, b={b}"
            )));
        }
        if a > b {
            return Err(Error::InvalidArgument(format!(
                "partial moment lower bound {a} exceeds upper bound {b}"
            )));
        }
        if a == b {
            return Ok(0.0);
        }
        let eps = (TAIL_EPS * self.survival(a).min(1.0)).max(1e-300);
        let upper = b.min(self.tail_cutoff(eps));
        if upper <= a {
            return Ok(0.0);
        }
        let res = integrate(|r| r * self.pdf(r), a, upper, &QuadratureConfig::default());
        Ok(res.value)
    }

    fn mean(&self) -> f64 {
        self.partial_first_moment(0.0, f64::INFINITY)
            .expect("0 <= inf is a valid interval")
    }

    /// Draws one rate. The default inverts the distribution function.
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.gen();
        self.quantile(u)
    }
}

/// Rate of a Rayleigh-faded link, `r = log2(1 + snr * X)` with
/// `X ~ Exponential(1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighRateLaw {
    avg_snr: f64,
}

impl RayleighRateLaw {
    pub fn new(avg_snr: f64) -> Result<Self> {
        if !(avg_snr.is_finite() && avg_snr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "average SNR must be positive and finite, got {avg_snr}"
            )));
        }
        Ok(Self { avg_snr })
    }

    pub fn avg_snr(&self) -> f64 {
        self.avg_snr
    }

    // normalized channel gain x = (2^r - 1) / snr
    fn gain(&self, r: f64) -> f64 {
        (r * LN_2).exp_m1() / self.avg_snr
    }
}

/// Builds the Rayleigh rate law for an average SNR given in dB.
pub fn make_rayleigh_rate(avg_snr_db: f64) -> Result<RayleighRateLaw> {
    if !avg_snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "average SNR must be finite, got {avg_snr_db} dB"
        )));
    }
    RayleighRateLaw::new(10f64.powf(avg_snr_db / 10.0))
}

impl RateDistribution for RayleighRateLaw {
    fn pdf(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        let x = self.gain(r);
        // 2^r / snr = 1/snr + x
        LN_2 * (1.0 / self.avg_snr + x) * (-x).exp()
    }

    fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        -(-self.gain(r)).exp_m1()
    }

    fn survival(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        (-self.gain(r)).exp()
    }

    fn pdf_derivative(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        let x = self.gain(r);
        self.pdf(r) * LN_2 * (1.0 - 1.0 / self.avg_snr - x)
    }

    fn tail_cutoff(&self, eps: f64) -> f64 {
        (self.avg_snr * -eps.ln()).ln_1p() / LN_2
    }

    fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let x = -(-p).ln_1p();
        (self.avg_snr * x).ln_1p() / LN_2
    }

    fn mean(&self) -> f64 {
        scaled_exp_integral(1.0 / self.avg_snr) / LN_2
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.gen();
        let x = -(-u).ln_1p();
        (self.avg_snr * x).ln_1p() / LN_2
    }
}

/// `e^x E1(x)` for `x > 0`.
pub(crate) fn scaled_exp_integral(x: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    assert!(x > 0.0, "exponential integral needs x > 0");
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        (-EULER_GAMMA - x.ln() - sum) * x.exp()
    } else {
        // modified Lentz on the continued fraction for E1
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h
    }
}

/// A user's QoS weight together with its rate law.
#[derive(Debug, Clone)]
pub struct UserProfile {
    weight: f64,
    dist: Arc<dyn RateDistribution>,
}

impl UserProfile {
    pub fn new(weight: f64, dist: Arc<dyn RateDistribution>) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "user weight must be positive and finite, got {weight}"
            )));
        }
        Ok(Self { weight, dist })
    }

    pub fn rayleigh(weight: f64, avg_snr_db: f64) -> Result<Self> {
        Self::new(weight, Arc::new(make_rayleigh_rate(avg_snr_db)?))
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dist(&self) -> &dyn RateDistribution {
        self.dist.as_ref()
    }

    /// Same law with the weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.weight * factor, Arc::clone(&self.dist))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // ∫_0^∞ log2(1 + x) e^{-x} dx by composite Simpson on x in [0, 60].
    fn simpson_mean_unit_snr() -> f64 {
        let n = 600_000;
        let h = 60.0 / n as f64;
        let g = |x: f64| (1.0 + x).log2() * (-x).exp();
        let mut s = g(0.0) + g(60.0);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * g(k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn cdf_at_one_bit_for_unit_snr() {
        let d = make_rayleigh_rate(0.0).unwrap();
        assert!((d.cdf(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((d.cdf(1.0) - 0.63212).abs() < 1e-5);
        assert_eq!(d.cdf(0.0), 0.0);
        assert_eq!(d.pdf(-1.0), 0.0);
    }

    #[test]
    fn mean_matches_simpson_oracle() {
        let oracle = simpson_mean_unit_snr();
        assert!((oracle - 0.8604).abs() < 1e-4);
        let d = make_rayleigh_rate(0.0).unwrap();
        assert!((d.mean() - oracle).abs() < 1e-10, "{} vs {}", d.mean(), oracle);
        let pfm = d.partial_first_moment(0.0, f64::INFINITY).unwrap();
        assert!((pfm - oracle).abs() < 1e-9);
    }

    #[test]
    fn partial_moment_is_additive_and_empty_on_points() {
        let d = make_rayleigh_rate(0.0).unwrap();
        assert_eq!(d.partial_first_moment(1.3, 1.3).unwrap(), 0.0);
        let lo = d.partial_first_moment(0.0, 1.0).unwrap();
        let hi = d.partial_first_moment(1.0, f64::INFINITY).unwrap();
        let all = d.partial_first_moment(0.0, f64::INFINITY).unwrap();
        assert!((lo + hi - all).abs() < 1e-8);
    }

    #[test]
    fn partial_moment_rejects_reversed_bounds() {
        let d = make_rayleigh_rate(3.0).unwrap();
        assert!(matches!(
            d.partial_first_moment(2.0, 1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(d.partial_first_moment(-1.0, 1.0).is_err());
    }

    #[test]
    fn exponential_integral_reference_values() {
        // E1(1) = 0.219383934395520, E1(0.1) = 1.82292395841939, E1(5) = 1.14829559127533e-3
        let e = std::f64::consts::E;
        assert!((scaled_exp_integral(1.0) / e - 0.219_383_934_395_520).abs() < 1e-14);
        assert!((scaled_exp_integral(0.1) / 0.1f64.exp() - 1.822_923_958_419_39).abs() < 1e-13);
        assert!((scaled_exp_integral(5.0) / 5f64.exp() - 1.148_295_591_275_33e-3).abs() < 1e-16);
    }

    #[test]
    fn derivative_of_cdf_matches_pdf() {
        for db in [-5.0, 0.0, 10.0, 20.0] {
            let d = make_rayleigh_rate(db).unwrap();
            for k in 1..=100 {
                let r = 0.1 * k as f64;
                let h = 1e-5;
                let fd = (d.cdf(r + h) - d.cdf(r - h)) / (2.0 * h);
                assert!((fd - d.pdf(r)).abs() < 1e-6, "db={db} r={r}");
                let fd2 = (d.pdf(r + h) - d.pdf(r - h)) / (2.0 * h);
                assert!((fd2 - d.pdf_derivative(r)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = make_rayleigh_rate(5.0).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..16).map(|_| d.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn sample_mean_converges() {
        let d = make_rayleigh_rate(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = d.sample(&mut rng);
            s += x;
            s2 += x * x;
        }
        let m = s / n as f64;
        let sd = (s2 / n as f64 - m * m).sqrt();
        let oracle = simpson_mean_unit_snr();
        assert!((m - oracle).abs() < 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn vanishing_snr_gives_zero_rates() {
        let d = make_rayleigh_rate(-100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = d.sample(&mut rng);
            assert!((0.0..1e-8).contains(&x));
        }
        assert!(d.mean() < 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_rayleigh_rate(f64::NAN).is_err());
        assert!(UserProfile::rayleigh(0.0, 0.0).is_err());
        assert!(UserProfile::rayleigh(-1.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_overrides_agree_with_generic_defaults() {
        #[derive(Debug)]
        struct Generic(RayleighRateLaw);
        impl RateDistribution for Generic {
            fn pdf(&self, r: f64) -> f64 {
                self.0.pdf(r)
            }
            fn cdf(&self, r: f64) -> f64 {
                self.0.cdf(r)
            }
        }
        let law = make_rayleigh_rate(7.0).unwrap();
        let g = Generic(law);
        for p in [0.1, 0.5, 0.9] {
            assert!((g.quantile(p) - law.quantile(p)).abs() < 1e-9);
        }
        assert!((g.mean() - law.mean()).abs() < 1e-9);
        assert!((g.tail_cutoff(1e-10) - law.tail_cutoff(1e-10)).abs() < 1e-6);
        assert!((g.pdf_derivative(2.0) - law.pdf_derivative(2.0)).abs() < 1e-6);
    }
}
