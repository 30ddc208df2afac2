//! Truncated-Gaussian draws: rejection from the unconstrained distribution
//! with a capped attempt count, then inverse-CDF sampling as fallback.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::stego::{normal_cdf, normal_quantile};

pub(crate) const REJECTION_CAP: usize = 10_000;

/// Draws from N(0, sigma^2) restricted to `[lo, hi]`; either bound may be
/// infinite. Returns the draw and whether the inverse-CDF fallback was used.
pub(crate) fn truncated_normal(rng: &mut impl Rng, sigma: f64, lo: f64, hi: f64) -> (f64, bool) {
    debug_assert!(lo < hi);
    if sigma <= 0.0 {
        return (lo.max(0.0).min(hi), false);
    }
    for _ in 0..REJECTION_CAP {
        let z: f64 = rng.sample(StandardNormal);
        let v = z * sigma;
        if v >= lo && v < hi {
            return (v, false);
        }
    }
    // Cell mass is tiny; invert the CDF on the interval instead.
    let p_lo = if lo.is_finite() { normal_cdf(lo / sigma) } else { 0.0 };
    let p_hi = if hi.is_finite() { normal_cdf(hi / sigma) } else { 1.0 };
    let u: f64 = rng.gen();
    let p = (p_lo + u * (p_hi - p_lo)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    let v = sigma * normal_quantile(p);
    (v.clamp(lo, if hi.is_finite() { hi } else { f64::MAX }), true)
}

/// Inverse-CDF draw from N(0, sigma^2) restricted to `[lo, hi]`, for use
/// when rejection sampling has already been tried and failed.
pub(crate) fn truncated_normal_icdf(rng: &mut impl Rng, sigma: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo < hi && sigma > 0.0);
    let p_lo = if lo.is_finite() { normal_cdf(lo / sigma) } else { 0.0 };
    let p_hi = if hi.is_finite() { normal_cdf(hi / sigma) } else { 1.0 };
    let u: f64 = rng.gen();
    let p = (p_lo + u * (p_hi - p_lo)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    let v = sigma * normal_quantile(p);
    v.clamp(lo, if hi.is_finite() { hi } else { f64::MAX })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn draws_stay_in_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (v, _) = truncated_normal(&mut rng, 2.0, -1.0, 0.5);
            assert!((-1.0..0.5).contains(&v));
        }
    }

    #[test]
    fn far_tail_uses_fallback_and_stays_in_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (v, fallback) = truncated_normal(&mut rng, 1.0, 9.0, 9.5);
        assert!(fallback);
        assert!((9.0..=9.5).contains(&v));
    }

    #[test]
    fn mean_of_symmetric_interval_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mean: f64 = (0..20_000)
            .map(|_| truncated_normal(&mut rng, 1.0, -0.5, 0.5).0)
            .sum::<f64>()
            / 20_000.0;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }
}
