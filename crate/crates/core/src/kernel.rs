//! Tapered sinc interpolation kernel.
//!
//! The kernel is the product of two sinc factors,
//!
//! ```text
//! phi(t) = sin((pi + a) t) * sin(a t) / (pi * a * t^2),   phi(0) = 1 + a / pi
//! ```
//!
//! with `a = (lambda - 1) / 2`. Its frequency response is a trapezoid: unit
//! gain on `|w| <= pi`, a linear taper down to zero at `|w| = pi + 2a`. The
//! `1 / t^2` decay makes the kernel absolutely summable, unlike the plain
//! sinc, which is what makes interpolation from noisy samples stable.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default tail bound used when truncating the kernel support.
pub const DEFAULT_TRUNCATION_EPSILON: f64 = 1e-6;

/// Below this offset the closed form is replaced by its Taylor expansion.
const TAYLOR_THRESHOLD: f64 = 1e-8;

/// Steepness of the kernel's spectral taper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    lambda: f64,
    a: f64,
    truncation_epsilon: f64,
}

impl KernelParams {
    /// Builds kernel parameters with the default truncation epsilon.
    ///
    /// `lambda` must lie in `(1, 1 + pi)`: at 1 the response has a jump, and
    /// beyond `1 + pi` the taper reaches the first spectral replica at `2 pi`,
    /// so shifted copies of the kernel no longer sum to one.
    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_epsilon(lambda, DEFAULT_TRUNCATION_EPSILON)
    }

    pub fn with_epsilon(lambda: f64, truncation_epsilon: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 1.0 || lambda >= 1.0 + PI {
            return Err(Error::param(
                "lambda",
                format!("{lambda} is outside (1, 1 + pi)"),
            ));
        }
        if !(truncation_epsilon > 0.0 && truncation_epsilon <= 1e-3) {
            return Err(Error::param(
                "truncation_epsilon",
                format!("{truncation_epsilon} is outside (0, 1e-3]"),
            ));
        }
        Ok(Self {
            lambda,
            a: (lambda - 1.0) / 2.0,
            truncation_epsilon,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Half-width of the spectral taper, `(lambda - 1) / 2`.
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn truncation_epsilon(&self) -> f64 {
        self.truncation_epsilon
    }

    /// Upper edge of the frequency response, `pi + 2a`.
    pub fn stopband_edge(&self) -> f64 {
        PI + 2.0 * self.a
    }
}

/// Kernel value at normalized offset `t`.
pub fn phi1d(t: f64, params: &KernelParams) -> f64 {
    let a = params.a;
    let wide = PI + a;
    if t.abs() < TAYLOR_THRESHOLD {
        // sin(w t) sin(a t) / (pi a t^2) = (w / pi) (1 - (w^2 + a^2) t^2 / 6) + O(t^4)
        return wide / PI * (1.0 - (wide * wide + a * a) * t * t / 6.0);
    }
    (wide * t).sin() * (a * t).sin() / (PI * a * t * t)
}

/// Separable 2-D kernel, `phi(x) * phi(y)`.
pub fn phi2d(x: f64, y: f64, params: &KernelParams) -> f64 {
    phi1d(x, params) * phi1d(y, params)
}

/// Frequency response of [`phi1d`]: the tapered low-pass trapezoid.
pub fn trapezoid_response(omega: f64, params: &KernelParams) -> f64 {
    let w = omega.abs();
    let edge = params.stopband_edge();
    if w <= PI {
        1.0
    } else if w >= edge {
        0.0
    } else {
        (edge - w) / (2.0 * params.a)
    }
}

/// Radius beyond which `|phi1d| <= truncation_epsilon` is guaranteed by the
/// envelope `1 / (pi a t^2)`.
pub fn truncation_radius(params: &KernelParams) -> f64 {
    (1.0 / (PI * params.a * params.truncation_epsilon)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Inverse transform of the trapezoid by composite Simpson quadrature,
    /// `(1 / pi) * int_0^inf Phi(w) cos(w t) dw`, split at the taper corner.
    fn quadrature_oracle(t: f64, params: &KernelParams) -> f64 {
        fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
            let h = (hi - lo) / intervals as f64;
            let mut acc = f(lo) + f(hi);
            for i in 1..intervals {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(lo + i as f64 * h);
            }
            acc * h / 3.0
        }
        let f = |w: f64| trapezoid_response(w, params) * (w * t).cos();
        let pass = simpson(f, 0.0, PI, 4000);
        let taper = simpson(f, PI, params.stopband_edge(), 4000);
        (pass + taper) / PI
    }

    fn lam(lambda: f64) -> KernelParams {
        KernelParams::new(lambda).unwrap()
    }

    #[test]
    fn rejects_out_of_range_lambda() {
        assert!(KernelParams::new(1.0).is_err());
        assert!(KernelParams::new(0.5).is_err());
        assert!(KernelParams::new(1.0 + PI).is_err());
        assert!(KernelParams::new(f64::NAN).is_err());
        assert!(KernelParams::with_epsilon(2.0, 0.0).is_err());
        assert!(KernelParams::with_epsilon(2.0, 2e-3).is_err());
        let p = lam(2.0);
        assert_eq!(p.a(), 0.5);
    }

    #[test]
    fn origin_value() {
        assert_abs_diff_eq!(phi1d(0.0, &lam(2.0)), 1.0 + 0.5 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(phi1d(0.0, &lam(2.0)), 1.159155, epsilon = 1e-6);
        // Unit-gain sinc at the origin in the a -> 0 limit.
        assert_abs_diff_eq!(phi1d(0.0, &lam(1.0 + 1e-9)), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn value_at_two_matches_quadrature() {
        let p = lam(2.0);
        let expected = 1f64.sin().powi(2) / (2.0 * PI);
        assert_abs_diff_eq!(expected, 0.112694, epsilon = 1e-6);
        assert_abs_diff_eq!(quadrature_oracle(2.0, &p), expected, epsilon = 1e-8);
        assert_abs_diff_eq!(phi1d(2.0, &p), expected, epsilon = 1e-12);
    }

    #[test]
    fn matches_inverse_transform_of_trapezoid() {
        // Deterministic pseudo-random offsets in [-10, 10].
        let mut state = 0x2545_f491_4f6c_dd1du64;
        for lambda in [1.5, 2.0, 3.0] {
            let p = lam(lambda);
            for _ in 0..200 {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let t = (state >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0;
                let diff = (phi1d(t, &p) - quadrature_oracle(t, &p)).abs();
                assert!(diff <= 1e-6, "lambda={lambda} t={t} diff={diff}");
            }
        }
    }

    #[test]
    fn continuous_at_origin() {
        for lambda in [1.5, 2.0, 3.0] {
            let p = lam(lambda);
            assert!((phi1d(1e-5, &p) - phi1d(0.0, &p)).abs() <= 1e-6);
            // Both sides of the Taylor switch agree.
            let below = phi1d(0.99 * TAYLOR_THRESHOLD, &p);
            let above = phi1d(1.01 * TAYLOR_THRESHOLD, &p);
            assert_abs_diff_eq!(below, above, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_d_values() {
        let p = lam(2.0);
        assert_abs_diff_eq!(phi2d(0.0, 0.0, &p), 1.343641, epsilon = 1e-6);
        assert_abs_diff_eq!(phi2d(2.0, 0.0, &p), 0.1306291, epsilon = 1e-6);
    }

    #[test]
    fn trapezoid_edges() {
        let p = lam(2.0);
        assert_eq!(trapezoid_response(0.0, &p), 1.0);
        assert_eq!(trapezoid_response(-PI, &p), 1.0);
        assert_abs_diff_eq!(trapezoid_response(PI + 0.5, &p), 0.5, epsilon = 1e-15);
        assert_eq!(trapezoid_response(PI + 1.0, &p), 0.0);
        assert_eq!(trapezoid_response(10.0, &p), 0.0);
    }

    #[test]
    fn truncation_radius_bounds_kernel() {
        let p = KernelParams::with_epsilon(2.0, 1e-6).unwrap();
        assert_abs_diff_eq!(truncation_radius(&p), 797.8846, epsilon = 1e-3);
        let q = KernelParams::with_epsilon(2.0, 1e-4).unwrap();
        assert_abs_diff_eq!(truncation_radius(&q), 79.78846, epsilon = 1e-4);
        for p in [p, q] {
            let r = truncation_radius(&p);
            for k in 0..1000 {
                let t = r + k as f64 * 0.37;
                assert!(phi1d(t, &p).abs() <= p.truncation_epsilon());
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let p = lam(2.0);
        let m_max = 2000i64;
        for step in 0..20 {
            let u = step as f64 / 20.0;
            let sum: f64 = (-m_max..=m_max).map(|m| phi1d(u - m as f64, &p)).sum();
            assert!((sum - 1.0).abs() <= 1e-4, "u={u} sum={sum}");
        }
    }

    #[test]
    fn absolutely_summable() {
        // The increment from the pair of terms at +-M is dominated by
        // 2 / (pi a M^2), which falls below 1e-8 once M exceeds ~11300.
        let p = lam(2.0);
        let u = 0.3;
        let mut total = 0.0;
        let mut last_increment = f64::INFINITY;
        for m in 0..=16_000i64 {
            let inc = if m == 0 {
                phi1d(u, &p).abs()
            } else {
                phi1d(u - m as f64, &p).abs() + phi1d(u + m as f64, &p).abs()
            };
            if m >= 1 {
                let bound = 2.0 / (PI * p.a() * (m as f64 - 1.0).max(1.0).powi(2));
                assert!(inc <= bound, "m={m} inc={inc} bound={bound}");
            }
            total += inc;
            last_increment = inc;
        }
        assert!(total.is_finite());
        assert!(last_increment < 1e-8);
    }

    proptest! {
        #[test]
        fn phi_is_even(t in -50.0f64..50.0, lambda in 1.01f64..4.1) {
            let p = lam(lambda);
            prop_assert_eq!(phi1d(t, &p), phi1d(-t, &p));
        }

        #[test]
        fn phi2d_symmetric(x in -20.0f64..20.0, y in -20.0f64..20.0) {
            let p = lam(2.0);
            prop_assert_eq!(phi2d(x, y, &p), phi2d(y, x, &p));
            prop_assert_eq!(phi2d(x, y, &p), phi2d(-x, y, &p));
            prop_assert_eq!(phi2d(x, y, &p), phi2d(x, -y, &p));
        }
    }
}
