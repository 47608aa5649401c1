//! One-sided truncated normal draws.
//!
//! Near the mode the inverse CDF is used directly. Deep in the tail it loses
//! precision, so bounds above [`TAIL_SWITCH`] use exponential-proposal
//! rejection, which accepts with high probability there.

use rand::Rng;
use rand_distr::{Distribution, Exp, Open01};
use statrs::function::erf::{erfc, erfc_inv};

use crate::model::Direction;

/// Standardized lower bound beyond which the tail sampler is used.
pub const TAIL_SWITCH: f64 = 3.0;

/// Upper tail probability of the standard normal.
#[inline]
pub fn upper_tail(a: f64) -> f64 {
    0.5 * erfc(a / std::f64::consts::SQRT_2)
}

/// Standard normal conditioned on `x > a`.
pub fn standard_above<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a < TAIL_SWITCH {
        let u: f64 = Open01.sample(rng);
        let x = std::f64::consts::SQRT_2 * erfc_inv(2.0 * u * upper_tail(a));
        // Rounding in the inverse can land a hair below the bound.
        if x > a {
            x
        } else {
            a + (a.abs() * f64::EPSILON).max(f64::MIN_POSITIVE)
        }
    } else {
        let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
        let exp = Exp::new(alpha).expect("positive rate");
        loop {
            let z = a + exp.sample(rng);
            let u: f64 = Open01.sample(rng);
            if u.ln() <= -0.5 * (z - alpha) * (z - alpha) {
                return z;
            }
        }
    }
}

/// `N(mean, 1)` restricted to `(0, inf)` for `Positive` or `(-inf, 0]` for
/// `Negative`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(mean: f64, side: Direction, rng: &mut R) -> f64 {
    match side {
        Direction::Positive => {
            let z = mean + standard_above(-mean, rng);
            if z > 0.0 {
                z
            } else {
                f64::MIN_POSITIVE
            }
        }
        Direction::Negative => {
            let z = -(-mean + standard_above(mean, rng));
            z.min(0.0)
        }
    }
}

/// `N(mean, sd^2)` restricted to one side of zero.
pub fn sample_truncated_normal_scaled<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    side: Direction,
    rng: &mut R,
) -> f64 {
    let z = sd * sample_truncated_normal(mean / sd, side, rng);
    match side {
        Direction::Positive if z <= 0.0 => f64::MIN_POSITIVE,
        Direction::Negative => z.min(0.0),
        _ => z,
    }
}

/// Mean of `N(mean, 1)` truncated to `(0, inf)`.
pub fn positive_truncated_mean(mean: f64) -> f64 {
    let pdf = (-0.5 * mean * mean).exp() / (2.0 * std::f64::consts::PI).sqrt();
    mean + pdf / upper_tail(-mean)
}
