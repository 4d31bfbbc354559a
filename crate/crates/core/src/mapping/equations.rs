//! Closed-form device and step counts for convolution mappings.
//!
//! The two rational formulas are evaluated exactly as written, including the
//! `(S + 1)` denominator, and keep their remainder so callers can see when the
//! division is inexact. Constructive mappings use the standard output-size
//! formula instead; both views are reported side by side.

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::ConvGeometry;

/// An exact rational `numerator / denominator` with a positive denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EqValue {
    pub numerator: i128,
    pub denominator: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl EqValue {
    pub fn new(numerator: i128, denominator: i128) -> Self {
        assert!(denominator > 0, "denominator must be positive");
        Self {
            numerator,
            denominator,
        }
    }

    pub fn integer(v: i128) -> Self {
        Self::new(v, 1)
    }

    /// Floor of the quotient.
    pub fn floor(&self) -> i128 {
        self.numerator.div_euclid(self.denominator)
    }

    /// Set when the division leaves a remainder.
    pub fn remainder_flag(&self) -> bool {
        self.numerator.rem_euclid(self.denominator) != 0
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    pub fn reduced(&self) -> Self {
        let g = gcd(self.numerator, self.denominator).max(1);
        Self::new(self.numerator / g, self.denominator / g)
    }
}

impl Add for EqValue {
    type Output = EqValue;

    fn add(self, rhs: Self) -> Self {
        EqValue::new(
            self.numerator * rhs.denominator + rhs.numerator * self.denominator,
            self.denominator * rhs.denominator,
        )
        .reduced()
    }
}

impl fmt::Display for EqValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.reduced();
        if r.denominator == 1 {
            write!(f, "{}", r.numerator)
        } else {
            write!(f, "{}/{}", r.numerator, r.denominator)
        }
    }
}

/// `X + 2P - D(H - 1) - 1`, signed.
fn window_span_term(g: &ConvGeometry) -> i128 {
    g.input_height as i128 + 2 * g.padding as i128
        - g.dilation as i128 * (g.kernel_height as i128 - 1)
        - 1
}

/// Staggered-mapping device requirement `K^2 X W (X + 2P - D(H-1) - 1) / (S + 1)`.
pub fn sparse_devices_closed_form(g: &ConvGeometry) -> EqValue {
    let k = g.kernels as i128;
    let numerator = k * k * g.input_height as i128 * g.kernel_width as i128 * window_span_term(g);
    EqValue::new(numerator, g.stride as i128 + 1)
}

/// Dense-kernel device requirement `K H W`.
pub fn dense_devices_closed_form(g: &ConvGeometry) -> u64 {
    (g.kernels * g.kernel_height * g.kernel_width) as u64
}

/// Dense-kernel computational steps `(X + 2P - D(H-1) - 1) / (S + 1)`.
pub fn dense_steps_closed_form(g: &ConvGeometry) -> EqValue {
    EqValue::new(window_span_term(g), g.stride as i128 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(k: usize, h: usize, w: usize, x: usize, s: usize, p: usize, d: usize) -> ConvGeometry {
        ConvGeometry {
            kernels: k,
            kernel_height: h,
            kernel_width: w,
            input_height: x,
            input_width: x,
            stride: s,
            padding: p,
            dilation: d,
            channels: 1,
            one_d: false,
        }
    }

    #[test]
    fn sparse_device_count_examples() {
        let v = sparse_devices_closed_form(&geom(1, 3, 1, 5, 1, 0, 1));
        assert_eq!((v.floor(), v.remainder_flag()), (5, false));
        let zero = sparse_devices_closed_form(&geom(1, 3, 1, 3, 1, 0, 1));
        assert_eq!((zero.floor(), zero.remainder_flag()), (0, false));
        // S = 0 is outside a valid geometry but the formula is still defined
        let s0 = sparse_devices_closed_form(&geom(2, 1, 1, 4, 0, 0, 1));
        assert_eq!((s0.floor(), s0.remainder_flag()), (48, false));
    }

    #[test]
    fn dense_device_count_examples() {
        assert_eq!(dense_devices_closed_form(&geom(64, 3, 3, 8, 1, 0, 1)), 576);
        assert_eq!(dense_devices_closed_form(&geom(1, 1, 1, 8, 1, 0, 1)), 1);
        assert_eq!(
            dense_devices_closed_form(&geom(512, 3, 3, 8, 1, 0, 1)),
            4608
        );
    }

    #[test]
    fn dense_step_count_examples() {
        let a = dense_steps_closed_form(&geom(1, 3, 1, 5, 1, 0, 1));
        assert_eq!((a.floor(), a.remainder_flag()), (1, false));
        let b = dense_steps_closed_form(&geom(1, 3, 1, 3, 1, 0, 1));
        assert_eq!((b.floor(), b.remainder_flag()), (0, false));
        let c = dense_steps_closed_form(&geom(1, 3, 1, 32, 1, 1, 1));
        assert_eq!((c.floor(), c.remainder_flag()), (15, true));
    }

    #[test]
    fn rational_sum_is_exact() {
        let s = EqValue::new(1, 2) + EqValue::new(1, 3);
        assert_eq!(s, EqValue::new(5, 6));
        assert_eq!(s.to_string(), "5/6");
        assert_eq!((EqValue::new(3, 2) + EqValue::new(1, 2)).to_string(), "2");
    }
}
