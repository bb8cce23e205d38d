//! Closed real intervals with outward-padded arithmetic.
//!
//! Every operation widens its result by a few ulps so the enclosure stays
//! sound under round-to-nearest and the platform's `sin`/`cos`/`exp`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnclosureFault {
    #[error("denominator enclosure [{lo}, {hi}] contains zero")]
    DivisionByZero { lo: f64, hi: f64 },
    #[error("invalid interval bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, EnclosureFault> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(EnclosureFault::InvalidBounds { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// The whole extended real line; used when an operation loses all information.
    pub fn entire() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.width()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Interval with the same midpoint and `factor` times the radius.
    pub fn scaled(&self, factor: f64) -> Interval {
        let c = self.mid();
        let r = self.radius() * factor;
        Interval { lo: c - r, hi: c + r }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn split(&self) -> (Interval, Interval) {
        let m = self.mid();
        (
            Interval { lo: self.lo, hi: m },
            Interval { lo: m, hi: self.hi },
        )
    }

    fn padded(lo: f64, hi: f64, ulps: u32) -> Interval {
        if lo.is_nan() || hi.is_nan() {
            return Interval::entire();
        }
        let mut lo = lo;
        let mut hi = hi;
        for _ in 0..ulps {
            lo = lo.next_down();
            hi = hi.next_up();
        }
        Interval { lo, hi }
    }

    fn from_candidates(values: &[f64], ulps: u32) -> Interval {
        if values.iter().any(|v| v.is_nan()) {
            return Interval::entire();
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::padded(lo, hi, ulps)
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval::padded(self.lo + o.lo, self.hi + o.hi, 1)
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        Interval::padded(self.lo - o.hi, self.hi - o.lo, 1)
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        // 0 * inf is taken as 0: the finite factor's enclosure pins it.
        let p = |a: f64, b: f64| if a == 0.0 || b == 0.0 { 0.0 } else { a * b };
        Interval::from_candidates(
            &[
                p(self.lo, o.lo),
                p(self.lo, o.hi),
                p(self.hi, o.lo),
                p(self.hi, o.hi),
            ],
            1,
        )
    }

    pub fn recip(&self) -> Result<Interval, EnclosureFault> {
        if self.contains_zero() {
            return Err(EnclosureFault::DivisionByZero {
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(Interval::padded(1.0 / self.hi, 1.0 / self.lo, 1))
    }

    pub fn div(&self, o: &Interval) -> Result<Interval, EnclosureFault> {
        if o.contains_zero() {
            return Err(EnclosureFault::DivisionByZero { lo: o.lo, hi: o.hi });
        }
        let q = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a / b };
        Ok(Interval::from_candidates(
            &[q(self.lo, o.lo), q(self.lo, o.hi), q(self.hi, o.lo), q(self.hi, o.hi)],
            1,
        ))
    }

    /// Integer power with the even-power tightening: `[-1,2]^2 = [0,4]`.
    pub fn powi(&self, n: i32) -> Result<Interval, EnclosureFault> {
        if n == 0 {
            return Ok(Interval::point(1.0));
        }
        if n < 0 {
            return self.powi(-n)?.recip();
        }
        let ulps = n.unsigned_abs() + 1;
        let a = self.lo.powi(n);
        let b = self.hi.powi(n);
        if n % 2 == 1 {
            return Ok(Interval::padded(a, b, ulps));
        }
        if self.lo >= 0.0 {
            Ok(Interval::padded(a, b, ulps))
        } else if self.hi <= 0.0 {
            Ok(Interval::padded(b, a, ulps))
        } else {
            let top = Interval::padded(a.max(b), a.max(b), ulps).hi;
            Ok(Interval { lo: 0.0, hi: top })
        }
    }

    pub fn exp(&self) -> Interval {
        let lo = Interval::padded(self.lo.exp(), self.lo.exp(), 2).lo.max(0.0);
        let hi = Interval::padded(self.hi.exp(), self.hi.exp(), 2).hi;
        Interval { lo, hi }
    }

    pub fn sin(&self) -> Interval {
        self.trig(f64::sin, FRAC_PI_2)
    }

    pub fn cos(&self) -> Interval {
        self.trig(f64::cos, 0.0)
    }

    /// Range of a 2π-periodic function whose maxima sit at `peak + 2πk`
    /// and minima at `peak + π + 2πk`.
    fn trig(&self, f: fn(f64) -> f64, peak: f64) -> Interval {
        let full = Interval { lo: -1.0, hi: 1.0 };
        if !self.is_finite() || self.width() >= TAU {
            return full;
        }
        // Extra slack for the rounding in the multiples of 2π.
        let slack = 4.0 * f64::EPSILON * self.lo.abs().max(self.hi.abs()).max(1.0);
        let contains_shifted = |offset: f64| {
            let k = ((self.lo - offset - slack) / TAU).ceil();
            offset + k * TAU <= self.hi + slack
        };
        let (a, b) = (f(self.lo), f(self.hi));
        let mut out = Interval::padded(a.min(b), a.max(b), 2);
        if contains_shifted(peak) {
            out.hi = 1.0;
        }
        if contains_shifted(peak + PI) {
            out.lo = -1.0;
        }
        Interval {
            lo: out.lo.max(-1.0),
            hi: out.hi.min(1.0),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn even_power_tightening() {
        let sq = iv(-1.0, 2.0).powi(2).unwrap();
        assert_eq!(sq.lo(), 0.0);
        assert!(sq.hi() >= 4.0 && sq.hi() < 4.0 + 1e-12);
        let neg = iv(-3.0, -2.0).powi(2).unwrap();
        assert!(neg.contains(4.0) && neg.contains(9.0) && neg.lo() > 3.9);
    }

    #[test]
    fn odd_power_is_monotone() {
        let c = iv(-2.0, 1.0).powi(3).unwrap();
        assert!(c.contains(-8.0) && c.contains(1.0));
        assert!(c.lo() > -8.0 - 1e-9);
    }

    #[test]
    fn division_by_interval_containing_zero_faults() {
        assert!(matches!(
            iv(1.0, 2.0).div(&iv(-1.0, 1.0)),
            Err(EnclosureFault::DivisionByZero { .. })
        ));
        assert!(iv(-1.0, 1.0).powi(-2).is_err());
    }

    #[test]
    fn sin_hits_extrema_inside() {
        let s = iv(1.0, 2.0).sin();
        assert_eq!(s.hi(), 1.0);
        assert!(s.lo() <= 1f64.sin().min(2f64.sin()));
        let c = iv(3.0, 3.5).cos();
        assert_eq!(c.lo(), -1.0);
        let narrow = iv(0.1, 0.2).sin();
        assert!(narrow.hi() < 0.21 && narrow.lo() > 0.09);
        assert_eq!(iv(0.0, f64::INFINITY).sin(), iv(-1.0, 1.0));
    }

    #[test]
    fn exp_overflow_is_an_unbounded_enclosure() {
        let e = iv(700.0, 1000.0).exp();
        assert!(e.hi().is_infinite());
        assert!(e.lo() > 0.0);
        let prod = iv(0.0, 1.0).mul(&e);
        assert!(prod.lo() <= 0.0 && prod.lo() > -1e-300);
    }

    #[test]
    fn rejects_reversed_bounds() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
    }
}
