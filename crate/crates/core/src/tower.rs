//! Positive reals of the form `exp(exp(…exp(top)…))`, for radii far past
//! the `f64` range. A value is stored as `(level, top)` with
//! `top ≤ MAX_TOP`, and `level > 0` only when `top > ln MAX_TOP`.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

const MAX_TOP: f64 = 1e300;

fn ln_max() -> f64 {
    MAX_TOP.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tower {
    level: u32,
    top: f64,
}

impl Tower {
    /// Requires `x ≥ 0`.
    pub fn new(x: f64) -> Self {
        assert!(x >= 0.0 && !x.is_nan(), "tower values are nonnegative");
        if x.is_infinite() {
            panic!("tower from infinite value; use from_ln");
        }
        Self { level: 0, top: x }
    }

    /// `e^x` for any finite `x`.
    pub fn from_ln(x: f64) -> Self {
        assert!(!x.is_nan() && x < f64::INFINITY, "tower exponent must be finite");
        if x <= ln_max() {
            Self { level: 0, top: x.exp() }
        } else {
            Self { level: 1, top: x }
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    /// Value as `f64`, `inf` past the range.
    pub fn to_f64(&self) -> f64 {
        if self.level == 0 {
            self.top
        } else {
            f64::INFINITY
        }
    }

    /// `ln x` as `f64` when it fits.
    pub fn ln_f64(&self) -> f64 {
        match self.level {
            0 => self.top.ln(),
            1 => self.top,
            _ => f64::INFINITY,
        }
    }

    /// `ln x`; requires `x ≥ 1`.
    pub fn ln(&self) -> Self {
        match self.level {
            0 => {
                assert!(self.top >= 1.0, "ln of a value below one");
                Self::new(self.top.ln())
            }
            l => {
                if l == 1 {
                    Self::new(self.top)
                } else {
                    Self { level: l - 1, top: self.top }
                }
            }
        }
    }

    pub fn exp(&self) -> Self {
        match self.level {
            0 => Self::from_ln(self.top),
            l => Self { level: l + 1, top: self.top },
        }
    }

    /// `x · c` for `c > 0`.
    pub fn mul(&self, c: f64) -> Self {
        assert!(c > 0.0);
        if self.level == 0 {
            let p = self.top * c;
            if p.is_finite() && p <= MAX_TOP {
                return Self::new(p);
            }
            return Self::from_ln(self.top.ln() + c.ln());
        }
        self.ln().add_f64(c.ln()).exp()
    }

    /// `x + a`; the result must stay nonnegative.
    pub fn add_f64(&self, a: f64) -> Self {
        if self.level == 0 {
            let s = self.top + a;
            assert!(s >= -1e-300, "tower sum went negative");
            if s <= MAX_TOP {
                return Self::new(s.max(0.0));
            }
            return Self::from_ln(self.top.ln() + (a / self.top).ln_1p());
        }
        // |a| / x underflows once x > MAX_TOP
        *self
    }

    /// `x + y`.
    pub fn add(&self, other: &Tower) -> Self {
        let (hi, lo) = if self >= other { (*self, *other) } else { (*other, *self) };
        if hi.level == 0 {
            return Self::new(hi.top).add_f64(lo.top);
        }
        if lo.level == 0 && lo.top < 1.0 {
            return hi;
        }
        // ln(hi + lo) = ln hi + ln(1 + e^{-(ln hi - ln lo)})
        let d = hi.ln().sub(&lo.ln());
        let r = (-d.to_f64()).exp();
        hi.ln().add_f64(r.ln_1p()).exp()
    }

    /// `x - y`; requires `x ≥ y`.
    pub fn sub(&self, other: &Tower) -> Self {
        assert!(self >= other, "tower difference would be negative");
        if self.level == 0 {
            return Self::new((self.top - other.top).max(0.0));
        }
        if other.level == 0 && other.top < 1.0 {
            return *self;
        }
        let d = self.ln().sub(&other.ln());
        let r = (-d.to_f64()).exp();
        if r >= 1.0 {
            return Self::new(0.0);
        }
        let ln_hi = self.ln();
        let shift = (-r).ln_1p();
        if ln_hi.level == 0 {
            Self::from_ln(ln_hi.top + shift)
        } else {
            ln_hi.add_f64(shift).exp()
        }
    }

    /// `x^p` for `p > 0`; requires `x ≥ 1`.
    pub fn powf(&self, p: f64) -> Self {
        if self.level == 0 {
            let v = self.top.powf(p);
            if v.is_finite() && v <= MAX_TOP {
                return Self::new(v);
            }
            return Self::from_ln(p * self.top.ln());
        }
        let l = self.ln().mul(p);
        if l.level == 0 {
            Self::from_ln(l.top)
        } else {
            l.exp()
        }
    }
}

impl PartialOrd for Tower {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.level.cmp(&other.level) {
            Ordering::Equal => self.top.partial_cmp(&other.top),
            o => Some(o),
        }
    }
}

impl fmt::Display for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level == 0 {
            write!(f, "{:.6e}", self.top)
        } else {
            write!(f, "exp^{}({:.6e})", self.level, self.top)
        }
    }
}

/// Signed tower, for margins that may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignedTower {
    pub negative: bool,
    pub magnitude: Tower,
}

impl SignedTower {
    pub fn positive(t: Tower) -> Self {
        Self { negative: false, magnitude: t }
    }

    /// `a - b` for towers `a`, `b`.
    pub fn difference(a: &Tower, b: &Tower) -> Self {
        if a >= b {
            Self { negative: false, magnitude: a.sub(b) }
        } else {
            Self { negative: true, magnitude: b.sub(a) }
        }
    }

    pub fn is_positive(&self) -> bool {
        !self.negative && self.magnitude > Tower::new(0.0)
    }

    /// Strict order on signed values.
    pub fn less_than(&self, other: &SignedTower) -> bool {
        match (self.negative, other.negative) {
            (true, false) => true,
            (false, true) => false,
            (false, false) => self.magnitude < other.magnitude,
            (true, true) => self.magnitude > other.magnitude,
        }
    }
}

impl fmt::Display for SignedTower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            write!(f, "-{}", self.magnitude)
        } else {
            write!(f, "{}", self.magnitude)
        }
    }
}
