//! Closed rational intervals. Used for (a) inputs known only to finite
//! precision (an irrational θ entered at p bits) and (b) certified brackets
//! of irrational powers. Endpoints are exact rationals, so interval bounds
//! are themselves theorems, not floating-point estimates.

use super::Q;
use num_traits::{Signed, Zero};
use std::cmp::Ordering;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QInterval {
    pub lo: Q,
    pub hi: Q,
}

impl QInterval {
    pub fn new(lo: Q, hi: Q) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        QInterval { lo, hi }
    }

    pub fn point(x: Q) -> Self {
        QInterval { lo: x.clone(), hi: x }
    }

    pub fn centered(center: Q, radius: Q) -> Self {
        debug_assert!(!radius.is_negative());
        QInterval { lo: &center - &radius, hi: center + radius }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> Q {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Q) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    pub fn add(&self, other: &QInterval) -> QInterval {
        QInterval { lo: &self.lo + &other.lo, hi: &self.hi + &other.hi }
    }

    pub fn add_q(&self, x: &Q) -> QInterval {
        QInterval { lo: &self.lo + x, hi: &self.hi + x }
    }

    pub fn neg(&self) -> QInterval {
        QInterval { lo: -self.hi.clone(), hi: -self.lo.clone() }
    }

    pub fn sub(&self, other: &QInterval) -> QInterval {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &QInterval) -> QInterval {
        let cands = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        QInterval { lo, hi }
    }

    pub fn mul_q(&self, x: &Q) -> QInterval {
        if x.is_negative() {
            QInterval { lo: &self.hi * x, hi: &self.lo * x }
        } else {
            QInterval { lo: &self.lo * x, hi: &self.hi * x }
        }
    }

    pub fn recip(&self) -> QInterval {
        assert!(
            !self.contains_zero(),
            "reciprocal of an interval containing zero"
        );
        QInterval { lo: self.hi.recip(), hi: self.lo.recip() }
    }

    /// |·| applied setwise.
    pub fn abs(&self) -> QInterval {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            let hi = std::cmp::max(self.lo.abs(), self.hi.abs());
            QInterval { lo: Q::zero(), hi }
        }
    }

    /// Setwise max.
    pub fn max(&self, other: &QInterval) -> QInterval {
        QInterval {
            lo: std::cmp::max(self.lo.clone(), other.lo.clone()),
            hi: std::cmp::max(self.hi.clone(), other.hi.clone()),
        }
    }

    /// Three-valued comparison against a rational threshold:
    /// Some(Less) if certainly < t, Some(Greater) if certainly > t,
    /// Some(Equal) if the interval is the point t, None if undecided.
    pub fn cmp_q(&self, t: &Q) -> Option<Ordering> {
        if self.hi < *t {
            Some(Ordering::Less)
        } else if self.lo > *t {
            Some(Ordering::Greater)
        } else if self.is_point() && self.lo == *t {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// Certainly ≤ t.
    pub fn le_q(&self, t: &Q) -> bool {
        self.hi <= *t
    }

    /// Certainly > t.
    pub fn gt_q(&self, t: &Q) -> bool {
        self.lo > *t
    }

    pub fn to_f64(&self) -> f64 {
        let mid = (&self.lo + &self.hi) / super::qi(2);
        super::q_to_f64(&mid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qi, qq};

    #[test]
    fn mul_signs() {
        let a = QInterval::new(qi(-2), qi(3));
        let b = QInterval::new(qi(-1), qi(4));
        let p = a.mul(&b);
        assert_eq!(p.lo, qi(-8));
        assert_eq!(p.hi, qi(12));
    }

    #[test]
    fn abs_straddling() {
        let a = QInterval::new(qq(-3, 2), qi(1)).abs();
        assert_eq!(a.lo, qi(0));
        assert_eq!(a.hi, qq(3, 2));
    }

    #[test]
    fn threshold_decisions() {
        let a = QInterval::new(qq(1, 3), qq(1, 2));
        assert_eq!(a.cmp_q(&qi(1)), Some(Ordering::Less));
        assert_eq!(a.cmp_q(&qq(1, 4)), Some(Ordering::Greater));
        assert_eq!(a.cmp_q(&qq(2, 5)), None);
    }
}
