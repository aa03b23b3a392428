//! Exact values of the form Π baseᵢ^(eᵢ) with positive rational bases and
//! rational exponents — the closed form of every irrational scalar the flow
//! and quasi-norm machinery produces (fractional powers of rationals).
//! Ordering is decided exactly by cross-powering: raising both sides to the
//! lcm of the exponent denominators turns the comparison into one between
//! honest rationals.

use super::{ln_f64, Q};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

#[derive(Clone, Debug)]
pub struct PowProd {
    /// Factors (base, exponent); bases strictly positive, list unsorted.
    factors: Vec<(Q, Q)>,
}

impl PowProd {
    pub fn one() -> Self {
        PowProd { factors: Vec::new() }
    }

    /// The rational x as a product (x > 0).
    pub fn from_q(x: &Q) -> Self {
        assert!(x.is_positive(), "PowProd bases must be positive");
        if x.is_one() {
            return Self::one();
        }
        PowProd { factors: vec![(x.clone(), Q::one())] }
    }

    /// base^exp (base > 0).
    pub fn pow_q(base: &Q, exp: &Q) -> Self {
        assert!(base.is_positive(), "PowProd bases must be positive");
        if exp.is_zero() || base.is_one() {
            return Self::one();
        }
        PowProd { factors: vec![(base.clone(), exp.clone())] }
    }

    pub fn mul(&self, other: &PowProd) -> PowProd {
        let mut factors = self.factors.clone();
        for (b, e) in &other.factors {
            if let Some((_, fe)) = factors.iter_mut().find(|(fb, _)| fb == b) {
                *fe += e;
            } else {
                factors.push((b.clone(), e.clone()));
            }
        }
        factors.retain(|(_, e)| !e.is_zero());
        PowProd { factors }
    }

    pub fn mul_q(&self, x: &Q) -> PowProd {
        self.mul(&Self::from_q(x))
    }

    pub fn recip(&self) -> PowProd {
        PowProd {
            factors: self.factors.iter().map(|(b, e)| (b.clone(), -e.clone())).collect(),
        }
    }

    /// self^e.
    pub fn pow(&self, e: &Q) -> PowProd {
        if e.is_zero() {
            return Self::one();
        }
        PowProd {
            factors: self.factors.iter().map(|(b, x)| (b.clone(), x * e)).collect(),
        }
    }

    /// Exact rational value when all exponents are integers.
    pub fn as_rational(&self) -> Option<Q> {
        let mut acc = Q::one();
        for (b, e) in &self.factors {
            if !e.is_integer() {
                return None;
            }
            acc *= super::roots::pow_int(b, &e.to_integer());
        }
        Some(acc)
    }

    /// Exact three-way comparison with another product.
    pub fn cmp_exact(&self, other: &PowProd) -> Ordering {
        let ratio = self.mul(&other.recip());
        ratio.cmp_one()
    }

    /// Exact comparison against a positive rational.
    pub fn cmp_q(&self, x: &Q) -> Ordering {
        self.cmp_exact(&Self::from_q(x))
    }

    /// Sign of log of the product, decided exactly.
    fn cmp_one(&self) -> Ordering {
        if self.factors.is_empty() {
            return Ordering::Equal;
        }
        // lcm of exponent denominators
        let mut l = BigInt::one();
        for (_, e) in &self.factors {
            l = l.lcm(e.denom());
        }
        // Π b^(e*l) as an exact rational, compared to 1.
        let mut acc = Q::one();
        for (b, e) in &self.factors {
            let ie = (e * Q::from_integer(l.clone())).to_integer();
            acc *= super::roots::pow_int(b, &ie);
        }
        acc.cmp(&Q::one())
    }

    /// Certified enclosure of the value at roughly `bits` of precision.
    pub fn eval_interval(&self, bits: u64) -> super::interval::QInterval {
        let mut acc = super::interval::QInterval::point(Q::one());
        for (b, e) in &self.factors {
            acc = acc.mul(&super::roots::pow_interval(b, e, bits));
        }
        acc
    }

    /// Smallest rational known ≥ the value (from the certified enclosure).
    pub fn upper_q(&self, bits: u64) -> Q {
        self.eval_interval(bits).hi
    }

    /// ln of the value (display-grade f64).
    pub fn ln_f64(&self) -> f64 {
        self.factors
            .iter()
            .map(|(b, e)| e.to_f64().unwrap_or(f64::NAN) * ln_f64(b))
            .sum()
    }

    pub fn to_f64(&self) -> f64 {
        self.ln_f64().exp()
    }

    /// Render as a × b^(p/q) × … for reports.
    pub fn describe(&self) -> String {
        if self.factors.is_empty() {
            return "1".to_string();
        }
        self.factors
            .iter()
            .map(|(b, e)| {
                if e.is_one() {
                    format!("{b}")
                } else {
                    format!("{b}^({e})")
                }
            })
            .collect::<Vec<_>>()
            .join(" * ")
    }
}

impl PartialEq for PowProd {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_exact(other) == Ordering::Equal
    }
}
impl Eq for PowProd {}

impl PartialOrd for PowProd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_exact(other))
    }
}
impl Ord for PowProd {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_exact(other)
    }
}
