//! Certified logarithms and the closed-form scalar type for dimension
//! formulas: rational + Σ coefᵢ · log(pᵢ)/log(Cᵢ).
//!
//! Similarity dimensions of equal-ratio fractals are log-ratios
//! s = log p / log(1/c); products and the closed-form bounds combine them
//! linearly with rational coefficients. `LinReal` keeps that structure
//! symbolic: identical symbols cancel exactly (after canonicalizing away
//! common powers, log 4/log 9 *is* log 2/log 3), and the residual ordering
//! decisions fall to certified interval logarithms with escalating
//! precision.

use super::interval::QInterval;
use super::roots::nth_root_floor;
use super::Q;
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Certified bracket of ln(x) for a positive rational, width ~2^(-bits).
pub fn ln_interval(x: &Q, bits: u64) -> QInterval {
    assert!(x.is_positive(), "ln of non-positive rational");
    if x.is_one() {
        return QInterval::point(Q::zero());
    }
    if *x < Q::one() {
        return ln_interval(&x.recip(), bits).neg();
    }
    let p = bits + 64;
    // Range-reduce: x = 2^k * m with m in [1, 2).
    let mut k: i64 = x.numer().bits() as i64 - x.denom().bits() as i64;
    let two = super::qi(2);
    let mut m = x / super::qpow(&two, k);
    while m >= two {
        m /= &two;
        k += 1;
    }
    while m < Q::one() {
        m *= &two;
        k -= 1;
    }
    // ln x = k ln 2 + 2 atanh((m-1)/(m+1)).
    let y = (&m - Q::one()) / (&m + Q::one());
    let mut acc = atanh_interval(&y, p).mul_q(&super::qi(2));
    if k != 0 {
        let extra = 64 - (k.unsigned_abs().leading_zeros() as u64);
        let ln2 = atanh_interval(&super::qq(1, 3), p + extra).mul_q(&super::qi(2));
        acc = acc.add(&ln2.mul_q(&super::qi(k)));
    }
    acc
}

/// atanh on [0, 1/3] by the odd power series in fixed point with directed
/// rounding; the bracket is a theorem.
fn atanh_interval(y: &Q, p: u64) -> QInterval {
    assert!(!y.is_negative() && *y <= super::qq(1, 3));
    if y.is_zero() {
        return QInterval::point(Q::zero());
    }
    let scale: BigUint = BigUint::one() << p;
    let y_lo: BigUint = (y.numer().magnitude() * &scale) / y.denom().magnitude();
    let y_hi: BigUint = &y_lo + BigUint::one();
    let mut pow_lo = y_lo.clone();
    let mut pow_hi = y_hi.clone();
    let mut sum_lo = BigUint::zero();
    let mut sum_hi = BigUint::zero();
    let mut j: u64 = 1;
    loop {
        sum_lo += &pow_lo / j;
        sum_hi += (&pow_hi + (j - 1)) / j;
        // advance two powers: y^(j+2)
        pow_lo = (&pow_lo * &y_lo * &y_lo) >> (2 * p);
        pow_hi = ((&pow_hi * &y_hi * &y_hi) >> (2 * p)) + BigUint::one();
        j += 2;
        if pow_hi <= BigUint::from(2u32) {
            // geometric tail ≤ y^j / (1 - y²) ≤ (pow_hi/2^p) * 9/8 < 3/2^p
            sum_hi += BigUint::from(3u32);
            break;
        }
    }
    let den = BigInt::from(scale);
    QInterval::new(
        Q::new(BigInt::from(sum_lo), den.clone()),
        Q::new(BigInt::from(sum_hi), den),
    )
}

/// Canonical symbol for log(p)/log(c_num/c_den) with p ≥ 2 integer and
/// c_num/c_den > 1 reduced; both stripped of common perfect powers so that
/// structurally equal symbols are exactly the value-equal ones (up to the
/// rational multiple returned by `canonicalize`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LogSym {
    pub p: BigInt,
    pub c_num: BigInt,
    pub c_den: BigInt,
}

impl LogSym {
    /// Certified bracket of the symbol's value at the given precision.
    fn eval(&self, bits: u64) -> QInterval {
        let num = ln_interval(&Q::from_integer(self.p.clone()), bits);
        let den = ln_interval(&Q::new(self.c_num.clone(), self.c_den.clone()), bits);
        num.mul(&den.recip())
    }

    fn to_f64(&self) -> f64 {
        super::ln_f64(&Q::from_integer(self.p.clone()))
            / super::ln_f64(&Q::new(self.c_num.clone(), self.c_den.clone()))
    }
}

/// Strip the largest perfect power: n = b^k with k maximal, return (b, k).
fn primitive_root(n: &BigUint) -> (BigUint, u64) {
    if n <= &BigUint::one() {
        return (n.clone(), 1);
    }
    let bits = n.bits();
    for k in (2..=bits).rev() {
        let r = nth_root_floor(n, k as u32);
        if r.pow(k as u32) == *n {
            let (b, k2) = primitive_root(&r);
            return (b, k2 * k);
        }
    }
    (n.clone(), 1)
}

/// Express log(p)/log(C) (p ≥ 2 integer, C > 1 rational) as coef · symbol,
/// with `None` symbol when the value is rational.
pub fn canonicalize_log_ratio(p: &BigUint, c_big: &Q) -> (Q, Option<LogSym>) {
    assert!(*c_big > Q::one() && p >= &BigUint::from(2u32));
    let (p0, a) = primitive_root(p);
    let (n0, alpha) = primitive_root(c_big.numer().magnitude());
    if c_big.denom().is_one() {
        if p0 == n0 {
            // log(p0^a)/log(p0^alpha) = a/alpha
            return (super::qq(a as i64, alpha as i64), None);
        }
        return (
            super::qq(a as i64, alpha as i64),
            Some(LogSym {
                p: BigInt::from(p0),
                c_num: BigInt::from(n0),
                c_den: BigInt::one(),
            }),
        );
    }
    let (d0, beta) = primitive_root(c_big.denom().magnitude());
    let k = alpha.gcd(&beta);
    let c1_num = n0.pow((alpha / k) as u32);
    let c1_den = d0.pow((beta / k) as u32);
    (
        super::qq(a as i64, k as i64),
        Some(LogSym {
            p: BigInt::from(p0),
            c_num: BigInt::from(c1_num),
            c_den: BigInt::from(c1_den),
        }),
    )
}

/// rational + Σ coef · LogSym, with exact structural arithmetic and
/// certified ordering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinReal {
    pub rat: Q,
    pub terms: BTreeMap<LogSym, Q>,
}

impl LinReal {
    pub fn zero() -> Self {
        LinReal { rat: Q::zero(), terms: BTreeMap::new() }
    }

    pub fn from_q(x: Q) -> Self {
        LinReal { rat: x, terms: BTreeMap::new() }
    }

    /// log(p)/log(1/c) for integer p ≥ 2 and contraction ratio c ∈ (0,1) —
    /// the similarity dimension of an equal-ratio IFS on the line.
    pub fn log_ratio(p: u64, c: &Q) -> Self {
        assert!(c.is_positive() && *c < Q::one(), "ratio must be in (0,1)");
        let c_big = c.recip();
        let (coef, sym) = canonicalize_log_ratio(&BigUint::from(p), &c_big);
        match sym {
            None => LinReal::from_q(coef),
            Some(s) => {
                let mut terms = BTreeMap::new();
                terms.insert(s, coef);
                LinReal { rat: Q::zero(), terms }
            }
        }
    }

    pub fn is_rational(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &LinReal) -> LinReal {
        let mut out = self.clone();
        out.rat += &other.rat;
        for (s, c) in &other.terms {
            let e = out.terms.entry(s.clone()).or_insert_with(Q::zero);
            *e += c;
        }
        out.terms.retain(|_, c| !c.is_zero());
        out
    }

    pub fn neg(&self) -> LinReal {
        LinReal {
            rat: -self.rat.clone(),
            terms: self.terms.iter().map(|(s, c)| (s.clone(), -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &LinReal) -> LinReal {
        self.add(&other.neg())
    }

    pub fn mul_q(&self, x: &Q) -> LinReal {
        if x.is_zero() {
            return LinReal::zero();
        }
        LinReal {
            rat: &self.rat * x,
            terms: self.terms.iter().map(|(s, c)| (s.clone(), c * x)).collect(),
        }
    }

    /// Certified bracket at the given precision.
    pub fn eval_interval(&self, bits: u64) -> QInterval {
        let mut acc = QInterval::point(self.rat.clone());
        for (s, c) in &self.terms {
            acc = acc.add(&s.eval(bits).mul_q(c));
        }
        acc
    }

    /// Ordering by certified evaluation with precision escalation. Values
    /// structurally different but within 2^-1024 of each other compare Equal
    /// (selection among such values is indifferent at that scale); exact
    /// equality of formulas is `==` on the struct.
    pub fn cmp_certified(&self, other: &LinReal) -> Ordering {
        let diff = self.sub(other);
        if diff.terms.is_empty() {
            return diff.rat.cmp(&Q::zero());
        }
        for bits in [96u64, 192, 384, 768, 1024] {
            let iv = diff.eval_interval(bits);
            if iv.lo.is_positive() {
                return Ordering::Greater;
            }
            if iv.hi.is_negative() {
                return Ordering::Less;
            }
        }
        Ordering::Equal
    }

    pub fn min(self, other: LinReal) -> LinReal {
        if self.cmp_certified(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: LinReal) -> LinReal {
        if self.cmp_certified(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn is_negative_certified(&self) -> bool {
        self.cmp_certified(&LinReal::zero()) == Ordering::Less
    }

    pub fn to_f64(&self) -> f64 {
        let mut acc = self.rat.to_f64().unwrap_or(f64::NAN);
        for (s, c) in &self.terms {
            acc += c.to_f64().unwrap_or(f64::NAN) * s.to_f64();
        }
        acc
    }

    /// Decimal rendering with the given number of fractional digits,
    /// correctly rounded from a certified bracket.
    pub fn decimal_string(&self, digits: u32) -> String {
        let bits = (digits as u64) * 4 + 96;
        let iv = self.eval_interval(bits);
        let mid = (&iv.lo + &iv.hi) / super::qi(2);
        let neg = mid.is_negative();
        let mut m = mid.abs();
        let ip = m.floor();
        let mut s = String::new();
        if neg {
            s.push('-');
        }
        s.push_str(&ip.to_integer().to_string());
        s.push('.');
        m -= &ip;
        let ten = super::qi(10);
        for _ in 0..digits {
            m *= &ten;
            let d = m.floor();
            s.push_str(&d.to_integer().to_string());
            m -= &d;
        }
        s
    }

    /// Human-readable closed form.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if !self.rat.is_zero() || self.terms.is_empty() {
            parts.push(format!("{}", self.rat));
        }
        for (s, c) in &self.terms {
            let base = if s.c_den.is_one() {
                format!("log({})/log({})", s.p, s.c_num)
            } else {
                format!("log({})/log({}/{})", s.p, s.c_num, s.c_den)
            };
            if c.is_one() {
                parts.push(base);
            } else {
                parts.push(format!("({c})*{base}"));
            }
        }
        parts.join(" + ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qi, qq};

    #[test]
    fn ln_bracket_tightness() {
        let iv = ln_interval(&qi(2), 128);
        assert!(iv.width() < qq(1, i64::MAX));
        let v = iv.to_f64();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        // huge argument: ln(3^200)
        let big = crate::exact::qpow(&qi(3), 200);
        let iv = ln_interval(&big, 64);
        let expect = 200.0 * 3f64.ln();
        assert!((iv.to_f64() - expect).abs() < 1e-9);
    }

    #[test]
    fn log_symbols_canonicalize() {
        // log4/log9 == log2/log3
        let a = LinReal::log_ratio(4, &qq(1, 9));
        let b = LinReal::log_ratio(2, &qq(1, 3));
        assert_eq!(a, b);
        // log8/log27 == log2/log3 as well (coef 3/3 folds)
        let c = LinReal::log_ratio(8, &qq(1, 27));
        assert_eq!(c, b);
        // log4/log8 is rational 2/3
        let d = LinReal::log_ratio(4, &qq(1, 8));
        assert!(d.is_rational());
        assert_eq!(d.rat, qq(2, 3));
    }

    #[test]
    fn certified_ordering() {
        let s = LinReal::log_ratio(2, &qq(1, 3)); // ≈ 0.6309
        assert_eq!(s.cmp_certified(&LinReal::from_q(qq(63, 100))), Ordering::Greater);
        assert_eq!(s.cmp_certified(&LinReal::from_q(qq(64, 100))), Ordering::Less);
        let twice = s.add(&s);
        assert_eq!(twice.cmp_certified(&s), Ordering::Greater);
        assert_eq!(twice.sub(&s), s);
    }

    #[test]
    fn decimal_display() {
        let s = LinReal::log_ratio(2, &qq(1, 3));
        let d = s.decimal_string(12);
        assert_eq!(d, "0.630929753571");
    }
}
