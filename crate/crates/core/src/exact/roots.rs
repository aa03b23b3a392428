//! Certified fractional powers of positive rationals. The q-th root of a
//! rational is bracketed between two rationals with denominator 2^bits via an
//! integer Newton iteration; everything downstream consumes the bracket, so
//! no rounding direction is ever implicit.

use super::interval::QInterval;
use super::Q;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// floor(x^(1/n)) for a nonnegative big integer, n ≥ 1.
pub fn nth_root_floor(x: &BigUint, n: u32) -> BigUint {
    assert!(n >= 1);
    if x.is_zero() || x.is_one() || n == 1 {
        return x.clone();
    }
    // Newton from a safe overestimate: 2^ceil(bits/n).
    let bits = x.bits();
    let shift = bits.div_ceil(n as u64);
    let mut guess: BigUint = BigUint::one() << shift;
    let n_big = BigUint::from(n);
    let n1 = BigUint::from(n - 1);
    loop {
        // next = ((n-1)*guess + x / guess^(n-1)) / n
        let gp = guess.pow(n - 1);
        let next = (&n1 * &guess + x / gp) / &n_big;
        if next >= guess {
            break;
        }
        guess = next;
    }
    // Newton can stop one too high when x+1 is a perfect power; correct down.
    while guess.pow(n) > *x {
        guess -= BigUint::one();
    }
    guess
}

/// Certified bracket for x^(1/n), x > 0 rational, width ≤ 2^(1-bits).
pub fn nth_root_interval(x: &Q, n: u32, bits: u64) -> QInterval {
    assert!(x.is_positive(), "root of non-positive rational");
    if n == 1 {
        return QInterval::point(x.clone());
    }
    // x * 2^(n*bits) = N + frac; m = floor(N^(1/n)) gives
    // m/2^bits ≤ x^(1/n) < (m+2)/2^bits.
    let num = x.numer().magnitude() << (n as u64 * bits);
    let den = x.denom().magnitude();
    let big_n = &num / den;
    let m = nth_root_floor(&big_n, n);
    let scale = BigInt::one() << bits;
    let lo = Q::new(BigInt::from(m.clone()), scale.clone());
    let hi = Q::new(BigInt::from(m + BigUint::from(2u32)), scale);
    QInterval::new(lo, hi)
}

/// Certified bracket for x^e with x > 0 rational and e rational of either
/// sign. Exact (zero-width) when e is an integer.
pub fn pow_interval(x: &Q, e: &Q, bits: u64) -> QInterval {
    assert!(x.is_positive(), "power of non-positive rational");
    if e.is_zero() {
        return QInterval::point(Q::one());
    }
    let p = e.numer();
    let q = e.denom(); // > 0, reduced
    let q_u32 = q
        .to_u32()
        .expect("exponent denominator exceeds u32 — not a supported weight shape");
    // x^p exactly, then the q-th root bracket.
    let xp = pow_int(x, p);
    if q_u32 == 1 {
        return QInterval::point(xp);
    }
    nth_root_interval(&xp, q_u32, bits)
}

/// x^p for big-integer p of either sign.
pub fn pow_int(x: &Q, p: &BigInt) -> Q {
    let mag = p.magnitude();
    let exp: u32 = mag
        .to_u32()
        .expect("integer exponent exceeds u32 — unexpected weight scale");
    let q = power_u32(x, exp);
    if p.is_negative() {
        q.recip()
    } else {
        q
    }
}

fn power_u32(x: &Q, mut e: u32) -> Q {
    let mut base = x.clone();
    let mut acc = Q::one();
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    acc
}

/// Decide x^(1/n) ≤ y exactly for x ≥ 0, y ≥ 0 rational: cross-power to
/// integer exponents.
pub fn root_le(x: &Q, n: u32, y: &Q) -> bool {
    if x.is_zero() {
        return !y.is_negative();
    }
    if y.is_negative() {
        return false;
    }
    *x <= power_u32(y, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qi, qq};

    #[test]
    fn integer_roots_exact() {
        assert_eq!(nth_root_floor(&BigUint::from(27u32), 3), BigUint::from(3u32));
        assert_eq!(nth_root_floor(&BigUint::from(26u32), 3), BigUint::from(2u32));
        assert_eq!(nth_root_floor(&BigUint::from(1u32 << 20), 2), BigUint::from(1024u32));
        // large perfect power
        let big = BigUint::from(12345u64).pow(7);
        assert_eq!(nth_root_floor(&big, 7), BigUint::from(12345u64));
    }

    #[test]
    fn bracket_contains_truth() {
        // 2^(1/2): bracket at 80 bits must contain sqrt(2) — check by squaring.
        let iv = nth_root_interval(&qi(2), 2, 80);
        assert!(&iv.lo * &iv.lo <= qi(2));
        assert!(&iv.hi * &iv.hi >= qi(2));
        assert!(iv.width() <= qq(1, 1 << 30));
    }

    #[test]
    fn pow_interval_integer_exact() {
        let iv = pow_interval(&qq(3, 2), &qi(3), 64);
        assert_eq!(iv.lo, qq(27, 8));
        assert_eq!(iv.hi, qq(27, 8));
        let iv = pow_interval(&qq(3, 2), &qi(-2), 64);
        assert_eq!(iv.lo, qq(4, 9));
    }
}
