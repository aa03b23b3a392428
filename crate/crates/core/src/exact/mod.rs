//! Exact arithmetic substrate: rational vectors/matrices, integer matrix
//! normal forms, certified n-th roots and logarithms, exact comparison of
//! products of rational powers and of rational log-combinations, and rational
//! interval arithmetic for inputs known only to finite precision.

pub mod interval;
pub mod intmat;
pub mod linalg;
pub mod logreal;
pub mod powprod;
pub mod roots;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Shorthand for the exact scalar used everywhere.
pub type Q = BigRational;

/// Rational from an integer.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Rational n/d.
pub fn qq(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// x^k for integer k of either sign (x != 0 when k < 0).
pub fn qpow(x: &Q, k: i64) -> Q {
    if k == 0 {
        return Q::one();
    }
    let mut base = if k < 0 { x.recip() } else { x.clone() };
    let mut e = k.unsigned_abs();
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

/// Nearest integer to x; exact half ties round toward negative infinity so
/// minimizer searches are deterministic.
pub fn qround(x: &Q) -> BigInt {
    // floor(x + 1/2)
    let shifted = x + Q::new(BigInt::one(), BigInt::from(2));
    shifted.floor().to_integer()
}

/// Fractional part in [0, 1).
pub fn qfrac(x: &Q) -> Q {
    x - x.floor()
}

/// |x|.
pub fn qabs(x: &Q) -> Q {
    x.abs()
}

/// f64 view of a rational that handles huge numerators/denominators by
/// dividing their top 64 bits and rescaling by an exact power of two
/// (~2 ulp; for display and diagnostics, never for decisions).
pub fn q_to_f64(x: &Q) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let num = x.numer().magnitude();
    let den = x.denom().magnitude();
    let ns = (num.bits() as i64 - 63).max(0);
    let ds = (den.bits() as i64 - 63).max(0);
    let n64: u64 = (num >> ns as u64).try_into().expect("top bits fit");
    let d64: u64 = (den >> ds as u64).try_into().expect("top bits fit");
    let e = ns - ds;
    let v = if e.unsigned_abs() > 1100 {
        // far outside f64 range either way
        if e > 0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        (n64 as f64 / d64 as f64) * 2f64.powi(e as i32)
    };
    if x.is_negative() {
        -v
    } else {
        v
    }
}

/// Natural log of a positive rational as f64, safe against overflow of the
/// parts (uses bit lengths). Display-grade accuracy (~1e-14 relative).
pub fn ln_f64(x: &Q) -> f64 {
    assert!(x.is_positive(), "ln_f64 needs a positive rational");
    ln_f64_bigint(x.numer()) - ln_f64_bigint(x.denom())
}

fn ln_f64_bigint(n: &BigInt) -> f64 {
    let n = n.magnitude();
    let bits = n.bits();
    if bits <= 52 {
        let v: u64 = n.try_into().expect("fits");
        return (v as f64).ln();
    }
    // n = mantissa * 2^(bits-53) with 53-bit mantissa.
    let shift = bits - 53;
    let mant: u64 = (n >> shift).try_into().expect("53 bits fit");
    (mant as f64).ln() + (shift as f64) * std::f64::consts::LN_2
}
