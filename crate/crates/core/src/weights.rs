//! Weight systems (a, b), the sup-type quasi-norms they induce, the diagonal
//! flow g_t, the unipotent/translation embeddings, and the weight-exponent
//! profile w_l. Times are canonicalized to t = τ^D (D the common denominator
//! of the weights) so that every t^{a_i}, t^{-b_j} is exactly rational; other
//! times are carried as certified brackets at a stated precision.

use crate::exact::interval::QInterval;
use crate::exact::linalg::{QMat, QVec};
use crate::exact::powprod::PowProd;
use crate::exact::roots::{pow_interval, pow_int};
use crate::exact::{qi, Q};
use crate::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;

/// A weight system: a has m entries, b has n entries, both positive,
/// nonincreasing, each summing to exactly 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weights {
    pub m: usize,
    pub n: usize,
    pub a: Vec<Q>,
    pub b: Vec<Q>,
}

impl Weights {
    pub fn new(a: Vec<Q>, b: Vec<Q>) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidWeights("need m ≥ 1 and n ≥ 1".into()));
        }
        for (name, v) in [("a", &a), ("b", &b)] {
            let mut sum = Q::zero();
            for w in v.iter() {
                if !w.is_positive() {
                    return Err(Error::InvalidWeights(format!("{name} has a nonpositive entry")));
                }
                sum += w;
            }
            if !sum.is_one() {
                return Err(Error::InvalidWeights(format!("{name} entries sum to {sum}, not 1")));
            }
            if v.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::InvalidWeights(format!("{name} entries must be nonincreasing")));
            }
        }
        Ok(Weights { m: a.len(), n: b.len(), a, b })
    }

    /// Equal weights a = (1/m,…), b = (1/n,…).
    pub fn equal(m: usize, n: usize) -> Self {
        let a = vec![Q::new(BigInt::one(), BigInt::from(m)); m];
        let b = vec![Q::new(BigInt::one(), BigInt::from(n)); n];
        Weights::new(a, b).expect("equal weights are valid")
    }

    pub fn d(&self) -> usize {
        self.m + self.n
    }

    /// Least positive D with every D·a_i, D·b_j integral.
    pub fn common_denominator(&self) -> BigInt {
        let mut l = BigInt::one();
        for w in self.a.iter().chain(self.b.iter()) {
            l = l.lcm(w.denom());
        }
        l
    }

    /// Exponent of the flow on coordinate i (0-based): a_i on the first m,
    /// −b_{i−m} on the rest.
    pub fn flow_exponents(&self) -> Vec<Q> {
        self.a
            .iter()
            .cloned()
            .chain(self.b.iter().map(|x| -x.clone()))
            .collect()
    }

    /// `m=2 n=1 a=1/2,1/2 b=1`
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = None;
        let mut n = None;
        let mut a = None;
        let mut b = None;
        for tok in text.split_whitespace() {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{tok}`")))?;
            match key {
                "m" => m = Some(parse_usize(val)?),
                "n" => n = Some(parse_usize(val)?),
                "a" => a = Some(parse_q_list(val)?),
                "b" => b = Some(parse_q_list(val)?),
                _ => return Err(Error::Parse(format!("unknown key `{key}` in weights"))),
            }
        }
        let a = a.ok_or_else(|| Error::Parse("weights missing a=".into()))?;
        let b = b.ok_or_else(|| Error::Parse("weights missing b=".into()))?;
        if let Some(m) = m {
            if m != a.len() {
                return Err(Error::Parse(format!("m={m} but a has {} entries", a.len())));
            }
        }
        if let Some(n) = n {
            if n != b.len() {
                return Err(Error::Parse(format!("n={n} but b has {} entries", b.len())));
            }
        }
        Weights::new(a, b)
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[Q]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "m={} n={} a={} b={}", self.m, self.n, list(&self.a), list(&self.b))
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|_| Error::Parse(format!("bad integer `{s}`")))
}

/// `p/q` or plain integer, comma-separated lists.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
        let d: BigInt = den.trim().parse().map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        Ok(Q::new(n, d))
    } else if let Some(rest) = s.strip_prefix('.') {
        parse_decimal("0", rest)
    } else if let Some((ip, fp)) = s.split_once('.') {
        parse_decimal(ip, fp)
    } else {
        let n: BigInt = s.parse().map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
        Ok(Q::from_integer(n))
    }
}

fn parse_decimal(ip: &str, fp: &str) -> Result<Q> {
    let joined = format!("{ip}{fp}");
    let n: BigInt = joined
        .parse()
        .map_err(|_| Error::Parse(format!("bad decimal `{ip}.{fp}`")))?;
    let den = pow_int(&qi(10), &BigInt::from(fp.len() as u64));
    Ok(Q::from_integer(n) / den)
}

pub fn parse_q_list(s: &str) -> Result<Vec<Q>> {
    s.split(',').map(parse_q).collect()
}

/// The exponent profile w_l, l = 1..d−1: partial sums of the smallest a's
/// (l ≤ m) and of the smallest b's (l ≥ m); both formulas give 1 at l = m.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightExponents {
    w: Vec<Q>,
}

impl WeightExponents {
    /// w_l for l in 1..=d−1.
    pub fn get(&self, l: usize) -> &Q {
        &self.w[l - 1]
    }

    pub fn as_slice(&self) -> &[Q] {
        &self.w
    }
}

pub fn weight_exponents(weights: &Weights) -> WeightExponents {
    let (m, d) = (weights.m, weights.d());
    let mut w = Vec::with_capacity(d - 1);
    for l in 1..d {
        let val = if l <= m {
            // a_m + … + a_{m+1−l}
            weights.a[m - l..].iter().fold(Q::zero(), |s, x| s + x)
        } else {
            // b_n + … + b_{l−m+1}
            weights.b[l - m..].iter().fold(Q::zero(), |s, x| s + x)
        };
        w.push(val);
    }
    WeightExponents { w }
}

/// Value of a quasi-norm: either exactly zero or a closed-form positive real
/// max_i |x_i|^(1/w_i), kept exact for comparisons.
#[derive(Clone, Debug)]
pub enum NormValue {
    Zero,
    Pos(PowProd),
}

impl NormValue {
    pub fn is_zero(&self) -> bool {
        matches!(self, NormValue::Zero)
    }

    pub fn cmp_q(&self, bound: &Q) -> Ordering {
        match self {
            NormValue::Zero => Q::zero().cmp(bound),
            NormValue::Pos(p) => {
                if !bound.is_positive() {
                    Ordering::Greater
                } else {
                    p.cmp_q(bound)
                }
            }
        }
    }

    pub fn cmp(&self, other: &NormValue) -> Ordering {
        match (self, other) {
            (NormValue::Zero, NormValue::Zero) => Ordering::Equal,
            (NormValue::Zero, NormValue::Pos(_)) => Ordering::Less,
            (NormValue::Pos(_), NormValue::Zero) => Ordering::Greater,
            (NormValue::Pos(a), NormValue::Pos(b)) => a.cmp_exact(b),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            NormValue::Zero => 0.0,
            NormValue::Pos(p) => p.to_f64(),
        }
    }

    /// ln of the value; −∞ for zero.
    pub fn ln_f64(&self) -> f64 {
        match self {
            NormValue::Zero => f64::NEG_INFINITY,
            NormValue::Pos(p) => p.ln_f64(),
        }
    }
}

/// ‖x‖_w = max_i |x_i|^(1/w_i), exact.
pub fn quasi_norm(x: &[Q], w: &[Q]) -> Result<NormValue> {
    if x.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "vector has {} coordinates, weights {}",
            x.len(),
            w.len()
        )));
    }
    let mut best: Option<PowProd> = None;
    for (xi, wi) in x.iter().zip(w.iter()) {
        if !wi.is_positive() {
            return Err(Error::InvalidWeights("quasi-norm weight must be positive".into()));
        }
        if xi.is_zero() {
            continue;
        }
        let cand = PowProd::pow_q(&xi.abs(), &wi.recip());
        best = Some(match best {
            None => cand,
            Some(b) => {
                if cand.cmp_exact(&b) == Ordering::Greater {
                    cand
                } else {
                    b
                }
            }
        });
    }
    Ok(match best {
        None => NormValue::Zero,
        Some(p) => NormValue::Pos(p),
    })
}

/// Exact test ‖x‖_w ≤ bound, done per coordinate by cross-powering:
/// |x_i|^(1/w_i) ≤ B  ⇔  |x_i|^(q_i) ≤ B^(p_i)  for w_i = p_i/q_i.
pub fn quasi_norm_le(x: &[Q], w: &[Q], bound: &Q) -> bool {
    debug_assert_eq!(x.len(), w.len());
    if bound.is_negative() {
        return false;
    }
    x.iter().zip(w.iter()).all(|(xi, wi)| {
        let p = wi.numer();
        let q = wi.denom();
        let lhs = pow_int(&xi.abs(), &q.clone());
        let rhs = pow_int(bound, &p.clone());
        lhs <= rhs
    })
}

/// Strict variant ‖x‖_w < bound.
pub fn quasi_norm_lt(x: &[Q], w: &[Q], bound: &Q) -> bool {
    debug_assert_eq!(x.len(), w.len());
    if !bound.is_positive() {
        return false;
    }
    x.iter().zip(w.iter()).all(|(xi, wi)| {
        let lhs = pow_int(&xi.abs(), &wi.denom().clone());
        let rhs = pow_int(bound, &wi.numer().clone());
        lhs < rhs
    })
}

/// A flow time: either the exact grid point t = τ^D (every t^{a_i} rational)
/// or a positive rational treated as a real with certified bracket entries at
/// `prec_bits` precision.
#[derive(Clone, Debug)]
pub enum FlowTime {
    Exact { tau: Q },
    Approx { value: Q, prec_bits: u64 },
}

impl FlowTime {
    pub fn exact(tau: Q) -> Result<Self> {
        if !tau.is_positive() {
            return Err(Error::Domain("flow base must be positive".into()));
        }
        Ok(FlowTime::Exact { tau })
    }

    /// The grid base τ, for flows that require every power to be rational.
    pub fn tau_exact(&self) -> Result<Q> {
        match self {
            FlowTime::Exact { tau } => Ok(tau.clone()),
            FlowTime::Approx { .. } => Err(Error::Domain(
                "this operation needs an exact flow grid (t = τ^D)".into(),
            )),
        }
    }

    /// The represented time as a bracket (exact kind: a point).
    pub fn value_interval(&self, weights: &Weights) -> QInterval {
        match self {
            FlowTime::Exact { tau } => {
                let d = weights.common_denominator();
                QInterval::point(pow_int(tau, &d))
            }
            FlowTime::Approx { value, .. } => QInterval::point(value.clone()),
        }
    }
}

/// Diagonal of g_t for the exact grid: t = τ^D, extra integer power k
/// (t^k along a trajectory); entry i is τ^(D·e_i·k) with e_i the flow
/// exponent — an exact rational.
pub fn flow_diag_exact(weights: &Weights, tau: &Q, k: i64) -> Vec<Q> {
    let d_den = weights.common_denominator();
    weights
        .flow_exponents()
        .iter()
        .map(|e| {
            let ie = (e * Q::from_integer(d_den.clone()) * qi(k)).to_integer();
            pow_int(tau, &ie)
        })
        .collect()
}

/// Diagonal of g_t for arbitrary rational t as certified brackets.
pub fn flow_diag_interval(weights: &Weights, t: &Q, prec_bits: u64) -> Vec<QInterval> {
    weights
        .flow_exponents()
        .iter()
        .map(|e| pow_interval(t, e, prec_bits))
        .collect()
}

/// g_t as a matrix on the exact grid.
pub fn flow_matrix_exact(weights: &Weights, tau: &Q, k: i64) -> QMat {
    let diag = flow_diag_exact(weights, tau, k);
    let mut g = QMat::zeros(diag.len(), diag.len());
    for (i, v) in diag.into_iter().enumerate() {
        g[(i, i)] = v;
    }
    g
}

/// u(θ) = [[I_m, θ],[0, I_n]] for an m×n parameter block.
pub fn unipotent(weights: &Weights, theta: &QMat) -> Result<QMat> {
    let (m, n, d) = (weights.m, weights.n, weights.d());
    if theta.rows != m || theta.cols != n {
        return Err(Error::DimensionMismatch(format!(
            "θ must be {m}×{n}, got {}×{}",
            theta.rows, theta.cols
        )));
    }
    let mut u = QMat::identity(d);
    for i in 0..m {
        for j in 0..n {
            u[(i, m + j)] = theta[(i, j)].clone();
        }
    }
    Ok(u)
}

/// v(ξ) = (ξ, 0) ∈ ℝ^d for ξ ∈ ℝ^m.
pub fn translation_vector(weights: &Weights, xi: &[Q]) -> Result<QVec> {
    if xi.len() != weights.m {
        return Err(Error::DimensionMismatch(format!(
            "ξ must have {} coordinates, got {}",
            weights.m,
            xi.len()
        )));
    }
    let mut v = xi.to_vec();
    v.resize(weights.d(), Q::zero());
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::qq;

    #[test]
    fn parse_roundtrip_and_validation() {
        let w = Weights::parse("m=2 n=1 a=1/2,1/2 b=1").unwrap();
        assert_eq!(w.m, 2);
        assert_eq!(w.n, 1);
        assert_eq!(w.common_denominator(), BigInt::from(2));
        assert_eq!(Weights::parse(&w.to_string()).unwrap(), w);
        assert!(Weights::parse("a=1/2,1/3 b=1").is_err()); // sum ≠ 1
        assert!(Weights::parse("a=1/3,2/3 b=1").is_err()); // increasing
        assert!(Weights::new(vec![qi(1)], vec![qi(0), qi(1)]).is_err()); // nonpositive
    }

    #[test]
    fn quasi_norm_examples() {
        // max{(1/4)^2, (1/9)^2} = 1/16
        let v = quasi_norm(&[qq(1, 4), qq(1, 9)], &[qq(1, 2), qq(1, 2)]).unwrap();
        assert_eq!(v.cmp_q(&qq(1, 16)), Ordering::Equal);
        // zero vector
        let z = quasi_norm(&[qi(0), qi(0)], &[qq(1, 2), qq(1, 2)]).unwrap();
        assert!(z.is_zero());
        // max{(1/2)^(3/2), (1/8)^3} = 2^(−3/2): compare exactly by squaring
        let v = quasi_norm(&[qq(1, 2), qq(1, 8)], &[qq(2, 3), qq(1, 3)]).unwrap();
        match v {
            NormValue::Pos(p) => {
                let squared = p.pow(&qi(2));
                assert_eq!(squared.cmp_q(&qq(1, 8)), Ordering::Equal);
            }
            NormValue::Zero => panic!("nonzero input"),
        }
        // float oracle at 1e-12
        let v = quasi_norm(&[qq(1, 2), qq(1, 8)], &[qq(2, 3), qq(1, 3)]).unwrap();
        assert!((v.to_f64() - 2f64.powf(-1.5)).abs() < 1e-12);
    }

    #[test]
    fn quasi_norm_scaling_law() {
        // ‖t^w ⊙ x‖_w = t‖x‖_w, checked exactly on rationals via the
        // predicate form: scale each coordinate by t^(w_i) with t = 9/4,
        // w = (2/3, 1/3) — t^w rational only for suitable t; use t = u^3.
        let w = [qq(2, 3), qq(1, 3)];
        let t = qq(8, 27); // u = 2/3, t = u³ so t^(2/3) = 4/9, t^(1/3) = 2/3
        let x = [qq(3, 5), qq(-7, 11)];
        let scaled = [&x[0] * qq(4, 9), &x[1] * qq(2, 3)];
        let lhs = quasi_norm(&scaled, &w).unwrap();
        let rhs = match quasi_norm(&x, &w).unwrap() {
            NormValue::Pos(p) => p.mul_q(&t),
            NormValue::Zero => unreachable!(),
        };
        match lhs {
            NormValue::Pos(p) => assert_eq!(p.cmp_exact(&rhs), Ordering::Equal),
            NormValue::Zero => panic!(),
        }
    }

    #[test]
    fn cross_powered_threshold_tests() {
        let w = [qq(1, 2), qq(1, 2)];
        // ‖(1/4,1/9)‖ = 1/16 exactly
        assert!(quasi_norm_le(&[qq(1, 4), qq(1, 9)], &w, &qq(1, 16)));
        assert!(!quasi_norm_lt(&[qq(1, 4), qq(1, 9)], &w, &qq(1, 16)));
        assert!(!quasi_norm_le(&[qq(1, 4), qq(1, 9)], &w, &qq(1, 17)));
    }

    #[test]
    fn flow_matrix_examples() {
        let w = Weights::equal(1, 1);
        let g = flow_diag_exact(&w, &qi(4), 1); // D = 1, t = 4
        assert_eq!(g, vec![qi(4), qq(1, 4)]);
        // identity at t = 1
        let g = flow_diag_exact(&w, &qi(1), 1);
        assert_eq!(g, vec![qi(1), qi(1)]);
        // a = (1/2,1/2), b = (1), τ = 2, D = 2, t = 4 → diag(2,2,1/4)
        let w = Weights::parse("a=1/2,1/2 b=1").unwrap();
        let g = flow_diag_exact(&w, &qi(2), 1);
        assert_eq!(g, vec![qi(2), qi(2), qq(1, 4)]);
        let det: Q = g.iter().product();
        assert!(det.is_one());
        // group law: flow(k=2) = flow(k=1)² entrywise
        let g1 = flow_diag_exact(&w, &qi(2), 1);
        let g2 = flow_diag_exact(&w, &qi(2), 2);
        for (x, y) in g1.iter().zip(g2.iter()) {
            assert_eq!(&(x * x), y);
        }
    }

    #[test]
    fn flow_interval_brackets_truth() {
        // t = 3, a_1 = 1/2: bracket must contain √3.
        let w = Weights::parse("a=1/2,1/2 b=1").unwrap();
        let diag = flow_diag_interval(&w, &qi(3), 128);
        assert!(&diag[0].lo * &diag[0].lo <= qi(3));
        assert!(&diag[0].hi * &diag[0].hi >= qi(3));
    }

    #[test]
    fn unipotent_shape_and_group_law() {
        let w = Weights::equal(1, 1);
        let mut th = QMat::zeros(1, 1);
        th[(0, 0)] = qq(5, 7);
        let u = unipotent(&w, &th).unwrap();
        assert_eq!(u[(0, 1)], qq(5, 7));
        // u(θ1)u(θ2) = u(θ1+θ2)
        let mut th2 = QMat::zeros(1, 1);
        th2[(0, 0)] = qq(1, 3);
        let u2 = unipotent(&w, &th2).unwrap();
        let mut sum = QMat::zeros(1, 1);
        sum[(0, 0)] = qq(5, 7) + qq(1, 3);
        assert_eq!(u.mul(&u2), unipotent(&w, &sum).unwrap());
        // v(ξ) pads with zeros
        let v = translation_vector(&w, &[qq(1, 2)]).unwrap();
        assert_eq!(v, vec![qq(1, 2), qi(0)]);
    }

    #[test]
    fn weight_exponent_profiles() {
        // a=(1/2,1/2), b=(1/3,1/3,1/3) → w=(1/2, 1, 2/3, 1/3)
        let w = Weights::parse("a=1/2,1/2 b=1/3,1/3,1/3").unwrap();
        let we = weight_exponents(&w);
        assert_eq!(we.as_slice(), &[qq(1, 2), qi(1), qq(2, 3), qq(1, 3)]);
        // m=n=1 → single value 1
        let we = weight_exponents(&Weights::equal(1, 1));
        assert_eq!(we.as_slice(), &[qi(1)]);
        // equal weights: w_l = l/m (l ≤ m), (d−l)/n (l ≥ m)
        for (m, n) in [(2usize, 2usize), (3, 2), (2, 3), (4, 3)] {
            let w = Weights::equal(m, n);
            let we = weight_exponents(&w);
            for l in 1..m + n {
                let expect = if l <= m {
                    Q::new(BigInt::from(l), BigInt::from(m))
                } else {
                    Q::new(BigInt::from(m + n - l), BigInt::from(n))
                };
                assert_eq!(we.get(l), &expect, "l={l} m={m} n={n}");
            }
        }
    }
}
