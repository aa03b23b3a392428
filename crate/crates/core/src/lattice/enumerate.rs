//! Certified shortest-vector enumeration over integer coefficient boxes.
//!
//! Completeness argument, used throughout: if z = Bc + v satisfies
//! ‖z‖ ≤ R in the (possibly scaled) sup norm, then c = B⁻¹(z − v), so
//! |c_i| ≤ Σ_j |(B⁻¹)_{ij}|·ub_j + |(B⁻¹v)_i| where ub_j bounds the largest
//! |z_j| compatible with ‖z‖ ≤ R. Exhausting that integer box therefore
//! exhausts every candidate. LLL preprocessing shrinks B⁻¹ but the box bound
//! is always recomputed from the exact reduced basis, so reduction never
//! affects correctness.
//!
//! Scaled variant: the lattice diag(σ)·B·Z^d with σ_i positive closed-form
//! reals (rational powers of rationals). Norms are then max_i σ_i|z_i|,
//! compared exactly as products of rational powers; the integer box works
//! with certified rational upper bounds for the σ_i⁻¹.

use super::reduction::{lll_reduce, to_original_coeffs};
use crate::exact::interval::QInterval;
use crate::exact::linalg::{QMat, QVec};
use crate::exact::powprod::PowProd;
use crate::exact::{qi, Q};
use crate::weights::NormValue;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;

/// Default cap on enumeration box volume (number of integer points).
pub const DEFAULT_BUDGET: u64 = 8_000_000;

/// A shortest (or short) vector: exact norm value, integer coefficients in
/// the caller's basis, and the unscaled ambient vector Bc (+ v).
#[derive(Clone, Debug)]
pub struct ShortVec {
    pub value: NormValue,
    pub coeffs: Vec<BigInt>,
    pub vector: QVec,
}

impl ShortVec {
    /// The norm as an exact rational, when it is one (always, for unscaled
    /// rational lattices).
    pub fn value_q(&self) -> Option<Q> {
        match &self.value {
            NormValue::Zero => Some(Q::zero()),
            NormValue::Pos(p) => p.as_rational(),
        }
    }
}

/// Per-coordinate positive scaling of the ambient space.
#[derive(Clone)]
enum ScaleKind {
    Unit,
    Rat(Vec<Q>),
    Pow(Vec<PowProd>),
}

impl ScaleKind {
    fn build(scale: Option<&[PowProd]>, d: usize) -> Result<ScaleKind> {
        match scale {
            None => Ok(ScaleKind::Unit),
            Some(s) => {
                if s.len() != d {
                    return Err(Error::DimensionMismatch(format!(
                        "scale has {} entries for dimension {d}",
                        s.len()
                    )));
                }
                let rats: Option<Vec<Q>> = s.iter().map(|p| p.as_rational()).collect();
                Ok(match rats {
                    Some(r) => {
                        if r.iter().all(|x| x.is_one()) {
                            ScaleKind::Unit
                        } else {
                            ScaleKind::Rat(r)
                        }
                    }
                    None => ScaleKind::Pow(s.to_vec()),
                })
            }
        }
    }

    /// max_i σ_i |z_i| as an exact norm value.
    fn norm(&self, z: &[Q]) -> NormValue {
        match self {
            ScaleKind::Unit => {
                let m = z.iter().map(|x| x.abs()).max().unwrap_or_else(Q::zero);
                if m.is_zero() {
                    NormValue::Zero
                } else {
                    NormValue::Pos(PowProd::from_q(&m))
                }
            }
            ScaleKind::Rat(s) => {
                let m = z
                    .iter()
                    .zip(s)
                    .map(|(x, si)| x.abs() * si)
                    .max()
                    .unwrap_or_else(Q::zero);
                if m.is_zero() {
                    NormValue::Zero
                } else {
                    NormValue::Pos(PowProd::from_q(&m))
                }
            }
            ScaleKind::Pow(s) => {
                let mut best: Option<PowProd> = None;
                for (x, si) in z.iter().zip(s) {
                    if x.is_zero() {
                        continue;
                    }
                    let cand = si.mul_q(&x.abs());
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
                match best {
                    None => NormValue::Zero,
                    Some(p) => NormValue::Pos(p),
                }
            }
        }
    }

    /// Certified rational upper bound for R/σ_j (largest |z_j| compatible
    /// with a scaled norm ≤ R).
    fn coord_bound(&self, j: usize, r: &Q) -> Q {
        match self {
            ScaleKind::Unit => r.clone(),
            ScaleKind::Rat(s) => r / &s[j],
            ScaleKind::Pow(s) => {
                let inv = s[j].recip().eval_interval(96).hi;
                r * inv
            }
        }
    }

    /// Rational scale approximations for LLL preprocessing (heuristic only).
    fn approx(&self, d: usize) -> Option<Vec<Q>> {
        match self {
            ScaleKind::Unit => None,
            ScaleKind::Rat(s) => Some(s.clone()),
            ScaleKind::Pow(s) => Some(
                (0..d)
                    .map(|j| {
                        let iv = s[j].eval_interval(48);
                        (&iv.lo + &iv.hi) / qi(2)
                    })
                    .collect(),
            ),
        }
    }
}

/// max_i σ_i |z_i| for an optional closed-form scale (σ ≡ 1 when absent).
pub fn scaled_norm(z: &[Q], scale: Option<&[PowProd]>) -> Result<NormValue> {
    let kind = ScaleKind::build(scale, z.len())?;
    Ok(kind.norm(z))
}

/// Certified rational upper bound for a norm value (exact when rational).
fn norm_upper(v: &NormValue) -> Q {
    match v {
        NormValue::Zero => Q::zero(),
        NormValue::Pos(p) => match p.as_rational() {
            Some(r) => r,
            None => p.upper_q(96),
        },
    }
}

struct Search {
    d: usize,
    b_red: QMat,
    transform: Vec<Vec<BigInt>>,
    scale: ScaleKind,
    shift: Option<QVec>,
}

impl Search {
    fn prepare(basis: &QMat, shift: Option<&[Q]>, scale: Option<&[PowProd]>) -> Result<Search> {
        let d = basis.rows;
        if basis.cols != d {
            return Err(Error::DimensionMismatch("lattice basis must be square".into()));
        }
        if let Some(v) = shift {
            if v.len() != d {
                return Err(Error::DimensionMismatch("shift length != dimension".into()));
            }
        }
        let scale = ScaleKind::build(scale, d)?;
        // LLL on the (approximately) scaled basis; exact unscaled reduced basis.
        let reduced = match scale.approx(d) {
            None => lll_reduce(basis),
            Some(s) => {
                let mut scaled = basis.clone();
                for i in 0..d {
                    for j in 0..d {
                        scaled[(i, j)] = &basis[(i, j)] * &s[i];
                    }
                }
                lll_reduce(&scaled)
            }
        };
        let mut u = QMat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                u[(i, j)] = Q::from_integer(reduced.transform[i][j].clone());
            }
        }
        let b_red = basis.mul(&u);
        Ok(Search {
            d,
            b_red,
            transform: reduced.transform,
            scale,
            shift: shift.map(|v| v.to_vec()),
        })
    }

    /// Per-coordinate integer ranges [lo_i, hi_i] guaranteed to contain every
    /// coefficient vector c with ‖scaled(B_red·c + v)‖ ≤ r: from
    /// c = A·z − A·v with A = B_red⁻¹, each |c_i + (Av)_i| is at most
    /// w_i = Σ_j |A_ij|·ub_j, so the box is centered at −Av (at the origin
    /// for homogeneous searches) with half-width w.
    fn box_bounds(&self, r: &Q) -> Result<Vec<(BigInt, BigInt)>> {
        let a = self.b_red.inverse()?;
        let av: Option<QVec> = self.shift.as_ref().map(|v| a.mul_vec(v));
        let mut m = Vec::with_capacity(self.d);
        for i in 0..self.d {
            let mut width = Q::zero();
            for j in 0..self.d {
                let aij = a[(i, j)].abs();
                if !aij.is_zero() {
                    width += aij * self.scale.coord_bound(j, r);
                }
            }
            let center = match &av {
                Some(av) => -av[i].clone(),
                None => Q::zero(),
            };
            let lo = (&center - &width).ceil().to_integer();
            let hi = (&center + &width).floor().to_integer();
            m.push((lo, hi));
        }
        Ok(m)
    }

    /// Symmetric ranges [−M_i, M_i] from half-widths, for callers that build
    /// their own homogeneous box.
    fn symmetric_ranges(m: &[BigInt]) -> Vec<(BigInt, BigInt)> {
        m.iter().map(|x| (-x.clone(), x.clone())).collect()
    }

    fn box_volume(m: &[(BigInt, BigInt)]) -> BigInt {
        m.iter()
            .map(|(lo, hi)| (hi - lo + BigInt::one()).max(BigInt::zero()))
            .product()
    }

    /// Visit every integer point of the box (canonical-sign half when the
    /// search is homogeneous), calling `f(coeffs_in_reduced_basis, vector)`.
    /// The vector includes the shift. The zero grid point (c = 0 on a
    /// homogeneous search) is skipped.
    fn enumerate<F: FnMut(&[BigInt], &[Q])>(&self, m: &[(BigInt, BigInt)], mut f: F) {
        let homogeneous = self.shift.is_none();
        let d = self.d;
        let cols: Vec<QVec> = (0..d).map(|j| self.b_red.col(j)).collect();
        let mut coeffs = vec![BigInt::zero(); d];
        let base = match &self.shift {
            Some(v) => v.clone(),
            None => vec![Q::zero(); d],
        };
        // digit ranges: canonical sign fixes the first nonzero coefficient
        // positive on homogeneous searches; realized by letting the leading
        // free coordinate run only over [0, M] and skipping the all-zero
        // point.
        fn rec<F: FnMut(&[BigInt], &[Q])>(
            level: usize,
            d: usize,
            m: &[(BigInt, BigInt)],
            cols: &[QVec],
            coeffs: &mut Vec<BigInt>,
            z: &QVec,
            leading_zero: bool,
            homogeneous: bool,
            f: &mut F,
        ) {
            if level == d {
                if homogeneous && leading_zero {
                    return; // the zero vector
                }
                f(coeffs, z);
                return;
            }
            let lo = if homogeneous && leading_zero {
                BigInt::zero().max(m[level].0.clone())
            } else {
                m[level].0.clone()
            };
            let mut c = lo.clone();
            // z_start = z + lo * col
            let mut zc: QVec = z
                .iter()
                .zip(cols[level].iter())
                .map(|(zi, bi)| zi + bi * Q::from_integer(lo.clone()))
                .collect();
            while c <= m[level].1 {
                coeffs[level] = c.clone();
                let lz = leading_zero && c.is_zero();
                rec(level + 1, d, m, cols, coeffs, &zc, lz, homogeneous, f);
                c += 1;
                if c <= m[level].1 {
                    for (zi, bi) in zc.iter_mut().zip(cols[level].iter()) {
                        *zi += bi;
                    }
                }
            }
        }
        rec(
            0,
            d,
            m,
            &cols,
            &mut coeffs,
            &base,
            homogeneous,
            homogeneous,
            &mut f,
        );
    }

    fn original_coeffs(&self, c_red: &[BigInt]) -> Vec<BigInt> {
        to_original_coeffs(&self.transform, c_red)
    }
}

/// Exact shortest vector of the (scaled) lattice diag(σ)·(B·Z^d + v).
/// Homogeneous when `shift` is None (the zero vector is excluded); with a
/// shift, every grid point competes (the caller guarantees the canonical
/// shift is nonzero, so the zero vector is not on the grid).
///
/// Returned norm is the scaled norm; `vector` is the unscaled grid point.
pub fn shortest(
    basis: &QMat,
    shift: Option<&[Q]>,
    scale: Option<&[PowProd]>,
    budget: u64,
) -> Result<ShortVec> {
    let search = Search::prepare(basis, shift, scale)?;
    let d = search.d;
    // Initial candidates: ±unit coefficients, plus the pure-shift point.
    let mut best: Option<(NormValue, Vec<BigInt>, QVec)> = None;
    let consider = |c_red: Vec<BigInt>, search: &Search, best: &mut Option<(NormValue, Vec<BigInt>, QVec)>| {
        let mut z = match &search.shift {
            Some(v) => v.clone(),
            None => vec![Q::zero(); d],
        };
        for (j, cj) in c_red.iter().enumerate() {
            if !cj.is_zero() {
                let cq = Q::from_integer(cj.clone());
                for i in 0..d {
                    if !search.b_red[(i, j)].is_zero() {
                        let s = &search.b_red[(i, j)] * &cq;
                        z[i] += s;
                    }
                }
            }
        }
        if search.shift.is_none() && z.iter().all(|x| x.is_zero()) {
            return;
        }
        let n = search.scale.norm(&z);
        let better = match best {
            None => true,
            Some((bn, bc, _)) => match n.cmp(bn) {
                Ordering::Less => true,
                Ordering::Equal => search.original_coeffs(&c_red) < search.original_coeffs(bc),
                Ordering::Greater => false,
            },
        };
        if better {
            *best = Some((n, c_red, z));
        }
    };
    if search.shift.is_some() {
        consider(vec![BigInt::zero(); d], &search, &mut best);
        // Babai rounding: the grid point nearest the shift in coefficient
        // space. With a reduced basis this pins the initial radius near the
        // true affine minimum, keeping the enumeration box small.
        if let Some(v) = &search.shift {
            let av = search.b_red.inverse()?.mul_vec(v);
            let babai: Vec<BigInt> = av.iter().map(|x| (-x).round().to_integer()).collect();
            consider(babai, &search, &mut best);
        }
    }
    for j in 0..d {
        let mut e = vec![BigInt::zero(); d];
        e[j] = BigInt::one();
        consider(e.clone(), &search, &mut best);
        if search.shift.is_some() {
            e[j] = BigInt::from(-1);
            consider(e, &search, &mut best);
        }
    }
    let (r0, _, _) = best.as_ref().expect("initial candidates exist");
    let r_q = norm_upper(r0);
    let m = search.box_bounds(&r_q)?;
    let vol = Search::box_volume(&m);
    if vol > BigInt::from(budget) {
        return Err(Error::Domain(format!(
            "shortest-vector enumeration box of {vol} points exceeds budget {budget}"
        )));
    }
    search.enumerate(&m, |c_red, z| {
        let n = search.scale.norm(z);
        let better = match &best {
            None => true,
            Some((bn, bc, _)) => match n.cmp(bn) {
                Ordering::Less => true,
                Ordering::Equal => {
                    search.original_coeffs(c_red) < search.original_coeffs(bc)
                }
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some((n, c_red.to_vec(), z.to_vec()));
        }
    });
    let (value, c_red, vector) = best.unwrap();
    Ok(ShortVec {
        value,
        coeffs: search.original_coeffs(&c_red),
        vector,
    })
}

/// Does the (scaled, possibly shifted) lattice contain a grid point of norm
/// ≤ eps (strictly < when `strict`)? Exact decision; the box is derived from
/// eps itself, so tiny thresholds are near-free. Returns the first witness in
/// deterministic odometer order, if any.
pub fn exists_below(
    basis: &QMat,
    shift: Option<&[Q]>,
    scale: Option<&[PowProd]>,
    eps: &Q,
    strict: bool,
    budget: u64,
) -> Result<Option<ShortVec>> {
    if eps.is_negative() {
        return Ok(None);
    }
    let search = Search::prepare(basis, shift, scale)?;
    let m = search.box_bounds(eps)?;
    let vol = Search::box_volume(&m);
    if vol > BigInt::from(budget) {
        return Err(Error::Domain(format!(
            "threshold enumeration box of {vol} points exceeds budget {budget}"
        )));
    }
    let mut found: Option<(Vec<BigInt>, QVec)> = None;
    search.enumerate(&m, |c_red, z| {
        if found.is_some() {
            return;
        }
        let n = search.scale.norm(z);
        let ok = match n.cmp_q(eps) {
            Ordering::Less => true,
            Ordering::Equal => !strict,
            Ordering::Greater => false,
        };
        if ok {
            found = Some((c_red.to_vec(), z.to_vec()));
        }
    });
    Ok(found.map(|(c_red, vector)| {
        let value = search.scale.norm(&vector);
        ShortVec {
            value,
            coeffs: search.original_coeffs(&c_red),
            vector,
        }
    }))
}

/// All canonical-sign nonzero coefficient vectors with scaled norm ≤ the
/// threshold, for a homogeneous lattice. Used by the sublattice minimum
/// search, where every short vector matters, not just the shortest.
pub fn all_below(
    basis: &QMat,
    scale: Option<&[PowProd]>,
    threshold: &NormValue,
    budget: u64,
) -> Result<Vec<ShortVec>> {
    let search = Search::prepare(basis, None, scale)?;
    let r_q = norm_upper(threshold);
    let m = search.box_bounds(&r_q)?;
    let vol = Search::box_volume(&m);
    if vol > BigInt::from(budget) {
        return Err(Error::Domain(format!(
            "short-vector sweep box of {vol} points exceeds budget {budget}"
        )));
    }
    let mut out = Vec::new();
    search.enumerate(&m, |c_red, z| {
        let n = search.scale.norm(z);
        if n.cmp(threshold) != Ordering::Greater {
            out.push(ShortVec {
                value: n,
                coeffs: search.original_coeffs(c_red),
                vector: z.to_vec(),
            });
        }
    });
    // Deterministic order independent of enumeration internals.
    out.sort_by(|a, b| a.coeffs.cmp(&b.coeffs));
    Ok(out)
}

/// Enclosure of λ₀ for a homogeneous lattice whose basis is known only to
/// finite precision: every matrix B with |B − mid| ≤ rad entrywise has
/// λ₀(B·Z^d) ∈ [lo, hi]. The lower end is 0 with `lower_certified = false`
/// when the uncertainty is too large for the coefficient box to close up
/// (then only the upper end is meaningful).
#[derive(Clone, Debug)]
pub struct Enclosure {
    pub lo: Q,
    pub hi: Q,
    pub lower_certified: bool,
    pub witness: Vec<BigInt>,
}

impl Enclosure {
    /// Three-valued predicate λ₀ ≤ eps: Some(true) certified for every
    /// matrix in the family, Some(false) certified for none, None undecided.
    pub fn le(&self, eps: &Q) -> Option<bool> {
        if self.hi <= *eps {
            Some(true)
        } else if self.lower_certified && self.lo > *eps {
            Some(false)
        } else {
            None
        }
    }
}

pub fn shortest_interval(mid: &QMat, rad: &QMat, budget: u64) -> Result<Enclosure> {
    let d = mid.rows;
    if mid.cols != d || rad.rows != d || rad.cols != d {
        return Err(Error::DimensionMismatch("interval basis must be square".into()));
    }
    // Reduce the midpoint; transport the radius through |U|.
    let red = lll_reduce(mid);
    let mut u = QMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            u[(i, j)] = Q::from_integer(red.transform[i][j].clone());
        }
    }
    let mid_red = mid.mul(&u);
    let mut rad_red = QMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut s = Q::zero();
            for k in 0..d {
                s += rad[(i, k)].abs() * u[(k, j)].abs();
            }
            rad_red[(i, j)] = s;
        }
    }
    let a = mid_red.inverse()?;
    // ρ_k = Σ_j rad_kj ; γ_i = Σ_k |A_ik| ρ_k
    let rho: Vec<Q> = (0..d)
        .map(|k| (0..d).map(|j| rad_red[(k, j)].clone()).fold(Q::zero(), |s, t| s + t))
        .collect();
    let gamma: Vec<Q> = (0..d)
        .map(|i| {
            (0..d)
                .map(|k| a[(i, k)].abs() * &rho[k])
                .fold(Q::zero(), |s, t| s + t)
        })
        .collect();
    let norm_iv = |c: &[BigInt]| -> QInterval {
        let mut best = QInterval::point(Q::zero());
        for k in 0..d {
            let mut center = Q::zero();
            let mut radius = Q::zero();
            for (j, cj) in c.iter().enumerate() {
                if cj.is_zero() {
                    continue;
                }
                let cq = Q::from_integer(cj.clone());
                center += &mid_red[(k, j)] * &cq;
                radius += &rad_red[(k, j)] * cq.abs();
            }
            let iv = QInterval::centered(center, radius).abs();
            best = best.max(&iv);
        }
        best
    };
    // Initial candidates: unit coefficients.
    let mut r = None::<Q>;
    for j in 0..d {
        let mut e = vec![BigInt::zero(); d];
        e[j] = BigInt::one();
        let hi = norm_iv(&e).hi;
        r = Some(match r {
            None => hi,
            Some(x) => x.min(hi),
        });
    }
    let r = r.expect("d >= 1");
    let base: Vec<Q> = (0..d)
        .map(|i| {
            (0..d)
                .map(|k| a[(i, k)].abs() * &r)
                .fold(Q::zero(), |s, t| s + t)
        })
        .collect();
    let gamma_max = gamma.iter().cloned().fold(Q::zero(), |s, t| s.max(t));
    let lower_certified = gamma_max < Q::one();
    let m: Vec<BigInt> = if lower_certified {
        let base_max = base.iter().cloned().fold(Q::zero(), |s, t| s.max(t));
        let cbound = base_max / (Q::one() - &gamma_max);
        (0..d)
            .map(|i| (&base[i] + &gamma[i] * &cbound).floor().to_integer())
            .collect()
    } else {
        // Midpoint-only box: the lower end is abandoned, so size the sweep
        // by the midpoint norm alone — any enumerated candidate's interval
        // top is a valid upper end, and an enormous radius must not blow up
        // the box volume.
        let r_mid = (0..d)
            .map(|j| {
                (0..d)
                    .map(|k| mid_red[(k, j)].abs())
                    .fold(Q::zero(), |s, t| s.max(t))
            })
            .min()
            .expect("d >= 1");
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|k| a[(i, k)].abs() * &r_mid)
                    .fold(Q::zero(), |s, t| s + t)
                    .floor()
                    .to_integer()
            })
            .collect()
    };
    let m = Search::symmetric_ranges(&m);
    let vol = Search::box_volume(&m);
    if vol > BigInt::from(budget) {
        return Err(Error::Domain(format!(
            "interval enumeration box of {vol} points exceeds budget {budget}"
        )));
    }
    // enumerate canonical-sign nonzero coefficient vectors
    let mut hi_best: Option<(Q, Vec<BigInt>)> = None;
    let mut lo_best: Option<Q> = None;
    let search = Search {
        d,
        b_red: mid_red.clone(),
        transform: red.transform.clone(),
        scale: ScaleKind::Unit,
        shift: None,
    };
    search.enumerate(&m, |c_red, _z| {
        let iv = norm_iv(c_red);
        let better = match &hi_best {
            None => true,
            Some((h, bc)) => {
                iv.hi < *h || (iv.hi == *h && search.original_coeffs(c_red) < search.original_coeffs(bc))
            }
        };
        if better {
            hi_best = Some((iv.hi.clone(), c_red.to_vec()));
        }
        let lo_clamped = if iv.lo.is_negative() { Q::zero() } else { iv.lo };
        lo_best = Some(match &lo_best {
            None => lo_clamped,
            Some(l) => l.clone().min(lo_clamped),
        });
    });
    let (hi, witness_red) = hi_best.expect("box contains unit vectors");
    let lo = if lower_certified {
        lo_best.unwrap_or_else(Q::zero)
    } else {
        Q::zero()
    };
    Ok(Enclosure {
        lo,
        hi,
        lower_certified,
        witness: to_original_coeffs(&red.transform, &witness_red),
    })
}
