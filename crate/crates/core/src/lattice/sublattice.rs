//! Minimal covolumes of primitive rank-l subgroups, found by exhaustive
//! enumeration in the exterior power: a primitive rank-l subgroup of Z^d
//! corresponds (up to sign) to a decomposable content-1 element of Λ^l Z^d,
//! and its covolume inside the lattice B·Z^d is the scaled sup norm of
//! (∧^l B)·ξ. Enumerating every exterior coefficient vector up to the best
//! coordinate-plane candidate therefore finds the true minimum.

use super::enumerate::{all_below, scaled_norm, ShortVec, DEFAULT_BUDGET};
use super::wedge::{binom, exterior_matrix, exterior_scale, wedge_covolume, MultiVector};
use crate::exact::intmat::{self, IMat};
use crate::exact::linalg::{QMat, QVec};
use crate::exact::powprod::PowProd;
use crate::exact::Q;
use crate::weights::NormValue;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use std::cmp::Ordering;

/// Minimal covolume over primitive rank-l subgroups, with witness.
#[derive(Clone, Debug)]
pub struct PhiResult {
    /// 1 / minimal covolume.
    pub value: NormValue,
    /// The minimal covolume itself (scaled sup norm).
    pub minimal_covolume: NormValue,
    /// Z^d coordinates of a basis of the minimizing subgroup (rows).
    pub witness_coeffs: IMat,
    /// Ambient basis vectors B·u of the minimizing subgroup.
    pub witness: Vec<QVec>,
    /// False when the enumeration budget was exhausted; the reported value is
    /// then only a lower bound for the true maximum (the covolume an upper
    /// bound for the true minimum).
    pub certified: bool,
}

/// φ_l of the lattice diag(σ)·B·Z^d: the reciprocal of the smallest covolume
/// of a primitive rank-l subgroup, measured in the scaled sup norm.
pub fn phi_l(
    basis: &QMat,
    l: usize,
    scale: Option<&[PowProd]>,
    budget: u64,
) -> Result<PhiResult> {
    let d = basis.rows;
    if basis.cols != d {
        return Err(Error::DimensionMismatch("lattice basis must be square".into()));
    }
    if l == 0 || l > d {
        return Err(Error::Domain(format!(
            "subgroup rank must lie in 1..={d}, got {l}"
        )));
    }
    let w = exterior_matrix(basis, l);
    let ext_scale = scale.map(|s| exterior_scale(s, l));
    let n = binom(d, l);
    // Coordinate-plane candidates e_J: always decomposable with content 1.
    // The smallest gives the enumeration threshold and a fallback witness.
    let mut best_col: Option<(NormValue, usize)> = None;
    for j in 0..n {
        let col = w.col(j);
        let v = scaled_norm(&col, ext_scale.as_deref())?;
        let better = match &best_col {
            None => true,
            Some((bv, _)) => v.cmp(bv) == Ordering::Less,
        };
        if better {
            best_col = Some((v, j));
        }
    }
    let (threshold, col_j) = best_col.expect("exterior power is nonzero-dimensional");
    let fallback = |certified: bool, cov: NormValue, coords: Vec<BigInt>| -> Result<PhiResult> {
        finish(basis, d, l, cov, coords, certified)
    };
    let mut e_coords = vec![BigInt::zero(); n];
    e_coords[col_j] = BigInt::one();
    let candidates: Vec<ShortVec> = match all_below(&w, ext_scale.as_deref(), &threshold, budget) {
        Ok(c) => c,
        Err(Error::Domain(_)) => {
            return fallback(false, threshold, e_coords);
        }
        Err(e) => return Err(e),
    };
    let mut best: Option<(NormValue, Vec<BigInt>)> = None;
    for cand in candidates {
        let coords_q: Vec<Q> = cand.coeffs.iter().map(|c| Q::from_integer(c.clone())).collect();
        let mv = MultiVector::from_coords(d, l, coords_q)?;
        if mv.content() != Some(BigInt::one()) {
            continue;
        }
        if !mv.is_decomposable() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bv, bc)) => match cand.value.cmp(bv) {
                Ordering::Less => true,
                Ordering::Equal => cand.coeffs < *bc,
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some((cand.value, cand.coeffs));
        }
    }
    match best {
        Some((cov, coords)) => fallback(true, cov, coords),
        // e_J candidates are content-1 decomposable and within threshold, so
        // this arm is unreachable; keep it total anyway.
        None => fallback(true, threshold, e_coords),
    }
}

fn finish(
    basis: &QMat,
    d: usize,
    l: usize,
    cov: NormValue,
    coords: Vec<BigInt>,
    certified: bool,
) -> Result<PhiResult> {
    let coords_q: Vec<Q> = coords.iter().map(|c| Q::from_integer(c.clone())).collect();
    let mv = MultiVector::from_coords(d, l, coords_q)?;
    let witness_coeffs = mv
        .decompose()
        .ok_or_else(|| Error::Domain("witness multivector failed to decompose".into()))?;
    let witness: Vec<QVec> = witness_coeffs
        .iter()
        .map(|row| {
            basis.mul_vec(
                &row.iter()
                    .map(|x| Q::from_integer(x.clone()))
                    .collect::<Vec<Q>>(),
            )
        })
        .collect();
    let value = match &cov {
        NormValue::Zero => {
            return Err(Error::Domain("degenerate lattice: zero covolume".into()))
        }
        NormValue::Pos(p) => NormValue::Pos(p.recip()),
    };
    Ok(PhiResult {
        value,
        minimal_covolume: cov,
        witness_coeffs,
        witness,
        certified,
    })
}

/// φ_l with the default enumeration budget.
pub fn phi_l_default(basis: &QMat, l: usize, scale: Option<&[PowProd]>) -> Result<PhiResult> {
    phi_l(basis, l, scale, DEFAULT_BUDGET)
}

/// Covolume of the subgroup of B·Z^d spanned by integer rows (rank 0 ↦ 1).
pub fn subgroup_covolume(basis: &QMat, rows: &IMat) -> Result<Q> {
    if rows.is_empty() {
        return Ok(Q::one());
    }
    let vs: Vec<QVec> = rows
        .iter()
        .map(|r| {
            basis.mul_vec(
                &r.iter()
                    .map(|x| Q::from_integer(x.clone()))
                    .collect::<Vec<Q>>(),
            )
        })
        .collect();
    let (cov, degenerate) = wedge_covolume(&vs)?;
    if degenerate {
        return Err(Error::Domain(
            "subgroup basis rows are linearly dependent".into(),
        ));
    }
    Ok(cov)
}

/// Submodularity report for a pair of primitive subgroups Γ₁, Γ₂ of B·Z^d:
/// compares covol(Γ₁∩Γ₂)·covol(Γ₁+Γ₂) against covol(Γ₁)·covol(Γ₂) up to the
/// sup-norm distortion constant √(C(d,r₁)·C(d,r₂)); the comparison squares
/// both sides, so it is exact rational arithmetic throughout.
#[derive(Clone, Debug)]
pub struct EmmReport {
    pub cov_first: Q,
    pub cov_second: Q,
    pub cov_intersection: Q,
    pub cov_sum: Q,
    pub rank_intersection: usize,
    pub rank_sum: usize,
    /// covol(∩)·covol(+) / (covol(Γ₁)·covol(Γ₂))
    pub ratio: Q,
    /// C(d, r₁)·C(d, r₂) — the square of the admissible distortion.
    pub bound_sq: Q,
    pub within_bound: bool,
}

pub fn emm_check(basis: &QMat, first: &IMat, second: &IMat) -> Result<EmmReport> {
    let d = basis.rows;
    for (name, rows) in [("first", first), ("second", second)] {
        if rows.is_empty() || rows.len() > d || rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "{name} subgroup basis has bad shape for dimension {d}"
            )));
        }
        if !intmat::is_primitive(rows) {
            return Err(Error::Domain(format!(
                "{name} subgroup basis is not primitive"
            )));
        }
    }
    let inter = intmat::rowspace_intersection(first, second);
    let sum_raw = intmat::rowspace_sum(first, second);
    let sum = intmat::saturation(&sum_raw);
    let cov_first = subgroup_covolume(basis, first)?;
    let cov_second = subgroup_covolume(basis, second)?;
    let cov_intersection = subgroup_covolume(basis, &inter)?;
    let cov_sum = subgroup_covolume(basis, &sum)?;
    let ratio = &cov_intersection * &cov_sum / (&cov_first * &cov_second);
    let bound_sq = Q::from_integer(BigInt::from(
        binom(d, first.len()) * binom(d, second.len()),
    ));
    let within_bound = &ratio * &ratio <= bound_sq;
    Ok(EmmReport {
        cov_first,
        cov_second,
        cov_intersection,
        cov_sum,
        rank_intersection: inter.len(),
        rank_sum: sum.len(),
        ratio,
        bound_sq,
        within_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qi, qq};

    fn rows(r: &[&[i64]]) -> IMat {
        r.iter()
            .map(|row| row.iter().map(|&x| BigInt::from(x)).collect())
            .collect()
    }

    #[test]
    fn phi_of_standard_lattice() {
        let b = QMat::identity(3);
        for l in 1..=3 {
            let r = phi_l_default(&b, l, None).unwrap();
            assert!(r.certified);
            assert_eq!(r.minimal_covolume.cmp_q(&qi(1)), Ordering::Equal);
            assert_eq!(r.witness_coeffs.len(), l);
        }
    }

    #[test]
    fn phi_of_flow_lattice() {
        let b = QMat::from_rows(vec![vec![qi(4), qi(0)], vec![qi(0), qq(1, 4)]]);
        let r1 = phi_l_default(&b, 1, None).unwrap();
        assert_eq!(r1.minimal_covolume.cmp_q(&qq(1, 4)), Ordering::Equal);
        match &r1.value {
            NormValue::Pos(p) => assert_eq!(p.cmp_q(&qi(4)), Ordering::Equal),
            NormValue::Zero => panic!(),
        }
        // the witness subgroup is the short axis
        assert_eq!(r1.witness[0][0], qi(0));
        assert_eq!(r1.witness_coeffs[0][1].magnitude().to_string(), "1");
        let r2 = phi_l_default(&b, 2, None).unwrap();
        assert_eq!(r2.minimal_covolume.cmp_q(&qi(1)), Ordering::Equal);
    }

    #[test]
    fn phi_reciprocal_of_shortest_vector() {
        // rank 1: minimal covolume is exactly the shortest primitive vector
        let b = QMat::from_rows(vec![vec![qi(1), qq(7, 10)], vec![qi(0), qq(1, 3)]]);
        let sv = super::super::enumerate::shortest(&b, None, None, DEFAULT_BUDGET).unwrap();
        let r = phi_l_default(&b, 1, None).unwrap();
        assert_eq!(r.minimal_covolume.cmp(&sv.value), Ordering::Equal);
    }

    #[test]
    fn phi_with_rational_scale() {
        let b = QMat::identity(2);
        let scale = vec![PowProd::from_q(&qi(2)), PowProd::from_q(&qq(1, 2))];
        let r = phi_l(&b, 1, Some(&scale), DEFAULT_BUDGET).unwrap();
        assert_eq!(r.minimal_covolume.cmp_q(&qq(1, 2)), Ordering::Equal);
        let r2 = phi_l(&b, 2, Some(&scale), DEFAULT_BUDGET).unwrap();
        assert_eq!(r2.minimal_covolume.cmp_q(&qi(1)), Ordering::Equal);
    }

    #[test]
    fn phi_with_irrational_scale() {
        // diag(√3, 1/√3): shortest scaled vector is e₂ at 3^{-1/2}.
        let b = QMat::identity(2);
        let scale = vec![
            PowProd::pow_q(&qi(3), &qq(1, 2)),
            PowProd::pow_q(&qi(3), &qq(-1, 2)),
        ];
        let r = phi_l(&b, 1, Some(&scale), DEFAULT_BUDGET).unwrap();
        match &r.minimal_covolume {
            NormValue::Pos(p) => assert_eq!(
                p.cmp_exact(&PowProd::pow_q(&qi(3), &qq(-1, 2))),
                Ordering::Equal
            ),
            NormValue::Zero => panic!(),
        }
    }

    #[test]
    fn emm_on_coordinate_planes() {
        let b = QMat::identity(3);
        let g1 = rows(&[&[1, 0, 0], &[0, 1, 0]]);
        let g2 = rows(&[&[0, 1, 0], &[0, 0, 1]]);
        let rep = emm_check(&b, &g1, &g2).unwrap();
        assert_eq!(rep.cov_intersection, qi(1));
        assert_eq!(rep.cov_sum, qi(1));
        assert_eq!(rep.rank_intersection, 1);
        assert_eq!(rep.rank_sum, 3);
        assert_eq!(rep.ratio, qi(1));
        assert!(rep.within_bound);
    }

    #[test]
    fn emm_identical_subgroups() {
        let b = QMat::identity(3);
        let g = rows(&[&[1, 2, 3]]);
        let rep = emm_check(&b, &g, &g).unwrap();
        assert_eq!(rep.ratio, qi(1));
        assert!(rep.within_bound);
    }

    #[test]
    fn emm_rejects_imprimitive_input() {
        let b = QMat::identity(2);
        let g = rows(&[&[2, 0]]);
        assert!(emm_check(&b, &g, &rows(&[&[0, 1]])).is_err());
    }

    #[test]
    fn emm_saturates_the_sum() {
        // Γ₁ = Z(1,1,0), Γ₂ = Z(1,−1,0): the raw sum has index 2 in its
        // saturation Ze₁⊕Ze₂; the report must use the saturation.
        let b = QMat::identity(3);
        let g1 = rows(&[&[1, 1, 0]]);
        let g2 = rows(&[&[1, -1, 0]]);
        let rep = emm_check(&b, &g1, &g2).unwrap();
        assert_eq!(rep.rank_sum, 2);
        assert_eq!(rep.cov_sum, qi(1)); // saturated covolume, not 2
        assert_eq!(rep.rank_intersection, 0);
        assert_eq!(rep.cov_intersection, qi(1));
    }
}
