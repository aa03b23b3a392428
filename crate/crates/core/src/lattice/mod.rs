//! Affine lattices (grids) in Q^d with exact minimum computations.
//!
//! A grid is B·Z^d + v. The shift is stored canonically with B⁻¹v ∈ [0,1)^d,
//! so two constructions of the same coset of the same lattice produce equal
//! representations whenever they share the basis. The minimum functions come
//! in homogeneous (λ₀: shortest nonzero lattice vector) and affine (λ̃₀:
//! closest grid point to the origin, zero for a homogeneous grid) flavors,
//! each optionally under a per-coordinate diagonal scale given in closed form
//! (rational powers of rationals), which is how diagonal flows at
//! non-perfect-power times are handled without any floating point.

pub mod enumerate;
pub mod reduction;
pub mod sublattice;
pub mod wedge;

pub use enumerate::{
    all_below, exists_below, scaled_norm, shortest, shortest_interval, Enclosure, ShortVec,
    DEFAULT_BUDGET,
};
pub use reduction::{lll_reduce, Reduced};
pub use sublattice::{emm_check, phi_l, phi_l_default, subgroup_covolume, EmmReport, PhiResult};
pub use wedge::{
    exterior_matrix, exterior_scale, index_sets, wedge_covolume, wedge_exponent, wedge_vectors,
    MultiVector,
};

use crate::exact::linalg::{QMat, QVec};
use crate::exact::powprod::PowProd;
use crate::exact::{qfrac, Q};
use crate::weights::{FlowTime, NormValue, Weights};
use crate::{Error, Result};
use num_traits::{One, Signed, Zero};

/// A grid B·Z^d + v with canonical shift (B⁻¹v ∈ [0,1)^d).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineLattice {
    basis: QMat,
    /// Canonical shift in ambient coordinates.
    shift: QVec,
    /// B⁻¹·shift, each entry in [0,1).
    coset: QVec,
}

impl AffineLattice {
    pub fn new(basis: QMat, shift: QVec) -> Result<AffineLattice> {
        let d = basis.rows;
        if basis.cols != d {
            return Err(Error::DimensionMismatch("grid basis must be square".into()));
        }
        if shift.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "shift has {} entries for dimension {d}",
                shift.len()
            )));
        }
        let inv = basis.inverse()?;
        let coset: QVec = inv.mul_vec(&shift).iter().map(qfrac).collect();
        let shift = basis.mul_vec(&coset);
        Ok(AffineLattice { basis, shift, coset })
    }

    pub fn homogeneous(basis: QMat) -> Result<AffineLattice> {
        let d = basis.rows;
        AffineLattice::new(basis, vec![Q::zero(); d])
    }

    /// Z^d.
    pub fn standard(d: usize) -> AffineLattice {
        AffineLattice::homogeneous(QMat::identity(d)).expect("identity is invertible")
    }

    /// u(θ)·Z^d + (ξ, 0): the grid whose trajectory under the diagonal flow
    /// encodes how well θ·q + ξ is approximated by integer vectors.
    pub fn from_theta_xi(w: &Weights, theta: &QMat, xi: &[Q]) -> Result<AffineLattice> {
        let u = crate::weights::unipotent(w, theta)?;
        let v = crate::weights::translation_vector(w, xi)?;
        AffineLattice::new(u, v)
    }

    pub fn d(&self) -> usize {
        self.basis.rows
    }

    pub fn basis(&self) -> &QMat {
        &self.basis
    }

    /// Canonical shift vector (B times a coset representative in [0,1)^d).
    pub fn shift(&self) -> &QVec {
        &self.shift
    }

    /// Coset coordinates B⁻¹v, entries in [0,1).
    pub fn coset(&self) -> &QVec {
        &self.coset
    }

    pub fn is_homogeneous(&self) -> bool {
        self.coset.iter().all(|c| c.is_zero())
    }

    /// The underlying lattice B·Z^d with the shift forgotten.
    pub fn linear_part(&self) -> AffineLattice {
        AffineLattice::homogeneous(self.basis.clone()).expect("basis already validated")
    }

    /// Image under a volume-preserving matrix: g·(BZ^d + v) = (gB)Z^d + gv.
    pub fn transform(&self, g: &QMat) -> Result<AffineLattice> {
        if g.rows != self.d() || g.cols != self.d() {
            return Err(Error::DimensionMismatch("transform must be d×d".into()));
        }
        if g.det().abs() != Q::one() {
            return Err(Error::Domain(
                "grid transforms must have determinant ±1".into(),
            ));
        }
        AffineLattice::new(g.mul(&self.basis), g.mul_vec(&self.shift))
    }

    /// Image under the diagonal flow at time t = τ^D, iterate k (every
    /// diagonal power is then an exact rational).
    pub fn apply_flow(&self, w: &Weights, time: &FlowTime, k: i64) -> Result<AffineLattice> {
        let tau = time.tau_exact()?;
        let diag = crate::weights::flow_diag_exact(w, &tau, k);
        if diag.len() != self.d() {
            return Err(Error::DimensionMismatch(
                "flow dimension does not match grid dimension".into(),
            ));
        }
        let d = self.d();
        let mut basis = self.basis.clone();
        let mut shift = self.shift.clone();
        for i in 0..d {
            for j in 0..d {
                basis[(i, j)] = &self.basis[(i, j)] * &diag[i];
            }
            shift[i] = &self.shift[i] * &diag[i];
        }
        AffineLattice::new(basis, shift)
    }

    /// Do the two representations describe the same grid? Exact: the basis
    /// change must be integer unimodular and the shifts must differ by a
    /// lattice vector.
    pub fn same_point(&self, other: &AffineLattice) -> bool {
        if self.d() != other.d() {
            return false;
        }
        let inv = match other.basis.inverse() {
            Ok(m) => m,
            Err(_) => return false,
        };
        let c = inv.mul(&self.basis);
        for i in 0..c.rows {
            for j in 0..c.cols {
                if !c[(i, j)].is_integer() {
                    return false;
                }
            }
        }
        if c.det().abs() != Q::one() {
            return false;
        }
        let dv: QVec = self
            .shift
            .iter()
            .zip(&other.shift)
            .map(|(a, b)| a - b)
            .collect();
        inv.mul_vec(&dv).iter().all(|x| x.is_integer())
    }

    /// λ₀: shortest nonzero vector of the lattice B·Z^d (shift ignored).
    pub fn lambda0(&self, budget: u64) -> Result<ShortVec> {
        enumerate::shortest(&self.basis, None, None, budget)
    }

    /// λ̃₀: smallest norm of a grid point. Zero (with a zero witness) when
    /// the grid is homogeneous, since the origin is then on the grid.
    pub fn lambda0_affine(&self, budget: u64) -> Result<ShortVec> {
        if self.is_homogeneous() {
            return Ok(ShortVec {
                value: NormValue::Zero,
                coeffs: vec![num_bigint::BigInt::zero(); self.d()],
                vector: vec![Q::zero(); self.d()],
            });
        }
        enumerate::shortest(&self.basis, Some(&self.shift), None, budget)
    }

    /// λ₀ under a per-coordinate closed-form scale.
    pub fn lambda0_scaled(&self, scale: &[PowProd], budget: u64) -> Result<ShortVec> {
        enumerate::shortest(&self.basis, None, Some(scale), budget)
    }

    /// λ̃₀ under a per-coordinate closed-form scale.
    pub fn lambda0_affine_scaled(&self, scale: &[PowProd], budget: u64) -> Result<ShortVec> {
        if self.is_homogeneous() {
            return Ok(ShortVec {
                value: NormValue::Zero,
                coeffs: vec![num_bigint::BigInt::zero(); self.d()],
                vector: vec![Q::zero(); self.d()],
            });
        }
        enumerate::shortest(&self.basis, Some(&self.shift), Some(scale), budget)
    }

    /// Exact predicate λ̃₀ ≤ eps (strict: <). Cheap when eps is small.
    pub fn affine_min_le(&self, eps: &Q, strict: bool, budget: u64) -> Result<bool> {
        if self.is_homogeneous() {
            return Ok(if strict {
                eps.is_positive()
            } else {
                !eps.is_negative()
            });
        }
        Ok(enumerate::exists_below(&self.basis, Some(&self.shift), None, eps, strict, budget)?
            .is_some())
    }

    /// Exact predicate λ₀ ≤ eps (strict: <).
    pub fn min_le(&self, eps: &Q, strict: bool, budget: u64) -> Result<bool> {
        Ok(enumerate::exists_below(&self.basis, None, None, eps, strict, budget)?.is_some())
    }

    /// Same predicate under a scale.
    pub fn min_le_scaled(
        &self,
        scale: &[PowProd],
        eps: &Q,
        strict: bool,
        budget: u64,
    ) -> Result<bool> {
        Ok(
            enumerate::exists_below(&self.basis, None, Some(scale), eps, strict, budget)?
                .is_some(),
        )
    }

    /// Scaled affine predicate λ̃₀ ≤ eps. The search box is derived from eps
    /// itself, so small thresholds stay cheap even when the affine minimum is
    /// large (rational θ with an incompatible shift, deep flow times).
    pub fn affine_min_le_scaled(
        &self,
        scale: &[PowProd],
        eps: &Q,
        strict: bool,
        budget: u64,
    ) -> Result<bool> {
        if self.is_homogeneous() {
            return Ok(if strict {
                eps.is_positive()
            } else {
                !eps.is_negative()
            });
        }
        Ok(enumerate::exists_below(
            &self.basis,
            Some(&self.shift),
            Some(scale),
            eps,
            strict,
            budget,
        )?
        .is_some())
    }

    /// φ_l of the underlying lattice.
    pub fn phi(&self, l: usize, budget: u64) -> Result<PhiResult> {
        sublattice::phi_l(&self.basis, l, None, budget)
    }

    /// φ_l of the scaled lattice.
    pub fn phi_scaled(&self, l: usize, scale: &[PowProd], budget: u64) -> Result<PhiResult> {
        sublattice::phi_l(&self.basis, l, Some(scale), budget)
    }
}

/// Diagonal flow at an arbitrary rational time t > 0 (iterate k), as a
/// per-coordinate closed-form scale t^{k·e_i}. Use together with the
/// `*_scaled` minimum functions when t is not a perfect D-th power.
pub fn flow_scale(w: &Weights, t: &Q, k: i64) -> Result<Vec<PowProd>> {
    if !t.is_positive() {
        return Err(Error::Domain("flow time must be positive".into()));
    }
    let kq = Q::from_integer(k.into());
    Ok(w.flow_exponents()
        .iter()
        .map(|e| PowProd::pow_q(t, &(e * &kq)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qi, qq};
    use std::cmp::Ordering;

    #[test]
    fn standard_minimum_is_one() {
        for d in 2..=5 {
            let x = AffineLattice::standard(d);
            let sv = x.lambda0(DEFAULT_BUDGET).unwrap();
            assert_eq!(sv.value_q(), Some(qi(1)));
        }
    }

    #[test]
    fn flow_lattice_minimum_and_witness() {
        let b = QMat::from_rows(vec![vec![qi(4), qi(0)], vec![qi(0), qq(1, 4)]]);
        let x = AffineLattice::homogeneous(b).unwrap();
        let sv = x.lambda0(DEFAULT_BUDGET).unwrap();
        assert_eq!(sv.value_q(), Some(qq(1, 4)));
        assert_eq!(sv.vector[0], qi(0));
        assert_eq!(sv.vector[1].abs(), qq(1, 4));
    }

    #[test]
    fn affine_minimum_of_half_shift() {
        let x = AffineLattice::new(QMat::identity(2), vec![qq(1, 2), qq(1, 2)]).unwrap();
        let sv = x.lambda0_affine(DEFAULT_BUDGET).unwrap();
        assert_eq!(sv.value_q(), Some(qq(1, 2)));
        // homogeneous grid: affine minimum is zero
        let y = AffineLattice::standard(2);
        assert!(y.lambda0_affine(DEFAULT_BUDGET).unwrap().value.is_zero());
    }

    #[test]
    fn shift_canonicalization() {
        let x = AffineLattice::new(QMat::identity(2), vec![qq(3, 2), qq(-1, 2)]).unwrap();
        assert_eq!(x.shift(), &vec![qq(1, 2), qq(1, 2)]);
        assert_eq!(x.coset(), &vec![qq(1, 2), qq(1, 2)]);
        // same grid either way
        let y = AffineLattice::new(QMat::identity(2), vec![qq(1, 2), qq(1, 2)]).unwrap();
        assert!(x.same_point(&y));
        assert!(!x.is_homogeneous());
    }

    #[test]
    fn same_point_under_basis_change() {
        let b1 = QMat::identity(2);
        let b2 = QMat::from_rows(vec![vec![qi(1), qi(1)], vec![qi(0), qi(1)]]);
        let x = AffineLattice::homogeneous(b1).unwrap();
        let y = AffineLattice::homogeneous(b2).unwrap();
        assert!(x.same_point(&y));
        let z = AffineLattice::homogeneous(QMat::from_rows(vec![
            vec![qi(2), qi(0)],
            vec![qi(0), qi(1)],
        ]))
        .unwrap();
        assert!(!x.same_point(&z));
    }

    #[test]
    fn minimum_bounded_by_operator_norm() {
        let x = AffineLattice::homogeneous(QMat::from_rows(vec![
            vec![qi(1), qq(7, 13)],
            vec![qi(0), qi(1)],
        ]))
        .unwrap();
        let g = QMat::from_rows(vec![vec![qi(2), qi(1)], vec![qi(1), qi(1)]]);
        let y = x.transform(&g).unwrap();
        let lx = x.lambda0(DEFAULT_BUDGET).unwrap().value_q().unwrap();
        let ly = y.lambda0(DEFAULT_BUDGET).unwrap().value_q().unwrap();
        assert!(ly <= g.sup_op_norm() * lx);
    }

    #[test]
    fn flow_trajectory_of_standard_grid() {
        // m = n = 1, τ = 3, θ = 0: g_{3^k} Z² has minimum 3^{−k}.
        let w = Weights::equal(1, 1);
        let x = AffineLattice::standard(2);
        let t = FlowTime::Exact { tau: qi(3) };
        for k in 1..=5 {
            let y = x.apply_flow(&w, &t, k).unwrap();
            let sv = y.lambda0(DEFAULT_BUDGET).unwrap();
            assert_eq!(sv.value_q(), Some(qq(1, 3i64.pow(k as u32))));
        }
    }

    #[test]
    fn flow_determinant_is_one() {
        let w = Weights::new(vec![qq(1, 2), qq(1, 2)], vec![qi(1)]).unwrap();
        let t = FlowTime::Exact { tau: qi(2) };
        let x = AffineLattice::standard(3);
        let y = x.apply_flow(&w, &t, 1).unwrap();
        assert_eq!(y.basis().det().abs(), qi(1));
    }

    #[test]
    fn theta_xi_construction() {
        let w = Weights::new(vec![qq(1, 2), qq(1, 2)], vec![qi(1)]).unwrap();
        let theta = QMat::from_rows(vec![vec![qq(1, 3)], vec![qq(2, 3)]]);
        let xi = vec![qq(1, 5), qq(2, 5)];
        let x = AffineLattice::from_theta_xi(&w, &theta, &xi).unwrap();
        assert_eq!(x.d(), 3);
        assert_eq!(x.basis()[(0, 2)], qq(1, 3));
        assert_eq!(x.basis()[(1, 2)], qq(2, 3));
        assert_eq!(x.shift()[0], qq(1, 5));
        assert!(!x.is_homogeneous());
    }

    #[test]
    fn scaled_flow_matches_exact_flow() {
        // t = 9 on m = n = 1 weights: scale route and exact route agree.
        let w = Weights::equal(1, 1);
        let x = AffineLattice::new(
            QMat::from_rows(vec![vec![qi(1), qq(5, 7)], vec![qi(0), qi(1)]]),
            vec![qq(1, 3), qi(0)],
        )
        .unwrap();
        let scale = flow_scale(&w, &qi(9), 1).unwrap();
        let via_scale = x.lambda0_affine_scaled(&scale, DEFAULT_BUDGET).unwrap();
        let t = FlowTime::Exact { tau: qi(3) };
        let flowed = x.apply_flow(&w, &t, 2).unwrap();
        let via_flow = flowed.lambda0_affine(DEFAULT_BUDGET).unwrap();
        assert_eq!(via_scale.value.cmp(&via_flow.value), Ordering::Equal);
    }

    #[test]
    fn predicates_agree_with_minima() {
        let x = AffineLattice::new(QMat::identity(2), vec![qq(1, 2), qq(1, 3)]).unwrap();
        assert!(x.affine_min_le(&qq(1, 2), false, DEFAULT_BUDGET).unwrap());
        assert!(!x.affine_min_le(&qq(1, 2), true, DEFAULT_BUDGET).unwrap());
        assert!(!x.affine_min_le(&qq(1, 3), false, DEFAULT_BUDGET).unwrap());
        let y = AffineLattice::standard(2);
        assert!(y.min_le(&qi(1), false, DEFAULT_BUDGET).unwrap());
        assert!(!y.min_le(&qq(99, 100), false, DEFAULT_BUDGET).unwrap());
    }
}
