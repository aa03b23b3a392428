//! Exterior powers of Q^d: coordinates on Λ^l, wedge products, the induced
//! action of matrices, and exact decomposability tests.
//!
//! Coordinates are taken in the basis {e_I : I ⊂ {0,…,d−1}, #I = l} with I
//! listed in lexicographic order. An integer multivector of content 1 that is
//! decomposable corresponds to a primitive rank-l subgroup of Z^d (its wedge
//! of any basis, up to sign), which is what the sublattice search relies on.

use crate::exact::intmat::{self, IMat};
use crate::exact::linalg::{QMat, QVec};
use crate::exact::powprod::PowProd;
use crate::exact::Q;
use crate::weights::Weights;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

/// All l-element subsets of {0,…,d−1} in lexicographic order.
pub fn index_sets(d: usize, l: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(l);
    fn rec(start: usize, d: usize, l: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == l {
            out.push(cur.clone());
            return;
        }
        let need = l - cur.len();
        for i in start..=d.saturating_sub(need) {
            cur.push(i);
            rec(i + 1, d, l, cur, out);
            cur.pop();
        }
    }
    if l <= d {
        rec(0, d, l, &mut cur, &mut out);
    }
    out
}

/// Position of a sorted index set in the lexicographic listing.
pub fn index_set_position(d: usize, set: &[usize]) -> usize {
    // count sets that precede `set` lexicographically
    let l = set.len();
    let mut pos = 0usize;
    let mut prev: isize = -1;
    for (k, &s) in set.iter().enumerate() {
        for c in (prev + 1) as usize..s {
            pos += binom(d - c - 1, l - k - 1);
        }
        prev = s as isize;
    }
    pos
}

pub fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Element of Λ^l Q^d in e_I coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiVector {
    pub d: usize,
    pub l: usize,
    pub coords: Vec<Q>,
}

impl MultiVector {
    pub fn zero(d: usize, l: usize) -> MultiVector {
        MultiVector {
            d,
            l,
            coords: vec![Q::zero(); binom(d, l)],
        }
    }

    pub fn from_coords(d: usize, l: usize, coords: Vec<Q>) -> Result<MultiVector> {
        if coords.len() != binom(d, l) {
            return Err(Error::DimensionMismatch(format!(
                "Λ^{l} of Q^{d} has dimension {}, got {} coordinates",
                binom(d, l),
                coords.len()
            )));
        }
        Ok(MultiVector { d, l, coords })
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn sup_norm(&self) -> Q {
        self.coords
            .iter()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Q::zero)
    }

    /// gcd of the (integer) coordinates; None if any coordinate is not an
    /// integer or all are zero.
    pub fn content(&self) -> Option<BigInt> {
        let mut g = BigInt::zero();
        for c in &self.coords {
            if !c.is_integer() {
                return None;
            }
            g = g.gcd(&c.to_integer());
        }
        if g.is_zero() {
            None
        } else {
            Some(g)
        }
    }

    /// Keep only coordinates whose index set meets {0,…,m−1} in the maximal
    /// possible number of indices, min(l, m); zero the rest. These are the
    /// coordinates a diagonal flow expands fastest.
    pub fn pi_plus(&self, m: usize) -> MultiVector {
        let target = self.l.min(m);
        let sets = index_sets(self.d, self.l);
        let coords = self
            .coords
            .iter()
            .zip(&sets)
            .map(|(c, set)| {
                if set.iter().filter(|&&i| i < m).count() == target {
                    c.clone()
                } else {
                    Q::zero()
                }
            })
            .collect();
        MultiVector {
            d: self.d,
            l: self.l,
            coords,
        }
    }

    pub fn pi_minus(&self, m: usize) -> MultiVector {
        let plus = self.pi_plus(m);
        let coords = self
            .coords
            .iter()
            .zip(&plus.coords)
            .map(|(c, p)| c - p)
            .collect();
        MultiVector {
            d: self.d,
            l: self.l,
            coords,
        }
    }

    /// Is this a pure wedge v₁∧…∧v_l? Exact rank test: a nonzero w ∈ Λ^l is
    /// decomposable iff {x : x∧w = 0} has dimension l, i.e. the wedge map
    /// x ↦ x∧w has rank d − l. l ∈ {0, 1, d−1, d} is always decomposable.
    pub fn is_decomposable(&self) -> bool {
        if self.is_zero() {
            return true;
        }
        if self.l <= 1 || self.l + 1 >= self.d {
            return true;
        }
        let m = self.wedge_map();
        m.rank() == self.d - self.l
    }

    /// Matrix of x ↦ x ∧ self, rows indexed by e_i, columns by the (l+1)-sets.
    fn wedge_map(&self) -> QMat {
        let d = self.d;
        let l = self.l;
        let sets_l = index_sets(d, l);
        let n_out = binom(d, l + 1);
        let mut m = QMat::zeros(d, n_out);
        for (pos_j, set_j) in sets_l.iter().enumerate() {
            if self.coords[pos_j].is_zero() {
                continue;
            }
            for i in 0..d {
                if set_j.contains(&i) {
                    continue;
                }
                let sign = set_j.iter().filter(|&&j| j < i).count();
                let mut k: Vec<usize> = set_j.clone();
                k.push(i);
                k.sort_unstable();
                let pos_k = index_set_position(d, &k);
                let term = if sign % 2 == 0 {
                    self.coords[pos_j].clone()
                } else {
                    -self.coords[pos_j].clone()
                };
                m[(i, pos_k)] = &m[(i, pos_k)] + term;
            }
        }
        m
    }

    /// For an integer decomposable multivector: a basis (rows, Z^d coords) of
    /// the rank-l subgroup {x : x∧w = 0} ∩ Z^d. The basis is saturated, so
    /// for a content-1 multivector it wedges back to ±self. None when the
    /// multivector is zero or not decomposable or not integral.
    pub fn decompose(&self) -> Option<IMat> {
        if self.is_zero() || !self.is_decomposable() {
            return None;
        }
        if self.coords.iter().any(|c| !c.is_integer()) {
            return None;
        }
        let m = self.wedge_map();
        let mi: IMat = (0..m.rows)
            .map(|i| (0..m.cols).map(|j| m[(i, j)].to_integer()).collect())
            .collect();
        let basis = intmat::left_kernel(&mi);
        if basis.len() == self.l {
            Some(basis)
        } else {
            None
        }
    }
}

/// v₁ ∧ … ∧ v_l of ambient vectors: coordinate at I is the minor with rows I.
pub fn wedge_vectors(vs: &[QVec]) -> Result<MultiVector> {
    let l = vs.len();
    if l == 0 {
        return Err(Error::DimensionMismatch("wedge of zero vectors".into()));
    }
    let d = vs[0].len();
    if vs.iter().any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch(
            "wedge factors have mixed dimensions".into(),
        ));
    }
    if l > d {
        return Err(Error::DimensionMismatch(format!(
            "cannot wedge {l} vectors in dimension {d}"
        )));
    }
    let sets = index_sets(d, l);
    let mut coords = Vec::with_capacity(sets.len());
    for set in &sets {
        let sub = QMat::from_rows(
            set.iter()
                .map(|&i| vs.iter().map(|v| v[i].clone()).collect())
                .collect(),
        );
        coords.push(sub.det());
    }
    MultiVector::from_coords(d, l, coords)
}

/// Sup-norm covolume of the subgroup spanned by the given vectors, with a
/// degeneracy flag when they are linearly dependent (wedge = 0).
pub fn wedge_covolume(vs: &[QVec]) -> Result<(Q, bool)> {
    let w = wedge_vectors(vs)?;
    let degenerate = w.is_zero();
    Ok((w.sup_norm(), degenerate))
}

/// The induced matrix on Λ^l: entry (I, J) is the minor det g[I, J]. Columns
/// are the wedges of the column subsets of g, so for a lattice basis B the
/// result is a basis of Λ^l of the lattice.
pub fn exterior_matrix(g: &QMat, l: usize) -> QMat {
    let d = g.rows;
    let sets = index_sets(d, l);
    let n = sets.len();
    let mut out = QMat::zeros(n, n);
    for (pi, rows) in sets.iter().enumerate() {
        for (pj, cols) in sets.iter().enumerate() {
            let sub = QMat::from_rows(
                rows.iter()
                    .map(|&i| cols.iter().map(|&j| g[(i, j)].clone()).collect())
                    .collect(),
            );
            out[(pi, pj)] = sub.det();
        }
    }
    out
}

/// Weighted flow exponent of a coordinate e_I: Σ_{i∈I, i<m} a_i − Σ_{i∈I, i≥m} b_{i−m},
/// so that the diagonal flow scales e_I by t^{exponent}.
pub fn wedge_exponent(w: &Weights, set: &[usize]) -> Q {
    let mut e = Q::zero();
    for &i in set {
        if i < w.m {
            e += &w.a[i];
        } else {
            e -= &w.b[i - w.m];
        }
    }
    e
}

/// Per-coordinate scale factors Π_{i∈I} σ_i on Λ^l induced by ambient
/// per-coordinate scales σ.
pub fn exterior_scale(scale: &[PowProd], l: usize) -> Vec<PowProd> {
    let d = scale.len();
    index_sets(d, l)
        .iter()
        .map(|set| {
            let mut p = PowProd::one();
            for &i in set {
                p = p.mul(&scale[i]);
            }
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qi, qq};

    #[test]
    fn index_sets_lex_and_positions() {
        let s = index_sets(4, 2);
        assert_eq!(
            s,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        for (i, set) in s.iter().enumerate() {
            assert_eq!(index_set_position(4, set), i);
        }
        assert_eq!(index_sets(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn covolume_examples() {
        // (2,0) ∧ (0,1/2) spans a grid of covolume 1
        let (c, degenerate) =
            wedge_covolume(&[vec![qi(2), qi(0)], vec![qi(0), qq(1, 2)]]).unwrap();
        assert_eq!(c, qi(1));
        assert!(!degenerate);
        // single vector (3,4): sup norm 4
        let (c, _) = wedge_covolume(&[vec![qi(3), qi(4)]]).unwrap();
        assert_eq!(c, qi(4));
        // e1, e1+e2: unimodular change of basis, covolume 1
        let (c, _) = wedge_covolume(&[vec![qi(1), qi(0)], vec![qi(1), qi(1)]]).unwrap();
        assert_eq!(c, qi(1));
        // dependent vectors flag
        let (c, degenerate) =
            wedge_covolume(&[vec![qi(1), qi(2)], vec![qi(2), qi(4)]]).unwrap();
        assert_eq!(c, qi(0));
        assert!(degenerate);
    }

    #[test]
    fn projections_split_top_block() {
        // d = 3, m = 2, l = 2: sets 01, 02, 12; only 01 meets {0,1} twice.
        let w = MultiVector::from_coords(3, 2, vec![qi(5), qi(7), qi(9)]).unwrap();
        let plus = w.pi_plus(2);
        assert_eq!(plus.coords, vec![qi(5), qi(0), qi(0)]);
        let minus = w.pi_minus(2);
        assert_eq!(minus.coords, vec![qi(0), qi(7), qi(9)]);
        // l = 1: π₊ keeps the first m ambient coordinates
        let v = MultiVector::from_coords(3, 1, vec![qi(1), qi(2), qi(3)]).unwrap();
        assert_eq!(v.pi_plus(2).coords, vec![qi(1), qi(2), qi(0)]);
    }

    #[test]
    fn flow_exponent_on_coordinates() {
        // d=3, m=2, a=(1/2,1/2), b=(1): e_{02} picks up a₀ − b₀ = −1/2.
        let w = Weights::new(vec![qq(1, 2), qq(1, 2)], vec![qi(1)]).unwrap();
        assert_eq!(wedge_exponent(&w, &[0, 2]), qq(-1, 2));
        assert_eq!(wedge_exponent(&w, &[0, 1]), qi(1));
        assert_eq!(wedge_exponent(&w, &[0]), qq(1, 2));
    }

    #[test]
    fn exterior_matrix_is_multiplicative_on_wedges() {
        let g = QMat::from_rows(vec![
            vec![qi(1), qi(2), qi(0)],
            vec![qi(0), qi(1), qi(3)],
            vec![qi(1), qi(0), qi(1)],
        ]);
        let v1 = vec![qi(1), qi(4), qi(2)];
        let v2 = vec![qi(0), qi(1), qi(1)];
        let lhs = exterior_matrix(&g, 2)
            .mul_vec(&wedge_vectors(&[v1.clone(), v2.clone()]).unwrap().coords);
        let rhs = wedge_vectors(&[g.mul_vec(&v1), g.mul_vec(&v2)]).unwrap().coords;
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn decomposability_rank_test() {
        // e01 + e23 in d = 4 is the classic non-decomposable element.
        let mut coords = vec![Q::zero(); 6];
        coords[0] = qi(1); // e01
        coords[5] = qi(1); // e23
        let w = MultiVector::from_coords(4, 2, coords).unwrap();
        assert!(!w.is_decomposable());
        // any wedge of two vectors is decomposable
        let v = wedge_vectors(&[
            vec![qi(1), qi(2), qi(3), qi(4)],
            vec![qi(0), qi(1), qi(1), qi(2)],
        ])
        .unwrap();
        assert!(v.is_decomposable());
    }

    #[test]
    fn decompose_recovers_subgroup() {
        let v1 = vec![qi(2), qi(1), qi(0), qi(1)];
        let v2 = vec![qi(1), qi(0), qi(1), qi(0)];
        let w = wedge_vectors(&[v1, v2]).unwrap();
        assert_eq!(w.content(), Some(BigInt::from(1)));
        let basis = w.decompose().unwrap();
        assert_eq!(basis.len(), 2);
        // the recovered basis wedges back to ±w
        let vs: Vec<QVec> = basis
            .iter()
            .map(|row| row.iter().map(|x| Q::from_integer(x.clone())).collect())
            .collect();
        let back = wedge_vectors(&vs).unwrap();
        let same = back.coords == w.coords
            || back
                .coords
                .iter()
                .zip(&w.coords)
                .all(|(x, y)| x == &(-y.clone()));
        assert!(same);
    }

    #[test]
    fn exterior_scale_products() {
        let s = vec![
            PowProd::from_q(&qi(2)),
            PowProd::from_q(&qi(3)),
            PowProd::from_q(&qi(5)),
        ];
        let es = exterior_scale(&s, 2);
        let vals: Vec<Q> = es.iter().map(|p| p.as_rational().unwrap()).collect();
        assert_eq!(vals, vec![qi(6), qi(10), qi(15)]);
    }
}
