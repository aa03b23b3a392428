//! Exact-rational LLL reduction (δ = 3/4) on basis columns. Reduction is
//! strictly a preprocessing step: it shrinks the certified enumeration boxes
//! downstream but never decides a comparison itself, so its only obligations
//! are exactness of the arithmetic and unimodularity of the transform.

use crate::exact::linalg::{QMat, QVec};
use crate::exact::{qq, qround, Q};
use num_bigint::BigInt;
use num_traits::Zero;

/// Result of reducing B: `reduced = B · transform`, with `transform`
/// unimodular integer (stored as rows of BigInt).
pub struct Reduced {
    pub reduced: QMat,
    pub transform: Vec<Vec<BigInt>>,
}

fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).map(|(x, y)| x * y).fold(Q::zero(), |s, t| s + t)
}

/// Gram-Schmidt data for the current column set: squared norms of the
/// orthogonalized columns and the μ coefficients (μ[k][j], j < k).
struct Gs {
    b2: Vec<Q>,
    mu: Vec<Vec<Q>>,
}

fn gram_schmidt(cols: &[QVec]) -> Gs {
    let n = cols.len();
    let mut star: Vec<QVec> = Vec::with_capacity(n);
    let mut b2 = Vec::with_capacity(n);
    let mut mu = vec![vec![Q::zero(); n]; n];
    for k in 0..n {
        let mut v = cols[k].clone();
        for j in 0..k {
            let m = if b2[j] == Q::zero() {
                Q::zero()
            } else {
                dot(&cols[k], &star[j]) / &b2[j]
            };
            for (vi, si) in v.iter_mut().zip(star[j].iter()) {
                *vi -= &m * si;
            }
            mu[k][j] = m;
        }
        b2.push(dot(&v, &v));
        star.push(v);
    }
    Gs { b2, mu }
}

/// LLL-reduce the columns of `b` with δ = 3/4. `b` must have full column
/// rank (always true here: lattice bases are invertible).
pub fn lll_reduce(b: &QMat) -> Reduced {
    let n = b.cols;
    let mut cols: Vec<QVec> = (0..n).map(|j| b.col(j)).collect();
    // transform tracked column-wise: u_cols[j] is the coefficient vector of
    // reduced column j in the original basis.
    let mut u_cols: Vec<Vec<BigInt>> = (0..n)
        .map(|j| {
            let mut e = vec![BigInt::zero(); n];
            e[j] = BigInt::from(1);
            e
        })
        .collect();
    let delta = qq(3, 4);
    let mut gs = gram_schmidt(&cols);
    let mut k = 1usize;
    while k < n {
        // size-reduce column k against j = k-1 .. 0
        for j in (0..k).rev() {
            let m = qround(&gs.mu[k][j]);
            if !m.is_zero() {
                let mq = Q::from_integer(m.clone());
                for i in 0..cols[k].len() {
                    let s = &mq * &cols[j][i];
                    cols[k][i] -= s;
                }
                for i in 0..n {
                    let s = &m * &u_cols[j][i];
                    u_cols[k][i] -= s;
                }
                for i in 0..j {
                    let s = &mq * &gs.mu[j][i].clone();
                    gs.mu[k][i] -= s;
                }
                gs.mu[k][j] -= mq;
            }
        }
        // Lovász condition
        let lhs = &gs.b2[k] + &gs.mu[k][k - 1] * &gs.mu[k][k - 1] * &gs.b2[k - 1];
        let rhs = &delta * &gs.b2[k - 1];
        if lhs >= rhs {
            k += 1;
        } else {
            cols.swap(k, k - 1);
            u_cols.swap(k, k - 1);
            gs = gram_schmidt(&cols);
            k = k.max(2) - 1;
        }
    }
    let d = b.rows;
    let mut reduced = QMat::zeros(d, n);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..d {
            reduced[(i, j)] = c[i].clone();
        }
    }
    // rows of `transform`: transform[i][j] = coefficient of original column i
    // in reduced column j.
    let transform: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| u_cols[j][i].clone()).collect())
        .collect();
    Reduced { reduced, transform }
}

/// Map coefficients in the reduced basis back to the original basis:
/// original = transform · reduced_coeffs.
pub fn to_original_coeffs(transform: &[Vec<BigInt>], c: &[BigInt]) -> Vec<BigInt> {
    transform
        .iter()
        .map(|row| row.iter().zip(c).map(|(t, x)| t * x).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use crate::exact::qi;

    fn det_abs(m: &QMat) -> Q {
        m.det().abs()
    }

    #[test]
    fn reduces_skewed_basis() {
        // columns (1, 0) and (1000, 1): reduced basis should have short columns.
        let b = QMat::from_rows(vec![vec![qi(1), qi(1000)], vec![qi(0), qi(1)]]);
        let r = lll_reduce(&b);
        assert_eq!(det_abs(&r.reduced), det_abs(&b));
        for j in 0..2 {
            let col = r.reduced.col(j);
            let norm = col.iter().map(|x| x.abs()).max().unwrap();
            assert!(norm <= qi(1), "column {j} not reduced: {norm}");
        }
        // transform is unimodular: reduced = b * U with integer U, |det U| = 1
        let n = 2;
        let mut u = QMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                u[(i, j)] = Q::from_integer(r.transform[i][j].clone());
            }
        }
        assert_eq!(b.mul(&u), r.reduced);
        assert_eq!(u.det().abs(), qi(1));
    }

    #[test]
    fn reduces_big_power_basis() {
        // the flow-at-large-time shape: diag(t, 1/t)·u(θ) with t = 3^40.
        let t = crate::exact::qpow(&qi(3), 40);
        let theta = qq(5, 8);
        let b = QMat::from_rows(vec![
            vec![t.clone(), &t * &theta],
            vec![qi(0), t.recip()],
        ]);
        let r = lll_reduce(&b);
        assert_eq!(det_abs(&r.reduced), qi(1));
        // θ = 5/8 makes (p, q) = (−5, 8) a lattice vector of length 8/t, so
        // the first minimum is ≤ 8/t; the second is then forced up to ~t/8
        // (det 1), and reduction must isolate the short direction: some
        // column within the LLL factor 2 of the short vector.
        let lambda1 = qi(8) * t.recip();
        let shortest = (0..2)
            .map(|j| r.reduced.col(j).iter().map(|x| x.abs()).max().unwrap())
            .min()
            .unwrap();
        assert!(shortest <= qi(2) * &lambda1, "no short column isolated");
    }

    #[test]
    fn coefficient_mapping_roundtrip() {
        let b = QMat::from_rows(vec![vec![qi(2), qi(7)], vec![qi(1), qi(4)]]);
        let r = lll_reduce(&b);
        let c = vec![BigInt::from(3), BigInt::from(-2)];
        let orig = to_original_coeffs(&r.transform, &c);
        // b * orig == reduced * c
        let zv: Vec<Q> = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| &b[(i, j)] * Q::from_integer(orig[j].clone()))
                    .fold(Q::zero(), |s, t| s + t)
            })
            .collect();
        let zr: Vec<Q> = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| &r.reduced[(i, j)] * Q::from_integer(c[j].clone()))
                    .fold(Q::zero(), |s, t| s + t)
            })
            .collect();
        assert_eq!(zv, zr);
    }
}
