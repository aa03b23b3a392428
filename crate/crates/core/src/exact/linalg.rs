//! Dense rational vectors and matrices, sized for lattice work in dimension
//! ≤ ~10. Row-major, exact Gauss-Jordan inverse, no pivot heuristics beyond
//! first-nonzero (exact arithmetic has no stability concerns).

use super::Q;
use crate::{Error, Result};
use num_traits::{One, Signed, Zero};

pub type QVec = Vec<Q>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Q>,
}

impl QMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMat { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Q::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<QVec>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        QMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> QVec {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> QMat {
        let mut t = QMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &QMat) -> QMat {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = QMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        let prod = a * b;
                        out[(i, j)] += prod;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Q]) -> QVec {
        assert_eq!(self.cols, v.len(), "shape mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = Q::zero();
                for j in 0..self.cols {
                    if !self[(i, j)].is_zero() && !v[j].is_zero() {
                        acc += &self[(i, j)] * &v[j];
                    }
                }
                acc
            })
            .collect()
    }

    /// Exact inverse. Errors on singular input.
    pub fn inverse(&self) -> Result<QMat> {
        assert_eq!(self.rows, self.cols, "inverse of non-square");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = QMat::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| !a[(r, col)].is_zero())
                .ok_or(Error::Singular("matrix inverse"))?;
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = a[(col, col)].clone();
            for j in 0..n {
                a[(col, j)] /= &p;
                inv[(col, j)] /= &p;
            }
            for r in 0..n {
                if r != col && !a[(r, col)].is_zero() {
                    let f = a[(r, col)].clone();
                    for j in 0..n {
                        let s = &a[(col, j)] * &f;
                        a[(r, j)] -= s;
                        let s = &inv[(col, j)] * &f;
                        inv[(r, j)] -= s;
                    }
                }
            }
        }
        Ok(inv)
    }

    pub fn det(&self) -> Q {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut det = Q::one();
        for col in 0..n {
            let pivot = match (col..n).find(|&r| !a[(r, col)].is_zero()) {
                Some(p) => p,
                None => return Q::zero(),
            };
            if pivot != col {
                a.swap_rows(pivot, col);
                det = -det;
            }
            let p = a[(col, col)].clone();
            det *= &p;
            for r in col + 1..n {
                if !a[(r, col)].is_zero() {
                    let f = &a[(r, col)] / &p;
                    for j in col..n {
                        let s = &a[(col, j)] * &f;
                        a[(r, j)] -= s;
                    }
                }
            }
        }
        det
    }

    /// Operator norm for the sup norm: max over rows of the absolute row sum.
    pub fn sup_op_norm(&self) -> Q {
        let mut best = Q::zero();
        for i in 0..self.rows {
            let mut s = Q::zero();
            for j in 0..self.cols {
                s += self[(i, j)].abs();
            }
            if s > best {
                best = s;
            }
        }
        best
    }

    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        let mut row = 0;
        for col in 0..a.cols {
            if row >= a.rows {
                break;
            }
            let pivot = match (row..a.rows).find(|&r| !a[(r, col)].is_zero()) {
                Some(p) => p,
                None => continue,
            };
            a.swap_rows(pivot, row);
            let p = a[(row, col)].clone();
            for r in row + 1..a.rows {
                if !a[(r, col)].is_zero() {
                    let f = &a[(r, col)] / &p;
                    for j in col..a.cols {
                        let s = &a[(row, j)] * &f;
                        a[(r, j)] -= s;
                    }
                }
            }
            rank += 1;
            row += 1;
        }
        rank
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl std::ops::Index<(usize, usize)> for QMat {
    type Output = Q;
    fn index(&self, (i, j): (usize, usize)) -> &Q {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for QMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Q {
        &mut self.data[i * self.cols + j]
    }
}

/// Sup norm of a rational vector.
pub fn sup_norm(v: &[Q]) -> Q {
    let mut best = Q::zero();
    for x in v {
        let a = x.abs();
        if a > best {
            best = a;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qi, qq};

    #[test]
    fn inverse_roundtrip() {
        let m = QMat::from_rows(vec![
            vec![qi(2), qi(1)],
            vec![qi(7), qi(4)],
        ]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), QMat::identity(2));
        assert_eq!(m.det(), qi(1));
    }

    #[test]
    fn sup_operator_norm_is_max_row_sum() {
        let m = QMat::from_rows(vec![
            vec![qq(1, 2), qq(-1, 3)],
            vec![qi(0), qi(-2)],
        ]);
        assert_eq!(m.sup_op_norm(), qi(2));
    }
}
