//! Integer matrix normal forms for subgroup arithmetic: Hermite form with
//! transform, Smith form with inverse-column-transform tracking, left
//! kernels, row-space sums/intersections, and saturation. Rows span
//! subgroups of Z^d throughout.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

pub type IMat = Vec<Vec<BigInt>>;

pub fn zeros(r: usize, c: usize) -> IMat {
    vec![vec![BigInt::zero(); c]; r]
}

pub fn identity(n: usize) -> IMat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = BigInt::one();
    }
    m
}

/// Row-style Hermite normal form with unimodular transform: U·M = H.
/// H is upper echelon with positive pivots and reduced entries above them.
pub fn hnf_with_transform(m: &IMat) -> (IMat, IMat) {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut h = m.clone();
    let mut u = identity(rows);
    let mut pivot_row = 0;
    for col in 0..cols {
        if pivot_row >= rows {
            break;
        }
        // Euclidean elimination below pivot_row in this column.
        loop {
            let mut best: Option<usize> = None;
            for (r, row) in h.iter().enumerate().skip(pivot_row) {
                if !row[col].is_zero()
                    && best.is_none_or(|b| row[col].magnitude() < h[b][col].magnitude())
                {
                    best = Some(r);
                }
            }
            let Some(b) = best else { break };
            h.swap(pivot_row, b);
            u.swap(pivot_row, b);
            let mut others = false;
            for r in pivot_row + 1..rows {
                if !h[r][col].is_zero() {
                    let q = rounded_div(&h[r][col], &h[pivot_row][col]);
                    row_sub(&mut h, r, pivot_row, &q);
                    row_sub(&mut u, r, pivot_row, &q);
                    if !h[r][col].is_zero() {
                        others = true;
                    }
                }
            }
            if !others {
                break;
            }
        }
        if h[pivot_row][col].is_zero() {
            continue;
        }
        if h[pivot_row][col].is_negative() {
            row_neg(&mut h, pivot_row);
            row_neg(&mut u, pivot_row);
        }
        // Reduce entries above the pivot into [0, pivot).
        for r in 0..pivot_row {
            if !h[r][col].is_zero() {
                let q = h[r][col].div_floor(&h[pivot_row][col]);
                if !q.is_zero() {
                    row_sub(&mut h, r, pivot_row, &q);
                    row_sub(&mut u, r, pivot_row, &q);
                }
            }
        }
        pivot_row += 1;
    }
    (h, u)
}

pub fn hnf(m: &IMat) -> IMat {
    let (h, _) = hnf_with_transform(m);
    h
}

fn row_sub(m: &mut IMat, target: usize, source: usize, q: &BigInt) {
    if q.is_zero() {
        return;
    }
    let src = m[source].clone();
    for (t, s) in m[target].iter_mut().zip(src.iter()) {
        *t -= q * s;
    }
}

fn row_neg(m: &mut IMat, r: usize) {
    for x in &mut m[r] {
        *x = -std::mem::take(x);
    }
}

/// Quotient minimizing |a - q b| (rounded division).
fn rounded_div(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_rem(b);
    // adjust toward nearest
    let twice = &r * 2i32;
    if twice.magnitude() > b.magnitude() {
        if (r.is_negative()) == (b.is_negative()) {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

pub fn rank(m: &IMat) -> usize {
    hnf(m).iter().filter(|row| row.iter().any(|x| !x.is_zero())).count()
}

/// Rows x with x·M = 0, as a basis of the left kernel.
pub fn left_kernel(m: &IMat) -> IMat {
    let (h, u) = hnf_with_transform(m);
    h.iter()
        .zip(u.iter())
        .filter(|(hrow, _)| hrow.iter().all(|x| x.is_zero()))
        .map(|(_, urow)| urow.clone())
        .collect()
}

/// Smith normal form, returning the invariant factors and the inverse of the
/// column transform: U·M·V = S, result is (invariants, V⁻¹). Row space of M
/// equals the lattice spanned by sᵢ · (row i of V⁻¹).
pub fn snf_invariants_vinv(m: &IMat) -> (Vec<BigInt>, IMat) {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut a = m.clone();
    let mut vinv = identity(cols);
    let mut t = 0;
    let mut invariants = Vec::new();
    while t < rows && t < cols {
        // Find a nonzero entry in the remaining block.
        let mut pivot: Option<(usize, usize)> = None;
        for r in t..rows {
            for c in t..cols {
                if !a[r][c].is_zero()
                    && pivot.is_none_or(|(pr, pc)| a[r][c].magnitude() < a[pr][pc].magnitude())
                {
                    pivot = Some((r, c));
                }
            }
        }
        let Some((pr, pc)) = pivot else { break };
        a.swap(t, pr);
        col_swap(&mut a, t, pc);
        vinv.swap(t, pc); // column swap on V == row swap on V⁻¹
        loop {
            let mut dirty = false;
            // clear column t below
            for r in t + 1..rows {
                if !a[r][t].is_zero() {
                    let q = rounded_div(&a[r][t], &a[t][t]);
                    row_sub(&mut a, r, t, &q);
                    if !a[r][t].is_zero() {
                        a.swap(t, r);
                        dirty = true;
                    }
                }
            }
            // clear row t to the right
            for c in t + 1..cols {
                if !a[t][c].is_zero() {
                    let q = rounded_div(&a[t][c], &a[t][t]);
                    col_sub(&mut a, c, t, &q);
                    // column op on M: V ← V·E means V⁻¹ ← E⁻¹·V⁻¹:
                    // subtracting q·col_t from col_c inverts to adding q·row_c to row_t.
                    let add = &q * 1i32;
                    vinv_row_add(&mut vinv, t, c, &add);
                    if !a[t][c].is_zero() {
                        col_swap(&mut a, t, c);
                        vinv.swap(t, c);
                        dirty = true;
                    }
                }
            }
            if !dirty {
                break;
            }
        }
        // divisibility sweep: pivot must divide every remaining entry
        let mut redo = false;
        'outer: for r in t + 1..rows {
            for c in t + 1..cols {
                if !(&a[r][c] % &a[t][t]).is_zero() {
                    // add row r to row t, restart elimination at t
                    let one = BigInt::one();
                    let neg = -one;
                    row_sub(&mut a, t, r, &neg);
                    redo = true;
                    break 'outer;
                }
            }
        }
        if redo {
            continue;
        }
        if a[t][t].is_negative() {
            for row in a.iter_mut().skip(t) {
                row[t] = -std::mem::take(&mut row[t]);
            }
            row_neg(&mut vinv, t);
        }
        invariants.push(a[t][t].clone());
        t += 1;
    }
    (invariants, vinv)
}

fn col_swap(m: &mut IMat, a: usize, b: usize) {
    if a == b {
        return;
    }
    for row in m.iter_mut() {
        row.swap(a, b);
    }
}

fn col_sub(m: &mut IMat, target: usize, source: usize, q: &BigInt) {
    if q.is_zero() {
        return;
    }
    for row in m.iter_mut() {
        let s = row[source].clone();
        row[target] -= q * s;
    }
}

fn vinv_row_add(v: &mut IMat, target: usize, source: usize, q: &BigInt) {
    if q.is_zero() {
        return;
    }
    let src = v[source].clone();
    for (t, s) in v[target].iter_mut().zip(src.iter()) {
        *t += q * s;
    }
}

/// Basis of the saturation of the row space: the full subgroup of Z^d whose
/// rational span equals span(M).
pub fn saturation(m: &IMat) -> IMat {
    let (inv, vinv) = snf_invariants_vinv(m);
    vinv.into_iter().take(inv.len()).collect()
}

/// A full-row-rank integer matrix spans a primitive subgroup iff all Smith
/// invariants are 1.
pub fn is_primitive(m: &IMat) -> bool {
    let (inv, _) = snf_invariants_vinv(m);
    inv.len() == m.len() && inv.iter().all(|s| s.is_one())
}

/// Canonical basis (HNF rows) of the sum of two row spaces.
pub fn rowspace_sum(a: &IMat, b: &IMat) -> IMat {
    let mut stacked = a.clone();
    stacked.extend(b.iter().cloned());
    hnf(&stacked)
        .into_iter()
        .filter(|row| row.iter().any(|x| !x.is_zero()))
        .collect()
}

/// Canonical basis of the intersection of two row spaces.
pub fn rowspace_intersection(a: &IMat, b: &IMat) -> IMat {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let cols = a[0].len();
    let mut stacked = a.clone();
    for row in b {
        stacked.push(row.iter().map(|x| -x.clone()).collect());
    }
    let kernel = left_kernel(&stacked);
    let gens: IMat = kernel
        .iter()
        .map(|xy| {
            let mut v = vec![BigInt::zero(); cols];
            for (i, coeff) in xy.iter().take(a.len()).enumerate() {
                for (vc, ac) in v.iter_mut().zip(a[i].iter()) {
                    *vc += coeff * ac;
                }
            }
            v
        })
        .collect();
    hnf(&gens)
        .into_iter()
        .filter(|row| row.iter().any(|x| !x.is_zero()))
        .collect()
}
