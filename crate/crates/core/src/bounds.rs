//! Closed-form dimension-bound evaluators.
//!
//! Two families of upper bounds are computed here, exactly:
//!
//! * **fixed matrix part** ([`bound_fixed_theta`]) — for divergence sets in
//!   the shift variable, the bound is a minimum over a pivot group `k` of
//!   `(1/w_k) Σ_i s_i (max{w_i, w_k} − w_i q + w_i E)`, where the `w_i` are
//!   the distinct weight values, `s_i` the fractal dimension carried by each
//!   group, and `E` an escape-of-mass average (lower average for the
//!   Hausdorff bound, upper for packing);
//! * **fixed shift part** ([`bound_fixed_xi`]) — for divergence sets in the
//!   matrix variable on a product fractal `K`, the bound is
//!   `dim_P(K) − (q/(a₁+b₁))·min_l η_l w_l`, plus a uniform-approximation
//!   variant with the extra term `η₁ a_m b_n ω/(a_m + b_n + a_m ω)` inside
//!   the parenthesis.
//!
//! The exponents `η_l` come from the closed-form critical-exponent bounds
//! when the fractal shape admits them (cube, single column, single row) and
//! from a caller-supplied [`EtaProfile`] otherwise.  On the cube the identity
//! `min_l η_l w_l = min{m·a_m, n·b_n}` is asserted during evaluation.
//! [`bound_corollary_suite`] evaluates the specialized closed forms
//! (telescoped equal-weight bound, cube formula, Cantor scaling, the
//! ω-variant) and cross-checks each against its parent evaluation, which must
//! agree exactly.
//!
//! Values are carried as [`LinReal`] — rational whenever the inputs are, with
//! log-ratio fractal dimensions kept symbolic — and clamped to
//! `[0, ambient dimension]` with an explicit flag when a formula leaves that
//! range.

use std::cmp::Ordering;

use num_traits::{One, Signed, Zero};

use crate::exact::logreal::LinReal;
use crate::exact::Q;
use crate::fractal::ProductFractal;
use crate::height::{zeta_lower_bounds, EtaProfile, ZetaCase};
use crate::weights::{weight_exponents, Weights};
use crate::{Error, Result};

fn q_of(n: usize) -> Q {
    Q::from_integer(num_bigint::BigInt::from(n))
}

/// One evaluated dimension bound.
#[derive(Clone, Debug)]
pub struct BoundReport {
    /// Stable formula identifier, e.g. `"fixed-xi/divergence"`.
    pub formula: &'static str,
    /// Human-readable echo of the inputs the value was computed from.
    pub inputs: String,
    /// The bound, clamped to `[0, ambient]`.
    pub value: LinReal,
    /// The raw formula value before clamping.
    pub raw: LinReal,
    /// Whether clamping changed the value.
    pub clamped: bool,
    /// Ambient dimension of the host space (the clamp ceiling).
    pub ambient: LinReal,
    /// Minimizing pivot (group index `k` or level `l`, 1-based) when the
    /// formula is a minimum.
    pub pivot: Option<usize>,
}

impl BoundReport {
    fn new(
        formula: &'static str,
        inputs: String,
        raw: LinReal,
        ambient: LinReal,
        pivot: Option<usize>,
    ) -> BoundReport {
        let zero = LinReal::zero();
        let (value, clamped) = if raw.cmp_certified(&zero) == Ordering::Less {
            (zero, true)
        } else if raw.cmp_certified(&ambient) == Ordering::Greater {
            (ambient.clone(), true)
        } else {
            (raw.clone(), false)
        };
        BoundReport {
            formula,
            inputs,
            value,
            raw,
            clamped,
            ambient,
            pivot,
        }
    }

    pub fn value_f64(&self) -> f64 {
        self.value.to_f64()
    }

    /// Decimal rendering of the bound (truncated, not rounded).
    pub fn display(&self, digits: u32) -> String {
        self.value.decimal_string(digits)
    }
}

fn check_unit_range(name: &str, x: &Q, allow_zero: bool) -> Result<()> {
    let ok_low = if allow_zero {
        !x.is_negative()
    } else {
        x.is_positive()
    };
    if !ok_low || x > &Q::one() {
        let low = if allow_zero { "[0" } else { "(0" };
        return Err(Error::Domain(format!("{name} must lie in {low}, 1], got {x}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Fixed matrix part
// ---------------------------------------------------------------------------

/// Hausdorff and packing bounds for a fixed-matrix divergence set; the two
/// differ only through which escape-of-mass average they consume.
#[derive(Clone, Debug)]
pub struct FixedThetaBounds {
    pub hausdorff: BoundReport,
    pub packing: BoundReport,
}

/// Evaluate `min_k (1/w_k) Σ_i s_i (max{w_i, w_k} − w_i q + w_i E)` over
/// pivot groups `k`, once with `E = em_lower` (Hausdorff) and once with
/// `E = em_upper` (packing).
///
/// `w` holds the distinct weight values, strictly decreasing; `s` the total
/// fractal dimension of the coordinates in each group.
pub fn bound_fixed_theta(
    w: &[Q],
    s: &[LinReal],
    q: &Q,
    em_lower: &Q,
    em_upper: &Q,
) -> Result<FixedThetaBounds> {
    if w.is_empty() || w.len() != s.len() {
        return Err(Error::DimensionMismatch(format!(
            "need matching nonempty group weights and dimensions, got {} and {}",
            w.len(),
            s.len()
        )));
    }
    if w.iter().any(|x| !x.is_positive()) {
        return Err(Error::Domain("group weights must be positive".into()));
    }
    if w.windows(2).any(|p| p[0] <= p[1]) {
        return Err(Error::Domain(
            "group weights must be strictly decreasing".into(),
        ));
    }
    if s.iter().any(LinReal::is_negative_certified) {
        return Err(Error::Domain("group dimensions must be nonnegative".into()));
    }
    check_unit_range("q", q, false)?;
    check_unit_range("lower escape average", em_lower, true)?;
    check_unit_range("upper escape average", em_upper, true)?;
    if em_lower > em_upper {
        return Err(Error::Domain(format!(
            "lower escape average {em_lower} exceeds upper {em_upper}"
        )));
    }

    let ambient = s.iter().fold(LinReal::zero(), |acc, x| acc.add(x));
    let evaluate = |em: &Q| -> (LinReal, usize) {
        let mut best: Option<(LinReal, usize)> = None;
        for (k, wk) in w.iter().enumerate() {
            let mut total = LinReal::zero();
            for (wi, si) in w.iter().zip(s) {
                let coeff = wi.max(wk) - wi * q + wi * em;
                total = total.add(&si.mul_q(&coeff));
            }
            let candidate = total.mul_q(&wk.recip());
            let better = match &best {
                None => true,
                Some((cur, _)) => candidate.cmp_certified(cur) == Ordering::Less,
            };
            if better {
                best = Some((candidate, k + 1));
            }
        }
        best.expect("at least one group")
    };

    let echo = |em: &Q| {
        format!(
            "w=[{}] s=[{}] q={q} escape={em}",
            w.iter().map(Q::to_string).collect::<Vec<_>>().join(", "),
            s.iter().map(|x| x.describe()).collect::<Vec<_>>().join(", "),
        )
    };
    let (h_raw, h_pivot) = evaluate(em_lower);
    let (p_raw, p_pivot) = evaluate(em_upper);
    Ok(FixedThetaBounds {
        hausdorff: BoundReport::new(
            "fixed-theta/hausdorff",
            echo(em_lower),
            h_raw,
            ambient.clone(),
            Some(h_pivot),
        ),
        packing: BoundReport::new(
            "fixed-theta/packing",
            echo(em_upper),
            p_raw,
            ambient,
            Some(p_pivot),
        ),
    })
}

/// Split a weight vector into maximal runs of equal values, returning the
/// distinct weights with the unit dimension mass of each run — the grouping
/// [`bound_fixed_theta`] expects for a full cube in the shift variable.
pub fn weight_groups(a: &[Q]) -> (Vec<Q>, Vec<LinReal>) {
    let mut w: Vec<Q> = Vec::new();
    let mut s: Vec<LinReal> = Vec::new();
    for x in a {
        if w.last() == Some(x) {
            let last = s.last_mut().expect("runs stay aligned");
            *last = last.add(&LinReal::from_q(Q::one()));
        } else {
            w.push(x.clone());
            s.push(LinReal::from_q(Q::one()));
        }
    }
    (w, s)
}

// ---------------------------------------------------------------------------
// Fixed shift part
// ---------------------------------------------------------------------------

/// Which fixed-shift bound to evaluate: the divergence bound at rate
/// `q ∈ (0, 1]`, or the uniform-approximation variant at quality `ω ≥ 0`.
#[derive(Clone, Debug)]
pub enum XiVariant {
    Divergence { q: Q },
    Uniform { omega: Q },
}

/// `dim_P(K) − (q/(a₁+b₁))·min_l η_l w_l`, or the ω-variant
/// `dim_P(K) − (1/(a₁+b₁))·(min_l η_l w_l + η₁ a_m b_n ω/(a_m+b_n+a_m ω))`.
///
/// The exponents `η_l` default to the closed-form critical-exponent bounds
/// of the grid (cube / single column / single row); grids without a closed
/// form need `profile`.  A supplied profile always wins.  On the cube the
/// evaluation asserts `min_l η_l w_l = min{m·a_m, n·b_n}`.
pub fn bound_fixed_xi(
    grid: &ProductFractal,
    weights: &Weights,
    variant: &XiVariant,
    profile: Option<&EtaProfile>,
) -> Result<BoundReport> {
    let d = weights.d();
    let etas: Vec<LinReal> = match profile {
        Some(p) => {
            if p.d() != d {
                return Err(Error::DimensionMismatch(format!(
                    "profile has dimension {}, weights have {d}",
                    p.d()
                )));
            }
            // Shape agreement is still required even though the η come from
            // the caller.
            zeta_lower_bounds(grid, weights)?;
            p.etas().iter().cloned().map(LinReal::from_q).collect()
        }
        None => {
            let report = zeta_lower_bounds(grid, weights)?;
            match report.bounds {
                Some(b) => b,
                None => {
                    return Err(Error::Domain(
                        "no closed-form exponents for this grid shape; supply a profile".into(),
                    ))
                }
            }
        }
    };

    let wl = weight_exponents(weights);
    let mut min_term: Option<(LinReal, usize)> = None;
    for (idx, eta) in etas.iter().enumerate() {
        let l = idx + 1;
        let candidate = eta.mul_q(wl.get(l));
        let better = match &min_term {
            None => true,
            Some((cur, _)) => candidate.cmp_certified(cur) == Ordering::Less,
        };
        if better {
            min_term = Some((candidate, l));
        }
    }
    let (min_val, pivot) = min_term.expect("d ≥ 2 gives at least one level");

    let is_auto_cube = profile.is_none()
        && zeta_lower_bounds(grid, weights)?.case == ZetaCase::Cube;
    let a_m = weights.a.last().expect("m ≥ 1");
    let b_n = weights.b.last().expect("n ≥ 1");
    if is_auto_cube {
        let closed = q_of(weights.m) * a_m;
        let closed = closed.min(q_of(weights.n) * b_n);
        assert_eq!(
            min_val.cmp_certified(&LinReal::from_q(closed)),
            Ordering::Equal,
            "cube exponent identity failed"
        );
    }

    let a1_b1 = &weights.a[0] + &weights.b[0];
    let dim_k = grid.dimension();
    let (raw, formula, inputs) = match variant {
        XiVariant::Divergence { q } => {
            check_unit_range("q", q, false)?;
            let raw = dim_k.sub(&min_val.mul_q(&(q / &a1_b1)));
            (
                raw,
                "fixed-xi/divergence",
                format!("m={} n={} q={q} pivot_l={pivot}", weights.m, weights.n),
            )
        }
        XiVariant::Uniform { omega } => {
            if omega.is_negative() {
                return Err(Error::Domain(format!("ω must be nonnegative, got {omega}")));
            }
            let eta1 = &etas[0];
            let coeff = &(a_m * b_n * omega) / &(a_m + b_n + &(a_m * omega));
            let inner = min_val.add(&eta1.mul_q(&coeff));
            let raw = dim_k.sub(&inner.mul_q(&a1_b1.recip()));
            (
                raw,
                "fixed-xi/uniform",
                format!("m={} n={} omega={omega} pivot_l={pivot}", weights.m, weights.n),
            )
        }
    };
    Ok(BoundReport::new(formula, inputs, raw, dim_k, Some(pivot)))
}

// ---------------------------------------------------------------------------
// Corollary suite
// ---------------------------------------------------------------------------

/// Parameter slice on which a specialized closed form is evaluated and
/// cross-checked against its parent bound.
#[derive(Clone, Debug)]
pub enum Scenario {
    /// Fixed matrix part, full Lebesgue dimensions, `q = 1`, no escape of
    /// mass: both bounds collapse to zero.
    FixedThetaZeroEmass,
    /// Fixed matrix part with equal weights: the pivot minimum telescopes to
    /// `m(1 − q) + m·E`.
    FixedThetaGeneral { q: Q, emass: Q },
    /// Fixed shift part on the full unit cube:
    /// `mn − (q/(a₁+b₁))·min{m·a_m, n·b_n}`.
    FixedXiCube { q: Q },
    /// Fixed shift part on a uniform middle-thirds grid (single row or single
    /// column): the cube closed form scaled by `log 2/log 3`.
    FixedXiCantor { q: Q },
    /// Uniform-approximation variant on the full unit cube.
    OmegaVariant { omega: Q },
}

fn cross_check(name: &str, closed: &LinReal, parent: &LinReal) -> Result<()> {
    if closed.cmp_certified(parent) != Ordering::Equal {
        return Err(Error::Domain(format!(
            "{name}: closed form {} disagrees with parent evaluation {}",
            closed.describe(),
            parent.describe()
        )));
    }
    Ok(())
}

/// Evaluate the closed form a scenario names, re-derive the same value
/// through the parent bound, and return both reports.  Disagreement is an
/// error, never a silently preferred value.
pub fn bound_corollary_suite(weights: &Weights, scenario: &Scenario) -> Result<Vec<BoundReport>> {
    let (m, n) = (weights.m, weights.n);
    let mq = q_of(m);
    let nq = q_of(n);
    match scenario {
        Scenario::FixedThetaZeroEmass => {
            let (w, s) = weight_groups(&weights.a);
            let parent = bound_fixed_theta(&w, &s, &Q::one(), &Q::zero(), &Q::zero())?;
            let closed = LinReal::zero();
            cross_check("zero-escape (hausdorff)", &closed, &parent.hausdorff.value)?;
            cross_check("zero-escape (packing)", &closed, &parent.packing.value)?;
            let report = BoundReport::new(
                "fixed-theta/zero-escape",
                format!("m={m} q=1 escape=0"),
                closed,
                LinReal::from_q(mq),
                None,
            );
            Ok(vec![report, parent.hausdorff, parent.packing])
        }
        Scenario::FixedThetaGeneral { q, emass } => {
            if weights.a.iter().any(|x| x != &weights.a[0]) {
                return Err(Error::Domain(
                    "the telescoped bound needs equal weights".into(),
                ));
            }
            check_unit_range("q", q, false)?;
            check_unit_range("escape average", emass, true)?;
            let (w, s) = weight_groups(&weights.a);
            let parent = bound_fixed_theta(&w, &s, q, emass, emass)?;
            // m(1 − q) + m·E, clamped the same way the parent is.
            let closed_raw = LinReal::from_q(&mq * &(Q::one() - q + emass));
            let closed = BoundReport::new(
                "fixed-theta/equal-weights",
                format!("m={m} q={q} escape={emass}"),
                closed_raw,
                LinReal::from_q(mq),
                None,
            );
            cross_check("equal-weights (hausdorff)", &closed.value, &parent.hausdorff.value)?;
            cross_check("equal-weights (packing)", &closed.value, &parent.packing.value)?;
            Ok(vec![closed, parent.hausdorff, parent.packing])
        }
        Scenario::FixedXiCube { q } => {
            check_unit_range("q", q, false)?;
            let grid = ProductFractal::uniform_grid(m, n, &crate::fractal::SimilarityIFS::unit_interval())?;
            let parent = bound_fixed_xi(&grid, weights, &XiVariant::Divergence { q: q.clone() }, None)?;
            let min_w = (&mq * weights.a.last().unwrap()).min(&nq * weights.b.last().unwrap());
            let a1_b1 = &weights.a[0] + &weights.b[0];
            let closed_raw = LinReal::from_q(&(&mq * &nq) - &(&(q / &a1_b1) * &min_w));
            let closed = BoundReport::new(
                "fixed-xi/cube-closed-form",
                format!("m={m} n={n} q={q}"),
                closed_raw,
                LinReal::from_q(&mq * &nq),
                None,
            );
            cross_check("cube closed form", &closed.value, &parent.value)?;
            Ok(vec![closed, parent])
        }
        Scenario::FixedXiCantor { q } => {
            if m != 1 && n != 1 {
                return Err(Error::Domain(
                    "the scaled closed form needs a single row or single column".into(),
                ));
            }
            check_unit_range("q", q, false)?;
            let cantor = crate::fractal::SimilarityIFS::middle_thirds();
            let s_dim = cantor.dimension();
            let grid = ProductFractal::uniform_grid(m, n, &cantor)?;
            let parent = bound_fixed_xi(&grid, weights, &XiVariant::Divergence { q: q.clone() }, None)?;
            let min_w = (&mq * weights.a.last().unwrap()).min(&nq * weights.b.last().unwrap());
            let a1_b1 = &weights.a[0] + &weights.b[0];
            let cube_value = &(&mq * &nq) - &(&(q / &a1_b1) * &min_w);
            let closed_raw = s_dim.mul_q(&cube_value);
            let closed = BoundReport::new(
                "fixed-xi/cantor-closed-form",
                format!("m={m} n={n} q={q}"),
                closed_raw,
                s_dim.mul_q(&(&mq * &nq)),
                None,
            );
            cross_check("cantor closed form", &closed.value, &parent.value)?;
            Ok(vec![closed, parent])
        }
        Scenario::OmegaVariant { omega } => {
            if omega.is_negative() {
                return Err(Error::Domain(format!("ω must be nonnegative, got {omega}")));
            }
            let grid = ProductFractal::uniform_grid(m, n, &crate::fractal::SimilarityIFS::unit_interval())?;
            let parent = bound_fixed_xi(
                &grid,
                weights,
                &XiVariant::Uniform { omega: omega.clone() },
                None,
            )?;
            let a_m = weights.a.last().unwrap();
            let b_n = weights.b.last().unwrap();
            let min_w = (&mq * a_m).min(&nq * b_n);
            let a1_b1 = &weights.a[0] + &weights.b[0];
            // The cube's η₁ is m, so the ω-term is m·a_m·b_n·ω/(a_m+b_n+a_m·ω).
            let omega_term = &(&(&mq * a_m) * &(b_n * omega)) / &(a_m + b_n + &(a_m * omega));
            let closed_raw =
                LinReal::from_q(&(&mq * &nq) - &(&(min_w + omega_term) / &a1_b1));
            let closed = BoundReport::new(
                "fixed-xi/uniform-closed-form",
                format!("m={m} n={n} omega={omega}"),
                closed_raw,
                LinReal::from_q(&mq * &nq),
                None,
            );
            cross_check("uniform closed form", &closed.value, &parent.value)?;
            Ok(vec![closed, parent])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qi, qq};
    use crate::fractal::SimilarityIFS;

    fn lr(n: i64) -> LinReal {
        LinReal::from_q(qi(n))
    }

    fn ones(k: usize) -> Vec<LinReal> {
        vec![lr(1); k]
    }

    #[test]
    fn fixed_theta_pivot_scan_prefers_the_small_weight() {
        let w = [qq(2, 3), qq(1, 3)];
        let b = bound_fixed_theta(&w, &ones(2), &qi(1), &qi(0), &qi(0)).unwrap();
        assert_eq!(b.hausdorff.value, LinReal::zero());
        assert_eq!(b.hausdorff.pivot, Some(2));
        assert!(!b.hausdorff.clamped);
        assert_eq!(b.packing.value, LinReal::zero());
        // Pivot 1 alone would give 1/2, so the scan matters.
        let k1_only = bound_fixed_theta(&w[..1], &ones(1), &qi(1), &qi(0), &qi(0)).unwrap();
        assert_eq!(k1_only.hausdorff.value, LinReal::zero());
    }

    #[test]
    fn fixed_theta_full_escape_reaches_the_ambient_dimension() {
        // Equal weights on a 2-dimensional cube: one group, w = 1/2, s = 2.
        let b = bound_fixed_theta(&[qq(1, 2)], &[lr(2)], &qi(1), &qi(0), &qi(1)).unwrap();
        assert_eq!(b.hausdorff.value, LinReal::zero());
        assert_eq!(b.packing.value, lr(2));
        assert!(!b.packing.clamped);
    }

    #[test]
    fn fixed_theta_telescopes_and_clamps_at_ambient() {
        // m = 3 equal weights, q = 1/2: H = 3(1/2 + 1/4) = 9/4,
        // P raw = 3(1/2 + 3/4) = 15/4 > 3 → clamped.
        let b = bound_fixed_theta(&[qq(1, 3)], &[lr(3)], &qq(1, 2), &qq(1, 4), &qq(3, 4)).unwrap();
        assert_eq!(b.hausdorff.value, LinReal::from_q(qq(9, 4)));
        assert_eq!(b.packing.raw, LinReal::from_q(qq(15, 4)));
        assert!(b.packing.clamped);
        assert_eq!(b.packing.value, lr(3));
    }

    #[test]
    fn fixed_theta_monotone_in_rate_and_escape() {
        let w = [qq(3, 5), qq(2, 5)];
        let s = ones(2);
        let at = |q: Q, em: Q| {
            bound_fixed_theta(&w, &s, &q, &em, &em)
                .unwrap()
                .hausdorff
                .value
        };
        // Nonincreasing in q.
        assert_eq!(
            at(qq(1, 2), qq(1, 4)).cmp_certified(&at(qi(1), qq(1, 4))),
            Ordering::Greater
        );
        // Nondecreasing in escape mass.
        assert_eq!(
            at(qq(1, 2), qq(3, 4)).cmp_certified(&at(qq(1, 2), qq(1, 4))),
            Ordering::Greater
        );
    }

    #[test]
    fn fixed_theta_validates_inputs() {
        let s = ones(2);
        let w = [qq(2, 3), qq(1, 3)];
        assert!(bound_fixed_theta(&[], &[], &qi(1), &qi(0), &qi(0)).is_err());
        assert!(bound_fixed_theta(&w, &ones(1), &qi(1), &qi(0), &qi(0)).is_err());
        assert!(bound_fixed_theta(&[qq(1, 3), qq(2, 3)], &s, &qi(1), &qi(0), &qi(0)).is_err());
        assert!(bound_fixed_theta(&w, &s, &qi(0), &qi(0), &qi(0)).is_err());
        assert!(bound_fixed_theta(&w, &s, &qi(2), &qi(0), &qi(0)).is_err());
        assert!(bound_fixed_theta(&w, &s, &qi(1), &qi(-1), &qi(0)).is_err());
        assert!(bound_fixed_theta(&w, &s, &qi(1), &qq(1, 2), &qq(1, 4)).is_err());
        assert!(bound_fixed_theta(&w, &s, &qi(1), &qi(0), &qi(2)).is_err());
    }

    #[test]
    fn weight_groups_collapse_runs() {
        let (w, s) = weight_groups(&[qq(1, 2), qq(1, 4), qq(1, 4)]);
        assert_eq!(w, vec![qq(1, 2), qq(1, 4)]);
        assert_eq!(s, vec![lr(1), lr(2)]);
    }

    #[test]
    fn fixed_xi_cube_two_one_gives_four_thirds() {
        let grid = ProductFractal::uniform_grid(2, 1, &SimilarityIFS::unit_interval()).unwrap();
        let w = Weights::equal(2, 1);
        let report =
            bound_fixed_xi(&grid, &w, &XiVariant::Divergence { q: qi(1) }, None).unwrap();
        assert!(report.value.is_rational());
        assert_eq!(report.value.rat, qq(4, 3));
        assert_eq!(report.pivot, Some(1));
        assert!(!report.clamped);
    }

    #[test]
    fn fixed_xi_cube_matches_the_general_formula() {
        // mn − mn/(m+n) at q = 1, equal weights.
        for (m, n) in [(1usize, 1usize), (2, 2), (3, 2), (2, 3)] {
            let grid =
                ProductFractal::uniform_grid(m, n, &SimilarityIFS::unit_interval()).unwrap();
            let w = Weights::equal(m, n);
            let report =
                bound_fixed_xi(&grid, &w, &XiVariant::Divergence { q: qi(1) }, None).unwrap();
            let mn = qi((m * n) as i64);
            let expect = &mn - &(&mn / &qi((m + n) as i64));
            assert_eq!(report.value.rat, expect, "({m},{n})");
        }
    }

    #[test]
    fn fixed_xi_cantor_line_halves_the_dimension() {
        let grid = ProductFractal::uniform_grid(1, 1, &SimilarityIFS::middle_thirds()).unwrap();
        let w = Weights::equal(1, 1);
        let report =
            bound_fixed_xi(&grid, &w, &XiVariant::Divergence { q: qi(1) }, None).unwrap();
        let half_dim = SimilarityIFS::middle_thirds().dimension().mul_q(&qq(1, 2));
        assert_eq!(report.value.cmp_certified(&half_dim), Ordering::Equal);
        assert!(report.display(6).starts_with("0.31546"));
    }

    #[test]
    fn fixed_xi_omega_variant_interpolates_to_the_limit() {
        let grid = ProductFractal::uniform_grid(1, 1, &SimilarityIFS::unit_interval()).unwrap();
        let w = Weights::equal(1, 1);
        let at = |omega: Q| {
            bound_fixed_xi(&grid, &w, &XiVariant::Uniform { omega }, None)
                .unwrap()
                .value
        };
        // ω = 0 reduces to the plain q = 1 bound.
        let plain = bound_fixed_xi(&grid, &w, &XiVariant::Divergence { q: qi(1) }, None)
            .unwrap()
            .value;
        assert_eq!(at(qi(0)).cmp_certified(&plain), Ordering::Equal);
        assert_eq!(plain.rat, qq(1, 2));
        // ω = 1 gives 1 − (1/2)(1 + 1/3) = 1/3.
        assert_eq!(at(qi(1)).rat, qq(1, 3));
        // Decreasing in ω, approaching 0 as ω → ∞ (value 1/(2+ω) exactly).
        assert_eq!(at(qi(3)).cmp_certified(&at(qi(1))), Ordering::Less);
        let far = at(qi(1_000_000_000));
        assert_eq!(far.rat, qq(1, 1_000_000_002));
    }

    #[test]
    fn fixed_xi_supplied_profile_and_missing_profile() {
        let grid = ProductFractal::uniform_grid(2, 2, &SimilarityIFS::middle_thirds()).unwrap();
        let w = Weights::equal(2, 2);
        // No closed form for a 2×2 fractal grid.
        assert!(bound_fixed_xi(&grid, &w, &XiVariant::Divergence { q: qi(1) }, None).is_err());
        // Supplying η = (1, 1/2, 1): min η_l w_l = 1/2 at l = 1, a₁+b₁ = 1:
        // value = 4·dim(Cantor) − 1/2.
        let profile = EtaProfile::new(4, vec![qi(1), qq(1, 2), qi(1)]).unwrap();
        let report = bound_fixed_xi(
            &grid,
            &w,
            &XiVariant::Divergence { q: qi(1) },
            Some(&profile),
        )
        .unwrap();
        let expect = SimilarityIFS::middle_thirds()
            .dimension()
            .mul_q(&qi(4))
            .sub(&LinReal::from_q(qq(1, 2)));
        assert_eq!(report.value.cmp_certified(&expect), Ordering::Equal);
        assert_eq!(report.pivot, Some(1));
        // Dimension mismatch between profile and weights.
        let wrong = EtaProfile::new(3, vec![qi(1), qi(1)]).unwrap();
        assert!(bound_fixed_xi(&grid, &w, &XiVariant::Divergence { q: qi(1) }, Some(&wrong)).is_err());
    }

    #[test]
    fn fixed_xi_clamps_negative_values_to_zero() {
        let grid = ProductFractal::uniform_grid(1, 1, &SimilarityIFS::middle_thirds()).unwrap();
        let w = Weights::equal(1, 1);
        let profile = EtaProfile::new(2, vec![qi(100)]).unwrap();
        let report = bound_fixed_xi(
            &grid,
            &w,
            &XiVariant::Divergence { q: qi(1) },
            Some(&profile),
        )
        .unwrap();
        assert!(report.clamped);
        assert_eq!(report.value, LinReal::zero());
        assert!(report.raw.is_negative_certified());
    }

    #[test]
    fn fixed_xi_validates_rates() {
        let grid = ProductFractal::uniform_grid(1, 1, &SimilarityIFS::unit_interval()).unwrap();
        let w = Weights::equal(1, 1);
        assert!(bound_fixed_xi(&grid, &w, &XiVariant::Divergence { q: qi(0) }, None).is_err());
        assert!(bound_fixed_xi(&grid, &w, &XiVariant::Divergence { q: qi(2) }, None).is_err());
        assert!(bound_fixed_xi(&grid, &w, &XiVariant::Uniform { omega: qi(-1) }, None).is_err());
        // Grid/weight shape mismatch.
        let w21 = Weights::equal(2, 1);
        assert!(bound_fixed_xi(&grid, &w21, &XiVariant::Divergence { q: qi(1) }, None).is_err());
    }

    fn xorshift(state: &mut u64) -> u64 {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        *state
    }

    fn random_simplex(k: usize, state: &mut u64) -> Vec<Q> {
        let mut parts: Vec<i64> = (0..k).map(|_| (xorshift(state) % 9 + 1) as i64).collect();
        parts.sort_unstable_by(|x, y| y.cmp(x));
        let total: i64 = parts.iter().sum();
        parts.into_iter().map(|p| qq(p, total)).collect()
    }

    #[test]
    fn cube_identity_holds_across_random_weight_systems() {
        // Deterministic xorshift over small rational weight systems.
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..20 {
            let m = (xorshift(&mut state) % 3 + 1) as usize;
            let n = (xorshift(&mut state) % 3 + 1) as usize;
            let w = Weights::new(
                random_simplex(m, &mut state),
                random_simplex(n, &mut state),
            )
            .unwrap();
            let grid =
                ProductFractal::uniform_grid(m, n, &SimilarityIFS::unit_interval()).unwrap();
            // The evaluation itself asserts min_l η_l w_l = min{m·a_m, n·b_n}.
            let report =
                bound_fixed_xi(&grid, &w, &XiVariant::Divergence { q: qi(1) }, None).unwrap();
            assert!(!report.value.is_negative_certified());
        }
    }

    #[test]
    fn corollary_suite_zero_escape_is_zero() {
        let w = Weights::new(vec![qq(2, 3), qq(1, 3)], vec![qi(1)]).unwrap();
        let reports = bound_corollary_suite(&w, &Scenario::FixedThetaZeroEmass).unwrap();
        assert_eq!(reports[0].formula, "fixed-theta/zero-escape");
        assert_eq!(reports[0].value, LinReal::zero());
        assert_eq!(reports[1].value, LinReal::zero());
        assert_eq!(reports[2].value, LinReal::zero());
    }

    #[test]
    fn corollary_suite_partial_escape_stays_below_m() {
        let w = Weights::equal(2, 1);
        let reports = bound_corollary_suite(
            &w,
            &Scenario::FixedThetaGeneral {
                q: qi(1),
                emass: qq(9, 10),
            },
        )
        .unwrap();
        // m·E = 9/5 < m = 2, strictly.
        assert_eq!(reports[0].value.rat, qq(9, 5));
        assert_eq!(
            reports[0].value.cmp_certified(&lr(2)),
            Ordering::Less
        );
        // Unequal weights are outside the telescoped form.
        let skew = Weights::new(vec![qq(2, 3), qq(1, 3)], vec![qi(1)]).unwrap();
        assert!(bound_corollary_suite(
            &skew,
            &Scenario::FixedThetaGeneral {
                q: qi(1),
                emass: qi(0)
            }
        )
        .is_err());
    }

    #[test]
    fn corollary_suite_cube_matches_parent() {
        let reports =
            bound_corollary_suite(&Weights::equal(2, 1), &Scenario::FixedXiCube { q: qi(1) })
                .unwrap();
        assert_eq!(reports[0].formula, "fixed-xi/cube-closed-form");
        assert_eq!(reports[0].value.rat, qq(4, 3));
        assert_eq!(reports[1].value.rat, qq(4, 3));
        // Skewed weights exercise the min{m·a_m, n·b_n} branch.
        let skew = Weights::new(vec![qq(3, 4), qq(1, 4)], vec![qi(1)]).unwrap();
        let reports =
            bound_corollary_suite(&skew, &Scenario::FixedXiCube { q: qi(1) }).unwrap();
        // min{2·(1/4), 1} = 1/2, a₁+b₁ = 7/4 → 2 − (4/7)(1/2) = 12/7.
        assert_eq!(reports[0].value.rat, qq(12, 7));
    }

    #[test]
    fn corollary_suite_cantor_scales_the_cube_value() {
        let reports = bound_corollary_suite(
            &Weights::equal(1, 1),
            &Scenario::FixedXiCantor { q: qi(1) },
        )
        .unwrap();
        let half_dim = SimilarityIFS::middle_thirds().dimension().mul_q(&qq(1, 2));
        assert_eq!(reports[0].value.cmp_certified(&half_dim), Ordering::Equal);
        // A 2×2 shape has no closed form to scale.
        assert!(bound_corollary_suite(
            &Weights::equal(2, 2),
            &Scenario::FixedXiCantor { q: qi(1) }
        )
        .is_err());
    }

    #[test]
    fn corollary_suite_omega_matches_parent() {
        let reports = bound_corollary_suite(
            &Weights::equal(1, 1),
            &Scenario::OmegaVariant { omega: qi(1) },
        )
        .unwrap();
        assert_eq!(reports[0].value.rat, qq(1, 3));
        assert_eq!(reports[1].value.rat, qq(1, 3));
    }
}
