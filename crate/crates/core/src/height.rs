//! Exponent profiles and height functions on the space of affine lattices.
//!
//! The dimension estimates downstream rest on an averaged contraction
//! property of a height function built from the covolume maxima `φ_l` and the
//! affine gauge `ψ = 1/λ̃₀`.  This module provides the pieces that property
//! needs and the instruments to test it numerically:
//!
//! * [`EtaProfile`] — exponent tuples `η_1, …, η_{d−1}` subject to the
//!   reciprocal-convexity constraints, their feasibility margins, the
//!   perturbation that makes a boundary-feasible profile strictly feasible,
//!   and the construction of a profile from critical-exponent lower bounds;
//! * [`zeta_lower_bounds`] — closed-form lower bounds for the critical
//!   integrability exponents of a product self-similar measure in the shapes
//!   where such formulas are known;
//! * [`psi`] and [`height_f`] — exact evaluation of the gauge and of the
//!   height `f_ε = ε⁻² + ε⁻¹ Σ_l φ̃_l^{η_l} + ψ^{η_1}`;
//! * [`ContractionCheck`] — a seeded Monte-Carlo verification that one flow
//!   step contracts the average height, with per-sample log-Lipschitz and
//!   decomposition audits performed in addition to the statistical test;
//! * [`CriticalMc`] — a divergence diagnostic for the defining integral of
//!   the critical exponents, with an adversarial direction search.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::exact::interval::QInterval;
use crate::exact::linalg::{sup_norm, QMat};
use crate::exact::logreal::LinReal;
use crate::exact::powprod::PowProd;
use crate::exact::{q_to_f64, Q};
use crate::fractal::ProductFractal;
use crate::lattice::wedge::{exterior_matrix, index_sets, MultiVector};
use crate::lattice::{AffineLattice, ShortVec, DEFAULT_BUDGET};
use crate::weights::{flow_matrix_exact, unipotent, weight_exponents, FlowTime, NormValue, Weights};
use crate::{Error, Result};

/// Sampling depth used by the contraction check when none is requested.
pub const DEFAULT_CONTRACTION_DEPTH: usize = 16;
/// Sampling depth used by the critical-exponent diagnostic when none is
/// requested.  Deeper words matter here because the integrand blows up near
/// the vanishing locus of the projected direction.
pub const DEFAULT_CRITICAL_DEPTH: usize = 24;

/// Index stream reserved for pilot calibration so the pilot never reuses the
/// sample words of the main run.
const PILOT_STREAM: u64 = 1 << 40;

fn q_usize(n: usize) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn q_ratio(num: usize, den: usize) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

// ---------------------------------------------------------------------------
// Exponent profiles
// ---------------------------------------------------------------------------

/// One reciprocal-convexity constraint `1/η_{i−j} + 1/η_{i+j} ≤ 2/η_i`,
/// recorded through its margin `2/η_i − 1/η_{i−j} − 1/η_{i+j}` under the
/// boundary convention `1/η_0 = 1/η_d = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintMargin {
    pub i: usize,
    pub j: usize,
    pub margin: Q,
}

/// Exponents `η_1, …, η_{d−1}` satisfying the reciprocal-convexity
/// constraints, together with the exact margins of every constraint.
///
/// A profile is *strictly feasible* when every margin is positive; the
/// perturbation [`EtaProfile::perturbed`] turns any feasible profile into a
/// strictly feasible one, raising each margin by exactly `2δj²`.
#[derive(Clone, Debug)]
pub struct EtaProfile {
    d: usize,
    etas: Vec<Q>,
    margins: Vec<ConstraintMargin>,
    strict: bool,
}

impl EtaProfile {
    pub fn new(d: usize, etas: Vec<Q>) -> Result<EtaProfile> {
        if d < 2 {
            return Err(Error::InfeasibleEta(
                "an exponent profile needs dimension at least 2".into(),
            ));
        }
        if etas.len() != d - 1 {
            return Err(Error::InfeasibleEta(format!(
                "dimension {d} needs {} exponents, got {}",
                d - 1,
                etas.len()
            )));
        }
        if let Some(bad) = etas.iter().find(|e| !e.is_positive()) {
            return Err(Error::InfeasibleEta(format!(
                "exponents must be positive, got {bad}"
            )));
        }
        // Reciprocals with the boundary convention u_0 = u_d = 0.
        let mut u = vec![Q::zero(); d + 1];
        for (i, eta) in etas.iter().enumerate() {
            u[i + 1] = eta.recip();
        }
        let mut margins = Vec::new();
        let mut strict = true;
        for i in 1..d {
            for j in 1..=i.min(d - i) {
                let margin = &(&u[i] + &u[i]) - &(&u[i - j] + &u[i + j]);
                if margin.is_negative() {
                    return Err(Error::InfeasibleEta(format!(
                        "constraint (i={i}, j={j}) violated: \
                         1/η_{} + 1/η_{} exceeds 2/η_{i} by {}",
                        i - j,
                        i + j,
                        -margin
                    )));
                }
                if margin.is_zero() {
                    strict = false;
                }
                margins.push(ConstraintMargin { i, j, margin });
            }
        }
        Ok(EtaProfile {
            d,
            etas,
            margins,
            strict,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn etas(&self) -> &[Q] {
        &self.etas
    }

    /// `η_l` for `1 ≤ l ≤ d−1`.
    pub fn eta(&self, l: usize) -> &Q {
        assert!(l >= 1 && l < self.d, "η_{l} is not part of the profile");
        &self.etas[l - 1]
    }

    pub fn margins(&self) -> &[ConstraintMargin] {
        &self.margins
    }

    /// Whether every constraint holds with room to spare.
    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// `α = min over (i,j) of 1 − (η_i/2)(1/η_{i−j} + 1/η_{i+j})`, the
    /// exponent gain available to the decomposition step of the contraction
    /// argument.  Positive exactly when the profile is strictly feasible.
    pub fn alpha(&self) -> Q {
        self.margins
            .iter()
            .map(|c| {
                let half_eta = self.eta(c.i) / q_usize(2);
                &half_eta * &c.margin
            })
            .min()
            .expect("profiles always carry at least one constraint")
    }

    /// The contraction rate `η = min_l w_l η_l`, minimized over
    /// `1 ≤ l ≤ d−1` with the block weight exponents of `w`.
    pub fn flow_exponent(&self, w: &Weights) -> Result<Q> {
        if w.d() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "profile has dimension {}, weights have {}",
                self.d,
                w.d()
            )));
        }
        let wl = weight_exponents(w);
        (1..self.d)
            .map(|l| wl.get(l) * self.eta(l))
            .min()
            .ok_or_else(|| Error::Domain("dimension too small for a flow exponent".into()))
    }

    /// Strictly feasible perturbation: `η_j ↦ 1/(1/η_j + δ q_j)` with
    /// `q_i = i(d−i)`.  Every constraint margin grows by exactly `2δj²`, so
    /// the result is strictly feasible for any `δ > 0`.
    pub fn perturbed(&self, delta: &Q) -> Result<EtaProfile> {
        if !delta.is_positive() {
            return Err(Error::Domain(
                "the feasibility perturbation needs δ > 0".into(),
            ));
        }
        let q = perturbation_exponents(self.d);
        let etas = self
            .etas
            .iter()
            .zip(&q)
            .map(|(eta, qi)| (eta.recip() + delta * qi).recip())
            .collect();
        EtaProfile::new(self.d, etas)
    }
}

/// The concavity weights `q_i = i(d−i)` for `1 ≤ i ≤ d−1` driving the
/// feasibility perturbation; `2q_i − q_{i−j} − q_{i+j} = 2j²` exactly.
pub fn perturbation_exponents(d: usize) -> Vec<Q> {
    (1..d).map(|i| q_usize(i * (d - i))).collect()
}

/// Whether the exponents satisfy the reciprocal-convexity constraints.
pub fn eta_feasible(d: usize, etas: &[Q]) -> bool {
    EtaProfile::new(d, etas.to_vec()).is_ok()
}

/// Build a strictly feasible profile below given positive lower bounds
/// `ζ_1, …, ζ_{d−1}` for the critical exponents: with
/// `κ = (1 + slack)·max_i 1/(q_i ζ_i)` take `η_i = 1/(κ q_i)`.  Then every
/// margin equals `2κj² > 0` and `η_i ≤ ζ_i/(1 + slack)`.
pub fn eta_from_zeta(zetas: &[Q], slack: &Q) -> Result<EtaProfile> {
    if zetas.is_empty() {
        return Err(Error::InfeasibleEta(
            "need at least one critical-exponent bound".into(),
        ));
    }
    if let Some(bad) = zetas.iter().find(|z| !z.is_positive()) {
        return Err(Error::InfeasibleEta(format!(
            "critical-exponent bounds must be positive, got {bad}"
        )));
    }
    if slack.is_negative() {
        return Err(Error::Domain("slack must be nonnegative".into()));
    }
    let d = zetas.len() + 1;
    let q = perturbation_exponents(d);
    let kappa = zetas
        .iter()
        .zip(&q)
        .map(|(z, qi)| (qi * z).recip())
        .max()
        .expect("nonempty")
        * (Q::one() + slack);
    let etas = q.iter().map(|qi| (&kappa * qi).recip()).collect();
    EtaProfile::new(d, etas)
}

// ---------------------------------------------------------------------------
// Critical-exponent lower bounds
// ---------------------------------------------------------------------------

/// Shape of the product measure for which a closed-form critical-exponent
/// bound is available.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZetaCase {
    /// Full unit cube: every factor tiles `[0,1]` (`p·c = 1`).
    Cube,
    /// Single column (`n = 1`).
    SingleColumn,
    /// Single row (`m = 1`).
    SingleRow,
    /// General grid: the exponents are known positive but no formula is
    /// available.
    ExistsPositive,
}

#[derive(Clone, Debug)]
pub struct ZetaReport {
    pub case: ZetaCase,
    /// Lower bound for `ζ_l`, `l = 1..d−1`; `None` in the general case.
    pub bounds: Option<Vec<LinReal>>,
}

/// Closed-form lower bounds for the critical integrability exponents of the
/// grid measure, in the shapes where formulas are known:
///
/// * unit cube — `m/l` for `l ≤ m`, else `n/(m+n−l)`;
/// * one column (`n = 1`) — the sum of the `d−l` smallest factor dimensions;
/// * one row (`m = 1`) — the sum of the `l` smallest factor dimensions.
///
/// Any other grid reports [`ZetaCase::ExistsPositive`] with no values.
pub fn zeta_lower_bounds(grid: &ProductFractal, weights: &Weights) -> Result<ZetaReport> {
    let (m, n) = grid.grid_shape().ok_or_else(|| {
        Error::Domain("critical-exponent bounds need the m×n grid shape".into())
    })?;
    if weights.m != m || weights.n != n {
        return Err(Error::DimensionMismatch(format!(
            "grid is {m}×{n} but weights are {}×{}",
            weights.m, weights.n
        )));
    }
    let d = m + n;
    let factors = grid.factors();
    let is_cube = factors.iter().all(|f| {
        let tiles = (q_usize(f.alphabet_size()) * f.ratio()).is_one();
        let hull = f.hull();
        tiles && hull.lo[0].is_zero() && hull.hi[0].is_one()
    });
    if is_cube {
        let bounds = (1..d)
            .map(|l| {
                let q = if l <= m {
                    q_ratio(m, l)
                } else {
                    q_ratio(n, m + n - l)
                };
                LinReal::from_q(q)
            })
            .collect();
        return Ok(ZetaReport {
            case: ZetaCase::Cube,
            bounds: Some(bounds),
        });
    }
    let sorted_dims = || {
        let mut dims: Vec<LinReal> = factors.iter().map(|f| f.dimension()).collect();
        dims.sort_by(|x, y| x.cmp_certified(y));
        dims
    };
    let sum_smallest = |dims: &[LinReal], count: usize| {
        dims.iter()
            .take(count)
            .fold(LinReal::zero(), |acc, s| acc.add(s))
    };
    if n == 1 {
        let dims = sorted_dims();
        let bounds = (1..d).map(|l| sum_smallest(&dims, d - l)).collect();
        return Ok(ZetaReport {
            case: ZetaCase::SingleColumn,
            bounds: Some(bounds),
        });
    }
    if m == 1 {
        let dims = sorted_dims();
        let bounds = (1..d).map(|l| sum_smallest(&dims, l)).collect();
        return Ok(ZetaReport {
            case: ZetaCase::SingleRow,
            bounds: Some(bounds),
        });
    }
    Ok(ZetaReport {
        case: ZetaCase::ExistsPositive,
        bounds: None,
    })
}

// ---------------------------------------------------------------------------
// The gauge ψ and the height f
// ---------------------------------------------------------------------------

/// `ψ(x) = max_{v ∈ x} ‖v‖⁻¹ = 1/λ̃₀(x)`, infinite exactly when the point is
/// homogeneous (contains the zero vector).
#[derive(Clone, Debug)]
pub struct PsiValue {
    /// `None` encodes `ψ = ∞`.
    pub value: Option<PowProd>,
    /// A shortest vector of the affine lattice (zero in the infinite case).
    pub witness: ShortVec,
}

impl PsiValue {
    pub fn is_infinite(&self) -> bool {
        self.value.is_none()
    }

    pub fn to_f64(&self) -> f64 {
        match &self.value {
            None => f64::INFINITY,
            Some(p) => p.to_f64(),
        }
    }

    /// The exact rational value, when finite and rational.
    pub fn as_q(&self) -> Option<Q> {
        self.value.as_ref().and_then(PowProd::as_rational)
    }
}

/// Evaluate the gauge by exact shortest-vector enumeration.
pub fn psi(x: &AffineLattice, budget: u64) -> Result<PsiValue> {
    let short = x.lambda0_affine(budget)?;
    let value = match &short.value {
        NormValue::Zero => None,
        NormValue::Pos(p) => Some(p.recip()),
    };
    Ok(PsiValue {
        value,
        witness: short,
    })
}

/// The height `f_ε(x) = ε⁻² + ε⁻¹ Σ_{l=1}^{d−1} φ̃_l(x)^{η_l} + ψ(x)^{η_1}`
/// with every ingredient kept in exact form.  `φ̃_l` drops the shift, so the
/// φ-terms agree on a point and on its underlying lattice; the ψ-term is
/// infinite exactly on homogeneous points.
#[derive(Clone, Debug)]
pub struct HeightValue {
    pub eps: Q,
    /// `φ̃_l` for `l = 1..d−1`.
    pub phi: Vec<PowProd>,
    /// `φ̃_l^{η_l}` for `l = 1..d−1`.
    pub phi_pow: Vec<PowProd>,
    /// `ψ^{η_1}`; `None` encodes the infinite value on homogeneous points.
    pub psi_pow: Option<PowProd>,
    pub psi: PsiValue,
    /// False when some covolume enumeration exhausted its budget, making the
    /// φ-terms lower bounds rather than exact values.
    pub certified: bool,
}

impl HeightValue {
    pub fn is_infinite(&self) -> bool {
        self.psi_pow.is_none()
    }

    /// The height; `+∞` on homogeneous points.
    pub fn to_f64(&self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            self.finite_part_f64()
        }
    }

    /// `ε⁻² + ε⁻¹ Σ φ̃_l^{η_l}` plus the ψ-term when finite.  On homogeneous
    /// points this is the φ-only height used to compare orbits that stay in
    /// the homogeneous locus.
    pub fn finite_part_f64(&self) -> f64 {
        let eps = q_to_f64(&self.eps);
        let mut total = eps.powi(-2) + eps.recip() * self.phi_pow.iter().map(PowProd::to_f64).sum::<f64>();
        if let Some(p) = &self.psi_pow {
            total += p.to_f64();
        }
        total
    }

    /// Exact rational value when every term is rational (and the point is not
    /// homogeneous).
    pub fn as_q(&self) -> Option<Q> {
        let psi_term = self.psi_pow.as_ref()?.as_rational()?;
        let eps_inv = self.eps.recip();
        let mut total = &eps_inv * &eps_inv;
        for p in &self.phi_pow {
            total += &eps_inv * &p.as_rational()?;
        }
        Some(total + psi_term)
    }

    /// Certified enclosure of the finite value at the given working
    /// precision; `None` on homogeneous points.
    pub fn eval_interval(&self, bits: u64) -> Option<QInterval> {
        if self.is_infinite() {
            return None;
        }
        let eps_inv = self.eps.recip();
        let mut acc = QInterval::point(&eps_inv * &eps_inv);
        for p in &self.phi_pow {
            acc = acc.add(&p.eval_interval(bits).mul_q(&eps_inv));
        }
        if let Some(p) = &self.psi_pow {
            acc = acc.add(&p.eval_interval(bits));
        }
        Some(acc)
    }
}

/// Evaluate the height at a point, exactly.
pub fn height_f(
    x: &AffineLattice,
    profile: &EtaProfile,
    eps: &Q,
    budget: u64,
) -> Result<HeightValue> {
    let d = x.d();
    if profile.d() != d {
        return Err(Error::DimensionMismatch(format!(
            "profile has dimension {}, point has {d}",
            profile.d()
        )));
    }
    if !eps.is_positive() || eps >= &Q::one() {
        return Err(Error::Domain(format!(
            "the height weight must satisfy 0 < ε < 1, got {eps}"
        )));
    }
    let mut phi = Vec::with_capacity(d - 1);
    let mut phi_pow = Vec::with_capacity(d - 1);
    let mut certified = true;
    for l in 1..d {
        let result = x.phi(l, budget)?;
        certified &= result.certified;
        let value = match result.value {
            NormValue::Pos(p) => p,
            NormValue::Zero => {
                return Err(Error::Domain(
                    "degenerate lattice: a covolume maximum vanished".into(),
                ))
            }
        };
        phi_pow.push(value.pow(profile.eta(l)));
        phi.push(value);
    }
    let psi_value = psi(x, budget)?;
    let psi_pow = psi_value
        .value
        .as_ref()
        .map(|p| p.pow(profile.eta(1)));
    Ok(HeightValue {
        eps: eps.clone(),
        phi,
        phi_pow,
        psi_pow,
        psi: psi_value,
        certified,
    })
}

// ---------------------------------------------------------------------------
// Contraction verification
// ---------------------------------------------------------------------------

/// Constants calibrated for one contraction check.
///
/// `c_hat` plays the role of the uniform integrability constant: it is the
/// largest pilot ratio `mean‖∧^l(g_t u(θ))e_I‖^{−η_l} · t^η` over levels and
/// coordinate directions.  `xi_hat` is the operator-norm envelope
/// `2·sup max(‖g_t u(θ)‖, ‖(g_t u(θ))⁻¹‖)` over the support box of the
/// sampled measure, computed exactly.  `b_hat = 4ε⁻¹·max(0, 1 − c_hat·t^{−η})`
/// is the additive constant of the claimed bound.
#[derive(Clone, Debug)]
pub struct HeightParams {
    pub eps: Q,
    pub t: f64,
    /// Contraction rate `η = min_l w_l η_l`.
    pub eta: Q,
    /// Decomposition exponent gain `α` of the profile.
    pub alpha: Q,
    pub c_hat: f64,
    /// `c_hat · t^{−η}`, the claimed per-step decay factor.
    pub decay: f64,
    pub xi_hat: f64,
    pub b_hat: f64,
    /// Whether `ε` meets the smallness conditions
    /// `(d−1)ε^α ξ ≤ c_hat t^{−η}` and `ε ξ ≤ c_hat t^{−η}` (with
    /// `ξ = xi_hat^{max_l η_l}`) that the contraction argument requires.
    pub eps_admissible: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContractionStatus {
    /// The empirical mean is below the claimed bound.
    Pass,
    /// The mean exceeds the bound although `ε` was admissible.
    Fail,
    /// No verdict: the calibration blew up or `ε` was inadmissible while the
    /// bound was exceeded.
    Inconclusive,
}

/// One pilot ratio from the calibration grid.
#[derive(Clone, Debug)]
pub struct PilotRow {
    pub l: usize,
    pub label: String,
    /// `mean ‖∧^l(g_t u(θ)) v‖^{−η_l}` over the pilot stream.
    pub mean: f64,
}

/// Per-sample audit of the log-Lipschitz property
/// `f(hx)/f(x) ∈ [1/C_h, C_h]` with the exact constant
/// `C_h = max(1, max_l max(‖∧^l h‖, ‖∧^l h⁻¹‖)^{η_l})`.
#[derive(Clone, Debug)]
pub struct LipschitzAudit {
    pub violations: usize,
    /// Largest observed `f(hx)/(C_h f(x))`; at most 1 when the property holds.
    pub max_up: f64,
    /// Largest observed `f(x)/(C_h f(hx))`; at most 1 when the property holds.
    pub max_down: f64,
}

#[derive(Clone, Debug)]
pub struct ContractionReport {
    pub params: HeightParams,
    /// Height of the starting point (φ-only on homogeneous inputs).
    pub f_start: f64,
    pub samples: usize,
    pub seed: u64,
    pub mean: f64,
    pub stderr: f64,
    pub max_sample: f64,
    /// `3·c_hat·t^{−η}·f_start + b_hat`.
    pub bound: f64,
    /// `bound − (mean + 3·stderr)`.
    pub margin: f64,
    pub status: ContractionStatus,
    /// `mean + 3·stderr ≤ bound` with finite calibration.
    pub pass: bool,
    pub pilot: Vec<PilotRow>,
    pub lipschitz: LipschitzAudit,
    /// Count of per-sample failures of the three decomposition inequalities
    /// behind the contraction bound (summand, structural, and paired-level).
    pub chain_violations: usize,
    /// False when the start is homogeneous and the ψ-term is omitted from
    /// both sides.
    pub psi_included: bool,
    pub note: String,
}

/// Seeded Monte-Carlo verification of the one-step height contraction
/// `∫ f(g_t u(θ) x) dμ^{(r)}(θ) ≤ 3·Ĉ·t^{−η}·f(x) + b̂`.
///
/// The constant `Ĉ` is calibrated on a pilot stream and the conclusion is
/// conditional on that calibration; the report carries the pilot data.  In
/// addition to the statistical comparison, every sample is audited against
/// the exact log-Lipschitz bound and the decomposition inequalities, which
/// must hold pointwise with no statistics involved.
#[derive(Clone, Debug)]
pub struct ContractionCheck<'a> {
    weights: Weights,
    time: FlowTime,
    grid: &'a ProductFractal,
    profile: EtaProfile,
    eps: Q,
    scales: Vec<Q>,
    samples: usize,
    pilot_samples: usize,
    depth: usize,
    seed: u64,
    budget: u64,
}

struct SampleAudit {
    f_val: f64,
    up: f64,
    down: f64,
    lipschitz_violation: bool,
    chain_violations: usize,
}

impl<'a> ContractionCheck<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        weights: Weights,
        time: FlowTime,
        grid: &'a ProductFractal,
        profile: EtaProfile,
        eps: Q,
        scales: Vec<Q>,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let (m, n) = grid
            .grid_shape()
            .ok_or_else(|| Error::Domain("the contraction check needs the m×n grid shape".into()))?;
        if weights.m != m || weights.n != n {
            return Err(Error::DimensionMismatch(format!(
                "grid is {m}×{n} but weights are {}×{}",
                weights.m, weights.n
            )));
        }
        if profile.d() != weights.d() {
            return Err(Error::DimensionMismatch(format!(
                "profile has dimension {}, weights have {}",
                profile.d(),
                weights.d()
            )));
        }
        if !eps.is_positive() || eps >= Q::one() {
            return Err(Error::Domain(format!(
                "the height weight must satisfy 0 < ε < 1, got {eps}"
            )));
        }
        if !grid.scale_admissible(&scales) {
            return Err(Error::ScaleOutOfRange(
                "scale entries must lie in Ξ = Π [c, c⁻¹]".into(),
            ));
        }
        if samples < 100 {
            return Err(Error::Domain(format!(
                "the contraction check needs at least 100 samples, got {samples}"
            )));
        }
        // The flow step must lie on the exact grid so that every matrix entry
        // stays rational.
        time.tau_exact()?;
        let pilot_samples = (samples / 4).clamp(100, 2000);
        Ok(ContractionCheck {
            weights,
            time,
            grid,
            profile,
            eps,
            scales,
            samples,
            pilot_samples,
            depth: DEFAULT_CONTRACTION_DEPTH,
            seed,
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_pilot_samples(mut self, pilot: usize) -> Self {
        self.pilot_samples = pilot.max(1);
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    fn theta_matrix(&self, index: u64) -> Result<QMat> {
        let flat = self
            .grid
            .scaled_sample(&self.scales, self.depth, self.seed, index)?;
        let n = self.weights.n;
        let rows = flat.chunks(n).map(|c| c.to_vec()).collect();
        Ok(QMat::from_rows(rows))
    }

    /// Largest pilot ratio over levels and coordinate directions, plus the
    /// pilot table.  The directions `e_I` are the columns of `∧^l(g_t u(θ))`.
    fn calibrate(&self, g: &QMat) -> Result<(f64, Vec<PilotRow>)> {
        let d = self.weights.d();
        let mut sums: Vec<Vec<f64>> = (1..d)
            .map(|l| vec![0.0; index_sets(d, l).len()])
            .collect();
        let partials: Vec<Vec<Vec<f64>>> = (0..self.pilot_samples as u64)
            .into_par_iter()
            .map(|i| -> Result<Vec<Vec<f64>>> {
                let theta = self.theta_matrix(PILOT_STREAM + i)?;
                let u = unipotent(&self.weights, &theta)?;
                let h = g.mul(&u);
                let mut rows = Vec::with_capacity(d - 1);
                for l in 1..d {
                    let ext = exterior_matrix(&h, l);
                    let eta_l = q_to_f64(self.profile.eta(l));
                    let row: Vec<f64> = (0..ext.cols)
                        .map(|j| {
                            let norm = q_to_f64(&sup_norm(&ext.col(j)));
                            if norm == 0.0 {
                                f64::INFINITY
                            } else {
                                norm.powf(-eta_l)
                            }
                        })
                        .collect();
                    rows.push(row);
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        for rows in &partials {
            for (l, row) in rows.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    sums[l][j] += v;
                }
            }
        }
        let mut pilot = Vec::new();
        let mut worst = 0.0f64;
        for (li, level_sums) in sums.iter().enumerate() {
            let l = li + 1;
            let sets = index_sets(d, l);
            for (j, total) in level_sums.iter().enumerate() {
                let mean = total / self.pilot_samples as f64;
                worst = worst.max(mean);
                let label = format!(
                    "e[{}]",
                    sets[j]
                        .iter()
                        .map(|i| (i + 1).to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                );
                pilot.push(PilotRow { l, label, mean });
            }
        }
        Ok((worst, pilot))
    }

    /// Exact operator-norm envelope `2·sup max(‖g u(θ)‖, ‖(g u(θ))⁻¹‖)` over
    /// the support box of the sampled measure.  Row sums of both matrices are
    /// monotone in the entrywise absolute bounds, so the supremum is attained
    /// at the per-entry maxima of the scaled factor hulls.
    fn xi_envelope(&self, g: &QMat) -> Q {
        let m = self.weights.m;
        let n = self.weights.n;
        let bound: Vec<Q> = self
            .grid
            .factors()
            .iter()
            .zip(&self.scales)
            .map(|(f, r)| {
                let hull = f.hull();
                let lo = (r * &hull.lo[0]).abs();
                let hi = (r * &hull.hi[0]).abs();
                lo.max(hi)
            })
            .collect();
        let mut sup_h = Q::zero();
        let mut sup_hinv = Q::zero();
        for i in 0..m {
            let ti = &g.row(i)[i];
            let row_abs: Q = (0..n).map(|j| bound[i * n + j].clone()).sum();
            sup_h = sup_h.max(ti * (Q::one() + &row_abs));
            let inv_sum: Q = (0..n)
                .map(|j| &bound[i * n + j] * &g.row(m + j)[m + j].recip())
                .sum();
            sup_hinv = sup_hinv.max(ti.recip() + inv_sum);
        }
        for j in 0..n {
            let tj = &g.row(m + j)[m + j];
            sup_h = sup_h.max(tj.clone());
            sup_hinv = sup_hinv.max(tj.recip());
        }
        q_usize(2) * sup_h.max(sup_hinv)
    }

    fn audit_sample(
        &self,
        g: &QMat,
        x: &AffineLattice,
        f_start: f64,
        psi_included: bool,
        index: u64,
    ) -> Result<SampleAudit> {
        let d = self.weights.d();
        let theta = self.theta_matrix(index)?;
        let u = unipotent(&self.weights, &theta)?;
        let h = g.mul(&u);
        let y = x.transform(&h)?;
        let fy = height_f(&y, &self.profile, &self.eps, self.budget)?;
        if fy.is_infinite() != !psi_included {
            return Err(Error::Domain(
                "the flow left or entered the homogeneous locus, which is impossible".into(),
            ));
        }
        let f_val = fy.finite_part_f64();

        // Exact log-Lipschitz constant of this group element.
        let neg_theta = {
            let rows = (0..theta.rows)
                .map(|i| theta.row(i).iter().map(|x| -x).collect())
                .collect();
            QMat::from_rows(rows)
        };
        let h_inv = unipotent(&self.weights, &neg_theta)?.mul(&g.inverse()?);
        let mut c_h = 1.0f64;
        for l in 1..d {
            let kappa = exterior_matrix(&h, l)
                .sup_op_norm()
                .max(exterior_matrix(&h_inv, l).sup_op_norm());
            c_h = c_h.max(q_to_f64(&kappa).powf(q_to_f64(self.profile.eta(l))));
        }
        let tol = 1.0 + 1e-9;
        let up = f_val / (c_h * f_start);
        let down = f_start / (c_h * f_val);
        let lipschitz_violation = up > tol || down > tol;

        // The decomposition inequalities behind the contraction bound hold
        // pointwise; check each at this sample.
        let mut chain_violations = 0usize;
        let eps_f = q_to_f64(&self.eps);
        for p in &fy.phi_pow {
            if p.to_f64() > eps_f * f_val * tol {
                chain_violations += 1;
            }
        }
        if eps_f * eps_f * f_val * tol < 1.0 {
            chain_violations += 1;
        }
        let alpha_f = q_to_f64(&self.profile.alpha());
        let paired_rhs = eps_f.powf(1.0 + alpha_f) * f_val;
        let phi_at = |l: usize| -> f64 {
            if l == 0 || l == d {
                1.0
            } else {
                fy.phi[l - 1].to_f64()
            }
        };
        for l in 1..d {
            let eta_l = q_to_f64(self.profile.eta(l));
            for j in 1..=l.min(d - l) {
                let lhs = (phi_at(l - j) * phi_at(l + j)).powf(eta_l / 2.0);
                if lhs > paired_rhs * tol {
                    chain_violations += 1;
                }
            }
        }
        // Reconstruction identity: the term split must recompose to f.
        let mut recompose = eps_f.powi(-2)
            + eps_f.recip() * fy.phi_pow.iter().map(PowProd::to_f64).sum::<f64>();
        if let Some(p) = &fy.psi_pow {
            recompose += p.to_f64();
        }
        if (recompose - f_val).abs() > 1e-9 * f_val {
            chain_violations += 1;
        }

        Ok(SampleAudit {
            f_val,
            up,
            down,
            lipschitz_violation,
            chain_violations,
        })
    }

    pub fn run(&self, x: &AffineLattice) -> Result<ContractionReport> {
        let d = self.weights.d();
        if x.d() != d {
            return Err(Error::DimensionMismatch(format!(
                "point has dimension {}, weights have {d}",
                x.d()
            )));
        }
        let tau = self.time.tau_exact()?;
        let g = flow_matrix_exact(&self.weights, &tau, 1);
        let t_f = {
            let t_q = self.time.value_interval(&self.weights);
            q_to_f64(&t_q.lo)
        };
        let eta = self.profile.flow_exponent(&self.weights)?;
        let alpha = self.profile.alpha();
        let eta_f = q_to_f64(&eta);

        let fx = height_f(x, &self.profile, &self.eps, self.budget)?;
        let psi_included = !fx.is_infinite();
        let f_start = fx.finite_part_f64();

        let (worst_pilot, pilot) = self.calibrate(&g)?;
        let decay = worst_pilot;
        let c_hat = decay * t_f.powf(eta_f);
        let xi_hat = q_to_f64(&self.xi_envelope(&g));
        let eps_f = q_to_f64(&self.eps);
        let b_hat = 4.0 * eps_f.recip() * (1.0 - decay).max(0.0);
        let eta_max = self
            .profile
            .etas()
            .iter()
            .map(q_to_f64)
            .fold(0.0f64, f64::max);
        let xi_pow = xi_hat.powf(eta_max);
        let eps_admissible = (d - 1) as f64 * eps_f.powf(q_to_f64(&alpha)) * xi_pow <= decay
            && eps_f * xi_pow <= decay;

        let audits: Vec<SampleAudit> = (0..self.samples as u64)
            .into_par_iter()
            .map(|i| self.audit_sample(&g, x, f_start, psi_included, i))
            .collect::<Result<_>>()?;

        let nf = self.samples as f64;
        let mean = audits.iter().map(|a| a.f_val).sum::<f64>() / nf;
        let var = audits
            .iter()
            .map(|a| (a.f_val - mean).powi(2))
            .sum::<f64>()
            / (nf - 1.0);
        let stderr = (var / nf).sqrt();
        let max_sample = audits.iter().map(|a| a.f_val).fold(0.0f64, f64::max);
        let lipschitz = LipschitzAudit {
            violations: audits.iter().filter(|a| a.lipschitz_violation).count(),
            max_up: audits.iter().map(|a| a.up).fold(0.0f64, f64::max),
            max_down: audits.iter().map(|a| a.down).fold(0.0f64, f64::max),
        };
        let chain_violations = audits.iter().map(|a| a.chain_violations).sum();

        let bound = 3.0 * decay * f_start + b_hat;
        let margin = bound - (mean + 3.0 * stderr);
        let calibrated = decay.is_finite() && mean.is_finite();
        let pass = calibrated && mean + 3.0 * stderr <= bound;
        let (status, note) = if !calibrated {
            (
                ContractionStatus::Inconclusive,
                "calibration or sampling produced non-finite values; no verdict".to_string(),
            )
        } else if pass {
            (ContractionStatus::Pass, String::new())
        } else if eps_admissible {
            (
                ContractionStatus::Fail,
                "empirical mean exceeds the claimed bound with admissible ε".to_string(),
            )
        } else {
            (
                ContractionStatus::Inconclusive,
                format!(
                    "bound exceeded but ε = {} fails the smallness conditions at this t; \
                     decrease ε or increase t",
                    self.eps
                ),
            )
        };

        Ok(ContractionReport {
            params: HeightParams {
                eps: self.eps.clone(),
                t: t_f,
                eta,
                alpha,
                c_hat,
                decay,
                xi_hat,
                b_hat,
                eps_admissible,
            },
            f_start,
            samples: self.samples,
            seed: self.seed,
            mean,
            stderr,
            max_sample,
            bound,
            margin,
            status,
            pass,
            pilot,
            lipschitz,
            chain_violations,
            psi_included,
            note,
        })
    }
}

// ---------------------------------------------------------------------------
// Critical-exponent Monte Carlo
// ---------------------------------------------------------------------------

/// Divergence diagnostic for one direction.
#[derive(Clone, Debug)]
pub struct CriticalRow {
    pub label: String,
    /// Running means at n/8, n/4, n/2 and n samples.
    pub running: [f64; 4],
    pub mean: f64,
    /// Relative changes between consecutive running means.
    pub rel_step: [f64; 3],
    /// True when the running mean fails Cauchy behavior across the doubling
    /// checkpoints (or became non-finite).
    pub cauchy_failed: bool,
    /// Hill tail-index estimate of the integrand distribution; values below 1
    /// indicate a divergent mean.  `None` when the tail is degenerate.
    pub tail_index: Option<f64>,
    /// Samples where the projected direction vanished exactly.
    pub unbounded_hits: usize,
}

#[derive(Clone, Debug)]
pub struct CriticalReport {
    pub l: usize,
    pub gamma: f64,
    pub rows: Vec<CriticalRow>,
    /// Index of the worst direction (divergent first, then largest mean).
    pub worst: usize,
    /// True when any direction failed the Cauchy diagnostic.
    pub diverged: bool,
}

/// Monte-Carlo estimate of `∫ ‖π_{l+}(u(θ)v)‖^{−γ} dμ^{(r)}(θ)` with a
/// divergence diagnostic.  The direction `v` can be supplied or searched
/// adversarially over a grid of unit decomposable multivectors (coordinate
/// wedges and their pairwise sums and differences).
#[derive(Clone, Debug)]
pub struct CriticalMc<'a> {
    grid: &'a ProductFractal,
    weights: Weights,
    l: usize,
    gamma: Q,
    scales: Vec<Q>,
    samples: usize,
    depth: usize,
    seed: u64,
}

impl<'a> CriticalMc<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: &'a ProductFractal,
        weights: Weights,
        l: usize,
        gamma: Q,
        scales: Vec<Q>,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let (m, n) = grid.grid_shape().ok_or_else(|| {
            Error::Domain("the critical-exponent diagnostic needs the m×n grid shape".into())
        })?;
        if weights.m != m || weights.n != n {
            return Err(Error::DimensionMismatch(format!(
                "grid is {m}×{n} but weights are {}×{}",
                weights.m, weights.n
            )));
        }
        let d = weights.d();
        if l == 0 || l >= d {
            return Err(Error::Domain(format!(
                "the level must satisfy 1 ≤ l ≤ {}, got {l}",
                d - 1
            )));
        }
        if !gamma.is_positive() {
            return Err(Error::Domain(format!("γ must be positive, got {gamma}")));
        }
        if !grid.scale_admissible(&scales) {
            return Err(Error::ScaleOutOfRange(
                "scale entries must lie in Ξ = Π [c, c⁻¹]".into(),
            ));
        }
        if samples < 80 {
            return Err(Error::Domain(format!(
                "the diagnostic needs at least 80 samples, got {samples}"
            )));
        }
        Ok(CriticalMc {
            grid,
            weights,
            l,
            gamma,
            scales,
            samples,
            depth: DEFAULT_CRITICAL_DEPTH,
            seed,
        })
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    fn candidates(&self, v: Option<&MultiVector>) -> Result<Vec<(String, MultiVector)>> {
        let d = self.weights.d();
        if let Some(given) = v {
            if given.d != d || given.l != self.l {
                return Err(Error::DimensionMismatch(format!(
                    "direction lives in Λ^{} of Q^{}, expected Λ^{} of Q^{d}",
                    given.l, given.d, self.l
                )));
            }
            let norm = given.sup_norm();
            if norm.is_zero() {
                return Err(Error::Domain("the direction must be nonzero".into()));
            }
            let coords = given.coords.iter().map(|c| c / &norm).collect();
            let unit = MultiVector::from_coords(d, self.l, coords)?;
            return Ok(vec![("given".to_string(), unit)]);
        }
        // Adversarial grid: coordinate wedges e_I, then e_I ± e_J for index
        // sets differing in one element (all decomposable, all unit sup-norm).
        let sets = index_sets(d, self.l);
        let dim = sets.len();
        let fmt = |set: &[usize]| {
            set.iter()
                .map(|i| (i + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = Vec::new();
        for (idx, set) in sets.iter().enumerate() {
            let mut coords = vec![Q::zero(); dim];
            coords[idx] = Q::one();
            out.push((
                format!("e[{}]", fmt(set)),
                MultiVector::from_coords(d, self.l, coords)?,
            ));
        }
        for a in 0..dim {
            for b in (a + 1)..dim {
                let common = sets[a].iter().filter(|i| sets[b].contains(i)).count();
                if common + 1 != self.l {
                    continue;
                }
                for (sign, op) in [(Q::one(), "+"), (-Q::one(), "-")] {
                    let mut coords = vec![Q::zero(); dim];
                    coords[a] = Q::one();
                    coords[b] = sign.clone();
                    let mv = MultiVector::from_coords(d, self.l, coords)?;
                    if mv.is_decomposable() {
                        out.push((format!("e[{}]{op}e[{}]", fmt(&sets[a]), fmt(&sets[b])), mv));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn run(&self, v: Option<&MultiVector>) -> Result<CriticalReport> {
        let n = self.weights.n;
        let m = self.weights.m;
        let candidates = self.candidates(v)?;
        let gamma_f = q_to_f64(&self.gamma);

        // One exterior power per sample, shared across candidates.
        let values: Vec<Vec<f64>> = (0..self.samples as u64)
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let flat = self
                    .grid
                    .scaled_sample(&self.scales, self.depth, self.seed, i)?;
                let rows = flat.chunks(n).map(|c| c.to_vec()).collect();
                let u = unipotent(&self.weights, &QMat::from_rows(rows))?;
                let ext = exterior_matrix(&u, self.l);
                candidates
                    .iter()
                    .map(|(_, w)| {
                        let image = ext.mul_vec(&w.coords);
                        let mv = MultiVector::from_coords(w.d, w.l, image)?;
                        let norm = mv.pi_plus(m).sup_norm();
                        Ok(if norm.is_zero() {
                            f64::INFINITY
                        } else {
                            q_to_f64(&norm).powf(-gamma_f)
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        let quarter = self.samples / 8;
        let checkpoints = [quarter, 2 * quarter, 4 * quarter, self.samples];
        let rows: Vec<CriticalRow> = candidates
            .iter()
            .enumerate()
            .map(|(ci, (label, _))| {
                let series: Vec<f64> = values.iter().map(|row| row[ci]).collect();
                let unbounded_hits = series.iter().filter(|x| !x.is_finite()).count();
                let mut running = [0.0f64; 4];
                let mut acc = 0.0f64;
                let mut next = 0usize;
                for (k, x) in series.iter().enumerate() {
                    acc += x;
                    while next < 4 && k + 1 == checkpoints[next] {
                        running[next] = acc / checkpoints[next] as f64;
                        next += 1;
                    }
                }
                let mut rel_step = [0.0f64; 3];
                for k in 0..3 {
                    rel_step[k] = (running[k + 1] - running[k]).abs()
                        / running[k + 1].abs().max(f64::MIN_POSITIVE);
                }
                let cauchy_failed = running.iter().any(|x| !x.is_finite())
                    || rel_step[1].max(rel_step[2]) > 0.25;
                let tail_index = hill_estimate(&series);
                CriticalRow {
                    label: label.clone(),
                    running,
                    mean: running[3],
                    rel_step,
                    cauchy_failed,
                    tail_index,
                    unbounded_hits,
                }
            })
            .collect();

        let worst = rows
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                (a.cauchy_failed as u8, a.mean)
                    .partial_cmp(&(b.cauchy_failed as u8, b.mean))
                    .unwrap_or(Ordering::Equal)
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        let diverged = rows.iter().any(|r| r.cauchy_failed);
        Ok(CriticalReport {
            l: self.l,
            gamma: gamma_f,
            rows,
            worst,
            diverged,
        })
    }
}

/// Hill estimator of the tail index over the top decile of the finite sample
/// values; `None` when the tail is degenerate (too few points or constant).
fn hill_estimate(series: &[f64]) -> Option<f64> {
    let mut finite: Vec<f64> = series
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > 0.0)
        .collect();
    if finite.len() < 30 {
        return None;
    }
    finite.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let k = (finite.len() / 10).clamp(10, 2000).min(finite.len() - 1);
    let pivot = finite[k];
    if pivot <= 0.0 {
        return None;
    }
    let log_sum: f64 = finite[..k].iter().map(|x| (x / pivot).ln()).sum();
    if log_sum <= 0.0 {
        return None;
    }
    Some(k as f64 / log_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qi, qq};
    use crate::fractal::SimilarityIFS;

    fn cantor_line() -> ProductFractal {
        ProductFractal::uniform_grid(1, 1, &SimilarityIFS::middle_thirds()).unwrap()
    }

    #[test]
    fn perturbation_exponents_match_concavity_weights() {
        assert_eq!(perturbation_exponents(3), vec![qi(2), qi(2)]);
        assert_eq!(perturbation_exponents(4), vec![qi(3), qi(4), qi(3)]);
    }

    #[test]
    fn boundary_feasible_profile_d3() {
        let p = EtaProfile::new(3, vec![qi(2), qi(1)]).unwrap();
        assert!(!p.is_strict());
        let margins = p.margins();
        assert_eq!(margins.len(), 2);
        assert_eq!((margins[0].i, margins[0].j), (1, 1));
        assert!(margins[0].margin.is_zero());
        assert_eq!((margins[1].i, margins[1].j), (2, 1));
        assert_eq!(margins[1].margin, qq(3, 2));
        assert!(p.alpha().is_zero());
        assert!(eta_feasible(3, &[qi(2), qi(1)]));
    }

    #[test]
    fn two_dimensional_profiles_are_always_strict() {
        let p = EtaProfile::new(2, vec![qq(7, 3)]).unwrap();
        assert!(p.is_strict());
        assert_eq!(p.margins()[0].margin, qq(6, 7));
        assert_eq!(p.alpha(), qi(1));
    }

    #[test]
    fn infeasible_profiles_are_rejected() {
        assert!(matches!(
            EtaProfile::new(3, vec![qq(1, 10), qi(10)]),
            Err(Error::InfeasibleEta(_))
        ));
        assert!(EtaProfile::new(3, vec![qi(1)]).is_err());
        assert!(EtaProfile::new(3, vec![qi(1), qi(-1)]).is_err());
        assert!(EtaProfile::new(1, vec![]).is_err());
        assert!(!eta_feasible(3, &[qq(1, 10), qi(10)]));
    }

    #[test]
    fn perturbation_raises_margins_by_two_delta_j_squared() {
        let p = EtaProfile::new(4, vec![qi(1), qq(1, 2), qi(1)]).unwrap();
        let margins: Vec<Q> = p.margins().iter().map(|c| c.margin.clone()).collect();
        assert_eq!(margins, vec![qi(0), qi(2), qi(4), qi(0)]);
        assert!(!p.is_strict());

        let delta = qq(1, 10);
        let pert = p.perturbed(&delta).unwrap();
        assert!(pert.is_strict());
        assert_eq!(
            pert.etas(),
            &[qq(10, 13), qq(5, 12), qq(10, 13)]
        );
        for (old, new) in p.margins().iter().zip(pert.margins()) {
            assert_eq!((old.i, old.j), (new.i, new.j));
            let jj = qi((new.j * new.j) as i64);
            assert_eq!(new.margin, &old.margin + &(qi(2) * &delta * jj));
        }
        assert!(p.perturbed(&qi(0)).is_err());
    }

    #[test]
    fn profile_from_zeta_bounds_sits_strictly_inside() {
        let zetas = [qi(2), qi(1)];
        let slack = qq(1, 10);
        let p = eta_from_zeta(&zetas, &slack).unwrap();
        assert!(p.is_strict());
        assert_eq!(p.etas(), &[qq(10, 11), qq(10, 11)]);
        // κ = (1 + 1/10)·max(1/4, 1/2) = 11/20; every margin is 2κj².
        for c in p.margins() {
            let jj = qi((c.j * c.j) as i64);
            assert_eq!(c.margin, qi(2) * qq(11, 20) * jj);
        }
        for (eta, zeta) in p.etas().iter().zip(&zetas) {
            assert!(eta * &(Q::one() + &slack) <= *zeta);
        }
        assert!(eta_from_zeta(&[], &slack).is_err());
        assert!(eta_from_zeta(&[qi(-1)], &slack).is_err());
        assert!(eta_from_zeta(&zetas, &qi(-1)).is_err());
    }

    #[test]
    fn flow_exponent_minimizes_weighted_exponents() {
        let p = EtaProfile::new(3, vec![qi(2), qi(1)]).unwrap();
        let w = Weights::equal(2, 1);
        assert_eq!(p.flow_exponent(&w).unwrap(), qi(1));
        let skew = Weights::new(vec![qq(2, 3), qq(1, 3)], vec![qi(1)]).unwrap();
        assert_eq!(p.flow_exponent(&skew).unwrap(), qq(2, 3));
        let wrong = Weights::equal(1, 1);
        assert!(p.flow_exponent(&wrong).is_err());
    }

    #[test]
    fn zeta_bounds_on_the_unit_cube() {
        let grid = ProductFractal::uniform_grid(2, 1, &SimilarityIFS::unit_interval()).unwrap();
        let report = zeta_lower_bounds(&grid, &Weights::equal(2, 1)).unwrap();
        assert_eq!(report.case, ZetaCase::Cube);
        let bounds = report.bounds.unwrap();
        assert_eq!(bounds.len(), 2);
        assert_eq!(
            bounds[0].cmp_certified(&LinReal::from_q(qi(2))),
            Ordering::Equal
        );
        assert_eq!(
            bounds[1].cmp_certified(&LinReal::from_q(qi(1))),
            Ordering::Equal
        );
    }

    #[test]
    fn zeta_bounds_single_column_sums_smallest_dimensions() {
        let grid = ProductFractal::uniform_grid(2, 1, &SimilarityIFS::middle_thirds()).unwrap();
        let report = zeta_lower_bounds(&grid, &Weights::equal(2, 1)).unwrap();
        assert_eq!(report.case, ZetaCase::SingleColumn);
        let bounds = report.bounds.unwrap();
        let s = SimilarityIFS::middle_thirds().dimension();
        assert_eq!(bounds[0].cmp_certified(&s.add(&s)), Ordering::Equal);
        assert_eq!(bounds[1].cmp_certified(&s), Ordering::Equal);
    }

    #[test]
    fn zeta_bounds_single_row_sorts_mixed_dimensions() {
        let grid = ProductFractal::grid(
            1,
            2,
            vec![
                SimilarityIFS::middle_thirds(),
                SimilarityIFS::unit_interval(),
            ],
        )
        .unwrap();
        let report = zeta_lower_bounds(&grid, &Weights::equal(1, 2)).unwrap();
        assert_eq!(report.case, ZetaCase::SingleRow);
        let bounds = report.bounds.unwrap();
        let s = SimilarityIFS::middle_thirds().dimension();
        let one = LinReal::from_q(qi(1));
        assert_eq!(bounds[0].cmp_certified(&s), Ordering::Equal);
        assert_eq!(bounds[1].cmp_certified(&s.add(&one)), Ordering::Equal);
    }

    #[test]
    fn zeta_bounds_general_grid_only_exists() {
        let grid = ProductFractal::uniform_grid(2, 2, &SimilarityIFS::middle_thirds()).unwrap();
        let report = zeta_lower_bounds(&grid, &Weights::equal(2, 2)).unwrap();
        assert_eq!(report.case, ZetaCase::ExistsPositive);
        assert!(report.bounds.is_none());
    }

    #[test]
    fn zeta_bounds_validate_shapes() {
        let no_grid =
            ProductFractal::product(vec![SimilarityIFS::middle_thirds(); 2]).unwrap();
        assert!(zeta_lower_bounds(&no_grid, &Weights::equal(1, 1)).is_err());
        let grid = ProductFractal::uniform_grid(2, 1, &SimilarityIFS::middle_thirds()).unwrap();
        assert!(zeta_lower_bounds(&grid, &Weights::equal(1, 2)).is_err());
    }

    #[test]
    fn psi_matches_hand_values() {
        let w = Weights::equal(1, 1);
        let theta = QMat::from_rows(vec![vec![qi(0)]]);
        let half_shift = AffineLattice::from_theta_xi(&w, &theta, &[qq(1, 2)]).unwrap();
        assert_eq!(psi(&half_shift, DEFAULT_BUDGET).unwrap().as_q(), Some(qi(2)));

        let basis = QMat::from_rows(vec![vec![qi(4), qi(0)], vec![qi(0), qq(1, 4)]]);
        let stretched = AffineLattice::new(basis, vec![qi(0), qq(1, 8)]).unwrap();
        assert_eq!(psi(&stretched, DEFAULT_BUDGET).unwrap().as_q(), Some(qi(8)));

        let homogeneous = AffineLattice::new(QMat::identity(2), vec![qi(0), qi(0)]).unwrap();
        assert!(psi(&homogeneous, DEFAULT_BUDGET).unwrap().is_infinite());
    }

    #[test]
    fn height_of_half_shifted_lattice_is_112() {
        let w = Weights::equal(1, 1);
        let theta = QMat::from_rows(vec![vec![qi(0)]]);
        let x = AffineLattice::from_theta_xi(&w, &theta, &[qq(1, 2)]).unwrap();
        let profile = EtaProfile::new(2, vec![qi(1)]).unwrap();
        let f = height_f(&x, &profile, &qq(1, 10), DEFAULT_BUDGET).unwrap();
        assert!(!f.is_infinite());
        assert!(f.certified);
        assert_eq!(f.as_q(), Some(qi(112)));
        assert!((f.to_f64() - 112.0).abs() < 1e-9);
        let enclosure = f.eval_interval(64).unwrap();
        assert!(enclosure.lo <= qi(112) && qi(112) <= enclosure.hi);

        // Shrinking ε raises the height; the ε⁻² floor always holds.
        let finer = height_f(&x, &profile, &qq(1, 20), DEFAULT_BUDGET).unwrap();
        assert_eq!(finer.as_q(), Some(qi(422)));
        assert!(f.to_f64() >= 100.0 && finer.to_f64() >= 400.0);
    }

    #[test]
    fn height_infinite_exactly_on_homogeneous_points() {
        let x = AffineLattice::new(QMat::identity(2), vec![qi(0), qi(0)]).unwrap();
        let profile = EtaProfile::new(2, vec![qi(1)]).unwrap();
        let f = height_f(&x, &profile, &qq(1, 10), DEFAULT_BUDGET).unwrap();
        assert!(f.is_infinite());
        assert!(f.psi.is_infinite());
        assert_eq!(f.to_f64(), f64::INFINITY);
        assert!(f.eval_interval(64).is_none());
        // The φ-only part is still usable: ε⁻² + ε⁻¹·φ₁^{η₁} = 100 + 10.
        assert!((f.finite_part_f64() - 110.0).abs() < 1e-9);
    }

    #[test]
    fn height_validates_inputs() {
        let x = AffineLattice::new(QMat::identity(2), vec![qq(1, 2), qi(0)]).unwrap();
        let d3 = EtaProfile::new(3, vec![qi(1), qi(1)]).unwrap();
        assert!(height_f(&x, &d3, &qq(1, 10), DEFAULT_BUDGET).is_err());
        let d2 = EtaProfile::new(2, vec![qi(1)]).unwrap();
        assert!(height_f(&x, &d2, &qi(0), DEFAULT_BUDGET).is_err());
        assert!(height_f(&x, &d2, &qi(1), DEFAULT_BUDGET).is_err());
        assert!(height_f(&x, &d2, &qq(3, 2), DEFAULT_BUDGET).is_err());
    }

    fn toy_check(grid: &ProductFractal, samples: usize, seed: u64) -> ContractionCheck<'_> {
        let w = Weights::equal(1, 1);
        let time = FlowTime::exact(qi(9)).unwrap();
        let profile = EtaProfile::new(2, vec![qq(3, 5)]).unwrap();
        ContractionCheck::new(
            w,
            time,
            grid,
            profile,
            qq(1, 20),
            vec![qi(1)],
            samples,
            seed,
        )
        .unwrap()
        .with_depth(12)
    }

    #[test]
    fn contraction_holds_on_the_cantor_toy() {
        let grid = cantor_line();
        let check = toy_check(&grid, 1500, 11);
        let x = AffineLattice::new(QMat::identity(2), vec![qq(1, 3), qq(1, 2)]).unwrap();
        let report = check.run(&x).unwrap();

        assert_eq!(report.status, ContractionStatus::Pass);
        assert!(report.pass);
        assert!(report.margin > 0.0);
        assert!(report.psi_included);
        // f(x) = 400 + 20·φ₁(Z²)^{3/5} + ψ(x)^{3/5} = 420 + 2^{3/5}.
        let expected = 420.0 + 2.0f64.powf(0.6);
        assert!((report.f_start - expected).abs() < 1e-12);
        assert!(report.params.eps_admissible);
        assert!(report.params.c_hat.is_finite() && report.params.c_hat > 0.0);
        assert!(report.params.b_hat >= 0.0);
        assert!(report.params.xi_hat >= 2.0);
        assert_eq!(report.lipschitz.violations, 0);
        assert!(report.lipschitz.max_up <= 1.0 + 1e-9);
        assert!(report.lipschitz.max_down <= 1.0 + 1e-9);
        assert_eq!(report.chain_violations, 0);
        assert!(!report.pilot.is_empty());

        // Same seed, same verdict, bit for bit.
        let again = toy_check(&grid, 1500, 11).run(&x).unwrap();
        assert_eq!(report.mean.to_bits(), again.mean.to_bits());
        assert_eq!(report.bound.to_bits(), again.bound.to_bits());
    }

    #[test]
    fn contraction_on_homogeneous_input_checks_phi_terms_only() {
        let grid = cantor_line();
        let check = toy_check(&grid, 300, 3);
        let x = AffineLattice::new(QMat::identity(2), vec![qi(0), qi(0)]).unwrap();
        let report = check.run(&x).unwrap();
        assert!(!report.psi_included);
        assert_eq!(report.status, ContractionStatus::Pass);
        assert_eq!(report.lipschitz.violations, 0);
        assert_eq!(report.chain_violations, 0);
    }

    #[test]
    fn contraction_check_validates_inputs() {
        let grid = cantor_line();
        let w = Weights::equal(1, 1);
        let time = FlowTime::exact(qi(9)).unwrap();
        let profile = EtaProfile::new(2, vec![qq(3, 5)]).unwrap();
        // Too few samples.
        assert!(ContractionCheck::new(
            w.clone(),
            time.clone(),
            &grid,
            profile.clone(),
            qq(1, 20),
            vec![qi(1)],
            50,
            0,
        )
        .is_err());
        // Scale outside Ξ.
        assert!(matches!(
            ContractionCheck::new(
                w.clone(),
                time.clone(),
                &grid,
                profile.clone(),
                qq(1, 20),
                vec![qi(5)],
                200,
                0,
            ),
            Err(Error::ScaleOutOfRange(_))
        ));
        // Profile dimension mismatch.
        let d3 = EtaProfile::new(3, vec![qi(1), qi(1)]).unwrap();
        assert!(ContractionCheck::new(
            w.clone(),
            time.clone(),
            &grid,
            d3,
            qq(1, 20),
            vec![qi(1)],
            200,
            0,
        )
        .is_err());
        // Flow times off the exact grid are rejected up front.
        let approx = FlowTime::Approx {
            value: qi(9),
            prec_bits: 64,
        };
        assert!(ContractionCheck::new(
            w,
            approx,
            &grid,
            profile,
            qq(1, 20),
            vec![qi(1)],
            200,
            0,
        )
        .is_err());
    }

    #[test]
    fn critical_integrand_is_one_on_the_expanding_axis() {
        let grid = cantor_line();
        let mc = CriticalMc::new(
            &grid,
            Weights::equal(1, 1),
            1,
            qq(3, 2),
            vec![qi(1)],
            400,
            7,
        )
        .unwrap();
        let e1 = MultiVector::from_coords(2, 1, vec![qi(1), qi(0)]).unwrap();
        let report = mc.run(Some(&e1)).unwrap();
        assert!(!report.diverged);
        let row = &report.rows[0];
        assert_eq!(row.label, "given");
        assert_eq!(row.mean, 1.0);
        assert!(row.running.iter().all(|&r| r == 1.0));
        assert!(row.tail_index.is_none());
        assert_eq!(row.unbounded_hits, 0);
    }

    #[test]
    fn critical_integral_diverges_on_the_contracting_axis() {
        let grid = cantor_line();
        let mc = CriticalMc::new(
            &grid,
            Weights::equal(1, 1),
            1,
            qi(10),
            vec![qi(1)],
            4000,
            5,
        )
        .unwrap();
        let e2 = MultiVector::from_coords(2, 1, vec![qi(0), qi(1)]).unwrap();
        let report = mc.run(Some(&e2)).unwrap();
        assert!(report.diverged);
        assert!(report.rows[0].cauchy_failed);
        // The integrand tail is far into the divergent regime.
        if let Some(tail) = report.rows[0].tail_index {
            assert!(tail < 1.0);
        }
    }

    #[test]
    fn critical_adversarial_search_finds_the_bad_direction() {
        let grid = cantor_line();
        let mc = CriticalMc::new(
            &grid,
            Weights::equal(1, 1),
            1,
            qi(10),
            vec![qi(1)],
            4000,
            5,
        )
        .unwrap();
        let report = mc.run(None).unwrap();
        assert!(report.diverged);
        let worst = &report.rows[report.worst];
        assert!(worst.cauchy_failed);
        assert_ne!(worst.label, "e[1]");
        // The pure expanding direction itself stays flat.
        let e1_row = report.rows.iter().find(|r| r.label == "e[1]").unwrap();
        assert!(!e1_row.cauchy_failed);
        assert_eq!(e1_row.mean, 1.0);
    }

    #[test]
    fn critical_mean_is_finite_below_the_cube_bound() {
        let grid = ProductFractal::uniform_grid(2, 1, &SimilarityIFS::unit_interval()).unwrap();
        let mc = CriticalMc::new(
            &grid,
            Weights::equal(2, 1),
            1,
            qq(3, 2),
            vec![qi(1); 2],
            4000,
            3,
        )
        .unwrap();
        let report = mc.run(None).unwrap();
        assert!(!report.diverged);
        // The worst direction has a genuinely heavy (but integrable) tail:
        // P(integrand > x) = x^{-4/3}, so the Hill index sits near 4/3.
        let worst = &report.rows[report.worst];
        if let Some(tail) = worst.tail_index {
            assert!(tail > 1.05 && tail < 1.7, "tail index {tail}");
        }
    }

    #[test]
    fn critical_mc_validates_inputs() {
        let grid = cantor_line();
        let w = Weights::equal(1, 1);
        assert!(CriticalMc::new(&grid, w.clone(), 0, qi(1), vec![qi(1)], 400, 0).is_err());
        assert!(CriticalMc::new(&grid, w.clone(), 2, qi(1), vec![qi(1)], 400, 0).is_err());
        assert!(CriticalMc::new(&grid, w.clone(), 1, qi(0), vec![qi(1)], 400, 0).is_err());
        assert!(CriticalMc::new(&grid, w.clone(), 1, qi(1), vec![qi(7)], 400, 0).is_err());
        assert!(CriticalMc::new(&grid, w.clone(), 1, qi(1), vec![qi(1)], 10, 0).is_err());
        let mc = CriticalMc::new(&grid, w, 1, qi(1), vec![qi(1)], 400, 0).unwrap();
        let bad_dim = MultiVector::from_coords(3, 1, vec![qi(1), qi(0), qi(0)]).unwrap();
        assert!(mc.run(Some(&bad_dim)).is_err());
        let zero = MultiVector::zero(2, 1);
        assert!(mc.run(Some(&zero)).is_err());
    }
}
