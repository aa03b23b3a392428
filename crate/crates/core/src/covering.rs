//! Covers of divergence sets over product fractals: radius-driven depth
//! schedules, refinement of cylinder covers along a diagonal-flow
//! trajectory with exact measure bookkeeping, covering-count quotients at
//! finite scale, and box-counting slope estimates.
//!
//! Each refinement step tracks two rationals: the measure of the surviving
//! cylinder cover and a recorded upper bound that contracts only on steps
//! where the committed short-vector test fires while the homogeneous
//! trajectory is away from the compact part. The inequality between them is
//! asserted exactly at every step.

use crate::diophantine::TrajectoryPoint;
use crate::exact::linalg::{QMat, QVec};
use crate::exact::logreal::{ln_interval, LinReal};
use crate::exact::powprod::PowProd;
use crate::exact::roots::pow_int;
use crate::exact::{ln_f64, q_to_f64, qi, qpow, Q};
use crate::fractal::{BallConstantReport, BoxRegion, ProductFractal};
use crate::lattice::{AffineLattice, DEFAULT_BUDGET};
use crate::weights::{FlowTime, Weights};
use crate::{diophantine, Error, Result};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Write as _;

/// Default number of sampled shift centers per node in the empirical
/// aliveness test.
pub const DEFAULT_NODE_SAMPLES: usize = 9;

/// Default word-extension depth for interior sample points.
pub const DEFAULT_SAMPLE_DEPTH: usize = 16;

/// One weight block: `size` consecutive top-side coordinates sharing the
/// common value `weight`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightGroup {
    pub size: usize,
    pub weight: Q,
}

/// Parameters of a cover refinement: the expansion base t (one refinement
/// step per power of t), the compactness threshold ε, the short-vector
/// threshold δ, the committed fraction q′, the horizon N, the commitment
/// depth M, and the weight blocks matching the fractal factors.
#[derive(Clone, Debug)]
pub struct CoverParams {
    pub t: Q,
    pub eps: Q,
    pub delta: Q,
    pub q_prime: Q,
    pub horizon: usize,
    pub commit: usize,
    pub groups: Vec<WeightGroup>,
}

impl CoverParams {
    /// Blocks from explicit sizes; each block must cover top coordinates
    /// with a single common weight.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        weights: &Weights,
        sizes: &[usize],
        t: Q,
        eps: Q,
        delta: Q,
        q_prime: Q,
        horizon: usize,
        commit: usize,
    ) -> Result<CoverParams> {
        let groups = blocks_from_sizes(weights, sizes)?;
        let params = CoverParams {
            t,
            eps,
            delta,
            q_prime,
            horizon,
            commit,
            groups,
        };
        params.validate()?;
        Ok(params)
    }

    /// Blocks = maximal runs of equal top weights.
    pub fn grouped(
        weights: &Weights,
        t: Q,
        eps: Q,
        delta: Q,
        q_prime: Q,
        horizon: usize,
        commit: usize,
    ) -> Result<CoverParams> {
        let sizes = maximal_runs(weights);
        CoverParams::new(weights, &sizes, t, eps, delta, q_prime, horizon, commit)
    }

    fn validate(&self) -> Result<()> {
        if self.t <= Q::one() {
            return Err(Error::Domain("expansion base t must exceed 1".into()));
        }
        if !self.eps.is_positive() || !self.delta.is_positive() {
            return Err(Error::Domain(
                "thresholds ε and δ must be positive".into(),
            ));
        }
        if !self.q_prime.is_positive() || self.q_prime > Q::one() {
            return Err(Error::Domain("committed fraction q′ must lie in (0, 1]".into()));
        }
        if self.commit < 1 || self.horizon <= self.commit {
            return Err(Error::Domain(
                "need horizon N > commitment depth M ≥ 1".into(),
            ));
        }
        if self.groups.is_empty() {
            return Err(Error::Domain("at least one weight block required".into()));
        }
        Ok(())
    }

    fn block_weights(&self) -> Vec<Q> {
        self.groups.iter().map(|g| g.weight.clone()).collect()
    }
}

/// Split the top weights at the given block boundaries, checking each block
/// carries one value.
fn blocks_from_sizes(weights: &Weights, sizes: &[usize]) -> Result<Vec<WeightGroup>> {
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::Domain("weight blocks must be nonempty".into()));
    }
    if sizes.iter().sum::<usize>() != weights.a.len() {
        return Err(Error::DimensionMismatch(format!(
            "block sizes sum to {}, but there are {} top weights",
            sizes.iter().sum::<usize>(),
            weights.a.len()
        )));
    }
    let mut groups = Vec::with_capacity(sizes.len());
    let mut at = 0usize;
    for &size in sizes {
        let w = weights.a[at].clone();
        if weights.a[at..at + size].iter().any(|x| *x != w) {
            return Err(Error::Domain(format!(
                "top weights {:?} inside one block differ",
                &weights.a[at..at + size]
            )));
        }
        groups.push(WeightGroup { size, weight: w });
        at += size;
    }
    Ok(groups)
}

/// Maximal runs of equal values in the top weight vector.
fn maximal_runs(weights: &Weights) -> Vec<usize> {
    let mut sizes = Vec::new();
    for w in &weights.a {
        match sizes.last_mut() {
            Some((prev, count)) if *prev == w => *count += 1,
            _ => sizes.push((w, 1usize)),
        }
    }
    sizes.into_iter().map(|(_, c)| c).collect()
}

/// A bracketed cylinder depth. `clamped` marks radii larger than the factor
/// diameter, where the two-sided bracket has no nonnegative solution and
/// the depth is pinned at the boundary value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DepthIndex {
    pub value: usize,
    pub clamped: bool,
}

/// Depth schedules at one step: `refine` has cell diameter comparable to
/// the contracted radius 2δt^{−jw_i}; `cover` repeats the bracket at the
/// slower rate max{w_i, w_pivot}, shifted one level finer so the cell
/// diameter drops strictly below the radius.
#[derive(Clone, Debug)]
pub struct DepthSchedule {
    pub refine: Vec<DepthIndex>,
    pub cover: Vec<DepthIndex>,
}

/// The unique P ≥ 0 with α·c^{P+1} < r ≤ α·c^P, clamped to 0 when r > α.
/// Point (zero-dimensional) factors are pinned at depth 1 by convention.
fn bracket_depth(alpha: &Q, ratio: &Q, point_factor: bool, radius: &PowProd) -> DepthIndex {
    if point_factor {
        return DepthIndex { value: 1, clamped: false };
    }
    if radius.cmp_q(alpha) == Ordering::Greater {
        return DepthIndex { value: 0, clamped: true };
    }
    let mut level = alpha * ratio;
    let mut depth = 0usize;
    while radius.cmp_q(&level) != Ordering::Greater {
        depth += 1;
        level = &level * ratio;
    }
    DepthIndex { value: depth, clamped: false }
}

/// One cover node: per-factor cylinder words and the empirical aliveness
/// flag from the sampled short-vector tests.
#[derive(Clone, Debug)]
pub struct CoverNode {
    pub words: Vec<Vec<usize>>,
    pub alive: bool,
}

/// Per-step bookkeeping row.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub committed: bool,
    pub compact: bool,
    pub contracted: bool,
    pub nodes: usize,
    pub alive: usize,
    pub max_children: usize,
    pub alive_sum: Q,
    pub recorded_sum: Q,
}

/// Refinement state after `step` steps: current nodes, their common depth
/// vector, the running sums, and which steps committed or returned to the
/// compact part so far.
#[derive(Clone, Debug)]
pub struct CoverState {
    pub step: usize,
    pub depths: Vec<DepthIndex>,
    pub nodes: Vec<CoverNode>,
    pub committed_steps: Vec<usize>,
    pub compact_steps: Vec<usize>,
    pub alive_sum: Q,
    pub recorded_sum: Q,
    pub log: Vec<StepRecord>,
}

impl CoverState {
    pub fn alive_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.alive).count()
    }
}

/// A cover refinement bound to a specific flow, parameter matrix, and
/// product fractal. Construction validates the radius–threshold standing
/// assumption 2δ < ε·c_i·t^{−w_i} for every factor and fixes the per-factor
/// ball-intersection constants.
#[derive(Clone, Debug)]
pub struct CoverRun {
    params: CoverParams,
    weights: Weights,
    time: FlowTime,
    theta: QMat,
    fractal: ProductFractal,
    ball_reports: Vec<BallConstantReport>,
    ball_limit: u64,
    samples_per_node: usize,
    sample_depth: usize,
    seed: u64,
    budget: u64,
}

impl CoverRun {
    pub fn new(
        params: CoverParams,
        weights: Weights,
        time: FlowTime,
        theta: QMat,
        fractal: ProductFractal,
        seed: u64,
    ) -> Result<CoverRun> {
        let tau = time.tau_exact()?;
        let step_base = pow_int(&tau, &weights.common_denominator());
        if step_base != params.t {
            return Err(Error::Domain(format!(
                "params base t = {} must equal the flow step τ^D = {}",
                params.t, step_base
            )));
        }
        let sizes: Vec<usize> = params.groups.iter().map(|g| g.size).collect();
        let derived = blocks_from_sizes(&weights, &sizes)?;
        if derived != params.groups {
            return Err(Error::Domain(
                "weight blocks disagree with the top weight vector".into(),
            ));
        }
        if fractal.factors().len() != params.groups.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} fractal factors for {} weight blocks",
                fractal.factors().len(),
                params.groups.len()
            )));
        }
        for (i, (factor, group)) in
            fractal.factors().iter().zip(&params.groups).enumerate()
        {
            if factor.dim() != group.size {
                return Err(Error::DimensionMismatch(format!(
                    "factor {i} has dimension {}, weight block has size {}",
                    factor.dim(),
                    group.size
                )));
            }
        }
        if theta.rows != weights.m || theta.cols != weights.n {
            return Err(Error::DimensionMismatch(format!(
                "θ must be {}×{}, got {}×{}",
                weights.m, weights.n, theta.rows, theta.cols
            )));
        }
        let two_delta = &params.delta + &params.delta;
        for (i, (factor, group)) in
            fractal.factors().iter().zip(&params.groups).enumerate()
        {
            let bound = PowProd::pow_q(&params.t, &-group.weight.clone())
                .mul_q(&(&params.eps * factor.ratio()));
            if bound.cmp_q(&two_delta) != Ordering::Greater {
                return Err(Error::CoveringInvariant(format!(
                    "need 2δ < ε·c·t^{{−w}} in factor {i}: 2δ = {} is not below ε·c·t^{{−w}} = {}",
                    two_delta,
                    bound.describe()
                )));
            }
        }
        let ball_reports: Vec<BallConstantReport> = fractal
            .factors()
            .iter()
            .map(|f| f.ball_intersection_constant())
            .collect::<Result<_>>()?;
        let mut ball_limit = 1u64;
        for r in &ball_reports {
            ball_limit = ball_limit.checked_mul(r.l).ok_or_else(|| {
                Error::Domain("ball-intersection constant product overflows".into())
            })?;
        }
        Ok(CoverRun {
            params,
            weights,
            time,
            theta,
            fractal,
            ball_reports,
            ball_limit,
            samples_per_node: DEFAULT_NODE_SAMPLES,
            sample_depth: DEFAULT_SAMPLE_DEPTH,
            seed,
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn with_node_samples(mut self, k: usize) -> Result<CoverRun> {
        if k == 0 {
            return Err(Error::Domain("need at least one sample per node".into()));
        }
        self.samples_per_node = k;
        Ok(self)
    }

    pub fn with_sample_depth(mut self, depth: usize) -> Result<CoverRun> {
        if depth == 0 {
            return Err(Error::Domain("sample extension depth must be positive".into()));
        }
        self.sample_depth = depth;
        Ok(self)
    }

    pub fn with_budget(mut self, budget: u64) -> CoverRun {
        self.budget = budget;
        self
    }

    pub fn params(&self) -> &CoverParams {
        &self.params
    }

    pub fn fractal(&self) -> &ProductFractal {
        &self.fractal
    }

    /// The product of per-factor ball-intersection constants.
    pub fn ball_limit(&self) -> u64 {
        self.ball_limit
    }

    pub fn ball_constants(&self) -> &[BallConstantReport] {
        &self.ball_reports
    }

    /// Cylinder depths at step j: the refine bracket per factor, and the
    /// cover bracket relative to the pivot block.
    pub fn depth_indices(&self, j: usize, pivot: usize) -> Result<DepthSchedule> {
        if j == 0 {
            return Err(Error::Domain("depth schedules start at step 1".into()));
        }
        if pivot >= self.params.groups.len() {
            return Err(Error::Domain(format!(
                "pivot block {pivot} out of range ({} blocks)",
                self.params.groups.len()
            )));
        }
        let w_pivot = &self.params.groups[pivot].weight;
        let mut refine = Vec::with_capacity(self.params.groups.len());
        let mut cover = Vec::with_capacity(self.params.groups.len());
        for (factor, group) in self.fractal.factors().iter().zip(&self.params.groups) {
            let alpha = factor.diameter();
            refine.push(bracket_depth(
                &alpha,
                factor.ratio(),
                false,
                &self.shrink_radius(&group.weight, j),
            ));
            let slow = group.weight.clone().max(w_pivot.clone());
            let base = bracket_depth(&alpha, factor.ratio(), false, &self.shrink_radius(&slow, j));
            cover.push(DepthIndex {
                value: if base.clamped { 0 } else { base.value + 1 },
                clamped: base.clamped,
            });
        }
        Ok(DepthSchedule { refine, cover })
    }

    /// 2δ·t^{−j·w} as an exact power product.
    fn shrink_radius(&self, w: &Q, j: usize) -> PowProd {
        let two_delta = &self.params.delta + &self.params.delta;
        PowProd::pow_q(&self.params.t, &-(qi(j as i64) * w)).mul_q(&two_delta)
    }

    /// The root state: one node covering the whole fractal.
    pub fn initial_state(&self) -> CoverState {
        let l = self.params.groups.len();
        CoverState {
            step: 0,
            depths: vec![DepthIndex { value: 0, clamped: false }; l],
            nodes: vec![CoverNode {
                words: vec![Vec::new(); l],
                alive: true,
            }],
            committed_steps: Vec::new(),
            compact_steps: Vec::new(),
            alive_sum: Q::one(),
            recorded_sum: Q::one(),
            log: Vec::new(),
        }
    }

    /// The homogeneous flow trajectory shared by every refinement step.
    pub fn trajectory(&self) -> Result<Vec<TrajectoryPoint>> {
        let base = AffineLattice::from_theta_xi(
            &self.weights,
            &self.theta,
            &vec![Q::zero(); self.weights.m],
        )?;
        diophantine::trajectory(
            &self.weights,
            &base,
            &self.time,
            self.params.horizon,
            self.budget,
        )
    }

    /// One refinement step j = state.step + 1.
    ///
    /// Aliveness is the empirical intersection test: a node stays alive when
    /// one of its sampled shift centers satisfies the exact λ̃₀ ≤ δ
    /// predicate at time j. On a committed step away from the compact part
    /// (j ≥ 2), each surviving parent spawns only the sub-cylinders meeting
    /// the radius-2δt^{−jw_i} ball around its witness center — at most the
    /// ball-intersection constant many — and the recorded sum contracts
    /// accordingly; otherwise every sub-cylinder is spawned and the recorded
    /// sum is unchanged.
    pub fn refine_cover(
        &self,
        state: &CoverState,
        trajectory: &[TrajectoryPoint],
        j: usize,
    ) -> Result<CoverState> {
        if j != state.step + 1 {
            return Err(Error::Domain(format!(
                "step {j} does not extend a state at depth {}",
                state.step
            )));
        }
        if trajectory.len() < j {
            return Err(Error::Domain(format!(
                "trajectory too short: step {j} needs {j} flow points, got {}",
                trajectory.len()
            )));
        }
        let point = &trajectory[j - 1];
        if point.k != j as i64 {
            return Err(Error::Domain(format!(
                "trajectory entry {} carries flow power {}, expected {j}",
                j - 1,
                point.k
            )));
        }
        let two_eps = &self.params.eps + &self.params.eps;
        let compact = point.lambda0.value.cmp_q(&two_eps) != Ordering::Greater;

        let l = self.params.groups.len();
        let new_depths: Vec<DepthIndex> = (0..l)
            .map(|i| {
                bracket_depth(
                    &self.fractal.factors()[i].diameter(),
                    self.fractal.factors()[i].ratio(),
                    false,
                    &self.shrink_radius(&self.params.groups[i].weight, j),
                )
            })
            .collect();
        for i in 0..l {
            if new_depths[i].value < state.depths[i].value {
                return Err(Error::CoveringInvariant(format!(
                    "depth schedule not monotone in factor {i}: {} after {}",
                    new_depths[i].value, state.depths[i].value
                )));
            }
        }
        let delta_depth: Vec<usize> = (0..l)
            .map(|i| new_depths[i].value - state.depths[i].value)
            .collect();

        // Pass 1: witness centers of currently alive nodes at time j.
        let witnesses: Vec<Option<QVec>> = state
            .nodes
            .par_iter()
            .map(|node| {
                if node.alive {
                    self.first_passing_sample(&node.words, j)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        let committed = witnesses.iter().any(|w| w.is_some());
        let contracted = j >= 2 && committed && !compact;
        let radii: Vec<PowProd> = self
            .params
            .groups
            .iter()
            .map(|g| self.shrink_radius(&g.weight, j))
            .collect();

        // Pass 2: children, in parent order with lexicographic suffixes.
        let built: Vec<(Vec<CoverNode>, usize)> = state
            .nodes
            .par_iter()
            .zip(&witnesses)
            .map(|(node, witness)| -> Result<(Vec<CoverNode>, usize)> {
                if !node.alive {
                    return Ok((Vec::new(), 0));
                }
                let words_list = if contracted {
                    let Some(center) = witness else {
                        return Ok((Vec::new(), 0));
                    };
                    let kept =
                        self.ball_children(&node.words, center, &delta_depth, &radii)?;
                    if kept.len() as u64 > self.ball_limit {
                        return Err(Error::CoveringInvariant(format!(
                            "node spawned {} ball cells, above the certified limit {}",
                            kept.len(),
                            self.ball_limit
                        )));
                    }
                    kept
                } else {
                    self.all_children(&node.words, &delta_depth)
                };
                let spawned = words_list.len();
                let children = words_list
                    .into_iter()
                    .map(|words| -> Result<CoverNode> {
                        let alive = if committed {
                            self.first_passing_sample(&words, j)?.is_some()
                        } else {
                            true
                        };
                        Ok(CoverNode { words, alive })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((children, spawned))
            })
            .collect::<Result<_>>()?;

        let mut nodes = Vec::new();
        let mut max_children = 0usize;
        for (children, spawned) in built {
            max_children = max_children.max(spawned);
            nodes.extend(children);
        }

        let cell_measure: Q = self
            .fractal
            .factors()
            .iter()
            .zip(&new_depths)
            .map(|(f, d)| qpow(&qi(f.alphabet_size() as i64), -(d.value as i64)))
            .product();
        let alive_count = nodes.iter().filter(|n| n.alive).count();
        let alive_sum = &cell_measure * qi(alive_count as i64);

        let contraction: Q = if contracted {
            let per_factor: Q = self
                .fractal
                .factors()
                .iter()
                .zip(&delta_depth)
                .map(|(f, dd)| qpow(&qi(f.alphabet_size() as i64), -(*dd as i64)))
                .product();
            qi(self.ball_limit as i64) * per_factor
        } else {
            Q::one()
        };
        let allowed = &state.alive_sum * &contraction;
        if alive_sum > allowed {
            return Err(Error::CoveringInvariant(format!(
                "step {j}: alive measure {alive_sum} exceeds the step bound {allowed}"
            )));
        }
        let recorded_sum = &state.recorded_sum * &contraction;
        if alive_sum > recorded_sum {
            return Err(Error::CoveringInvariant(format!(
                "step {j}: alive measure {alive_sum} exceeds the recorded bound {recorded_sum}"
            )));
        }

        let mut committed_steps = state.committed_steps.clone();
        if committed {
            committed_steps.push(j);
        }
        let mut compact_steps = state.compact_steps.clone();
        if compact {
            compact_steps.push(j);
        }
        let mut log = state.log.clone();
        log.push(StepRecord {
            step: j,
            committed,
            compact,
            contracted,
            nodes: nodes.len(),
            alive: alive_count,
            max_children,
            alive_sum: alive_sum.clone(),
            recorded_sum: recorded_sum.clone(),
        });
        Ok(CoverState {
            step: j,
            depths: new_depths,
            nodes,
            committed_steps,
            compact_steps,
            alive_sum,
            recorded_sum,
            log,
        })
    }

    /// Run all steps 1..=N against a precomputed trajectory.
    pub fn run_cover(&self, trajectory: &[TrajectoryPoint]) -> Result<CoverState> {
        let mut state = self.initial_state();
        for j in 1..=self.params.horizon {
            state = self.refine_cover(&state, trajectory, j)?;
        }
        Ok(state)
    }

    /// Same, accumulating a per-step node dump
    /// (`depth,node_word,alive,measure_sum`).
    pub fn run_cover_csv(
        &self,
        trajectory: &[TrajectoryPoint],
    ) -> Result<(CoverState, String)> {
        let mut csv = String::from("depth,node_word,alive,measure_sum\n");
        let mut state = self.initial_state();
        for j in 1..=self.params.horizon {
            state = self.refine_cover(&state, trajectory, j)?;
            for node in &state.nodes {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    j,
                    format_words(&node.words),
                    node.alive,
                    state.alive_sum
                );
            }
        }
        Ok((state, csv))
    }

    /// Exact λ̃₀ ≤ δ at flow power j for the lattice shifted by ξ.
    fn delta_test(&self, xi: &[Q], j: usize) -> Result<bool> {
        AffineLattice::from_theta_xi(&self.weights, &self.theta, xi)?
            .apply_flow(&self.weights, &self.time, j as i64)?
            .affine_min_le(&self.params.delta, false, self.budget)
    }

    /// The first sampled center of the node passing the δ-test at time j.
    fn first_passing_sample(&self, words: &[Vec<usize>], j: usize) -> Result<Option<QVec>> {
        for xi in self.node_samples(words)? {
            if self.delta_test(&xi, j)? {
                return Ok(Some(xi));
            }
        }
        Ok(None)
    }

    /// Deterministic sample points inside the node's product cell, all exact
    /// members of the fractal: the two extreme-map anchors, then
    /// pseudo-random word extensions keyed by (seed, node words).
    fn node_samples(&self, words: &[Vec<usize>]) -> Result<Vec<QVec>> {
        let mut out = Vec::with_capacity(self.samples_per_node);
        out.push(self.anchored_point(words, false)?);
        if self.samples_per_node >= 2 {
            out.push(self.anchored_point(words, true)?);
        }
        let key = node_key(words);
        for extra in 2..self.samples_per_node {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(key ^ (extra as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut coords = Vec::with_capacity(self.weights.m);
            for (factor, word) in self.fractal.factors().iter().zip(words) {
                let p = factor.alphabet_size();
                let ext: Vec<usize> =
                    (0..self.sample_depth).map(|_| rng.gen_range(0..p)).collect();
                let mut point =
                    factor.maps()[*ext.last().expect("depth ≥ 1")].fixed_point(factor.ratio())?;
                for &b in ext[..ext.len() - 1].iter().rev() {
                    point = factor.maps()[b].apply(factor.ratio(), &point);
                }
                for &b in word.iter().rev() {
                    point = factor.maps()[b].apply(factor.ratio(), &point);
                }
                coords.extend(point);
            }
            out.push(coords);
        }
        Ok(out)
    }

    /// The image of the first (last) map's fixed point under the node words.
    fn anchored_point(&self, words: &[Vec<usize>], last: bool) -> Result<QVec> {
        let mut coords = Vec::with_capacity(self.weights.m);
        for (factor, word) in self.fractal.factors().iter().zip(words) {
            let which = if last { factor.alphabet_size() - 1 } else { 0 };
            let mut point = factor.maps()[which].fixed_point(factor.ratio())?;
            for &b in word.iter().rev() {
                point = factor.maps()[b].apply(factor.ratio(), &point);
            }
            coords.extend(point);
        }
        Ok(coords)
    }

    /// All depth extensions of a node, lexicographic per factor.
    fn all_children(&self, words: &[Vec<usize>], delta_depth: &[usize]) -> Vec<Vec<Vec<usize>>> {
        let per_factor: Vec<Vec<Vec<usize>>> = self
            .fractal
            .factors()
            .iter()
            .zip(delta_depth)
            .map(|(f, &dd)| suffixes(f.alphabet_size(), dd))
            .collect();
        combine_words(words, &per_factor)
    }

    /// Depth extensions whose cells meet the per-factor balls around the
    /// witness center.
    fn ball_children(
        &self,
        words: &[Vec<usize>],
        center: &[Q],
        delta_depth: &[usize],
        radii: &[PowProd],
    ) -> Result<Vec<Vec<Vec<usize>>>> {
        let mut per_factor = Vec::with_capacity(words.len());
        let mut offset = 0usize;
        for (i, factor) in self.fractal.factors().iter().enumerate() {
            let block = &center[offset..offset + factor.dim()];
            let mut keep = Vec::new();
            for suffix in suffixes(factor.alphabet_size(), delta_depth[i]) {
                let mut word = words[i].clone();
                word.extend_from_slice(&suffix);
                let region = factor.cylinder_region(&word)?;
                if box_meets_ball(&region, block, &radii[i]) {
                    keep.push(suffix);
                }
            }
            per_factor.push(keep);
            offset += factor.dim();
        }
        Ok(combine_words(words, &per_factor))
    }

    /// Centers of the alive cells, for box-counting input.
    pub fn alive_centers(&self, state: &CoverState) -> Result<Vec<QVec>> {
        state
            .nodes
            .iter()
            .filter(|n| n.alive)
            .map(|n| {
                let mut coords = Vec::with_capacity(self.weights.m);
                for (factor, word) in self.fractal.factors().iter().zip(&n.words) {
                    coords.extend(factor.cylinder_region(word)?.center());
                }
                Ok(coords)
            })
            .collect()
    }

    /// B = 2·L·Π p_i, the per-step growth base of the covering count.
    pub fn count_base(&self) -> BigInt {
        let mut b = BigInt::from(2u32) * BigInt::from(self.ball_limit);
        for f in self.fractal.factors() {
            b *= BigInt::from(f.alphabet_size());
        }
        b
    }

    /// Σ_i s_i·w_i as an exact log-combination.
    fn dimension_weight_sum(&self) -> LinReal {
        let mut acc = LinReal::zero();
        for (factor, group) in self.fractal.factors().iter().zip(&self.params.groups) {
            acc = acc.add(&factor.dimension().mul_q(&group.weight));
        }
        acc
    }

    /// Certified horizon bound: the recorded measure-sum after N steps is at
    /// most B^N·t^{−(Σ s_i w_i)(q′N − #compact)}.
    pub fn horizon_bound_holds(&self, state: &CoverState) -> Result<bool> {
        let n = state.step;
        let i_count = state.compact_steps.len();
        let exponent = &self.params.q_prime * qi(n as i64) - qi(i_count as i64);
        let cap = Q::from_integer(self.count_base().pow(n as u32));
        let sw = self.dimension_weight_sum();
        for bits in [64u64, 128, 256, 512, 1024] {
            let lhs = ln_interval(&state.recorded_sum, bits).add(
                &sw.eval_interval(bits)
                    .mul(&ln_interval(&self.params.t, bits))
                    .mul_q(&exponent),
            );
            let rhs = ln_interval(&cap, bits);
            if lhs.hi <= rhs.lo {
                return Ok(true);
            }
            if lhs.lo > rhs.hi {
                return Ok(false);
            }
        }
        Err(Error::Domain(
            "could not certify the horizon bound comparison".into(),
        ))
    }

    /// The covering-count quotient at scale γ for a pivot block, with its
    /// scale-free limit form.
    pub fn cover_count_bound(
        &self,
        pivot: usize,
        compact_count: usize,
        gamma: &Q,
    ) -> Result<CoverBound> {
        if pivot >= self.params.groups.len() {
            return Err(Error::Domain(format!(
                "pivot block {pivot} out of range ({} blocks)",
                self.params.groups.len()
            )));
        }
        if !gamma.is_positive() {
            return Err(Error::Domain("scale γ must be positive".into()));
        }
        let two_delta = &self.params.delta + &self.params.delta;
        if *gamma >= two_delta {
            return Err(Error::Domain(format!(
                "scale γ = {gamma} too large: need γ < 2δ = {two_delta}"
            )));
        }
        let w_pivot = &self.params.groups[pivot].weight;
        let mut scale_steps = 0usize;
        for n in 1..=100_000usize {
            if self.shrink_radius(w_pivot, n).cmp_q(gamma) != Ordering::Greater {
                scale_steps = n;
                break;
            }
        }
        if scale_steps == 0 {
            return Err(Error::Domain(
                "scale γ too small: step count exceeds 100000".into(),
            ));
        }
        if scale_steps <= self.params.commit {
            return Err(Error::Domain(format!(
                "scale γ too large: N_γ = {scale_steps} does not exceed the commitment depth {}",
                self.params.commit
            )));
        }
        if compact_count > scale_steps {
            return Err(Error::Domain(format!(
                "compact count {compact_count} exceeds N_γ = {scale_steps}"
            )));
        }

        let ln_t = ln_f64(&self.params.t);
        let n = scale_steps as f64;
        let mut d_ln = 0.0f64;
        let mut weighted = 0.0f64;
        for (factor, group) in self.fractal.factors().iter().zip(&self.params.groups) {
            let s = factor.dimension().to_f64();
            let cell = factor.diameter() / (&two_delta * factor.ratio());
            d_ln += s * ln_f64(&cell);
            let w = q_to_f64(&group.weight);
            let slow = w.max(q_to_f64(w_pivot));
            weighted += s * (n * slow - w * q_to_f64(&self.params.q_prime) * n
                + w * compact_count as f64);
        }
        let b = self.count_base();
        let b_ln = ln_f64(&Q::from_integer(b.clone()));
        let numer = d_ln + n * b_ln + weighted * ln_t;
        let denom = -ln_f64(&two_delta) + (n - 1.0) * q_to_f64(w_pivot) * ln_t;
        let ratio = Q::new(BigInt::from(compact_count), BigInt::from(scale_steps));
        let dims: Vec<LinReal> =
            self.fractal.factors().iter().map(|f| f.dimension()).collect();
        let limit = dimension_limit_form(
            &dims,
            &self.params.block_weights(),
            pivot,
            &self.params.q_prime,
            &ratio,
        )?;
        Ok(CoverBound {
            gamma: gamma.clone(),
            scale_steps,
            pivot,
            quotient: numer / denom,
            limit,
            d_ln,
            b,
            ball_limit: self.ball_limit,
            lambda: self
                .ball_reports
                .iter()
                .map(|r| q_to_f64(&r.lambda.value))
                .collect(),
        })
    }
}

/// A covering-count evaluation: the finite-scale quotient, its scale-free
/// limit form, and every constant that entered.
#[derive(Clone, Debug)]
pub struct CoverBound {
    pub gamma: Q,
    pub scale_steps: usize,
    pub pivot: usize,
    pub quotient: f64,
    pub limit: LinReal,
    pub d_ln: f64,
    pub b: BigInt,
    pub ball_limit: u64,
    pub lambda: Vec<f64>,
}

/// (1/w_k)·Σ_i s_i·(max{w_i, w_k} − w_i·q′ + w_i·ρ): the scale-free form of
/// the covering quotient, with ρ the compact-return frequency.
pub fn dimension_limit_form(
    dims: &[LinReal],
    block_weights: &[Q],
    pivot: usize,
    q_prime: &Q,
    compact_ratio: &Q,
) -> Result<LinReal> {
    if dims.is_empty() || dims.len() != block_weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} dimensions for {} weight blocks",
            dims.len(),
            block_weights.len()
        )));
    }
    if pivot >= dims.len() {
        return Err(Error::Domain(format!(
            "pivot block {pivot} out of range ({} blocks)",
            dims.len()
        )));
    }
    let w_pivot = &block_weights[pivot];
    let mut acc = LinReal::zero();
    for (s, w) in dims.iter().zip(block_weights) {
        let coeff =
            (w.clone().max(w_pivot.clone()) - w * q_prime + w * compact_ratio) / w_pivot;
        acc = acc.add(&s.mul_q(&coeff));
    }
    Ok(acc)
}

/// Grid-box counts of a finite point set at each scale, with the least-
/// squares slope of log count against log(1/scale).
#[derive(Clone, Debug)]
pub struct BoxCountCurve {
    pub scales: Vec<(Q, u64)>,
    pub slope: f64,
}

pub fn box_counting_estimate(points: &[QVec], scales: &[Q]) -> Result<BoxCountCurve> {
    if points.is_empty() {
        return Err(Error::Domain("box counting needs at least one point".into()));
    }
    if scales.is_empty() {
        return Err(Error::Domain("box counting needs at least one scale".into()));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch(
            "box counting needs nonempty points of one common dimension".into(),
        ));
    }
    let mut rows = Vec::with_capacity(scales.len());
    for g in scales {
        if !g.is_positive() {
            return Err(Error::Domain("box-counting scales must be positive".into()));
        }
        let mut cells: HashSet<Vec<BigInt>> = HashSet::new();
        for p in points {
            cells.insert(p.iter().map(|x| (x / g).floor().to_integer()).collect());
        }
        rows.push((g.clone(), cells.len() as u64));
    }
    let xs: Vec<f64> = rows.iter().map(|(g, _)| -ln_f64(g)).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, c)| (*c as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(BoxCountCurve { scales: rows, slope })
}

/// Does the closed cell meet the closed sup-ball of (possibly irrational)
/// radius around the center?
fn box_meets_ball(region: &BoxRegion, center: &[Q], radius: &PowProd) -> bool {
    for c in 0..region.dim() {
        let below = &region.lo[c] - &center[c];
        let above = &center[c] - &region.hi[c];
        let gap = below.max(above);
        if gap.is_positive() && radius.cmp_q(&gap) == Ordering::Less {
            return false;
        }
    }
    true
}

/// All words of the given length over 0..p, lexicographic.
fn suffixes(p: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * p);
        for base in &out {
            for b in 0..p {
                let mut w = base.clone();
                w.push(b);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Cartesian product of per-factor suffix choices appended to the parent
/// words, in factor-major lexicographic order.
fn combine_words(parent: &[Vec<usize>], per_factor: &[Vec<Vec<usize>>]) -> Vec<Vec<Vec<usize>>> {
    let mut acc: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for (i, options) in per_factor.iter().enumerate() {
        let mut next = Vec::with_capacity(acc.len() * options.len());
        for partial in &acc {
            for suffix in options {
                let mut words = partial.clone();
                let mut w = parent[i].clone();
                w.extend_from_slice(suffix);
                words.push(w);
                next.push(words);
            }
        }
        acc = next;
    }
    acc
}

/// Stable 64-bit key of a node's words, for per-node sample streams.
fn node_key(words: &[Vec<usize>]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for word in words {
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
        for &b in word {
            h ^= b as u64 + 1;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Factor words joined by '|', letters as base-36 digits.
fn format_words(words: &[Vec<usize>]) -> String {
    words
        .iter()
        .map(|w| {
            w.iter()
                .map(|&b| char::from_digit(b as u32, 36).unwrap_or('?'))
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("|")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{qq, Q};
    use crate::fractal::SimilarityIFS;

    fn cantor_run(
        eps: Q,
        delta: Q,
        q_prime: Q,
        horizon: usize,
        commit: usize,
    ) -> CoverRun {
        let w = Weights::equal(1, 1);
        let params = CoverParams::grouped(
            &w,
            qi(3),
            eps,
            delta,
            q_prime,
            horizon,
            commit,
        )
        .unwrap();
        let fractal = ProductFractal::product(vec![SimilarityIFS::middle_thirds()]).unwrap();
        CoverRun::new(
            params,
            w,
            FlowTime::exact(qi(3)).unwrap(),
            QMat::zeros(1, 1),
            fractal,
            7,
        )
        .unwrap()
    }

    #[test]
    fn depth_bracket_matches_hand_inequalities() {
        // α = 1, c = 1/3, 2δ·t^{−jw} = 0.02·3^{−2} = 1/450: 3^{−6} < 1/450 ≤ 3^{−5}.
        let r = PowProd::pow_q(&qi(3), &qi(-2)).mul_q(&qq(1, 50));
        let d = bracket_depth(&qi(1), &qq(1, 3), false, &r);
        assert_eq!(d, DepthIndex { value: 5, clamped: false });
    }

    #[test]
    fn oversized_radius_clamps_to_zero() {
        let big = PowProd::from_q(&qi(2));
        let d = bracket_depth(&qi(1), &qq(1, 3), false, &big);
        assert!(d.clamped);
        assert_eq!(d.value, 0);
    }

    #[test]
    fn point_factor_depth_is_pinned() {
        let r = PowProd::from_q(&qq(1, 100));
        let d = bracket_depth(&qi(1), &qq(1, 3), true, &r);
        assert_eq!(d, DepthIndex { value: 1, clamped: false });
    }

    #[test]
    fn schedule_through_run_matches_bracket() {
        // δ = 1/100, t = 3, w = 1, j = 2 → refine depth 5, cover depth 6.
        let run = cantor_run(qq(1, 4), qq(1, 100), qq(9, 10), 6, 2);
        let sched = run.depth_indices(2, 0).unwrap();
        assert_eq!(sched.refine[0], DepthIndex { value: 5, clamped: false });
        assert_eq!(sched.cover[0], DepthIndex { value: 6, clamped: false });
        assert!(sched.cover[0].value >= sched.refine[0].value);
    }

    #[test]
    fn equal_weight_blocks_share_depth_sequences() {
        let w = Weights::new(vec![qq(1, 2), qq(1, 2)], vec![qi(1)]).unwrap();
        let params = CoverParams::new(
            &w,
            &[1, 1],
            qi(9),
            qq(1, 4),
            qq(1, 1000),
            qq(9, 10),
            6,
            2,
        )
        .unwrap();
        let fractal = ProductFractal::product(vec![
            SimilarityIFS::middle_thirds(),
            SimilarityIFS::middle_thirds(),
        ])
        .unwrap();
        let run = CoverRun::new(
            params,
            w,
            FlowTime::exact(qi(3)).unwrap(),
            QMat::zeros(2, 1),
            fractal,
            1,
        )
        .unwrap();
        for j in 1..=5 {
            let sched = run.depth_indices(j, 0).unwrap();
            assert_eq!(sched.refine[0], sched.refine[1]);
            assert_eq!(sched.cover[0], sched.cover[1]);
        }
    }

    #[test]
    fn standing_assumption_is_enforced() {
        let w = Weights::equal(1, 1);
        // ε·c·t^{−1} = (1/4)(1/3)(1/3) = 1/36; δ = 1/60 gives 2δ = 1/30 > 1/36.
        let params = CoverParams::grouped(
            &w,
            qi(3),
            qq(1, 4),
            qq(1, 60),
            qq(1, 2),
            6,
            2,
        )
        .unwrap();
        let fractal = ProductFractal::product(vec![SimilarityIFS::middle_thirds()]).unwrap();
        let err = CoverRun::new(
            params,
            w,
            FlowTime::exact(qi(3)).unwrap(),
            QMat::zeros(1, 1),
            fractal,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::CoveringInvariant(_)));
    }

    #[test]
    fn mismatched_blocks_are_rejected() {
        let w = Weights::new(vec![qq(2, 3), qq(1, 3)], vec![qi(1)]).unwrap();
        // One block of size 2 would span two distinct weights.
        assert!(CoverParams::new(
            &w,
            &[2],
            qi(3),
            qq(1, 4),
            qq(1, 1000),
            qq(1, 2),
            6,
            2
        )
        .is_err());
    }

    // The toy refinement: m = n = 1, θ = 0, middle-thirds fractal, t = 3,
    // ε = 1/200, δ = 1/4000, N = 6. Exact facts derivable by hand:
    //   λ₀ at step j is 3^{−j}, so steps 5, 6 are compact (3^{−j} ≤ 2ε = 1/100);
    //   the refine depth is j + 6 (3^{−(j+7)} < 3^{−j}/2000 ≤ 3^{−(j+6)});
    //   the δ-test at step j asks 3^j·dist(ξ, ℤ) ≤ δ, so only cells touching
    //   0 or 1 can stay alive, and both corner cells always do (their anchor
    //   samples are the fixed points 0 and 1).
    fn toy_run() -> CoverRun {
        cantor_run(qq(1, 200), qq(1, 4000), qq(1, 2), 6, 2)
    }

    #[test]
    fn toy_run_refines_as_derived() {
        let run = toy_run();
        let traj = run.trajectory().unwrap();
        let state = run.run_cover(&traj).unwrap();

        assert_eq!(state.step, 6);
        assert_eq!(state.compact_steps, vec![5, 6]);
        assert_eq!(state.committed_steps, vec![1, 2, 3, 4, 5, 6]);
        let contracted: Vec<usize> = state
            .log
            .iter()
            .filter(|r| r.contracted)
            .map(|r| r.step)
            .collect();
        assert_eq!(contracted, vec![2, 3, 4]);

        for (j, rec) in state.log.iter().enumerate() {
            assert_eq!(rec.step, j + 1);
            assert_eq!(state.log[j].alive_sum, {
                let depth = (j + 7) as i64;
                qpow(&qi(2), -depth) * qi(rec.alive as i64)
            });
        }
        let depths: Vec<usize> = state.depths.iter().map(|d| d.value).collect();
        assert_eq!(depths, vec![12]);

        // Only the two corner cells of depth 12 survive, exactly.
        let alive: Vec<&CoverNode> = state.nodes.iter().filter(|n| n.alive).collect();
        assert_eq!(alive.len(), 2);
        assert!(alive.iter().any(|n| n.words[0] == vec![0; 12]));
        assert!(alive.iter().any(|n| n.words[0] == vec![1; 12]));
        assert_eq!(state.alive_sum, qpow(&qi(2), -11));
    }

    #[test]
    fn toy_run_satisfies_step_inequality_against_brute_force() {
        let run = toy_run();
        let traj = run.trajectory().unwrap();
        let delta = qq(1, 4000);

        // Brute-force oracle: a depth-P cell can contain a point with
        // 3^j·dist(ξ, ℤ) ≤ δ only if its interval touches [0, δ3^{−j}] or
        // [1 − δ3^{−j}, 1]. Enumerate all cells at every step and check the
        // run's alive set is contained in the qualifying cells, and that the
        // two-sided measure recursion holds exactly.
        let mut state = run.initial_state();
        let mut prev_alive_sum = Q::one();
        for j in 1..=6usize {
            state = run.refine_cover(&state, &traj, j).unwrap();
            let depth = j + 6;
            let width = qpow(&qq(1, 3), depth as i64);
            let reach = delta.clone() * qpow(&qq(1, 3), j as i64);
            let mut qualifying: HashSet<Vec<usize>> = HashSet::new();
            for word in suffixes(2, depth) {
                let lo: Q = word
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| qi(2 * b as i64) * qpow(&qq(1, 3), i as i64 + 1))
                    .sum();
                let hi = &lo + &width;
                if lo <= reach || hi >= Q::one() - &reach {
                    qualifying.insert(word);
                }
            }
            // Exactly the two corner cells qualify at every step here.
            assert_eq!(qualifying.len(), 2);
            for node in state.nodes.iter().filter(|n| n.alive) {
                assert!(qualifying.contains(&node.words[0]));
            }

            let rec = state.log.last().unwrap();
            let factor = if rec.contracted {
                qi(run.ball_limit() as i64) * qq(1, 2)
            } else {
                Q::one()
            };
            assert!(state.alive_sum <= &factor * &prev_alive_sum);
            assert!(state.alive_sum <= state.recorded_sum);
            prev_alive_sum = state.alive_sum.clone();
        }
    }

    #[test]
    fn toy_run_meets_horizon_bound() {
        let run = toy_run();
        let traj = run.trajectory().unwrap();
        let state = run.run_cover(&traj).unwrap();
        // #compact = 2, q′N = 3: the committed surplus is 1 and the recorded
        // sum must sit below B^6·3^{−s·1}.
        assert!(run.horizon_bound_holds(&state).unwrap());
    }

    #[test]
    fn closed_form_delta_test_agrees_with_lattice() {
        let run = toy_run();
        let delta = qq(1, 4000);
        for (k, xi) in [
            qi(0),
            qi(1),
            qq(1, 3),
            qq(1, 100),
            qq(1, 5000),
            qq(4999, 5000),
            qq(1, 2),
            qq(2, 9),
        ]
        .iter()
        .enumerate()
        {
            let j = 1 + (k % 6);
            let dist = xi.fract().min(Q::one() - xi.fract()).abs();
            let expect = qpow(&qi(3), j as i64) * dist <= delta;
            assert_eq!(run.delta_test(&[xi.clone()], j).unwrap(), expect, "ξ = {xi}, j = {j}");
        }
    }

    #[test]
    fn compact_step_keeps_measure_sum() {
        let run = toy_run();
        let traj = run.trajectory().unwrap();
        let mut state = run.initial_state();
        for j in 1..=5 {
            state = run.refine_cover(&state, &traj, j).unwrap();
        }
        let before = state.recorded_sum.clone();
        let after = run.refine_cover(&state, &traj, 6).unwrap();
        assert!(after.log.last().unwrap().compact);
        assert_eq!(after.recorded_sum, before);
    }

    #[test]
    fn short_trajectory_is_rejected() {
        let run = toy_run();
        let traj = run.trajectory().unwrap();
        let state = run.initial_state();
        assert!(matches!(
            run.refine_cover(&state, &traj[..0], 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            run.refine_cover(&state, &traj, 3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn csv_dump_lists_every_step() {
        let run = toy_run();
        let traj = run.trajectory().unwrap();
        let (state, csv) = run.run_cover_csv(&traj).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "depth,node_word,alive,measure_sum");
        let rows: usize = state.log.iter().map(|r| r.nodes).sum();
        assert_eq!(lines.len(), rows + 1);
        assert!(lines[1].starts_with("1,"));
        assert!(lines.last().unwrap().starts_with("6,"));
    }

    #[test]
    fn limit_form_cancels_for_full_commitment() {
        let s1 = [LinReal::from_q(Q::one())];
        let w1 = [qi(1)];
        let zero =
            dimension_limit_form(&s1, &w1, 0, &Q::one(), &Q::zero()).unwrap();
        assert!(zero.is_rational());
        assert_eq!(zero.to_f64(), 0.0);

        let full = dimension_limit_form(&s1, &w1, 0, &Q::one(), &Q::one()).unwrap();
        assert_eq!(full.to_f64(), 1.0);
    }

    #[test]
    fn limit_form_recovers_total_dimension_at_full_return() {
        let cantor = SimilarityIFS::middle_thirds();
        let dims = [cantor.dimension()];
        let ws = [qi(1)];
        let limit = dimension_limit_form(&dims, &ws, 0, &Q::one(), &Q::one()).unwrap();
        assert_eq!(limit.cmp_certified(&cantor.dimension()), Ordering::Equal);
    }

    #[test]
    fn limit_form_frozen_cantor_value() {
        // q′ = 9/10, ρ = 1/10 → s·(1 − 9/10 + 1/10) = 0.2·log 2/log 3.
        let cantor = SimilarityIFS::middle_thirds();
        let dims = [cantor.dimension()];
        let limit =
            dimension_limit_form(&dims, &[qi(1)], 0, &qq(9, 10), &qq(1, 10)).unwrap();
        let expect = 0.2 * 2f64.ln() / 3f64.ln();
        assert!((limit.to_f64() - expect).abs() < 1e-12);
        let fifth = cantor.dimension().mul_q(&qq(1, 5));
        assert_eq!(limit.cmp_certified(&fifth), Ordering::Equal);
    }

    #[test]
    fn count_quotient_dominates_its_limit() {
        let run = cantor_run(qq(1, 4), qq(1, 100), qq(9, 10), 6, 2);
        // γ = 2δ·3^{−20} pins N_γ = 20; two compact steps give ratio 1/10.
        let gamma = qq(1, 50) * qpow(&qi(3), -20);
        let bound = run.cover_count_bound(0, 2, &gamma).unwrap();
        assert_eq!(bound.scale_steps, 20);
        let expect = 0.2 * 2f64.ln() / 3f64.ln();
        assert!((bound.limit.to_f64() - expect).abs() < 1e-12);
        assert!(bound.quotient > bound.limit.to_f64());
        assert!(bound.quotient.is_finite());
        assert_eq!(bound.b, BigInt::from(4u32) * BigInt::from(bound.ball_limit));
    }

    #[test]
    fn out_of_range_scales_are_rejected() {
        let run = cantor_run(qq(1, 4), qq(1, 100), qq(9, 10), 6, 2);
        // γ ≥ 2δ.
        assert!(run.cover_count_bound(0, 0, &qi(1)).is_err());
        // N_γ = 2 does not clear the commitment depth M = 2.
        let gamma = qq(1, 50) * qpow(&qi(3), -2);
        assert!(run.cover_count_bound(0, 0, &gamma).is_err());
    }

    #[test]
    fn box_counting_single_point_is_flat() {
        let curve = box_counting_estimate(
            &[vec![qq(1, 3)]],
            &[qq(1, 10), qq(1, 100), qq(1, 1000)],
        )
        .unwrap();
        assert_eq!(curve.slope, 0.0);
        assert!(curve.scales.iter().all(|(_, c)| *c == 1));
    }

    #[test]
    fn box_counting_interval_slope_is_one() {
        let points: Vec<QVec> = (0..=1000).map(|k| vec![qq(k, 1000)]).collect();
        let scales: Vec<Q> = [10i64, 31, 100, 316, 1000]
            .iter()
            .map(|d| qq(1, *d))
            .collect();
        let curve = box_counting_estimate(&points, &scales).unwrap();
        assert!((curve.slope - 1.0).abs() < 0.05, "slope {}", curve.slope);
    }

    #[test]
    fn box_counting_cantor_slope_matches_dimension() {
        let cantor = SimilarityIFS::middle_thirds();
        let points: Vec<QVec> = cantor
            .cylinders(8)
            .map(|cyl| cyl.region.center())
            .collect();
        let scales: Vec<Q> = (1..=6).map(|j| qpow(&qq(1, 3), j)).collect();
        let curve = box_counting_estimate(&points, &scales).unwrap();
        let expect = 2f64.ln() / 3f64.ln();
        assert!((curve.slope - expect).abs() < 0.05, "slope {}", curve.slope);
        // Counts are exactly 2^j at scale 3^{−j}.
        for (j, (_, count)) in curve.scales.iter().enumerate() {
            assert_eq!(*count, 1u64 << (j + 1));
        }
    }

    #[test]
    fn box_counting_rejects_empty_input() {
        assert!(box_counting_estimate(&[], &[qq(1, 2)]).is_err());
        assert!(box_counting_estimate(&[vec![qi(0)]], &[]).is_err());
    }
}
