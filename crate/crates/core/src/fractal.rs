//! Equal-ratio similarity IFSs with verified open-set condition, coding maps,
//! cylinder families, Bernoulli sampling, scaled pushforwards, and the two
//! ball/covering constants (λ, L) used by the cover-refinement machinery.
//!
//! All geometric predicates — map images, box containment and disjointness,
//! cylinder intersection counts — are exact rational comparisons. Rotations
//! are restricted to signed permutation matrices so every cylinder is an
//! axis-aligned box with rational corners. Dimensions s = log p / log(1/c)
//! are carried symbolically and bracketed by certified intervals only where
//! a transcendental power is unavoidable.

use crate::exact::interval::QInterval;
use crate::exact::linalg::{QMat, QVec};
use crate::exact::logreal::LinReal;
use crate::exact::{q_to_f64, qi, qpow, Q};
use crate::{Error, Result};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An open axis-aligned box Π (lo_i, hi_i) with rational corners.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxRegion {
    pub lo: QVec,
    pub hi: QVec,
}

impl BoxRegion {
    pub fn new(lo: QVec, hi: QVec) -> Result<BoxRegion> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch(
                "box corners must have equal length".into(),
            ));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if l >= h {
                return Err(Error::Domain(format!(
                    "box must be nonempty and open: [{l}, {h}]"
                )));
            }
        }
        Ok(BoxRegion { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Largest side length — the sup-metric diameter of the closure.
    pub fn diameter(&self) -> Q {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .max()
            .expect("nonempty box")
    }

    pub fn center(&self) -> QVec {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (l + h) / qi(2))
            .collect()
    }

    /// Does this open box lie inside `other`? For open boxes this is exactly
    /// the non-strict corner comparison.
    pub fn inside(&self, other: &BoxRegion) -> bool {
        self.lo
            .iter()
            .zip(&other.lo)
            .all(|(a, b)| a >= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a <= b)
    }

    /// Are the two open boxes disjoint? True iff some coordinate separates
    /// them up to touching closures.
    pub fn disjoint_open(&self, other: &BoxRegion) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .any(|((al, ah), (bl, bh))| ah <= bl || bh <= al)
    }

    /// Does the closure meet the closed sup-ball around `center`?
    pub fn meets_closed_ball(&self, center: &[Q], radius: &Q) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(center)
            .all(|((l, h), c)| &(c - radius) <= h && l <= &(c + radius))
    }
}

/// One similarity x ↦ c·P·x + w with P a signed permutation, so images of
/// axis-aligned boxes stay axis-aligned.
#[derive(Clone, Debug)]
pub struct IfsMap {
    rotation: QMat,
    translation: QVec,
    /// per output coordinate: (source coordinate, sign)
    wiring: Vec<(usize, i8)>,
}

impl IfsMap {
    pub fn new(rotation: QMat, translation: QVec) -> Result<IfsMap> {
        let d = translation.len();
        if rotation.rows != d || rotation.cols != d {
            return Err(Error::DimensionMismatch(
                "rotation must be square and match the translation".into(),
            ));
        }
        let mut wiring = Vec::with_capacity(d);
        let mut used = vec![false; d];
        for i in 0..d {
            let mut hit = None;
            for j in 0..d {
                let v = &rotation[(i, j)];
                if v.is_zero() {
                    continue;
                }
                if hit.is_some() || (v.abs() != Q::one()) {
                    return Err(Error::InvalidIfs(
                        "rotations must be signed permutation matrices \
                         (one ±1 per row); general orthogonal matrices do not \
                         keep cylinder boxes axis-aligned"
                            .into(),
                    ));
                }
                hit = Some((j, if v.is_positive() { 1i8 } else { -1i8 }));
            }
            let (j, s) = hit.ok_or_else(|| {
                Error::InvalidIfs("rotation has a zero row".into())
            })?;
            if used[j] {
                return Err(Error::InvalidIfs(
                    "rotation reuses a column; not a permutation".into(),
                ));
            }
            used[j] = true;
            wiring.push((j, s));
        }
        Ok(IfsMap {
            rotation,
            translation,
            wiring,
        })
    }

    /// The reflection/identity map on the line: x ↦ sign·x + (later scaled).
    pub fn line(sign: i8, translation: Q) -> IfsMap {
        let s = if sign >= 0 { Q::one() } else { -Q::one() };
        IfsMap {
            rotation: QMat::from_rows(vec![vec![s]]),
            translation: vec![translation],
            wiring: vec![(0, if sign >= 0 { 1 } else { -1 })],
        }
    }

    pub fn rotation(&self) -> &QMat {
        &self.rotation
    }

    pub fn translation(&self) -> &QVec {
        &self.translation
    }

    /// The similarity x ↦ c·Rx + w at contraction ratio c.
    pub fn apply(&self, ratio: &Q, x: &[Q]) -> QVec {
        self.wiring
            .iter()
            .zip(&self.translation)
            .map(|(&(j, s), w)| {
                let v = ratio * &x[j];
                if s > 0 {
                    v + w
                } else {
                    w - v
                }
            })
            .collect()
    }

    /// The unique fixed point of x ↦ c·Rx + w (c < 1 makes I − cR
    /// invertible). Always a point of the attractor.
    pub fn fixed_point(&self, ratio: &Q) -> Result<QVec> {
        let d = self.translation.len();
        let mut m = QMat::identity(d);
        for (i, &(j, s)) in self.wiring.iter().enumerate() {
            let step = if s > 0 { -ratio } else { ratio.clone() };
            m[(i, j)] = &m[(i, j)] + step;
        }
        Ok(m.inverse()?.mul_vec(&self.translation))
    }

    fn image_box(&self, ratio: &Q, bx: &BoxRegion) -> BoxRegion {
        let mut lo = Vec::with_capacity(bx.dim());
        let mut hi = Vec::with_capacity(bx.dim());
        for (&(j, s), w) in self.wiring.iter().zip(&self.translation) {
            if s > 0 {
                lo.push(ratio * &bx.lo[j] + w);
                hi.push(ratio * &bx.hi[j] + w);
            } else {
                lo.push(w - ratio * &bx.hi[j]);
                hi.push(w - ratio * &bx.lo[j]);
            }
        }
        BoxRegion { lo, hi }
    }
}

/// An equal-ratio similarity IFS with a verified open-box witness for the
/// open-set condition.
#[derive(Clone, Debug)]
pub struct SimilarityIFS {
    dim: usize,
    ratio: Q,
    maps: Vec<IfsMap>,
    osc: BoxRegion,
    hull: BoxRegion,
}

impl SimilarityIFS {
    /// Build and fully validate: signed-permutation rotations, similarity
    /// dimension in (0, dim], exact attractor hull, and the open-set
    /// condition for the given witness (or the hull interior by default).
    pub fn new(
        dim: usize,
        ratio: Q,
        maps: Vec<IfsMap>,
        osc: Option<BoxRegion>,
    ) -> Result<SimilarityIFS> {
        if dim == 0 {
            return Err(Error::InvalidIfs("ambient dimension must be ≥ 1".into()));
        }
        if !ratio.is_positive() || ratio >= Q::one() {
            return Err(Error::InvalidIfs(format!(
                "contraction ratio must lie in (0,1), got {ratio}"
            )));
        }
        let p = maps.len();
        if p < 2 {
            return Err(Error::InvalidIfs(
                "need at least two maps (similarity dimension must be positive)"
                    .into(),
            ));
        }
        for mp in &maps {
            if mp.translation.len() != dim {
                return Err(Error::DimensionMismatch(
                    "map dimension does not match the ambient dimension".into(),
                ));
            }
        }
        // s = log p / log(1/c) ≤ dim ⇔ p ≤ (1/c)^dim, checked on integers.
        let cn = ratio.numer();
        let cd = ratio.denom();
        if BigInt::from(p) * cn.pow(dim as u32) > cd.pow(dim as u32) {
            return Err(Error::InvalidIfs(format!(
                "similarity dimension log {p}/log {} exceeds the ambient dimension {dim}",
                ratio.recip()
            )));
        }
        let hull = solve_hull(dim, &ratio, &maps)?;
        let osc = match osc {
            Some(b) => {
                if b.dim() != dim {
                    return Err(Error::DimensionMismatch(
                        "OSC witness dimension mismatch".into(),
                    ));
                }
                b
            }
            None => hull.clone(),
        };
        // φ_e(U) ⊂ U and pairwise disjoint, exactly.
        let images: Vec<BoxRegion> = maps.iter().map(|m| m.image_box(&ratio, &osc)).collect();
        for (e, img) in images.iter().enumerate() {
            if !img.inside(&osc) {
                return Err(Error::InvalidIfs(format!(
                    "map {e} does not send the witness box into itself"
                )));
            }
        }
        for e1 in 0..p {
            for e2 in e1 + 1..p {
                if !images[e1].disjoint_open(&images[e2]) {
                    return Err(Error::InvalidIfs(format!(
                        "witness images of maps {e1} and {e2} overlap; \
                         open-set condition fails"
                    )));
                }
            }
        }
        Ok(SimilarityIFS {
            dim,
            ratio,
            maps,
            osc,
            hull,
        })
    }

    /// Parse the plain-text form `dim=1 c=1/3 maps=(+1,0),(+1,2/3)`.
    /// The text format covers the line case; higher dimensions are built
    /// programmatically.
    pub fn parse(text: &str) -> Result<SimilarityIFS> {
        let mut dim = None;
        let mut ratio = None;
        let mut maps = None;
        for tok in text.split_whitespace() {
            let (key, val) = tok.split_once('=').ok_or_else(|| {
                Error::Parse(format!("expected key=value, got {tok:?}"))
            })?;
            match key {
                "dim" => {
                    dim = Some(val.parse::<usize>().map_err(|e| {
                        Error::Parse(format!("bad dim {val:?}: {e}"))
                    })?)
                }
                "c" => ratio = Some(crate::weights::parse_q(val)?),
                "maps" => maps = Some(val.to_string()),
                other => {
                    return Err(Error::Parse(format!("unknown key {other:?}")))
                }
            }
        }
        let dim = dim.ok_or_else(|| Error::Parse("missing dim=".into()))?;
        if dim != 1 {
            return Err(Error::Parse(
                "the text format describes line IFSs (dim=1); build higher-dimensional \
                 systems programmatically"
                    .into(),
            ));
        }
        let ratio = ratio.ok_or_else(|| Error::Parse("missing c=".into()))?;
        let maps = maps.ok_or_else(|| Error::Parse("missing maps=".into()))?;
        let mut parsed = Vec::new();
        for part in maps.split("),") {
            let part = part.trim_start_matches('(').trim_end_matches(')');
            let (sign, w) = part.split_once(',').ok_or_else(|| {
                Error::Parse(format!("map entry must be (±1,w), got ({part})"))
            })?;
            let sign = match sign {
                "+1" => 1i8,
                "-1" | "−1" => -1i8,
                other => {
                    return Err(Error::Parse(format!(
                        "map orientation must be +1 or -1, got {other:?}"
                    )))
                }
            };
            parsed.push(IfsMap::line(sign, crate::weights::parse_q(w)?));
        }
        SimilarityIFS::new(1, ratio, parsed, None)
    }

    /// Render back to the text form (line systems only).
    pub fn to_spec_line(&self) -> Result<String> {
        if self.dim != 1 {
            return Err(Error::Domain(
                "only line IFSs have a text form".into(),
            ));
        }
        let maps = self
            .maps
            .iter()
            .map(|m| {
                let s = if m.wiring[0].1 > 0 { "+1" } else { "-1" };
                format!("({s},{})", m.translation[0])
            })
            .collect::<Vec<_>>()
            .join(",");
        Ok(format!("dim=1 c={} maps={maps}", self.ratio))
    }

    /// The middle-thirds Cantor set on [0,1].
    pub fn middle_thirds() -> SimilarityIFS {
        SimilarityIFS::new(
            1,
            Q::new(BigInt::one(), BigInt::from(3)),
            vec![IfsMap::line(1, Q::zero()), IfsMap::line(1, Q::new(2.into(), 3.into()))],
            None,
        )
        .expect("canonical example is valid")
    }

    /// The middle-fifths Cantor set: [0, 2/5] ∪ [3/5, 1] pieces.
    pub fn middle_fifths() -> SimilarityIFS {
        SimilarityIFS::new(
            1,
            Q::new(2.into(), 5.into()),
            vec![IfsMap::line(1, Q::zero()), IfsMap::line(1, Q::new(3.into(), 5.into()))],
            None,
        )
        .expect("canonical example is valid")
    }

    /// The unit interval as a two-map IFS of ratio 1/2.
    pub fn unit_interval() -> SimilarityIFS {
        SimilarityIFS::new(
            1,
            Q::new(1.into(), 2.into()),
            vec![IfsMap::line(1, Q::zero()), IfsMap::line(1, Q::new(1.into(), 2.into()))],
            None,
        )
        .expect("canonical example is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ratio(&self) -> &Q {
        &self.ratio
    }

    pub fn alphabet_size(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[IfsMap] {
        &self.maps
    }

    pub fn osc_witness(&self) -> &BoxRegion {
        &self.osc
    }

    /// The exact bounding box of the attractor.
    pub fn hull(&self) -> &BoxRegion {
        &self.hull
    }

    /// Sup-metric diameter α of the attractor's bounding box.
    pub fn diameter(&self) -> Q {
        self.hull.diameter()
    }

    /// Similarity dimension s = log p / log(1/c), symbolically.
    pub fn dimension(&self) -> LinReal {
        LinReal::log_ratio(self.maps.len() as u64, &self.ratio)
    }

    /// φ_{b₁}∘…∘φ_{b_j}(0) together with a radius r such that every infinite
    /// extension of the word codes a point within r (sup metric):
    /// r = c^j · max_e ‖w_e‖ / (1−c).
    pub fn coding_map(&self, word: &[usize]) -> Result<(QVec, Q)> {
        let p = self.maps.len();
        for &b in word {
            if b >= p {
                return Err(Error::Domain(format!(
                    "letter {b} outside alphabet of size {p}"
                )));
            }
        }
        let mut x = vec![Q::zero(); self.dim];
        for &b in word.iter().rev() {
            x = self.maps[b].apply(&self.ratio, &x);
        }
        let w_max = self
            .maps
            .iter()
            .map(|m| {
                m.translation
                    .iter()
                    .map(|t| t.abs())
                    .max()
                    .unwrap_or_else(Q::zero)
            })
            .max()
            .unwrap_or_else(Q::zero);
        let radius = qpow(&self.ratio, word.len() as i64) * w_max
            / (Q::one() - &self.ratio);
        Ok((x, radius))
    }

    /// The exact box φ_{w_1}∘…∘φ_{w_k}(hull) of a cylinder word.
    pub fn cylinder_region(&self, word: &[usize]) -> Result<BoxRegion> {
        let p = self.maps.len();
        let mut region = self.hull.clone();
        for &b in word.iter().rev() {
            if b >= p {
                return Err(Error::Domain(format!(
                    "letter {b} outside alphabet of size {p}"
                )));
            }
            region = self.maps[b].image_box(&self.ratio, &region);
        }
        Ok(region)
    }

    pub fn cylinder_count(&self, depth: usize) -> BigInt {
        BigInt::from(self.maps.len()).pow(depth as u32)
    }

    /// The p^j depth-j cylinders in word order. Boxes are exact images of the
    /// attractor hull, so diam = c^j·α and μ = p^{−j} hold on the nose.
    pub fn cylinders(&self, depth: usize) -> impl Iterator<Item = Cylinder> + '_ {
        let p = self.maps.len();
        let total = p.checked_pow(depth as u32);
        let measure = qpow(&qi(p as i64), -(depth as i64));
        let diameter = qpow(&self.ratio, depth as i64) * self.diameter();
        CylinderIter {
            ifs: self,
            depth,
            next: 0,
            total,
            measure,
            diameter,
        }
    }

    fn cylinder_at(&self, depth: usize, index: usize, measure: &Q, diameter: &Q) -> Cylinder {
        let p = self.maps.len();
        let mut word = vec![0usize; depth];
        let mut ix = index;
        for slot in word.iter_mut().rev() {
            *slot = ix % p;
            ix /= p;
        }
        let mut region = self.hull.clone();
        for &b in word.iter().rev() {
            region = self.maps[b].image_box(&self.ratio, &region);
        }
        Cylinder {
            word,
            depth,
            region,
            measure: measure.clone(),
            diameter: diameter.clone(),
        }
    }

    /// Deterministic Bernoulli(uniform letters) sample: a pure function of
    /// (seed, index) regardless of parallel schedule.
    pub fn bernoulli_sample(&self, depth: usize, seed: u64, index: u64) -> QVec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let p = self.maps.len();
        let word: Vec<usize> = (0..depth).map(|_| rng.gen_range(0..p)).collect();
        self.coding_map(&word).expect("letters in range").0
    }

    /// The largest depth k with c^{k+1}·α < β ≤ c^k·α.
    pub fn depth_for_radius(&self, beta: &Q) -> Result<usize> {
        let alpha = self.diameter();
        if !beta.is_positive() {
            return Err(Error::Domain("radius must be positive".into()));
        }
        if *beta > alpha {
            return Err(Error::Domain(format!(
                "radius {beta} exceeds the attractor diameter {alpha}"
            )));
        }
        let mut k = 0usize;
        let mut scale = &alpha * &self.ratio; // c^{k+1}·α
        while scale >= *beta {
            k += 1;
            scale *= &self.ratio;
        }
        Ok(k)
    }

    /// Exact maximum, over every center x, of the number of depth-j cylinder
    /// closures meeting the closed sup-ball B(x, radius). On the line this is
    /// a sweep over interval events (a true maximum); in higher dimensions
    /// the maximum is taken over all cylinder centers (a sampled maximum,
    /// reported as such by `ball_intersection_constant`).
    pub fn max_cylinders_meeting_ball(&self, depth: usize, radius: &Q) -> Result<u64> {
        let p = self.maps.len();
        let total = p
            .checked_pow(depth as u32)
            .ok_or_else(|| Error::Domain("cylinder count overflows".into()))?;
        if total > 1 << 20 {
            return Err(Error::Domain(format!(
                "{total} cylinders is beyond the exhaustive-scan budget"
            )));
        }
        let cyls: Vec<Cylinder> = self.cylinders(depth).collect();
        if self.dim == 1 {
            // interval i meets B(x,r) iff x ∈ [lo_i − r, hi_i + r]; the max
            // overlap of these windows is the exact answer.
            let mut events: Vec<(Q, i32)> = Vec::with_capacity(2 * cyls.len());
            for c in &cyls {
                events.push((&c.region.lo[0] - radius, 1));
                events.push((&c.region.hi[0] + radius, -1));
            }
            // closed windows: at equal coordinates process openings first
            events.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            let mut cur = 0i64;
            let mut best = 0i64;
            for (_, delta) in events {
                cur += delta as i64;
                best = best.max(cur);
            }
            Ok(best as u64)
        } else {
            let centers: Vec<QVec> = cyls.iter().map(|c| c.region.center()).collect();
            let mut best = 0u64;
            for ctr in &centers {
                let count = cyls
                    .iter()
                    .filter(|c| c.region.meets_closed_ball(ctr, radius))
                    .count() as u64;
                best = best.max(count);
            }
            Ok(best)
        }
    }

    /// Empirical ball-measure constant: the least λ with μ(B(x,y)) ≤ λ·y^s
    /// over the scanned radii y = c^k·α, certified from above at scan depth j
    /// (μ is over-counted through cylinder closures, the power y^s is
    /// bracketed by certified intervals).
    pub fn measure_ball_constant(&self) -> Result<LambdaEstimate> {
        let p = self.maps.len();
        let cap: usize = if self.dim == 1 { 1024 } else { 256 };
        let mut depth = 0usize;
        while p.pow(depth as u32 + 1) <= cap {
            depth += 1;
        }
        if depth == 0 {
            depth = 1;
        }
        let alpha = self.diameter();
        let alpha_s = self.power_to_dimension(&alpha)?;
        if !alpha_s.lo.is_positive() {
            return Err(Error::Domain(
                "attractor diameter power could not be bounded away from 0".into(),
            ));
        }
        let mut lambda = Q::zero();
        let mut radii = 0usize;
        for k in 0..=depth {
            let y = qpow(&self.ratio, k as i64) * &alpha;
            let m = self.max_cylinders_meeting_ball(depth, &y)?;
            // μ̂(B)/y^s = M·p^{−j} / (c^k α)^s = M·p^{k−j} / α^s
            let cand = qi(m as i64) * qpow(&qi(p as i64), k as i64 - depth as i64)
                / &alpha_s.lo;
            lambda = lambda.max(cand);
            radii += 1;
        }
        Ok(LambdaEstimate {
            value: lambda,
            scan_depth: depth,
            radii_scanned: radii,
            note: format!(
                "upper estimate from exhaustive depth-{depth} cylinder counts \
                 against balls of radius c^k·α, k = 0..={depth}; measures \
                 over-counted through cylinder closures, powers bracketed by \
                 certified interval logs"
            ),
        })
    }

    /// The ball-intersection constant: the smallest integer L strictly above
    /// λ·(2c⁻¹α)^s, with λ the scanned estimate. Any ball of radius β meets
    /// at most L cylinders at depth k_β; the exhaustive sweep
    /// `max_cylinders_meeting_ball` is the independent cross-check.
    pub fn ball_intersection_constant(&self) -> Result<BallConstantReport> {
        let lambda = self.measure_ball_constant()?;
        let base = qi(2) * self.diameter() / &self.ratio;
        let pow = self.power_to_dimension(&base)?;
        let product_hi = &lambda.value * &pow.hi;
        let l = (product_hi.floor().to_integer() + BigInt::one())
            .to_u64()
            .ok_or_else(|| Error::Domain("intersection constant overflows".into()))?;
        Ok(BallConstantReport {
            l,
            product_hi,
            lambda,
            note: "L = smallest integer > λ·(2·c⁻¹·α)^s, using the certified \
                   upper end of the power bracket"
                .into(),
        })
    }

    /// Certified enclosure of x^s for x > 0, where s is the similarity
    /// dimension: bracket s by dyadic rationals with small denominator (so
    /// the rational-power kernel stays cheap), then take certified powers at
    /// both ends.
    pub fn power_to_dimension(&self, x: &Q) -> Result<QInterval> {
        if !x.is_positive() {
            return Err(Error::Domain("power base must be positive".into()));
        }
        let s_iv = self.dimension().eval_interval(48);
        let scale = qpow(&qi(2), 10);
        let lo_e = ((&s_iv.lo * &scale).floor() / &scale).max(Q::zero());
        let hi_e = (&s_iv.hi * &scale).ceil() / &scale;
        let lo_p = crate::exact::roots::pow_interval(x, &lo_e, 32);
        let hi_p = crate::exact::roots::pow_interval(x, &hi_e, 32);
        Ok(QInterval::new(
            lo_p.lo.min(hi_p.lo),
            lo_p.hi.max(hi_p.hi),
        ))
    }
}

/// One cylinder: a word, its exact image box, and the exact measure/diameter
/// invariants μ = p^{−depth}, diam = c^depth·α.
#[derive(Clone, Debug)]
pub struct Cylinder {
    pub word: Vec<usize>,
    pub depth: usize,
    pub region: BoxRegion,
    pub measure: Q,
    pub diameter: Q,
}

struct CylinderIter<'a> {
    ifs: &'a SimilarityIFS,
    depth: usize,
    next: usize,
    total: Option<usize>,
    measure: Q,
    diameter: Q,
}

impl<'a> Iterator for CylinderIter<'a> {
    type Item = Cylinder;

    fn next(&mut self) -> Option<Cylinder> {
        let total = self.total?;
        if self.next >= total {
            return None;
        }
        let c = self
            .ifs
            .cylinder_at(self.depth, self.next, &self.measure, &self.diameter);
        self.next += 1;
        Some(c)
    }
}

/// Empirical λ with its provenance.
#[derive(Clone, Debug)]
pub struct LambdaEstimate {
    pub value: Q,
    pub scan_depth: usize,
    pub radii_scanned: usize,
    pub note: String,
}

/// The L constant with the certified product it came from.
#[derive(Clone, Debug)]
pub struct BallConstantReport {
    pub l: u64,
    pub lambda: LambdaEstimate,
    pub product_hi: Q,
    pub note: String,
}

/// A product of similarity IFSs: either a free list of factors (ambient
/// dimensions summing to the top block) or an m×n grid of line systems.
#[derive(Clone, Debug)]
pub struct ProductFractal {
    factors: Vec<SimilarityIFS>,
    grid: Option<(usize, usize)>,
}

impl ProductFractal {
    pub fn product(factors: Vec<SimilarityIFS>) -> Result<ProductFractal> {
        if factors.is_empty() {
            return Err(Error::InvalidIfs("product needs at least one factor".into()));
        }
        Ok(ProductFractal {
            factors,
            grid: None,
        })
    }

    /// An m×n grid of line systems, entry (i,j) stored row-major.
    pub fn grid(m: usize, n: usize, factors: Vec<SimilarityIFS>) -> Result<ProductFractal> {
        if factors.len() != m * n {
            return Err(Error::DimensionMismatch(format!(
                "grid needs {m}·{n} factors, got {}",
                factors.len()
            )));
        }
        if factors.iter().any(|f| f.dim != 1) {
            return Err(Error::InvalidIfs(
                "grid factors must be line systems".into(),
            ));
        }
        Ok(ProductFractal {
            factors,
            grid: Some((m, n)),
        })
    }

    /// The same line system at every grid entry.
    pub fn uniform_grid(m: usize, n: usize, ifs: &SimilarityIFS) -> Result<ProductFractal> {
        ProductFractal::grid(m, n, vec![ifs.clone(); m * n])
    }

    pub fn factors(&self) -> &[SimilarityIFS] {
        &self.factors
    }

    pub fn grid_shape(&self) -> Option<(usize, usize)> {
        self.grid
    }

    pub fn ambient_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).sum()
    }

    pub fn diameters(&self) -> Vec<Q> {
        self.factors.iter().map(|f| f.diameter()).collect()
    }

    /// Total dimension s = Σ s_i, symbolically.
    pub fn dimension(&self) -> LinReal {
        self.factors
            .iter()
            .fold(LinReal::zero(), |acc, f| acc.add(&f.dimension()))
    }

    /// Product cylinders at a common depth: every combination of factor
    /// cylinders, count Π p_i^depth.
    pub fn cylinder_count(&self, depth: usize) -> BigInt {
        self.factors
            .iter()
            .map(|f| f.cylinder_count(depth))
            .product()
    }

    /// Deterministic product sample: factor letters are drawn from one
    /// counter-seeded stream, so the result is a pure function of
    /// (seed, index).
    pub fn sample(&self, depth: usize, seed: u64, index: u64) -> QVec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut out = Vec::with_capacity(self.ambient_dim());
        for f in &self.factors {
            let p = f.maps.len();
            let word: Vec<usize> = (0..depth).map(|_| rng.gen_range(0..p)).collect();
            out.extend(f.coding_map(&word).expect("letters in range").0);
        }
        out
    }

    /// The admissible per-entry scale window Ξ = Π [c_i, c_i⁻¹].
    pub fn scale_window(&self) -> Vec<(Q, Q)> {
        self.factors
            .iter()
            .map(|f| (f.ratio.clone(), f.ratio.recip()))
            .collect()
    }

    /// Is r inside Ξ?
    pub fn scale_admissible(&self, r: &[Q]) -> bool {
        r.len() == self.factors.len()
            && self
                .scale_window()
                .iter()
                .zip(r)
                .all(|((lo, hi), ri)| lo <= ri && ri <= hi)
    }

    /// Sampler for the scaled pushforward μ^(r): coordinate of factor i is
    /// multiplied by r_i. Requires the grid shape (the scaled measures are a
    /// per-entry construction) and r ∈ Ξ.
    pub fn scaled_sample(
        &self,
        r: &[Q],
        depth: usize,
        seed: u64,
        index: u64,
    ) -> Result<QVec> {
        if self.grid.is_none() {
            return Err(Error::Domain(
                "scaled pushforwards are defined on the m×n grid shape".into(),
            ));
        }
        if r.len() != self.factors.len() {
            return Err(Error::DimensionMismatch(format!(
                "need {} scale entries, got {}",
                self.factors.len(),
                r.len()
            )));
        }
        if !self.scale_admissible(r) {
            return Err(Error::ScaleOutOfRange(
                "scale entries must lie in Ξ = Π [c, c⁻¹]".into(),
            ));
        }
        let base = self.sample(depth, seed, index);
        Ok(base.iter().zip(r).map(|(x, ri)| x * ri).collect())
    }
}

/// Exact attractor bounding box: detect the attaining (map, orientation)
/// pattern of the hull fixed-point equations by float iteration, then solve
/// the induced linear system exactly and verify the pattern by rational
/// comparisons.
fn solve_hull(dim: usize, ratio: &Q, maps: &[IfsMap]) -> Result<BoxRegion> {
    let c = q_to_f64(ratio);
    let w: Vec<Vec<f64>> = maps
        .iter()
        .map(|m| m.translation.iter().map(q_to_f64).collect())
        .collect();
    let w_abs = w
        .iter()
        .flat_map(|row| row.iter().map(|x| x.abs()))
        .fold(0.0f64, f64::max);
    let r0 = w_abs / (1.0 - c) + 1.0;
    let mut lo = vec![-r0; dim];
    let mut hi = vec![r0; dim];
    let mut pick_lo = vec![(0usize, 0usize, 1i8); dim];
    let mut pick_hi = vec![(0usize, 0usize, 1i8); dim];
    for _ in 0..400 {
        let mut nlo = vec![f64::INFINITY; dim];
        let mut nhi = vec![f64::NEG_INFINITY; dim];
        for (e, m) in maps.iter().enumerate() {
            for (i, &(j, s)) in m.wiring.iter().enumerate() {
                let (l, h) = if s > 0 {
                    (c * lo[j] + w[e][i], c * hi[j] + w[e][i])
                } else {
                    (w[e][i] - c * hi[j], w[e][i] - c * lo[j])
                };
                if l < nlo[i] {
                    nlo[i] = l;
                    pick_lo[i] = (e, j, s);
                }
                if h > nhi[i] {
                    nhi[i] = h;
                    pick_hi[i] = (e, j, s);
                }
            }
        }
        lo = nlo;
        hi = nhi;
    }
    // unknowns u = (A_0..A_{d−1}, B_0..B_{d−1}); equations from the picks
    let d2 = 2 * dim;
    let mut mat = QMat::zeros(d2, d2);
    let mut rhs = vec![Q::zero(); d2];
    for i in 0..dim {
        let (e, j, s) = pick_lo[i];
        mat[(i, i)] = Q::one();
        // A_i = c·(s>0 ? A_j : −B_j) + w ⇒ A_i − c·(±X) = w
        if s > 0 {
            mat[(i, j)] -= ratio;
        } else {
            mat[(i, dim + j)] += ratio;
        }
        rhs[i] = maps[e].translation[i].clone();
        let (e, j, s) = pick_hi[i];
        mat[(dim + i, dim + i)] = Q::one();
        if s > 0 {
            mat[(dim + i, dim + j)] -= ratio;
        } else {
            mat[(dim + i, j)] += ratio;
        }
        rhs[dim + i] = maps[e].translation[i].clone();
    }
    let inv = mat
        .inverse()
        .map_err(|_| Error::InvalidIfs("attractor hull system is degenerate".into()))?;
    let sol = inv.mul_vec(&rhs);
    let a = &sol[..dim];
    let b = &sol[dim..];
    // verify: A_i is ≤ every map's lower image end, B_i ≥ every upper end
    for (e, m) in maps.iter().enumerate() {
        for (i, &(j, s)) in m.wiring.iter().enumerate() {
            let (l, h) = if s > 0 {
                (ratio * &a[j] + &m.translation[i], ratio * &b[j] + &m.translation[i])
            } else {
                (
                    &m.translation[i] - ratio * &b[j],
                    &m.translation[i] - ratio * &a[j],
                )
            };
            if a[i] > l || b[i] < h {
                return Err(Error::InvalidIfs(format!(
                    "could not certify the attractor hull (map {e}, coordinate {i})"
                )));
            }
        }
    }
    for i in 0..dim {
        if a[i] >= b[i] {
            return Err(Error::InvalidIfs(
                "attractor hull is degenerate in some coordinate".into(),
            ));
        }
    }
    BoxRegion::new(a.to_vec(), b.to_vec())
}
