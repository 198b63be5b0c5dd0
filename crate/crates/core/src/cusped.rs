//! The combinatorial cusped space `X(G, P)` as an implicit graph, plain
//! horoballs over a single peripheral factor, and the alternative horoball
//! models used for comparison.

use std::fmt;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::graph::{BallSnapshot, ImplicitGraph};
use crate::group::{AbelianFactor, Coords, GroupContext, GroupElement};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CuspedVertex {
    Cayley(GroupElement),
    /// depth is at least 1; depth 0 is the Cayley vertex `coset * point`
    Horoball { peripheral: u16, coset: GroupElement, depth: u32, point: Coords },
}

impl CuspedVertex {
    pub fn identity() -> Self {
        CuspedVertex::Cayley(GroupElement::identity())
    }

    pub fn depth(&self) -> u32 {
        match self {
            CuspedVertex::Cayley(_) => 0,
            CuspedVertex::Horoball { depth, .. } => *depth,
        }
    }

    pub fn is_cayley(&self) -> bool {
        matches!(self, CuspedVertex::Cayley(_))
    }

    /// Vertex over `g` in the `i`-horoball at `depth` (depth 0 gives `g`).
    pub fn over(ctx: &GroupContext, g: &GroupElement, i: usize, depth: u32) -> Self {
        if depth == 0 {
            return CuspedVertex::Cayley(g.clone());
        }
        let (coset, point) = ctx.split_coset(g, i);
        CuspedVertex::Horoball { peripheral: i as u16, coset, depth, point }
    }

    /// The group element under the vertex.
    pub fn element(&self, ctx: &GroupContext) -> GroupElement {
        match self {
            CuspedVertex::Cayley(g) => g.clone(),
            CuspedVertex::Horoball { peripheral, coset, point, .. } => {
                ctx.mul_syllable(coset, *peripheral as usize, point)
            }
        }
    }

    pub fn label(&self, ctx: &GroupContext) -> String {
        match self {
            CuspedVertex::Cayley(g) => ctx.format(g),
            CuspedVertex::Horoball { peripheral, coset, depth, point } => {
                let p: Vec<i64> = point.to_vec();
                format!("H{}[{}]{:?}@{}", peripheral, ctx.format(coset).replace(' ', "."), p, depth)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelVariant {
    /// horizontal edges when `d <= 2^k`
    Combinatorial,
    /// horizontal edges when `d <= floor(lambda^k)`
    CombinatorialScaled,
    /// one horizontal edge per peripheral edge, length `lambda^-n`
    CannonCooper,
    /// Cannon-Cooper plus diagonal edges discretizing the warped product
    WarpedDiscretized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoroballModel {
    pub variant: ModelVariant,
    pub lambda: f64,
    /// edge lengths are integers in units of `1/scale` for weighted variants
    pub scale: u32,
}

impl HoroballModel {
    pub fn combinatorial() -> Self {
        HoroballModel { variant: ModelVariant::Combinatorial, lambda: 2.0, scale: 1 }
    }

    pub fn scaled(lambda: f64) -> Self {
        HoroballModel { variant: ModelVariant::CombinatorialScaled, lambda, scale: 1 }
    }

    pub fn cannon_cooper(lambda: f64, scale: u32) -> Self {
        HoroballModel { variant: ModelVariant::CannonCooper, lambda, scale }
    }

    pub fn warped(lambda: f64, scale: u32) -> Self {
        HoroballModel { variant: ModelVariant::WarpedDiscretized, lambda, scale }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 1.0) || self.scale == 0 {
            return Err(LabError::Precondition(format!("model needs lambda > 1 and scale >= 1, got {self}")));
        }
        Ok(())
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || LabError::Parse { key: "model".into(), msg: format!("unknown model `{s}`") };
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let lam = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some("e") => Ok(std::f64::consts::E),
                Some(a) => a.parse().map_err(|_| bad()),
            }
        };
        let m = match head {
            "comb2" | "combinatorial" => Self::combinatorial(),
            "comb" | "scaled" => Self::scaled(lam(2.0)?),
            "cc" => Self::cannon_cooper(lam(std::f64::consts::E)?, 64),
            "warped" => Self::warped(lam(std::f64::consts::E)?, 64),
            _ => return Err(bad()),
        };
        m.validate()?;
        Ok(m)
    }

    fn is_weighted(&self) -> bool {
        matches!(self.variant, ModelVariant::CannonCooper | ModelVariant::WarpedDiscretized)
    }

    fn unit(&self) -> u32 {
        if self.is_weighted() {
            self.scale
        } else {
            1
        }
    }

    /// Horizontal reach at depth `k` for the combinatorial variants.
    pub fn threshold(&self, k: u32) -> u64 {
        match self.variant {
            ModelVariant::Combinatorial => 1u64 << k.min(62),
            _ => {
                let mut t = 1.0f64;
                for _ in 0..k {
                    t *= self.lambda;
                }
                if t > 1e15 {
                    1 << 50
                } else {
                    t.floor() as u64
                }
            }
        }
    }

    /// Weight of a horizontal edge at depth `n` for the weighted variants.
    pub fn horizontal_weight(&self, n: u32) -> u32 {
        let mut t = self.scale as f64;
        for _ in 0..n {
            t /= self.lambda;
        }
        (t.round() as u32).max(1)
    }

    /// Weight of a diagonal edge between depths `n` and `n + 1`.
    pub fn diagonal_weight(&self, n: u32) -> u32 {
        let mut h = 1.0f64;
        for _ in 0..(2 * n + 1) {
            h /= self.lambda;
        }
        ((self.scale as f64) * (1.0 + h).sqrt()).round() as u32
    }
}

impl fmt::Display for HoroballModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.variant {
            ModelVariant::Combinatorial => write!(f, "comb2"),
            ModelVariant::CombinatorialScaled => write!(f, "comb:{}", self.lambda),
            ModelVariant::CannonCooper => write!(f, "cc:{}/{}", self.lambda, self.scale),
            ModelVariant::WarpedDiscretized => write!(f, "warped:{}/{}", self.lambda, self.scale),
        }
    }
}

/// Elements of a factor within a given word-length radius, memoized.
#[derive(Debug, Default)]
struct BallCache {
    balls: Mutex<FxHashMap<(usize, u64), Arc<Vec<Coords>>>>,
}

impl BallCache {
    fn get(&self, fi: usize, f: &AbelianFactor, r: u64) -> Arc<Vec<Coords>> {
        // past the diameter of a finite factor every radius gives everything
        let r = match f.order() {
            Some(o) => r.min(o as u64),
            None => r,
        };
        if let Some(b) = self.balls.lock().unwrap().get(&(fi, r)) {
            return b.clone();
        }
        let b: Arc<Vec<Coords>> = Arc::new(f.ball(r).into_iter().filter(|c| !AbelianFactor::is_zero(c)).collect());
        self.balls.lock().unwrap().insert((fi, r), b.clone());
        b
    }
}

/// Rule deciding the deepest allowed level of a horoball; `None` means
/// unbounded.
pub type TruncationRule = Arc<dyn Fn(usize, &GroupElement) -> Option<u32> + Send + Sync>;

/// The cusped space of a group pair, possibly with truncated horoballs.
#[derive(Clone)]
pub struct CuspedSpace {
    pub ctx: GroupContext,
    pub model: HoroballModel,
    truncation: Option<TruncationRule>,
    moves: Vec<(usize, Coords)>,
    // peripheral generator moves for the Cannon-Cooper variants
    peripheral_moves: FxHashMap<usize, Vec<Coords>>,
    cache: Arc<BallCache>,
}

impl fmt::Debug for CuspedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CuspedSpace")
            .field("ctx", &self.ctx.name)
            .field("model", &self.model)
            .field("truncated", &self.truncation.is_some())
            .finish()
    }
}

impl CuspedSpace {
    pub fn new(ctx: GroupContext, model: HoroballModel) -> Self {
        let moves = ctx.cayley_moves();
        let mut peripheral_moves: FxHashMap<usize, Vec<Coords>> = FxHashMap::default();
        for (fi, m) in &moves {
            if ctx.is_peripheral(*fi) {
                peripheral_moves.entry(*fi).or_default().push(m.clone());
            }
        }
        CuspedSpace { ctx, model, truncation: None, moves, peripheral_moves, cache: Arc::new(BallCache::default()) }
    }

    pub fn combinatorial(ctx: GroupContext) -> Self {
        Self::new(ctx, HoroballModel::combinatorial())
    }

    /// Truncates every horoball of peripheral `i` below depth `caps[i]`.
    pub fn with_depth_caps(mut self, caps: FxHashMap<usize, u32>) -> Self {
        self.truncation = Some(Arc::new(move |i, _| caps.get(&i).copied()));
        self
    }

    pub fn with_truncation(mut self, rule: TruncationRule) -> Self {
        self.truncation = Some(rule);
        self
    }

    pub fn depth_cap(&self, i: usize, coset: &GroupElement) -> Option<u32> {
        self.truncation.as_ref().and_then(|r| r(i, coset))
    }

    fn allows(&self, i: usize, coset: &GroupElement, depth: u32) -> bool {
        self.depth_cap(i, coset).map_or(true, |c| depth <= c)
    }

    pub fn ball(&self, center: CuspedVertex, radius: u32) -> Result<BallSnapshot<CuspedVertex>> {
        self.model.validate()?;
        BallSnapshot::build(self, center, radius * self.model.unit())
    }

    /// Horizontal neighbors of `point` at depth `k` in factor `i`.
    fn horizontal(&self, i: usize, point: &Coords, k: u32, out: &mut Vec<(Coords, u32)>) {
        let f = &self.ctx.factors[i];
        match self.model.variant {
            ModelVariant::Combinatorial | ModelVariant::CombinatorialScaled => {
                let ball = self.cache.get(i, f, self.model.threshold(k));
                for b in ball.iter() {
                    out.push((f.add(point, b), 1));
                }
            }
            _ => {
                let w = self.model.horizontal_weight(k);
                if let Some(ms) = self.peripheral_moves.get(&i) {
                    for m in ms {
                        out.push((f.add(point, m), w));
                    }
                }
            }
        }
    }
}

impl ImplicitGraph for CuspedSpace {
    type V = CuspedVertex;

    fn scale(&self) -> u32 {
        self.model.unit()
    }

    fn is_unit(&self) -> bool {
        !self.model.is_weighted()
    }

    fn neighbors(&self, v: &CuspedVertex, out: &mut Vec<(CuspedVertex, u32)>) {
        let unit = self.model.unit();
        let warped = self.model.variant == ModelVariant::WarpedDiscretized;
        let ctx = &self.ctx;
        match v {
            CuspedVertex::Cayley(g) => {
                for (fi, m) in &self.moves {
                    out.push((CuspedVertex::Cayley(ctx.mul_syllable(g, *fi, m)), unit));
                }
                for &i in &ctx.peripheral {
                    let (coset, point) = ctx.split_coset(g, i);
                    if !self.allows(i, &coset, 1) || ctx.factors[i].is_trivial() {
                        continue;
                    }
                    if warped {
                        let w = self.model.diagonal_weight(0);
                        for m in &self.peripheral_moves[&i] {
                            let q = ctx.factors[i].add(&point, m);
                            out.push((
                                CuspedVertex::Horoball { peripheral: i as u16, coset: coset.clone(), depth: 1, point: q },
                                w,
                            ));
                        }
                    }
                    out.push((CuspedVertex::Horoball { peripheral: i as u16, coset, depth: 1, point }, unit));
                }
            }
            CuspedVertex::Horoball { peripheral, coset, depth, point } => {
                let i = *peripheral as usize;
                let k = *depth;
                let f = &ctx.factors[i];
                let at = |p: Coords, d: u32| -> CuspedVertex {
                    if d == 0 {
                        CuspedVertex::Cayley(ctx.mul_syllable(coset, i, &p))
                    } else {
                        CuspedVertex::Horoball { peripheral: *peripheral, coset: coset.clone(), depth: d, point: p }
                    }
                };
                out.push((at(point.clone(), k - 1), unit));
                let deeper = self.allows(i, coset, k + 1);
                if deeper {
                    out.push((at(point.clone(), k + 1), unit));
                }
                let mut hs = Vec::new();
                self.horizontal(i, point, k, &mut hs);
                for (q, w) in hs {
                    out.push((at(q, k), w));
                }
                if warped {
                    for m in &self.peripheral_moves[&i] {
                        let q = f.add(point, m);
                        out.push((at(q.clone(), k - 1), self.model.diagonal_weight(k - 1)));
                        if deeper {
                            out.push((at(q, k + 1), self.model.diagonal_weight(k)));
                        }
                    }
                }
            }
        }
    }
}

/// Vertex `(point, depth)` of a horoball over one abelian factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HoroPoint {
    pub depth: u32,
    pub point: Coords,
}

impl HoroPoint {
    pub fn new(point: &[i64], depth: u32) -> Self {
        HoroPoint { depth, point: point.iter().copied().collect() }
    }

    pub fn label(&self) -> String {
        format!("{:?}@{}", self.point.to_vec(), self.depth)
    }
}

/// The horoball over the Cayley graph of a single abelian factor, restricted
/// to the depth window `[low, high]`.
#[derive(Debug, Clone)]
pub struct HoroballSpace {
    pub factor: AbelianFactor,
    pub model: HoroballModel,
    pub low: u32,
    pub high: Option<u32>,
    moves: Vec<Coords>,
    cache: Arc<BallCache>,
}

impl HoroballSpace {
    pub fn new(factor: AbelianFactor, model: HoroballModel) -> Self {
        let mut moves: Vec<Coords> = Vec::new();
        for j in 0..factor.gens {
            let g = factor.generator_image(j).clone();
            if AbelianFactor::is_zero(&g) {
                continue;
            }
            for m in [g.clone(), factor.neg(&g)] {
                if !moves.contains(&m) {
                    moves.push(m);
                }
            }
        }
        HoroballSpace { factor, model, low: 0, high: None, moves, cache: Arc::new(BallCache::default()) }
    }

    pub fn window(mut self, low: u32, high: Option<u32>) -> Result<Self> {
        if let Some(h) = high {
            if h < low {
                return Err(LabError::EmptyWindow(low, h));
            }
        }
        self.low = low;
        self.high = high;
        Ok(self)
    }

    pub fn ball(&self, center: HoroPoint, radius: u32) -> Result<BallSnapshot<HoroPoint>> {
        self.model.validate()?;
        if center.depth < self.low || self.high.map_or(false, |h| center.depth > h) {
            return Err(LabError::NotInBall);
        }
        BallSnapshot::build(self, center, radius * self.model.unit())
    }
}

impl ImplicitGraph for HoroballSpace {
    type V = HoroPoint;

    fn scale(&self) -> u32 {
        self.model.unit()
    }

    fn is_unit(&self) -> bool {
        !self.model.is_weighted()
    }

    fn neighbors(&self, v: &HoroPoint, out: &mut Vec<(HoroPoint, u32)>) {
        let unit = self.model.unit();
        let f = &self.factor;
        let k = v.depth;
        let up = k > self.low;
        let down = self.high.map_or(true, |h| k < h);
        if up {
            out.push((HoroPoint { depth: k - 1, point: v.point.clone() }, unit));
        }
        if down {
            out.push((HoroPoint { depth: k + 1, point: v.point.clone() }, unit));
        }
        match self.model.variant {
            ModelVariant::Combinatorial | ModelVariant::CombinatorialScaled => {
                for b in self.cache.get(0, f, self.model.threshold(k)).iter() {
                    out.push((HoroPoint { depth: k, point: f.add(&v.point, b) }, 1));
                }
            }
            variant => {
                let w = self.model.horizontal_weight(k);
                for m in &self.moves {
                    let q = f.add(&v.point, m);
                    if variant == ModelVariant::WarpedDiscretized {
                        if up {
                            out.push((HoroPoint { depth: k - 1, point: q.clone() }, self.model.diagonal_weight(k - 1)));
                        }
                        if down {
                            out.push((HoroPoint { depth: k + 1, point: q.clone() }, self.model.diagonal_weight(k)));
                        }
                    }
                    out.push((HoroPoint { depth: k, point: q }, w));
                }
            }
        }
    }
}

/// `ceil(d / 2^n)`: distance between two points of the same coset on the
/// depth-`n` horosphere.
pub fn horosphere_distance(ctx: &GroupContext, i: usize, u: &CuspedVertex, w: &CuspedVertex, n: u32) -> Result<u64> {
    let split = |v: &CuspedVertex| -> (GroupElement, Coords) {
        match v {
            CuspedVertex::Cayley(g) => ctx.split_coset(g, i),
            CuspedVertex::Horoball { coset, point, .. } => (coset.clone(), point.clone()),
        }
    };
    let (cu, pu) = split(u);
    let (cw, pw) = split(w);
    if cu != cw {
        return Err(LabError::DistinctCosets);
    }
    let d = ctx.factors[i].distance(&pu, &pw)?;
    Ok(ceil_shift(d, n))
}

pub fn ceil_shift(d: u64, n: u32) -> u64 {
    if n >= 63 {
        return u64::from(d > 0);
    }
    d.div_ceil(1u64 << n)
}

/// Distortion of a vertex correspondence between two balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    /// multiplicative constant, from pairs at distance at least `cutoff`
    pub multiplicative: f64,
    /// additive constant needed with that multiplicative constant
    pub additive: f64,
    pub pairs: usize,
    pub cutoff: f64,
}

/// Compares distances in `a` and `b` under `map`, in model length units,
/// over certified pairs (all pairs below `sample` pairs, seeded sample above).
pub fn model_distortion<VA, VB>(
    a: &BallSnapshot<VA>,
    b: &BallSnapshot<VB>,
    map: impl Fn(&VA) -> Option<VB>,
    sample: usize,
    seed: u64,
) -> Result<Distortion>
where
    VA: Clone + Ord + std::hash::Hash + Eq + Send + Sync + fmt::Debug,
    VB: Clone + Ord + std::hash::Hash + Eq + Send + Sync + fmt::Debug,
{
    let image: Vec<Option<usize>> = a.vertices.iter().map(|v| map(v).and_then(|w| b.index_of(&w))).collect();
    let mapped: Vec<usize> = (0..a.len()).filter(|&i| image[i].is_some()).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (x, &i) in mapped.iter().enumerate() {
        for &j in &mapped[x + 1..] {
            pairs.push((i, j));
        }
    }
    if pairs.len() > sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pairs.shuffle(&mut rng);
        pairs.truncate(sample);
        pairs.sort_unstable();
    }
    let sa = a.scale as f64;
    let sb = b.scale as f64;
    let mut rows_a: FxHashMap<usize, Vec<u32>> = FxHashMap::default();
    let mut rows_b: FxHashMap<usize, Vec<u32>> = FxHashMap::default();
    let mut measured = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let ra = rows_a.entry(i).or_insert_with(|| a.row(i));
        let da = ra[j];
        let (bi, bj) = (image[i].unwrap(), image[j].unwrap());
        let rb = rows_b.entry(bi).or_insert_with(|| b.row(bi));
        let db = rb[bj];
        if !a.certified_with(i, j, da) || !b.certified_with(bi, bj, db) {
            continue;
        }
        measured.push((da as f64 / sa, db as f64 / sb));
    }
    let cutoff = 4.0;
    let mut k: f64 = 1.0;
    for &(x, y) in &measured {
        if x >= cutoff && y >= cutoff {
            k = k.max(y / x).max(x / y);
        }
    }
    let mut c: f64 = 0.0;
    for &(x, y) in &measured {
        c = c.max(y - k * x).max(x / k - y);
    }
    Ok(Distortion { multiplicative: k, additive: c, pairs: measured.len(), cutoff })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z_horoball() -> HoroballSpace {
        HoroballSpace::new(AbelianFactor::free(1), HoroballModel::combinatorial())
    }

    #[test]
    fn fix1_base_neighbors() {
        let space = CuspedSpace::combinatorial(GroupContext::fixture("FIX1").unwrap());
        let mut out = Vec::new();
        space.neighbors(&CuspedVertex::identity(), &mut out);
        assert_eq!(out.len(), 5);
        assert!(out.iter().any(|(v, _)| v.depth() == 1));
    }

    #[test]
    fn depth_two_reach() {
        let h = z_horoball();
        let mut out = Vec::new();
        h.neighbors(&HoroPoint::new(&[5], 2), &mut out);
        let mut horiz: Vec<i64> = out.iter().filter(|(v, _)| v.depth == 2).map(|(v, _)| v.point[0]).collect();
        horiz.sort();
        assert_eq!(horiz, vec![1, 2, 3, 4, 6, 7, 8, 9]);
    }

    #[test]
    fn eight_apart_is_six() {
        let h = z_horoball();
        let b = h.ball(HoroPoint::new(&[0], 0), 6).unwrap();
        let i = b.index_of(&HoroPoint::new(&[8], 0)).unwrap();
        assert_eq!(b.center_dist[i], 6);
    }

    #[test]
    fn horosphere_formula() {
        assert_eq!(ceil_shift(5, 2), 2);
        assert_eq!(ceil_shift(5, 0), 5);
        assert_eq!(ceil_shift(5, 3), 1);
    }

    #[test]
    fn cc_weights() {
        let m = HoroballModel::cannon_cooper(2.0, 64);
        assert_eq!(m.horizontal_weight(0), 64);
        assert_eq!(m.horizontal_weight(3), 8);
        assert_eq!(m.horizontal_weight(10), 1);
    }
}
