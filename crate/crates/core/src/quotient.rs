//! Quotients of the cusped space by the full filling kernel `K` and by
//! partial kernels `K_W`, their truncated versions, ball embedding, and the
//! Greendlinger shortening loop.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::cusped::{ceil_shift, CuspedSpace, CuspedVertex, HoroballModel, TruncationRule};
use crate::error::{LabError, Result};
use crate::graph::{BallSnapshot, ImplicitGraph};
use crate::group::{quotient_context, AbelianFactor, Coords, FillingSpec, GroupContext, GroupElement, QuotientKind, QuotientMap};
use crate::truncation::{truncation_depth, TruncationInfo};

pub const DEFAULT_CERTIFY_RADIUS: u64 = 64;
pub const DEFAULT_ORBIT_BUDGET: usize = 4096;

/// A horoball of the cusped space: the one over the coset `coset * P_i`.
/// `coset` is a normal form without a trailing `i`-syllable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HoroCenter {
    pub peripheral: usize,
    pub coset: GroupElement,
}

impl HoroCenter {
    pub fn new(ctx: &GroupContext, g: &GroupElement, i: usize) -> Self {
        HoroCenter { peripheral: i, coset: ctx.split_coset(g, i).0 }
    }

    pub fn label(&self, ctx: &GroupContext) -> String {
        format!("H{}[{}]", self.peripheral, ctx.format(&self.coset))
    }
}

/// Base group, filling, filled group and the truncation depth `t_c` of each
/// peripheral quotient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuotientContextFull {
    pub base: GroupContext,
    pub spec: FillingSpec,
    pub quotient: GroupContext,
    pub truncation: BTreeMap<usize, TruncationInfo>,
}

impl QuotientContextFull {
    pub fn new(base: &GroupContext, spec: &FillingSpec, certify_radius: u64) -> Result<Self> {
        let quotient = quotient_context(base, spec)?;
        let mut truncation = BTreeMap::new();
        for &i in &base.peripheral {
            let f = &quotient.factors[i];
            if f.is_trivial() {
                continue;
            }
            let info = truncation_depth(f, certify_radius, &format!("{}:P{}", quotient.name, i))?;
            truncation.insert(i, info);
        }
        Ok(QuotientContextFull { base: base.clone(), spec: spec.clone(), quotient, truncation })
    }

    pub fn t_c(&self, i: usize) -> Option<u32> {
        self.truncation.get(&i).map(|t| t.t)
    }

    pub fn map(&self) -> QuotientMap {
        QuotientMap { base: self.base.clone(), target: self.quotient.clone() }
    }

    /// Nonzero kernel generators of peripheral `i` in factor coordinates.
    pub fn kernel_gens(&self, i: usize) -> Vec<Coords> {
        let f = &self.base.factors[i];
        self.spec
            .kernels
            .get(&i)
            .map(|ks| ks.iter().map(|v| f.project(v)).filter(|c| !AbelianFactor::is_zero(c)).collect())
            .unwrap_or_default()
    }

    /// Image of a base-space vertex in the cusped space of the filled group.
    pub fn project_vertex(&self, v: &CuspedVertex) -> CuspedVertex {
        project_vertex(&self.map(), v)
    }

    /// Horoball centers met by a base ball, sorted.
    pub fn centers_in(&self, ball: &BallSnapshot<CuspedVertex>) -> Vec<HoroCenter> {
        let mut out: Vec<HoroCenter> = Vec::new();
        for v in &ball.vertices {
            match v {
                CuspedVertex::Cayley(g) => {
                    for &i in &self.base.peripheral {
                        out.push(HoroCenter::new(&self.base, g, i));
                    }
                }
                CuspedVertex::Horoball { peripheral, coset, .. } => {
                    out.push(HoroCenter { peripheral: *peripheral as usize, coset: coset.clone() })
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    fn quotient_kind(&self, i: usize) -> QuotientKind {
        self.spec.kinds.get(&i).copied().unwrap_or(QuotientKind::Infinite)
    }
}

pub fn project_vertex(map: &QuotientMap, v: &CuspedVertex) -> CuspedVertex {
    match v {
        CuspedVertex::Cayley(g) => CuspedVertex::Cayley(map.image(g)),
        CuspedVertex::Horoball { peripheral, depth, .. } => {
            let g = map.image(&v.element(&map.base));
            CuspedVertex::over(&map.target, &g, *peripheral as usize, *depth)
        }
    }
}

type Locator = Arc<dyn Fn(&CuspedVertex) -> Result<CuspedVertex> + Send + Sync>;

/// A ball in a quotient of the cusped space, with the map sending base
/// vertices to their quotient vertex.
pub struct QuotientBall {
    pub ball: BallSnapshot<CuspedVertex>,
    /// context the vertex labels live in
    pub ctx: GroupContext,
    pub acting: String,
    pub truncated: bool,
    /// peripherals whose quotient is finite, so truncation cuts a finite
    /// horoball
    pub finite_truncated: Vec<usize>,
    locator: Locator,
}

impl fmt::Debug for QuotientBall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuotientBall")
            .field("ctx", &self.ctx.name)
            .field("acting", &self.acting)
            .field("vertices", &self.ball.len())
            .field("truncated", &self.truncated)
            .finish()
    }
}

impl QuotientBall {
    /// Quotient vertex of a base-space vertex.
    pub fn image(&self, v: &CuspedVertex) -> Result<CuspedVertex> {
        (self.locator)(v)
    }

    /// Ball index of the image of a base vertex.
    pub fn locate(&self, v: &CuspedVertex) -> Result<Option<usize>> {
        Ok(self.ball.index_of(&self.image(v)?))
    }
}

fn t_c_caps(qctx: &QuotientContextFull) -> FxHashMap<usize, u32> {
    qctx.truncation.iter().map(|(&i, info)| (i, info.t)).collect()
}

/// The cusped space of the filled group, optionally truncated at `t_c`.
pub fn quotient_space(qctx: &QuotientContextFull, truncate: bool) -> CuspedSpace {
    let sp = CuspedSpace::combinatorial(qctx.quotient.clone());
    if truncate {
        sp.with_depth_caps(t_c_caps(qctx))
    } else {
        sp
    }
}

/// Ball of radius `radius` in `X/K` (the cusped space of the filled group),
/// or in `T_G` when `truncate` is set.
pub fn quotient_cusped_ball(qctx: &QuotientContextFull, radius: u32, truncate: bool) -> Result<QuotientBall> {
    let ball = quotient_space(qctx, truncate).ball(CuspedVertex::identity(), radius)?;
    let map = qctx.map();
    let finite_truncated = if truncate {
        qctx.base.peripheral.iter().copied().filter(|&i| qctx.quotient_kind(i) == QuotientKind::Finite).collect()
    } else {
        Vec::new()
    };
    Ok(QuotientBall {
        ball,
        ctx: qctx.quotient.clone(),
        acting: "K".into(),
        truncated: truncate,
        finite_truncated,
        locator: Arc::new(move |v| Ok(project_vertex(&map, v))),
    })
}

/// Smallest-key representative of `p + N` for a sublattice `N` spanned by
/// `gens`; exact for one generator, coordinate descent otherwise.
pub fn min_residue(f: &AbelianFactor, p: &[i64], gens: &[Coords]) -> Result<Coords> {
    let key = |c: &Coords| -> Result<(u64, Coords)> { Ok((f.word_length(c)?, c.clone())) };
    let mut best: Coords = p.iter().copied().collect();
    f.reduce(&mut best);
    if gens.is_empty() {
        return Ok(best);
    }
    let mut best_key = key(&best)?;
    loop {
        let mut improved = false;
        for v in gens {
            let cand = best_on_line(f, &best, v)?;
            let k = key(&cand)?;
            if k < best_key {
                best = cand;
                best_key = k;
                improved = true;
            }
        }
        if !improved {
            return Ok(best);
        }
    }
}

fn best_on_line(f: &AbelianFactor, p: &Coords, v: &Coords) -> Result<Coords> {
    let at = |m: i64| f.add_scaled(p, v, m);
    let len = |m: i64| f.word_length(&at(m));
    let mut candidates = Vec::new();
    if f.is_finite() {
        let mut m = 0;
        loop {
            let c = at(m);
            if m > 0 && c == *p {
                break;
            }
            candidates.push(c);
            m += 1;
        }
    } else {
        // the length is convex in m: walk downhill with doubling steps
        let mut m = 0i64;
        let mut cur = len(m)?;
        for dir in [1i64, -1] {
            let mut step = 1i64;
            loop {
                let next = len(m + dir * step)?;
                if next < cur {
                    m += dir * step;
                    cur = next;
                    step *= 2;
                } else if step > 1 {
                    step = 1;
                } else {
                    break;
                }
            }
        }
        let mut lo = m;
        while len(lo - 1)? == cur {
            lo -= 1;
        }
        let mut hi = m;
        while len(hi + 1)? == cur {
            hi += 1;
        }
        candidates.extend((lo..=hi).map(at));
    }
    let mut best: Option<(u64, Coords)> = None;
    for c in candidates {
        let k = (f.word_length(&c)?, c);
        if best.as_ref().map_or(true, |b| k < *b) {
            best = Some(k);
        }
    }
    Ok(best.unwrap().1)
}

/// Canonical representatives of `K_W`-orbits, where `K_W` is generated by
/// the stabilizer kernels `K_c` of a finite list of horoball centers.
pub struct OrbitCanonicalizer {
    pub ctx: GroupContext,
    pub centers: Vec<HoroCenter>,
    kernels: FxHashMap<usize, Vec<Coords>>,
    pub budget: usize,
    memo: Mutex<FxHashMap<GroupElement, GroupElement>>,
}

impl fmt::Debug for OrbitCanonicalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OrbitCanonicalizer").field("centers", &self.centers).field("budget", &self.budget).finish()
    }
}

impl OrbitCanonicalizer {
    pub fn new(qctx: &QuotientContextFull, centers: &[HoroCenter], budget: usize) -> Self {
        let kernels = qctx.base.peripheral.iter().map(|&i| (i, qctx.kernel_gens(i))).collect();
        OrbitCanonicalizer {
            ctx: qctx.base.clone(),
            centers: centers.to_vec(),
            kernels,
            budget,
            memo: Mutex::new(FxHashMap::default()),
        }
    }

    /// Repeatedly replaces the syllable following a center's coset prefix by
    /// its smallest residue modulo the center's kernel.
    pub fn canon(&self, g: &GroupElement) -> Result<GroupElement> {
        if self.centers.is_empty() {
            return Ok(g.clone());
        }
        if let Some(r) = self.memo.lock().unwrap().get(g) {
            return Ok(r.clone());
        }
        let mut cur = g.clone();
        let mut steps = 0;
        'outer: loop {
            for c in &self.centers {
                let n = c.coset.syllables.len();
                if cur.syllables.len() <= n || cur.syllables[..n] != c.coset.syllables[..] {
                    continue;
                }
                let s = &cur.syllables[n];
                if s.factor as usize != c.peripheral {
                    continue;
                }
                let f = &self.ctx.factors[c.peripheral];
                let r = min_residue(f, &s.elem, &self.kernels[&c.peripheral])?;
                if r == s.elem {
                    continue;
                }
                let mut head = GroupElement { syllables: cur.syllables[..n].iter().cloned().collect() };
                head = self.ctx.mul_syllable(&head, c.peripheral, &r);
                let tail = GroupElement { syllables: cur.syllables[n + 1..].iter().cloned().collect() };
                cur = self.ctx.mul(&head, &tail);
                steps += 1;
                if steps > self.budget {
                    return Err(LabError::OrbitBudget(self.budget));
                }
                continue 'outer;
            }
            break;
        }
        self.memo.lock().unwrap().insert(g.clone(), cur.clone());
        Ok(cur)
    }

    pub fn canon_vertex(&self, v: &CuspedVertex) -> Result<CuspedVertex> {
        match v {
            CuspedVertex::Cayley(g) => Ok(CuspedVertex::Cayley(self.canon(g)?)),
            CuspedVertex::Horoball { peripheral, depth, .. } => {
                let g = self.canon(&v.element(&self.ctx))?;
                Ok(CuspedVertex::over(&self.ctx, &g, *peripheral as usize, *depth))
            }
        }
    }

    /// Whether `g` lies in `K_W`.
    pub fn contains(&self, g: &GroupElement) -> Result<bool> {
        Ok(self.canon(g)?.is_identity())
    }

    /// Whether the stabilizer kernel of horoball `c` lies in `K_W`.
    pub fn covers(&self, c: &HoroCenter) -> Result<bool> {
        let gens = &self.kernels[&c.peripheral];
        if gens.is_empty() {
            return Ok(false);
        }
        for n in gens {
            let k = self.ctx.mul(&self.ctx.mul_syllable(&c.coset, c.peripheral, n), &self.ctx.inv(&c.coset));
            if !self.contains(&k)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `X / K_W` (truncated at `t_c` on horoballs whose kernel lies in `K_W`)
/// as an implicit graph over canonical orbit representatives.
pub struct OrbitSpace {
    pub base: CuspedSpace,
    pub canon: Arc<OrbitCanonicalizer>,
    failure: Mutex<Option<LabError>>,
}

impl OrbitSpace {
    pub fn new(qctx: &QuotientContextFull, centers: &[HoroCenter], truncate: bool, budget: usize) -> Self {
        let canon = Arc::new(OrbitCanonicalizer::new(qctx, centers, budget));
        let mut base = CuspedSpace::new(qctx.base.clone(), HoroballModel::combinatorial());
        if truncate {
            let caps = t_c_caps(qctx);
            let c2 = canon.clone();
            let memo: Arc<Mutex<FxHashMap<HoroCenter, bool>>> = Arc::default();
            let rule: TruncationRule = Arc::new(move |i, coset| {
                let cap = *caps.get(&i)?;
                let c = HoroCenter { peripheral: i, coset: coset.clone() };
                if let Some(&hit) = memo.lock().unwrap().get(&c) {
                    return hit.then_some(cap);
                }
                // budget failures surface later through canon_vertex
                let hit = c2.covers(&c).unwrap_or(false);
                memo.lock().unwrap().insert(c, hit);
                hit.then_some(cap)
            });
            base = base.with_truncation(rule);
        }
        OrbitSpace { base, canon, failure: Mutex::new(None) }
    }
}

impl ImplicitGraph for OrbitSpace {
    type V = CuspedVertex;

    fn neighbors(&self, v: &CuspedVertex, out: &mut Vec<(CuspedVertex, u32)>) {
        let mut raw = Vec::new();
        self.base.neighbors(v, &mut raw);
        for (w, wt) in raw {
            match self.canon.canon_vertex(&w) {
                Ok(c) if c != *v => out.push((c, wt)),
                Ok(_) => {}
                Err(e) => {
                    self.failure.lock().unwrap().get_or_insert(e);
                }
            }
        }
    }
}

/// Ball of radius `radius` in `X/K_W`, where `K_W` is generated by the
/// kernels of `centers`; truncated at `t_c` inside the covered horoballs
/// when `truncate` is set.
pub fn partial_quotient_ball(
    qctx: &QuotientContextFull,
    centers: &[HoroCenter],
    radius: u32,
    truncate: bool,
    budget: usize,
) -> Result<QuotientBall> {
    let space = OrbitSpace::new(qctx, centers, truncate, budget);
    let ball = BallSnapshot::build(&space, CuspedVertex::identity(), radius)?;
    if let Some(e) = space.failure.lock().unwrap().take() {
        return Err(e);
    }
    let canon = space.canon.clone();
    Ok(QuotientBall {
        ball,
        ctx: qctx.base.clone(),
        acting: if centers.is_empty() { "1".into() } else { format!("K_W({})", centers.len()) },
        truncated: truncate,
        finite_truncated: Vec::new(),
        locator: Arc::new(move |v| canon.canon_vertex(v)),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub radius: u32,
    pub isometric: bool,
    pub pairs: usize,
    /// labels of a pair whose distance drops, with base and quotient distance
    pub witness: Option<(String, String, u32, u32)>,
}

/// Whether the `radius`-ball at the identity maps isometrically into `X/K`.
pub fn ball_embedding_check(qctx: &QuotientContextFull, radius: u32) -> Result<EmbeddingReport> {
    let base = CuspedSpace::combinatorial(qctx.base.clone()).ball(CuspedVertex::identity(), 2 * radius)?;
    let quot = quotient_space(qctx, false).ball(CuspedVertex::identity(), 2 * radius)?;
    let map = qctx.map();
    let inner: Vec<usize> = (0..base.len()).filter(|&i| base.center_dist[i] <= radius).collect();
    let images: Vec<usize> = inner
        .iter()
        .map(|&i| quot.index_of(&project_vertex(&map, &base.vertices[i])).ok_or(LabError::NotInBall))
        .collect::<Result<_>>()?;
    let mut pairs = 0;
    for (a, &i) in inner.iter().enumerate() {
        let rb = base.row(i);
        let rq = quot.row(images[a]);
        for (b, &j) in inner.iter().enumerate().skip(a + 1) {
            pairs += 1;
            let (db, dq) = (rb[j], rq[images[b]]);
            if db != dq {
                let ctx = &qctx.base;
                return Ok(EmbeddingReport {
                    radius,
                    isometric: false,
                    pairs,
                    witness: Some((base.vertices[i].label(ctx), base.vertices[j].label(ctx), db, dq)),
                });
            }
        }
    }
    Ok(EmbeddingReport { radius, isometric: true, pairs, witness: None })
}

/// Distance between `(0, a)` and `(p, b)` in the horoball over a factor,
/// where `d` is the word length of `p`, optionally capped at depth `cap`.
/// Returns the length and the deepest turning depth realizing it.
pub fn horoball_distance(d: u64, a: u32, b: u32, cap: Option<u32>) -> (u64, u32) {
    let top = a.max(b);
    let high = cap.unwrap_or(top + 64).max(top);
    let mut best = (u64::MAX, 0);
    for j in 0..=high {
        let len = a.abs_diff(j) as u64 + b.abs_diff(j) as u64 + ceil_shift(d, j);
        if len <= best.0 {
            best = (len, j);
        }
        if j >= top && ceil_shift(d, j) <= 1 {
            break;
        }
    }
    best
}

/// Length of the part of a geodesic crossing one syllable of a normal form.
pub fn syllable_distance(ctx: &GroupContext, factor: usize, elem: &[i64]) -> Result<(u64, u32)> {
    let d = ctx.factors[factor].word_length(elem)?;
    if ctx.is_peripheral(factor) {
        Ok(horoball_distance(d, 0, 0, None))
    } else {
        Ok((d, 0))
    }
}

/// `d(1, g)` in the untruncated cusped space. Every Cayley vertex cuts the
/// cusped space of a free product, so the distance is additive over
/// syllables.
pub fn cusped_distance(ctx: &GroupContext, g: &GroupElement) -> Result<u64> {
    let mut total = 0;
    for s in &g.syllables {
        total += syllable_distance(ctx, s.factor as usize, &s.elem)?.0;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreendlingerStep {
    pub center: String,
    pub k: String,
    pub depth: u32,
    pub before: u64,
    pub after: u64,
}

/// One shortening move: a horoball `c` met by the geodesic `[x, gx]` at
/// depth at least `depth` and `k` in `K_c` with `d(x, kgx) < d(x, gx)`.
pub fn greendlinger_shorten(
    qctx: &QuotientContextFull,
    g: &GroupElement,
    x: &GroupElement,
    depth: u32,
) -> Result<(HoroCenter, GroupElement, GreendlingerStep)> {
    let ctx = &qctx.base;
    if g.is_identity() || !qctx.map().image(g).is_identity() {
        return Err(LabError::NotInKernel);
    }
    // work at the identity with h = x^-1 g x
    let h = ctx.mul(&ctx.mul(&ctx.inv(x), g), x);
    let before = cusped_distance(ctx, &h)?;
    let mut prefix = GroupElement::identity();
    for (pos, s) in h.syllables.iter().enumerate() {
        let i = s.factor as usize;
        let gens = qctx.kernel_gens(i);
        if ctx.is_peripheral(i) && !gens.is_empty() {
            let (_, turn) = syllable_distance(ctx, i, &s.elem)?;
            let f = &ctx.factors[i];
            let r = min_residue(f, &s.elem, &gens)?;
            if turn >= depth && r != s.elem {
                let n = f.sub(&r, &s.elem);
                let k_local = ctx.mul(&ctx.mul_syllable(&prefix, i, &n), &ctx.inv(&prefix));
                let after = cusped_distance(ctx, &ctx.mul(&k_local, &h))?;
                if after < before {
                    let k = ctx.mul(&ctx.mul(x, &k_local), &ctx.inv(x));
                    let c = HoroCenter::new(ctx, &ctx.mul(x, &prefix), i);
                    let step = GreendlingerStep {
                        center: c.label(ctx),
                        k: ctx.format(&k),
                        depth: turn,
                        before,
                        after,
                    };
                    return Ok((c, k, step));
                }
            }
        }
        prefix = ctx.mul_syllable(&prefix, i, &h.syllables[pos].elem);
    }
    Err(LabError::NoHoroball(depth))
}

/// Iterates the shortening move until `g` becomes trivial.
pub fn greendlinger_sequence(qctx: &QuotientContextFull, g: &GroupElement, depth: u32) -> Result<Vec<GreendlingerStep>> {
    let ctx = &qctx.base;
    let mut cur = g.clone();
    let mut steps = Vec::new();
    while !cur.is_identity() {
        let (_, k, step) = greendlinger_shorten(qctx, &cur, &GroupElement::identity(), depth)?;
        cur = ctx.mul(&k, &cur);
        steps.push(step);
        if steps.len() > 4096 {
            return Err(LabError::Precondition("shortening did not terminate".into()));
        }
    }
    Ok(steps)
}

/// Kernel elements with at most `syllables` syllables and `d(1, g) <= range`,
/// sorted.
pub fn kernel_words(qctx: &QuotientContextFull, syllables: usize, range: u64) -> Result<Vec<GroupElement>> {
    let ctx = &qctx.base;
    let mut options: Vec<Vec<(Coords, u64)>> = Vec::new();
    for (i, f) in ctx.factors.iter().enumerate() {
        let mut opts = Vec::new();
        // factor elements within cusped distance `range`
        let mut r = range;
        if ctx.is_peripheral(i) {
            r = (0..63u32).map(|j| (range.saturating_sub(2 * j as u64)) << j).max().unwrap_or(range);
        }
        for c in f.ball(r) {
            if AbelianFactor::is_zero(&c) {
                continue;
            }
            let (d, _) = syllable_distance(ctx, i, &c)?;
            if d <= range {
                opts.push((c, d));
            }
        }
        options.push(opts);
    }
    let map = qctx.map();
    let mut out = Vec::new();
    let mut stack: Vec<(GroupElement, u64)> = vec![(GroupElement::identity(), 0)];
    while let Some((g, used)) = stack.pop() {
        if !g.is_identity() && map.image(&g).is_identity() {
            out.push(g.clone());
        }
        if g.syllable_len() == syllables {
            continue;
        }
        for (i, opts) in options.iter().enumerate() {
            if g.last_factor() == Some(i) {
                continue;
            }
            for (c, d) in opts {
                if used + d <= range {
                    stack.push((ctx.mul_syllable(&g, i, c), used + d));
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationReport {
    pub theta: f64,
    pub multiplier: f64,
    /// depth where the excluded deep part `A_c` starts
    pub a_depth: u32,
    pub samples: usize,
    pub worst_ratio: f64,
    pub worst: Option<(String, u32, u64)>,
    pub pass: bool,
}

/// Smallest `d(x, kx) / theta` over kernel elements `k` of the horoballs at
/// the identity and points `x` of those horoballs above depth `a_depth`.
/// Points outside a horoball move at least as far as its frontier points.
pub fn very_translating_check(
    qctx: &QuotientContextFull,
    theta: f64,
    multiplier: f64,
    a_depth: u32,
    powers: i64,
) -> Result<TranslationReport> {
    if theta <= 0.0 {
        return Err(LabError::Precondition("theta must be positive".into()));
    }
    let ctx = &qctx.base;
    let mut worst: Option<(f64, String, u32, u64)> = None;
    let mut samples = 0;
    for &i in &ctx.peripheral {
        let f = &ctx.factors[i];
        for v in qctx.kernel_gens(i) {
            for m in 1..=powers {
                let k = f.add_scaled(&f.zero(), &v, m);
                if AbelianFactor::is_zero(&k) {
                    continue;
                }
                let d = f.word_length(&k)?;
                for depth in 0..a_depth {
                    samples += 1;
                    let moved = horoball_distance(d, depth, depth, None).0;
                    let ratio = moved as f64 / theta;
                    if worst.as_ref().map_or(true, |w| ratio < w.0) {
                        worst = Some((ratio, format!("P{}:{}", i, f.describe(&k)), depth, moved));
                    }
                }
            }
        }
    }
    let (ratio, label, depth, moved) = worst.ok_or_else(|| LabError::Precondition("no kernel elements sampled".into()))?;
    Ok(TranslationReport {
        theta,
        multiplier,
        a_depth,
        samples,
        worst_ratio: ratio,
        worst: Some((label, depth, moved)),
        pass: ratio >= multiplier,
    })
}
