//! Spiderwebs inside a ball of the cusped space: the initial web, the
//! enlargement step, axiom checks, and the free-product structure of `K_W`.

use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::cusped::CuspedVertex;
use crate::error::{LabError, Result};
use crate::graph::BallSnapshot;
use crate::group::{GroupContext, GroupElement};
use crate::hyperbolicity::{distance_to_set, geodesic_union, quasiconvexity_witness};
use crate::quotient::{cusped_distance, HoroCenter, OrbitCanonicalizer, QuotientContextFull, DEFAULT_ORBIT_BUDGET};

/// Neighborhood and depth constants of the construction. The paper profile
/// uses multiples of theta; the desk profile uses small integers so that the
/// steps are visible inside balls of radius 10 or less.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub theta: u32,
    /// S1 quasiconvexity bound (4 theta)
    pub qc: u32,
    /// enlargement neighborhood (10 theta)
    pub step: u32,
    /// S2 neighborhood (50 theta)
    pub s2: u32,
    /// scan for new horoballs (100 theta)
    pub scan: u32,
    /// depth where the deep part `A_c` starts (500 theta)
    pub deep: u32,
}

impl Profile {
    pub fn desk() -> Self {
        Profile { name: "desk".into(), theta: 1, qc: 4, step: 1, s2: 1, scan: 2, deep: 4 }
    }

    pub fn paper(theta: u32) -> Self {
        let t = theta.max(1);
        Profile { name: "paper".into(), theta: t, qc: 4 * t, step: 10 * t, s2: 50 * t, scan: 100 * t, deep: 500 * t }
    }

    pub fn parse(name: &str, theta: u32) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper(theta)),
            _ => Err(LabError::Parse { key: "profile".into(), msg: format!("unknown profile `{name}`") }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spiderweb {
    pub generation: usize,
    /// horoball centers whose kernels generate `K_W`, in the order added
    pub centers: Vec<HoroCenter>,
    /// sorted ball indices of `W`
    pub hull: Vec<usize>,
    /// sorted ball indices of `S_W`
    pub saturated: Vec<usize>,
    /// centers whose deep part meets `W`
    pub deep_centers: Vec<HoroCenter>,
    pub profile: Profile,
    /// pairs left out of the hull because their geodesic may leave the ball
    pub uncertified_pairs: usize,
    /// how the web was produced: "initial", "neighborhood" or "kernel"
    pub branch: String,
}

/// Left action of a group element on cusped-space vertices.
pub fn act(ctx: &GroupContext, k: &GroupElement, v: &CuspedVertex) -> CuspedVertex {
    match v {
        CuspedVertex::Cayley(g) => CuspedVertex::Cayley(ctx.mul(k, g)),
        CuspedVertex::Horoball { peripheral, depth, .. } => {
            CuspedVertex::over(ctx, &ctx.mul(k, &v.element(ctx)), *peripheral as usize, *depth)
        }
    }
}

fn mask_of(n: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &i in set {
        m[i] = true;
    }
    m
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

/// Ball vertices within `r` of `set`.
pub fn neighborhood(ball: &BallSnapshot<CuspedVertex>, set: &[usize], r: u32) -> Vec<usize> {
    let d = distance_to_set(ball, set);
    (0..ball.len()).filter(|&i| d[i] <= r).collect()
}

/// Horoball centers whose part at depth `>= deep` meets `set`.
pub fn deep_centers(ball: &BallSnapshot<CuspedVertex>, set: &[usize], deep: u32) -> BTreeSet<HoroCenter> {
    let mut out = BTreeSet::new();
    for &i in set {
        if let CuspedVertex::Horoball { peripheral, coset, depth, .. } = &ball.vertices[i] {
            if *depth >= deep {
                out.insert(HoroCenter { peripheral: *peripheral as usize, coset: coset.clone() });
            }
        }
    }
    out
}

/// Generators `h n h^-1` of the kernels `K_c`.
pub fn kernel_generators(qctx: &QuotientContextFull, centers: &[HoroCenter]) -> Vec<GroupElement> {
    let ctx = &qctx.base;
    let mut out = Vec::new();
    for c in centers {
        for n in qctx.kernel_gens(c.peripheral) {
            out.push(ctx.mul(&ctx.mul_syllable(&c.coset, c.peripheral, &n), &ctx.inv(&c.coset)));
        }
    }
    out
}

fn saturate(ball: &BallSnapshot<CuspedVertex>, hull: &[usize], centers: &BTreeSet<HoroCenter>, deep: u32) -> Vec<usize> {
    let mut mask = mask_of(ball.len(), hull);
    for (i, v) in ball.vertices.iter().enumerate() {
        if let CuspedVertex::Horoball { peripheral, coset, depth, .. } = v {
            if *depth >= deep && centers.contains(&HoroCenter { peripheral: *peripheral as usize, coset: coset.clone() }) {
                mask[i] = true;
            }
        }
    }
    indices(&mask)
}

/// `W = {1}` with no kernel factors.
pub fn initial_spiderweb(ball: &BallSnapshot<CuspedVertex>, profile: &Profile) -> Spiderweb {
    let hull = vec![ball.center];
    let deep = deep_centers(ball, &hull, profile.deep);
    Spiderweb {
        generation: 0,
        centers: Vec::new(),
        saturated: saturate(ball, &hull, &deep, profile.deep),
        hull,
        deep_centers: deep.into_iter().collect(),
        profile: profile.clone(),
        uncertified_pairs: 0,
        branch: "initial".into(),
    }
}

/// Distance in the ball from its center to the closest vertex over `c`.
fn center_distance(ball: &BallSnapshot<CuspedVertex>, ctx: &GroupContext, c: &HoroCenter) -> u32 {
    let mut best = u32::MAX;
    for (i, v) in ball.vertices.iter().enumerate() {
        let hit = match v {
            CuspedVertex::Horoball { peripheral, coset, .. } => *peripheral as usize == c.peripheral && *coset == c.coset,
            CuspedVertex::Cayley(g) => HoroCenter::new(ctx, g, c.peripheral) == *c,
        };
        if hit {
            best = best.min(ball.center_dist[i]);
        }
    }
    best
}

impl Spiderweb {
    pub fn canonicalizer(&self, qctx: &QuotientContextFull) -> OrbitCanonicalizer {
        OrbitCanonicalizer::new(qctx, &self.centers, DEFAULT_ORBIT_BUDGET)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.hull.binary_search(&i).is_ok()
    }

    /// One enlargement step.
    pub fn enlarge(&self, qctx: &QuotientContextFull, ball: &BallSnapshot<CuspedVertex>) -> Result<Spiderweb> {
        let p = &self.profile;
        let ctx = &qctx.base;
        let near = neighborhood(ball, &self.hull, p.step);
        let scan = neighborhood(ball, &self.hull, p.scan);
        let canon = self.canonicalizer(qctx);
        let mut fresh: Vec<(u32, HoroCenter)> = Vec::new();
        for c in deep_centers(ball, &scan, p.deep) {
            if qctx.kernel_gens(c.peripheral).is_empty() || canon.covers(&c)? {
                continue;
            }
            fresh.push((center_distance(ball, ctx, &c), c));
        }
        fresh.sort();
        let mut centers = self.centers.clone();
        let mut added = 0;
        for (_, c) in fresh {
            // skip centers already generated by earlier choices
            let so_far = OrbitCanonicalizer::new(qctx, &centers, DEFAULT_ORBIT_BUDGET);
            if so_far.covers(&c)? {
                continue;
            }
            centers.push(c);
            added += 1;
        }
        let (hull, uncertified, branch) = if added == 0 {
            (near, 0, "neighborhood")
        } else {
            let plus = OrbitCanonicalizer::new(qctx, &centers, DEFAULT_ORBIT_BUDGET);
            let mut targets: FxHashSet<CuspedVertex> = FxHashSet::default();
            for &i in &near {
                targets.insert(plus.canon_vertex(&ball.vertices[i])?);
            }
            let mut orbit = Vec::new();
            for (i, v) in ball.vertices.iter().enumerate() {
                if targets.contains(&plus.canon_vertex(v)?) {
                    orbit.push(i);
                }
            }
            let (mask, skipped) = geodesic_union(ball, &orbit);
            (indices(&mask), skipped, "kernel")
        };
        let deep = deep_centers(ball, &hull, p.deep);
        Ok(Spiderweb {
            generation: self.generation + 1,
            centers,
            saturated: saturate(ball, &hull, &deep, p.deep),
            hull,
            deep_centers: deep.into_iter().collect(),
            profile: p.clone(),
            uncertified_pairs: uncertified,
            branch: branch.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub syllables: usize,
    pub max_exponent: i64,
    pub expected: u64,
    pub observed: u64,
}

impl GrowthReport {
    pub fn free(&self) -> bool {
        self.expected == self.observed
    }
}

/// Counts reduced words of syllable length at most `s` (exponents in
/// `[-e, e]`) in the abstract free product of the cyclic groups generated by
/// `generators`, and the distinct elements of `G` they evaluate to.
pub fn kernel_growth_check(
    ctx: &GroupContext,
    generators: &[GroupElement],
    s: usize,
    e: i64,
    budget: u64,
) -> Result<GrowthReport> {
    let f = generators.len() as u64;
    let per = 2 * e as u64;
    let mut expected = 1u64;
    let mut layer = 0u64;
    for len in 1..=s {
        layer = if len == 1 { f * per } else { layer * f.saturating_sub(1) * per };
        expected += layer;
    }
    if expected > budget {
        return Err(LabError::EnumerationBudget(budget as usize));
    }
    let powers: Vec<Vec<GroupElement>> = generators
        .iter()
        .map(|g| (-e..=e).filter(|&k| k != 0).map(|k| ctx.pow(g, k)).collect())
        .collect();
    // distinct elements are told apart by a 128-bit fingerprint of the
    // normal form
    let mut seen: FxHashSet<u128> = FxHashSet::default();
    seen.reserve(expected as usize);
    fn walk(
        ctx: &GroupContext,
        powers: &[Vec<GroupElement>],
        g: &GroupElement,
        left: usize,
        last: Option<usize>,
        seen: &mut FxHashSet<u128>,
    ) {
        seen.insert(fingerprint(g));
        if left == 0 {
            return;
        }
        for (j, ps) in powers.iter().enumerate() {
            if Some(j) != last {
                for p in ps {
                    walk(ctx, powers, &ctx.mul(g, p), left - 1, Some(j), seen);
                }
            }
        }
    }
    walk(ctx, &powers, &GroupElement::identity(), s, None, &mut seen);
    Ok(GrowthReport { syllables: s, max_exponent: e, expected, observed: seen.len() as u64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    /// radius of the inner ball on which S2 and S3 are checked
    pub inner_radius: u32,
    pub s1_defect: u32,
    pub s1_pass: bool,
    pub s2_pass: bool,
    pub s2_new: Vec<String>,
    pub s3_pass: bool,
    pub s3_witness: Option<(String, String)>,
    pub s4: GrowthReport,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.s1_pass && self.s2_pass && self.s3_pass && self.s4.free()
    }
}

pub const GROWTH_BUDGET: u64 = 12_000_000;

fn fingerprint(g: &GroupElement) -> u128 {
    let mut a = rustc_hash::FxHasher::default();
    let mut b = std::collections::hash_map::DefaultHasher::new();
    g.hash(&mut a);
    g.hash(&mut b);
    ((a.finish() as u128) << 64) | b.finish() as u128
}

/// Checks S1 to S4 for `web` on the part of the ball with room for the S2
/// neighborhood.
pub fn verify_axioms(web: &Spiderweb, qctx: &QuotientContextFull, ball: &BallSnapshot<CuspedVertex>) -> Result<AxiomReport> {
    let p = &web.profile;
    let ctx = &qctx.base;
    if ball.radius <= p.s2 {
        return Err(LabError::Precondition(format!("ball radius {} leaves no margin for S2", ball.radius)));
    }
    let inner_radius = ball.radius - p.s2;
    let (s1_defect, _) = quasiconvexity_witness(&web.hull, ball)?;

    let canon = web.canonicalizer(qctx);
    let inner: Vec<usize> = web.hull.iter().copied().filter(|&i| ball.center_dist[i] <= inner_radius).collect();
    let known: BTreeSet<HoroCenter> = web.deep_centers.iter().cloned().collect();
    let mut s2_new = Vec::new();
    for c in deep_centers(ball, &neighborhood(ball, &inner, p.s2), p.deep) {
        if !known.contains(&c) && !canon.covers(&c)? {
            s2_new.push(c.label(ctx));
        }
    }

    let mut s3_witness = None;
    'gens: for k in kernel_generators(qctx, &web.centers) {
        for k in [k.clone(), ctx.inv(&k)] {
            let reach = cusped_distance(ctx, &k)? as u32;
            if reach > ball.radius {
                continue;
            }
            for &i in &web.hull {
                if ball.center_dist[i] + reach > ball.radius {
                    continue;
                }
                let image = act(ctx, &k, &ball.vertices[i]);
                let hit = ball.index_of(&image).map_or(false, |j| web.contains(j));
                if !hit {
                    s3_witness = Some((ctx.format(&k), ball.vertices[i].label(ctx)));
                    break 'gens;
                }
            }
        }
    }
    let s4 = kernel_growth_check(ctx, &kernel_generators(qctx, &web.centers), 4, 1, GROWTH_BUDGET)?;
    Ok(AxiomReport {
        inner_radius,
        s1_defect,
        s1_pass: s1_defect <= p.qc,
        s2_pass: s2_new.is_empty(),
        s2_new,
        s3_pass: s3_witness.is_none(),
        s3_witness,
        s4,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exhaustion {
    pub webs: Vec<Spiderweb>,
    /// `W_i` inside `W_{i+1}`, per consecutive pair
    pub nesting: Vec<bool>,
    /// `W_{i+1}` contains the step neighborhood of `W_i`
    pub step_contained: Vec<bool>,
    pub margin: u32,
    /// Cayley vertices of the inner ball missed by every generation
    pub uncovered: usize,
    /// first generation covering every inner Cayley vertex
    pub covered_at: Option<usize>,
    pub stop: String,
}

/// Runs the enlargement until the ball is covered, nothing changes, or
/// `max_generations` webs past the initial one were produced.
pub fn exhaust(
    qctx: &QuotientContextFull,
    ball: &BallSnapshot<CuspedVertex>,
    profile: &Profile,
    max_generations: usize,
    margin: u32,
) -> Result<Exhaustion> {
    let inner: Vec<usize> = (0..ball.len())
        .filter(|&i| ball.vertices[i].is_cayley() && ball.center_dist[i] + margin <= ball.radius)
        .collect();
    let covers = |w: &Spiderweb| inner.iter().all(|&i| w.contains(i));
    let mut webs = vec![initial_spiderweb(ball, profile)];
    let mut nesting = Vec::new();
    let mut step_contained = Vec::new();
    let mut stop = "generation limit".to_string();
    let mut covered_at = if covers(&webs[0]) { Some(0) } else { None };
    if webs[0].hull.len() == ball.len() {
        stop = "ball covered".into();
    } else {
        for _ in 0..max_generations {
            let last = webs.last().unwrap();
            let next = last.enlarge(qctx, ball)?;
            nesting.push(last.hull.iter().all(|&i| next.contains(i)));
            step_contained.push(neighborhood(ball, &last.hull, profile.step).iter().all(|&i| next.contains(i)));
            let unchanged = next.hull == last.hull && next.centers == last.centers;
            webs.push(next);
            if covered_at.is_none() && covers(webs.last().unwrap()) {
                covered_at = Some(webs.len() - 1);
            }
            if webs.last().unwrap().hull.len() == ball.len() {
                stop = "ball covered".into();
                break;
            }
            if unchanged {
                stop = "ball exhausted".into();
                break;
            }
        }
    }
    let mut seen = vec![false; ball.len()];
    for w in &webs {
        for &i in &w.hull {
            seen[i] = true;
        }
    }
    let uncovered = inner.iter().filter(|&&i| !seen[i]).count();
    Ok(Exhaustion { webs, nesting, step_contained, margin, uncovered, covered_at, stop })
}

/// Labels of the kernel generators of `centers`, for reports.
pub fn describe_factors(qctx: &QuotientContextFull, centers: &[HoroCenter]) -> Vec<(String, String)> {
    let ctx = &qctx.base;
    centers
        .iter()
        .zip(kernel_generators(qctx, centers))
        .map(|(c, k)| (c.label(ctx), ctx.format(&k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusped::CuspedSpace;
    use crate::group::FillingSpec;

    fn setup(radius: u32) -> (QuotientContextFull, BallSnapshot<CuspedVertex>) {
        let ctx = GroupContext::fixture("FIX1").unwrap();
        let q = QuotientContextFull::new(&ctx, &FillingSpec::slope(&ctx, 8).unwrap(), 64).unwrap();
        let ball = CuspedSpace::combinatorial(ctx).ball(CuspedVertex::identity(), radius).unwrap();
        (q, ball)
    }

    #[test]
    fn initial_web_is_the_identity() {
        let (q, ball) = setup(4);
        let w = initial_spiderweb(&ball, &Profile::desk());
        assert_eq!(w.hull, vec![ball.center]);
        assert!(w.centers.is_empty() && w.deep_centers.is_empty());
        assert!(verify_axioms(&w, &q, &ball).unwrap().all_pass());
    }

    #[test]
    fn first_enlargement_picks_the_horoball_at_one() {
        let (q, ball) = setup(8);
        let mut w = initial_spiderweb(&ball, &Profile::desk());
        while w.centers.is_empty() {
            w = w.enlarge(&q, &ball).unwrap();
        }
        assert_eq!(w.generation, 3);
        assert_eq!(w.centers, vec![HoroCenter { peripheral: 0, coset: GroupElement::identity() }]);
    }

    #[test]
    fn repeated_factor_collides() {
        let ctx = GroupContext::fixture("FIX1").unwrap();
        let k = ctx.element("x^8").unwrap();
        let one = kernel_growth_check(&ctx, &[k.clone()], 3, 1, 1000).unwrap();
        assert!(one.free());
        assert_eq!(one.expected, 3);
        let twice = kernel_growth_check(&ctx, &[k.clone(), k], 3, 1, 1000).unwrap();
        assert!(twice.observed < twice.expected);
    }
}
