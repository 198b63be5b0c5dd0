//! Four-point and thin-triangle constants, Gromov products, quasiconvexity,
//! visibility and tight-path measurements on ball snapshots.

use std::fmt::Debug;
use std::hash::Hash;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::graph::{BallSnapshot, UNREACHED};

pub type Rational = Ratio<i64>;

pub const DEFAULT_EXHAUSTIVE_THRESHOLD: usize = 400;
/// base points drawn for sampled four-point scans
pub const BASE_POOL: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplePolicy {
    /// exhaustive below `threshold` vertices, seeded sampling above
    Auto { threshold: usize, samples: usize, seed: u64 },
    Exhaustive,
    /// exhaustive over quadruples with one point among `bases` (enough for
    /// graphs whose automorphisms move every vertex onto a base)
    ExhaustiveBases(Vec<usize>),
    Sampled { samples: usize, seed: u64 },
}

impl Default for SamplePolicy {
    fn default() -> Self {
        SamplePolicy::Auto { threshold: DEFAULT_EXHAUSTIVE_THRESHOLD, samples: 200_000, seed: 0 }
    }
}

impl SamplePolicy {
    fn resolve(&self, n: usize) -> SamplePolicy {
        match self {
            SamplePolicy::Auto { threshold, samples, seed } => {
                if n <= *threshold {
                    SamplePolicy::Exhaustive
                } else {
                    SamplePolicy::Sampled { samples: *samples, seed: *seed }
                }
            }
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperbolicityReport {
    /// smallest theta with Q(theta) on the tested quadruples
    pub theta_4pt: Rational,
    /// largest tripod-fiber diameter over tested triangles
    pub delta_thin: Rational,
    pub policy: SamplePolicy,
    pub exhaustive: bool,
    /// quadruples (or triangles) actually evaluated; for the exhaustive
    /// four-point scan, the number of base points
    pub tested: u64,
    pub witness: Vec<usize>,
}

fn units(ball_scale: u32, v: i64, den: i64) -> Rational {
    Rational::new(v, den * ball_scale as i64)
}

/// Largest-minus-second-largest of the three pair sums.
#[inline]
pub fn four_point_slack(d: impl Fn(usize, usize) -> u32, q: [usize; 4]) -> u32 {
    let [x, y, z, w] = q;
    let mut s = [d(x, y) + d(z, w), d(x, z) + d(y, w), d(x, w) + d(y, z)];
    s.sort_unstable();
    s[2] - s[1]
}

/// Four-point constant over certified quadruples.
pub fn four_point_delta<V>(ball: &BallSnapshot<V>, policy: &SamplePolicy) -> Result<HyperbolicityReport>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    let n = ball.len();
    let table = ball.table()?;
    let cert = |i: usize, j: usize| ball.certified_with(i, j, table.get(i, j));
    let resolved = policy.resolve(n);
    match &resolved {
        SamplePolicy::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut best = 0u32;
            let mut witness = Vec::new();
            let mut tested = 0u64;
            // uniform quadruples are rarely certified in a big ball, so draw
            // around a pool of base points from the points certified with it
            let mut pool: Vec<usize> = vec![ball.center];
            pool.extend((0..BASE_POOL.min(n)).map(|_| rng.gen_range(0..n)));
            let locals: Vec<(usize, Vec<usize>)> = pool
                .into_iter()
                .map(|x| (x, (0..n).filter(|&w| w != x && cert(x, w)).collect::<Vec<_>>()))
                .filter(|(_, l)| l.len() >= 3)
                .collect();
            for _ in 0..if locals.is_empty() { 0 } else { *samples } {
                let (x, l) = &locals[rng.gen_range(0..locals.len())];
                let q = [*x, l[rng.gen_range(0..l.len())], l[rng.gen_range(0..l.len())], l[rng.gen_range(0..l.len())]];
                let ok = (0..4).all(|a| (a + 1..4).all(|b| cert(q[a], q[b])));
                if !ok {
                    continue;
                }
                tested += 1;
                let s = four_point_slack(|i, j| table.get(i, j), q);
                if s > best || witness.is_empty() {
                    best = best.max(s);
                    witness = q.to_vec();
                }
            }
            if tested == 0 {
                return Err(LabError::NoCertifiedQuadruples);
            }
            Ok(HyperbolicityReport {
                theta_4pt: units(ball.scale, best as i64, 2),
                delta_thin: Rational::from_integer(0),
                policy: resolved.clone(),
                exhaustive: false,
                tested,
                witness,
            })
        }
        _ => {
            let bases: Vec<usize> = match &resolved {
                SamplePolicy::ExhaustiveBases(b) => b.clone(),
                _ => (0..n).collect(),
            };
            let (slack, witness, any) = exhaustive_slack(ball, &bases)?;
            if !any {
                return Err(LabError::NoCertifiedQuadruples);
            }
            Ok(HyperbolicityReport {
                theta_4pt: units(ball.scale, slack as i64, 2),
                delta_thin: Rational::from_integer(0),
                exhaustive: true,
                policy: resolved.clone(),
                tested: bases.len() as u64,
                witness,
            })
        }
    }
}

/// Max four-point slack over certified quadruples containing a base point.
fn exhaustive_slack<V>(ball: &BallSnapshot<V>, bases: &[usize]) -> Result<(u32, Vec<usize>, bool)>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    let table = ball.table()?;
    let n = ball.len();
    let cert = |i: usize, j: usize| ball.certified_with(i, j, table.get(i, j));
    let mut best: i64 = -1;
    let mut witness = Vec::new();
    let mut any = false;
    for &x in bases {
        let local: Vec<usize> = (0..n).filter(|&w| cert(x, w)).collect();
        if local.len() < 2 {
            continue;
        }
        any = true;
        let d = |a: usize, b: usize| table.get(local[a], local[b]);
        let c = |a: usize, b: usize| cert(local[a], local[b]);
        let x_local = local.iter().position(|&v| v == x).unwrap();
        if let Some((s, q)) = max_slack_from_base(local.len(), d, c, x_local, best + 1) {
            best = s as i64;
            witness = q.iter().map(|&i| local[i]).collect();
        }
    }
    Ok((best.max(0) as u32, witness, any))
}

/// Largest four-point slack over quadruples `{base, y, z, w}` of the points
/// `0..m` whose pairs are all certified, provided it is at least `floor`.
///
/// With `P(y,z) = d(base,y) + d(base,z) - d(y,z)` (twice the Gromov
/// product), the slack of a quadruple is the largest
/// `min(P(y,w), P(w,z)) - P(y,z)`. For a target slack `s` one sweep over
/// thresholds `t` from high to low keeps bitsets `B_t[y] = {w : P(y,w) >= t}`
/// and tests the pairs with `P(y,z) = t - s`.
pub fn max_slack_from_base(
    m: usize,
    d: impl Fn(usize, usize) -> u32 + Sync,
    cert: impl Fn(usize, usize) -> bool + Sync,
    base: usize,
    floor: i64,
) -> Option<(u32, [usize; 4])> {
    let words = m.div_ceil(64);
    let p = |a: usize, b: usize| -> i64 { d(base, a) as i64 + d(base, b) as i64 - d(a, b) as i64 };
    let ok: Vec<bool> = (0..m).map(|a| cert(base, a)).collect();
    let mut buckets: Vec<Vec<(u32, u32)>> = Vec::new();
    for a in 0..m {
        if !ok[a] {
            continue;
        }
        for b in a..m {
            if ok[b] && cert(a, b) {
                let v = p(a, b).max(0) as usize;
                if buckets.len() <= v {
                    buckets.resize(v + 1, Vec::new());
                }
                buckets[v].push((a as u32, b as u32));
            }
        }
    }
    let mut found: Option<(u32, [usize; 4])> = None;
    let mut s = floor.max(0) as usize;
    loop {
        let mut bits = vec![0u64; m * words];
        let mut hit = None;
        'sweep: for t in (0..buckets.len()).rev() {
            for &(a, b) in &buckets[t] {
                let (a, b) = (a as usize, b as usize);
                bits[a * words + b / 64] |= 1 << (b % 64);
                bits[b * words + a / 64] |= 1 << (a % 64);
            }
            if t < s {
                break;
            }
            for &(a, b) in &buckets[t - s] {
                let (a, b) = (a as usize, b as usize);
                let (ra, rb) = (&bits[a * words..(a + 1) * words], &bits[b * words..(b + 1) * words]);
                if let Some(k) = (0..words).find(|&k| ra[k] & rb[k] != 0) {
                    let w = k * 64 + (ra[k] & rb[k]).trailing_zeros() as usize;
                    hit = Some([base, a, b, w]);
                    break 'sweep;
                }
            }
        }
        match hit {
            Some(q) => {
                found = Some((s as u32, q));
                s += 1;
            }
            None => return found,
        }
    }
}

/// `(y|z)_x` from a table row.
pub fn gromov_product<V>(ball: &BallSnapshot<V>, y: usize, z: usize, x: usize) -> Result<Rational>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    for (a, b) in [(x, y), (x, z), (y, z)] {
        if !ball.certified(a, b)? {
            return Err(LabError::Uncertified(a, b));
        }
    }
    let t = ball.table()?;
    let twice = t.get(x, y) as i64 + t.get(x, z) as i64 - t.get(y, z) as i64;
    Ok(units(ball.scale, twice, 2))
}

/// Largest tripod-fiber diameter over certified triangles with canonical
/// geodesic sides. Unit-weight balls only.
pub fn thin_triangle_delta<V>(ball: &BallSnapshot<V>, policy: &SamplePolicy) -> Result<HyperbolicityReport>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    if !ball.is_unit() {
        return Err(LabError::Precondition("thin triangles need a unit-weight ball".into()));
    }
    let n = ball.len();
    let table = ball.table()?;
    let cert = |i: usize, j: usize| ball.certified_with(i, j, table.get(i, j));
    let resolved = policy.resolve(n);
    let triangles: Vec<[usize; 3]> = match &resolved {
        SamplePolicy::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*samples)
                .map(|_| [rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)])
                .filter(|t| cert(t[0], t[1]) && cert(t[0], t[2]) && cert(t[1], t[2]))
                .collect()
        }
        SamplePolicy::ExhaustiveBases(bases) => {
            let mut out = Vec::new();
            for &x in bases {
                let local: Vec<usize> = (0..n).filter(|&w| cert(x, w)).collect();
                for (ai, &a) in local.iter().enumerate() {
                    for &b in &local[ai + 1..] {
                        if cert(a, b) {
                            out.push([x, a, b]);
                        }
                    }
                }
            }
            out
        }
        _ => {
            let mut out = Vec::new();
            for x in 0..n {
                let local: Vec<usize> = (x + 1..n).filter(|&w| cert(x, w)).collect();
                for (ai, &a) in local.iter().enumerate() {
                    for &b in &local[ai + 1..] {
                        if cert(a, b) {
                            out.push([x, a, b]);
                        }
                    }
                }
            }
            out
        }
    };
    let worst = triangles
        .par_iter()
        .map(|&[x, y, z]| (tripod_fiber_diameter(ball, x, y, z), [x, y, z]))
        .reduce(|| (0, [0, 0, 0]), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    Ok(HyperbolicityReport {
        theta_4pt: Rational::from_integer(0),
        delta_thin: Rational::from_integer(worst.0 as i64),
        exhaustive: !matches!(resolved, SamplePolicy::Sampled { .. }),
        policy: resolved,
        tested: triangles.len() as u64,
        witness: if worst.0 > 0 { worst.1.to_vec() } else { Vec::new() },
    })
}

/// Fiber diameter of the comparison tripod for the canonical geodesic
/// triangle on `x, y, z` (table must exist).
pub fn tripod_fiber_diameter<V>(ball: &BallSnapshot<V>, x: usize, y: usize, z: usize) -> u32
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    let t = ball.table().expect("table");
    let d = |a: usize, b: usize| t.get(a, b);
    let side = |a: usize, b: usize| ball.canonical_geodesic_with(a, b, t.row(b)).unwrap_or_default();
    let mut worst = 0;
    // each corner: points at equal distance up to the Gromov product
    for (c, a, b) in [(x, y, z), (y, z, x), (z, x, y)] {
        let twice = d(c, a) + d(c, b) - d(a, b);
        let reach = (twice / 2) as usize;
        let pa = side(c, a);
        let pb = side(c, b);
        for k in 0..=reach.min(pa.len().saturating_sub(1)).min(pb.len().saturating_sub(1)) {
            worst = worst.max(d(pa[k], pb[k]));
        }
    }
    worst
}

/// Multi-source distances to `set` inside the ball.
pub fn distance_to_set<V>(ball: &BallSnapshot<V>, set: &[usize]) -> Vec<u32>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    let n = ball.len();
    let mut dist = vec![UNREACHED; n];
    let mut heap = std::collections::BinaryHeap::new();
    for &s in set {
        dist[s] = 0;
        heap.push(std::cmp::Reverse((0u32, s)));
    }
    while let Some(std::cmp::Reverse((d, v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for (w, wt) in ball.neighbors(v) {
            if d + wt < dist[w] {
                dist[w] = d + wt;
                heap.push(std::cmp::Reverse((d + wt, w)));
            }
        }
    }
    dist
}

/// Largest distance from a canonical geodesic between certified points of
/// `set` back to `set`.
pub fn quasiconvexity_defect<V>(set: &[usize], ball: &BallSnapshot<V>) -> Result<Rational>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    let (worst, _) = quasiconvexity_witness(set, ball)?;
    Ok(units(ball.scale, worst as i64, 1))
}

/// Defect with the offending geodesic vertex, if any.
pub fn quasiconvexity_witness<V>(set: &[usize], ball: &BallSnapshot<V>) -> Result<(u32, Option<usize>)>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    let (hull, _) = geodesic_union(ball, set);
    let to_set = distance_to_set(ball, set);
    let mut worst = (0u32, None);
    for (g, &inside) in hull.iter().enumerate() {
        if inside && to_set[g] > worst.0 {
            worst = (to_set[g], Some(g));
        }
    }
    Ok(worst)
}

/// Union of the canonical geodesics between certified pairs of `set`, with
/// the number of pairs skipped as uncertified.
pub fn geodesic_union<V>(ball: &BallSnapshot<V>, set: &[usize]) -> (Vec<bool>, usize)
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    let n = ball.len();
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let parts: Vec<(Vec<usize>, usize)> = sorted
        .par_iter()
        .enumerate()
        .map(|(ib, &b)| {
            let row = ball.row(b);
            // canonical paths toward b form a tree: stop at the first vertex
            // already traced
            let mut seen = vec![false; n];
            let mut hit = vec![b];
            seen[b] = true;
            let mut skipped = 0;
            for &a in &sorted[..ib] {
                if !ball.certified_with(a, b, row[a]) {
                    skipped += 1;
                    continue;
                }
                let mut cur = a;
                while !seen[cur] {
                    seen[cur] = true;
                    hit.push(cur);
                    let dc = row[cur];
                    match ball.neighbors(cur).find(|&(w, wt)| row[w] != UNREACHED && row[w] + wt == dc) {
                        Some((w, _)) => cur = w,
                        None => break,
                    }
                }
            }
            (hit, skipped)
        })
        .collect();
    let mut inside = vec![false; n];
    let mut skipped = 0;
    for (hit, s) in parts {
        skipped += s;
        for v in hit {
            inside[v] = true;
        }
    }
    (inside, skipped)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub defect: Rational,
    pub worst: Option<usize>,
    pub sphere_radius: u32,
    pub tested: usize,
}

/// Finite visibility surrogate at the ball center `a`: for each `b` within
/// `R - margin`, the distance from `b` to the union of geodesics running from
/// `a` out to the sphere of radius `R - margin`.
pub fn visibility_defect<V>(ball: &BallSnapshot<V>, margin: u32) -> Result<VisibilityReport>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    if margin >= ball.radius {
        return Err(LabError::Precondition(format!("margin {margin} must be below radius {}", ball.radius)));
    }
    let rho = ball.radius - margin;
    let cd = &ball.center_dist;
    let n = ball.len();
    let mut order: Vec<usize> = (0..n).filter(|&v| cd[v] <= rho).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(cd[v]));
    let mut extendable = vec![false; n];
    for &v in &order {
        extendable[v] = cd[v] == rho || ball.neighbors(v).any(|(w, wt)| cd[w] == cd[v] + wt && extendable[w]);
    }
    let set: Vec<usize> = (0..n).filter(|&v| extendable[v]).collect();
    if set.is_empty() {
        return Err(LabError::EmptySphere(rho));
    }
    let to_set = distance_to_set(ball, &set);
    let mut worst = (0u32, None);
    for &b in &order {
        if to_set[b] > worst.0 {
            worst = (to_set[b], Some(b));
        }
    }
    Ok(VisibilityReport {
        defect: units(ball.scale, worst.0 as i64, 1),
        worst: worst.1,
        sphere_radius: rho,
        tested: order.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightPathReport {
    pub hausdorff: Rational,
    pub local_window: u32,
    pub geodesic: Vec<usize>,
}

/// Hausdorff distance between a local `C`-tight path and the canonical
/// geodesic joining its endpoints. Windows of length `6C + 8 delta + 1` must
/// be `(1, C)`-quasi-geodesic.
pub fn tight_path_hausdorff<V>(path: &[usize], c: u32, delta: u32, ball: &BallSnapshot<V>) -> Result<TightPathReport>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    if path.is_empty() {
        return Err(LabError::Precondition("empty path".into()));
    }
    let table = ball.table()?;
    for w in path.windows(2) {
        if ball.has_edge(w[0], w[1]).is_none() {
            return Err(LabError::Precondition(format!("{} and {} are not adjacent", w[0], w[1])));
        }
    }
    let window = 6 * c + 8 * delta + 1;
    let mut prefix = vec![0u64; path.len()];
    for k in 1..path.len() {
        prefix[k] = prefix[k - 1] + ball.has_edge(path[k - 1], path[k]).unwrap() as u64;
    }
    for i in 0..path.len() {
        for j in i + 1..path.len() {
            let len = prefix[j] - prefix[i];
            if len > window as u64 * ball.scale as u64 {
                break;
            }
            let d = table.get(path[i], path[j]) as u64;
            if len > d + c as u64 * ball.scale as u64 {
                return Err(LabError::Precondition(format!(
                    "subpath {i}..{j} has length {len} but endpoints are {d} apart (C = {c})"
                )));
            }
        }
    }
    let (a, b) = (path[0], *path.last().unwrap());
    let geo = ball.canonical_geodesic_with(a, b, table.row(b)).ok_or(LabError::NotInBall)?;
    let one_sided = |xs: &[usize], ys: &[usize]| -> u32 {
        xs.iter().map(|&p| ys.iter().map(|&q| table.get(p, q)).min().unwrap_or(0)).max().unwrap_or(0)
    };
    let h = one_sided(path, &geo).max(one_sided(&geo, path));
    Ok(TightPathReport { hausdorff: units(ball.scale, h as i64, 1), local_window: window, geodesic: geo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ImplicitGraph;

    struct Cycle(i64);
    impl ImplicitGraph for Cycle {
        type V = i64;
        fn neighbors(&self, v: &i64, out: &mut Vec<(i64, u32)>) {
            out.push(((v + 1).rem_euclid(self.0), 1));
            out.push(((v - 1).rem_euclid(self.0), 1));
        }
    }

    #[test]
    fn square_has_theta_one() {
        let b = BallSnapshot::build(&Cycle(4), 0, 4).unwrap();
        let r = four_point_delta(&b, &SamplePolicy::Exhaustive).unwrap();
        assert_eq!(r.theta_4pt, Rational::from_integer(1));
    }

    #[test]
    fn cycle_exhaustive_matches_brute_force() {
        for n in 3..12 {
            let b = BallSnapshot::build(&Cycle(n), 0, n as u32).unwrap();
            let t = b.table().unwrap();
            let m = b.len();
            let mut brute = 0;
            for x in 0..m {
                for y in 0..m {
                    for z in 0..m {
                        for w in 0..m {
                            brute = brute.max(four_point_slack(|i, j| t.get(i, j), [x, y, z, w]));
                        }
                    }
                }
            }
            let r = four_point_delta(&b, &SamplePolicy::Exhaustive).unwrap();
            assert_eq!(r.theta_4pt, Rational::new(brute as i64, 2), "cycle {n}");
        }
    }

    #[test]
    fn gromov_product_on_geodesic_is_zero() {
        let b = BallSnapshot::build(&Cycle(10), 0, 10).unwrap();
        let i = |v: i64| b.index_of(&v).unwrap();
        assert_eq!(gromov_product(&b, i(0), i(4), i(2)).unwrap(), Rational::from_integer(0));
        assert_eq!(gromov_product(&b, i(3), i(3), i(1)).unwrap(), Rational::from_integer(2));
    }

    #[test]
    fn antipodal_pair_on_cycle() {
        let b = BallSnapshot::build(&Cycle(8), 0, 8).unwrap();
        let s = vec![b.index_of(&0).unwrap(), b.index_of(&4).unwrap()];
        assert_eq!(quasiconvexity_defect(&s, &b).unwrap(), Rational::from_integer(2));
        let all: Vec<usize> = (0..b.len()).collect();
        assert_eq!(quasiconvexity_defect(&all, &b).unwrap(), Rational::from_integer(0));
    }

    #[test]
    fn backtrack_fails_tightness() {
        let b = BallSnapshot::build(&Cycle(20), 0, 10).unwrap();
        let i = |v: i64| b.index_of(&v).unwrap();
        let path = vec![i(0), i(1), i(2), i(1)];
        assert!(matches!(tight_path_hausdorff(&path, 0, 1, &b), Err(LabError::Precondition(_))));
        let geo = vec![i(0), i(1), i(2), i(3)];
        assert_eq!(tight_path_hausdorff(&geo, 0, 0, &b).unwrap().hausdorff, Rational::from_integer(0));
    }
}
