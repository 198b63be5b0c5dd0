//! Finite stand-ins for Gromov boundaries: spheres with the visual
//! quasimetric, chain metrics, linear connectedness, peripheral marking,
//! strong convergence of balls and a weak Gromov-Hausdorff comparison.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cusped::CuspedVertex;
use crate::error::{LabError, Result};
use crate::graph::{BallSnapshot, UNREACHED};
use crate::group::GroupContext;

/// Symmetric table of pairwise distances on `n` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetric {
    pub n: usize,
    pub d: Vec<f64>,
}

impl FiniteMetric {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        FiniteMetric { n, d }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn diameter(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    /// Largest `d(i,j) - d(i,k) - d(k,j)` with its triple; `None` when the
    /// triangle inequality holds everywhere.
    pub fn triangle_violation(&self) -> Option<(f64, [usize; 3])> {
        let n = self.n;
        let mut worst: Option<(f64, [usize; 3])> = None;
        for k in 0..n {
            for i in 0..n {
                let dik = self.get(i, k);
                for j in 0..n {
                    let over = self.get(i, j) - (dik + self.get(k, j));
                    if over > 0.0 && worst.map_or(true, |w| over > w.0) {
                        worst = Some((over, [i, j, k]));
                    }
                }
            }
        }
        worst
    }

    /// Subspace on the listed points.
    pub fn restrict(&self, pts: &[usize]) -> FiniteMetric {
        FiniteMetric::from_fn(pts.len(), |a, b| self.get(pts[a], pts[b]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisualParams {
    pub epsilon: f64,
    /// measured bilipschitz constant of the chain metric, once computed
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeripheralFamily {
    pub center: String,
    pub points: Vec<usize>,
}

/// The sphere `S_R(w)` of a ball with the quasimetric
/// `rho(x, y) = exp(-epsilon (x|y)_w)` and `rho(x, x) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryApprox {
    pub source: String,
    pub basepoint: String,
    pub radius: u32,
    /// sphere vertices as ball indices, ascending
    pub points: Vec<usize>,
    pub labels: Vec<String>,
    /// `2 (x|y)_w` in ball weight units, row-major
    pub gromov2: Vec<u32>,
    pub scale: u32,
    pub params: VisualParams,
    pub diagonal: String,
    pub marking: Vec<PeripheralFamily>,
    /// density surrogate: every marked point has an unmarked point with
    /// `(x|y)_w >= R - delta`
    pub density_delta: Option<f64>,
}

impl BoundaryApprox {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(x|y)_w` for sphere indices.
    pub fn gromov(&self, a: usize, b: usize) -> f64 {
        self.gromov2[a * self.len() + b] as f64 / (2.0 * self.scale as f64)
    }

    pub fn rho(&self, a: usize, b: usize) -> f64 {
        if a == b {
            0.0
        } else {
            (-self.params.epsilon * self.gromov(a, b)).exp()
        }
    }

    pub fn quasimetric(&self) -> FiniteMetric {
        FiniteMetric::from_fn(self.len(), |a, b| self.rho(a, b))
    }

    pub fn with_epsilon(&self, epsilon: f64) -> BoundaryApprox {
        let mut out = self.clone();
        out.params = VisualParams { epsilon, kappa: None };
        out
    }
}

/// Sphere of radius `r` around the ball center. Gromov products need exact
/// distances between sphere points, so the ball must have radius at least
/// `2r` unless it is complete.
pub fn sphere_approx<V>(
    ball: &BallSnapshot<V>,
    r: u32,
    epsilon: f64,
    label: impl Fn(&V) -> String,
) -> Result<BoundaryApprox>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    let r_units = r * ball.scale;
    if !ball.complete && ball.radius < 2 * r_units {
        return Err(LabError::Precondition(format!(
            "sphere radius {r} needs a ball of radius {} (have {})",
            2 * r,
            ball.radius / ball.scale
        )));
    }
    if !(epsilon > 0.0) {
        return Err(LabError::Precondition("epsilon must be positive".into()));
    }
    let points: Vec<usize> = (0..ball.len()).filter(|&i| ball.center_dist[i] == r_units).collect();
    if points.is_empty() {
        return Err(LabError::EmptySphere(r));
    }
    let m = points.len();
    let mut gromov2 = vec![0u32; m * m];
    for (a, &x) in points.iter().enumerate() {
        let row = ball.row(x);
        for (b, &y) in points.iter().enumerate() {
            let d = row[y];
            if d == UNREACHED {
                return Err(LabError::Uncertified(x, y));
            }
            gromov2[a * m + b] = 2 * r_units - d;
        }
    }
    Ok(BoundaryApprox {
        source: String::new(),
        basepoint: label(&ball.vertices[ball.center]),
        radius: r,
        labels: points.iter().map(|&i| label(&ball.vertices[i])).collect(),
        points,
        gromov2,
        scale: ball.scale,
        params: VisualParams { epsilon, kappa: None },
        diagonal: "rho(x,x) = 0".into(),
        marking: Vec::new(),
        density_delta: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMetric {
    pub metric: FiniteMetric,
    /// `max rho / rho_hat`
    pub kappa: f64,
    pub passes: usize,
}

/// Largest metric below `q`: shortest chain sums, repeated until a pass
/// changes nothing so that the triangle inequality holds as evaluated.
pub fn chain_metric(q: &FiniteMetric) -> ChainMetric {
    let n = q.n;
    let mut d = q.d.clone();
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;
        for k in 0..n {
            for i in 0..n {
                let dik = d[i * n + k];
                for j in 0..n {
                    let via = dik + d[k * n + j];
                    if via < d[i * n + j] {
                        d[i * n + j] = via;
                        changed = true;
                    }
                }
            }
        }
        if !changed || passes > 64 {
            break;
        }
    }
    let metric = FiniteMetric { n, d };
    let mut kappa: f64 = 1.0;
    for i in 0..n {
        for j in 0..n {
            let h = metric.get(i, j);
            if i != j && h > 0.0 {
                kappa = kappa.max(q.get(i, j) / h);
            }
        }
    }
    ChainMetric { metric, kappa, passes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub l_estimate: f64,
    pub worst_pair: Option<(usize, usize)>,
    /// chain for the worst pair
    pub witness: Vec<usize>,
    pub pairs: usize,
    pub exhaustive: bool,
}

/// For each pair `(p, q)`, a chain with steps at most `d(p,q)/2` staying as
/// close to `p` as possible; the pair ratio is the chain diameter over
/// `d(p,q)`, and `L` is the largest ratio. Steps up to the sampling mesh
/// (largest nearest-neighbor distance) are always allowed.
pub fn linear_connectedness(m: &FiniteMetric, cap_pairs: usize, seed: u64) -> Result<ChainReport> {
    let n = m.n;
    if n < 2 {
        return Err(LabError::Precondition("need at least two points".into()));
    }
    let total = n * (n - 1) / 2;
    let exhaustive = total <= cap_pairs;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    if exhaustive {
        for p in 0..n {
            for q in p + 1..n {
                pairs.push((p, q));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while pairs.len() < cap_pairs {
            let p = rng.gen_range(0..n);
            let q = rng.gen_range(0..n);
            if p != q {
                pairs.push((p.min(q), p.max(q)));
            }
        }
    }
    let mesh = (0..n)
        .map(|p| (0..n).filter(|&q| q != p).map(|q| m.get(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let mut best = ChainReport { l_estimate: 0.0, worst_pair: None, witness: Vec::new(), pairs: pairs.len(), exhaustive };
    for &(p, q) in &pairs {
        let dpq = m.get(p, q);
        if dpq <= 0.0 {
            continue;
        }
        let (ratio, chain) = match bottleneck_chain(m, p, q, (dpq / 2.0).max(mesh)) {
            Some(chain) => {
                let mut diam: f64 = 0.0;
                for &a in &chain {
                    for &b in &chain {
                        diam = diam.max(m.get(a, b));
                    }
                }
                (diam / dpq, chain)
            }
            None => (f64::INFINITY, Vec::new()),
        };
        if best.worst_pair.is_none() || ratio > best.l_estimate {
            best.l_estimate = ratio;
            best.worst_pair = Some((p, q));
            best.witness = chain;
        }
    }
    Ok(best)
}

/// Chain from `p` to `q` with steps at most `step` minimizing the largest
/// distance from `p` along the way.
fn bottleneck_chain(m: &FiniteMetric, p: usize, q: usize, step: f64) -> Option<Vec<usize>> {
    let n = m.n;
    let mut cost = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    cost[p] = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !done[v] && cost[v].is_finite() && (u == usize::MAX || cost[v] < cost[u]) {
                u = v;
            }
        }
        if u == usize::MAX {
            return None;
        }
        if u == q {
            break;
        }
        done[u] = true;
        for v in 0..n {
            if !done[v] && m.get(u, v) <= step {
                let c = cost[u].max(m.get(p, v));
                if c < cost[v] {
                    cost[v] = c;
                    prev[v] = u;
                }
            }
        }
    }
    if !cost[q].is_finite() {
        return None;
    }
    let mut chain = vec![q];
    let mut cur = q;
    while cur != p {
        cur = prev[cur];
        chain.push(cur);
    }
    chain.reverse();
    Some(chain)
}

/// Tags sphere points lying on the deepest allowed level of a truncated
/// horoball with that horoball. With truncation depth 0 a Cayley point is
/// tagged when its canonical geodesic from the basepoint ends with an edge
/// of the peripheral coset. `cap` gives the truncation depth of the
/// horoball `(peripheral, coset)`, if truncated.
pub fn mark_peripheral(
    approx: &BoundaryApprox,
    ball: &BallSnapshot<CuspedVertex>,
    ctx: &GroupContext,
    cap: impl Fn(usize, &crate::group::GroupElement) -> Option<u32>,
) -> BoundaryApprox {
    let mut families: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (a, &i) in approx.points.iter().enumerate() {
        let v = &ball.vertices[i];
        let tag = match v {
            CuspedVertex::Horoball { peripheral, coset, depth, .. } => {
                let i = *peripheral as usize;
                (cap(i, coset) == Some(*depth)).then(|| format!("H{}[{}]", i, ctx.format(coset)))
            }
            // at depth-0 truncation the geodesic must arrive along the coset
            CuspedVertex::Cayley(g) => {
                let prev = ball
                    .canonical_geodesic_with(i, ball.center, &ball.center_dist)
                    .and_then(|p| p.get(1).copied())
                    .and_then(|p| match &ball.vertices[p] {
                        CuspedVertex::Cayley(h) => Some(h.clone()),
                        _ => None,
                    });
                ctx.peripheral.iter().find_map(|&k| {
                    let (coset, _) = ctx.split_coset(g, k);
                    let along = prev.as_ref().is_some_and(|p| ctx.split_coset(p, k).0 == coset);
                    (along && cap(k, &coset) == Some(0)).then(|| format!("H{}[{}]", k, ctx.format(&coset)))
                })
            }
        };
        if let Some(t) = tag {
            families.entry(t).or_default().push(a);
        }
    }
    let mut out = approx.clone();
    out.marking = families.into_iter().map(|(center, points)| PeripheralFamily { center, points }).collect();
    let mut tagged = vec![false; approx.len()];
    for f in &out.marking {
        for &a in &f.points {
            tagged[a] = true;
        }
    }
    out.density_delta = if out.marking.is_empty() {
        None
    } else if tagged.iter().all(|&t| t) {
        Some(f64::INFINITY)
    } else {
        let r = approx.radius as f64;
        let mut delta: f64 = 0.0;
        for a in (0..approx.len()).filter(|&a| tagged[a]) {
            let near = (0..approx.len()).filter(|&b| !tagged[b]).map(|b| approx.gromov(a, b)).fold(f64::MIN, f64::max);
            delta = delta.max(r - near);
        }
        Some(delta)
    };
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub radius: u32,
    pub isometric: bool,
    pub size_a: usize,
    pub size_b: usize,
    pub witness: Option<(String, String)>,
}

/// Whether `map` restricts to an isometry from the `r`-ball of `a` onto the
/// `r`-ball of `b` (both centered at their basepoints, radius at least `2r`).
pub fn strong_convergence_check(
    a: &BallSnapshot<CuspedVertex>,
    b: &BallSnapshot<CuspedVertex>,
    r: u32,
    map: impl Fn(&CuspedVertex) -> CuspedVertex,
    label: impl Fn(&CuspedVertex) -> String,
) -> Result<ConvergenceReport> {
    for ball in [a, b] {
        if !ball.complete && ball.radius < 2 * r {
            return Err(LabError::Precondition(format!("ball radius {} below {}", ball.radius, 2 * r)));
        }
    }
    let inner_a: Vec<usize> = (0..a.len()).filter(|&i| a.center_dist[i] <= r).collect();
    let inner_b = (0..b.len()).filter(|&i| b.center_dist[i] <= r).count();
    let mut report = ConvergenceReport { radius: r, isometric: false, size_a: inner_a.len(), size_b: inner_b, witness: None };
    let mut image = Vec::with_capacity(inner_a.len());
    for &i in &inner_a {
        let w = map(&a.vertices[i]);
        match b.index_of(&w) {
            Some(j) if b.center_dist[j] <= r => image.push(j),
            _ => {
                report.witness = Some((label(&a.vertices[i]), "outside".into()));
                return Ok(report);
            }
        }
    }
    let mut sorted = image.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != inner_a.len() || inner_b != inner_a.len() {
        report.witness = Some(("size".into(), format!("{} vs {}", inner_a.len(), inner_b)));
        return Ok(report);
    }
    for (x, &i) in inner_a.iter().enumerate() {
        let ra = a.row(i);
        let rb = b.row(image[x]);
        for (y, &j) in inner_a.iter().enumerate() {
            if ra[j] != rb[image[y]] {
                report.witness = Some((label(&a.vertices[i]), label(&a.vertices[j])));
                return Ok(report);
            }
        }
    }
    report.isometric = true;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhReport {
    pub lambda: f64,
    /// additive constant achieved by `map`
    pub epsilon: f64,
    /// `map[a]` is the point of B assigned to point `a` of A
    pub map: Vec<usize>,
    pub lower_bound: f64,
    pub seed: u64,
}

/// Additive constant of `f: A -> B` as a `(lambda, eps)`-quasi-isometry
/// with `eps`-dense image.
pub fn qi_defect(a: &FiniteMetric, b: &FiniteMetric, f: &[usize], lambda: f64) -> f64 {
    let mut eps: f64 = 0.0;
    for x in 0..a.n {
        for y in x + 1..a.n {
            let (d, e) = (a.get(x, y), b.get(f[x], f[y]));
            eps = eps.max(e - lambda * d).max(d / lambda - e);
        }
    }
    for p in 0..b.n {
        let near = f.iter().map(|&q| b.get(p, q)).fold(f64::INFINITY, f64::min);
        eps = eps.max(near);
    }
    eps
}

/// Lower bound valid for every map: diameters must match up to `lambda`.
pub fn gh_lower_bound(a: &FiniteMetric, b: &FiniteMetric, lambda: f64) -> f64 {
    let (da, db) = (a.diameter(), b.diameter());
    (da / lambda - db).max((db - lambda * da) / 3.0).max(0.0)
}

/// Greedy assignment refined by seeded single-point moves. `hint` seeds the
/// assignment where a natural map is known; missing entries are filled
/// greedily.
pub fn weak_gh_estimate(
    a: &FiniteMetric,
    b: &FiniteMetric,
    lambda: f64,
    hint: Option<&[Option<usize>]>,
    seed: u64,
) -> Result<GhReport> {
    if a.n == 0 || b.n == 0 {
        return Err(LabError::Precondition("empty space".into()));
    }
    if !(lambda >= 1.0) {
        return Err(LabError::Precondition("lambda must be at least 1".into()));
    }
    let mut f: Vec<Option<usize>> = match hint {
        Some(h) if h.len() == a.n => h.iter().map(|j| j.filter(|&j| j < b.n)).collect(),
        _ => vec![None; a.n],
    };
    let mut used = vec![false; b.n];
    for &p in f.iter().flatten() {
        used[p] = true;
    }
    for x in 0..a.n {
        if f[x].is_some() {
            continue;
        }
        let mut best = (f64::INFINITY, 0usize);
        for p in 0..b.n {
            let mut cost: f64 = if used[p] { 1e-9 } else { 0.0 };
            for (y, q) in f.iter().enumerate() {
                if let Some(q) = *q {
                    let (d, e) = (a.get(x, y), b.get(p, q));
                    cost = cost.max(e - lambda * d).max(d / lambda - e);
                }
            }
            if cost < best.0 {
                best = (cost, p);
            }
        }
        used[best.1] = true;
        f[x] = Some(best.1);
    }
    let mut f: Vec<usize> = f.into_iter().map(|p| p.unwrap()).collect();
    let mut eps = qi_defect(a, b, &f, lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rounds = 4 * a.n;
    for _ in 0..rounds {
        if eps == 0.0 {
            break;
        }
        let x = rng.gen_range(0..a.n);
        let keep = f[x];
        let mut best = (eps, keep);
        for p in 0..b.n {
            if p == keep {
                continue;
            }
            f[x] = p;
            let e = qi_defect(a, b, &f, lambda);
            if e < best.0 {
                best = (e, p);
            }
        }
        f[x] = best.1;
        eps = best.0;
    }
    Ok(GhReport { lambda, epsilon: eps, lower_bound: gh_lower_bound(a, b, lambda).min(eps), map: f, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDistortion {
    pub from_radius: u32,
    pub to_radius: u32,
    /// largest `|rho_R(pi x, pi y) - rho_R'(x, y)|`
    pub additive: f64,
    /// largest ratio between the two quasimetrics on pairs with distinct
    /// projections
    pub multiplicative: f64,
}

/// Compares the sphere of radius `big` with its projection to radius
/// `small` along canonical geodesics from the basepoint.
pub fn projection_distortion<V>(
    ball: &BallSnapshot<V>,
    outer: &BoundaryApprox,
    inner: &BoundaryApprox,
) -> Result<ProjectionDistortion>
where
    V: Clone + Ord + Hash + Eq + Send + Sync + Debug,
{
    if inner.radius >= outer.radius || inner.params.epsilon != outer.params.epsilon {
        return Err(LabError::Precondition("inner sphere must be smaller with the same epsilon".into()));
    }
    let to_center = ball.row(ball.center);
    let target = inner.radius * ball.scale;
    let mut proj = Vec::with_capacity(outer.len());
    for &x in &outer.points {
        let path = ball.canonical_geodesic_with(x, ball.center, &to_center).ok_or(LabError::NotInBall)?;
        let hit = path.iter().copied().find(|&v| ball.center_dist[v] == target).ok_or(LabError::NotInBall)?;
        proj.push(inner.points.binary_search(&hit).map_err(|_| LabError::NotInBall)?);
    }
    let mut additive: f64 = 0.0;
    let mut multiplicative: f64 = 1.0;
    for a in 0..outer.len() {
        for b in a + 1..outer.len() {
            let r_out = outer.rho(a, b);
            let r_in = inner.rho(proj[a], proj[b]);
            additive = additive.max((r_out - r_in).abs());
            if proj[a] != proj[b] {
                multiplicative = multiplicative.max(r_out / r_in).max(r_in / r_out);
            }
        }
    }
    Ok(ProjectionDistortion { from_radius: outer.radius, to_radius: inner.radius, additive, multiplicative })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_repairs_a_triangle() {
        let q = FiniteMetric::from_fn(3, |i, j| if (i, j) == (0, 2) { 3.0 } else { 1.0 });
        let c = chain_metric(&q);
        assert_eq!(c.metric.get(0, 2), 2.0);
        assert_eq!(c.kappa, 1.5);
        assert!(c.metric.triangle_violation().is_none());
    }

    #[test]
    fn two_points() {
        let q = FiniteMetric::from_fn(2, |_, _| 0.5);
        assert_eq!(chain_metric(&q).kappa, 1.0);
        assert_eq!(linear_connectedness(&q, 100, 0).unwrap().l_estimate, 1.0);
        let gh = weak_gh_estimate(&q, &q, 1.0, None, 0).unwrap();
        assert_eq!(gh.epsilon, 0.0);
    }

    #[test]
    fn separated_clusters_are_disconnected() {
        let q = FiniteMetric::from_fn(4, |i, j| if i / 2 == j / 2 { 0.1 } else { 1.0 });
        assert!(linear_connectedness(&q, 100, 0).unwrap().l_estimate.is_infinite());
    }
}
