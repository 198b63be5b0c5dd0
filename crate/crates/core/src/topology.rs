//! Vietoris-Rips complexes over finite metrics and their GF(2) homology.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::FiniteMetric;
use crate::error::{LabError, Result};

pub const MAX_DIM: usize = 3;
pub const DEFAULT_SIMPLEX_BUDGET: usize = 400_000;

/// Clique complex of the graph `d <= scale`, up to dimension 3. Simplices
/// of each dimension are sorted vertex lists in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipsComplex {
    pub scale: f64,
    pub points: usize,
    pub simplices: Vec<Vec<Vec<u32>>>,
}

impl RipsComplex {
    pub fn counts(&self) -> Vec<usize> {
        self.simplices.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.simplices.iter().map(Vec::len).sum()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.counts().iter().enumerate().map(|(k, &c)| if k % 2 == 0 { c as i64 } else { -(c as i64) }).sum()
    }
}

pub fn rips_skeleton(m: &FiniteMetric, scale: f64, max_dim: usize, budget: usize) -> Result<RipsComplex> {
    let n = m.n;
    let max_dim = max_dim.min(MAX_DIM);
    let words = n.div_ceil(64);
    let mut adj = vec![vec![0u64; words]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && m.get(i, j) <= scale {
                adj[i][j / 64] |= 1 << (j % 64);
            }
        }
    }
    let mut simplices: Vec<Vec<Vec<u32>>> = vec![(0..n as u32).map(|i| vec![i]).collect()];
    let mut total = n;
    for dim in 1..=max_dim {
        let mut next = Vec::new();
        for s in &simplices[dim - 1] {
            let last = *s.last().unwrap() as usize;
            // common neighbors above the last vertex
            let mut common: Vec<u64> = adj[s[0] as usize].clone();
            for &v in &s[1..] {
                for (c, a) in common.iter_mut().zip(&adj[v as usize]) {
                    *c &= a;
                }
            }
            for v in last + 1..n {
                if common[v / 64] >> (v % 64) & 1 == 1 {
                    let mut t = s.clone();
                    t.push(v as u32);
                    next.push(t);
                    total += 1;
                    if total > budget {
                        return Err(LabError::SimplexBudget(budget));
                    }
                }
            }
        }
        simplices.push(next);
    }
    Ok(RipsComplex { scale, points: n, simplices })
}

/// Boundary matrix of dimension `k` as sparse GF(2) columns of face indices.
fn boundary_columns(c: &RipsComplex, k: usize) -> Vec<Vec<u32>> {
    let faces = &c.simplices[k - 1];
    c.simplices[k]
        .par_iter()
        .map(|s| {
            let mut col: Vec<u32> = (0..s.len())
                .map(|skip| {
                    let face: Vec<u32> = s.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                    faces.binary_search(&face).expect("downward closed") as u32
                })
                .collect();
            col.sort_unstable();
            col
        })
        .collect()
}

fn xor_into(a: &mut Vec<u32>, b: &[u32]) {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    *a = out;
}

/// Column-reduced GF(2) matrix; reduced columns keyed by their lowest
/// (largest) row index.
struct Reduced {
    pivots: HashMap<u32, Vec<u32>>,
}

impl Reduced {
    fn new(columns: Vec<Vec<u32>>) -> Self {
        let mut pivots: HashMap<u32, Vec<u32>> = HashMap::new();
        for mut col in columns {
            while let Some(&low) = col.last() {
                match pivots.get(&low) {
                    Some(p) => xor_into(&mut col, p),
                    None => {
                        pivots.insert(low, col);
                        break;
                    }
                }
            }
        }
        Reduced { pivots }
    }

    fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn spans(&self, v: &[u32]) -> bool {
        let mut col = v.to_vec();
        while let Some(&low) = col.last() {
            match self.pivots.get(&low) {
                Some(p) => xor_into(&mut col, p),
                None => return false,
            }
        }
        true
    }
}

/// Ranks of the boundary maps `d_1 .. d_dim` (index 0 holds `d_0 = 0`).
pub fn boundary_ranks(c: &RipsComplex) -> Vec<usize> {
    let top = c.simplices.len() - 1;
    let mut ranks: Vec<usize> = (1..=top).into_par_iter().map(|k| Reduced::new(boundary_columns(c, k)).rank()).collect();
    ranks.insert(0, 0);
    ranks
}

/// `(b_0, b_1, b_2)` over GF(2); needs the 3-skeleton for `b_2`.
pub fn betti_gf2(c: &RipsComplex) -> Vec<usize> {
    let ranks = boundary_ranks(c);
    let counts = c.counts();
    let top = counts.len() - 1;
    (0..top.min(MAX_DIM)).map(|k| counts[k] - ranks[k] - ranks[k + 1]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopFillingReport {
    pub scale: f64,
    pub filled: bool,
    pub proxy: String,
}

/// Whether the cyclic point sequence bounds in `H_1` of the Rips complex at
/// `scale`; a necessary condition for a `scale`-filling.
pub fn loop_filling_check(m: &FiniteMetric, cycle: &[usize], scale: f64, budget: usize) -> Result<LoopFillingReport> {
    for w in 0..cycle.len() {
        let (a, b) = (cycle[w], cycle[(w + 1) % cycle.len()]);
        if a >= m.n || b >= m.n {
            return Err(LabError::Precondition(format!("loop point {} out of range", a.max(b))));
        }
        if m.get(a, b) > scale {
            return Err(LabError::Precondition(format!("loop step {a}-{b} longer than {scale}")));
        }
    }
    let c = rips_skeleton(m, scale, 2, budget)?;
    let mut chain: Vec<u32> = Vec::new();
    for w in 0..cycle.len() {
        let (a, b) = (cycle[w], cycle[(w + 1) % cycle.len()]);
        if a == b {
            continue;
        }
        let e = vec![a.min(b) as u32, a.max(b) as u32];
        let idx = c.simplices[1].binary_search(&e).expect("loop edge present") as u32;
        xor_into(&mut chain, &[idx]);
    }
    let filled = chain.is_empty() || Reduced::new(boundary_columns(&c, 2)).spans(&chain);
    Ok(LoopFillingReport { scale, filled, proxy: "homological".into() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiEntry {
    pub scale: f64,
    pub betti: Vec<usize>,
    pub simplices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub betti: Vec<usize>,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiProfile {
    pub points: usize,
    pub entries: Vec<BettiEntry>,
    /// first grid scale whose complex exceeded the simplex budget
    pub budget_stop: Option<f64>,
    pub plateau: Option<Plateau>,
}

impl BettiProfile {
    /// `b_0` at the first scale joining any two points.
    pub fn fine_b0(&self) -> Option<usize> {
        self.entries.iter().find(|e| e.betti[0] < self.points).map(|e| e.betti[0])
    }
}

/// Betti numbers along a sorted scale grid. The plateau is the longest run
/// of equal Betti vectors, preferring runs that are neither discrete nor
/// contractible.
pub fn betti_profile(m: &FiniteMetric, grid: &[f64], budget: usize) -> Result<BettiProfile> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(LabError::Precondition("scale grid must be sorted".into()));
    }
    let mut entries = Vec::new();
    let mut budget_stop = None;
    for &s in grid {
        match rips_skeleton(m, s, MAX_DIM, budget) {
            Ok(c) => entries.push(BettiEntry { scale: s, betti: betti_gf2(&c), simplices: c.counts() }),
            Err(LabError::SimplexBudget(_)) => {
                budget_stop = Some(s);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let trivial = |b: &[usize]| b[1..].iter().all(|&x| x == 0) && (b[0] == 1 || b[0] == m.n);
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=entries.len() {
        if i == entries.len() || entries[i].betti != entries[start].betti {
            if i > start {
                runs.push((start, i - 1));
            }
            start = i;
        }
    }
    let pick = |filter: &dyn Fn(&(usize, usize)) -> bool| {
        runs.iter().filter(|r| filter(r)).max_by_key(|&&(a, b)| (b - a, std::cmp::Reverse(a))).copied()
    };
    let best = pick(&|&(a, _)| !trivial(&entries[a].betti)).or_else(|| pick(&|_| true));
    let plateau = best.map(|(a, b)| Plateau {
        betti: entries[a].betti.clone(),
        from: entries[a].scale,
        to: entries[b].scale,
        steps: b - a + 1,
    });
    Ok(BettiProfile { points: m.n, entries, budget_stop, plateau })
}

/// One scale between each pair of consecutive distinct distances, so every
/// grid point gives a different complex.
pub fn distance_grid(m: &FiniteMetric, limit: usize) -> Vec<f64> {
    let mut ds: Vec<f64> = m.d.iter().copied().filter(|&d| d > 0.0).collect();
    ds.sort_by(f64::total_cmp);
    ds.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let mut grid = vec![ds.first().map_or(0.0, |d| d / 2.0)];
    for w in ds.windows(2) {
        grid.push((w[0] + w[1]) / 2.0);
    }
    if let Some(&d) = ds.last() {
        grid.push(d * 1.01);
    }
    grid.truncate(limit);
    grid
}

/// Farthest-point subsample of `k` points starting from point 0.
pub fn farthest_point_sample(m: &FiniteMetric, k: usize) -> Vec<usize> {
    if m.n == 0 {
        return Vec::new();
    }
    let mut chosen = vec![0];
    let mut near: Vec<f64> = (0..m.n).map(|i| m.get(0, i)).collect();
    while chosen.len() < k.min(m.n) {
        let (far, _) = near.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
        chosen.push(far);
        for (i, v) in near.iter_mut().enumerate() {
            *v = v.min(m.get(far, i));
        }
    }
    chosen
}

/// Points of a frequency-2 subdivided icosahedron on the unit sphere (42).
pub fn icosphere42() -> Vec<[f64; 3]> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let base: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let d2 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
    let mut pts = base.clone();
    for i in 0..12 {
        for j in i + 1..12 {
            // icosahedron edges have squared length 4
            if (d2(&base[i], &base[j]) - 4.0).abs() < 1e-9 {
                pts.push([0, 1, 2].map(|k| (base[i][k] + base[j][k]) / 2.0));
            }
        }
    }
    pts.iter()
        .map(|p| {
            let r = d2(p, &[0.0; 3]).sqrt();
            p.map(|x| x / r)
        })
        .collect()
}

pub fn circle(n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            [a.cos(), a.sin(), 0.0]
        })
        .collect()
}

pub fn octahedron() -> Vec<[f64; 3]> {
    vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]
}

pub fn euclidean(points: &[[f64; 3]]) -> FiniteMetric {
    FiniteMetric::from_fn(points.len(), |i, j| (0..3).map(|k| (points[i][k] - points[j][k]).powi(2)).sum::<f64>().sqrt())
}
