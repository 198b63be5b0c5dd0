//! Finite balls in implicit (locally finite, possibly infinite) graphs, with
//! run-compressed adjacency and exact distance rows.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Debug;
use std::hash::Hash;
use std::io::Write;
use std::sync::OnceLock;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const UNREACHED: u32 = u32::MAX;

/// A graph known only through its neighbor function. Edge weights are
/// integers in units of `1/scale`; unit graphs use weight 1 and scale 1.
pub trait ImplicitGraph: Sync {
    type V: Clone + Ord + Hash + Eq + Send + Sync + Debug;
    fn neighbors(&self, v: &Self::V, out: &mut Vec<(Self::V, u32)>);
    fn scale(&self) -> u32 {
        1
    }
    fn is_unit(&self) -> bool {
        self.scale() == 1
    }
}

/// Memory cap in bytes, from `FILLINGLAB_MEMORY_MB` (default 1536).
pub fn memory_budget() -> u64 {
    std::env::var("FILLINGLAB_MEMORY_MB")
        .ok()
        .and_then(|s| s.parse::<u64>().ok())
        .unwrap_or(1536)
        << 20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Run {
    start: u32,
    len: u32,
    weight: u32,
}

/// Full symmetric distance table.
#[derive(Debug, Clone)]
pub struct DistTable {
    n: usize,
    data: Vec<u32>,
}

impl DistTable {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Radius-`R` ball around a center, as an induced subgraph.
#[derive(Debug)]
pub struct BallSnapshot<V> {
    pub vertices: Vec<V>,
    pub center: usize,
    /// radius in edge-weight units
    pub radius: u32,
    pub scale: u32,
    /// distance from the center, exact for every vertex
    pub center_dist: Vec<u32>,
    /// true when the ball is a whole connected component
    pub complete: bool,
    index: FxHashMap<V, u32>,
    offsets: Vec<u32>,
    runs: Vec<Run>,
    unit: bool,
    table: OnceLock<std::result::Result<DistTable, LabError>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallSummary {
    pub vertices: usize,
    pub edges: usize,
    pub radius: u32,
    pub scale: u32,
    pub complete: bool,
}

impl<V: Clone + Ord + Hash + Eq + Send + Sync + Debug> BallSnapshot<V> {
    /// Materializes the ball of radius `radius` (in weight units) around
    /// `center`.
    pub fn build<G: ImplicitGraph<V = V>>(graph: &G, center: V, radius: u32) -> Result<Self> {
        let cap_vertices = (memory_budget() / 512).max(1024) as usize;
        let unit = graph.is_unit();
        let mut dist: FxHashMap<V, u32> = FxHashMap::default();
        dist.insert(center.clone(), 0);
        let mut buf = Vec::new();
        if unit {
            let mut frontier = vec![center.clone()];
            for d in 0..radius {
                let mut next = Vec::new();
                for v in &frontier {
                    buf.clear();
                    graph.neighbors(v, &mut buf);
                    for (w, _) in buf.drain(..) {
                        if !dist.contains_key(&w) {
                            dist.insert(w.clone(), d + 1);
                            next.push(w);
                        }
                    }
                }
                if dist.len() > cap_vertices {
                    return Err(LabError::MemoryBudget { needed: dist.len() as u64 * 512, cap: memory_budget() });
                }
                if next.is_empty() {
                    break;
                }
                frontier = next;
            }
        } else {
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0u32, center.clone())));
            let mut done: FxHashMap<V, ()> = FxHashMap::default();
            while let Some(Reverse((d, v))) = heap.pop() {
                if done.contains_key(&v) {
                    continue;
                }
                done.insert(v.clone(), ());
                buf.clear();
                graph.neighbors(&v, &mut buf);
                for (w, wt) in buf.drain(..) {
                    let nd = d + wt;
                    if nd > radius {
                        continue;
                    }
                    let better = dist.get(&w).map_or(true, |&old| nd < old);
                    if better {
                        dist.insert(w.clone(), nd);
                        heap.push(Reverse((nd, w)));
                    }
                }
                if dist.len() > cap_vertices {
                    return Err(LabError::MemoryBudget { needed: dist.len() as u64 * 512, cap: memory_budget() });
                }
            }
        }
        let mut vertices: Vec<V> = dist.keys().cloned().collect();
        vertices.sort();
        let index: FxHashMap<V, u32> = vertices.iter().enumerate().map(|(i, v)| (v.clone(), i as u32)).collect();
        let center_dist: Vec<u32> = vertices.iter().map(|v| dist[v]).collect();
        let center_idx = index[&center] as usize;

        let rows: Vec<(Vec<Run>, bool)> = vertices
            .par_iter()
            .map_init(Vec::new, |buf, v| {
                buf.clear();
                graph.neighbors(v, buf);
                let mut escaped = false;
                let mut nb: Vec<(u32, u32)> = Vec::with_capacity(buf.len());
                for (w, wt) in buf.drain(..) {
                    match index.get(&w) {
                        Some(&j) => nb.push((j, wt)),
                        None => escaped = true,
                    }
                }
                nb.sort_unstable();
                nb.dedup_by_key(|p| p.0);
                (compress(&nb), escaped)
            })
            .collect();
        let mut offsets = Vec::with_capacity(vertices.len() + 1);
        let mut runs = Vec::new();
        let mut complete = true;
        offsets.push(0);
        for (r, escaped) in rows {
            complete &= !escaped;
            runs.extend(r);
            offsets.push(runs.len() as u32);
        }
        Ok(BallSnapshot {
            vertices,
            center: center_idx,
            radius,
            scale: graph.scale(),
            center_dist,
            complete,
            index,
            offsets,
            runs,
            unit,
            table: OnceLock::new(),
        })
    }

    /// Builds a snapshot from explicit vertices and weighted edges, e.g. an
    /// imported edge list. Distances from `center` are recomputed.
    pub fn from_edges(vertices: Vec<V>, edges: &[(usize, usize, u32)], center: usize, radius: u32, scale: u32) -> Self {
        let n = vertices.len();
        let mut adj: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            adj[a].push((b as u32, w));
            adj[b].push((a as u32, w));
        }
        let mut offsets = vec![0u32];
        let mut runs = Vec::new();
        for nb in adj.iter_mut() {
            nb.sort_unstable();
            nb.dedup_by_key(|p| p.0);
            runs.extend(compress(nb));
            offsets.push(runs.len() as u32);
        }
        let index = vertices.iter().enumerate().map(|(i, v)| (v.clone(), i as u32)).collect();
        let unit = edges.iter().all(|e| e.2 == 1) && scale == 1;
        let mut ball = BallSnapshot {
            vertices,
            center,
            radius,
            scale,
            center_dist: Vec::new(),
            complete: true,
            index,
            offsets,
            runs,
            unit,
            table: OnceLock::new(),
        };
        ball.center_dist = ball.row(center);
        ball
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_unit(&self) -> bool {
        self.unit
    }

    pub fn index_of(&self, v: &V) -> Option<usize> {
        self.index.get(v).map(|&i| i as usize)
    }

    pub fn vertex(&self, i: usize) -> &V {
        &self.vertices[i]
    }

    pub fn edge_count(&self) -> usize {
        self.runs.iter().map(|r| r.len as usize).sum::<usize>() / 2
    }

    pub fn summary(&self) -> BallSummary {
        BallSummary {
            vertices: self.len(),
            edges: self.edge_count(),
            radius: self.radius,
            scale: self.scale,
            complete: self.complete,
        }
    }

    /// Neighbors of `i` inside the ball with edge weights, ascending.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let (a, b) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
        self.runs[a..b]
            .iter()
            .flat_map(|r| (r.start..r.start + r.len).map(move |j| (j as usize, r.weight)))
    }

    pub fn degree(&self, i: usize) -> usize {
        let (a, b) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
        self.runs[a..b].iter().map(|r| r.len as usize).sum()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> Option<u32> {
        let (a, b) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
        let j = j as u32;
        self.runs[a..b].iter().find(|r| r.start <= j && j < r.start + r.len).map(|r| r.weight)
    }

    /// Edge list `(i, j, weight)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for i in 0..self.len() {
            for (j, w) in self.neighbors(i) {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Distances from `src` inside the ball; `UNREACHED` where disconnected.
    pub fn row(&self, src: usize) -> Vec<u32> {
        self.row_filtered(src, None)
    }

    /// Distances in the subgraph induced on `allowed` vertices.
    pub fn row_filtered(&self, src: usize, allowed: Option<&[bool]>) -> Vec<u32> {
        let n = self.len();
        let mut dist = vec![UNREACHED; n];
        if allowed.map_or(false, |a| !a[src]) {
            return dist;
        }
        dist[src] = 0;
        if self.unit {
            // next-unvisited pointers so that each vertex is touched once per run
            let mut next: Vec<u32> = (0..=n as u32).collect();
            fn find(next: &mut [u32], mut x: u32) -> u32 {
                let mut root = x;
                while next[root as usize] != root {
                    root = next[root as usize];
                }
                while next[x as usize] != root {
                    let nx = next[x as usize];
                    next[x as usize] = root;
                    x = nx;
                }
                root
            }
            let mark = |next: &mut [u32], x: usize| next[x] = x as u32 + 1;
            if let Some(a) = allowed {
                for (i, &ok) in a.iter().enumerate() {
                    if !ok {
                        mark(&mut next, i);
                    }
                }
            }
            mark(&mut next, src);
            let mut queue = vec![src as u32];
            let mut head = 0;
            while head < queue.len() {
                let v = queue[head] as usize;
                head += 1;
                let dv = dist[v] + 1;
                let (a, b) = (self.offsets[v] as usize, self.offsets[v + 1] as usize);
                for r in &self.runs[a..b] {
                    let end = r.start + r.len;
                    let mut j = find(&mut next, r.start);
                    while j < end {
                        dist[j as usize] = dv;
                        queue.push(j);
                        next[j as usize] = j + 1;
                        j = find(&mut next, j + 1);
                    }
                }
            }
        } else {
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0u32, src as u32)));
            while let Some(Reverse((d, v))) = heap.pop() {
                let v = v as usize;
                if d > dist[v] {
                    continue;
                }
                for (w, wt) in self.neighbors(v) {
                    if allowed.map_or(false, |a| !a[w]) {
                        continue;
                    }
                    let nd = d + wt;
                    if nd < dist[w] {
                        dist[w] = nd;
                        heap.push(Reverse((nd, w as u32)));
                    }
                }
            }
        }
        dist
    }

    /// All-pairs table, built once; fails if it would exceed the memory cap.
    pub fn table(&self) -> Result<&DistTable> {
        self.table
            .get_or_init(|| {
                let n = self.len();
                let needed = (n as u64) * (n as u64) * 4;
                if needed > memory_budget() {
                    return Err(LabError::MemoryBudget { needed, cap: memory_budget() });
                }
                let rows: Vec<Vec<u32>> = (0..n).into_par_iter().map(|i| self.row(i)).collect();
                let mut data = Vec::with_capacity(n * n);
                for r in rows {
                    data.extend(r);
                }
                Ok(DistTable { n, data })
            })
            .as_ref()
            .map_err(|e| e.clone())
    }

    /// Table lookup; builds the table on first use.
    pub fn dist(&self, i: usize, j: usize) -> Result<u32> {
        Ok(self.table()?.get(i, j))
    }

    /// Whether the in-ball distance `d` between `i` and `j` is the distance
    /// in the whole space: any shorter path would stay strictly inside the
    /// ball.
    #[inline]
    pub fn certified_with(&self, i: usize, j: usize, d: u32) -> bool {
        self.complete
            || (d != UNREACHED
                && self.center_dist[i] as u64 + self.center_dist[j] as u64 + d as u64 <= 2 * self.radius as u64)
    }

    pub fn certified(&self, i: usize, j: usize) -> Result<bool> {
        let d = self.dist(i, j)?;
        Ok(self.certified_with(i, j, d))
    }

    /// Lexicographically smallest geodesic from `a` to `b` given the row of
    /// distances to `b`.
    pub fn canonical_geodesic_with(&self, a: usize, b: usize, to_b: &[u32]) -> Option<Vec<usize>> {
        if to_b[a] == UNREACHED {
            return None;
        }
        let mut path = vec![a];
        let mut cur = a;
        while cur != b {
            let dc = to_b[cur];
            let next = self.neighbors(cur).find(|&(w, wt)| to_b[w] != UNREACHED && to_b[w] + wt == dc)?;
            cur = next.0;
            path.push(cur);
        }
        Some(path)
    }

    pub fn canonical_geodesic(&self, a: usize, b: usize) -> Result<Vec<usize>> {
        let t = self.table()?;
        self.canonical_geodesic_with(a, b, t.row(b)).ok_or(LabError::NotInBall)
    }

    /// Whitespace edge list with a vertex-table header.
    pub fn write_edge_list<W: Write>(&self, mut out: W, label: impl Fn(&V) -> String) -> Result<()> {
        writeln!(out, "# vertices {} center {} radius {} scale {}", self.len(), self.center, self.radius, self.scale)?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(out, "v {} {} {}", i, self.center_dist[i], label(v))?;
        }
        let edges = self.edges();
        writeln!(out, "# edges {}", edges.len())?;
        for (a, b, w) in edges {
            writeln!(out, "e {a} {b} {w}")?;
        }
        Ok(())
    }
}

/// Parses an edge list written by `write_edge_list`; vertex labels are kept
/// as strings.
pub fn read_edge_list(text: &str) -> Result<BallSnapshot<String>> {
    let bad = |msg: &str| LabError::Parse { key: "edge-list".into(), msg: msg.to_string() };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty input"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    let field = |name: &str| -> Result<u64> {
        let pos = toks.iter().position(|t| *t == name).ok_or_else(|| bad(&format!("missing {name}")))?;
        toks.get(pos + 1).and_then(|t| t.parse().ok()).ok_or_else(|| bad(&format!("bad {name}")))
    };
    let n = field("vertices")? as usize;
    let center = field("center")? as usize;
    let radius = field("radius")? as u32;
    let scale = field("scale")? as u32;
    let mut vertices = vec![String::new(); n];
    let mut edges = Vec::new();
    for line in lines {
        let mut it = line.splitn(4, ' ');
        match it.next() {
            Some("v") => {
                let i: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("vertex index"))?;
                let _d = it.next();
                let label = it.next().unwrap_or("").to_string();
                *vertices.get_mut(i).ok_or_else(|| bad("vertex out of range"))? = label;
            }
            Some("e") => {
                let nums: Vec<u64> = line[2..].split_whitespace().filter_map(|t| t.parse().ok()).collect();
                if nums.len() != 3 || nums[0] as usize >= n || nums[1] as usize >= n {
                    return Err(bad("edge"));
                }
                edges.push((nums[0] as usize, nums[1] as usize, nums[2] as u32));
            }
            _ => {}
        }
    }
    // labels are unique in exports; keep order by index
    Ok(BallSnapshot::from_edges(vertices, &edges, center, radius, scale))
}

fn compress(nb: &[(u32, u32)]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for &(j, w) in nb {
        match out.last_mut() {
            Some(r) if r.start + r.len == j && r.weight == w => r.len += 1,
            _ => out.push(Run { start: j, len: 1, weight: w }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cycle graph on `n` vertices.
    struct Cycle(i64);
    impl ImplicitGraph for Cycle {
        type V = i64;
        fn neighbors(&self, v: &i64, out: &mut Vec<(i64, u32)>) {
            out.push(((v + 1).rem_euclid(self.0), 1));
            out.push(((v - 1).rem_euclid(self.0), 1));
        }
    }

    #[test]
    fn cycle_ball_is_complete() {
        let b = BallSnapshot::build(&Cycle(10), 0, 7).unwrap();
        assert_eq!(b.len(), 10);
        assert!(b.complete);
        assert_eq!(b.dist(0, 5).unwrap(), 5);
        assert_eq!(b.dist(2, 9).unwrap(), 3);
        assert_eq!(b.edge_count(), 10);
    }

    #[test]
    fn partial_ball_certification() {
        let b = BallSnapshot::build(&Cycle(100), 0, 3).unwrap();
        assert_eq!(b.len(), 7);
        assert!(!b.complete);
        let (i, j) = (b.index_of(&98).unwrap(), b.index_of(&1).unwrap());
        assert!(b.certified(i, j).unwrap());
        let (i, j) = (b.index_of(&97).unwrap(), b.index_of(&3).unwrap());
        assert!(!b.certified(i, j).unwrap());
    }

    #[test]
    fn zero_radius() {
        let b = BallSnapshot::build(&Cycle(5), 3, 0).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.edge_count(), 0);
    }

    #[test]
    fn edge_list_round_trip() {
        let b = BallSnapshot::build(&Cycle(9), 0, 4).unwrap();
        let mut buf = Vec::new();
        b.write_edge_list(&mut buf, |v| v.to_string()).unwrap();
        let back = read_edge_list(std::str::from_utf8(&buf).unwrap()).unwrap();
        for i in 0..b.len() {
            assert_eq!(back.row(i), b.row(i));
        }
    }
}
