//! Truncation depths of peripheral quotients, truncated horoballs, the shape
//! of their geodesics, and local visibility.

use serde::{Deserialize, Serialize};

use crate::cusped::{ceil_shift, HoroPoint, HoroballModel, HoroballSpace};
use crate::error::{LabError, Result};
use crate::graph::{BallSnapshot, UNREACHED};
use crate::group::{AbelianFactor, Coords};
use crate::hyperbolicity::{
    distance_to_set, four_point_delta, max_slack_from_base, HyperbolicityReport, Rational, SamplePolicy,
};

/// Q(5) allows a slack of at most `2 * 5`.
pub const Q5_SLACK: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackEntry {
    pub depth: u32,
    pub slack: u32,
    pub diameter: u64,
    pub witness: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationInfo {
    pub graph: String,
    pub t: u32,
    /// word-length radius of the tested portion of the peripheral graph
    pub certification_radius: u64,
    /// the tested portion is the whole (finite) graph
    pub whole_graph: bool,
    pub points: usize,
    /// four-point slack of the depth-d horosphere graph for d = 0..=t
    pub log: Vec<SlackEntry>,
    /// theta of the depth-0 graph and its log2, the predicted size of t
    pub theta0: Rational,
    pub log2_theta0: f64,
}

/// Portion of the peripheral graph tested: the word-length ball of radius
/// `radius`, or the whole graph when it is finite and fits.
fn certified_points(factor: &AbelianFactor, radius: u64) -> (Vec<Coords>, bool) {
    if let Some(order) = factor.order() {
        let all = factor.ball(order as u64);
        let inside = factor.ball(radius);
        if inside.len() == all.len() {
            return (all, true);
        }
        return (inside, false);
    }
    (factor.ball(radius), false)
}

/// Largest four-point slack of the horosphere metric `ceil(d / 2^depth)` on
/// the tested points. The graph is a Cayley graph, so quadruples through the
/// identity cover every configuration up to translation.
pub fn horosphere_slack(factor: &AbelianFactor, points: &[Coords], depth: u32) -> Result<(u32, u64, Vec<Vec<i64>>)> {
    let m = points.len();
    let zero = factor.zero();
    let base = points.iter().position(|p| *p == zero).ok_or(LabError::NotInBall)?;
    let mut table = vec![0u32; m * m];
    let mut diameter = 0u64;
    for a in 0..m {
        for b in a..m {
            let d = ceil_shift(factor.distance(&points[a], &points[b])?, depth);
            diameter = diameter.max(d);
            table[a * m + b] = d as u32;
            table[b * m + a] = d as u32;
        }
    }
    let found = max_slack_from_base(m, |a, b| table[a * m + b], |_, _| true, base, 0);
    let (slack, q) = found.unwrap_or((0, [base; 4]));
    Ok((slack, diameter, q.iter().map(|&i| points[i].to_vec()).collect()))
}

/// Smallest depth at which the horosphere graph of `factor` satisfies Q(5)
/// on the certified portion.
pub fn truncation_depth(factor: &AbelianFactor, radius: u64, name: &str) -> Result<TruncationInfo> {
    let (points, whole) = certified_points(factor, radius);
    let mut log = Vec::new();
    let mut depth = 0;
    loop {
        let (slack, diameter, witness) = horosphere_slack(factor, &points, depth)?;
        log.push(SlackEntry { depth, slack, diameter, witness });
        if slack <= Q5_SLACK {
            // a portion of diameter <= 5 satisfies Q(5) for free
            if depth > 0 && !whole && diameter <= 5 {
                return Err(LabError::CertificationTooSmall { radius, depth: depth - 1 });
            }
            break;
        }
        depth += 1;
        if depth > 62 {
            return Err(LabError::CertificationTooSmall { radius, depth });
        }
    }
    let theta0 = Rational::new(log[0].slack as i64, 2);
    let t0 = log[0].slack as f64 / 2.0;
    Ok(TruncationInfo {
        graph: name.to_string(),
        t: depth,
        certification_radius: radius,
        whole_graph: whole,
        points: points.len(),
        log,
        theta0,
        log2_theta0: if t0 > 0.0 { t0.log2() } else { f64::NEG_INFINITY },
    })
}

/// Slack of the horosphere graph at each depth in `0..=max_depth`.
pub fn slack_profile(factor: &AbelianFactor, radius: u64, max_depth: u32) -> Result<Vec<SlackEntry>> {
    let (points, _) = certified_points(factor, radius);
    (0..=max_depth)
        .map(|depth| {
            let (slack, diameter, witness) = horosphere_slack(factor, &points, depth)?;
            Ok(SlackEntry { depth, slack, diameter, witness })
        })
        .collect()
}

/// Ball in the horoball over `factor` restricted to depths `[low, high]`,
/// centered at the identity on depth `low`.
pub fn truncated_ball(factor: &AbelianFactor, low: u32, high: u32, radius: u32) -> Result<BallSnapshot<HoroPoint>> {
    if high < low {
        return Err(LabError::EmptyWindow(low, high));
    }
    let space = HoroballSpace::new(factor.clone(), HoroballModel::combinatorial()).window(low, Some(high))?;
    space.ball(HoroPoint { depth: low, point: factor.zero() }, radius)
}

/// Four-point constant of a truncated window, exhaustive up to translation
/// (one base point per depth level, certified quadruples only).
pub fn window_theta(ball: &BallSnapshot<HoroPoint>) -> Result<HyperbolicityReport> {
    let bases: Vec<usize> = (0..ball.len()).filter(|&i| AbelianFactor::is_zero(&ball.vertices[i].point)).collect();
    four_point_delta(ball, &SamplePolicy::ExhaustiveBases(bases))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeodesicShape {
    pub down: Vec<usize>,
    pub horizontal: Vec<usize>,
    pub up: Vec<usize>,
    pub turn_depth: u32,
    pub length: u32,
}

impl GeodesicShape {
    pub fn path(&self) -> Vec<usize> {
        let mut p = self.down.clone();
        for seg in [&self.horizontal, &self.up] {
            for &v in seg.iter() {
                if p.last() != Some(&v) {
                    p.push(v);
                }
            }
        }
        p
    }
}

/// Length of the best vertical-horizontal-vertical path between `(p, a)`
/// and `(q, b)` turning at a depth in `[low, high]`, with the turning depth.
pub fn shape_length(d_gamma: u64, a: u32, b: u32, low: u32, high: u32) -> (u64, u32) {
    let mut best = (u64::MAX, low);
    for j in low..=high {
        let len = a.abs_diff(j) as u64 + b.abs_diff(j) as u64 + ceil_shift(d_gamma, j);
        if len < best.0 {
            best = (len, j);
        }
        if ceil_shift(d_gamma, j) == 0 && j >= a.max(b) {
            break;
        }
    }
    best
}

/// A geodesic from `p` to `q` with at most two vertical segments and one
/// horizontal segment, all inside the ball. `high` bounds the window.
pub fn geodesic_shape(
    factor: &AbelianFactor,
    ball: &BallSnapshot<HoroPoint>,
    p: usize,
    q: usize,
    low: u32,
    high: u32,
) -> Result<GeodesicShape> {
    let (vp, vq) = (&ball.vertices[p], &ball.vertices[q]);
    let dg = factor.distance(&vp.point, &vq.point)?;
    let (len, j) = shape_length(dg, vp.depth, vq.depth, low, high);
    let find = |depth: u32, point: &Coords| {
        ball.index_of(&HoroPoint { depth, point: point.clone() }).ok_or(LabError::NotInBall)
    };
    let vertical = |from: u32, to: u32, point: &Coords| -> Result<Vec<usize>> {
        let mut out = Vec::new();
        if from <= to {
            for k in from..=to {
                out.push(find(k, point)?);
            }
        } else {
            for k in (to..=from).rev() {
                out.push(find(k, point)?);
            }
        }
        Ok(out)
    };
    let down = vertical(vp.depth, j, &vp.point)?;
    let mut horizontal = vec![*down.last().unwrap()];
    let mut cur = vp.point.clone();
    let reach = 1u64 << j.min(62);
    while cur != vq.point {
        let here = factor.distance(&cur, &vq.point)?;
        // greedy step that lands closest to the target
        let at = *horizontal.last().unwrap();
        let mut next: Option<(u64, usize, Coords)> = None;
        // coordinate-wise step toward the target; kept when it reaches the
        // triangle-inequality bound, otherwise scan the neighbors
        let mut step = factor.sub(&vq.point, &cur);
        let mut left = reach as i64;
        for c in step.iter_mut() {
            let m = (*c).clamp(-left, left);
            left -= m.abs();
            *c = m;
        }
        let cand = factor.add(&cur, &step);
        if let Some(w) = ball.index_of(&HoroPoint { depth: j, point: cand.clone() }) {
            if ball.has_edge(at, w).is_some() {
                let dw = factor.distance(&cand, &vq.point)?;
                if dw == here.saturating_sub(reach) {
                    next = Some((dw, w, cand));
                }
            }
        }
        let scan = next.is_none();
        for (w, _) in ball.neighbors(at).filter(|_| scan) {
            let hw = &ball.vertices[w];
            if hw.depth != j || factor.distance(&cur, &hw.point)? > reach {
                continue;
            }
            let dw = factor.distance(&hw.point, &vq.point)?;
            if dw < here && next.as_ref().map_or(true, |n| dw < n.0) {
                next = Some((dw, w, hw.point.clone()));
            }
        }
        let (_, w, pt) = next.ok_or(LabError::NotInBall)?;
        horizontal.push(w);
        cur = pt;
    }
    let up = vertical(j, vq.depth, &vq.point)?;
    let shape = GeodesicShape { down, horizontal, up, turn_depth: j, length: len as u32 };
    if shape.path().len() as u64 != len + 1 {
        return Err(LabError::Precondition(format!("greedy horizontal segment missed the optimum between {p} and {q}")));
    }
    Ok(shape)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalVisibilityReport {
    pub lambda: u32,
    pub worst_defect: u32,
    pub worst_pair: Option<(usize, usize)>,
    pub pairs: usize,
}

/// For pairs at distance `lambda` from base points on the identity column,
/// the distance from `q` to the union of geodesics leaving `p` for length
/// `2 * lambda`.
pub fn local_visibility_check(ball: &BallSnapshot<HoroPoint>, lambda: u32, t: u32) -> Result<LocalVisibilityReport> {
    if lambda >= t {
        return Err(LabError::Precondition(format!("lambda {lambda} must be below the truncation depth {t}")));
    }
    let sources: Vec<usize> = (0..ball.len()).filter(|&i| AbelianFactor::is_zero(&ball.vertices[i].point)).collect();
    let mut worst = (0u32, None);
    let mut pairs = 0;
    for &p in &sources {
        let row = ball.row(p);
        let reach = 2 * lambda;
        let mut order: Vec<usize> = (0..ball.len()).filter(|&v| row[v] <= reach).collect();
        order.sort_by_key(|&v| std::cmp::Reverse(row[v]));
        let mut ext = vec![false; ball.len()];
        for &v in &order {
            ext[v] = row[v] == reach || ball.neighbors(v).any(|(w, wt)| row[w] != UNREACHED && row[w] == row[v] + wt && ext[w]);
        }
        let set: Vec<usize> = (0..ball.len()).filter(|&v| ext[v]).collect();
        if set.is_empty() {
            continue;
        }
        let to_set = distance_to_set(ball, &set);
        for q in 0..ball.len() {
            if row[q] == lambda && ball.certified_with(p, q, row[q]) {
                pairs += 1;
                if to_set[q] > worst.0 || worst.1.is_none() {
                    worst = (worst.0.max(to_set[q]), Some((p, q)));
                }
            }
        }
    }
    if pairs == 0 {
        return Err(LabError::Precondition(format!("no pairs at distance {lambda}")));
    }
    Ok(LocalVisibilityReport { lambda, worst_defect: worst.0, worst_pair: worst.1, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_graph_needs_no_truncation() {
        let info = truncation_depth(&AbelianFactor::cyclic(2), 4, "Z/2").unwrap();
        assert_eq!(info.t, 0);
        assert!(info.whole_graph);
    }

    #[test]
    fn shape_of_eight_apart() {
        assert_eq!(shape_length(8, 0, 0, 0, 10), (6, 1));
        let f = AbelianFactor::free(1);
        let ball = truncated_ball(&f, 0, 10, 6).unwrap();
        let p = ball.index_of(&HoroPoint::new(&[0], 0)).unwrap();
        let q = ball.index_of(&HoroPoint::new(&[8], 0)).unwrap();
        let s = geodesic_shape(&f, &ball, p, q, 0, 10).unwrap();
        assert_eq!((s.down.len(), s.horizontal.len(), s.up.len()), (2, 5, 2));
        assert_eq!(s.length, 6);
    }

    #[test]
    fn degenerate_window_is_a_horosphere() {
        let f = AbelianFactor::cyclic(16);
        let ball = truncated_ball(&f, 2, 2, 10).unwrap();
        assert_eq!(ball.len(), 16);
        assert!(ball.vertices.iter().all(|v| v.depth == 2));
        assert!(truncated_ball(&f, 3, 2, 4).is_err());
    }
}
