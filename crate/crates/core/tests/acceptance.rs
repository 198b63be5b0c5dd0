//! One line per acceptance criterion, written straight to stdout so that it
//! shows up in a plain `cargo test` log. Criteria run one at a time so that
//! the timings are not skewed by each other.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use fillinglab::boundary::*;
use fillinglab::cusped::*;
use fillinglab::graph::BallSnapshot;
use fillinglab::group::*;
use fillinglab::hyperbolicity::*;
use fillinglab::quotient::*;
use fillinglab::scenario::*;
use fillinglab::spiderweb::*;
use fillinglab::topology::*;
use fillinglab::truncation::*;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, name: &str, ok: bool, took: Duration, limit: Duration, detail: &str) {
    let pass = ok && took <= limit;
    let line = format!(
        "criterion {id:02} {} {name}: {detail} ({:.1} s, limit {} s)\n",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        limit.as_secs()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "criterion {id} failed: {detail}");
    assert!(took <= limit, "criterion {id} over time: {took:?}");
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn fix(name: &str) -> GroupContext {
    GroupContext::fixture(name).unwrap()
}

fn qctx(ctx: &GroupContext, n: i64) -> QuotientContextFull {
    QuotientContextFull::new(ctx, &FillingSpec::slope(ctx, n).unwrap(), DEFAULT_CERTIFY_RADIUS).unwrap()
}

/// Test-side BFS over the ball adjacency restricted to `allowed`.
fn bfs(ball: &BallSnapshot<CuspedVertex>, src: usize, allowed: &[bool]) -> Vec<Option<u64>> {
    let mut d = vec![None; ball.len()];
    d[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        for (w, _) in ball.neighbors(u) {
            if allowed[w] && d[w].is_none() {
                d[w] = Some(d[u].unwrap() + 1);
                q.push_back(w);
            }
        }
    }
    d
}

/// Cusped distance from the identity in FIX1 by the syllable formula: a
/// syllable `x^p` costs `min_j 2j + ceil(|p| / 2^j)`, a syllable `y^p`
/// costs `|p|`.
fn fix1_length(g: &GroupElement) -> u64 {
    g.syllables
        .iter()
        .map(|s| {
            let p = s.elem[0].unsigned_abs();
            if s.factor == 0 {
                (0..64u32).map(|j| 2 * j as u64 + p.div_ceil(1 << j)).min().unwrap()
            } else {
                p
            }
        })
        .sum()
}

/// Rank over GF(2) by dense elimination on bit rows.
fn gf2_rank(mut rows: Vec<Vec<u64>>) -> usize {
    let mut rank = 0;
    let width = rows.first().map_or(0, |r| r.len() * 64);
    for col in 0..width {
        let (w, b) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & b != 0) else { continue };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[w] & b != 0 {
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Betti numbers of a complex from dense boundary matrices.
fn oracle_betti(c: &RipsComplex) -> Vec<usize> {
    let rank = |k: usize| -> usize {
        if k == 0 || k >= c.simplices.len() || c.simplices[k].is_empty() {
            return 0;
        }
        let index: BTreeMap<&[u32], usize> = c.simplices[k - 1].iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
        let words = c.simplices[k - 1].len().div_ceil(64);
        let rows = c.simplices[k]
            .iter()
            .map(|s| {
                let mut row = vec![0u64; words];
                for drop in 0..s.len() {
                    let face: Vec<u32> = s.iter().enumerate().filter(|&(i, _)| i != drop).map(|(_, &v)| v).collect();
                    let f = index[face.as_slice()];
                    row[f / 64] ^= 1 << (f % 64);
                }
                row
            })
            .collect();
        gf2_rank(rows)
    };
    (0..3).map(|k| c.simplices.get(k).map_or(0, Vec::len) - rank(k) - rank(k + 1)).collect()
}

const ORACLE_SIMPLICES: usize = 20_000;

/// Plateau Betti vector, cross-checked against the dense oracle on every
/// grid entry small enough for it; the plateau entries must be among them.
fn calibrated_plateau(m: &FiniteMetric) -> (Vec<usize>, usize, bool) {
    let grid = distance_grid(m, 64);
    let prof = betti_profile(m, &grid, DEFAULT_SIMPLEX_BUDGET).unwrap();
    let p = prof.plateau.clone().unwrap();
    let mut agree = true;
    for e in &prof.entries {
        let size: usize = e.simplices.iter().sum();
        let in_plateau = e.scale >= p.from && e.scale <= p.to;
        if size > ORACLE_SIMPLICES {
            agree &= !in_plateau;
            continue;
        }
        let c = rips_skeleton(m, e.scale, MAX_DIM, DEFAULT_SIMPLEX_BUDGET).unwrap();
        agree &= oracle_betti(&c) == e.betti[..3];
    }
    (p.betti[..3].to_vec(), p.steps, agree)
}

#[test]
fn c01_horosphere_metric() {
    let _g = serial();
    let t = Instant::now();
    let ctx = fix("FIX1");
    let ball = CuspedSpace::combinatorial(ctx.clone()).ball(CuspedVertex::identity(), 8).unwrap();
    // level sets: (coset, depth) -> (vertex, point)
    let mut levels: BTreeMap<(GroupElement, u32), Vec<(usize, i64)>> = BTreeMap::new();
    for (i, v) in ball.vertices.iter().enumerate() {
        match v {
            CuspedVertex::Cayley(g) => {
                let (coset, p) = ctx.split_coset(g, 0);
                levels.entry((coset, 0)).or_default().push((i, p[0]));
            }
            CuspedVertex::Horoball { coset, depth, point, .. } => {
                levels.entry((coset.clone(), *depth)).or_default().push((i, point[0]));
            }
        }
    }
    let (mut pairs, mut bad) = (0u64, 0u64);
    for ((_, n), members) in &levels {
        let mut allowed = vec![false; ball.len()];
        for &(i, _) in members {
            allowed[i] = true;
        }
        for &(i, p) in members {
            let d = bfs(&ball, i, &allowed);
            for &(j, q) in members {
                pairs += 1;
                let want = (p - q).unsigned_abs().div_ceil(1 << n);
                if d[j] != Some(want) {
                    bad += 1;
                }
            }
        }
    }
    let detail = format!("{} level sets, {pairs} pairs, {bad} mismatches", levels.len());
    verdict(1, "horosphere metric exactness", bad == 0 && pairs > 0, t.elapsed(), secs(10), &detail);
}

#[test]
fn c02_horoball_geodesic_shape() {
    let _g = serial();
    let t = Instant::now();
    let f = AbelianFactor::free(1);
    let space = HoroballSpace::new(f.clone(), HoroballModel::combinatorial());
    let mut bad = 0u64;
    let mut counts = Vec::new();
    // every certified pair at radius 8; at radius 12 every certified pair
    // with an endpoint over the zero point (the rest are translates)
    for r in [8u32, 12] {
        let ball = space.ball(HoroPoint::new(&[0], 0), r).unwrap();
        let mut pairs = 0u64;
        for p in 0..ball.len() {
            if r == 12 && ball.vertices[p].point[0] != 0 {
                continue;
            }
            let row = ball.row(p);
            for q in 0..ball.len() {
                if q == p || (r == 8 && q < p) || !ball.certified_with(p, q, row[q]) {
                    continue;
                }
                pairs += 1;
                let ok = match geodesic_shape(&f, &ball, p, q, 0, 64) {
                    Ok(s) => {
                        let path = s.path();
                        s.length == row[q]
                            && path.len() == row[q] as usize + 1
                            && path.windows(2).all(|w| ball.has_edge(w[0], w[1]).is_some())
                    }
                    Err(_) => false,
                };
                bad += u64::from(!ok);
            }
        }
        counts.push(pairs);
    }
    let ball = space.ball(HoroPoint::new(&[0], 0), 8).unwrap();
    let a = ball.index_of(&HoroPoint::new(&[0], 0)).unwrap();
    let b = ball.index_of(&HoroPoint::new(&[8], 0)).unwrap();
    let eight = geodesic_shape(&f, &ball, a, b, 0, 64).unwrap().length;
    let detail = format!("pairs {counts:?}, {bad} failures, (0,0)-(8,0) length {eight}");
    verdict(2, "horoball geodesic shape", bad == 0 && eight == 6, t.elapsed(), secs(30), &detail);
}

#[test]
fn c03_tree_degeneracies() {
    let _g = serial();
    let t = Instant::now();
    let tree = CuspedSpace::combinatorial(fix("TREE"));
    let mut ok = true;
    let mut sizes = Vec::new();
    for r in 1..=6 {
        let ball = tree.ball(CuspedVertex::identity(), r).unwrap();
        let four = four_point_delta(&ball, &SamplePolicy::Exhaustive).unwrap();
        let thin = thin_triangle_delta(&ball, &SamplePolicy::Exhaustive).unwrap();
        ok &= four.exhaustive && thin.exhaustive;
        ok &= *four.theta_4pt.numer() == 0 && *thin.delta_thin.numer() == 0;
        // ball of radius r in the 4-regular tree
        ok &= ball.len() == 2 * 3usize.pow(r) - 1;
        sizes.push(ball.len());
    }
    let detail = format!("exhaustive R = 1..6, sizes {sizes:?}, both constants 0");
    verdict(3, "tree degeneracies", ok, t.elapsed(), secs(10), &detail);
}

#[test]
fn c04_truncation_depth_growth() {
    let _g = serial();
    let t = Instant::now();
    let ctx = fix("FIX2");
    let ts: Vec<u32> = [2, 4, 8, 16, 32].iter().map(|&n| qctx(&ctx, n).t_c(0).unwrap_or(0)).collect();
    let steps = ts.windows(2).filter(|w| w[1] > w[0]).count();
    let ok = ts.windows(2).all(|w| w[0] <= w[1]) && steps >= 2;
    let detail = format!("FIX2 n = 2,4,8,16,32 gives t = {ts:?}, {steps} strict increases");
    verdict(4, "truncation-depth growth", ok, t.elapsed(), secs(120), &detail);
}

#[test]
fn c05_uniform_window_hyperbolicity() {
    let _g = serial();
    let t = Instant::now();
    // peripheral quotients with a nontrivial truncation (t >= 1)
    let suite = [("FIX1", 32), ("FIX1", 64), ("FIX1", 128), ("FIX2", 16), ("FIX2", 32)];
    let mut thetas = Vec::new();
    let mut parts = Vec::new();
    for (name, n) in suite {
        let q = qctx(&fix(name), n);
        let f = &q.quotient.factors[0];
        let top = q.t_c(0).unwrap();
        let mut row = Vec::new();
        for a in 0..=top {
            let ball = truncated_ball(f, a, top, 12).unwrap();
            let th = window_theta(&ball).unwrap().theta_4pt;
            row.push(th.to_string());
            thetas.push(*th.numer() as f64 / *th.denom() as f64);
        }
        parts.push(format!("{name}/{n} t={top} [{}]", row.join(",")));
    }
    let lo = thetas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = thetas.iter().copied().fold(0.0, f64::max);
    let ok = lo > 0.0 && hi <= 2.0 * lo;
    let detail = format!("{}; ratio {:.3}", parts.join(" "), hi / lo);
    verdict(5, "uniform truncated-window hyperbolicity", ok, t.elapsed(), secs(120), &detail);
}

#[test]
fn c06_ball_embedding_threshold() {
    let _g = serial();
    let t = Instant::now();
    let ctx = fix("FIX1");
    let slopes = [2i64, 4, 8, 16, 32, 64];
    let qs: Vec<QuotientContextFull> = slopes.iter().map(|&n| qctx(&ctx, n)).collect();
    let mut ok = true;
    let mut thresholds = Vec::new();
    for r in [2u32, 3, 4] {
        let flags: Vec<bool> = qs.iter().map(|q| ball_embedding_check(q, r).unwrap().isometric).collect();
        // false then true, with at least one of each
        let first = flags.iter().position(|&b| b);
        ok &= first.is_some_and(|k| k > 0 && flags[k..].iter().all(|&b| b));
        thresholds.push(first.map(|k| slopes[k]));
    }
    ok &= thresholds.windows(2).all(|w| w[0] <= w[1]);
    let detail = format!("n(R) for R = 2,3,4: {thresholds:?}");
    verdict(6, "ball embedding threshold", ok, t.elapsed(), secs(60), &detail);
}

#[test]
fn c07_greendlinger_termination() {
    let _g = serial();
    let t = Instant::now();
    let ctx = fix("FIX1");
    let (mut words, mut done, mut steps) = (0usize, 0usize, 0usize);
    for n in [8, 16] {
        let q = qctx(&ctx, n);
        for w in kernel_words(&q, 4, 12).unwrap() {
            words += 1;
            let mut cur = w.clone();
            let mut ok = true;
            while ok && !cur.is_identity() {
                match greendlinger_shorten(&q, &cur, &GroupElement::identity(), 1) {
                    Ok((_, k, _)) => {
                        let next = ctx.mul(&k, &cur);
                        ok = fix1_length(&next) < fix1_length(&cur) && steps < 1 << 20;
                        cur = next;
                        steps += 1;
                    }
                    Err(_) => ok = false,
                }
            }
            done += usize::from(ok);
        }
    }
    let detail = format!("{done}/{words} kernel words reach the identity, {steps} strictly shortening steps");
    verdict(7, "Greendlinger termination", words >= 50 && done == words, t.elapsed(), secs(60), &detail);
}

/// FIX1 slope 8 exhausted inside the web ball, shared by criteria 8 to 11.
struct Webs {
    q: QuotientContextFull,
    ball: BallSnapshot<CuspedVertex>,
    ex: Exhaustion,
    built: Duration,
}

fn webs() -> &'static Webs {
    static W: OnceLock<Webs> = OnceLock::new();
    W.get_or_init(|| {
        let t = Instant::now();
        let ctx = fix("FIX1");
        let q = qctx(&ctx, 8);
        let ball = CuspedSpace::combinatorial(ctx).ball(CuspedVertex::identity(), 8).unwrap();
        let ex = exhaust(&q, &ball, &Profile::desk(), 6, 2).unwrap();
        Webs { q, ball, ex, built: t.elapsed() }
    })
}

#[test]
fn c08_spiderweb_free_growth() {
    let _g = serial();
    let t = Instant::now();
    let w = webs();
    let mut ok = true;
    let mut rows = Vec::new();
    for web in &w.ex.webs {
        let ax = verify_axioms(web, &w.q, &w.ball).unwrap();
        ok &= ax.s4.free() && ax.s4.syllables <= 4;
        rows.push(format!("{}:{}", web.generation, ax.s4.observed));
    }
    let c3 = fix("FIX3");
    let q3 = qctx(&c3, 4);
    let b3 = CuspedSpace::combinatorial(c3.clone()).ball(CuspedVertex::identity(), 4).unwrap();
    let ex3 = exhaust(&q3, &b3, &Profile::desk(), 6, 2).unwrap();
    for web in &ex3.webs {
        let ax = verify_axioms(web, &q3, &b3).unwrap();
        ok &= ax.s4.free();
        rows.push(format!("FIX3 {}:{}", web.generation, ax.s4.observed));
    }
    // negative control: the same kernel generator listed twice
    let gens = kernel_generators(&w.q, &w.ex.webs.last().unwrap().centers);
    let doubled = vec![gens[0].clone(), gens[0].clone()];
    let control = kernel_growth_check(&w.q.base, &doubled, 4, 2, GROWTH_BUDGET).unwrap();
    ok &= !control.free();
    let detail = format!(
        "S4 exact on {} generations ({}), control {} vs {}",
        rows.len(),
        rows.join(" "),
        control.expected,
        control.observed
    );
    verdict(8, "spiderweb free-product growth", ok, t.elapsed() + w.built, secs(60), &detail);
}

#[test]
fn c09_exhaustion_coverage() {
    let _g = serial();
    let t = Instant::now();
    let w = webs();
    let ok = w.ex.covered_at.is_some_and(|g| g <= 6) && w.ex.nesting.iter().all(|&b| b);
    let detail = format!(
        "inner ball covered at generation {:?} of {}, nested, stop `{}`",
        w.ex.covered_at,
        w.ex.webs.len() - 1,
        w.ex.stop
    );
    verdict(9, "exhaustion coverage", ok, t.elapsed() + w.built, secs(60), &detail);
}

/// Truncated quotient balls of radius 6 for every generation and for the
/// full filling.
struct Limits {
    partial: Vec<QuotientBall>,
    full: QuotientBall,
    built: Duration,
}

fn limits() -> &'static Limits {
    static L: OnceLock<Limits> = OnceLock::new();
    L.get_or_init(|| {
        let w = webs();
        let t = Instant::now();
        let partial = w
            .ex
            .webs
            .iter()
            .map(|web| partial_quotient_ball(&w.q, &web.centers, 6, true, DEFAULT_ORBIT_BUDGET).unwrap())
            .collect();
        let full = quotient_cusped_ball(&w.q, 6, true).unwrap();
        Limits { partial, full, built: t.elapsed() + w.built }
    })
}

#[test]
fn c10_strong_convergence() {
    let _g = serial();
    let t = Instant::now();
    let w = webs();
    let l = limits();
    let map = w.q.map();
    let mut ok = true;
    let mut from = Vec::new();
    for r in [2u32, 3] {
        let flags: Vec<bool> = l
            .partial
            .iter()
            .map(|pb| {
                strong_convergence_check(&pb.ball, &l.full.ball, r, |v| project_vertex(&map, v), |v| v.label(&w.q.base))
                    .unwrap()
                    .isometric
            })
            .collect();
        let first = flags.iter().position(|&b| b);
        ok &= first.is_some_and(|k| flags[k..].iter().all(|&b| b));
        from.push(first);
    }
    let detail = format!("isometric from generation {:?} for R = 2, 3", from);
    verdict(10, "strong convergence", ok, t.elapsed() + l.built, secs(60), &detail);
}

#[test]
fn c11_weak_gh_trend() {
    let _g = serial();
    let t = Instant::now();
    let w = webs();
    let l = limits();
    let map = w.q.map();
    let (sr, eps, lambda) = (3, 0.5, 2.0);
    let target = sphere_approx(&l.full.ball, sr, eps, |v| v.label(&w.q.quotient)).unwrap();
    let tb = chain_metric(&target.quasimetric());
    let mut ok = tb.metric.triangle_violation().is_none();
    let mut defects = Vec::new();
    let mut lows = Vec::new();
    for pb in &l.partial {
        let a = sphere_approx(&pb.ball, sr, eps, |v| v.label(&w.q.base)).unwrap();
        let hint: Vec<Option<usize>> = a
            .points
            .iter()
            .map(|&i| {
                let img = project_vertex(&map, &pb.ball.vertices[i]);
                l.full.ball.index_of(&img).and_then(|j| target.points.binary_search(&j).ok())
            })
            .collect();
        let ca = chain_metric(&a.quasimetric());
        ok &= ca.metric.triangle_violation().is_none();
        let gh = weak_gh_estimate(&ca.metric, &tb.metric, lambda, Some(&hint), 7).unwrap();
        defects.push(gh.epsilon);
        lows.push(gh.lower_bound);
    }
    ok &= defects.len() >= 3 && defects.windows(2).all(|p| p[1] <= p[0] + 1e-12);
    ok &= *lows.last().unwrap() == 0.0;
    let fmt: Vec<String> = defects.iter().map(|d| format!("{d:.3}")).collect();
    let detail = format!("defect per generation [{}], final lower bound {}", fmt.join(", "), lows.last().unwrap());
    verdict(11, "weak GH trend", ok, t.elapsed() + l.built, secs(120), &detail);
}

#[test]
fn c12_sphere_projection_distortion() {
    let _g = serial();
    let t = Instant::now();
    let ball = CuspedSpace::combinatorial(fix("TREE")).ball(CuspedVertex::identity(), 10).unwrap();
    // epsilon = ln 2 makes R + ln2/epsilon = R + 1
    let eps = std::f64::consts::LN_2;
    let spheres: Vec<BoundaryApprox> = (2..=5).map(|r| sphere_approx(&ball, r, eps, |v| format!("{v:?}")).unwrap()).collect();
    let c: Vec<f64> =
        spheres.windows(2).map(|p| projection_distortion(&ball, &p[1], &p[0]).unwrap().additive).collect();
    let ratios: Vec<f64> = c.windows(2).map(|p| p[0] / p[1]).collect();
    let ok = c.len() == 3 && ratios.iter().all(|&x| x >= 1.7);
    let detail = format!("c(R) for R = 2,3,4 (to R+1): {c:?}, ratios {ratios:?}");
    verdict(12, "sphere-projection distortion", ok, t.elapsed(), secs(60), &detail);
}

#[test]
fn c13_chain_metric_validity() {
    let _g = serial();
    let t = Instant::now();
    let tree = CuspedSpace::combinatorial(fix("TREE")).ball(CuspedVertex::identity(), 6).unwrap();
    let base = sphere_approx(&tree, 3, 1.0, |v| format!("{v:?}")).unwrap();
    let mut ok = true;
    let mut kt = Vec::new();
    for eps in [1.0, 0.5, 0.25] {
        let ch = chain_metric(&base.with_epsilon(eps).quasimetric());
        ok &= ch.metric.triangle_violation().is_none();
        kt.push(ch.kappa);
    }
    // the tree quasimetric is an ultrametric, so the chain metric is exact;
    // FIX1 gives a nondegenerate trend
    let fix1 = CuspedSpace::combinatorial(fix("FIX1")).ball(CuspedVertex::identity(), 6).unwrap();
    let base1 = sphere_approx(&fix1, 3, 1.0, |v| format!("{v:?}")).unwrap();
    let mut kf = Vec::new();
    for eps in [1.0, 0.5, 0.25] {
        let ch = chain_metric(&base1.with_epsilon(eps).quasimetric());
        ok &= ch.metric.triangle_violation().is_none();
        kf.push(ch.kappa);
    }
    for k in [&kt, &kf] {
        ok &= k.windows(2).all(|p| p[1] <= p[0] + 1e-12) && (k[2] - 1.0).abs() <= 0.05;
    }
    let detail = format!("kappa at epsilon 1, 0.5, 0.25: tree {kt:?}, FIX1 {kf:?}; no triangle violations");
    verdict(13, "chain metric validity and kappa trend", ok, t.elapsed(), secs(60), &detail);
}

#[test]
fn c14_topology_calibration() {
    let _g = serial();
    let t = Instant::now();
    let (s, s_steps, s_ok) = calibrated_plateau(&euclidean(&icosphere42()));
    let (c, c_steps, c_ok) = calibrated_plateau(&euclidean(&circle(24)));
    let m = 7;
    let (d, _, d_ok) = calibrated_plateau(&FiniteMetric::from_fn(m, |i, j| if i == j { 0.0 } else { 1.0 }));
    let ok = s_ok && c_ok && d_ok && s == [1, 0, 1] && c == [1, 1, 0] && d == [m, 0, 0];
    let detail = format!("icosphere {s:?} over {s_steps} steps, circle {c:?} over {c_steps} steps, {m} points {d:?}, oracle agrees");
    verdict(14, "topology-probe calibration", ok, t.elapsed(), secs(60), &detail);
}

#[test]
fn c15_cantor_boundary() {
    let _g = serial();
    let t = Instant::now();
    let c3 = fix("FIX3");
    let q = qctx(&c3, 4);
    let qb = quotient_cusped_ball(&q, 6, true).unwrap();
    let mut fine = Vec::new();
    let mut plateaus = Vec::new();
    let mut ok = q.quotient.factors.iter().all(|f| f.dim() == 1 && !f.is_finite());
    for r in 1..=3 {
        let a = sphere_approx(&qb.ball, r, 0.5, |v| v.label(&q.quotient)).unwrap();
        let ch = chain_metric(&a.quasimetric());
        ok &= ch.metric.triangle_violation().is_none();
        let prof = betti_profile(&ch.metric, &distance_grid(&ch.metric, 64), DEFAULT_SIMPLEX_BUDGET).unwrap();
        let p = prof.plateau.clone().unwrap();
        ok &= p.betti[1] == 0 && p.betti[2] == 0;
        fine.push(prof.fine_b0().unwrap_or(prof.points));
        plateaus.push(p.betti);
    }
    ok &= fine.windows(2).all(|w| w[1] > w[0]);
    let detail = format!("quotient {}, fine b0 for R = 1,2,3: {fine:?}, plateaus {plateaus:?}", q.quotient.name);
    verdict(15, "Cantor-boundary detection", ok, t.elapsed(), secs(120), &detail);
}

#[test]
fn c16_determinism() {
    let _g = serial();
    let t = Instant::now();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/fix1_slope8.cfg");
    let sc = Scenario::load(&cfg).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut files = Vec::new();
    for d in &dirs {
        let report = run_scenario(&sc).unwrap();
        files.push(export(&report, d.path(), false).unwrap());
    }
    let mut ok = files[0].len() == files[1].len() && !files[0].is_empty();
    let mut bytes = 0;
    for (a, b) in files[0].iter().zip(&files[1]) {
        let (x, y) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        ok &= a.file_name() == b.file_name() && x == y;
        bytes += x.len();
    }
    let detail = format!("{} files, {bytes} bytes, identical across two runs", files[0].len());
    verdict(16, "determinism", ok, t.elapsed(), secs(300), &detail);
}
