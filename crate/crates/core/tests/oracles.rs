//! Library results against independent computations done here.

use std::collections::BTreeSet;
use std::path::Path;

use fillinglab::boundary::*;
use fillinglab::cusped::*;
use fillinglab::graph::read_edge_list;
use fillinglab::group::*;
use fillinglab::quotient::*;
use fillinglab::scenario::*;
use fillinglab::topology::*;

fn fix(name: &str) -> GroupContext {
    GroupContext::fixture(name).unwrap()
}

fn qctx(ctx: &GroupContext, n: i64) -> QuotientContextFull {
    QuotientContextFull::new(ctx, &FillingSpec::slope(ctx, n).unwrap(), DEFAULT_CERTIFY_RADIUS).unwrap()
}

#[test]
fn cusped_distance_matches_bfs() {
    for (name, r) in [("FIX1", 8), ("FIX3", 5)] {
        let ctx = fix(name);
        let ball = CuspedSpace::combinatorial(ctx.clone()).ball(CuspedVertex::identity(), r).unwrap();
        let mut seen = 0;
        for (i, v) in ball.vertices.iter().enumerate() {
            if let CuspedVertex::Cayley(g) = v {
                assert_eq!(cusped_distance(&ctx, g).unwrap(), ball.center_dist[i] as u64, "{}", ctx.format(g));
                seen += 1;
            }
        }
        assert!(seen > 50);
    }
}

/// `K = <x^8>` acting on the left: `g ~ h` iff `h = x^(8k) g`.
#[test]
fn one_center_orbits_match_brute_force() {
    let ctx = fix("FIX1");
    let q = qctx(&ctx, 8);
    let canon = OrbitCanonicalizer::new(&q, &[HoroCenter::new(&ctx, &GroupElement::identity(), 0)], DEFAULT_ORBIT_BUDGET);
    let elems = enumerate_ball(&ctx, 4);
    let x8 = ctx.element("x^8").unwrap();
    let classes: Vec<GroupElement> = elems.iter().map(|g| canon.canon(g).unwrap()).collect();
    for (a, g) in elems.iter().enumerate() {
        for (b, h) in elems.iter().enumerate().skip(a) {
            let same = (-3..=3).any(|k| ctx.mul(&ctx.pow(&x8, k), g) == *h);
            assert_eq!(classes[a] == classes[b], same, "{} {}", ctx.format(g), ctx.format(h));
        }
    }
}

#[test]
fn projection_to_the_filling_is_onto_and_short() {
    let ctx = fix("FIX1");
    let q = qctx(&ctx, 8);
    let map = q.map();
    let base = CuspedSpace::combinatorial(ctx).ball(CuspedVertex::identity(), 4).unwrap();
    let quot = quotient_space(&q, false).ball(CuspedVertex::identity(), 4).unwrap();
    let mut hit = vec![false; quot.len()];
    for (i, v) in base.vertices.iter().enumerate() {
        let j = quot.index_of(&project_vertex(&map, v)).expect("image inside the ball");
        assert!(quot.center_dist[j] <= base.center_dist[i]);
        hit[j] = true;
        for (w, _) in base.neighbors(i) {
            let k = quot.index_of(&project_vertex(&map, &base.vertices[w])).unwrap();
            assert!(k == j || quot.has_edge(j, k).is_some());
        }
    }
    assert!(hit.iter().all(|&h| h));
}

fn letters(g: &GroupElement) -> Vec<(u16, i64)> {
    g.syllables
        .iter()
        .flat_map(|s| std::iter::repeat((s.factor, s.elem[0].signum())).take(s.elem[0].unsigned_abs() as usize))
        .collect()
}

#[test]
fn tree_gromov_products_are_common_prefixes() {
    let ctx = fix("TREE");
    let ball = CuspedSpace::combinatorial(ctx).ball(CuspedVertex::identity(), 6).unwrap();
    let a = sphere_approx(&ball, 3, 1.0, |v| format!("{v:?}")).unwrap();
    assert_eq!(a.len(), 4 * 9);
    let words: Vec<Vec<(u16, i64)>> = a
        .points
        .iter()
        .map(|&i| match &ball.vertices[i] {
            CuspedVertex::Cayley(g) => letters(g),
            v => panic!("{v:?}"),
        })
        .collect();
    for x in 0..a.len() {
        for y in 0..a.len() {
            let common = if x == y { 3 } else { words[x].iter().zip(&words[y]).take_while(|(p, q)| p == q).count() };
            assert_eq!(a.gromov(x, y), common as f64);
        }
    }
}

fn lcg(seed: &mut u64) -> f64 {
    *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (*seed >> 11) as f64 / (1u64 << 53) as f64
}

fn random_metric(n: usize, seed: u64) -> FiniteMetric {
    let mut s = seed;
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [lcg(&mut s), lcg(&mut s), lcg(&mut s)]).collect();
    euclidean(&pts)
}

#[test]
fn chain_metric_is_the_largest_metric_below() {
    let mut s = 11u64;
    let n = 12;
    let mut raw = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.05 + lcg(&mut s);
            raw[i * n + j] = v;
            raw[j * n + i] = v;
        }
    }
    let q = FiniteMetric::from_fn(n, |i, j| raw[i * n + j]);
    let c = chain_metric(&q);
    assert!(c.metric.triangle_violation().is_none());
    // below q, and a fixed point of one more relaxation step through q
    for i in 0..n {
        for j in 0..n {
            let d = c.metric.get(i, j);
            assert!(d <= q.get(i, j));
            let mut best = q.get(i, j);
            for k in 0..n {
                best = best.min(q.get(i, k) + c.metric.get(k, j));
            }
            assert!((best - d).abs() < 1e-12);
        }
    }
}

fn oracle_defect(a: &FiniteMetric, b: &FiniteMetric, f: &[usize], lambda: f64) -> f64 {
    let mut e: f64 = 0.0;
    for x in 0..a.n {
        for y in 0..a.n {
            let (d, g) = (a.get(x, y), b.get(f[x], f[y]));
            e = e.max(g - lambda * d).max(d / lambda - g);
        }
    }
    for p in 0..b.n {
        e = e.max(f.iter().map(|&y| b.get(p, y)).fold(f64::INFINITY, f64::min));
    }
    e
}

/// Minimum over all maps `A -> B`.
fn exhaustive_defect(a: &FiniteMetric, b: &FiniteMetric, lambda: f64) -> f64 {
    let mut f = vec![0usize; a.n];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(oracle_defect(a, b, &f, lambda));
        let mut k = 0;
        while k < a.n {
            f[k] += 1;
            if f[k] < b.n {
                break;
            }
            f[k] = 0;
            k += 1;
        }
        if k == a.n {
            return best;
        }
    }
}

#[test]
fn gh_estimate_against_exhaustive_matching() {
    for seed in 0..6 {
        let a = random_metric(7, 100 + seed);
        let keep: Vec<usize> = (0..7).filter(|&i| i != seed as usize).collect();
        let b = a.restrict(&keep);
        let lambda = 1.5;
        let exact = exhaustive_defect(&a, &b, lambda);
        let gh = weak_gh_estimate(&a, &b, lambda, None, seed).unwrap();
        assert!((qi_defect(&a, &b, &gh.map, lambda) - oracle_defect(&a, &b, &gh.map, lambda)).abs() < 1e-12);
        assert!(gh.epsilon >= exact - 1e-12);
        assert!(gh.lower_bound <= exact + 1e-12);
        // deleting a point costs at most its nearest-neighbor gap
        let gap = (0..7).filter(|&j| j != seed as usize).map(|j| a.get(seed as usize, j)).fold(f64::INFINITY, f64::min);
        assert!(exact <= gap * lambda + 1e-12);
    }
}

fn components(m: &FiniteMetric, scale: f64) -> usize {
    let mut parent: Vec<usize> = (0..m.n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for i in 0..m.n {
        for j in i + 1..m.n {
            if m.get(i, j) <= scale {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..m.n).filter(|&i| find(&mut parent, i) == i).count()
}

#[test]
fn b0_matches_union_find_and_euler_characteristic() {
    for seed in 0..4 {
        let m = random_metric(16, seed);
        let grid = distance_grid(&m, 40);
        let prof = betti_profile(&m, &grid, DEFAULT_SIMPLEX_BUDGET).unwrap();
        let mut last = usize::MAX;
        for e in &prof.entries {
            assert_eq!(e.betti[0], components(&m, e.scale));
            assert!(e.betti[0] <= last);
            last = e.betti[0];
            let c = rips_skeleton(&m, e.scale, MAX_DIM, DEFAULT_SIMPLEX_BUDGET).unwrap();
            let ranks = boundary_ranks(&c);
            let n = c.counts();
            let b3 = n[3] - ranks[3];
            let chi_b = e.betti[0] as i64 - e.betti[1] as i64 + e.betti[2] as i64 - b3 as i64;
            assert_eq!(c.euler_characteristic(), chi_b);
        }
    }
}

#[test]
fn edge_list_round_trip_keeps_distances() {
    let ctx = fix("FIX1");
    let ball = CuspedSpace::combinatorial(ctx.clone()).ball(CuspedVertex::identity(), 4).unwrap();
    let mut text = Vec::new();
    ball.write_edge_list(&mut text, |v| v.label(&ctx)).unwrap();
    let back = read_edge_list(std::str::from_utf8(&text).unwrap()).unwrap();
    assert_eq!(back.len(), ball.len());
    let order: Vec<usize> = ball.vertices.iter().map(|v| back.index_of(&v.label(&ctx)).unwrap()).collect();
    for i in (0..ball.len()).step_by(7) {
        let (r, s) = (ball.row(i), back.row(order[i]));
        for j in 0..ball.len() {
            assert_eq!(r[j], s[order[j]]);
        }
    }
}

fn small_scenario() -> Scenario {
    let text = "fixture = FIX1\nslopes = 8\nradius = 3\nweb_radius = 6\ngenerations = 3\nsphere_radius = 2\nepsilon = 0.5\nseed = 3\n";
    Scenario::parse(text, None).unwrap()
}

#[test]
fn exports_parse_back_and_match_the_schema() {
    let report = run_scenario(&small_scenario()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = export(&report, dir.path(), false).unwrap();
    let names: BTreeSet<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for f in ["report.json", "spiderweb.csv", "betti.csv", "gh.csv", "rho_hat.csv", "ball.edges"] {
        assert!(names.contains(f), "{f}");
    }
    let rows = |name: &str| csv::Reader::from_path(dir.path().join(name)).unwrap().records().count();
    assert_eq!(rows("spiderweb.csv"), report.tables.spiderweb.len());
    assert_eq!(rows("betti.csv"), report.tables.betti.len());
    assert_eq!(rows("gh.csv"), report.tables.gh.len());
    let n = report.tables.rho_hat.as_ref().unwrap().n;
    let rho = csv::ReaderBuilder::new().has_headers(false).from_path(dir.path().join("rho_hat.csv")).unwrap();
    assert_eq!(rho.into_records().count(), n);

    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let back: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(to_json(&back).unwrap(), text);

    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let errors: Vec<String> = validator.iter_errors(&value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn reruns_are_identical() {
    let run = || {
        let mut r = run_scenario(&small_scenario()).unwrap();
        r.timings.clear();
        to_json(&r).unwrap()
    };
    assert!(run() == run());
}
