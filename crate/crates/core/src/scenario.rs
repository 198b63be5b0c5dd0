//! Scenario configs, the staged pipeline and deterministic exports.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::boundary::{
    chain_metric, linear_connectedness, mark_peripheral, sphere_approx, strong_convergence_check, weak_gh_estimate,
    BoundaryApprox, FiniteMetric,
};
use crate::cusped::{CuspedSpace, CuspedVertex};
use crate::error::{LabError, Result};
use crate::group::{FillingSpec, GroupContext};
use crate::hyperbolicity::{four_point_delta, SamplePolicy};
use crate::quotient::{
    ball_embedding_check, greendlinger_sequence, kernel_words, partial_quotient_ball, project_vertex,
    quotient_cusped_ball, QuotientContextFull, DEFAULT_CERTIFY_RADIUS, DEFAULT_ORBIT_BUDGET,
};
use crate::spiderweb::{exhaust, verify_axioms, Profile};
use crate::topology::{betti_profile, distance_grid, DEFAULT_SIMPLEX_BUDGET};

pub const STAGES: [&str; 8] = ["build", "delta", "truncate", "fill", "spiderweb", "boundary", "topology", "gh"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EpsilonPolicy {
    /// `min(1, 1/(6 delta))` with delta measured on the quotient ball
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScaleGrid {
    /// midpoints between consecutive distinct distances, at most `limit`
    Auto { limit: usize },
    Range { from: f64, to: f64, step: f64 },
}

impl ScaleGrid {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || LabError::Parse { key: "scales".into(), msg: format!("expected `auto` or `lo:hi:step`, got `{text}`") };
        if text == "auto" {
            return Ok(ScaleGrid::Auto { limit: 64 });
        }
        let parts: Vec<f64> = text.split(':').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        match parts[..] {
            [from, to, step] if step > 0.0 && from <= to => Ok(ScaleGrid::Range { from, to, step }),
            _ => Err(bad()),
        }
    }

    pub fn points(&self, m: &FiniteMetric) -> Vec<f64> {
        match *self {
            ScaleGrid::Auto { limit } => distance_grid(m, limit),
            ScaleGrid::Range { from, to, step } => {
                let n = ((to - from) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| from + k as f64 * step).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub fixture: String,
    /// fixture text when given by file rather than by name
    pub fixture_text: Option<String>,
    /// one slope per peripheral factor; empty means no filling
    pub slopes: Vec<i64>,
    pub radius: u32,
    pub web_radius: u32,
    pub generations: usize,
    pub margin: u32,
    pub profile: String,
    pub theta: u32,
    pub sphere_radius: u32,
    pub epsilon: EpsilonPolicy,
    pub scales: ScaleGrid,
    pub lambda: f64,
    pub seed: u64,
    pub exhaustive: bool,
    pub certify_radius: u64,
    pub skip: BTreeSet<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            fixture: "FIX1".into(),
            fixture_text: None,
            slopes: Vec::new(),
            radius: 4,
            web_radius: 8,
            generations: 5,
            margin: 2,
            profile: "desk".into(),
            theta: 1,
            sphere_radius: 3,
            epsilon: EpsilonPolicy::Fixed(0.5),
            scales: ScaleGrid::Auto { limit: 64 },
            lambda: 2.0,
            seed: 0,
            exhaustive: false,
            certify_radius: DEFAULT_CERTIFY_RADIUS,
            skip: BTreeSet::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| LabError::Parse { key: key.into(), msg: format!("bad value `{value}`") })
}

impl Scenario {
    /// Parses a flat `key = value` config; `include = path` pulls in another
    /// file relative to `base`, later keys override earlier ones.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut pairs = Vec::new();
        collect_pairs(text, base, 0, &mut pairs)?;
        let mut s = Scenario::default();
        let mut fixture_seen = false;
        for (key, value) in pairs {
            let v = value.as_str();
            match key.as_str() {
                "fixture" => {
                    GroupContext::fixture(v).map_err(|_| LabError::Parse { key: "fixture".into(), msg: format!("unknown fixture `{v}`") })?;
                    s.fixture = v.to_string();
                    s.fixture_text = None;
                    fixture_seen = true;
                }
                "fixture_file" => {
                    let path = base.map_or_else(|| PathBuf::from(v), |b| b.join(v));
                    let text = fs::read_to_string(&path).map_err(|e| LabError::Parse { key: "fixture_file".into(), msg: e.to_string() })?;
                    let ctx = GroupContext::parse_fixture(&text)?;
                    s.fixture = ctx.name.clone();
                    s.fixture_text = Some(text);
                    fixture_seen = true;
                }
                "slopes" => {
                    s.slopes = if v.is_empty() || v == "none" {
                        Vec::new()
                    } else {
                        v.split(',').map(|t| parse_num("slopes", t.trim())).collect::<Result<_>>()?
                    }
                }
                "radius" => s.radius = parse_num(&key, v)?,
                "web_radius" => s.web_radius = parse_num(&key, v)?,
                "generations" => s.generations = parse_num(&key, v)?,
                "margin" => s.margin = parse_num(&key, v)?,
                "profile" => {
                    Profile::parse(v, 1)?;
                    s.profile = v.to_string();
                }
                "theta" => s.theta = parse_num(&key, v)?,
                "sphere_radius" => s.sphere_radius = parse_num(&key, v)?,
                "epsilon" => {
                    s.epsilon = if v == "auto" { EpsilonPolicy::Auto } else { EpsilonPolicy::Fixed(parse_num(&key, v)?) }
                }
                "scales" => s.scales = ScaleGrid::parse(v)?,
                "lambda" => s.lambda = parse_num(&key, v)?,
                "seed" => s.seed = parse_num(&key, v)?,
                "exhaustive" => s.exhaustive = parse_num(&key, v)?,
                "certify_radius" => s.certify_radius = parse_num(&key, v)?,
                "skip" => {
                    for st in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                        if !STAGES.contains(&st) {
                            return Err(LabError::Parse { key: "skip".into(), msg: format!("unknown stage `{st}`") });
                        }
                        s.skip.insert(st.to_string());
                    }
                }
                _ => return Err(LabError::Parse { key, msg: "unknown key".into() }),
            }
        }
        if !fixture_seen {
            return Err(LabError::Parse { key: "fixture".into(), msg: "missing".into() });
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    pub fn context(&self) -> Result<GroupContext> {
        match &self.fixture_text {
            Some(t) => GroupContext::parse_fixture(t),
            None => GroupContext::fixture(&self.fixture),
        }
    }

    /// Canonical text of the resolved config, hashed into the provenance.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn runs(&self, stage: &str) -> bool {
        !self.skip.contains(stage)
    }
}

fn collect_pairs(text: &str, base: Option<&Path>, depth: usize, out: &mut Vec<(String, String)>) -> Result<()> {
    if depth > 8 {
        return Err(LabError::Parse { key: "include".into(), msg: "include nesting too deep".into() });
    }
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LabError::Parse { key: line.to_string(), msg: "expected `key = value`".into() })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k == "include" {
            let path = base.map_or_else(|| PathBuf::from(&v), |b| b.join(&v));
            let inner = fs::read_to_string(&path).map_err(|e| LabError::Parse { key: "include".into(), msg: format!("{}: {e}", path.display()) })?;
            collect_pairs(&inner, path.parent(), depth + 1, out)?;
        } else {
            out.push((k, v));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    /// how the numbers were obtained (exhaustive, sampled, seeded search)
    pub policy: String,
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebRow {
    pub generation: usize,
    pub branch: String,
    pub centers: usize,
    pub hull: usize,
    pub uncertified_pairs: usize,
    pub axioms_pass: bool,
    pub s4_expected: u64,
    pub s4_observed: u64,
    pub convergent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiRow {
    pub scale: f64,
    pub b0: usize,
    pub b1: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhRow {
    pub generation: usize,
    pub points: usize,
    pub epsilon: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub spiderweb: Vec<WebRow>,
    pub betti: Vec<BettiRow>,
    pub gh: Vec<GhRow>,
    /// chain metric on the quotient sphere, row-major
    pub rho_hat: Option<FiniteMetric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub stages: Vec<StageReport>,
    pub tables: Tables,
    /// wall-clock seconds per stage; left out of exports
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub timings: BTreeMap<String, f64>,
    /// edge list of the build ball; written as its own file
    #[serde(skip)]
    pub ball_edges: String,
}

impl RunReport {
    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.name == name)
    }
}

fn stage_err(stage: &str) -> impl Fn(LabError) -> LabError + '_ {
    move |e| LabError::Stage { stage: stage.to_string(), source: Box::new(e) }
}

struct Runner {
    report: RunReport,
    clock: Instant,
}

impl Runner {
    fn push(&mut self, name: &str, policy: impl Into<String>, data: Value) {
        let t = self.clock.elapsed().as_secs_f64();
        self.report.timings.insert(name.to_string(), t);
        self.report.stages.push(StageReport { name: name.to_string(), policy: policy.into(), data });
        self.clock = Instant::now();
    }
}

/// Runs the stages in order: build, delta, truncate, fill, spiderweb,
/// boundary, topology, gh. Without slopes only build and delta run.
pub fn run_scenario(sc: &Scenario) -> Result<RunReport> {
    let ctx = sc.context().map_err(stage_err("build"))?;
    let mut run = Runner {
        report: RunReport {
            provenance: Provenance {
                config_hash: sc.config_hash(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: sc.seed,
                scenario: sc.clone(),
            },
            stages: Vec::new(),
            tables: Tables::default(),
            timings: BTreeMap::new(),
            ball_edges: String::new(),
        },
        clock: Instant::now(),
    };
    let policy = if sc.exhaustive {
        SamplePolicy::Exhaustive
    } else {
        SamplePolicy::Auto { threshold: 400, samples: 200_000, seed: sc.seed }
    };

    let space = CuspedSpace::combinatorial(ctx.clone());
    let ball = space.ball(CuspedVertex::identity(), sc.radius).map_err(stage_err("build"))?;
    if sc.runs("build") {
        let mut edges = Vec::new();
        ball.write_edge_list(&mut edges, |v| v.label(&ctx)).map_err(stage_err("build"))?;
        run.report.ball_edges = String::from_utf8(edges).expect("labels are utf-8");
        run.push("build", "exact BFS", json!({ "fixture": ctx.name, "ball": ball.summary() }));
    }
    if sc.runs("delta") {
        let rep = four_point_delta(&ball, &policy).map_err(stage_err("delta"))?;
        let pol = format!("{:?}", rep.policy);
        run.push("delta", pol, serde_json::to_value(&rep)?);
    }
    if sc.slopes.is_empty() {
        return Ok(run.report);
    }

    let spec = FillingSpec::slopes(&ctx, &sc.slopes).map_err(stage_err("truncate"))?;
    let qctx = QuotientContextFull::new(&ctx, &spec, sc.certify_radius).map_err(stage_err("truncate"))?;
    if sc.runs("truncate") {
        let data: BTreeMap<String, Value> = qctx
            .truncation
            .iter()
            .map(|(i, info)| {
                let log: Vec<Value> = info.log.iter().map(|e| json!({ "depth": e.depth, "slack": e.slack, "diameter": e.diameter })).collect();
                (
                    format!("P{i}"),
                    json!({
                        "graph": info.graph,
                        "t": info.t,
                        "whole_graph": info.whole_graph,
                        "points": info.points,
                        "theta0": info.theta0.to_string(),
                        "log": log,
                    }),
                )
            })
            .collect();
        run.push("truncate", format!("exhaustive four-point slack, certification radius {}", sc.certify_radius), json!(data));
    }
    if sc.runs("fill") {
        let qb = quotient_cusped_ball(&qctx, sc.radius, true).map_err(stage_err("fill"))?;
        let emb = ball_embedding_check(&qctx, (sc.radius / 2).max(1)).map_err(stage_err("fill"))?;
        let words = kernel_words(&qctx, 2, 12).map_err(stage_err("fill"))?;
        let mut ok = 0;
        for w in &words {
            if greendlinger_sequence(&qctx, w, 1).is_ok() {
                ok += 1;
            }
        }
        run.push(
            "fill",
            "exact BFS; kernel words of syllable length <= 2 within range 12",
            json!({
                "quotient": qctx.quotient.name,
                "truncated_ball": qb.ball.summary(),
                "embedding": emb,
                "greendlinger": { "words": words.len(), "terminated": ok },
            }),
        );
    }

    let mut webs = Vec::new();
    if sc.runs("spiderweb") {
        let profile = Profile::parse(&sc.profile, sc.theta).map_err(stage_err("spiderweb"))?;
        let wb = space.ball(CuspedVertex::identity(), sc.web_radius).map_err(stage_err("spiderweb"))?;
        let ex = exhaust(&qctx, &wb, &profile, sc.generations, sc.margin).map_err(stage_err("spiderweb"))?;
        for w in &ex.webs {
            let ax = verify_axioms(w, &qctx, &wb).map_err(stage_err("spiderweb"))?;
            run.report.tables.spiderweb.push(WebRow {
                generation: w.generation,
                branch: w.branch.clone(),
                centers: w.centers.len(),
                hull: w.hull.len(),
                uncertified_pairs: w.uncertified_pairs,
                axioms_pass: ax.all_pass(),
                s4_expected: ax.s4.expected,
                s4_observed: ax.s4.observed,
                convergent: None,
            });
        }
        run.push(
            "spiderweb",
            "exact within the web ball; S4 by exhaustive word enumeration",
            json!({
                "profile": profile,
                "generations": ex.webs.len(),
                "nesting": ex.nesting,
                "step_contained": ex.step_contained,
                "covered_at": ex.covered_at,
                "uncovered": ex.uncovered,
                "stop": ex.stop,
            }),
        );
        webs = ex.webs;
    }

    if !(sc.runs("boundary") || sc.runs("topology") || sc.runs("gh")) {
        return Ok(run.report);
    }
    let sr = sc.sphere_radius;
    let qb = quotient_cusped_ball(&qctx, 2 * sr, true).map_err(stage_err("boundary"))?;
    let epsilon = match sc.epsilon {
        EpsilonPolicy::Fixed(e) => e,
        EpsilonPolicy::Auto => {
            let rep = four_point_delta(&qb.ball, &policy).map_err(stage_err("boundary"))?;
            let delta = *rep.theta_4pt.numer() as f64 / *rep.theta_4pt.denom() as f64;
            if delta > 0.0 {
                (1.0 / (6.0 * delta)).min(1.0)
            } else {
                1.0
            }
        }
    };
    let qlabel = |v: &CuspedVertex| v.label(&qctx.quotient);
    let approx = sphere_approx(&qb.ball, sr, epsilon, qlabel).map_err(stage_err("boundary"))?;
    let caps = |i: usize, _: &crate::group::GroupElement| qctx.t_c(i);
    let approx = mark_peripheral(&approx, &qb.ball, &qctx.quotient, caps);
    let chain = chain_metric(&approx.quasimetric());
    let mut web_approx: Vec<(usize, BoundaryApprox, Vec<Option<usize>>)> = Vec::new();
    let map = qctx.map();
    for (k, w) in webs.iter().enumerate() {
        let pb = partial_quotient_ball(&qctx, &w.centers, 2 * sr, true, DEFAULT_ORBIT_BUDGET).map_err(stage_err("boundary"))?;
        let conv = strong_convergence_check(&pb.ball, &qb.ball, sr, |v| project_vertex(&map, v), |v| v.label(&ctx))
            .map_err(stage_err("boundary"))?;
        run.report.tables.spiderweb[k].convergent = Some(conv.isometric);
        if sc.runs("gh") {
            let a = sphere_approx(&pb.ball, sr, epsilon, |v| v.label(&ctx)).map_err(stage_err("boundary"))?;
            let hint = a
                .points
                .iter()
                .map(|&i| {
                    let img = project_vertex(&map, &pb.ball.vertices[i]);
                    qb.ball.index_of(&img).and_then(|j| approx.points.binary_search(&j).ok())
                })
                .collect();
            web_approx.push((w.generation, a, hint));
        }
    }
    if sc.runs("boundary") {
        let lc = linear_connectedness(&chain.metric, 2000, sc.seed).map_err(stage_err("boundary"))?;
        let families: Vec<Value> = approx.marking.iter().map(|f| json!({ "center": f.center, "size": f.points.len() })).collect();
        run.push(
            "boundary",
            format!("exact sphere; chain pairs {}", if lc.exhaustive { "exhaustive" } else { "sampled" }),
            json!({
                "sphere_radius": sr,
                "points": approx.len(),
                "epsilon": epsilon,
                "kappa": chain.kappa,
                "diagonal": approx.diagonal,
                "peripheral_families": families,
                "density_delta": approx.density_delta.map(finite_or_text),
                "linear_connectedness": finite_or_text(lc.l_estimate),
                "convergent_from": run.report.tables.spiderweb.iter().find(|r| r.convergent == Some(true)).map(|r| r.generation),
            }),
        );
    }
    if sc.runs("topology") {
        let grid = sc.scales.points(&chain.metric);
        let prof = betti_profile(&chain.metric, &grid, DEFAULT_SIMPLEX_BUDGET).map_err(stage_err("topology"))?;
        run.report.tables.betti = prof
            .entries
            .iter()
            .map(|e| BettiRow { scale: e.scale, b0: e.betti[0], b1: e.betti[1], b2: e.betti[2] })
            .collect();
        run.push(
            "topology",
            "exact GF(2) ranks per grid scale",
            json!({ "plateau": prof.plateau, "fine_b0": prof.fine_b0(), "budget_stop": prof.budget_stop, "proxy": "homological" }),
        );
    }
    if sc.runs("gh") {
        for (generation, a, hint) in &web_approx {
            let ca = chain_metric(&a.quasimetric());
            let gh = weak_gh_estimate(&ca.metric, &chain.metric, sc.lambda, Some(hint), sc.seed).map_err(stage_err("gh"))?;
            run.report.tables.gh.push(GhRow { generation: *generation, points: a.len(), epsilon: gh.epsilon, lower_bound: gh.lower_bound });
        }
        run.push(
            "gh",
            format!("seeded greedy correspondence with local moves, seed {}", sc.seed),
            json!({ "lambda": sc.lambda, "series": run.report.tables.gh.len() }),
        );
    }
    run.report.tables.rho_hat = Some(chain.metric);
    Ok(run.report)
}

/// A ball on disk: vertex labels, weighted edges and the center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFile {
    pub source: String,
    pub center: usize,
    pub radius: u32,
    pub scale: u32,
    pub complete: bool,
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize, u32)>,
}

impl BallFile {
    pub fn from_ball<V>(source: &str, ball: &crate::graph::BallSnapshot<V>, label: impl Fn(&V) -> String) -> Self
    where
        V: Clone + Ord + std::hash::Hash + Eq + Send + Sync + std::fmt::Debug,
    {
        BallFile {
            source: source.to_string(),
            center: ball.center,
            radius: ball.radius,
            scale: ball.scale,
            complete: ball.complete,
            labels: ball.vertices.iter().map(label).collect(),
            edges: ball.edges(),
        }
    }

    pub fn snapshot(&self) -> Result<crate::graph::BallSnapshot<String>> {
        let n = self.labels.len();
        if self.center >= n || self.edges.iter().any(|&(a, b, _)| a >= n || b >= n) {
            return Err(LabError::Parse { key: "ball".into(), msg: "index out of range".into() });
        }
        let mut b = crate::graph::BallSnapshot::from_edges(self.labels.clone(), &self.edges, self.center, self.radius, self.scale);
        b.complete = self.complete;
        Ok(b)
    }
}

/// JSON has no infinity; non-finite values are written as text.
fn finite_or_text(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(format!("{x}"))
    }
}

/// Writes `report.json`, the CSV tables and the ball edge list into `dir`.
/// Timings are left out unless asked for, so that equal configs give equal
/// bytes.
pub fn export(report: &RunReport, dir: &Path, with_timings: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut r = report.clone();
    if !with_timings {
        r.timings.clear();
    }
    let path = dir.join("report.json");
    fs::write(&path, to_json(&r)?)?;
    written.push(path);
    let tables = &report.tables;
    written.push(write_csv(dir, "spiderweb.csv", &tables.spiderweb)?);
    written.push(write_csv(dir, "betti.csv", &tables.betti)?);
    written.push(write_csv(dir, "gh.csv", &tables.gh)?);
    if let Some(m) = &tables.rho_hat {
        let path = dir.join("rho_hat.csv");
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        for i in 0..m.n {
            w.write_record((0..m.n).map(|j| format!("{}", m.get(i, j)))).map_err(csv_err)?;
        }
        w.flush()?;
        written.push(path);
    }
    if !report.ball_edges.is_empty() {
        let path = dir.join("ball.edges");
        fs::write(&path, &report.ball_edges)?;
        written.push(path);
    }
    Ok(written)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Io(e.to_string())
}

fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_fixture_names_the_key() {
        match Scenario::parse("fixture = FIX9\n", None) {
            Err(LabError::Parse { key, .. }) => assert_eq!(key, "fixture"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn includes_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("base.cfg"), "fixture = FIX1\nradius = 3\n").unwrap();
        let s = Scenario::parse("include = base.cfg\nradius = 2 # smaller\nslopes = 8\n", Some(dir.path())).unwrap();
        assert_eq!((s.radius, s.slopes.clone()), (2, vec![8]));
        assert!(Scenario::parse("fixture = FIX1\ncolour = red\n", None).is_err());
    }

    #[test]
    fn minimal_scenario_has_two_stages() {
        let s = Scenario::parse("fixture = FIX1\nradius = 3\n", None).unwrap();
        let r = run_scenario(&s).unwrap();
        let names: Vec<&str> = r.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["build", "delta"]);
    }
}
