use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use fillinglab::boundary::{chain_metric, sphere_approx, weak_gh_estimate, BoundaryApprox, ChainMetric};
use fillinglab::cusped::{CuspedSpace, CuspedVertex};
use fillinglab::group::{FillingSpec, GroupContext};
use fillinglab::hyperbolicity::{four_point_delta, thin_triangle_delta, SamplePolicy};
use fillinglab::quotient::{
    ball_embedding_check, greendlinger_sequence, quotient_cusped_ball, QuotientContextFull, DEFAULT_CERTIFY_RADIUS,
};
use fillinglab::scenario::{export, run_scenario, to_json, BallFile, RunReport, ScaleGrid, Scenario};
use fillinglab::spiderweb::{exhaust, verify_axioms, Profile};
use fillinglab::topology::{betti_profile, DEFAULT_SIMPLEX_BUDGET};
use fillinglab::{LabError, Result};

#[derive(Parser)]
#[command(name = "fillinglab", version, about = "Cusped spaces, Dehn fillings and boundary probes")]
struct Cli {
    /// seed for every sampled or searched quantity
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// multiplier profile for spiderwebs: desk or paper
    #[arg(long, global = true)]
    profile: Option<String>,
    /// exhaustive scans instead of seeded sampling
    #[arg(long, global = true)]
    exhaustive: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct GroupArgs {
    /// FIX1, FIX2, FIX3 or TREE
    #[arg(long, default_value = "FIX1")]
    fixture: String,
    /// one slope per peripheral factor, comma separated
    #[arg(long, value_delimiter = ',')]
    slopes: Vec<i64>,
    #[arg(long, default_value_t = DEFAULT_CERTIFY_RADIUS)]
    certify_radius: u64,
}

impl GroupArgs {
    fn context(&self) -> Result<GroupContext> {
        GroupContext::fixture(&self.fixture)
    }

    fn quotient(&self) -> Result<QuotientContextFull> {
        let ctx = self.context()?;
        if self.slopes.is_empty() {
            return Err(LabError::Parse { key: "slopes".into(), msg: "a filling needs --slopes".into() });
        }
        QuotientContextFull::new(&ctx, &FillingSpec::slopes(&ctx, &self.slopes)?, self.certify_radius)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Ball in the cusped space, or in the truncated quotient with --slopes
    Build {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long, default_value_t = 4)]
        radius: u32,
        /// with --slopes: leave horoballs of the quotient untruncated
        #[arg(long)]
        untruncated: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// also write a whitespace edge list
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Four-point and thin-triangle constants of a ball
    Delta {
        #[arg(long)]
        ball: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncation depth of every filled peripheral
    Truncate {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quotient ball and ball-embedding check
    Fill {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long, default_value_t = 2)]
        radius: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shortening sequence of a kernel element
    Greendlinger {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 1)]
        depth: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spiderweb generations inside a ball
    Spiderweb {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long, default_value_t = 8)]
        radius: u32,
        #[arg(long, default_value_t = 6)]
        generations: usize,
        #[arg(long, default_value_t = 2)]
        margin: u32,
        #[arg(long, default_value_t = 1)]
        theta: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sphere approximation of the boundary of a ball's space
    Boundary {
        #[arg(long)]
        ball: PathBuf,
        #[arg(long, default_value_t = 3)]
        sphere_radius: u32,
        /// a number or `auto`
        #[arg(long, default_value = "auto")]
        epsilon: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV of the chain metric
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Weak Gromov-Hausdorff estimate between two boundary files
    Gh {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        lambda: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Betti numbers of Rips complexes over a boundary file
    Topology {
        #[arg(long)]
        bdry: PathBuf,
        /// `lo:hi:step` or `auto`
        #[arg(long, default_value = "auto")]
        scales: String,
        #[arg(long, default_value_t = DEFAULT_SIMPLEX_BUDGET)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario config and export its report
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// keep wall-clock timings in report.json
        #[arg(long)]
        timings: bool,
    },
    /// Re-export a report.json into JSON and CSV tables
    Export {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize, Deserialize)]
struct BoundaryFile {
    approx: BoundaryApprox,
    chain: ChainMetric,
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn policy(cli: &Cli) -> SamplePolicy {
    if cli.exhaustive {
        SamplePolicy::Exhaustive
    } else {
        SamplePolicy::Auto { threshold: 400, samples: 200_000, seed: cli.seed }
    }
}

fn rational(r: &num_rational::Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Build { group, radius, untruncated, out, edges } => {
            let (file, text_edges) = if group.slopes.is_empty() {
                let ctx = group.context()?;
                let ball = CuspedSpace::combinatorial(ctx.clone()).ball(CuspedVertex::identity(), *radius)?;
                let mut buf = Vec::new();
                ball.write_edge_list(&mut buf, |v| v.label(&ctx))?;
                (BallFile::from_ball(&ctx.name, &ball, |v| v.label(&ctx)), buf)
            } else {
                let q = group.quotient()?;
                let qb = quotient_cusped_ball(&q, *radius, !untruncated)?;
                let mut buf = Vec::new();
                qb.ball.write_edge_list(&mut buf, |v| v.label(&q.quotient))?;
                (BallFile::from_ball(&q.quotient.name, &qb.ball, |v| v.label(&q.quotient)), buf)
            };
            if let Some(p) = edges {
                fs::write(p, text_edges)?;
            }
            emit(out, &to_json(&file)?)
        }
        Cmd::Delta { ball, out } => {
            let b = read_json::<BallFile>(ball)?.snapshot()?;
            let p = policy(cli);
            let four = four_point_delta(&b, &p)?;
            let thin = thin_triangle_delta(&b, &p)?;
            emit(out, &to_json(&serde_json::json!({ "four_point": four, "thin_triangle": thin }))?)
        }
        Cmd::Truncate { group, out } => emit(out, &to_json(&group.quotient()?.truncation)?),
        Cmd::Fill { group, radius, out } => {
            let q = group.quotient()?;
            let qb = quotient_cusped_ball(&q, 2 * radius, true)?;
            let emb = ball_embedding_check(&q, *radius)?;
            emit(out, &to_json(&serde_json::json!({ "quotient": q.quotient.name, "truncated_ball": qb.ball.summary(), "embedding": emb }))?)
        }
        Cmd::Greendlinger { group, word, depth, out } => {
            let q = group.quotient()?;
            let g = q.base.element(word)?;
            emit(out, &to_json(&greendlinger_sequence(&q, &g, *depth)?)?)
        }
        Cmd::Spiderweb { group, radius, generations, margin, theta, out } => {
            let q = group.quotient()?;
            let profile = Profile::parse(cli.profile.as_deref().unwrap_or("desk"), *theta)?;
            let ball = CuspedSpace::combinatorial(q.base.clone()).ball(CuspedVertex::identity(), *radius)?;
            let ex = exhaust(&q, &ball, &profile, *generations, *margin)?;
            let mut rows = Vec::new();
            for w in &ex.webs {
                let ax = verify_axioms(w, &q, &ball)?;
                let centers: Vec<String> = w.centers.iter().map(|c| c.label(&q.base)).collect();
                rows.push(serde_json::json!({
                    "generation": w.generation,
                    "branch": w.branch,
                    "hull": w.hull.len(),
                    "centers": centers,
                    "axioms": ax,
                }));
            }
            let doc = serde_json::json!({
                "profile": profile,
                "covered_at": ex.covered_at,
                "uncovered": ex.uncovered,
                "nesting": ex.nesting,
                "stop": ex.stop,
                "generations": rows,
            });
            emit(out, &to_json(&doc)?)
        }
        Cmd::Boundary { ball, sphere_radius, epsilon, out, csv } => {
            let file: BallFile = read_json(ball)?;
            let b = file.snapshot()?;
            let eps = if epsilon == "auto" {
                let d = rational(&four_point_delta(&b, &policy(cli))?.theta_4pt);
                if d > 0.0 {
                    (1.0 / (6.0 * d)).min(1.0)
                } else {
                    1.0
                }
            } else {
                epsilon.parse().map_err(|_| LabError::Parse { key: "epsilon".into(), msg: format!("bad value `{epsilon}`") })?
            };
            let mut approx = sphere_approx(&b, *sphere_radius, eps, |v| v.clone())?;
            approx.source = file.source.clone();
            let chain = chain_metric(&approx.quasimetric());
            approx.params.kappa = Some(chain.kappa);
            if let Some(p) = csv {
                let mut w = ::csv::Writer::from_path(p).map_err(|e| LabError::Io(e.to_string()))?;
                for i in 0..chain.metric.n {
                    w.write_record((0..chain.metric.n).map(|j| chain.metric.get(i, j).to_string()))
                        .map_err(|e| LabError::Io(e.to_string()))?;
                }
                w.flush()?;
            }
            emit(out, &to_json(&BoundaryFile { approx, chain })?)
        }
        Cmd::Gh { a, b, lambda, out } => {
            let a: BoundaryFile = read_json(a)?;
            let b: BoundaryFile = read_json(b)?;
            emit(out, &to_json(&weak_gh_estimate(&a.chain.metric, &b.chain.metric, *lambda, None, cli.seed)?)?)
        }
        Cmd::Topology { bdry, scales, budget, out } => {
            let f: BoundaryFile = read_json(bdry)?;
            let grid = ScaleGrid::parse(scales)?.points(&f.chain.metric);
            let prof = betti_profile(&f.chain.metric, &grid, *budget)?;
            let mut text = String::from("scale,b0,b1,b2\n");
            for e in &prof.entries {
                text.push_str(&format!("{},{},{},{}\n", e.scale, e.betti[0], e.betti[1], e.betti[2]));
            }
            if let Some(p) = &prof.plateau {
                eprintln!("plateau {:?} on [{}, {}] over {} scales", p.betti, p.from, p.to, p.steps);
            }
            emit(out, &text)
        }
        Cmd::Run { config, out, timings } => {
            let mut sc = Scenario::load(config)?;
            sc.seed = if cli.seed != 0 { cli.seed } else { sc.seed };
            sc.exhaustive |= cli.exhaustive;
            if let Some(p) = &cli.profile {
                Profile::parse(p, sc.theta)?;
                sc.profile = p.clone();
            }
            let report = run_scenario(&sc)?;
            for p in export(&report, out, *timings)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Cmd::Export { report, out } => {
            let r: RunReport = read_json(report)?;
            for p in export(&r, out, false)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
