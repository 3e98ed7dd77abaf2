use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use liftchroma::asymptotics::{ey2_asym, ey_asym, sscm_identity_check, sscm_series};
use liftchroma::coloring::{chromatic_bounds, count_proper_colorings_with, count_strongly_equitable_with, Budget, BUDGET_ENV_VAR, DEFAULT_COUNT_CAP};
use liftchroma::experiments::{run_campaign, CampaignConfig};
use liftchroma::lattice_tools::{build_gamma_a, build_gamma_b, ey2_problem, ey_problem, kernel_basis, incidence_unsigned, laplace_estimate, tau_maximal_forests};
use liftchroma::lift::{expand, sample_lift, Lift, LiftRecord};
use liftchroma::moments_exact::{expected_x_exact, expected_y2_exact, expected_y_exact, rational_to_string};
use liftchroma::stochastic_opt::{verify_max_uniform, Objective};
use liftchroma::thresholds::{classify, ell_threshold, k_d, u_threshold};
use liftchroma::BaseGraph;

#[derive(Parser)]
#[command(name = "liftchroma", version, about = "Chromatic number of random lifts of regular graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GraphArg {
    /// Base graph: Km, petersen, or an edge-list file ("V E" then one edge per line).
    #[arg(short, long, default_value = "K4")]
    graph: String,
}

impl GraphArg {
    fn load(&self) -> Result<BaseGraph> {
        BaseGraph::from_spec(&self.graph).with_context(|| format!("loading base graph {:?}", self.graph))
    }
}

#[derive(Args)]
struct LiftArg {
    #[command(flatten)]
    graph: GraphArg,
    /// Fiber size.
    #[arg(short, long, required_unless_present = "lift")]
    n: Option<usize>,
    #[arg(short, long, default_value_t = 0)]
    seed: u64,
    /// Read the lift from a JSON file written by `sample` instead of sampling.
    #[arg(long)]
    lift: Option<PathBuf>,
    /// Search-node budget; LIFTCHROMA_BUDGET wins when set.
    #[arg(long)]
    budget: Option<u64>,
}

impl LiftArg {
    fn budget(&self) -> Budget {
        match std::env::var(BUDGET_ENV_VAR).ok().and_then(|s| s.trim().parse().ok()) {
            Some(b) => Budget(b),
            None => self.budget.map(Budget).unwrap_or_default(),
        }
    }

    fn build<'g>(&self, g: &'g BaseGraph) -> Result<Lift<'g>> {
        match &self.lift {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let rec: LiftRecord = serde_json::from_str(&text)?;
                Ok(Lift::from_record(g, rec)?)
            }
            None => Ok(sample_lift(g, self.n.expect("clap enforces n or --lift"), self.seed)?),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Moment {
    X,
    Y,
    Y2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    /// First-moment constraint graph (per base edge, K_k,k minus a matching).
    First,
    /// Second-moment constraint graph (per base vertex, K_k,k).
    Second,
}

#[derive(Subcommand)]
enum Command {
    /// u_k, l_k and k_d for a range of k.
    Thresholds {
        #[arg(long, default_value_t = 3)]
        k_min: usize,
        #[arg(long, default_value_t = 10)]
        k_max: usize,
    },
    /// Which chromatic-number window a degree falls into.
    Classify {
        #[arg(short, long)]
        d: usize,
    },
    /// Sample a random n-lift and print its matchings as JSON.
    Sample {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(short, long)]
        n: usize,
        #[arg(short, long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Chromatic number (or a bracket when the budget runs out) of a lift.
    Chromatic {
        #[command(flatten)]
        lift: LiftArg,
    },
    /// Count proper or strongly equitable k-colourings of a lift.
    CountColorings {
        #[command(flatten)]
        lift: LiftArg,
        #[arg(short, long)]
        k: usize,
        #[arg(long)]
        equitable: bool,
        #[arg(long, default_value_t = DEFAULT_COUNT_CAP)]
        cap: usize,
    },
    /// Exact E[X], E[Y] or E[Y^2] over all n-lifts, as a rational.
    MomentsExact {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(short, long)]
        n: usize,
        #[arg(short, long)]
        k: usize,
        #[arg(short, long, value_enum, default_value = "y")]
        moment: Moment,
    },
    /// Compare log(C2/C1^2) with the series of lambda_j delta_j^2.
    Sscm {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(short, long)]
        k: usize,
        /// Fixed number of series terms; otherwise terms grow until the tail is below --tol.
        #[arg(long)]
        terms: Option<usize>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Multi-start ascent of an objective, compared with its value at the uniform point.
    OptVerify {
        /// f, F (window), F-full, or rect.
        #[arg(long, default_value = "F")]
        objective: String,
        #[command(flatten)]
        graph: GraphArg,
        #[arg(short, long)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        starts: usize,
        #[arg(short, long, default_value_t = 0)]
        seed: u64,
    },
    /// Maximal-forest count and kernel rank of a constraint graph.
    Tau {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(short, long)]
        k: usize,
        #[arg(long, value_enum, default_value = "first")]
        problem: Problem,
    },
    /// Laplace estimate of a lattice sum against the closed-form asymptotics.
    LaplaceCheck {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(short, long)]
        k: usize,
        #[arg(short, long)]
        n: usize,
        #[arg(long, value_enum, default_value = "first")]
        problem: Problem,
    },
    /// Run a Monte Carlo campaign from a JSON config file.
    Campaign {
        #[arg(short, long)]
        config: PathBuf,
        /// Overrides the output prefix in the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn print(v: Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Thresholds { k_min, k_max } => {
            if k_min < 3 || k_max < k_min {
                bail!("need 3 <= k_min <= k_max");
            }
            let rows = (k_min..=k_max)
                .map(|k| Ok(json!({ "k": k, "u_k": u_threshold(k)?, "l_k": ell_threshold(k)? })))
                .collect::<Result<Vec<_>>>()?;
            let kd: Vec<Value> = (3..=20).map(|d| json!({ "d": d, "k_d": k_d(d) })).collect();
            print(json!({ "thresholds": rows, "k_d": kd }))
        }
        Command::Classify { d } => print(serde_json::to_value(classify(d)?)?),
        Command::Sample { graph, n, seed, out } => {
            let g = graph.load()?;
            let rec = sample_lift(&g, n, seed)?.to_record(Some(seed));
            let text = serde_json::to_string(&rec)?;
            match out {
                Some(path) => std::fs::write(path, text + "\n")?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::Chromatic { lift } => {
            let g = graph_of(&lift)?;
            let l = lift.build(&g)?;
            let bounds = chromatic_bounds(&expand(&l), lift.budget());
            print(json!({ "n": l.n(), "bounds": bounds, "chromatic_number": bounds.exact() }))
        }
        Command::CountColorings { lift, k, equitable, cap } => {
            let g = graph_of(&lift)?;
            let l = lift.build(&g)?;
            let count = if equitable {
                count_strongly_equitable_with(&l, k, cap, lift.budget())?
            } else {
                count_proper_colorings_with(&expand(&l), k, cap, lift.budget())?
            };
            print(json!({ "n": l.n(), "k": k, "equitable": equitable, "count": count.to_string() }))
        }
        Command::MomentsExact { graph, n, k, moment } => {
            let g = graph.load()?;
            let (name, value) = match moment {
                Moment::X => ("E[X]", expected_x_exact(&g, n, k)?),
                Moment::Y => ("E[Y]", expected_y_exact(&g, n, k)?),
                Moment::Y2 => ("E[Y^2]", expected_y2_exact(&g, n, k)?),
            };
            print(json!({ "moment": name, "n": n, "k": k, "exact": rational_to_string(&value), "approx": num_to_f64(&value) }))
        }
        Command::Sscm { graph, k, terms, tol } => {
            let g = graph.load()?;
            let check = match terms {
                Some(t) => sscm_identity_check(&g, k, t)?,
                None => sscm_series(&g, k, tol)?,
            };
            print(serde_json::to_value(check)?)
        }
        Command::OptVerify { objective, graph, k, starts, seed } => {
            let g = graph.load()?;
            let obj: Objective = objective.parse()?;
            print(serde_json::to_value(verify_max_uniform(obj, &g, k, starts, seed)?)?)
        }
        Command::Tau { graph, k, problem } => {
            let g = graph.load()?;
            let gamma = match problem {
                Problem::First => build_gamma_b(&g, k)?,
                Problem::Second => build_gamma_a(&g, k)?,
            };
            let r = kernel_basis(&incidence_unsigned(&gamma)).ncols();
            print(json!({
                "vertices": gamma.num_vertices(),
                "variables": gamma.num_edges(),
                "components": gamma.components().1,
                "kernel_dimension": r,
                "tau": tau_maximal_forests(&gamma).to_string(),
            }))
        }
        Command::LaplaceCheck { graph, k, n, problem } => {
            let g = graph.load()?;
            let (est, closed) = match problem {
                Problem::First => (laplace_estimate(&ey_problem(&g, k)?, n)?, ey_asym(&g, n, k)?),
                Problem::Second => (laplace_estimate(&ey2_problem(&g, k)?, n)?, ey2_asym(&g, n, k)?),
            };
            let ratio = est.estimate.ratio(&closed);
            print(json!({ "laplace": est, "closed_form": closed, "ratio": ratio }))
        }
        Command::Campaign { config, out } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = CampaignConfig::from_json(&text)?;
            if out.is_some() {
                cfg.output = out;
            }
            let result = run_campaign(&cfg)?;
            for r in &result.records {
                eprintln!("{} n={} mean={} stderr={} samples={} censored={}", r.statistic, r.n, r.mean, r.stderr, r.samples, r.censored);
            }
            print(json!({
                "config_sha256": result.config_hash,
                "csv": result.csv_path,
                "jsonl": result.jsonl_path,
                "records": result.records,
            }))
        }
    }
}

fn graph_of(lift: &LiftArg) -> Result<BaseGraph> {
    lift.graph.load()
}

fn num_to_f64<T: ToPrimitive>(x: &T) -> Option<f64> {
    x.to_f64()
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
