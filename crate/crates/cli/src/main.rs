use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use netopp::closed_form::{utilities, utilities_gpng};
use netopp::construct::{build, ConstructionSpec};
use netopp::equilibrium::{best_response_dynamics, default_max_moves, is_dfpne, Move};
use netopp::interventions::{friction_sweep, information_equilibrium_compare};
use netopp::sweep::{run_sweep, Axis, FixedParams, SweepGrid, SweepKind};
use netopp::transfer_sim::estimate_utilities;
use netopp::welfare::{optimal_degree_informed, optimal_welfare_png, poa_costly, poa_informed};
use netopp::{base_distribution, Error, ExogenousDistribution, ModelParams, Network, Result, TransferModel};

mod heatmap;

#[derive(Parser, Debug)]
#[command(name = "netopp", version, about = "Opportunity-transfer network formation toolkit")]
struct Cli {
    /// Worker threads for parallel work (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact expected utility per individual.
    Utility(UtilityArgs),
    /// Monte Carlo estimate of expected utilities.
    Simulate(SimulateArgs),
    /// Check whether a network is a pairwise equilibrium.
    CheckEq(CheckArgs),
    /// Search for an equilibrium by best-response dynamics.
    FindEq(FindArgs),
    /// Build a special network.
    Construct(ConstructArgs),
    /// Parameter sweeps.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Optimal welfare and price of anarchy at one parameter point.
    Optimal(OptimalArgs),
    /// Equilibrium welfare with and without information.
    CompareInfo(CompareArgs),
}

#[derive(Args, Debug)]
struct ParamArgs {
    /// JSON file {"q", "p", "gamma", "model"}.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    Uninformed,
    Informed,
}

impl From<ModelArg> for TransferModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Uninformed => TransferModel::Uninformed,
            ModelArg::Informed => TransferModel::Informed,
        }
    }
}

impl ParamArgs {
    fn resolve(&self) -> Result<ModelParams> {
        let mut params = match &self.params {
            Some(path) => serde_json::from_str::<ModelParams>(&read(path)?)?,
            None => ModelParams::new(f64::NAN, f64::NAN, 0.0),
        };
        if let Some(q) = self.q {
            params.q = q;
        }
        if let Some(p) = self.p {
            params.p = p;
        }
        if let Some(g) = self.gamma {
            params.gamma = g;
        }
        if let Some(m) = self.model {
            params.model = m.into();
        }
        if let Some(w) = params.validate()? {
            log::warn!("{w}");
        }
        Ok(params)
    }
}

#[derive(Args, Debug)]
struct UtilityArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Per-individual pmfs as a JSON array of rows; overrides the base law.
    #[arg(long)]
    dists: Option<PathBuf>,
    #[arg(long)]
    node: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    dists: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    rounds: u64,
    /// Defaults to $NETOPP_SEED, then 0.
    #[arg(long, env = "NETOPP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FindArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, env = "NETOPP_SEED", default_value_t = 0)]
    seed: u64,
    /// Defaults to 10 n^2.
    #[arg(long)]
    max_moves: Option<usize>,
    /// Graph JSON destination (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Move trace CSV destination.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    Empty,
    Matching,
    Complete,
    Regular,
    Girth5Regular,
    TwoComponent,
    Path,
    Cycle,
    Star,
}

#[derive(Args, Debug)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    n: usize,
    /// Degree (regular kinds) or first-part degree (two-component).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, env = "NETOPP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum SweepCommand {
    /// Price of anarchy over a grid.
    Poa(PoaSweepArgs),
    /// Worst-case equilibrium Gini over a grid.
    Gini(GridArgs),
    /// Worst-case regular-equilibrium welfare against the edge cost.
    Friction(FrictionArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RegimeArg {
    Frictionless,
    Costly,
    Informed,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Axes as name=start:stop:step, comma separated (names q, p, gamma).
    #[arg(long)]
    grid: String,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Set q = 1 - p when q is not an axis.
    #[arg(long)]
    q_complement: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    png: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    scale: u32,
}

#[derive(Args, Debug)]
struct PoaSweepArgs {
    #[arg(long, value_enum)]
    regime: RegimeArg,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct FrictionArgs {
    #[arg(long)]
    q: f64,
    #[arg(long)]
    p: f64,
    /// start:stop:step
    #[arg(long)]
    gamma: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimalArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1000)]
    n: usize,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_graph(path: &Path) -> Result<Network> {
    Ok(serde_json::from_str(&read(path)?)?)
}

fn load_dists(path: &Option<PathBuf>, params: &ModelParams, n: usize) -> Result<ExogenousDistribution> {
    match path {
        Some(p) => {
            let rows: Vec<Vec<f64>> = serde_json::from_str(&read(p)?)?;
            let d = ExogenousDistribution::from_rows(rows)?;
            if d.len() != n {
                return Err(Error::Precondition(format!("{} distribution rows for {n} individuals", d.len())));
            }
            Ok(d)
        }
        None => base_distribution(params, n),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Build time stamp for sweep metadata, taken from `SOURCE_DATE_EPOCH` so
/// that output stays reproducible.
fn timestamp() -> String {
    std::env::var("SOURCE_DATE_EPOCH").unwrap_or_else(|_| "unset".into())
}

fn utility_cmd(args: &UtilityArgs) -> Result<()> {
    let net = load_graph(&args.graph)?;
    let params = args.params.resolve()?;
    let u = match &args.dists {
        Some(_) => utilities_gpng(&net, &load_dists(&args.dists, &params, net.n())?, params.gamma)?,
        None => utilities(&net, &params)?,
    };
    let mut out = String::from("node,degree,utility\n");
    let nodes: Vec<usize> = match args.node {
        Some(i) if i >= net.n() => return Err(Error::NodeOutOfRange { node: i, n: net.n() }),
        Some(i) => vec![i],
        None => (0..net.n()).collect(),
    };
    for i in nodes {
        let _ = writeln!(out, "{i},{},{}", net.degree(i), u.0[i]);
    }
    let _ = writeln!(out, "# welfare={}", u.welfare());
    emit(&args.out, &out)
}

fn simulate_cmd(args: &SimulateArgs) -> Result<()> {
    let net = load_graph(&args.graph)?;
    let params = args.params.resolve()?;
    let dists = load_dists(&args.dists, &params, net.n())?;
    let res = estimate_utilities(&net, &dists, params.gamma, params.model, args.rounds, args.seed)?;
    let mut out = format!("# model={}\n# rounds={}\n# seed={}\nnode,mean,stderr\n", params.model, res.rounds, res.seed);
    for (i, (m, se)) in res.mean_utility.iter().zip(&res.std_error).enumerate() {
        let _ = writeln!(out, "{i},{m},{se}");
    }
    let _ = writeln!(out, "# welfare={}", res.welfare());
    emit(&args.out, &out)
}

fn check_cmd(args: &CheckArgs) -> Result<()> {
    let net = load_graph(&args.graph)?;
    let params = args.params.resolve()?;
    emit(&args.out, &to_json(&is_dfpne(&net, &params)?)?)
}

fn find_cmd(args: &FindArgs) -> Result<()> {
    let params = args.params.resolve()?;
    let max_moves = args.max_moves.unwrap_or_else(|| default_max_moves(args.n));
    let res = best_response_dynamics(args.n, &params, args.seed, max_moves)?;
    let report = is_dfpne(&res.network, &params)?;
    if res.converged && !report.is_equilibrium {
        return Err(Error::InvariantBreach("dynamics converged to a non-equilibrium".into()));
    }
    if !res.converged {
        log::warn!("no equilibrium within {max_moves} moves");
    }
    if let Some(path) = &args.trace {
        let mut csv = String::from("step,kind,i,j,drop_i,drop_j,gain_i,gain_j\n");
        for (k, dev) in res.trace.iter().enumerate() {
            let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
            let row = match &dev.kind {
                Move::Sever { by, other } => format!("sever,{by},{other},,"),
                Move::PairAdd { i, j, drop_i, drop_j } => format!("pair-add,{i},{j},{},{}", join(drop_i), join(drop_j)),
            };
            let _ = writeln!(csv, "{k},{row},{},{}", dev.gain_i, dev.gain_j);
        }
        fs::write(path, csv)?;
    }
    eprintln!("converged={} moves={}", res.converged, res.trace.len());
    emit(&args.out, &to_json(&res.network)?)
}

fn construct_cmd(args: &ConstructArgs) -> Result<()> {
    let n = args.n;
    let need = |v: Option<usize>, name: &str| v.ok_or_else(|| Error::InvalidParams(format!("--{name} is required")));
    let spec = match args.kind {
        KindArg::Empty => ConstructionSpec::Empty { n },
        KindArg::Matching => ConstructionSpec::Matching { n },
        KindArg::Complete => ConstructionSpec::Complete { n },
        KindArg::Regular => ConstructionSpec::Regular { n, d: need(args.d, "d")? },
        KindArg::Girth5Regular => ConstructionSpec::Girth5Regular { n, d: need(args.d, "d")?, seed: args.seed },
        KindArg::TwoComponent => ConstructionSpec::TwoComponent {
            n,
            d1: need(args.d, "d")?,
            d2: need(args.d2, "d2")?,
            lambda: args.lambda.ok_or_else(|| Error::InvalidParams("--lambda is required".into()))?,
        },
        KindArg::Path => ConstructionSpec::Path { n },
        KindArg::Cycle => ConstructionSpec::Cycle { n },
        KindArg::Star => ConstructionSpec::Star { n },
    };
    emit(&args.out, &to_json(&build(&spec)?)?)
}

fn write_grid(grid: &mut SweepGrid, out: &Option<PathBuf>, png: &Option<PathBuf>, scale: u32) -> Result<()> {
    grid.metadata.insert("timestamp".into(), timestamp());
    emit(out, &grid.to_csv())?;
    if let Some(path) = png {
        heatmap::emit_heatmap(grid, path, scale)?;
    }
    Ok(())
}

fn grid_sweep(kind: SweepKind, args: &GridArgs) -> Result<()> {
    let axes = Axis::parse_list(&args.grid)?;
    let fixed = FixedParams { q: args.q, p: args.p, gamma: args.gamma, q_complement: args.q_complement };
    let mut grid = run_sweep(kind, axes, fixed)?;
    write_grid(&mut grid, &args.out, &args.png, args.scale)
}

fn friction_cmd(args: &FrictionArgs) -> Result<()> {
    let axis: Axis = format!("gamma={}", args.gamma).parse()?;
    let fixed = FixedParams { q: Some(args.q), p: Some(args.p), ..FixedParams::default() };
    let curve = friction_sweep(args.q, args.p, axis.start, axis.stop, axis.step)?;
    let mut grid = run_sweep(SweepKind::Friction, vec![axis], fixed)?;
    let transitions: Vec<String> =
        curve.transitions.iter().map(|t| format!("{}:{}>{}", t.gamma, t.from_d, t.to_d)).collect();
    grid.metadata.insert("transitions".into(), transitions.join(";"));
    write_grid(&mut grid, &args.out, &None, 1)
}

#[derive(Serialize)]
struct OptimalReport {
    q: f64,
    p: f64,
    gamma: f64,
    model: TransferModel,
    n: usize,
    optimal_per_capita: f64,
    optimal_degree: usize,
    odd_correction: f64,
    poa: netopp::welfare::PoABounds,
}

fn optimal_cmd(args: &OptimalArgs) -> Result<()> {
    let ModelParams { q, p, gamma, model } = args.params.resolve()?;
    let n = args.n;
    let report = match model {
        TransferModel::Uninformed => {
            let o = optimal_welfare_png(q, p, gamma, n)?;
            OptimalReport {
                q,
                p,
                gamma,
                model,
                n,
                optimal_per_capita: o.per_capita,
                optimal_degree: usize::from(o.matching),
                odd_correction: o.odd_correction,
                poa: poa_costly(q, p, gamma)?,
            }
        }
        TransferModel::Informed => {
            let (d, w) = optimal_degree_informed(q, p, gamma, n)?;
            OptimalReport {
                q,
                p,
                gamma,
                model,
                n,
                optimal_per_capita: w,
                optimal_degree: d,
                odd_correction: 0.0,
                poa: poa_informed(q, p, gamma, n)?,
            }
        }
    };
    print!("{}", to_json(&report)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::Precondition(e.to_string()))?;
    }
    match &cli.command {
        Command::Utility(a) => utility_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::CheckEq(a) => check_cmd(a),
        Command::FindEq(a) => find_cmd(a),
        Command::Construct(a) => construct_cmd(a),
        Command::Sweep(SweepCommand::Poa(a)) => {
            let kind = match a.regime {
                RegimeArg::Frictionless => SweepKind::PoaFrictionless,
                RegimeArg::Costly => SweepKind::PoaCostly,
                RegimeArg::Informed => SweepKind::PoaInformed,
            };
            grid_sweep(kind, &a.grid)
        }
        Command::Sweep(SweepCommand::Gini(a)) => grid_sweep(SweepKind::Gini, a),
        Command::Sweep(SweepCommand::Friction(a)) => friction_cmd(a),
        Command::Optimal(a) => optimal_cmd(a),
        Command::CompareInfo(a) => emit(&a.out, &to_json(&information_equilibrium_compare(a.p)?)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.strip_prefix("error: ").unwrap_or(first));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            match e {
                Error::InvariantBreach(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
