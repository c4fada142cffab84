//! Command line for multi-port network connection evaluation: connect
//! networks by a scheme file, update a cached connection after a subsystem
//! change, run desk-scale benchmarks, and generate/solve/glue
//! transmission-line graphs.
//!
//! Exit codes: 0 on success, 2 on parse/usage errors, 3 on numerical
//! failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use multiport::bench::{
    run_epsilon_sweep, run_methods_compare, run_update_compare, BenchConfig, BenchReport,
    Experiment,
};
use multiport::cascade::{
    evaluate, iterative_cascade, plan_reduction, CascadeCache, ReductionObjective,
};
use multiport::connection::SchemeDescription;
use multiport::error::Error;
use multiport::graph::{glue_graphs, graph_scattering, random_graph, Graph};
use multiport::network::{matrix_from_json, matrix_to_json, NetworkDescription, PowerWaveVector};
use multiport::update::{update_subsystem, SubsystemUpdate};
use multiport::waves::{connected_waves, wave_maps};

#[derive(Parser)]
#[command(name = "multiport", version, about = "Closed-form evaluation of multi-port network connections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Connect networks according to a scheme file
    Connect(ConnectArgs),
    /// Update a cached connection after one subsystem changed
    Update(UpdateArgs),
    /// Run a benchmark experiment and write a CSV report
    Bench(BenchArgs),
    /// Generate, solve or glue transmission-line graphs
    Graph(GraphArgs),
}

#[derive(Args)]
struct ConnectArgs {
    /// network files as NAME=PATH (repeatable)
    #[arg(long = "net", value_name = "NAME=PATH", required = true)]
    nets: Vec<String>,
    /// scheme JSON file
    #[arg(long)]
    scheme: PathBuf,
    /// evaluation method
    #[arg(long, default_value = "global", value_parser = ["global", "reduced", "iterative"])]
    method: String,
    /// also recover psi/phi at the connected ports for this a_N JSON file
    #[arg(long = "recover-waves", value_name = "A_N_JSON")]
    recover_waves: Option<PathBuf>,
    /// persist the cascade cache for later `update` invocations
    #[arg(long = "save-cache", value_name = "PATH")]
    save_cache: Option<PathBuf>,
    /// representation of the printed result matrix
    #[arg(long = "output-rep", default_value = "S", value_parser = ["S", "Z", "Y"])]
    output_rep: String,
    /// reference impedance for the output conversion
    #[arg(long, default_value_t = 50.0)]
    z0: f64,
    /// output file (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// output format
    #[arg(long, default_value = "json", value_parser = ["json"])]
    format: String,
}

#[derive(Args)]
struct UpdateArgs {
    /// cache file written by `connect --save-cache`
    #[arg(long)]
    cache: PathBuf,
    /// name of the subsystem that changed
    #[arg(long)]
    system: String,
    /// JSON file with the new scattering matrix
    #[arg(long)]
    matrix: PathBuf,
    /// persist the refreshed cache
    #[arg(long = "save-cache", value_name = "PATH")]
    save_cache: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// which experiment to run
    #[arg(value_parser = ["methods", "update", "epsilon"])]
    experiment: String,
    /// comma-separated bus counts
    #[arg(long = "n-bus", value_delimiter = ',')]
    n_bus: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// wavevector as re,im
    #[arg(long, default_value = "3,0.05")]
    k: String,
    /// trials per point (auto schedule if omitted)
    #[arg(long)]
    trials: Option<usize>,
    /// timing repetitions per measurement
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// epsilon grid bounds for the sweep, as lo,hi,points
    #[arg(long, default_value = "1e-12,1e-2,21")]
    eps: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Args)]
struct GraphArgs {
    #[command(subcommand)]
    action: GraphAction,
}

#[derive(Subcommand)]
enum GraphAction {
    /// Generate a random graph
    Gen {
        #[arg(long)]
        ports: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "3,0.05")]
        k: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scattering matrix of a graph file
    Scatter {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "3,0.05")]
        k: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Glue two graphs over paired external nodes
    Glue {
        #[arg(long)]
        first: PathBuf,
        #[arg(long)]
        second: PathBuf,
        /// pairs as a:b,c:d over node ids
        #[arg(long)]
        pairs: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Parse(String),
    Numerical(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularMatrix { .. }
            | Error::SingularInteraction { .. }
            | Error::DeltaLikeSingularity
            | Error::SingularUpdate
            | Error::ResonantBond { .. }
            | Error::ResonantGraph
            | Error::GenerationFailed { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(format!("JSON: {e}"))
    }
}

fn parse_complex(text: &str) -> Result<Complex64, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Parse(format!("expected re,im but got `{text}`")));
    }
    let re: f64 = parts[0].trim().parse().map_err(|e| CliError::Parse(format!("{e}")))?;
    let im: f64 = parts[1].trim().parse().map_err(|e| CliError::Parse(format!("{e}")))?;
    Ok(Complex64::new(re, im))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Cache file layout: the cascade cache plus the scheme's member names so
/// `update --system NAME` can resolve its target.
#[derive(Serialize, Deserialize)]
struct CacheFile {
    names: Vec<String>,
    cache: CascadeCache,
}

fn run_connect(args: &ConnectArgs) -> Result<(), CliError> {
    let mut named = Vec::new();
    for spec in &args.nets {
        let (name, path) = spec.split_once('=').ok_or_else(|| {
            CliError::Parse(format!("--net expects NAME=PATH, got `{spec}`"))
        })?;
        let desc: NetworkDescription = read_json(Path::new(path))?;
        let sys = multiport::bench::to_scattering(&desc.to_system()?)?;
        named.push((name.to_string(), sys));
    }
    let scheme_desc: SchemeDescription = read_json(&args.scheme)?;
    let scheme = scheme_desc.into_scheme(|name| {
        named
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.clone())
            .ok_or_else(|| Error::InvalidScheme {
                context: format!("no --net provides system `{name}`"),
            })
    })?;

    let (matrix, cache) = match args.method.as_str() {
        "global" => {
            let plan = plan_reduction(&scheme, ReductionObjective::None);
            evaluate(&scheme, &plan)?
        }
        "reduced" => {
            let plan = if scheme.embedded.is_empty() {
                plan_reduction(&scheme, ReductionObjective::MaxReduction)
            } else {
                multiport::cascade::ReductionPlan::from_embedded(&scheme, &scheme.embedded)?
            };
            evaluate(&scheme, &plan)?
        }
        "iterative" => (iterative_cascade(&scheme)?, None),
        _ => unreachable!("clap validates the method"),
    };

    let reference = vec![Complex64::new(args.z0, 0.0); matrix.rows()];
    let printed = match args.output_rep.as_str() {
        "S" => matrix.clone(),
        "Z" => multiport::network::z_from_s(&matrix, &reference)?,
        "Y" => multiport::network::y_from_s(&matrix, &reference)?,
        _ => unreachable!("clap validates the representation"),
    };
    let mut output = serde_json::json!({
        "method": args.method,
        "representation": args.output_rep,
        "ports": printed.rows(),
        "matrix": matrix_to_json(&printed),
    });

    if let Some(a_n_path) = &args.recover_waves {
        let cache = cache.as_ref().ok_or_else(|| {
            CliError::Parse("wave recovery needs a cache-producing method (global or a reduced plan without free connection ports)".into())
        })?;
        let entries: Vec<[f64; 2]> = read_json(a_n_path)?;
        let a_n = PowerWaveVector(entries.iter().map(|&[re, im]| Complex64::new(re, im)).collect());
        let (a_c, b_c) = connected_waves(cache, &a_n)?;
        let maps = wave_maps(cache)?;
        let to_json = |v: &PowerWaveVector| {
            serde_json::json!(v.0.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
        };
        let psi = PowerWaveVector(
            a_c.0.iter().zip(&b_c.0).map(|(&a, &b)| a + b).collect(),
        );
        let phi = PowerWaveVector(
            a_c.0.iter().zip(&b_c.0).map(|(&a, &b)| a - b).collect(),
        );
        output["waves"] = serde_json::json!({
            "a_c": to_json(&a_c),
            "b_c": to_json(&b_c),
            "psi_c": to_json(&psi),
            "phi_c": to_json(&phi),
            "pairs": maps.pairs.iter().map(|p| serde_json::json!({
                "first": p.first, "second": p.second,
            })).collect::<Vec<_>>(),
        });
    }

    if let Some(cache_path) = &args.save_cache {
        let cache = cache.ok_or_else(|| {
            CliError::Parse("no cache to save: the chosen method/plan does not produce one".into())
        })?;
        let file = CacheFile {
            names: scheme.names.clone(),
            cache,
        };
        std::fs::write(cache_path, serde_json::to_string(&file)?)?;
    }

    emit(&args.out, &serde_json::to_string_pretty(&output)?)
}

fn run_update(args: &UpdateArgs) -> Result<(), CliError> {
    let file: CacheFile = read_json(&args.cache)?;
    let index = file
        .names
        .iter()
        .position(|n| n == &args.system)
        .ok_or_else(|| CliError::Parse(format!("cache has no system `{}`", args.system)))?;
    let matrix_json: serde_json::Value = read_json(&args.matrix)?;
    let matrix = matrix_from_json(&matrix_json)?;
    let (updated, new_cache) = update_subsystem(
        &file.cache,
        &SubsystemUpdate {
            subsystem: index,
            matrix,
        },
    )?;
    if let Some(path) = &args.save_cache {
        let out = CacheFile {
            names: file.names.clone(),
            cache: new_cache,
        };
        std::fs::write(path, serde_json::to_string(&out)?)?;
    }
    let output = serde_json::json!({
        "method": "update",
        "system": args.system,
        "ports": updated.rows(),
        "matrix": matrix_to_json(&updated),
    });
    emit(&args.out, &serde_json::to_string_pretty(&output)?)
}

fn report_json(report: &BenchReport) -> serde_json::Value {
    serde_json::json!({
        "rows": report.rows.iter().map(|r| serde_json::json!({
            "experiment": r.experiment,
            "n_bus": r.n_bus,
            "method": r.method,
            "subsystem": r.subsystem,
            "median_time_s": r.median_time_s,
            "rel_std_err": r.rel_std_err,
            "trials": r.trials,
        })).collect::<Vec<_>>(),
        "eps_minima": report.eps_minima,
    })
}

fn run_bench(args: &BenchArgs) -> Result<(), CliError> {
    let experiment = match args.experiment.as_str() {
        "methods" => Experiment::MethodsCompare,
        "update" => Experiment::UpdateCompare,
        "epsilon" => Experiment::EpsilonSweep,
        _ => unreachable!(),
    };
    let mut cfg = BenchConfig::new(experiment);
    if let Some(values) = &args.n_bus {
        cfg.n_bus_values = values.clone();
    } else if experiment == Experiment::EpsilonSweep {
        cfg.n_bus_values = vec![2, 5];
    }
    cfg.seed = args.seed;
    cfg.k = parse_complex(&args.k)?;
    cfg.trials = args.trials;
    cfg.timing_reps = args.reps;
    let eps_parts: Vec<&str> = args.eps.split(',').collect();
    if eps_parts.len() == 3 {
        let lo: f64 = eps_parts[0].parse().map_err(|e| CliError::Parse(format!("{e}")))?;
        let hi: f64 = eps_parts[1].parse().map_err(|e| CliError::Parse(format!("{e}")))?;
        let points: usize = eps_parts[2].parse().map_err(|e| CliError::Parse(format!("{e}")))?;
        cfg.epsilon_grid = multiport::bench::log_spaced(lo, hi, points);
    } else {
        return Err(CliError::Parse("--eps expects lo,hi,points".into()));
    }

    let report = match experiment {
        Experiment::MethodsCompare => run_methods_compare(&cfg)?,
        Experiment::UpdateCompare => run_update_compare(&cfg)?,
        Experiment::EpsilonSweep => run_epsilon_sweep(&cfg)?,
    };
    for (n_bus, eps, err) in &report.eps_minima {
        eprintln!("n_bus {n_bus}: minimum error {err:.3e} at eps = {eps:.3e}");
    }
    let text = match args.format.as_str() {
        "csv" => report.to_csv(),
        "json" => serde_json::to_string_pretty(&report_json(&report))?,
        _ => unreachable!(),
    };
    emit(&args.out, &text)
}

fn run_graph(args: &GraphArgs) -> Result<(), CliError> {
    match &args.action {
        GraphAction::Gen { ports, density, seed, k, out } => {
            let k = parse_complex(k)?;
            let g = random_graph(*ports, *density, *seed, k)?;
            emit(out, &serde_json::to_string_pretty(&g)?)
        }
        GraphAction::Scatter { graph, k, out } => {
            let g: Graph = read_json(graph)?;
            let k = parse_complex(k)?;
            let sol = graph_scattering(&g, k)?;
            let output = serde_json::json!({
                "ports": g.port_count(),
                "matrix": matrix_to_json(&sol.s),
            });
            emit(out, &serde_json::to_string_pretty(&output)?)
        }
        GraphAction::Glue { first, second, pairs, out } => {
            let g1: Graph = read_json(first)?;
            let g2: Graph = read_json(second)?;
            let mut pairing = Vec::new();
            for chunk in pairs.split(',') {
                let (a, b) = chunk.split_once(':').ok_or_else(|| {
                    CliError::Parse(format!("pair `{chunk}` is not a:b"))
                })?;
                pairing.push((
                    a.trim().parse::<usize>().map_err(|e| CliError::Parse(format!("{e}")))?,
                    b.trim().parse::<usize>().map_err(|e| CliError::Parse(format!("{e}")))?,
                ));
            }
            let (glued, _) = glue_graphs(&g1, &g2, &pairing)?;
            emit(out, &serde_json::to_string_pretty(&glued)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Connect(args) => run_connect(args),
        Command::Update(args) => run_update(args),
        Command::Bench(args) => run_bench(args),
        Command::Graph(args) => run_graph(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Parse(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
