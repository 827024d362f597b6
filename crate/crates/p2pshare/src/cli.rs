//! Command-line entry point: graph generation, scenario simulation,
//! engagement optimization, dispersion sweeps, fairness tables and
//! share-matrix classification.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::analytics::{
    self, fairness_exact, keyed_rng, rows_to_csv, run_sweep, AnalyticsError, Accumulator,
    GammaRule, Mechanism, Replications, SweepConfig, SweepRow,
};
use crate::lossmodel::{sample_claims, ClaimSample, LossError, LossModel, Severity};
use crate::netgen::{
    generate_graph, DegreeSpec, GenerateOptions, Graph, NetgenError,
};
use crate::optimize::{
    solve_engagement_lp, solve_sparse_mip, solve_two_stage, EngagementFile, LpProblem,
    OptimizeError,
};
use crate::ordering::{classify_matrix, OrderingError, ShareMatrix};
use crate::sharing::{
    settle_personalized, settle_two_layer, settle_uniform, settle_uniform_with_self,
    EngagementMap, SettlementResult, SharingError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Netgen(#[from] NetgenError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Parser)]
#[command(
    name = "p2pshare",
    version,
    about = "Peer-to-peer deductible sharing: graph generation, settlement simulation and engagement optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random graph with prescribed degree mean and dispersion
    GenGraph(GenGraphArgs),
    /// Settle simulated (or explicit) claims under one mechanism
    Simulate(SimulateArgs),
    /// Compute engagement magnitudes (LP, sparse MIP or two-stage)
    Optimize(OptimizeArgs),
    /// Run the degree-dispersion sweep described by a config file
    Sweep(SweepArgs),
    /// Exact ex-post fairness probabilities on a regular mesh
    Fairness(FairnessArgs),
    /// Classify a share matrix from a JSON file
    Order(OrderArgs),
}

#[derive(Args)]
struct GenGraphArgs {
    /// Number of nodes
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    n: u64,
    /// Target mean degree
    #[arg(long)]
    dbar: f64,
    /// Target degree standard deviation
    #[arg(long)]
    sigma: f64,
    /// RNG seed
    #[arg(long)]
    seed: u64,
    /// Output graph JSON path
    #[arg(long)]
    out: PathBuf,
    /// Minimum degree; defaults to min(5, dbar - 1)
    #[arg(long)]
    min_degree: Option<u64>,
    /// Degree-preserving double-edge swaps per edge
    #[arg(long, default_value_t = 10)]
    swaps_per_edge: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Graph JSON file (alternative to --n/--dbar/--sigma generation)
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    dbar: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    min_degree: Option<u64>,
    /// RNG seed (required unless --claims pins the scenario)
    #[arg(long, required_unless_present = "claims")]
    seed: Option<u64>,
    /// Mechanism: none | uniform | uniform_self(z) | lp | qp | fof(g1,g2,z)
    #[arg(long)]
    mechanism: String,
    /// Claim probability
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Severity spec: point:c | uniform:a,b | gamma:shift,mean,sd
    #[arg(long, default_value = "gamma:100,1000,2000")]
    severity: String,
    /// Deductible
    #[arg(long, default_value_t = 1000.0)]
    s: f64,
    /// Replications
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    /// Per-edge magnitude; defaults to s / dbar
    #[arg(long)]
    gamma: Option<f64>,
    /// Explicit claims 'node:severity,node:severity' replacing sampling
    #[arg(long)]
    claims: Option<String>,
    /// Summary CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-replication settlement detail JSON path
    #[arg(long)]
    detail: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Graph JSON file
    #[arg(long)]
    graph: PathBuf,
    /// Per-node capacity (deductible)
    #[arg(long)]
    s: f64,
    /// Per-edge upper bound
    #[arg(long)]
    gamma: f64,
    /// Keep at most this many nonzero edges (sparse MIP)
    #[arg(long)]
    sparse: Option<usize>,
    /// Two-stage friends-of-friends caps 'gamma1,gamma2'
    #[arg(long)]
    fof: Option<String>,
    /// Output engagement JSON path (stage files get .stage1/.stage2 suffixes)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config file (key = value lines)
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (overrides the config's `out` key)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to available parallelism
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct FairnessArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dbar: u64,
    #[arg(long)]
    p: f64,
}

#[derive(Args)]
struct OrderArgs {
    /// JSON file holding an n x n array of rows
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

/// Parses arguments and runs; returns the process exit code
/// (0 success, 1 domain error, 2 usage error via clap).
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenGraph(args) => cmd_gen_graph(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Fairness(args) => cmd_fairness(args),
        Command::Order(args) => cmd_order(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn default_min_degree(dbar: f64) -> usize {
    (dbar.floor() as usize).saturating_sub(1).clamp(1, 5)
}

fn degree_summary(graph: &Graph) -> String {
    let degrees = graph.degrees();
    let n = degrees.len() as f64;
    let min = degrees.iter().min().copied().unwrap_or(0);
    let max = degrees.iter().max().copied().unwrap_or(0);
    let mean = degrees.iter().sum::<usize>() as f64 / n;
    let var = degrees
        .iter()
        .map(|&d| (d as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    format!(
        "degrees: min {min} mean {mean:.3} sd {:.3} max {max}",
        var.sqrt()
    )
}

fn cmd_gen_graph(args: GenGraphArgs) -> Result<(), CliError> {
    let spec = DegreeSpec {
        mean_degree: args.dbar,
        degree_sd: args.sigma,
        min_degree: args
            .min_degree
            .map(|d| d as usize)
            .unwrap_or_else(|| default_min_degree(args.dbar)),
    };
    let mut rng = keyed_rng(args.seed, &[0]);
    let graph = generate_graph(
        &spec,
        args.n as usize,
        &mut rng,
        GenerateOptions {
            swaps_per_edge: args.swaps_per_edge,
            ..GenerateOptions::default()
        },
    )?;
    fs::write(&args.out, graph.to_json_string())?;
    println!("wrote {} ({} nodes, {} edges)", args.out.display(), graph.node_count(), graph.edge_count());
    println!("{}", degree_summary(&graph));
    Ok(())
}

fn parse_claims_spec(text: &str, n: usize) -> Result<Vec<Option<f64>>, CliError> {
    let mut severities = vec![None; n];
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (node, value) = part
            .split_once(':')
            .ok_or_else(|| CliError::Invalid(format!("bad claim '{part}', expected node:severity")))?;
        let node: usize = node
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("bad claim node '{node}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("bad claim severity '{value}'")))?;
        if node >= n {
            return Err(CliError::Invalid(format!(
                "claim node {node} out of range for {n} nodes"
            )));
        }
        severities[node] = Some(value);
    }
    Ok(severities)
}

#[derive(Serialize)]
struct DetailRecord<'a> {
    replication: u64,
    claimed: &'a [bool],
    severities: &'a [f64],
    capped: &'a [f64],
    settlement: &'a SettlementResult,
}

enum PreparedMechanism {
    Direct,
    UniformGamma(f64),
    UniformSelfZ(f64),
    Personalized(EngagementMap),
    TwoLayer {
        eng1: EngagementMap,
        fof: Graph,
        eng2: EngagementMap,
        z: f64,
    },
}

fn prepare(
    mechanism: &Mechanism,
    graph: &Graph,
    s: f64,
    gamma: f64,
) -> Result<PreparedMechanism, CliError> {
    Ok(match *mechanism {
        Mechanism::None => PreparedMechanism::Direct,
        Mechanism::Uniform => PreparedMechanism::UniformGamma(gamma),
        Mechanism::UniformSelf { z } => PreparedMechanism::UniformSelfZ(z),
        Mechanism::Lp => {
            let solution = solve_engagement_lp(&LpProblem::new(graph, s, gamma))?;
            PreparedMechanism::Personalized(solution.engagement)
        }
        Mechanism::Qp => {
            let shares = crate::optimize::solve_min_variance_qp(graph, s, gamma)?;
            let values: Vec<f64> = shares.edge_shares.iter().map(|w| w * s).collect();
            PreparedMechanism::Personalized(EngagementMap::from_edge_values(graph, values)?)
        }
        Mechanism::Fof { gamma1, gamma2, z } => {
            let stages = solve_two_stage(graph, s - z, gamma1, gamma2)?;
            PreparedMechanism::TwoLayer {
                eng1: stages.first.engagement,
                fof: stages.fof_graph,
                eng2: stages.second.engagement,
                z,
            }
        }
    })
}

fn settle_once(
    prepared: &PreparedMechanism,
    graph: &Graph,
    claims: &ClaimSample,
    s: f64,
) -> Result<Option<SettlementResult>, CliError> {
    Ok(match prepared {
        PreparedMechanism::Direct => None,
        PreparedMechanism::UniformGamma(gamma) => {
            Some(settle_uniform(graph, claims, s, *gamma)?)
        }
        PreparedMechanism::UniformSelfZ(z) => {
            Some(settle_uniform_with_self(graph, claims, s, *z)?)
        }
        PreparedMechanism::Personalized(eng) => {
            Some(settle_personalized(graph, eng, claims, s)?)
        }
        PreparedMechanism::TwoLayer { eng1, fof, eng2, z } => {
            Some(settle_two_layer(graph, eng1, fof, eng2, claims, s, *z)?)
        }
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mechanism: Mechanism = args
        .mechanism
        .parse()
        .map_err(|e: AnalyticsError| CliError::Invalid(e.to_string()))?;
    let severity: Severity = args.severity.parse()?;
    let model = LossModel::new(args.p, severity, args.s)?;

    let (graph, sigma_label) = match &args.graph {
        Some(path) => {
            let graph = Graph::from_json_str(&fs::read_to_string(path)?)?;
            let mean = graph.mean_degree();
            let var = graph
                .degrees()
                .iter()
                .map(|&d| (d as f64 - mean).powi(2))
                .sum::<f64>()
                / graph.node_count() as f64;
            (graph, var.sqrt())
        }
        None => {
            let (n, dbar, sigma) = match (args.n, args.dbar, args.sigma) {
                (Some(n), Some(dbar), Some(sigma)) => (n, dbar, sigma),
                _ => {
                    return Err(CliError::Invalid(
                        "need --graph or all of --n, --dbar, --sigma".into(),
                    ))
                }
            };
            let seed = args.seed.ok_or_else(|| {
                CliError::Invalid("--seed is required when generating a graph".into())
            })?;
            let spec = DegreeSpec {
                mean_degree: dbar,
                degree_sd: sigma,
                min_degree: args
                    .min_degree
                    .map(|d| d as usize)
                    .unwrap_or_else(|| default_min_degree(dbar)),
            };
            let mut rng = keyed_rng(seed, &[0]);
            (
                generate_graph(&spec, n as usize, &mut rng, GenerateOptions::default())?,
                sigma,
            )
        }
    };

    let gamma = args.gamma.unwrap_or(args.s / graph.mean_degree());
    let prepared = prepare(&mechanism, &graph, args.s, gamma)?;

    let mut acc = Accumulator::new();
    let mut details = Vec::new();
    let record = |rep: u64,
                      claims: &ClaimSample,
                      acc: &mut Accumulator,
                      details: &mut Vec<String>|
     -> Result<(), CliError> {
        let settled = settle_once(&prepared, &graph, claims, args.s)?;
        let direct;
        let settlement = match &settled {
            Some(s) => s,
            None => {
                direct = unshared_settlement(claims);
                &direct
            }
        };
        acc.add_settlement(settlement);
        if args.detail.is_some() {
            let record = DetailRecord {
                replication: rep,
                claimed: &claims.claimed,
                severities: &claims.severities,
                capped: &claims.capped,
                settlement,
            };
            details.push(serde_json::to_string(&record).expect("detail serializes"));
        }
        Ok(())
    };

    match &args.claims {
        Some(spec) => {
            if args.reps != 1 {
                return Err(CliError::Invalid(
                    "--claims pins a single scenario; use --reps 1".into(),
                ));
            }
            let severities = parse_claims_spec(spec, graph.node_count())?;
            let claims = ClaimSample::from_severities(&severities, args.s)?;
            record(0, &claims, &mut acc, &mut details)?;
        }
        None => {
            let seed = args.seed.expect("clap enforces seed without --claims");
            let mut rng = keyed_rng(seed, &[1]);
            for rep in 0..args.reps {
                let claims = sample_claims(&model, graph.node_count(), &mut rng)?;
                record(rep, &claims, &mut acc, &mut details)?;
            }
        }
    }

    let [share_self, share_friends, share_fof] = acc.shares();
    let row = SweepRow {
        sigma: sigma_label,
        seed: args.seed.unwrap_or(0),
        mechanism: mechanism.tag().to_string(),
        self_contribution: mechanism.self_contribution(),
        mean_xi: acc.mean(),
        stdev_xi: acc.stdev(),
        stdev_ratio: acc.stdev() / args.s,
        share_self,
        share_friends,
        share_fof,
    };
    println!(
        "mechanism {} reps {}: mean_xi {} stdev_xi {} stdev_ratio {}",
        mechanism,
        acc.replications(),
        row.mean_xi,
        row.stdev_xi,
        row.stdev_ratio
    );
    if let Some(path) = &args.out {
        let comments = vec![
            format!("p2pshare {}", env!("CARGO_PKG_VERSION")),
            format!("simulate mechanism = {mechanism}"),
        ];
        fs::write(path, rows_to_csv(&[row], &comments))?;
    }
    if let Some(path) = &args.detail {
        fs::write(path, format!("[{}]\n", details.join(",\n")))?;
    }
    Ok(())
}

/// Settlement view of unshared losses (mechanism `none`).
fn unshared_settlement(claims: &ClaimSample) -> SettlementResult {
    let n = claims.len();
    SettlementResult {
        xi: claims.capped.clone(),
        layers: crate::sharing::LayerBreakdown {
            self_first: vec![0.0; n],
            from_friends: vec![0.0; n],
            paid_to_friends: vec![0.0; n],
            from_fof: vec![0.0; n],
            paid_to_fof: vec![0.0; n],
            residual_self: claims.capped.clone(),
        },
        total_in: claims.total_loss(),
    }
}

fn stage_path(base: &Path, stage: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "engagement".into());
    let extension = base
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "json".into());
    base.with_file_name(format!("{stem}.{stage}.{extension}"))
}

fn cmd_optimize(args: OptimizeArgs) -> Result<(), CliError> {
    let graph = Graph::from_json_str(&fs::read_to_string(&args.graph)?)?;
    if let Some(spec) = &args.fof {
        let (g1, g2) = spec
            .split_once(',')
            .ok_or_else(|| CliError::Invalid("--fof expects 'gamma1,gamma2'".into()))?;
        let gamma1: f64 = g1
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("bad gamma1 '{g1}'")))?;
        let gamma2: f64 = g2
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("bad gamma2 '{g2}'")))?;
        let stages = solve_two_stage(&graph, args.s, gamma1, gamma2)?;
        let first = EngagementFile::from_engagement(
            &graph,
            &stages.first.engagement,
            stages.first.objective,
            true,
            1,
        );
        let second = EngagementFile::from_engagement(
            &stages.fof_graph,
            &stages.second.engagement,
            stages.second.objective,
            true,
            2,
        );
        let path1 = stage_path(&args.out, "stage1");
        let path2 = stage_path(&args.out, "stage2");
        fs::write(&path1, first.to_json_string())?;
        fs::write(&path2, second.to_json_string())?;
        println!(
            "stage 1 objective {} ({} eligible nodes), stage 2 objective {}",
            stages.first.objective,
            stages.eligible.len(),
            stages.second.objective
        );
        return Ok(());
    }

    let problem = LpProblem::new(&graph, args.s, args.gamma);
    let file = match args.sparse {
        Some(limit) => {
            let solution = solve_sparse_mip(&problem, limit)?;
            EngagementFile::from_engagement(
                &graph,
                &solution.engagement,
                solution.objective,
                solution.exact,
                1,
            )
        }
        None => {
            let solution = solve_engagement_lp(&problem)?;
            EngagementFile::from_engagement(&graph, &solution.engagement, solution.objective, true, 1)
        }
    };
    fs::write(&args.out, file.to_json_string())?;
    println!("objective {} exact {}", file.objective, file.exact);
    Ok(())
}

fn cmd_fairness(args: FairnessArgs) -> Result<(), CliError> {
    let report = fairness_exact(args.dbar as usize, args.p)?;
    println!("p_zero {}", report.p_zero);
    println!("p_full {}", report.p_full);
    println!("p_strict {}", report.p_strict);
    println!("p_weak {}", report.p_weak);
    Ok(())
}

fn cmd_order(args: OrderArgs) -> Result<(), CliError> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&fs::read_to_string(&args.matrix)?)
        .map_err(|e| CliError::Invalid(format!("bad matrix JSON: {e}")))?;
    let matrix = ShareMatrix::new(rows)?;
    let class = classify_matrix(&matrix, args.tol)?;
    println!("{class}");
    Ok(())
}

/// Parsed sweep config: the run parameters, the optional output path from
/// the `out` key, and the raw lines echoed into the CSV header.
pub fn parse_sweep_config(text: &str) -> Result<(SweepConfig, Option<PathBuf>, Vec<String>), CliError> {
    let mut n = None;
    let mut dbar = None;
    let mut min_degree = None;
    let mut sigmas: Option<Vec<f64>> = None;
    let mut seeds_per_sigma = 1usize;
    let mut master_seed = None;
    let mut p = None;
    let mut severity: Option<Severity> = None;
    let mut s = None;
    let mut gamma = GammaRule::Auto;
    let mut mechanisms: Option<Vec<Mechanism>> = None;
    let mut replications = Replications::Adaptive { max: 500 };
    let mut out = None;
    let mut echo = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        echo.push(line.to_string());
        let number = idx + 1;
        let fail = |message: String| CliError::Config {
            line: number,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| fail("expected 'key = value'".into()))?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |v: &str| -> Result<f64, CliError> {
            v.parse().map_err(|_| fail(format!("bad number '{v}'")))
        };
        match key {
            "n" => n = Some(parse_f64(value)? as usize),
            "dbar" => dbar = Some(parse_f64(value)?),
            "min_degree" => min_degree = Some(parse_f64(value)? as usize),
            "sigma" => {
                let grid: Result<Vec<f64>, _> =
                    value.split_whitespace().map(|v| v.parse::<f64>()).collect();
                sigmas = Some(grid.map_err(|_| fail(format!("bad sigma grid '{value}'")))?);
            }
            "seeds_per_sigma" => seeds_per_sigma = parse_f64(value)? as usize,
            "seed" => master_seed = Some(parse_f64(value)? as u64),
            "p" => p = Some(parse_f64(value)?),
            "severity" => {
                severity = Some(value.parse().map_err(|e: LossError| fail(e.to_string()))?)
            }
            "s" => s = Some(parse_f64(value)?),
            "gamma" => {
                gamma = if value == "auto" {
                    GammaRule::Auto
                } else {
                    GammaRule::Fixed(parse_f64(value)?)
                }
            }
            "mechanisms" => {
                let list: Result<Vec<Mechanism>, _> =
                    value.split_whitespace().map(|m| m.parse()).collect();
                mechanisms =
                    Some(list.map_err(|e: AnalyticsError| fail(e.to_string()))?);
            }
            "reps" => {
                replications = if let Some(max) = value.strip_prefix("adaptive:") {
                    Replications::Adaptive {
                        max: max
                            .parse()
                            .map_err(|_| fail(format!("bad adaptive cap '{max}'")))?,
                    }
                } else {
                    Replications::Fixed(parse_f64(value)? as usize)
                }
            }
            "out" => out = Some(PathBuf::from(value)),
            other => return Err(fail(format!("unknown key '{other}'"))),
        }
    }

    let require = |name: &str| CliError::Invalid(format!("config is missing required key '{name}'"));
    let dbar = dbar.ok_or_else(|| require("dbar"))?;
    let config = SweepConfig {
        n: n.ok_or_else(|| require("n"))?,
        mean_degree: dbar,
        min_degree: min_degree.unwrap_or_else(|| default_min_degree(dbar)),
        sigmas: sigmas.ok_or_else(|| require("sigma"))?,
        seeds_per_sigma,
        master_seed: master_seed.ok_or_else(|| require("seed"))?,
        loss: LossModel::new(
            p.ok_or_else(|| require("p"))?,
            severity.ok_or_else(|| require("severity"))?,
            s.ok_or_else(|| require("s"))?,
        )?,
        mechanisms: mechanisms.ok_or_else(|| require("mechanisms"))?,
        gamma,
        replications,
    };
    Ok((config, out, echo))
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config)?;
    let (config, config_out, echo) = parse_sweep_config(&text)?;
    let out = args
        .out
        .or(config_out)
        .ok_or_else(|| CliError::Invalid("no output path: pass --out or set out in the config".into()))?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
    log::info!(
        "sweep: {} sigmas x {} seeds x {} mechanisms on {} workers",
        config.sigmas.len(),
        config.seeds_per_sigma,
        config.mechanisms.len(),
        workers
    );
    let rows = run_sweep(&config, workers)?;
    let mut comments = vec![format!("p2pshare {}", env!("CARGO_PKG_VERSION"))];
    comments.extend(echo);
    fs::write(&out, rows_to_csv(&rows, &comments))?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

// keep the analytics CSV loader linked for round-trip use by consumers
#[allow(unused_imports)]
use analytics::rows_from_csv as _rows_from_csv;
