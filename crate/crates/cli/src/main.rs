use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rdsgls::diagnostics::RseVariant;
use rdsgls::estimators::Estimator;
use rdsgls::experiment::{
    emit_diagnostics, figure1_ratio, observed_referral_counts, prepare_network, run_rmse_experiment,
    ExperimentConfig, NetworkConfig, OffspringSpec, OutcomeSpec,
};
use rdsgls::io::{
    attributes_csv, diagnostics_csv, edge_list_csv, figure1_csv, read_counts, read_sample, report_json, rmse_csv,
    sample_csv, write_file, NodeAttributes,
};
use rdsgls::netmodel::{dcsbm_from_referral_counts, dcsbm_sample};
use rdsgls::rng::{derive, stream, DEFAULT_SEED};
use rdsgls::sampler::{draw_sample, Population};

/// Respondent-driven sampling simulation and estimation.
#[derive(Parser, Debug)]
#[command(name = "rdsgls", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a degree-corrected blockmodel graph; writes edges.csv and attributes.csv.
    GenGraph(GenGraphArgs),
    /// Draw one RDS sample from a graph; writes a sample CSV.
    Simulate(SimulateArgs),
    /// Run one estimator on a sample; writes a JSON report.
    Estimate(EstimateArgs),
    /// Eigenvalue and RSE points for a sample plus the rank-two curve.
    Diagnose(DiagnoseArgs),
    /// RMSE table over replicates as described by a TOML config.
    Experiment(ExperimentArgs),
    /// GLS to sample-mean variance ratios on complete binary trees.
    Figure1(Figure1Args),
}

#[derive(Args, Debug)]
struct SeedArg {
    /// Base seed. Falls back to RDSGLS_SEED, then 20170601.
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self, from_config: Option<u64>) -> Result<u64, String> {
        if let Some(s) = self.seed.or(from_config) {
            return Ok(s);
        }
        match std::env::var("RDSGLS_SEED") {
            Ok(v) => v.trim().parse().map_err(|_| format!("RDSGLS_SEED=\"{v}\" is not an unsigned integer")),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }
}

#[derive(Args, Debug)]
struct GenGraphArgs {
    /// Number of nodes.
    #[arg(long)]
    nodes: usize,
    /// Target mean degree.
    #[arg(long, default_value_t = 30.0)]
    expected_degree: f64,
    /// Referral-count CSV defining the block structure [default: the 3-block B/W/H counts].
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Per-block outcome values, written as attribute column `y`.
    #[arg(long, value_delimiter = ',')]
    block_values: Option<Vec<f64>>,
    #[command(flatten)]
    seed: SeedArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Experiment config supplying the network, outcomes and walk.
    #[arg(long, conflicts_with_all = ["edges", "attributes"], required_unless_present = "edges")]
    config: Option<PathBuf>,
    /// Edge-list CSV.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Attribute CSV with optional `block` column and outcome columns.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Outcome name: a config outcome or an attribute column [default: first config outcome, or `y`].
    #[arg(long)]
    outcome: Option<String>,
    /// Sample size.
    #[arg(short = 'n', long)]
    size: usize,
    /// `without_replacement` or `with_replacement`.
    #[arg(long)]
    mode: Option<String>,
    /// Offspring preset (`uniform`, `fast`, `slow`) or comma-separated probabilities.
    #[arg(long)]
    offspring: Option<String>,
    /// `degree_proportional`, `uniform` or `stationary_pi`.
    #[arg(long)]
    seed_rule: Option<String>,
    /// Restarts allowed before giving up.
    #[arg(long)]
    max_restarts: Option<usize>,
    #[command(flatten)]
    seed: SeedArg,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Sample CSV.
    #[arg(long)]
    sample: PathBuf,
    /// One of mean, vh, auto_fgls, delta_fgls, sbm_fgls, sbm_fgls_y.
    #[arg(long, value_parser = parse_estimator)]
    estimator: Estimator,
    /// Output JSON [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// Sample CSV.
    #[arg(long)]
    sample: PathBuf,
    /// `as_printed` or `mean_variance`.
    #[arg(long, default_value = "as_printed", value_parser = parse_variant)]
    variant: RseVariant,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// TOML config.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads [default: config `run.jobs`, else all cores].
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    seed: SeedArg,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Figure1Args {
    /// Two-state chain parameters, each in (0.5, 1).
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.75,0.9")]
    p: Vec<f64>,
    /// Tree levels as `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "1..15", value_parser = parse_levels)]
    levels: Levels,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct Levels(Vec<u32>);

fn parse_levels(s: &str) -> Result<Levels, String> {
    let levels: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| format!("bad level \"{a}\""))?;
        let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad level \"{b}\""))?;
        (a..=b).collect()
    } else {
        s.split(',').map(|v| v.trim().parse().map_err(|_| format!("bad level \"{v}\""))).collect::<Result<_, _>>()?
    };
    if levels.is_empty() || levels.iter().any(|&l| l == 0 || l > 30) {
        return Err("levels must lie in 1..=30".into());
    }
    Ok(Levels(levels))
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    Estimator::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Estimator::ALL.iter().map(|e| e.name()).collect();
        format!("unknown estimator \"{s}\" (expected one of {})", names.join(", "))
    })
}

fn parse_variant(s: &str) -> Result<RseVariant, String> {
    RseVariant::parse(s).ok_or_else(|| format!("unknown variant \"{s}\" (as_printed, mean_variance)"))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(rdsgls::Error),
}

impl From<rdsgls::Error> for Failure {
    fn from(e: rdsgls::Error) -> Self {
        Self::Runtime(e)
    }
}

type Outcome = Result<(), Failure>;

fn warn(source: &str, message: &str) {
    eprintln!("warning: {source}: {}", message.replace('\n', " "));
}

fn emit(out: Option<&Path>, contents: &str) -> Outcome {
    match out {
        Some(path) => write_file(path, contents)?,
        None => print!("{contents}"),
    }
    Ok(())
}

fn gen_graph(args: GenGraphArgs) -> Outcome {
    let seed = args.seed.resolve(None).map_err(Failure::Usage)?;
    let counts = match &args.counts {
        Some(path) => read_counts(path)?,
        None => observed_referral_counts(),
    };
    let params =
        dcsbm_from_referral_counts(&counts, args.nodes, args.expected_degree, &mut derive(seed, stream::THETA))?;
    let graph = dcsbm_sample(&params, &mut derive(seed, stream::GRAPH))?;
    let labels = params.labels().to_vec();
    let mut columns = Vec::new();
    if let Some(values) = &args.block_values {
        if values.len() != params.num_blocks() {
            return Err(Failure::Usage(format!(
                "--block-values needs {} entries, got {}",
                params.num_blocks(),
                values.len()
            )));
        }
        columns.push(("y".to_string(), labels.iter().map(|&b| values[b]).collect()));
    }
    let isolated = graph.isolated_nodes().len();
    if isolated > 0 {
        warn("gen-graph", &format!("{isolated} isolated nodes"));
    }
    write_file(&args.out.join("edges.csv"), &edge_list_csv(&graph))?;
    let attrs = NodeAttributes { block: Some(labels), columns };
    write_file(&args.out.join("attributes.csv"), &attributes_csv(&attrs))?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Outcome {
    let mut cfg = match (&args.config, &args.edges) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(edges)) => {
            let name = args.outcome.clone().unwrap_or_else(|| "y".into());
            ExperimentConfig {
                network: NetworkConfig::EdgeList { edges: edges.clone(), attributes: args.attributes.clone() },
                outcomes: BTreeMap::from([(name.clone(), OutcomeSpec::Column { column: name })]),
                walk: Default::default(),
                estimators: Default::default(),
                run: Default::default(),
            }
        }
        (None, None) => return Err(Failure::Usage("either --config or --edges is required".into())),
    };
    if let Some(m) = &args.mode {
        cfg.walk.mode = m.clone();
    }
    if let Some(o) = &args.offspring {
        cfg.walk.offspring = offspring_spec(o)?;
    }
    if let Some(r) = &args.seed_rule {
        cfg.walk.seed_rule = r.clone();
    }
    if let Some(r) = args.max_restarts {
        cfg.walk.max_restarts = r;
    }
    let seed = args.seed.resolve(cfg.run.seed).map_err(Failure::Usage)?;
    cfg.run.seed = Some(seed);
    cfg.validate()?;
    let walk = cfg.walk.walk_config(args.size)?;
    let net = prepare_network(&cfg)?;
    let outcome = match &args.outcome {
        Some(name) => net
            .outcomes
            .iter()
            .find(|o| &o.name == name)
            .ok_or_else(|| Failure::Usage(format!("no outcome named \"{name}\"")))?,
        None => &net.outcomes[0],
    };
    let base = &net.population;
    let mut population = Population::new(base.graph().clone(), outcome.values.clone())?
        .with_reported_degree(base.reported_degree().to_vec())?;
    if let Some(b) = base.blocks() {
        population = population.with_blocks(b.to_vec())?;
    }
    let draw = draw_sample(&population, &walk, &mut derive(seed, 0))?;
    if draw.restarts > 0 {
        warn("simulate", &format!("sampling restarted {} times", draw.restarts));
    }
    let mut sample = draw.sample;
    sample.node = sample.node.iter().map(|&x| net.original_ids[x]).collect();
    write_file(&args.out, &sample_csv(&sample))?;
    Ok(())
}

fn offspring_spec(s: &str) -> Result<OffspringSpec, Failure> {
    if s.contains(',') || s.parse::<f64>().is_ok() {
        let probs = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad probability \"{v}\""))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OffspringSpec::Probabilities(probs))
    } else {
        Ok(OffspringSpec::Preset(s.to_string()))
    }
}

fn estimate(args: EstimateArgs) -> Outcome {
    let sample = read_sample(&args.sample)?;
    let report = args.estimator.run(&sample)?;
    for w in &report.warnings {
        warn(&report.estimator, w);
    }
    emit(args.out.as_deref(), &report_json(&report))
}

fn diagnose(args: DiagnoseArgs) -> Outcome {
    let sample = read_sample(&args.sample)?;
    let data = emit_diagnostics(&sample, args.variant)?;
    for w in &data.warnings {
        warn("diagnose", w);
    }
    emit(args.out.as_deref(), &diagnostics_csv(&data))
}

fn experiment(args: ExperimentArgs) -> Outcome {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    cfg.run.seed = Some(args.seed.resolve(cfg.run.seed).map_err(Failure::Usage)?);
    if args.jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let jobs = args.jobs.or(cfg.run.jobs);
    let table = run_rmse_experiment(&cfg, jobs)?;
    for row in table.rows.iter().filter(|r| r.failures > 0) {
        warn(
            "experiment",
            &format!("{} n={} {}: {} failed replicates", row.estimator, row.n, row.outcome, row.failures),
        );
    }
    emit(args.out.as_deref(), &rmse_csv(&table))
}

fn figure1(args: Figure1Args) -> Outcome {
    let rows = figure1_ratio(&args.p, &args.levels.0)?;
    emit(args.out.as_deref(), &figure1_csv(&rows))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::GenGraph(a) => gen_graph(a),
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Experiment(a) => experiment(a),
        Command::Figure1(a) => figure1(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
