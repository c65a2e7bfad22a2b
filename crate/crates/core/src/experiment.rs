//! Monte Carlo experiments: RMSE comparisons over replicated RDS samples,
//! single-sample diagnostic datasets, and the GLS-versus-mean variance
//! ratio on complete binary trees.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Deserialize;

use crate::covariance::one_sigma_inv_one_ranktwo;
use crate::diagnostics::{default_lambda_grid, ranktwo_rse_curve, RseVariant};
use crate::error::{Error, Result};
use crate::estimators::{outcome_blocks, Estimator};
use crate::io::{read_attributes, read_edge_list};
use crate::netmodel::{dcsbm_from_referral_counts, dcsbm_sample, WeightedGraph};
use crate::referral::{complete_binary_tree, distance_pgf, tree_distance_distribution, OffspringPmf, DEFAULT_MAX_RESTARTS};
use crate::rng::{derive, stream, DEFAULT_SEED};
use crate::sampler::{draw_sample, Population, RdsSample, SamplingMode, SeedRule, WalkConfig};

/// Observed referral counts between three demographic blocks (rows refer
/// to columns), in block order B, W, H.
pub const OBSERVED_REFERRAL_COUNTS: [[f64; 3]; 3] = [[5.0, 5.0, 2.0], [7.0, 46.0, 1.0], [4.0, 8.0, 28.0]];

pub fn observed_referral_counts() -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| OBSERVED_REFERRAL_COUNTS[i][j])
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    #[serde(default)]
    pub outcomes: BTreeMap<String, OutcomeSpec>,
    #[serde(default)]
    pub walk: WalkSection,
    #[serde(default)]
    pub estimators: EstimatorSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkConfig {
    /// Degree-corrected blockmodel built from a referral-count matrix.
    Dcsbm {
        nodes: usize,
        #[serde(default = "default_expected_degree")]
        expected_degree: f64,
        /// Defaults to [`OBSERVED_REFERRAL_COUNTS`].
        counts: Option<Vec<Vec<f64>>>,
    },
    /// Edge list plus optional attribute CSV; relative paths resolve against
    /// the config file's directory.
    EdgeList { edges: PathBuf, attributes: Option<PathBuf> },
}

fn default_expected_degree() -> f64 {
    30.0
}

/// How an outcome is assigned to population nodes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum OutcomeSpec {
    /// Deterministic value per block.
    BlockValues { block_values: Vec<f64> },
    /// Bernoulli with a per-block rate.
    BlockRates { block_rates: Vec<f64> },
    /// Bernoulli with one rate for everyone.
    Rate { rate: f64 },
    /// A numeric column of the attribute file.
    Column { column: String },
    Constant { constant: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OffspringSpec {
    Preset(String),
    Probabilities(Vec<f64>),
}

impl OffspringSpec {
    pub fn resolve(&self) -> Result<OffspringPmf> {
        match self {
            Self::Preset(name) => OffspringPmf::preset(name)
                .ok_or_else(|| Error::Config(format!("unknown offspring preset \"{name}\" (uniform, fast, slow)"))),
            Self::Probabilities(p) => OffspringPmf::new(p.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkSection {
    /// `without_replacement` or `with_replacement`.
    pub mode: String,
    pub offspring: OffspringSpec,
    /// `degree_proportional`, `uniform` or `stationary_pi`.
    pub seed_rule: String,
    pub max_restarts: usize,
    /// Weight given to edges whose endpoints share a preferential block.
    pub preferential_weight: Option<f64>,
    /// Blocks subject to preferential recruitment; all blocks if absent.
    pub preferential_blocks: Option<Vec<usize>>,
}

impl Default for WalkSection {
    fn default() -> Self {
        Self {
            mode: "without_replacement".into(),
            offspring: OffspringSpec::Preset("fast".into()),
            seed_rule: "degree_proportional".into(),
            max_restarts: DEFAULT_MAX_RESTARTS,
            preferential_weight: None,
            preferential_blocks: None,
        }
    }
}

impl WalkSection {
    pub fn walk_config(&self, target_n: usize) -> Result<WalkConfig> {
        let mode = match self.mode.as_str() {
            "without_replacement" => SamplingMode::WithoutReplacement,
            "with_replacement" => SamplingMode::WithReplacement,
            other => return Err(Error::Config(format!("unknown walk mode \"{other}\""))),
        };
        let seed_rule = parse_seed_rule(&self.seed_rule)?;
        let mut cfg = WalkConfig::new(self.offspring.resolve()?, target_n);
        cfg.mode = mode;
        cfg.seed_rule = seed_rule;
        cfg.max_restarts = self.max_restarts;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_seed_rule(s: &str) -> Result<SeedRule> {
    match s {
        "degree_proportional" => Ok(SeedRule::DegreeProportional),
        "uniform" => Ok(SeedRule::Uniform),
        "stationary_pi" => Ok(SeedRule::StationaryPi),
        other => Err(Error::Config(format!("unknown seed rule \"{other}\""))),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub names: Vec<String>,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self { names: Estimator::ALL.iter().map(|e| e.name().to_string()).collect() }
    }
}

impl EstimatorSection {
    pub fn resolve(&self) -> Result<Vec<Estimator>> {
        self.names
            .iter()
            .map(|n| Estimator::parse(n).ok_or_else(|| Error::Config(format!("unknown estimator \"{n}\""))))
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub replicates: usize,
    pub sample_sizes: Vec<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { replicates: 100, sample_sizes: vec![500], seed: None, jobs: None }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config and resolves relative paths against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let NetworkConfig::EdgeList { edges, attributes } = &mut cfg.network {
            *edges = base.join(&*edges);
            if let Some(a) = attributes {
                *a = base.join(&*a);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.replicates == 0 {
            return Err(Error::Config("run.replicates must be at least 1".into()));
        }
        if self.run.sample_sizes.is_empty() || self.run.sample_sizes.contains(&0) {
            return Err(Error::Config("run.sample_sizes must be nonempty and positive".into()));
        }
        if self.outcomes.is_empty() {
            return Err(Error::Config("at least one outcome is required".into()));
        }
        for (name, spec) in &self.outcomes {
            let rates: &[f64] = match spec {
                OutcomeSpec::BlockRates { block_rates } => block_rates,
                OutcomeSpec::Rate { rate } => std::slice::from_ref(rate),
                _ => &[],
            };
            if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return Err(Error::Config(format!("outcome {name}: rates must lie in [0, 1]")));
            }
        }
        if let Some(w) = self.walk.preferential_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config("walk.preferential_weight must be positive".into()));
            }
        }
        self.estimators.resolve()?;
        self.walk.walk_config(1)?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(DEFAULT_SEED)
    }
}

/// One outcome over the sampling frame.
#[derive(Debug, Clone)]
pub struct OutcomeColumn {
    pub name: String,
    pub values: Vec<f64>,
    pub mu_true: f64,
}

/// The sampling frame: the largest connected component of the network with
/// its outcomes. Recruitment follows the (possibly reweighted) edges while
/// participants report their unweighted number of contacts.
#[derive(Debug, Clone)]
pub struct PreparedNetwork {
    pub population: Population,
    pub outcomes: Vec<OutcomeColumn>,
    /// Original node id of each frame node.
    pub original_ids: Vec<usize>,
    pub num_blocks: Option<usize>,
}

/// Builds the network and outcomes described by `cfg`.
pub fn prepare_network(cfg: &ExperimentConfig) -> Result<PreparedNetwork> {
    let seed = cfg.seed();
    let (graph, blocks, attrs) = match &cfg.network {
        NetworkConfig::Dcsbm { nodes, expected_degree, counts } => {
            let counts = match counts {
                Some(rows) => {
                    let k = rows.len();
                    if rows.iter().any(|r| r.len() != k) {
                        return Err(Error::Config("network.counts must be square".into()));
                    }
                    DMatrix::from_fn(k, k, |i, j| rows[i][j])
                }
                None => observed_referral_counts(),
            };
            let params = dcsbm_from_referral_counts(&counts, *nodes, *expected_degree, &mut derive(seed, stream::THETA))?;
            let graph = dcsbm_sample(&params, &mut derive(seed, stream::GRAPH))?;
            (graph, Some(params.labels().to_vec()), None)
        }
        NetworkConfig::EdgeList { edges, attributes } => {
            let attrs = attributes.as_deref().map(read_attributes).transpose()?;
            let graph = read_edge_list(edges, attrs.as_ref().map_or(0, |a| a.len()))?;
            if let Some(a) = &attrs {
                if a.len() != graph.num_nodes() {
                    return Err(Error::Config(format!(
                        "attribute file has {} rows but the edge list references {} nodes",
                        a.len(),
                        graph.num_nodes()
                    )));
                }
            }
            let blocks = attrs.as_ref().and_then(|a| a.block.clone());
            (graph, blocks, attrs)
        }
    };
    let num_blocks = blocks.as_ref().map(|b| b.iter().max().map_or(0, |m| m + 1));
    let mut rng = derive(seed, stream::OUTCOMES);
    let mut full_outcomes = Vec::new();
    for (name, spec) in &cfg.outcomes {
        let need_blocks = || {
            blocks.as_ref().ok_or_else(|| Error::Config(format!("outcome {name} needs block labels")))
        };
        let values: Vec<f64> = match spec {
            OutcomeSpec::BlockValues { block_values } => {
                let b = need_blocks()?;
                check_block_len(name, block_values.len(), num_blocks)?;
                b.iter().map(|&u| block_values[u]).collect()
            }
            OutcomeSpec::BlockRates { block_rates } => {
                let b = need_blocks()?;
                check_block_len(name, block_rates.len(), num_blocks)?;
                b.iter().map(|&u| f64::from(u8::from(rng.random_bool(block_rates[u])))).collect()
            }
            OutcomeSpec::Rate { rate } => {
                (0..graph.num_nodes()).map(|_| f64::from(u8::from(rng.random_bool(*rate)))).collect()
            }
            OutcomeSpec::Column { column } => attrs
                .as_ref()
                .and_then(|a| a.column(column))
                .ok_or_else(|| Error::Config(format!("outcome {name}: no attribute column \"{column}\"")))?
                .to_vec(),
            OutcomeSpec::Constant { constant } => vec![*constant; graph.num_nodes()],
        };
        full_outcomes.push((name.clone(), values));
    }

    let (frame, ids) = graph.largest_component();
    let frame_blocks: Option<Vec<usize>> = blocks.as_ref().map(|b| ids.iter().map(|&i| b[i]).collect());
    let contacts: Vec<f64> = (0..frame.num_nodes()).map(|i| frame.contacts(i) as f64).collect();
    let sampling_graph = match cfg.walk.preferential_weight {
        Some(w) => preferential_graph(&frame, frame_blocks.as_deref(), cfg.walk.preferential_blocks.as_deref(), w)?,
        None => frame,
    };
    let outcomes: Vec<OutcomeColumn> = full_outcomes
        .into_iter()
        .map(|(name, values)| {
            let values: Vec<f64> = ids.iter().map(|&i| values[i]).collect();
            let mu_true = values.iter().sum::<f64>() / values.len() as f64;
            OutcomeColumn { name, values, mu_true }
        })
        .collect();
    let mut population = Population::new(sampling_graph, outcomes[0].values.clone())?.with_reported_degree(contacts)?;
    if let Some(b) = frame_blocks {
        population = population.with_blocks(b)?;
    }
    Ok(PreparedNetwork { population, outcomes, original_ids: ids, num_blocks })
}

fn check_block_len(name: &str, len: usize, num_blocks: Option<usize>) -> Result<()> {
    match num_blocks {
        Some(k) if len >= k => Ok(()),
        _ => Err(Error::Config(format!("outcome {name}: need one entry per block"))),
    }
}

/// Sets the weight of every edge inside a preferential block to `weight`.
pub fn preferential_graph(
    graph: &WeightedGraph,
    blocks: Option<&[usize]>,
    preferential: Option<&[usize]>,
    weight: f64,
) -> Result<WeightedGraph> {
    let blocks = blocks.ok_or_else(|| Error::Config("preferential recruitment needs block labels".into()))?;
    graph.reweighted(|i, j, w| {
        let same = blocks[i] == blocks[j];
        let eligible = preferential.is_none_or(|p| p.contains(&blocks[i]));
        if same && eligible {
            weight
        } else {
            w
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub estimator: String,
    pub n: usize,
    pub outcome: String,
    pub rmse: f64,
    pub bias: f64,
    /// Sample standard deviation of the estimates (`R − 1` denominator).
    pub sd: f64,
    pub replicates: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RmseTable {
    pub rows: Vec<RmseRow>,
}

impl RmseTable {
    pub fn get(&self, estimator: &str, n: usize, outcome: &str) -> Option<&RmseRow> {
        self.rows.iter().find(|r| r.estimator == estimator && r.n == n && r.outcome == outcome)
    }
}

/// Summary of estimates against the truth.
pub fn rmse_row(estimator: &str, n: usize, outcome: &str, estimates: &[f64], truth: f64, failures: usize) -> RmseRow {
    let r = estimates.len();
    let mean = estimates.iter().sum::<f64>() / r as f64;
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / r as f64;
    let sd = if r > 1 {
        (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1) as f64).sqrt()
    } else {
        0.0
    };
    RmseRow {
        estimator: estimator.to_string(),
        n,
        outcome: outcome.to_string(),
        rmse: mse.sqrt(),
        bias: mean - truth,
        sd,
        replicates: r,
        failures,
    }
}

/// Estimates for one replicate, indexed `[size][outcome][estimator]`;
/// `None` if sampling failed.
type ReplicateEstimates = Option<Vec<Vec<Vec<f64>>>>;

fn run_replicate(
    net: &PreparedNetwork,
    walk: &WalkConfig,
    sizes: &[usize],
    estimators: &[Estimator],
    seed: u64,
    index: usize,
) -> Result<ReplicateEstimates> {
    let wrap = |e: Error| Error::Replicate { index, source: Box::new(e) };
    let draw = match draw_sample(&net.population, walk, &mut derive(seed, index as u64)) {
        Ok(d) => d,
        Err(Error::SamplingFailed { .. }) => return Ok(None),
        Err(e) => return Err(wrap(e)),
    };
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let base = draw.sample.prefix(n).map_err(wrap)?;
        let mut per_outcome = Vec::with_capacity(net.outcomes.len());
        for col in &net.outcomes {
            let sample = with_outcome(&base, &col.values);
            let est = estimators
                .iter()
                .map(|e| e.run(&sample).map(|r| r.mu_hat))
                .collect::<Result<Vec<f64>>>()
                .map_err(wrap)?;
            per_outcome.push(est);
        }
        out.push(per_outcome);
    }
    Ok(Some(out))
}

fn with_outcome(sample: &RdsSample, values: &[f64]) -> RdsSample {
    RdsSample { outcome: sample.node.iter().map(|&x| values[x]).collect(), ..sample.clone() }
}

/// Runs the replicated experiment of `cfg` with `jobs` worker threads
/// (`None` uses the config value, then rayon's default).
pub fn run_rmse_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<RmseTable> {
    cfg.validate()?;
    let net = prepare_network(cfg)?;
    let estimators = cfg.estimators.resolve()?;
    if net.num_blocks.is_none() && estimators.contains(&Estimator::SbmFgls) {
        return Err(Error::Config("sbm_fgls needs block labels".into()));
    }
    let sizes = cfg.run.sample_sizes.clone();
    let n_max = *sizes.iter().max().expect("validated nonempty");
    let walk = cfg.walk.walk_config(n_max)?;
    let seed = cfg.seed();
    let work = || {
        (0..cfg.run.replicates)
            .into_par_iter()
            .map(|r| run_replicate(&net, &walk, &sizes, &estimators, seed, r))
            .collect::<Result<Vec<_>>>()
    };
    let results = match jobs.or(cfg.run.jobs) {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let failures = results.iter().filter(|r| r.is_none()).count();
    let ok: Vec<&Vec<Vec<Vec<f64>>>> = results.iter().flatten().collect();
    let mut table = RmseTable::default();
    for (o, col) in net.outcomes.iter().enumerate() {
        for (s, &n) in sizes.iter().enumerate() {
            for (e, est) in estimators.iter().enumerate() {
                let values: Vec<f64> = ok.iter().map(|r| r[s][o][e]).collect();
                table.rows.push(rmse_row(est.name(), n, &col.name, &values, col.mu_true, failures));
            }
        }
    }
    Ok(table)
}

/// One point of the diagnostic plot.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticPoint {
    pub estimator: String,
    pub lambda_hat: f64,
    pub rse: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticDataset {
    pub points: Vec<DiagnosticPoint>,
    /// `(λ, RSE)` of the rank-two model on the sample's tree.
    pub curve: Vec<(f64, f64)>,
    pub variant: RseVariant,
    pub warnings: Vec<String>,
}

/// Points for auto-fGLS, Δ-fGLS, SBM-fGLS on outcome blocks and (when the
/// sample is labeled) SBM-fGLS on its blocks, plus the rank-two curve.
/// Estimator failures become warnings.
pub fn emit_diagnostics(sample: &RdsSample, variant: RseVariant) -> Result<DiagnosticDataset> {
    let n = sample.len();
    let grid = default_lambda_grid();
    let curve_values = ranktwo_rse_curve(&sample.tree, &grid, variant)?;
    let curve: Vec<(f64, f64)> = grid.into_iter().zip(curve_values).collect();
    let grey_zero = ranktwo_rse_curve(&sample.tree, &[0.0], variant)?[0];
    let scale = match variant {
        RseVariant::AsPrinted => 1.0,
        RseVariant::MeanVariance => (n as f64).sqrt(),
    };
    let mut estimators = vec![Estimator::AutoFgls, Estimator::DeltaFgls, Estimator::SbmFglsOutcome];
    if sample.block.is_some() {
        estimators.push(Estimator::SbmFgls);
    }
    let constant = sample.outcome.iter().all(|&v| v == sample.outcome[0]);
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    let point = |est: Estimator, lambda_hat: f64, rse: f64| DiagnosticPoint {
        estimator: est.name().to_string(),
        lambda_hat,
        rse,
        n,
    };
    for est in estimators {
        if constant {
            let count = match est {
                Estimator::SbmFglsOutcome => 0,
                Estimator::SbmFgls => {
                    let labels = sample.block.as_ref().expect("labeled");
                    let mut distinct = labels.clone();
                    distinct.sort_unstable();
                    distinct.dedup();
                    distinct.len() - 1
                }
                _ => 1,
            };
            points.extend((0..count).map(|_| point(est, 0.0, grey_zero)));
            continue;
        }
        match est.run(sample) {
            Ok(report) => match report.rse {
                Some(rse) => points.extend(report.eigenvalues.iter().map(|&l| point(est, l, rse * scale))),
                None => warnings.push(format!("{}: no RSE available", est.name())),
            },
            Err(e) => warnings.push(format!("{}: {e}", est.name())),
        }
    }
    if constant {
        warnings.push("constant outcome; all eigenvalue estimates set to 0".into());
    }
    Ok(DiagnosticDataset { points, curve, variant, warnings })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Row {
    pub p: f64,
    pub levels: u32,
    pub n: usize,
    pub var_gls: f64,
    pub var_mean: f64,
    pub ratio: f64,
}

/// `Var(GLS)/Var(mean)` for a balanced 0/1 outcome on the two-state chain
/// with stay probability `p` (`λ = 2p − 1`, `β² = 1/4`), on complete binary
/// trees with the given numbers of levels.
pub fn figure1_ratio(p_grid: &[f64], levels: &[u32]) -> Result<Vec<Figure1Row>> {
    if let Some(p) = p_grid.iter().find(|p| !(**p > 0.5 && **p < 1.0)) {
        return Err(Error::InvalidParameters(format!("p = {p} must lie in (1/2, 1)")));
    }
    let beta2 = 0.25;
    let mut rows = Vec::new();
    for &lv in levels {
        let tree = complete_binary_tree(lv)?;
        let dist = tree_distance_distribution(&tree);
        for &p in p_grid {
            let lambda = 2.0 * p - 1.0;
            let var_gls = 1.0 / one_sigma_inv_one_ranktwo(tree.len(), beta2, lambda)?;
            let var_mean = beta2 * distance_pgf(&dist, lambda)?;
            rows.push(Figure1Row { p, levels: lv, n: tree.len(), var_gls, var_mean, ratio: var_gls / var_mean });
        }
    }
    rows.sort_by(|a, b| a.p.total_cmp(&b.p).then(a.levels.cmp(&b.levels)));
    Ok(rows)
}

/// Outcome labels for SBM-fGLS on outcome blocks, exposed for reporting.
pub fn outcome_block_count(sample: &RdsSample) -> usize {
    outcome_blocks(&sample.outcome).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::referral::ReferralTree;

    const SMALL: &str = r#"
[network]
source = "dcsbm"
nodes = 300
expected_degree = 12

[outcomes]
aligned = { block_values = [1.0, 1.0, 0.0] }
flat = { constant = 0.5 }
coin = { rate = 0.5 }

[walk]
offspring = "fast"
seed_rule = "uniform"

[run]
replicates = 6
sample_sizes = [20, 40]
seed = 3
"#;

    #[test]
    fn config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
        assert_eq!(cfg.outcomes.len(), 3);
        assert_eq!(cfg.estimators.resolve().unwrap().len(), 6);
        assert_eq!(cfg.walk.max_restarts, 1000);
        assert!(matches!(cfg.network, NetworkConfig::Dcsbm { nodes: 300, .. }));
    }

    #[test]
    fn config_rejects_bad_values() {
        let bad = SMALL.replace("rate = 0.5", "rate = 1.5");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = SMALL.replace("replicates = 6", "replicates = 0");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SMALL.replace("offspring = \"fast\"", "offspring = \"warp\"");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SMALL.replace("[run]", "[run]\nbogus = 1");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
        let a = run_rmse_experiment(&cfg, Some(2)).unwrap();
        let b = run_rmse_experiment(&cfg, Some(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 3 * 2 * 6);
        for row in a.rows.iter().filter(|r| r.outcome == "flat") {
            assert_eq!(row.rmse, 0.0, "{row:?}");
        }
        for row in &a.rows {
            let r = row.replicates as f64;
            let lhs = row.rmse.powi(2);
            let rhs = row.bias.powi(2) + row.sd.powi(2) * (r - 1.0) / r;
            assert!((lhs - rhs).abs() < 1e-10, "{row:?}");
        }
    }

    #[test]
    fn rmse_row_by_hand() {
        let row = rmse_row("mean", 10, "y", &[1.0, 3.0], 1.0, 0);
        assert_eq!(row.bias, 1.0);
        assert!((row.rmse - 2f64.sqrt()).abs() < 1e-15);
        assert!((row.sd - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn figure1_ratios_below_one() {
        let rows = figure1_ratio(&[0.6, 0.75, 0.9], &[5, 7, 9]).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.ratio < 1.0));
        assert!(figure1_ratio(&[0.5], &[3]).is_err());
    }

    #[test]
    fn diagnostics_structure() {
        let tree = crate::referral::complete_binary_tree(5).unwrap();
        let n = tree.len();
        let y: Vec<f64> = (0..n).map(|i| ((i / 3) % 2) as f64).collect();
        let block: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let s = RdsSample::new(tree, (0..n).collect(), y, vec![2.0; n], Some(block)).unwrap();
        let d = emit_diagnostics(&s, RseVariant::AsPrinted).unwrap();
        assert_eq!(d.points.len(), 1 + 1 + 1 + 2, "{:?}", d.warnings);
        assert_eq!(d.curve.len(), 181);
        assert!(d.points.iter().all(|p| p.rse > 0.0));

        let flat = RdsSample { outcome: vec![1.0; n], ..s };
        let d = emit_diagnostics(&flat, RseVariant::AsPrinted).unwrap();
        assert_eq!(d.points.len(), 1 + 1 + 0 + 2);
        let grey0 = 1.0 / (n as f64).sqrt();
        assert!(d.points.iter().all(|p| p.lambda_hat == 0.0 && (p.rse - grey0).abs() < 1e-14));
    }

    #[test]
    fn preferential_weights_only_inside_chosen_blocks() {
        let g = WeightedGraph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let blocks = [0, 0, 1, 1];
        let h = preferential_graph(&g, Some(&blocks), Some(&[1]), 10.0).unwrap();
        assert_eq!((h.weight(0, 1), h.weight(1, 2), h.weight(2, 3)), (1.0, 1.0, 10.0));
        let all = preferential_graph(&g, Some(&blocks), None, 10.0).unwrap();
        assert_eq!(all.weight(0, 1), 10.0);
        let _ = ReferralTree::path(1);
    }
}
