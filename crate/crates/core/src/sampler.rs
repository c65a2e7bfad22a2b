//! Drawing RDS samples from a population network.
//!
//! Two protocols are provided: the Markov walk on a fixed referral tree
//! (sampling with replacement) and wave-by-wave recruitment without
//! replacement, where the tree grows alongside the sample.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::netmodel::{build_transition, TransitionModel, WeightedGraph};
use crate::referral::{galton_watson_tree, OffspringPmf, ReferralTree, DEFAULT_MAX_RESTARTS};

/// A population network together with the node attributes a survey records.
#[derive(Debug, Clone)]
pub struct Population {
    graph: WeightedGraph,
    outcome: Vec<f64>,
    reported_degree: Vec<f64>,
    block: Option<Vec<usize>>,
}

impl Population {
    /// Reported degrees default to the graph's (weighted) degrees.
    pub fn new(graph: WeightedGraph, outcome: Vec<f64>) -> Result<Self> {
        check_len(graph.num_nodes(), outcome.len())?;
        let reported_degree = graph.degrees().to_vec();
        Ok(Self { graph, outcome, reported_degree, block: None })
    }

    pub fn with_blocks(mut self, block: Vec<usize>) -> Result<Self> {
        check_len(self.graph.num_nodes(), block.len())?;
        self.block = Some(block);
        Ok(self)
    }

    /// Overrides what participants report as their number of contacts.
    pub fn with_reported_degree(mut self, degree: Vec<f64>) -> Result<Self> {
        check_len(self.graph.num_nodes(), degree.len())?;
        self.reported_degree = degree;
        Ok(self)
    }

    /// Same attributes on a different edge weighting, e.g. for preferential
    /// recruitment. Reported degrees are kept.
    pub fn with_graph(&self, graph: WeightedGraph) -> Result<Self> {
        check_len(self.graph.num_nodes(), graph.num_nodes())?;
        Ok(Self { graph, ..self.clone() })
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn reported_degree(&self) -> &[f64] {
        &self.reported_degree
    }

    pub fn blocks(&self) -> Option<&[usize]> {
        self.block.as_deref()
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    /// Attaches population attributes to sampled nodes.
    pub fn observe(&self, tree: ReferralTree, node: Vec<usize>) -> Result<RdsSample> {
        let outcome = node.iter().map(|&x| self.outcome[x]).collect();
        let degree = node.iter().map(|&x| self.reported_degree[x]).collect();
        let block = self.block.as_ref().map(|b| node.iter().map(|&x| b[x]).collect());
        RdsSample::new(tree, node, outcome, degree, block)
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// Observed RDS data indexed by referral-tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct RdsSample {
    pub tree: ReferralTree,
    pub node: Vec<usize>,
    pub outcome: Vec<f64>,
    pub degree: Vec<f64>,
    pub block: Option<Vec<usize>>,
}

impl RdsSample {
    pub fn new(
        tree: ReferralTree,
        node: Vec<usize>,
        outcome: Vec<f64>,
        degree: Vec<f64>,
        block: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = tree.len();
        check_len(n, node.len())?;
        check_len(n, outcome.len())?;
        check_len(n, degree.len())?;
        if let Some(b) = &block {
            check_len(n, b.len())?;
        }
        if outcome.iter().chain(&degree).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSample("outcomes and degrees must be finite".into()));
        }
        Ok(Self { tree, node, outcome, degree, block })
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// The first `n` participants.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        Ok(Self {
            tree: self.tree.prefix(n)?,
            node: self.node[..n].to_vec(),
            outcome: self.outcome[..n].to_vec(),
            degree: self.degree[..n].to_vec(),
            block: self.block.as_ref().map(|b| b[..n].to_vec()),
        })
    }

    /// True when no population node was sampled twice.
    pub fn all_distinct(&self) -> bool {
        let mut nodes = self.node.clone();
        nodes.sort_unstable();
        nodes.windows(2).all(|w| w[0] != w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    WithReplacement,
    #[default]
    WithoutReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedRule {
    /// Proportional to weighted degree.
    StationaryPi,
    Uniform,
    /// Proportional to the unweighted number of contacts.
    #[default]
    DegreeProportional,
}

#[derive(Debug, Clone)]
pub struct WalkConfig {
    pub mode: SamplingMode,
    pub offspring: OffspringPmf,
    pub target_n: usize,
    pub seed_rule: SeedRule,
    pub max_restarts: usize,
}

impl WalkConfig {
    pub fn new(offspring: OffspringPmf, target_n: usize) -> Self {
        Self {
            mode: SamplingMode::default(),
            offspring,
            target_n,
            seed_rule: SeedRule::default(),
            max_restarts: DEFAULT_MAX_RESTARTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_n == 0 {
            return Err(Error::InvalidParameters("target_n must be at least 1".into()));
        }
        OffspringPmf::new(self.offspring.probabilities().to_vec()).map(|_| ())
    }
}

/// A sample plus the number of failed attempts that preceded it.
#[derive(Debug, Clone)]
pub struct SampleDraw {
    pub sample: RdsSample,
    pub restarts: usize,
}

fn seed_weights(graph: &WeightedGraph, rule: SeedRule) -> Vec<f64> {
    (0..graph.num_nodes())
        .map(|i| match rule {
            SeedRule::StationaryPi => graph.degree(i),
            SeedRule::Uniform => 1.0,
            SeedRule::DegreeProportional => graph.contacts(i) as f64,
        })
        .collect()
}

fn seed_sampler(graph: &WeightedGraph, rule: SeedRule) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(seed_weights(graph, rule))
        .map_err(|e| Error::InvalidParameters(format!("cannot draw a seed node: {e}")))
}

/// Stationary walk on `tree`: `X_0 ~ π`, then each node independently
/// transitions from its parent's state.
pub fn markov_walk<R: Rng + ?Sized>(
    tree: &ReferralTree,
    model: &TransitionModel,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let pi = WeightedIndex::new(model.pi())
        .map_err(|e| Error::InvalidParameters(format!("invalid stationary distribution: {e}")))?;
    let x0 = pi.sample(rng);
    Ok(markov_walk_from(tree, model, x0, rng))
}

/// Walk on `tree` started from population node `x0`.
pub fn markov_walk_from<R: Rng + ?Sized>(
    tree: &ReferralTree,
    model: &TransitionModel,
    x0: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut node = Vec::with_capacity(tree.len());
    node.push(x0);
    for tau in 1..tree.len() {
        let parent = tree.parent(tau).expect("non-root");
        node.push(model.step(node[parent], rng));
    }
    node
}

/// Recruitment without replacement: each participant refers up to `R_i`
/// not-yet-sampled contacts, chosen with probability proportional to edge
/// weight. The whole process restarts from a fresh seed on extinction.
pub fn rds_without_replacement<R: Rng + ?Sized>(
    population: &Population,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<SampleDraw> {
    cfg.validate()?;
    let graph = population.graph();
    let seeds = seed_sampler(graph, cfg.seed_rule)?;
    let target = cfg.target_n;
    let mut best = 0;
    let mut sampled = vec![false; graph.num_nodes()];
    for restarts in 0..=cfg.max_restarts {
        sampled.iter_mut().for_each(|s| *s = false);
        let x0 = seeds.sample(rng);
        sampled[x0] = true;
        let mut node = vec![x0];
        let mut parents = vec![None];
        let mut next = 0;
        while node.len() < target && next < node.len() {
            let x = node[next];
            let wanted = cfg.offspring.sample(rng).min(target - node.len());
            let eligible: Vec<(usize, f64)> =
                graph.neighbors(x).iter().copied().filter(|&(j, _)| !sampled[j]).collect();
            let recruits: Vec<usize> = if wanted >= eligible.len() {
                eligible.iter().map(|&(j, _)| j).collect()
            } else {
                eligible
                    .choose_multiple_weighted(rng, wanted, |&(_, w)| w)
                    .map_err(|e| Error::InvalidParameters(format!("edge weights: {e}")))?
                    .map(|&(j, _)| j)
                    .collect()
            };
            for j in recruits {
                sampled[j] = true;
                node.push(j);
                parents.push(Some(next));
            }
            next += 1;
        }
        if node.len() == target {
            let tree = ReferralTree::from_parents(parents)?;
            return Ok(SampleDraw { sample: population.observe(tree, node)?, restarts });
        }
        best = best.max(node.len());
    }
    Err(Error::SamplingFailed { target, reached: best, restarts: cfg.max_restarts + 1 })
}

/// Draws one sample under `cfg`. With replacement, the tree is a
/// Galton-Watson tree and the walk starts from a seed chosen by
/// `cfg.seed_rule`.
pub fn draw_sample<R: Rng + ?Sized>(
    population: &Population,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<SampleDraw> {
    match cfg.mode {
        SamplingMode::WithoutReplacement => rds_without_replacement(population, cfg, rng),
        SamplingMode::WithReplacement => {
            cfg.validate()?;
            let model = build_transition(population.graph())?;
            let seeds = seed_sampler(population.graph(), cfg.seed_rule)?;
            let gw = galton_watson_tree(&cfg.offspring, cfg.target_n, cfg.max_restarts, rng)?;
            let x0 = seeds.sample(rng);
            let node = markov_walk_from(&gw.tree, &model, x0, rng);
            Ok(SampleDraw { sample: population.observe(gw.tree, node)?, restarts: gw.restarts })
        }
    }
}

/// `Q̂_uv`: referrals from block `u` to block `v`, divided by the sample
/// size `n` (not by the `n - 1` edges).
pub fn referral_counts(sample: &RdsSample, num_blocks: usize) -> Result<DMatrix<f64>> {
    let labels = sample.block.as_ref().ok_or(Error::MissingLabel { node: 0 })?;
    if let Some(tau) = labels.iter().position(|&b| b >= num_blocks) {
        return Err(Error::InvalidSample(format!(
            "node {tau} has block {} but only {num_blocks} blocks were declared",
            labels[tau]
        )));
    }
    let mut q = DMatrix::zeros(num_blocks, num_blocks);
    for (p, c) in sample.tree.edges() {
        q[(labels[p], labels[c])] += 1.0;
    }
    Ok(q / sample.len() as f64)
}
