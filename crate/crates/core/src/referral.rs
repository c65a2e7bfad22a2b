//! Referral trees: who recruited whom.
//!
//! Nodes are numbered so that every parent precedes its children; trees built
//! here use breadth-first numbering, which makes the first `k` nodes of any
//! tree a valid tree on their own (see [`ReferralTree::prefix`]).

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

/// Default cap on Galton-Watson restarts.
pub const DEFAULT_MAX_RESTARTS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferralTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl ReferralTree {
    /// `parents[0]` must be `None` (the seed); every other node needs a
    /// parent with a smaller index.
    pub fn from_parents(parents: Vec<Option<usize>>) -> Result<Self> {
        if parents.is_empty() {
            return Err(Error::InvalidTree("tree must contain the root".into()));
        }
        if parents[0].is_some() {
            return Err(Error::InvalidTree("node 0 must be the root".into()));
        }
        let mut children = vec![Vec::new(); parents.len()];
        for (tau, p) in parents.iter().enumerate().skip(1) {
            match *p {
                Some(p) if p < tau => children[p].push(tau),
                Some(p) => {
                    return Err(Error::InvalidTree(format!(
                        "node {tau} has parent {p}; parents must precede children"
                    )))
                }
                None => return Err(Error::InvalidTree(format!("node {tau} has no parent; only node 0 may be a root"))),
            }
        }
        Ok(Self { parent: parents, children })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        Self::from_parents((0..n).map(|t| t.checked_sub(1)).collect())
    }

    /// Root `0` with `n - 1` leaves.
    pub fn star(n: usize) -> Result<Self> {
        Self::from_parents((0..n).map(|t| if t == 0 { None } else { Some(0) }).collect())
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, tau: usize) -> Option<usize> {
        self.parent[tau]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn children(&self, tau: usize) -> &[usize] {
        &self.children[tau]
    }

    /// Degree in the undirected tree.
    pub fn degree(&self, tau: usize) -> usize {
        self.children[tau].len() + usize::from(self.parent[tau].is_some())
    }

    /// Tree edges as `(parent, child)`, ordered by child.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(tau, p)| p.map(|p| (p, tau)))
    }

    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.len()];
        for tau in 1..self.len() {
            depth[tau] = depth[self.parent[tau].expect("non-root")] + 1;
        }
        depth
    }

    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// First `n` nodes. Valid because parents precede children.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidTree(format!("prefix of {n} nodes from a tree of {}", self.len())));
        }
        Self::from_parents(self.parent[..n].to_vec())
    }

    /// Distances from `source` to every node.
    pub fn distances_from(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.len()];
        let mut queue = VecDeque::from([source]);
        dist[source] = 0;
        while let Some(u) = queue.pop_front() {
            let next = dist[u] + 1;
            let neighbors = self.children[u].iter().copied().chain(self.parent[u]);
            for v in neighbors {
                if dist[v] == u32::MAX {
                    dist[v] = next;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn diameter(&self) -> usize {
        let from_root = self.distances_from(0);
        let far = argmax(&from_root);
        let from_far = self.distances_from(far);
        from_far[argmax(&from_far)] as usize
    }

    /// Row-major `n × n` matrix of pairwise distances.
    pub fn distance_matrix(&self) -> Result<Vec<u16>> {
        let diameter = self.diameter();
        if diameter > u16::MAX as usize {
            return Err(Error::InvalidTree(format!("diameter {diameter} exceeds {}", u16::MAX)));
        }
        let n = self.len();
        let mut out = Vec::with_capacity(n * n);
        for s in 0..n {
            out.extend(self.distances_from(s).into_iter().map(|d| d as u16));
        }
        Ok(out)
    }
}

fn argmax(v: &[u32]) -> usize {
    v.iter()
        .enumerate()
        .max_by_key(|&(i, &d)| (d, std::cmp::Reverse(i)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Complete binary tree with `2^levels - 1` nodes in breadth-first order.
pub fn complete_binary_tree(levels: u32) -> Result<ReferralTree> {
    if levels == 0 || levels > 30 {
        return Err(Error::InvalidTree(format!("levels must be in 1..=30, got {levels}")));
    }
    let n = (1usize << levels) - 1;
    ReferralTree::from_parents((0..n).map(|t| if t == 0 { None } else { Some((t - 1) / 2) }).collect())
}

/// Probability mass function of the number of referrals per participant.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringPmf(Vec<f64>);

impl OffspringPmf {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidParameters("offspring pmf is empty".into()));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameters("offspring probabilities must be nonnegative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameters(format!("offspring pmf sums to {total}")));
        }
        Ok(Self(probabilities))
    }

    /// `P(R=0)=1/6, P(R=1)=1/3, P(R=2)=1/3, P(R=3)=1/6`; mean 1.5.
    pub fn uniform_recruitment() -> Self {
        Self(vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0])
    }

    /// Zero-free referral distribution over 1..=6 with mean 2.36, above the
    /// critical threshold of the observed referral network.
    pub fn fast_referral() -> Self {
        Self(vec![0.0, 0.30, 0.31, 0.21, 0.11, 0.05, 0.02])
    }

    /// [`Self::fast_referral`] with zeros reintroduced so the mean drops to
    /// 1.78, below the critical threshold.
    pub fn slow_referral() -> Self {
        let zero_mass = 1.0 - 1.78 / 2.36;
        let mut p: Vec<f64> = Self::fast_referral().0.iter().map(|x| x * (1.0 - zero_mass)).collect();
        p[0] = zero_mass;
        Self(p)
    }

    /// Looks up a named preset: `uniform`, `fast`, or `slow`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(Self::uniform_recruitment()),
            "fast" => Some(Self::fast_referral()),
            "slow" => Some(Self::slow_referral()),
            _ => None,
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn max_offspring(&self) -> usize {
        self.0.len() - 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        // Rounding can leave acc slightly below one; fall back to the last
        // outcome with positive mass.
        self.0.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct GaltonWatson {
    pub tree: ReferralTree,
    /// Number of extinct attempts discarded before success.
    pub restarts: usize,
}

/// Breadth-first Galton-Watson tree truncated at exactly `target_n` nodes,
/// restarting with fresh draws whenever the process dies out first.
pub fn galton_watson_tree<R: Rng + ?Sized>(
    offspring: &OffspringPmf,
    target_n: usize,
    max_restarts: usize,
    rng: &mut R,
) -> Result<GaltonWatson> {
    if target_n == 0 {
        return Err(Error::InvalidParameters("target size must be positive".into()));
    }
    let mut restarts = 0;
    loop {
        let mut parents: Vec<Option<usize>> = vec![None];
        let mut next = 0;
        while parents.len() < target_n && next < parents.len() {
            let r = offspring.sample(rng).min(target_n - parents.len());
            parents.extend(std::iter::repeat_n(Some(next), r));
            next += 1;
        }
        if parents.len() == target_n {
            return Ok(GaltonWatson {
                tree: ReferralTree::from_parents(parents)?,
                restarts,
            });
        }
        restarts += 1;
        if restarts > max_restarts {
            return Err(Error::ImpossibleTarget { target: target_n, restarts });
        }
    }
}

/// Law of the distance between two independent uniform tree nodes, stored
/// as ordered-pair counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceDistribution {
    counts: Vec<u64>,
    n: usize,
}

impl DistanceDistribution {
    pub fn from_counts(counts: Vec<u64>, n: usize) -> Self {
        Self { counts, n }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Ordered pairs `(σ, τ)` at each distance, including `σ = τ`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn probability(&self, d: usize) -> f64 {
        self.counts.get(d).map_or(0.0, |&c| c as f64 / (self.n as f64).powi(2))
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|d| self.probability(d)).collect()
    }

    pub fn diameter(&self) -> usize {
        self.counts.len() - 1
    }
}

/// Exact distance law. Pairs are counted at their lowest common ancestor by
/// merging per-subtree depth histograms bottom-up, which costs
/// `O(n · height²)` at worst instead of `n` breadth-first searches.
pub fn tree_distance_distribution(tree: &ReferralTree) -> DistanceDistribution {
    let n = tree.len();
    let mut counts: Vec<u64> = vec![n as u64];
    let mut hist: Vec<Vec<u64>> = vec![Vec::new(); n];
    for u in (0..n).rev() {
        let mut own = vec![1u64];
        for &c in tree.children(u) {
            let child = std::mem::take(&mut hist[c]);
            // child depths shift by one relative to u
            for (a, &ca) in own.iter().enumerate() {
                for (b, &cb) in child.iter().enumerate() {
                    let d = a + b + 1;
                    if counts.len() <= d {
                        counts.resize(d + 1, 0);
                    }
                    counts[d] += 2 * ca * cb;
                }
            }
            if own.len() < child.len() + 1 {
                own.resize(child.len() + 1, 0);
            }
            for (b, &cb) in child.iter().enumerate() {
                own[b + 1] += cb;
            }
        }
        hist[u] = own;
    }
    DistanceDistribution { counts, n }
}

/// `𝔾(x) = E[x^D]`, with `0^0 = 1`.
pub fn distance_pgf(dist: &DistanceDistribution, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::Domain(format!("generating function argument {x} outside [-1, 1]")));
    }
    let total = (dist.n as f64).powi(2);
    // Horner from the largest distance down.
    let s = dist.counts.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64);
    Ok(s / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive;

    fn brute_force_counts(tree: &ReferralTree) -> Vec<u64> {
        let mut counts = Vec::new();
        for s in 0..tree.len() {
            for d in tree.distances_from(s) {
                let d = d as usize;
                if counts.len() <= d {
                    counts.resize(d + 1, 0);
                }
                counts[d] += 1;
            }
        }
        counts
    }

    #[test]
    fn binary_tree_shapes() {
        let t = complete_binary_tree(1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.edges().count(), 0);
        let t = complete_binary_tree(2).unwrap();
        assert_eq!(t.children(0), &[1, 2]);
        let t = complete_binary_tree(10).unwrap();
        assert_eq!(t.len(), 1023);
        let mut by_degree = [0usize; 4];
        for tau in 0..t.len() {
            by_degree[t.degree(tau)] += 1;
        }
        // root 2, 510 internal nodes of degree 3, 512 leaves
        assert_eq!(by_degree, [0, 512, 1, 510]);
        assert_eq!(t.height(), 9);
    }

    #[test]
    fn invalid_parent_order_rejected() {
        assert!(ReferralTree::from_parents(vec![None, Some(2), Some(0)]).is_err());
        assert!(ReferralTree::from_parents(vec![None, None]).is_err());
        assert!(ReferralTree::from_parents(vec![Some(0)]).is_err());
    }

    #[test]
    fn three_node_binary_distance_law() {
        let t = complete_binary_tree(2).unwrap();
        let dist = tree_distance_distribution(&t);
        assert_eq!(dist.counts(), &[3, 4, 2]);
        let g = distance_pgf(&dist, 0.5).unwrap();
        assert!((g - 5.5 / 9.0).abs() < 1e-15);
        assert_eq!(distance_pgf(&dist, 1.0).unwrap(), 1.0);
        assert!((distance_pgf(&dist, 0.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_node_distance_law() {
        let dist = tree_distance_distribution(&ReferralTree::path(1).unwrap());
        assert_eq!(dist.probabilities(), vec![1.0]);
        assert_eq!(distance_pgf(&dist, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn pgf_domain() {
        let dist = tree_distance_distribution(&ReferralTree::path(4).unwrap());
        assert!(matches!(distance_pgf(&dist, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn histogram_merge_matches_bfs() {
        let mut rng = derive(11, 0);
        for target in [1usize, 2, 7, 40, 150] {
            let gw = galton_watson_tree(&OffspringPmf::uniform_recruitment(), target, 1000, &mut rng).unwrap();
            let dist = tree_distance_distribution(&gw.tree);
            assert_eq!(dist.counts(), brute_force_counts(&gw.tree).as_slice());
            assert_eq!(dist.counts()[0], target as u64);
        }
        let path = ReferralTree::path(30).unwrap();
        assert_eq!(tree_distance_distribution(&path).counts(), brute_force_counts(&path).as_slice());
    }

    #[test]
    fn deterministic_offspring_gives_binary_tree() {
        let pmf = OffspringPmf::new(vec![0.0, 0.0, 1.0]).unwrap();
        let gw = galton_watson_tree(&pmf, 63, 10, &mut derive(1, 0)).unwrap();
        assert_eq!(gw.tree, complete_binary_tree(6).unwrap());
        assert_eq!(gw.restarts, 0);
    }

    #[test]
    fn extinct_pmf_fails() {
        let pmf = OffspringPmf::new(vec![1.0]).unwrap();
        assert!(galton_watson_tree(&pmf, 1, 5, &mut derive(1, 0)).is_ok());
        match galton_watson_tree(&pmf, 2, 5, &mut derive(1, 0)) {
            Err(Error::ImpossibleTarget { restarts, .. }) => assert_eq!(restarts, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn galton_watson_is_deterministic_and_exact_size() {
        let pmf = OffspringPmf::uniform_recruitment();
        for seed in 0..20 {
            let a = galton_watson_tree(&pmf, 97, 1000, &mut derive(seed, 0)).unwrap();
            let b = galton_watson_tree(&pmf, 97, 1000, &mut derive(seed, 0)).unwrap();
            assert_eq!(a.tree, b.tree);
            assert_eq!(a.tree.len(), 97);
        }
    }

    #[test]
    fn presets_have_reported_means() {
        assert!((OffspringPmf::uniform_recruitment().mean() - 1.5).abs() < 1e-12);
        assert!((OffspringPmf::fast_referral().mean() - 2.36).abs() < 1e-12);
        assert!((OffspringPmf::slow_referral().mean() - 1.78).abs() < 1e-12);
        let total: f64 = OffspringPmf::slow_referral().probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_offspring_of_expanded_nodes() {
        let pmf = OffspringPmf::uniform_recruitment();
        let (mut sum, mut count) = (0usize, 0usize);
        for seed in 0..20 {
            let t = galton_watson_tree(&pmf, 5_000, 1000, &mut derive(seed, 9)).unwrap().tree;
            let last_parent = t.parent(t.len() - 1).unwrap();
            for tau in 0..last_parent {
                sum += t.children(tau).len();
                count += 1;
            }
        }
        let mean = sum as f64 / count as f64;
        // offspring variance is 11/12; s.e. ≈ sqrt(0.917 / count)
        let se = (11.0 / 12.0 / count as f64).sqrt();
        assert!((mean - 1.5).abs() < 4.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn prefix_is_a_tree() {
        let t = complete_binary_tree(5).unwrap();
        let p = t.prefix(10).unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(p.children(4), &[9]);
    }

    #[test]
    fn distance_matrix_is_symmetric() {
        let t = complete_binary_tree(3).unwrap();
        let d = t.distance_matrix().unwrap();
        assert_eq!(d[3 * 7 + 4], 2);
        assert_eq!(d[3 * 7 + 6], 4);
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(d[i * 7 + j], d[j * 7 + i]);
            }
        }
        assert_eq!(t.diameter(), 4);
    }
}
