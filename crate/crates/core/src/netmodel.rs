//! Population networks, the degree-corrected stochastic blockmodel, the
//! random-walk transition operator and its spectrum.
//!
//! The walk on a weighted undirected graph moves from `i` to `j` with
//! probability `w_ij / deg(i)`; it is reversible with respect to
//! `pi_i ∝ deg(i)`. All spectral work goes through the symmetric matrix
//! `Π^{1/2} P Π^{-1/2}` so only symmetric eigenproblems are solved.

use std::collections::{HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::linalg::{ordered_symmetric_eigen, symmetrize};

/// Largest population for which dense `N × N` matrices are built.
pub const DENSE_LIMIT: usize = 2_000;

const STOCHASTIC_TOL: f64 = 1e-10;

/// Undirected graph with symmetric nonnegative edge weights.
///
/// Self-loops are allowed (they contribute their weight once to the degree).
/// Isolated nodes are allowed here; consumers that need a walk either prune
/// to [`WeightedGraph::largest_component`] or get a degenerate-node error from
/// [`build_transition`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    degrees: Vec<f64>,
}

impl WeightedGraph {
    /// Builds a graph from unordered weighted pairs. Duplicate pairs, ids out
    /// of range and non-positive weights are rejected.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if num_nodes == 0 {
            return Err(Error::InvalidParameters("graph must have at least one node".into()));
        }
        let mut adjacency = vec![Vec::new(); num_nodes];
        let mut seen = HashSet::new();
        for (u, v, w) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidParameters(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameters(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidParameters(format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u].push((v, w));
            if u != v {
                adjacency[v].push((u, w));
            }
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(j, _)| j);
        }
        Ok(Self::from_sorted_adjacency(adjacency))
    }

    fn from_sorted_adjacency(adjacency: Vec<Vec<(usize, f64)>>) -> Self {
        let degrees = adjacency
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w).sum())
            .collect();
        Self { adjacency, degrees }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    /// Number of unordered pairs with positive weight (self-loops included).
    pub fn num_edges(&self) -> usize {
        self.edges().count()
    }

    /// Weighted degree `Σ_j w_ij`.
    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Number of distinct contacts, ignoring weights. This is what a
    /// participant would report as their number of contacts.
    pub fn contacts(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Neighbors of `i` in increasing id order, with weights.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|pos| self.adjacency[i][pos].1)
            .unwrap_or(0.0)
    }

    /// Unordered edges `(i, j, w)` with `i <= j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |&&(j, _)| j >= i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.adjacency[i].is_empty()).collect()
    }

    /// Connected-component label per node; labels are assigned in order of
    /// each component's smallest node id.
    pub fn component_labels(&self) -> Vec<usize> {
        let n = self.num_nodes();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.component_labels().iter().all(|&c| c == 0)
    }

    /// Induced subgraph on the largest connected component (smallest label
    /// wins ties), with the original id of each retained node.
    pub fn largest_component(&self) -> (WeightedGraph, Vec<usize>) {
        let labels = self.component_labels();
        let count = labels.iter().max().map_or(0, |&m| m + 1);
        let mut sizes = vec![0usize; count];
        for &l in &labels {
            sizes[l] += 1;
        }
        let best = (0..count).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap_or(0);
        let keep: Vec<usize> = (0..self.num_nodes()).filter(|&i| labels[i] == best).collect();
        (self.induced(&keep), keep)
    }

    /// Subgraph induced by `nodes` (given in the order that defines new ids).
    pub fn induced(&self, nodes: &[usize]) -> WeightedGraph {
        let mut new_id = vec![usize::MAX; self.num_nodes()];
        for (k, &i) in nodes.iter().enumerate() {
            new_id[i] = k;
        }
        let adjacency = nodes
            .iter()
            .map(|&i| {
                let mut row: Vec<(usize, f64)> = self.adjacency[i]
                    .iter()
                    .filter(|&&(j, _)| new_id[j] != usize::MAX)
                    .map(|&(j, w)| (new_id[j], w))
                    .collect();
                row.sort_by_key(|&(j, _)| j);
                row
            })
            .collect();
        Self::from_sorted_adjacency(adjacency)
    }

    /// Same topology with every weight replaced by `f(i, j, w)`.
    pub fn reweighted<F>(&self, f: F) -> Result<WeightedGraph>
    where
        F: Fn(usize, usize, f64) -> f64,
    {
        let edges: Vec<_> = self.edges().map(|(i, j, w)| (i, j, f(i, j, w))).collect();
        WeightedGraph::from_edges(self.num_nodes(), edges)
    }
}

/// Parameters of a degree-corrected stochastic blockmodel. Block labels are
/// 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct DcSbmParams {
    z: Vec<usize>,
    theta: Vec<f64>,
    b: DMatrix<f64>,
}

impl DcSbmParams {
    pub fn new(z: Vec<usize>, theta: Vec<f64>, b: DMatrix<f64>) -> Result<Self> {
        let k = b.nrows();
        if b.ncols() != k || k == 0 {
            return Err(Error::InvalidParameters("block matrix must be square and nonempty".into()));
        }
        if z.len() != theta.len() || z.is_empty() {
            return Err(Error::Dimension { expected: z.len(), found: theta.len() });
        }
        let scale = b.amax().max(1.0);
        for u in 0..k {
            for v in 0..k {
                if !(b[(u, v)] >= 0.0) || !b[(u, v)].is_finite() {
                    return Err(Error::InvalidParameters(format!("B[{u},{v}] must be finite and nonnegative")));
                }
                if (b[(u, v)] - b[(v, u)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameters("block matrix must be symmetric".into()));
                }
            }
        }
        let mut sums = vec![0.0; k];
        for (&u, &t) in z.iter().zip(&theta) {
            if u >= k {
                return Err(Error::InvalidParameters(format!("block label {u} outside 0..{k}")));
            }
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameters("theta must be positive".into()));
            }
            sums[u] += t;
        }
        for (u, s) in sums.iter().enumerate() {
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameters(format!(
                    "theta sums to {s} in block {u}, expected 1"
                )));
            }
        }
        Ok(Self { z, theta, b })
    }

    /// Normalizes arbitrary positive weights to sum to one within each block.
    pub fn with_unnormalized_theta(z: Vec<usize>, weights: Vec<f64>, b: DMatrix<f64>) -> Result<Self> {
        let k = b.nrows();
        let mut sums = vec![0.0; k];
        for (&u, &w) in z.iter().zip(&weights) {
            if u < k {
                sums[u] += w;
            }
        }
        let theta = z
            .iter()
            .zip(&weights)
            .map(|(&u, &w)| if u < k { w / sums[u] } else { w })
            .collect();
        Self::new(z, theta, b)
    }

    pub fn num_nodes(&self) -> usize {
        self.z.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.b.nrows()
    }

    pub fn labels(&self) -> &[usize] {
        &self.z
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn block_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn edge_probability(&self, i: usize, j: usize) -> f64 {
        self.theta[i] * self.theta[j] * self.b[(self.z[i], self.z[j])]
    }

    /// Largest `θ_i θ_j B` over distinct pairs, found from the two largest
    /// thetas of each block.
    pub fn max_edge_probability(&self) -> f64 {
        let k = self.num_blocks();
        let mut top = vec![(0.0f64, 0.0f64); k];
        for (&u, &t) in self.z.iter().zip(&self.theta) {
            let (a, b) = top[u];
            top[u] = if t > a { (t, a) } else if t > b { (a, t) } else { (a, b) };
        }
        let mut best: f64 = 0.0;
        for u in 0..k {
            for v in u..k {
                let p = if u == v {
                    top[u].0 * top[u].1
                } else {
                    top[u].0 * top[v].0
                } * self.b[(u, v)];
                best = best.max(p);
            }
        }
        best
    }
}

/// Blockmodel parameterised by a matrix of referral counts between blocks:
/// the counts are symmetrized and normalized to sum to one, block sizes are
/// proportional to the symmetrized row sums (so every block has the same
/// expected degree), and `B = expected_degree · N · Q`. Degree parameters are
/// `0.3 + Gamma(shape 200, rate 300)` normalized within each block.
pub fn dcsbm_from_referral_counts<R: Rng + ?Sized>(
    counts: &DMatrix<f64>,
    num_nodes: usize,
    expected_degree: f64,
    rng: &mut R,
) -> Result<DcSbmParams> {
    let k = counts.nrows();
    if counts.ncols() != k || k == 0 {
        return Err(Error::InvalidParameters("referral counts must be square".into()));
    }
    if num_nodes < k {
        return Err(Error::InvalidParameters("fewer nodes than blocks".into()));
    }
    let sym = symmetrize(counts);
    let total = sym.sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameters("referral counts sum to zero".into()));
    }
    let q = sym / total;
    let proportions: Vec<f64> = (0..k).map(|u| q.row(u).sum()).collect();
    let sizes = apportion(&proportions, num_nodes);
    if let Some(u) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::DegenerateBlock { block: u });
    }
    let z: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(u, &s)| std::iter::repeat_n(u, s))
        .collect();
    let gamma = Gamma::new(200.0, 1.0 / 300.0).expect("valid gamma parameters");
    let weights: Vec<f64> = (0..num_nodes).map(|_| 0.3 + gamma.sample(rng)).collect();
    let b = q * (expected_degree * num_nodes as f64);
    DcSbmParams::with_unnormalized_theta(z, weights, b)
}

/// Largest-remainder rounding of `total · proportions`.
fn apportion(proportions: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = proportions.iter().sum();
    let exact: Vec<f64> = proportions.iter().map(|p| p / sum * total as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut remaining = total - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &u in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        sizes[u] += 1;
        remaining -= 1;
    }
    sizes
}

/// Expected adjacency, expected transition matrix and its stationary law.
#[derive(Debug, Clone)]
pub struct ExpectedDcSbm {
    pub adjacency: DMatrix<f64>,
    pub transition: DMatrix<f64>,
    pub pi: Vec<f64>,
    /// `1ᵀ B 1`, equal to the total expected degree.
    pub m: f64,
}

impl ExpectedDcSbm {
    /// The expected adjacency as a complete weighted graph (with self-loops),
    /// whose walk is the expected chain.
    pub fn to_graph(&self) -> Result<WeightedGraph> {
        let n = self.adjacency.nrows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i..n {
                let w = self.adjacency[(i, j)];
                if w > 0.0 {
                    edges.push((i, j, w));
                }
            }
        }
        WeightedGraph::from_edges(n, edges)
    }
}

pub fn dcsbm_expected_matrices(params: &DcSbmParams) -> Result<ExpectedDcSbm> {
    let n = params.num_nodes();
    if n > DENSE_LIMIT {
        return Err(Error::Capacity { n, limit: DENSE_LIMIT });
    }
    let adjacency = DMatrix::from_fn(n, n, |i, j| params.edge_probability(i, j));
    let m = params.block_matrix().sum();
    let row_sums: Vec<f64> = (0..n).map(|i| adjacency.row(i).sum()).collect();
    if let Some(i) = row_sums.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::DegenerateBlock { block: params.labels()[i] });
    }
    let transition = DMatrix::from_fn(n, n, |i, j| adjacency[(i, j)] / row_sums[i]);
    let pi = row_sums.iter().map(|d| d / m).collect();
    Ok(ExpectedDcSbm { adjacency, transition, pi, m })
}

/// Draws an unweighted graph with independent edges `θ_i θ_j B_{z(i)z(j)}`
/// and no self-loops. Isolated nodes are kept.
pub fn dcsbm_sample<R: Rng + ?Sized>(params: &DcSbmParams, rng: &mut R) -> Result<WeightedGraph> {
    let pmax = params.max_edge_probability();
    if pmax > 1.0 {
        return Err(Error::InvalidParameters(format!(
            "edge probability {pmax} exceeds one"
        )));
    }
    let n = params.num_nodes();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let p = params.edge_probability(i, j);
            if p > 0.0 && rng.random::<f64>() < p {
                adjacency[i].push((j, 1.0));
                adjacency[j].push((i, 1.0));
            }
        }
    }
    // Rows are filled in increasing neighbor order already.
    Ok(WeightedGraph::from_sorted_adjacency(adjacency))
}

/// Random walk on a weighted graph, `P_ij = w_ij / deg(i)`.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    graph: WeightedGraph,
    pi: Vec<f64>,
}

pub fn build_transition(graph: &WeightedGraph) -> Result<TransitionModel> {
    if let Some(node) = (0..graph.num_nodes()).find(|&i| !(graph.degree(i) > 0.0)) {
        return Err(Error::DegenerateNode { node });
    }
    let total: f64 = graph.degrees().iter().sum();
    let pi = graph.degrees().iter().map(|d| d / total).collect();
    Ok(TransitionModel { graph: graph.clone(), pi })
}

impl TransitionModel {
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn num_states(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn probability(&self, i: usize, j: usize) -> f64 {
        self.graph.weight(i, j) / self.graph.degree(i)
    }

    /// Nonzero entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let d = self.graph.degree(i);
        self.graph.neighbors(i).iter().map(move |&(j, w)| (j, w / d))
    }

    /// Draws the next state from row `i`.
    pub fn step<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> usize {
        let row = self.graph.neighbors(i);
        let target = rng.random::<f64>() * self.graph.degree(i);
        let mut acc = 0.0;
        for &(j, w) in row {
            acc += w;
            if target < acc {
                return j;
            }
        }
        row.last().map(|&(j, _)| j).expect("nonzero degree")
    }

    /// Irreducible iff the support graph is connected.
    pub fn is_irreducible(&self) -> bool {
        self.graph.is_connected()
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.num_states())
            .map(|i| (self.row(i).map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_detailed_balance_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.num_states() {
            for (j, p) in self.row(i) {
                let back = self.probability(j, i);
                worst = worst.max((self.pi[i] * p - self.pi[j] * back).abs());
            }
        }
        worst
    }

    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let n = self.num_states();
        if n > DENSE_LIMIT {
            return Err(Error::Capacity { n, limit: DENSE_LIMIT });
        }
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                p[(i, j)] = v;
            }
        }
        Ok(p)
    }
}

/// Eigenvalues of a reversible chain and its `π`-orthonormal eigenfunctions
/// (column `ℓ` of `eigenfunctions` is `f_ℓ`).
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: DMatrix<f64>,
    pub pi: Vec<f64>,
}

impl SpectralDecomp {
    pub fn eigenfunction(&self, l: usize) -> DVector<f64> {
        self.eigenfunctions.column(l).into_owned()
    }

    /// `⟨f, g⟩_π`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).zip(&self.pi).map(|((a, b), p)| a * b * p).sum()
    }
}

pub fn spectral_decompose(model: &TransitionModel) -> Result<SpectralDecomp> {
    spectral_decompose_dense(&model.dense()?, model.pi())
}

/// Decomposes a dense transition matrix that must be reversible with respect
/// to `pi`.
pub fn spectral_decompose_dense(p: &DMatrix<f64>, pi: &[f64]) -> Result<SpectralDecomp> {
    let n = p.nrows();
    if p.ncols() != n || pi.len() != n {
        return Err(Error::Dimension { expected: n, found: pi.len() });
    }
    if pi.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameters("stationary distribution must be positive".into()));
    }
    for i in 0..n {
        let s: f64 = p.row(i).sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidParameters(format!("row {i} of P sums to {s}")));
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs());
        }
    }
    if worst > STOCHASTIC_TOL {
        return Err(Error::ReversibilityViolation { max_violation: worst });
    }

    let sqrt_pi: Vec<f64> = pi.iter().map(|x| x.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| sqrt_pi[i] * p[(i, j)] / sqrt_pi[j]);
    let eig = ordered_symmetric_eigen(symmetrize(&s));
    let eigenfunctions = DMatrix::from_fn(n, n, |i, l| eig.vectors[(i, l)] / sqrt_pi[i]);
    Ok(SpectralDecomp {
        eigenvalues: eig.values,
        eigenfunctions,
        pi: pi.to_vec(),
    })
}

/// `β_ℓ = ⟨y, f_ℓ⟩_π`; `β_1` is the stationary mean of `y`.
pub fn beta_coefficients(y: &[f64], spec: &SpectralDecomp) -> Result<Vec<f64>> {
    let n = spec.pi.len();
    if y.len() != n {
        return Err(Error::Dimension { expected: n, found: y.len() });
    }
    Ok((0..spec.eigenvalues.len())
        .map(|l| {
            (0..n)
                .map(|i| y[i] * spec.eigenfunctions[(i, l)] * spec.pi[i])
                .sum()
        })
        .collect())
}

/// Spectrum of a blockmodel's normalized block matrix and the induced
/// eigenfunctions of the expected chain.
#[derive(Debug, Clone)]
pub struct BlockSpectrum {
    /// `D_B^{-1/2} B D_B^{-1/2}`.
    pub b_l: DMatrix<f64>,
    /// Orthonormal eigenvectors of `b_l`, in the order of `eigenvalues`.
    pub u: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// `N × K`; column `ℓ` is `f*_ℓ = sqrt(m) Z D_B^{-1/2} U_ℓ`.
    pub f_star: DMatrix<f64>,
    /// Row sums of `B`.
    pub d_b: Vec<f64>,
    /// `1ᵀ B 1`.
    pub m: f64,
}

pub fn blockmodel_spectrum(b: &DMatrix<f64>, z: &[usize]) -> Result<BlockSpectrum> {
    let k = b.nrows();
    if b.ncols() != k || k == 0 {
        return Err(Error::InvalidParameters("block matrix must be square and nonempty".into()));
    }
    let scale = b.amax().max(f64::MIN_POSITIVE);
    for u in 0..k {
        for v in 0..k {
            if b[(u, v)] < 0.0 || (b[(u, v)] - b[(v, u)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidParameters("block matrix must be symmetric and nonnegative".into()));
            }
        }
    }
    if let Some(&bad) = z.iter().find(|&&u| u >= k) {
        return Err(Error::InvalidParameters(format!("block label {bad} outside 0..{k}")));
    }
    let d_b: Vec<f64> = (0..k).map(|u| b.row(u).sum()).collect();
    if let Some(block) = d_b.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::DegenerateBlock { block });
    }
    let m: f64 = d_b.iter().sum();
    let b_l = DMatrix::from_fn(k, k, |u, v| b[(u, v)] / (d_b[u] * d_b[v]).sqrt());
    let eig = ordered_symmetric_eigen(b_l.clone());
    let f_star = DMatrix::from_fn(z.len(), k, |i, l| {
        m.sqrt() * eig.vectors[(z[i], l)] / d_b[z[i]].sqrt()
    });
    Ok(BlockSpectrum {
        b_l,
        u: eig.vectors,
        eigenvalues: eig.values,
        f_star,
        d_b,
        m,
    })
}

impl BlockSpectrum {
    /// `β*_ℓ` computed at block level from `θ` alone:
    /// `Σ_u U_{uℓ} sqrt(D_B,u / m) Σ_{i∈u} θ_i y_i`.
    pub fn beta_star(&self, params: &DcSbmParams, y: &[f64]) -> Result<Vec<f64>> {
        let n = params.num_nodes();
        if y.len() != n {
            return Err(Error::Dimension { expected: n, found: y.len() });
        }
        let k = self.eigenvalues.len();
        let mut block_sums = vec![0.0; k];
        for i in 0..n {
            block_sums[params.labels()[i]] += params.theta()[i] * y[i];
        }
        Ok((0..k)
            .map(|l| {
                (0..k)
                    .map(|u| self.u[(u, l)] * (self.d_b[u] / self.m).sqrt() * block_sums[u])
                    .sum()
            })
            .collect())
    }
}
