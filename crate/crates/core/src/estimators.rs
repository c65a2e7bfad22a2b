//! Point estimators of the population mean from an RDS sample.

use nalgebra::DMatrix;

use crate::covariance::{build_sigma, gls_solve, AutoCovariance, GlsResult};
use crate::diagnostics::{ranktwo_rse, rse_from_forms, RseVariant};
use crate::error::{Error, Result};
use crate::linalg::ordered_symmetric_eigen;
use crate::netmodel::{beta_coefficients, SpectralDecomp};
use crate::referral::{tree_distance_distribution, ReferralTree};
use crate::sampler::RdsSample;

/// Estimated eigenvalues are clamped to this magnitude before building `Σ̂`.
pub const EIGENVALUE_CLAMP: f64 = 0.999;

/// Number of candidate means in the auto-fGLS fixed-point search.
pub const AUTO_GRID_POINTS: usize = 401;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimator: String,
    pub mu_hat: f64,
    /// Eigenvalues behind `Σ̂`, leading eigenvalue excluded.
    pub eigenvalues: Vec<f64>,
    pub beta2: Vec<f64>,
    pub nugget: f64,
    pub rse: Option<f64>,
    pub n: usize,
    pub k: Option<usize>,
    pub weights: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    fn plain(estimator: &str, mu_hat: f64, n: usize) -> Self {
        Self {
            estimator: estimator.to_string(),
            mu_hat,
            eigenvalues: Vec::new(),
            beta2: Vec::new(),
            nugget: 0.0,
            rse: None,
            n,
            k: None,
            weights: None,
            warnings: Vec::new(),
        }
    }

    fn constant(estimator: &str, y: &[f64]) -> Self {
        let mut r = Self::plain(estimator, y[0], y.len());
        if y.len() > 1 {
            r.warnings.push("constant outcome; returning the first observation".into());
        }
        r
    }
}

fn check_nonempty(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        Err(Error::InvalidSample("sample is empty".into()))
    } else {
        Ok(())
    }
}

fn check_tree(tree: &ReferralTree, y: &[f64]) -> Result<()> {
    check_nonempty(y)?;
    if tree.len() != y.len() {
        return Err(Error::Dimension { expected: tree.len(), found: y.len() });
    }
    Ok(())
}

fn is_constant(y: &[f64]) -> bool {
    y.iter().all(|&v| v == y[0])
}

fn clamp(lambda: f64) -> f64 {
    lambda.clamp(-EIGENVALUE_CLAMP, EIGENVALUE_CLAMP)
}

/// Sample variance with the `n - 1` denominator; zero when `n = 1`.
pub fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

pub fn mean_estimator(y: &[f64]) -> Result<EstimateReport> {
    check_nonempty(y)?;
    let n = y.len();
    let mu = if is_constant(y) { y[0] } else { y.iter().sum::<f64>() / n as f64 };
    let mut r = EstimateReport::plain("mean", mu, n);
    r.weights = Some(vec![1.0 / n as f64; n]);
    Ok(r)
}

/// Inverse-degree weighting normalized by the harmonic mean degree.
pub fn vh_estimator(y: &[f64], degree: &[f64]) -> Result<EstimateReport> {
    check_nonempty(y)?;
    check_degrees(y, degree)?;
    let inv_total: f64 = degree.iter().map(|d| 1.0 / d).sum();
    let weights: Vec<f64> = degree.iter().map(|d| 1.0 / d / inv_total).collect();
    let mu = if is_constant(y) { y[0] } else { weights.iter().zip(y).map(|(w, y)| w * y).sum() };
    let mut r = EstimateReport::plain("vh", mu, y.len());
    r.weights = Some(weights);
    Ok(r)
}

fn check_degrees(y: &[f64], degree: &[f64]) -> Result<()> {
    if degree.len() != y.len() {
        return Err(Error::Dimension { expected: y.len(), found: degree.len() });
    }
    if let Some(i) = degree.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidSample(format!("participant {i} reports degree {}", degree[i])));
    }
    Ok(())
}

/// `Y_τ / (H⁻¹ deg_τ)` with `H⁻¹ = n⁻¹ Σ 1/deg`.
pub fn harmonic_reweight(y: &[f64], degree: &[f64]) -> Result<Vec<f64>> {
    check_degrees(y, degree)?;
    let h_inv = degree.iter().map(|d| 1.0 / d).sum::<f64>() / y.len() as f64;
    Ok(y.iter().zip(degree).map(|(y, d)| y / (h_inv * d)).collect())
}

/// Sums over the ordered-pair sets `D_k` for `k ≤ 2`.
#[derive(Debug, Clone, PartialEq)]
struct LagMoments {
    pairs: [usize; 3],
    /// `Σ_{D_1} Y_σ Y_τ`.
    prod1: f64,
    /// `Σ_{D_1} (Y_σ + Y_τ)`.
    sum1: f64,
    sq_diff: [f64; 3],
    sum_y: f64,
    sum_y2: f64,
}

impl LagMoments {
    fn new(tree: &ReferralTree, y: &[f64]) -> Self {
        let n = y.len();
        let mut m = Self {
            pairs: [n, 0, 0],
            prod1: 0.0,
            sum1: 0.0,
            sq_diff: [0.0; 3],
            sum_y: y.iter().sum(),
            sum_y2: y.iter().map(|v| v * v).sum(),
        };
        for (p, c) in tree.edges() {
            m.pairs[1] += 2;
            m.prod1 += 2.0 * y[p] * y[c];
            m.sum1 += 2.0 * (y[p] + y[c]);
            m.sq_diff[1] += 2.0 * (y[p] - y[c]).powi(2);
            if let Some(g) = tree.parent(p) {
                m.pairs[2] += 2;
                m.sq_diff[2] += 2.0 * (y[g] - y[c]).powi(2);
            }
        }
        for u in 0..n {
            let kids = tree.children(u);
            let k = kids.len() as f64;
            let s: f64 = kids.iter().map(|&c| y[c]).sum();
            let s2: f64 = kids.iter().map(|&c| y[c] * y[c]).sum();
            m.pairs[2] += kids.len() * kids.len().saturating_sub(1);
            m.sq_diff[2] += 2.0 * k * s2 - 2.0 * s * s;
        }
        m
    }

    fn gamma0(&self, m: f64) -> f64 {
        let n = self.pairs[0] as f64;
        (self.sum_y2 - 2.0 * m * self.sum_y + n * m * m) / n
    }

    fn gamma1(&self, m: f64) -> Option<f64> {
        let c = self.pairs[1] as f64;
        (self.pairs[1] > 0).then(|| (self.prod1 - m * self.sum1 + c * m * m) / c)
    }

    fn delta(&self, k: usize) -> Option<f64> {
        (self.pairs[k] > 0).then(|| (self.sq_diff[k] / self.pairs[k] as f64).max(0.0))
    }
}

/// Nonparametric lag moments at centring value `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagStatistics {
    pub gamma0: f64,
    /// `None` when `D_1` is empty.
    pub gamma1: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    /// `|D_0|, |D_1|, |D_2|` over ordered pairs.
    pub pairs: [usize; 3],
}

pub fn lag_statistics(tree: &ReferralTree, y: &[f64], m: f64) -> Result<LagStatistics> {
    check_tree(tree, y)?;
    let lm = LagMoments::new(tree, y);
    Ok(LagStatistics {
        gamma0: lm.gamma0(m),
        gamma1: lm.gamma1(m),
        delta1: lm.delta(1),
        delta2: lm.delta(2),
        pairs: lm.pairs,
    })
}

/// GLS estimate under `Σ ∝ λ^d` via the sparse inverse:
/// `Σ_σ (1 − λ(deg σ − 1)) Y_σ / (n − λ(n − 2))`.
fn ranktwo_mean(n: usize, sum_y: f64, sum_excess_y: f64, lambda: f64) -> f64 {
    let n = n as f64;
    (sum_y - lambda * sum_excess_y) / (n - lambda * (n - 2.0))
}

fn ranktwo_weights(tree: &ReferralTree, lambda: f64) -> Vec<f64> {
    let n = tree.len() as f64;
    let total = n - lambda * (n - 2.0);
    (0..tree.len())
        .map(|s| (1.0 - lambda * (tree.degree(s) as f64 - 1.0)) / total)
        .collect()
}

fn ranktwo_report(name: &str, tree: &ReferralTree, y: &[f64], lambda: f64, beta2: f64) -> Result<EstimateReport> {
    let weights = ranktwo_weights(tree, lambda);
    let mu = weights.iter().zip(y).map(|(w, y)| w * y).sum();
    let mut r = EstimateReport::plain(name, mu, y.len());
    r.eigenvalues = vec![lambda];
    r.beta2 = vec![beta2];
    r.rse = Some(ranktwo_rse(&tree_distance_distribution(tree), lambda, RseVariant::AsPrinted)?);
    r.k = Some(1);
    r.weights = Some(weights);
    Ok(r)
}

/// Rank-two fGLS whose centring value is a fixed point of the estimator:
/// searches [`AUTO_GRID_POINTS`] values of `m` over `[min Y, max Y]` for
/// the one minimizing `|μ̂(m) − m|`, ties going to the smaller `m`.
pub fn auto_fgls(tree: &ReferralTree, y: &[f64]) -> Result<EstimateReport> {
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    auto_fgls_over(tree, y, lo, hi)
}

/// [`auto_fgls`] searching `m` over `[lo, hi]`. Reweighted outcomes are
/// searched over the range of the raw outcome.
pub fn auto_fgls_over(tree: &ReferralTree, y: &[f64], lo: f64, hi: f64) -> Result<EstimateReport> {
    check_tree(tree, y)?;
    if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidParameters(format!("search range [{lo}, {hi}] is empty")));
    }
    if is_constant(y) {
        return Ok(EstimateReport::constant("auto_fgls", y));
    }
    let lm = LagMoments::new(tree, y);
    let sum_excess: f64 = (0..y.len()).map(|s| (tree.degree(s) as f64 - 1.0) * y[s]).sum();
    let step = (hi - lo) / (AUTO_GRID_POINTS - 1) as f64;
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..AUTO_GRID_POINTS {
        let m = lo + step * i as f64;
        let g0 = lm.gamma0(m);
        let g1 = lm.gamma1(m).unwrap_or(0.0);
        let lambda = clamp(g1 / g0);
        let gap = (ranktwo_mean(y.len(), lm.sum_y, sum_excess, lambda) - m).abs();
        if gap.is_finite() && best.is_none_or(|(b, _, _)| gap < b) {
            best = Some((gap, m, lambda));
        }
    }
    let Some((_, m, lambda)) = best else {
        let mut r = mean_estimator(y)?;
        r.estimator = "auto_fgls".into();
        r.warnings.push("fixed-point search failed; returning the sample mean".into());
        return Ok(r);
    };
    let raw = lm.gamma1(m).unwrap_or(0.0) / lm.gamma0(m);
    let mut r = ranktwo_report("auto_fgls", tree, y, lambda, lm.gamma0(m))?;
    if raw != lambda {
        r.warnings.push(format!("eigenvalue {raw} clamped to {lambda}"));
    }
    Ok(r)
}

/// Rank-two fGLS with `λ̂ = (Δ̂(2) − Δ̂(1)) / (Δ̂(1) + n^{-1/2})`.
pub fn delta_fgls(tree: &ReferralTree, y: &[f64]) -> Result<EstimateReport> {
    check_tree(tree, y)?;
    let lm = LagMoments::new(tree, y);
    if is_constant(y) {
        let mut r = mean_estimator(y)?;
        r.estimator = "delta_fgls".into();
        r.eigenvalues = vec![0.0];
        r.beta2 = vec![1.0];
        r.k = Some(1);
        return Ok(r);
    }
    let d1 = lm.delta(1).ok_or(Error::InsufficientDepth { lag: 1 })?;
    let d2 = lm.delta(2).ok_or(Error::InsufficientDepth { lag: 2 })?;
    let raw = (d2 - d1) / (d1 + (y.len() as f64).powf(-0.5));
    let lambda = clamp(raw);
    let mut r = ranktwo_report("delta_fgls", tree, y, lambda, 1.0)?;
    if raw != lambda {
        r.warnings.push(format!("eigenvalue {raw} clamped to {lambda}"));
    }
    Ok(r)
}

/// SBM-fGLS with blocks `labels` in `0..k`.
pub fn sbm_fgls(tree: &ReferralTree, y: &[f64], labels: &[usize], k: usize) -> Result<EstimateReport> {
    check_tree(tree, y)?;
    if labels.len() != y.len() {
        return Err(Error::Dimension { expected: y.len(), found: labels.len() });
    }
    if let Some(i) = labels.iter().position(|&b| b >= k) {
        return Err(Error::InvalidSample(format!("participant {i} has block {} but K = {k}", labels[i])));
    }
    let mut counts = DMatrix::zeros(k, k);
    for (p, c) in tree.edges() {
        counts[(labels[p], labels[c])] += 1.0;
    }
    sbm_fgls_from_counts(tree, y, labels, &counts)
}

/// SBM-fGLS from a referral-count matrix of any scale. Counts are rescaled
/// to total `(n − 1)/n`, which is what the sample's own tree produces, so
/// multiplying every count by a constant changes nothing.
pub fn sbm_fgls_from_counts(
    tree: &ReferralTree,
    y: &[f64],
    labels: &[usize],
    counts: &DMatrix<f64>,
) -> Result<EstimateReport> {
    check_tree(tree, y)?;
    let n = y.len();
    let k = counts.nrows();
    let mut warnings = Vec::new();
    if n == 1 || is_constant(y) {
        let mut r = EstimateReport::constant("sbm_fgls", y);
        r.k = Some(k);
        return Ok(r);
    }
    let total = counts.sum();
    if !(total > 0.0) {
        return Err(Error::InvalidSample("referral counts are all zero".into()));
    }
    let q = counts * ((n - 1) as f64 / n as f64 / total);
    let qs = (&q + q.transpose()) / 2.0;
    let row: Vec<f64> = qs.row_iter().map(|r| r.sum()).collect();
    let kept: Vec<usize> = (0..k).filter(|&b| row[b] > 0.0).collect();
    if kept.len() < k {
        let dropped: Vec<String> = (0..k).filter(|b| row[*b] <= 0.0).map(|b| b.to_string()).collect();
        warnings.push(format!("blocks without referrals dropped: {}", dropped.join(" ")));
    }
    let mut index = vec![usize::MAX; k];
    for (new, &old) in kept.iter().enumerate() {
        index[old] = new;
    }
    if let Some(t) = labels.iter().position(|&b| index[b] == usize::MAX) {
        return Err(Error::InvalidSample(format!("participant {t} sits in a block without referrals")));
    }
    let kk = kept.len();
    let inv_sqrt: Vec<f64> = kept.iter().map(|&b| row[b].powf(-0.5)).collect();
    let ql = DMatrix::from_fn(kk, kk, |a, b| inv_sqrt[a] * qs[(kept[a], kept[b])] * inv_sqrt[b]);
    let eig = ordered_symmetric_eigen(ql);
    let beta: Vec<f64> = (0..kk)
        .map(|l| {
            y.iter()
                .zip(labels)
                .map(|(y, &b)| y * inv_sqrt[index[b]] * eig.vectors[(index[b], l)])
                .sum::<f64>()
                / n as f64
        })
        .collect();
    let clamped: Vec<f64> = eig.values.iter().map(|&l| clamp(l)).collect();
    for (raw, c) in eig.values.iter().zip(&clamped).skip(1) {
        if raw != c {
            warnings.push(format!("eigenvalue {raw} clamped to {c}"));
        }
    }
    let nugget = sample_variance(y);
    let terms: Vec<(f64, f64)> = beta.iter().zip(&clamped).map(|(b, &l)| (b * b, l)).collect();
    let ac = AutoCovariance::new(terms, nugget)?;
    let sigma = build_sigma(tree, &ac)?;
    let GlsResult { estimate, weights, variance } = gls_solve(&sigma, y)?;
    Ok(EstimateReport {
        estimator: "sbm_fgls".into(),
        mu_hat: estimate,
        eigenvalues: clamped[1..].to_vec(),
        beta2: beta.iter().map(|b| b * b).collect(),
        nugget,
        rse: Some(rse_from_forms(n, 1.0 / variance, sigma.sum(), RseVariant::AsPrinted)),
        n,
        k: Some(kk),
        weights: Some(weights),
        warnings,
    })
}

/// Eigenvalues of the normalized referral matrix `D^{-1/2} Q_s D^{-1/2}`,
/// where `Q_s` is the symmetrized count matrix and `D` its row sums. This
/// is the spectrum SBM-fGLS plugs in before clamping. Blocks without
/// referrals are left out.
pub fn referral_spectrum(counts: &DMatrix<f64>) -> Result<Vec<f64>> {
    let k = counts.nrows();
    if counts.ncols() != k {
        return Err(Error::Dimension { expected: k, found: counts.ncols() });
    }
    if counts.iter().any(|c| *c < 0.0 || !c.is_finite()) || !(counts.sum() > 0.0) {
        return Err(Error::InvalidSample("referral counts must be nonnegative and not all zero".into()));
    }
    let qs = (counts + counts.transpose()) / 2.0;
    let row: Vec<f64> = qs.row_iter().map(|r| r.sum()).collect();
    let kept: Vec<usize> = (0..k).filter(|&b| row[b] > 0.0).collect();
    let ql = DMatrix::from_fn(kept.len(), kept.len(), |a, b| {
        qs[(kept[a], kept[b])] / (row[kept[a]] * row[kept[b]]).sqrt()
    });
    Ok(ordered_symmetric_eigen(ql).values)
}

/// Outcomes divided by an SBM-fGLS estimate of `E[1/deg]` times degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Reweighted {
    pub y: Vec<f64>,
    pub h_inv: f64,
    pub warnings: Vec<String>,
}

pub fn fgls_reweight(
    tree: &ReferralTree,
    y: &[f64],
    degree: &[f64],
    labels: &[usize],
    k: usize,
) -> Result<Reweighted> {
    check_degrees(y, degree)?;
    let inv_deg: Vec<f64> = degree.iter().map(|d| 1.0 / d).collect();
    let est = sbm_fgls(tree, &inv_deg, labels, k)?;
    let mut warnings = est.warnings;
    let h_inv = if est.mu_hat > 0.0 && est.mu_hat.is_finite() {
        est.mu_hat
    } else {
        warnings.push(format!("normalizing constant {} not positive; using the harmonic mean", est.mu_hat));
        inv_deg.iter().sum::<f64>() / y.len() as f64
    };
    Ok(Reweighted {
        y: y.iter().zip(degree).map(|(y, d)| y / (h_inv * d)).collect(),
        h_inv,
        warnings,
    })
}

/// GLS with the true covariance of `y_pop` under the walk described by
/// `spec`. Sample values are `y_pop` at the sampled population nodes.
pub fn oracle_gls(tree: &ReferralTree, nodes: &[usize], spec: &SpectralDecomp, y_pop: &[f64]) -> Result<EstimateReport> {
    if nodes.len() != tree.len() {
        return Err(Error::Dimension { expected: tree.len(), found: nodes.len() });
    }
    let y: Vec<f64> = nodes.iter().map(|&x| y_pop[x]).collect();
    let beta = beta_coefficients(y_pop, spec)?;
    let terms: Vec<(f64, f64)> = beta
        .iter()
        .zip(&spec.eigenvalues)
        .skip(1)
        .filter(|(b, _)| **b != 0.0)
        .map(|(b, &l)| (b * b, l))
        .collect();
    let eigenvalues = terms.iter().map(|t| t.1).collect();
    let beta2 = terms.iter().map(|t| t.0).collect();
    let ac = AutoCovariance::new(terms, 0.0)?;
    let sigma = build_sigma(tree, &ac)?;
    let fit = gls_solve(&sigma, &y)?;
    let mut r = EstimateReport::plain("oracle_gls", fit.estimate, y.len());
    r.eigenvalues = eigenvalues;
    r.beta2 = beta2;
    r.rse = Some(rse_from_forms(y.len(), 1.0 / fit.variance, sigma.sum(), RseVariant::AsPrinted));
    r.weights = Some(fit.weights);
    Ok(r)
}

/// Block labels from the distinct outcome values, in increasing order.
pub fn outcome_blocks(y: &[f64]) -> (Vec<usize>, usize) {
    let mut values: Vec<f64> = y.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let labels = y
        .iter()
        .map(|v| values.binary_search_by(|probe| probe.total_cmp(v)).expect("present"))
        .collect();
    (labels, values.len())
}

/// Estimators available on an [`RdsSample`]. The fGLS variants first
/// reweight outcomes by estimated inverse sampling probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Mean,
    Vh,
    AutoFgls,
    DeltaFgls,
    /// SBM-fGLS with the sample's block labels.
    SbmFgls,
    /// SBM-fGLS with blocks given by the outcome values.
    SbmFglsOutcome,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Self::Mean,
        Self::Vh,
        Self::AutoFgls,
        Self::DeltaFgls,
        Self::SbmFgls,
        Self::SbmFglsOutcome,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Vh => "vh",
            Self::AutoFgls => "auto_fgls",
            Self::DeltaFgls => "delta_fgls",
            Self::SbmFgls => "sbm_fgls",
            Self::SbmFglsOutcome => "sbm_fgls_y",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    pub fn run(self, sample: &RdsSample) -> Result<EstimateReport> {
        let (tree, y, deg) = (&sample.tree, &sample.outcome, &sample.degree);
        check_nonempty(y)?;
        let mut report = match self {
            Self::AutoFgls | Self::DeltaFgls | Self::SbmFgls | Self::SbmFglsOutcome if is_constant(y) => {
                EstimateReport::constant(self.name(), y)
            }
            Self::Mean => mean_estimator(y)?,
            Self::Vh => vh_estimator(y, deg)?,
            Self::AutoFgls => {
                let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                auto_fgls_over(tree, &harmonic_reweight(y, deg)?, lo, hi)?
            }
            Self::DeltaFgls => delta_fgls(tree, &harmonic_reweight(y, deg)?)?,
            Self::SbmFgls | Self::SbmFglsOutcome => {
                let (labels, k) = if self == Self::SbmFgls {
                    let labels = sample.block.clone().ok_or(Error::MissingLabel { node: 0 })?;
                    let k = labels.iter().max().map_or(0, |m| m + 1);
                    (labels, k)
                } else {
                    outcome_blocks(y)
                };
                let rw = fgls_reweight(tree, y, deg, &labels, k)?;
                let mut r = sbm_fgls(tree, &rw.y, &labels, k)?;
                let mut warnings = rw.warnings;
                warnings.append(&mut r.warnings);
                r.warnings = warnings;
                r
            }
        };
        report.estimator = self.name().to_string();
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::ranktwo_gls;
    use crate::referral::complete_binary_tree;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_estimator(&[4.0; 5]).unwrap().mu_hat, 4.0);
        assert!(close(mean_estimator(&[0.0, 1.0, 1.0]).unwrap().mu_hat, 2.0 / 3.0, 1e-15));
        let sigma = DMatrix::identity(3, 3);
        let g = gls_solve(&sigma, &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(g.estimate, mean_estimator(&[0.0, 1.0, 1.0]).unwrap().mu_hat);
    }

    #[test]
    fn vh_examples() {
        assert!(close(vh_estimator(&[1.0, 0.0], &[1.0, 2.0]).unwrap().mu_hat, 2.0 / 3.0, 1e-15));
        let y = [1.0, 5.0, 2.0];
        assert!(close(vh_estimator(&y, &[3.0; 3]).unwrap().mu_hat, mean_estimator(&y).unwrap().mu_hat, 1e-15));
        assert!(vh_estimator(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn lag_statistics_by_hand() {
        let tree = ReferralTree::path(3).unwrap();
        let s = lag_statistics(&tree, &[0.0, 1.0, 0.0], 1.0 / 3.0).unwrap();
        assert!(close(s.gamma0, 2.0 / 9.0, 1e-15));
        assert!(close(s.gamma1.unwrap(), -2.0 / 9.0, 1e-15));
        assert_eq!(s.delta1, Some(1.0));
        assert_eq!(s.delta2, Some(0.0));
        assert_eq!(s.pairs, [3, 4, 2]);
        let s = lag_statistics(&tree, &[2.0; 3], 0.5).unwrap();
        assert!(close(s.gamma0, 2.25, 1e-15));
        assert_eq!(s.delta1, Some(0.0));
    }

    #[test]
    fn lag_pairs_match_brute_force() {
        let tree = complete_binary_tree(4).unwrap();
        let y: Vec<f64> = (0..15).map(|i| ((i * 7) % 5) as f64).collect();
        let s = lag_statistics(&tree, &y, 1.5).unwrap();
        let mut cnt = [0usize; 3];
        let mut sq = [0.0; 3];
        for a in 0..15 {
            for (b, d) in tree.distances_from(a).into_iter().enumerate() {
                if d <= 2 {
                    cnt[d as usize] += 1;
                    sq[d as usize] += (y[a] - y[b]).powi(2);
                }
            }
        }
        assert_eq!(s.pairs, cnt);
        assert!(close(s.delta2.unwrap(), sq[2] / cnt[2] as f64, 1e-12));
        assert!(close(s.delta1.unwrap(), sq[1] / cnt[1] as f64, 1e-12));
    }

    #[test]
    fn ranktwo_shortcut_matches_solver() {
        let tree = complete_binary_tree(5).unwrap();
        let y: Vec<f64> = (0..31).map(|i| (i % 3) as f64).collect();
        let sum_excess: f64 = (0..31).map(|s| (tree.degree(s) as f64 - 1.0) * y[s]).sum();
        for lambda in [-0.4, 0.0, 0.7] {
            let fast = ranktwo_mean(31, y.iter().sum(), sum_excess, lambda);
            let full = ranktwo_gls(&tree, 1.0, lambda, &y).unwrap().estimate;
            assert!(close(fast, full, 1e-12));
        }
    }

    #[test]
    fn constant_outcome_returns_constant() {
        let tree = complete_binary_tree(3).unwrap();
        let y = [0.25; 7];
        let labels = [0, 1, 0, 1, 0, 1, 0];
        assert_eq!(auto_fgls(&tree, &y).unwrap().mu_hat, 0.25);
        let d = delta_fgls(&tree, &y).unwrap();
        assert_eq!(d.mu_hat, 0.25);
        assert_eq!(d.eigenvalues, vec![0.0]);
        assert_eq!(sbm_fgls(&tree, &y, &labels, 2).unwrap().mu_hat, 0.25);
    }

    #[test]
    fn single_node_returns_observation() {
        let tree = ReferralTree::path(1).unwrap();
        let y = [3.5];
        assert_eq!(mean_estimator(&y).unwrap().mu_hat, 3.5);
        assert_eq!(vh_estimator(&y, &[2.0]).unwrap().mu_hat, 3.5);
        assert_eq!(auto_fgls(&tree, &y).unwrap().mu_hat, 3.5);
        assert_eq!(delta_fgls(&tree, &y).unwrap().mu_hat, 3.5);
        assert_eq!(sbm_fgls(&tree, &y, &[0], 1).unwrap().mu_hat, 3.5);
    }

    #[test]
    fn delta_requires_depth() {
        let tree = ReferralTree::path(2).unwrap();
        assert!(matches!(delta_fgls(&tree, &[0.0, 1.0]), Err(Error::InsufficientDepth { lag: 2 })));
    }

    #[test]
    fn two_block_normalization() {
        // Symmetric counts 0.4/0.1 give Q_L = [[0.8, 0.2], [0.2, 0.8]].
        let tree = complete_binary_tree(3).unwrap();
        let labels = [0, 0, 1, 0, 0, 1, 1];
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let counts = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.4]);
        let r = sbm_fgls_from_counts(&tree, &y, &labels, &counts).unwrap();
        assert_eq!(r.eigenvalues.len(), 1);
        assert!(close(r.eigenvalues[0], 0.6, 1e-12));
        let scaled = sbm_fgls_from_counts(&tree, &y, &labels, &(&counts * 37.0)).unwrap();
        assert!(close(r.mu_hat, scaled.mu_hat, 1e-12));
        assert!(close(scaled.eigenvalues[0], 0.6, 1e-12));
        let w: f64 = r.weights.unwrap().iter().sum();
        assert!(close(w, 1.0, 1e-10));
        let spec = referral_spectrum(&counts).unwrap();
        assert!(close(spec[0], 1.0, 1e-12) && close(spec[1], 0.6, 1e-12));
    }

    #[test]
    fn single_block_is_near_sample_mean() {
        let tree = ReferralTree::path(2).unwrap();
        let r = sbm_fgls(&tree, &[0.0, 1.0], &[0, 0], 1).unwrap();
        assert!(close(r.mu_hat, 0.5, 1e-14));
        assert!(r.eigenvalues.is_empty());
        let tree = complete_binary_tree(4).unwrap();
        let y: Vec<f64> = (0..15).map(|i| (i % 2) as f64).collect();
        let r = sbm_fgls(&tree, &y, &[0; 15], 1).unwrap();
        let mean = mean_estimator(&y).unwrap().mu_hat;
        assert!(close(r.mu_hat, mean, 0.02), "{} vs {mean}", r.mu_hat);
    }

    #[test]
    fn empty_blocks_are_dropped() {
        let tree = complete_binary_tree(3).unwrap();
        let labels = [0, 2, 0, 2, 0, 2, 0];
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let r = sbm_fgls(&tree, &y, &labels, 3).unwrap();
        assert_eq!(r.k, Some(2));
        assert!(r.warnings.iter().any(|w| w.contains("dropped")));
    }

    #[test]
    fn reweight_examples() {
        let tree = ReferralTree::path(2).unwrap();
        let rw = fgls_reweight(&tree, &[1.0, 1.0], &[1.0, 2.0], &[0, 0], 1).unwrap();
        assert!(close(rw.h_inv, 0.75, 1e-14));
        assert!(close(rw.y[0], 1.0 / 0.75, 1e-14));
        assert!(close(rw.y[1], 1.0 / 1.5, 1e-14));
        let tree = complete_binary_tree(3).unwrap();
        let y: Vec<f64> = (0..7).map(f64::from).collect();
        let rw = fgls_reweight(&tree, &y, &[4.0; 7], &[0, 1, 0, 1, 0, 1, 0], 2).unwrap();
        assert!(close(rw.h_inv, 0.25, 1e-15));
        assert_eq!(rw.y, y);
    }

    #[test]
    fn auto_search_range() {
        let tree = complete_binary_tree(4).unwrap();
        let y: Vec<f64> = (0..15).map(|i| ((i * 5) % 3) as f64).collect();
        assert!(auto_fgls_over(&tree, &y, 1.0, 0.0).is_err());
        let full = auto_fgls(&tree, &y).unwrap();
        let same = auto_fgls_over(&tree, &y, 0.0, 2.0).unwrap();
        assert_eq!(full.mu_hat, same.mu_hat);
    }

    #[test]
    fn outcome_blocks_by_value() {
        let (labels, k) = outcome_blocks(&[1.0, 0.0, 1.0, 0.5]);
        assert_eq!(labels, vec![2, 0, 2, 1]);
        assert_eq!(k, 3);
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(Estimator::parse(e.name()), Some(e));
        }
        assert_eq!(Estimator::parse("nope"), None);
    }
}
