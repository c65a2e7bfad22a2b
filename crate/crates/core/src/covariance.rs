//! Tree-indexed covariance: `Σ_στ = γ(d(σ, τ))`, GLS weights, and the
//! closed forms available when the autocovariance has a single term.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::referral::ReferralTree;

/// Largest tree for which a dense `Σ` is built.
pub const SIGMA_LIMIT: usize = 10_000;

/// `γ(d) = Σ_ℓ β²_ℓ λ_ℓ^d`, plus a nugget at lag zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoCovariance {
    terms: Vec<(f64, f64)>,
    nugget: f64,
}

impl AutoCovariance {
    /// `terms` are `(β², λ)` pairs with `β² ≥ 0` and `|λ| < 1`.
    pub fn new(terms: Vec<(f64, f64)>, nugget: f64) -> Result<Self> {
        for &(b2, l) in &terms {
            if !(b2.is_finite() && b2 >= 0.0) {
                return Err(Error::InvalidParameters(format!("coefficient {b2} must be finite and nonnegative")));
            }
            if !(l.abs() < 1.0) {
                return Err(Error::InvalidParameters(format!("eigenvalue {l} must lie in (-1, 1)")));
            }
        }
        if !(nugget.is_finite() && nugget >= 0.0) {
            return Err(Error::InvalidParameters(format!("nugget {nugget} must be finite and nonnegative")));
        }
        Ok(Self { terms, nugget })
    }

    pub fn single(beta2: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![(beta2, lambda)], 0.0)
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn gamma(&self, d: usize) -> f64 {
        let exp = i32::try_from(d).unwrap_or(i32::MAX);
        let s: f64 = self.terms.iter().map(|&(b2, l)| b2 * l.powi(exp)).sum();
        if d == 0 {
            s + self.nugget
        } else {
            s
        }
    }
}

/// Free-function form of [`AutoCovariance::gamma`].
pub fn gamma_eval(ac: &AutoCovariance, d: usize) -> f64 {
    ac.gamma(d)
}

/// Dense `Σ` over the nodes of `tree`.
pub fn build_sigma(tree: &ReferralTree, ac: &AutoCovariance) -> Result<DMatrix<f64>> {
    let n = tree.len();
    if n > SIGMA_LIMIT {
        return Err(Error::Capacity { n, limit: SIGMA_LIMIT });
    }
    let diameter = tree.diameter();
    if diameter > u16::MAX as usize {
        return Err(Error::InvalidTree(format!("diameter {diameter} exceeds {}", u16::MAX)));
    }
    let table: Vec<f64> = (0..=diameter).map(|d| ac.gamma(d)).collect();
    let mut sigma = DMatrix::zeros(n, n);
    for s in 0..n {
        for (t, d) in tree.distances_from(s).into_iter().enumerate() {
            sigma[(s, t)] = table[d as usize];
        }
    }
    Ok(sigma)
}

fn check_ranktwo(beta2: f64, lambda: f64) -> Result<()> {
    if !(lambda.abs() < 1.0) {
        return Err(Error::Singular(format!("rank-two covariance with |λ| = {} is singular", lambda.abs())));
    }
    if !(beta2 > 0.0 && beta2.is_finite()) {
        return Err(Error::Singular(format!("rank-two covariance with β² = {beta2} is singular")));
    }
    Ok(())
}

/// `Σ⁻¹ v` for `Σ_στ = β² λ^{d(σ,τ)}` in `O(n)`. The inverse is supported on
/// the diagonal and the tree edges.
pub fn ranktwo_inverse_apply(tree: &ReferralTree, beta2: f64, lambda: f64, v: &[f64]) -> Result<Vec<f64>> {
    check_ranktwo(beta2, lambda)?;
    if v.len() != tree.len() {
        return Err(Error::Dimension { expected: tree.len(), found: v.len() });
    }
    let scale = beta2 * (1.0 - lambda * lambda);
    let mut out: Vec<f64> = (0..tree.len())
        .map(|s| (1.0 + lambda * lambda * (tree.degree(s) as f64 - 1.0)) * v[s])
        .collect();
    for (p, c) in tree.edges() {
        out[p] -= lambda * v[c];
        out[c] -= lambda * v[p];
    }
    out.iter_mut().for_each(|x| *x /= scale);
    Ok(out)
}

/// `1ᵀΣ⁻¹1` for a single-term `Σ` on any tree with `n` nodes.
pub fn one_sigma_inv_one_ranktwo(n: usize, beta2: f64, lambda: f64) -> Result<f64> {
    check_ranktwo(beta2, lambda)?;
    let n = n as f64;
    Ok(n * (1.0 - lambda * (1.0 - 2.0 / n)) / (beta2 * (1.0 + lambda)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlsResult {
    pub estimate: f64,
    pub weights: Vec<f64>,
    /// `(1ᵀΣ⁻¹1)⁻¹`.
    pub variance: f64,
}

fn weights_from(x: DVector<f64>, y: &[f64]) -> Result<GlsResult> {
    let total = x.sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Singular(format!("1ᵀΣ⁻¹1 = {total}")));
    }
    let weights: Vec<f64> = x.iter().map(|v| v / total).collect();
    let estimate = weights.iter().zip(y).map(|(g, y)| g * y).sum();
    Ok(GlsResult { estimate, weights, variance: 1.0 / total })
}

/// GLS estimate of the mean of `y` under covariance `sigma`, via Cholesky.
pub fn gls_solve(sigma: &DMatrix<f64>, y: &[f64]) -> Result<GlsResult> {
    let n = y.len();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::Dimension { expected: n, found: sigma.nrows() });
    }
    let chol = sigma.clone().cholesky().ok_or(Error::Factorization)?;
    weights_from(chol.solve(&DVector::from_element(n, 1.0)), y)
}

/// GLS under a single-term `Σ` using the sparse inverse; `O(n)`.
pub fn ranktwo_gls(tree: &ReferralTree, beta2: f64, lambda: f64, y: &[f64]) -> Result<GlsResult> {
    if y.len() != tree.len() {
        return Err(Error::Dimension { expected: tree.len(), found: y.len() });
    }
    let ones = vec![1.0; tree.len()];
    let x = ranktwo_inverse_apply(tree, beta2, lambda, &ones)?;
    weights_from(DVector::from_vec(x), y)
}

/// `lim n·Var(μ̂_GLS) = β²(1+λ)/(1−λ)`.
pub fn theorem2_limit(lambda: f64, beta2: f64) -> f64 {
    beta2 * (1.0 + lambda) / (1.0 - lambda)
}

/// Solves `Σ_a γ_a λ_ℓ^{a-1} = δ_1(ℓ)`.
pub fn vandermonde_weights(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    let k = eigenvalues.len();
    if k == 0 {
        return Err(Error::InvalidParameters("at least one eigenvalue is required".into()));
    }
    for (i, a) in eigenvalues.iter().enumerate() {
        if let Some(b) = eigenvalues[i + 1..].iter().find(|b| (*b - a).abs() < 1e-12) {
            return Err(Error::RepeatedEigenvalue(*b));
        }
    }
    let v = DMatrix::from_fn(k, k, |l, a| eigenvalues[l].powi(a as i32));
    let mut rhs = DVector::zeros(k);
    rhs[0] = 1.0;
    let gamma = v.lu().solve(&rhs).ok_or_else(|| Error::Singular("Vandermonde system".into()))?;
    Ok(gamma.iter().copied().collect())
}

/// The chain estimator `Γ`: runs of `K = eigenvalues.len()` nodes, each
/// starting `K - 1` levels above the deepest level and descending through
/// first children, weighted by [`vandermonde_weights`] and averaged.
pub fn vandermonde_estimator(tree: &ReferralTree, y: &[f64], eigenvalues: &[f64]) -> Result<f64> {
    if y.len() != tree.len() {
        return Err(Error::Dimension { expected: tree.len(), found: y.len() });
    }
    let gamma = vandermonde_weights(eigenvalues)?;
    let k = gamma.len();
    let depth = tree.depths();
    let height = depth.iter().copied().max().unwrap_or(0);
    if height + 1 < k {
        return Err(Error::InsufficientDepth { lag: k - 1 });
    }
    let start = height + 1 - k;
    let mut total = 0.0;
    let mut runs = 0usize;
    for tau in (0..tree.len()).filter(|&t| depth[t] == start) {
        let mut node = tau;
        let mut run = gamma[0] * y[node];
        let mut complete = true;
        for g in &gamma[1..] {
            match tree.children(node).first() {
                Some(&c) => {
                    node = c;
                    run += g * y[node];
                }
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            total += run;
            runs += 1;
        }
    }
    if runs == 0 {
        return Err(Error::InsufficientDepth { lag: k - 1 });
    }
    Ok(total / runs as f64)
}

/// `1/λ₂²`, the mean referral count above which the naive sample mean's
/// variance stops decaying like `1/n`. Infinite when `λ₂ = 0`.
pub fn critical_threshold(lambda2: f64) -> f64 {
    if lambda2 == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (lambda2 * lambda2)
    }
}
