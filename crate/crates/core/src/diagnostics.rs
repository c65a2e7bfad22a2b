//! Ratio-of-standard-errors diagnostic and the Jensen bound relating the
//! full covariance to its one-term approximation.

use nalgebra::{DMatrix, DVector};

use crate::covariance::{build_sigma, one_sigma_inv_one_ranktwo, AutoCovariance};
use crate::error::{Error, Result};
use crate::referral::{distance_pgf, tree_distance_distribution, DistanceDistribution, ReferralTree};

/// Which sample-mean variance goes in the RSE denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RseVariant {
    /// `n⁻¹ 1ᵀΣ1`.
    #[default]
    AsPrinted,
    /// `n⁻² 1ᵀΣ1`, the variance of the sample mean.
    MeanVariance,
}

impl RseVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::AsPrinted => "as_printed",
            Self::MeanVariance => "mean_variance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "as_printed" => Some(Self::AsPrinted),
            "mean_variance" => Some(Self::MeanVariance),
            _ => None,
        }
    }
}

/// RSE from the two quadratic forms `1ᵀΣ⁻¹1` and `1ᵀΣ1`.
pub fn rse_from_forms(n: usize, one_inv_one: f64, one_sigma_one: f64, variant: RseVariant) -> f64 {
    let n = n as f64;
    let mean_var = match variant {
        RseVariant::AsPrinted => one_sigma_one / n,
        RseVariant::MeanVariance => one_sigma_one / (n * n),
    };
    (1.0 / one_inv_one / mean_var).sqrt()
}

/// `sqrt[(1ᵀΣ⁻¹1)⁻¹ / v̄]` where `v̄` is chosen by `variant`.
pub fn rse(sigma: &DMatrix<f64>, variant: RseVariant) -> Result<f64> {
    let n = sigma.nrows();
    let chol = sigma.clone().cholesky().ok_or(Error::Factorization)?;
    let one_inv_one = chol.solve(&DVector::from_element(n, 1.0)).sum();
    Ok(rse_from_forms(n, one_inv_one, sigma.sum(), variant))
}

/// RSE of `Σ = λ^{d(σ,τ)}` for each grid value, from closed forms. `β²`
/// cancels, so it is fixed at one.
pub fn ranktwo_rse_curve(tree: &ReferralTree, lambda_grid: &[f64], variant: RseVariant) -> Result<Vec<f64>> {
    let dist = tree_distance_distribution(tree);
    lambda_grid.iter().map(|&l| ranktwo_rse(&dist, l, variant)).collect()
}

pub(crate) fn ranktwo_rse(dist: &DistanceDistribution, lambda: f64, variant: RseVariant) -> Result<f64> {
    let n = dist.num_nodes();
    let one_inv_one = one_sigma_inv_one_ranktwo(n, 1.0, lambda)?;
    let one_sigma_one = (n as f64).powi(2) * distance_pgf(dist, lambda)?;
    Ok(rse_from_forms(n, one_inv_one, one_sigma_one, variant))
}

/// Default grey-line grid: 181 points over `[-0.9, 0.9]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..181).map(|i| -0.9 + 0.01 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct JensenCheck {
    /// `γ(1)/γ(0)`.
    pub lambda_auto: f64,
    /// `1ᵀΣ1`.
    pub lhs: f64,
    /// `1ᵀΣ^(auto)1` with `Σ^(auto) = γ(0) λ_auto^d`.
    pub rhs: f64,
    /// `None` when some eigenvalue is negative and the bound is not claimed.
    pub bound_holds: Option<bool>,
    /// `|λ_auto| ≤ max_ℓ |λ_ℓ|`.
    pub lambda_bound_holds: bool,
}

/// Compares the quadratic form of `Σ` against its one-term approximation.
/// A nugget enters as a term with eigenvalue zero.
pub fn jensen_check(gamma: &AutoCovariance, tree: &ReferralTree) -> Result<JensenCheck> {
    let g0 = gamma.gamma(0);
    if g0 <= 0.0 {
        return Err(Error::InvalidParameters("γ(0) must be positive".into()));
    }
    let lambda_auto = gamma.gamma(1) / g0;
    let dist = tree_distance_distribution(tree);
    let n2 = (tree.len() as f64).powi(2);
    let lhs = n2
        * gamma
            .terms()
            .iter()
            .map(|&(b2, l)| distance_pgf(&dist, l).map(|g| b2 * g))
            .sum::<Result<f64>>()?
        + tree.len() as f64 * gamma.nugget();
    let rhs = n2 * g0 * distance_pgf(&dist, lambda_auto)?;
    let nonnegative = gamma.terms().iter().all(|&(_, l)| l >= 0.0);
    let max_abs = gamma
        .terms()
        .iter()
        .filter(|&&(b2, _)| b2 > 0.0)
        .map(|&(_, l)| l.abs())
        .fold(0.0, f64::max);
    Ok(JensenCheck {
        lambda_auto,
        lhs,
        rhs,
        bound_holds: nonnegative.then(|| lhs >= rhs * (1.0 - 1e-12)),
        lambda_bound_holds: lambda_auto.abs() <= max_abs + 1e-15,
    })
}

/// `1ᵀΣ1` computed from a dense `Σ`; used to cross-check the closed form.
pub fn quadratic_form_dense(tree: &ReferralTree, gamma: &AutoCovariance) -> Result<f64> {
    Ok(build_sigma(tree, gamma)?.sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::referral::complete_binary_tree;

    #[test]
    fn identity_examples() {
        let i4 = DMatrix::identity(4, 4);
        assert!((rse(&i4, RseVariant::AsPrinted).unwrap() - 0.5).abs() < 1e-15);
        assert!((rse(&i4, RseVariant::MeanVariance).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scale_free() {
        let tree = complete_binary_tree(4).unwrap();
        let sigma = build_sigma(&tree, &AutoCovariance::new(vec![(1.0, 0.6), (0.5, -0.2)], 0.3).unwrap()).unwrap();
        for v in [RseVariant::AsPrinted, RseVariant::MeanVariance] {
            let a = rse(&sigma, v).unwrap();
            let b = rse(&(&sigma * 7.5), v).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_matches_dense() {
        let tree = complete_binary_tree(10).unwrap();
        let curve = ranktwo_rse_curve(&tree, &[0.8, 0.0], RseVariant::AsPrinted).unwrap();
        let sigma = build_sigma(&tree, &AutoCovariance::single(0.25, 0.8).unwrap()).unwrap();
        let dense = rse(&sigma, RseVariant::AsPrinted).unwrap();
        assert!((curve[0] - dense).abs() < 1e-10, "{} vs {dense}", curve[0]);
        assert!((curve[1] - 1.0 / (1023f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn grey_line_decreases() {
        let tree = complete_binary_tree(9).unwrap();
        let grid: Vec<f64> = (0..=90).map(|i| i as f64 / 100.0).collect();
        let curve = ranktwo_rse_curve(&tree, &grid, RseVariant::AsPrinted).unwrap();
        assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert_eq!(default_lambda_grid().len(), 181);
    }

    #[test]
    fn jensen_examples() {
        let tree = complete_binary_tree(8).unwrap();
        let c = jensen_check(&AutoCovariance::single(0.7, 0.6).unwrap(), &tree).unwrap();
        assert!((c.lhs - c.rhs).abs() < 1e-10 * c.lhs);
        let c = jensen_check(&AutoCovariance::new(vec![(0.5, 0.9), (0.5, 0.1)], 0.0).unwrap(), &tree).unwrap();
        assert!((c.lambda_auto - 0.5).abs() < 1e-15);
        assert!(c.lhs > c.rhs);
        assert_eq!(c.bound_holds, Some(true));
        assert!(c.lambda_bound_holds);
        let dense = quadratic_form_dense(&tree, &AutoCovariance::new(vec![(0.5, 0.9), (0.5, 0.1)], 0.0).unwrap()).unwrap();
        assert!((dense - c.lhs).abs() < 1e-9 * dense);
        let c = jensen_check(&AutoCovariance::new(vec![(0.5, 0.9), (0.5, -0.4)], 0.0).unwrap(), &tree).unwrap();
        assert_eq!(c.bound_holds, None);
    }
}
