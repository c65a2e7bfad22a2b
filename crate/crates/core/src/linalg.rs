//! Small dense helpers shared by the spectral code.

use nalgebra::{DMatrix, SymmetricEigen};
use std::cmp::Ordering;

const TIE_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix in the crate-wide order: the largest
/// eigenvalue first, the rest by descending magnitude (ties by descending
/// signed value). Each eigenvector is flipped so its first nonzero entry is
/// positive.
pub(crate) struct OrderedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub(crate) fn ordered_symmetric_eigen(matrix: DMatrix<f64>) -> OrderedEigen {
    let n = matrix.nrows();
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..n).collect();
    let lead = (0..n)
        .max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .unwrap_or(0);
    order.retain(|&i| i != lead);
    order.sort_by(|&a, &b| magnitude_order(eig.eigenvalues[a], eig.eigenvalues[b]));
    if n > 0 {
        order.insert(0, lead);
    }

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > TIE_TOL) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(col, &v);
    }
    OrderedEigen { values, vectors }
}

fn magnitude_order(a: f64, b: f64) -> Ordering {
    if (a.abs() - b.abs()).abs() > TIE_TOL {
        b.abs().total_cmp(&a.abs())
    } else {
        b.total_cmp(&a)
    }
}

/// `(A + Aᵀ) / 2`.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_puts_largest_first_then_magnitude() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.1, -0.9, 1.0, 0.5, -0.5]));
        let e = ordered_symmetric_eigen(m);
        assert_eq!(e.values, vec![1.0, -0.9, 0.5, -0.5, 0.1]);
        for c in 0..5 {
            let first = e.vectors.column(c).iter().copied().find(|x| x.abs() > 1e-12).unwrap();
            assert!(first > 0.0);
        }
    }
}
