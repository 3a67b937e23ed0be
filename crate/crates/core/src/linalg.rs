//! Thin helpers over nalgebra for the symmetric matrices that show up in
//! sandwich covariances.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).min()
}

/// Raises negative eigenvalues to zero. Returns whether anything changed.
pub fn floor_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return (m.clone(), false);
    }
    let floored = eig.eigenvalues.map(|l| l.max(0.0));
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    (out, true)
}

/// Ratio of the largest to the smallest absolute eigenvalue.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = eigenvalues(m);
    let abs: Vec<f64> = eig.iter().map(|l| l.abs()).collect();
    let max = abs.iter().cloned().fold(0.0, f64::max);
    let min = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("matrix is singular".into()))
}

pub fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("linear system is singular".into()))
}
