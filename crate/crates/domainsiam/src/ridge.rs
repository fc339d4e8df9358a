//! Closed-form ridge regression on a dense design matrix.

use crate::error::{Error, Result};

/// Linear ridge model `W = (X'X + lambda I)^-1 X'Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeLinearModel {
    pub weights: Vec<f64>,
    pub lambda: f64,
}

/// Row-major N x D design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("design matrix must be non-empty".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Solve `A w = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        if a[pivot][k].abs() < 1e-12 {
            return Err(Error::SingularSystem);
        }
        a.swap(k, pivot);
        b.swap(k, pivot);
        for i in k + 1..n {
            let factor = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= factor * a[k][j];
            }
            b[i] -= factor * b[k];
        }
    }
    let mut w = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= a[k][j] * w[j];
        }
        w[k] = acc / a[k][k];
    }
    Ok(w)
}

/// Closed-form ridge solution of the normal equations.
pub fn closed_form(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<RidgeLinearModel> {
    if y.len() != x.rows {
        return Err(Error::InvalidArgument(format!(
            "target length {} does not match {} rows",
            y.len(),
            x.rows
        )));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be >= 0".into()));
    }
    let d = x.cols;
    let mut gram = vec![vec![0.0; d]; d];
    let mut xty = vec![0.0; d];
    for r in 0..x.rows {
        let row = x.row(r);
        for i in 0..d {
            xty[i] += row[i] * y[r];
            for j in i..d {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[i][j] = gram[j][i];
        }
        gram[i][i] += lambda;
    }
    let weights = solve_dense(gram, xty)?;
    Ok(RidgeLinearModel { weights, lambda })
}

/// Ridge objective `sum_i (x_i . w - y_i)^2 + lambda ||w||^2` for a linear model.
pub fn ridge_objective(model: &RidgeLinearModel, x: &DesignMatrix, y: &[f64]) -> Result<f64> {
    if model.weights.len() != x.cols || y.len() != x.rows {
        return Err(Error::InvalidArgument("shape mismatch in ridge objective".into()));
    }
    let mut obj = 0.0;
    for r in 0..x.rows {
        let pred: f64 = x.row(r).iter().zip(&model.weights).map(|(a, b)| a * b).sum();
        let res = pred - y[r];
        obj += res * res;
    }
    obj += model.lambda * model.weights.iter().map(|w| w * w).sum::<f64>();
    Ok(obj)
}
