//! Regularized least squares for the linear readout:
//! `W = Y S^T (S S^T + lambda I)^-1`, solved through a Cholesky factor of the
//! shifted Gram matrix, never an explicit inverse.

use faer::linalg::matmul::matmul;
use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Running sums `S S^T` and `Y S^T` over column blocks of features and targets.
/// Only the lower triangle of `S S^T` is accumulated.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    gram: Mat<f64>,
    cross: Mat<f64>,
    n_samples: usize,
}

/// A solved readout and the relative normal-equation residual
/// `||W (S S^T + lambda I) - Y S^T|| / ||Y S^T||` (Frobenius).
#[derive(Debug, Clone)]
pub struct RidgeSolution {
    pub w: Mat<f64>,
    pub residual: f64,
}

impl GramAccumulator {
    pub fn new(n_features: usize, n_outputs: usize) -> Self {
        Self {
            gram: Mat::zeros(n_features, n_features),
            cross: Mat::zeros(n_outputs, n_features),
            n_samples: 0,
        }
    }

    /// Adds the contribution of `features` (`F x m`) and `targets` (`Q x m`).
    pub fn add(&mut self, features: MatRef<'_, f64>, targets: MatRef<'_, f64>) -> Result<()> {
        if features.nrows() != self.gram.nrows() || targets.nrows() != self.cross.nrows() {
            return Err(Error::mismatch(format!(
                "block is {}x{} features / {}x{} targets, accumulator expects {} features and {} outputs",
                features.nrows(),
                features.ncols(),
                targets.nrows(),
                targets.ncols(),
                self.gram.nrows(),
                self.cross.nrows()
            )));
        }
        if features.ncols() != targets.ncols() {
            return Err(Error::mismatch("feature and target blocks differ in sample count"));
        }
        triangular::matmul(
            &mut self.gram,
            BlockStructure::TriangularLower,
            Accum::Add,
            features,
            BlockStructure::Rectangular,
            features.transpose(),
            BlockStructure::Rectangular,
            1.0,
            Par::Seq,
        );
        matmul(&mut self.cross, Accum::Add, targets, features.transpose(), 1.0, Par::Seq);
        self.n_samples += features.ncols();
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// The full symmetric `S S^T`.
    pub fn gram(&self) -> Mat<f64> {
        let f = self.gram.nrows();
        Mat::from_fn(f, f, |i, j| if i >= j { self.gram[(i, j)] } else { self.gram[(j, i)] })
    }

    pub fn cross(&self) -> MatRef<'_, f64> {
        self.cross.as_ref()
    }

    pub fn solve(&self, lambda: f64) -> Result<RidgeSolution> {
        self.clone().finish(lambda)
    }

    /// Like [`solve`](Self::solve), reusing the accumulator's storage.
    pub fn finish(mut self, lambda: f64) -> Result<RidgeSolution> {
        if self.n_samples == 0 {
            return Err(Error::SeriesTooShort {
                needed: 1,
                available: 0,
            });
        }
        let f = self.gram.nrows();
        for j in 0..f {
            for i in 0..j {
                self.gram[(i, j)] = self.gram[(j, i)];
            }
        }
        solve_symmetric(self.gram, self.cross.as_ref(), lambda)
    }
}

/// Solves the ridge normal equations given `S S^T` (`F x F`) and `Y S^T` (`Q x F`).
pub fn ridge_from_gram(gram: MatRef<'_, f64>, cross: MatRef<'_, f64>, lambda: f64) -> Result<RidgeSolution> {
    let f = gram.nrows();
    if gram.ncols() != f || cross.ncols() != f {
        return Err(Error::mismatch(format!(
            "Gram is {}x{}, cross term is {}x{}",
            gram.nrows(),
            gram.ncols(),
            cross.nrows(),
            cross.ncols()
        )));
    }
    solve_symmetric(gram.to_owned(), cross, lambda)
}

fn solve_symmetric(gram: Mat<f64>, cross: MatRef<'_, f64>, lambda: f64) -> Result<RidgeSolution> {
    let f = gram.nrows();
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::config(format!("ridge parameter must be >= 0, got {lambda}")));
    }
    let max_diag = (0..f).map(|i| gram[(i, i)]).fold(0.0_f64, f64::max);
    let mut shifted = gram;
    for i in 0..f {
        shifted[(i, i)] += lambda;
    }
    let llt = shifted
        .llt(Side::Lower)
        .map_err(|_| Error::SingularSystem(format!("shifted Gram matrix ({f}x{f}) is not positive definite; increase lambda or normalize features")))?;

    if lambda == 0.0 {
        let l = llt.L();
        let min_pivot = (0..f).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-14 * max_diag) {
            return Err(Error::SingularSystem(format!(
                "Gram matrix is numerically rank deficient (pivot ratio {:e})",
                min_pivot / max_diag
            )));
        }
    }

    // Solve (G + lambda I) X = (Y S^T)^T, then one step of iterative refinement.
    let rhs = cross.transpose().to_owned();
    let mut x = llt.solve(&rhs);
    let mut r = rhs.clone();
    matmul(&mut r, Accum::Add, &shifted, &x, -1.0, Par::Seq);
    let correction = llt.solve(&r);
    x += &correction;

    let mut r = rhs.clone();
    matmul(&mut r, Accum::Add, &shifted, &x, -1.0, Par::Seq);
    let denom = rhs.norm_l2();
    let residual = if denom > 0.0 { r.norm_l2() / denom } else { r.norm_l2() };
    if !residual.is_finite() {
        return Err(Error::SingularSystem("solution is not finite".into()));
    }
    if lambda == 0.0 && residual > 1e-8 {
        return Err(Error::SingularSystem(format!(
            "normal-equation residual {residual:e} exceeds 1e-8"
        )));
    }
    Ok(RidgeSolution {
        w: x.transpose().to_owned(),
        residual,
    })
}

/// Ridge regression of `targets` (`Q x T`) on `features` (`F x T`);
/// returns `W_out` (`Q x F`).
pub fn ridge_solve(features: MatRef<'_, f64>, targets: MatRef<'_, f64>, lambda: f64) -> Result<Mat<f64>> {
    if features.ncols() == 0 {
        return Err(Error::SeriesTooShort {
            needed: 1,
            available: 0,
        });
    }
    let mut acc = GramAccumulator::new(features.nrows(), targets.nrows());
    acc.add(features, targets)?;
    Ok(acc.finish(lambda)?.w)
}
