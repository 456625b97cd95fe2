//! Least-squares stages: interaction expansion, first-stage fit, the
//! residual-covariance regression and the projected second-stage fit.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::linalg::{symmetrize, SvdSolver};
use crate::model::{pair_count, pairs, CovarianceFit, FirstStageFit, ProjectionBasis};
use crate::{Dataset, Error, Result};

/// Column role within an [`ExpandedDesign`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Linear(usize),
    Product(usize, usize),
}

/// X with its pairwise products appended: columns X_1..X_p, then X_jX_k for
/// j ≤ k in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedDesign {
    pub matrix: DMatrix<f64>,
    p: usize,
}

impl ExpandedDesign {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn columns(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn terms(&self) -> Vec<Term> {
        (0..self.p)
            .map(Term::Linear)
            .chain(pairs(self.p).into_iter().map(|(j, k)| Term::Product(j, k)))
            .collect()
    }
}

pub fn expand_interactions(x: &DMatrix<f64>) -> ExpandedDesign {
    let (n, p) = x.shape();
    let mut matrix = DMatrix::zeros(n, p + pair_count(p));
    matrix.columns_mut(0, p).copy_from(x);
    for (col, (j, k)) in pairs(p).into_iter().enumerate() {
        let prod = x.column(j).component_mul(&x.column(k));
        matrix.column_mut(p + col).copy_from(&prod);
    }
    ExpandedDesign { matrix, p }
}

/// Minimizer of ‖targets − design·coef‖_F via a thin SVD of the design.
pub fn least_squares(design: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if design.nrows() != targets.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, targets {}",
            design.nrows(),
            targets.nrows()
        )));
    }
    Ok(SvdSolver::new(design)?.solve(targets))
}

/// Regresses Y on the linear and pairwise-product terms of X (no intercept).
pub fn fit_first_stage(data: &Dataset) -> Result<FirstStageFit> {
    let design = expand_interactions(data.x());
    let q = design.columns();
    if data.n() <= q {
        return Err(Error::InsufficientSamples(format!(
            "first stage needs n > {q}, got n = {}",
            data.n()
        )));
    }
    let coef = least_squares(&design.matrix, data.y())?;
    let residuals = data.y() - &design.matrix * &coef;
    let p = data.p();
    Ok(FirstStageFit {
        l1: coef.rows(0, p).into_owned(),
        l2: coef.rows(p, q - p).into_owned(),
        residuals,
    })
}

/// Design [1, X_j, X_jX_k] of the residual-covariance regression.
pub fn covariance_design(x: &DMatrix<f64>) -> DMatrix<f64> {
    let expanded = expand_interactions(x);
    let n = x.nrows();
    let mut design = DMatrix::from_element(n, expanded.columns() + 1, 1.0);
    design.columns_mut(1, expanded.columns()).copy_from(&expanded.matrix);
    design
}

/// Regresses every entry of ε̂_iε̂_iᵀ on [1, X_j, X_jX_k].
///
/// With pseudo-inverse rows π_c of the design, the coefficient surface for
/// term c is Σ_i π_c[i] ε̂_iε̂_iᵀ = ε̂ᵀ diag(π_c) ε̂, which equals the
/// multi-target solve over all m(m+1)/2 distinct entries without
/// materializing the n × m(m+1)/2 target matrix.
pub fn fit_covariance_regression(fit: &FirstStageFit, x: &DMatrix<f64>) -> Result<CovarianceFit> {
    let resid = &fit.residuals;
    let (n, p) = x.shape();
    if resid.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "residuals have {} rows, X has {n}",
            resid.nrows()
        )));
    }
    if p != fit.l1.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "X has {p} columns, first stage was fitted with {}",
            fit.l1.nrows()
        )));
    }
    let terms = 1 + p + pair_count(p);
    if n <= terms {
        return Err(Error::InsufficientSamples(format!(
            "covariance regression needs n > {terms}, got n = {n}"
        )));
    }
    let solver = SvdSolver::new(&covariance_design(x))?;
    let pinv = solver.pseudo_inverse();
    let resid_t = resid.transpose();
    let mut surfaces: Vec<DMatrix<f64>> = (0..terms)
        .into_par_iter()
        .map(|c| {
            let mut weighted = resid.clone();
            for (i, mut row) in weighted.row_iter_mut().enumerate() {
                row *= pinv[(c, i)];
            }
            symmetrize(&(&resid_t * weighted))
        })
        .collect();
    let phi_cc = surfaces.split_off(1 + p);
    let phi_bc = surfaces.split_off(1);
    let phi_b = surfaces.pop().expect("intercept surface");
    Ok(CovarianceFit {
        phi_b,
        phi_bc,
        phi_cc,
    })
}

/// Θ̂ = argmin Σ‖P_D^⊥Y_i − ΘᵀX_i‖², linear terms only, no intercept.
pub fn fit_projected_ols(data: &Dataset, basis: &ProjectionBasis) -> Result<DMatrix<f64>> {
    if basis.m() != data.m() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, data has m = {}",
            basis.m(),
            data.m()
        )));
    }
    if data.n() <= data.p() {
        return Err(Error::InsufficientSamples(format!(
            "projected regression needs n > p = {}, got n = {}",
            data.p(),
            data.n()
        )));
    }
    least_squares(data.x(), &basis.project_out(data.y()))
}
