//! Estimator pipelines for the direct effect matrix.
//!
//! The interaction estimators run five steps: (1) regress Y on X and its
//! pairwise products, (2) form residual outer products, (3) regress those
//! on [1, X_j, X_jX_k], (4) extract leading eigenvectors of the intercept
//! surface φ̂_B and the diagonal-pair surfaces φ̂_{C_j} and combine them into
//! a projection basis, (5) regress the projected responses on X.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Stage;
use crate::linalg::{leading_columns, left_singular_desc};
use crate::model::{pair_count, CovarianceFit, FitWarning, ProjectionBasis};
use crate::regress::{fit_covariance_regression, fit_first_stage, fit_projected_ols, least_squares};
use crate::spectral::{
    build_projection, default_k_star, hetero_pca, positive_k_star, select_k, top_k_eigenvectors,
    SpectrumSource, SpectrumSummary, DEFAULT_HETERO_ITERS,
};
use crate::{Dataset, DebiasedEstimate, Error, GroundTruth, Method, Result};

/// Noise model assumed when extracting the φ̂_B eigenspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Homo,
    Hetero,
}

/// How the hidden dimension is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Known(usize),
    /// Eigenvalue-ratio vote with the given upper bound, or the default bound.
    Selected(Option<usize>),
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidRank("K must be a positive integer".into()));
    }
    Ok(())
}

fn check_interaction_preconditions(data: &Dataset, k: usize) -> Result<()> {
    check_k(k)?;
    let (n, p, m) = (data.n(), data.p(), data.m());
    if (p + 1) * k > m {
        return Err(Error::InvalidRank(format!(
            "(p+1)K = {} exceeds m = {m}",
            (p + 1) * k
        )));
    }
    let terms = 1 + p + pair_count(p);
    if n <= terms {
        return Err(Error::InsufficientSamples(format!(
            "need n > 1 + p + p(p+1)/2 = {terms}, got n = {n}"
        )));
    }
    Ok(())
}

/// Steps 1–3 of the interaction pipeline.
pub fn interaction_covariance(data: &Dataset) -> Result<CovarianceFit> {
    let first = fit_first_stage(data).map_err(Error::at(Stage::FirstStage))?;
    fit_covariance_regression(&first, data.x()).map_err(Error::at(Stage::CovarianceRegression))
}

/// Spectra of φ̂_B followed by each φ̂_{C_j}.
pub fn interaction_spectra(cov: &CovarianceFit) -> Result<Vec<SpectrumSummary>> {
    let m = cov.phi_b.nrows();
    let mut spectra = Vec::with_capacity(cov.p() + 1);
    let (_, s) = top_k_eigenvectors(&cov.phi_b, 1.min(m))?;
    spectra.push(s.tagged(SpectrumSource::PhiB));
    for j in 0..cov.p() {
        let (_, s) = top_k_eigenvectors(cov.phi_c(j), 1.min(m))?;
        spectra.push(s.tagged(SpectrumSource::PhiC(j)));
    }
    Ok(spectra)
}

/// K* actually searched: the requested (or default) bound, capped so that
/// every ratio involves positive eigenvalues and the rank fits in m.
pub fn effective_k_star(
    requested: Option<usize>,
    n: usize,
    max_rank: usize,
    spectra: &[SpectrumSummary],
) -> usize {
    let bound = requested.unwrap_or_else(|| default_k_star(n, spectra[0].eigenvalues.len()));
    bound.min(max_rank).min(positive_k_star(spectra)).max(1)
}

/// Hidden dimension selected from the interaction spectra.
pub fn select_k_interaction(data: &Dataset, cov: &CovarianceFit, k_star: Option<usize>) -> Result<usize> {
    let spectra = interaction_spectra(cov).map_err(Error::at(Stage::Eigenspace))?;
    let bound = effective_k_star(k_star, data.n(), data.m() / (data.p() + 1), &spectra);
    select_k(&spectra, bound).map_err(Error::at(Stage::Eigenspace))
}

/// Steps 4–5 given the covariance surfaces.
pub fn fit_interaction_from(
    data: &Dataset,
    cov: &CovarianceFit,
    k: usize,
    variant: Variant,
    iters: usize,
) -> Result<DebiasedEstimate> {
    check_interaction_preconditions(data, k)?;
    let basis = interaction_basis(cov, k, variant, iters).map_err(Error::at(Stage::Eigenspace))?;
    let theta = fit_projected_ols(data, &basis).map_err(Error::at(Stage::ProjectedRegression))?;
    let (method, t_used) = match variant {
        Variant::Homo => (Method::InteractionHomo, None),
        Variant::Hetero => (Method::InteractionHetero, Some(iters)),
    };
    Ok(DebiasedEstimate {
        theta,
        k_used: k,
        method,
        t_used,
        warnings: basis.warning().cloned().into_iter().collect(),
    })
}

/// Projection basis from the leading eigenspaces of φ̂_B and every φ̂_{C_j}.
/// Only the φ̂_B block uses [`hetero_pca`] under [`Variant::Hetero`].
pub fn interaction_basis(
    cov: &CovarianceFit,
    k: usize,
    variant: Variant,
    iters: usize,
) -> Result<ProjectionBasis> {
    let mut blocks = Vec::with_capacity(cov.p() + 1);
    blocks.push(match variant {
        Variant::Homo => top_k_eigenvectors(&cov.phi_b, k)?.0,
        Variant::Hetero => hetero_pca(&cov.phi_b, k, iters)?,
    });
    for j in 0..cov.p() {
        blocks.push(top_k_eigenvectors(cov.phi_c(j), k)?.0);
    }
    build_projection(&blocks)
}

/// Interaction estimator assuming Cov(E) = σ²I.
pub fn fit_homoscedastic(data: &Dataset, k: usize) -> Result<DebiasedEstimate> {
    check_interaction_preconditions(data, k)?;
    let cov = interaction_covariance(data)?;
    fit_interaction_from(data, &cov, k, Variant::Homo, 0)
}

/// Interaction estimator for heteroscedastic or correlated noise.
pub fn fit_heteroscedastic(data: &Dataset, k: usize, iters: usize) -> Result<DebiasedEstimate> {
    check_interaction_preconditions(data, k)?;
    if iters == 0 {
        return Err(Error::InvalidConfig("HeteroPCA needs at least one iteration".into()));
    }
    let cov = interaction_covariance(data)?;
    fit_interaction_from(data, &cov, k, Variant::Hetero, iters)
}

/// Plain OLS of Y on X.
pub fn fit_ols_baseline(data: &Dataset) -> Result<DebiasedEstimate> {
    if data.n() <= data.p() {
        return Err(Error::InsufficientSamples(format!(
            "OLS needs n > p = {}, got n = {}",
            data.p(),
            data.n()
        )));
    }
    let theta = least_squares(data.x(), data.y())?;
    Ok(DebiasedEstimate {
        theta,
        k_used: 0,
        method: Method::Ols,
        t_used: None,
        warnings: Vec::new(),
    })
}

/// Orthonormal basis for the column space of Dᵀ = (Bᵀ, C_1ᵀ, ..., C_pᵀ).
pub fn oracle_basis(truth: &GroundTruth) -> Result<ProjectionBasis> {
    let (k, m) = (truth.k(), truth.m());
    if let Some((j, c)) = truth.c.iter().enumerate().find(|(_, c)| c.shape() != (k, m)) {
        return Err(Error::DimensionMismatch(format!(
            "C_{} is {}x{}, B is {k}x{m}",
            j + 1,
            c.nrows(),
            c.ncols()
        )));
    }
    let d_t = truth.stacked_effects().transpose();
    let r = d_t.ncols();
    if r > m {
        return Err(Error::InvalidRank(format!("(p+1)K = {r} exceeds m = {m}")));
    }
    let (_, u) = left_singular_desc(&d_t);
    ProjectionBasis::new(leading_columns(&u, r))
}

/// Projection with the true hidden-effect space.
pub fn fit_oracle(data: &Dataset, truth: &GroundTruth) -> Result<DebiasedEstimate> {
    if truth.p() != data.p() || truth.m() != data.m() || truth.c.len() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "truth is for p = {}, m = {} but data has p = {}, m = {}",
            truth.p(),
            truth.m(),
            data.p(),
            data.m()
        )));
    }
    let basis = oracle_basis(truth)?;
    let theta = fit_projected_ols(data, &basis).map_err(Error::at(Stage::ProjectedRegression))?;
    Ok(DebiasedEstimate {
        theta,
        k_used: truth.k(),
        method: Method::Oracle,
        t_used: None,
        warnings: Vec::new(),
    })
}

/// Residual covariance of the linear-only fit: the sample mean of ε̂_iε̂_iᵀ,
/// which is what an intercept-only covariance regression returns.
pub fn non_interaction_covariance(data: &Dataset) -> Result<DMatrix<f64>> {
    if data.n() <= data.p() {
        return Err(Error::InsufficientSamples(format!(
            "need n > p = {}, got n = {}",
            data.p(),
            data.n()
        )));
    }
    let coef = least_squares(data.x(), data.y()).map_err(Error::at(Stage::FirstStage))?;
    let resid = data.y() - data.x() * coef;
    Ok(resid.transpose() * &resid / data.n() as f64)
}

pub fn non_interaction_spectrum(phi_b: &DMatrix<f64>) -> Result<SpectrumSummary> {
    let (_, s) = top_k_eigenvectors(phi_b, 1)?;
    Ok(s.tagged(SpectrumSource::NonInteractionPhiB))
}

/// Ratio test on the linear-only residual covariance.
pub fn select_k_non_interaction(data: &Dataset, phi_b: &DMatrix<f64>, k_star: Option<usize>) -> Result<usize> {
    let spectra = [non_interaction_spectrum(phi_b).map_err(Error::at(Stage::Eigenspace))?];
    let bound = effective_k_star(k_star, data.n(), data.m(), &spectra);
    select_k(&spectra, bound).map_err(Error::at(Stage::Eigenspace))
}

/// Steps 4–5 of the non-interaction estimator given its residual covariance.
pub fn fit_non_interaction_from(
    data: &Dataset,
    phi_b: &DMatrix<f64>,
    k: usize,
    variant: Variant,
    iters: usize,
) -> Result<DebiasedEstimate> {
    check_k(k)?;
    let u = match variant {
        Variant::Homo => top_k_eigenvectors(phi_b, k).map(|(u, _)| u),
        Variant::Hetero => hetero_pca(phi_b, k, iters),
    }
    .map_err(Error::at(Stage::Eigenspace))?;
    let basis = build_projection(&[u]).map_err(Error::at(Stage::Eigenspace))?;
    let theta = fit_projected_ols(data, &basis).map_err(Error::at(Stage::ProjectedRegression))?;
    let (method, t_used) = match variant {
        Variant::Homo => (Method::NonInteractionHomo, None),
        Variant::Hetero => (Method::NonInteractionHetero, Some(iters)),
    };
    Ok(DebiasedEstimate {
        theta,
        k_used: k,
        method,
        t_used,
        warnings: basis.warning().cloned().into_iter().collect::<Vec<FitWarning>>(),
    })
}

/// Projection estimator that ignores interactions between X and Z.
pub fn fit_non_interaction(data: &Dataset, k: usize, variant: Variant, iters: usize) -> Result<DebiasedEstimate> {
    check_k(k)?;
    if k > data.m() {
        return Err(Error::InvalidRank(format!("K = {k} exceeds m = {}", data.m())));
    }
    let phi_b = non_interaction_covariance(data)?;
    fit_non_interaction_from(data, &phi_b, k, variant, iters)
}

/// Runs any estimator, selecting K first when asked.
///
/// `truth` is required for [`Method::Oracle`] and ignored otherwise.
pub fn fit_method(
    data: &Dataset,
    method: Method,
    k: KChoice,
    iters: usize,
    truth: Option<&GroundTruth>,
) -> Result<DebiasedEstimate> {
    let variant = if method.uses_hetero_pca() {
        Variant::Hetero
    } else {
        Variant::Homo
    };
    match method {
        Method::Ols => fit_ols_baseline(data),
        Method::Oracle => {
            let truth = truth.ok_or_else(|| {
                Error::InvalidConfig("the oracle estimator needs the generating parameters".into())
            })?;
            fit_oracle(data, truth)
        }
        Method::InteractionHomo | Method::InteractionHetero => {
            if let KChoice::Known(k) = k {
                check_interaction_preconditions(data, k)?;
            } else {
                check_interaction_preconditions(data, 1)?;
            }
            let cov = interaction_covariance(data)?;
            let k = match k {
                KChoice::Known(k) => k,
                KChoice::Selected(bound) => select_k_interaction(data, &cov, bound)?,
            };
            fit_interaction_from(data, &cov, k, variant, iters)
        }
        Method::NonInteractionHomo | Method::NonInteractionHetero => {
            let phi_b = non_interaction_covariance(data)?;
            let k = match k {
                KChoice::Known(k) => k,
                KChoice::Selected(bound) => select_k_non_interaction(data, &phi_b, bound)?,
            };
            if k > data.m() {
                return Err(Error::InvalidRank(format!("K = {k} exceeds m = {}", data.m())));
            }
            fit_non_interaction_from(data, &phi_b, k, variant, iters)
        }
    }
}

/// Default HeteroPCA iteration count.
pub const DEFAULT_ITERS: usize = DEFAULT_HETERO_ITERS;

/// Fits several methods on one dataset, sharing the covariance stages
/// between methods that need them. Results follow the order of `methods`.
pub fn fit_methods(
    data: &Dataset,
    methods: &[Method],
    k: KChoice,
    iters: usize,
    truth: Option<&GroundTruth>,
) -> Vec<Result<DebiasedEstimate>> {
    let mut interaction: Option<Option<CovarianceFit>> = None;
    let mut linear: Option<Option<DMatrix<f64>>> = None;
    methods
        .iter()
        .map(|&method| {
            let variant = if method.uses_hetero_pca() {
                Variant::Hetero
            } else {
                Variant::Homo
            };
            if method.is_interaction() {
                let known_ok = match k {
                    KChoice::Known(k) => check_interaction_preconditions(data, k),
                    KChoice::Selected(_) => check_interaction_preconditions(data, 1),
                };
                if known_ok.is_ok() {
                    let cov = interaction.get_or_insert_with(|| interaction_covariance(data).ok());
                    if let Some(cov) = cov {
                        let chosen = match k {
                            KChoice::Known(k) => Ok(k),
                            KChoice::Selected(bound) => select_k_interaction(data, cov, bound),
                        };
                        return chosen.and_then(|k| fit_interaction_from(data, cov, k, variant, iters));
                    }
                }
            } else if method.is_non_interaction() {
                let phi = linear.get_or_insert_with(|| non_interaction_covariance(data).ok());
                if let Some(phi) = phi {
                    let chosen = match k {
                        KChoice::Known(k) => Ok(k),
                        KChoice::Selected(bound) => select_k_non_interaction(data, phi, bound),
                    };
                    return chosen.and_then(|k| {
                        if k > data.m() {
                            return Err(Error::InvalidRank(format!("K = {k} exceeds m = {}", data.m())));
                        }
                        fit_non_interaction_from(data, phi, k, variant, iters)
                    });
                }
            }
            // uncached path, also reproduces any cached-stage error
            fit_method(data, method, k, iters, truth)
        })
        .collect()
}
