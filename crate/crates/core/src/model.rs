//! Domain types for the confounded multivariate-response model
//!
//! ```text
//! Y = AᵀX + BᵀZ + Σ_j C_jᵀ X_j Z + E,    Z = ψᵀX + W
//! ```
//!
//! Row-sample convention throughout: `X` is n×p, `Y` is n×m, and the
//! effect matrices `A` (p×m), `B` (K×m), `C_j` (K×m) are stored with the
//! response dimension along columns.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::io::{matrix_json, matrix_list_json};
use crate::{Error, Result};

/// Observed covariates paired with responses, one sample per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    #[serde(with = "matrix_json")]
    x: DMatrix<f64>,
    #[serde(with = "matrix_json")]
    y: DMatrix<f64>,
}

#[derive(Deserialize)]
struct RawDataset {
    #[serde(with = "matrix_json")]
    x: DMatrix<f64>,
    #[serde(with = "matrix_json")]
    y: DMatrix<f64>,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = Error;
    fn try_from(raw: RawDataset) -> Result<Self> {
        Dataset::new(raw.x, raw.y)
    }
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        validate(&x, &y)?;
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.y.ncols()
    }

    /// Dataset restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
        }
    }
}

/// Checks the dataset invariants: equal, nonzero row counts and finite entries.
pub fn validate(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows but Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::InsufficientSamples("dataset has no rows".into()));
    }
    check_finite("X", x)?;
    check_finite("Y", y)
}

pub(crate) fn check_finite(matrix: &'static str, m: &DMatrix<f64>) -> Result<()> {
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            if !m[(row, col)].is_finite() {
                return Err(Error::NonFiniteEntry { matrix, row, col });
            }
        }
    }
    Ok(())
}

/// Distribution of the response noise `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Cov(E) = σ²I.
    Homoscedastic { variance: f64 },
    /// Per-response variances τ_ℓ² ∝ v_ℓ^α with v_ℓ ~ Uniform[0, 1].
    Heteroscedastic { alpha: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Homoscedastic { variance } if !(variance > 0.0 && variance.is_finite()) => {
                Err(Error::InvalidConfig(format!(
                    "homoscedastic variance must be positive, got {variance}"
                )))
            }
            NoiseSpec::Heteroscedastic { alpha } if !(alpha >= 0.0 && alpha.is_finite()) => Err(
                Error::InvalidConfig(format!("alpha must be nonnegative, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Generating parameters of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(with = "matrix_json")]
    pub a: DMatrix<f64>,
    #[serde(with = "matrix_json")]
    pub b: DMatrix<f64>,
    #[serde(with = "matrix_list_json")]
    pub c: Vec<DMatrix<f64>>,
    #[serde(with = "matrix_json")]
    pub psi: DMatrix<f64>,
    pub sigma_w: f64,
    pub noise: NoiseSpec,
    /// Realized per-response noise variances (length m).
    pub noise_variances: Vec<f64>,
}

impl GroundTruth {
    pub fn p(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    pub fn k(&self) -> usize {
        self.b.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (p, m, k) = (self.p(), self.m(), self.k());
        if k == 0 {
            return Err(Error::InvalidRank("K must be at least 1".into()));
        }
        if (p + 1) * k > m {
            return Err(Error::InvalidRank(format!(
                "(p+1)K = {} exceeds m = {m}",
                (p + 1) * k
            )));
        }
        if self.b.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "B has {} columns, expected {m}",
                self.b.ncols()
            )));
        }
        if self.c.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} interaction matrices for p = {p}",
                self.c.len()
            )));
        }
        for (j, c) in self.c.iter().enumerate() {
            if c.shape() != (k, m) {
                return Err(Error::DimensionMismatch(format!(
                    "C_{} is {}x{}, expected {k}x{m}",
                    j + 1,
                    c.nrows(),
                    c.ncols()
                )));
            }
        }
        if self.psi.shape() != (p, k) {
            return Err(Error::DimensionMismatch(format!(
                "psi is {}x{}, expected {p}x{k}",
                self.psi.nrows(),
                self.psi.ncols()
            )));
        }
        if !(self.sigma_w > 0.0) {
            return Err(Error::InvalidConfig("sigma_w must be positive".into()));
        }
        if self.noise_variances.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} noise variances for m = {m}",
                self.noise_variances.len()
            )));
        }
        self.noise.validate()
    }

    /// D = (B; C_1; ...; C_p), the ((p+1)K)×m stack of hidden-effect matrices.
    pub fn stacked_effects(&self) -> DMatrix<f64> {
        let (k, m) = (self.k(), self.m());
        let mut d = DMatrix::zeros((self.p() + 1) * k, m);
        d.rows_mut(0, k).copy_from(&self.b);
        for (j, c) in self.c.iter().enumerate() {
            d.rows_mut((j + 1) * k, k).copy_from(c);
        }
        d
    }
}

/// Number of unordered covariate pairs j ≤ k.
pub fn pair_count(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Position of pair (j, k), j ≤ k, in lexicographic order (0-based).
pub fn pair_index(p: usize, j: usize, k: usize) -> usize {
    debug_assert!(j <= k && k < p);
    // pairs whose first index is below j
    let before = j * p - (j * j - j) / 2;
    before + (k - j)
}

/// All pairs (j, k), j ≤ k < p, in lexicographic order.
pub fn pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|j| (j..p).map(move |k| (j, k))).collect()
}

/// First-stage fit of Y on the interaction-expanded design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStageFit {
    /// Linear coefficients, p×m.
    #[serde(with = "matrix_json")]
    pub l1: DMatrix<f64>,
    /// Pairwise-product coefficients, p(p+1)/2 × m, rows in [`pairs`] order.
    #[serde(with = "matrix_json")]
    pub l2: DMatrix<f64>,
    #[serde(with = "matrix_json")]
    pub residuals: DMatrix<f64>,
}

/// Coefficient surfaces of the residual-covariance regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceFit {
    #[serde(with = "matrix_json")]
    pub phi_b: DMatrix<f64>,
    /// Linear-term surfaces, one per covariate.
    #[serde(with = "matrix_list_json")]
    pub phi_bc: Vec<DMatrix<f64>>,
    /// Product-term surfaces in [`pairs`] order.
    #[serde(with = "matrix_list_json")]
    pub phi_cc: Vec<DMatrix<f64>>,
}

impl CovarianceFit {
    pub fn p(&self) -> usize {
        self.phi_bc.len()
    }

    /// φ_(C_j, C_j).
    pub fn phi_c(&self, j: usize) -> &DMatrix<f64> {
        &self.phi_cc[pair_index(self.p(), j, j)]
    }

    pub fn phi_pair(&self, j: usize, k: usize) -> &DMatrix<f64> {
        let (a, b) = if j <= k { (j, k) } else { (k, j) };
        &self.phi_cc[pair_index(self.p(), a, b)]
    }
}

/// Non-fatal diagnostics attached to a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitWarning {
    /// The concatenated eigenvector blocks are numerically rank deficient.
    NearRankDeficientBasis { ratio: f64 },
}

/// Orthonormal basis U_D of the estimated hidden-effect column space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBasis {
    #[serde(with = "matrix_json")]
    u_d: DMatrix<f64>,
    warning: Option<FitWarning>,
}

impl ProjectionBasis {
    /// Wraps an m×r matrix after checking UᵀU = I to 1e-10.
    pub fn new(u_d: DMatrix<f64>) -> Result<Self> {
        Self::with_warning(u_d, None)
    }

    pub(crate) fn with_warning(u_d: DMatrix<f64>, warning: Option<FitWarning>) -> Result<Self> {
        let (m, r) = u_d.shape();
        if r > m {
            return Err(Error::InvalidRank(format!("basis rank {r} exceeds m = {m}")));
        }
        let gram = u_d.transpose() * &u_d - DMatrix::<f64>::identity(r, r);
        let dev = crate::linalg::max_abs(&gram);
        if !(dev < 1e-10) {
            return Err(Error::InvalidRank(format!(
                "basis columns are not orthonormal (max deviation {dev:e})"
            )));
        }
        Ok(Self { u_d, warning })
    }

    /// Empty basis (r = 0): the projector is zero and its complement the identity.
    pub fn empty(m: usize) -> Self {
        Self {
            u_d: DMatrix::zeros(m, 0),
            warning: None,
        }
    }

    pub fn u_d(&self) -> &DMatrix<f64> {
        &self.u_d
    }

    pub fn rank(&self) -> usize {
        self.u_d.ncols()
    }

    pub fn m(&self) -> usize {
        self.u_d.nrows()
    }

    pub fn warning(&self) -> Option<&FitWarning> {
        self.warning.as_ref()
    }

    /// P_D = U_D U_Dᵀ.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.u_d * self.u_d.transpose()
    }

    /// P_D^⊥ = I − P_D.
    pub fn complement(&self) -> DMatrix<f64> {
        DMatrix::identity(self.m(), self.m()) - self.projector()
    }

    /// Rows of `y` (n×m) mapped through P_D^⊥.
    pub fn project_out(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        if self.rank() == 0 {
            return y.clone();
        }
        y - (y * &self.u_d) * self.u_d.transpose()
    }
}

/// Estimator that produced a [`DebiasedEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ols,
    Oracle,
    NonInteractionHomo,
    NonInteractionHetero,
    InteractionHomo,
    InteractionHetero,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Oracle,
        Method::InteractionHomo,
        Method::InteractionHetero,
        Method::NonInteractionHomo,
        Method::NonInteractionHetero,
        Method::Ols,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Oracle => "oracle",
            Method::NonInteractionHomo => "non_interaction_homo",
            Method::NonInteractionHetero => "non_interaction_hetero",
            Method::InteractionHomo => "interaction_homo",
            Method::InteractionHetero => "interaction_hetero",
        }
    }

    pub fn is_interaction(self) -> bool {
        matches!(self, Method::InteractionHomo | Method::InteractionHetero)
    }

    pub fn is_non_interaction(self) -> bool {
        matches!(self, Method::NonInteractionHomo | Method::NonInteractionHetero)
    }

    pub fn uses_hetero_pca(self) -> bool {
        matches!(self, Method::InteractionHetero | Method::NonInteractionHetero)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// Estimated effect matrix Θ̂ (p×m) with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasedEstimate {
    #[serde(with = "matrix_json")]
    pub theta: DMatrix<f64>,
    /// Hidden dimension used; 0 for OLS.
    pub k_used: usize,
    pub method: Method,
    pub t_used: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<FitWarning>,
}

/// How the second parameter of N(μ, s) in the generator is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadParam {
    #[default]
    Variance,
    StdDev,
}

/// Parameters of the simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub k: usize,
    /// Dependence level between observed and hidden variables (scales ψ).
    pub eta_dep: f64,
    pub sigma_w: f64,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub second_param: SpreadParam,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            m: 25,
            p: 2,
            k: 3,
            eta_dep: 0.5,
            sigma_w: 1.0,
            noise: NoiseSpec::Homoscedastic { variance: 1.0 },
            second_param: SpreadParam::Variance,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    /// Setting 1: small m, large n.
    pub fn setting1() -> Self {
        Self {
            n: 1000,
            m: 25,
            ..Self::default()
        }
    }

    /// Setting 2: large m, small n.
    pub fn setting2() -> Self {
        Self {
            n: 100,
            m: 500,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.p == 0 || self.k == 0 {
            return Err(Error::InvalidConfig(
                "n, m, p and K must all be positive".into(),
            ));
        }
        if (self.p + 1) * self.k > self.m {
            return Err(Error::InvalidConfig(format!(
                "(p+1)K = {} exceeds m = {}",
                (self.p + 1) * self.k,
                self.m
            )));
        }
        let q = self.p + pair_count(self.p);
        if self.n <= q {
            return Err(Error::InvalidConfig(format!(
                "n = {} must exceed p + p(p+1)/2 = {q}",
                self.n
            )));
        }
        if !(self.eta_dep >= 0.0 && self.eta_dep.is_finite()) {
            return Err(Error::InvalidConfig("eta_dep must be nonnegative".into()));
        }
        if !(self.sigma_w > 0.0 && self.sigma_w.is_finite()) {
            return Err(Error::InvalidConfig("sigma_w must be positive".into()));
        }
        self.noise.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_accepts_consistent_data() {
        let x = DMatrix::from_element(3, 2, 1.0);
        let y = DMatrix::from_element(3, 4, 0.5);
        assert!(validate(&x, &y).is_ok());
    }

    #[test]
    fn validate_rejects_row_mismatch() {
        let x = DMatrix::from_element(3, 2, 1.0);
        let y = DMatrix::from_element(4, 4, 0.5);
        assert!(matches!(validate(&x, &y), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn validate_reports_nan_position() {
        let x = DMatrix::from_element(3, 2, 1.0);
        let mut y = DMatrix::from_element(3, 4, 0.5);
        y[(2, 1)] = f64::NAN;
        match validate(&x, &y) {
            Err(Error::NonFiniteEntry { matrix, row, col }) => {
                assert_eq!((matrix, row, col), ("Y", 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pair_index_is_lexicographic() {
        for p in 1..6 {
            for (idx, (j, k)) in pairs(p).into_iter().enumerate() {
                assert_eq!(pair_index(p, j, k), idx);
            }
        }
    }

    #[test]
    fn basis_rejects_non_orthonormal_columns() {
        let u = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(ProjectionBasis::new(u).is_err());
    }

    #[test]
    fn config_requires_overdetermined_first_stage() {
        let cfg = SimulationConfig {
            n: 5,
            ..SimulationConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SimulationConfig {
            n: 6,
            ..SimulationConfig::default()
        };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn dataset_json_round_trip_is_exact() {
        let x = DMatrix::from_fn(4, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        let y = DMatrix::from_fn(4, 3, |i, j| (i * j) as f64 * std::f64::consts::PI);
        let d = Dataset::new(x, y).unwrap();
        let back: Dataset = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(d, back);
    }
}
