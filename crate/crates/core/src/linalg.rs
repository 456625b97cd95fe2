//! Dense kernels shared by the regression and spectral modules.

use nalgebra::{DMatrix, DVector};

/// (M + Mᵀ) / 2
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Flips each column so its first nonzero entry is positive.
pub fn normalize_signs(u: &mut DMatrix<f64>) {
    for mut col in u.column_iter_mut() {
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-14 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Full symmetric eigendecomposition with eigenvalues sorted nonincreasing.
/// Columns of the returned matrix follow the same order and sign convention.
pub fn sym_eigen_desc(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = s.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_fn(s.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    normalize_signs(&mut vectors);
    (values, vectors)
}

/// Left singular vectors and singular values, sorted nonincreasing.
pub fn left_singular_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let values = order.iter().map(|&i| sv[i]).collect();
    let mut vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| u[(r, order[c])]);
    normalize_signs(&mut vectors);
    (values, vectors)
}

/// First `k` columns.
pub fn leading_columns(u: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    u.columns(0, k).into_owned()
}

/// Frobenius sin-Θ distance between the column spans of two orthonormal
/// matrices of equal width: ‖(I − UUᵀ)V‖_F.
pub fn sin_theta(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let resid = v - u * (u.transpose() * v);
    resid.norm()
}

/// Max-abs entry; zero for empty matrices.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.amax()
    }
}

/// Thin-SVD least-squares solver for a fixed design, reusable across targets.
#[derive(Debug, Clone)]
pub struct SvdSolver {
    /// q × n pseudo-inverse of the design.
    pinv: DMatrix<f64>,
}

/// Relative singular-value cutoff below which a design is rank deficient.
pub const RANK_TOL: f64 = 1e-10;

impl SvdSolver {
    pub fn new(design: &DMatrix<f64>) -> crate::Result<Self> {
        let (n, q) = design.shape();
        if n < q {
            return Err(crate::Error::InsufficientSamples(format!(
                "design has {n} rows but {q} columns"
            )));
        }
        if q == 0 {
            return Ok(Self {
                pinv: DMatrix::zeros(0, n),
            });
        }
        let svd = design.clone().svd(true, true);
        let sv: &DVector<f64> = &svd.singular_values;
        let largest = sv.max();
        let smallest = sv.min();
        let cutoff = RANK_TOL * largest;
        if !(smallest >= cutoff) || largest == 0.0 {
            return Err(crate::Error::RankDeficientDesign { smallest, cutoff });
        }
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested Vᵀ");
        let inv = DMatrix::from_diagonal(&sv.map(|s| 1.0 / s));
        let pinv = v_t.transpose() * inv * u.transpose();
        Ok(Self { pinv })
    }

    pub fn pseudo_inverse(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn solve(&self, targets: &DMatrix<f64>) -> DMatrix<f64> {
        &self.pinv * targets
    }
}
