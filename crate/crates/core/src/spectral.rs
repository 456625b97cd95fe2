//! Leading eigenspaces, diagonal-imputing PCA for heteroscedastic noise,
//! projection-basis construction and the eigenvalue-ratio rank selector.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{leading_columns, left_singular_desc, normalize_signs, sym_eigen_desc, symmetrize};
use crate::model::{FitWarning, ProjectionBasis};
use crate::{Error, Result};

/// Which coefficient surface a spectrum was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum SpectrumSource {
    PhiB,
    /// φ_(C_j, C_j), 0-based covariate index.
    PhiC(usize),
    /// Residual covariance of the linear-only fit.
    NonInteractionPhiB,
    Other,
}

/// Eigenvalues of a symmetric matrix, nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub eigenvalues: Vec<f64>,
    pub source: SpectrumSource,
}

impl SpectrumSummary {
    pub fn tagged(mut self, source: SpectrumSource) -> Self {
        self.source = source;
        self
    }
}

/// Relative singular value below which the concatenated blocks are flagged.
pub const NEAR_RANK_DEFICIENT: f64 = 1e-8;

/// Default iteration count for [`hetero_pca`].
pub const DEFAULT_HETERO_ITERS: usize = 5;

fn check_rank(k: usize, m: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidRank("K must be at least 1".into()));
    }
    if k > m {
        return Err(Error::InvalidRank(format!("K = {k} exceeds dimension {m}")));
    }
    Ok(())
}

fn check_square(s: &DMatrix<f64>) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(())
}

/// Unit eigenvectors for the K algebraically largest eigenvalues of the
/// symmetrized input, with the full spectrum.
pub fn top_k_eigenvectors(s: &DMatrix<f64>, k: usize) -> Result<(DMatrix<f64>, SpectrumSummary)> {
    check_square(s)?;
    check_rank(k, s.nrows())?;
    let (eigenvalues, vectors) = sym_eigen_desc(&symmetrize(s));
    Ok((
        leading_columns(&vectors, k),
        SpectrumSummary {
            eigenvalues,
            source: SpectrumSource::Other,
        },
    ))
}

/// Eigenvectors of a symmetric matrix ordered by |λ| (its left singular
/// vectors) with the matching eigenvalues.
fn singular_order(n: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (values, vectors) = sym_eigen_desc(n);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    let vals = order.iter().map(|&i| values[i]).collect();
    let vecs = DMatrix::from_fn(n.nrows(), order.len(), |r, c| vectors[(r, order[c])]);
    (vals, vecs)
}

/// Leading-K subspace of a covariance-like matrix whose diagonal is
/// contaminated by heteroscedastic noise.
///
/// Starts from the off-diagonal part of `s` (diagonal set to zero). Each of
/// the `iters` rounds replaces the diagonal with that of the best rank-K
/// approximation of the current matrix while keeping the off-diagonal of
/// `s`. Returns the top-K left singular vectors of the final matrix.
pub fn hetero_pca(s: &DMatrix<f64>, k: usize, iters: usize) -> Result<DMatrix<f64>> {
    check_square(s)?;
    let m = s.nrows();
    check_rank(k, m)?;
    let mut n = symmetrize(s);
    n.fill_diagonal(0.0);
    for _ in 0..iters {
        let (values, vectors) = singular_order(&n);
        for i in 0..m {
            let d: f64 = (0..k).map(|c| values[c] * vectors[(i, c)].powi(2)).sum();
            n[(i, i)] = d;
        }
    }
    let (_, vectors) = singular_order(&n);
    let mut u = leading_columns(&vectors, k);
    normalize_signs(&mut u);
    Ok(u)
}

/// Orthonormal basis for the span of the concatenated blocks: the first
/// r = Σ width(block) left singular vectors of [U_1, ..., U_b].
///
/// A concatenation whose smallest singular value falls below
/// [`NEAR_RANK_DEFICIENT`] times the largest still yields r vectors; the
/// basis then carries a [`FitWarning::NearRankDeficientBasis`].
pub fn build_projection(blocks: &[DMatrix<f64>]) -> Result<ProjectionBasis> {
    let Some(first) = blocks.first() else {
        return Err(Error::InvalidRank("no blocks to combine".into()));
    };
    let m = first.nrows();
    if let Some(bad) = blocks.iter().find(|b| b.nrows() != m) {
        return Err(Error::DimensionMismatch(format!(
            "block has {} rows, expected {m}",
            bad.nrows()
        )));
    }
    let r: usize = blocks.iter().map(|b| b.ncols()).sum();
    if r > m {
        return Err(Error::InvalidRank(format!(
            "combined rank {r} exceeds m = {m}"
        )));
    }
    if r == 0 {
        return Ok(ProjectionBasis::empty(m));
    }
    let mut concat = DMatrix::zeros(m, r);
    let mut col = 0;
    for b in blocks {
        concat.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    let (sv, u) = left_singular_desc(&concat);
    let ratio = sv[r - 1] / sv[0];
    let warning = (!(ratio >= NEAR_RANK_DEFICIENT))
        .then_some(FitWarning::NearRankDeficientBasis { ratio });
    ProjectionBasis::with_warning(leading_columns(&u, r), warning)
}

/// Default upper bound on the hidden dimension: ⌊min(n, m) / 2⌋, at least 1.
pub fn default_k_star(n: usize, m: usize) -> usize {
    (n.min(m) / 2).max(1)
}

/// Largest K* for which every spectrum has positive leading eigenvalues
/// λ_1..λ_{K*+1}; zero if some λ_2 is already nonpositive.
pub fn positive_k_star(spectra: &[SpectrumSummary]) -> usize {
    spectra
        .iter()
        .map(|s| {
            s.eigenvalues
                .iter()
                .take_while(|&&v| v > 0.0)
                .count()
                .saturating_sub(1)
        })
        .min()
        .unwrap_or(0)
}

/// Position i ∈ 1..=k_star maximizing λ_i / λ_{i+1}; ties go to the smaller i.
pub fn ratio_argmax(spectrum: &SpectrumSummary, index: usize, k_star: usize) -> Result<usize> {
    let ev = &spectrum.eigenvalues;
    if ev.len() < k_star + 1 {
        return Err(Error::InvalidRank(format!(
            "spectrum {index} has {} eigenvalues, need at least K* + 1 = {}",
            ev.len(),
            k_star + 1
        )));
    }
    if let Some(position) = (0..=k_star).find(|&i| !(ev[i] > 0.0)) {
        return Err(Error::NonpositiveEigenvalue {
            spectrum: index,
            position: position + 1,
            value: ev[position],
        });
    }
    let mut best = 1;
    let mut best_ratio = ev[0] / ev[1];
    for i in 2..=k_star {
        let ratio = ev[i - 1] / ev[i];
        if ratio > best_ratio {
            best = i;
            best_ratio = ratio;
        }
    }
    Ok(best)
}

/// Majority vote over the per-spectrum eigenvalue-ratio maximizers.
/// Ties between equally popular positions go to the smallest.
pub fn select_k(spectra: &[SpectrumSummary], k_star: usize) -> Result<usize> {
    if k_star == 0 {
        return Err(Error::InvalidRank("K* must be at least 1".into()));
    }
    if spectra.is_empty() {
        return Err(Error::InvalidRank("no spectra to vote".into()));
    }
    let mut votes = vec![0usize; k_star + 1];
    for (index, spectrum) in spectra.iter().enumerate() {
        votes[ratio_argmax(spectrum, index, k_star)?] += 1;
    }
    let mut best = 1;
    for i in 2..=k_star {
        if votes[i] > votes[best] {
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, sin_theta};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn orthonormal(rng: &mut ChaCha8Rng, m: usize, k: usize) -> DMatrix<f64> {
        gaussian(rng, m, k).qr().q()
    }

    fn spectrum(values: &[f64]) -> SpectrumSummary {
        SpectrumSummary {
            eigenvalues: values.to_vec(),
            source: SpectrumSource::Other,
        }
    }

    fn check_projector(basis: &ProjectionBasis) {
        let p = basis.projector();
        assert!(max_abs(&(&p * &p - &p)) < 1e-8);
        assert!(max_abs(&(&p - p.transpose())) < 1e-8);
        assert!((p.trace() - basis.rank() as f64).abs() < 1e-8);
    }

    #[test]
    fn diagonal_input() {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let (u, spec) = top_k_eigenvectors(&s, 2).unwrap();
        assert_eq!(spec.eigenvalues, vec![3.0, 2.0, 1.0]);
        let e12 = DMatrix::identity(3, 2);
        assert!(sin_theta(&e12, &u) < 1e-12);
    }

    #[test]
    fn rank_one_input() {
        let v = nalgebra::DVector::from_vec(vec![0.6, 0.0, -0.8]);
        let s = &v * v.transpose();
        let (u, _) = top_k_eigenvectors(&s, 1).unwrap();
        // sign convention: first nonzero entry positive
        assert!((u.column(0) - &v).amax() < 1e-12);
    }

    #[test]
    fn rank_above_dimension_is_rejected() {
        let s = DMatrix::<f64>::identity(3, 3);
        assert!(top_k_eigenvectors(&s, 4).is_err());
        assert!(hetero_pca(&s, 4, 1).is_err());
        assert!(top_k_eigenvectors(&s, 0).is_err());
    }

    /// Reference: full eigendecomposition with an independent ordering pass.
    #[test]
    fn matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = gaussian(&mut rng, 20, 20);
        let s = &g + g.transpose();
        let (u, spec) = top_k_eigenvectors(&s, 4).unwrap();
        let eig = s.clone().symmetric_eigen();
        let mut idx: Vec<usize> = (0..20).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let gap = eig.eigenvalues[idx[3]] - eig.eigenvalues[idx[4]];
        assert!(gap > 1e-6);
        let reference = DMatrix::from_fn(20, 4, |r, c| eig.eigenvectors[(r, idx[c])]);
        assert!(sin_theta(&reference, &u) < 1e-8);
        assert!(max_abs(&(u.transpose() * &u - DMatrix::identity(4, 4))) < 1e-10);
        assert!(spec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn hetero_pca_exact_low_rank_matches_pca() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let u = orthonormal(&mut rng, 30, 3);
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![30.0, 20.0, 10.0]));
        let s = &u * lambda * u.transpose();
        let (pca, _) = top_k_eigenvectors(&s, 3).unwrap();
        let hpca = hetero_pca(&s, 3, 300).unwrap();
        assert!(sin_theta(&pca, &hpca) < 1e-8);
        assert!(sin_theta(&u, &hpca) < 1e-8);
    }

    #[test]
    fn hetero_pca_beats_pca_under_diagonal_contamination() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (m, k) = (40, 2);
        let b = gaussian(&mut rng, k, m);
        let signal = b.transpose() * &b;
        let (truth, _) = top_k_eigenvectors(&signal, k).unwrap();
        // diagonal spread: condition ≥ 100
        let delta: Vec<f64> = (0..m).map(|i| 0.1 + 19.9 * (i as f64 / (m - 1) as f64).powi(3)).collect();
        assert!(delta.iter().cloned().fold(0.0, f64::max) / delta.iter().cloned().fold(f64::MAX, f64::min) >= 100.0);
        let s = &signal + DMatrix::from_diagonal(&nalgebra::DVector::from_vec(delta));
        let (pca, _) = top_k_eigenvectors(&s, k).unwrap();
        let hpca = hetero_pca(&s, k, 10).unwrap();
        assert!(sin_theta(&truth, &hpca) < sin_theta(&truth, &pca));
    }

    #[test]
    fn isotropic_shift_leaves_subspace_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let u = orthonormal(&mut rng, 25, 2);
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![40.0, 25.0]));
        let signal = &u * lambda * u.transpose();
        let s = &signal + DMatrix::<f64>::identity(25, 25) * 2.0;
        let (a, _) = top_k_eigenvectors(&signal, 2).unwrap();
        let (b, _) = top_k_eigenvectors(&s, 2).unwrap();
        let h = hetero_pca(&s, 2, 500).unwrap();
        assert!(sin_theta(&a, &b) < 1e-10);
        assert!(sin_theta(&a, &h) < 1e-6);
    }

    #[test]
    fn single_block_projection_spans_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let u = orthonormal(&mut rng, 12, 3);
        let basis = build_projection(&[u.clone()]).unwrap();
        assert!(sin_theta(&u, basis.u_d()) < 1e-10);
        assert!(basis.warning().is_none());
        check_projector(&basis);
    }

    #[test]
    fn duplicated_blocks_are_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let u = orthonormal(&mut rng, 12, 2);
        let basis = build_projection(&[u.clone(), u]).unwrap();
        assert_eq!(basis.rank(), 4);
        assert!(matches!(
            basis.warning(),
            Some(FitWarning::NearRankDeficientBasis { .. })
        ));
        check_projector(&basis);
    }

    #[test]
    fn projection_matches_explicit_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let (m, k) = (15, 2);
        let b = orthonormal(&mut rng, m, k);
        let c = orthonormal(&mut rng, m, k);
        let basis = build_projection(&[b.clone(), c.clone()]).unwrap();
        // D stacks the block transposes: rows of D span the same space
        let mut d = DMatrix::zeros(2 * k, m);
        d.rows_mut(0, k).copy_from(&b.transpose());
        d.rows_mut(k, k).copy_from(&c.transpose());
        let explicit = d.transpose() * (&d * d.transpose()).try_inverse().unwrap() * &d;
        assert!(max_abs(&(basis.projector() - explicit)) < 1e-8);
        check_projector(&basis);
    }

    #[test]
    fn too_many_columns_is_rejected() {
        let u = DMatrix::<f64>::identity(3, 2);
        assert!(build_projection(&[u.clone(), u]).is_err());
    }

    #[test]
    fn select_k_on_dominant_gaps() {
        let third = spectrum(&[50.0, 40.0, 30.0, 1.0, 0.9, 0.8, 0.7]);
        assert_eq!(select_k(&[third.clone(), third.clone(), third], 5).unwrap(), 3);
        let first = spectrum(&[100.0, 1.0, 0.9, 0.8, 0.7, 0.6]);
        assert_eq!(select_k(&[first.clone(), first], 4).unwrap(), 1);
    }

    #[test]
    fn select_k_vote_and_tie_break() {
        // gaps placed at positions 1, 2 and 3 respectively
        let at = |i: usize| {
            let mut v = vec![1.0; 6];
            for (pos, val) in v.iter_mut().enumerate() {
                *val = if pos < i { 10.0 - pos as f64 * 0.1 } else { 1.0 - pos as f64 * 0.01 };
            }
            spectrum(&v)
        };
        for i in 1..=3 {
            assert_eq!(ratio_argmax(&at(i), 0, 4).unwrap(), i);
        }
        assert_eq!(select_k(&[at(2), at(3), at(3)], 4).unwrap(), 3);
        assert_eq!(select_k(&[at(1), at(2), at(3)], 4).unwrap(), 1);
    }

    #[test]
    fn select_k_errors() {
        let neg = spectrum(&[3.0, 2.0, -0.1, -1.0]);
        assert!(matches!(
            select_k(&[neg], 2),
            Err(Error::NonpositiveEigenvalue { spectrum: 0, position: 3, .. })
        ));
        let short = spectrum(&[3.0, 2.0]);
        assert!(select_k(&[short], 2).is_err());
    }

    #[test]
    fn k_star_bound_limits_selection() {
        let s = spectrum(&[50.0, 40.0, 30.0, 1.0, 0.9]);
        assert_eq!(select_k(&[s.clone()], 2).unwrap(), 2);
        assert_eq!(select_k(&[s], 3).unwrap(), 3);
        assert_eq!(default_k_star(1000, 25), 12);
        assert_eq!(positive_k_star(&[spectrum(&[3.0, 2.0, 1.0, -1.0])]), 2);
    }

    proptest! {
        #[test]
        fn select_k_is_scale_invariant(seed in 0u64..200, scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut spectra: Vec<SpectrumSummary> = (0..3).map(|_| {
                let mut v: Vec<f64> = (0..8).map(|_| rng.random_range(0.1..10.0)).collect();
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
                spectrum(&v)
            }).collect();
            let before = select_k(&spectra, 6).unwrap();
            for v in spectra[1].eigenvalues.iter_mut() { *v *= scale; }
            prop_assert_eq!(before, select_k(&spectra, 6).unwrap());
        }

        #[test]
        fn projection_ignores_block_order(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let blocks: Vec<DMatrix<f64>> = (0..3).map(|_| orthonormal(&mut rng, 14, 2)).collect();
            let fwd = build_projection(&blocks).unwrap();
            let rev: Vec<DMatrix<f64>> = blocks.iter().rev().cloned().collect();
            let back = build_projection(&rev).unwrap();
            prop_assert!(sin_theta(fwd.u_d(), back.u_d()) < 1e-8);
            check_projector(&fwd);
        }
    }
}
