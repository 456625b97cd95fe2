use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{pmse, LogMetric};
use crate::estimators::{fit_methods, KChoice, DEFAULT_ITERS};
use crate::{Dataset, Error, Method, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub methods: Vec<Method>,
    /// With [`KChoice::Selected`], K̂ is chosen on each training split.
    pub k: KChoice,
    pub hetero_iters: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            methods: vec![
                Method::InteractionHomo,
                Method::InteractionHetero,
                Method::NonInteractionHomo,
                Method::NonInteractionHetero,
                Method::Ols,
            ],
            k: KChoice::Selected(None),
            hetero_iters: DEFAULT_ITERS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvMethodResult {
    pub method: Method,
    pub fold_pmse: Vec<f64>,
    pub fold_k: Vec<usize>,
    /// Mean held-out prediction MSE across folds.
    pub mean_pmse: f64,
    /// Log of `mean_pmse`.
    pub mean_pmse_log: LogMetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub results: Vec<CvMethodResult>,
}

impl CvReport {
    pub fn result_for(&self, method: Method) -> Option<&CvMethodResult> {
        self.results.iter().find(|r| r.method == method)
    }
}

/// Held-out row sets: rows are shuffled with the seed, then cut into
/// `folds` contiguous blocks whose sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidConfig("need at least 2 folds".into()));
    }
    if folds > n {
        return Err(Error::InvalidConfig(format!("{folds} folds for {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..folds)
        .map(|f| order[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect())
}

/// K-fold cross-validated prediction error for each requested method.
pub fn cross_validate(data: &Dataset, config: &CvConfig) -> Result<CvReport> {
    if config.methods.contains(&Method::Oracle) {
        return Err(Error::InvalidConfig(
            "the oracle estimator is unavailable without generating parameters".into(),
        ));
    }
    let folds = fold_assignment(data.n(), config.folds, config.seed)?;
    let mut pmse_by_method = vec![Vec::with_capacity(folds.len()); config.methods.len()];
    let mut k_by_method = vec![Vec::with_capacity(folds.len()); config.methods.len()];
    for (f, held_out) in folds.iter().enumerate() {
        let mut in_test = vec![false; data.n()];
        held_out.iter().for_each(|&i| in_test[i] = true);
        let train_rows: Vec<usize> = (0..data.n()).filter(|&i| !in_test[i]).collect();
        let train = data.select_rows(&train_rows);
        let test = data.select_rows(held_out);
        let fits = fit_methods(&train, &config.methods, config.k, config.hetero_iters, None);
        for (i, fit) in fits.into_iter().enumerate() {
            let est = fit.map_err(|e| {
                e.context(format!(
                    "fold {} ({} training rows), {}",
                    f + 1,
                    train_rows.len(),
                    config.methods[i]
                ))
            })?;
            pmse_by_method[i].push(pmse(&est.theta, &test)?);
            k_by_method[i].push(est.k_used);
        }
    }
    let results = config
        .methods
        .iter()
        .zip(pmse_by_method.into_iter().zip(k_by_method))
        .map(|(&method, (fold_pmse, fold_k))| {
            let mean_pmse = fold_pmse.iter().sum::<f64>() / fold_pmse.len() as f64;
            CvMethodResult {
                method,
                mean_pmse_log: LogMetric::from_mean_square(mean_pmse),
                mean_pmse,
                fold_pmse,
                fold_k,
            }
        })
        .collect();
    Ok(CvReport {
        folds: config.folds,
        seed: config.seed,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn folds_partition_rows() {
        let folds = fold_assignment(23, 5, 4).unwrap();
        let mut seen = vec![0; 23];
        for f in &folds {
            assert!(f.len() == 4 || f.len() == 5);
            f.iter().for_each(|&i| seen[i] += 1);
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(folds, fold_assignment(23, 5, 4).unwrap());
    }

    #[test]
    fn fold_count_errors() {
        assert!(fold_assignment(5, 6, 0).is_err());
        assert!(fold_assignment(5, 1, 0).is_err());
    }

    #[test]
    fn noiseless_linear_data_predicts_perfectly() {
        let x = DMatrix::from_fn(60, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + 0.1 * j as f64 * i as f64);
        let a = DMatrix::from_fn(2, 10, |j, l| 0.5 + 0.1 * (j as f64) - 0.05 * l as f64);
        let data = Dataset::new(x.clone(), &x * a).unwrap();
        let cfg = CvConfig {
            methods: vec![Method::Ols, Method::InteractionHomo, Method::NonInteractionHomo],
            k: KChoice::Known(1),
            ..CvConfig::default()
        };
        let report = cross_validate(&data, &cfg).unwrap();
        let ols = report.result_for(Method::Ols).unwrap();
        assert!(ols.mean_pmse < 1e-20);
    }

    #[test]
    fn oracle_is_rejected() {
        let x = DMatrix::from_fn(20, 1, |i, _| i as f64);
        let data = Dataset::new(x.clone(), x).unwrap();
        let cfg = CvConfig {
            methods: vec![Method::Oracle],
            ..CvConfig::default()
        };
        assert!(cross_validate(&data, &cfg).is_err());
    }
}
