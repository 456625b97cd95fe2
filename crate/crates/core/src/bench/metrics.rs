use nalgebra::DMatrix;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::sym_eigen_desc;
use crate::{Dataset, Error, GroundTruth, Result};

/// Natural log of a mean squared error. A zero error is represented by
/// negative infinity and written as the string `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogMetric(f64);

impl LogMetric {
    pub fn from_mean_square(ms: f64) -> Self {
        if ms == 0.0 {
            LogMetric(f64::NEG_INFINITY)
        } else {
            LogMetric(ms.ln())
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_neg_infinite(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl std::fmt::Display for LogMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&crate::io::format_float(self.0))
    }
}

impl Serialize for LogMetric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_neg_infinite() {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for LogMetric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(LogMetric(v)),
            Raw::Text(t) if t == "-inf" => Ok(LogMetric(f64::NEG_INFINITY)),
            Raw::Text(t) => Err(de::Error::custom(format!("invalid metric '{t}'"))),
        }
    }
}

fn same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// (1/m)‖Θ̂ − A‖_F².
pub fn sse(theta: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    same_shape(theta, a, "estimate vs truth")?;
    Ok((theta - a).norm_squared() / a.ncols() as f64)
}

pub fn sse_log(theta: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<LogMetric> {
    sse(theta, a).map(LogMetric::from_mean_square)
}

/// (1/(n*m))‖Y* − X*Θ̂‖_F².
pub fn pmse(theta: &DMatrix<f64>, test: &Dataset) -> Result<f64> {
    if theta.nrows() != test.p() || theta.ncols() != test.m() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {}x{}, test data has p = {}, m = {}",
            theta.nrows(),
            theta.ncols(),
            test.p(),
            test.m()
        )));
    }
    let resid = test.y() - test.x() * theta;
    Ok(resid.norm_squared() / (test.n() * test.m()) as f64)
}

pub fn pmse_log(theta: &DMatrix<f64>, test: &Dataset) -> Result<LogMetric> {
    pmse(theta, test).map(LogMetric::from_mean_square)
}

/// (1/m) λ_K(Bᵀ Σ_W B) with Σ_W = σ_W² I.
pub fn snr(truth: &GroundTruth) -> Result<f64> {
    truth.validate()?;
    let gram = truth.b.transpose() * &truth.b * truth.sigma_w.powi(2);
    let (values, _) = sym_eigen_desc(&gram);
    Ok(values[truth.k() - 1] / truth.m() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoiseSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sse_closed_form() {
        let a = DMatrix::from_element(1, 1, 0.3);
        let theta = DMatrix::from_element(1, 1, 0.3 + std::f64::consts::E);
        assert!((sse_log(&theta, &a).unwrap().value() - 2.0).abs() < 1e-12);
        assert!(sse_log(&a, &a).unwrap().is_neg_infinite());
        assert!(sse_log(&a, &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn sse_matches_elementwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(2, 5, |_, _| rng.random::<f64>());
        let t = DMatrix::from_fn(2, 5, |_, _| rng.random::<f64>());
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..5 {
                acc += (t[(i, j)] - a[(i, j)]).powi(2);
            }
        }
        assert!((sse_log(&t, &a).unwrap().value() - (acc / 5.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn pmse_cases() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, 1.0]);
        let theta = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, -1.0, 2.0]);
        let exact = Dataset::new(x.clone(), &x * &theta).unwrap();
        assert!(pmse_log(&theta, &exact).unwrap().is_neg_infinite());
        let twos = Dataset::new(x.clone(), DMatrix::from_element(3, 2, 2.0)).unwrap();
        let zero = DMatrix::zeros(2, 2);
        assert!((pmse_log(&zero, &twos).unwrap().value() - 4f64.ln()).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = DMatrix::from_fn(3, 2, |_, _| rng.random::<f64>());
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let mut acc = 0.0;
        for i in 0..3 {
            for l in 0..2 {
                let fit: f64 = (0..2).map(|j| x[(i, j)] * theta[(j, l)]).sum();
                acc += (y[(i, l)] - fit).powi(2);
            }
        }
        assert!((pmse_log(&theta, &data).unwrap().value() - (acc / 6.0).ln()).abs() < 1e-12);
    }

    fn truth_with_b(b: DMatrix<f64>, sigma_w: f64) -> GroundTruth {
        let (k, m) = b.shape();
        GroundTruth {
            a: DMatrix::zeros(1, m),
            c: vec![DMatrix::zeros(k, m)],
            psi: DMatrix::zeros(1, k),
            b,
            sigma_w,
            noise: NoiseSpec::Homoscedastic { variance: 1.0 },
            noise_variances: vec![1.0; m],
        }
    }

    #[test]
    fn snr_of_orthogonal_rows() {
        // rows orthogonal with squared norm m = 4
        let b = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0]);
        assert!((snr(&truth_with_b(b.clone(), 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((snr(&truth_with_b(b, 1.5)).unwrap() - 2.25).abs() < 1e-12);
    }

    #[test]
    fn snr_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DMatrix::from_fn(3, 10, |_, _| rng.random_range(-1.0..1.0));
        let truth = truth_with_b(b.clone(), 0.7);
        let gram = b.transpose() * &b * 0.49;
        let mut ev: Vec<f64> = gram.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert!((snr(&truth).unwrap() - ev[2] / 10.0).abs() < 1e-10);
    }

    #[test]
    fn metric_serializes_sentinel_as_string() {
        let v = serde_json::to_string(&LogMetric::from_mean_square(0.0)).unwrap();
        assert_eq!(v, "\"-inf\"");
        let back: LogMetric = serde_json::from_str(&v).unwrap();
        assert!(back.is_neg_infinite());
        let back: LogMetric = serde_json::from_str("1.5").unwrap();
        assert_eq!(back.value(), 1.5);
    }
}
