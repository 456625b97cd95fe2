//! Seeded data-generating mechanism.
//!
//! Every parameter block draws from its own ChaCha8 stream keyed by the
//! config seed, so changing `n` never perturbs A, B, C, ψ or the noise
//! profile. Within a block, draws are taken in row-major order.
//!
//! | stream | block            |
//! |--------|------------------|
//! | 0      | X                |
//! | 1      | ψ                |
//! | 2      | A                |
//! | 3      | B                |
//! | 4      | C_1, ..., C_p    |
//! | 5      | W                |
//! | 6      | E                |
//! | 7      | v (noise profile)|
//! | 8–10   | X*, W*, E* (test split) |

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::model::{NoiseSpec, SpreadParam};
use crate::{Dataset, Error, GroundTruth, Result, SimulationConfig};

const STREAM_X: u64 = 0;
const STREAM_PSI: u64 = 1;
const STREAM_A: u64 = 2;
const STREAM_B: u64 = 3;
const STREAM_C: u64 = 4;
const STREAM_W: u64 = 5;
const STREAM_E: u64 = 6;
const STREAM_V: u64 = 7;
const STREAM_TEST_X: u64 = 8;
const STREAM_TEST_W: u64 = 9;
const STREAM_TEST_E: u64 = 10;

/// Default size of a held-out test split.
pub const DEFAULT_TEST_SIZE: usize = 5000;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn draw<D: Distribution<f64>>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, dist: &D) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Σ_jk = (−1)^{j+k} 0.5^{|j−k|}.
pub fn design_covariance(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |j, k| {
        let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
        sign * 0.5f64.powi(j.abs_diff(k) as i32)
    })
}

/// Per-response noise variances. Heteroscedastic profile:
/// τ_ℓ² = m v_ℓ^α / Σ_ℓ v_ℓ^α · (p+1), which sums to m(p+1).
pub fn noise_variances(noise: NoiseSpec, m: usize, p: usize, seed: u64) -> Vec<f64> {
    match noise {
        NoiseSpec::Homoscedastic { variance } => vec![variance; m],
        NoiseSpec::Heteroscedastic { alpha } => {
            let mut rng = stream(seed, STREAM_V);
            let v: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let powered: Vec<f64> = v.iter().map(|x| x.powf(alpha)).collect();
            let total: f64 = powered.iter().sum();
            powered
                .iter()
                .map(|w| m as f64 * w / total * (p + 1) as f64)
                .collect()
        }
    }
}

fn spread(second: f64, mode: SpreadParam) -> f64 {
    match mode {
        SpreadParam::Variance => second.sqrt(),
        SpreadParam::StdDev => second,
    }
}

fn draw_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    let chol = design_covariance(p)
        .cholesky()
        .expect("design covariance is positive definite");
    draw(rng, n, p, &StandardNormal) * chol.l().transpose()
}

fn draw_noise(rng: &mut ChaCha8Rng, n: usize, variances: &[f64]) -> DMatrix<f64> {
    let sd: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let mut e = draw(rng, n, sd.len(), &StandardNormal);
    for (mut col, s) in e.column_iter_mut().zip(&sd) {
        col *= *s;
    }
    e
}

/// Y = XA + ZB + Σ_j diag(X_j) Z C_j + E with Z = Xψ + W.
pub fn compose_response(truth: &GroundTruth, x: &DMatrix<f64>, w: &DMatrix<f64>, e: &DMatrix<f64>) -> DMatrix<f64> {
    let z = x * &truth.psi + w;
    let mut y = x * &truth.a + &z * &truth.b + e;
    for (j, c) in truth.c.iter().enumerate() {
        let mut scaled = z.clone();
        for (mut row, xj) in scaled.row_iter_mut().zip(x.column(j).iter()) {
            row *= *xj;
        }
        y += scaled * c;
    }
    y
}

fn sample(truth: &GroundTruth, n: usize, seed: u64, streams: [u64; 3]) -> Result<Dataset> {
    let p = truth.p();
    let x = draw_design(&mut stream(seed, streams[0]), n, p);
    let w_dist = Normal::new(0.0, truth.sigma_w).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let w = draw(&mut stream(seed, streams[1]), n, truth.k(), &w_dist);
    let e = draw_noise(&mut stream(seed, streams[2]), n, &truth.noise_variances);
    let y = compose_response(truth, &x, &w, &e);
    Dataset::new(x, y)
}

/// Draws generating parameters and a training sample.
pub fn generate(config: &SimulationConfig) -> Result<(Dataset, GroundTruth)> {
    config.validate()?;
    let (p, m, k, seed) = (config.p, config.m, config.k, config.seed);
    let effect = Normal::new(0.5, spread(0.1, config.second_param))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let hidden = Normal::new(0.1, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let psi = draw(&mut stream(seed, STREAM_PSI), p, k, &effect) * config.eta_dep;
    let a = draw(&mut stream(seed, STREAM_A), p, m, &effect);
    let b = draw(&mut stream(seed, STREAM_B), k, m, &hidden);
    let mut c_rng = stream(seed, STREAM_C);
    let c = (0..p).map(|_| draw(&mut c_rng, k, m, &hidden)).collect();
    let truth = GroundTruth {
        a,
        b,
        c,
        psi,
        sigma_w: config.sigma_w,
        noise: config.noise,
        noise_variances: noise_variances(config.noise, m, p, seed),
    };
    truth.validate()?;
    let data = sample(&truth, config.n, seed, [STREAM_X, STREAM_W, STREAM_E])?;
    Ok((data, truth))
}

/// Fresh covariates, hidden variables and noise under fixed parameters.
pub fn generate_test_split(config: &SimulationConfig, truth: &GroundTruth, n_star: usize) -> Result<Dataset> {
    truth.validate()?;
    if truth.p() != config.p || truth.m() != config.m || truth.k() != config.k {
        return Err(Error::DimensionMismatch(format!(
            "truth has (p, m, K) = ({}, {}, {}), config ({}, {}, {})",
            truth.p(),
            truth.m(),
            truth.k(),
            config.p,
            config.m,
            config.k
        )));
    }
    if n_star == 0 {
        return Err(Error::InvalidConfig("test split must have at least one row".into()));
    }
    sample(truth, n_star, config.seed, [STREAM_TEST_X, STREAM_TEST_W, STREAM_TEST_E])
}
