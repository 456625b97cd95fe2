//! Recover a low-rank eigenspace hidden under a heteroscedastic diagonal.

use hetconf::linalg::sin_theta;
use hetconf::spectral::{hetero_pca, top_k_eigenvectors};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> hetconf::Result<()> {
    let (m, k) = (40, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = DMatrix::<f64>::from_fn(m, k, |_, _| rng.sample(StandardNormal)).qr().q();
    let signal = &u * DMatrix::from_diagonal(&DVector::from_vec(vec![12.0, 8.0])) * u.transpose();
    let noise = DMatrix::from_diagonal(&DVector::from_fn(m, |_, _| rng.random_range(0.0..10.0)));
    let s = signal + noise;

    let (pca, summary) = top_k_eigenvectors(&s, k)?;
    println!("leading eigenvalues: {:.3?}", &summary.eigenvalues[..4]);
    println!("plain PCA  sin-theta {:.3e}", sin_theta(&u, &pca));
    for iters in [1, 5, 20, 50] {
        let h = hetero_pca(&s, k, iters)?;
        println!("HeteroPCA T={iters:<3} sin-theta {:.3e}", sin_theta(&u, &h));
    }
    Ok(())
}
