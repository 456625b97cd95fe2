//! Choose the hidden dimension from eigenvalue ratios of the covariance surfaces.

use hetconf::estimators::{
    interaction_covariance, interaction_spectra, non_interaction_covariance, select_k_interaction,
    select_k_non_interaction,
};
use hetconf::model::NoiseSpec;
use hetconf::simulate::generate;
use hetconf::SimulationConfig;

fn main() -> hetconf::Result<()> {
    let config = SimulationConfig {
        n: 1000,
        m: 200,
        sigma_w: 1.5,
        noise: NoiseSpec::Heteroscedastic { alpha: 0.0 },
        seed: 1,
        ..SimulationConfig::default()
    };
    let (data, _) = generate(&config)?;

    let cov = interaction_covariance(&data)?;
    for spectrum in interaction_spectra(&cov)? {
        println!("{:?}: {:.2?}", spectrum.source, &spectrum.eigenvalues[..6]);
    }
    println!("true K = {}", config.k);
    println!("interaction selector:     K-hat = {}", select_k_interaction(&data, &cov, None)?);
    let phi = non_interaction_covariance(&data)?;
    println!("non-interaction selector: K-hat = {}", select_k_non_interaction(&data, &phi, None)?);
    Ok(())
}
