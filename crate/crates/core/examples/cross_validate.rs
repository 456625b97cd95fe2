//! Cross-validated prediction error, the workflow for data without ground truth.

use hetconf::bench::{cross_validate, CvConfig};
use hetconf::simulate::generate;
use hetconf::SimulationConfig;

fn main() -> hetconf::Result<()> {
    let config = SimulationConfig { n: 400, m: 60, seed: 11, ..SimulationConfig::default() };
    let (data, _) = generate(&config)?;

    let cv = cross_validate(&data, &CvConfig { folds: 5, ..CvConfig::default() })?;
    for r in &cv.results {
        println!("{:<22} mean PMSE {:.4}  K-hat per fold {:?}", r.method.as_str(), r.mean_pmse, r.fold_k);
    }
    Ok(())
}
