//! Write a dataset to CSV, read it back and fit from disk.

use hetconf::estimators::{fit_homoscedastic, fit_ols_baseline};
use hetconf::io::{read_dataset, write_csv_matrix, write_dataset};
use hetconf::simulate::generate;
use hetconf::SimulationConfig;

fn main() -> hetconf::Result<()> {
    let dir = std::env::temp_dir().join("hetconf-example");
    let (data, _) = generate(&SimulationConfig { n: 300, seed: 5, ..SimulationConfig::default() })?;
    write_dataset(&dir, &data)?;

    let loaded = read_dataset(&dir.join("X.csv"), &dir.join("Y.csv"), false)?;
    assert_eq!(loaded, data);
    let fit = fit_homoscedastic(&loaded, 3)?;
    let ols = fit_ols_baseline(&loaded)?;
    write_csv_matrix(&dir.join("theta.csv"), &fit.theta)?;
    println!("estimate written to {}", dir.join("theta.csv").display());
    println!("first row, debiased: {:.3?}", fit.theta.row(0).iter().take(5).collect::<Vec<_>>());
    println!("first row, OLS:      {:.3?}", ols.theta.row(0).iter().take(5).collect::<Vec<_>>());
    Ok(())
}
