//! A small replicated sweep over the confounding strength.

use hetconf::bench::{run_grid, ExperimentGrid, Sweep, SweepParam};
use hetconf::{Method, SimulationConfig};

fn main() -> hetconf::Result<()> {
    let base = SimulationConfig { n: 500, seed: 3, ..SimulationConfig::default() };
    let sweep = Sweep { param: SweepParam::EtaDep, values: vec![0.1, 0.7, 1.3] };
    let methods = vec![Method::Oracle, Method::InteractionHomo, Method::NonInteractionHomo, Method::Ols];
    let mut grid = ExperimentGrid::new(base, sweep, 10, methods);
    grid.test_size = 1000;

    let report = run_grid(&grid)?;
    print!("{}", report.aggregates_csv());
    Ok(())
}
