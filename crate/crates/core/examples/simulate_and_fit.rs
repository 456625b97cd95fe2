//! Simulate one dataset and compare every estimator against the true effects.

use hetconf::bench::sse_log;
use hetconf::estimators::{fit_methods, KChoice, DEFAULT_ITERS};
use hetconf::simulate::generate;
use hetconf::{Method, SimulationConfig};

fn main() -> hetconf::Result<()> {
    let config = SimulationConfig {
        n: 1000,
        eta_dep: 0.9,
        seed: 42,
        ..SimulationConfig::default()
    };
    let (data, truth) = generate(&config)?;
    println!("n = {}, p = {}, m = {}, K = {}", data.n(), data.p(), data.m(), config.k);

    let fits = fit_methods(&data, &Method::ALL, KChoice::Known(config.k), DEFAULT_ITERS, Some(&truth));
    for (method, fit) in Method::ALL.iter().zip(fits) {
        let fit = fit?;
        println!("{:<22} log-SSE {:>8.3}", method.as_str(), sse_log(&fit.theta, &truth.a)?.value());
    }
    Ok(())
}
