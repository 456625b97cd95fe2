use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{pmse_log, sse_log, LogMetric};
use crate::estimators::{fit_methods, KChoice, DEFAULT_ITERS};
use crate::io::format_float;
use crate::model::NoiseSpec;
use crate::simulate::{generate, generate_test_split, DEFAULT_TEST_SIZE};
use crate::{Error, Method, Result, SimulationConfig};

/// Simulation parameter varied across a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    EtaDep,
    /// Heteroscedasticity exponent; switches the noise to heteroscedastic.
    Alpha,
    SigmaW,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::EtaDep => "eta_dep",
            SweepParam::Alpha => "alpha",
            SweepParam::SigmaW => "sigma_w",
        }
    }

    pub fn apply(self, base: &SimulationConfig, value: f64) -> SimulationConfig {
        let mut cfg = base.clone();
        match self {
            SweepParam::EtaDep => cfg.eta_dep = value,
            SweepParam::Alpha => cfg.noise = NoiseSpec::Heteroscedastic { alpha: value },
            SweepParam::SigmaW => cfg.sigma_w = value,
        }
        cfg
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta" | "eta_dep" => Ok(SweepParam::EtaDep),
            "alpha" => Ok(SweepParam::Alpha),
            "sigma_w" | "sigma-w" => Ok(SweepParam::SigmaW),
            other => Err(Error::InvalidConfig(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub base: SimulationConfig,
    pub sweep: Sweep,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub k_policy: KChoice,
    pub hetero_iters: usize,
    /// Rows in each held-out test split; zero skips prediction error.
    pub test_size: usize,
    /// Worker threads; zero uses the global pool.
    pub workers: usize,
}

impl ExperimentGrid {
    pub fn new(base: SimulationConfig, sweep: Sweep, replicates: usize, methods: Vec<Method>) -> Self {
        let k = base.k;
        Self {
            base,
            sweep,
            replicates,
            methods,
            k_policy: KChoice::Known(k),
            hetero_iters: DEFAULT_ITERS,
            test_size: DEFAULT_TEST_SIZE,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::InvalidConfig("sweep list is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods requested".into()));
        }
        for &v in &self.sweep.values {
            self.sweep.param.apply(&self.base, v).validate()?;
        }
        Ok(())
    }
}

/// One (sweep value, method, replicate) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sweep_param: SweepParam,
    pub value: f64,
    pub method: Method,
    pub replicate: usize,
    pub seed: u64,
    pub sse_log: Option<LogMetric>,
    pub pmse_log: Option<LogMetric>,
    pub k_hat: Option<usize>,
    pub error: Option<String>,
}

/// Mean and standard error over the successful replicates of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub value: f64,
    pub method: Method,
    pub succeeded: usize,
    pub failures: usize,
    pub sse_log_mean: f64,
    pub sse_log_se: Option<f64>,
    /// Mean of (1/m)‖Θ̂ − A‖_F² on the linear scale.
    pub sse_mean: f64,
    pub pmse_log_mean: Option<f64>,
    pub pmse_log_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub grid: ExperimentGrid,
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
}

fn mix(mut z: u64) -> u64 {
    // SplitMix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `r` at sweep value `value`: SplitMix64 chained over
/// (base seed, IEEE-754 bits of the value, replicate index).
pub fn replicate_seed(base: u64, value: f64, replicate: usize) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let h = mix(base.wrapping_add(GOLDEN));
    let h = mix(h ^ value.to_bits().wrapping_add(GOLDEN));
    mix(h ^ (replicate as u64).wrapping_add(GOLDEN))
}

pub(crate) fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn run_cell(grid: &ExperimentGrid, value: f64, replicate: usize) -> Vec<Record> {
    let seed = replicate_seed(grid.base.seed, value, replicate);
    let mut cfg = grid.sweep.param.apply(&grid.base, value);
    cfg.seed = seed;
    let blank = |method: Method| Record {
        sweep_param: grid.sweep.param,
        value,
        method,
        replicate,
        seed,
        sse_log: None,
        pmse_log: None,
        k_hat: None,
        error: None,
    };
    let generated = generate(&cfg).and_then(|(data, truth)| {
        let test = if grid.test_size > 0 {
            Some(generate_test_split(&cfg, &truth, grid.test_size)?)
        } else {
            None
        };
        Ok((data, truth, test))
    });
    let (data, truth, test) = match generated {
        Ok(t) => t,
        Err(e) => {
            return grid
                .methods
                .iter()
                .map(|&m| Record {
                    error: Some(format!("simulation: {e}")),
                    ..blank(m)
                })
                .collect()
        }
    };
    let fits = fit_methods(&data, &grid.methods, grid.k_policy, grid.hetero_iters, Some(&truth));
    grid.methods
        .iter()
        .zip(fits)
        .map(|(&method, fit)| {
            let scored = fit.and_then(|est| {
                let s = sse_log(&est.theta, &truth.a)?;
                let pm = test.as_ref().map(|t| pmse_log(&est.theta, t)).transpose()?;
                Ok((s, pm, est.k_used))
            });
            match scored {
                Ok((s, pm, k_used)) => Record {
                    sse_log: Some(s),
                    pmse_log: pm,
                    k_hat: matches!(grid.k_policy, KChoice::Selected(_))
                        .then_some(k_used)
                        .filter(|_| method != Method::Ols),
                    ..blank(method)
                },
                Err(e) => Record {
                    error: Some(e.to_string()),
                    ..blank(method)
                },
            }
        })
        .collect()
}

fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 || !mean.is_finite() {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn aggregate(grid: &ExperimentGrid, records: &[Record]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &value in &grid.sweep.values {
        for &method in &grid.methods {
            let cell: Vec<&Record> = records
                .iter()
                .filter(|r| r.value.to_bits() == value.to_bits() && r.method == method)
                .collect();
            let ok: Vec<&Record> = cell.iter().copied().filter(|r| r.error.is_none()).collect();
            let sse_logs: Vec<f64> = ok.iter().filter_map(|r| r.sse_log.map(LogMetric::value)).collect();
            let pmse_logs: Vec<f64> = ok.iter().filter_map(|r| r.pmse_log.map(LogMetric::value)).collect();
            let (sse_log_mean, sse_log_se) = if sse_logs.is_empty() {
                (f64::NAN, None)
            } else {
                mean_se(&sse_logs)
            };
            let sse_mean = if sse_logs.is_empty() {
                f64::NAN
            } else {
                sse_logs.iter().map(|v| v.exp()).sum::<f64>() / sse_logs.len() as f64
            };
            let (pmse_log_mean, pmse_log_se) = if pmse_logs.is_empty() {
                (None, None)
            } else {
                let (m, se) = mean_se(&pmse_logs);
                (Some(m), se)
            };
            out.push(Aggregate {
                value,
                method,
                succeeded: ok.len(),
                failures: cell.len() - ok.len(),
                sse_log_mean,
                sse_log_se,
                sse_mean,
                pmse_log_mean,
                pmse_log_se,
            });
        }
    }
    out
}

/// Runs every (sweep value, replicate) cell and aggregates per method.
/// Failed fits are recorded in their cell rather than aborting the grid.
pub fn run_grid(grid: &ExperimentGrid) -> Result<ExperimentReport> {
    grid.validate()?;
    let jobs: Vec<(f64, usize)> = grid
        .sweep
        .values
        .iter()
        .flat_map(|&v| (0..grid.replicates).map(move |r| (v, r)))
        .collect();
    let cells: Vec<Vec<Record>> = with_workers(grid.workers, || {
        jobs.par_iter().map(|&(v, r)| run_cell(grid, v, r)).collect()
    })?;
    let records: Vec<Record> = cells.into_iter().flatten().collect();
    let aggregates = aggregate(grid, &records);
    Ok(ExperimentReport {
        grid: grid.clone(),
        records,
        aggregates,
    })
}

fn opt_metric(v: Option<LogMetric>) -> String {
    v.map(|m| m.to_string()).unwrap_or_default()
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

impl ExperimentReport {
    pub fn aggregate_for(&self, value: f64, method: Method) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.value.to_bits() == value.to_bits() && a.method == method)
    }

    /// Tidy per-replicate table.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("sweep_param,value,method,replicate,sse_log,pmse_log\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.sweep_param.as_str(),
                format_float(r.value),
                r.method,
                r.replicate,
                opt_metric(r.sse_log),
                opt_metric(r.pmse_log)
            ));
        }
        out
    }

    pub fn aggregates_csv(&self) -> String {
        let mut out = String::from(
            "sweep_param,value,method,succeeded,failures,sse_log_mean,sse_log_se,sse_mean,pmse_log_mean,pmse_log_se\n",
        );
        for a in &self.aggregates {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                self.grid.sweep.param.as_str(),
                format_float(a.value),
                a.method,
                a.succeeded,
                a.failures,
                format_float(a.sse_log_mean),
                opt_float(a.sse_log_se),
                format_float(a.sse_mean),
                opt_float(a.pmse_log_mean),
                opt_float(a.pmse_log_se)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid(methods: Vec<Method>, replicates: usize) -> ExperimentGrid {
        let base = SimulationConfig {
            n: 120,
            m: 12,
            ..SimulationConfig::default()
        };
        let mut grid = ExperimentGrid::new(
            base,
            Sweep {
                param: SweepParam::EtaDep,
                values: vec![0.1, 0.9],
            },
            replicates,
            methods,
        );
        grid.test_size = 200;
        grid
    }

    #[test]
    fn record_count_is_sweep_times_methods_times_replicates() {
        let report = run_grid(&small_grid(vec![Method::Ols], 1)).unwrap();
        assert_eq!(report.records.len(), 2);
        let report = run_grid(&small_grid(vec![Method::Ols, Method::Oracle, Method::InteractionHomo], 3)).unwrap();
        assert_eq!(report.records.len(), 2 * 3 * 3);
    }

    #[test]
    fn reruns_are_identical() {
        let grid = small_grid(vec![Method::InteractionHomo, Method::NonInteractionHetero], 2);
        assert_eq!(run_grid(&grid).unwrap(), run_grid(&grid).unwrap());
    }

    #[test]
    fn method_order_does_not_change_results() {
        let a = run_grid(&small_grid(vec![Method::InteractionHomo, Method::Ols, Method::Oracle], 2)).unwrap();
        let b = run_grid(&small_grid(vec![Method::Oracle, Method::InteractionHomo, Method::Ols], 2)).unwrap();
        for r in &a.records {
            let twin = b
                .records
                .iter()
                .find(|s| s.value == r.value && s.method == r.method && s.replicate == r.replicate)
                .unwrap();
            assert_eq!(r, twin);
        }
    }

    #[test]
    fn aggregates_are_replicate_means() {
        let report = run_grid(&small_grid(vec![Method::Ols, Method::InteractionHomo], 4)).unwrap();
        for agg in &report.aggregates {
            let vals: Vec<f64> = report
                .records
                .iter()
                .filter(|r| r.value == agg.value && r.method == agg.method)
                .map(|r| r.sse_log.unwrap().value())
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((mean - agg.sse_log_mean).abs() < 1e-12);
        }
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut grid = small_grid(vec![Method::Ols, Method::InteractionHomo], 1);
        grid.k_policy = KChoice::Known(5); // (p+1)K = 15 > m = 12
        let report = run_grid(&grid).unwrap();
        assert!(report.records.iter().filter(|r| r.method == Method::Ols).all(|r| r.error.is_none()));
        assert!(report
            .records
            .iter()
            .filter(|r| r.method == Method::InteractionHomo)
            .all(|r| r.error.is_some()));
        assert!(report.aggregates.iter().any(|a| a.failures == 2 - 1));
    }

    #[test]
    fn seeds_are_stable() {
        assert_eq!(replicate_seed(1, 0.5, 3), replicate_seed(1, 0.5, 3));
        assert_ne!(replicate_seed(1, 0.5, 3), replicate_seed(1, 0.5, 4));
        assert_ne!(replicate_seed(1, 0.5, 3), replicate_seed(1, 0.7, 3));
        assert_ne!(replicate_seed(1, 0.5, 3), replicate_seed(2, 0.5, 3));
    }

    #[test]
    fn tidy_csv_has_one_line_per_record() {
        let report = run_grid(&small_grid(vec![Method::Ols], 2)).unwrap();
        let csv = report.records_csv();
        assert_eq!(csv.lines().count(), 1 + report.records.len());
        assert!(csv.starts_with("sweep_param,value,method,replicate,sse_log,pmse_log"));
    }
}
