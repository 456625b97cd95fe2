//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error, 3 numerical failure. Diagnostics go to standard error.

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    cross_validate, run_grid, run_k_selection, CvConfig, ExperimentGrid, KSelectionGrid, Sweep,
    SweepParam,
};
use crate::estimators::{fit_method, KChoice, DEFAULT_ITERS};
use crate::io::{read_dataset, read_json, write_csv_matrix, write_dataset, write_json, write_text};
use crate::model::{NoiseSpec, SpreadParam};
use crate::simulate::{generate, DEFAULT_TEST_SIZE};
use crate::{Error, GroundTruth, Method, Result, SimulationConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hetconf", version, propagate_version = true)]
#[command(about = "Direct-effect estimation under hidden, interacting confounders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write X.csv, Y.csv and truth.json.
    Simulate(SimulateArgs),
    /// Estimate the effect matrix and write it as a p×m CSV.
    Fit(FitArgs),
    /// Rank-selection experiment over hidden-noise scales.
    SelectK(SelectKArgs),
    /// Replicated simulation benchmark over a parameter sweep.
    Benchmark(BenchmarkArgs),
    /// K-fold cross-validated prediction error on a dataset.
    Cv(CvArgs),
}

/// `auto` or a positive integer.
#[derive(Debug, Clone, Copy, PartialEq)]
enum KArg {
    Auto,
    Fixed(usize),
}

impl FromStr for KArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(KArg::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(KArg::Fixed(k)),
            _ => Err(format!("expected 'auto' or a positive integer, got '{s}'")),
        }
    }
}

impl KArg {
    fn choice(self, k_star: Option<usize>) -> KChoice {
        match self {
            KArg::Auto => KChoice::Selected(k_star),
            KArg::Fixed(k) => KChoice::Known(k),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseArg {
    Homo,
    Hetero,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SecondParamArg {
    Variance,
    Stddev,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 25)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// Heteroscedastic noise with this exponent; homoscedastic when absent.
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise variance in the homoscedastic case.
    #[arg(long, default_value_t = 1.0)]
    noise_variance: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_w: f64,
    #[arg(long, value_enum, default_value = "variance")]
    second_param: SecondParamArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    /// Skip one header line in each CSV.
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "interaction_homo")]
    method: Method,
    #[arg(long, default_value = "auto")]
    k: KArg,
    /// Upper bound for `--k auto`.
    #[arg(long)]
    k_star: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ITERS)]
    t: usize,
    /// Generating parameters (truth.json), required by the oracle.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SelectKArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5])]
    sigma_w: Vec<f64>,
    #[arg(long)]
    k_star: Option<usize>,
    /// 1: m = 25, n = 1000; 2: m = 500, n = 1000.
    #[arg(long, default_value_t = 1)]
    setting: u8,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// 1: m = 25, n = 1000; 2: m = 500, n = 100.
    #[arg(long, default_value_t = 1)]
    setting: u8,
    #[arg(long, value_enum, default_value = "homo")]
    noise: NoiseArg,
    /// `<param>=v1,v2,...` with param one of eta, alpha, sigma_w.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, default_value = "3")]
    k: KArg,
    #[arg(long)]
    k_star: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ITERS)]
    t: usize,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = DEFAULT_TEST_SIZE)]
    test_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, default_value = "auto")]
    k: KArg,
    #[arg(long)]
    k_star: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ITERS)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = SimulationConfig {
        n: args.n,
        m: args.m,
        p: args.p,
        k: args.k,
        eta_dep: args.eta,
        sigma_w: args.sigma_w,
        noise: match args.alpha {
            Some(alpha) => NoiseSpec::Heteroscedastic { alpha },
            None => NoiseSpec::Homoscedastic {
                variance: args.noise_variance,
            },
        },
        second_param: match args.second_param {
            SecondParamArg::Variance => SpreadParam::Variance,
            SecondParamArg::Stddev => SpreadParam::StdDev,
        },
        seed: args.seed,
    };
    let (data, truth) = generate(&cfg)?;
    write_dataset(&args.out, &data)?;
    write_json(&args.out.join("truth.json"), &truth)?;
    write_json(&args.out.join("config.json"), &cfg)?;
    eprintln!("wrote {} samples to {}", data.n(), args.out.display());
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let data = read_dataset(&args.data.x, &args.data.y, args.data.header)?;
    let truth: Option<GroundTruth> = args.truth.as_deref().map(read_json).transpose()?;
    if args.method == Method::Oracle && truth.is_none() {
        return Err(usage("--method oracle requires --truth"));
    }
    if args.method.uses_hetero_pca() && args.t == 0 {
        return Err(usage("--t must be positive"));
    }
    let est = fit_method(&data, args.method, args.k.choice(args.k_star), args.t, truth.as_ref())?;
    write_csv_matrix(&args.out, &est.theta)?;
    eprintln!("method {} with K = {}", est.method, est.k_used);
    for w in &est.warnings {
        eprintln!("warning: {w:?}");
    }
    Ok(())
}

fn setting_sizes(setting: u8, k_selection: bool) -> Result<(usize, usize)> {
    match (setting, k_selection) {
        (1, _) => Ok((1000, 25)),
        (2, false) => Ok((100, 500)),
        (2, true) => Ok((1000, 500)),
        (s, _) => Err(usage(format!("unknown setting {s}; expected 1 or 2"))),
    }
}

fn select_k_cmd(args: SelectKArgs) -> Result<()> {
    let (n, m) = setting_sizes(args.setting, true)?;
    let mut grid = KSelectionGrid::new(n, m, args.sigma_w, args.replicates);
    grid.base.seed = args.seed;
    grid.k_star = args.k_star;
    grid.workers = args.workers;
    let report = run_k_selection(&grid)?;
    write_text(&args.out.join("k_selection.csv"), &report.to_csv())?;
    write_json(&args.out.join("report.json"), &report)?;
    for row in &report.rows {
        eprintln!(
            "sigma_w {}: interaction mode {:?}, non-interaction mode {:?}",
            row.sigma_w, row.interaction_mode, row.non_interaction_mode
        );
    }
    Ok(())
}

fn parse_sweep(text: &str) -> Result<Sweep> {
    let (name, values) = text
        .split_once('=')
        .ok_or_else(|| usage(format!("sweep '{text}' is not of the form name=v1,v2")))?;
    let param = SweepParam::from_str(name.trim())?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| usage(format!("sweep value '{v}': {e}"))))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Sweep { param, values })
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let (n, m) = setting_sizes(args.setting, false)?;
    let mut base = SimulationConfig {
        n,
        m,
        seed: args.seed,
        ..SimulationConfig::default()
    };
    let sweep = match (&args.sweep, args.noise) {
        (Some(text), _) => parse_sweep(text)?,
        (None, NoiseArg::Homo) => Sweep {
            param: SweepParam::EtaDep,
            values: vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3],
        },
        (None, NoiseArg::Hetero) => Sweep {
            param: SweepParam::Alpha,
            values: vec![0.0, 3.0, 6.0, 9.0, 12.0, 15.0],
        },
    };
    if let NoiseArg::Hetero = args.noise {
        base.noise = NoiseSpec::Heteroscedastic { alpha: 0.0 };
    }
    let methods = args.methods.unwrap_or_else(|| Method::ALL.to_vec());
    let mut grid = ExperimentGrid::new(base, sweep, args.replicates, methods);
    grid.k_policy = args.k.choice(args.k_star);
    grid.hetero_iters = args.t;
    grid.test_size = args.test_size;
    grid.workers = args.workers;
    let report = run_grid(&grid)?;
    write_text(&args.out.join("records.csv"), &report.records_csv())?;
    write_text(&args.out.join("aggregates.csv"), &report.aggregates_csv())?;
    write_json(&args.out.join("report.json"), &report)?;
    let failures: usize = report.aggregates.iter().map(|a| a.failures).sum();
    eprintln!(
        "{} records written to {} ({failures} failed fits)",
        report.records.len(),
        args.out.display()
    );
    Ok(())
}

fn cv(args: CvArgs) -> Result<()> {
    let data = read_dataset(&args.data.x, &args.data.y, args.data.header)?;
    let mut config = CvConfig {
        folds: args.folds,
        k: args.k.choice(args.k_star),
        hetero_iters: args.t,
        seed: args.seed,
        ..CvConfig::default()
    };
    if let Some(methods) = args.methods {
        config.methods = methods;
    }
    let report = cross_validate(&data, &config)?;
    write_json(&args.out, &report)?;
    for r in &report.results {
        eprintln!("{}: mean PMSE {}", r.method, r.mean_pmse);
    }
    Ok(())
}

fn exit_code(err: &Error) -> i32 {
    if err.is_data() {
        EXIT_DATA
    } else if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::SelectK(a) => select_k_cmd(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Cv(a) => cv(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
