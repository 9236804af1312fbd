use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use depnet::forecasting::{
    ingest_csv, rolling_forecast, Backend, MacroSchema, RollingSpec, YearMonth,
};
use depnet::generators::{Dataset, GeneratorSpec, DEFAULT_BURN_IN};
use depnet::harness::{
    estimate_rate, run_convergence, summarize_box, ExperimentConfig, Method, RiskTable,
};
use depnet::training::{empirical_risk, split_indices, train, TrainConfig};
use depnet::{Architecture, Network};

#[derive(Parser)]
#[command(
    name = "depnet",
    version,
    about = "Sparse ReLU regression on dependent data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write it as CSV
    Generate(GenerateArgs),
    /// Fit one network on a dataset CSV
    Train(TrainArgs),
    /// Run a replicated experiment from a TOML config
    Experiment(ExperimentArgs),
    /// Fit the log-log risk slope of a risk table
    Rate(RateArgs),
    /// Rolling one-step-ahead inflation forecasts
    Forecast(ForecastArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// var1_shift, iid_gaussian, linear_ar, nonlinear_ar_sqrt, nonlinear_ar_abs or ar_infinity
    #[arg(long)]
    model: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rho: Option<f64>,
    /// Comma-separated AR coefficients
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    d_trunc: Option<usize>,
    /// Lag order for series models (defaults to the true order)
    #[arg(long)]
    lags: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset CSV with columns t, x_1..x_d, y[, oracle]
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 20)]
    hidden_width: usize,
    #[arg(long, default_value_t = 3)]
    hidden_layers: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5000)]
    max_epochs: usize,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training history CSV; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write the fitted network as JSON
    #[arg(long)]
    network: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment config
    #[arg(long)]
    config: PathBuf,
    /// Risk table CSV
    #[arg(short, long)]
    output: PathBuf,
    /// Box-summary CSV
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct RateArgs {
    /// Risk table CSV from `experiment`
    #[arg(long)]
    table: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Nn)]
    method: MethodArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nn,
    Ols,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Ols,
    Nn,
}

#[derive(Args)]
struct ForecastArgs {
    /// Monthly panel CSV with a date column, CPI and predictors
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "date")]
    date_column: String,
    #[arg(long, default_value = "cpi")]
    cpi_column: String,
    /// First forecast month, e.g. 2002-02
    #[arg(long)]
    start: Option<YearMonth>,
    #[arg(long)]
    max_forecasts: Option<usize>,
    #[arg(long, default_value_t = 453)]
    window: usize,
    #[arg(long, default_value_t = 300)]
    train: usize,
    #[arg(long, default_value_t = 153)]
    val: usize,
    /// Percentage of predictor columns kept by screening
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = BackendArg::Ols)]
    backend: BackendArg,
    #[arg(long, default_value_t = 1)]
    hidden_layers: usize,
    #[arg(long, default_value_t = 100)]
    hidden_width: usize,
    #[arg(long, default_value_t = 10)]
    n_init: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, default_value_t = 4)]
    pi_lags: usize,
    #[arg(long, default_value_t = 4)]
    pred_lags: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Forecast CSV; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

type BoxResult<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn generate(args: GenerateArgs) -> BoxResult<()> {
    let cfg = ExperimentConfig {
        model: args.model,
        rho: args.rho,
        coeffs: args.coeffs,
        alpha: args.alpha,
        mass: args.mass,
        d_trunc: args.d_trunc,
        ..Default::default()
    };
    let spec = GeneratorSpec {
        kind: cfg.model_kind()?,
        n: args.n,
        burn_in: args.burn_in,
        seed: args.seed,
    };
    spec.generate(args.lags)?
        .write_csv(sink(args.output.as_deref())?)?;
    Ok(())
}

fn train_one(args: TrainArgs) -> BoxResult<()> {
    let data = Dataset::read_csv(File::open(&args.data)?)?;
    let splits = split_indices(data.len())?;
    let cfg = TrainConfig {
        lambda: args.lambda,
        learning_rate: args.learning_rate,
        max_epochs: args.max_epochs,
        patience: args.patience,
        dropout_rate: args.dropout,
        seed: args.seed,
    };
    let arch = Architecture::mlp(data.dim(), args.hidden_width, args.hidden_layers)?;
    let net = Network::init(arch, &mut ChaCha8Rng::seed_from_u64(args.seed));
    let report = train(&net, &data, &splits, &cfg)?;
    report.write_csv(sink(args.output.as_deref())?)?;
    if let Some(path) = &args.network {
        std::fs::write(path, report.network.to_json()?)?;
    }
    let mut summary = format!(
        "epochs={} best_epoch={}",
        report.epochs_run, report.best_epoch
    );
    if let Some(oracle) = &data.oracle {
        let test = data.rows(splits.test.clone());
        let pred = report.network.predict(&test.x)?;
        let truth = &oracle.as_slice()[splits.test.clone()];
        summary += &format!(" test_risk={:.6e}", empirical_risk(pred.as_slice(), truth)?);
    }
    eprintln!("{summary}");
    Ok(())
}

fn experiment(args: ExperimentArgs) -> BoxResult<()> {
    let spec = ExperimentConfig::load(&args.config)?.into_spec()?;
    let table = run_convergence(&spec)?;
    table.write_csv(BufWriter::new(File::create(&args.output)?))?;
    if let Some(path) = &args.summary {
        let summary = summarize_box(&table);
        summary.write_csv(BufWriter::new(File::create(path)?))?;
        if summary.skipped > 0 {
            log::warn!("{} empty groups skipped", summary.skipped);
        }
    }
    if table.failed_count() > 0 {
        log::warn!(
            "{} training runs failed and were flagged",
            table.failed_count()
        );
    }
    Ok(())
}

fn rate(args: RateArgs) -> BoxResult<()> {
    let table = RiskTable::read_csv(File::open(&args.table)?)?;
    let method = match args.method {
        MethodArg::Nn => Method::Nn,
        MethodArg::Ols => Method::Ols,
    };
    let est = estimate_rate(&table, method)?;
    println!("slope,intercept,r_squared");
    println!("{},{},{}", est.slope, est.intercept, est.r_squared);
    Ok(())
}

fn forecast(args: ForecastArgs) -> BoxResult<()> {
    let schema = MacroSchema {
        date_column: args.date_column,
        cpi_column: args.cpi_column,
        predictors: None,
    };
    let table = ingest_csv(&args.data, &schema)?;
    let backend = match args.backend {
        BackendArg::Ols => Backend::Ols,
        BackendArg::Nn => Backend::Nn {
            hidden_width: args.hidden_width,
            hidden_layers: args.hidden_layers,
            train: TrainConfig {
                dropout_rate: args.dropout,
                ..TrainConfig::default()
            },
            n_init: args.n_init,
        },
    };
    let spec = RollingSpec {
        window: args.window,
        train_len: args.train,
        val_len: args.val,
        gamma_percent: args.gamma,
        backend,
        start: args.start,
        max_forecasts: args.max_forecasts,
        pi_lags: args.pi_lags,
        pred_lags: args.pred_lags,
        seed: args.seed,
    };
    let report = rolling_forecast(&table, &spec)?;
    report.write_csv(sink(args.output.as_deref())?)?;
    eprintln!(
        "forecasts={} skipped={} mse={:.6}",
        report.steps.len(),
        report.skipped,
        report.mse
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train_one(a),
        Command::Experiment(a) => experiment(a),
        Command::Rate(a) => rate(a),
        Command::Forecast(a) => forecast(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
