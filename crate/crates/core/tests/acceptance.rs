//! Acceptance suite. Prints one PASS/FAIL line per criterion and a tally.
//! A failing criterion makes the process exit nonzero only when
//! `DEPNET_ACCEPTANCE_STRICT=1`, so the rest of the workspace tests still run
//! and the verdict lines stay visible in the log.
//!
//! Criterion 10 needs the real monthly panel: point `DEPNET_MACRO_CSV` at it
//! (column names via `DEPNET_MACRO_DATE` and `DEPNET_MACRO_CPI`, defaulting to
//! `date` and `cpi`). Without it the criterion is reported as skipped.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use depnet::forecasting::{
    ingest_csv, rolling_forecast, simulate_ar_inflation, Backend, MacroSchema, RollingSpec,
    YearMonth,
};
use depnet::generators::{gen_var1, stationary_cov_var1, GeneratorKind};
use depnet::harness::{
    estimate_rate, five_numbers, run_convergence, run_dependent_vs_independent, summarize_box,
    ExperimentSpec, LagRule, Method, RiskTable,
};
use depnet::seed::{derive_seed, label_hash};
use depnet::selection::{aic_select_lag, phi_n, theoretical_lag, RateSpec};
use depnet::stats::{autocovariance, median};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed.as_secs() < limit_secs
}

fn timed(f: impl FnOnce() -> Outcome, limit_secs: u64) -> Outcome {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let budget = format!("{:.1}s of {limit_secs}s", elapsed.as_secs_f64());
    match out {
        Outcome::Pass(d) if within(elapsed, limit_secs) => Outcome::Pass(format!("{d}; {budget}")),
        Outcome::Pass(d) => Outcome::Fail(format!("{d}; over time budget, {budget}")),
        Outcome::Fail(d) => Outcome::Fail(format!("{d}; {budget}")),
        skip => skip,
    }
}

fn gradient_check() -> Outcome {
    let stats = common::gradient_suite(50, SEED);
    verdict(
        stats.worst <= 1e-4 && stats.checked > 0,
        format!(
            "{} parameters on 50 networks, worst relative error {:.2e}",
            stats.checked, stats.worst
        ),
    )
}

fn var1_path() -> DMatrix<f64> {
    gen_var1(
        1_000_000,
        0.6,
        500,
        derive_seed(SEED, &[label_hash("var1-path")]),
    )
    .unwrap()
}

fn var1_covariance(x: &DMatrix<f64>) -> Outcome {
    let n = x.nrows() as f64;
    let means = x.row_mean();
    let mut cov = DMatrix::<f64>::zeros(4, 4);
    for row in x.row_iter() {
        let c = row - &means;
        cov += c.transpose() * c;
    }
    cov /= n - 1.0;
    let want = stationary_cov_var1(0.6);
    let worst = (&cov - &want).amax();
    verdict(
        worst < 0.02,
        format!(
            "diag {:.4} {:.4} {:.4} {:.4}, worst entry gap {worst:.4}",
            cov[(0, 0)],
            cov[(1, 1)],
            cov[(2, 2)],
            cov[(3, 3)]
        ),
    )
}

fn mixing_decay(x: &DMatrix<f64>) -> Outcome {
    let f: Vec<f64> = x.column(0).iter().map(|v| v.cos()).collect();
    let worst = (10..=30)
        .map(|h| autocovariance(&f, h).abs())
        .fold(0.0, f64::max);
    verdict(
        worst < 0.01,
        format!("max |cov| over lags 10..=30 is {worst:.5}"),
    )
}

fn medians(table: &RiskTable, grid: &[usize], method: Method) -> Vec<f64> {
    grid.iter()
        .map(|&n| median(&table.risks(n, method)))
        .collect()
}

fn nonlinear_models() -> Outcome {
    let grid = vec![100, 400, 1600];
    let mut ok = true;
    let mut parts = Vec::new();
    for (id, model) in [
        ("model3", GeneratorKind::NonlinearArSqrt),
        ("model4", GeneratorKind::NonlinearArAbs),
    ] {
        let mut spec = ExperimentSpec::new(id, model);
        spec.n_grid = grid.clone();
        spec.replicates = 20;
        spec.base_seed = SEED;
        let table = run_convergence(&spec).unwrap();
        let nn = medians(&table, &grid, Method::Nn);
        let ols = median(&table.risks(1600, Method::Ols));
        let decreasing = nn.windows(2).all(|w| w[1] < w[0]);
        ok &= decreasing && nn[2] < ols && table.failed_count() == 0;
        parts.push(format!(
            "{id} nn medians {:.4}/{:.4}/{:.4}, ols at 1600 {ols:.4}, failed {}",
            nn[0],
            nn[1],
            nn[2],
            table.failed_count()
        ));
    }
    verdict(ok, parts.join("; "))
}

fn ols_rate() -> Outcome {
    let mut spec = ExperimentSpec::new("model1", GeneratorKind::LinearAr { coeffs: vec![0.6] });
    spec.n_grid = vec![100, 400, 1600, 6400];
    spec.replicates = 30;
    spec.base_seed = SEED;
    let table = run_convergence(&spec).unwrap();
    let est = estimate_rate(&table, Method::Ols).unwrap();
    verdict(
        (-1.3..=-0.7).contains(&est.slope),
        format!("slope {:.4}, r2 {:.4}", est.slope, est.r_squared),
    )
}

fn dependent_vs_independent() -> Outcome {
    let grid = [400, 1600];
    let mut ok = true;
    let mut parts = Vec::new();
    for rho in [0.2, 0.6] {
        let mut template = ExperimentSpec::new("vs", GeneratorKind::Var1Shift { rho });
        template.hidden_layers = 2;
        template.base_seed = SEED;
        let table = run_dependent_vs_independent(rho, &grid, 20, &template).unwrap();
        for &n in &grid {
            let iqr = |id: &str| {
                let logs: Vec<f64> = table
                    .ok_rows()
                    .filter(|r| r.model_id == id && r.n == n && r.method == Method::Nn)
                    .filter_map(|r| r.log_risk())
                    .collect();
                let [_, q1, _, q3, _] = five_numbers(&logs);
                (q1, q3)
            };
            let (d, i) = (iqr("dependent"), iqr("independent"));
            let overlap = d.0 <= i.1 && i.0 <= d.1;
            ok &= overlap;
            parts.push(format!(
                "rho {rho} n {n}: dep [{:.3}, {:.3}] indep [{:.3}, {:.3}]",
                d.0, d.1, i.0, i.1
            ));
        }
    }
    verdict(ok, parts.join("; "))
}

fn selection_rules() -> Outcome {
    let d_max = 4;
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (coeffs, truth)) in [(vec![0.6], 1usize), (vec![0.6, -0.4, 0.2], 3)]
        .into_iter()
        .enumerate()
    {
        let model = GeneratorKind::LinearAr { coeffs };
        let hits = (0..50u64)
            .filter(|&r| {
                let seed = derive_seed(SEED, &[label_hash("aic"), k as u64, r]);
                let (series, _) = model.simulate_series(1600, 500, seed).unwrap();
                aic_select_lag(&series, d_max).unwrap() == truth
            })
            .count();
        ok &= hits >= 40;
        parts.push(format!("model ({}) picks d={truth} in {hits}/50", k + 1));
    }
    let lags = (
        theoretical_lag(100, 1.0, 1.0),
        theoretical_lag(6400, 1.0, 1.0),
    );
    ok &= lags == (10, 80);
    parts.push(format!(
        "d_max {d_max}; theoretical lags {} and {}",
        lags.0, lags.1
    ));
    verdict(ok, parts.join("; "))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-15 * b.abs()
}

fn phi_suite() -> Outcome {
    let single = RateSpec::new(vec![2.0], vec![4]).unwrap();
    let two = RateSpec::new(vec![1.0, 2.0], vec![4, 1]).unwrap();
    let examples = close(phi_n(&single, 10_000), 0.01)
        && close(phi_n(&two, 729), 1.0 / 9.0)
        && phi_n(&single, 1) == 1.0
        && phi_n(&two, 1) == 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, &[label_hash("phi")]));
    let mut grid: Vec<usize> = (0..40).map(|_| rng.random_range(1..1_000_000)).collect();
    grid.sort_unstable();
    let monotone = (0..100).all(|_| {
        let q = rng.random_range(1..=4);
        let spec = RateSpec::new(
            (0..q).map(|_| rng.random_range(0.1..5.0)).collect(),
            (0..q).map(|_| rng.random_range(1..20)).collect(),
        )
        .unwrap();
        grid.windows(2)
            .all(|w| phi_n(&spec, w[1]) <= phi_n(&spec, w[0]))
    });
    verdict(
        examples && monotone,
        format!("examples {examples}, monotone over 100 specs {monotone}"),
    )
}

fn synthetic_rolling() -> Outcome {
    let coeffs = [0.4, 0.2, 0.1, 0.1];
    let months = 453 + 60 + 5;
    let start = YearMonth::new(1960, 1).unwrap();
    let table = simulate_ar_inflation(
        &coeffs,
        3.0,
        months,
        start,
        derive_seed(SEED, &[label_hash("rolling")]),
    )
    .unwrap();
    let spec = RollingSpec {
        max_forecasts: Some(60),
        ..RollingSpec::default()
    };
    let report = rolling_forecast(&table, &spec).unwrap();
    verdict(
        report.steps.len() == 60 && (0.8..=1.3).contains(&report.mse),
        format!("{} windows, mse {:.4}", report.steps.len(), report.mse),
    )
}

fn real_panel() -> Outcome {
    let Some(path) = std::env::var_os("DEPNET_MACRO_CSV").map(PathBuf::from) else {
        return Outcome::Skip(
            "DEPNET_MACRO_CSV not set; the external monthly panel is not bundled".into(),
        );
    };
    let schema = MacroSchema {
        date_column: std::env::var("DEPNET_MACRO_DATE").unwrap_or_else(|_| "date".into()),
        cpi_column: std::env::var("DEPNET_MACRO_CPI").unwrap_or_else(|_| "cpi".into()),
        predictors: None,
    };
    let run = || -> depnet::Result<_> {
        let table = ingest_csv(&path, &schema)?;
        let spec = RollingSpec {
            start: Some(YearMonth::new(2002, 2)?),
            backend: Backend::Ols,
            ..RollingSpec::default()
        };
        rolling_forecast(&table, &spec)
    };
    match run() {
        Ok(report) => {
            let first = report
                .steps
                .first()
                .map(|s| s.date.to_string())
                .unwrap_or_default();
            let last = report
                .steps
                .last()
                .map(|s| s.date.to_string())
                .unwrap_or_default();
            verdict(
                report.steps.len() == 118
                    && first == "2002-02"
                    && last == "2011-11"
                    && report.mse.is_finite(),
                format!(
                    "{} forecasts {first}..{last}, mse {:.4}",
                    report.steps.len(),
                    report.mse
                ),
            )
        }
        Err(e) => Outcome::Fail(format!("pipeline error: {e}")),
    }
}

fn determinism() -> Outcome {
    let specs = [
        (
            "var1",
            GeneratorKind::Var1Shift { rho: 0.6 },
            LagRule::Fixed { d: 1 },
        ),
        (
            "arinf",
            GeneratorKind::ArInfinity {
                alpha: 1.0,
                mass: 0.5,
                d_trunc: 200,
            },
            LagRule::Theoretical { alpha: 1.0, c: 1.0 },
        ),
        (
            "model2",
            GeneratorKind::LinearAr {
                coeffs: vec![0.6, -0.4, 0.2],
            },
            LagRule::Aic { d_max: 6 },
        ),
    ];
    let render = |spec: &ExperimentSpec| {
        let table = run_convergence(spec).unwrap();
        let mut risk = Vec::new();
        table.write_csv(&mut risk).unwrap();
        let mut boxes = Vec::new();
        summarize_box(&table).write_csv(&mut boxes).unwrap();
        (risk, boxes)
    };
    let mut identical = true;
    for (id, model, lag_rule) in specs {
        let mut spec = ExperimentSpec::new(id, model);
        spec.n_grid = vec![100, 200];
        spec.replicates = 4;
        spec.train.max_epochs = 300;
        spec.train.dropout_rate = 0.1;
        spec.lag_rule = lag_rule;
        spec.base_seed = SEED;
        identical &= render(&spec) == render(&spec);
    }
    let table = simulate_ar_inflation(
        &[0.5, 0.2],
        2.0,
        240,
        YearMonth::new(1980, 1).unwrap(),
        SEED,
    )
    .unwrap();
    let spec = RollingSpec {
        window: 120,
        train_len: 80,
        val_len: 40,
        max_forecasts: Some(4),
        backend: Backend::Nn {
            hidden_width: 10,
            hidden_layers: 1,
            train: depnet::TrainConfig {
                max_epochs: 100,
                dropout_rate: 0.2,
                ..Default::default()
            },
            n_init: 3,
        },
        ..RollingSpec::default()
    };
    let forecast_csv = || {
        let mut buf = Vec::new();
        rolling_forecast(&table, &spec)
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        buf
    };
    identical &= forecast_csv() == forecast_csv();
    verdict(
        identical,
        "three experiment specs and one forecast run rendered twice".into(),
    )
}

fn main() -> ExitCode {
    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    let mut report = |id: usize, title: &str, outcome: Outcome| match outcome {
        Outcome::Pass(d) => {
            passed += 1;
            println!("criterion {id:>2} PASS  {title}: {d}");
        }
        Outcome::Fail(d) => {
            failed += 1;
            println!("criterion {id:>2} FAIL  {title}: {d}");
        }
        Outcome::Skip(d) => {
            skipped += 1;
            println!("criterion {id:>2} SKIP  {title}: {d}");
        }
    };
    report(
        1,
        "gradient vs finite differences",
        timed(gradient_check, 60),
    );
    report(
        2,
        "VAR(1) stationary covariance",
        timed(|| var1_covariance(&var1_path()), 60),
    );
    report(
        3,
        "covariance decay of cos(X)",
        timed(|| mixing_decay(&var1_path()), 60),
    );
    report(
        4,
        "nonlinear AR convergence",
        timed(nonlinear_models, 30 * 60),
    );
    report(5, "OLS rate on AR(1)", timed(ols_rate, 10 * 60));
    report(
        6,
        "dependent vs independent",
        timed(dependent_vs_independent, 30 * 60),
    );
    report(7, "lag selection rules", timed(selection_rules, 60 * 60));
    report(8, "phi_n suite", timed(phi_suite, 60 * 60));
    report(
        9,
        "synthetic rolling forecast",
        timed(synthetic_rolling, 5 * 60),
    );
    report(10, "real-panel benchmark", timed(real_panel, 60 * 60));
    report(11, "determinism", timed(determinism, 60 * 60));
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    let strict = std::env::var("DEPNET_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
