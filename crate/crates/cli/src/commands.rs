use crate::config::{path_or, Analysis, RunConfig, BACKTEST_DIR, FORECAST_FILE, MODEL_FILE, PANEL_FILE, SCENARIO_CONFIG_FILE};
use crate::CliError;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use windlasso::basis::{cumulative_basis, plain_basis};
use windlasso::benchmarks::BenchmarkOptions;
use windlasso::eval::{run_backtest, BacktestSpec, ModelSpec};
use windlasso::features::{column_layout, write_layout_csv, Equation, ThresholdSet};
use windlasso::forecast::{bootstrap_forecast, point_forecast};
use windlasso::model::{fit_joint_model, read_model, write_model};
use windlasso::panel::{
    fill_gaps_linear, load_panel, parse_timestamp, seasonal_mean_profile, smoothed_periodogram, SeasonPartition,
    DIURNAL_STEPS,
};
use windlasso::synthetic::{Scenario, SCENARIOS};
use windlasso::{Error, TurbinePanel};

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_panel(panel: &TurbinePanel, path: &Path) -> Result<(), CliError> {
    let mut out = create(path)?;
    panel.write_csv(&mut out)?;
    out.flush()?;
    log::info!("wrote {} rows x {} turbines to {}", panel.n(), panel.d(), path.display());
    Ok(())
}

fn read_panel(cfg: &RunConfig, path: &Option<std::path::PathBuf>) -> Result<TurbinePanel, CliError> {
    Ok(load_panel(path_or(path, "panel")?, &cfg.schema)?)
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let input = path_or(&cfg.ingest.input, "ingest input")?;
    let mut panel = load_panel(input, &cfg.schema)?;
    if panel.missing_count() > 0 {
        log::info!("{} missing values", panel.missing_count());
        if cfg.ingest.fill_gaps {
            panel = fill_gaps_linear(&panel)?;
        }
    }
    write_panel(&panel, &cfg.out(PANEL_FILE))
}

pub fn analyze(cfg: &RunConfig) -> Result<(), CliError> {
    let panel = read_panel(cfg, &cfg.analyze.panel)?;
    let dir = cfg.out("analyze");
    std::fs::create_dir_all(&dir)?;
    for what in &cfg.analyze.what {
        match what {
            Analysis::Periodogram => {
                let mut w = create(&dir.join("periodogram.csv"))?;
                writeln!(w, "turbine,variable,frequency,density")?;
                for (i, label) in panel.labels().iter().enumerate() {
                    for (var, series) in [("speed", panel.speed(i)), ("power", panel.power(i))] {
                        if series.iter().any(|v| !v.is_finite()) {
                            return Err(Error::Schema("periodogram needs a gap-free panel".into()).into());
                        }
                        for o in smoothed_periodogram(series, cfg.analyze.span)? {
                            writeln!(w, "{label},{var},{},{}", o.frequency, o.density)?;
                        }
                    }
                }
                w.flush()?;
            }
            Analysis::Profiles => {
                let p = seasonal_mean_profile(&panel, &SeasonPartition::default())?;
                let mut w = create(&dir.join("profiles.csv"))?;
                p.write_csv(&mut w)?;
                w.flush()?;
            }
            Analysis::Design => {
                let mut model = cfg.model.clone();
                model.validate()?;
                let trim = model.sets.max_lag().min(panel.n());
                let speed: Vec<&[f64]> = panel.speed_all().iter().map(|s| &s[trim..]).collect();
                let power: Vec<&[f64]> = panel.power_all().iter().map(|s| &s[trim..]).collect();
                let thresholds = ThresholdSet::from_policy(&model.thresholds, &speed, &power)?;
                let n_basis = if model.uses_basis() { model.diurnal.n_basis * model.annual.n_basis } else { 0 };
                for eq in Equation::ALL {
                    let mut w = create(&dir.join(format!("design_{}.csv", eq.tag())))?;
                    for i in 0..panel.d() {
                        let layout = column_layout(eq, i, panel.d(), &model.sets, &thresholds, n_basis);
                        let mut buf = Vec::new();
                        write_layout_csv(&mut buf, i, &layout)?;
                        // One header for the whole file.
                        let text = String::from_utf8_lossy(&buf);
                        let skip = usize::from(i > 0);
                        for line in text.lines().skip(skip) {
                            writeln!(w, "{line}")?;
                        }
                    }
                    w.flush()?;
                }
            }
            Analysis::Basis => {
                let day: Vec<f64> = (0..DIURNAL_STEPS).map(|t| t as f64).collect();
                let year: Vec<f64> = (0..cfg.model.annual.season_length.ceil() as usize)
                    .step_by(DIURNAL_STEPS)
                    .map(|t| t as f64)
                    .collect();
                for (name, set) in [
                    ("basis_diurnal_plain.csv", plain_basis(&cfg.model.diurnal, &day)?),
                    ("basis_diurnal_cumulative.csv", cumulative_basis(&cfg.model.diurnal, &day)?),
                    ("basis_annual_plain.csv", plain_basis(&cfg.model.annual, &year)?),
                    ("basis_annual_cumulative.csv", cumulative_basis(&cfg.model.annual, &year)?),
                ] {
                    let mut w = create(&dir.join(name))?;
                    set.write_csv(&mut w)?;
                    w.flush()?;
                }
            }
        }
    }
    log::info!("analysis written to {}", dir.display());
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let s = &cfg.simulate;
    let scenario = Scenario::by_name(&s.scenario, s.turbines).ok_or_else(|| {
        CliError::Config(format!("unknown scenario '{}', expected one of {SCENARIOS:?}", s.scenario))
    })?;
    if scenario.truth.len() != s.turbines {
        return Err(CliError::Config(format!(
            "scenario '{}' has {} turbines, config asks for {}",
            s.scenario,
            scenario.truth.len(),
            s.turbines
        )));
    }
    let panel = scenario.simulate(s.rows, cfg.seed)?;
    write_panel(&panel, &cfg.out(PANEL_FILE))?;
    let refit = RunConfig { model: scenario.config, ..cfg.clone() };
    std::fs::write(cfg.out(SCENARIO_CONFIG_FILE), refit.to_toml())?;
    Ok(())
}

pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let mut panel = read_panel(cfg, &cfg.fit.panel)?;
    if let Some(rows) = cfg.fit.rows {
        panel = panel.slice(0..rows.min(panel.n()))?;
    }
    let t0 = std::time::Instant::now();
    let model = fit_joint_model(&panel, &cfg.model)?;
    log::info!("fitted {} turbines on {} rows in {:.2?}", model.d(), panel.n(), t0.elapsed());
    let path = cfg.out(MODEL_FILE);
    let mut out = create(&path)?;
    write_model(&model, &mut out)?;
    out.flush()?;
    log::info!("model written to {}", path.display());
    Ok(())
}

pub fn forecast(cfg: &RunConfig) -> Result<(), CliError> {
    let f = &cfg.forecast;
    let model = read_model(BufReader::new(File::open(path_or(&f.model, "model")?)?))?;
    let panel = read_panel(cfg, &f.panel)?;
    let origin = match (&f.origin_row, &f.origin_time) {
        (Some(_), Some(_)) => return Err(CliError::Config("set origin_row or origin_time, not both".into())),
        (Some(r), None) => *r,
        (None, Some(t)) => {
            let ts = parse_timestamp(t).ok_or_else(|| CliError::Config(format!("bad origin_time '{t}'")))?;
            panel.row_of(ts).ok_or_else(|| CliError::Config(format!("origin_time '{t}' not in the panel")))?
        }
        (None, None) => panel.n() - 1,
    };
    let result = if f.n_paths == 0 {
        point_forecast(&model, &panel, origin, f.horizon)?
    } else {
        bootstrap_forecast(&model, &panel, origin, f.horizon, f.n_paths, cfg.seed)?
    };
    let path = cfg.out(FORECAST_FILE);
    let mut out = create(&path)?;
    result.write_csv(&mut out, true)?;
    out.flush()?;
    log::info!("forecast from row {origin} written to {}", path.display());
    Ok(())
}

pub fn backtest(cfg: &RunConfig) -> Result<(), CliError> {
    let b = &cfg.backtest;
    let models = b.models.iter().map(|id| ModelSpec::from_id(id, &cfg.model)).collect::<Result<Vec<_>, _>>()?;
    let panel = read_panel(cfg, &b.panel)?;
    let spec = BacktestSpec {
        n_origins: b.n_origins,
        horizons: (1..=b.max_horizon).collect(),
        in_sample: b.in_sample,
        seed: cfg.seed,
        models,
        refit: b.refit,
        benchmark: BenchmarkOptions { max_order: b.max_order, censoring: b.censoring },
        ..BacktestSpec::default()
    };
    let report = run_backtest(&panel, &spec)?;
    let dir = cfg.out(BACKTEST_DIR);
    report.write_all(&dir)?;
    print!("{}", report.timing_text());
    log::info!("backtest report written to {}", dir.display());
    Ok(())
}
