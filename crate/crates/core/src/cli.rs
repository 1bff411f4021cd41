//! Command-line interface. Exit codes: `0` success, `1` usage error, `2`
//! data error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{fit_random_forest, TreeTask};
use crate::checkpoint::{complete_with, Forecaster, Predictor};
use crate::config::AppConfig;
use crate::domain::{fit_normalizer, Field, HourlyObservation};
use crate::error::{Error, Result};
use crate::features::{
    build_windows, correlation_matrix, rank_features, select_features, CompletedDataset, FeatureSchema, RankingData,
    RankingMethod, WindowSample, HOUR_FEATURE, MONTH_FEATURE,
};
use crate::impute::mice_impute;
use crate::ingest::{generate_synthetic, parse_observations, write_observations, StationDataset};
use crate::nn::{model::class_groups, Task};
use crate::pipeline::{
    adaptive_run, classify_from_regressor, evaluate_classification, evaluate_regression, line_chart_svg, prepare,
    seasonal_summary, train, EvalReport,
};
use crate::server::{forecast_response, load_station, serve, station_id_for, ForecastService, Poller, Sources};

#[derive(Parser, Debug)]
#[command(name = "aeroadapt", version, about = "Air-quality forecasting with adaptive BiLSTM-attention networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Seed for every random choice.
    #[arg(long)]
    seed: Option<u64>,
    /// Key-value TOML file overriding defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TrainTask {
    Reg,
    Cls,
    Forest,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ForestTask {
    Reg,
    Cls,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Forest,
    Backward,
    Forward,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a station CSV and write the canonical hourly dataset.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Station id; defaults to the file stem.
        #[arg(long)]
        station: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic station dataset and its ground truth.
    Synth {
        #[arg(long)]
        hours: Option<usize>,
        #[arg(long)]
        missing_rate: Option<f64>,
        #[arg(long)]
        drift_start: Option<usize>,
        #[arg(long)]
        drift_slope: Option<f64>,
        #[arg(long)]
        station: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Fill gaps with chained linear regressions.
    Impute {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rank candidate features and select a schema.
    Features {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a network regressor, classifier or forest baseline.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "reg")]
        task: TrainTask,
        /// Output type of the forest baseline.
        #[arg(long, value_enum, default_value = "reg")]
        forest_task: ForestTask,
        /// Feature schema JSON written by `features`.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on a held-out CSV.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate weekly retraining against the frozen initial model.
    Adapt {
        #[arg(long)]
        data: PathBuf,
        /// Hours used to train the initial model.
        #[arg(long, default_value_t = 672)]
        initial_hours: usize,
        /// Ablation: never retrain.
        #[arg(long)]
        withhold: bool,
        /// Retrain from scratch instead of from the current weights.
        #[arg(long)]
        full_retrain: bool,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// One-shot forecast from a checkpoint and recent hours.
    Forecast {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Serve `GET /forecast/<station>` and `GET /health`.
    Serve {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Station CSVs; the file stem is the station id.
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        poll_seconds: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Seasonal summary, metric tables and predicted-vs-actual charts.
    Report {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) => 1,
                _ => 2,
            }
        }
    }
}

macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn load_config(common: &Common) -> Result<AppConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", p.display())))?;
            AppConfig::from_toml_str(&text)?
        }
        None => AppConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.synth.seed = seed;
    }
    fs::create_dir_all(&common.out)?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn write_dataset(path: &Path, data: &StationDataset) -> Result<()> {
    data.to_csv(fs::File::create(path)?)
}

fn read_dataset(path: &Path) -> Result<StationDataset> {
    load_station(path)
}

fn observed_fields(data: &StationDataset) -> Vec<Field> {
    Field::ALL
        .iter()
        .copied()
        .filter(|f| data.observations.iter().any(|o| o.get(*f).is_some()))
        .collect()
}

fn default_schema(cfg: &AppConfig, data: &StationDataset) -> Result<FeatureSchema> {
    let mut names: Vec<String> = observed_fields(data).iter().map(|f| f.name().to_string()).collect();
    names.push(HOUR_FEATURE.into());
    names.push(MONTH_FEATURE.into());
    cfg.schema(names)
}

fn read_schema(cfg: &AppConfig, path: Option<&Path>, data: &StationDataset) -> Result<FeatureSchema> {
    match path {
        Some(p) => {
            let schema: FeatureSchema = serde_json::from_reader(fs::File::open(p)?)?;
            schema.validate()?;
            Ok(schema)
        }
        None => default_schema(cfg, data),
    }
}

/// Every observed field completed with MICE over the whole file.
fn impute_all(cfg: &AppConfig, data: &StationDataset) -> Result<(CompletedDataset, crate::impute::ImputationReport)> {
    let fields = observed_fields(data);
    let cols: Vec<(String, Vec<Option<f64>>)> = fields.iter().map(|f| (f.name().to_string(), data.column(*f))).collect();
    let (filled, report, _) = mice_impute(&cols, &cfg.mice_config())?;
    Ok((
        CompletedDataset {
            station_id: data.station_id.clone(),
            timestamps: data.observations.iter().map(|o| o.timestamp).collect(),
            columns: fields.into_iter().zip(filled).collect(),
        },
        report,
    ))
}

fn flatten(samples: &[WindowSample]) -> Vec<Vec<f64>> {
    samples.iter().map(|s| s.inputs.data().to_vec()).collect()
}

fn full_report(model: &Forecaster, samples: &[WindowSample]) -> Result<EvalReport> {
    match model.predictor.task() {
        Task::Classification => evaluate_classification(model, samples),
        Task::Regression => {
            let mut report = evaluate_regression(model, samples)?;
            let classes = classify_from_regressor(model, samples)?;
            for (e, c) in report.entries.iter_mut().zip(classes.entries) {
                e.classification = c.classification;
            }
            Ok(report)
        }
    }
}

fn save_report(out: &Path, stem: &str, report: &EvalReport) -> Result<()> {
    write_json(&out.join(format!("{stem}.json")), report)?;
    report.write_csv(fs::File::create(out.join(format!("{stem}.csv")))?)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest { input, station, common } => {
            load_config(&common)?;
            let id = station.unwrap_or_else(|| station_id_for(&input));
            let (data, issues) = parse_observations(fs::File::open(&input)?, &id)?;
            let path = common.out.join(format!("{id}.csv"));
            write_dataset(&path, &data)?;
            write_json(&common.out.join(format!("{id}_issues.json")), &issues)?;
            say!("{} hours, {} issues -> {}", data.len(), issues.len(), path.display());
        }
        Command::Synth {
            hours,
            missing_rate,
            drift_start,
            drift_slope,
            station,
            common,
        } => {
            let cfg = load_config(&common)?;
            let mut synth = cfg.synth.clone();
            if let Some(h) = hours {
                synth.n_hours = h;
            }
            if let Some(r) = missing_rate {
                synth.missing_rate = r;
            }
            if drift_start.is_some() {
                synth.drift_start_hour = drift_start;
            }
            if let Some(s) = drift_slope {
                synth.drift_slope = s;
            }
            if let Some(s) = station {
                synth.station_id = s;
            }
            let (masked, truth) = generate_synthetic(&synth)?;
            let path = common.out.join(format!("{}.csv", synth.station_id));
            write_dataset(&path, &masked)?;
            write_dataset(&common.out.join(format!("{}_truth.csv", synth.station_id)), &truth)?;
            say!("{} hours -> {}", masked.len(), path.display());
        }
        Command::Impute { data, common } => {
            let cfg = load_config(&common)?;
            let raw = read_dataset(&data)?;
            let (completed, report) = impute_all(&cfg, &raw)?;
            let rows: Vec<HourlyObservation> = (0..completed.len())
                .map(|t| {
                    let mut o = HourlyObservation::empty(completed.timestamps[t]);
                    for (f, col) in &completed.columns {
                        o.set(*f, Some(col[t]));
                    }
                    o
                })
                .collect();
            write_observations(fs::File::create(common.out.join("imputed.csv"))?, &rows)?;
            write_json(&common.out.join("imputation.json"), &report)?;
            say!("imputed {} cells in {} iterations", report.imputed.iter().map(|(_, n)| n).sum::<usize>(), report.iterations);
        }
        Command::Features {
            data,
            method,
            top_k,
            threshold,
            common,
        } => {
            let cfg = load_config(&common)?;
            let raw = read_dataset(&data)?;
            let (completed, _) = impute_all(&cfg, &raw)?;
            let fields: Vec<Field> = completed.columns.keys().copied().collect();
            let norm = fit_normalizer(completed.columns.iter().map(|(f, v)| (f.name(), v.clone())))?;
            let method = match method {
                Some(Method::Forest) => RankingMethod::ForestImportance,
                Some(Method::Backward) => RankingMethod::BackwardElimination,
                Some(Method::Forward) => RankingMethod::ForwardConstruction,
                None => cfg.ranking_method,
            };
            let ranking_data = RankingData::from_dataset(&completed, &fields, &norm, cfg.ranking_horizon)?;
            let ranked = rank_features(&ranking_data, method, cfg.seed())?;
            let corr_cols: Vec<(String, Vec<f64>)> = completed
                .columns
                .iter()
                .map(|(f, v)| (f.name().to_string(), v.clone()))
                .collect();
            let (corr, notes) = correlation_matrix(&corr_cols)?;
            for n in &notes {
                log::warn!("{n}");
            }
            let names: Vec<String> = corr_cols.iter().map(|(n, _)| n.clone()).collect();
            let mut schema = select_features(
                &ranked,
                &names,
                &corr,
                threshold.unwrap_or(cfg.redundancy_threshold),
                top_k.unwrap_or(cfg.top_k),
            )?;
            schema.window = cfg.window;
            schema.horizons = cfg.horizons.clone();
            schema.validate()?;
            write_json(&common.out.join("ranking.json"), &ranked)?;
            write_json(&common.out.join("schema.json"), &schema)?;
            let mut w = csv::Writer::from_path(common.out.join("correlation.csv")).map_err(|e| Error::Data(e.to_string()))?;
            let mut header = vec![String::new()];
            header.extend(names.iter().cloned());
            w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
            for (i, n) in names.iter().enumerate() {
                let mut row = vec![n.clone()];
                row.extend(corr.row(i).iter().map(|v| v.to_string()));
                w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
            }
            w.flush()?;
            say!("selected: {}", schema.features.join(", "));
        }
        Command::Train {
            data,
            task,
            forest_task,
            schema,
            common,
        } => {
            let cfg = load_config(&common)?;
            let raw = read_dataset(&data)?;
            let schema = read_schema(&cfg, schema.as_deref(), &raw)?;
            let prepared = prepare(&raw, &schema, &cfg.mice_config())?;
            let predictor = match task {
                TrainTask::Reg | TrainTask::Cls => {
                    let t = if task == TrainTask::Reg { Task::Regression } else { Task::Classification };
                    let model_cfg = cfg.model_config(t, schema.input_dim());
                    let (params, history) = train(model_cfg, prepared.train(), prepared.val(), &cfg.train_config())?;
                    history.write_csv(fs::File::create(common.out.join("history.csv"))?)?;
                    say!(
                        "trained {} epochs, best epoch {} (val loss {:.6})",
                        history.records.len() - 1,
                        history.best_epoch,
                        history.best_val_loss()
                    );
                    Predictor::Network(params)
                }
                TrainTask::Forest => {
                    let fit_set: Vec<WindowSample> = prepared.train().iter().chain(prepared.val()).cloned().collect();
                    let x = flatten(&fit_set);
                    let forest = match forest_task {
                        ForestTask::Reg => {
                            let y: Vec<Vec<f64>> = fit_set.iter().map(|s| s.targets_regression.data().to_vec()).collect();
                            fit_random_forest(&x, TreeTask::MultiRegression(&y), &cfg.forest_config())?
                        }
                        ForestTask::Cls => {
                            let y: Vec<Vec<u8>> = fit_set.iter().map(|s| s.targets_class.clone()).collect();
                            let classes: Vec<usize> = (0..schema.horizons.len()).flat_map(|_| class_groups()).collect();
                            fit_random_forest(
                                &x,
                                TreeTask::MultiClassification {
                                    labels: &y,
                                    n_classes: &classes,
                                },
                                &cfg.forest_config(),
                            )?
                        }
                    };
                    Predictor::Forest(forest)
                }
            };
            let model = Forecaster {
                predictor,
                schema: schema.clone(),
                normalizer: prepared.normalizer.clone(),
                imputer: prepared.imputer.clone(),
            };
            model.save(&common.out.join("model.ckpt"))?;
            write_json(&common.out.join("schema.json"), &schema)?;
            let report = full_report(&model, prepared.test())?;
            save_report(&common.out, "test_report", &report)?;
            say!("checkpoint -> {}", common.out.join("model.ckpt").display());
        }
        Command::Evaluate {
            checkpoint,
            data,
            common,
        } => {
            load_config(&common)?;
            let model = Forecaster::load(&checkpoint)?;
            let raw = read_dataset(&data)?;
            let completed = complete_with(&raw, model.imputer.as_ref(), &required_fields(&model.schema))?;
            let samples = build_windows(&completed, &model.schema, &model.normalizer)?;
            let report = full_report(&model, &samples)?;
            save_report(&common.out, "evaluation", &report)?;
            say!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Adapt {
            data,
            initial_hours,
            withhold,
            full_retrain,
            schema,
            common,
        } => {
            let cfg = load_config(&common)?;
            let raw = read_dataset(&data)?;
            if initial_hours >= raw.len() {
                return Err(Error::TooShort {
                    required: initial_hours + cfg.period_hours,
                    actual: raw.len(),
                });
            }
            let schema = read_schema(&cfg, schema.as_deref(), &raw)?;
            let initial_data = raw.slice(0, initial_hours);
            let prepared = prepare(&initial_data, &schema, &cfg.mice_config())?;
            let model_cfg = cfg.model_config(Task::Regression, schema.input_dim());
            let (params, _) = train(model_cfg, prepared.train(), prepared.val(), &cfg.train_config())?;
            let initial = Forecaster {
                predictor: Predictor::Network(params),
                schema: schema.clone(),
                normalizer: prepared.normalizer.clone(),
                imputer: prepared.imputer.clone(),
            };
            initial.save(&common.out.join("initial.ckpt"))?;
            let completed = complete_with(&raw, initial.imputer.as_ref(), &required_fields(&schema))?;
            let mut adapt = cfg.adaptive_config();
            adapt.withhold = withhold;
            adapt.warm_start = !full_retrain;
            let (_, report) = adaptive_run(
                &initial,
                &completed,
                initial_hours,
                &adapt,
                Some(&common.out.join("checkpoints")),
            )?;
            write_json(&common.out.join("comparative.json"), &report)?;
            report.write_csv(fs::File::create(common.out.join("comparative.csv"))?)?;
            say!(
                "{} periods: adaptive {:.3} vs frozen {:.3} over the final {} (gain {:.1}%)",
                report.periods.len(),
                report.adaptive_final_rmse,
                report.frozen_final_rmse,
                report.final_periods,
                100.0 * report.final_gain
            );
        }
        Command::Forecast {
            checkpoint,
            data,
            common,
        } => {
            load_config(&common)?;
            let model = Forecaster::load(&checkpoint)?;
            let recent = read_dataset(&data)?;
            if recent.len() < model.schema.window {
                return Err(Error::Data(format!("need {}, have {}", model.schema.window, recent.len())));
            }
            let response = forecast_response(&model, &recent)?;
            write_json(&common.out.join("forecast.json"), &response)?;
            say!("{}", serde_json::to_string_pretty(&response)?);
        }
        Command::Serve {
            checkpoint,
            data,
            bind,
            poll_seconds,
            common,
        } => {
            let cfg = load_config(&common)?;
            let model = Forecaster::load(&checkpoint)?;
            let service = Arc::new(ForecastService::new(model));
            let sources = Sources { checkpoint, data };
            Poller::new(sources.clone()).poll(&service);
            let bind = bind.unwrap_or(cfg.bind.clone());
            let poll = Duration::from_secs(poll_seconds.unwrap_or(cfg.poll_seconds).max(1));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind).await?;
                say!("listening on http://{}", listener.local_addr()?);
                serve(listener, service, Some(sources), poll).await
            })?;
        }
        Command::Report {
            data,
            checkpoint,
            common,
        } => {
            load_config(&common)?;
            let raw = read_dataset(&data)?;
            let summary = seasonal_summary(&raw);
            summary.write_csv(fs::File::create(common.out.join("seasonal.csv"))?)?;
            write_json(&common.out.join("seasonal.json"), &summary)?;
            if let Some(ckpt) = checkpoint {
                let model = Forecaster::load(&ckpt)?;
                let completed = complete_with(&raw, model.imputer.as_ref(), &required_fields(&model.schema))?;
                let samples = build_windows(&completed, &model.schema, &model.normalizer)?;
                let report = full_report(&model, &samples)?;
                save_report(&common.out, "metrics", &report)?;
                if model.predictor.task() == Task::Regression {
                    write_charts(&common.out, &model, &samples)?;
                }
            }
            say!("report -> {}", common.out.display());
        }
    }
    Ok(())
}

fn required_fields(schema: &FeatureSchema) -> Vec<Field> {
    let mut f = schema.input_fields();
    for p in &schema.targets {
        if !f.contains(&p.field()) {
            f.push(p.field());
        }
    }
    f
}

/// Predicted against actual at the first horizon, one chart per pollutant.
fn write_charts(out: &Path, model: &Forecaster, samples: &[WindowSample]) -> Result<()> {
    const MAX_POINTS: usize = 500;
    let tail = &samples[samples.len().saturating_sub(MAX_POINTS)..];
    let (pred, truth) = crate::pipeline::metrics::regression_predictions(model, tail)?;
    let h = model.schema.horizons[0];
    for (pi, pol) in model.schema.targets.iter().enumerate() {
        let actual: Vec<f64> = truth.iter().map(|r| r[pi]).collect();
        let predicted: Vec<f64> = pred.iter().map(|r| r[pi]).collect();
        let title = format!("{pol} {h} h ahead");
        let svg = line_chart_svg(&title, &[("actual", &actual), ("predicted", &predicted)]);
        fs::write(out.join(format!("{}_h{h}.svg", pol.column_name())), svg)?;
    }
    Ok(())
}
