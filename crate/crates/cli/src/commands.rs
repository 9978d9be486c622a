use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array2};
use serde_json::json;
use ttlc_core::dataset::{
    assign_vehicle_folds, extract_series, load_recording, FeatureSeries, Provenance, RecordingPaths, SampleCache,
    FEATURE_NAMES,
};
use ttlc_core::eval::{classify_within, evaluate as run_evaluation, EvalMode, EvalReport, RMSE_COLUMNS, RMSE_ROWS};
use ttlc_core::nn::{feature_importance, forward, ModelParams};
use ttlc_core::pipeline::{grid_search, train_final, without_fold, FitConfig, Grid, GridResult, Hyperparams};
use ttlc_core::synthgen::{generate as simulate, ScenarioConfig};
use ttlc_core::{Error, FRAME_RATE, MAX_TTLC, NUM_FEATURES};

use crate::error::{CliError, CliResult};
use crate::state::{
    sha256_file, StateDir, GRID_RESULTS, GRID_SUMMARY, IMPORTANCE, MODEL, SAMPLES, TRAIN_TRACE,
};
use crate::{EvaluateArgs, FitArgs, GenerateArgs, GridsearchArgs, ImportanceArgs, PredictArgs, PrepareArgs, TrainArgs};

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())).into())
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn generate(args: &GenerateArgs) -> CliResult<()> {
    let mut cfg: ScenarioConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => ScenarioConfig::default(),
    };
    cfg.seed = args.seed;
    let scenario = simulate(&cfg)?;
    let paths = scenario.write(&args.out, &args.name)?;
    std::fs::write(args.out.join(format!("{}.scenario.json", args.name)), serde_json::to_string_pretty(&cfg)?)?;
    let rec = &scenario.recording;
    println!(
        "wrote {}: {} vehicles, {} frames, {} lane changes",
        paths.tracks.display(),
        rec.trajectories().len(),
        rec.num_frames(),
        scenario.truth.len()
    );
    Ok(())
}

pub fn prepare(args: &PrepareArgs) -> CliResult<()> {
    if args.test_fold >= args.folds {
        return Err(Error::Config(format!("test fold {} out of range 0..{}", args.test_fold, args.folds)).into());
    }
    let mut state = StateDir::lock(&args.state)?;
    let mut series = Vec::new();
    let mut inputs = BTreeMap::new();
    let mut names = Vec::new();
    for (i, path) in args.recordings.iter().enumerate() {
        let rec = load_recording(path)?;
        series.extend(extract_series(&rec, i as u32)?);
        let paths = RecordingPaths::from_tracks(path);
        inputs.insert(file_name(&paths.tracks), sha256_file(&paths.tracks)?);
        inputs.insert(file_name(&paths.meta), sha256_file(&paths.meta)?);
        names.push(file_name(path));
    }
    let keys: Vec<_> = series.iter().map(FeatureSeries::key).collect();
    let assignment = assign_vehicle_folds(&keys, args.folds, args.seed)?;
    let window_len = (FRAME_RATE * args.t_h).round() as usize;
    let provenance = Provenance { recordings: names, seed: args.seed, num_folds: args.folds, t_h: args.t_h };
    let cache = SampleCache::new(provenance, window_len, series, &assignment)?;
    let (set, folds) = cache.sample_set(window_len)?;
    cache.save(&state.path(SAMPLES))?;

    let counts7 = set.class_counts(MAX_TTLC);
    let counts5 = set.class_counts(5.0);
    let fold_sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    state.invalidate_dependents(SAMPLES);
    let params = json!({
        "t_h": args.t_h,
        "window_len": window_len,
        "num_folds": args.folds,
        "test_fold": args.test_fold,
        "num_vehicles": cache.series.len(),
        "num_samples": set.len(),
        "class_counts_7s": counts7,
        "class_counts_5s": counts5,
        "fold_samples": fold_sizes,
    });
    state.record(SAMPLES, "prepare", Some(args.seed), inputs, params)?;
    println!("vehicles: {}  window: {} steps  samples: {}", cache.series.len(), window_len, set.len());
    println!("classes (7 s): LCL {} FLW {} LCR {}", counts7[0], counts7[1], counts7[2]);
    println!("classes (5 s): LCL {} FLW {} LCR {}", counts5[0], counts5[1], counts5[2]);
    println!("fold samples: {fold_sizes:?}  test fold: {}", args.test_fold);
    Ok(())
}

fn fit_config(args: &FitArgs) -> CliResult<FitConfig> {
    let mut cfg: FitConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => FitConfig::default(),
    };
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = args.patience {
        cfg.early_stop_patience = v;
    }
    if args.clip_norm.is_some() {
        cfg.clip_norm = args.clip_norm;
    }
    Ok(cfg)
}

/// Sample cache plus the test fold recorded when it was prepared.
fn load_samples(state: &StateDir) -> CliResult<(SampleCache, usize, String)> {
    let entry = state.verified(SAMPLES)?;
    let test_fold = entry.params["test_fold"]
        .as_u64()
        .ok_or_else(|| CliError::state("samples entry lacks a test fold"))? as usize;
    let digest = entry.sha256.clone();
    Ok((SampleCache::load(&state.path(SAMPLES))?, test_fold, digest))
}

pub fn gridsearch(args: &GridsearchArgs) -> CliResult<()> {
    let mut state = StateDir::lock(&args.state)?;
    let (cache, test_fold, samples_sha) = load_samples(&state)?;
    let grid = match &args.grid {
        Some(p) => Grid::load(p)?,
        None => Grid::default(),
    };
    let cfg = fit_config(&args.fit)?;
    let series: Vec<Arc<FeatureSeries>> = cache
        .series
        .iter()
        .zip(&cache.folds)
        .filter(|&(_, &f)| f != test_fold)
        .map(|(s, _)| Arc::new(s.clone()))
        .collect();
    let result = grid_search(&series, &grid, args.folds, &cfg, args.seed)?;
    result.write_csv(std::fs::File::create(state.path(GRID_RESULTS))?)?;
    std::fs::write(state.path(GRID_SUMMARY), result.summary_json()?)?;

    let mut inputs = BTreeMap::from([(SAMPLES.to_string(), samples_sha)]);
    if let Some(p) = &args.grid {
        inputs.insert(file_name(p), sha256_file(p)?);
    }
    let params = json!({ "grid": grid, "folds": args.folds, "fit": cfg, "test_fold": test_fold });
    state.invalidate_dependents(GRID_SUMMARY);
    state.record(GRID_RESULTS, "gridsearch", Some(args.seed), inputs.clone(), params.clone())?;
    state.record(GRID_SUMMARY, "gridsearch", Some(args.seed), inputs, params)?;
    print_grid(&result);
    Ok(())
}

fn print_grid(result: &GridResult) {
    println!("{:>7} {:>7} {:>5} {:>8} {:>12}", "n_lstm", "n_dense", "t_h", "alpha", "mean_mse");
    for r in &result.rows {
        let h = r.hyper;
        let score = match (&r.mean_mse, &r.failure) {
            (Some(m), _) => format!("{m:12.6}"),
            (None, Some(msg)) => format!("failed: {msg}"),
            (None, None) => "-".into(),
        };
        println!("{:>7} {:>7} {:>5} {:>8} {score}", h.n_lstm, h.n_dense, h.t_h, h.learning_rate);
    }
    let b = result.best;
    println!(
        "best: n_lstm={} n_dense={} t_h={} alpha={} (mean val MSE {:.6})",
        b.n_lstm, b.n_dense, b.t_h, b.learning_rate, result.best_mean_mse
    );
}

#[derive(serde::Deserialize)]
struct GridSummaryBest {
    best: Hyperparams,
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let mut state = StateDir::lock(&args.state)?;
    let (cache, test_fold, samples_sha) = load_samples(&state)?;
    let mut inputs = BTreeMap::from([(SAMPLES.to_string(), samples_sha.clone())]);

    let given = [args.n_lstm.is_some(), args.n_dense.is_some(), args.t_h.is_some(), args.learning_rate.is_some()];
    let base = if given.iter().all(|&g| g) {
        None
    } else {
        let entry = state.verified(GRID_SUMMARY).map_err(|_| {
            CliError::state("no grid-search result; run gridsearch or pass --n-lstm, --n-dense, --t-h and --learning-rate")
        })?;
        if entry.inputs.get(SAMPLES) != Some(&samples_sha) {
            return Err(CliError::state("grid-search result belongs to a different sample cache"));
        }
        inputs.insert(GRID_SUMMARY.to_string(), entry.sha256.clone());
        Some(read_json::<GridSummaryBest>(&state.path(GRID_SUMMARY))?.best)
    };
    let base = base.unwrap_or(Hyperparams { n_lstm: 0, n_dense: 0, t_h: 0.0, learning_rate: 0.0 });
    let hp = Hyperparams {
        n_lstm: args.n_lstm.unwrap_or(base.n_lstm),
        n_dense: args.n_dense.unwrap_or(base.n_dense),
        t_h: args.t_h.unwrap_or(base.t_h),
        learning_rate: args.learning_rate.unwrap_or(base.learning_rate),
    };
    hp.validate()?;
    let cfg = fit_config(&args.fit)?;

    let (set, folds) = cache.sample_set(hp.window_len())?;
    let pool = without_fold(&set, &folds, test_fold)?;
    let fit = train_final(&pool, hp, &cfg, args.seed)?;
    fit.model.save(&state.path(MODEL))?;
    fit.trace.write_csv(std::fs::File::create(state.path(TRAIN_TRACE))?)?;

    let params = json!({
        "hyper": hp,
        "fit": cfg,
        "test_fold": test_fold,
        "best_epoch": fit.trace.best_epoch,
        "epochs_run": fit.trace.epochs.len(),
        "early_stopping_vehicles": fit.holdout.len(),
    });
    state.invalidate_dependents(MODEL);
    state.record(MODEL, "train", Some(args.seed), inputs.clone(), params.clone())?;
    state.record(TRAIN_TRACE, "train", Some(args.seed), inputs, params)?;
    println!(
        "trained n_lstm={} n_dense={} t_h={} alpha={} on {} samples: best epoch {} of {}, val MSE {:.6}",
        hp.n_lstm,
        hp.n_dense,
        hp.t_h,
        hp.learning_rate,
        pool.len(),
        fit.trace.best_epoch,
        fit.trace.epochs.len(),
        fit.trace.best_val_mse()
    );
    Ok(())
}

/// Loads the recorded model after checking it was trained on the current
/// sample cache with the same test fold held out.
fn load_model(state: &StateDir, samples_sha: &str, test_fold: usize) -> CliResult<(ModelParams, String)> {
    let entry = state.verified(MODEL)?;
    if entry.inputs.get(SAMPLES).map(String::as_str) != Some(samples_sha) {
        return Err(CliError::state("model was trained on a different sample cache"));
    }
    if entry.params["test_fold"].as_u64() != Some(test_fold as u64) {
        return Err(CliError::state("model was trained with a different test fold held out"));
    }
    Ok((ModelParams::load(&state.path(MODEL))?, entry.sha256.clone()))
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let mut state = StateDir::lock(&args.state)?;
    let (cache, test_fold, samples_sha) = load_samples(&state)?;
    let (model, model_sha) = load_model(&state, &samples_sha, test_fold)?;
    let mode = if args.undersampled { EvalMode::Undersampled } else { EvalMode::Balanced };

    let (set, folds) = cache.sample_set(model.window_len())?;
    let test = set.subset(&folds[test_fold]);
    let report = run_evaluation(&model, &test, mode, args.horizon, args.bin_width, args.seed)?;
    let dir_name = match mode {
        EvalMode::Balanced => "eval_balanced",
        EvalMode::Undersampled => "eval_undersampled",
    };
    report.write_dir(&state.path(dir_name))?;

    let inputs = BTreeMap::from([(SAMPLES.to_string(), samples_sha), (MODEL.to_string(), model_sha)]);
    let params = json!({ "mode": mode, "horizon": args.horizon, "bin_width": args.bin_width, "test_fold": test_fold });
    for file in
        ["report.json", "rmse_table.csv", "baseline_rmse_table.csv", "ttlc_bins_left.csv", "ttlc_bins_right.csv", "class_report.csv"]
    {
        let name = format!("{dir_name}/{file}");
        state.record(&name, "evaluate", Some(args.seed), inputs.clone(), params.clone())?;
    }
    print_report(&report);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

fn print_report(r: &EvalReport) {
    println!(
        "{} evaluation on {} test samples (LCL {} FLW {} LCR {} at {} s)",
        match r.mode {
            EvalMode::Balanced => "balanced",
            EvalMode::Undersampled => "undersampled",
        },
        r.num_samples,
        r.class_counts[0],
        r.class_counts[1],
        r.class_counts[2],
        r.horizon
    );
    println!("RMSE [s]  {:>7} {:>7} {:>7} {:>7}", RMSE_COLUMNS[0], RMSE_COLUMNS[1], RMSE_COLUMNS[2], RMSE_COLUMNS[3]);
    for (i, name) in RMSE_ROWS.iter().enumerate() {
        let cells: Vec<String> = (0..4).map(|c| format!("{:>7}", fmt_opt(r.rmse.get(i, c)))).collect();
        println!("{name:<9} {}", cells.join(" "));
    }
    println!("class  precision  recall      f1  support");
    for (name, m) in ["LCL", "FLW", "LCR"].iter().zip(&r.classification.classes) {
        println!(
            "{name:<6} {:>9} {:>7} {:>7} {:>8}",
            fmt_opt(m.precision),
            fmt_opt(m.recall),
            fmt_opt(m.f1),
            m.support
        );
    }
    println!(
        "mean   {:>9} {:>7} {:>7}",
        fmt_opt(r.classification.mean_precision),
        fmt_opt(r.classification.mean_recall),
        fmt_opt(r.classification.mean_f1)
    );
}

pub fn importance(args: &ImportanceArgs) -> CliResult<()> {
    let mut state = StateDir::lock(&args.state)?;
    let entry = state.verified(MODEL)?;
    let model_sha = entry.sha256.clone();
    let model = ModelParams::load(&state.path(MODEL))?;
    let values = feature_importance(&model, args.importance_mode);
    let mut w = csv::Writer::from_path(state.path(IMPORTANCE))?;
    w.write_record(["feature", "importance"])?;
    for (name, v) in FEATURE_NAMES.iter().zip(&values) {
        w.write_record([name.to_string(), v.to_string()])?;
        println!("{name:<10} {v:.6}");
    }
    w.flush()?;
    drop(w);
    let inputs = BTreeMap::from([(MODEL.to_string(), model_sha)]);
    state.record(IMPORTANCE, "importance", None, inputs, json!({ "mode": args.importance_mode }))?;
    Ok(())
}

fn read_window(path: &Path) -> CliResult<Array2<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != FEATURE_NAMES {
        return Err(Error::Input(format!("{}: header must list the {NUM_FEATURES} feature names", path.display())).into());
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse { line: rows as u64 + 2, message: format!("not a number: {field:?}") }
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, NUM_FEATURES), values).map_err(|e| Error::Input(e.to_string()))?)
}

fn window_from_recording(path: &Path, vehicle: u32, frame: i64, len: usize) -> CliResult<Array2<f64>> {
    let rec = load_recording(path)?;
    let series = extract_series(&rec, 0)?
        .into_iter()
        .find(|s| s.vehicle_id == vehicle)
        .ok_or_else(|| Error::Input(format!("vehicle {vehicle} not in {}", path.display())))?;
    let end = frame - series.first_frame;
    if end < len as i64 - 1 || end >= series.len() as i64 {
        return Err(Error::Input(format!(
            "vehicle {vehicle} has no {len}-step history ending at frame {frame} (frames {}..{})",
            series.first_frame,
            series.first_frame + series.len() as i64 - 1
        ))
        .into());
    }
    let end = end as usize;
    Ok(series.features.slice(s![end + 1 - len..=end, ..]).to_owned())
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let model = match (&args.state, &args.model) {
        (Some(dir), _) => {
            let state = StateDir::open_read_only(dir)?;
            state.verified(MODEL)?;
            ModelParams::load(&state.path(MODEL))?
        }
        (None, Some(path)) => ModelParams::load(path)?,
        (None, None) => return Err(Error::Config("pass --state or --model".into()).into()),
    };
    let raw = match (&args.window, &args.recording, args.vehicle, args.frame) {
        (Some(w), ..) => read_window(w)?,
        (None, Some(r), Some(v), Some(f)) => window_from_recording(r, v, f, model.window_len())?,
        _ => return Err(Error::Config("pass --window or --recording with --vehicle and --frame".into()).into()),
    };
    if raw.nrows() != model.window_len() {
        return Err(Error::Input(format!("window has {} rows, model expects {}", raw.nrows(), model.window_len())).into());
    }
    let scaled = model.scaler.transform(raw.view())?;
    let [l, r] = forward(&model, scaled.view())?;
    let label = classify_within(l, r, args.horizon);
    println!("{}", json!({ "ttlcl": l, "ttlcr": r, "maneuver": label }));
    Ok(())
}
