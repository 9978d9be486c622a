//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails. Criterion numbers given on the
//! command line restrict the run, e.g. `cargo test --test acceptance -- 1 5`.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttlc_core::dataset::{
    apply_scaler, fit_scaler, split_folds, undersample_flw, FeatureScaler, FeatureSeries, Maneuver, SampleSet,
    VehicleKey,
};
use ttlc_core::eval::{class_report, classify_from_ttlc, rmse_table, ttlc_bin_stats, Channel};
use ttlc_core::nn::{backward, forward, mse_loss, ModelParams};
use ttlc_core::optim::{adam_step, evaluate_mse, train, AdamState, TrainConfig};
use ttlc_core::pipeline::{fit_model, without_fold, FitConfig, Grid, Hyperparams};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    check((a - b).abs() <= tol, || format!("{what}: {a} != {b}"))
}

fn close_opt(a: Option<f64>, b: f64, what: &str) -> Result<(), String> {
    close(a.ok_or_else(|| format!("{what}: absent"))?, b, 1e-12, what)
}

// ---------------------------------------------------------------- 1

fn random_model(h: usize, d: usize, t: usize, f: usize, rng: &mut ChaCha8Rng) -> ModelParams {
    let hp = Hyperparams { n_lstm: h, n_dense: d, t_h: t as f64 / 25.0, learning_rate: 1e-3 };
    let mut m = ModelParams::init(hp, f, FeatureScaler::identity(f), rng.random()).unwrap();
    for tensor in m.tensors_mut() {
        for w in tensor.iter_mut() {
            *w += rng.random_range(-0.5..0.5);
        }
    }
    m.output.bias.fill(1.0);
    m
}

fn batch_loss(m: &ModelParams, windows: &[ArrayView2<f64>], targets: &[[f64; 2]]) -> f64 {
    let pred: Vec<[f64; 2]> = windows.iter().map(|w| forward(m, *w).unwrap()).collect();
    mse_loss(&pred, targets).unwrap()
}

/// True when a finite-difference step of `eps` could cross a ReLU kink.
fn near_relu_kink(m: &ModelParams, windows: &[ArrayView2<f64>]) -> bool {
    windows.iter().any(|w| {
        let mut state = ttlc_core::nn::LstmState::zeros(m.lstm.hidden_size());
        for row in w.rows() {
            state = ttlc_core::nn::lstm_step(&m.lstm, &state, row).unwrap().0;
        }
        let hp = m.hidden.kernel.dot(&state.hidden) + &m.hidden.bias;
        let op = m.output.kernel.dot(&hp.mapv(|v| v.max(0.0))) + &m.output.bias;
        hp.iter().chain(op.iter()).any(|z| z.abs() < 1e-3)
    })
}

fn gradient_correctness() -> Outcome {
    const EPS: f64 = 1e-5;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut configs, mut entries, mut worst) = (0, 0, 0.0f64);
    while configs < 24 {
        let (h, d, t, f) =
            (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=6), rng.random_range(1..=5));
        let m = random_model(h, d, t, f, &mut rng);
        let n = rng.random_range(1..=4);
        let w: Vec<Array2<f64>> =
            (0..n).map(|_| Array2::from_shape_fn((t, f), |_| rng.random_range(-1.5..1.5))).collect();
        let views: Vec<_> = w.iter().map(|w| w.view()).collect();
        if near_relu_kink(&m, &views) {
            continue;
        }
        let targets: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(0.0..7.0), rng.random_range(0.0..7.0)]).collect();
        let (_, grads) = backward(&m, &views, &targets).unwrap();
        for (k, g) in grads.tensors().iter().enumerate() {
            for (i, &a) in g.iter().enumerate() {
                let mut plus = m.clone();
                plus.tensors_mut()[k][i] += EPS;
                let mut minus = m.clone();
                minus.tensors_mut()[k][i] -= EPS;
                let numeric = (batch_loss(&plus, &views, &targets) - batch_loss(&minus, &views, &targets)) / (2.0 * EPS);
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
                entries += 1;
            }
        }
        configs += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    let detail = format!("{configs} configs, {entries} entries, max rel err {worst:.2e}, {secs:.1} s");
    check(worst < 1e-4 && secs < 30.0, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 2

/// Textbook scalar Adam.
struct ScalarAdam {
    t: f64,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    fn step(&mut self, theta: f64, g: f64, alpha: f64) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        self.t += 1.0;
        self.m = b1 * self.m + (1.0 - b1) * g;
        self.v = b2 * self.v + (1.0 - b2) * g * g;
        let m_hat = self.m / (1.0 - b1.powf(self.t));
        let v_hat = self.v / (1.0 - b2.powf(self.t));
        theta - alpha * m_hat / (v_hat.sqrt() + eps)
    }
}

fn optimizer_oracle() -> Outcome {
    type Grad = fn(&[f64]) -> Vec<f64>;
    let functions: [(&str, Vec<f64>, Grad); 3] = [
        ("(x-3)^2", vec![-2.0], |x| vec![2.0 * (x[0] - 3.0)]),
        ("ill-conditioned quadratic", vec![1.0, -1.0, 0.5], |x| {
            vec![2.0 * 100.0 * (x[0] - 1.0), 2.0 * 1.0 * (x[1] + 2.0), 2.0 * 0.01 * x[2]]
        }),
        ("softplus + ridge", vec![3.0, -4.0], |x| {
            x.iter().map(|&v| 1.0 / (1.0 + (-v).exp()) + 0.1 * v).collect()
        }),
    ];
    let alpha = 0.01;
    let mut worst = 0.0f64;
    for (name, start, grad) in functions {
        let mut ours = start.clone();
        let mut state = AdamState::new(&[ours.len()], alpha);
        let mut refs: Vec<ScalarAdam> = start.iter().map(|_| ScalarAdam { t: 0.0, m: 0.0, v: 0.0 }).collect();
        let mut theirs = start.clone();
        for step in 1..=1000 {
            let g = grad(&ours);
            adam_step(&mut state, &mut [&mut ours], &[&g]).unwrap();
            let g_ref = grad(&theirs);
            for (j, r) in refs.iter_mut().enumerate() {
                theirs[j] = r.step(theirs[j], g_ref[j], alpha);
            }
            for (a, b) in ours.iter().zip(&theirs) {
                let d = (a - b).abs();
                worst = worst.max(d);
                check(d <= 1e-12, || format!("{name}: step {step} differs by {d:e}"))?;
            }
        }
    }
    Ok(format!("3 functions x 1000 steps, max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------- 3

fn overfit_sanity() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let series: Vec<Arc<FeatureSeries>> = (0..32)
        .map(|v| {
            let features = Array2::from_shape_fn((25, 21), |_| rng.random_range(-1.0..1.0));
            let mut ttlcl = vec![7.0; 25];
            let mut ttlcr = vec![7.0; 25];
            ttlcl[24] = rng.random_range(0.0..7.0);
            ttlcr[24] = rng.random_range(0.0..7.0);
            Arc::new(FeatureSeries { recording: 0, vehicle_id: v, first_frame: 0, features, ttlcl, ttlcr })
        })
        .collect();
    let set = SampleSet::from_series(series, 25).unwrap();
    let set = apply_scaler(&fit_scaler(&set).unwrap(), &set).unwrap();
    let hp = Hyperparams { n_lstm: 32, n_dense: 16, t_h: 1.0, learning_rate: 3e-3 };
    let model = ModelParams::init(hp, 21, FeatureScaler::identity(21), 3).unwrap();
    let cfg = TrainConfig { batch_size: 8, max_epochs: 200, early_stop_patience: 200, seed: 3, learning_rate: 3e-3, clip_norm: None };
    let (model, trace) = train(model, &set, &set, &cfg).unwrap();
    let mse = evaluate_mse(&model, &set).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let detail = format!("train MSE {mse:.2e} after {} epochs (best {}), {secs:.1} s", trace.epochs.len(), trace.best_epoch);
    check(mse < 1e-3 && secs < 120.0, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 4

fn ttlc_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_ttlc"))
}

fn run(args: &[&str]) -> Result<String, String> {
    let out = Command::new(ttlc_bin()).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("ttlc {} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

/// Mean of the non-empty bin RMSEs whose bins lie inside `[lo, hi]`.
fn curve_mean(bins: &serde_json::Value, lo: f64, hi: f64) -> Option<f64> {
    let v: Vec<f64> = bins["bins"]
        .as_array()?
        .iter()
        .filter(|b| b["lo"].as_f64().unwrap() >= lo - 1e-9 && b["hi"].as_f64().unwrap() <= hi + 1e-9)
        .filter_map(|b| b["rmse"].as_f64())
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn end_to_end() -> Outcome {
    let started = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let state = dir.join("state");
    run(&["generate", "--seed", "42", "--out", p(dir), "--name", "scene"])?;
    run(&["prepare", "--state", p(&state), "--seed", "42", "--t-h", "3", p(&dir.join("scene.csv"))])?;
    run(&[
        "train", "--state", p(&state), "--seed", "42", "--n-lstm", "64", "--n-dense", "32", "--t-h", "3",
        "--learning-rate", "0.0003", "--max-epochs", "60",
    ])?;
    run(&["evaluate", "--state", p(&state), "--seed", "42", "--undersampled"])?;
    let report = read_json(&state.join("eval_undersampled/report.json"))?;
    let model_rmse = report["rmse"]["values"][1][0].as_f64().ok_or("missing TTLCL/LCL entry")?;
    let base_rmse = report["baseline_rmse"]["values"][1][0].as_f64().ok_or("missing baseline entry")?;
    let gain = 1.0 - model_rmse / base_rmse;
    let mut detail = format!("TTLCL RMSE on LCL {model_rmse:.3} s vs baseline {base_rmse:.3} s ({:.1} % better)", gain * 100.0);
    let mut ok = gain >= 0.5;
    for (name, key) in [("left", "bins_left"), ("right", "bins_right")] {
        let near = curve_mean(&report[key], 0.0, 2.0);
        let far = curve_mean(&report[key], 3.0, 5.0);
        match (near, far) {
            (Some(a), Some(b)) => {
                detail += &format!("; {name} bins [0,2] {a:.3} s vs [3,5] {b:.3} s");
                ok &= a < b;
            }
            _ => {
                detail += &format!("; {name} curve has empty ranges");
                ok = false;
            }
        }
    }
    let minutes = started.elapsed().as_secs_f64() / 60.0;
    detail += &format!("; {minutes:.1} min");
    ok &= minutes < 30.0;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 5

fn reference_maneuver(l: f64, r: f64) -> Maneuver {
    let lcl = l <= 5.0 && l <= r;
    let lcr = r <= 5.0 && r < l;
    let flw = !lcl && !lcr;
    match (lcl, lcr, flw) {
        (true, false, false) => Maneuver::Lcl,
        (false, true, false) => Maneuver::Lcr,
        (false, false, true) => Maneuver::Flw,
        _ => panic!("branches overlap at ({l}, {r})"),
    }
}

fn maneuver_mapping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs: Vec<(f64, f64)> = (0..100_000)
        .map(|_| (rng.random_range(0.0..8.0), rng.random_range(0.0..8.0)))
        .collect();
    let specials = [0.0, 4.999999999, 5.0, 5.000000001, 7.0, 2.5];
    for &a in &specials {
        for &b in &specials {
            pairs.push((a, b));
        }
        pairs.push((a, a));
    }
    let mut counts = [0usize; 3];
    for &(l, r) in &pairs {
        let expected = reference_maneuver(l, r);
        let got = classify_from_ttlc(l, r);
        check(got == expected, || format!("({l}, {r}): {got} != {expected}"))?;
        counts[got.index()] += 1;
    }
    check(classify_from_ttlc(4.0, 4.0) == Maneuver::Lcl && classify_from_ttlc(5.0, 5.0) == Maneuver::Lcl, || {
        "tie does not go to LCL".into()
    })?;
    Ok(format!("{} pairs agree (LCL {} FLW {} LCR {})", pairs.len(), counts[0], counts[1], counts[2]))
}

// ---------------------------------------------------------------- 6

fn metric_oracles() -> Outcome {
    // RMSE table: ten (truth, prediction) pairs; the last one is dual-label.
    let truth = [
        [1.0, 7.0], [2.0, 7.0], [6.5, 7.0], [3.0, 7.0], [7.0, 7.0],
        [7.0, 7.0], [7.0, 7.0], [7.0, 0.5], [7.0, 4.0], [2.5, 3.5],
    ];
    let pred = [
        [1.5, 7.0], [1.0, 6.0], [6.5, 7.0], [5.0, 7.0], [7.0, 6.0],
        [6.0, 7.0], [7.0, 7.0], [7.0, 1.0], [7.0, 2.0], [3.0, 3.0],
    ];
    let t = rmse_table(&pred, &truth).map_err(|e| e.to_string())?;
    check(t.counts == [5, 3, 3, 10], || format!("counts {:?}", t.counts))?;
    let expected = [
        [(6.75f64 / 10.0).sqrt(), (2.0f64 / 6.0).sqrt(), (4.75f64 / 6.0).sqrt(), (13.0f64 / 20.0).sqrt()],
        [(5.5f64 / 5.0).sqrt(), (1.0f64 / 3.0).sqrt(), (0.25f64 / 3.0).sqrt(), (6.5f64 / 10.0).sqrt()],
        [(1.25f64 / 5.0).sqrt(), (1.0f64 / 3.0).sqrt(), (4.5f64 / 3.0).sqrt(), (6.5f64 / 10.0).sqrt()],
    ];
    for (r, row) in expected.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            close_opt(t.get(r, c), v, &format!("rmse[{r}][{c}]"))?;
        }
    }

    // Classification: confusion [[2,1,0],[1,3,0],[0,1,2]].
    use Maneuver::{Flw as F, Lcl as L, Lcr as R};
    let actual = [L, L, L, F, F, F, F, R, R, R];
    let predicted = [L, L, F, F, F, L, F, R, R, F];
    let c = class_report(&predicted, &actual).map_err(|e| e.to_string())?;
    check(c.confusion == [[2, 1, 0], [1, 3, 0], [0, 1, 2]], || format!("confusion {:?}", c.confusion))?;
    let prf = [(2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0), (3.0 / 5.0, 3.0 / 4.0, 2.0 / 3.0), (1.0, 2.0 / 3.0, 4.0 / 5.0)];
    for (k, &(pr, re, f1)) in prf.iter().enumerate() {
        close_opt(c.classes[k].precision, pr, &format!("precision[{k}]"))?;
        close_opt(c.classes[k].recall, re, &format!("recall[{k}]"))?;
        close_opt(c.classes[k].f1, f1, &format!("f1[{k}]"))?;
    }
    close_opt(c.mean_precision, (2.0 / 3.0 + 3.0 / 5.0 + 1.0) / 3.0, "mean precision")?;
    close_opt(c.mean_recall, (2.0 / 3.0 + 3.0 / 4.0 + 2.0 / 3.0) / 3.0, "mean recall")?;
    close_opt(c.mean_f1, (2.0 / 3.0 + 2.0 / 3.0 + 4.0 / 5.0) / 3.0, "mean f1")?;

    // Bins: two samples near 0 s, three near 1 s, five near 3 s with one outlier.
    let truth = [
        [0.1, 7.0], [0.2, 7.0], [1.1, 7.0], [1.2, 7.0], [1.0, 7.0],
        [3.0, 7.0], [3.125, 7.0], [3.0625, 7.0], [3.1875, 7.0], [3.1875, 7.0],
    ];
    let pred = [
        [0.2, 5.0], [0.5, 5.0], [2.1, 5.0], [0.2, 5.0], [4.0, 5.0],
        [3.5, 5.0], [2.625, 5.0], [3.5625, 5.0], [3.6875, 5.0], [6.1875, 5.0],
    ];
    let s = ttlc_bin_stats(&pred, &truth, 0.25, Channel::Left).map_err(|e| e.to_string())?;
    check(s.bins.len() == 28 && s.total_count() == 10, || format!("{} bins, {} samples", s.bins.len(), s.total_count()))?;
    // (bin, count, rmse, median, q1, q3, whisker_lo, whisker_hi, outliers)
    let expected = [
        (0, 2, 0.05f64.sqrt(), 0.2, 0.15, 0.25, 0.1, 0.3, 0),
        (4, 3, (11.0f64 / 3.0).sqrt(), 1.0, 1.0, 2.0, 1.0, 3.0, 0),
        (12, 5, 2.0f64.sqrt(), 0.5, 0.5, 0.5, 0.5, 0.5, 1),
    ];
    for (i, n, rmse, med, q1, q3, wl, wh, out) in expected {
        let b = &s.bins[i];
        check(b.count == n && b.outliers == out, || format!("bin {i}: count {} outliers {}", b.count, b.outliers))?;
        close_opt(b.rmse, rmse, &format!("bin {i} rmse"))?;
        close_opt(b.median, med, &format!("bin {i} median"))?;
        close_opt(b.q1, q1, &format!("bin {i} q1"))?;
        close_opt(b.q3, q3, &format!("bin {i} q3"))?;
        close_opt(b.whisker_lo, wl, &format!("bin {i} whisker_lo"))?;
        close_opt(b.whisker_hi, wh, &format!("bin {i} whisker_hi"))?;
    }
    let right = ttlc_bin_stats(&pred, &truth, 0.25, Channel::Right).map_err(|e| e.to_string())?;
    check(right.total_count() == 0, || "right channel should be empty".into())?;
    Ok("RMSE table, class report and bin statistics match to 1e-12".into())
}

// ---------------------------------------------------------------- 7

fn random_set(rng: &mut ChaCha8Rng, canary: Option<(&[u32], f64)>) -> SampleSet {
    let vehicles = rng.random_range(5u32..40);
    let series = (0..vehicles)
        .map(|v| {
            let len = rng.random_range(3..30);
            let mut features = Array2::from_shape_fn((len, 3), |_| rng.random_range(-1.0..1.0));
            if let Some((marked, value)) = canary {
                if marked.contains(&v) {
                    features.column_mut(0).fill(value);
                }
            }
            let lc: Vec<f64> = (0..len).map(|t| ((len - t) as f64 * 0.3).min(7.0)).collect();
            let (ttlcl, ttlcr) = match v % 4 {
                0 => (lc, vec![7.0; len]),
                1 => (vec![7.0; len], lc),
                _ => (vec![7.0; len], vec![7.0; len]),
            };
            Arc::new(FeatureSeries { recording: v % 2, vehicle_id: v, first_frame: 0, features, ttlcl, ttlcr })
        })
        .collect();
    SampleSet::from_series(series, 2).unwrap()
}

fn pipeline_hygiene() -> Outcome {
    // Fold partition on 100 random datasets.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..100 {
        let set = random_set(&mut rng, None);
        let k = rng.random_range(2..=6usize).min(set.num_vehicles());
        let folds = split_folds(&set, k, rng.random()).map_err(|e| e.to_string())?;
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        check(all == (0..set.len()).collect::<Vec<_>>(), || format!("trial {trial}: folds do not partition"))?;
        let mut owner: BTreeMap<VehicleKey, usize> = BTreeMap::new();
        for (f, idx) in folds.iter().enumerate() {
            for &i in idx {
                let prev = owner.insert(set.samples()[i].key(), f);
                check(prev.is_none_or(|p| p == f), || format!("trial {trial}: vehicle split across folds"))?;
            }
        }
        let counts: Vec<usize> = folds.iter().map(|f| set.subset(f).num_vehicles()).collect();
        let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
        check(spread <= 1, || format!("trial {trial}: fold vehicle counts {counts:?}"))?;

        // Undersampling keeps floor(N/3) lane-following samples and every other one.
        let flw = set.class_counts(7.0)[1];
        let us = undersample_flw(&set, rng.random());
        let c = us.class_counts(7.0);
        let before = set.class_counts(7.0);
        check(c[1] == flw / 3 && c[0] == before[0] && c[2] == before[2], || format!("trial {trial}: {before:?} -> {c:?}"))?;
    }

    // Canary: vehicles of the test fold carry a huge feature value that must
    // not reach the scaler of a model trained without that fold.
    let cfg = FitConfig { batch_size: 16, max_epochs: 2, early_stop_patience: 1, ..Default::default() };
    let hp = Hyperparams { n_lstm: 3, n_dense: 2, t_h: 0.08, learning_rate: 1e-2 };
    let mut scalers = Vec::new();
    let mut clean_rng = ChaCha8Rng::seed_from_u64(70);
    let reference = random_set(&mut clean_rng, None);
    let folds = split_folds(&reference, 5, 71).map_err(|e| e.to_string())?;
    let mut marked: Vec<u32> = folds[1].iter().map(|&i| reference.samples()[i].vehicle_id).collect();
    marked.dedup();
    for value in [1e9, -1e9] {
        let mut r = ChaCha8Rng::seed_from_u64(70);
        let set = random_set(&mut r, Some((&marked, value)));
        let pool = without_fold(&set, &folds, 1).map_err(|e| e.to_string())?;
        let fit = fit_model(&pool, hp, &cfg, 72).map_err(|e| e.to_string())?;
        scalers.push(fit.model.scaler);
    }
    check(scalers[0] == scalers[1], || "scaler depends on test-fold values".into())?;
    check(scalers[0].mean[0].abs() < 10.0, || format!("canary leaked: mean {}", scalers[0].mean[0]))?;
    Ok("100 random datasets partition cleanly, undersampling exact, canary absent from scaler".into())
}

// ---------------------------------------------------------------- 8 and 9

const SMALL_SCENARIO: &str = r#"{"num_vehicles": 60, "duration": 150.0, "lane_change_rate": 6.0}"#;
const SMALL_GRID: &str = r#"{"n_lstm":[6],"n_dense":[3,4],"t_h":[1.0],"learning_rate":[0.003]}"#;

/// Every command of the workflow on a reduced scenario, into `dir`.
fn workflow(dir: &Path) -> Result<PathBuf, String> {
    let cfg = dir.join("scenario.json");
    let grid = dir.join("grid.json");
    std::fs::write(&cfg, SMALL_SCENARIO).map_err(|e| e.to_string())?;
    std::fs::write(&grid, SMALL_GRID).map_err(|e| e.to_string())?;
    let state = dir.join("state");
    let st = p(&state);
    run(&["generate", "--config", p(&cfg), "--seed", "8", "--out", p(dir), "--name", "rec"])?;
    run(&["prepare", "--state", st, "--seed", "8", "--t-h", "1", p(&dir.join("rec.csv"))])?;
    run(&["gridsearch", "--state", st, "--seed", "8", "--grid", p(&grid), "--max-epochs", "2"])?;
    run(&["train", "--state", st, "--seed", "8", "--max-epochs", "4"])?;
    run(&["evaluate", "--state", st, "--seed", "8", "--balanced"])?;
    run(&["evaluate", "--state", st, "--seed", "8", "--undersampled"])?;
    run(&["importance", "--state", st])?;
    Ok(state)
}

/// Files compared byte for byte. Grid results and the training trace carry
/// wall-clock times and are compared without them.
const DETERMINISTIC: [&str; 17] = [
    "../rec.csv",
    "../rec.meta.json",
    "../rec.truth.json",
    "samples.json",
    "grid_summary.json",
    "model.json",
    "importance.csv",
    "eval_balanced/report.json",
    "eval_balanced/rmse_table.csv",
    "eval_balanced/class_report.csv",
    "eval_balanced/ttlc_bins_left.csv",
    "eval_balanced/ttlc_bins_right.csv",
    "eval_balanced/baseline_rmse_table.csv",
    "eval_undersampled/report.json",
    "eval_undersampled/rmse_table.csv",
    "eval_undersampled/class_report.csv",
    "eval_undersampled/ttlc_bins_left.csv",
];

fn without_wall_time(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let wall = headers.iter().position(|h| h == "wall_ms").ok_or("no wall_ms column")?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            Ok(rec.iter().enumerate().filter(|&(i, _)| i != wall).map(|(_, v)| v.to_string()).collect())
        })
        .collect()
}

fn determinism(runs: &[PathBuf; 2]) -> Outcome {
    for name in DETERMINISTIC {
        let a = std::fs::read(runs[0].join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = std::fs::read(runs[1].join(name)).map_err(|e| format!("{name}: {e}"))?;
        check(a == b, || format!("{name} differs between runs"))?;
    }
    for name in ["grid_results.csv", "train_trace.csv"] {
        let a = without_wall_time(&runs[0].join(name))?;
        let b = without_wall_time(&runs[1].join(name))?;
        check(a == b, || format!("{name} differs between runs (ignoring wall_ms)"))?;
    }
    Ok(format!("{} artifacts byte-identical, grid and trace equal apart from wall time", DETERMINISTIC.len()))
}

fn header(path: &Path) -> Result<Vec<String>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect())
}

fn first_column(path: &Path) -> Result<Vec<String>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    r.records().map(|rec| rec.map(|r| r[0].to_string()).map_err(|e| e.to_string())).collect()
}

fn report_schema(state: &Path) -> Outcome {
    check(Grid::default().combinations().len() == 54, || "default grid is not 54 points".into())?;
    let grid_cols = header(&state.join("grid_results.csv"))?;
    check(
        grid_cols[..4] == ["n_lstm", "n_dense", "t_h", "learning_rate"] && grid_cols.contains(&"mean_mse".to_string()),
        || format!("grid columns {grid_cols:?}"),
    )?;
    let summary = read_json(&state.join("grid_summary.json"))?;
    check(summary["best"]["n_lstm"].is_u64(), || "grid summary lacks the winner".into())?;

    for mode in ["eval_balanced", "eval_undersampled"] {
        let dir = state.join(mode);
        let rmse_cols = header(&dir.join("rmse_table.csv"))?;
        check(rmse_cols == ["output", "LCL", "FLW", "LCR", "All"], || format!("{mode} rmse columns {rmse_cols:?}"))?;
        let rows = first_column(&dir.join("rmse_table.csv"))?;
        check(rows == ["overall", "TTLCL", "TTLCR", "count"], || format!("{mode} rmse rows {rows:?}"))?;
        let class_cols = header(&dir.join("class_report.csv"))?;
        check(class_cols == ["class", "precision", "recall", "f1", "support"], || format!("{mode} class columns {class_cols:?}"))?;
        let classes = first_column(&dir.join("class_report.csv"))?;
        check(classes == ["LCL", "FLW", "LCR", "mean"], || format!("{mode} class rows {classes:?}"))?;
        for side in ["left", "right"] {
            let f = dir.join(format!("ttlc_bins_{side}.csv"));
            let cols = header(&f)?;
            let want = ["lo", "hi", "center", "count", "rmse", "median", "q1", "q3", "whisker_lo", "whisker_hi", "outliers"];
            check(cols == want, || format!("{mode} {side} bin columns {cols:?}"))?;
            check(first_column(&f)?.len() == 28, || format!("{mode} {side}: expected 28 bins"))?;
        }
        let report = read_json(&dir.join("report.json"))?;
        for key in ["mode", "horizon", "class_counts", "rmse", "baseline_rmse", "bins_left", "bins_right", "classification"] {
            check(!report[key].is_null(), || format!("{mode} report lacks {key}"))?;
        }
        if mode == "eval_balanced" {
            let c = &report["class_counts"];
            check(c[0] == c[1] && c[1] == c[2], || format!("balanced counts {c}"))?;
        }
    }
    let imp = first_column(&state.join("importance.csv"))?;
    check(imp.len() == 21, || format!("{} importance rows", imp.len()))?;
    Ok("grid, RMSE table, bin curves, class reports and importance have the expected shape".into())
}

// ---------------------------------------------------------------- driver

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(e) => Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let mut failures = 0;
    let mut report = |n: u32, name: &str, took: Duration, outcome: Outcome| {
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n} {name}: {status} ({detail}) [{:.1} s]", took.as_secs_f64());
    };
    let criteria: [(u32, &str, fn() -> Outcome); 6] = [
        (1, "gradient correctness", gradient_correctness),
        (2, "optimizer oracle", optimizer_oracle),
        (3, "overfit sanity", overfit_sanity),
        (5, "maneuver mapping", maneuver_mapping),
        (6, "metric oracles", metric_oracles),
        (7, "pipeline hygiene", pipeline_hygiene),
    ];
    for (n, name, f) in criteria {
        if selected(n) {
            let t = Instant::now();
            let outcome = guarded(f);
            report(n, name, t.elapsed(), outcome);
        }
    }
    if selected(8) || selected(9) {
        let t = Instant::now();
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let runs = guarded(|| {
            let a = workflow(dirs[0].path())?;
            let b = workflow(dirs[1].path())?;
            Ok(format!("{}\n{}", a.display(), b.display()))
        });
        let states = runs.map(|s| {
            let mut it = s.lines().map(PathBuf::from);
            [it.next().unwrap(), it.next().unwrap()]
        });
        let took = t.elapsed();
        if selected(8) {
            report(8, "determinism", took, states.clone().and_then(|s| guarded(|| determinism(&s))));
        }
        if selected(9) {
            let t = Instant::now();
            report(9, "report schema", t.elapsed(), states.and_then(|s| guarded(|| report_schema(&s[0]))));
        }
    }
    if selected(4) {
        let t = Instant::now();
        let outcome = guarded(end_to_end);
        report(4, "end-to-end synthetic run", t.elapsed(), outcome);
    }
    if failures > 0 {
        println!("acceptance: {failures} criterion(s) failed");
        std::process::exit(1);
    }
}
