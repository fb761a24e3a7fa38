//! Subcommand implementations.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use rotortemp::artifact::ModelDocument;
use rotortemp::data::save_dataset;
use rotortemp::eval::{compute_metrics, learn_curve, make_fold_plan, pca_project, cross_validate};
use rotortemp::features::{build_features, MeasuredSignals, Scaler};
use rotortemp::hpo::spaces::{model_space, spans_from_point, spec_from_point};
use rotortemp::hpo::{optimize_with_observer, HpoOptions, ParamValue, Point, Trial, TrialStatus};
use rotortemp::model::ModelKind;
use rotortemp::stream::StreamPredictor;

use crate::config::ExperimentConfig;
use crate::pipeline::{
    build_document, fit_best_of_seeds, load_data, metrics_doc, prepare_features, write_eval_csvs,
    MetricsDoc,
};

pub fn out_dir(config: &ExperimentConfig, cli_out: Option<&Path>) -> PathBuf {
    cli_out
        .map(|p| p.to_path_buf())
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn model_dir(base: &Path, kind: ModelKind) -> Result<PathBuf> {
    let dir = base.join(kind.name());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn print_metrics(doc: &MetricsDoc) {
    println!(
        "{}: mse {:.4} °C²  mae {:.4} °C  r2 {}  linf {:.4} °C  params {}",
        doc.model,
        doc.mse,
        doc.mae,
        doc.r2.map_or("n/a".into(), |v| format!("{v:.4}")),
        doc.linf,
        doc.param_count
    );
}

/// `synth`: generate a synthetic dataset CSV.
pub fn cmd_synth(config: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let synth = config
        .synthetic
        .clone()
        .unwrap_or_default();
    let ds = rotortemp::data::generate_synthetic(&synth.to_library(), config.seed)?;
    let base = out_dir(config, out);
    std::fs::create_dir_all(&base)?;
    let path = base.join("synthetic.csv");
    save_dataset(&ds, &path)?;
    println!(
        "wrote {} samples over {} profiles to {}",
        ds.len(),
        ds.profiles().len(),
        path.display()
    );
    println!("profiles: {}", ds.profile_ids().join(", "));
    Ok(())
}

/// `train`: fit the configured model, keep the best seed for stochastic
/// families, write artifact + metrics + plot CSVs.
pub fn cmd_train(config: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let spans = config.span_set()?;
    let spec = config.model_spec()?;
    let data = load_data(config)?;
    let prepared = prepare_features(&data.train, &data.test, spans)?;
    let outcome = fit_best_of_seeds(&spec, &prepared, config.seed, config.repetitions)?;

    let base = out_dir(config, out);
    let dir = model_dir(&base, outcome.model.kind())?;
    let doc = build_document(config, spans, &prepared, &outcome)?;
    doc.save(dir.join("model.json"))?;
    let metrics = metrics_doc(config, spans, &outcome, data.train.len(), data.test.len());
    metrics.save(&dir.join("metrics.json"))?;
    let y_hat = outcome.model.predict(&prepared.x_test)?;
    write_eval_csvs(&dir, &prepared.test_features, &y_hat)?;
    // Network training history (epoch, lr, batch size, losses) for the
    // winning seed.
    if let rotortemp::model::ModelSpec::Mlp {
        config: mlp_config,
        schedule,
    } = &spec
    {
        let mut cfg = *mlp_config;
        cfg.seed = outcome.seed;
        let (_, report) = rotortemp::mlp::train_mlp(
            &cfg,
            schedule,
            &prepared.x_train,
            &prepared.y_train,
            &prepared.train_profiles,
        )?;
        report.to_csv(dir.join("history.csv"))?;
    }
    print_metrics(&metrics);
    println!("artifact: {}", dir.join("model.json").display());
    Ok(())
}

/// `eval`: score an existing artifact on the configured test profiles.
pub fn cmd_eval(config: &ExperimentConfig, artifact: &Path, out: Option<&Path>) -> Result<()> {
    let doc = ModelDocument::load(artifact)?;
    let model = rotortemp::artifact::unpack_model::<f64>(doc.meta.model_type, &doc.params)?;
    let scaler: Scaler<f64> = doc.meta.scaler.to_scaler();
    let data = load_data(config)?;
    let test_features = build_features(&data.test, doc.meta.spans)?;
    let x_test = scaler.transform(&test_features.x);
    let y_hat = model.predict(&x_test)?;
    let metrics = compute_metrics(&test_features.y, &y_hat)?;

    let base = out_dir(config, out);
    let dir = model_dir(&base, doc.meta.model_type)?;
    let metrics_json = MetricsDoc {
        model: doc.meta.model_type.name().to_string(),
        mse: metrics.mse,
        mae: metrics.mae,
        r2: metrics.r2,
        linf: metrics.linf,
        param_count: doc.meta.param_count,
        spans: doc.meta.spans.spans(),
        seeds: vec![doc.meta.seed],
        best_seed: doc.meta.seed,
        n_train: data.train.len(),
        n_test: data.test.len(),
        config_hash: doc.meta.config_hash.clone(),
    };
    metrics_json.save(&dir.join("metrics.json"))?;
    write_eval_csvs(&dir, &test_features, &y_hat)?;
    print_metrics(&metrics_json);
    Ok(())
}

fn named_point(space: &rotortemp::hpo::HpoSpace, point: &Point) -> serde_json::Map<String, serde_json::Value> {
    let mut map = serde_json::Map::new();
    for (dim, value) in space.dims.iter().zip(point.iter()) {
        let v = match value {
            ParamValue::Int(i) => serde_json::json!(i),
            ParamValue::Real(r) => serde_json::json!(r),
            ParamValue::Cat(c) => serde_json::json!(c),
        };
        map.insert(dim.name.clone(), v);
    }
    map
}

/// Best-point document produced by `tune`; its `hyperparameters` block can
/// be pasted straight into a train config.
#[derive(serde::Serialize, serde::Deserialize)]
struct BestPointDoc {
    model: String,
    cv_mean_mse: f64,
    trials: usize,
    spans: [usize; 4],
    hyperparameters: serde_json::Value,
}

/// `tune`: Bayesian search of the model's space against the CV mean MSE on
/// the training split. History persists as line-delimited JSON and resumes.
pub fn cmd_tune(config: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let kind = config.model_kind()?;
    let data = load_data(config)?;
    let plan = make_fold_plan(&data.train, config.cv_folds, config.seed)?;
    let space = model_space(kind);
    let ctx = config.spec_context();

    let base = out_dir(config, out);
    let dir = model_dir(&base, kind)?;
    let history_path = dir.join("tune_history.jsonl");
    let prior = load_history(&history_path)?;
    if !prior.is_empty() {
        println!("resuming from {} recorded trials", prior.len());
    }
    let mut history_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&history_path)?;

    let train = &data.train;
    let seed = config.seed;
    let objective = |point: &Point| -> rotortemp::Result<f64> {
        let spans = spans_from_point(&space, point)?;
        let spec = spec_from_point::<f64>(kind, &space, point, &ctx)?;
        let cv = cross_validate(&spec, train, spans, &plan, seed)?;
        Ok(cv.mean_mse)
    };

    let opts = HpoOptions {
        n_init: config.hpo.n_init,
        n_iter: config.hpo.n_iter,
        seed: config.seed,
        ..Default::default()
    };
    let result = optimize_with_observer(objective, &space, &opts, prior, |trial| {
        if let Ok(line) = serde_json::to_string(trial) {
            let _ = writeln!(history_file, "{line}");
        }
        match (trial.status, trial.value) {
            (TrialStatus::Ok, Some(v)) => {
                println!("trial {:>4}: cv mean mse {v:.5}", trial.index)
            }
            _ => println!("trial {:>4}: failed", trial.index),
        }
    })?;

    let spans = spans_from_point(&space, &result.best.point)?;
    let best = BestPointDoc {
        model: kind.name().to_string(),
        cv_mean_mse: result.best.value.unwrap_or(f64::NAN),
        trials: result.history.len(),
        spans: spans.spans(),
        hyperparameters: serde_json::Value::Object(named_point(&space, &result.best.point)),
    };
    std::fs::write(dir.join("best.json"), serde_json::to_string_pretty(&best)?)?;
    println!(
        "best cv mean mse {:.5} with spans {:?} after {} trials",
        best.cv_mean_mse, best.spans, best.trials
    );
    println!("best point: {}", serde_json::to_string(&best.hyperparameters)?);
    Ok(())
}

fn load_history(path: &Path) -> Result<Vec<Trial>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    let mut trials = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let trial: Trial =
            serde_json::from_str(line).with_context(|| format!("history line {}", i + 1))?;
        trials.push(trial);
    }
    Ok(trials)
}

/// `learncurve`: test MSE against growing training-set fractions.
pub fn cmd_learncurve(config: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let spans = config.span_set()?;
    let spec = config.model_spec()?;
    let data = load_data(config)?;
    let fractions: Vec<f64> = config.learn_fractions.clone();
    let points = learn_curve(
        &spec,
        &data.train,
        &data.test,
        spans,
        &fractions,
        config.learn_repeats,
        config.seed,
    )?;
    let base = out_dir(config, out);
    let dir = model_dir(&base, spec.kind())?;
    let path = dir.join("learn_curve.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "fraction,mean_mse,std_mse,repeats")?;
    for p in &points {
        writeln!(w, "{},{},{},{}", p.fraction, p.mean_mse, p.std_mse, p.repeats_used)?;
        println!(
            "fraction {:.2}: mean mse {:.4} ± {:.4} ({} repeats)",
            p.fraction, p.mean_mse, p.std_mse, p.repeats_used
        );
    }
    if points.len() < fractions.len() {
        println!(
            "note: {} fraction(s) skipped (too small to hold a whole profile)",
            fractions.len() - points.len()
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// `pca`: project the standardized feature matrix onto two components.
pub fn cmd_pca(config: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let spans = config.span_set()?;
    let data = load_data(config)?;
    let features = build_features(&data.full, spans)?;
    let scaler = Scaler::fit(&features.x, &features.names)?;
    let x = scaler.transform(&features.x);
    let pca = pca_project(&x, 2)?;

    let base = out_dir(config, out);
    std::fs::create_dir_all(&base)?;
    let path = base.join("pca.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(w, "pc1,pc2,pm,profile_id")?;
    for span in &features.profiles {
        for r in span.start..span.end {
            writeln!(
                w,
                "{},{},{},{}",
                pca.projected[(r, 0)],
                pca.projected[(r, 1)],
                features.y[r],
                span.id
            )?;
        }
    }
    let meta = serde_json::json!({
        "explained_variance": pca.explained_variance,
        "n_samples": features.y.len(),
        "spans": spans.spans(),
    });
    std::fs::write(base.join("pca_meta.json"), serde_json::to_string_pretty(&meta)?)?;
    println!(
        "explained variance: pc1 {:.3}, pc2 {:.3}; wrote {}",
        pca.explained_variance[0],
        pca.explained_variance[1],
        path.display()
    );
    Ok(())
}

/// `infer`: constant-memory streaming inference over stdin CSV.
///
/// Input: the dataset schema minus `pm` (header optional; headerless input
/// assumes canonical column order). A `profile_id` column resets filter
/// state whenever its value changes. Output lines: `timestamp_index,pm_hat`.
pub fn cmd_infer(artifact: &Path) -> Result<()> {
    let doc = ModelDocument::load(artifact)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    run_infer_stream(&doc, stdin.lock(), stdout.lock(), &mut std::io::stderr())
}

/// Canonical streaming input order when no header is present.
const STREAM_COLUMNS: [&str; 7] = [
    "ambient",
    "coolant",
    "u_d",
    "u_q",
    "motor_speed",
    "i_d",
    "i_q",
];

pub fn run_infer_stream<R: BufRead, W: Write, E: Write>(
    doc: &ModelDocument,
    input: R,
    mut output: W,
    errors: &mut E,
) -> Result<()> {
    let mut predictor = StreamPredictor::<f64>::from_document(doc)?;
    let mut column_map: Option<Vec<usize>> = None; // positions of STREAM_COLUMNS
    let mut profile_col: Option<usize> = None;
    let mut current_profile: Option<String> = None;
    let mut index: u64 = 0;

    for (line_no, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();

        if line_no == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            // Header row: resolve columns by name.
            let mut map = Vec::with_capacity(STREAM_COLUMNS.len());
            for name in STREAM_COLUMNS {
                match fields.iter().position(|f| *f == name) {
                    Some(pos) => map.push(pos),
                    None => bail!("streaming header is missing column `{name}`"),
                }
            }
            profile_col = fields.iter().position(|f| *f == "profile_id");
            column_map = Some(map);
            continue;
        }

        let positions: Vec<usize> = match &column_map {
            Some(map) => map.clone(),
            None => (0..STREAM_COLUMNS.len()).collect(),
        };
        let mut values = [0.0f64; 7];
        let mut parse_error = None;
        for (slot, &pos) in positions.iter().enumerate() {
            match fields.get(pos).map(|f| f.parse::<f64>()) {
                Some(Ok(v)) if v.is_finite() => values[slot] = v,
                _ => {
                    parse_error = Some(format!(
                        "column `{}` unreadable",
                        STREAM_COLUMNS[slot]
                    ));
                    break;
                }
            }
        }
        if let Some(msg) = parse_error {
            writeln!(errors, "error,{index},{msg}")?;
            index += 1;
            continue;
        }
        if let Some(pc) = profile_col {
            let profile = fields.get(pc).unwrap_or(&"").to_string();
            if current_profile.as_deref() != Some(profile.as_str()) {
                predictor.reset();
                current_profile = Some(profile);
            }
        }
        let signals = MeasuredSignals {
            ambient: values[0],
            coolant: values[1],
            u_d: values[2],
            u_q: values[3],
            motor_speed: values[4],
            i_d: values[5],
            i_q: values[6],
        };
        let pm_hat = predictor.push(&signals)?;
        writeln!(output, "{index},{pm_hat}")?;
        index += 1;
    }
    output.flush()?;
    Ok(())
}

/// `report`: collate per-model metrics into the benchmark table.
pub fn cmd_report(results_dir: &Path) -> Result<()> {
    let mut rows: Vec<MetricsDoc> = Vec::new();
    let mut missing: Vec<String> = Vec::new();
    for kind in ModelKind::ALL {
        let path = results_dir.join(kind.name()).join("metrics.json");
        if path.exists() {
            rows.push(MetricsDoc::load(&path)?);
        } else {
            missing.push(kind.name().to_string());
        }
    }
    if rows.is_empty() {
        bail!("no metrics.json found under {}", results_dir.display());
    }
    // Worst MSE first, matching the benchmark table ordering.
    rows.sort_by(|a, b| b.mse.partial_cmp(&a.mse).unwrap());

    let mut table = String::new();
    table.push_str("| Model | MSE (°C²) | MAE (°C) | R² | ℓ∞ (°C) | Model size |\n");
    table.push_str("|---|---|---|---|---|---|\n");
    for row in &rows {
        table.push_str(&format!(
            "| {} | {:.2} | {:.2} | {} | {:.2} | {} |\n",
            row.model,
            row.mse,
            row.mae,
            row.r2.map_or("n/a".into(), |v| format!("{v:.2}")),
            row.linf,
            human_count(row.param_count)
        ));
    }
    std::fs::write(results_dir.join("benchmark.md"), &table)?;
    print!("{table}");
    if !missing.is_empty() {
        println!("missing runs: {}", missing.join(", "));
    }
    println!("wrote {}", results_dir.join("benchmark.md").display());
    Ok(())
}

fn human_count(n: usize) -> String {
    if n >= 1_000_000 {
        format!("{:.1}M", n as f64 / 1e6)
    } else if n >= 1_000 {
        format!("{:.1}k", n as f64 / 1e3)
    } else {
        n.to_string()
    }
}
