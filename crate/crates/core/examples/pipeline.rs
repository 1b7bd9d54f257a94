//! Config-driven pipeline on a CSV file: split, train, predict, evaluate.
//! Mirrors what the `adarnn` binary does, through the library.
//!
//! Run with: cargo run --release --example pipeline

use adarnn::cli::{characterize, load_prepared, run_predict, run_train, ModelBundle, Part};
use adarnn::config::RunConfig;
use adarnn::dataio::{synth_tcs_generate, SynthConfig};
use adarnn::metrics::regression_metrics;

fn main() -> adarnn::Result<()> {
    let dir = std::env::temp_dir().join("adarnn-pipeline-example");
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("series.csv");
    let synth = synth_tcs_generate(&SynthConfig { regimes: 2, steps_per_regime: 600, p: 3, seed: 5, delta: 3.0 })?;
    synth.table().write_csv(std::fs::File::create(&csv)?)?;

    let cfg = RunConfig::from_json(&format!(
        r#"{{
          "data": {{"path": {csv:?}, "target_col": "y", "features": ["x0", "x1", "x2"], "window": 12}},
          "tdc": {{"k": "auto", "k_candidates": [2, 3, 5]}},
          "train": {{"hidden": 16, "epochs": 8, "pretrain_epochs": 3, "select_by_valid": true}}
        }}"#
    ))?;
    cfg.validate()?;

    let prep = load_prepared(&cfg)?;
    let split = characterize(&cfg, &prep)?;
    println!("split: {}", split.to_json());

    let run = run_train(&cfg, Some(split))?;
    for line in run.history_jsonl.lines() {
        println!("{}", &line[..line.len().min(120)]);
    }
    let model_path = dir.join("model.adarnn.json");
    std::fs::write(&model_path, &run.model_json)?;

    let bundle = ModelBundle::load(&model_path)?;
    let preds = run_predict(&bundle, &csv, Part::Test)?;
    let truth: Vec<f64> = preds.truth.iter().map(|t| t[0]).collect();
    let m = regression_metrics(preds.values.data(), &truth)?;
    println!("{} test segments: rmse {:.4} mae {:.4}", preds.origins.len(), m.rmse, m.mae);
    Ok(())
}
