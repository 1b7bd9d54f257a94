//! AdaRNN against a plain GRU on a synthetic series with shifting regimes.
//!
//! Run with: cargo run --release --example train_synthetic -- [seed] [epochs]

use adarnn::dataio::{feature_names, prepare, synth_tcs_generate, Dataset, SynthConfig, WindowSpec};
use adarnn::distances::DistanceKind;
use adarnn::metrics::regression_metrics;
use adarnn::seqmodel::{predict, ModelParams};
use adarnn::tdc::{select_split, DEFAULT_K_CANDIDATES};
use adarnn::tdm::{task_for, train, TrainConfig};

fn test_rmse(params: &ModelParams, d: &Dataset) -> adarnn::Result<f64> {
    let segs: Vec<_> = d.segments.iter().collect();
    let out = predict(params, &segs)?;
    let truth: Vec<f64> = d.targets.iter().map(|t| t[0]).collect();
    Ok(regression_metrics(out.data(), &truth)?.rmse)
}

fn main() -> adarnn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30);

    let synth = synth_tcs_generate(&SynthConfig { seed, ..SynthConfig::default() })?;
    let spec = WindowSpec { features: feature_names(4), target: "y".into(), window: 16, horizon: 1, stride: 1 };
    let prep = prepare(synth.table(), &spec, [0.6, 0.2, 0.2], false)?;

    let train_x = prep.table.rows(prep.train_rows.start, prep.train_rows.end).dense(&spec.features)?;
    let split = select_split(&train_x, 10, &DEFAULT_K_CANDIDATES, &DistanceKind::mmd())?.split;
    println!("periods: K = {} boundaries {:?}", split.k, split.boundaries);

    let cfg = TrainConfig { seed, epochs, ..TrainConfig::default() };
    let task = task_for(&prep.train, None);
    let ada = train(&prep.train, Some(&split), task, &cfg, Some(&prep.valid), &mut |r| {
        println!("epoch {:>2}  pred {:.4}  match {:.4}  dist {:.4}", r.epoch, r.pred_loss, r.match_loss, r.dist_mean);
        Ok(())
    })?;
    let plain = TrainConfig { lambda: 0.0, ..cfg.clone() };
    let gru = train(&prep.train, None, task, &plain, Some(&prep.valid), &mut |_| Ok(()))?;

    println!("test rmse  AdaRNN {:.4} (epoch {})  GRU {:.4} (epoch {})",
        test_rmse(&ada.params, &prep.test)?, ada.best_epoch,
        test_rmse(&gru.params, &prep.test)?, gru.best_epoch);
    Ok(())
}
