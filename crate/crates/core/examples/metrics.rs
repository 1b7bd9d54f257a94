//! Regression, classification and information-coefficient metrics.
//!
//! Run with: cargo run --example metrics

use adarnn::metrics::{
    classification_metrics, information_coefficients, ir, regression_metrics, ClassPredictions, GroupedPredictions,
};
use adarnn::numgraph::Matrix;

fn main() -> adarnn::Result<()> {
    let r = regression_metrics(&[0.0, 3.0, 4.0], &[0.0, 0.0, 0.0])?;
    println!("rmse {:.4}  mae {:.4}", r.rmse, r.mae);

    let scores = Matrix::from_rows(&[
        vec![0.7, 0.2, 0.1],
        vec![0.1, 0.8, 0.1],
        vec![0.2, 0.3, 0.5],
        vec![0.6, 0.3, 0.1],
        vec![0.3, 0.3, 0.4],
    ])?;
    let c = classification_metrics(&ClassPredictions::Scores(scores), &[0, 1, 2, 1, 2], 3)?;
    println!("acc {:.3}  P {:.3}  R {:.3}  F1 {:.3}  AUC {:.3}", c.acc, c.precision, c.recall, c.f1, c.auc.unwrap());

    // Predicted vs realized returns of four assets on three days.
    let mut g = GroupedPredictions::default();
    for (day, pairs) in [
        ("2024-01-02", [(0.02, 0.01), (-0.01, -0.02), (0.00, 0.01), (0.03, 0.02)]),
        ("2024-01-03", [(0.01, -0.01), (0.02, 0.03), (-0.02, -0.01), (0.00, 0.00)]),
        ("2024-01-04", [(-0.01, 0.00), (0.01, 0.02), (0.02, 0.01), (-0.03, -0.02)]),
    ] {
        for (p, a) in pairs {
            g.push(day, p, a);
        }
    }
    let ic = information_coefficients(&g)?;
    println!("IC {:.3}  ICIR {:.3}  RankIC {:.3}  RankICIR {:.3}", ic.ic, ic.icir.unwrap_or(f64::NAN), ic.rank_ic, ic.rank_icir.unwrap_or(f64::NAN));
    println!("IR with breadth 100: {:.3}", ir(ic.ic, 100.0));
    Ok(())
}
