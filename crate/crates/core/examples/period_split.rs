//! Splitting a three-regime series into its most diverse periods.
//!
//! Run with: cargo run --release --example period_split

use adarnn::dataio::{feature_names, synth_tcs_with_lengths};
use adarnn::distances::DistanceKind;
use adarnn::tdc::{Characterizer, DEFAULT_K_CANDIDATES, DEFAULT_UNITS};

fn main() -> adarnn::Result<()> {
    let synth = synth_tcs_with_lengths(&[400, 300, 300], 4, 0, 4.0)?;
    println!("true regime boundaries: {:?}", synth.boundaries);
    let x = synth.table().dense(&feature_names(4))?;

    let mut tdc = Characterizer::new(&x, DEFAULT_UNITS, DistanceKind::mmd())?;
    let selection = tdc.select_split(&DEFAULT_K_CANDIDATES)?;
    for (k, objective) in &selection.candidates {
        println!("K = {k:>2}  objective {objective:.4}");
    }
    let best = &selection.split;
    println!("chosen K = {} boundaries {:?} (units {:?})", best.k, best.boundaries, best.unit_boundaries);

    let (greedy, trace) = tdc.greedy_split_traced(3)?;
    for (i, step) in trace.iter().enumerate() {
        println!("insertion {}: unit edge {} ({} candidates)", i + 1, step.chosen, step.scores.len());
    }
    let exact = tdc.brute_force_split(3)?;
    println!("greedy K=3 {:?}, exhaustive K=3 {:?}", greedy.unit_boundaries, exact.unit_boundaries);
    println!("{} distinct period distances evaluated", tdc.evaluations());
    Ok(())
}
