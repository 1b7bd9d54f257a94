use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::RawTable;
use crate::error::{Error, Result};

/// Parameters of the synthetic covariate-shift generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub regimes: usize,
    pub steps_per_regime: usize,
    pub p: usize,
    pub seed: u64,
    /// Mean offset between consecutive regimes.
    pub delta: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            regimes: 3,
            steps_per_regime: 1500,
            p: 4,
            seed: 0,
            delta: 4.0,
        }
    }
}

/// Generated table plus the ground-truth regime boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    #[serde(skip)]
    pub table: Option<RawTable>,
    /// Row indices `0 = b_0 < b_1 < ... < b_R = n`; regime `k` spans `b_k..b_{k+1}`.
    pub boundaries: Vec<usize>,
    pub regimes: usize,
    pub delta: f64,
    pub seed: u64,
    /// Feature-to-target weights shared by every regime.
    pub weights: Vec<f64>,
}

impl SynthOutput {
    pub fn table(&self) -> &RawTable {
        self.table.as_ref().expect("generated output carries its table")
    }
}

/// Feature columns are `x0..x{p-1}`, the target column is `y`, time is `t = 0..n`.
pub fn synth_tcs_generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    if cfg.regimes < 2 {
        return Err(Error::Config(format!("need at least 2 regimes, got {}", cfg.regimes)));
    }
    synth_tcs_with_lengths(&vec![cfg.steps_per_regime; cfg.regimes], cfg.p, cfg.seed, cfg.delta)
}

/// Like [`synth_tcs_generate`] with an explicit length per regime.
///
/// Regime `k` runs a stationary VAR(1) around mean `k * delta` with
/// innovation scale `1 + 0.05 * delta * k`; the transition matrix is shared.
/// The target is `y_t = w · x_t + 0.1 ε` with one global `w`, so only the
/// feature marginals move between regimes.
pub fn synth_tcs_with_lengths(lengths: &[usize], p: usize, seed: u64, delta: f64) -> Result<SynthOutput> {
    if lengths.len() < 2 {
        return Err(Error::Config(format!("need at least 2 regimes, got {}", lengths.len())));
    }
    if p == 0 || lengths.iter().any(|&l| l == 0) {
        return Err(Error::Config("p and every regime length must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = {
        let raw: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt().max(1e-12);
        raw.iter().map(|w| w / norm).collect()
    };
    // Row sums of |A| are 0.9, so the process is stationary.
    let transition = |x: &[f64], mean: f64, i: usize| {
        let own = x[i] - mean;
        let next = x[(i + 1) % p] - mean;
        if p == 1 {
            0.9 * own
        } else {
            0.7 * own + 0.2 * next
        }
    };

    let n: usize = lengths.iter().sum();
    let mut xs: Vec<Vec<f64>> = vec![Vec::with_capacity(n); p];
    let mut ys = Vec::with_capacity(n);
    let mut boundaries = vec![0];
    let mut state = vec![0.0; p];
    for (k, &len) in lengths.iter().enumerate() {
        let mean = k as f64 * delta;
        let scale = 1.0 + 0.05 * delta * k as f64;
        for _ in 0..len {
            let next: Vec<f64> = (0..p)
                .map(|i| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    mean + transition(&state, mean, i) + scale * eps
                })
                .collect();
            state = next;
            let noise: f64 = StandardNormal.sample(&mut rng);
            let y = state.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>() + 0.1 * noise;
            for i in 0..p {
                xs[i].push(state[i]);
            }
            ys.push(y);
        }
        boundaries.push(boundaries.last().unwrap() + len);
    }

    let mut columns: Vec<(String, Vec<f64>)> = xs.into_iter().enumerate().map(|(i, c)| (format!("x{i}"), c)).collect();
    columns.push(("y".to_string(), ys));
    let table = RawTable::from_columns("t", None, columns)?;
    Ok(SynthOutput {
        table: Some(table),
        boundaries,
        regimes: lengths.len(),
        delta,
        seed,
        weights,
    })
}

/// Feature column names used by the generator.
pub fn feature_names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}
