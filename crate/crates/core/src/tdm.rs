//! Temporal distribution matching trainer.
//!
//! Training runs in two phases. Pre-training fits the model on the
//! prediction loss alone. The main phase adds an importance-weighted sum of
//! per-step hidden-state distances between every pair of periods. After each
//! main epoch from the second on, the step weights of a pair grow where the
//! epoch-mean distance did not shrink and are renormalized.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::distances::{distance, BoundDiscriminator, DistanceKind, Discriminator};
use crate::error::{Error, Result};
use crate::numgraph::{sigmoid, Adam, AdamConfig, Matrix, Tape, Tensor};
use crate::seqmodel::{batch_steps, init_params, task_loss, target_matrix, BoundModel, HiddenTrace, ModelParams, Task};
use crate::tdc::PeriodSplit;

/// Period pairs `(i, j)` with `i < j`, in lexicographic order.
pub fn period_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect()
}

/// Step weights per period pair and matched layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceWeights {
    /// `alpha[pair][slot][t]`; a slot is a matched layer, or the single
    /// shared slot when weights are shared across layers.
    pub alpha: Vec<Vec<Vec<f64>>>,
}

impl ImportanceWeights {
    /// Every simplex starts at `1 / steps`.
    pub fn uniform(pairs: usize, slots: usize, steps: usize) -> Self {
        ImportanceWeights {
            alpha: vec![vec![vec![1.0 / steps as f64; steps]; slots]; pairs],
        }
    }

    pub fn pairs(&self) -> usize {
        self.alpha.len()
    }

    pub fn slots(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    pub fn steps(&self) -> usize {
        self.alpha.first().and_then(|p| p.first()).map_or(0, Vec::len)
    }

    /// True when every vector is non-negative and sums to 1 within `tol`.
    pub fn is_simplex(&self, tol: f64) -> bool {
        self.alpha
            .iter()
            .flatten()
            .all(|v| v.iter().all(|&a| a >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= tol)
    }

    /// Mean Shannon entropy (nats) of the weight vectors; 0 with no pairs.
    pub fn entropy_mean(&self) -> f64 {
        let vecs: Vec<&Vec<f64>> = self.alpha.iter().flatten().collect();
        if vecs.is_empty() {
            return 0.0;
        }
        let total: f64 = vecs
            .iter()
            .map(|v| -v.iter().filter(|&&a| a > 0.0).map(|a| a * a.ln()).sum::<f64>())
            .sum();
        total / vecs.len() as f64
    }
}

/// Epoch-mean unweighted step distances, indexed from epoch 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistanceLog {
    /// `epochs[n - 1][pair][layer][t]` for the matched layers.
    pub epochs: Vec<Vec<Vec<Vec<f64>>>>,
}

impl DistanceLog {
    pub fn push(&mut self, epoch: Vec<Vec<Vec<f64>>>) {
        self.epochs.push(epoch);
    }

    pub fn get(&self, n: usize) -> Option<&Vec<Vec<Vec<f64>>>> {
        n.checked_sub(1).and_then(|i| self.epochs.get(i))
    }

    /// Mean over pairs, layers and steps of epoch `n`.
    pub fn mean(&self, n: usize) -> Option<f64> {
        let e = self.get(n)?;
        let vals: Vec<f64> = e.iter().flatten().flatten().copied().collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// Multiplies `α^t` by `1 + σ(d^(n) - d^(n-1))` wherever the step distance
/// did not decrease, then renormalizes each vector.
///
/// With shared weights the distance of a slot is the mean over matched layers.
pub fn boosting_update(alpha: &ImportanceWeights, log: &DistanceLog, n: usize) -> Result<ImportanceWeights> {
    if n < 2 {
        return Err(Error::Contract(format!("boosting needs epoch >= 2, got {n}")));
    }
    let (cur, prev) = match (log.get(n), log.get(n - 1)) {
        (Some(c), Some(p)) => (c, p),
        _ => return Err(Error::Contract(format!("distance log lacks epoch {} or {n}", n - 1))),
    };
    let slot_dist = |e: &Vec<Vec<Vec<f64>>>, pair: usize, slot: usize, t: usize| -> Result<f64> {
        let layers = e.get(pair).ok_or_else(|| Error::Contract(format!("distance log lacks pair {pair}")))?;
        let get = |l: usize| {
            layers
                .get(l)
                .and_then(|v| v.get(t))
                .copied()
                .ok_or_else(|| Error::Contract(format!("distance log lacks layer {l} step {t}")))
        };
        if alpha.slots() == 1 && layers.len() > 1 {
            let mut s = 0.0;
            for l in 0..layers.len() {
                s += get(l)?;
            }
            Ok(s / layers.len() as f64)
        } else {
            get(slot)
        }
    };
    let mut out = alpha.clone();
    for (pair, slots) in out.alpha.iter_mut().enumerate() {
        for (slot, v) in slots.iter_mut().enumerate() {
            for (t, a) in v.iter_mut().enumerate() {
                let dn = slot_dist(cur, pair, slot, t)?;
                let dp = slot_dist(prev, pair, slot, t)?;
                if dn >= dp {
                    *a *= 1.0 + sigmoid(dn - dp);
                }
            }
            let s: f64 = v.iter().sum();
            for a in v.iter_mut() {
                *a /= s;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Trade-off weight of the matching term.
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Main epochs, after pre-training.
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub distance: DistanceKind,
    pub k_candidates: Vec<usize>,
    pub seed: u64,
    pub match_all_layers: bool,
    pub share_alpha: bool,
    pub hidden: usize,
    pub layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.5,
            lr: 5e-3,
            batch_size: 32,
            epochs: 30,
            pretrain_epochs: 10,
            distance: DistanceKind::mmd(),
            k_candidates: crate::tdc::DEFAULT_K_CANDIDATES.to_vec(),
            seed: 0,
            match_all_layers: true,
            share_alpha: false,
            hidden: 32,
            layers: 2,
        }
    }
}

impl TrainConfig {
    /// Shipped per-dataset settings: `activity`, `air`, `power`, `finance`.
    pub fn preset(name: &str) -> Result<Self> {
        let (hidden, lambda, lr, batch_size) = match name {
            "activity" => (32, 0.1, 5e-3, 64),
            "air" => (64, 0.5, 5e-3, 36),
            "power" => (64, 1e-3, 5e-4, 36),
            "finance" => (64, 0.5, 2e-4, 800),
            other => return Err(Error::Config(format!("unknown preset `{other}` (activity | air | power | finance)"))),
        };
        Ok(TrainConfig {
            hidden,
            lambda,
            lr,
            batch_size,
            ..TrainConfig::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!("batch size must be >= 2, got {}", self.batch_size)));
        }
        if self.hidden == 0 || self.layers == 0 {
            return Err(Error::Config("hidden size and layer count must be >= 1".into()));
        }
        self.distance.validate()
    }

    /// Indices of the layers whose hidden states are matched.
    pub fn matched_layers(&self) -> Vec<usize> {
        if self.match_all_layers {
            (0..self.layers).collect()
        } else {
            vec![self.layers - 1]
        }
    }

    fn alpha_slots(&self) -> usize {
        if self.share_alpha {
            1
        } else {
            self.matched_layers().len()
        }
    }
}

/// One mini-batch from one period.
#[derive(Debug, Clone)]
pub struct PeriodBatch<'a> {
    pub segments: Vec<&'a Matrix>,
    pub targets: Matrix,
}

impl<'a> PeriodBatch<'a> {
    pub fn from_indices(data: &'a Dataset, task: Task, indices: &[usize]) -> Result<Self> {
        let segments = indices.iter().map(|&i| &data.segments[i]).collect();
        let targets: Vec<&[f64]> = indices.iter().map(|&i| data.targets[i].as_slice()).collect();
        Ok(PeriodBatch {
            segments,
            targets: target_matrix(task, &targets)?,
        })
    }
}

/// Mean over periods of the per-period mean task loss.
pub fn prediction_loss(tape: &mut Tape, task: Task, outputs: &[Tensor], targets: &[&Matrix]) -> Result<Tensor> {
    if outputs.is_empty() || outputs.len() != targets.len() {
        return Err(Error::Data(format!("{} outputs for {} target batches", outputs.len(), targets.len())));
    }
    let mut acc: Option<Tensor> = None;
    for (&out, &y) in outputs.iter().zip(targets) {
        if tape.shape(out).0 == 0 {
            return Err(Error::Data("empty period batch".into()));
        }
        let l = task_loss(tape, task, out, y)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, l)?,
            None => l,
        });
    }
    tape.scale(acc.expect("non-empty"), 1.0 / outputs.len() as f64)
}

/// `Σ_layers Σ_t α^t · d(h_i^t, h_j^t)` over the matched layers.
///
/// `alpha[slot][t]` uses one slot per entry of `layers`, or a single slot for
/// all of them. `discs` holds one discriminator per matched layer for the
/// adversarial kind. Returns the loss and the raw step distances
/// `[layer][t]` mapped through [`DistanceKind::divergence_of`].
pub fn tdm_pair_loss(
    tape: &mut Tape,
    trace_i: &HiddenTrace,
    trace_j: &HiddenTrace,
    alpha: &[Vec<f64>],
    kind: &DistanceKind,
    layers: &[usize],
    discs: &[BoundDiscriminator],
) -> Result<(Tensor, Vec<Vec<f64>>)> {
    let v = trace_i.steps();
    if trace_j.steps() != v || trace_i.layers.len() != trace_j.layers.len() {
        return Err(Error::Contract(format!("trace lengths {v} and {} differ", trace_j.steps())));
    }
    if alpha.len() != 1 && alpha.len() != layers.len() {
        return Err(Error::Contract(format!("{} alpha slots for {} matched layers", alpha.len(), layers.len())));
    }
    if alpha.iter().any(|a| a.len() != v) {
        return Err(Error::Contract(format!("alpha length differs from {v} steps")));
    }
    if matches!(kind, DistanceKind::Adversarial(_)) && discs.len() != layers.len() {
        return Err(Error::Contract("adversarial matching needs one discriminator per matched layer".into()));
    }
    let mut acc: Option<Tensor> = None;
    let mut raw = Vec::with_capacity(layers.len());
    for (slot, &l) in layers.iter().enumerate() {
        let weights = if alpha.len() == 1 { &alpha[0] } else { &alpha[slot] };
        let disc = discs.get(slot);
        let mut per_step = Vec::with_capacity(v);
        for t in 0..v {
            let d = distance(tape, kind, trace_i.layers[l][t], trace_j.layers[l][t], disc)?;
            per_step.push(kind.divergence_of(tape.item(d)?));
            let w = tape.scale(d, weights[t])?;
            acc = Some(match acc {
                Some(a) => tape.add(a, w)?,
                None => w,
            });
        }
        raw.push(per_step);
    }
    let loss = match acc {
        Some(a) => a,
        None => tape.scalar(0.0),
    };
    Ok((loss, raw))
}

/// `pred + λ · 2/(K(K-1)) · Σ_{i<j} pair_loss`; exactly `pred` when `λ = 0` or `K < 2`.
pub fn total_loss(tape: &mut Tape, pred: Tensor, pair_losses: &[Tensor], lambda: f64, k: usize) -> Result<Tensor> {
    if lambda == 0.0 || k < 2 || pair_losses.is_empty() {
        return Ok(pred);
    }
    let mut sum = pair_losses[0];
    for &l in &pair_losses[1..] {
        sum = tape.add(sum, l)?;
    }
    let coef = lambda * 2.0 / (k * (k - 1)) as f64;
    let m = tape.scale(sum, coef)?;
    tape.add(pred, m)
}

/// Losses built for one aligned step over all periods.
pub struct StepLosses {
    pub total: Tensor,
    pub pred: Tensor,
    /// Un-scaled matching sum `2/(K(K-1)) Σ pair_loss`, when computed.
    pub matching: Option<Tensor>,
    /// `[pair][layer][t]` raw step distances.
    pub distances: Vec<Vec<Vec<f64>>>,
}

/// Runs one forward pass over the concatenated period batches and builds the
/// full objective. The matching term is skipped when `λ = 0` or `K < 2`.
pub fn step_losses(
    tape: &mut Tape,
    model: &BoundModel,
    discs: &[BoundDiscriminator],
    batches: &[PeriodBatch<'_>],
    alpha: &ImportanceWeights,
    cfg: &TrainConfig,
) -> Result<StepLosses> {
    let k = batches.len();
    if batches.iter().any(|b| b.segments.is_empty()) {
        return Err(Error::Data("empty period batch".into()));
    }
    let all: Vec<&Matrix> = batches.iter().flat_map(|b| b.segments.iter().copied()).collect();
    let steps = batch_steps(&all)?;
    let xs: Vec<Tensor> = steps.into_iter().map(|s| tape.constant(s)).collect();
    let (trace, out) = model.forward(tape, &xs)?;

    let mut offsets = vec![0];
    for b in batches {
        offsets.push(offsets.last().unwrap() + b.segments.len());
    }
    let outputs = (0..k)
        .map(|i| tape.slice_rows(out, offsets[i], offsets[i + 1]))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<&Matrix> = batches.iter().map(|b| &b.targets).collect();
    let pred = prediction_loss(tape, model.task, &outputs, &targets)?;

    if cfg.lambda == 0.0 || k < 2 {
        return Ok(StepLosses {
            total: pred,
            pred,
            matching: None,
            distances: Vec::new(),
        });
    }
    let layers = cfg.matched_layers();
    let traces = (0..k)
        .map(|i| trace.slice_rows(tape, offsets[i], offsets[i + 1]))
        .collect::<Result<Vec<_>>>()?;
    let pairs = period_pairs(k);
    if alpha.pairs() != pairs.len() {
        return Err(Error::Contract(format!("{} alpha pairs for K = {k}", alpha.pairs())));
    }
    let mut pair_losses = Vec::with_capacity(pairs.len());
    let mut distances = Vec::with_capacity(pairs.len());
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let (l, raw) = tdm_pair_loss(tape, &traces[i], &traces[j], &alpha.alpha[p], &cfg.distance, &layers, discs)?;
        pair_losses.push(l);
        distances.push(raw);
    }
    let total = total_loss(tape, pred, &pair_losses, cfg.lambda, k)?;
    let mut sum = pair_losses[0];
    for &l in &pair_losses[1..] {
        sum = tape.add(sum, l)?;
    }
    let matching = tape.scale(sum, 2.0 / (k * (k - 1)) as f64)?;
    Ok(StepLosses {
        total,
        pred,
        matching: Some(matching),
        distances,
    })
}

/// One record of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub pred_loss: f64,
    pub match_loss: f64,
    pub alpha_entropy_mean: f64,
    pub dist_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_loss: Option<f64>,
    /// Final weights, attached to the last record only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<ImportanceWeights>,
}

impl EpochRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Everything [`train`] produces.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub alpha: ImportanceWeights,
    pub history: Vec<EpochRecord>,
    /// Weights after every main epoch.
    pub alpha_history: Vec<ImportanceWeights>,
    pub log: DistanceLog,
    /// Mean prediction loss of each pre-training epoch.
    pub pretrain_losses: Vec<f64>,
    /// Main epoch whose parameters were kept (the last one unless a
    /// validation set selected another).
    pub best_epoch: usize,
}

/// Endless shuffled stream of one period's segment indices.
struct BatchStream {
    items: Vec<usize>,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchStream {
    fn new(items: Vec<usize>, rng: &mut ChaCha8Rng) -> Self {
        let mut order = items.clone();
        order.shuffle(rng);
        BatchStream { items, order, cursor: 0 }
    }

    fn take(&mut self, b: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(b);
        while out.len() < b {
            if self.cursor == self.order.len() {
                self.order.clone_from(&self.items);
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

fn collect_grads(tape: &Tape, handles: &[Tensor]) -> Vec<Matrix> {
    handles
        .iter()
        .map(|&t| {
            let (r, c) = tape.shape(t);
            tape.grad(t).cloned().unwrap_or_else(|| Matrix::zeros(r, c))
        })
        .collect()
}

fn apply(adam: &mut Adam, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<()> {
    let g: Vec<Option<&Matrix>> = grads.iter().map(Some).collect();
    adam.step(params, &g)
}

/// Per-period segment groups for `split` (one group of everything when `None`).
pub fn period_groups(data: &Dataset, split: Option<&PeriodSplit>) -> Result<Vec<Vec<usize>>> {
    let groups = match split {
        Some(s) => s.assign(&data.origins),
        None => vec![(0..data.len()).collect()],
    };
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(Error::Data(format!("period {i} holds no training segments")));
    }
    Ok(groups)
}

/// Mean task loss of `params` on `data`, evaluated in chunks.
pub fn evaluate_loss(params: &ModelParams, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for start in (0..data.len()).step_by(256) {
        let end = (start + 256).min(data.len());
        let idx: Vec<usize> = (start..end).collect();
        let batch = PeriodBatch::from_indices(data, params.task, &idx)?;
        let mut tape = Tape::no_grad();
        let bound = params.bind(&mut tape);
        let steps = batch_steps(&batch.segments)?;
        let xs: Vec<Tensor> = steps.into_iter().map(|s| tape.constant(s)).collect();
        let (_, out) = bound.forward(&mut tape, &xs)?;
        let l = task_loss(&mut tape, params.task, out, &batch.targets)?;
        total += tape.item(l)? * idx.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Pre-trains on the prediction loss only (λ = 0) for `cfg.pretrain_epochs`.
pub fn pretrain(
    params: &mut ModelParams,
    data: &Dataset,
    groups: &[Vec<usize>],
    cfg: &TrainConfig,
    adam: &mut Adam,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let plain = TrainConfig {
        lambda: 0.0,
        ..cfg.clone()
    };
    let mut losses = Vec::with_capacity(cfg.pretrain_epochs);
    let mut streams: Vec<BatchStream> = groups.iter().map(|g| BatchStream::new(g.clone(), rng)).collect();
    let empty = ImportanceWeights::uniform(0, 0, 0);
    for epoch in 1..=cfg.pretrain_epochs {
        let n_steps = steps_per_epoch(groups, cfg.batch_size);
        let mut sum = 0.0;
        for batch_no in 0..n_steps {
            let batches = draw(data, params.task, &mut streams, cfg.batch_size, rng)?;
            let mut tape = Tape::new();
            let model = params.bind(&mut tape);
            let Some((losses_t, loss)) = finite_step(&mut tape, &model, &[], &batches, &empty, &plain)? else {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("non-finite pre-training loss at batch {}", batch_no + 1),
                });
            };
            sum += loss;
            tape.backward(losses_t.total)?;
            let grads = collect_grads(&tape, &model.handles);
            apply(adam, &mut params.matrices_mut(), &grads)?;
        }
        losses.push(sum / n_steps as f64);
        log::debug!("pretrain epoch {epoch}: loss {:.6}", losses[epoch - 1]);
    }
    Ok(losses)
}

/// Like [`step_losses`], but `None` when the forward pass or the total loss
/// is non-finite.
fn finite_step(
    tape: &mut Tape,
    model: &BoundModel,
    discs: &[BoundDiscriminator],
    batches: &[PeriodBatch],
    alpha: &ImportanceWeights,
    cfg: &TrainConfig,
) -> Result<Option<(StepLosses, f64)>> {
    let step = match step_losses(tape, model, discs, batches, alpha, cfg) {
        Ok(s) => s,
        Err(Error::Numeric { op }) => {
            log::warn!("non-finite output from `{op}` during training");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let total = tape.item(step.total)?;
    Ok(total.is_finite().then_some((step, total)))
}

fn steps_per_epoch(groups: &[Vec<usize>], b: usize) -> usize {
    let longest = groups.iter().map(Vec::len).max().unwrap_or(0);
    longest.div_ceil(b).max(1)
}

fn draw<'a>(
    data: &'a Dataset,
    task: Task,
    streams: &mut [BatchStream],
    b: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PeriodBatch<'a>>> {
    streams
        .iter_mut()
        .map(|s| PeriodBatch::from_indices(data, task, &s.take(b, rng)))
        .collect()
}

/// Infers the task of a dataset: regression over the target horizon unless
/// `classes` is given.
pub fn task_for(data: &Dataset, classes: Option<usize>) -> Task {
    match classes {
        Some(c) => Task::Classification(c),
        None => Task::Regression(data.target_dim()),
    }
}

/// Pre-trains, then trains with distribution matching and boosting.
///
/// `split = None` trains a plain model on a single period. When `valid` is
/// given, the parameters of the main epoch with the lowest validation loss
/// are returned. `on_epoch` sees each history record as soon as it exists.
pub fn train(
    data: &Dataset,
    split: Option<&PeriodSplit>,
    task: Task,
    cfg: &TrainConfig,
    valid: Option<&Dataset>,
    on_epoch: &mut dyn FnMut(&EpochRecord) -> Result<()>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let groups = period_groups(data, split)?;
    let k = groups.len();
    let v = data.window();
    let pairs = period_pairs(k);
    let layers = cfg.matched_layers();
    let matching = cfg.lambda > 0.0 && k >= 2;

    let mut params = init_params(data.p(), cfg.hidden, cfg.layers, task, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9));
    let mut discs: Vec<Discriminator> = match (&cfg.distance, matching) {
        (DistanceKind::Adversarial(dc), true) => {
            layers.iter().map(|_| Discriminator::new(cfg.hidden, *dc, &mut rng)).collect()
        }
        _ => Vec::new(),
    };
    let adam_cfg = AdamConfig::with_lr(cfg.lr);
    let mut adam = Adam::new(adam_cfg);
    let mut disc_adams: Vec<Adam> = discs.iter().map(|_| Adam::new(adam_cfg)).collect();

    let pretrain_losses = pretrain(&mut params, data, &groups, cfg, &mut adam, &mut rng)?;

    let mut alpha = ImportanceWeights::uniform(pairs.len(), cfg.alpha_slots(), v);
    let mut log = DistanceLog::default();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut alpha_history = Vec::with_capacity(cfg.epochs);
    let mut streams: Vec<BatchStream> = groups.iter().map(|g| BatchStream::new(g.clone(), &mut rng)).collect();
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        let n_steps = steps_per_epoch(&groups, cfg.batch_size);
        let (mut pred_sum, mut match_sum) = (0.0, 0.0);
        let mut dist_sum: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; v]; layers.len()]; if matching { pairs.len() } else { 0 }];
        for batch_no in 0..n_steps {
            let batches = draw(data, task, &mut streams, cfg.batch_size, &mut rng)?;
            let mut tape = Tape::new();
            let model = params.bind(&mut tape);
            let bound_discs: Vec<BoundDiscriminator> = discs.iter().map(|d| d.bind(&mut tape)).collect();
            let step = finite_step(&mut tape, &model, &bound_discs, &batches, &alpha, cfg)?;
            let Some((step, _)) = step else {
                let record = EpochRecord {
                    epoch,
                    pred_loss: f64::NAN,
                    match_loss: f64::NAN,
                    alpha_entropy_mean: alpha.entropy_mean(),
                    dist_mean: f64::NAN,
                    valid_loss: None,
                    alpha: None,
                };
                on_epoch(&record)?;
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("non-finite loss at batch {}", batch_no + 1),
                });
            };
            pred_sum += tape.item(step.pred)?;
            if let Some(m) = step.matching {
                match_sum += tape.item(m)?;
            }
            for (acc, d) in dist_sum.iter_mut().flatten().zip(step.distances.iter().flatten()) {
                for (a, x) in acc.iter_mut().zip(d) {
                    *a += x;
                }
            }
            tape.backward(step.total)?;
            let grads = collect_grads(&tape, &model.handles);
            apply(&mut adam, &mut params.matrices_mut(), &grads)?;
            for ((disc, bd), da) in discs.iter_mut().zip(&bound_discs).zip(disc_adams.iter_mut()) {
                let g = collect_grads(&tape, &bd.tensors());
                apply(da, &mut disc.params_mut(), &g)?;
            }
        }
        let nf = n_steps as f64;
        for x in dist_sum.iter_mut().flatten().flatten() {
            *x /= nf;
        }
        if matching {
            log.push(dist_sum);
            if epoch >= 2 {
                alpha = boosting_update(&alpha, &log, epoch)?;
            }
        }
        alpha_history.push(alpha.clone());

        let valid_loss = match valid {
            Some(vd) if !vd.is_empty() => Some(evaluate_loss(&params, vd)?),
            _ => None,
        };
        if let Some(vl) = valid_loss {
            if best.as_ref().map_or(true, |(b, _, _)| vl < *b) {
                best = Some((vl, epoch, params.clone()));
            }
        }
        let record = EpochRecord {
            epoch,
            pred_loss: pred_sum / nf,
            match_loss: match_sum / nf,
            alpha_entropy_mean: alpha.entropy_mean(),
            dist_mean: log.mean(epoch).unwrap_or(0.0),
            valid_loss,
            alpha: (epoch == cfg.epochs).then(|| alpha.clone()),
        };
        log::info!(
            "epoch {epoch}: pred {:.6} match {:.6} dist {:.6}",
            record.pred_loss,
            record.match_loss,
            record.dist_mean
        );
        on_epoch(&record)?;
        history.push(record);
    }

    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, e),
        None => (params, cfg.epochs),
    };
    Ok(TrainOutput {
        params,
        alpha,
        history,
        alpha_history,
        log,
        pretrain_losses,
        best_epoch,
    })
}
