//! Distribution distances between two sets of samples.
//!
//! Each distance is built from tape ops, so the same code serves period
//! characterization (evaluated on a value-only tape over raw features) and
//! hidden-state matching (differentiated during training). A sample set is
//! an `n x dim` matrix, one sample per row.
//!
//! MMD additionally has a streaming value-only path, [`mmd_value`], used
//! when sample sets are too large to materialize an `n x n` kernel matrix.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgraph::{Adam, AdamConfig, Matrix, Tape, Tensor};

/// Bandwidth multipliers of the default RBF mixture, applied to the median heuristic.
pub const DEFAULT_RBF_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Lower clamp applied to discriminator outputs before taking logs.
pub const DISC_CLAMP: f64 = 1e-7;

/// `2 ln 2`: the adversarial discrepancy of a discriminator that cannot tell the sets apart.
pub const ADV_CONFUSION: f64 = 2.0 * std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelConfig {
    /// Mean of RBF kernels `exp(-‖x-y‖² / (c · bw))` over multipliers `c`,
    /// with `bw` the median pairwise squared distance of the pooled set.
    Rbf { multipliers: Vec<f64> },
    Linear,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::Rbf {
            multipliers: DEFAULT_RBF_MULTIPLIERS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorConfig {
    pub hidden: usize,
    /// Gradient-reversal coefficient applied to inputs.
    pub reversal: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            hidden: 32,
            reversal: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DistanceKind {
    Cosine,
    Mmd(KernelConfig),
    Coral,
    Adversarial(DiscriminatorConfig),
}

impl DistanceKind {
    pub fn mmd() -> Self {
        DistanceKind::Mmd(KernelConfig::default())
    }

    pub fn adversarial() -> Self {
        DistanceKind::Adversarial(DiscriminatorConfig::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistanceKind::Cosine => "cosine",
            DistanceKind::Mmd(KernelConfig::Rbf { .. }) => "mmd",
            DistanceKind::Mmd(KernelConfig::Linear) => "mmd_linear",
            DistanceKind::Coral => "coral",
            DistanceKind::Adversarial(_) => "adv",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistanceKind::Mmd(KernelConfig::Rbf { multipliers }) => {
                if !multipliers.iter().any(|&c| c > 0.0) || multipliers.iter().any(|&c| !(c > 0.0)) {
                    return Err(Error::Config("MMD needs positive bandwidth multipliers".into()));
                }
            }
            DistanceKind::Adversarial(cfg) if cfg.hidden == 0 => {
                return Err(Error::Config("discriminator hidden width must be >= 1".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Minimum number of samples each set must hold.
    pub fn min_samples(&self) -> usize {
        match self {
            DistanceKind::Coral => 2,
            _ => 1,
        }
    }

    /// Maps a distance value onto a "larger means more divergent" scale.
    ///
    /// The adversarial discrepancy peaks at confusion, so it is reported as
    /// `max(0, 2 ln 2 - d)`; the other kinds are returned unchanged.
    pub fn divergence_of(&self, d: f64) -> f64 {
        match self {
            DistanceKind::Adversarial(_) => (ADV_CONFUSION - d).max(0.0),
            _ => d,
        }
    }

    /// Value-only divergence between two sample sets.
    ///
    /// For the adversarial kind a fresh discriminator is fitted to the two
    /// sets first (seeded, so the result is deterministic).
    pub fn divergence(&self, a: &SampleSet, b: &SampleSet) -> Result<f64> {
        check_pair(self, a, b)?;
        let d = match self {
            DistanceKind::Mmd(kernel) => mmd_value(a, b, kernel)?,
            DistanceKind::Adversarial(cfg) => {
                let disc = fit_discriminator(a, b, *cfg, ADV_FIT_STEPS, ADV_FIT_LR, 0)?;
                adversarial_value(a, b, &disc)?
            }
            _ => {
                let mut tape = Tape::no_grad();
                let ta = tape.constant(a.values().clone());
                let tb = tape.constant(b.values().clone());
                let d = distance(&mut tape, self, ta, tb, None)?;
                tape.item(d)?
            }
        };
        Ok(self.divergence_of(d))
    }
}

const ADV_FIT_STEPS: usize = 150;
const ADV_FIT_LR: f64 = 1e-2;

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(DistanceKind::Cosine),
            "mmd" => Ok(DistanceKind::mmd()),
            "mmd_linear" => Ok(DistanceKind::Mmd(KernelConfig::Linear)),
            "coral" => Ok(DistanceKind::Coral),
            "adv" => Ok(DistanceKind::adversarial()),
            other => Err(Error::Config(format!(
                "unknown distance `{other}` (expected cosine | mmd | mmd_linear | coral | adv)"
            ))),
        }
    }
}

impl TryFrom<String> for DistanceKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DistanceKind> for String {
    fn from(k: DistanceKind) -> String {
        k.name().to_string()
    }
}

/// `n x dim` samples with finite entries and `n >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet(Matrix);

impl SampleSet {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::DegenerateInput("sample set must be non-empty".into()));
        }
        if !values.is_finite() {
            return Err(Error::DegenerateInput("sample set has non-finite entries".into()));
        }
        Ok(SampleSet(values))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.0
    }
}

fn check_pair(kind: &DistanceKind, a: &SampleSet, b: &SampleSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::dim(
            "distance",
            format!("sample dimensions {} and {}", a.dim(), b.dim()),
        ));
    }
    let min = kind.min_samples();
    if a.n() < min || b.n() < min {
        return Err(Error::DegenerateInput(format!(
            "{kind} needs at least {min} samples per set, got {} and {}",
            a.n(),
            b.n()
        )));
    }
    Ok(())
}

/// Differentiable distance between the rows of `a` and the rows of `b`.
///
/// `disc` is required for the adversarial kind and ignored otherwise.
pub fn distance(
    tape: &mut Tape,
    kind: &DistanceKind,
    a: Tensor,
    b: Tensor,
    disc: Option<&BoundDiscriminator>,
) -> Result<Tensor> {
    let ((na, da), (nb, db)) = (tape.shape(a), tape.shape(b));
    if da != db {
        return Err(Error::dim("distance", format!("sample dimensions {da} and {db}")));
    }
    let min = kind.min_samples();
    if na < min || nb < min {
        return Err(Error::DegenerateInput(format!(
            "{kind} needs at least {min} samples per set, got {na} and {nb}"
        )));
    }
    match kind {
        DistanceKind::Cosine => cosine(tape, a, b),
        DistanceKind::Mmd(kernel) => mmd(tape, a, b, kernel),
        DistanceKind::Coral => coral(tape, a, b),
        DistanceKind::Adversarial(_) => {
            let disc = disc.ok_or_else(|| {
                Error::Contract("adversarial distance needs a bound discriminator".into())
            })?;
            adversarial(tape, a, b, disc)
        }
    }
}

/// `1 - <ā, b̄> / (‖ā‖ ‖b̄‖)` between the column means of the two sets.
pub fn cosine(tape: &mut Tape, a: Tensor, b: Tensor) -> Result<Tensor> {
    let ma = tape.mean_rows(a)?;
    let mb = tape.mean_rows(b)?;
    for m in [ma, mb] {
        let norm2: f64 = tape.value(m).data().iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            return Err(Error::DegenerateInput("cosine distance of a zero mean vector".into()));
        }
    }
    let prod = tape.mul(ma, mb)?;
    let dot = tape.sum(prod)?;
    let sa = tape.square(ma)?;
    let sa = tape.sum(sa)?;
    let sb = tape.square(mb)?;
    let sb = tape.sum(sb)?;
    let norms = tape.mul(sa, sb)?;
    let norms = tape.sqrt(norms)?;
    let ratio = tape.div(dot, norms)?;
    let neg = tape.neg(ratio)?;
    tape.add_scalar(neg, 1.0)
}

/// Median of pairwise squared Euclidean distances over the pooled rows.
///
/// An even number of pairs uses the mean of the two middle values. Returns
/// 1.0 when the median is zero.
pub fn median_bandwidth(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::dim("median_bandwidth", "sample dimensions differ"));
    }
    let pooled = Matrix::vstack(&[a.values(), b.values()])?;
    let mut d = pairwise_upper(&pooled);
    if d.is_empty() {
        return Err(Error::DegenerateInput("median bandwidth needs >= 2 pooled samples".into()));
    }
    let med = median_in_place(&mut d);
    Ok(if med > 0.0 { med } else { 1.0 })
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn pairwise_upper(z: &Matrix) -> Vec<f64> {
    let n = z.rows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(sq_dist(z.row(i), z.row(j)));
        }
    }
    out
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, &mut hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Tape-built `n x n` matrix of pairwise squared distances between rows.
fn pairwise_sq_dists(tape: &mut Tape, z: Tensor) -> Result<Tensor> {
    let (n, q) = tape.shape(z);
    let sq = tape.square(z)?;
    let ones_q = tape.constant(Matrix::ones(q, 1));
    let norms = tape.matmul(sq, ones_q)?;
    let ones_n = tape.constant(Matrix::ones(1, n));
    let rows = tape.matmul(norms, ones_n)?;
    let cols = tape.transpose(rows)?;
    let zt = tape.transpose(z)?;
    let gram = tape.matmul(z, zt)?;
    let gram2 = tape.scale(gram, 2.0)?;
    let s = tape.add(rows, cols)?;
    tape.sub(s, gram2)
}

/// Tape-built median bandwidth, differentiable through the selected pair(s).
fn median_bandwidth_on_tape(tape: &mut Tape, dists: Tensor) -> Result<Tensor> {
    let n = tape.shape(dists).0;
    let d = tape.value(dists);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((d.get(i, j), i, j));
        }
    }
    if pairs.is_empty() {
        return Err(Error::DegenerateInput("median bandwidth needs >= 2 pooled samples".into()));
    }
    let mid = pairs.len() / 2;
    let cmp = |x: &(f64, usize, usize), y: &(f64, usize, usize)| {
        x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2))
    };
    pairs.select_nth_unstable_by(mid, cmp);
    let upper = pairs[mid];
    let picked = if pairs.len() % 2 == 1 {
        vec![upper]
    } else {
        let lower = *pairs[..mid].iter().max_by(|x, y| cmp(x, y)).expect("mid >= 1");
        vec![lower, upper]
    };
    let value: f64 = picked.iter().map(|p| p.0).sum::<f64>() / picked.len() as f64;
    if value <= 0.0 {
        return Ok(tape.scalar(1.0));
    }
    let mut acc = tape.pick(dists, picked[0].1, picked[0].2)?;
    if picked.len() == 2 {
        let other = tape.pick(dists, picked[1].1, picked[1].2)?;
        let s = tape.add(acc, other)?;
        acc = tape.scale(s, 0.5)?;
    }
    Ok(acc)
}

/// Biased MMD estimate `mean K_aa + mean K_bb - 2 mean K_ab`.
pub fn mmd(tape: &mut Tape, a: Tensor, b: Tensor, kernel: &KernelConfig) -> Result<Tensor> {
    let na = tape.shape(a).0;
    let z = tape.concat_rows(&[a, b])?;
    let n = tape.shape(z).0;
    let k = match kernel {
        KernelConfig::Linear => {
            let zt = tape.transpose(z)?;
            tape.matmul(z, zt)?
        }
        KernelConfig::Rbf { multipliers } => {
            let dists = pairwise_sq_dists(tape, z)?;
            let bw = median_bandwidth_on_tape(tape, dists)?;
            let mut sum: Option<Tensor> = None;
            for &c in multipliers {
                let num = tape.scalar(-1.0 / c);
                let factor = tape.div(num, bw)?;
                let scaled = tape.scale_by(dists, factor)?;
                let kc = tape.exp(scaled)?;
                sum = Some(match sum {
                    Some(s) => tape.add(s, kc)?,
                    None => kc,
                });
            }
            let sum = sum.ok_or_else(|| Error::Config("empty RBF multiplier list".into()))?;
            tape.scale(sum, 1.0 / multipliers.len() as f64)?
        }
    };
    let top = tape.slice_rows(k, 0, na)?;
    let bottom = tape.slice_rows(k, na, n)?;
    let k_aa = tape.slice_cols(top, 0, na)?;
    let k_ab = tape.slice_cols(top, na, n)?;
    let k_bb = tape.slice_cols(bottom, na, n)?;
    let m_aa = tape.mean(k_aa)?;
    let m_bb = tape.mean(k_bb)?;
    let m_ab = tape.mean(k_ab)?;
    let within = tape.add(m_aa, m_bb)?;
    let cross = tape.scale(m_ab, 2.0)?;
    tape.sub(within, cross)
}

/// Value-only MMD that streams over sample pairs instead of building kernel matrices.
pub fn mmd_value(a: &SampleSet, b: &SampleSet, kernel: &KernelConfig) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::dim("mmd", "sample dimensions differ"));
    }
    let (na, nb) = (a.n(), b.n());
    let pooled = Matrix::vstack(&[a.values(), b.values()])?;
    let n = na + nb;
    let (mut s_aa, mut s_bb, mut s_ab) = (0.0, 0.0, 0.0);
    match kernel {
        KernelConfig::Linear => {
            let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| p * q).sum() };
            // Symmetric blocks: diagonal terms once, off-diagonal terms twice.
            for i in 0..n {
                let xi = pooled.row(i);
                let kii = dot(xi, xi);
                if i < na {
                    s_aa += kii;
                } else {
                    s_bb += kii;
                }
                for j in i + 1..n {
                    let kij = dot(xi, pooled.row(j));
                    match (i < na, j < na) {
                        (true, true) => s_aa += 2.0 * kij,
                        (false, false) => s_bb += 2.0 * kij,
                        _ => s_ab += kij,
                    }
                }
            }
        }
        KernelConfig::Rbf { multipliers } => {
            if multipliers.is_empty() {
                return Err(Error::Config("empty RBF multiplier list".into()));
            }
            let d = pairwise_upper(&pooled);
            if d.is_empty() {
                return Err(Error::DegenerateInput("median bandwidth needs >= 2 pooled samples".into()));
            }
            let bw = {
                let mut scratch = d.clone();
                let med = median_in_place(&mut scratch);
                if med > 0.0 { med } else { 1.0 }
            };
            let m = multipliers.len() as f64;
            let kern = rbf_mixture(multipliers, bw);
            // Diagonal entries are exp(0) = 1 for every multiplier.
            s_aa += na as f64;
            s_bb += nb as f64;
            let mut idx = 0;
            for i in 0..n {
                for j in i + 1..n {
                    let kij = kern(d[idx]) / m;
                    idx += 1;
                    match (i < na, j < na) {
                        (true, true) => s_aa += 2.0 * kij,
                        (false, false) => s_bb += 2.0 * kij,
                        _ => s_ab += kij,
                    }
                }
            }
        }
    }
    let (na, nb) = (na as f64, nb as f64);
    Ok(s_aa / (na * na) + s_bb / (nb * nb) - 2.0 * s_ab / (na * nb))
}

/// Sum over multipliers of `exp(-d / (c * bw))` as a function of `d`.
///
/// When each multiplier is half the next (the default set), one `exp` is
/// computed and the rest follow by repeated squaring.
fn rbf_mixture(multipliers: &[f64], bw: f64) -> Box<dyn Fn(f64) -> f64> {
    let mut sorted = multipliers.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let halving = sorted.windows(2).all(|w| w[1] * 2.0 == w[0]);
    if halving {
        let inv = -1.0 / (sorted[0] * bw);
        let count = sorted.len();
        Box::new(move |d| {
            let mut e = (d * inv).exp();
            let mut s = e;
            for _ in 1..count {
                e *= e;
                s += e;
            }
            s
        })
    } else {
        let inv: Vec<f64> = multipliers.iter().map(|c| -1.0 / (c * bw)).collect();
        Box::new(move |d| inv.iter().map(|s| (d * s).exp()).sum())
    }
}

/// `‖C_a - C_b‖²_F / (4 q²)` with unbiased covariances.
pub fn coral(tape: &mut Tape, a: Tensor, b: Tensor) -> Result<Tensor> {
    let q = tape.shape(a).1 as f64;
    let ca = covariance(tape, a)?;
    let cb = covariance(tape, b)?;
    let diff = tape.sub(ca, cb)?;
    let sq = tape.square(diff)?;
    let s = tape.sum(sq)?;
    tape.scale(s, 1.0 / (4.0 * q * q))
}

fn covariance(tape: &mut Tape, x: Tensor) -> Result<Tensor> {
    let n = tape.shape(x).0;
    if n < 2 {
        return Err(Error::DegenerateInput("covariance needs >= 2 samples".into()));
    }
    let mean = tape.mean_rows(x)?;
    let neg = tape.neg(mean)?;
    let centered = tape.add_row(x, neg)?;
    let ct = tape.transpose(centered)?;
    let cov = tape.matmul(ct, centered)?;
    tape.scale(cov, 1.0 / (n as f64 - 1.0))
}

/// Two-layer domain classifier `dim -> hidden (ReLU) -> 1 (sigmoid)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub reversal: f64,
}

impl Discriminator {
    pub fn new(dim: usize, cfg: DiscriminatorConfig, rng: &mut impl Rng) -> Self {
        let uniform = |rows: usize, cols: usize, fan_in: usize, rng: &mut dyn rand::RngCore| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
            Matrix::from_vec(rows, cols, data).expect("sized")
        };
        Discriminator {
            w1: uniform(dim, cfg.hidden, dim, rng),
            b1: Matrix::zeros(1, cfg.hidden),
            w2: uniform(cfg.hidden, 1, cfg.hidden, rng),
            b2: Matrix::zeros(1, 1),
            reversal: cfg.reversal,
        }
    }

    /// All-zero weights: outputs exactly 0.5 for every input.
    pub fn zeros(dim: usize, cfg: DiscriminatorConfig) -> Self {
        Discriminator {
            w1: Matrix::zeros(dim, cfg.hidden),
            b1: Matrix::zeros(1, cfg.hidden),
            w2: Matrix::zeros(cfg.hidden, 1),
            b2: Matrix::zeros(1, 1),
            reversal: cfg.reversal,
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.rows()
    }

    /// Registers the weights on a tape as trainable inputs.
    pub fn bind(&self, tape: &mut Tape) -> BoundDiscriminator {
        BoundDiscriminator {
            w1: tape.param(self.w1.clone()),
            b1: tape.param(self.b1.clone()),
            w2: tape.param(self.w2.clone()),
            b2: tape.param(self.b2.clone()),
            reversal: self.reversal,
        }
    }

    pub fn params_mut(&mut self) -> [&mut Matrix; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

/// Discriminator weights living on a tape.
#[derive(Debug, Clone, Copy)]
pub struct BoundDiscriminator {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub reversal: f64,
}

impl BoundDiscriminator {
    pub fn tensors(&self) -> [Tensor; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }

    /// Probability that each row came from the first set, as `n x 1`.
    pub fn forward(&self, tape: &mut Tape, x: Tensor) -> Result<Tensor> {
        let h = tape.matmul(x, self.w1)?;
        let h = tape.add_row(h, self.b1)?;
        let h = tape.relu(h)?;
        let o = tape.matmul(h, self.w2)?;
        let o = tape.add_row(o, self.b2)?;
        tape.sigmoid(o)
    }
}

/// `-(E[log D(a)] + E[log(1 - D(b))])`, with gradient reversal on the inputs.
pub fn adversarial(tape: &mut Tape, a: Tensor, b: Tensor, disc: &BoundDiscriminator) -> Result<Tensor> {
    let ra = tape.grad_reverse(a, disc.reversal)?;
    let rb = tape.grad_reverse(b, disc.reversal)?;
    let pa = disc.forward(tape, ra)?;
    let pb = disc.forward(tape, rb)?;
    let pa = tape.clamp(pa, DISC_CLAMP, 1.0 - DISC_CLAMP)?;
    let pb = tape.clamp(pb, DISC_CLAMP, 1.0 - DISC_CLAMP)?;
    let la = tape.log(pa)?;
    let la = tape.mean(la)?;
    let nb = tape.neg(pb)?;
    let qb = tape.add_scalar(nb, 1.0)?;
    let lb = tape.log(qb)?;
    let lb = tape.mean(lb)?;
    let l_adv = tape.add(la, lb)?;
    tape.neg(l_adv)
}

pub fn adversarial_value(a: &SampleSet, b: &SampleSet, disc: &Discriminator) -> Result<f64> {
    let mut tape = Tape::no_grad();
    let bound = disc.bind(&mut tape);
    let ta = tape.constant(a.values().clone());
    let tb = tape.constant(b.values().clone());
    let d = adversarial(&mut tape, ta, tb, &bound)?;
    tape.item(d)
}

/// Trains a fresh discriminator to separate `a` from `b` by minimizing the
/// adversarial discrepancy for `steps` full-batch Adam steps.
pub fn fit_discriminator(
    a: &SampleSet,
    b: &SampleSet,
    cfg: DiscriminatorConfig,
    steps: usize,
    lr: f64,
    seed: u64,
) -> Result<Discriminator> {
    check_pair(&DistanceKind::Adversarial(cfg), a, b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disc = Discriminator::new(a.dim(), cfg, &mut rng);
    let mut adam = Adam::new(AdamConfig::with_lr(lr));
    for _ in 0..steps {
        let mut tape = Tape::new();
        let bound = disc.bind(&mut tape);
        let ta = tape.constant(a.values().clone());
        let tb = tape.constant(b.values().clone());
        let loss = adversarial(&mut tape, ta, tb, &bound)?;
        tape.backward(loss)?;
        let grads: Vec<Matrix> = bound
            .tensors()
            .iter()
            .map(|&t| {
                let (r, c) = tape.shape(t);
                tape.grad(t).cloned().unwrap_or_else(|| Matrix::zeros(r, c))
            })
            .collect();
        let grads: Vec<Option<&Matrix>> = grads.iter().map(Some).collect();
        let mut params = disc.params_mut();
        adam.step(&mut params, &grads)?;
    }
    Ok(disc)
}

#[cfg(test)]
mod tests;
