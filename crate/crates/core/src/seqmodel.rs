//! Stacked GRU with a bottleneck and a task head.
//!
//! The forward pass keeps every per-step hidden state of every layer so the
//! matching loss can compare periods step by step.
//!
//! Gate convention:
//!
//! ```text
//! z  = σ(x W_z + h U_z + b_z)
//! r  = σ(x W_r + h U_r + b_r)
//! h̃  = tanh(x W_h + (r ⊙ h) U_h + b_h)
//! h' = (1 - z) ⊙ h + z ⊙ h̃
//! ```

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgraph::{Matrix, Tape, Tensor};

/// Model file format version written by [`ModelParams::to_json`].
pub const MODEL_VERSION: u32 = 1;

/// Conventional model file extension.
pub const MODEL_EXTENSION: &str = ".adarnn.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// `r` real outputs, trained with MSE.
    Regression(usize),
    /// `c` classes, softmax output, trained with cross-entropy.
    Classification(usize),
}

impl Task {
    pub fn output_dim(self) -> usize {
        match self {
            Task::Regression(r) => r,
            Task::Classification(c) => c,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Regression(_) => "regression",
            Task::Classification(_) => "classification",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerParams {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub b_z: Matrix,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub b_r: Matrix,
    pub w_h: Matrix,
    pub u_h: Matrix,
    pub b_h: Matrix,
}

const GRU_NAMES: [&str; 9] = ["W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h"];

impl GruLayerParams {
    pub fn zeros(d_in: usize, q: usize) -> Self {
        GruLayerParams {
            w_z: Matrix::zeros(d_in, q),
            u_z: Matrix::zeros(q, q),
            b_z: Matrix::zeros(1, q),
            w_r: Matrix::zeros(d_in, q),
            u_r: Matrix::zeros(q, q),
            b_r: Matrix::zeros(1, q),
            w_h: Matrix::zeros(d_in, q),
            u_h: Matrix::zeros(q, q),
            b_h: Matrix::zeros(1, q),
        }
    }

    fn parts(&self) -> [&Matrix; 9] {
        [&self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h, &self.u_h, &self.b_h]
    }

    fn parts_mut(&mut self) -> [&mut Matrix; 9] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }
}

/// Affine map `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Matrix,
    pub b: Matrix,
}

impl Dense {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Dense {
            w: Matrix::zeros(d_in, d_out),
            b: Matrix::zeros(1, d_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub task: Task,
    pub p: usize,
    pub q: usize,
    pub layers: Vec<GruLayerParams>,
    /// Two ReLU layers `q -> q`.
    pub bottleneck: [Dense; 2],
    pub head: Dense,
}

impl ModelParams {
    /// All-zero parameters of the given shape.
    pub fn zeros(p: usize, q: usize, layers: usize, task: Task) -> Self {
        ModelParams {
            task,
            p,
            q,
            layers: (0..layers).map(|l| GruLayerParams::zeros(if l == 0 { p } else { q }, q)).collect(),
            bottleneck: [Dense::zeros(q, q), Dense::zeros(q, q)],
            head: Dense::zeros(q, task.output_dim()),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.task.output_dim()
    }

    /// Parameter names in the fixed order of [`ModelParams::matrices`].
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in 0..self.layers.len() {
            names.extend(GRU_NAMES.iter().map(|n| format!("layer{l}.{n}")));
        }
        for b in 0..2 {
            names.push(format!("bottleneck{b}.W"));
            names.push(format!("bottleneck{b}.b"));
        }
        names.push("head.W".into());
        names.push("head.b".into());
        names
    }

    pub fn matrices(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = Vec::new();
        for layer in &self.layers {
            out.extend(layer.parts());
        }
        for d in &self.bottleneck {
            out.push(&d.w);
            out.push(&d.b);
        }
        out.push(&self.head.w);
        out.push(&self.head.b);
        out
    }

    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.parts_mut());
        }
        for d in &mut self.bottleneck {
            out.push(&mut d.w);
            out.push(&mut d.b);
        }
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }

    /// Expected shape of each matrix, in [`ModelParams::matrices`] order.
    fn expected_shapes(&self) -> Vec<(usize, usize)> {
        let q = self.q;
        let mut out = Vec::new();
        for l in 0..self.layers.len() {
            let d_in = if l == 0 { self.p } else { q };
            out.extend([(d_in, q), (q, q), (1, q), (d_in, q), (q, q), (1, q), (d_in, q), (q, q), (1, q)]);
        }
        out.extend([(q, q), (1, q), (q, q), (1, q), (q, self.output_dim()), (1, self.output_dim())]);
        out
    }

    /// Checks that every matrix has the shape implied by `p`, `q`, layers and task.
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 || self.layers.is_empty() || self.output_dim() == 0 {
            return Err(Error::Format("p, q, layers and output dim must be >= 1".into()));
        }
        for ((name, m), want) in self.names().iter().zip(self.matrices()).zip(self.expected_shapes()) {
            if m.shape() != want {
                return Err(Error::Format(format!("{name} has shape {:?}, expected {want:?}", m.shape())));
            }
            if !m.is_finite() {
                return Err(Error::Format(format!("{name} holds non-finite values")));
            }
        }
        Ok(())
    }

    /// Registers every matrix on `tape` as a parameter.
    pub fn bind(&self, tape: &mut Tape) -> BoundModel {
        let handles: Vec<Tensor> = self.matrices().into_iter().map(|m| tape.param(m.clone())).collect();
        BoundModel {
            task: self.task,
            layers: self.layers.len(),
            handles,
        }
    }

    pub fn to_json(&self) -> String {
        self.to_json_with(serde_json::Map::new())
    }

    /// Serializes with extra top-level fields (ignored by [`ModelParams::from_json`]).
    pub fn to_json_with(&self, extra: serde_json::Map<String, serde_json::Value>) -> String {
        let weights = self
            .names()
            .into_iter()
            .zip(self.matrices())
            .map(|(n, m)| {
                (
                    n,
                    StoredMatrix {
                        shape: [m.rows(), m.cols()],
                        data: m.data().to_vec(),
                    },
                )
            })
            .collect();
        let doc = ModelDoc {
            version: MODEL_VERSION,
            task: self.task.name().to_string(),
            p: self.p,
            q: self.q,
            layers: self.layers.len(),
            r_or_c: self.output_dim(),
            weights,
            extra,
        };
        serde_json::to_string(&doc).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with(text).map(|(m, _)| m)
    }

    /// Parses a model file and returns it with any extra top-level fields.
    pub fn from_json_with(text: &str) -> Result<(Self, serde_json::Map<String, serde_json::Value>)> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
        match raw.get("version") {
            Some(serde_json::Value::Number(n)) if n.as_u64() == Some(MODEL_VERSION as u64) => {}
            Some(v) => {
                return Err(Error::Version {
                    found: v.to_string(),
                    supported: MODEL_VERSION,
                })
            }
            None => return Err(Error::Format("model file lacks a version field".into())),
        }
        let doc: ModelDoc = serde_json::from_value(raw).map_err(|e| Error::Format(format!("model file: {e}")))?;
        let task = match doc.task.as_str() {
            "regression" => Task::Regression(doc.r_or_c),
            "classification" => Task::Classification(doc.r_or_c),
            other => return Err(Error::Format(format!("unknown task `{other}`"))),
        };
        let mut model = ModelParams::zeros(doc.p, doc.q, doc.layers, task);
        let mut weights = doc.weights;
        let names = model.names();
        for (name, slot) in names.iter().zip(model.matrices_mut()) {
            let stored = weights
                .remove(name)
                .ok_or_else(|| Error::Format(format!("model file lacks weight `{name}`")))?;
            let [r, c] = stored.shape;
            if (r, c) != slot.shape() {
                return Err(Error::Format(format!(
                    "weight `{name}` has shape {:?}, expected {:?}",
                    (r, c),
                    slot.shape()
                )));
            }
            *slot = Matrix::from_vec(r, c, stored.data).map_err(|e| Error::Format(format!("weight `{name}`: {e}")))?;
        }
        if let Some(name) = weights.keys().next() {
            return Err(Error::Format(format!("unexpected weight `{name}`")));
        }
        model.validate()?;
        Ok((model, doc.extra))
    }
}

#[derive(Serialize, Deserialize)]
struct StoredMatrix {
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    task: String,
    p: usize,
    q: usize,
    layers: usize,
    r_or_c: usize,
    weights: BTreeMap<String, StoredMatrix>,
    #[serde(flatten)]
    extra: serde_json::Map<String, serde_json::Value>,
}

/// Weights ~ Uniform(-1/√q, 1/√q), biases 0.
pub fn init_params(p: usize, q: usize, layers: usize, task: Task, seed: u64) -> Result<ModelParams> {
    if p == 0 || q == 0 || layers == 0 || task.output_dim() == 0 {
        return Err(Error::Config("p, q, layers and output dim must be >= 1".into()));
    }
    let mut model = ModelParams::zeros(p, q, layers, task);
    let bound = 1.0 / (q as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in model.matrices_mut() {
        if m.rows() == 1 {
            continue;
        }
        for v in m.data_mut() {
            *v = rng.gen_range(-bound..bound);
        }
    }
    Ok(model)
}

/// Model parameters registered on a tape.
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub task: Task,
    layers: usize,
    /// One tensor per matrix, in [`ModelParams::matrices`] order.
    pub handles: Vec<Tensor>,
}

/// Per layer, the hidden state after each step (`B x q`).
#[derive(Debug, Clone)]
pub struct HiddenTrace {
    pub layers: Vec<Vec<Tensor>>,
}

impl HiddenTrace {
    pub fn steps(&self) -> usize {
        self.layers.first().map_or(0, Vec::len)
    }

    /// Restricts every state to rows `start..end`.
    pub fn slice_rows(&self, tape: &mut Tape, start: usize, end: usize) -> Result<HiddenTrace> {
        let layers = self
            .layers
            .iter()
            .map(|steps| steps.iter().map(|&h| tape.slice_rows(h, start, end)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(HiddenTrace { layers })
    }
}

impl BoundModel {
    /// Wraps tensors laid out in [`ModelParams::matrices`] order.
    pub fn from_handles(task: Task, layers: usize, handles: Vec<Tensor>) -> Result<Self> {
        if handles.len() != layers * 9 + 6 {
            return Err(Error::Contract(format!("{} handles for {layers} layers", handles.len())));
        }
        Ok(BoundModel { task, layers, handles })
    }

    pub fn layer_count(&self) -> usize {
        self.layers
    }

    fn gru(&self, layer: usize) -> &[Tensor] {
        &self.handles[layer * 9..layer * 9 + 9]
    }

    fn tail(&self) -> &[Tensor] {
        &self.handles[self.layers * 9..]
    }

    /// One GRU step of `layer` from input `x` and previous state `h`.
    pub fn gru_step(&self, tape: &mut Tape, layer: usize, x: Tensor, h: Tensor) -> Result<Tensor> {
        let g = self.gru(layer);
        let gate = |tape: &mut Tape, w: Tensor, u: Tensor, b: Tensor, h: Tensor| -> Result<Tensor> {
            let xw = tape.matmul(x, w)?;
            let hu = tape.matmul(h, u)?;
            let s = tape.add(xw, hu)?;
            tape.add_row(s, b)
        };
        let z_pre = gate(tape, g[0], g[1], g[2], h)?;
        let z = tape.sigmoid(z_pre)?;
        let r_pre = gate(tape, g[3], g[4], g[5], h)?;
        let r = tape.sigmoid(r_pre)?;
        let rh = tape.mul(r, h)?;
        let c_pre = gate(tape, g[6], g[7], g[8], rh)?;
        let cand = tape.tanh(c_pre)?;
        // h + z ⊙ (h̃ - h) == (1 - z) ⊙ h + z ⊙ h̃
        let diff = tape.sub(cand, h)?;
        let step = tape.mul(z, diff)?;
        tape.add(h, step)
    }

    /// Runs the stack over `xs` (one `B x p` tensor per step).
    pub fn forward(&self, tape: &mut Tape, xs: &[Tensor]) -> Result<(HiddenTrace, Tensor)> {
        if xs.is_empty() {
            return Err(Error::Contract("forward needs at least one step".into()));
        }
        let b = tape.shape(xs[0]).0;
        let q = tape.shape(self.gru(0)[1]).0;
        let mut inputs: Vec<Tensor> = xs.to_vec();
        let mut trace = Vec::with_capacity(self.layers);
        for layer in 0..self.layers {
            let mut h = tape.constant(Matrix::zeros(b, q));
            let mut states = Vec::with_capacity(inputs.len());
            for &x in &inputs {
                h = self.gru_step(tape, layer, x, h)?;
                states.push(h);
            }
            inputs = states.clone();
            trace.push(states);
        }
        let last = *inputs.last().expect("non-empty");
        let out = self.head(tape, last)?;
        Ok((HiddenTrace { layers: trace }, out))
    }

    /// Bottleneck and head applied to the final hidden state.
    fn head(&self, tape: &mut Tape, h: Tensor) -> Result<Tensor> {
        let t = self.tail();
        let mut x = h;
        for i in 0..2 {
            let a = tape.matmul(x, t[2 * i])?;
            let a = tape.add_row(a, t[2 * i + 1])?;
            x = tape.relu(a)?;
        }
        let y = tape.matmul(x, t[4])?;
        let y = tape.add_row(y, t[5])?;
        match self.task {
            Task::Regression(_) => Ok(y),
            Task::Classification(_) => tape.softmax_rows(y),
        }
    }
}

/// Turns `B` segments (`m x p` each) into `m` step matrices (`B x p` each).
pub fn batch_steps(segments: &[&Matrix]) -> Result<Vec<Matrix>> {
    let first = segments.first().ok_or_else(|| Error::Contract("empty batch".into()))?;
    let (m, p) = first.shape();
    if m == 0 {
        return Err(Error::Contract("segments need at least one step".into()));
    }
    if let Some(s) = segments.iter().find(|s| s.shape() != (m, p)) {
        return Err(Error::dim("batch_steps", format!("segment {:?} vs {:?}", s.shape(), (m, p))));
    }
    let b = segments.len();
    Ok((0..m)
        .map(|t| {
            let mut data = Vec::with_capacity(b * p);
            for s in segments {
                data.extend_from_slice(s.row(t));
            }
            Matrix::from_vec(b, p, data).expect("sized")
        })
        .collect())
}

/// Binds `params` and runs the forward pass on `segments`.
pub fn gru_forward(tape: &mut Tape, params: &ModelParams, segments: &[&Matrix]) -> Result<(BoundModel, HiddenTrace, Tensor)> {
    let steps = batch_steps(segments)?;
    if steps[0].cols() != params.p {
        return Err(Error::dim("gru_forward", format!("input has {} features, model expects {}", steps[0].cols(), params.p)));
    }
    let bound = params.bind(tape);
    let xs: Vec<Tensor> = steps.into_iter().map(|s| tape.constant(s)).collect();
    let (trace, out) = bound.forward(tape, &xs)?;
    Ok((bound, trace, out))
}

/// Forward pass without recording; returns `B x output_dim` predictions.
pub fn predict(params: &ModelParams, segments: &[&Matrix]) -> Result<Matrix> {
    let mut tape = Tape::no_grad();
    let (_, _, out) = gru_forward(&mut tape, params, segments)?;
    Ok(tape.value(out).clone())
}

/// Mean per-sample task loss: MSE for regression, cross-entropy for classification.
///
/// `targets` is `B x r` for regression and `B x 1` class indices for classification.
pub fn task_loss(tape: &mut Tape, task: Task, output: Tensor, targets: &Matrix) -> Result<Tensor> {
    let (b, d) = tape.shape(output);
    match task {
        Task::Regression(_) => {
            if targets.shape() != (b, d) {
                return Err(Error::dim("task_loss", format!("targets {:?} vs output {:?}", targets.shape(), (b, d))));
            }
            let y = tape.constant(targets.clone());
            let diff = tape.sub(output, y)?;
            let sq = tape.square(diff)?;
            tape.mean(sq)
        }
        Task::Classification(c) => {
            if targets.shape() != (b, 1) {
                return Err(Error::dim("task_loss", format!("labels {:?}, expected {:?}", targets.shape(), (b, 1))));
            }
            let mut onehot = Matrix::zeros(b, c);
            for i in 0..b {
                let label = targets.get(i, 0);
                if label < 0.0 || label.fract() != 0.0 || label as usize >= c {
                    return Err(Error::Data(format!("label {label} outside 0..{c}")));
                }
                onehot.set(i, label as usize, 1.0);
            }
            let y = tape.constant(onehot);
            let safe = tape.clamp(output, 1e-12, 1.0)?;
            let logp = tape.log(safe)?;
            let picked = tape.mul(logp, y)?;
            let s = tape.sum(picked)?;
            tape.scale(s, -1.0 / b as f64)
        }
    }
}

/// Stacks per-sample targets into the matrix [`task_loss`] expects.
pub fn target_matrix(task: Task, targets: &[&[f64]]) -> Result<Matrix> {
    let width = match task {
        Task::Regression(r) => r,
        Task::Classification(_) => 1,
    };
    let mut data = Vec::with_capacity(targets.len() * width);
    for t in targets {
        if t.len() < width {
            return Err(Error::dim("target_matrix", format!("target of length {} needs {width}", t.len())));
        }
        data.extend_from_slice(&t[..width]);
    }
    Matrix::from_vec(targets.len(), width, data)
}

#[cfg(test)]
mod tests;
