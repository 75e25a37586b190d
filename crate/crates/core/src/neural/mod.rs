//! Trainable classification core, built from scratch: LSTM cells with
//! full backpropagation through time, the dual-timescale two-camera
//! classifier head, cross-entropy loss, SGD/Adam optimizers, training
//! and whole-session prediction.
//!
//! The full model runs one LSTM over the 30-step high-frequency window
//! and one over the 120-step low-frequency window, concatenates their
//! final hidden states (32 each), and maps the result through two fully
//! connected layers (ReLU between them) to a 5-way softmax over tool
//! states. Single-timescale variants keep one LSTM and the same head
//! shape on a 32-wide input.

pub mod checkpoint;
mod linalg;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use linalg::{dot, Mat};
use linalg::{axpy, sigmoid};

use crate::error::{Error, Result};
use crate::features::{FeatureTable, FeatureWindowPair, HIGH_STEPS, LOW_STEPS, STEP_DIM};
use crate::ingest::SessionBundle;
use crate::model::{HandId, LabelTimeline, ToolState, N_HANDS, N_STATES};

/// Input width of each LSTM timestep (both cameras).
pub const INPUT_DIM: usize = STEP_DIM;
/// Hidden size of each LSTM.
pub const HIDDEN: usize = 32;
/// Width of the hidden fully connected layer.
pub const FC_HIDDEN: usize = 32;
/// Output classes (tool states per hand).
pub const N_OUT: usize = N_STATES;

const GATES: usize = 4 * HIDDEN;
const ZERO_HID: [f64; HIDDEN] = [0.0; HIDDEN];

/// Which input windows a model consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    HighOnly,
    LowOnly,
    Mcc,
}

impl Variant {
    pub fn uses_high(self) -> bool {
        matches!(self, Variant::HighOnly | Variant::Mcc)
    }

    pub fn uses_low(self) -> bool {
        matches!(self, Variant::LowOnly | Variant::Mcc)
    }

    pub fn n_branches(self) -> usize {
        match self {
            Variant::Mcc => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::HighOnly => "high-fps",
            Variant::LowOnly => "low-fps",
            Variant::Mcc => "mcc",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        match s {
            "high-fps" => Ok(Variant::HighOnly),
            "low-fps" => Ok(Variant::LowOnly),
            "mcc" => Ok(Variant::Mcc),
            other => Err(Error::domain(format!("unknown model variant `{other}`"))),
        }
    }
}

/// Weights of one LSTM: input and recurrent projections onto the four
/// gates (order i, f, g, o) plus gate biases.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_input: Mat,  // 4H x D
    pub w_hidden: Mat, // 4H x H
    pub bias: Vec<f64>, // 4H
}

impl LstmParams {
    pub fn zeros(input_dim: usize) -> Self {
        LstmParams {
            w_input: Mat::zeros(GATES, input_dim),
            w_hidden: Mat::zeros(GATES, HIDDEN),
            bias: vec![0.0; GATES],
        }
    }

    /// Uniform(+-1/sqrt(H)) weights, zero biases except the forget gate
    /// at +1.
    fn init(input_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (HIDDEN as f64).sqrt();
        let uniform = |rng: &mut ChaCha8Rng| rng.gen::<f64>() * 2.0 * bound - bound;
        let w_input = Mat::from_fn(GATES, input_dim, || uniform(rng));
        let w_hidden = Mat::from_fn(GATES, HIDDEN, || uniform(rng));
        let mut bias = vec![0.0; GATES];
        bias[HIDDEN..2 * HIDDEN].fill(1.0);
        LstmParams {
            w_input,
            w_hidden,
            bias,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.cols()
    }

    fn gates_into(&self, x: &[f64], h_prev: &[f64], gates: &mut [f64]) {
        gates.copy_from_slice(&self.bias);
        self.w_input.matvec_acc(x, gates);
        self.w_hidden.matvec_acc(h_prev, gates);
    }
}

/// One LSTM recurrence step: gates i, f, o are sigmoids, candidate g is
/// tanh, `c' = f*c + i*g`, `h' = o*tanh(c')`. Returns `(h', c')`.
pub fn lstm_step(
    params: &LstmParams,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != params.input_dim() || h.len() != HIDDEN || c.len() != HIDDEN {
        return Err(Error::domain(format!(
            "lstm_step shape mismatch: x {} (want {}), h {} and c {} (want {HIDDEN})",
            x.len(),
            params.input_dim(),
            h.len(),
            c.len()
        )));
    }
    let mut gates = vec![0.0; GATES];
    params.gates_into(x, h, &mut gates);
    let mut h_next = vec![0.0; HIDDEN];
    let mut c_next = vec![0.0; HIDDEN];
    for k in 0..HIDDEN {
        let i_ = sigmoid(gates[k]);
        let f_ = sigmoid(gates[HIDDEN + k]);
        let g_ = gates[2 * HIDDEN + k].tanh();
        let o_ = sigmoid(gates[3 * HIDDEN + k]);
        c_next[k] = f_ * c[k] + i_ * g_;
        h_next[k] = o_ * c_next[k].tanh();
    }
    Ok((h_next, c_next))
}

/// A fully connected layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Mat, // out x in
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Dense {
            weight: Mat::zeros(out, inp),
            bias: vec![0.0; out],
        }
    }

    fn init(out: usize, inp: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inp as f64).sqrt();
        Dense {
            weight: Mat::from_fn(out, inp, || rng.gen::<f64>() * 2.0 * bound - bound),
            bias: vec![0.0; out],
        }
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        self.weight.matvec_acc(x, out);
    }
}

/// Named tensor view: name, dimensions, data.
pub type TensorView<'a> = (&'static str, Vec<usize>, &'a [f64]);

/// All trainable weights of one classifier variant. Gradients reuse the
/// same structure, so tensor traversal order is shared by the
/// optimizers, the checkpoint format and the gradient checks.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    pub variant: Variant,
    pub lstm_high: Option<LstmParams>,
    pub lstm_low: Option<LstmParams>,
    pub fc1: Dense, // FC_HIDDEN x (HIDDEN * branches)
    pub fc2: Dense, // N_OUT x FC_HIDDEN
}

impl ClassifierParams {
    pub fn zeros(variant: Variant) -> Self {
        ClassifierParams {
            variant,
            lstm_high: variant.uses_high().then(|| LstmParams::zeros(INPUT_DIM)),
            lstm_low: variant.uses_low().then(|| LstmParams::zeros(INPUT_DIM)),
            fc1: Dense::zeros(FC_HIDDEN, HIDDEN * variant.n_branches()),
            fc2: Dense::zeros(N_OUT, FC_HIDDEN),
        }
    }

    pub fn init(variant: Variant, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(variant, &mut rng)
    }

    fn init_with_rng(variant: Variant, rng: &mut ChaCha8Rng) -> Self {
        ClassifierParams {
            variant,
            lstm_high: variant.uses_high().then(|| LstmParams::init(INPUT_DIM, rng)),
            lstm_low: variant.uses_low().then(|| LstmParams::init(INPUT_DIM, rng)),
            fc1: Dense::init(FC_HIDDEN, HIDDEN * variant.n_branches(), rng),
            fc2: Dense::init(N_OUT, FC_HIDDEN, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.variant)
    }

    /// Width of the concatenated hidden vector entering the head.
    pub fn concat_dim(&self) -> usize {
        HIDDEN * self.variant.n_branches()
    }

    /// Named views of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut out = Vec::with_capacity(10);
        if let Some(l) = &self.lstm_high {
            out.push(("lstm_high.w_input", vec![GATES, l.input_dim()], l.w_input.data()));
            out.push(("lstm_high.w_hidden", vec![GATES, HIDDEN], l.w_hidden.data()));
            out.push(("lstm_high.bias", vec![GATES], l.bias.as_slice()));
        }
        if let Some(l) = &self.lstm_low {
            out.push(("lstm_low.w_input", vec![GATES, l.input_dim()], l.w_input.data()));
            out.push(("lstm_low.w_hidden", vec![GATES, HIDDEN], l.w_hidden.data()));
            out.push(("lstm_low.bias", vec![GATES], l.bias.as_slice()));
        }
        out.push((
            "fc1.weight",
            vec![FC_HIDDEN, self.fc1.weight.cols()],
            self.fc1.weight.data(),
        ));
        out.push(("fc1.bias", vec![FC_HIDDEN], self.fc1.bias.as_slice()));
        out.push(("fc2.weight", vec![N_OUT, FC_HIDDEN], self.fc2.weight.data()));
        out.push(("fc2.bias", vec![N_OUT], self.fc2.bias.as_slice()));
        out
    }

    /// Mutable tensor views in the same order as [`Self::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out = Vec::with_capacity(10);
        if let Some(l) = &mut self.lstm_high {
            out.push(("lstm_high.w_input", l.w_input.data_mut()));
            out.push(("lstm_high.w_hidden", l.w_hidden.data_mut()));
            out.push(("lstm_high.bias", l.bias.as_mut_slice()));
        }
        if let Some(l) = &mut self.lstm_low {
            out.push(("lstm_low.w_input", l.w_input.data_mut()));
            out.push(("lstm_low.w_hidden", l.w_hidden.data_mut()));
            out.push(("lstm_low.bias", l.bias.as_mut_slice()));
        }
        out.push(("fc1.weight", self.fc1.weight.data_mut()));
        out.push(("fc1.bias", self.fc1.bias.as_mut_slice()));
        out.push(("fc2.weight", self.fc2.weight.data_mut()));
        out.push(("fc2.bias", self.fc2.bias.as_mut_slice()));
        out
    }

    /// Element-wise `self += other * s`; shapes must match.
    pub fn add_scaled(&mut self, other: &ClassifierParams, s: f64) {
        for ((_, dst), (_, _, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(s, src, dst);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= s;
            }
        }
    }
}

/// Dropout applied to the concatenated hidden vector. Mask entries are
/// pre-scaled to `1/(1-p)` for kept units and `0` for dropped ones, so
/// an all-ones mask (p = 0) reproduces eval mode exactly.
pub enum Dropout<'a> {
    Eval,
    Mask(&'a [f64]),
}

/// Per-step activations of one LSTM run, kept for backpropagation.
struct BranchCache {
    steps: usize,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
}

impl BranchCache {
    fn row(buf: &[f64], t: usize) -> &[f64] {
        &buf[t * HIDDEN..(t + 1) * HIDDEN]
    }

    fn last_h(&self) -> &[f64] {
        Self::row(&self.h, self.steps - 1)
    }
}

fn run_lstm(params: &LstmParams, xs: &[&[f64]]) -> BranchCache {
    let steps = xs.len();
    let mut cache = BranchCache {
        steps,
        i: vec![0.0; steps * HIDDEN],
        f: vec![0.0; steps * HIDDEN],
        g: vec![0.0; steps * HIDDEN],
        o: vec![0.0; steps * HIDDEN],
        c: vec![0.0; steps * HIDDEN],
        tc: vec![0.0; steps * HIDDEN],
        h: vec![0.0; steps * HIDDEN],
    };
    let mut h_prev = [0.0; HIDDEN];
    let mut c_prev = [0.0; HIDDEN];
    let mut gates = [0.0; GATES];
    for (t, x) in xs.iter().enumerate() {
        params.gates_into(x, &h_prev, &mut gates);
        let base = t * HIDDEN;
        for k in 0..HIDDEN {
            let i_ = sigmoid(gates[k]);
            let f_ = sigmoid(gates[HIDDEN + k]);
            let g_ = gates[2 * HIDDEN + k].tanh();
            let o_ = sigmoid(gates[3 * HIDDEN + k]);
            let c_ = f_ * c_prev[k] + i_ * g_;
            let tc_ = c_.tanh();
            let h_ = o_ * tc_;
            cache.i[base + k] = i_;
            cache.f[base + k] = f_;
            cache.g[base + k] = g_;
            cache.o[base + k] = o_;
            cache.c[base + k] = c_;
            cache.tc[base + k] = tc_;
            cache.h[base + k] = h_;
            h_prev[k] = h_;
            c_prev[k] = c_;
        }
    }
    cache
}

/// Backpropagate through one LSTM run given the gradient at the final
/// hidden state, accumulating parameter gradients into `grads`.
fn backward_lstm(
    params: &LstmParams,
    xs: &[&[f64]],
    cache: &BranchCache,
    dh_last: &[f64],
    grads: &mut LstmParams,
) {
    let mut dh = dh_last.to_vec();
    let mut dc = [0.0; HIDDEN];
    let mut da = [0.0; GATES];
    for t in (0..cache.steps).rev() {
        let i = BranchCache::row(&cache.i, t);
        let f = BranchCache::row(&cache.f, t);
        let g = BranchCache::row(&cache.g, t);
        let o = BranchCache::row(&cache.o, t);
        let tc = BranchCache::row(&cache.tc, t);
        let c_prev: &[f64] = if t > 0 {
            BranchCache::row(&cache.c, t - 1)
        } else {
            &ZERO_HID
        };
        let h_prev: &[f64] = if t > 0 {
            BranchCache::row(&cache.h, t - 1)
        } else {
            &ZERO_HID
        };
        for k in 0..HIDDEN {
            let do_ = dh[k] * tc[k];
            let dck = dc[k] + dh[k] * o[k] * (1.0 - tc[k] * tc[k]);
            let di = dck * g[k];
            let dg = dck * i[k];
            let df = dck * c_prev[k];
            da[k] = di * i[k] * (1.0 - i[k]);
            da[HIDDEN + k] = df * f[k] * (1.0 - f[k]);
            da[2 * HIDDEN + k] = dg * (1.0 - g[k] * g[k]);
            da[3 * HIDDEN + k] = do_ * o[k] * (1.0 - o[k]);
            dc[k] = dck * f[k];
        }
        grads.w_input.add_outer(&da, xs[t]);
        grads.w_hidden.add_outer(&da, h_prev);
        axpy(1.0, &da, &mut grads.bias);
        dh.fill(0.0);
        params.w_hidden.tmatvec_acc(&da, &mut dh);
    }
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    branch_high: Option<BranchCache>,
    branch_low: Option<BranchCache>,
    zd: Vec<f64>,
    a1: Vec<f64>,
    r: Vec<f64>,
    probs: [f64; N_OUT],
}

impl ForwardCache {
    pub fn probs(&self) -> [f64; N_OUT] {
        self.probs
    }
}

fn check_window(name: &str, xs: &[&[f64]], steps: usize) -> Result<()> {
    if xs.len() != steps || xs.iter().any(|x| x.len() != STEP_DIM) {
        return Err(Error::domain(format!(
            "{name} window must be {steps} x {STEP_DIM} timesteps"
        )));
    }
    Ok(())
}

fn forward_views(
    params: &ClassifierParams,
    high: &[&[f64]],
    low: &[&[f64]],
    dropout: &Dropout,
) -> ForwardCache {
    let branch_high = params.lstm_high.as_ref().map(|l| run_lstm(l, high));
    let branch_low = params.lstm_low.as_ref().map(|l| run_lstm(l, low));
    let mut z = Vec::with_capacity(params.concat_dim());
    if let Some(b) = &branch_high {
        z.extend_from_slice(b.last_h());
    }
    if let Some(b) = &branch_low {
        z.extend_from_slice(b.last_h());
    }
    let zd = match dropout {
        Dropout::Eval => z,
        Dropout::Mask(mask) => {
            debug_assert_eq!(mask.len(), z.len());
            z.iter().zip(mask.iter()).map(|(v, m)| v * m).collect()
        }
    };
    let mut a1 = vec![0.0; FC_HIDDEN];
    params.fc1.apply_into(&zd, &mut a1);
    let r: Vec<f64> = a1.iter().map(|&v| v.max(0.0)).collect();
    let mut logits = [0.0; N_OUT];
    params.fc2.apply_into(&r, &mut logits);
    let probs = softmax(&logits);
    ForwardCache {
        branch_high,
        branch_low,
        zd,
        a1,
        r,
        probs,
    }
}

fn softmax(logits: &[f64; N_OUT]) -> [f64; N_OUT] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_OUT];
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    out
}

/// Run the classifier on one window pair. Returns the class
/// probabilities (summing to 1) and the cache consumed by
/// [`loss_and_grad`]'s backward pass.
pub fn forward(
    params: &ClassifierParams,
    win: &FeatureWindowPair,
    dropout: Dropout,
) -> Result<([f64; N_OUT], ForwardCache)> {
    let high = win.high.step_views();
    let low = win.low.step_views();
    check_window("high", &high, HIGH_STEPS)?;
    check_window("low", &low, LOW_STEPS)?;
    if let Dropout::Mask(mask) = &dropout {
        if mask.len() != params.concat_dim() {
            return Err(Error::domain(format!(
                "dropout mask length {} != concatenated hidden width {}",
                mask.len(),
                params.concat_dim()
            )));
        }
    }
    let high_v: &[&[f64]] = if params.variant.uses_high() { &high } else { &[] };
    let low_v: &[&[f64]] = if params.variant.uses_low() { &low } else { &[] };
    let cache = forward_views(params, high_v, low_v, &dropout);
    Ok((cache.probs, cache))
}

/// Class probabilities in eval mode.
pub fn predict_probs(params: &ClassifierParams, win: &FeatureWindowPair) -> Result<[f64; N_OUT]> {
    Ok(forward(params, win, Dropout::Eval)?.0)
}

/// Argmax tool state; probability ties resolve to the lowest index.
pub fn argmax_state(probs: &[f64; N_OUT]) -> ToolState {
    let mut best = 0usize;
    for (k, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = k;
        }
    }
    ToolState::ALL[best]
}

/// One training example: window views, the target state, and an
/// optional pre-scaled dropout mask.
pub struct BatchItem<'a> {
    pub high: Vec<&'a [f64]>,
    pub low: Vec<&'a [f64]>,
    pub label: ToolState,
    pub mask: Option<Vec<f64>>,
}

impl<'a> BatchItem<'a> {
    pub fn from_window(win: &'a FeatureWindowPair, label: ToolState) -> Self {
        BatchItem {
            high: win.high.step_views(),
            low: win.low.step_views(),
            label,
            mask: None,
        }
    }
}

fn item_loss_and_grad(
    params: &ClassifierParams,
    item: &BatchItem<'_>,
    class_weights: Option<&[f64; N_OUT]>,
) -> (f64, ClassifierParams) {
    let dropout = match &item.mask {
        Some(m) => Dropout::Mask(m),
        None => Dropout::Eval,
    };
    let high: &[&[f64]] = if params.variant.uses_high() {
        &item.high
    } else {
        &[]
    };
    let low: &[&[f64]] = if params.variant.uses_low() {
        &item.low
    } else {
        &[]
    };
    let cache = forward_views(params, high, low, &dropout);
    let y = item.label.index();
    let weight = class_weights.map_or(1.0, |w| w[y]);
    // Cross-entropy; a degenerate probability surfaces as a non-finite
    // loss rather than being clamped away.
    let loss = -cache.probs[y].ln() * weight;

    let mut grads = params.zeros_like();

    // d loss / d logits = probs - onehot, scaled by the class weight.
    let mut dlogits = cache.probs;
    dlogits[y] -= 1.0;
    for d in dlogits.iter_mut() {
        *d *= weight;
    }

    grads.fc2.weight.add_outer(&dlogits, &cache.r);
    axpy(1.0, &dlogits, &mut grads.fc2.bias);
    let mut dr = vec![0.0; FC_HIDDEN];
    params.fc2.weight.tmatvec_acc(&dlogits, &mut dr);

    let da1: Vec<f64> = dr
        .iter()
        .zip(&cache.a1)
        .map(|(&d, &a)| if a > 0.0 { d } else { 0.0 })
        .collect();

    grads.fc1.weight.add_outer(&da1, &cache.zd);
    axpy(1.0, &da1, &mut grads.fc1.bias);
    let mut dzd = vec![0.0; cache.zd.len()];
    params.fc1.weight.tmatvec_acc(&da1, &mut dzd);

    let dz: Vec<f64> = match &item.mask {
        Some(mask) => dzd.iter().zip(mask).map(|(&d, &m)| d * m).collect(),
        None => dzd,
    };

    let mut offset = 0;
    if let (Some(l), Some(cache_h), Some(g)) = (
        params.lstm_high.as_ref(),
        cache.branch_high.as_ref(),
        grads.lstm_high.as_mut(),
    ) {
        backward_lstm(l, high, cache_h, &dz[offset..offset + HIDDEN], g);
        offset += HIDDEN;
    }
    if let (Some(l), Some(cache_l), Some(g)) = (
        params.lstm_low.as_ref(),
        cache.branch_low.as_ref(),
        grads.lstm_low.as_mut(),
    ) {
        backward_lstm(l, low, cache_l, &dz[offset..offset + HIDDEN], g);
    }
    (loss, grads)
}

/// Mean cross-entropy over a batch and its gradients with respect to
/// every parameter tensor. Items are evaluated in parallel; the
/// reduction order is fixed, so results are bit-stable.
pub fn loss_and_grad(
    params: &ClassifierParams,
    batch: &[BatchItem<'_>],
    class_weights: Option<&[f64; N_OUT]>,
) -> Result<(f64, ClassifierParams)> {
    if batch.is_empty() {
        return Err(Error::domain("loss_and_grad requires a non-empty batch"));
    }
    let per_item: Vec<(f64, ClassifierParams)> = batch
        .par_iter()
        .map(|item| item_loss_and_grad(params, item, class_weights))
        .collect();
    let mut total_loss = 0.0;
    let mut grads = params.zeros_like();
    for (loss, g) in &per_item {
        total_loss += loss;
        grads.add_scaled(g, 1.0);
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((total_loss * inv, grads))
}

/// Optimizer choice for [`train`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct AdamMoments {
    m: ClassifierParams,
    v: ClassifierParams,
    step: usize,
}

enum OptimizerState {
    Sgd,
    Adam(Box<AdamMoments>),
}

impl OptimizerState {
    fn new(kind: OptimizerKind, params: &ClassifierParams) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam(Box::new(AdamMoments {
                m: params.zeros_like(),
                v: params.zeros_like(),
                step: 0,
            })),
        }
    }

    fn apply(&mut self, params: &mut ClassifierParams, grads: &ClassifierParams, lr: f64) {
        match self {
            OptimizerState::Sgd => params.add_scaled(grads, -lr),
            OptimizerState::Adam(adam) => {
                adam.step += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(adam.step as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(adam.step as i32);
                let pt = params.tensors_mut();
                let gt = grads.tensors();
                let mt = adam.m.tensors_mut();
                let vt = adam.v.tensors_mut();
                for ((((_, p), (_, _, g)), (_, m_)), (_, v_)) in
                    pt.into_iter().zip(gt).zip(mt).zip(vt)
                {
                    for idx in 0..p.len() {
                        m_[idx] = ADAM_BETA1 * m_[idx] + (1.0 - ADAM_BETA1) * g[idx];
                        v_[idx] = ADAM_BETA2 * v_[idx] + (1.0 - ADAM_BETA2) * g[idx] * g[idx];
                        let mhat = m_[idx] / bc1;
                        let vhat = v_[idx] / bc2;
                        p[idx] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Training hyperparameters. An "epoch" draws a fixed number of
/// (hand, frame) samples from each training video rather than sweeping
/// every frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub samples_per_video_per_epoch: usize,
    /// Optional per-state loss weights (e.g. inverse frequency); off by
    /// default.
    pub class_weights: Option<[f64; N_OUT]>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            learning_rate: 1e-4,
            dropout_p: 0.3,
            batch_size: 16,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            samples_per_video_per_epoch: 256,
            class_weights: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::field("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::field("dropout_p", "must be in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::field("batch_size", "must be positive"));
        }
        if self.samples_per_video_per_epoch == 0 {
            return Err(Error::field("samples_per_video_per_epoch", "must be positive"));
        }
        Ok(())
    }
}

/// Final parameters and the per-epoch mean training loss.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ClassifierParams,
    pub loss_history: Vec<f64>,
}

/// Train one classifier variant on labeled sessions.
///
/// Deterministic given the config seed: initialization, sampling,
/// shuffling and dropout all draw from one seeded generator, and batch
/// gradients are reduced in a fixed order.
pub fn train<'a>(
    sessions: impl IntoIterator<Item = &'a SessionBundle>,
    variant: Variant,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let sessions: Vec<&SessionBundle> = sessions.into_iter().collect();
    if sessions.is_empty() {
        return Err(Error::domain("training requires at least one session"));
    }
    let mut truths = Vec::with_capacity(sessions.len());
    for s in &sessions {
        match &s.truth {
            Some(t) => truths.push(t),
            None => {
                return Err(Error::domain(format!(
                    "session `{}` has no ground-truth labels",
                    s.session_id
                )))
            }
        }
        if s.n_frames == 0 {
            return Err(Error::domain(format!(
                "session `{}` has no frames",
                s.session_id
            )));
        }
    }
    let tables: Vec<FeatureTable> = sessions.par_iter().map(|s| FeatureTable::build(s)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ClassifierParams::init_with_rng(variant, &mut rng);
    let mut opt = OptimizerState::new(cfg.optimizer, &params);
    let z_len = params.concat_dim();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut samples: Vec<(usize, HandId, usize)> = Vec::new();
        for (si, table) in tables.iter().enumerate() {
            for _ in 0..cfg.samples_per_video_per_epoch {
                let hand = HandId::ALL[rng.gen_range(0..N_HANDS)];
                let t = rng.gen_range(0..table.n_frames());
                samples.push((si, hand, t));
            }
        }
        samples.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut n_items = 0usize;
        for chunk in samples.chunks(cfg.batch_size) {
            let items: Vec<BatchItem<'_>> = chunk
                .iter()
                .map(|&(si, hand, t)| {
                    let high = if variant.uses_high() {
                        tables[si].high_window_views(hand, t)
                    } else {
                        Vec::new()
                    };
                    let low = if variant.uses_low() {
                        tables[si].low_window_views(hand, t)
                    } else {
                        Vec::new()
                    };
                    let mask = (cfg.dropout_p > 0.0).then(|| {
                        let keep = 1.0 - cfg.dropout_p;
                        (0..z_len)
                            .map(|_| {
                                if rng.gen::<f64>() < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect::<Vec<f64>>()
                    });
                    BatchItem {
                        high,
                        low,
                        label: truths[si].label(hand, t),
                        mask,
                    }
                })
                .collect();
            let (loss, grads) = loss_and_grad(&params, &items, cfg.class_weights.as_ref())?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            opt.apply(&mut params, &grads, cfg.learning_rate);
            epoch_loss += loss * items.len() as f64;
            n_items += items.len();
        }
        loss_history.push(epoch_loss / n_items as f64);
    }

    Ok(TrainOutcome {
        params,
        loss_history,
    })
}

/// Classify every (hand, frame) of a session with a trained model.
/// Frames are processed in parallel; output order is fixed.
pub fn predict_session(params: &ClassifierParams, bundle: &SessionBundle) -> LabelTimeline {
    let table = FeatureTable::build(bundle);
    predict_with_table(params, &table)
}

/// Numerical gradient check: compare the analytic gradients of
/// [`loss_and_grad`] against central finite differences at `eps`,
/// sampling `coords_per_tensor` coordinates from every tensor. Returns
/// the maximum relative error observed.
///
/// The relative error uses `|a - n| / max(|a| + |n|, 1e-6)`; the
/// absolute floor keeps coordinates whose true gradient is zero (dead
/// ReLU units) from amplifying floating-point noise.
pub fn gradient_check(
    params: &ClassifierParams,
    batch: &[BatchItem<'_>],
    eps: f64,
    coords_per_tensor: usize,
    seed: u64,
) -> Result<f64> {
    let (_, analytic) = loss_and_grad(params, batch, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let n_tensors = params.tensors().len();
    for ti in 0..n_tensors {
        let len = params.tensors()[ti].2.len();
        for _ in 0..coords_per_tensor {
            let j = rng.gen_range(0..len);
            let mut plus = params.clone();
            plus.tensors_mut()[ti].1[j] += eps;
            let (loss_plus, _) = loss_and_grad(&plus, batch, None)?;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].1[j] -= eps;
            let (loss_minus, _) = loss_and_grad(&minus, batch, None)?;
            let numeric = (loss_plus - loss_minus) / (2.0 * eps);
            let a = analytic.tensors()[ti].2[j];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
            max_err = max_err.max(err);
        }
    }
    Ok(max_err)
}

/// Same as [`predict_session`] but reusing a prebuilt feature table.
pub fn predict_with_table(params: &ClassifierParams, table: &FeatureTable) -> LabelTimeline {
    let n = table.n_frames();
    let labels: [Vec<ToolState>; N_HANDS] = std::array::from_fn(|hand_idx| {
        let hand = HandId::ALL[hand_idx];
        (0..n)
            .into_par_iter()
            .map(|t| {
                let high = if params.variant.uses_high() {
                    table.high_window_views(hand, t)
                } else {
                    Vec::new()
                };
                let low = if params.variant.uses_low() {
                    table.low_window_views(hand, t)
                } else {
                    Vec::new()
                };
                let cache = forward_views(params, &high, &low, &Dropout::Eval);
                argmax_state(&cache.probs)
            })
            .collect()
    });
    LabelTimeline::from_labels(labels).expect("per-hand predictions share length")
}
