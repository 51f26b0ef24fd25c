//! Small dense softmax classifiers, their losses and a seeded trainer.
//!
//! A network is a chain of fully connected hidden layers (rectifier or
//! tanh), optionally with identity skips between equal-width hidden layers,
//! followed by a linear output layer and a softmax.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to at least this before any logarithm.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub name: String,
    pub hidden_widths: Vec<usize>,
    /// One activation per hidden layer.
    pub activations: Vec<Activation>,
    /// `(i, j)` adds the output of hidden layer `i` to hidden layer `j`.
    #[serde(default)]
    pub residual_pairs: Vec<(usize, usize)>,
}

impl ArchitectureSpec {
    pub fn new(name: &str, hidden_widths: &[usize], activation: Activation) -> Self {
        Self {
            name: name.to_string(),
            hidden_widths: hidden_widths.to_vec(),
            activations: vec![activation; hidden_widths.len()],
            residual_pairs: Vec::new(),
        }
    }

    pub fn with_residual(mut self, from: usize, to: usize) -> Self {
        self.residual_pairs.push((from, to));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("architecture {:?}: {m}", self.name)));
        if self.name.is_empty() || self.name.contains(char::is_whitespace) {
            return bad("name must be a nonempty identifier without whitespace".into());
        }
        if self.hidden_widths.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if self.activations.len() != self.hidden_widths.len() {
            return bad(format!(
                "{} activations for {} hidden layers",
                self.activations.len(),
                self.hidden_widths.len()
            ));
        }
        for &(i, j) in &self.residual_pairs {
            if i >= j || j >= self.hidden_widths.len() {
                return bad(format!("residual pair ({i}, {j}) must satisfy i < j < hidden layers"));
            }
            if self.hidden_widths[i] != self.hidden_widths[j] {
                return bad(format!("residual pair ({i}, {j}) joins layers of different width"));
            }
        }
        Ok(())
    }

    /// Hidden layers plus the output layer.
    pub fn num_layers(&self) -> usize {
        self.hidden_widths.len() + 1
    }
}

/// Dense affine map; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in self
            .weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .enumerate()
        {
            out[o] = b + dot(row, x);
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let split = n - n % 4;
    for (ca, cb) in a[..split].chunks_exact(4).zip(b[..split].chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += ca[k] * cb[k];
        }
    }
    let tail: f64 = a[split..].iter().zip(&b[split..]).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: ArchitectureSpec,
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
}

/// Parameter-shaped gradient (or any per-parameter quantity).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Flattened view: each layer's weights then its bias, layer by layer.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= s);
            l.bias.iter_mut().for_each(|b| *b *= s);
        }
    }
}

/// Which training objective a target vector is scored with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// One-hot targets scored by cross-entropy.
    Precise,
    /// Distribution targets scored by KL divergence.
    Ambiguous,
}

/// Cross-entropy variant used for precise targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossEntropyForm {
    /// Binary cross-entropy of every class output, summed over classes.
    #[default]
    PerClassBinary,
    /// `-log p[target]`.
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub weight_decay: f64,
    pub frozen_prefix_layers: usize,
    pub loss: LossKind,
    pub loss_form: CrossEntropyForm,
    /// Stop once the epoch-mean loss changes by less than this.
    pub stop_tolerance: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            lr_start: 1e-4,
            lr_end: 1e-8,
            weight_decay: 0.0,
            frozen_prefix_layers: 0,
            loss: LossKind::Precise,
            loss_form: CrossEntropyForm::PerClassBinary,
            stop_tolerance: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Retraining defaults: KL objective, weight decay 5e-4, first layer
    /// frozen, stop when the loss stalls.
    pub fn retrain() -> Self {
        Self {
            weight_decay: 0.0005,
            frozen_prefix_layers: 1,
            loss: LossKind::Ambiguous,
            stop_tolerance: Some(1e-6),
            ..Self::default()
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let err = |name: &str, msg: &str| Err(Error::config(format!("{field}.{name}"), msg));
        if self.batch_size == 0 {
            return err("batch_size", "must be positive");
        }
        if !(self.lr_start.is_finite() && self.lr_start > 0.0) {
            return err("lr_start", "must be positive");
        }
        if !(self.lr_end.is_finite() && self.lr_end > 0.0 && self.lr_end <= self.lr_start) {
            return err("lr_end", "must be positive and <= lr_start");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return err("weight_decay", "must be nonnegative");
        }
        if let Some(t) = self.stop_tolerance {
            if !(t.is_finite() && t >= 0.0) {
                return err("stop_tolerance", "must be nonnegative");
            }
        }
        Ok(())
    }

    /// Learning rate at `epoch`, interpolated geometrically from `lr_start`
    /// at the first epoch to `lr_end` at the last.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.lr_start;
        }
        let frac = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(frac)
    }
}

/// Per-sample forward state kept for backpropagation.
struct Trace {
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
    /// Activations of each hidden layer, before residual addition.
    act: Vec<Vec<f64>>,
    /// Outputs of each hidden layer, after residual addition.
    out: Vec<Vec<f64>>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    /// Scratch for backpropagated gradients w.r.t. hidden outputs.
    d_out: Vec<Vec<f64>>,
    d_logits: Vec<f64>,
}

impl Trace {
    fn new(net: &Network) -> Self {
        let hidden = |_| net.spec.hidden_widths.iter().map(|&w| vec![0.0; w]).collect::<Vec<_>>();
        Self {
            pre: hidden(()),
            act: hidden(()),
            out: hidden(()),
            d_out: hidden(()),
            logits: vec![0.0; net.output_dim],
            probs: vec![0.0; net.output_dim],
            d_logits: vec![0.0; net.output_dim],
        }
    }
}

pub(crate) fn softmax_into(logits: &[f64], probs: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (p, l) in probs.iter_mut().zip(logits) {
        *p = (l - max).exp();
        z += *p;
    }
    probs.iter_mut().for_each(|p| *p /= z);
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn init(spec: &ArchitectureSpec, input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![input_dim];
        dims.extend(&spec.hidden_widths);
        dims.push(output_dim);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
                Layer {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights: (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            layers,
            input_dim,
            output_dim,
        })
    }

    /// Assemble a network from explicit parameters.
    pub fn from_layers(spec: ArchitectureSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.num_layers() {
            return Err(Error::invalid(format!(
                "{} layers given, architecture needs {}",
                layers.len(),
                spec.num_layers()
            )));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 {
                return Err(Error::invalid(format!("layer {i} has a zero dimension")));
            }
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::invalid(format!("layer {i} parameter shapes are inconsistent")));
            }
            if let Some(&w) = spec.hidden_widths.get(i) {
                if l.outputs != w {
                    return Err(Error::invalid(format!("layer {i} has {} outputs, expected {w}", l.outputs)));
                }
            }
            if i > 0 && l.inputs != layers[i - 1].outputs {
                return Err(Error::invalid(format!("layer {i} input does not match layer {}", i - 1)));
            }
        }
        let input_dim = layers[0].inputs;
        let output_dim = layers.last().map(|l| l.outputs).unwrap_or(0);
        Ok(Self {
            spec,
            layers,
            input_dim,
            output_dim,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flattened parameters in the same order as [`Gradients::iter`].
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    /// Mutable access to the `index`-th flattened parameter.
    pub fn parameter_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            if index < l.weights.len() {
                return &mut l.weights[index];
            }
            index -= l.weights.len();
            if index < l.bias.len() {
                return &mut l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::invalid(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn run(&self, x: &[f64], t: &mut Trace) {
        let hidden = self.spec.hidden_widths.len();
        for l in 0..hidden {
            let (before, rest) = t.out.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &before[l - 1] };
            self.layers[l].apply(input, &mut t.pre[l]);
            let act = self.spec.activations[l];
            for (a, &z) in t.act[l].iter_mut().zip(&t.pre[l]) {
                *a = match act {
                    Activation::Relu => z.max(0.0),
                    Activation::Tanh => z.tanh(),
                };
            }
            rest[0].copy_from_slice(&t.act[l]);
            for &(i, j) in &self.spec.residual_pairs {
                if j == l {
                    for (o, s) in rest[0].iter_mut().zip(&before[i]) {
                        *o += s;
                    }
                }
            }
        }
        let input: &[f64] = if hidden == 0 { x } else { &t.out[hidden - 1] };
        self.layers[hidden].apply(input, &mut t.logits);
        softmax_into(&t.logits, &mut t.probs);
    }

    /// Accumulate gradients of a loss whose derivative w.r.t. the logits is
    /// already stored in `t.d_logits`.
    fn backprop(&self, x: &[f64], t: &mut Trace, grads: &mut Gradients, frozen: usize) {
        let hidden = self.spec.hidden_widths.len();
        for d in &mut t.d_out {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut delta = t.d_logits.clone();
        for l in (0..=hidden).rev() {
            let input: &[f64] = if l == 0 { x } else { &t.out[l - 1] };
            let layer = &self.layers[l];
            if l >= frozen {
                let g = &mut grads.layers[l];
                for (o, &d) in delta.iter().enumerate() {
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, v) in row.iter_mut().zip(input) {
                        *gw += d * v;
                    }
                }
            }
            if l <= frozen {
                break;
            }
            // Gradient w.r.t. the output of hidden layer l-1.
            let below = l - 1;
            {
                let d_in = &mut t.d_out[below];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (di, w) in d_in.iter_mut().zip(row) {
                        *di += d * w;
                    }
                }
            }
            // Skip connections feeding from `below` pass the gradient through.
            let d_here = t.d_out[below].clone();
            for &(i, j) in &self.spec.residual_pairs {
                if j == below {
                    for (di, d) in t.d_out[i].iter_mut().zip(&d_here) {
                        *di += d;
                    }
                }
            }
            let act = self.spec.activations[below];
            delta = d_here
                .iter()
                .zip(&t.pre[below])
                .zip(&t.act[below])
                .map(|((d, &z), &a)| {
                    d * match act {
                        Activation::Relu => {
                            if z > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Activation::Tanh => 1.0 - a * a,
                    }
                })
                .collect();
        }
    }
}

pub fn init_network(spec: &ArchitectureSpec, input_dim: usize, output_dim: usize, seed: u64) -> Result<Network> {
    Network::init(spec, input_dim, output_dim, seed)
}

/// Softmax output distribution for one input.
pub fn forward(network: &Network, features: &[f64]) -> Result<Vec<f64>> {
    network.check_input(features)?;
    let mut t = Trace::new(network);
    network.run(features, &mut t);
    Ok(t.probs)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub fn predict(network: &Network, features: &[f64]) -> Result<(usize, Vec<f64>)> {
    let probs = forward(network, features)?;
    Ok((argmax(&probs), probs))
}

/// Output of the last hidden layer.
pub fn extract_features(network: &Network, features: &[f64]) -> Result<Vec<f64>> {
    let hidden = network.spec.hidden_widths.len();
    if hidden == 0 {
        return Err(Error::UnsupportedArchitecture(format!(
            "{} has no hidden layer to extract features from",
            network.spec.name
        )));
    }
    network.check_input(features)?;
    let mut t = Trace::new(network);
    network.run(features, &mut t);
    Ok(t.out.swap_remove(hidden - 1))
}

fn check_shapes(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(format!(
            "shape mismatch: prediction has {} entries, target has {}",
            b.len(),
            a.len()
        )));
    }
    Ok(())
}

/// `1 - p[k]` computed as the sum of the other entries, which keeps full
/// relative precision when `p[k]` is close to 1.
fn complement(p: &[f64], k: usize) -> f64 {
    p.iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, v)| v)
        .sum()
}

/// Per-class binary cross-entropy summed over classes:
/// `-sum_i [y_i ln p_i + (1 - y_i) ln(1 - p_i)]`, with `p_i` clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn cross_entropy_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_shapes(target, pred)?;
    Ok(binary_ce_value(pred, target))
}

fn binary_ce_value(pred: &[f64], target: &[f64]) -> f64 {
    let mut loss = 0.0;
    for (k, (&p, &y)) in pred.iter().zip(target).enumerate() {
        let q = complement(pred, k);
        if y != 0.0 {
            loss -= y * p.max(LOG_EPS).ln();
        }
        if y != 1.0 {
            loss -= (1.0 - y) * q.max(LOG_EPS).ln();
        }
    }
    loss
}

/// `-ln p[target class]` for a one-hot target, clamped.
pub fn categorical_cross_entropy(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_shapes(target, pred)?;
    Ok(categorical_value(pred, target))
}

fn categorical_value(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter()
        .zip(target)
        .filter(|(_, &y)| y != 0.0)
        .map(|(&p, &y)| -y * p.max(LOG_EPS).ln())
        .sum()
}

/// `KL(target || pred) = sum_k t_k ln(t_k / p_k)` with `0 ln 0 = 0` and
/// `p_k` clamped to at least 1e-12.
pub fn kl_loss(target: &[f64], pred: &[f64]) -> Result<f64> {
    check_shapes(target, pred)?;
    Ok(kl_value(target, pred))
}

fn kl_value(target: &[f64], pred: &[f64]) -> f64 {
    target
        .iter()
        .zip(pred)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &p)| t * (t.ln() - p.max(LOG_EPS).ln()))
        .sum()
}

/// Loss value and its gradient w.r.t. the logits.
fn loss_and_logit_grad(kind: LossKind, form: CrossEntropyForm, probs: &[f64], target: &[f64], d_logits: &mut [f64]) -> f64 {
    // d loss / d p, with zero slope wherever a clamp is active.
    let mut dp = vec![0.0; probs.len()];
    let value = match (kind, form) {
        (LossKind::Ambiguous, _) => {
            for (k, (&t, &p)) in target.iter().zip(probs).enumerate() {
                if t > 0.0 && p > LOG_EPS {
                    dp[k] = -t / p;
                }
            }
            kl_value(target, probs)
        }
        (LossKind::Precise, CrossEntropyForm::Categorical) => {
            for (k, (&t, &p)) in target.iter().zip(probs).enumerate() {
                if t != 0.0 && p > LOG_EPS {
                    dp[k] = -t / p;
                }
            }
            categorical_value(probs, target)
        }
        (LossKind::Precise, CrossEntropyForm::PerClassBinary) => {
            for (k, (&y, &p)) in target.iter().zip(probs).enumerate() {
                let q = complement(probs, k);
                if y != 0.0 && p > LOG_EPS {
                    dp[k] -= y / p;
                }
                // ln(q) with q = 1 - p_k: derivative +1/q on p_k.
                if y != 1.0 && q > LOG_EPS {
                    dp[k] += (1.0 - y) / q;
                }
            }
            binary_ce_value(probs, target)
        }
    };
    // Softmax Jacobian: dz_j = p_j (dp_j - sum_k p_k dp_k).
    let inner: f64 = probs.iter().zip(&dp).map(|(p, d)| p * d).sum();
    for ((dz, &p), &d) in d_logits.iter_mut().zip(probs).zip(&dp) {
        *dz = p * (d - inner);
    }
    value
}

fn validate_targets(network: &Network, batch: &[(Vec<f64>, Vec<f64>)], kind: LossKind) -> Result<()> {
    for (i, (x, t)) in batch.iter().enumerate() {
        network.check_input(x)?;
        if t.len() != network.output_dim {
            return Err(Error::invalid(format!(
                "target {i} has {} classes, network outputs {}",
                t.len(),
                network.output_dim
            )));
        }
        if t.iter().any(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
            return Err(Error::invalid(format!("target {i} has entries outside [0,1]")));
        }
        let sum: f64 = t.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("target {i} sums to {sum}, not 1")));
        }
        if kind == LossKind::Precise && !t.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Err(Error::invalid(format!("target {i} is not one-hot")));
        }
    }
    Ok(())
}

/// Mean loss of `network` over `batch`.
pub fn mean_loss(network: &Network, batch: &[(Vec<f64>, Vec<f64>)], kind: LossKind, form: CrossEntropyForm) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    validate_targets(network, batch, kind)?;
    let mut t = Trace::new(network);
    let mut total = 0.0;
    for (x, target) in batch {
        network.run(x, &mut t);
        let Trace { probs, d_logits, .. } = &mut t;
        total += loss_and_logit_grad(kind, form, probs, target, d_logits);
    }
    Ok(total / batch.len() as f64)
}

/// Analytic gradient of the mean batch loss.
pub fn gradients(network: &Network, batch: &[(Vec<f64>, Vec<f64>)], kind: LossKind, form: CrossEntropyForm) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    validate_targets(network, batch, kind)?;
    let mut t = Trace::new(network);
    let mut g = Gradients::zeros_like(network);
    for (x, target) in batch {
        accumulate(network, x, target, kind, form, &mut t, &mut g, 0);
    }
    g.scale(1.0 / batch.len() as f64);
    Ok(g)
}

#[allow(clippy::too_many_arguments)]
fn accumulate(
    network: &Network,
    x: &[f64],
    target: &[f64],
    kind: LossKind,
    form: CrossEntropyForm,
    t: &mut Trace,
    g: &mut Gradients,
    frozen: usize,
) -> f64 {
    network.run(x, t);
    let loss = {
        let Trace { probs, d_logits, .. } = &mut *t;
        loss_and_logit_grad(kind, form, probs, target, d_logits)
    };
    network.backprop(x, t, g, frozen);
    loss
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    step: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Train a copy of `network` with Adam and decoupled weight decay.
///
/// Returns the trained network and the mean training loss of every epoch
/// that ran. Layers below `frozen_prefix_layers` are never updated.
pub fn train(network: &Network, data: &[(Vec<f64>, Vec<f64>)], config: &TrainConfig) -> Result<(Network, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::invalid("train: empty data"));
    }
    config.validate("train").map_err(|e| Error::invalid(e.to_string()))?;
    validate_targets(network, data, config.loss)?;

    let mut net = network.clone();
    let frozen = config.frozen_prefix_layers.min(net.layers.len());
    let mut adam = AdamState {
        m: Gradients::zeros_like(&net),
        v: Gradients::zeros_like(&net),
        step: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Trace::new(&net);
    let mut grads = Gradients::zeros_like(&net);
    let mut history: Vec<f64> = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            for l in &mut grads.layers {
                l.weights.iter_mut().for_each(|w| *w = 0.0);
                l.bias.iter_mut().for_each(|b| *b = 0.0);
            }
            for &i in batch {
                let (x, target) = &data[i];
                epoch_loss += accumulate(&net, x, target, config.loss, config.loss_form, &mut trace, &mut grads, frozen);
            }
            grads.scale(1.0 / batch.len() as f64);
            if frozen < net.layers.len() {
                adam_step(&mut net, &grads, &mut adam, lr, config.weight_decay, frozen);
            }
        }
        let mean = epoch_loss / data.len() as f64;
        let stalled = match (config.stop_tolerance, history.last()) {
            (Some(tol), Some(prev)) => (prev - mean).abs() < tol,
            _ => false,
        };
        history.push(mean);
        if stalled {
            break;
        }
    }
    Ok((net, history))
}

fn adam_step(net: &mut Network, g: &Gradients, s: &mut AdamState, lr: f64, weight_decay: f64, frozen: usize) {
    s.step += 1;
    let c1 = 1.0 - BETA1.powi(s.step);
    let c2 = 1.0 - BETA2.powi(s.step);
    let decay = 1.0 - lr * weight_decay;
    for l in frozen..net.layers.len() {
        let layer = &mut net.layers[l];
        let (ml, vl) = (&mut s.m.layers[l], &mut s.v.layers[l]);
        let pairs = [
            (&mut layer.weights, &g.layers[l].weights, &mut ml.weights, &mut vl.weights),
            (&mut layer.bias, &g.layers[l].bias, &mut ml.bias, &mut vl.bias),
        ];
        for (params, grad, m, v) in pairs {
            for (((p, &gi), mi), vi) in params.iter_mut().zip(grad.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
                *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
                let update = (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
                *p = *p * decay - lr * update;
            }
        }
    }
}

const FORMAT_TAG: &str = "mcil-network v1";

/// Plain-text serialization. Parameters are written at 17 significant
/// digits so that loading reproduces them exactly.
pub fn save_network(network: &Network) -> String {
    let mut s = String::new();
    let spec = &network.spec;
    let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
    writeln!(s, "{FORMAT_TAG}").unwrap();
    writeln!(s, "name {}", spec.name).unwrap();
    writeln!(s, "input_dim {}", network.input_dim).unwrap();
    writeln!(s, "output_dim {}", network.output_dim).unwrap();
    writeln!(s, "hidden {}", join(&mut spec.hidden_widths.iter().map(|w| w.to_string()))).unwrap();
    writeln!(s, "activations {}", join(&mut spec.activations.iter().map(|a| a.name().to_string()))).unwrap();
    writeln!(s, "residual {}", join(&mut spec.residual_pairs.iter().map(|(i, j)| format!("{i}:{j}")))).unwrap();
    for (i, l) in network.layers.iter().enumerate() {
        writeln!(s, "layer {i} {} {}", l.outputs, l.inputs).unwrap();
        writeln!(s, "weights {}", join(&mut l.weights.iter().map(|v| format!("{v:.16e}")))).unwrap();
        writeln!(s, "bias {}", join(&mut l.bias.iter().map(|v| format!("{v:.16e}")))).unwrap();
    }
    s
}

pub fn load_network(text: &str) -> Result<Network> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    let mut next = |key: &str| -> Result<(u64, Vec<String>)> {
        let (n, line) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("unexpected end of input, expected {key:?}"),
        })?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::Parse { line: n, message: format!("expected {key:?}") });
        }
        Ok((n, parts.map(str::to_string).collect()))
    };
    fn num<T: std::str::FromStr>(line: u64, s: &str) -> Result<T> {
        s.parse().map_err(|_| Error::Parse { line, message: format!("invalid number {s:?}") })
    }

    let (n, tag) = next("mcil-network")?;
    if tag != ["v1"] {
        return Err(Error::Parse { line: n, message: "unsupported format version".into() });
    }
    let (n, name) = next("name")?;
    let name = name.into_iter().next().ok_or(Error::Parse { line: n, message: "missing name".into() })?;
    let (n, v) = next("input_dim")?;
    let input_dim: usize = num(n, v.first().map(String::as_str).unwrap_or(""))?;
    let (n, v) = next("output_dim")?;
    let output_dim: usize = num(n, v.first().map(String::as_str).unwrap_or(""))?;
    let (n, v) = next("hidden")?;
    let hidden_widths = v.iter().map(|s| num(n, s)).collect::<Result<Vec<usize>>>()?;
    let (n, v) = next("activations")?;
    let activations = v
        .iter()
        .map(|s| Activation::parse(s).ok_or(Error::Parse { line: n, message: format!("unknown activation {s:?}") }))
        .collect::<Result<Vec<_>>>()?;
    let (n, v) = next("residual")?;
    let residual_pairs = v
        .iter()
        .map(|s| {
            let (a, b) = s.split_once(':').ok_or(Error::Parse { line: n, message: format!("bad residual pair {s:?}") })?;
            Ok((num(n, a)?, num(n, b)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = ArchitectureSpec {
        name,
        hidden_widths,
        activations,
        residual_pairs,
    };
    let mut layers = Vec::new();
    for i in 0..spec.num_layers() {
        let (n, v) = next("layer")?;
        if v.len() != 3 || num::<usize>(n, &v[0])? != i {
            return Err(Error::Parse { line: n, message: format!("expected layer {i} header") });
        }
        let outputs: usize = num(n, &v[1])?;
        let inputs: usize = num(n, &v[2])?;
        let (n, w) = next("weights")?;
        let weights = w.iter().map(|s| num(n, s)).collect::<Result<Vec<f64>>>()?;
        let (n, b) = next("bias")?;
        let bias = b.iter().map(|s| num(n, s)).collect::<Result<Vec<f64>>>()?;
        layers.push(Layer { inputs, outputs, weights, bias });
    }
    let net = Network::from_layers(spec, layers)?;
    if net.input_dim != input_dim || net.output_dim != output_dim {
        return Err(Error::invalid("declared dimensions do not match layer shapes"));
    }
    Ok(net)
}
