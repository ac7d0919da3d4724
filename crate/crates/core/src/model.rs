//! Small differentiable multi-label scorers.
//!
//! A [`Scorer`] is either a single affine layer or a one-hidden-layer MLP,
//! followed by a sigmoid head so every class score lies in `(0, 1)`. Both
//! expose exact vector-Jacobian products with respect to the input, which is
//! all the attacks need, and can be fitted with mini-batch SGD on mean binary
//! cross-entropy.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Instance};
use crate::error::{Error, Result};
use crate::gradcheck::{self, GradCheck};
use crate::ranking::ScoreVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and output `h`.
    fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - h * h,
        }
    }
}

/// Terminal nonlinearity. `Linear` drops the sigmoid and is only meant for
/// testing convexity of attack objectives on an affine scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Sigmoid,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    Affine,
    Mlp { hidden: usize, activation: Activation },
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Fully connected layer, `weights` row-major with shape `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::arg("layer dimensions must be positive"));
        }
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::arg(format!(
                "layer {inputs}->{outputs} needs {} weights and {outputs} biases, got {} and {}",
                inputs * outputs,
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::arg("layer parameters must be finite"));
        }
        Ok(Self { inputs, outputs, weights, bias })
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `[-s, s]` with `s = 1/sqrt(fan_in)`.
    fn uniform<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let s = 1.0 / (inputs as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-s..=s)).collect::<Vec<_>>();
        let weights = draw(inputs * outputs);
        let bias = draw(outputs);
        Self { inputs, outputs, weights, bias }
    }

    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| self.bias[o] + self.row(o).iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// `Wᵀ g`.
    fn backward_input(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.inputs];
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            for (acc, w) in out.iter_mut().zip(self.row(o)) {
                *acc += go * w;
            }
        }
        out
    }

    fn accumulate_params(&mut self, x: &[f64], g: &[f64]) {
        for (o, &go) in g.iter().enumerate() {
            self.bias[o] += go;
            let row = &mut self.weights[o * self.inputs..(o + 1) * self.inputs];
            for (w, v) in row.iter_mut().zip(x) {
                *w += go * v;
            }
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }
}

/// A multi-label prediction function `F(x) → [0, 1]^c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scorer {
    layers: Vec<Dense>,
    hidden_activation: Activation,
    head: Head,
}

/// Pre- and post-activation values of every layer for one input.
struct Tape {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl Scorer {
    pub fn affine(layer: Dense) -> Self {
        Self {
            layers: vec![layer],
            hidden_activation: Activation::Identity,
            head: Head::Sigmoid,
        }
    }

    pub fn mlp(hidden: Dense, output: Dense, activation: Activation) -> Result<Self> {
        if hidden.outputs != output.inputs {
            return Err(Error::arg(format!(
                "hidden layer emits {} values but output layer expects {}",
                hidden.outputs, output.inputs
            )));
        }
        Ok(Self {
            layers: vec![hidden, output],
            hidden_activation: activation,
            head: Head::Sigmoid,
        })
    }

    /// Seeded initialisation for the given architecture.
    pub fn init<R: Rng>(arch: Architecture, input_dim: usize, classes: usize, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || classes < 2 {
            return Err(Error::arg("a scorer needs input_dim >= 1 and at least 2 classes"));
        }
        Ok(match arch {
            Architecture::Affine => Self::affine(Dense::uniform(input_dim, classes, rng)),
            Architecture::Mlp { hidden, activation } => {
                if hidden == 0 {
                    return Err(Error::arg("hidden width must be positive"));
                }
                let h = Dense::uniform(input_dim, hidden, rng);
                let o = Dense::uniform(hidden, classes, rng);
                Self::mlp(h, o, activation)?
            }
        })
    }

    /// Same parameters without the terminal sigmoid.
    pub fn with_linear_head(mut self) -> Self {
        self.head = Head::Linear;
        self
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn architecture(&self) -> Architecture {
        match self.layers.as_slice() {
            [_] => Architecture::Affine,
            [h, _] => Architecture::Mlp {
                hidden: h.outputs,
                activation: self.hidden_activation,
            },
            _ => unreachable!("scorers have one or two layers"),
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::arg(format!(
                "input has dimension {} but the scorer expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("input entry {i} is not finite")));
        }
        Ok(())
    }

    fn activation_of(&self, layer: usize) -> Option<Activation> {
        (layer + 1 < self.layers.len()).then_some(self.hidden_activation)
    }

    fn record(&self, x: &[f64]) -> Tape {
        let mut tape = Tape {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            post: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h);
            let out: Vec<f64> = match (self.activation_of(l), self.head) {
                (Some(act), _) => z.iter().map(|&v| act.apply(v)).collect(),
                (None, Head::Sigmoid) => z.iter().map(|&v| sigmoid(v)).collect(),
                (None, Head::Linear) => z.clone(),
            };
            tape.inputs.push(std::mem::replace(&mut h, out.clone()));
            tape.pre.push(z);
            tape.post.push(out);
        }
        tape
    }

    /// Raw head outputs; equal to the class scores under a sigmoid head.
    pub fn outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&h);
            match (self.activation_of(l), self.head) {
                (Some(act), _) => z.iter_mut().for_each(|v| *v = act.apply(*v)),
                (None, Head::Sigmoid) => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
                (None, Head::Linear) => {}
            }
            h = z;
        }
        Ok(h)
    }

    pub fn score(&self, x: &[f64]) -> Result<ScoreVector> {
        ScoreVector::new(self.outputs(x)?)
    }

    /// Propagates `d(loss)/d(pre-activation of the last layer)` back through
    /// the tape, returning the input gradient and accumulating parameter
    /// gradients into `grads` when given.
    fn backprop(&self, tape: &Tape, mut g: Vec<f64>, mut grads: Option<&mut [Dense]>) -> Vec<f64> {
        for l in (0..self.layers.len()).rev() {
            if let Some(grads) = grads.as_deref_mut() {
                grads[l].accumulate_params(&tape.inputs[l], &g);
            }
            let mut up = self.layers[l].backward_input(&g);
            if l > 0 {
                let act = self.hidden_activation;
                for ((u, &z), &h) in up.iter_mut().zip(&tape.pre[l - 1]).zip(&tape.post[l - 1]) {
                    *u *= act.derivative(z, h);
                }
            }
            g = up;
        }
        g
    }

    /// Vector-Jacobian product `∂(cotangent · F(x)) / ∂x`.
    pub fn input_gradient(&self, x: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        Ok(self.outputs_and_gradient(x, cotangent)?.1)
    }

    /// Forward pass and VJP in one go; returns the head outputs too.
    pub fn outputs_and_gradient(&self, x: &[f64], cotangent: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        if cotangent.len() != self.classes() {
            return Err(Error::arg(format!(
                "cotangent has length {} but the scorer has {} classes",
                cotangent.len(),
                self.classes()
            )));
        }
        if cotangent.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("cotangent must be finite"));
        }
        let tape = self.record(x);
        let last = self.layers.len() - 1;
        let g: Vec<f64> = match self.head {
            Head::Sigmoid => cotangent
                .iter()
                .zip(&tape.post[last])
                .map(|(c, s)| c * s * (1.0 - s))
                .collect(),
            Head::Linear => cotangent.to_vec(),
        };
        let grad = self.backprop(&tape, g, None);
        Ok((tape.post[last].clone(), grad))
    }

    fn zero_grads(&self) -> Vec<Dense> {
        self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect()
    }

    /// Accumulates BCE parameter gradients for one instance; returns its loss.
    fn bce_step(&self, inst: &Instance, grads: &mut [Dense]) -> f64 {
        let tape = self.record(&inst.x);
        let last = self.layers.len() - 1;
        let z = &tape.pre[last];
        let mut loss = 0.0;
        let g: Vec<f64> = z
            .iter()
            .zip(&tape.post[last])
            .zip(inst.y.bits())
            .map(|((&z, &s), &y)| {
                let y = f64::from(u8::from(y));
                loss += softplus(z) - y * z;
                s - y
            })
            .collect();
        self.backprop(&tape, g, Some(grads));
        loss
    }

    /// BCE summed over classes and averaged over instances.
    pub fn bce_loss(&self, data: &[Instance]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::arg("dataset is empty"));
        }
        let mut total = 0.0;
        for inst in data {
            let z = {
                let tape = self.record(&inst.x);
                tape.pre[self.layers.len() - 1].clone()
            };
            total += z
                .iter()
                .zip(inst.y.bits())
                .map(|(&z, &y)| softplus(z) - f64::from(u8::from(y)) * z)
                .sum::<f64>();
        }
        Ok(total / data.len() as f64)
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.layers.iter().flat_map(Dense::params).copied().collect()
    }

    pub fn to_jsonl(&self) -> String {
        let header = FileHeader {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            architecture: match self.architecture() {
                Architecture::Affine => "affine".into(),
                Architecture::Mlp { .. } => "mlp".into(),
            },
            hidden_activation: self.hidden_activation,
            head: self.head,
            shapes: self.layers.iter().map(|l| [l.inputs, l.outputs]).collect(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for layer in &self.layers {
            let line = LayerLine {
                weights: layer.weights.clone(),
                bias: layer.bias.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("layer serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let bad = |line: usize| move |source| Error::Json { path: "<scorer>".into(), line, source };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: FileHeader = serde_json::from_str(lines.next().ok_or_else(|| Error::arg("empty scorer document"))?)
            .map_err(bad(1))?;
        if header.format != FORMAT_TAG || header.version != FORMAT_VERSION {
            return Err(Error::arg(format!(
                "unsupported scorer format {} v{}",
                header.format, header.version
            )));
        }
        let mut layers = Vec::new();
        for (i, [inputs, outputs]) in header.shapes.iter().copied().enumerate() {
            let raw = lines
                .next()
                .ok_or_else(|| Error::arg(format!("scorer document is missing layer {i}")))?;
            let line: LayerLine = serde_json::from_str(raw).map_err(bad(i + 2))?;
            layers.push(Dense::new(inputs, outputs, line.weights, line.bias)?);
        }
        let scorer = match (header.architecture.as_str(), layers.len()) {
            ("affine", 1) => Self::affine(layers.pop().expect("one layer")),
            ("mlp", 2) => {
                let out = layers.pop().expect("two layers");
                let hidden = layers.pop().expect("two layers");
                Self::mlp(hidden, out, header.hidden_activation)?
            }
            (arch, n) => return Err(Error::arg(format!("architecture {arch} with {n} layers"))),
        };
        Ok(Self { head: header.head, ..scorer })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        dataset::write_atomic(path, self.to_jsonl().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }
}

const FORMAT_TAG: &str = "tkmia-scorer";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FileHeader {
    format: String,
    version: u32,
    architecture: String,
    hidden_activation: Activation,
    head: Head,
    shapes: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct LayerLine {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Mini-batch SGD-with-momentum settings for [`train_bce`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Affine,
            epochs: 30,
            learning_rate: 0.1,
            momentum: 0.9,
            batch_size: 32,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::arg("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::arg("weight decay must be non-negative"));
        }
        Ok(())
    }
}

/// Trains a scorer on mean BCE; see [`train_bce_with_history`].
pub fn train_bce(data: &[Instance], config: &TrainConfig) -> Result<Scorer> {
    Ok(train_bce_with_history(data, config)?.0)
}

/// Also returns the full-dataset mean BCE after each epoch.
pub fn train_bce_with_history(data: &[Instance], config: &TrainConfig) -> Result<(Scorer, Vec<f64>)> {
    config.validate()?;
    let (d, c) = dataset::dimensions(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut scorer = Scorer::init(config.architecture, d, c, &mut rng)?;
    let mut velocity = scorer.zero_grads();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads = scorer.zero_grads();
            for &i in batch {
                scorer.bce_step(&data[i], &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            for ((layer, grad), vel) in scorer.layers.iter_mut().zip(&grads).zip(&mut velocity) {
                // Decay applies to weights only.
                let n_weights = layer.weights.len();
                for (j, ((p, g), v)) in layer.params_mut().zip(grad.params()).zip(vel.params_mut()).enumerate() {
                    let decay = if j < n_weights { config.weight_decay * *p } else { 0.0 };
                    *v = config.momentum * *v + g * scale + decay;
                    *p -= config.learning_rate * *v;
                }
            }
        }
        let loss = scorer.bce_loss(data)?;
        if !loss.is_finite() {
            return Err(Error::Numeric { what: "training loss", iteration: history.len() });
        }
        history.push(loss);
    }
    Ok((scorer, history))
}

/// Compares [`Scorer::input_gradient`] against central differences, one
/// class at a time, at step `1e-5`.
pub fn finite_diff_check(model: &Scorer, x: &[f64], tolerance: f64) -> Result<GradCheck> {
    finite_diff_check_with(model, x, tolerance, |x, cot| model.input_gradient(x, cot))
}

/// As [`finite_diff_check`] but with a caller-supplied gradient routine.
pub fn finite_diff_check_with<G>(model: &Scorer, x: &[f64], tolerance: f64, mut grad: G) -> Result<GradCheck>
where
    G: FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    model.check_input(x)?;
    let c = model.classes();
    let mut analytic = Vec::with_capacity(c * x.len());
    let mut numeric = Vec::with_capacity(c * x.len());
    for class in 0..c {
        let mut cot = vec![0.0; c];
        cot[class] = 1.0;
        analytic.extend(grad(x, &cot)?);
        numeric.extend(gradcheck::central_difference(
            |p| model.outputs(p).map(|o| o[class]).unwrap_or(f64::NAN),
            x,
            gradcheck::DEFAULT_STEP,
        ));
    }
    if analytic.len() != numeric.len() {
        return Err(Error::arg("gradient routine returned the wrong length"));
    }
    Ok(gradcheck::compare(&analytic, &numeric, tolerance))
}
