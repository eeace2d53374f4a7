//! Fully-connected ReLU classifier with raw-logit output.
//!
//! Every algorithm in this crate only needs two things from a classifier: the
//! logits at a point and the exact gradient of some scalar function of the
//! logits with respect to the input. [`Model::tape`] records one forward pass so
//! both can be read off without recomputation.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// Dense layer `activation(W x + b)`, weights row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::dim("layer weights", in_dim * out_dim, weights.len()));
        }
        if bias.len() != out_dim {
            return Err(Error::dim("layer bias", out_dim, bias.len()));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite layer parameter".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: rand::Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot bounds");
        let weights = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Row `r` of the weight matrix.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.in_dim..(r + 1) * self.in_dim]
    }

    fn affine_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(r, b)| {
            let row = self.row(r);
            b + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>()
        }));
    }

    fn activate(&self, pre: &[f64]) -> Vec<f64> {
        match self.activation {
            Activation::Identity => pre.to_vec(),
            Activation::Relu => pre.iter().map(|&v| relu(v)).collect(),
        }
    }

    /// `g ← (W^T g) ⊙ 1[pre_prev > 0]` is done by the caller; this is `W^T g`.
    fn transpose_mul(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim];
        for (r, &gr) in g.iter().enumerate() {
            if gr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * gr;
            }
        }
        out
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Scalar function of the logits whose input gradient is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarHead {
    /// `z_c`.
    Logit(usize),
    /// `max_{j≠y} z_j − z_y`; positive once the prediction has left `y`.
    Margin(usize),
    /// `z_t − max_{j≠t} z_j`; positive once `t` is the strict winner.
    TargetMargin(usize),
    /// `z_plus − z_minus`.
    Pairwise { plus: usize, minus: usize },
}

impl ScalarHead {
    fn check(&self, num_classes: usize) -> Result<()> {
        let ok = match *self {
            ScalarHead::Logit(c) | ScalarHead::Margin(c) | ScalarHead::TargetMargin(c) => c < num_classes,
            ScalarHead::Pairwise { plus, minus } => plus < num_classes && minus < num_classes,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "head {self:?} out of range for {num_classes} classes"
            )));
        }
        if num_classes < 2 && matches!(self, ScalarHead::Margin(_) | ScalarHead::TargetMargin(_)) {
            return Err(Error::invalid("margin heads need at least two classes"));
        }
        Ok(())
    }

    /// Value of the head at the given logits.
    pub fn value(&self, logits: &[f64]) -> f64 {
        match *self {
            ScalarHead::Logit(c) => logits[c],
            ScalarHead::Margin(y) => logits[runner_up(logits, y)] - logits[y],
            ScalarHead::TargetMargin(t) => logits[t] - logits[runner_up(logits, t)],
            ScalarHead::Pairwise { plus, minus } => logits[plus] - logits[minus],
        }
    }

    /// Gradient of the head with respect to the logits.
    fn logit_seed(&self, logits: &[f64]) -> Vec<f64> {
        let mut seed = vec![0.0; logits.len()];
        match *self {
            ScalarHead::Logit(c) => seed[c] = 1.0,
            ScalarHead::Margin(y) => {
                seed[runner_up(logits, y)] += 1.0;
                seed[y] -= 1.0;
            }
            ScalarHead::TargetMargin(t) => {
                seed[t] += 1.0;
                seed[runner_up(logits, t)] -= 1.0;
            }
            ScalarHead::Pairwise { plus, minus } => {
                seed[plus] += 1.0;
                seed[minus] -= 1.0;
            }
        }
        seed
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Largest entry other than `exclude`, lowest index on ties.
pub fn runner_up(values: &[f64], exclude: usize) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in values.iter().enumerate() {
        if i == exclude {
            continue;
        }
        if best == usize::MAX || v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax with max-subtraction.
pub fn softmax_probs(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input_dim: usize,
    num_classes: usize,
    layers: Vec<Layer>,
}

impl Model {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::invalid("model needs at least one layer"))?;
        let input_dim = first.in_dim;
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].in_dim != pair[0].out_dim {
                return Err(Error::dim(
                    format!("layers[{}].in_dim", i + 1),
                    pair[0].out_dim,
                    pair[1].in_dim,
                ));
            }
        }
        let last = layers.last().expect("non-empty");
        if last.activation != Activation::Identity {
            return Err(Error::invalid("final layer must use the identity activation"));
        }
        let num_classes = last.out_dim;
        Ok(Self {
            input_dim,
            num_classes,
            layers,
        })
    }

    /// Single identity layer `z = W x + b` from per-class weight rows.
    pub fn linear(weight_rows: &[Vec<f64>], bias: &[f64]) -> Result<Self> {
        let classes = weight_rows.len();
        let d = weight_rows.first().map_or(0, Vec::len);
        if let Some(bad) = weight_rows.iter().find(|r| r.len() != d) {
            return Err(Error::dim("linear weight row", d, bad.len()));
        }
        let weights = weight_rows.concat();
        Model::new(vec![Layer::new(
            d,
            classes,
            weights,
            bias.to_vec(),
            Activation::Identity,
        )?])
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::dim("model input", self.input_dim, x.len()));
        }
        Ok(())
    }

    /// Record a forward pass for reading logits and input gradients.
    pub fn tape(&self, x: &[f64]) -> Result<Tape<'_>> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut input = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.affine_into(&input, &mut z);
            if i + 1 < self.layers.len() {
                input = layer.activate(&z);
            }
            pre.push(z);
        }
        Ok(Tape { model: self, pre })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut input = x.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            layer.affine_into(&input, &mut z);
            input = layer.activate(&z);
        }
        Ok(input)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    pub fn input_gradient(&self, x: &[f64], head: ScalarHead) -> Result<Vec<f64>> {
        self.tape(x)?.gradient(head)
    }

    /// Copy of the model with the final layer re-drawn from the training
    /// initialization distribution; earlier layers are untouched.
    pub fn randomize_last_layer(&self, seed: u64) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = self.layers.clone();
        let last = layers.last_mut().expect("model has a layer");
        *last = Layer::glorot(last.in_dim, last.out_dim, last.activation, &mut rng);
        Model {
            input_dim: self.input_dim,
            num_classes: self.num_classes,
            layers,
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            input_dim: self.input_dim,
            num_classes: self.num_classes,
            layers: self.layers.iter().map(LayerFile::from).collect(),
        };
        let mut s = serde_json::to_string(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text, path)
    }
}

/// One recorded forward pass.
pub struct Tape<'m> {
    model: &'m Model,
    /// Pre-activations per layer; the last entry is the logit vector.
    pre: Vec<Vec<f64>>,
}

impl Tape<'_> {
    pub fn logits(&self) -> &[f64] {
        self.pre.last().expect("model has a layer")
    }

    pub fn predict(&self) -> usize {
        argmax(self.logits())
    }

    /// Reverse-mode gradient of `head` with respect to the input. The ReLU
    /// subgradient at exactly zero is zero.
    pub fn gradient(&self, head: ScalarHead) -> Result<Vec<f64>> {
        head.check(self.model.num_classes)?;
        let mut g = head.logit_seed(self.logits());
        for (i, layer) in self.model.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                for (gj, &z) in g.iter_mut().zip(&self.pre[i]) {
                    if z <= 0.0 {
                        *gj = 0.0;
                    }
                }
            }
            g = layer.transpose_mul(&g);
        }
        Ok(g)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    input_dim: usize,
    num_classes: usize,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    out_dim: usize,
    in_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl From<&Layer> for LayerFile {
    fn from(l: &Layer) -> Self {
        LayerFile {
            out_dim: l.out_dim,
            in_dim: l.in_dim,
            weights: l.weights.clone(),
            bias: l.bias.clone(),
            activation: l.activation,
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<Model> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.into_iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim {
                return Err(Error::dim(
                    format!("layers[{i}].weights"),
                    l.in_dim * l.out_dim,
                    l.weights.len(),
                ));
            }
            if l.bias.len() != l.out_dim {
                return Err(Error::dim(format!("layers[{i}].bias"), l.out_dim, l.bias.len()));
            }
            layers.push(Layer::new(l.in_dim, l.out_dim, l.weights, l.bias, l.activation)?);
        }
        let model = Model::new(layers)?;
        if model.input_dim != self.input_dim {
            return Err(Error::dim("input_dim", model.input_dim, self.input_dim));
        }
        if model.num_classes != self.num_classes {
            return Err(Error::dim("num_classes", model.num_classes, self.num_classes));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub l2_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 60,
            batch_size: 16,
            seed: 0,
            l2_penalty: 1e-4,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::Config("l2_penalty must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub train_accuracy: f64,
    pub final_loss: f64,
}

/// Mini-batch SGD on softmax cross-entropy.
///
/// `arch` lists every layer width including the input and the class count,
/// e.g. `[64, 32, 10]`. Hidden layers use ReLU.
pub fn train_sgd(dataset: &[Example], arch: &[usize], config: &TrainConfig) -> Result<(Model, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if arch.len() < 2 || arch.contains(&0) {
        return Err(Error::invalid(format!("invalid architecture {arch:?}")));
    }
    let d = arch[0];
    let classes = *arch.last().expect("len >= 2");
    for (i, ex) in dataset.iter().enumerate() {
        if ex.x.len() != d {
            return Err(Error::dim(format!("example {i}"), d, ex.x.len()));
        }
        if ex.label >= classes {
            return Err(Error::invalid(format!(
                "example {i} has label {} but the architecture has {classes} classes",
                ex.label
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layers: Vec<Layer> = arch
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i + 2 == arch.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            Layer::glorot(w[0], w[1], act, &mut rng)
        })
        .collect();
    let mut model = Model::new(layers)?;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = model
        .layers
        .iter()
        .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
        .collect();
    let mut final_loss = 0.0;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            for (gw, gb) in &mut grads {
                gw.fill(0.0);
                gb.fill(0.0);
            }
            for &idx in batch {
                epoch_loss += accumulate_example(&model, &dataset[idx], &mut grads);
            }
            let scale = config.learning_rate / batch.len() as f64;
            for (layer, (gw, gb)) in model.layers.iter_mut().zip(&grads) {
                for (w, g) in layer.weights.iter_mut().zip(gw) {
                    *w -= scale * g + config.learning_rate * config.l2_penalty * *w;
                }
                for (b, g) in layer.bias.iter_mut().zip(gb) {
                    *b -= scale * g;
                }
            }
        }
        final_loss = epoch_loss / dataset.len() as f64;
        if !final_loss.is_finite() {
            return Err(Error::Numeric("training loss diverged".into()));
        }
    }

    let train_accuracy = accuracy(&model, dataset)?;
    Ok((
        model,
        TrainReport {
            train_accuracy,
            final_loss,
        },
    ))
}

/// Adds one example's cross-entropy parameter gradient into `grads`; returns its loss.
fn accumulate_example(model: &Model, ex: &Example, grads: &mut [(Vec<f64>, Vec<f64>)]) -> f64 {
    let n = model.layers.len();
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pres: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut input = ex.x.clone();
    for layer in &model.layers {
        let mut z = Vec::new();
        layer.affine_into(&input, &mut z);
        let next = layer.activate(&z);
        inputs.push(std::mem::replace(&mut input, next));
        pres.push(z);
    }
    let probs = softmax_probs(&input);
    let loss = -probs[ex.label].max(f64::MIN_POSITIVE).ln();

    let mut g = probs;
    g[ex.label] -= 1.0;
    for i in (0..n).rev() {
        let layer = &model.layers[i];
        if layer.activation == Activation::Relu {
            for (gj, &z) in g.iter_mut().zip(&pres[i]) {
                if z <= 0.0 {
                    *gj = 0.0;
                }
            }
        }
        let (gw, gb) = &mut grads[i];
        for (r, &gr) in g.iter().enumerate() {
            gb[r] += gr;
            let row = &mut gw[r * layer.in_dim..(r + 1) * layer.in_dim];
            for (w, a) in row.iter_mut().zip(&inputs[i]) {
                *w += gr * a;
            }
        }
        if i > 0 {
            g = layer.transpose_mul(&g);
        }
    }
    loss
}

/// Fraction of examples whose prediction equals the label.
pub fn accuracy(model: &Model, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for ex in examples {
        if model.predict(&ex.x)? == ex.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}
