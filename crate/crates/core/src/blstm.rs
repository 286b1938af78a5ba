//! Bidirectional LSTM tagger.
//!
//! Each token is embedded, run through a left-to-right and a right-to-left
//! LSTM, the two hidden states are concatenated and projected to seven tag
//! logits followed by a softmax. Training minimizes cross-entropy over real
//! (unpadded) tokens with backpropagation through time and clipped SGD.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::Dataset;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::modelfile::{self, fmt_floats, ModelKind};
use crate::seed;
use crate::tag::{Tag, NUM_TAGS};
use crate::token::Token;
use crate::{ProbTagger, TagDistribution, Tagger};

/// Gate order in the stacked weight matrix.
const GATES: usize = 4;
const I: usize = 0;
const F: usize = 1;
const O: usize = 2;
const G: usize = 3;

/// Weights of one direction: rows `[i; f; o; g]`, each `hidden` tall, over
/// the input `[x; h_prev]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmDirection {
    /// `4·hidden × (dim + hidden)`, row-major.
    pub w: Vec<f64>,
    /// `4·hidden`.
    pub b: Vec<f64>,
}

impl LstmDirection {
    fn zeros(dim: usize, hidden: usize) -> LstmDirection {
        LstmDirection {
            w: vec![0.0; GATES * hidden * (dim + hidden)],
            b: vec![0.0; GATES * hidden],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlstmParams {
    pub dim: usize,
    /// Per-direction hidden size; the concatenated state is twice this.
    pub hidden: usize,
    pub fwd: LstmDirection,
    pub bwd: LstmDirection,
    /// `7 × 2·hidden`, row-major.
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
}

const BUFFER_NAMES: [&str; 6] = ["fwd.w", "fwd.b", "bwd.w", "bwd.b", "proj.w", "proj.b"];

impl BlstmParams {
    pub fn zeros(dim: usize, hidden: usize) -> BlstmParams {
        BlstmParams {
            dim,
            hidden,
            fwd: LstmDirection::zeros(dim, hidden),
            bwd: LstmDirection::zeros(dim, hidden),
            proj_w: vec![0.0; NUM_TAGS * 2 * hidden],
            proj_b: vec![0.0; NUM_TAGS],
        }
    }

    /// Every entry uniform in `[-scale, scale]`.
    pub fn random(dim: usize, hidden: usize, scale: f64, seed: u64) -> BlstmParams {
        let mut p = BlstmParams::zeros(dim, hidden);
        let mut rng = seed::rng(seed);
        for buf in p.buffers_mut() {
            for v in buf.iter_mut() {
                *v = rng.gen_range(-scale..=scale);
            }
        }
        p
    }

    pub fn buffers(&self) -> [&[f64]; 6] {
        [
            &self.fwd.w,
            &self.fwd.b,
            &self.bwd.w,
            &self.bwd.b,
            &self.proj_w,
            &self.proj_b,
        ]
    }

    pub fn buffers_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.fwd.w,
            &mut self.fwd.b,
            &mut self.bwd.w,
            &mut self.bwd.b,
            &mut self.proj_w,
            &mut self.proj_b,
        ]
    }

    fn shapes(&self) -> [(usize, usize); 6] {
        let gates = GATES * self.hidden;
        let cols = self.dim + self.hidden;
        [
            (gates, cols),
            (1, gates),
            (gates, cols),
            (1, gates),
            (NUM_TAGS, 2 * self.hidden),
            (1, NUM_TAGS),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    /// Flat view used by gradient checks: parameter `k` in buffer order.
    pub fn get_flat(&self, k: usize) -> f64 {
        let (b, i) = self.locate(k);
        self.buffers()[b][i]
    }

    pub fn set_flat(&mut self, k: usize, value: f64) {
        let (b, i) = self.locate(k);
        self.buffers_mut()[b][i] = value;
    }

    fn locate(&self, mut k: usize) -> (usize, usize) {
        for (b, buf) in self.buffers().iter().enumerate() {
            if k < buf.len() {
                return (b, k);
            }
            k -= buf.len();
        }
        panic!("parameter index out of range");
    }

    fn all_finite(&self) -> bool {
        self.buffers()
            .iter()
            .all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn to_text(&self) -> String {
        let mut out = modelfile::preamble(ModelKind::Blstm);
        let _ = writeln!(out, "dims\t{}\t{}", self.dim, self.hidden);
        for ((name, buf), (rows, cols)) in
            BUFFER_NAMES.iter().zip(self.buffers()).zip(self.shapes())
        {
            let _ = writeln!(out, "matrix\t{name}\t{rows}\t{cols}");
            for row in buf.chunks(cols) {
                out.push_str(&fmt_floats(row));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(content: &str) -> Result<BlstmParams> {
        let mut lines = modelfile::Lines::open(content, ModelKind::Blstm)?;
        let dims = lines.expect_field("dims")?;
        let parse = |s: &str| s.parse::<usize>().ok().filter(|&v| v > 0);
        let (dim, hidden) = match dims.split_once('\t') {
            Some((d, h)) => (parse(d), parse(h)),
            None => (None, None),
        };
        let (Some(dim), Some(hidden)) = (dim, hidden) else {
            return Err(Error::ModelFormat(format!("bad dims line {dims:?}")));
        };
        let mut p = BlstmParams::zeros(dim, hidden);
        let shapes = p.shapes();
        for (k, name) in BUFFER_NAMES.iter().enumerate() {
            let (rows, cols) = shapes[k];
            let header = lines.expect_field("matrix")?;
            if header != format!("{name}\t{rows}\t{cols}") {
                return Err(Error::ModelFormat(format!(
                    "expected matrix {name} {rows}x{cols}"
                )));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                data.extend(lines.floats(cols)?);
            }
            *p.buffers_mut()[k] = data;
        }
        if let Some((no, _)) = lines.next() {
            return Err(Error::ModelFormat(format!("line {no}: trailing content")));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<BlstmParams> {
        BlstmParams::from_text(&fs::read_to_string(path)?)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(logits: &[f64; NUM_TAGS]) -> [f64; NUM_TAGS] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; NUM_TAGS];
    for (p, l) in p.iter_mut().zip(logits) {
        *p = (l - max).exp();
    }
    let z: f64 = p.iter().sum();
    for v in &mut p {
        *v /= z;
    }
    p
}

/// Activations of one cell step, kept for backpropagation.
#[derive(Clone, Debug)]
struct Step {
    /// `[x; h_prev]`
    input: Vec<f64>,
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

fn cell_step(
    dir: &LstmDirection,
    hidden: usize,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Step {
    let mut input = Vec::with_capacity(x.len() + hidden);
    input.extend_from_slice(x);
    input.extend_from_slice(h_prev);
    let cols = input.len();
    let mut gates = dir.b.clone();
    for (r, g) in gates.iter_mut().enumerate() {
        let row = &dir.w[r * cols..(r + 1) * cols];
        *g += row.iter().zip(&input).map(|(w, v)| w * v).sum::<f64>();
    }
    for k in 0..hidden {
        gates[I * hidden + k] = sigmoid(gates[I * hidden + k]);
        gates[F * hidden + k] = sigmoid(gates[F * hidden + k]);
        gates[O * hidden + k] = sigmoid(gates[O * hidden + k]);
        gates[G * hidden + k] = gates[G * hidden + k].tanh();
    }
    let mut c = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    for k in 0..hidden {
        c[k] = gates[F * hidden + k] * c_prev[k] + gates[I * hidden + k] * gates[G * hidden + k];
        tanh_c[k] = c[k].tanh();
        h[k] = gates[O * hidden + k] * tanh_c[k];
    }
    Step {
        input,
        gates,
        c_prev: c_prev.to_vec(),
        c,
        tanh_c,
        h,
    }
}

/// One LSTM update: returns `(h_t, c_t)`.
pub fn lstm_cell(
    dir: &LstmDirection,
    hidden: usize,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let s = cell_step(dir, hidden, x, h_prev, c_prev);
    (s.h, s.c)
}

/// Runs one direction; `steps[t]` is the step that consumed position `t`.
fn run_direction(dir: &LstmDirection, hidden: usize, xs: &[Vec<f64>], reverse: bool) -> Vec<Step> {
    let len = xs.len();
    let mut steps: Vec<Option<Step>> = vec![None; len];
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let order: Vec<usize> = if reverse {
        (0..len).rev().collect()
    } else {
        (0..len).collect()
    };
    for t in order {
        let s = cell_step(dir, hidden, &xs[t], &h, &c);
        h.clone_from(&s.h);
        c.clone_from(&s.c);
        steps[t] = Some(s);
    }
    steps
        .into_iter()
        .map(|s| s.expect("every position visited"))
        .collect()
}

struct ForwardPass {
    fwd: Vec<Step>,
    bwd: Vec<Step>,
    probs: Vec<[f64; NUM_TAGS]>,
}

impl BlstmParams {
    fn run(&self, xs: &[Vec<f64>]) -> ForwardPass {
        let fwd = run_direction(&self.fwd, self.hidden, xs, false);
        let bwd = run_direction(&self.bwd, self.hidden, xs, true);
        let h2 = 2 * self.hidden;
        let probs = (0..xs.len())
            .map(|t| {
                let mut logits = [0.0; NUM_TAGS];
                for (k, l) in logits.iter_mut().enumerate() {
                    let row = &self.proj_w[k * h2..(k + 1) * h2];
                    let (rf, rb) = row.split_at(self.hidden);
                    *l = self.proj_b[k]
                        + rf.iter().zip(&fwd[t].h).map(|(w, h)| w * h).sum::<f64>()
                        + rb.iter().zip(&bwd[t].h).map(|(w, h)| w * h).sum::<f64>();
                }
                softmax(&logits)
            })
            .collect();
        ForwardPass { fwd, bwd, probs }
    }

    /// Tag distributions for already-embedded inputs.
    pub fn forward_inputs(&self, xs: &[Vec<f64>]) -> Vec<TagDistribution> {
        self.run(xs)
            .probs
            .into_iter()
            .map(|probs| TagDistribution { probs })
            .collect()
    }

    /// Per-position `(forward, backward)` hidden states.
    pub fn hidden_states(&self, xs: &[Vec<f64>]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let pass = self.run(xs);
        pass.fwd
            .into_iter()
            .zip(pass.bwd)
            .map(|(f, b)| (f.h, b.h))
            .collect()
    }

    pub fn forward(&self, table: &EmbeddingTable, tokens: &[Token]) -> Vec<TagDistribution> {
        let texts: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        self.forward_inputs(&table.embed(&texts))
    }

    /// Summed cross-entropy over the sentence and its gradient.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], gold: &[Tag]) -> (f64, BlstmParams) {
        let mut grad = BlstmParams::zeros(self.dim, self.hidden);
        let loss = self.accumulate(xs, gold, &mut grad);
        (loss, grad)
    }

    fn accumulate(&self, xs: &[Vec<f64>], gold: &[Tag], grad: &mut BlstmParams) -> f64 {
        let pass = self.run(xs);
        let hidden = self.hidden;
        let h2 = 2 * hidden;
        let len = xs.len();
        let mut loss = 0.0;
        let mut dh_f = vec![vec![0.0; hidden]; len];
        let mut dh_b = vec![vec![0.0; hidden]; len];
        for t in 0..len {
            let p = &pass.probs[t];
            let y = gold[t].index();
            loss -= p[y].max(1e-300).ln();
            for k in 0..NUM_TAGS {
                let dl = p[k] - if k == y { 1.0 } else { 0.0 };
                grad.proj_b[k] += dl;
                let row = &self.proj_w[k * h2..(k + 1) * h2];
                let grow = &mut grad.proj_w[k * h2..(k + 1) * h2];
                for j in 0..hidden {
                    grow[j] += dl * pass.fwd[t].h[j];
                    grow[hidden + j] += dl * pass.bwd[t].h[j];
                    dh_f[t][j] += dl * row[j];
                    dh_b[t][j] += dl * row[hidden + j];
                }
            }
        }
        let order: Vec<usize> = (0..len).collect();
        backprop_direction(
            &self.fwd,
            &mut grad.fwd,
            hidden,
            &pass.fwd,
            &dh_f,
            order.iter().rev(),
        );
        backprop_direction(
            &self.bwd,
            &mut grad.bwd,
            hidden,
            &pass.bwd,
            &dh_b,
            order.iter(),
        );
        loss
    }
}

/// BPTT through one direction. `reverse_time` visits positions from the last
/// step taken back to the first.
fn backprop_direction<'a>(
    dir: &LstmDirection,
    grad: &mut LstmDirection,
    hidden: usize,
    steps: &[Step],
    dh_out: &[Vec<f64>],
    reverse_time: impl Iterator<Item = &'a usize>,
) {
    let cols = dir.w.len() / (GATES * hidden);
    let dim = cols - hidden;
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut dz = vec![0.0; GATES * hidden];
    for &t in reverse_time {
        let s = &steps[t];
        for k in 0..hidden {
            let (i, f, o, g) = (
                s.gates[I * hidden + k],
                s.gates[F * hidden + k],
                s.gates[O * hidden + k],
                s.gates[G * hidden + k],
            );
            let dh = dh_out[t][k] + dh_next[k];
            let dc = dc_next[k] + dh * o * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            dz[O * hidden + k] = dh * s.tanh_c[k] * o * (1.0 - o);
            dz[I * hidden + k] = dc * g * i * (1.0 - i);
            dz[G * hidden + k] = dc * i * (1.0 - g * g);
            dz[F * hidden + k] = dc * s.c_prev[k] * f * (1.0 - f);
            dc_next[k] = dc * f;
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for (r, &d) in dz.iter().enumerate() {
            grad.b[r] += d;
            if d == 0.0 {
                continue;
            }
            let grow = &mut grad.w[r * cols..(r + 1) * cols];
            for (gw, x) in grow.iter_mut().zip(&s.input) {
                *gw += d * x;
            }
            let row = &dir.w[r * cols..(r + 1) * cols];
            for k in 0..hidden {
                dh_next[k] += d * row[dim + k];
            }
        }
    }
}

/// Sequences padded to a common length, with a mask over real positions.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedBatch {
    /// `batch × max_len × dim`; padded positions hold the pad vector.
    pub inputs: Vec<Vec<Vec<f64>>>,
    pub mask: Vec<Vec<bool>>,
}

impl PaddedBatch {
    /// Pads every sentence to `max(pad_to, longest sentence)`.
    pub fn new(table: &EmbeddingTable, sentences: &[&[Token]], pad_to: usize) -> PaddedBatch {
        let max_len = sentences
            .iter()
            .map(|s| s.len())
            .max()
            .unwrap_or(0)
            .max(pad_to);
        let mut inputs = Vec::with_capacity(sentences.len());
        let mut mask = Vec::with_capacity(sentences.len());
        for s in sentences {
            let texts: Vec<&str> = s.iter().map(|t| t.text.as_str()).collect();
            let mut rows = table.embed(&texts);
            rows.resize(max_len, table.pad_vector().to_vec());
            let mut m = vec![true; s.len()];
            m.resize(max_len, false);
            inputs.push(rows);
            mask.push(m);
        }
        PaddedBatch { inputs, mask }
    }

    pub fn max_len(&self) -> usize {
        self.mask.first().map_or(0, Vec::len)
    }
}

impl BlstmParams {
    /// Distributions for the real positions of every row. Masked positions
    /// are skipped by both directions, so padding never leaks into outputs.
    pub fn forward_batch(&self, batch: &PaddedBatch) -> Vec<Vec<TagDistribution>> {
        batch
            .inputs
            .iter()
            .zip(&batch.mask)
            .map(|(rows, mask)| {
                let real: Vec<Vec<f64>> = rows
                    .iter()
                    .zip(mask)
                    .filter(|(_, &m)| m)
                    .map(|(r, _)| r.clone())
                    .collect();
                if real.is_empty() {
                    Vec::new()
                } else {
                    self.forward_inputs(&real)
                }
            })
            .collect()
    }
}

/// A trained network together with its (frozen) embedding table.
#[derive(Clone, Debug, PartialEq)]
pub struct BlstmTagger {
    pub params: BlstmParams,
    pub table: EmbeddingTable,
}

impl Tagger for BlstmTagger {
    fn tag(&self, tokens: &[Token]) -> Vec<Tag> {
        self.distributions(tokens)
            .iter()
            .map(TagDistribution::argmax)
            .collect()
    }
}

impl ProbTagger for BlstmTagger {
    fn distributions(&self, tokens: &[Token]) -> Vec<TagDistribution> {
        if tokens.is_empty() {
            return Vec::new();
        }
        self.params.forward(&self.table, tokens)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlstmTrainConfig {
    /// Per-direction hidden size (the concatenated state is `2·hidden`).
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for BlstmTrainConfig {
    fn default() -> Self {
        BlstmTrainConfig {
            hidden: 32,
            learning_rate: 0.01,
            epochs: 15,
            batch_size: 16,
            clip_norm: 5.0,
            init_scale: 0.08,
            seed: 0,
        }
    }
}

/// Mean per-token training loss of each epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlstmTrainLog {
    pub epoch_loss: Vec<f64>,
}

/// Trains on the batch loss summed over every real token of the batch.
pub fn train_blstm(
    train: &Dataset,
    table: &EmbeddingTable,
    config: &BlstmTrainConfig,
) -> Result<(BlstmParams, BlstmTrainLog)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = seed::rng(config.seed);
    let mut params = BlstmParams::random(table.dim(), config.hidden, config.init_scale, rng.gen());
    let inputs: Vec<(Vec<Vec<f64>>, &[Tag])> = train
        .sentences
        .iter()
        .map(|s| {
            let texts: Vec<&str> = s.tokens().iter().map(|t| t.text.as_str()).collect();
            (table.embed(&texts), s.tags())
        })
        .collect();
    let tokens = train.token_count() as f64;
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut log = BlstmTrainLog::default();
    let mut grad = BlstmParams::zeros(params.dim, params.hidden);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size.max(1)) {
            for buf in grad.buffers_mut() {
                buf.iter_mut().for_each(|v| *v = 0.0);
            }
            for &k in batch {
                let (xs, gold) = &inputs[k];
                epoch_loss += params.accumulate(xs, gold, &mut grad);
            }
            let norm = grad
                .buffers()
                .iter()
                .flat_map(|b| b.iter())
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            let clip = if norm > config.clip_norm {
                config.clip_norm / norm
            } else {
                1.0
            };
            let step = config.learning_rate * clip;
            for (p, g) in params.buffers_mut().into_iter().zip(grad.buffers()) {
                for (p, g) in p.iter_mut().zip(g) {
                    *p -= step * g;
                }
            }
        }
        log.epoch_loss.push(epoch_loss / tokens);
    }
    if !params.all_finite() {
        return Err(Error::ModelFormat("training diverged".into()));
    }
    Ok((params, log))
}

/// Settings for the finite-difference check of BPTT.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub dim: usize,
    pub hidden: usize,
    pub len: usize,
    pub samples: usize,
    pub step: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            dim: 4,
            hidden: 3,
            len: 3,
            samples: 30,
            step: 1e-4,
            init_scale: 0.5,
            seed: 0,
        }
    }
}

/// Largest relative error `|a − n| / max(|a| + |n|, 1e-7)` between analytic
/// and central-difference gradients over randomly sampled parameters.
pub fn gradient_check(config: &GradCheckConfig) -> f64 {
    let mut rng = seed::rng(config.seed);
    let mut params = BlstmParams::random(config.dim, config.hidden, config.init_scale, rng.gen());
    let xs: Vec<Vec<f64>> = (0..config.len)
        .map(|_| (0..config.dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let gold: Vec<Tag> = (0..config.len)
        .map(|_| Tag::ALL[rng.gen_range(0..NUM_TAGS)])
        .collect();
    let (_, grad) = params.loss_and_gradient(&xs, &gold);
    let mut worst: f64 = 0.0;
    for _ in 0..config.samples {
        let k = rng.gen_range(0..params.num_params());
        let orig = params.get_flat(k);
        params.set_flat(k, orig + config.step);
        let plus = params.loss_and_gradient(&xs, &gold).0;
        params.set_flat(k, orig - config.step);
        let minus = params.loss_and_gradient(&xs, &gold).0;
        params.set_flat(k, orig);
        let numeric = (plus - minus) / (2.0 * config.step);
        let analytic = grad.get_flat(k);
        let rel = (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-7);
        worst = worst.max(rel);
    }
    worst
}
