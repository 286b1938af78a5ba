//! Linear-chain CRF: forward-backward marginals, Viterbi decoding, and
//! L2-regularized maximum-likelihood training by mini-batch gradient ascent.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::corpus::{Dataset, TaggedSentence};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureConfig};
use crate::modelfile::{self, ModelKind};
use crate::seed;
use crate::tag::{Tag, NUM_TAGS};
use crate::token::Token;
use crate::{ProbTagger, TagDistribution, Tagger};

type Row = [f64; NUM_TAGS];

/// Interned feature keys, a bijection between strings and dense ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureIndex {
    keys: Vec<String>,
    ids: HashMap<String, usize>,
}

impl FeatureIndex {
    pub fn intern(&mut self, key: &str) -> usize {
        if let Some(&id) = self.ids.get(key) {
            return id;
        }
        let id = self.keys.len();
        self.keys.push(key.to_string());
        self.ids.insert(key.to_string(), id);
        id
    }

    pub fn get(&self, key: &str) -> Option<usize> {
        self.ids.get(key).copied()
    }

    pub fn key(&self, id: usize) -> &str {
        &self.keys[id]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrfModel {
    pub config: FeatureConfig,
    pub l2_lambda: f64,
    features: FeatureIndex,
    emission: Vec<Row>,
    /// `transition[from][to]`.
    transition: [Row; NUM_TAGS],
    /// Transition out of the virtual START state.
    start: Row,
}

/// Emission and transition potentials for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub emission: Vec<Row>,
    pub transition: [Row; NUM_TAGS],
    pub start: Row,
}

/// Gradient with the same layout as the model's weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfGradient {
    pub emission: Vec<Row>,
    pub transition: [Row; NUM_TAGS],
    pub start: Row,
}

/// Addresses one trainable weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightRef {
    Emission(usize, Tag),
    Transition(Tag, Tag),
    Start(Tag),
}

impl CrfModel {
    /// An all-zero model.
    pub fn new(config: FeatureConfig, l2_lambda: f64) -> CrfModel {
        CrfModel {
            config,
            l2_lambda,
            features: FeatureIndex::default(),
            emission: Vec::new(),
            transition: [[0.0; NUM_TAGS]; NUM_TAGS],
            start: [0.0; NUM_TAGS],
        }
    }

    pub fn features(&self) -> &FeatureIndex {
        &self.features
    }

    pub fn add_feature(&mut self, key: &str) -> usize {
        let id = self.features.intern(key);
        if id == self.emission.len() {
            self.emission.push([0.0; NUM_TAGS]);
        }
        id
    }

    /// Interns every feature that fires anywhere in `sentences`.
    pub fn add_features_from<'a>(&mut self, sentences: impl IntoIterator<Item = &'a [Token]>) {
        for tokens in sentences {
            for i in 0..tokens.len() {
                for key in extract_features(tokens, i, &self.config) {
                    self.add_feature(&key);
                }
            }
        }
    }

    pub fn weight(&self, w: WeightRef) -> f64 {
        match w {
            WeightRef::Emission(f, t) => self.emission[f][t.index()],
            WeightRef::Transition(a, b) => self.transition[a.index()][b.index()],
            WeightRef::Start(t) => self.start[t.index()],
        }
    }

    pub fn weight_mut(&mut self, w: WeightRef) -> &mut f64 {
        match w {
            WeightRef::Emission(f, t) => &mut self.emission[f][t.index()],
            WeightRef::Transition(a, b) => &mut self.transition[a.index()][b.index()],
            WeightRef::Start(t) => &mut self.start[t.index()],
        }
    }

    /// Sets the emission weight of `(key, tag)`, interning `key` if needed.
    pub fn set_emission(&mut self, key: &str, tag: Tag, value: f64) {
        let id = self.add_feature(key);
        self.emission[id][tag.index()] = value;
    }

    pub fn set_transition(&mut self, from: Tag, to: Tag, value: f64) {
        self.transition[from.index()][to.index()] = value;
    }

    pub fn set_start(&mut self, to: Tag, value: f64) {
        self.start[to.index()] = value;
    }

    /// All weight addresses in a fixed order.
    pub fn weight_refs(&self) -> Vec<WeightRef> {
        let mut refs = Vec::new();
        for f in 0..self.emission.len() {
            refs.extend(Tag::ALL.map(|t| WeightRef::Emission(f, t)));
        }
        for a in Tag::ALL {
            refs.extend(Tag::ALL.map(|b| WeightRef::Transition(a, b)));
        }
        refs.extend(Tag::ALL.map(WeightRef::Start));
        refs
    }

    fn squared_norm(&self) -> f64 {
        let sq = |r: &Row| r.iter().map(|w| w * w).sum::<f64>();
        self.emission.iter().map(sq).sum::<f64>()
            + self.transition.iter().map(sq).sum::<f64>()
            + sq(&self.start)
    }

    /// Known feature ids per position; unseen features carry no weight.
    fn feature_ids(&self, tokens: &[Token]) -> Vec<Vec<usize>> {
        (0..tokens.len())
            .map(|i| {
                extract_features(tokens, i, &self.config)
                    .iter()
                    .filter_map(|k| self.features.get(k))
                    .collect()
            })
            .collect()
    }

    fn lattice_from_ids(&self, ids: &[Vec<usize>]) -> Lattice {
        let emission = ids
            .iter()
            .map(|fs| {
                let mut row = [0.0; NUM_TAGS];
                for &f in fs {
                    for (r, w) in row.iter_mut().zip(&self.emission[f]) {
                        *r += w;
                    }
                }
                row
            })
            .collect();
        Lattice {
            emission,
            transition: self.transition,
            start: self.start,
        }
    }

    pub fn score_lattice(&self, tokens: &[Token]) -> Lattice {
        self.lattice_from_ids(&self.feature_ids(tokens))
    }

    pub fn marginals(&self, tokens: &[Token]) -> Vec<TagDistribution> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let lattice = self.score_lattice(tokens);
        let fb = ForwardBackward::run(&lattice);
        (0..tokens.len()).map(|i| fb.node_marginal(i)).collect()
    }

    pub fn viterbi(&self, tokens: &[Token]) -> Vec<Tag> {
        if tokens.is_empty() {
            return Vec::new();
        }
        viterbi_lattice(&self.score_lattice(tokens))
    }

    /// `Σ log p(tags | tokens) − λ‖w‖²` over `batch` and its gradient.
    pub fn log_likelihood_and_gradient(&self, batch: &[TaggedSentence]) -> (f64, CrfGradient) {
        let mut grad = self.zero_gradient();
        let mut ll = 0.0;
        for s in batch {
            let ids = self.feature_ids(s.tokens());
            ll += self.accumulate(&ids, s.tags(), &mut grad);
        }
        ll -= self.l2_lambda * self.squared_norm();
        grad.add_scaled_weights(self, -2.0 * self.l2_lambda);
        (ll, grad)
    }

    fn zero_gradient(&self) -> CrfGradient {
        CrfGradient {
            emission: vec![[0.0; NUM_TAGS]; self.emission.len()],
            transition: [[0.0; NUM_TAGS]; NUM_TAGS],
            start: [0.0; NUM_TAGS],
        }
    }

    /// Adds observed minus expected counts of one sentence into `grad` and
    /// returns its log-likelihood.
    fn accumulate(&self, ids: &[Vec<usize>], gold: &[Tag], grad: &mut CrfGradient) -> f64 {
        let lattice = self.lattice_from_ids(ids);
        let fb = ForwardBackward::run(&lattice);
        let len = ids.len();

        let mut score = lattice.start[gold[0].index()];
        for i in 0..len {
            score += lattice.emission[i][gold[i].index()];
            if i > 0 {
                score += lattice.transition[gold[i - 1].index()][gold[i].index()];
            }
        }

        grad.start[gold[0].index()] += 1.0;
        let first = fb.node_marginal(0);
        for t in 0..NUM_TAGS {
            grad.start[t] -= first.probs[t];
        }
        for i in 0..len {
            let marg = fb.node_marginal(i);
            for &f in &ids[i] {
                let row = &mut grad.emission[f];
                row[gold[i].index()] += 1.0;
                for t in 0..NUM_TAGS {
                    row[t] -= marg.probs[t];
                }
            }
            if i > 0 {
                grad.transition[gold[i - 1].index()][gold[i].index()] += 1.0;
                for a in 0..NUM_TAGS {
                    for b in 0..NUM_TAGS {
                        grad.transition[a][b] -= fb.edge_marginal(&lattice, i, a, b);
                    }
                }
            }
        }
        score - fb.log_z
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CrfModel> {
        CrfModel::from_text(&fs::read_to_string(path)?)
    }

    /// Serializes nonzero weights in feature-id order.
    pub fn to_text(&self) -> String {
        let mut out = modelfile::preamble(ModelKind::Crf);
        let _ = writeln!(out, "l2\t{:?}", self.l2_lambda);
        let _ = writeln!(out, "flags\t{}", self.config.to_line());
        for to in Tag::ALL {
            let w = self.start[to.index()];
            if w != 0.0 {
                let _ = writeln!(out, "trans\tSTART\t{to}\t{w:?}");
            }
        }
        for from in Tag::ALL {
            for to in Tag::ALL {
                let w = self.transition[from.index()][to.index()];
                if w != 0.0 {
                    let _ = writeln!(out, "trans\t{from}\t{to}\t{w:?}");
                }
            }
        }
        for (id, row) in self.emission.iter().enumerate() {
            for tag in Tag::ALL {
                let w = row[tag.index()];
                if w != 0.0 {
                    let _ = writeln!(out, "emit\t{}\t{tag}\t{w:?}", self.features.key(id));
                }
            }
        }
        out
    }

    pub fn from_text(content: &str) -> Result<CrfModel> {
        let mut lines = modelfile::Lines::open(content, ModelKind::Crf)?;
        let l2 = lines.expect_field("l2")?;
        let l2_lambda = modelfile::parse_weight(l2).map_err(Error::ModelFormat)?;
        let flags = lines.expect_field("flags")?;
        let config = FeatureConfig::parse_line(flags)
            .ok_or_else(|| Error::ModelFormat(format!("bad flags line {flags:?}")))?;
        let mut model = CrfModel::new(config, l2_lambda);
        for (no, line) in lines {
            let wl = modelfile::parse_weight_line(no, line)?;
            let tag = modelfile::parse_tag(no, wl.tag)?;
            match wl.kind {
                "emit" => model.set_emission(wl.key, tag, wl.weight),
                "trans" if wl.key == "START" => model.set_start(tag, wl.weight),
                "trans" => {
                    let from = modelfile::parse_tag(no, wl.key)?;
                    model.set_transition(from, tag, wl.weight);
                }
                other => {
                    return Err(Error::ModelFormat(format!(
                        "line {no}: unknown kind {other:?}"
                    )))
                }
            }
        }
        Ok(model)
    }
}

impl CrfGradient {
    pub fn get(&self, w: WeightRef) -> f64 {
        match w {
            WeightRef::Emission(f, t) => self.emission[f][t.index()],
            WeightRef::Transition(a, b) => self.transition[a.index()][b.index()],
            WeightRef::Start(t) => self.start[t.index()],
        }
    }

    fn add_scaled_weights(&mut self, model: &CrfModel, scale: f64) {
        let add = |g: &mut Row, w: &Row| {
            for (g, w) in g.iter_mut().zip(w) {
                *g += scale * w;
            }
        };
        for (g, w) in self.emission.iter_mut().zip(&model.emission) {
            add(g, w);
        }
        for (g, w) in self.transition.iter_mut().zip(&model.transition) {
            add(g, w);
        }
        add(&mut self.start, &model.start);
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

struct ForwardBackward {
    alpha: Vec<Row>,
    beta: Vec<Row>,
    log_z: f64,
}

impl ForwardBackward {
    fn run(lattice: &Lattice) -> ForwardBackward {
        let len = lattice.emission.len();
        let trans = &lattice.transition;
        let mut alpha = vec![[0.0; NUM_TAGS]; len];
        for t in 0..NUM_TAGS {
            alpha[0][t] = lattice.start[t] + lattice.emission[0][t];
        }
        for i in 1..len {
            for t in 0..NUM_TAGS {
                let prev = &alpha[i - 1];
                alpha[i][t] = lattice.emission[i][t]
                    + log_sum_exp((0..NUM_TAGS).map(|s| prev[s] + trans[s][t]));
            }
        }
        let mut beta = vec![[0.0; NUM_TAGS]; len];
        for i in (0..len.saturating_sub(1)).rev() {
            for s in 0..NUM_TAGS {
                let next = &beta[i + 1];
                let em = &lattice.emission[i + 1];
                beta[i][s] = log_sum_exp((0..NUM_TAGS).map(|t| trans[s][t] + em[t] + next[t]));
            }
        }
        let log_z = log_sum_exp(alpha[len - 1].iter().copied());
        ForwardBackward { alpha, beta, log_z }
    }

    fn node_marginal(&self, i: usize) -> TagDistribution {
        let mut probs = [0.0; NUM_TAGS];
        for (t, p) in probs.iter_mut().enumerate() {
            *p = (self.alpha[i][t] + self.beta[i][t] - self.log_z).exp();
        }
        TagDistribution::normalized(probs)
    }

    /// `p(y[i-1] = a, y[i] = b)`.
    fn edge_marginal(&self, lattice: &Lattice, i: usize, a: usize, b: usize) -> f64 {
        (self.alpha[i - 1][a] + lattice.transition[a][b] + lattice.emission[i][b] + self.beta[i][b]
            - self.log_z)
            .exp()
    }
}

/// Best path; at every comparison a tie keeps the lower tag index.
pub fn viterbi_lattice(lattice: &Lattice) -> Vec<Tag> {
    let len = lattice.emission.len();
    let mut delta = vec![[0.0; NUM_TAGS]; len];
    let mut back = vec![[0usize; NUM_TAGS]; len];
    for t in 0..NUM_TAGS {
        delta[0][t] = lattice.start[t] + lattice.emission[0][t];
    }
    for i in 1..len {
        for t in 0..NUM_TAGS {
            let mut best = 0;
            let mut best_score = delta[i - 1][0] + lattice.transition[0][t];
            for s in 1..NUM_TAGS {
                let score = delta[i - 1][s] + lattice.transition[s][t];
                if score > best_score {
                    best = s;
                    best_score = score;
                }
            }
            delta[i][t] = best_score + lattice.emission[i][t];
            back[i][t] = best;
        }
    }
    let mut last = 0;
    for t in 1..NUM_TAGS {
        if delta[len - 1][t] > delta[len - 1][last] {
            last = t;
        }
    }
    let mut path = vec![last; len];
    for i in (1..len).rev() {
        path[i - 1] = back[i][path[i]];
    }
    path.into_iter().map(|t| Tag::ALL[t]).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrfTrainConfig {
    pub features: FeatureConfig,
    pub l2_lambda: f64,
    /// Initial step size; epoch `e` (1-based) uses `learning_rate / sqrt(e)`.
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CrfTrainConfig {
    fn default() -> Self {
        CrfTrainConfig {
            features: FeatureConfig::all(),
            l2_lambda: 1e-4,
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 8,
            seed: 0,
        }
    }
}

/// Per-epoch training objective (`Σ log p − λ‖w‖²` over the whole set,
/// measured after the epoch).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub objective: Vec<f64>,
}

pub fn train_crf(train: &Dataset, config: &CrfTrainConfig) -> Result<(CrfModel, TrainLog)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = CrfModel::new(config.features, config.l2_lambda);
    model.add_features_from(train.sentences.iter().map(TaggedSentence::tokens));
    let prepared: Vec<(Vec<Vec<usize>>, &[Tag])> = train
        .sentences
        .iter()
        .map(|s| (model.feature_ids(s.tokens()), s.tags()))
        .collect();

    let n = prepared.len() as f64;
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut log = TrainLog::default();
    let mut grad = model.zero_gradient();
    let batch_size = config.batch_size.max(1);

    for epoch in 1..=config.epochs {
        let lr = config.learning_rate / (epoch as f64).sqrt();
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            grad.clear();
            for &k in batch {
                let (ids, gold) = &prepared[k];
                model.accumulate(ids, gold, &mut grad);
            }
            // Ascent on the per-sentence objective: mean batch likelihood
            // gradient minus the L2 term spread over the whole set.
            let step = lr / batch.len() as f64;
            let decay = 1.0 - lr * 2.0 * config.l2_lambda / n;
            model.apply(&grad, step, decay);
        }
        let objective: f64 = prepared
            .iter()
            .map(|(ids, gold)| model.sentence_log_likelihood(ids, gold))
            .sum::<f64>()
            - model.l2_lambda * model.squared_norm();
        log.objective.push(objective);
    }
    Ok((model, log))
}

impl CrfModel {
    fn apply(&mut self, grad: &CrfGradient, step: f64, decay: f64) {
        let update = |w: &mut Row, g: &Row| {
            for (w, g) in w.iter_mut().zip(g) {
                *w = *w * decay + step * g;
            }
        };
        for (w, g) in self.emission.iter_mut().zip(&grad.emission) {
            update(w, g);
        }
        for (w, g) in self.transition.iter_mut().zip(&grad.transition) {
            update(w, g);
        }
        update(&mut self.start, &grad.start);
    }

    fn sentence_log_likelihood(&self, ids: &[Vec<usize>], gold: &[Tag]) -> f64 {
        let lattice = self.lattice_from_ids(ids);
        let log_z = ForwardBackward::run(&lattice).log_z;
        let mut score = lattice.start[gold[0].index()];
        for i in 0..ids.len() {
            score += lattice.emission[i][gold[i].index()];
            if i > 0 {
                score += lattice.transition[gold[i - 1].index()][gold[i].index()];
            }
        }
        score - log_z
    }
}

impl CrfGradient {
    fn clear(&mut self) {
        for row in &mut self.emission {
            *row = [0.0; NUM_TAGS];
        }
        self.transition = [[0.0; NUM_TAGS]; NUM_TAGS];
        self.start = [0.0; NUM_TAGS];
    }
}

impl Tagger for CrfModel {
    fn tag(&self, tokens: &[Token]) -> Vec<Tag> {
        self.viterbi(tokens)
    }
}

impl ProbTagger for CrfModel {
    fn distributions(&self, tokens: &[Token]) -> Vec<TagDistribution> {
        self.marginals(tokens)
    }
}
