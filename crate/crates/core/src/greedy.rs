//! Greedy left-to-right averaged-perceptron tagger.
//!
//! Emits one hard tag per token and nothing else; there is no score or
//! probability output on this model's public surface.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::features::lemma;
use crate::modelfile::{self, ModelKind};
use crate::seed;
use crate::tag::{argmax_tag, Tag, NUM_TAGS};
use crate::token::Token;
use crate::Tagger;

type Row = [f64; NUM_TAGS];

fn tag_name(tag: Option<Tag>) -> &'static str {
    tag.map_or("START", Tag::name)
}

/// Features for `tokens[position]` given the two previously predicted tags
/// (`None` before the sentence start).
pub fn gp_features(
    tokens: &[Token],
    position: usize,
    prev_tag: Option<Tag>,
    prev2_tag: Option<Tag>,
) -> Vec<String> {
    let tok = &tokens[position];
    let prev = position.checked_sub(1).map(|i| tokens[i].lower.as_str());
    let next = tokens.get(position + 1).map(|t| t.lower.as_str());
    let p1 = tag_name(prev_tag);
    let p2 = tag_name(prev2_tag);
    vec![
        "bias".to_string(),
        format!("w={}", tok.lower),
        format!("prev_w={}", prev.unwrap_or("<s>")),
        format!("next_w={}", next.unwrap_or("</s>")),
        format!("shape={}", tok.shape),
        format!("lemma={}", lemma(&tok.text)),
        format!("prev_tag={p1}"),
        format!("prev_tags={p2}|{p1}"),
        format!("prev_tag_w={p1}|{}", tok.lower),
    ]
}

/// Mutable perceptron state during training. Weights are averaged over every
/// observed instance when [`PerceptronTrainer::finalize`] consumes it.
#[derive(Clone, Debug, Default)]
pub struct PerceptronTrainer {
    weights: BTreeMap<String, Row>,
    totals: BTreeMap<String, Row>,
    stamps: BTreeMap<String, [usize; NUM_TAGS]>,
    instances: usize,
}

impl PerceptronTrainer {
    pub fn new() -> PerceptronTrainer {
        PerceptronTrainer::default()
    }

    pub fn scores(&self, features: &[String]) -> Row {
        score(&self.weights, features)
    }

    pub fn weights(&self) -> &BTreeMap<String, Row> {
        &self.weights
    }

    /// Counts one prediction; on a mistake adds the features to `truth` and
    /// subtracts them from `guess`.
    pub fn observe(&mut self, truth: Tag, guess: Tag, features: &[String]) {
        self.instances += 1;
        if truth == guess {
            return;
        }
        for f in features {
            self.bump(f, truth, 1.0);
            self.bump(f, guess, -1.0);
        }
    }

    fn bump(&mut self, feature: &str, tag: Tag, delta: f64) {
        let t = tag.index();
        let w = self
            .weights
            .entry(feature.to_string())
            .or_insert([0.0; NUM_TAGS]);
        let total = self
            .totals
            .entry(feature.to_string())
            .or_insert([0.0; NUM_TAGS]);
        let stamp = self
            .stamps
            .entry(feature.to_string())
            .or_insert([0; NUM_TAGS]);
        // The old value held for every instance since the last change, up to
        // but not including the current one.
        total[t] += (self.instances - 1 - stamp[t]) as f64 * w[t];
        stamp[t] = self.instances - 1;
        w[t] += delta;
    }

    /// Averages the weight vectors that held after each observed instance.
    pub fn finalize(self) -> PerceptronModel {
        let n = self.instances;
        let mut weights = BTreeMap::new();
        if n == 0 {
            return PerceptronModel { weights };
        }
        for (f, w) in &self.weights {
            let total = &self.totals[f];
            let stamp = &self.stamps[f];
            let mut avg = [0.0; NUM_TAGS];
            for t in 0..NUM_TAGS {
                avg[t] = (total[t] + (n - stamp[t]) as f64 * w[t]) / n as f64;
            }
            if avg.iter().any(|&v| v != 0.0) {
                weights.insert(f.clone(), avg);
            }
        }
        PerceptronModel { weights }
    }
}

fn score(weights: &BTreeMap<String, Row>, features: &[String]) -> Row {
    let mut s = [0.0; NUM_TAGS];
    for f in features {
        if let Some(w) = weights.get(f) {
            for (s, w) in s.iter_mut().zip(w) {
                *s += w;
            }
        }
    }
    s
}

fn greedy_decode(tokens: &[Token], mut scores: impl FnMut(&[String]) -> Row) -> Vec<Tag> {
    let mut out: Vec<Tag> = Vec::with_capacity(tokens.len());
    for i in 0..tokens.len() {
        let p1 = i.checked_sub(1).map(|j| out[j]);
        let p2 = i.checked_sub(2).map(|j| out[j]);
        let f = gp_features(tokens, i, p1, p2);
        out.push(argmax_tag(&scores(&f)));
    }
    out
}

/// Averaged, read-only perceptron weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerceptronModel {
    weights: BTreeMap<String, Row>,
}

impl PerceptronModel {
    pub fn weights(&self) -> &BTreeMap<String, Row> {
        &self.weights
    }

    /// Greedy decode; score ties go to the lower tag index.
    pub fn predict_hard(&self, tokens: &[Token]) -> Vec<Tag> {
        greedy_decode(tokens, |f| score(&self.weights, f))
    }

    pub fn to_text(&self) -> String {
        let mut out = modelfile::preamble(ModelKind::Greedy);
        for (f, row) in &self.weights {
            for tag in Tag::ALL {
                let w = row[tag.index()];
                if w != 0.0 {
                    let _ = writeln!(out, "emit\t{f}\t{tag}\t{w:?}");
                }
            }
        }
        out
    }

    pub fn from_text(content: &str) -> Result<PerceptronModel> {
        let lines = modelfile::Lines::open(content, ModelKind::Greedy)?;
        let mut weights: BTreeMap<String, Row> = BTreeMap::new();
        for (no, line) in lines {
            let wl = modelfile::parse_weight_line(no, line)?;
            if wl.kind != "emit" {
                return Err(Error::ModelFormat(format!(
                    "line {no}: unknown kind {:?}",
                    wl.kind
                )));
            }
            let tag = modelfile::parse_tag(no, wl.tag)?;
            weights.entry(wl.key.to_string()).or_insert([0.0; NUM_TAGS])[tag.index()] = wl.weight;
        }
        Ok(PerceptronModel { weights })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PerceptronModel> {
        PerceptronModel::from_text(&fs::read_to_string(path)?)
    }
}

impl Tagger for PerceptronModel {
    fn tag(&self, tokens: &[Token]) -> Vec<Tag> {
        self.predict_hard(tokens)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyTrainConfig {
    pub epochs: usize,
    pub seed: u64,
}

impl Default for GreedyTrainConfig {
    fn default() -> Self {
        GreedyTrainConfig {
            epochs: 10,
            seed: 0,
        }
    }
}

/// Standard averaged-perceptron training: each epoch visits the sentences in
/// a freshly shuffled order and decodes greedily with the current weights,
/// feeding predicted (not gold) previous tags into the features.
pub fn train_greedy(train: &Dataset, config: &GreedyTrainConfig) -> Result<PerceptronModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut trainer = PerceptronTrainer::new();
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let s = &train.sentences[k];
            let tokens = s.tokens();
            let mut predicted: Vec<Tag> = Vec::with_capacity(tokens.len());
            for (i, &gold) in s.tags().iter().enumerate() {
                let p1 = i.checked_sub(1).map(|j| predicted[j]);
                let p2 = i.checked_sub(2).map(|j| predicted[j]);
                let f = gp_features(tokens, i, p1, p2);
                let guess = argmax_tag(&trainer.scores(&f));
                trainer.observe(gold, guess, &f);
                predicted.push(guess);
            }
        }
    }
    Ok(trainer.finalize())
}
