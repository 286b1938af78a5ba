//! One-vs-rest linear SVM over stacking vectors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::modelfile::{self, fmt_floats, ModelKind};
use crate::seed;
use crate::stacker::{StackVector, STACK_DIM};
use crate::tag::{argmax_tag, Tag, NUM_TAGS};

/// Per-coordinate input scale: probabilities as-is, the hard-label index
/// mapped from `0..=6` onto `[0, 1]`.
pub fn default_scale() -> [f64; STACK_DIM] {
    let mut s = [1.0; STACK_DIM];
    s[STACK_DIM - 1] = 1.0 / (NUM_TAGS - 1) as f64;
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub weights: [[f64; STACK_DIM]; NUM_TAGS],
    pub bias: [f64; NUM_TAGS],
    pub l2_lambda: f64,
    pub feature_scale: [f64; STACK_DIM],
}

impl SvmModel {
    pub fn zeros(l2_lambda: f64) -> SvmModel {
        SvmModel {
            weights: [[0.0; STACK_DIM]; NUM_TAGS],
            bias: [0.0; NUM_TAGS],
            l2_lambda,
            feature_scale: default_scale(),
        }
    }

    fn scaled(&self, v: &StackVector) -> [f64; STACK_DIM] {
        let mut x = v.0;
        for (x, s) in x.iter_mut().zip(&self.feature_scale) {
            *x *= s;
        }
        x
    }

    fn scores_scaled(&self, x: &[f64; STACK_DIM]) -> [f64; NUM_TAGS] {
        let mut out = self.bias;
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o += dot(w, x);
        }
        out
    }

    pub fn scores(&self, v: &StackVector) -> [f64; NUM_TAGS] {
        self.scores_scaled(&self.scaled(v))
    }

    /// Highest-scoring class; ties go to the lower tag index.
    pub fn predict_tag(&self, v: &StackVector) -> Tag {
        argmax_tag(&self.scores(v))
    }

    /// Mean over examples of the summed one-vs-rest hinge losses, plus
    /// `λ‖w‖²` over all class weights (biases unregularized).
    pub fn objective(&self, xs: &[StackVector], ys: &[Tag]) -> f64 {
        let mut hinge = 0.0;
        for (v, &y) in xs.iter().zip(ys) {
            let s = self.scores(v);
            for (c, s) in s.iter().enumerate() {
                let sign = if c == y.index() { 1.0 } else { -1.0 };
                hinge += (1.0 - sign * s).max(0.0);
            }
        }
        let norm: f64 = self.weights.iter().map(|w| dot(w, w)).sum();
        hinge / xs.len().max(1) as f64 + self.l2_lambda * norm
    }

    pub fn to_text(&self) -> String {
        let mut out = modelfile::preamble(ModelKind::Svm);
        let _ = writeln!(out, "l2\t{:?}", self.l2_lambda);
        let _ = writeln!(out, "scale\t{}", fmt_floats(&self.feature_scale));
        for tag in Tag::ALL {
            let t = tag.index();
            let _ = writeln!(
                out,
                "class\t{tag}\t{:?}\t{}",
                self.bias[t],
                fmt_floats(&self.weights[t])
            );
        }
        out
    }

    pub fn from_text(content: &str) -> Result<SvmModel> {
        let mut lines = modelfile::Lines::open(content, ModelKind::Svm)?;
        let bad = |no: usize, what: &str| Error::ModelFormat(format!("line {no}: {what}"));
        let l2 = lines.expect_field("l2")?;
        let l2_lambda = modelfile::parse_weight(l2).map_err(Error::ModelFormat)?;
        let scale =
            modelfile::parse_floats(lines.expect_field("scale")?).map_err(Error::ModelFormat)?;
        let feature_scale: [f64; STACK_DIM] = scale
            .try_into()
            .map_err(|_| Error::ModelFormat(format!("scale needs {STACK_DIM} values")))?;
        if feature_scale.iter().any(|&s| s <= 0.0) {
            return Err(Error::ModelFormat("scale factors must be positive".into()));
        }
        let mut model = SvmModel {
            feature_scale,
            ..SvmModel::zeros(l2_lambda)
        };
        for tag in Tag::ALL {
            let (no, line) = lines.next_line()?;
            let cols: Vec<&str> = line.split('\t').collect();
            let [kind, name, bias, weights] = cols[..] else {
                return Err(bad(no, "malformed class row"));
            };
            if kind != "class" || modelfile::parse_tag(no, name)? != tag {
                return Err(bad(no, "class rows must follow the tag table order"));
            }
            model.bias[tag.index()] = modelfile::parse_weight(bias).map_err(|e| bad(no, &e))?;
            let w = modelfile::parse_floats(weights).map_err(|e| bad(no, &e))?;
            model.weights[tag.index()] = w
                .try_into()
                .map_err(|_| bad(no, &format!("expected {STACK_DIM} weights")))?;
        }
        if let Some((no, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(bad(no, "trailing content"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SvmModel> {
        SvmModel::from_text(&fs::read_to_string(path)?)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmTrainConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        SvmTrainConfig {
            learning_rate: 0.05,
            l2_lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SvmTrainLog {
    /// Full-data objective after each epoch.
    pub objective: Vec<f64>,
}

/// Stochastic subgradient descent on each one-vs-rest objective, all seven
/// classes updated per visited example. Step size at update `t` (1-based,
/// counted across epochs) is `learning_rate / √t`.
pub fn train_svm(
    xs: &[StackVector],
    ys: &[Tag],
    config: &SvmTrainConfig,
) -> Result<(SvmModel, SvmTrainLog)> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    let mut model = SvmModel::zeros(config.l2_lambda);
    let scaled: Vec<[f64; STACK_DIM]> = xs.iter().map(|v| model.scaled(v)).collect();
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut log = SvmTrainLog::default();
    let mut t = 0usize;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let lr = config.learning_rate / (t as f64).sqrt();
            let x = &scaled[i];
            let scores = model.scores_scaled(x);
            for c in 0..NUM_TAGS {
                let y = if c == ys[i].index() { 1.0 } else { -1.0 };
                let w = &mut model.weights[c];
                let violated = y * scores[c] < 1.0;
                for (wj, xj) in w.iter_mut().zip(x) {
                    let mut g = 2.0 * config.l2_lambda * *wj;
                    if violated {
                        g -= y * xj;
                    }
                    *wj -= lr * g;
                }
                if violated {
                    model.bias[c] += lr * y;
                }
            }
        }
        log.objective.push(model.objective(xs, ys));
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_predicts_lowest_index() {
        let m = SvmModel::zeros(1e-4);
        assert_eq!(m.predict_tag(&StackVector([0.3; STACK_DIM])), Tag::Oamt);
    }

    #[test]
    fn single_weight_construction() {
        let mut m = SvmModel::zeros(0.0);
        m.weights[Tag::O.index()][6] = 10.0;
        let mut v = [0.0; STACK_DIM];
        v[6] = 1.0;
        v[7] = 1.0;
        assert_eq!(m.predict_tag(&StackVector(v)), Tag::O);
    }

    #[test]
    fn bias_shift_leaves_predictions_alone() {
        let mut m = SvmModel::zeros(0.0);
        for (c, w) in m.weights.iter_mut().enumerate() {
            for (j, x) in w.iter_mut().enumerate() {
                *x = ((c * 31 + j * 7) % 11) as f64 / 5.0 - 1.0;
            }
        }
        let mut shifted = m.clone();
        for b in &mut shifted.bias {
            *b += 3.25;
        }
        for k in 0..50 {
            let v: [f64; STACK_DIM] = std::array::from_fn(|j| ((k * 13 + j * 5) % 9) as f64 / 8.0);
            let v = StackVector(v);
            assert_eq!(m.predict_tag(&v), shifted.predict_tag(&v));
        }
    }

    #[test]
    fn rejects_mismatched_or_empty_input() {
        let v = StackVector([0.0; STACK_DIM]);
        let config = SvmTrainConfig::default();
        assert!(matches!(
            train_svm(&[v, v], &[Tag::O], &config),
            Err(Error::LengthMismatch(2, 1))
        ));
        assert!(matches!(
            train_svm(&[], &[], &config),
            Err(Error::LengthMismatch(0, 0))
        ));
    }

    #[test]
    fn text_round_trip() {
        let mut m = SvmModel::zeros(1e-4);
        m.weights[3][14] = -0.125;
        m.bias[5] = 0.1 + 0.2;
        let text = m.to_text();
        assert!(text.starts_with("OFFERNER-MODEL v1 SVM\n"));
        assert_eq!(SvmModel::from_text(&text).unwrap(), m);
        assert!(SvmModel::from_text(&text.replace("class\tPRD", "class\tMERCH")).is_err());
    }
}
