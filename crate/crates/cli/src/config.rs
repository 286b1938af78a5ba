//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and `#` comments are ignored. Relative paths resolve against
//! the directory holding the config file. Unknown keys are errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use offerner::embedding::DEFAULT_DIM;
use offerner::features::FeatureConfig;
use offerner::stacker::HybridConfig;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub templates_dir: PathBuf,
    pub lexicon: PathBuf,
    /// Template file stems of the training sources, in order D1, D2, ...
    pub sources: Vec<String>,
    pub counts: Vec<usize>,
    pub test_source: String,
    pub test_count: usize,
    /// Pretrained `word v1 .. vd` vectors; a seeded random table otherwise.
    pub embeddings: Option<PathBuf>,
    pub embedding_dim: usize,
    pub embedding_scale: f64,
    pub output_dir: PathBuf,
    pub model_dir: PathBuf,
    pub seed: u64,
    pub models: HybridConfig,
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Config(format!("invalid value {value:?} for {key}"))
}

fn num<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    value.split_whitespace().map(|v| num(key, v)).collect()
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<PipelineConfig> {
        let content = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        PipelineConfig::parse(&content, base)
    }

    pub fn parse(content: &str, base: &Path) -> CliResult<PipelineConfig> {
        let resolve = |v: &str| base.join(v);
        let mut templates_dir = None;
        let mut lexicon = None;
        let mut sources: Option<Vec<String>> = None;
        let mut counts: Option<Vec<usize>> = None;
        let mut test_source = None;
        let mut test_count = None;
        let mut embeddings = None;
        let mut embedding_dim = DEFAULT_DIM;
        let mut embedding_scale = 0.5;
        let mut output_dir = None;
        let mut model_dir = None;
        let mut seed = 0u64;
        let mut m = HybridConfig::default();

        for (i, raw) in content.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            match key {
                "templates_dir" => templates_dir = Some(resolve(value)),
                "lexicon" => lexicon = Some(resolve(value)),
                "sources" => sources = Some(list(key, value)?),
                "counts" => counts = Some(list(key, value)?),
                "test_source" => test_source = Some(value.to_string()),
                "test_count" => test_count = Some(num(key, value)?),
                "embeddings" => embeddings = Some(resolve(value)),
                "embedding_dim" => embedding_dim = num(key, value)?,
                "embedding_scale" => embedding_scale = num(key, value)?,
                "output_dir" => output_dir = Some(resolve(value)),
                "model_dir" => model_dir = Some(resolve(value)),
                "seed" => seed = num(key, value)?,
                "crf.features" => {
                    m.crf.features = match value {
                        "all" => FeatureConfig::all(),
                        "none" => FeatureConfig::none(),
                        _ => FeatureConfig::parse_line(value).ok_or_else(|| bad(key, value))?,
                    }
                }
                "crf.l2" => m.crf.l2_lambda = num(key, value)?,
                "crf.learning_rate" => m.crf.learning_rate = num(key, value)?,
                "crf.epochs" => m.crf.epochs = num(key, value)?,
                "crf.batch_size" => m.crf.batch_size = num(key, value)?,
                "blstm.hidden" => m.blstm.hidden = num(key, value)?,
                "blstm.learning_rate" => m.blstm.learning_rate = num(key, value)?,
                "blstm.epochs" => m.blstm.epochs = num(key, value)?,
                "blstm.batch_size" => m.blstm.batch_size = num(key, value)?,
                "blstm.clip" => m.blstm.clip_norm = num(key, value)?,
                "blstm.init_scale" => m.blstm.init_scale = num(key, value)?,
                "greedy.epochs" => m.greedy.epochs = num(key, value)?,
                "svm.learning_rate" => m.svm.learning_rate = num(key, value)?,
                "svm.l2" => m.svm.l2_lambda = num(key, value)?,
                "svm.epochs" => m.svm.epochs = num(key, value)?,
                _ => {
                    return Err(CliError::Config(format!(
                        "line {}: unknown key {key:?}",
                        i + 1
                    )))
                }
            }
        }

        let need = |name: &str| CliError::Config(format!("missing key {name}"));
        let output_dir = output_dir.unwrap_or_else(|| base.join("out"));
        let config = PipelineConfig {
            templates_dir: templates_dir.ok_or_else(|| need("templates_dir"))?,
            lexicon: lexicon.ok_or_else(|| need("lexicon"))?,
            sources: sources.ok_or_else(|| need("sources"))?,
            counts: counts.ok_or_else(|| need("counts"))?,
            test_source: test_source.ok_or_else(|| need("test_source"))?,
            test_count: test_count.ok_or_else(|| need("test_count"))?,
            embeddings,
            embedding_dim,
            embedding_scale,
            model_dir: model_dir.unwrap_or_else(|| output_dir.join("models")),
            output_dir,
            seed,
            models: m,
        };
        if config.sources.is_empty() || config.sources.len() != config.counts.len() {
            return Err(CliError::Config(format!(
                "{} sources but {} counts",
                config.sources.len(),
                config.counts.len()
            )));
        }
        Ok(config)
    }

    /// Checks that every input path exists.
    pub fn validate(&self) -> CliResult<()> {
        let mut paths = vec![self.templates_dir.clone(), self.lexicon.clone()];
        for s in self.sources.iter().chain([&self.test_source]) {
            paths.push(self.template_file(s));
        }
        paths.extend(self.embeddings.clone());
        for p in paths {
            if !p.exists() {
                return Err(CliError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Replaces the output directory (and the model directory beneath it).
    pub fn with_output_dir(mut self, dir: PathBuf) -> PipelineConfig {
        if self.model_dir == self.output_dir.join("models") {
            self.model_dir = dir.join("models");
        }
        self.output_dir = dir;
        self
    }

    pub fn template_file(&self, source: &str) -> PathBuf {
        self.templates_dir.join(format!("{source}.txt"))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.output_dir.join("data")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output_dir.join("reports")
    }

    /// Hyperparameters with per-stage seeds derived from the master seed.
    pub fn seeded_models(&self) -> HybridConfig {
        self.models.clone().reseed(self.seed)
    }
}
