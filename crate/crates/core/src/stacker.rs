//! Two-level stacking: the CRF and BLSTM distributions plus the greedy
//! tagger's hard label form one 15-dimensional vector per token, which a
//! linear SVM maps to the final tag.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::blstm::{train_blstm, BlstmParams, BlstmTagger, BlstmTrainConfig};
use crate::corpus::Dataset;
use crate::crf::{train_crf, CrfModel, CrfTrainConfig};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::greedy::{train_greedy, GreedyTrainConfig, PerceptronModel};
use crate::modelfile::{self, ModelKind};
use crate::seed;
use crate::svm::{train_svm, SvmModel, SvmTrainConfig};
use crate::tag::{Tag, NUM_TAGS};
use crate::token::{tokenize, Token};
use crate::{ProbTagger, TagDistribution, Tagger};

pub const STACK_DIM: usize = 2 * NUM_TAGS + 1;

/// `[crf probabilities (7), blstm probabilities (7), greedy tag index]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StackVector(pub [f64; STACK_DIM]);

impl StackVector {
    pub fn assemble(crf: &TagDistribution, blstm: &TagDistribution, hard: Tag) -> StackVector {
        let mut v = [0.0; STACK_DIM];
        v[..NUM_TAGS].copy_from_slice(&crf.probs);
        v[NUM_TAGS..2 * NUM_TAGS].copy_from_slice(&blstm.probs);
        v[2 * NUM_TAGS] = hard.index() as f64;
        StackVector(v)
    }
}

/// The three level-one taggers. Only the greedy tagger's hard labels are
/// reachable through its slot.
#[derive(Clone, Copy)]
pub struct BaseModels<'a> {
    pub crf: &'a dyn ProbTagger,
    pub blstm: &'a dyn ProbTagger,
    pub greedy: &'a dyn Tagger,
}

impl BaseModels<'_> {
    pub fn stack_vectors(&self, tokens: &[Token]) -> Vec<StackVector> {
        let crf = self.crf.distributions(tokens);
        let blstm = self.blstm.distributions(tokens);
        let hard = self.greedy.tag(tokens);
        crf.iter()
            .zip(&blstm)
            .zip(&hard)
            .map(|((c, b), &h)| StackVector::assemble(c, b, h))
            .collect()
    }
}

/// One `(vector, gold tag)` pair per token, in corpus order.
pub fn build_stacking_set(base: &BaseModels, data: &Dataset) -> (Vec<StackVector>, Vec<Tag>) {
    let mut xs = Vec::with_capacity(data.token_count());
    let mut ys = Vec::with_capacity(data.token_count());
    for s in &data.sentences {
        xs.extend(base.stack_vectors(s.tokens()));
        ys.extend_from_slice(s.tags());
    }
    (xs, ys)
}

/// Wraps base models and a trained SVM into one tagger.
pub struct Stacked<'a> {
    pub base: BaseModels<'a>,
    pub svm: &'a SvmModel,
}

impl Tagger for Stacked<'_> {
    fn tag(&self, tokens: &[Token]) -> Vec<Tag> {
        self.base
            .stack_vectors(tokens)
            .iter()
            .map(|v| self.svm.predict_tag(v))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HybridConfig {
    pub crf: CrfTrainConfig,
    pub blstm: BlstmTrainConfig,
    pub greedy: GreedyTrainConfig,
    pub svm: SvmTrainConfig,
}

impl HybridConfig {
    /// Per-stage seeds derived from `master`; hyperparameters untouched.
    pub fn reseed(mut self, master: u64) -> HybridConfig {
        self.crf.seed = seed::derive(master, seed::STAGE_CRF);
        self.blstm.seed = seed::derive(master, seed::STAGE_BLSTM);
        self.greedy.seed = seed::derive(master, seed::STAGE_GREEDY);
        self.svm.seed = seed::derive(master, seed::STAGE_SVM);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridModel {
    pub crf: CrfModel,
    pub blstm: BlstmTagger,
    pub greedy: PerceptronModel,
    pub svm: SvmModel,
}

/// The three base models trained on the same data (in parallel where
/// threads exist).
pub fn train_base_models(
    train: &Dataset,
    table: &EmbeddingTable,
    config: &HybridConfig,
) -> Result<(CrfModel, BlstmTagger, PerceptronModel)> {
    let crf_job = || train_crf(train, &config.crf);
    let blstm_job = || train_blstm(train, table, &config.blstm);
    #[cfg(not(target_arch = "wasm32"))]
    let (crf, blstm, greedy) = std::thread::scope(|s| {
        let crf = s.spawn(crf_job);
        let blstm = s.spawn(blstm_job);
        let greedy = train_greedy(train, &config.greedy);
        (
            crf.join().expect("crf trainer panicked"),
            blstm.join().expect("blstm trainer panicked"),
            greedy,
        )
    });
    #[cfg(target_arch = "wasm32")]
    let (crf, blstm, greedy) = (crf_job(), blstm_job(), train_greedy(train, &config.greedy));
    let blstm = BlstmTagger {
        params: blstm?.0,
        table: table.clone(),
    };
    Ok((crf?.0, blstm, greedy?))
}

/// Base models on `first`, their outputs on `second` train the SVM.
pub fn train_hybrid(
    first: &Dataset,
    second: &Dataset,
    table: &EmbeddingTable,
    config: &HybridConfig,
) -> Result<HybridModel> {
    let (crf, blstm, greedy) = train_base_models(first, table, config)?;
    let base = BaseModels {
        crf: &crf,
        blstm: &blstm,
        greedy: &greedy,
    };
    let (xs, ys) = build_stacking_set(&base, second);
    let (svm, _) = train_svm(&xs, &ys, &config.svm)?;
    Ok(HybridModel {
        crf,
        blstm,
        greedy,
        svm,
    })
}

const PARTS: [(&str, &str); 5] = [
    ("crf", "crf.model"),
    ("blstm", "blstm.model"),
    ("embeddings", "embeddings.txt"),
    ("greedy", "greedy.model"),
    ("svm", "svm.model"),
];

pub const MANIFEST_FILE: &str = "hybrid.manifest";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

impl HybridModel {
    pub fn base(&self) -> BaseModels<'_> {
        BaseModels {
            crf: &self.crf,
            blstm: &self.blstm,
            greedy: &self.greedy,
        }
    }

    /// Tokenizes `text` and tags every token.
    pub fn tag_sentence(&self, text: &str) -> Vec<(String, Tag)> {
        let tokens = tokenize(text);
        let tags = self.tag(&tokens);
        tokens.into_iter().map(|t| t.text).zip(tags).collect()
    }

    fn part_texts(&self) -> [String; 5] {
        [
            self.crf.to_text(),
            self.blstm.params.to_text(),
            self.blstm.table.to_text(),
            self.greedy.to_text(),
            self.svm.to_text(),
        ]
    }

    /// Writes the sub-model files and the manifest into `dir`; returns the
    /// manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let mut manifest = modelfile::preamble(ModelKind::Hybrid);
        for ((role, file), text) in PARTS.iter().zip(self.part_texts()) {
            fs::write(dir.join(file), &text)?;
            let _ = writeln!(manifest, "{role}\t{file}\t{}", sha256_hex(text.as_bytes()));
        }
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, manifest)?;
        Ok(path)
    }

    /// Loads from a manifest, checking every sub-model's hash.
    pub fn load(manifest: &Path) -> Result<HybridModel> {
        let dir = manifest.parent().unwrap_or(Path::new("."));
        let content = fs::read_to_string(manifest)?;
        let mut lines = modelfile::Lines::open(&content, ModelKind::Hybrid)?;
        let mut texts = Vec::with_capacity(PARTS.len());
        for (role, _) in PARTS {
            let (no, line) = lines.next_line()?;
            let cols: Vec<&str> = line.split('\t').collect();
            let [r, file, hash] = cols[..] else {
                return Err(Error::ModelFormat(format!(
                    "line {no}: malformed manifest entry"
                )));
            };
            if r != role {
                return Err(Error::ModelFormat(format!(
                    "line {no}: expected {role} entry"
                )));
            }
            let text = fs::read_to_string(dir.join(file))?;
            if sha256_hex(text.as_bytes()) != hash {
                return Err(Error::HashMismatch(file.to_string()));
            }
            texts.push(text);
        }
        Ok(HybridModel {
            crf: CrfModel::from_text(&texts[0])?,
            blstm: BlstmTagger {
                params: BlstmParams::from_text(&texts[1])?,
                table: EmbeddingTable::from_text(&texts[2])?,
            },
            greedy: PerceptronModel::from_text(&texts[3])?,
            svm: SvmModel::from_text(&texts[4])?,
        })
    }
}

impl Tagger for HybridModel {
    fn tag(&self, tokens: &[Token]) -> Vec<Tag> {
        Stacked {
            base: self.base(),
            svm: &self.svm,
        }
        .tag(tokens)
    }
}
