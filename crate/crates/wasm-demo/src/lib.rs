//! Browser demo. Everything below [`bindings`] is plain Rust so it can be
//! tested natively; the page talks JSON strings through the bindings.

use offerner::corpus::{combine, generate_dataset, parse_template_file, split_half, SlotLexicon};
use offerner::embedding::EmbeddingTable;
use offerner::seed;
use offerner::stacker::{train_hybrid, HybridConfig, HybridModel};
use offerner::{tokenize, ProbTagger, Tag, TagDistribution, Tagger};
use serde::Serialize;

pub mod bindings;

const SOURCES: [&str; 4] = [
    include_str!("../../../data/templates/d1.txt"),
    include_str!("../../../data/templates/d2.txt"),
    include_str!("../../../data/templates/d3.txt"),
    include_str!("../../../data/templates/d4.txt"),
];
const LEXICON: &str = include_str!("../../../data/lexicon.tsv");

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("bundled data: {0}")]
    Data(offerner::Error),
    #[error("training failed: {0}")]
    Training(offerner::Error),
}

/// Training size knobs. The defaults keep in-page training to a few seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoConfig {
    pub seed: u64,
    pub sentences_per_source: usize,
    pub embedding_dim: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            seed: 2019,
            sentences_per_source: 60,
            embedding_dim: 64,
        }
    }
}

#[derive(Serialize, Debug, PartialEq)]
pub struct TokenView {
    pub text: String,
    pub shape: String,
}

pub fn tokenize_view(text: &str) -> Vec<TokenView> {
    tokenize(text)
        .into_iter()
        .map(|t| TokenView {
            text: t.text,
            shape: t.shape,
        })
        .collect()
}

#[derive(Serialize, Debug, PartialEq)]
pub struct TaggedToken {
    pub text: String,
    pub hybrid: &'static str,
    pub crf: Vec<f64>,
    pub blstm: Vec<f64>,
    pub greedy: &'static str,
}

/// Tag names in index order, matching the columns of `crf` / `blstm`.
pub fn tag_names() -> Vec<&'static str> {
    Tag::ALL.iter().map(|t| t.name()).collect()
}

pub struct Demo {
    model: HybridModel,
    pub training_sentences: usize,
}

impl Demo {
    /// Generates a corpus from the bundled templates, splits it in half and
    /// trains the base taggers and the stacking classifier.
    pub fn train(config: &DemoConfig) -> Result<Demo, DemoError> {
        let lexicon = SlotLexicon::parse(LEXICON).map_err(DemoError::Data)?;
        let master = seed::derive(config.seed, seed::STAGE_GENERATE);
        let mut datasets = Vec::new();
        for (k, text) in SOURCES.iter().enumerate() {
            let templates = parse_template_file(text).map_err(DemoError::Data)?;
            let name = format!("D{}", k + 1);
            datasets.push(
                generate_dataset(
                    &name,
                    &templates,
                    &lexicon,
                    config.sentences_per_source,
                    seed::derive(master, k as u64),
                )
                .map_err(DemoError::Data)?,
            );
        }
        let refs: Vec<_> = datasets.iter().collect();
        let comb = combine(&refs, "D_comb").map_err(DemoError::Training)?;
        let (first, second) = split_half(&comb, seed::derive(config.seed, seed::STAGE_SPLIT))
            .map_err(DemoError::Training)?;
        let words: Vec<&str> = comb
            .sentences
            .iter()
            .flat_map(|s| s.tokens().iter().map(|t| t.text.as_str()))
            .collect();
        let table = EmbeddingTable::random(
            words,
            config.embedding_dim,
            0.5,
            seed::derive(config.seed, seed::STAGE_EMBEDDINGS),
        );
        let hybrid = HybridConfig::default().reseed(config.seed);
        let model = train_hybrid(&first, &second, &table, &hybrid).map_err(DemoError::Training)?;
        Ok(Demo {
            model,
            training_sentences: comb.len(),
        })
    }

    pub fn tag(&self, text: &str) -> Vec<TaggedToken> {
        let tokens = tokenize(text);
        let hybrid = self.model.tag(&tokens);
        let crf = self.model.crf.distributions(&tokens);
        let blstm = self.model.blstm.distributions(&tokens);
        let greedy = self.model.greedy.tag(&tokens);
        let probs = |d: &TagDistribution| d.probs.to_vec();
        tokens
            .into_iter()
            .zip(hybrid)
            .zip(crf.iter().zip(&blstm))
            .zip(greedy)
            .map(|(((t, h), (c, b)), g)| TaggedToken {
                text: t.text,
                hybrid: h.name(),
                crf: probs(c),
                blstm: probs(b),
                greedy: g.name(),
            })
            .collect()
    }
}
