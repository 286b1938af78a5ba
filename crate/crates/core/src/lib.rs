//! Offer entity extraction.
//!
//! Marketing offers ("Get 20% off on pizzas at Dominos") are labeled token by
//! token with seven tags: offer amount, offer type, minimum and maximum
//! amounts, product, merchant, and `O` for everything else. The crate covers
//! the whole pipeline:
//!
//! * [`corpus`]: tokenizer, offer templates, lexicon-driven bloating, TSV datasets
//! * [`crf`]: linear-chain CRF with forward-backward marginals
//! * [`blstm`]: bidirectional LSTM tagger trained with BPTT
//! * [`greedy`]: averaged-perceptron tagger emitting hard labels only
//! * [`stacker`]: 15-dimensional stacking vectors and a hinge-loss linear
//!   classifier combining the three base taggers
//! * [`eval`]: token-level precision, recall and F1

pub mod blstm;
pub mod corpus;
pub mod crf;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod features;
pub mod greedy;
pub mod modelfile;
pub mod seed;
pub mod stacker;
pub mod svm;
pub mod tag;
pub mod token;

pub use corpus::{Dataset, TaggedSentence};
pub use error::{Error, Result};
pub use tag::{Tag, NUM_TAGS};
pub use token::{tokenize, Token};

/// A probability for each of the seven tags.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TagDistribution {
    pub probs: [f64; NUM_TAGS],
}

impl TagDistribution {
    pub fn uniform() -> TagDistribution {
        TagDistribution {
            probs: [1.0 / NUM_TAGS as f64; NUM_TAGS],
        }
    }

    /// All mass on `tag`.
    pub fn one_hot(tag: Tag) -> TagDistribution {
        let mut probs = [0.0; NUM_TAGS];
        probs[tag.index()] = 1.0;
        TagDistribution { probs }
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(mut probs: [f64; NUM_TAGS]) -> TagDistribution {
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        TagDistribution { probs }
    }

    pub fn argmax(&self) -> Tag {
        tag::argmax_tag(&self.probs)
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Anything that labels a token sequence.
pub trait Tagger {
    fn tag(&self, tokens: &[Token]) -> Vec<Tag>;
}

/// A tagger that also exposes per-token tag distributions.
pub trait ProbTagger: Tagger {
    fn distributions(&self, tokens: &[Token]) -> Vec<TagDistribution>;
}

impl<T: Tagger + ?Sized> Tagger for &T {
    fn tag(&self, tokens: &[Token]) -> Vec<Tag> {
        (**self).tag(tokens)
    }
}

impl<T: Tagger + ?Sized> Tagger for Box<T> {
    fn tag(&self, tokens: &[Token]) -> Vec<Tag> {
        (**self).tag(tokens)
    }
}
