use std::io;

use thiserror::Error;

use crate::tag::Tag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown tag name {0:?}")]
    UnknownTag(String),

    #[error("template has no elements")]
    EmptyTemplate,

    #[error("template contains only O markers; O is not a slot")]
    OutsideOnlyTemplate,

    #[error("lexicon has no values for tag {0}")]
    MissingLexiconEntry(Tag),

    #[error("malformed line {0}")]
    MalformedLine(usize),

    #[error("dataset needs at least 2 sentences to split, got {0}")]
    TooSmall(usize),

    #[error("nothing to combine")]
    NothingToCombine,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("cannot train on an empty dataset")]
    EmptyDataset,

    #[error("unsupported model header {0:?}")]
    UnsupportedVersion(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("hash mismatch for {0}")]
    HashMismatch(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
