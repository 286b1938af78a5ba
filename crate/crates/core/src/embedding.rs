//! Word-vector lookup table with an unknown-word fallback.
//!
//! File format: one `token v1 v2 ... v_dim` line per word, space-separated.
//! A line for the token `<unk>` supplies the fallback vector; otherwise the
//! fallback is the mean of all vectors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::modelfile::{fmt_floats, parse_floats};
use crate::seed;

pub const UNK: &str = "<unk>";
pub const DEFAULT_DIM: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<Vec<f64>>,
    unk: Vec<f64>,
    pad: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, unk: Vec<f64>) -> Result<EmbeddingTable> {
        if unk.len() != dim {
            return Err(Error::LengthMismatch(unk.len(), dim));
        }
        Ok(EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            unk,
            pad: vec![0.0; dim],
        })
    }

    /// Adds or replaces the vector for `word`.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::LengthMismatch(vector.len(), self.dim));
        }
        match self.index.get(word) {
            Some(&i) => self.vectors[i] = vector,
            None => {
                self.index.insert(word.to_string(), self.words.len());
                self.words.push(word.to_string());
                self.vectors.push(vector);
            }
        }
        Ok(())
    }

    /// Seeded table over `vocab` (lowercased, deduplicated) with entries drawn
    /// uniformly from `[-scale, scale]`. Unknown words map to the zero vector,
    /// as out-of-vocabulary words do in common pretrained vector tables.
    pub fn random<'a>(
        vocab: impl IntoIterator<Item = &'a str>,
        dim: usize,
        scale: f64,
        seed: u64,
    ) -> EmbeddingTable {
        let mut rng = seed::rng(seed);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..dim).map(|_| rng.gen_range(-scale..=scale)).collect()
        };
        let mut table = EmbeddingTable::new(dim, vec![0.0; dim]).expect("unk has table dim");
        for word in vocab {
            let lower = word.to_lowercase();
            if !table.index.contains_key(&lower) {
                let v = draw(&mut rng);
                table.insert(&lower, v).expect("vector has table dim");
            }
        }
        table
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn unk_vector(&self) -> &[f64] {
        &self.unk
    }

    pub fn pad_vector(&self) -> &[f64] {
        &self.pad
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vectors[i].as_slice())
    }

    /// Exact text first, then lowercased text, then the unknown vector.
    pub fn lookup(&self, text: &str) -> &[f64] {
        self.get(text)
            .or_else(|| self.get(&text.to_lowercase()))
            .unwrap_or(&self.unk)
    }

    /// One row per token.
    pub fn embed<S: AsRef<str>>(&self, texts: &[S]) -> Vec<Vec<f64>> {
        texts
            .iter()
            .map(|t| self.lookup(t.as_ref()).to_vec())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, v) in self.words.iter().zip(&self.vectors) {
            let _ = writeln!(out, "{w} {}", fmt_floats(v));
        }
        let _ = writeln!(out, "{UNK} {}", fmt_floats(&self.unk));
        out
    }

    pub fn from_text(content: &str) -> Result<EmbeddingTable> {
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        let mut dim = None;
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (word, rest) = line.split_once(' ').ok_or(Error::MalformedLine(i + 1))?;
            let v = parse_floats(rest).map_err(|_| Error::MalformedLine(i + 1))?;
            if v.is_empty() || dim.is_some_and(|d| d != v.len()) {
                return Err(Error::MalformedLine(i + 1));
            }
            dim = Some(v.len());
            rows.push((word.to_string(), v));
        }
        let dim = dim.ok_or(Error::MalformedLine(1))?;
        let unk = match rows.iter().position(|(w, _)| w == UNK) {
            Some(i) => rows.remove(i).1,
            None => {
                let mut mean = vec![0.0; dim];
                for (_, v) in &rows {
                    for (m, x) in mean.iter_mut().zip(v) {
                        *m += x / rows.len() as f64;
                    }
                }
                mean
            }
        };
        let mut table = EmbeddingTable::new(dim, unk)?;
        for (w, v) in rows {
            table.insert(&w, v)?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<EmbeddingTable> {
        EmbeddingTable::from_text(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}
