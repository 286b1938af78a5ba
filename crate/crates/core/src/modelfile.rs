//! Shared pieces of the text model-file formats.
//!
//! Every model file starts with `OFFERNER-MODEL v1 <KIND>` followed by the
//! seven-line tag index table (`tag<TAB>index<TAB>name`). Weight-bearing
//! files then carry `kind<TAB>key<TAB>tag(s)<TAB>weight` lines.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tag::{index_table, Tag};

pub const MAGIC: &str = "OFFERNER-MODEL";
pub const VERSION: &str = "v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Crf,
    Blstm,
    Greedy,
    Svm,
    Hybrid,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Crf => "CRF",
            ModelKind::Blstm => "BLSTM",
            ModelKind::Greedy => "GREEDY",
            ModelKind::Svm => "SVM",
            ModelKind::Hybrid => "HYBRID",
        }
    }

    pub fn header(self) -> String {
        format!("{MAGIC} {VERSION} {}", self.name())
    }

    fn from_name(name: &str) -> Option<ModelKind> {
        [
            ModelKind::Crf,
            ModelKind::Blstm,
            ModelKind::Greedy,
            ModelKind::Svm,
            ModelKind::Hybrid,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }
}

/// Header plus tag table, ready for the kind-specific body.
pub(crate) fn preamble(kind: ModelKind) -> String {
    format!("{}\n{}", kind.header(), index_table())
}

/// Identifies the kind of a model from its first line.
pub fn sniff_kind(content: &str) -> Result<ModelKind> {
    let header = content.lines().next().unwrap_or("");
    let mut parts = header.split(' ');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(MAGIC), Some(VERSION), Some(kind), None) => {
            ModelKind::from_name(kind).ok_or_else(|| Error::UnsupportedVersion(header.to_string()))
        }
        _ => Err(Error::UnsupportedVersion(header.to_string())),
    }
}

pub fn sniff_kind_file(path: &Path) -> Result<ModelKind> {
    sniff_kind(&fs::read_to_string(path)?)
}

/// Line cursor over a model body with 1-based line numbers for errors.
pub(crate) struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Checks header and tag table, leaving the cursor on the body.
    pub fn open(content: &'a str, kind: ModelKind) -> Result<Lines<'a>> {
        let mut lines = Lines {
            inner: content.lines().enumerate(),
        };
        let header = lines.next_line()?.1;
        if header != kind.header() {
            return Err(Error::UnsupportedVersion(header.to_string()));
        }
        for tag in Tag::ALL {
            let (no, line) = lines.next_line()?;
            if line != format!("tag\t{}\t{}", tag.index(), tag.name()) {
                return Err(Error::ModelFormat(format!("line {no}: tag table mismatch")));
            }
        }
        Ok(lines)
    }

    pub fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::ModelFormat("unexpected end of file".into()))
    }

    /// Reads `key<TAB>rest` and returns `rest`.
    pub fn expect_field(&mut self, key: &str) -> Result<&'a str> {
        let (no, line) = self.next_line()?;
        match line.split_once('\t') {
            Some((k, rest)) if k == key => Ok(rest),
            _ => Err(Error::ModelFormat(format!("line {no}: expected {key}"))),
        }
    }

    /// Reads a line of whitespace-separated floats of exactly `n` values.
    pub fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let (no, line) = self.next_line()?;
        let values =
            parse_floats(line).map_err(|e| Error::ModelFormat(format!("line {no}: {e}")))?;
        if values.len() != n {
            return Err(Error::ModelFormat(format!(
                "line {no}: expected {n} values, found {}",
                values.len()
            )));
        }
        Ok(values)
    }
}

impl<'a> Iterator for Lines<'a> {
    type Item = (usize, &'a str);

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next().map(|(i, l)| (i + 1, l))
    }
}

pub(crate) fn parse_floats(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split_whitespace().map(parse_weight).collect()
}

pub(crate) fn parse_weight(v: &str) -> std::result::Result<f64, String> {
    let w: f64 = v.parse().map_err(|_| format!("bad number {v:?}"))?;
    if !w.is_finite() {
        return Err(format!("non-finite number {v:?}"));
    }
    Ok(w)
}

/// Shortest decimal text that parses back to the same `f64`.
pub(crate) fn fmt_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// One `kind<TAB>key<TAB>tag<TAB>weight` line.
pub(crate) struct WeightLine<'a> {
    pub kind: &'a str,
    pub key: &'a str,
    pub tag: &'a str,
    pub weight: f64,
}

pub(crate) fn parse_weight_line(no: usize, line: &str) -> Result<WeightLine<'_>> {
    let bad = || Error::ModelFormat(format!("line {no}: malformed weight line"));
    let mut cols = line.split('\t');
    let (Some(kind), Some(key), Some(tag), Some(w), None) = (
        cols.next(),
        cols.next(),
        cols.next(),
        cols.next(),
        cols.next(),
    ) else {
        return Err(bad());
    };
    let weight = parse_weight(w).map_err(|e| Error::ModelFormat(format!("line {no}: {e}")))?;
    Ok(WeightLine {
        kind,
        key,
        tag,
        weight,
    })
}

pub(crate) fn parse_tag(no: usize, name: &str) -> Result<Tag> {
    name.parse()
        .map_err(|_| Error::ModelFormat(format!("line {no}: unknown tag {name:?}")))
}
