//! Offer templates, slot lexicons, bloating, and the TSV dataset format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::tag::Tag;
use crate::token::{split_texts, tokens_from_texts, Token};

/// Parallel token and tag sequences for one offer message.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TaggedSentence {
    tokens: Vec<Token>,
    tags: Vec<Tag>,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<Token>, tags: Vec<Tag>) -> Result<TaggedSentence> {
        if tokens.len() != tags.len() {
            return Err(Error::LengthMismatch(tokens.len(), tags.len()));
        }
        if tokens.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(TaggedSentence { tokens, tags })
    }

    /// Builds a sentence from `(text, tag)` pairs.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, Tag)]) -> Result<TaggedSentence> {
        let texts: Vec<&str> = pairs.iter().map(|(s, _)| s.as_ref()).collect();
        let tags = pairs.iter().map(|(_, t)| *t).collect();
        TaggedSentence::new(tokens_from_texts(&texts), tags)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateElement {
    Literal(String),
    Slot(Tag),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OfferTemplate {
    elements: Vec<TemplateElement>,
}

impl OfferTemplate {
    pub fn elements(&self) -> &[TemplateElement] {
        &self.elements
    }

    /// Space-joined rendering with slots shown by tag name.
    pub fn render(&self) -> String {
        self.elements
            .iter()
            .map(|e| match e {
                TemplateElement::Literal(s) => s.as_str(),
                TemplateElement::Slot(t) => t.name(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Parses a whitespace-separated template line. Words spelling an entity tag
/// name become slots; everything else is literal text.
pub fn parse_template(line: &str) -> Result<OfferTemplate> {
    let words: Vec<&str> = line.split_whitespace().collect();
    if words.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    if words.iter().all(|w| *w == Tag::O.name()) {
        return Err(Error::OutsideOnlyTemplate);
    }
    let elements = words
        .into_iter()
        .map(|w| match Tag::entity_from_name(w) {
            Some(tag) => TemplateElement::Slot(tag),
            None => TemplateElement::Literal(w.to_string()),
        })
        .collect();
    Ok(OfferTemplate { elements })
}

/// Reads a template file: one template per line, `#` starts a comment line.
pub fn load_templates(path: &Path) -> Result<Vec<OfferTemplate>> {
    parse_template_file(&fs::read_to_string(path)?)
}

pub fn parse_template_file(content: &str) -> Result<Vec<OfferTemplate>> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse_template)
        .collect()
}

/// Surface values per entity tag.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SlotLexicon {
    values: BTreeMap<Tag, Vec<String>>,
}

impl SlotLexicon {
    pub fn new() -> SlotLexicon {
        SlotLexicon::default()
    }

    pub fn insert(&mut self, tag: Tag, value: impl Into<String>) {
        self.values.entry(tag).or_default().push(value.into());
    }

    pub fn values(&self, tag: Tag) -> &[String] {
        self.values.get(&tag).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Parses `TAG<TAB>value` lines; blank lines and `#` comments are skipped.
    pub fn parse(content: &str) -> Result<SlotLexicon> {
        let mut lex = SlotLexicon::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (tag, value) = line.split_once('\t').ok_or(Error::MalformedLine(i + 1))?;
            let tag = Tag::entity_from_name(tag.trim()).ok_or(Error::MalformedLine(i + 1))?;
            let value = value.trim();
            if value.is_empty() {
                return Err(Error::MalformedLine(i + 1));
            }
            lex.insert(tag, value);
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<SlotLexicon> {
        SlotLexicon::parse(&fs::read_to_string(path)?)
    }

    /// Fails with the first slot tag of `template` that has no values.
    pub fn check_covers(&self, template: &OfferTemplate) -> Result<()> {
        for e in template.elements() {
            if let TemplateElement::Slot(tag) = e {
                if self.values(*tag).is_empty() {
                    return Err(Error::MissingLexiconEntry(*tag));
                }
            }
        }
        Ok(())
    }
}

/// Expands `template` into `count` labeled sentences, sampling each slot value
/// uniformly (with replacement) from `lexicon`.
pub fn bloat(
    template: &OfferTemplate,
    lexicon: &SlotLexicon,
    count: usize,
    seed: u64,
) -> Result<Vec<TaggedSentence>> {
    lexicon.check_covers(template)?;
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut texts = Vec::new();
        let mut tags = Vec::new();
        for e in template.elements() {
            let (piece, tag) = match e {
                TemplateElement::Literal(s) => (s.as_str(), Tag::O),
                TemplateElement::Slot(t) => {
                    let values = lexicon.values(*t);
                    (values[rng.gen_range(0..values.len())].as_str(), *t)
                }
            };
            // Elements are space-separated in the rendered offer, so
            // tokenizing them one at a time matches tokenizing the whole line.
            for text in split_texts(piece) {
                texts.push(text);
                tags.push(tag);
            }
        }
        out.push(TaggedSentence::new(tokens_from_texts(&texts), tags)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub sentences: Vec<TaggedSentence>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, sentences: Vec<TaggedSentence>) -> Dataset {
        Dataset {
            name: name.into(),
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(TaggedSentence::len).sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            for (tok, tag) in s.tokens().iter().zip(s.tags()) {
                let _ = writeln!(out, "{}\t{}", tok.text, tag);
            }
            out.push('\n');
        }
        out
    }

    /// Parses `token<TAB>TAG` lines with blank lines between sentences.
    pub fn from_tsv(name: impl Into<String>, content: &str) -> Result<Dataset> {
        let mut sentences = Vec::new();
        let mut texts: Vec<String> = Vec::new();
        let mut tags = Vec::new();
        let mut flush = |texts: &mut Vec<String>, tags: &mut Vec<Tag>| -> Result<()> {
            if !texts.is_empty() {
                let sentence = TaggedSentence::new(
                    tokens_from_texts(&std::mem::take(texts)),
                    std::mem::take(tags),
                )?;
                sentences.push(sentence);
            }
            Ok(())
        };
        for (i, line) in content.lines().enumerate() {
            if line.is_empty() {
                flush(&mut texts, &mut tags)?;
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(tok), Some(tag), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::MalformedLine(i + 1));
            };
            if tok.is_empty() {
                return Err(Error::MalformedLine(i + 1));
            }
            let tag: Tag = tag.parse().map_err(|_| Error::MalformedLine(i + 1))?;
            texts.push(tok.to_string());
            tags.push(tag);
        }
        flush(&mut texts, &mut tags)?;
        Ok(Dataset::new(name, sentences))
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    /// Loads a TSV file; the dataset is named after the file stem.
    pub fn load_tsv(path: &Path) -> Result<Dataset> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Dataset::from_tsv(name, &fs::read_to_string(path)?)
    }
}

/// Concatenates datasets in the given order.
pub fn combine(datasets: &[&Dataset], name: &str) -> Result<Dataset> {
    if datasets.is_empty() {
        return Err(Error::NothingToCombine);
    }
    let sentences = datasets
        .iter()
        .flat_map(|d| d.sentences.iter().cloned())
        .collect();
    Ok(Dataset::new(name, sentences))
}

/// Shuffles with `seed` and cuts into halves of size `ceil(n/2)` and `floor(n/2)`.
pub fn split_half(dataset: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    let mut sentences = dataset.sentences.clone();
    sentences.shuffle(&mut seed::rng(seed));
    let second = sentences.split_off(n.div_ceil(2));
    Ok((
        Dataset::new(format!("{}1", dataset.name), sentences),
        Dataset::new(format!("{}2", dataset.name), second),
    ))
}

/// Bloats a whole template set into `count` sentences. Sentences are spread
/// as evenly as possible over the templates (earlier templates take the
/// remainder) and template `i` uses seed `derive(seed, i)`.
pub fn generate_dataset(
    name: &str,
    templates: &[OfferTemplate],
    lexicon: &SlotLexicon,
    count: usize,
    seed: u64,
) -> Result<Dataset> {
    if templates.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    for t in templates {
        lexicon.check_covers(t)?;
    }
    let n = templates.len();
    let mut sentences = Vec::with_capacity(count);
    for (i, template) in templates.iter().enumerate() {
        let share = count / n + usize::from(i < count % n);
        if share > 0 {
            sentences.extend(bloat(
                template,
                lexicon,
                share,
                seed::derive(seed, i as u64),
            )?);
        }
    }
    Ok(Dataset::new(name, sentences))
}
