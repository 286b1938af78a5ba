//! CRF observation features, one switch per toolkit flag.

use crate::token::Token;

/// Feature switches, named after the flags of the CRF toolkit they mirror.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureConfig {
    pub use_prev: bool,
    pub use_next: bool,
    /// No part-of-speech tagger is available; word shape stands in for it.
    pub use_tags: bool,
    pub use_word_pairs: bool,
    pub use_prev_sequences: bool,
    pub use_next_sequences: bool,
    pub use_lemmas: bool,
    pub use_lemma_as_word: bool,
    pub normalize_terms: bool,
    pub normalize_timex: bool,
    pub use_position: bool,
    pub use_begin_sent: bool,
}

impl FeatureConfig {
    /// Every flag on.
    pub fn all() -> FeatureConfig {
        FeatureConfig {
            use_prev: true,
            use_next: true,
            use_tags: true,
            use_word_pairs: true,
            use_prev_sequences: true,
            use_next_sequences: true,
            use_lemmas: true,
            use_lemma_as_word: true,
            normalize_terms: true,
            normalize_timex: true,
            use_position: true,
            use_begin_sent: true,
        }
    }

    /// Every flag off: only the current word (and bias) remain.
    pub fn none() -> FeatureConfig {
        FeatureConfig::from_flags(&[false; 12])
    }

    pub const FLAG_NAMES: [&'static str; 12] = [
        "usePrev",
        "useNext",
        "useTags",
        "useWordPairs",
        "usePrevSequences",
        "useNextSequences",
        "useLemmas",
        "useLemmaAsWord",
        "normalizeTerms",
        "normalizeTimex",
        "usePosition",
        "useBeginSent",
    ];

    pub fn flags(&self) -> [bool; 12] {
        [
            self.use_prev,
            self.use_next,
            self.use_tags,
            self.use_word_pairs,
            self.use_prev_sequences,
            self.use_next_sequences,
            self.use_lemmas,
            self.use_lemma_as_word,
            self.normalize_terms,
            self.normalize_timex,
            self.use_position,
            self.use_begin_sent,
        ]
    }

    pub fn from_flags(f: &[bool; 12]) -> FeatureConfig {
        FeatureConfig {
            use_prev: f[0],
            use_next: f[1],
            use_tags: f[2],
            use_word_pairs: f[3],
            use_prev_sequences: f[4],
            use_next_sequences: f[5],
            use_lemmas: f[6],
            use_lemma_as_word: f[7],
            normalize_terms: f[8],
            normalize_timex: f[9],
            use_position: f[10],
            use_begin_sent: f[11],
        }
    }

    /// `usePrev=1,useNext=0,...`
    pub fn to_line(&self) -> String {
        Self::FLAG_NAMES
            .iter()
            .zip(self.flags())
            .map(|(n, v)| format!("{n}={}", u8::from(v)))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_line(line: &str) -> Option<FeatureConfig> {
        let mut flags = [false; 12];
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 12 {
            return None;
        }
        for (i, part) in parts.iter().enumerate() {
            let (name, v) = part.split_once('=')?;
            if name != Self::FLAG_NAMES[i] {
                return None;
            }
            flags[i] = match v {
                "1" => true,
                "0" => false,
                _ => return None,
            };
        }
        Some(FeatureConfig::from_flags(&flags))
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig::all()
    }
}

/// Lowercases and strips one of `ing`, `es`, `ed`, `s` if at least three
/// characters of stem remain.
pub fn lemma(word: &str) -> String {
    let lower = word.to_lowercase();
    for suffix in ["ing", "es", "ed", "s"] {
        if let Some(stem) = lower.strip_suffix(suffix) {
            if stem.chars().count() >= 3 {
                return stem.to_string();
            }
        }
    }
    lower
}

fn digits(s: &str, min: usize, max: usize) -> bool {
    (min..=max).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_digit())
}

/// `d{1,2}[/-]d{1,2}([/-]d{2,4})?` or `hh:mm`.
pub fn is_timex(text: &str) -> bool {
    if let Some((h, m)) = text.split_once(':') {
        return digits(h, 1, 2) && digits(m, 2, 2);
    }
    let parts: Vec<&str> = text.split(['/', '-']).collect();
    match parts.as_slice() {
        [a, b] => digits(a, 1, 2) && digits(b, 1, 2),
        [a, b, c] => digits(a, 1, 2) && digits(b, 1, 2) && digits(c, 2, 4),
        _ => false,
    }
}

/// Lowercased text with every digit run replaced by `NUM`.
pub fn normalize_digits(lower: &str) -> String {
    let mut out = String::new();
    let mut in_digits = false;
    for c in lower.chars() {
        if c.is_ascii_digit() {
            if !in_digits {
                out.push_str("NUM");
                in_digits = true;
            }
        } else {
            in_digits = false;
            out.push(c);
        }
    }
    out
}

/// The word form that fills `w=`, `prev_w=`, pairs and sequences.
pub fn word_form(token: &Token, config: &FeatureConfig) -> String {
    if config.normalize_timex && is_timex(&token.text) {
        return "TIMEX".to_string();
    }
    if config.normalize_terms && token.text.bytes().any(|b| b.is_ascii_digit()) {
        return normalize_digits(&token.lower);
    }
    if config.use_lemma_as_word {
        return lemma(&token.text);
    }
    token.lower.clone()
}

/// 0 for the first token, then 1/2/3 for the first, middle and last third.
pub fn position_bucket(position: usize, len: usize) -> usize {
    if position == 0 {
        0
    } else if 3 * position <= len {
        1
    } else if 3 * position <= 2 * len {
        2
    } else {
        3
    }
}

/// Feature keys for `tokens[position]`, in a fixed order.
pub fn extract_features(tokens: &[Token], position: usize, config: &FeatureConfig) -> Vec<String> {
    let form = |i: usize| word_form(&tokens[i], config);
    let len = tokens.len();
    let w = form(position);
    let prev = position.checked_sub(1).map(form);
    let next = (position + 1 < len).then(|| form(position + 1));

    let mut f = vec!["bias".to_string(), format!("w={w}")];
    if config.use_prev {
        if let Some(p) = &prev {
            f.push(format!("prev_w={p}"));
        }
    }
    if config.use_next {
        if let Some(n) = &next {
            f.push(format!("next_w={n}"));
        }
    }
    if config.use_word_pairs {
        if let Some(p) = &prev {
            f.push(format!("pair={p}|{w}"));
        }
        if let Some(n) = &next {
            f.push(format!("npair={w}|{n}"));
        }
    }
    if config.use_prev_sequences && position >= 2 {
        f.push(format!(
            "prev_seq={}|{}",
            form(position - 2),
            prev.as_deref().unwrap_or("")
        ));
    }
    if config.use_next_sequences && position + 2 < len {
        f.push(format!(
            "next_seq={}|{}",
            next.as_deref().unwrap_or(""),
            form(position + 2)
        ));
    }
    if config.use_lemmas {
        f.push(format!("lemma={}", lemma(&tokens[position].text)));
    }
    if config.use_tags {
        f.push(format!("shape={}", tokens[position].shape));
        if let Some(p) = position.checked_sub(1) {
            f.push(format!("prev_shape={}", tokens[p].shape));
        }
        if position + 1 < len {
            f.push(format!("next_shape={}", tokens[position + 1].shape));
        }
    }
    if config.use_position {
        f.push(format!("pos_bucket={}", position_bucket(position, len)));
    }
    if config.use_begin_sent && tokens[position].is_sentence_start {
        f.push("begin_sent".to_string());
    }
    f
}
