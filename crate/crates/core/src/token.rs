//! Deterministic offer tokenizer.
//!
//! Text is split on whitespace, then every punctuation character becomes its
//! own token. The one exception is a `. , / - :` sitting between two ASCII
//! digits, which stays inside the number (`2.5`, `1,500`, `10/12`, `10:30`).

/// A token plus the derived views every feature extractor uses.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub lower: String,
    /// Run-compressed character classes over `X x d p`.
    pub shape: String,
    pub is_sentence_start: bool,
}

impl Token {
    pub fn new(text: impl Into<String>, is_sentence_start: bool) -> Token {
        let text = text.into();
        Token {
            lower: text.to_lowercase(),
            shape: word_shape(&text),
            text,
            is_sentence_start,
        }
    }
}

/// Builds tokens from already-split texts, flagging the first as sentence start.
pub fn tokens_from_texts<S: AsRef<str>>(texts: &[S]) -> Vec<Token> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| Token::new(t.as_ref(), i == 0))
        .collect()
}

pub fn word_shape(text: &str) -> String {
    let mut shape = String::new();
    let mut last = None;
    for c in text.chars() {
        let class = if c.is_ascii_digit() || c.is_numeric() {
            'd'
        } else if c.is_uppercase() {
            'X'
        } else if c.is_alphabetic() {
            'x'
        } else {
            'p'
        };
        if last != Some(class) {
            shape.push(class);
            last = Some(class);
        }
    }
    shape
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn joins_digits(c: char) -> bool {
    matches!(c, '.' | ',' | '/' | '-' | ':')
}

/// Splits one whitespace-free chunk into token texts.
fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if is_word_char(c) {
            current.push(c);
            continue;
        }
        let interior_numeric = joins_digits(c)
            && i > 0
            && i + 1 < chars.len()
            && chars[i - 1].is_ascii_digit()
            && chars[i + 1].is_ascii_digit();
        if interior_numeric {
            current.push(c);
            continue;
        }
        if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
        out.push(c.to_string());
    }
    if !current.is_empty() {
        out.push(current);
    }
}

/// Splits `text` into token strings.
pub fn split_texts(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        split_chunk(chunk, &mut out);
    }
    out
}

pub fn tokenize(text: &str) -> Vec<Token> {
    tokens_from_texts(&split_texts(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn offer_sentence() {
        assert_eq!(
            texts("Get 20% off on pizzas at Dominos"),
            ["Get", "20", "%", "off", "on", "pizzas", "at", "Dominos"]
        );
    }

    #[test]
    fn empty_and_blank() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \t\n ").is_empty());
    }

    #[test]
    fn currency_prefix_splits() {
        assert_eq!(texts("Rs.500"), ["Rs", ".", "500"]);
        assert_eq!(texts("(Rs.1,500)"), ["(", "Rs", ".", "1,500", ")"]);
        assert_eq!(texts("₹999!"), ["₹", "999", "!"]);
    }

    #[test]
    fn numbers_keep_interior_punctuation() {
        assert_eq!(
            texts("valid till 10/12/2024"),
            ["valid", "till", "10/12/2024"]
        );
        assert_eq!(texts("2.5x"), ["2.5x"]);
        assert_eq!(texts("e-mail"), ["e", "-", "mail"]);
        assert_eq!(texts("20-"), ["20", "-"]);
    }

    #[test]
    fn token_views() {
        let toks = tokenize("Get 20%");
        assert!(toks[0].is_sentence_start);
        assert!(!toks[1].is_sentence_start);
        assert_eq!(toks[0].lower, "get");
        assert_eq!(toks[0].shape, "Xx");
        assert_eq!(toks[1].shape, "d");
        assert_eq!(toks[2].shape, "p");
        assert_eq!(word_shape("MakeMyTrip"), "XxXxXx");
        assert_eq!(word_shape("1,500"), "dpd");
    }

    proptest! {
        #[test]
        fn concatenation_preserves_non_whitespace(s in "[ a-zA-Z0-9%.,!?()/:-]{0,40}") {
            let joined: String = texts(&s).concat();
            let stripped: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(joined, stripped);
        }

        #[test]
        fn idempotent_on_emitted_tokens(s in "[ a-zA-Z0-9%.,!?()/:₹-]{0,40}") {
            for t in texts(&s) {
                prop_assert_eq!(texts(&t), vec![t.clone()]);
            }
        }
    }
}
