//! The closed offer tag set.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Number of tags, `O` included.
pub const NUM_TAGS: usize = 7;

/// One token label. The discriminant is the fixed tag index used by every
/// model file and by the stacking vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    /// Offer amount.
    Oamt = 0,
    /// Offer type (discount, cashback, voucher).
    Otype = 1,
    /// Minimum purchase amount.
    MinAmt = 2,
    /// Maximum offer amount.
    MaxAmt = 3,
    /// Product the offer applies to.
    Prd = 4,
    /// Merchant offering the deal.
    Merch = 5,
    /// Anything else.
    O = 6,
}

impl Tag {
    pub const ALL: [Tag; NUM_TAGS] = [
        Tag::Oamt,
        Tag::Otype,
        Tag::MinAmt,
        Tag::MaxAmt,
        Tag::Prd,
        Tag::Merch,
        Tag::O,
    ];

    /// The six entity tags, `O` excluded.
    pub const ENTITIES: [Tag; NUM_TAGS - 1] = [
        Tag::Oamt,
        Tag::Otype,
        Tag::MinAmt,
        Tag::MaxAmt,
        Tag::Prd,
        Tag::Merch,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Tag> {
        Tag::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::Oamt => "OAMT",
            Tag::Otype => "OTYPE",
            Tag::MinAmt => "MIN_AMT",
            Tag::MaxAmt => "MAX_AMT",
            Tag::Prd => "PRD",
            Tag::Merch => "MERCH",
            Tag::O => "O",
        }
    }

    #[inline]
    pub fn is_entity(self) -> bool {
        self != Tag::O
    }

    /// Parses an entity tag name. `O` is rejected since it is not a slot.
    pub fn entity_from_name(name: &str) -> Option<Tag> {
        match name.parse::<Tag>() {
            Ok(t) if t.is_entity() => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tag::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownTag(s.to_string()))
    }
}

/// Argmax over tag scores; ties go to the lower tag index.
pub fn argmax_tag(scores: &[f64; NUM_TAGS]) -> Tag {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Tag::ALL[best]
}

/// Renders the `index<TAB>name` table written at the top of every model file.
pub(crate) fn index_table() -> String {
    let mut out = String::new();
    for t in Tag::ALL {
        out.push_str(&format!("tag\t{}\t{}\n", t.index(), t.name()));
    }
    out
}
