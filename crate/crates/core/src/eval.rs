//! Token-level precision, recall and F1.
//!
//! Two kinds of counts are kept side by side:
//!
//! * global counts over all tokens: TP when gold = pred ≠ O, TN when
//!   gold = pred = O, FP when a token is labeled with a wrong entity tag, FN
//!   when an entity token is labeled O. These four partition the tokens and
//!   drive the "overall" row.
//! * standard per-tag counts (tp, fp, fn for each entity tag), reported per
//!   tag and summed into a "micro" row.
//!
//! Any ratio with a zero denominator is reported as 0.

use std::fmt::Write as _;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::tag::Tag;
use crate::Tagger;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TagCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    /// Indexed by entity tag index (`O` excluded).
    pub per_tag: [TagCounts; 6],
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    /// Adds one sentence worth of predictions.
    pub fn add(&mut self, gold: &[Tag], pred: &[Tag]) -> Result<()> {
        if gold.len() != pred.len() {
            return Err(Error::LengthMismatch(gold.len(), pred.len()));
        }
        for (&g, &p) in gold.iter().zip(pred) {
            match (g == p, p == Tag::O) {
                (true, false) => self.tp += 1,
                (true, true) => self.tn += 1,
                (false, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
            }
            for t in Tag::ENTITIES {
                let c = &mut self.per_tag[t.index()];
                match (g == t, p == t) {
                    (true, true) => c.tp += 1,
                    (false, true) => c.fp += 1,
                    (true, false) => c.fn_ += 1,
                    (false, false) => {}
                }
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for (a, b) in self.per_tag.iter_mut().zip(&other.per_tag) {
            a.tp += b.tp;
            a.fp += b.fp;
            a.fn_ += b.fn_;
        }
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Sum of the per-tag counts.
    pub fn micro(&self) -> TagCounts {
        self.per_tag
            .iter()
            .fold(TagCounts::default(), |acc, c| TagCounts {
                tp: acc.tp + c.tp,
                fp: acc.fp + c.fp,
                fn_: acc.fn_ + c.fn_,
            })
    }

    fn scope_counts(&self, scope: Scope) -> TagCounts {
        match scope {
            Scope::Tag(t) => self.per_tag[t.index()],
            Scope::Overall => TagCounts {
                tp: self.tp,
                fp: self.fp,
                fn_: self.fn_,
            },
            Scope::Micro => self.micro(),
        }
    }

    pub fn prf(&self, scope: Scope) -> Prf {
        prf(self.scope_counts(scope))
    }
}

/// Counts for one gold/predicted sequence pair.
pub fn count(gold: &[Tag], pred: &[Tag]) -> Result<ConfusionCounts> {
    let mut c = ConfusionCounts::default();
    c.add(gold, pred)?;
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    /// Standard counts for one entity tag. `O` has no row.
    Tag(Tag),
    /// Global token counts.
    Overall,
    /// Per-tag counts summed over the six entity tags.
    Micro,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn prf(c: TagCounts) -> Prf {
    let precision = ratio(c.tp as f64, (c.tp + c.fp) as f64);
    let recall = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    Prf {
        precision,
        recall,
        f1,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub name: String,
    pub counts: ConfusionCounts,
}

/// Tags every sentence of `test` and accumulates counts.
pub fn evaluate(tagger: &dyn Tagger, test: &Dataset) -> Result<EvalReport> {
    let mut counts = ConfusionCounts::default();
    for s in &test.sentences {
        counts.add(s.tags(), &tagger.tag(s.tokens()))?;
    }
    Ok(EvalReport {
        name: test.name.clone(),
        counts,
    })
}

impl EvalReport {
    pub fn overall(&self) -> Prf {
        self.counts.prf(Scope::Overall)
    }

    fn rows(&self) -> Vec<(String, Prf, u64)> {
        let mut rows: Vec<(String, Prf, u64)> = Tag::ENTITIES
            .iter()
            .map(|&t| {
                let c = self.counts.per_tag[t.index()];
                (t.name().to_string(), prf(c), c.tp + c.fn_)
            })
            .collect();
        let micro = self.counts.micro();
        rows.push(("micro".into(), prf(micro), micro.tp + micro.fn_));
        let c = &self.counts;
        rows.push(("overall".into(), self.overall(), c.tp + c.fn_));
        rows
    }

    /// Fixed-width table for people.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "evaluation on {}", self.name);
        let _ = writeln!(
            out,
            "{:<8} {:>9} {:>9} {:>9} {:>8}",
            "tag", "precision", "recall", "f1", "support"
        );
        for (name, p, support) in self.rows() {
            let _ = writeln!(
                out,
                "{:<8} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                name, p.precision, p.recall, p.f1, support
            );
        }
        let c = &self.counts;
        let _ = writeln!(
            out,
            "tokens {}: TP {} TN {} FP {} FN {}",
            c.total(),
            c.tp,
            c.tn,
            c.fp,
            c.fn_
        );
        let _ = writeln!(
            out,
            "per-tag and micro rows use standard per-tag counts; the overall row counts \
             FP as any wrong entity label and FN as an entity labeled O."
        );
        let _ = writeln!(out, "ratios with a zero denominator are reported as 0.");
        out
    }

    /// `metric<TAB>tag<TAB>value` lines for machines.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (name, p, _) in self.rows() {
            let _ = writeln!(out, "precision\t{name}\t{:.4}", p.precision);
            let _ = writeln!(out, "recall\t{name}\t{:.4}", p.recall);
            let _ = writeln!(out, "f1\t{name}\t{:.4}", p.f1);
        }
        let c = &self.counts;
        for (k, v) in [("tp", c.tp), ("tn", c.tn), ("fp", c.fp), ("fn", c.fn_)] {
            let _ = writeln!(out, "count\t{k}\t{v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Tag::*;

    #[test]
    fn hand_fixture() {
        let c = count(&[Oamt, O, Prd], &[Oamt, Prd, O]).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (1, 0, 1, 1));
        let p = c.prf(Scope::Overall);
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
        assert_eq!(
            c.per_tag[Prd.index()],
            TagCounts {
                tp: 0,
                fp: 1,
                fn_: 1
            }
        );
    }

    #[test]
    fn substitutions() {
        let p = prf(TagCounts {
            tp: 3,
            fp: 1,
            fn_: 2,
        });
        assert_eq!(p.precision, 0.75);
        assert_eq!(p.recall, 0.6);
        assert_eq!(p.f1, 2.0 * 0.75 * 0.6 / (0.75 + 0.6));
        assert_eq!(
            prf(TagCounts {
                tp: 4,
                fp: 0,
                fn_: 0
            }),
            Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );
        assert_eq!(prf(TagCounts::default()), Prf::default());
        assert_eq!(
            prf(TagCounts {
                tp: 0,
                fp: 2,
                fn_: 0
            }),
            Prf::default()
        );
    }

    #[test]
    fn degenerate_predictors() {
        let gold = [Oamt, Merch, Prd];
        let c = count(&gold, &gold).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = count(&gold, &[O, O, O]).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (0, 0, 0, 3));
        assert_eq!(c.prf(Scope::Overall).f1, 0.0);
        assert!(matches!(
            count(&gold, &[O]),
            Err(Error::LengthMismatch(3, 1))
        ));
    }

    #[test]
    fn four_decimal_lines() {
        let report = EvalReport {
            name: "t".into(),
            counts: count(&[Oamt, Oamt, Oamt], &[Oamt, O, Merch]).unwrap(),
        };
        let lines = report.to_lines();
        assert!(lines.contains("precision\toverall\t0.5000\n"));
        assert!(lines.contains("recall\toverall\t0.5000\n"));
        assert!(lines.contains("recall\tOAMT\t0.3333\n"));
        assert!(lines.contains("f1\tMERCH\t0.0000\n"));
        assert!(report.to_table().contains("zero denominator"));
    }
}
