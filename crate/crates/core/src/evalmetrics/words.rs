use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::PredictionRecord;
use crate::corpus::clean::tokens;
use crate::corpus::is_punctuation_token;
use crate::corpus::vocab::SPECIALS;
use crate::error::{Error, Result};

fn is_word(tok: &str) -> bool {
    !is_punctuation_token(tok) && !SPECIALS.contains(&tok)
}

/// Word counts over cleaned texts, descending with lexicographic ties,
/// punctuation and special tokens excluded.
pub fn word_frequencies<S: AsRef<str>>(texts: &[S], top_k: Option<usize>) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in texts {
        for tok in tokens(t.as_ref()).filter(|t| is_word(t)) {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    let mut out: Vec<(String, usize)> = counts
        .into_iter()
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(k) = top_k {
        out.truncate(k);
    }
    out
}

pub fn write_frequencies_tsv<W: Write>(mut out: W, freqs: &[(String, usize)]) -> Result<()> {
    for (tok, c) in freqs {
        writeln!(out, "{tok}\t{c}").map_err(|e| Error::io("<tsv>", e))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreativityStats {
    pub unique_predictions: usize,
    pub vocab_used_count: usize,
    pub vocab_used_percent: f64,
    /// Distinct words across the original titles.
    pub original_vocab_size: usize,
}

/// Distinct predicted titles, and how much of the original-title word
/// vocabulary the predictions use.
pub fn creativity_stats(records: &[PredictionRecord]) -> CreativityStats {
    let unique: BTreeSet<&str> = records.iter().map(|r| r.predicted_title.as_str()).collect();
    let original: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| tokens(&r.original_title))
        .filter(|t| is_word(t))
        .collect();
    let used = records
        .iter()
        .flat_map(|r| tokens(&r.predicted_title))
        .filter(|t| original.contains(t))
        .collect::<BTreeSet<&str>>()
        .len();
    CreativityStats {
        unique_predictions: unique.len(),
        vocab_used_count: used,
        vocab_used_percent: if original.is_empty() {
            0.0
        } else {
            100.0 * used as f64 / original.len() as f64
        },
        original_vocab_size: original.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(orig: &str, pred: &str) -> PredictionRecord {
        PredictionRecord {
            id: "r".into(),
            review_text: "x".into(),
            original_title: orig.into(),
            predicted_title: pred.into(),
            model_kind: "bilstm_seq2seq".into(),
        }
    }

    #[test]
    fn frequency_examples() {
        assert_eq!(
            word_frequencies(&["a b a"], None),
            vec![("a".into(), 2), ("b".into(), 1)]
        );
        assert_eq!(word_frequencies(&["x !", "x"], None), vec![("x".into(), 2)]);
        assert_eq!(
            word_frequencies(&["b a", "c"], Some(1)),
            vec![("a".into(), 1)]
        );
        assert!(word_frequencies(&["[SEP] <unk>"], None).is_empty());
        let mut buf = Vec::new();
        write_frequencies_tsv(&mut buf, &word_frequencies(&["a b a"], None)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a\t2\nb\t1\n");
    }

    #[test]
    fn creativity_examples() {
        let c = creativity_stats(&[rec("a", "a"), rec("b", "a"), rec("c", "b")]);
        assert_eq!(c.unique_predictions, 2);
        assert_eq!(c.vocab_used_count, 2);
        assert!((c.vocab_used_percent - 200.0 / 3.0).abs() < 1e-12);
        let all = creativity_stats(&[rec("a b", "b a"), rec("a", "a")]);
        assert_eq!(all.vocab_used_percent, 100.0);
        let none = creativity_stats(&[rec("a b", "c d")]);
        assert_eq!(none.vocab_used_count, 0);
    }
}
