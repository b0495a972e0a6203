use std::collections::HashMap;

use super::bleu::ngram_counts;

/// Highest n-gram order scored.
pub const NIST_MAX_N: usize = 5;

/// N-gram counts over a reference corpus, giving each n-gram the
/// information weight `log2(count(prefix) / count(ngram))`.
#[derive(Clone, Debug, Default)]
pub struct InfoTable {
    counts: HashMap<Vec<String>, usize>,
    total_unigrams: usize,
}

impl InfoTable {
    pub fn from_references<S: AsRef<str>>(references: &[Vec<S>]) -> Self {
        let mut counts: HashMap<Vec<String>, usize> = HashMap::new();
        let mut total_unigrams = 0;
        for r in references {
            total_unigrams += r.len();
            for n in 1..=NIST_MAX_N {
                for (g, c) in ngram_counts(r, n) {
                    *counts
                        .entry(g.into_iter().map(str::to_owned).collect())
                        .or_insert(0) += c;
                }
            }
        }
        InfoTable {
            counts,
            total_unigrams,
        }
    }

    pub fn count<S: AsRef<str>>(&self, ngram: &[S]) -> usize {
        if ngram.is_empty() {
            return self.total_unigrams;
        }
        let key: Vec<String> = ngram.iter().map(|s| s.as_ref().to_owned()).collect();
        self.counts.get(&key).copied().unwrap_or(0)
    }

    /// Zero for n-grams never seen in the references.
    pub fn info<S: AsRef<str>>(&self, ngram: &[S]) -> f64 {
        let c = self.count(ngram);
        if c == 0 {
            return 0.0;
        }
        let prefix = self.count(&ngram[..ngram.len() - 1]);
        (prefix as f64 / c as f64).log2()
    }
}

/// `ln 0.5 / ln² 1.5`: the brevity factor is one half when the hypothesis
/// is two thirds of the reference length.
pub fn nist_beta() -> f64 {
    0.5f64.ln() / 1.5f64.ln().powi(2)
}

/// Sentence NIST with `N = 5` and a per-sentence brevity factor.
pub fn nist<S: AsRef<str>, T: AsRef<str>>(hyp: &[S], reference: &[T], table: &InfoTable) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let mut score = 0.0;
    for n in 1..=NIST_MAX_N.min(hyp.len()) {
        let r = ngram_counts(reference, n);
        let matched: f64 = ngram_counts(hyp, n)
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)) as f64 * table.info(g))
            .sum();
        score += matched / (hyp.len() - n + 1) as f64;
    }
    let ratio = if reference.is_empty() {
        1.0
    } else {
        (hyp.len() as f64 / reference.len() as f64).min(1.0)
    };
    score * (nist_beta() * ratio.ln().powi(2)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    fn table() -> InfoTable {
        InfoTable::from_references(&[
            t("produto muito bom"),
            t("produto bom"),
            t("muito bom mesmo"),
        ])
    }

    #[test]
    fn info_weights_from_counts() {
        let tb = table();
        // 8 unigrams; "bom" x3 -> log2(8/3); "muito bom" x2, "muito" x2 -> 0
        assert!((tb.info(&["bom"]) - (8.0f64 / 3.0).log2()).abs() < 1e-15);
        assert_eq!(tb.info(&["muito", "bom"]), 0.0);
        assert_eq!(tb.info(&["produto", "bom"]), 1.0);
        assert_eq!(tb.info(&["ausente"]), 0.0);
    }

    #[test]
    fn zero_overlap_and_empty() {
        let tb = table();
        assert_eq!(nist(&t("x y"), &t("produto bom"), &tb), 0.0);
        assert_eq!(nist(&t(""), &t("produto bom"), &tb), 0.0);
    }

    #[test]
    fn brevity_factor_half_at_two_thirds() {
        let b = nist_beta();
        assert!(((b * (2.0f64 / 3.0).ln().powi(2)).exp() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_beats_permutations() {
        let tb = table();
        let id = nist(&t("produto muito bom"), &t("produto muito bom"), &tb);
        for p in [
            t("muito produto bom"),
            t("bom muito produto"),
            t("produto bom muito"),
        ] {
            assert!(nist(&p, &t("produto muito bom"), &tb) <= id);
        }
        assert!(id > 0.0);
    }
}
