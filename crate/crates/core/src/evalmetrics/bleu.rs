use std::collections::HashMap;

/// Counts of every n-gram of order `n` in `tokens`.
pub(crate) fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts
            .entry(w.iter().map(|t| t.as_ref()).collect())
            .or_insert(0) += 1;
    }
    counts
}

/// Matches of hypothesis n-grams, each clipped to its reference count.
pub(crate) fn clipped_matches<S: AsRef<str>, T: AsRef<str>>(
    hyp: &[S],
    reference: &[T],
    n: usize,
) -> usize {
    let r = ngram_counts(reference, n);
    ngram_counts(hyp, n)
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum()
}

/// Sentence BLEU with orders `1..=min(4, |hyp|)`, uniform weights and the
/// usual brevity penalty. Unsmoothed: any zero precision gives 0.
pub fn bleu<S: AsRef<str>, T: AsRef<str>>(hyp: &[S], reference: &[T]) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let max_n = hyp.len().min(4);
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let m = clipped_matches(hyp, reference, n);
        if m == 0 {
            return 0.0;
        }
        log_sum += (m as f64 / (hyp.len() - n + 1) as f64).ln();
    }
    let bp = if hyp.len() < reference.len() {
        (1.0 - reference.len() as f64 / hyp.len() as f64).exp()
    } else {
        1.0
    };
    bp * (log_sum / max_n as f64).exp()
}
