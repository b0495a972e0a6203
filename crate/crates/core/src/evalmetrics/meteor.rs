use std::collections::HashMap;

/// Exact-match unigram alignment: the most matches possible, and among those
/// the fewest chunks. Returns `(matches, chunks)`.
pub fn meteor_alignment<S: AsRef<str>, T: AsRef<str>>(
    hyp: &[S],
    reference: &[T],
) -> (usize, usize) {
    let hyp: Vec<&str> = hyp.iter().map(|s| s.as_ref()).collect();
    let reference: Vec<&str> = reference.iter().map(|s| s.as_ref()).collect();
    let mut ref_pos: HashMap<&str, Vec<usize>> = HashMap::new();
    for (j, w) in reference.iter().enumerate() {
        ref_pos.entry(w).or_default().push(j);
    }
    // needed[w]: matches still owed for w; left[i]: occurrences of hyp[i]'s
    // word at positions >= i.
    let mut hyp_count: HashMap<&str, usize> = HashMap::new();
    for w in &hyp {
        *hyp_count.entry(w).or_insert(0) += 1;
    }
    let mut needed: HashMap<&str, usize> = hyp_count
        .iter()
        .map(|(w, &c)| (*w, c.min(ref_pos.get(w).map_or(0, Vec::len))))
        .collect();
    let matches: usize = needed.values().sum();
    if matches == 0 {
        return (0, 0);
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let left: Vec<usize> = hyp
        .iter()
        .map(|w| {
            let s = seen.entry(w).or_insert(0);
            *s += 1;
            hyp_count[w] - *s + 1
        })
        .collect();

    struct Search<'a> {
        hyp: &'a [&'a str],
        ref_pos: &'a HashMap<&'a str, Vec<usize>>,
        left: &'a [usize],
        used: Vec<bool>,
        best: usize,
    }

    impl<'a> Search<'a> {
        /// `last`: reference position matched by hyp[i-1], if it matched.
        fn go(
            &mut self,
            i: usize,
            last: Option<usize>,
            chunks: usize,
            needed: &mut HashMap<&'a str, usize>,
        ) {
            if chunks >= self.best {
                return;
            }
            if i == self.hyp.len() {
                self.best = chunks;
                return;
            }
            let w = self.hyp[i];
            let owed = needed.get(w).copied().unwrap_or(0);
            if owed > 0 {
                let positions = self.ref_pos[w].clone();
                // Try the chunk-continuing position first for an early bound.
                let mut order: Vec<usize> =
                    positions.into_iter().filter(|&j| !self.used[j]).collect();
                order.sort_by_key(|&j| (Some(j) != last.map(|l| l + 1), j));
                for j in order {
                    let extends = last.is_some_and(|l| l + 1 == j);
                    self.used[j] = true;
                    needed.insert(w, owed - 1);
                    self.go(i + 1, Some(j), chunks + usize::from(!extends), needed);
                    needed.insert(w, owed);
                    self.used[j] = false;
                }
            }
            if self.left[i] > owed {
                self.go(i + 1, None, chunks, needed);
            }
        }
    }

    let mut s = Search {
        hyp: &hyp,
        ref_pos: &ref_pos,
        left: &left,
        used: vec![false; reference.len()],
        best: usize::MAX,
    };
    s.go(0, None, 0, &mut needed);
    (matches, s.best)
}

/// METEOR with exact matching only: `F = 10PR / (R + 9P)`, penalty
/// `0.5 (chunks / m)^3`, score `F (1 - penalty)`.
pub fn meteor<S: AsRef<str>, T: AsRef<str>>(hyp: &[S], reference: &[T]) -> f64 {
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let (m, chunks) = meteor_alignment(hyp, reference);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    f * (1.0 - penalty)
}
