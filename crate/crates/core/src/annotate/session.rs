use std::collections::HashSet;
use std::io::{BufRead, Write};

use chrono::Utc;

use super::{AnnotationItem, ScoreStore};
use crate::error::{Error, Result};
use crate::evalmetrics::{AnnotationScore, Score};

pub const QUESTION: &str =
    "Does this sentence look like a good or bad Ecommerce product page hashtag?";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SessionOutcome {
    /// Items already judged by this annotator before the session.
    pub already_scored: usize,
    pub scored: usize,
    /// Items left unjudged when the session ended.
    pub remaining: usize,
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<terminal>", e)
}

/// Presents every item this annotator has not judged yet and appends one
/// score per answer. Keys `0`, `5`, `1` score 0, 0.5 and 1; `q` or end of
/// input stops early. Anything else asks again.
pub fn run_session<R: BufRead, W: Write>(
    items: &[AnnotationItem],
    store: &ScoreStore,
    annotator: &str,
    reveal: bool,
    mut input: R,
    mut out: W,
) -> Result<SessionOutcome> {
    if annotator.trim().is_empty() {
        return Err(Error::invalid("annotator id must not be empty"));
    }
    let done: HashSet<String> = store
        .read_all()?
        .into_iter()
        .filter(|s| s.annotator == annotator)
        .map(|s| s.item_id)
        .collect();
    let todo: Vec<&AnnotationItem> = items
        .iter()
        .filter(|i| !done.contains(&i.item_id))
        .collect();
    let mut outcome = SessionOutcome {
        already_scored: items.len() - todo.len(),
        scored: 0,
        remaining: todo.len(),
    };
    let mut line = String::new();
    'items: for (n, item) in todo.iter().enumerate() {
        writeln!(out, "\n[{}/{}] {}", n + 1, todo.len(), item.item_id).map_err(io_err)?;
        writeln!(out, "Review: {}", item.review_text).map_err(io_err)?;
        writeln!(out, "Title:  {}", item.candidate_title).map_err(io_err)?;
        if reveal {
            writeln!(out, "Source: {}", item.source).map_err(io_err)?;
        }
        writeln!(out, "{QUESTION}").map_err(io_err)?;
        let score = loop {
            write!(out, "[0] bad  [5] partial  [1] good  [q] quit > ").map_err(io_err)?;
            out.flush().map_err(io_err)?;
            line.clear();
            if input.read_line(&mut line).map_err(io_err)? == 0 {
                break 'items;
            }
            let key = line.trim();
            if key.eq_ignore_ascii_case("q") {
                break 'items;
            }
            match Score::from_key(key) {
                Some(s) => break s,
                None => writeln!(out, "please answer 0, 5 or 1").map_err(io_err)?,
            }
        };
        store.append(&AnnotationScore {
            item_id: item.item_id.clone(),
            source: item.source,
            score,
            annotator: annotator.to_string(),
            timestamp: Utc::now(),
        })?;
        outcome.scored += 1;
        outcome.remaining -= 1;
    }
    writeln!(
        out,
        "\n{} scored, {} remaining",
        outcome.scored, outcome.remaining
    )
    .map_err(io_err)?;
    Ok(outcome)
}
