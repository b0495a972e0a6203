use std::collections::HashSet;
use std::path::Path;

use super::ReviewRecord;
use crate::error::{Error, Result};

/// Column names of the review CSV.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvSchema {
    pub title_column: String,
    pub text_column: String,
    /// Optional id column; rows are numbered `row-N` (1-based) otherwise.
    pub id_column: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            title_column: "review_title".into(),
            text_column: "review_text".into(),
            id_column: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub records: Vec<ReviewRecord>,
    /// Rows with an empty title or text after trimming.
    pub dropped_empty: usize,
    /// Rows the CSV reader could not parse, or with a repeated id.
    pub malformed: usize,
}

pub fn load_reviews(path: &Path, schema: &CsvSchema, strict: bool) -> Result<LoadReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_reviews(file, schema, strict)
}

pub fn read_reviews<R: std::io::Read>(
    reader: R,
    schema: &CsvSchema,
    strict: bool,
) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let title_col = col(&schema.title_column)?;
    let text_col = col(&schema.text_column)?;
    let id_col = schema.id_column.as_deref().map(col).transpose()?;

    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = match result {
            Ok(r) => r,
            Err(e) if !strict => {
                log::warn!("skipping malformed CSV row {}: {e}", row + 1);
                report.malformed += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let id = match id_col {
            Some(i) => field(i).to_string(),
            None => format!("row-{}", row + 1),
        };
        if id.is_empty() || !seen.insert(id.clone()) {
            if strict {
                return Err(Error::data(format!(
                    "row {}: empty or duplicate id {id:?}",
                    row + 1
                )));
            }
            log::warn!("skipping row {}: empty or duplicate id {id:?}", row + 1);
            report.malformed += 1;
            continue;
        }
        let (title, text) = (field(title_col), field(text_col));
        if title.is_empty() || text.is_empty() {
            report.dropped_empty += 1;
            continue;
        }
        report.records.push(ReviewRecord {
            id,
            title_raw: title.to_string(),
            text_raw: text.to_string(),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(csv: &str, strict: bool) -> Result<LoadReport> {
        read_reviews(csv.as_bytes(), &CsvSchema::default(), strict)
    }

    #[test]
    fn two_valid_rows() {
        let r = load("review_title,review_text\nbom,gostei\nruim,odiei\n", false).unwrap();
        assert_eq!(r.records.len(), 2);
        assert_eq!(r.records[0].id, "row-1");
        assert_eq!(r.records[1].title_raw, "ruim");
    }

    #[test]
    fn empty_title_dropped() {
        let r = load("review_title,review_text\n  ,gostei\nbom,ok\n", false).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.dropped_empty, 1);
    }

    #[test]
    fn missing_column() {
        let err = load("review_title,other\nbom,x\n", false).unwrap_err();
        assert!(err.to_string().contains("missing column"), "{err}");
    }

    #[test]
    fn malformed_row_skipped_unless_strict() {
        let csv = "review_title,review_text\nbom,gostei\na,b,c\nruim,odiei\n";
        let r = load(csv, false).unwrap();
        assert_eq!(r.records.len(), 2);
        assert_eq!(r.malformed, 1);
        assert!(load(csv, true).is_err());
    }

    #[test]
    fn extra_columns_and_id_column() {
        let csv = "review_id,review_title,x,review_text\nA1,bom,1,gostei\nA1,dup,2,x\n";
        let schema = CsvSchema {
            id_column: Some("review_id".into()),
            ..CsvSchema::default()
        };
        let r = read_reviews(csv.as_bytes(), &schema, false).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.records[0].id, "A1");
        assert_eq!(r.malformed, 1);
    }
}
