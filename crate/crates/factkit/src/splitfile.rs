//! Split files: a header line, then the train, val and test ids, each part
//! on one line as a comma-separated list.
//!
//! ```text
//! #split v1 seed=42 parts=70,10,20 stratify=main_category
//! f1,f4,f5
//! f2
//! f3
//! ```

use std::path::Path;

use factkit_core::split::{SplitAssignment, SplitSpec};
use factkit_core::taxonomy::Dimension;

use crate::facts::{write_text, DataError};

const HEADER: &str = "#split v1";

fn parse_err(line: usize, message: impl ToString) -> DataError {
    DataError::Parse {
        line,
        message: message.to_string(),
    }
}

pub fn format_split(spec: &SplitSpec, split: &SplitAssignment) -> Result<String, DataError> {
    let [a, b, c] = spec.parts;
    let mut out = format!(
        "{HEADER} seed={} parts={a},{b},{c} stratify={}\n",
        spec.seed,
        spec.stratify_by.key()
    );
    for (n, ids) in [&split.train, &split.val, &split.test].into_iter().enumerate() {
        if let Some(bad) = ids.iter().find(|id| id.is_empty() || id.contains([',', '\n', '\r'])) {
            return Err(parse_err(n + 2, format!("id {bad:?} cannot be stored in a split file")));
        }
        out.push_str(&ids.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_split(content: &str) -> Result<(SplitSpec, SplitAssignment), DataError> {
    let lines: Vec<&str> = content.lines().collect();
    let header = lines.first().ok_or_else(|| parse_err(1, "empty split file"))?;
    let rest = header
        .strip_prefix(HEADER)
        .ok_or_else(|| parse_err(1, format!("expected header starting with {HEADER:?}")))?;
    let mut spec = SplitSpec::default();
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("malformed header field {field:?}")))?;
        match key {
            "seed" => spec.seed = value.parse().map_err(|e| parse_err(1, format!("seed: {e}")))?,
            "parts" => {
                let parts: Vec<u64> = value
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| parse_err(1, format!("parts: {e}")))?;
                spec.parts = parts
                    .try_into()
                    .map_err(|_| parse_err(1, "parts needs three integers"))?;
            }
            "stratify" => {
                spec.stratify_by =
                    Dimension::from_key(value).ok_or_else(|| parse_err(1, format!("unknown dimension {value:?}")))?
            }
            other => return Err(parse_err(1, format!("unknown header field {other:?}"))),
        }
    }
    if lines.len() != 4 {
        return Err(parse_err(lines.len().min(4) + 1, "expected exactly three id lines"));
    }
    let ids = |line: &str| -> Vec<String> {
        if line.is_empty() {
            Vec::new()
        } else {
            line.split(',').map(String::from).collect()
        }
    };
    let split = SplitAssignment {
        train: ids(lines[1]),
        val: ids(lines[2]),
        test: ids(lines[3]),
    };
    let mut seen = std::collections::BTreeSet::new();
    for (n, part) in [&split.train, &split.val, &split.test].into_iter().enumerate() {
        for id in part {
            if !seen.insert(id.as_str()) {
                return Err(DataError::DuplicateId {
                    line: n + 2,
                    id: id.clone(),
                });
            }
        }
    }
    Ok((spec, split))
}

pub fn write_split(path: &Path, spec: &SplitSpec, split: &SplitAssignment) -> Result<(), DataError> {
    write_text(path, &format_split(spec, split)?)
}

pub fn read_split(path: &Path) -> Result<(SplitSpec, SplitAssignment), DataError> {
    let content = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    parse_split(&content)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn round_trip_with_empty_part() {
        let spec = SplitSpec::with_seed(123);
        let split = SplitAssignment {
            train: ids(&["a", "b"]),
            val: vec![],
            test: ids(&["c"]),
        };
        let text = format_split(&spec, &split).unwrap();
        assert_eq!(text, "#split v1 seed=123 parts=70,10,20 stratify=main_category\na,b\n\nc\n");
        assert_eq!(parse_split(&text).unwrap(), (spec, split));
    }

    #[test]
    fn rejects_overlap() {
        let text = "#split v1 seed=1\na,b\nb\n\n";
        assert!(matches!(parse_split(text), Err(DataError::DuplicateId { line: 3, .. })));
    }

    #[test]
    fn rejects_comma_in_id() {
        let split = SplitAssignment {
            train: ids(&["a,b"]),
            val: vec![],
            test: vec![],
        };
        assert!(format_split(&SplitSpec::default(), &split).is_err());
    }
}
