use nalgebra::DMatrix;

use crate::{Error, Result};

/// An `n × d` matrix of embeddings with a free-form source label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub features: DMatrix<f64>,
    pub label: String,
}

impl FeatureSet {
    pub fn new(features: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature matrix has non-finite entries"));
        }
        Ok(FeatureSet {
            features,
            label: label.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], label: impl Into<String>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("ragged feature rows"));
        }
        Self::new(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]), label)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Parses a `features n d` header followed by `n` rows of `d` floats.
    pub fn parse(text: &str, label: impl Into<String>) -> Result<Self> {
        let mut lines = text.split_inclusive('\n');
        let header = lines.next().ok_or_else(|| Error::parse("features", 0, "empty file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (n, d) = match fields.as_slice() {
            ["features", n, d] => (
                n.parse::<usize>()
                    .map_err(|e| Error::parse("features", 0, e.to_string()))?,
                d.parse::<usize>()
                    .map_err(|e| Error::parse("features", 0, e.to_string()))?,
            ),
            _ => return Err(Error::parse("features", 0, "expected header `features n d`")),
        };
        let mut data = Vec::with_capacity(n * d);
        let mut offset = header.len();
        let mut rows = 0;
        for line in lines {
            let line_offset = offset;
            offset += line.len();
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for f in line.split_whitespace() {
                data.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::parse("features", line_offset, e.to_string()))?,
                );
            }
            if data.len() - before != d {
                return Err(Error::parse("features", line_offset, format!("row needs {d} values")));
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::parse(
                "features",
                offset,
                format!("expected {n} rows, found {rows}"),
            ));
        }
        Self::new(DMatrix::from_row_slice(n, d, &data), label)
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = format!("features {} {}\n", self.len(), self.dim());
        for row in self.features.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", cells.join(" ")).unwrap();
        }
        out
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.display().to_string())
    }
}
