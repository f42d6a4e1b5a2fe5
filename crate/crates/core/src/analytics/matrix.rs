use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("row {row} has {got} cells, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
}

/// Named numeric columns with missing cells.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    /// Row labels, e.g. `trip/segment`.
    labels: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, labels: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self, MatrixError> {
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(MatrixError::DuplicateColumn(c.clone()));
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(MatrixError::RaggedRow {
                    row: i,
                    got: r.len(),
                    expected: columns.len(),
                });
            }
        }
        let labels = if labels.len() == rows.len() {
            labels
        } else {
            (0..rows.len()).map(|i| i.to_string()).collect()
        };
        // Non-finite cells count as missing.
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.filter(|x| x.is_finite())).collect())
            .collect();
        Ok(Self { columns, labels, rows })
    }

    /// Builds a matrix from complete numeric columns.
    pub fn from_columns(columns: &[(&str, Vec<f64>)]) -> Result<Self, MatrixError> {
        let n = columns.first().map_or(0, |c| c.1.len());
        let names = columns.iter().map(|c| c.0.to_string()).collect();
        let rows = (0..n).map(|i| columns.iter().map(|c| c.1.get(i).copied()).collect()).collect();
        Self::new(names, Vec::new(), rows)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn index(&self, name: &str) -> Result<usize, MatrixError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| MatrixError::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>, MatrixError> {
        let j = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.rows[row][col]
    }

    /// Indices of rows with every named column present.
    pub fn complete_rows(&self, names: &[&str]) -> Result<Vec<usize>, MatrixError> {
        let idx: Vec<usize> = names.iter().map(|n| self.index(n)).collect::<Result<_, _>>()?;
        Ok((0..self.rows.len())
            .filter(|&i| idx.iter().all(|&j| self.rows[i][j].is_some()))
            .collect())
    }
}
