use std::path::{Path, PathBuf};

use anyhow::Context;

/// One CSV file: header plus rows of preformatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&'static str]) -> Self {
        Table { file: file.to_string(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(&self.file);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Shortest round-trip scientific notation, so reruns are byte-identical.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Empty cell for undefined values.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
