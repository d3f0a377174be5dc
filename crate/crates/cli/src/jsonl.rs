//! Vector file IO: one `{"id": ..., "vector": [...]}` object per line.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use emfv_core::{Error, FeatureVector, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
pub struct VectorRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Reads every record of a vector file. Blank lines are rejected, not
/// skipped: a gallery file with holes usually means a broken export.
pub fn read_records(path: &Path) -> Result<Vec<VectorRecord>> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for (number, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let record: VectorRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), number + 1)))?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Format(format!(
            "{}: no vector records",
            path.display()
        )));
    }
    Ok(records)
}

/// Reads a vector file and validates every row into a feature vector.
pub fn read_vectors(path: &Path) -> Result<Vec<(String, FeatureVector)>> {
    read_records(path)?
        .into_iter()
        .map(|r| Ok((r.id, FeatureVector::new(r.vector)?)))
        .collect()
}

pub fn write_record(out: &mut dyn Write, id: &str, vector: &FeatureVector) -> Result<()> {
    let record = VectorRecord {
        id: id.to_string(),
        vector: vector.values().to_vec(),
    };
    let line = serde_json::to_string(&record).map_err(|e| Error::Serialization(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}
