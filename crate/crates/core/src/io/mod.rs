//! Data ingestion and JSON persistence.

pub mod idx;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::points::Points;

pub use idx::{load_idx, parse_idx, IdxError, IdxTensor};

/// Reads a numeric CSV into points. A first row that does not parse as
/// numbers is treated as a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Points> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Points> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut points: Option<Points> = None;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::Schema {
                    field: format!("line {}", line + 1),
                    reason: e.to_string(),
                })
            }
        };
        match points.as_mut() {
            None => points = Some(Points::from_flat(row.len(), row)?),
            Some(p) => p.push(&row).map_err(|_| Error::Schema {
                field: format!("line {}", line + 1),
                reason: format!("expected {} columns, found {}", p.dim(), row.len()),
            })?,
        }
    }
    points.ok_or_else(|| Error::InsufficientData("CSV has no data rows".into()))
}

pub fn write_csv(path: impl AsRef<Path>, points: &Points) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in points.rows() {
        w.write_record(row.iter().map(|x| format!("{x:?}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with shortest round-trip float formatting.
pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    from_json(&text)
}

/// Parses JSON; validation failures from a type's own checks surface as
/// [`Error::Schema`] with the offending field.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        match schema_field(&msg) {
            Some(field) => Error::Schema {
                field,
                reason: msg,
            },
            None => Error::Json(e),
        }
    })
}

fn schema_field(msg: &str) -> Option<String> {
    let start = msg.find("field `")? + "field `".len();
    let end = msg[start..].find('`')? + start;
    Some(msg[start..end].to_string())
}
