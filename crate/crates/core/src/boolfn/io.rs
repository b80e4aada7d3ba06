//! JSON and flat binary encodings shared by truth tables and spectra.
//!
//! JSON: `{"arity": n, "values": [...]}`. Binary: an 8-byte little-endian
//! arity header followed by `2^n` little-endian `f64` values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FourierSpectrum, TruthTable};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Json,
    Binary,
}

impl TableFormat {
    /// `.bin` selects binary; anything else is JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => TableFormat::Binary,
            _ => TableFormat::Json,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    arity: usize,
    values: Vec<f64>,
}

pub(crate) fn encode(arity: usize, values: &[f64], format: TableFormat) -> Result<Vec<u8>> {
    Ok(match format {
        TableFormat::Json => {
            let mut bytes = serde_json::to_vec(&Wire {
                arity,
                values: values.to_vec(),
            })?;
            bytes.push(b'\n');
            bytes
        }
        TableFormat::Binary => {
            let mut bytes = Vec::with_capacity(8 + 8 * values.len());
            bytes.extend_from_slice(&(arity as u64).to_le_bytes());
            for v in values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            bytes
        }
    })
}

pub(crate) fn decode(bytes: &[u8], format: TableFormat) -> Result<(usize, Vec<f64>)> {
    match format {
        TableFormat::Json => {
            let wire: Wire = serde_json::from_slice(bytes)?;
            Ok((wire.arity, wire.values))
        }
        TableFormat::Binary => {
            if bytes.len() < 8 {
                return Err(Error::invalid("binary table shorter than its 8-byte header"));
            }
            let (head, body) = bytes.split_at(8);
            let arity = u64::from_le_bytes(head.try_into().unwrap());
            if arity == 0 || arity > super::MAX_ARITY as u64 {
                return Err(Error::invalid(format!("binary header holds unsupported arity {arity}")));
            }
            let expected = 8usize << arity;
            if body.len() != expected {
                return Err(Error::invalid(format!(
                    "binary table of arity {arity} needs {expected} payload bytes, got {}",
                    body.len()
                )));
            }
            let values = body
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok((arity as usize, values))
        }
    }
}

impl TruthTable {
    pub fn to_bytes(&self, format: TableFormat) -> Result<Vec<u8>> {
        encode(self.arity(), self.values(), format)
    }

    /// Decodes a table; values need only be finite.
    pub fn from_bytes(bytes: &[u8], format: TableFormat) -> Result<Self> {
        let (arity, values) = decode(bytes, format)?;
        TruthTable::new_unbounded(arity, values)
    }
}

impl FourierSpectrum {
    pub fn to_bytes(&self, format: TableFormat) -> Result<Vec<u8>> {
        encode(self.arity(), self.coefficients(), format)
    }

    pub fn from_bytes(bytes: &[u8], format: TableFormat) -> Result<Self> {
        let (arity, values) = decode(bytes, format)?;
        FourierSpectrum::new(arity, values)
    }
}

pub fn read_table(path: &Path) -> Result<TruthTable> {
    TruthTable::from_bytes(&std::fs::read(path)?, TableFormat::from_path(path))
}

pub fn write_table(table: &TruthTable, path: &Path) -> Result<()> {
    std::fs::write(path, table.to_bytes(TableFormat::from_path(path))?)?;
    Ok(())
}
