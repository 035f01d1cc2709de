//! BER record files.

use std::path::Path;

use super::trial::BerRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "scenario_id,alpha,ebn0_db,detector,trials,bits,bit_errors,ber,avg_sd_nodes,master_seed";

/// Writes one row per record under [`CSV_HEADER`]. Floats use the shortest
/// representation that reads back to the same value.
pub fn emit_csv(records: &[BerRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no records to write".into()));
    }
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_writer(std::fs::File::create(path).map_err(io)?);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<BerRecord>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
