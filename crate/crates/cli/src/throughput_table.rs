//! CSV throughput tables: `layer,direction,candidate_id,elements_per_second`.
//!
//! These inject externally measured rates (for example, from real hardware)
//! into probing and dispatch in place of the host software-kernel timings.

use serde::{Deserialize, Serialize};
use std::path::Path;

use quantprobe_core::gemm::GemmDirection;
use quantprobe_core::probe::ThroughputTable;

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
struct TableRow {
    layer: String,
    direction: String,
    candidate_id: String,
    elements_per_second: f64,
}

pub fn read_table(path: &Path) -> Result<ThroughputTable, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("throughput table {}: {e}", path.display())))?;
    let mut table = ThroughputTable::default();
    for row in reader.deserialize::<TableRow>() {
        let row = row.map_err(|e| CliError::Data(format!("throughput table row: {e}")))?;
        let direction: GemmDirection = row
            .direction
            .parse()
            .map_err(|e: String| CliError::Data(format!("throughput table: {e}")))?;
        if !(row.elements_per_second > 0.0) {
            return Err(CliError::Data(format!(
                "throughput table: rate {} for {}/{}/{} must be positive",
                row.elements_per_second, row.layer, row.direction, row.candidate_id
            )));
        }
        table.insert(&row.layer, direction, &row.candidate_id, row.elements_per_second);
    }
    Ok(table)
}

pub fn write_table(
    entries: &[(String, GemmDirection, String, f64)],
    path: &Path,
) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("throughput table {}: {e}", path.display())))?;
    for (layer, direction, candidate_id, rate) in entries {
        writer
            .serialize(TableRow {
                layer: layer.clone(),
                direction: direction.to_string(),
                candidate_id: candidate_id.clone(),
                elements_per_second: *rate,
            })
            .map_err(|e| CliError::Data(format!("throughput table write: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Data(format!("throughput table flush: {e}")))?;
    Ok(())
}
