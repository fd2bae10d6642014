//! Per-iteration solver telemetry shared by all methods.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub outer: usize,
    pub rho: f64,
    pub inner: usize,
    pub penalty: f64,
    pub feasibility: f64,
    pub data_fit: f64,
    pub l0_count: usize,
    pub wall_ms: f64,
}

pub fn write_telemetry(path: impl AsRef<Path>, rows: &[TelemetryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "outer",
            "rho",
            "inner",
            "penalty",
            "feasibility",
            "data_fit",
            "l0_count",
            "wall_ms",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let row = TelemetryRow {
            outer: 2,
            rho: 0.1,
            inner: 7,
            penalty: 1.0 / 3.0,
            feasibility: 1e-9,
            data_fit: 12.5,
            l0_count: 40,
            wall_ms: 3.25,
        };
        write_telemetry(&path, &[row]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("outer,rho,inner,penalty,feasibility,data_fit,l0_count,wall_ms\n"));
        let mut r = csv::Reader::from_path(&path).unwrap();
        let back: TelemetryRow = r.deserialize().next().unwrap().unwrap();
        assert_eq!(back, row);

        write_telemetry(&path, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
    }
}
