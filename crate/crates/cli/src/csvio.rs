//! Readers for the spectrum and trace CSVs this tool writes.

use std::f64::consts::TAU;
use std::path::Path;

use eitlab_core::dynamics::{DynamicsTrace, TraceRow, TRACE_CSV_HEADER};
use eitlab_core::spectrum::{SpectrumRow, SpectrumTable, SPECTRUM_CSV_HEADER};
use eitlab_core::susceptibility::Variant;
use eitlab_core::units::us;
use num_complex::Complex64;

use crate::error::CliError;

fn read_rows(path: &Path, header: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let bad = |msg: String| CliError::schema(format!("data file {}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let found = reader.headers().map_err(|e| bad(e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if found != header {
        return Err(bad(format!("header `{found}` does not match `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let values = record
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("line {}: `{v}`: {e}", i + 2))))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(rows)
}

pub fn read_spectrum(path: &Path) -> Result<SpectrumTable, CliError> {
    let rows = read_rows(path, SPECTRUM_CSV_HEADER)?
        .into_iter()
        .map(|v| SpectrumRow { delta: v[0] * TAU, reflectivity: v[1], transmittivity: v[2], photon_number: v[3] })
        .collect();
    Ok(SpectrumTable { rows, variant: Variant::Continuous })
}

/// Trace rows only; the cavity amplitude is not stored in the CSV and is
/// left at zero.
pub fn read_trace(path: &Path) -> Result<DynamicsTrace, CliError> {
    let rows: Vec<TraceRow> = read_rows(path, TRACE_CSV_HEADER)?
        .into_iter()
        .map(|v| TraceRow { t: us(v[0]), reflectivity: v[1], photon_number: v[2] })
        .collect();
    let amplitudes = vec![Complex64::new(0.0, 0.0); rows.len()];
    Ok(DynamicsTrace { rows, amplitudes, snapshots: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use eitlab_core::params::SystemParams;
    use eitlab_core::spectrum::scan_spectrum;
    use eitlab_core::susceptibility::SusceptibilityModel;
    use eitlab_core::units::{khz, mhz};
    use eitlab_core::Execution;

    #[test]
    fn spectrum_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = SystemParams::reference(mhz(13.6), mhz(4.1));
        let table = scan_spectrum(&p, (mhz(-1.0), mhz(1.0)), khz(100.0), &SusceptibilityModel::Continuous, Execution::Sequential).unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, table.to_csv()).unwrap();
        let back = read_spectrum(&path).unwrap();
        assert_eq!(back.len(), table.len());
        for (a, b) in back.rows.iter().zip(&table.rows) {
            assert!((a.delta - b.delta).abs() <= 1e-10 * b.delta.abs().max(1.0));
            assert!((a.reflectivity - b.reflectivity).abs() <= 1e-11 * b.reflectivity);
        }
    }

    #[test]
    fn wrong_header_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert_eq!(read_trace(&path).unwrap_err().exit_code(), 2);
    }
}
