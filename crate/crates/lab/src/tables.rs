//! Versioned CSV tables.
//!
//! Every file starts with a `# schema=<name>` line; loaders refuse any other name.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const TRIAL_SCHEMA: &str = "topolab.trials.v1";
pub const AGGREGATE_SCHEMA: &str = "topolab.aggregate.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub t: f64,
    #[serde(rename = "D_N")]
    pub d_n: f64,
    pub tv_estimate: Option<f64>,
    pub joint_count: u64,
    pub z_only_count: u64,
    pub sigma_only_count: u64,
    pub lln_diag: f64,
    pub rescale_mag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub mean_dn: f64,
    pub stderr: f64,
    /// `exp(C_K t) / sqrt(N - 1)`.
    pub bound: f64,
    pub mean_tv: Option<f64>,
}

pub fn trial_file_name(n: usize) -> String {
    format!("trials_N{n}.csv")
}

pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| LabError::Io(e.error))?;
    Ok(())
}

pub fn encode_table<T: Serialize>(schema: &str, rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = format!("# schema={schema}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn write_table<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    write_atomic(path, &encode_table(schema, rows)?)
}

pub fn read_table<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)?;
    let schema_err = |detail: String| LabError::Schema {
        path: path.display().to_string(),
        detail,
    };
    let (first, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let found = first
        .strip_prefix("# schema=")
        .ok_or_else(|| schema_err("missing schema line".into()))?;
    if found.trim() != schema {
        return Err(schema_err(format!("expected `{schema}`, found `{}`", found.trim())));
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    reader
        .deserialize()
        .map(|r| r.map_err(|e| schema_err(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> TrialRow {
        TrialRow {
            trial: 3,
            t: 0.5,
            d_n: 0.125,
            tv_estimate: None,
            joint_count: 10,
            z_only_count: 2,
            sigma_only_count: 1,
            lln_diag: 0.01,
            rescale_mag: 0.02,
        }
    }

    #[test]
    fn round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_table(&path, TRIAL_SCHEMA, &[row()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "# schema=topolab.trials.v1\ntrial,t,D_N,tv_estimate,joint_count,z_only_count,sigma_only_count,lln_diag,rescale_mag\n"
        ));
        let back: Vec<TrialRow> = read_table(&path, TRIAL_SCHEMA).unwrap();
        assert_eq!(back, vec![row()]);
    }

    #[test]
    fn unknown_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_table(&path, "topolab.trials.v2", &[row()]).unwrap();
        let err = read_table::<TrialRow>(&path, TRIAL_SCHEMA).unwrap_err();
        assert!(matches!(err, LabError::Schema { .. }));
        std::fs::write(&path, "trial,t\n1,0\n").unwrap();
        assert!(read_table::<TrialRow>(&path, TRIAL_SCHEMA).is_err());
    }
}
