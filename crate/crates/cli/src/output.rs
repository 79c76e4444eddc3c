//! Output staging. Files are collected in memory and written only after the
//! whole run has succeeded, so a failed run leaves no partial output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Formats a value in the CSV dialect: scientific, 12 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

/// A criterion check reported by figure reproduction.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub unit: String,
    pub pass: bool,
}

impl Check {
    /// |value − target| ≤ tolerance.
    pub fn within(name: &str, value: f64, target: f64, tolerance: f64, unit: &str) -> Self {
        let pass = (value - target).abs() <= tolerance;
        Self { name: name.into(), value, target, tolerance, unit: unit.into(), pass }
    }

    /// A yes/no property, reported as 1 or 0.
    pub fn holds(name: &str, pass: bool) -> Self {
        Self { name: name.into(), value: f64::from(u8::from(pass)), target: 1.0, tolerance: 0.0, unit: String::new(), pass }
    }

    pub fn line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        if self.unit.is_empty() && self.tolerance == 0.0 {
            format!("[{tag}] {}", self.name)
        } else {
            let u = if self.unit.is_empty() { String::new() } else { format!(" {}", self.unit) };
            format!("[{tag}] {}: {:.4e}{u} (target {:.4e} +/- {:.2e}{u})", self.name, self.value, self.target, self.tolerance)
        }
    }
}

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "{}", c.line());
        }
        for n in &self.notes {
            let _ = writeln!(out, "{n}");
        }
        out
    }

    /// Writes every staged file into `dir`, creating it if needed.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::schema(format!("output directory {} is not writable: {e}", dir.display())))?;
        self.files
            .iter()
            .map(|(name, contents)| {
                let path = dir.join(name);
                std::fs::write(&path, contents).map_err(|e| CliError::schema(format!("cannot write {}: {e}", path.display())))?;
                Ok(path)
            })
            .collect()
    }
}
