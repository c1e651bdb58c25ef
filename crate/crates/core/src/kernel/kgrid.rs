//! `.kgrid` kernel exchange files.
//!
//! A single JSON document:
//!
//! ```json
//! { "format_version": 1, "kind": "direct", "n": 3, "eps": 1.0, "q": 10.0,
//!   "lambda_samples": [ ... n values ... ],
//!   "values": [ ... n*n values, row-major, entries with j > i written as 0.0 ... ] }
//! ```
//!
//! Floats are written in shortest round-trip decimal form, so a write/read
//! cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{KernelGrid, KernelKind};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KgridFile {
    pub format_version: u32,
    pub kind: KernelKind,
    pub n: usize,
    pub eps: f64,
    pub q: f64,
    pub lambda_samples: Vec<f64>,
    pub values: Vec<f64>,
}

impl KgridFile {
    pub fn new(kernel: &KernelGrid, eps: f64, q: f64, lambda_samples: Vec<f64>) -> Self {
        KgridFile {
            format_version: FORMAT_VERSION,
            kind: kernel.kind(),
            n: kernel.n(),
            eps,
            q,
            lambda_samples,
            values: kernel.values().to_vec(),
        }
    }

    pub fn to_grid(&self) -> Result<KernelGrid> {
        KernelGrid::from_values(self.n, self.kind, self.values.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data always serialises")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let file: KgridFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })?;
        file.validate(origin)?;
        Ok(file)
    }

    fn validate(&self, origin: &Path) -> Result<()> {
        let bad = |reason: String| Error::Parse {
            path: origin.to_path_buf(),
            reason,
        };
        if self.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format_version {}", self.format_version)));
        }
        if self.values.len() != self.n * self.n {
            return Err(bad(format!(
                "values has {} entries, expected n*n = {}",
                self.values.len(),
                self.n * self.n
            )));
        }
        if self.lambda_samples.len() != self.n {
            return Err(bad(format!(
                "lambda_samples has {} entries, expected n = {}",
                self.lambda_samples.len(),
                self.n
            )));
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}
