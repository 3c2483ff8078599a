//! Field snapshot files.
//!
//! Line 1 is a JSON header `{"n":..,"L":..,"beta":..,"gamma":..,"k":..,"t":..}`;
//! lines 2..=n+1 hold the real samples, one per line, with 17 significant digits.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::fmt17;
use crate::spectral::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: u32,
    pub t: f64,
}

/// Snapshot contents: header plus samples exactly as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub samples: Vec<f64>,
}

impl Snapshot {
    pub fn from_field(field: &Field, beta: f64, gamma: f64, k: u32, t: f64) -> Self {
        let grid = field.grid();
        Self {
            header: SnapshotHeader {
                n: grid.n_points(),
                length: grid.length(),
                beta,
                gamma,
                k,
                t,
            },
            samples: field.samples(),
        }
    }

    pub fn field(&self) -> Result<Field> {
        let grid = Grid::new(self.header.n, self.header.length)?;
        Field::from_samples(grid, &self.samples)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header =
            serde_json::to_string(&self.header).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "{header}")?;
        for s in &self.samples {
            writeln!(w, "{}", fmt17(*s))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Parse("empty snapshot".into()))??;
        let header: SnapshotHeader =
            serde_json::from_str(&first).map_err(|e| Error::Parse(format!("header: {e}")))?;
        let mut samples = Vec::with_capacity(header.n);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("sample line {}: {e}", i + 2)))?;
            samples.push(v);
        }
        if samples.len() != header.n {
            return Err(Error::Parse(format!(
                "header declares {} samples, found {}",
                header.n,
                samples.len()
            )));
        }
        Ok(Self { header, samples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}
