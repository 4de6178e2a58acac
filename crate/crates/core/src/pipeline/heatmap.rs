use std::io::Write;

use crate::error::{Error, Result};
use crate::response::ResponseMatrix;

/// A normalized response matrix as plain whitespace-separated text.
///
/// `#` lines carry the lag, normalizer, sector blocks and symbol order; the
/// remaining lines are the matrix rows. Missing entries are written as `nan`.
/// `numpy.loadtxt` and gnuplot's `matrix` mode read it as is.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub tau: u32,
    pub normalizer: f64,
    pub symbols: Vec<String>,
    /// Index of the first stock of each sector block.
    pub sector_boundaries: Vec<usize>,
    pub sectors: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn emit_heatmap_data(matrix: &ResponseMatrix) -> Result<HeatmapGrid> {
    let n = matrix.symbols.len();
    if n == 0 || matrix.normalized.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let side = matrix.sidecar();
    Ok(HeatmapGrid {
        tau: matrix.tau,
        normalizer: matrix.normalizer,
        symbols: matrix.symbols.clone(),
        sector_boundaries: side.sector_boundaries,
        sectors: side.sectors,
        rows: matrix.normalized.rows().into_iter().map(|r| r.to_vec()).collect(),
    })
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

impl HeatmapGrid {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<heatmap writer>", e);
        writeln!(w, "# tau {}", self.tau).map_err(io)?;
        writeln!(w, "# normalizer {}", fmt(self.normalizer)).map_err(io)?;
        let b: Vec<String> = self.sector_boundaries.iter().map(|b| b.to_string()).collect();
        writeln!(w, "# sector_boundaries {}", b.join(" ")).map_err(io)?;
        writeln!(w, "# sectors {}", self.sectors.join(" ")).map_err(io)?;
        writeln!(w, "# symbols {}", self.symbols.join(" ")).map_err(io)?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
            writeln!(w, "{}", cells.join(" ")).map_err(io)?;
        }
        Ok(())
    }
}
