//! Discrete solutions of the extension problem and their on-disk formats.
//!
//! Binary layout (little endian): magic `FFBF`, `u32` version, `u32` n,
//! `u32` nx, `u32` ny, then `f64` s, x_box, y_max, hx, hy, trace_window,
//! followed by the nodal values in row-major order (x fastest, y slowest).
//! A JSON sidecar carries the solver status.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, ExtensionGrid, GridParams};
use crate::obstacle::ObstacleSpec;

pub const FIELD_MAGIC: &[u8; 4] = b"FFBF";
pub const FIELD_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct SolutionField {
    pub grid: ExtensionGrid,
    /// Nodal values of ũ on the upper half; `ũ(x, -y) = ũ(x, y)`.
    pub values: Vec<f64>,
    /// `u(x) = ũ(x, 0)` on the trace layer.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub residual_norm: f64,
    pub iterations: usize,
    pub omega: f64,
    pub residual_history: Vec<f64>,
}

/// Solver status stored next to the binary field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub schema_version: u32,
    pub grid: GridParams,
    pub converged: bool,
    pub residual_norm: f64,
    pub iterations: usize,
    pub omega: f64,
    pub node_count: usize,
}

impl SolutionField {
    pub fn new(
        grid: ExtensionGrid,
        values: Vec<f64>,
        converged: bool,
        residual_norm: f64,
        iterations: usize,
        omega: f64,
        residual_history: Vec<f64>,
    ) -> Self {
        let trace = values[..grid.layer_len()].to_vec();
        SolutionField {
            grid,
            values,
            trace,
            converged,
            residual_norm,
            iterations,
            omega,
            residual_history,
        }
    }

    /// Nodal value at x-indices `ix` and signed layer `j` (even reflection).
    pub fn value(&self, ix: &[usize], j: isize) -> f64 {
        self.values[self.grid.index(ix, j.unsigned_abs())]
    }

    /// Multilinear interpolation of ũ at `(x, y)`, reflecting `y < 0`.
    pub fn interpolate(&self, x: &[f64], y: f64) -> Option<f64> {
        crate::diagnostics::interpolate(&self.grid, &self.values, x, y)
    }

    /// Multilinear interpolation of the trace `u`.
    pub fn trace_at(&self, x: &[f64]) -> Option<f64> {
        self.interpolate(x, 0.0)
    }

    pub fn sidecar(&self) -> FieldSidecar {
        FieldSidecar {
            schema_version: FIELD_VERSION,
            grid: self.grid.params(),
            converged: self.converged,
            residual_norm: self.residual_norm,
            iterations: self.iterations,
            omega: self.omega,
            node_count: self.values.len(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(64 + 8 * self.values.len());
        out.extend_from_slice(FIELD_MAGIC);
        for v in [FIELD_VERSION, g.n as u32, g.nx as u32, g.ny as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in [g.s, g.x_box, g.y_max, g.hx, g.hy, g.trace_window] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes a binary field; solver status defaults to "converged, unknown residual".
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Format("bad field magic".into()));
        }
        let mut u32s = [0u32; 4];
        for v in u32s.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        if u32s[0] != FIELD_VERSION {
            return Err(Error::SchemaMismatch {
                expected: FIELD_VERSION,
                found: u32s[0],
            });
        }
        let mut f64s = [0f64; 6];
        for v in f64s.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        let (n, nx, ny) = (u32s[1] as usize, u32s[2] as usize, u32s[3] as usize);
        let [s, x_box, y_max, _, _, window] = f64s;
        let mut grid = build_grid(n, s, x_box, y_max, nx, ny)?;
        if window < x_box {
            grid = grid.with_trace_window(window)?;
        }
        if r.len() != 8 * grid.len() {
            return Err(Error::Format(format!(
                "field body has {} bytes, expected {}",
                r.len(),
                8 * grid.len()
            )));
        }
        let values = r
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(SolutionField::new(grid, values, true, f64::NAN, 0, f64::NAN, Vec::new()))
    }

    pub fn write(&self, bin: &Path, sidecar: &Path) -> Result<()> {
        std::fs::write(bin, self.to_bytes())?;
        std::fs::write(sidecar, serde_json::to_string_pretty(&self.sidecar())? + "\n")?;
        Ok(())
    }

    pub fn read(bin: &Path, sidecar: Option<&Path>) -> Result<Self> {
        let mut f = Self::from_bytes(&std::fs::read(bin)?)?;
        if let Some(p) = sidecar {
            let meta: FieldSidecar = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            if meta.schema_version != FIELD_VERSION {
                return Err(Error::SchemaMismatch {
                    expected: FIELD_VERSION,
                    found: meta.schema_version,
                });
            }
            f.converged = meta.converged;
            f.residual_norm = meta.residual_norm;
            f.iterations = meta.iterations;
            f.omega = meta.omega;
        }
        Ok(f)
    }

    /// Writes the trace as CSV: coordinates, `u`, `φ`.
    pub fn write_trace_csv(&self, obstacle: &ObstacleSpec, w: &mut impl Write) -> Result<()> {
        let g = &self.grid;
        if g.n == 1 {
            writeln!(w, "x,u,phi")?;
        } else {
            writeln!(w, "x1,x2,u,phi")?;
        }
        for p in 0..g.layer_len() {
            let x = g.trace_point(p);
            let phi = obstacle.eval_phi(&x[..g.n]);
            if g.n == 1 {
                writeln!(w, "{:.12e},{:.12e},{:.12e}", x[0], self.trace[p], phi)?;
            } else {
                writeln!(w, "{:.12e},{:.12e},{:.12e},{:.12e}", x[0], x[1], self.trace[p], phi)?;
            }
        }
        Ok(())
    }
}
