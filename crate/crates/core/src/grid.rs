//! Tensor grids for the upper half of the extension domain.
//!
//! The box `[-x_box, x_box]^n x [0, y_max]` carries nodes on the plane
//! `y = 0`; values below the plane are implied by even reflection. The
//! degenerate weight `|y|^a` enters only through precomputed face
//! transmissibilities.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad::power_integral;

/// Parameters sufficient to rebuild an [`ExtensionGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub n: usize,
    pub s: f64,
    pub x_box: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    /// Half-width of the trace window; trace nodes outside it carry
    /// Dirichlet data. `None` means the whole trace plane is free.
    #[serde(default)]
    pub trace_window: Option<f64>,
}

impl GridParams {
    pub fn build(&self) -> Result<ExtensionGrid> {
        let g = build_grid(self.n, self.s, self.x_box, self.y_max, self.nx, self.ny)?;
        match self.trace_window {
            Some(w) => g.with_trace_window(w),
            None => Ok(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionGrid {
    pub n: usize,
    pub s: f64,
    pub a: f64,
    pub x_box: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub trace_window: f64,
    /// `1 / ∫_{y_j}^{y_{j+1}} t^{-a} dt`, one entry per vertical face.
    pub y_transmissibility: Vec<f64>,
    /// `∫ t^a dt` over the upper-half extent of the control volume of layer `j`.
    pub layer_weight: Vec<f64>,
}

/// Builds the grid for the extension problem with `a = 1 - 2s`.
pub fn build_grid(
    n: usize,
    s: f64,
    x_box: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
) -> Result<ExtensionGrid> {
    if !(n == 1 || n == 2) {
        return invalid(format!("dimension n = {n} not supported (1 or 2)"));
    }
    if !(s > 0.0 && s < 1.0) {
        return invalid(format!("fractional order s = {s} outside (0, 1)"));
    }
    if !(x_box > 0.0 && y_max > 0.0) || !x_box.is_finite() || !y_max.is_finite() {
        return invalid("box extents must be positive and finite");
    }
    if nx < 9 || ny < 9 || nx % 2 == 0 || ny % 2 == 0 {
        return invalid(format!("node counts must be odd and >= 9 (nx = {nx}, ny = {ny})"));
    }
    let a = 1.0 - 2.0 * s;
    let hx = 2.0 * x_box / (nx - 1) as f64;
    let hy = y_max / (ny - 1) as f64;
    let y = |j: usize| j as f64 * hy;

    let y_transmissibility = (0..ny - 1)
        .map(|j| 1.0 / power_integral(y(j), y(j + 1), -a))
        .collect();
    let layer_weight = (0..ny)
        .map(|j| {
            let lo = if j == 0 { 0.0 } else { y(j) - 0.5 * hy };
            let hi = if j == ny - 1 { y(j) } else { y(j) + 0.5 * hy };
            power_integral(lo, hi, a)
        })
        .collect();

    Ok(ExtensionGrid {
        n,
        s,
        a,
        x_box,
        y_max,
        nx,
        ny,
        hx,
        hy,
        trace_window: x_box,
        y_transmissibility,
        layer_weight,
    })
}

impl ExtensionGrid {
    /// Restricts the free part of the trace plane to `|x_k| <= window`.
    pub fn with_trace_window(mut self, window: f64) -> Result<Self> {
        if !(window > 0.0 && window <= self.x_box) {
            return invalid(format!("trace window {window} must lie in (0, x_box]"));
        }
        self.trace_window = window;
        Ok(self)
    }

    pub fn params(&self) -> GridParams {
        GridParams {
            n: self.n,
            s: self.s,
            x_box: self.x_box,
            y_max: self.y_max,
            nx: self.nx,
            ny: self.ny,
            trace_window: (self.trace_window < self.x_box).then_some(self.trace_window),
        }
    }

    /// Nodes per horizontal layer.
    pub fn layer_len(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    pub fn len(&self) -> usize {
        self.layer_len() * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_coord(&self, i: usize) -> f64 {
        -self.x_box + i as f64 * self.hx
    }

    pub fn y_coord(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    pub fn index(&self, ix: &[usize], j: usize) -> usize {
        let mut p = 0;
        for k in (0..self.n).rev() {
            p = p * self.nx + ix[k];
        }
        j * self.layer_len() + p
    }

    /// Splits a node index into per-axis x indices and the layer `j`.
    pub fn unravel(&self, idx: usize) -> ([usize; 2], usize) {
        let ll = self.layer_len();
        let j = idx / ll;
        let mut p = idx % ll;
        let mut ix = [0usize; 2];
        for item in ix.iter_mut().take(self.n) {
            *item = p % self.nx;
            p /= self.nx;
        }
        (ix, j)
    }

    /// Spatial coordinates of a trace-layer position `p`.
    pub fn trace_point(&self, p: usize) -> [f64; 2] {
        let (ix, _) = self.unravel(p);
        let mut x = [0.0; 2];
        for k in 0..self.n {
            x[k] = self.x_coord(ix[k]);
        }
        x
    }

    pub fn node_point(&self, idx: usize) -> ([f64; 2], f64) {
        let (ix, j) = self.unravel(idx);
        let mut x = [0.0; 2];
        for k in 0..self.n {
            x[k] = self.x_coord(ix[k]);
        }
        (x, self.y_coord(j))
    }

    /// Stride of axis `k` inside a layer.
    pub fn stride(&self, k: usize) -> usize {
        self.nx.pow(k as u32)
    }

    /// Whether the trace position `p` (layer index) lies inside the free window.
    pub fn in_trace_window(&self, p: usize) -> bool {
        let x = self.trace_point(p);
        (0..self.n).all(|k| x[k].abs() <= self.trace_window + 1e-12 * self.x_box)
    }

    /// Whether node `idx` carries Dirichlet data.
    pub fn is_fixed(&self, idx: usize) -> bool {
        let (ix, j) = self.unravel(idx);
        if j == self.ny - 1 {
            return true;
        }
        if (0..self.n).any(|k| ix[k] == 0 || ix[k] == self.nx - 1) {
            return true;
        }
        j == 0 && !self.in_trace_window(idx)
    }

    /// Horizontal face transmissibility within layer `j`.
    pub fn x_face(&self, j: usize) -> f64 {
        self.layer_weight[j] * self.hx.powi(self.n as i32 - 1) / self.hx
    }

    /// Vertical face transmissibility between layers `j` and `j + 1`.
    pub fn y_face(&self, j: usize) -> f64 {
        self.y_transmissibility[j] * self.hx.powi(self.n as i32)
    }

    /// Nearest trace-layer position to a spatial point, if inside the box.
    pub fn nearest_trace(&self, x: &[f64]) -> Option<usize> {
        let mut ix = [0usize; 2];
        for k in 0..self.n {
            let f = (x[k] + self.x_box) / self.hx;
            if !(-0.5..=(self.nx as f64 - 0.5)).contains(&f) {
                return None;
            }
            ix[k] = (f.round() as usize).min(self.nx - 1);
        }
        Some(self.index(&ix[..self.n], 0))
    }

    /// Largest radius of a ball centred on the trace point `x0` that fits in the box.
    pub fn max_radius(&self, x0: &[f64]) -> f64 {
        let mut r = self.y_max;
        for &c in x0.iter().take(self.n) {
            r = r.min(self.x_box - c.abs());
        }
        r
    }
}
