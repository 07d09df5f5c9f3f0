//! The recentred function `v^{x0}` and the radial functionals built on it:
//! `H, G, D, I`, the Almgren quotient `N`, the truncated frequency `Φ`,
//! the Weiss and Monneau functionals, and non-degeneracy scans.

mod bulk;
mod nondegeneracy;
mod radial;
mod sphere;

pub use bulk::{bulk_d, bulk_g, bulk_integrals, bulk_pairing, BulkIntegrals};
pub use nondegeneracy::{nondegeneracy_scan, nondegeneracy_scan_field, NondegeneracyReport, NondegeneracyRow};
pub use radial::{
    calibrate_c0, extrapolate_to_zero, flux_i, frequency_n, monneau_constant, monneau_m, radial_diagnostics, radius_ladder,
    truncated_phi, weiss_w, DiagnosticsConfig, FluxPair, Limit, PhiBranch, RadialDiagnostics, RadialRow,
};
pub use sphere::{surface_h, surface_integral, sphere_nodes, SurfaceNode};

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::field::SolutionField;
use crate::grid::ExtensionGrid;
use crate::obstacle::ObstacleSpec;
use crate::solver::{assemble_operator, DiscreteOperator};

/// `v^{x0}` sampled on the grid.
///
/// Off-node values are multilinear. Gradients are taken cell by cell: the
/// `x` components differentiate the multilinear interpolant, the `y`
/// component uses the profile `∫ t^{-a}` between the two layers of the
/// cell, which is exact for the weighted one-dimensional harmonic
/// functions and matches the face transmissibilities of the operator.
#[derive(Debug)]
pub struct CenteredField {
    pub grid: ExtensionGrid,
    pub center: [f64; 2],
    /// Trace node the centre was derived from, if any.
    pub center_node: Option<usize>,
    pub values: Vec<f64>,
    op: OnceLock<DiscreteOperator>,
}

/// `v^{x0} = ũ - φ + (Δφ(x0) + ∇Δφ(x0)·(x - x0)) y² / (2(1 + a))`.
pub fn build_v(field: &SolutionField, obstacle: &ObstacleSpec, x0: &[f64]) -> Result<CenteredField> {
    let g = &field.grid;
    check_center(g, x0)?;
    let lap0 = obstacle.eval_lap_phi(x0);
    let glap0 = obstacle.eval_grad_lap_phi(x0);
    let ll = g.layer_len();
    let phi: Vec<f64> = (0..ll)
        .map(|p| obstacle.eval_phi(&g.trace_point(p)[..g.n]))
        .collect();
    let k = 1.0 / (2.0 * (1.0 + g.a));
    let values = (0..g.len())
        .map(|idx| {
            let p = idx % ll;
            let (x, y) = g.node_point(idx);
            let mut corr = lap0;
            for d in 0..g.n {
                corr += glap0[d] * (x[d] - x0[d]);
            }
            field.values[idx] - phi[p] + k * corr * y * y
        })
        .collect();
    let center_node = g.nearest_trace(x0).filter(|&p| {
        let x = g.trace_point(p);
        (0..g.n).all(|d| (x[d] - x0[d]).abs() < 1e-9 * g.hx)
    });
    Ok(CenteredField::new(g.clone(), center_of(x0, g.n), center_node, values))
}

/// [`build_v`] centred at a trace node.
pub fn build_v_at_node(field: &SolutionField, obstacle: &ObstacleSpec, node: usize) -> Result<CenteredField> {
    let g = &field.grid;
    if node >= g.layer_len() {
        return Err(Error::CenterOutsideGrid(vec![node as f64]));
    }
    let x = g.trace_point(node);
    build_v(field, obstacle, &x[..g.n])
}

fn center_of(x0: &[f64], n: usize) -> [f64; 2] {
    let mut c = [0.0; 2];
    c[..n].copy_from_slice(&x0[..n]);
    c
}

fn check_center(g: &ExtensionGrid, x0: &[f64]) -> Result<()> {
    if x0.len() < g.n || (0..g.n).any(|d| !(x0[d].abs() <= g.x_box) || !x0[d].is_finite()) {
        return Err(Error::CenterOutsideGrid(x0.to_vec()));
    }
    Ok(())
}

impl CenteredField {
    pub fn new(grid: ExtensionGrid, center: [f64; 2], center_node: Option<usize>, values: Vec<f64>) -> Self {
        CenteredField {
            grid,
            center,
            center_node,
            values,
            op: OnceLock::new(),
        }
    }

    /// Samples an explicit function `f(x, y)` (evaluated at `y >= 0`).
    pub fn from_fn(grid: &ExtensionGrid, center: &[f64], f: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        check_center(grid, center)?;
        let values = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.node_point(idx);
                f(&x[..grid.n], y)
            })
            .collect();
        Ok(Self::new(grid.clone(), center_of(center, grid.n), grid.nearest_trace(center), values))
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn a(&self) -> f64 {
        self.grid.a
    }

    pub fn value_at(&self, x: &[f64], y: f64) -> Option<f64> {
        interpolate(&self.grid, &self.values, x, y)
    }

    /// Cell gradient `(∂_x v, ∂_y v)`; the `y` component flips sign under
    /// reflection and is unbounded at the plane when `a > 0`.
    pub fn gradient_at(&self, x: &[f64], y: f64) -> Option<[f64; 3]> {
        let g = &self.grid;
        let cell = Cell::locate(g, x, y)?;
        let ll = g.layer_len();
        let corners = 1usize << g.n;
        let mut out = [0.0; 3];
        let mut jump = 0.0;
        for c in 0..corners {
            let mut off = 0;
            for k in 0..g.n {
                if c >> k & 1 == 1 {
                    off += g.stride(k);
                }
            }
            let lo = self.values[cell.base + off];
            let hi = self.values[cell.base + off + ll];
            let along_y = (1.0 - cell.ty) * lo + cell.ty * hi;
            let w = cell.weight(c, g.n);
            jump += w * (hi - lo);
            for k in 0..g.n {
                out[k] += cell.weight_derivative(c, k, g.n) * along_y / g.hx;
            }
        }
        let yy = y.abs();
        out[g.n] = jump * g.y_transmissibility[cell.j] * yy.powf(-g.a);
        if y < 0.0 {
            out[g.n] = -out[g.n];
        }
        Some(out)
    }

    pub fn operator(&self) -> &DiscreteOperator {
        self.op.get_or_init(|| assemble_operator(&self.grid))
    }

    /// Largest admissible ball radius around the centre.
    pub fn max_radius(&self) -> f64 {
        self.grid.max_radius(&self.center[..self.grid.n])
    }

    pub(crate) fn check_radius(&self, r: f64) -> Result<()> {
        let limit = self.max_radius();
        if !(r > 0.0) || r > limit * (1.0 + 1e-12) {
            return Err(Error::RadiusOutOfDomain { r, limit });
        }
        Ok(())
    }

    /// `d_r = (H(r) / r^{n+a})^{1/2}`, the blow-up normalisation.
    pub fn blowup_scale(&self, r: f64) -> Result<f64> {
        let h = surface_h(self, r)?;
        Ok((h / r.powf(self.n() as f64 + self.a())).sqrt())
    }
}

/// Grid cell containing a point, with local coordinates.
pub(crate) struct Cell {
    /// Node index of the lower corner.
    pub base: usize,
    pub j: usize,
    pub tx: [f64; 2],
    pub ty: f64,
}

impl Cell {
    pub fn locate(g: &ExtensionGrid, x: &[f64], y: f64) -> Option<Cell> {
        let (j, ty) = locate(y.abs() / g.hy, g.ny)?;
        let mut ix = [0usize; 2];
        let mut tx = [0.0; 2];
        for k in 0..g.n {
            let (i, t) = locate((x[k] + g.x_box) / g.hx, g.nx)?;
            ix[k] = i;
            tx[k] = t;
        }
        Some(Cell {
            base: g.index(&ix[..g.n], j),
            j,
            tx,
            ty,
        })
    }

    /// Multilinear weight of x-corner `c` (bit `k` set = upper node on axis `k`).
    pub fn weight(&self, c: usize, n: usize) -> f64 {
        (0..n)
            .map(|k| if c >> k & 1 == 1 { self.tx[k] } else { 1.0 - self.tx[k] })
            .product()
    }

    /// `∂/∂t_k` of [`Cell::weight`].
    pub fn weight_derivative(&self, c: usize, k: usize, n: usize) -> f64 {
        (0..n)
            .map(|d| {
                let up = c >> d & 1 == 1;
                if d == k {
                    if up {
                        1.0
                    } else {
                        -1.0
                    }
                } else if up {
                    self.tx[d]
                } else {
                    1.0 - self.tx[d]
                }
            })
            .product()
    }
}

/// Multilinear interpolation of nodal `values` at `(x, |y|)`.
pub fn interpolate(g: &ExtensionGrid, values: &[f64], x: &[f64], y: f64) -> Option<f64> {
    let cell = Cell::locate(g, x, y)?;
    let ll = g.layer_len();
    let mut acc = 0.0;
    for c in 0..(1usize << g.n) {
        let w = cell.weight(c, g.n);
        if w == 0.0 {
            continue;
        }
        let mut off = 0;
        for k in 0..g.n {
            if c >> k & 1 == 1 {
                off += g.stride(k);
            }
        }
        let lo = values[cell.base + off];
        let hi = if cell.ty > 0.0 { values[cell.base + off + ll] } else { 0.0 };
        acc += w * ((1.0 - cell.ty) * lo + cell.ty * hi);
    }
    Some(acc)
}

/// Cell index and local coordinate for a fractional node coordinate.
fn locate(f: f64, count: usize) -> Option<(usize, f64)> {
    let last = (count - 1) as f64;
    if !(f >= -1e-9) || f > last + 1e-9 {
        return None;
    }
    let f = f.clamp(0.0, last);
    let i = (f.floor() as usize).min(count - 2);
    Some((i, f - i as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::obstacle::make_cap_obstacle;

    #[test]
    fn interpolation_reproduces_bilinear_functions() {
        let g = build_grid(2, 0.4, 1.0, 1.0, 9, 9).unwrap();
        let f = |x: &[f64], y: f64| 1.0 + 2.0 * x[0] - x[1] + 0.5 * y + 3.0 * x[0] * y;
        let cf = CenteredField::from_fn(&g, &[0.0, 0.0], f).unwrap();
        for (x, y) in [([0.13, -0.41], 0.33), ([0.9, 0.9], 0.99), ([-1.0, 1.0], 1.0)] {
            assert!((cf.value_at(&x, y).unwrap() - f(&x, y)).abs() < 1e-12);
        }
        assert!(cf.value_at(&[1.2, 0.0], 0.1).is_none());
    }

    #[test]
    fn correction_vanishes_for_flat_obstacle() {
        let g = build_grid(1, 0.5, 1.0, 1.0, 17, 17).unwrap();
        let values: Vec<f64> = (0..g.len()).map(|k| (k % 7) as f64).collect();
        let field = SolutionField::new(g.clone(), values.clone(), true, 0.0, 0, 1.0, vec![]);
        let o = ObstacleSpec::constant(1, -0.25);
        let cf = build_v(&field, &o, &[0.25]).unwrap();
        for (a, b) in cf.values.iter().zip(&values) {
            assert!((a - (b + 0.25)).abs() < 1e-15);
        }
    }

    #[test]
    fn cap_correction_is_quadratic_in_y() {
        for &s in &[0.3, 0.5, 0.8] {
            let g = build_grid(1, s, 1.0, 1.0, 17, 17).unwrap();
            let field = SolutionField::new(g.clone(), vec![0.0; g.len()], true, 0.0, 0, 1.0, vec![]);
            let kappa = 1.5;
            let o = make_cap_obstacle(1, 1.0, 0.2, kappa, 0.6, 0.2).unwrap();
            let x0 = g.x_coord(9);
            let cf = build_v(&field, &o, &[x0]).unwrap();
            assert_eq!(cf.center_node, Some(9));
            for idx in 0..g.len() {
                let (x, y) = g.node_point(idx);
                let expected = -o.eval_phi(&x[..1]) - kappa / (1.0 + g.a) * y * y;
                assert!((cf.values[idx] - expected).abs() < 1e-12);
            }
            // Trace identity v(x, 0) = u - φ.
            for p in 0..g.layer_len() {
                assert_eq!(cf.values[p], -o.eval_phi(&g.trace_point(p)[..1]));
            }
        }
    }

    #[test]
    fn center_outside_rejected() {
        let g = build_grid(1, 0.5, 1.0, 1.0, 17, 17).unwrap();
        let field = SolutionField::new(g.clone(), vec![0.0; g.len()], true, 0.0, 0, 1.0, vec![]);
        assert!(build_v(&field, &ObstacleSpec::constant(1, 0.0), &[1.5]).is_err());
    }
}
