//! Product midpoint rules on the sphere `∂B_r(x0, 0)` weighted by `|y|^a`.

use std::f64::consts::PI;

use super::CenteredField;
use crate::error::{Error, Result};
use crate::quad::sin_power_cell;

/// Quadrature node on the upper hemisphere; `weight` already carries the
/// `|y|^a` factor and the doubling for the reflected half.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceNode {
    pub x: [f64; 2],
    pub y: f64,
    pub weight: f64,
    pub normal: [f64; 3],
}

/// Nodes for a sphere of radius `r` in `R^{n+1}` with `m` polar cells.
pub fn sphere_nodes(n: usize, a: f64, center: [f64; 2], r: f64, m: usize) -> Vec<SurfaceNode> {
    let mut out = Vec::new();
    if n == 1 {
        let dt = PI / m as f64;
        let scale = 2.0 * r.powf(1.0 + a);
        for k in 0..m {
            let (t0, t1) = (k as f64 * dt, (k + 1) as f64 * dt);
            let t = 0.5 * (t0 + t1);
            let w = scale * sin_power_cell(t0, t1, a);
            let (sn, cs) = t.sin_cos();
            out.push(SurfaceNode {
                x: [center[0] + r * cs, 0.0],
                y: r * sn,
                weight: w,
                normal: [cs, sn, 0.0],
            });
        }
    } else {
        let mb = (m / 4).max(8);
        let mp = m.max(32);
        let db = 0.5 * PI / mb as f64;
        let dp = 2.0 * PI / mp as f64;
        let scale = 2.0 * r.powf(2.0 + a) * dp / (1.0 + a);
        for k in 0..mb {
            let (b0, b1) = (k as f64 * db, (k + 1) as f64 * db);
            let cell = b1.sin().powf(1.0 + a) - b0.sin().powf(1.0 + a);
            let b = 0.5 * (b0 + b1);
            let (sb, cb) = b.sin_cos();
            for l in 0..mp {
                let psi = (l as f64 + 0.5) * dp;
                let (sp, cp) = psi.sin_cos();
                out.push(SurfaceNode {
                    x: [center[0] + r * cb * cp, center[1] + r * cb * sp],
                    y: r * sb,
                    weight: scale * cell,
                    normal: [cb * cp, cb * sp, sb],
                });
            }
        }
    }
    out
}

fn cell_count(cf: &CenteredField, r: f64, density: f64) -> usize {
    let m = (density * r / cf.grid.hx).ceil() as usize;
    (m.max(32) + 1) & !1
}

/// `∫_{∂B_r} |y|^a f` with `f(node, v, ∇v)`; returns the value and the
/// error estimate `|Q_m - Q_{m/2}| / 3`.
pub fn surface_integral(
    cf: &CenteredField,
    r: f64,
    density: f64,
    f: impl Fn(&SurfaceNode, f64, &[f64; 3]) -> f64,
) -> Result<(f64, f64)> {
    cf.check_radius(r)?;
    let m = cell_count(cf, r, density);
    let eval = |m: usize| -> Result<f64> {
        let mut acc = 0.0;
        for node in sphere_nodes(cf.n(), cf.a(), cf.center, r, m) {
            let x = &node.x[..cf.n()];
            let v = cf
                .value_at(x, node.y)
                .ok_or(Error::RadiusOutOfDomain { r, limit: cf.max_radius() })?;
            let g = cf
                .gradient_at(x, node.y)
                .ok_or(Error::RadiusOutOfDomain { r, limit: cf.max_radius() })?;
            acc += node.weight * f(&node, v, &g);
        }
        Ok(acc)
    };
    let fine = eval(m)?;
    let coarse = eval(m / 2)?;
    Ok((fine, (fine - coarse).abs() / 3.0))
}

/// `H(r) = ∫_{∂B_r} |y|^a v²`.
pub fn surface_h(cf: &CenteredField, r: f64) -> Result<f64> {
    Ok(surface_integral(cf, r, DEFAULT_DENSITY, |_, v, _| v * v)?.0)
}

pub(crate) const DEFAULT_DENSITY: f64 = 8.0;
