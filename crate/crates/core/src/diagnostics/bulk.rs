//! Ball integrals `G(r) = ∫ |y|^a v²` and `D(r) = ∫ |y|^a |∇v|²` over the
//! interpolant, plus the discrete pairing `Σ v · (A v)` used by the
//! alternative flux evaluation.

use rayon::prelude::*;

use super::{Cell, CenteredField};
use crate::error::Result;
use crate::quad::{linear_weight_moments, power_integral};

/// Ball integrals with refinement error estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkIntegrals {
    pub g: f64,
    pub d: f64,
    pub g_err: f64,
    pub d_err: f64,
}

/// Default subdivision depth for cells cut by the sphere.
pub(crate) fn default_depth(n: usize) -> u32 {
    if n == 1 {
        5
    } else {
        4
    }
}

pub fn bulk_g(cf: &CenteredField, r: f64) -> Result<f64> {
    Ok(bulk_integrals(cf, r)?.g)
}

pub fn bulk_d(cf: &CenteredField, r: f64) -> Result<f64> {
    Ok(bulk_integrals(cf, r)?.d)
}

/// `G` and `D` at the default depth; errors compare against one level coarser.
pub fn bulk_integrals(cf: &CenteredField, r: f64) -> Result<BulkIntegrals> {
    cf.check_radius(r)?;
    let depth = default_depth(cf.n());
    let (g, d) = integrate_ball(cf, r, depth);
    let (g1, d1) = integrate_ball(cf, r, depth - 1);
    Ok(BulkIntegrals {
        g,
        d,
        g_err: (g - g1).abs(),
        d_err: (d - d1).abs(),
    })
}

/// `2 Σ_{nodes in B_r} v_p (A v)_p`, the reflected discrete pairing.
pub fn bulk_pairing(cf: &CenteredField, r: f64) -> Result<f64> {
    cf.check_radius(r)?;
    let g = &cf.grid;
    let op = cf.operator();
    let c = cf.center;
    let r2 = r * r * (1.0 + 1e-12);
    let parts: Vec<f64> = (0..g.ny)
        .into_par_iter()
        .map(|j| {
            let y = g.y_coord(j);
            if y * y > r2 {
                return 0.0;
            }
            let ll = g.layer_len();
            let mut acc = 0.0;
            for p in 0..ll {
                let x = g.trace_point(p);
                let mut d2 = y * y;
                for k in 0..g.n {
                    d2 += (x[k] - c[k]).powi(2);
                }
                if d2 <= r2 {
                    let idx = j * ll + p;
                    acc += cf.values[idx] * op.apply_row(&cf.values, idx);
                }
            }
            acc
        })
        .collect();
    Ok(2.0 * parts.iter().sum::<f64>())
}

const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Corner values of one grid cell, x bits low and the y bit high.
struct CellData {
    v: [f64; 8],
    n: usize,
    j: usize,
    origin: [f64; 3],
}

fn integrate_ball(cf: &CenteredField, r: f64, depth: u32) -> (f64, f64) {
    let g = &cf.grid;
    let n = g.n;
    let c = cf.center;
    let span = |k: usize| -> (usize, usize) {
        let lo = ((c[k] - r + g.x_box) / g.hx).floor().max(0.0) as usize;
        let hi = (((c[k] + r + g.x_box) / g.hx).ceil() as usize).min(g.nx - 1);
        (lo, hi.max(lo + 1))
    };
    let (x0lo, x0hi) = span(0);
    let (x1lo, x1hi) = if n == 2 { span(1) } else { (0, 1) };
    let jmax = ((r / g.hy).ceil() as usize).min(g.ny - 1);
    let ll = g.layer_len();
    let parts: Vec<(f64, f64)> = (0..jmax)
        .into_par_iter()
        .map(|j| {
            let mut acc = (0.0, 0.0);
            for i1 in x1lo..x1hi {
                for i0 in x0lo..x0hi {
                    let ix = [i0, i1];
                    let base = g.index(&ix[..n], j);
                    let mut cell = CellData {
                        v: [0.0; 8],
                        n,
                        j,
                        origin: [g.x_coord(i0), if n == 2 { g.x_coord(i1) } else { 0.0 }, g.y_coord(j)],
                    };
                    let cx = 1usize << n;
                    for corner in 0..(2 * cx) {
                        let mut idx = base;
                        for k in 0..n {
                            if corner >> k & 1 == 1 {
                                idx += g.stride(k);
                            }
                        }
                        if corner >= cx {
                            idx += ll;
                        }
                        cell.v[corner] = cf.values[idx];
                    }
                    let (gg, dd) = sub_box(&cell, [0.0; 3], [1.0; 3], depth, cf, r);
                    acc.0 += gg;
                    acc.1 += dd;
                }
            }
            acc
        })
        .collect();
    let mut g_sum = 0.0;
    let mut d_sum = 0.0;
    for (gg, dd) in parts {
        g_sum += gg;
        d_sum += dd;
    }
    (2.0 * g_sum, 2.0 * d_sum)
}

/// Integrates over the part of the local box `[lo, hi]` (cell-relative
/// coordinates, last axis = y) lying inside the ball.
fn sub_box(cell: &CellData, lo: [f64; 3], hi: [f64; 3], depth: u32, cf: &CenteredField, r: f64) -> (f64, f64) {
    let g = &cf.grid;
    let n = cell.n;
    let step = |k: usize| if k == n { g.hy } else { g.hx };
    let phys = |k: usize, t: f64| cell.origin[if k == n { 2 } else { k }] + t * step(k);
    let centre = |k: usize| if k == n { 0.0 } else { cf.center[k] };
    let mut dmin = 0.0;
    let mut dmax = 0.0;
    for k in 0..=n {
        let (p, q) = (phys(k, lo[k]) - centre(k), phys(k, hi[k]) - centre(k));
        let near = if p > 0.0 {
            p
        } else if q < 0.0 {
            -q
        } else {
            0.0
        };
        let far = p.abs().max(q.abs());
        dmin += near * near;
        dmax += far * far;
    }
    let r2 = r * r;
    if dmin >= r2 {
        return (0.0, 0.0);
    }
    if dmax > r2 {
        if depth > 0 {
            let mut acc = (0.0, 0.0);
            for child in 0..(1usize << (n + 1)) {
                let mut clo = lo;
                let mut chi = hi;
                for k in 0..=n {
                    let mid = 0.5 * (lo[k] + hi[k]);
                    if child >> k & 1 == 1 {
                        clo[k] = mid;
                    } else {
                        chi[k] = mid;
                    }
                }
                let (gg, dd) = sub_box(cell, clo, chi, depth - 1, cf, r);
                acc.0 += gg;
                acc.1 += dd;
            }
            return acc;
        }
        let mut d2 = 0.0;
        for k in 0..=n {
            d2 += (phys(k, 0.5 * (lo[k] + hi[k])) - centre(k)).powi(2);
        }
        if d2 > r2 {
            return (0.0, 0.0);
        }
    }
    integrate_full(cell, lo, hi, cf)
}

/// `∫ |y|^a v²` and `∫ |y|^a |∇v|²` over a sub-box of one cell.
///
/// `v` and `∂_x v` are linear in `y` across the cell and integrated against
/// exact weighted moments; `∂_y v = Δ_y v · T_j y^{-a}`, so its weighted
/// square integrates to `(Δ_y v T_j)² ∫ t^{-a}`. The `x` directions use the
/// tensor two-point Gauss rule, exact for these integrands.
fn integrate_full(cell: &CellData, lo: [f64; 3], hi: [f64; 3], cf: &CenteredField) -> (f64, f64) {
    let g = &cf.grid;
    let a = g.a;
    let n = cell.n;
    let ya = cell.origin[2] + lo[n] * g.hy;
    let yb = cell.origin[2] + hi[n] * g.hy;
    let m = linear_weight_moments(ya, yb, a);
    let tj = g.y_transmissibility[cell.j];
    let inv = power_integral(ya, yb, -a);
    let mut xvol = 1.0;
    for k in 0..n {
        xvol *= (hi[k] - lo[k]) * g.hx;
    }
    let npts = 1usize << n;
    let wq = xvol / npts as f64;
    let mut gsum = 0.0;
    let mut dsum = 0.0;
    let quad = |bottom: f64, top: f64| {
        let alpha = bottom + lo[n] * (top - bottom);
        let beta = (hi[n] - lo[n]) * (top - bottom);
        alpha * alpha * m[0] + 2.0 * alpha * beta * m[1] + beta * beta * m[2]
    };
    for q in 0..npts {
        let mut tx = [0.0; 2];
        for k in 0..n {
            tx[k] = lo[k] + GAUSS2[q >> k & 1] * (hi[k] - lo[k]);
        }
        let loc = Cell {
            base: 0,
            j: cell.j,
            tx,
            ty: 0.0,
        };
        let (mut vb, mut vt) = (0.0, 0.0);
        let mut db = [0.0; 2];
        let mut dt = [0.0; 2];
        for c in 0..npts {
            let w = loc.weight(c, n);
            vb += w * cell.v[c];
            vt += w * cell.v[c + npts];
            for k in 0..n {
                let dw = loc.weight_derivative(c, k, n) / g.hx;
                db[k] += dw * cell.v[c];
                dt[k] += dw * cell.v[c + npts];
            }
        }
        gsum += wq * quad(vb, vt);
        let mut d = 0.0;
        for k in 0..n {
            d += quad(db[k], dt[k]);
        }
        let jump = (vt - vb) * tj;
        d += jump * jump * inv;
        dsum += wq * d;
    }
    (gsum, dsum)
}
