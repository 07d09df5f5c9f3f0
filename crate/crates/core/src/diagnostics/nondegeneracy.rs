//! Quadratic lower-growth scans `sup_{B_r}(u - φ) ≥ c_1 r²` and
//! `G(r) ≥ c_2 r^{n+a+5}` around a free boundary point.

use serde::{Deserialize, Serialize};

use super::bulk::bulk_integrals;
use super::{build_v, CenteredField};
use crate::error::{Error, Result};
use crate::field::SolutionField;
use crate::obstacle::ObstacleSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegeneracyRow {
    pub r: f64,
    pub sup_gap: f64,
    pub c1: f64,
    pub g: f64,
    pub c2: f64,
    /// False below four grid cells; such rows are reported but not used.
    pub resolved: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub rows: Vec<NondegeneracyRow>,
    pub c1_hat: f64,
    pub c2_hat: f64,
    /// `max c1 / min c1` over resolved radii.
    pub c1_spread: f64,
    /// Largest drop factor of `c1` from a radius to any smaller one.
    pub c1_drop: f64,
    pub c2_drop: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Scan on the recentred field of `field` at the trace point `x0`.
pub fn nondegeneracy_scan(
    field: &SolutionField,
    obstacle: &ObstacleSpec,
    x0: &[f64],
    ladder: &[f64],
    threshold: f64,
) -> Result<NondegeneracyReport> {
    let g = &field.grid;
    let p = g.nearest_trace(x0).ok_or_else(|| Error::CenterOutsideGrid(x0.to_vec()))?;
    let gap = field.trace[p] - obstacle.eval_phi(&g.trace_point(p)[..g.n]);
    let neighbours_free = (0..g.n).any(|k| {
        let st = g.stride(k);
        [p.wrapping_sub(st), p + st].iter().any(|&q| {
            q < g.layer_len() && field.trace[q] - obstacle.eval_phi(&g.trace_point(q)[..g.n]) > 0.0
        })
    });
    if !(gap.abs() <= 1e-6 * obstacle.positive_max().max(1e-300)) || !neighbours_free {
        return Err(Error::NoFreeBoundaryPoint);
    }
    let cf = build_v(field, obstacle, x0)?;
    nondegeneracy_scan_field(&cf, ladder, threshold)
}

/// Scan on an already recentred field.
pub fn nondegeneracy_scan_field(cf: &CenteredField, ladder: &[f64], threshold: f64) -> Result<NondegeneracyReport> {
    let g = &cf.grid;
    let n = g.n;
    let k = n as f64 + g.a + 5.0;
    let mut rows = Vec::with_capacity(ladder.len());
    for &r in ladder {
        cf.check_radius(r)?;
        let mut sup = f64::NEG_INFINITY;
        for p in 0..g.layer_len() {
            let x = g.trace_point(p);
            let d2: f64 = (0..n).map(|d| (x[d] - cf.center[d]).powi(2)).sum();
            if d2 <= r * r * (1.0 + 1e-12) {
                sup = sup.max(cf.values[p]);
            }
        }
        let gv = bulk_integrals(cf, r)?.g;
        rows.push(NondegeneracyRow {
            r,
            sup_gap: sup,
            c1: sup / (r * r),
            g: gv,
            c2: gv / r.powf(k),
            resolved: r >= 4.0 * g.hx * (1.0 - 1e-9),
        });
    }
    rows.sort_by(|a, b| b.r.total_cmp(&a.r));
    let used: Vec<&NondegeneracyRow> = rows.iter().filter(|r| r.resolved).collect();
    if used.is_empty() {
        return Err(Error::TooFewRadii { have: 0, need: 1 });
    }
    let c1_hat = used.iter().map(|r| r.c1).fold(f64::INFINITY, f64::min);
    let c2_hat = used.iter().map(|r| r.c2).fold(f64::INFINITY, f64::min);
    let c1_max = used.iter().map(|r| r.c1).fold(f64::NEG_INFINITY, f64::max);
    let drop = |f: &dyn Fn(&NondegeneracyRow) -> f64| {
        let mut worst: f64 = 1.0;
        let mut best_above = f64::NEG_INFINITY;
        for row in &used {
            best_above = best_above.max(f(row));
            if f(row) > 0.0 {
                worst = worst.max(best_above / f(row));
            } else {
                worst = f64::INFINITY;
            }
        }
        worst
    };
    let c1_drop = drop(&|r| r.c1);
    let c2_drop = drop(&|r| r.c2);
    Ok(NondegeneracyReport {
        c1_spread: if c1_hat > 0.0 { c1_max / c1_hat } else { f64::INFINITY },
        passed: c1_hat > threshold && c2_hat > threshold,
        rows,
        c1_hat,
        c2_hat,
        c1_drop,
        c2_drop,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn quadratic_gap_gives_constant_c1() {
        let g = build_grid(1, 0.5, 1.0, 1.0, 129, 65).unwrap();
        let cf = CenteredField::from_fn(&g, &[0.0], |x, y| 3.0 * x[0] * x[0] - 3.0 * y * y).unwrap();
        let ladder = [0.5, 0.25, 0.125, 0.0625, 0.03125];
        let rep = nondegeneracy_scan_field(&cf, &ladder, 1e-6).unwrap();
        assert!(rep.passed);
        assert!((rep.c1_hat - 3.0).abs() < 0.05 * 3.0);
        assert!(rep.c1_drop < 1.1);
        assert!(!rep.rows.last().unwrap().resolved);
    }

    #[test]
    fn zero_problem_rejected() {
        let g = build_grid(1, 0.5, 1.0, 1.0, 17, 17).unwrap();
        let field = SolutionField::new(g.clone(), vec![0.0; g.len()], true, 0.0, 0, 1.0, vec![]);
        let o = ObstacleSpec::constant(1, 0.0);
        assert!(matches!(
            nondegeneracy_scan(&field, &o, &[0.0], &[0.5], 0.0),
            Err(Error::NoFreeBoundaryPoint)
        ));
    }
}
