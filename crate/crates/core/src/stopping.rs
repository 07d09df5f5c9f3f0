//! Monte Carlo cross-check of the obstacle problem against the optimal
//! stopping problem for a symmetric `2s`-stable process on the trace plane.
//!
//! The process is killed on leaving the free trace window `Ω`, where the
//! solution vanishes; stopping at position `z ∈ Ω` pays `φ(z)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::SolutionField;
use crate::freeboundary::Masks;
use crate::grid::ExtensionGrid;
use crate::obstacle::ObstacleSpec;
use crate::solver::{assemble_operator, BoundaryData, ProjectedSor, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableProcessConfig {
    /// Stability index `2s`.
    pub alpha: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub max_time: f64,
    pub seed: u64,
}

impl StableProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return invalid(format!("stability index {} outside (0, 2)", self.alpha));
        }
        if !(self.dt > 0.0) || !(self.max_time > 0.0) {
            return invalid("dt and max_time must be positive");
        }
        if self.n_paths == 0 {
            return Err(Error::ZeroPaths);
        }
        Ok(())
    }

    /// Increment scale `dt^{1/α}`.
    pub fn scale(&self) -> f64 {
        self.dt.powf(1.0 / self.alpha)
    }

    /// Generator for path `index`: one ChaCha stream per path.
    pub fn path_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Standard symmetric `α`-stable variate (characteristic function
/// `exp(-|ξ|^α)`) by the Chambers-Mallows-Stuck transform.
pub fn standard_stable(alpha: f64, rng: &mut impl Rng) -> f64 {
    let u = std::f64::consts::PI * (rng.gen::<f64>() - 0.5);
    if (alpha - 1.0).abs() < 1e-12 {
        return u.tan();
    }
    let w = -(1.0 - rng.gen::<f64>()).ln();
    (alpha * u).sin() / u.cos().powf(1.0 / alpha) * ((u * (1.0 - alpha)).cos() / w).powf((1.0 - alpha) / alpha)
}

/// One increment per axis over a step `dt`.
pub fn sample_increment(cfg: &StableProcessConfig, n: usize, rng: &mut impl Rng) -> [f64; 2] {
    let sc = cfg.scale();
    let mut out = [0.0; 2];
    for v in out.iter_mut().take(n) {
        *v = sc * standard_stable(cfg.alpha, rng);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    StopOnContact,
    StopImmediately,
    FixedTime { t: f64 },
    NeverStop,
    /// Stop inside the contact set grown (`cells > 0`) or shrunk (`cells < 0`)
    /// by that many trace neighbour layers.
    DilatedContact { cells: i32 },
}

impl Strategy {
    pub fn id(&self) -> String {
        match self {
            Strategy::StopOnContact => "stop_on_contact".into(),
            Strategy::StopImmediately => "stop_immediately".into(),
            Strategy::FixedTime { t } => format!("fixed_time_{t}"),
            Strategy::NeverStop => "never_stop".into(),
            Strategy::DilatedContact { cells } => format!("dilated_contact_{cells}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingEstimate {
    pub x: Vec<f64>,
    pub strategy: String,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_paths)`.
    pub se: f64,
    pub truncation_fraction: f64,
    pub n_paths: usize,
}

/// Grows (`k > 0`) or shrinks (`k < 0`) a trace mask by `|k|` neighbour layers.
pub fn dilate_mask(grid: &ExtensionGrid, mask: &[bool], k: i32) -> Vec<bool> {
    let grow = k > 0;
    let mut cur: Vec<bool> = if grow { mask.to_vec() } else { mask.iter().map(|m| !m).collect() };
    for _ in 0..k.unsigned_abs() {
        let prev = cur.clone();
        for p in 0..prev.len() {
            if prev[p] {
                continue;
            }
            let (ix, _) = grid.unravel(p);
            let hit = (0..grid.n).any(|d| {
                let st = grid.stride(d);
                (ix[d] > 0 && prev[p - st]) || (ix[d] + 1 < grid.nx && prev[p + st])
            });
            if hit {
                cur[p] = true;
            }
        }
    }
    if grow {
        cur
    } else {
        cur.iter().map(|m| !m).collect()
    }
}

fn in_window(grid: &ExtensionGrid, z: &[f64; 2]) -> bool {
    (0..grid.n).all(|k| z[k].abs() < grid.trace_window)
}

/// Monte Carlo estimate of `J_x[θ] = E[φ(x + X_{min(θ, τ)})]`, with the
/// payoff zero once the path has left `Ω`.
pub fn estimate_value(
    grid: &ExtensionGrid,
    obstacle: &ObstacleSpec,
    masks: Option<&Masks>,
    cfg: &StableProcessConfig,
    x: &[f64],
    strategy: Strategy,
) -> Result<StoppingEstimate> {
    cfg.validate()?;
    let n = grid.n;
    if x.len() < n {
        return invalid("start point has the wrong dimension");
    }
    let mut x0 = [0.0; 2];
    x0[..n].copy_from_slice(&x[..n]);
    if let Strategy::StopImmediately = strategy {
        let v = if in_window(grid, &x0) { obstacle.eval_phi(&x0[..n]) } else { 0.0 };
        return Ok(StoppingEstimate {
            x: x0[..n].to_vec(),
            strategy: strategy.id(),
            mean: v,
            se: 0.0,
            truncation_fraction: 0.0,
            n_paths: cfg.n_paths,
        });
    }
    let stop_mask: Option<Vec<bool>> = match strategy {
        Strategy::StopOnContact => Some(masks.ok_or(Error::MissingContactMask)?.contact.clone()),
        Strategy::DilatedContact { cells } => {
            Some(dilate_mask(grid, &masks.ok_or(Error::MissingContactMask)?.contact, cells))
        }
        _ => None,
    };
    let horizon = match strategy {
        Strategy::FixedTime { t } => t.min(cfg.max_time),
        _ => cfg.max_time,
    };
    let steps = (horizon / cfg.dt).round().max(0.0) as usize;
    let stops_at = |z: &[f64; 2]| -> bool {
        match &stop_mask {
            Some(m) => grid.nearest_trace(&z[..n]).map(|p| m[p]).unwrap_or(false),
            None => false,
        }
    };
    let fixed = matches!(strategy, Strategy::FixedTime { .. });
    let outcomes: Vec<(f64, bool)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.path_rng(i);
            let mut z = x0;
            if !in_window(grid, &z) {
                return (0.0, false);
            }
            for _ in 0..steps {
                if stops_at(&z) {
                    return (obstacle.eval_phi(&z[..n]), false);
                }
                let dz = sample_increment(cfg, n, &mut rng);
                for k in 0..n {
                    z[k] += dz[k];
                }
                if !in_window(grid, &z) {
                    return (0.0, false);
                }
            }
            let truncated = !fixed && !stops_at(&z);
            (obstacle.eval_phi(&z[..n]), truncated)
        })
        .collect();
    let np = cfg.n_paths as f64;
    let mean = outcomes.iter().map(|o| o.0).sum::<f64>() / np;
    let var = if cfg.n_paths > 1 {
        outcomes.iter().map(|o| (o.0 - mean).powi(2)).sum::<f64>() / (np - 1.0)
    } else {
        0.0
    };
    let truncated = outcomes.iter().filter(|o| o.1).count();
    Ok(StoppingEstimate {
        x: x0[..n].to_vec(),
        strategy: strategy.id(),
        mean,
        se: (var / np).sqrt(),
        truncation_fraction: truncated as f64 / np,
        n_paths: cfg.n_paths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub u_x: f64,
    pub mean: f64,
    pub se: f64,
    /// `δ^{3/2} ‖u‖_∞`, the allowance for the `o(δ)` term.
    pub drift_budget: f64,
    pub gap: f64,
    pub passed: bool,
}

/// Checks `u(x) = E[u(x + X_δ)] + o(δ)` at a continuation point, with `u`
/// extended by zero outside `Ω`.
pub fn martingale_check(
    field: &SolutionField,
    obstacle: &ObstacleSpec,
    cfg: &StableProcessConfig,
    x: &[f64],
    delta: f64,
    contact_tol: f64,
) -> Result<MartingaleReport> {
    cfg.validate()?;
    if !(delta > 0.0) {
        return invalid("delta must be positive");
    }
    let g = &field.grid;
    let n = g.n;
    let u_x = field.trace_at(x).ok_or_else(|| Error::CenterOutsideGrid(x.to_vec()))?;
    if u_x - obstacle.eval_phi(x) <= contact_tol {
        return Err(Error::NotInContinuation(x.to_vec()));
    }
    let step = StableProcessConfig { dt: delta, ..*cfg };
    let vals: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = step.path_rng(i);
            let dz = sample_increment(&step, n, &mut rng);
            let mut z = [0.0; 2];
            for k in 0..n {
                z[k] = x[k] + dz[k];
            }
            if in_window(g, &z) {
                field.trace_at(&z[..n]).unwrap_or(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let np = cfg.n_paths as f64;
    let mean = vals.iter().sum::<f64>() / np;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (np - 1.0).max(1.0);
    let se = (var / np).sqrt();
    let sup = field.trace.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let drift_budget = delta.powf(1.5) * sup;
    let gap = (u_x - mean).abs();
    Ok(MartingaleReport {
        u_x,
        mean,
        se,
        drift_budget,
        gap,
        passed: gap <= 3.0 * se + drift_budget,
    })
}

pub fn write_estimates_csv(estimates: &[StoppingEstimate], w: &mut impl Write) -> Result<()> {
    writeln!(w, "x,strategy,J,SE,truncation_fraction")?;
    for e in estimates {
        let x: Vec<String> = e.x.iter().map(|v| format!("{v}")).collect();
        writeln!(
            w,
            "{},{},{:.10e},{:.4e},{:.6}",
            x.join(" "),
            e.strategy,
            e.mean,
            e.se,
            e.truncation_fraction
        )?;
    }
    Ok(())
}

/// `∫_Ω u` by the trapezoidal rule on the trace layer.
pub fn trace_mass(field: &SolutionField) -> f64 {
    let g = &field.grid;
    let mut total = 0.0;
    for p in 0..g.layer_len() {
        let (ix, _) = g.unravel(p);
        let mut w = g.hx.powi(g.n as i32);
        for k in 0..g.n {
            if ix[k] == 0 || ix[k] == g.nx - 1 {
                w *= 0.5;
            }
        }
        total += w * field.trace[p];
    }
    total
}

/// Obstacle solve on a windowed grid whose far boundary carries the
/// extension of the current trace mass, refreshed `passes` times.
pub fn far_field_solve(
    grid: &ExtensionGrid,
    obstacle: &ObstacleSpec,
    solver: &SolverConfig,
    passes: usize,
) -> Result<SolutionField> {
    let op = assemble_operator(grid);
    let mut cfg = SolverConfig {
        boundary: BoundaryData::Zero,
        ..*solver
    };
    let mut field = ProjectedSor::new(&op, obstacle, &cfg)?.run()?;
    for _ in 0..passes {
        cfg.boundary = BoundaryData::PoissonTail {
            mass: trace_mass(&field),
        };
        let mut sor = ProjectedSor::new(&op, obstacle, &cfg)?;
        sor.set_initial(&field.values);
        field = sor.run()?;
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::obstacle::make_cap_obstacle;

    /// Asymptotic Kolmogorov tail `P(√n D > λ)`.
    fn kolmogorov_p(lambda: f64) -> f64 {
        let mut p = 0.0;
        for k in 1..100 {
            let kf = k as f64;
            p += 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        }
        p.clamp(0.0, 1.0)
    }

    fn cfg(alpha: f64, dt: f64, n_paths: usize) -> StableProcessConfig {
        StableProcessConfig {
            alpha,
            dt,
            n_paths,
            max_time: 10.0,
            seed: 11,
        }
    }

    #[test]
    fn cauchy_increments_pass_ks() {
        let c = cfg(1.0, 1.0, 1);
        let mut rng = c.path_rng(0);
        let m = 1_000_000;
        let mut xs: Vec<f64> = (0..m).map(|_| sample_increment(&c, 1, &mut rng)[0]).collect();
        xs.sort_by(f64::total_cmp);
        let cdf = |x: f64| 0.5 + x.atan() / std::f64::consts::PI;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / m as f64).abs().max(((i + 1) as f64 / m as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        let p = kolmogorov_p((m as f64).sqrt() * d);
        assert!(p > 0.01, "KS p = {p}");
        let median = xs[m / 2];
        assert!(median.abs() < 5e-3);
    }

    #[test]
    fn stability_under_summation() {
        for &alpha in &[0.5, 1.5] {
            let k = 4;
            let m = 200_000;
            let small = cfg(alpha, 0.25, 1);
            let big = cfg(alpha, 1.0, 1);
            let mut r1 = small.path_rng(1);
            let mut r2 = big.path_rng(2);
            let mut a: Vec<f64> = (0..m)
                .map(|_| (0..k).map(|_| sample_increment(&small, 1, &mut r1)[0]).sum())
                .collect();
            let mut b: Vec<f64> = (0..m).map(|_| sample_increment(&big, 1, &mut r2)[0]).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
            while i < m && j < m {
                if a[i] <= b[j] {
                    i += 1;
                } else {
                    j += 1;
                }
                d = d.max((i as f64 - j as f64).abs() / m as f64);
            }
            let lambda = d * (m as f64 / 2.0).sqrt();
            assert!(kolmogorov_p(lambda) > 0.01, "alpha={alpha}: D={d}");
        }
    }

    #[test]
    fn dilation_and_erosion() {
        let g = build_grid(1, 0.5, 1.0, 1.0, 17, 9).unwrap();
        let mut m = vec![false; 17];
        for v in m.iter_mut().take(10).skip(6) {
            *v = true;
        }
        let d = dilate_mask(&g, &m, 1);
        assert_eq!(d.iter().filter(|&&v| v).count(), 6);
        let e = dilate_mask(&g, &m, -1);
        assert_eq!(e.iter().filter(|&&v| v).count(), 2);
        assert_eq!(dilate_mask(&g, &m, 0), m);
    }

    #[test]
    fn immediate_stop_is_exact_and_zero_paths_rejected() {
        let g = build_grid(1, 0.5, 1.0, 1.0, 33, 17).unwrap();
        let o = make_cap_obstacle(1, 1.0, 0.2, 1.0, 0.6, 0.2).unwrap();
        let e = estimate_value(&g, &o, None, &cfg(1.0, 1e-3, 10), &[0.1], Strategy::StopImmediately).unwrap();
        assert_eq!(e.mean, o.eval_phi(&[0.1]));
        assert_eq!(e.se, 0.0);
        assert!(matches!(
            estimate_value(&g, &o, None, &cfg(1.0, 1e-3, 0), &[0.1], Strategy::NeverStop),
            Err(Error::ZeroPaths)
        ));
        assert!(matches!(
            estimate_value(&g, &o, None, &cfg(1.0, 1e-3, 10), &[0.1], Strategy::StopOnContact),
            Err(Error::MissingContactMask)
        ));
    }

    #[test]
    fn estimates_are_reproducible() {
        let g = build_grid(1, 0.5, 1.0, 1.0, 33, 17).unwrap();
        let o = make_cap_obstacle(1, 1.0, 0.2, 1.0, 0.6, 0.2).unwrap();
        let c = cfg(1.0, 1e-3, 2000);
        let a = estimate_value(&g, &o, None, &c, &[0.1], Strategy::FixedTime { t: 0.01 }).unwrap();
        let b = estimate_value(&g, &o, None, &c, &[0.1], Strategy::FixedTime { t: 0.01 }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_solution_is_a_martingale() {
        let g = build_grid(1, 0.5, 1.0, 1.0, 33, 17).unwrap();
        let field = SolutionField::new(g.clone(), vec![0.0; g.len()], true, 0.0, 0, 1.0, vec![]);
        let o = ObstacleSpec::constant(1, -1.0);
        let rep = martingale_check(&field, &o, &cfg(1.0, 1e-3, 1000), &[0.2], 1e-3, 1e-9).unwrap();
        assert_eq!(rep.gap, 0.0);
        assert!(rep.passed);
        let touching = ObstacleSpec::constant(1, 0.0);
        assert!(matches!(
            martingale_check(&field, &touching, &cfg(1.0, 1e-3, 10), &[0.2], 1e-3, 1e-9),
            Err(Error::NotInContinuation(_))
        ));
    }
}
