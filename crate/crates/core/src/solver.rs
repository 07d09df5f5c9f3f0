//! Finite-volume discretization of `L_a = -div(|y|^a ∇·)` on the upper half
//! of the extension box, and a projected SOR solver for the thin obstacle
//! complementarity problem on the trace plane.
//!
//! Rows are written in the symmetric upper-half form: the trace row covers
//! the half control volume `[0, hy/2]`. The full reflected flux balance at
//! a trace node, which is the discrete `lim |y|^a ∂_y ũ` slack, is twice
//! that row (see [`DiscreteOperator::trace_flux`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::SolutionField;
use crate::grid::ExtensionGrid;
use crate::obstacle::ObstacleSpec;

const PAR_THRESHOLD: usize = 40_000;

/// Dirichlet data on the fixed nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryData {
    #[default]
    Zero,
    /// `Re((x₁ + i y)^{3/2})`, principal branch: the half-space Signorini solution.
    HalfSpaceSignorini,
    /// `mass · P(x, y)` with `P` the Poisson kernel of the extension,
    /// the far field of a trace of total mass `mass` centred at the origin.
    PoissonTail { mass: f64 },
}

impl BoundaryData {
    pub fn eval(&self, grid: &ExtensionGrid, x: &[f64], y: f64) -> f64 {
        match *self {
            BoundaryData::Zero => 0.0,
            BoundaryData::HalfSpaceSignorini => signorini_half_space(x[0], y.abs()),
            BoundaryData::PoissonTail { mass } => {
                if mass == 0.0 {
                    return 0.0;
                }
                mass * poisson_kernel(grid.n, grid.s, x, y.abs())
            }
        }
    }
}

/// `Re((x + i y)^{3/2})` for `y >= 0`.
pub fn signorini_half_space(x: f64, y: f64) -> f64 {
    let r = x.hypot(y);
    if r == 0.0 {
        return 0.0;
    }
    let theta = y.atan2(x);
    r.powf(1.5) * (1.5 * theta).cos()
}

/// Poisson kernel `c_{n,s} y^{2s} / (|x|² + y²)^{(n+2s)/2}` of the extension.
pub fn poisson_kernel(n: usize, s: f64, x: &[f64], y: f64) -> f64 {
    use statrs::function::gamma::gamma;
    if y == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    let c = gamma((nf + 2.0 * s) / 2.0) / (std::f64::consts::PI.powf(nf / 2.0) * gamma(s));
    let r2: f64 = x.iter().take(n).map(|v| v * v).sum::<f64>() + y * y;
    c * y.powf(2.0 * s) / r2.powf((nf + 2.0 * s) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relaxation factor in `(0, 2)`.
    pub omega: f64,
    /// Complementarity tolerance relative to the data scale.
    pub tol: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub boundary: BoundaryData,
    /// Sweeps between residual evaluations.
    #[serde(default = "default_check_every")]
    pub check_every: usize,
    /// Residual checks without a 10% improvement before falling back to `ω = 1`.
    #[serde(default = "default_stagnation")]
    pub stagnation_checks: usize,
}

fn default_check_every() -> usize {
    10
}

fn default_stagnation() -> usize {
    100
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            omega: 1.8,
            tol: 1e-10,
            max_iters: 400_000,
            boundary: BoundaryData::Zero,
            check_every: default_check_every(),
            stagnation_checks: default_stagnation(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return invalid(format!("relaxation factor {} outside (0, 2)", self.omega));
        }
        if !(self.tol > 0.0) {
            return invalid("tolerance must be positive");
        }
        if self.check_every == 0 {
            return invalid("check_every must be positive");
        }
        Ok(())
    }

    /// Same configuration with `ω` set from the Jacobi spectral radius of
    /// the reflected box (unweighted estimate).
    pub fn with_tuned_omega(mut self, grid: &ExtensionGrid) -> Self {
        self.omega = tuned_omega(grid);
        self
    }
}

/// Near-optimal SOR factor `2 / (1 + sqrt(1 - μ²))` for the reflected box.
pub fn tuned_omega(grid: &ExtensionGrid) -> f64 {
    use std::f64::consts::PI;
    let wx = 2.0 / (grid.hx * grid.hx);
    let wy = 2.0 / (grid.hy * grid.hy);
    let cx = (PI * grid.hx / (2.0 * grid.x_box)).cos();
    let cy = (PI * grid.hy / (2.0 * grid.y_max)).cos();
    let nf = grid.n as f64;
    let mu = (nf * wx * cx + wy * cy) / (nf * wx + wy);
    (2.0 / (1.0 + (1.0 - mu * mu).sqrt())).min(1.99)
}

/// Structured stencil of the weighted operator.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: ExtensionGrid,
    /// Horizontal face coefficient per layer.
    pub cx: Vec<f64>,
    /// Vertical face coefficient between layers `j` and `j + 1`.
    pub cy: Vec<f64>,
    /// Dirichlet mask.
    pub fixed: Vec<bool>,
}

/// Assembles the weighted operator on `grid`.
pub fn assemble_operator(grid: &ExtensionGrid) -> DiscreteOperator {
    let cx = (0..grid.ny).map(|j| grid.x_face(j)).collect();
    let cy = (0..grid.ny - 1).map(|j| grid.y_face(j)).collect();
    let fixed = (0..grid.len()).map(|p| grid.is_fixed(p)).collect();
    DiscreteOperator {
        grid: grid.clone(),
        cx,
        cy,
        fixed,
    }
}

impl DiscreteOperator {
    /// Whether every neighbour of `idx` exists (true for all non-edge nodes).
    pub fn has_full_stencil(&self, idx: usize) -> bool {
        let g = &self.grid;
        let (ix, j) = g.unravel(idx);
        j < g.ny - 1 && (0..g.n).all(|k| ix[k] > 0 && ix[k] < g.nx - 1)
    }

    pub fn diag(&self, idx: usize) -> f64 {
        let j = idx / self.grid.layer_len();
        let mut d = 2.0 * self.grid.n as f64 * self.cx[j] + self.cy[j];
        if j > 0 {
            d += self.cy[j - 1];
        }
        d
    }

    /// Weighted sum of the neighbours, `Σ T_f u_nb`.
    #[inline]
    fn neighbour_sum(&self, u: &[f64], idx: usize) -> f64 {
        let g = &self.grid;
        let ll = g.layer_len();
        let j = idx / ll;
        let mut horiz = 0.0;
        for k in 0..g.n {
            let st = g.stride(k);
            horiz += u[idx - st] + u[idx + st];
        }
        let mut sum = self.cx[j] * horiz + self.cy[j] * u[idx + ll];
        if j > 0 {
            sum += self.cy[j - 1] * u[idx - ll];
        }
        sum
    }

    /// Row `idx` of `A u` in upper-half form; zero on edge nodes.
    pub fn apply_row(&self, u: &[f64], idx: usize) -> f64 {
        if !self.has_full_stencil(idx) {
            return 0.0;
        }
        self.diag(idx) * u[idx] - self.neighbour_sum(u, idx)
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len()).map(|p| self.apply_row(u, p)).collect()
    }

    /// Full reflected flux balance at a trace node (twice the half-cell row).
    pub fn trace_flux(&self, u: &[f64], idx: usize) -> f64 {
        2.0 * self.apply_row(u, idx)
    }

    /// Row entries `(column, coefficient)` including the diagonal.
    pub fn row_entries(&self, idx: usize) -> Vec<(usize, f64)> {
        let g = &self.grid;
        if !self.has_full_stencil(idx) {
            return Vec::new();
        }
        let ll = g.layer_len();
        let j = idx / ll;
        let mut out = vec![(idx, self.diag(idx))];
        for k in 0..g.n {
            let st = g.stride(k);
            out.push((idx - st, -self.cx[j]));
            out.push((idx + st, -self.cx[j]));
        }
        out.push((idx + ll, -self.cy[j]));
        if j > 0 {
            out.push((idx - ll, -self.cy[j - 1]));
        }
        out
    }

    /// Weighted measure `hx^n ∫ t^a` of the upper-half control volume of `idx`.
    pub fn cell_measure(&self, idx: usize) -> f64 {
        let g = &self.grid;
        g.layer_weight[idx / g.layer_len()] * g.hx.powi(g.n as i32)
    }

    /// `max |(A f)_i| / cell_measure(i)` over full-stencil nodes with
    /// `y ∈ [y_lo, y_hi]` and `|x_k| <= x_max`: a pointwise estimate of
    /// `|y|^{-a} L_a f`.
    pub fn consistency_residual(
        &self,
        f: impl Fn(&[f64], f64) -> f64,
        x_max: f64,
        y_lo: f64,
        y_hi: f64,
    ) -> f64 {
        let g = &self.grid;
        let u: Vec<f64> = (0..g.len())
            .map(|idx| {
                let (x, y) = g.node_point(idx);
                f(&x[..g.n], y)
            })
            .collect();
        let eps = 1e-12 * g.y_max.max(g.x_box);
        (0..g.len())
            .filter(|&idx| {
                let (x, y) = g.node_point(idx);
                self.has_full_stencil(idx)
                    && y >= y_lo - eps
                    && y <= y_hi + eps
                    && x[..g.n].iter().all(|c| c.abs() <= x_max + eps)
            })
            .map(|idx| (self.apply_row(&u, idx) / self.cell_measure(idx)).abs())
            .fold(0.0, f64::max)
    }

    /// Dirichlet energy `½ Σ_faces T_f (u_p - u_q)²` of the upper half.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let g = &self.grid;
        let ll = g.layer_len();
        let mut e = 0.0;
        for idx in 0..u.len() {
            let (ix, j) = g.unravel(idx);
            for k in 0..g.n {
                if ix[k] + 1 < g.nx {
                    let d = u[idx + g.stride(k)] - u[idx];
                    e += self.cx[j] * d * d;
                }
            }
            if j + 1 < g.ny {
                let d = u[idx + ll] - u[idx];
                e += self.cy[j] * d * d;
            }
        }
        0.5 * e
    }
}

/// Projected successive over-relaxation with red-black ordering.
pub struct ProjectedSor<'a> {
    op: &'a DiscreteOperator,
    /// Obstacle on the free trace nodes (`-inf` elsewhere in the layer).
    lower: Vec<f64>,
    u: Vec<f64>,
    colors: [Vec<u32>; 2],
    omega: f64,
    cfg: SolverConfig,
    scale: f64,
    sweeps: usize,
    fell_back: bool,
}

struct SharedSlice(*mut f64);
unsafe impl Send for SharedSlice {}
unsafe impl Sync for SharedSlice {}

impl SharedSlice {
    fn get(&self) -> *mut f64 {
        self.0
    }
}

impl<'a> ProjectedSor<'a> {
    pub fn new(op: &'a DiscreteOperator, obstacle: &ObstacleSpec, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let g = &op.grid;
        if obstacle.n != g.n {
            return invalid("obstacle dimension differs from grid dimension");
        }
        let ll = g.layer_len();
        let mut u = vec![0.0; g.len()];
        let mut lower = vec![f64::NEG_INFINITY; ll];
        let mut scale: f64 = 0.0;
        for (p, lo) in lower.iter_mut().enumerate() {
            let x = g.trace_point(p);
            let phi = obstacle.eval_phi(&x[..g.n]);
            if !op.fixed[p] {
                *lo = phi;
                scale = scale.max(phi.max(0.0));
            }
        }
        for idx in 0..g.len() {
            if op.fixed[idx] {
                let (x, y) = g.node_point(idx);
                u[idx] = cfg.boundary.eval(g, &x[..g.n], y);
                scale = scale.max(u[idx].abs());
            }
        }
        if scale == 0.0 {
            scale = 1.0;
        }
        // Fixed trace nodes must not sit below the obstacle.
        for p in 0..ll {
            if op.fixed[p] {
                let x = g.trace_point(p);
                let phi = obstacle.eval_phi(&x[..g.n]);
                if u[p] < phi - 1e-12 * scale {
                    return Err(Error::InfeasibleBoundary {
                        node: p,
                        data: u[p],
                        obstacle: phi,
                    });
                }
            } else {
                u[p] = lower[p].max(0.0);
            }
        }
        let mut colors = [Vec::new(), Vec::new()];
        for idx in 0..g.len() {
            if op.fixed[idx] {
                continue;
            }
            let (ix, j) = g.unravel(idx);
            let parity = (ix[..g.n].iter().sum::<usize>() + j) % 2;
            colors[parity].push(idx as u32);
        }
        Ok(ProjectedSor {
            op,
            lower,
            u,
            colors,
            omega: cfg.omega,
            cfg: *cfg,
            scale,
            sweeps: 0,
            fell_back: false,
        })
    }

    /// Replaces the iterate on free nodes (fixed nodes keep their data);
    /// trace values are lifted onto the obstacle.
    pub fn set_initial(&mut self, u0: &[f64]) {
        for idx in 0..self.u.len() {
            if !self.op.fixed[idx] {
                let mut v = u0[idx];
                if idx < self.lower.len() {
                    v = v.max(self.lower[idx]);
                }
                self.u[idx] = v;
            }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn energy(&self) -> f64 {
        self.op.energy(&self.u)
    }

    /// One red sweep followed by one black sweep.
    pub fn sweep(&mut self) {
        for c in 0..2 {
            self.relax_color(c);
        }
        self.sweeps += 1;
    }

    fn relax_color(&mut self, c: usize) {
        let op = self.op;
        let omega = self.omega;
        let ll = self.lower.len();
        let lower = &self.lower;
        let nodes = &self.colors[c];
        let ptr = SharedSlice(self.u.as_mut_ptr());
        let len = self.u.len();
        let update = |chunk: &[u32]| {
            // SAFETY: nodes of one colour only read nodes of the other
            // colour, so the writes below never alias a concurrent read or
            // write; all indices are < len.
            let u = unsafe { std::slice::from_raw_parts(ptr.get() as *const f64, len) };
            for &p in chunk {
                let p = p as usize;
                let gs = op.neighbour_sum(u, p) / op.diag(p);
                let old = u[p];
                let mut new = old + omega * (gs - old);
                if p < ll {
                    new = new.max(lower[p]);
                }
                unsafe { *ptr.get().add(p) = new };
            }
        };
        if len >= PAR_THRESHOLD {
            nodes.par_chunks(4096).for_each(update);
        } else {
            update(nodes);
        }
    }

    /// Max complementarity residual, relative to the data scale.
    ///
    /// Free non-trace nodes contribute `|(Au)_p| / A_pp`; free trace nodes
    /// contribute `|min(u - φ, (Au)_p / A_pp)|`.
    pub fn residual(&self) -> f64 {
        let op = self.op;
        let u = &self.u;
        let ll = self.lower.len();
        let lower = &self.lower;
        let eval = |&p: &u32| {
            let p = p as usize;
            let rho = (op.diag(p) * u[p] - op.neighbour_sum(u, p)) / op.diag(p);
            if p < ll {
                (u[p] - lower[p]).min(rho).abs()
            } else {
                rho.abs()
            }
        };
        let max = |v: &Vec<u32>| -> f64 {
            if u.len() >= PAR_THRESHOLD {
                v.par_iter().map(eval).reduce(|| 0.0, f64::max)
            } else {
                v.iter().map(eval).fold(0.0, f64::max)
            }
        };
        max(&self.colors[0]).max(max(&self.colors[1])) / self.scale
    }

    pub fn run(mut self) -> Result<SolutionField> {
        let mut history = Vec::new();
        let mut res = self.residual();
        history.push(res);
        let mut best_at_window = res;
        let mut checks_since = 0usize;
        while res >= self.cfg.tol {
            if self.sweeps >= self.cfg.max_iters {
                return Err(Error::NonConvergence {
                    iterations: self.sweeps,
                    residual: res,
                    history,
                });
            }
            for _ in 0..self.cfg.check_every {
                self.sweep();
            }
            res = self.residual();
            history.push(res);
            checks_since += 1;
            if res < 0.9 * best_at_window {
                best_at_window = res;
                checks_since = 0;
            } else if checks_since >= self.cfg.stagnation_checks && !self.fell_back && self.omega != 1.0 {
                self.omega = 1.0;
                self.fell_back = true;
                best_at_window = res;
                checks_since = 0;
            }
        }
        let omega = self.omega;
        let sweeps = self.sweeps;
        Ok(SolutionField::new(
            self.op.grid.clone(),
            self.u,
            true,
            res,
            sweeps,
            omega,
            history,
        ))
    }
}

/// Solves the discrete extension obstacle problem.
pub fn solve_obstacle(
    op: &DiscreteOperator,
    obstacle: &ObstacleSpec,
    cfg: &SolverConfig,
) -> Result<SolutionField> {
    ProjectedSor::new(op, obstacle, cfg)?.run()
}

/// Outcome of the vertical monotonicity test `ũ(x, y + hy) <= ũ(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub max_increase: f64,
    pub worst_node: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Largest forward difference `ũ(x, y + hy) - ũ(x, y)` over the grid.
pub fn monotonicity_check(field: &SolutionField, tol: f64) -> MonotonicityReport {
    let g = &field.grid;
    let ll = g.layer_len();
    let mut worst = (f64::NEG_INFINITY, 0usize);
    for idx in 0..g.len() - ll {
        let d = field.values[idx + ll] - field.values[idx];
        if d > worst.0 {
            worst = (d, idx);
        }
    }
    MonotonicityReport {
        max_increase: worst.0,
        worst_node: worst.1,
        tol,
        passed: worst.0 <= tol,
    }
}
