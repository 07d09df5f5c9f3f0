//! Radial ladders of the functionals and their extrapolation to `r → 0`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::bulk::{bulk_integrals, bulk_pairing};
use super::sphere::{surface_integral, DEFAULT_DENSITY};
use super::CenteredField;
use crate::blowup::QuadraticBlowup;
use crate::error::{Error, Result};

/// Default frequency correction constant, calibrated on the cap family.
pub const DEFAULT_C0: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    pub c0: f64,
    /// Obstacle regularity exponent `γ` in the truncation power.
    pub gamma: f64,
    /// Polar cells per grid spacing of arc length.
    pub angular_density: f64,
    pub ladder_ratio: f64,
    /// Upper cap on the ladder's largest radius.
    pub r_hat: f64,
    /// Smallest radius, in horizontal grid spacings.
    pub min_cells: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            c0: DEFAULT_C0,
            gamma: 1.0,
            angular_density: DEFAULT_DENSITY,
            ladder_ratio: 2.0,
            r_hat: 0.5,
            min_cells: 4.0,
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 >= 0.0) || !(self.gamma > 0.0) || !(self.angular_density > 0.0) {
            return Err(Error::InvalidParameter("diagnostics constants must be positive".into()));
        }
        if !(self.ladder_ratio > 1.0) || !(self.r_hat > 0.0) || !(self.min_cells >= 1.0) {
            return Err(Error::InvalidParameter("ladder needs ratio > 1, r_hat > 0, min_cells >= 1".into()));
        }
        Ok(())
    }

    /// Ratio between a rung and the auxiliary radii used for `d log H / d log r`.
    fn aux_factor(&self) -> f64 {
        self.ladder_ratio.powf(0.25)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiBranch {
    /// `H <= r^{n+a+4+2γ}`: `Φ = (1 + C0 r)(n + a + 4 + 2γ)`.
    Power,
    /// `Φ = (1 + C0 r) d log H / d log r`.
    Logarithmic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialRow {
    pub r: f64,
    pub h: f64,
    pub h_err: f64,
    pub g: f64,
    pub g_err: f64,
    pub d: f64,
    pub d_err: f64,
    pub i_surface: f64,
    pub i_surface_err: f64,
    pub i_bulk: f64,
    /// Almgren quotient `r D / H`; absent when `H` vanishes.
    pub n_freq: Option<f64>,
    /// `Φ / (1 + C0 r)`.
    pub psi: f64,
    /// Quadrature error of `psi` propagated from the two auxiliary `H` values.
    #[serde(default)]
    pub psi_err: f64,
    pub phi_branch: PhiBranch,
    pub w: f64,
    pub d_r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialDiagnostics {
    pub n: usize,
    pub a: f64,
    pub center: Vec<f64>,
    pub c0: f64,
    pub gamma: f64,
    /// Rows ordered by decreasing radius.
    pub rows: Vec<RadialRow>,
}

/// Extrapolated `r → 0` value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limit {
    pub value: f64,
    pub error: f64,
    /// Observed convergence order when the three finest rungs are consistent.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxPair {
    pub surface: f64,
    pub surface_err: f64,
    pub bulk: f64,
}

/// Geometric ladder from `min(max_radius, r_hat)` down to `min_cells · hx`.
pub fn radius_ladder(cf: &CenteredField, cfg: &DiagnosticsConfig) -> Vec<f64> {
    let top = cf.max_radius().min(cfg.r_hat) / cfg.aux_factor() * (1.0 - 1e-12);
    let bottom = cfg.min_cells * cf.grid.hx * (1.0 - 1e-9);
    let mut out = Vec::new();
    let mut r = top;
    while r >= bottom && out.len() < 64 {
        out.push(r);
        r /= cfg.ladder_ratio;
    }
    out
}

fn h_at(cf: &CenteredField, r: f64, density: f64) -> Result<(f64, f64)> {
    surface_integral(cf, r, density, |_, v, _| v * v)
}

fn normal_derivative(n: usize, node: &super::SurfaceNode, g: &[f64; 3]) -> f64 {
    (0..=n).map(|k| g[k] * node.normal[k]).sum()
}

/// `I(r)` by surface quadrature and as `D - Σ v (A v)` over the ball.
pub fn flux_i(cf: &CenteredField, r: f64) -> Result<FluxPair> {
    let n = cf.n();
    let (surface, surface_err) =
        surface_integral(cf, r, DEFAULT_DENSITY, |node, v, g| v * normal_derivative(n, node, g))?;
    let d = bulk_integrals(cf, r)?.d;
    let bulk = d - bulk_pairing(cf, r)?;
    Ok(FluxPair {
        surface,
        surface_err,
        bulk,
    })
}

fn degenerate(h: f64) -> bool {
    !(h > 1e-280)
}

/// Almgren quotient `N(r) = r D(r) / H(r)`.
pub fn frequency_n(cf: &CenteredField, r: f64) -> Result<f64> {
    let (h, _) = h_at(cf, r, DEFAULT_DENSITY)?;
    if degenerate(h) {
        return Err(Error::DegenerateH { r, h });
    }
    Ok(r * bulk_integrals(cf, r)?.d / h)
}

fn phi_exponent(n: usize, a: f64, gamma: f64) -> f64 {
    n as f64 + a + 4.0 + 2.0 * gamma
}

/// `Φ / (1 + C0 r)`, its quadrature error and the branch taken.
fn psi_at(cf: &CenteredField, r: f64, h: f64, cfg: &DiagnosticsConfig) -> Result<(f64, f64, PhiBranch)> {
    let p = phi_exponent(cf.n(), cf.a(), cfg.gamma);
    if h <= r.powf(p) {
        return Ok((p, 0.0, PhiBranch::Power));
    }
    let e = cfg.aux_factor();
    let log_m = |rr: f64| -> Result<(f64, f64)> {
        let (hh, err) = h_at(cf, rr, cfg.angular_density)?;
        let m = hh.max(rr.powf(p));
        Ok((m.ln(), err / m))
    };
    let (hi, hi_err) = log_m(r * e)?;
    let (lo, lo_err) = log_m(r / e)?;
    let denom = 2.0 * e.ln();
    Ok(((hi - lo) / denom, (hi_err + lo_err) / denom, PhiBranch::Logarithmic))
}

/// Truncated frequency `Φ(r)` at a single radius.
pub fn truncated_phi(cf: &CenteredField, r: f64, cfg: &DiagnosticsConfig) -> Result<f64> {
    let (h, _) = h_at(cf, r, cfg.angular_density)?;
    let (psi, _, _) = psi_at(cf, r, h, cfg)?;
    Ok((1.0 + cfg.c0 * r) * psi)
}

/// Weiss energy `W(r) = D / r^{n+a+3} - 2 H / r^{n+a+4}`.
pub fn weiss_w(cf: &CenteredField, r: f64) -> Result<f64> {
    let k = cf.n() as f64 + cf.a();
    let (h, _) = h_at(cf, r, DEFAULT_DENSITY)?;
    let d = bulk_integrals(cf, r)?.d;
    Ok(d / r.powf(k + 3.0) - 2.0 * h / r.powf(k + 4.0))
}

/// Monneau functional `∫_{∂B_r} |y|^a (v - q)² / r^{n+a+4}`.
pub fn monneau_m(cf: &CenteredField, q: &QuadraticBlowup, r: f64) -> Result<f64> {
    let n = cf.n();
    let c = cf.center;
    let (m, _) = surface_integral(cf, r, DEFAULT_DENSITY, |node, v, _| {
        let mut x = [0.0; 2];
        for k in 0..n {
            x[k] = node.x[k] - c[k];
        }
        (v - q.eval(&x[..n], node.y)).powi(2)
    })?;
    Ok(m / r.powf(n as f64 + cf.a() + 4.0))
}

/// Evaluates every functional on the default ladder.
pub fn radial_diagnostics(cf: &CenteredField, cfg: &DiagnosticsConfig) -> Result<RadialDiagnostics> {
    cfg.validate()?;
    let ladder = radius_ladder(cf, cfg);
    let n = cf.n();
    let k = n as f64 + cf.a();
    let mut rows = Vec::with_capacity(ladder.len());
    for &r in &ladder {
        let (h, h_err) = h_at(cf, r, cfg.angular_density)?;
        let bulk = bulk_integrals(cf, r)?;
        let (i_surface, i_surface_err) =
            surface_integral(cf, r, cfg.angular_density, |node, v, g| v * normal_derivative(n, node, g))?;
        let i_bulk = bulk.d - bulk_pairing(cf, r)?;
        let (psi, psi_err, phi_branch) = psi_at(cf, r, h, cfg)?;
        rows.push(RadialRow {
            r,
            h,
            h_err,
            g: bulk.g,
            g_err: bulk.g_err,
            d: bulk.d,
            d_err: bulk.d_err,
            i_surface,
            i_surface_err,
            i_bulk,
            n_freq: (!degenerate(h)).then(|| r * bulk.d / h),
            psi,
            psi_err,
            phi_branch,
            w: bulk.d / r.powf(k + 3.0) - 2.0 * h / r.powf(k + 4.0),
            d_r: (h / r.powf(k)).sqrt(),
        });
    }
    Ok(RadialDiagnostics {
        n,
        a: cf.a(),
        center: cf.center[..n].to_vec(),
        c0: cfg.c0,
        gamma: cfg.gamma,
        rows,
    })
}

impl RadialDiagnostics {
    pub fn phi(&self) -> Vec<f64> {
        self.phi_with(self.c0)
    }

    pub fn phi_with(&self, c0: f64) -> Vec<f64> {
        self.rows.iter().map(|row| (1.0 + c0 * row.r) * row.psi).collect()
    }

    /// Largest decrease of `Φ` as `r` grows; zero for a monotone ladder.
    pub fn phi_violation(&self, c0: f64) -> f64 {
        let phi = self.phi_with(c0);
        phi.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max)
    }

    /// Largest increase of `Φ` as `r` shrinks beyond `slack` times the
    /// summed quadrature errors of the two rungs; non-positive when monotone.
    pub fn phi_excess(&self, c0: f64, slack: f64) -> f64 {
        let phi = self.phi_with(c0);
        let err: Vec<f64> = self.rows.iter().map(|row| (1.0 + c0 * row.r) * row.psi_err).collect();
        (1..phi.len())
            .map(|k| phi[k] - phi[k - 1] - slack * (err[k] + err[k - 1]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest `C_W >= 0` with `W(r) >= -C_W r^γ` on the ladder.
    pub fn weiss_constant(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| (-row.w / row.r.powf(self.gamma)).max(0.0))
            .fold(0.0, f64::max)
    }

    fn require_rungs(&self) -> Result<()> {
        if self.rows.len() < 3 {
            return Err(Error::TooFewRadii {
                have: self.rows.len(),
                need: 3,
            });
        }
        Ok(())
    }

    /// `Φ(0+)`, extrapolated from `Φ / (1 + C0 r)`.
    pub fn phi_limit(&self) -> Result<Limit> {
        self.require_rungs()?;
        let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.r, r.psi)).collect();
        extrapolate_to_zero(&pts)
    }

    /// `N(0+)`.
    pub fn n_limit(&self) -> Result<Limit> {
        self.require_rungs()?;
        let mut pts = Vec::new();
        for row in &self.rows {
            match row.n_freq {
                Some(v) => pts.push((row.r, v)),
                None => return Err(Error::DegenerateH { r: row.r, h: row.h }),
            }
        }
        extrapolate_to_zero(&pts)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "r,H,H_err,G,D,D_err,I_surface,I_bulk,N,Phi,branch,W,d_r")?;
        for (row, phi) in self.rows.iter().zip(self.phi()) {
            let nf = row.n_freq.map(|v| format!("{v:.12e}")).unwrap_or_else(|| "nan".into());
            let br = match row.phi_branch {
                PhiBranch::Power => "power",
                PhiBranch::Logarithmic => "log",
            };
            writeln!(
                w,
                "{:.12e},{:.12e},{:.3e},{:.12e},{:.12e},{:.3e},{:.12e},{:.12e},{},{:.12e},{},{:.12e},{:.12e}",
                row.r, row.h, row.h_err, row.g, row.d, row.d_err, row.i_surface, row.i_bulk, nf, phi, br, row.w, row.d_r
            )?;
        }
        Ok(())
    }
}

/// Smallest `C_M >= 0` with `M(r_k) - M(r_{k+1}) <= (C_M/γ)(r_k^γ - r_{k+1}^γ)`
/// for consecutive `(r, M)` pairs ordered by decreasing radius.
pub fn monneau_constant(ladder: &[(f64, f64)], gamma: f64) -> f64 {
    ladder
        .windows(2)
        .map(|w| {
            let dr = w[0].0.powf(gamma) - w[1].0.powf(gamma);
            (gamma * (w[0].1 - w[1].1) / dr).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Richardson extrapolation on the three smallest radii of a geometric ladder.
pub fn extrapolate_to_zero(points: &[(f64, f64)]) -> Result<Limit> {
    if points.len() < 3 {
        return Err(Error::TooFewRadii {
            have: points.len(),
            need: 3,
        });
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let k = pts.len();
    let (r1, f1) = pts[k - 3];
    let (r2, f2) = pts[k - 2];
    let (_, f3) = pts[k - 1];
    let q = r1 / r2;
    let d1 = f1 - f2;
    let d2 = f2 - f3;
    let scale = f1.abs().max(f2.abs()).max(f3.abs()).max(1e-300);
    if d2.abs() <= 1e-13 * scale {
        return Ok(Limit {
            value: f3,
            error: d1.abs().max(d2.abs()).max(1e-15 * scale),
            order: None,
        });
    }
    let rho = d1 / d2;
    if rho > 1.0 + 1e-9 {
        let p = (rho.ln() / q.ln()).clamp(1.0, 3.0);
        let corr = d2 / (q.powf(p) - 1.0);
        Ok(Limit {
            value: f3 - corr,
            error: corr.abs(),
            order: Some(p),
        })
    } else {
        Ok(Limit {
            value: f3,
            error: d1.abs().max(d2.abs()),
            order: None,
        })
    }
}

/// Smallest `C0 ∈ {1, 2, 4, …, 64}` making every ladder's `Φ` monotone to
/// within `tol` (relative to `Φ(0+)`).
pub fn calibrate_c0(diags: &[RadialDiagnostics], tol: f64) -> Option<f64> {
    (0..7).map(|k| (1u32 << k) as f64).find(|&c0| {
        diags.iter().all(|d| {
            let scale = d.rows.iter().map(|r| r.psi.abs()).fold(1.0, f64::max);
            d.phi_violation(c0) <= tol * scale
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn extrapolation_exact_for_linear_error() {
        let pts: Vec<(f64, f64)> = (0..4).map(|k| {
            let r = 0.5f64 / 2f64.powi(k);
            (r, 3.0 + 0.7 * r)
        }).collect();
        let l = extrapolate_to_zero(&pts).unwrap();
        assert!((l.value - 3.0).abs() < 1e-12);
        assert!((l.order.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn monneau_constant_bounds_every_step() {
        // M = 3 r^2: steps of 3(r_k² - r_{k+1}²) over r_k - r_{k+1} give 3(r_k + r_{k+1}).
        let ladder: Vec<(f64, f64)> = [0.4, 0.2, 0.1].iter().map(|&r| (r, 3.0 * r * r)).collect();
        assert!((monneau_constant(&ladder, 1.0) - 3.0 * 0.6).abs() < 1e-12);
        let rising: Vec<(f64, f64)> = [0.4, 0.2].iter().map(|&r| (r, -r)).collect();
        assert_eq!(monneau_constant(&rising, 1.0), 0.0);
    }

    #[test]
    fn extrapolation_constant_sequence() {
        let pts = [(0.4, 5.0), (0.2, 5.0), (0.1, 5.0)];
        let l = extrapolate_to_zero(&pts).unwrap();
        assert_eq!(l.value, 5.0);
    }

    #[test]
    fn too_few_radii() {
        assert!(matches!(
            extrapolate_to_zero(&[(0.1, 1.0), (0.05, 1.0)]),
            Err(Error::TooFewRadii { have: 2, need: 3 })
        ));
    }

    #[test]
    fn quadratic_profile_has_frequency_two() {
        for &s in &[0.25, 0.5, 0.75] {
            let g = build_grid(1, s, 1.0, 1.0, 129, 65).unwrap();
            let a = g.a;
            let q = QuadraticBlowup::paraboloid(1, a);
            let cf = CenteredField::from_fn(&g, &[0.0], |x, y| 10.0 * q.eval(x, y)).unwrap();
            let cfg = DiagnosticsConfig::default();
            let diag = radial_diagnostics(&cf, &cfg).unwrap();
            let nl = diag.n_limit().unwrap();
            assert!((nl.value - 2.0).abs() < 0.02, "s={s}: N(0+)={:?}", nl);
            for row in &diag.rows {
                // 2-homogeneous: Φ/(1+C0 r) = n + a + 4 on the log branch
                assert_eq!(row.phi_branch, PhiBranch::Logarithmic);
                assert!((row.psi - (1.0 + a + 4.0)).abs() < 0.02, "s={s}: {}", row.psi);
                assert!((row.i_surface - row.d).abs() < 0.03 * row.d);
                let m = monneau_m(&cf, &q.scaled(10.0), row.r).unwrap();
                assert!(m < 1e-4 * row.h / row.r.powf(1.0 + a + 4.0));
            }
        }
    }

    #[test]
    fn zero_field_takes_power_branch() {
        let g = build_grid(1, 0.5, 1.0, 1.0, 65, 33).unwrap();
        let cf = CenteredField::from_fn(&g, &[0.0], |_, _| 0.0).unwrap();
        let cfg = DiagnosticsConfig::default();
        let diag = radial_diagnostics(&cf, &cfg).unwrap();
        for row in &diag.rows {
            assert_eq!(row.phi_branch, PhiBranch::Power);
            assert_eq!(row.psi, 1.0 + 0.0 + 4.0 + 2.0);
        }
        assert!(matches!(frequency_n(&cf, 0.2), Err(Error::DegenerateH { .. })));
        assert!(diag.n_limit().is_err());
    }

    #[test]
    fn calibration_picks_smallest_monotone_constant() {
        let mk = |psi: [f64; 3]| RadialDiagnostics {
            n: 1,
            a: 0.0,
            center: vec![0.0],
            c0: 1.0,
            gamma: 1.0,
            rows: [0.4, 0.2, 0.1]
                .iter()
                .zip(psi)
                .map(|(&r, p)| RadialRow {
                    r,
                    h: 1.0,
                    h_err: 0.0,
                    g: 0.0,
                    g_err: 0.0,
                    d: 0.0,
                    d_err: 0.0,
                    i_surface: 0.0,
                    i_surface_err: 0.0,
                    i_bulk: 0.0,
                    n_freq: None,
                    psi: p,
                    psi_err: 0.1,
                    phi_branch: PhiBranch::Logarithmic,
                    w: 0.0,
                    d_r: 0.0,
                })
                .collect(),
        };
        // (1 + 0.4c)·5 >= (1 + 0.2c)·7 needs c >= 10/3.
        let d = mk([5.0, 7.0, 7.0]);
        // c0 = 1: Φ = 7, 8.4, 7.7 with errors 0.14, 0.12, 0.11.
        assert!((d.phi_excess(1.0, 0.0) - 1.4).abs() < 1e-12);
        assert!((d.phi_excess(1.0, 3.0) - (1.4 - 3.0 * 0.26)).abs() < 1e-12);
        assert!(d.phi_excess(4.0, 0.0) < 0.0);
        assert_eq!(calibrate_c0(&[d], 0.0), Some(4.0));
    }
}
