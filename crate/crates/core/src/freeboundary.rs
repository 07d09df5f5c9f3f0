//! Contact sets, free boundary detection and classification of free
//! boundary points by their frequency limit.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blowup::QuadraticBlowup;
use crate::diagnostics::{
    build_v_at_node, nondegeneracy_scan_field, radial_diagnostics, sphere_nodes, CenteredField, DiagnosticsConfig,
    Limit, RadialDiagnostics,
};
use crate::error::{invalid, Error, Result};
use crate::field::SolutionField;
use crate::grid::ExtensionGrid;
use crate::obstacle::{ObstacleParams, ObstacleSpec};
use crate::solver::{assemble_operator, solve_obstacle, SolverConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Trace-layer masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Masks {
    pub contact: Vec<bool>,
    pub boundary: Vec<bool>,
}

impl Masks {
    pub fn contact_count(&self) -> usize {
        self.contact.iter().filter(|&&c| c).count()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.boundary.len()).filter(|&p| self.boundary[p]).collect()
    }
}

/// `max(φ⁺, |boundary data|)` over the trace and fixed nodes; the scale the
/// solver residual is measured against.
pub fn data_scale(field: &SolutionField, obstacle: &ObstacleSpec) -> f64 {
    let g = &field.grid;
    let mut scale: f64 = 0.0;
    for p in 0..g.layer_len() {
        if g.is_fixed(p) {
            scale = scale.max(field.values[p].abs());
        } else {
            scale = scale.max(obstacle.eval_phi(&g.trace_point(p)[..g.n]).max(0.0));
        }
    }
    let ll = g.layer_len();
    for p in 0..ll {
        scale = scale.max(field.values[(g.ny - 1) * ll + p].abs());
    }
    if scale > 0.0 {
        scale
    } else {
        1.0
    }
}

fn trace_neighbours(g: &ExtensionGrid, p: usize) -> impl Iterator<Item = usize> + '_ {
    let (ix, _) = g.unravel(p);
    (0..g.n).flat_map(move |k| {
        let st = g.stride(k);
        let lo = (ix[k] > 0).then(|| p - st);
        let hi = (ix[k] + 1 < g.nx).then(|| p + st);
        lo.into_iter().chain(hi)
    })
}

/// Contact nodes `u - φ <= contact_tol` among free trace nodes, and those
/// with a free non-contact neighbour.
pub fn extract_contact_and_boundary(field: &SolutionField, obstacle: &ObstacleSpec, contact_tol: f64) -> Result<Masks> {
    if !field.converged {
        return invalid("contact extraction needs a converged field");
    }
    if !(contact_tol >= 0.0) {
        return invalid("contact_tol must be nonnegative");
    }
    let g = &field.grid;
    let ll = g.layer_len();
    let free: Vec<bool> = (0..ll).map(|p| !g.is_fixed(p)).collect();
    let contact: Vec<bool> = (0..ll)
        .map(|p| free[p] && field.trace[p] - obstacle.eval_phi(&g.trace_point(p)[..g.n]) <= contact_tol)
        .collect();
    let boundary = (0..ll)
        .map(|p| contact[p] && trace_neighbours(g, p).any(|q| free[q] && !contact[q]))
        .collect();
    Ok(Masks { contact, boundary })
}

/// Fraction of contact nodes among trace nodes in `B_r(x0)`.
pub fn density_ratio(grid: &ExtensionGrid, masks: &Masks, x0: &[f64], r: f64) -> f64 {
    let mut inside = 0usize;
    let mut hits = 0usize;
    for p in 0..grid.layer_len() {
        let x = grid.trace_point(p);
        let d2: f64 = (0..grid.n).map(|k| (x[k] - x0[k]).powi(2)).sum();
        if d2 <= r * r * (1.0 + 1e-12) {
            inside += 1;
            if masks.contact[p] {
                hits += 1;
            }
        }
    }
    if inside == 0 {
        0.0
    } else {
        hits as f64 / inside as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    Regular,
    Singular,
    Unresolved,
}

/// Classification of a homogeneity estimate `m`.
pub fn classify_homogeneity(m: f64, s: f64, class_tol: f64) -> PointClass {
    let dr = (m - (1.0 + s)).abs();
    let ds = (m - 2.0).abs();
    if dr <= class_tol && dr <= ds {
        PointClass::Regular
    } else if ds <= class_tol {
        PointClass::Singular
    } else {
        PointClass::Unresolved
    }
}

/// `m̂` from the `N(0+)` extrapolation, with `Φ(0+)` alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: PointClass,
    pub m_hat: Option<f64>,
    pub n_limit: Option<Limit>,
    pub phi_limit: Option<Limit>,
}

/// Classifies from a radial ladder; fewer than four radii is `Unresolved`.
pub fn classify(diag: &RadialDiagnostics, s: f64, class_tol: f64) -> Classification {
    let n_limit = diag.n_limit().ok();
    let phi_limit = diag.phi_limit().ok();
    let m_hat = n_limit.map(|l| l.value);
    let class = match m_hat {
        Some(m) if diag.rows.len() >= 4 && m.is_finite() => classify_homogeneity(m, s, class_tol),
        _ => PointClass::Unresolved,
    };
    Classification {
        class,
        m_hat,
        n_limit,
        phi_limit,
    }
}

/// Least-squares `p₂` together with its `ω`-residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P2Fit {
    pub blowup: QuadraticBlowup,
    /// `sup_{0 < |x - x0| <= r_fit} |v(x, 0) - ⟨Ax, x⟩| / |x - x0|²`.
    pub residual: f64,
    pub r_fit: f64,
}

/// Fits `⟨A(x - x0), x - x0⟩` to the trace of `v` on `r_fit/2 <= |x - x0| <= r_fit`.
pub fn fit_p2(cf: &CenteredField, r_fit: f64) -> Result<P2Fit> {
    let g = &cf.grid;
    let n = g.n;
    cf.check_radius(r_fit)?;
    let nb = if n == 1 { 1 } else { 3 };
    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut rhs = Vec::new();
    let mut inner = Vec::new();
    for p in 0..g.layer_len() {
        let x = g.trace_point(p);
        let d = [x[0] - cf.center[0], if n == 2 { x[1] - cf.center[1] } else { 0.0 }];
        let r2 = d[0] * d[0] + d[1] * d[1];
        if r2 > r_fit * r_fit * (1.0 + 1e-12) || r2 == 0.0 {
            continue;
        }
        inner.push((d, r2, cf.values[p]));
        if r2 >= 0.25 * r_fit * r_fit * (1.0 - 1e-12) {
            rows.push(if n == 1 {
                [d[0] * d[0], 0.0, 0.0]
            } else {
                [d[0] * d[0], 2.0 * d[0] * d[1], d[1] * d[1]]
            });
            rhs.push(cf.values[p]);
        }
    }
    if rows.len() < nb {
        return Err(Error::RankDeficientFit);
    }
    let m = DMatrix::from_fn(rows.len(), nb, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-10 * smax) {
        return Err(Error::RankDeficientFit);
    }
    let coef = svd.solve(&b, 1e-12 * smax).map_err(|_| Error::RankDeficientFit)?;
    let raw = if n == 1 {
        [[coef[0], 0.0], [0.0, 0.0]]
    } else {
        [[coef[0], coef[1]], [coef[1], coef[2]]]
    };
    let blowup = QuadraticBlowup::new(n, g.a, raw).project_psd(g.a);
    let residual = inner
        .iter()
        .map(|(d, r2, v)| (v - blowup.eval_trace(&d[..n])).abs() / r2)
        .fold(0.0, f64::max);
    Ok(P2Fit { blowup, residual, r_fit })
}

/// Eigenvalues of `A` below `kernel_tol · λ_max`; `None` when `A ≈ 0`.
pub fn stratum(q: &QuadraticBlowup, kernel_tol: f64) -> Option<usize> {
    let ev = q.eigenvalues();
    let lmax = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lmax > 1e-14) {
        return None;
    }
    Some(ev.iter().filter(|&&l| l < kernel_tol * lmax).count())
}

/// `∫_{∂B_1} |y|^a (p - q)²`.
pub fn blowup_distance(p: &QuadraticBlowup, q: &QuadraticBlowup, a: f64) -> f64 {
    sphere_nodes(p.n, a, [0.0; 2], 1.0, 256)
        .iter()
        .map(|node| node.weight * (p.eval(&node.x[..p.n], node.y) - q.eval(&node.x[..p.n], node.y)).powi(2))
        .sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityPair {
    pub first: usize,
    pub second: usize,
    pub separation: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityTable {
    pub pairs: Vec<ContinuityPair>,
    /// Running maximum of distance against separation: `(separation, ω)`.
    pub envelope: Vec<(f64, f64)>,
}

/// Pairwise `p₂` distances between fitted singular points.
pub fn continuity_check(points: &[FreeBoundaryPoint], a: f64) -> Option<ContinuityTable> {
    let fitted: Vec<&FreeBoundaryPoint> = points
        .iter()
        .filter(|p| p.class == PointClass::Singular && p.p2_fit.is_some())
        .collect();
    if fitted.len() < 2 {
        return None;
    }
    let mut pairs = Vec::new();
    for i in 0..fitted.len() {
        for j in i + 1..fitted.len() {
            let (p, q) = (fitted[i], fitted[j]);
            let separation = p
                .location
                .iter()
                .zip(&q.location)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let distance = blowup_distance(&p.p2_fit.unwrap().blowup, &q.p2_fit.unwrap().blowup, a);
            pairs.push(ContinuityPair {
                first: p.id,
                second: q.id,
                separation,
                distance,
            });
        }
    }
    let mut sorted: Vec<(f64, f64)> = pairs.iter().map(|p| (p.separation, p.distance)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut run: f64 = 0.0;
    let envelope = sorted
        .into_iter()
        .map(|(s, d)| {
            run = run.max(d);
            (s, run)
        })
        .collect();
    Some(ContinuityTable { pairs, envelope })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    /// Absolute contact threshold; `None` uses `10 · solver tol · data scale`.
    pub contact_tol: Option<f64>,
    pub class_tol: f64,
    pub kernel_tol: f64,
    /// Lower threshold for the non-degeneracy constants.
    pub nondegeneracy_threshold: f64,
    /// Fit annulus outer radius, in horizontal grid spacings.
    pub fit_cells: f64,
    /// Density above which a Singular estimate is demoted to Unresolved.
    pub singular_density_max: f64,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            contact_tol: None,
            class_tol: 0.15,
            kernel_tol: 1e-3,
            nondegeneracy_threshold: 1e-12,
            fit_cells: 16.0,
            singular_density_max: 0.25,
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeBoundaryPoint {
    pub id: usize,
    pub node: usize,
    pub location: Vec<f64>,
    pub phi_limit: Option<Limit>,
    pub n_limit: Option<Limit>,
    pub m_hat: Option<f64>,
    pub class: PointClass,
    /// `(r, density)` along the ladder, largest radius first.
    pub density: Vec<(f64, f64)>,
    pub density_ratio: f64,
    pub p2_fit: Option<P2Fit>,
    pub stratum: Option<usize>,
    pub c1_hat: Option<f64>,
    pub c2_hat: Option<f64>,
    pub c1_drop: Option<f64>,
    pub c2_drop: Option<f64>,
    pub nondegenerate: bool,
    pub note: Option<String>,
    #[serde(skip)]
    pub radial: Option<RadialDiagnostics>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub regular: usize,
    pub singular: usize,
    pub unresolved: usize,
    /// Singular points per kernel dimension `k`.
    pub strata: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeBoundaryReport {
    pub schema_version: u32,
    pub n: usize,
    pub s: f64,
    pub contact_tol: f64,
    pub class_tol: f64,
    pub c0: f64,
    pub contact_nodes: Vec<usize>,
    pub boundary_nodes: Vec<usize>,
    pub points: Vec<FreeBoundaryPoint>,
    pub counts: ClassCounts,
    pub continuity: Option<ContinuityTable>,
}

/// Full pipeline: masks, per-point ladders, classification, fits, strata.
pub fn analyze_free_boundary(
    field: &SolutionField,
    obstacle: &ObstacleSpec,
    solver_tol: f64,
    cfg: &ClassifyConfig,
) -> Result<FreeBoundaryReport> {
    cfg.diagnostics.validate()?;
    let g = &field.grid;
    let contact_tol = cfg
        .contact_tol
        .unwrap_or(10.0 * solver_tol * data_scale(field, obstacle));
    let masks = extract_contact_and_boundary(field, obstacle, contact_tol)?;
    let nodes = masks.boundary_nodes();
    let results: Vec<Result<FreeBoundaryPoint>> = nodes
        .par_iter()
        .enumerate()
        .map(|(id, &node)| analyze_point(field, obstacle, &masks, id, node, cfg))
        .collect();
    let mut points = Vec::with_capacity(results.len());
    for r in results {
        points.push(r?);
    }
    let mut counts = ClassCounts {
        strata: vec![0; g.n],
        ..Default::default()
    };
    for p in &points {
        match p.class {
            PointClass::Regular => counts.regular += 1,
            PointClass::Singular => counts.singular += 1,
            PointClass::Unresolved => counts.unresolved += 1,
        }
        if let Some(k) = p.stratum {
            if k < counts.strata.len() {
                counts.strata[k] += 1;
            }
        }
    }
    let continuity = continuity_check(&points, g.a);
    Ok(FreeBoundaryReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n: g.n,
        s: g.s,
        contact_tol,
        class_tol: cfg.class_tol,
        c0: cfg.diagnostics.c0,
        contact_nodes: (0..masks.contact.len()).filter(|&p| masks.contact[p]).collect(),
        boundary_nodes: nodes,
        points,
        counts,
        continuity,
    })
}

fn analyze_point(
    field: &SolutionField,
    obstacle: &ObstacleSpec,
    masks: &Masks,
    id: usize,
    node: usize,
    cfg: &ClassifyConfig,
) -> Result<FreeBoundaryPoint> {
    let g = &field.grid;
    let location = g.trace_point(node)[..g.n].to_vec();
    let cf = build_v_at_node(field, obstacle, node)?;
    let diag = radial_diagnostics(&cf, &cfg.diagnostics)?;
    let mut cls = classify(&diag, g.s, cfg.class_tol);
    let ladder: Vec<f64> = diag.rows.iter().map(|r| r.r).collect();
    let density: Vec<(f64, f64)> = ladder
        .iter()
        .map(|&r| (r, density_ratio(g, masks, &location, r)))
        .collect();
    let density_ratio = density.last().map(|d| d.1).unwrap_or(1.0);
    let mut note = None;
    if cls.class == PointClass::Singular && density.iter().any(|d| d.1 > cfg.singular_density_max) {
        cls.class = PointClass::Unresolved;
        note = Some("frequency near 2 but contact density not small".to_string());
    }
    let nd = if ladder.is_empty() {
        None
    } else {
        nondegeneracy_scan_field(&cf, &ladder, cfg.nondegeneracy_threshold).ok()
    };
    let mut p2_fit = None;
    let mut stratum_k = None;
    if cls.class == PointClass::Singular {
        let r_fit = (cfg.fit_cells * g.hx).min(cf.max_radius());
        match fit_p2(&cf, r_fit) {
            Ok(fit) => {
                stratum_k = stratum(&fit.blowup, cfg.kernel_tol);
                if stratum_k.is_none() {
                    note = Some("fitted blow-up matrix vanishes".to_string());
                }
                p2_fit = Some(fit);
            }
            Err(e) => note = Some(e.to_string()),
        }
    }
    Ok(FreeBoundaryPoint {
        id,
        node,
        location,
        phi_limit: cls.phi_limit,
        n_limit: cls.n_limit,
        m_hat: cls.m_hat,
        class: cls.class,
        density,
        density_ratio,
        p2_fit,
        stratum: stratum_k,
        c1_hat: nd.as_ref().map(|r| r.c1_hat),
        c2_hat: nd.as_ref().map(|r| r.c2_hat),
        c1_drop: nd.as_ref().map(|r| r.c1_drop),
        c2_drop: nd.as_ref().map(|r| r.c2_drop),
        nondegenerate: nd.as_ref().map(|r| r.passed).unwrap_or(false),
        note,
        radial: Some(diag),
    })
}

impl FreeBoundaryReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let found = v.get("schema_version").and_then(|s| s.as_u64()).unwrap_or(0) as u32;
        if found != REPORT_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                expected: REPORT_SCHEMA_VERSION,
                found,
            });
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// One CSV per point with the radial ladder, named `point_<id>.csv`.
    pub fn write_point_csvs(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let mut out = Vec::new();
        for p in &self.points {
            if let Some(diag) = &p.radial {
                let path = dir.join(format!("point_{}.csv", p.id));
                let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
                diag.write_csv(&mut f)?;
                f.flush()?;
                out.push(path);
            }
        }
        Ok(out)
    }
}

/// Bracket `[lo, hi]` of cap heights: at `lo` the contact set is at most one
/// node, at `hi` it is larger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalBracket {
    pub lo: f64,
    pub hi: f64,
    pub contact_lo: usize,
    pub contact_hi: usize,
    pub solves: usize,
}

/// Contact node count for a cap of height `h0` built from `template`.
pub fn contact_count(
    grid: &ExtensionGrid,
    template: &ObstacleParams,
    h0: f64,
    solver: &SolverConfig,
) -> Result<usize> {
    let obstacle = with_height(template, h0)?.build(grid.n, grid.x_box)?;
    let op = assemble_operator(grid);
    let field = solve_obstacle(&op, &obstacle, solver)?;
    let tol = 10.0 * solver.tol * data_scale(&field, &obstacle);
    Ok(extract_contact_and_boundary(&field, &obstacle, tol)?.contact_count())
}

pub fn with_height(template: &ObstacleParams, h0: f64) -> Result<ObstacleParams> {
    match template {
        ObstacleParams::Cap {
            kappa,
            rho,
            blend_width,
            ..
        } => Ok(ObstacleParams::Cap {
            h0,
            kappa: *kappa,
            rho: *rho,
            blend_width: *blend_width,
        }),
        _ => invalid("height bisection needs a cap obstacle"),
    }
}

/// Bisects the cap height where the contact set collapses to a single node.
pub fn bisect_critical_height(
    grid: &ExtensionGrid,
    template: &ObstacleParams,
    solver: &SolverConfig,
    mut lo: f64,
    mut hi: f64,
    iterations: usize,
) -> Result<CriticalBracket> {
    let mut solves = 2;
    let mut c_lo = contact_count(grid, template, lo, solver)?;
    let mut c_hi = contact_count(grid, template, hi, solver)?;
    if c_lo > 1 || c_hi <= 1 {
        return invalid(format!(
            "heights do not bracket the collapse: {c_lo} contact nodes at {lo}, {c_hi} at {hi}"
        ));
    }
    for _ in 0..iterations {
        let mid = (lo * hi).sqrt();
        let c = contact_count(grid, template, mid, solver)?;
        solves += 1;
        if c <= 1 {
            lo = mid;
            c_lo = c;
        } else {
            hi = mid;
            c_hi = c;
        }
    }
    Ok(CriticalBracket {
        lo,
        hi,
        contact_lo: c_lo,
        contact_hi: c_hi,
        solves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::obstacle::make_cap_obstacle;

    #[test]
    fn homogeneity_classes() {
        assert_eq!(classify_homogeneity(1.5, 0.5, 0.15), PointClass::Regular);
        assert_eq!(classify_homogeneity(1.98, 0.5, 0.15), PointClass::Singular);
        assert_eq!(classify_homogeneity(1.75, 0.5, 0.15), PointClass::Unresolved);
        assert_eq!(classify_homogeneity(1.3, 0.25, 0.15), PointClass::Regular);
    }

    #[test]
    fn strata_from_eigenvalues() {
        assert_eq!(stratum(&QuadraticBlowup::new(1, 0.0, [[2.0, 0.0], [0.0, 0.0]]), 1e-3), Some(0));
        assert_eq!(stratum(&QuadraticBlowup::new(2, 0.0, [[1.0, 0.0], [0.0, 0.0]]), 1e-3), Some(1));
        assert_eq!(stratum(&QuadraticBlowup::paraboloid(2, 0.3), 1e-3), Some(0));
        assert_eq!(stratum(&QuadraticBlowup::new(2, 0.0, [[0.0; 2]; 2]), 1e-3), None);
    }

    #[test]
    fn fit_recovers_exact_quadratic() {
        let g = build_grid(2, 0.5, 1.0, 1.0, 33, 9).unwrap();
        let a0 = [[1.5, 0.25], [0.25, 0.5]];
        let q = QuadraticBlowup::new(2, g.a, a0);
        let cf = CenteredField::from_fn(&g, &[0.125, -0.0625], |x, y| q.eval(&[x[0] - 0.125, x[1] + 0.0625], y)).unwrap();
        let fit = fit_p2(&cf, 0.5).unwrap();
        assert!(fit.blowup.matrix_distance(&q) < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn thin_annulus_is_rank_deficient() {
        let g = build_grid(2, 0.5, 1.0, 1.0, 9, 9).unwrap();
        let cf = CenteredField::from_fn(&g, &[0.0, 0.0], |x, _| x[0] * x[0]).unwrap();
        assert!(matches!(fit_p2(&cf, 0.2), Err(Error::RankDeficientFit)));
    }

    #[test]
    fn distance_zero_for_identical_blowups() {
        let q = QuadraticBlowup::paraboloid(1, 0.2);
        assert_eq!(blowup_distance(&q, &q, 0.2), 0.0);
        assert!(blowup_distance(&q, &q.scaled(2.0), 0.2) > 0.0);
    }

    #[test]
    fn negative_obstacle_gives_empty_masks() {
        let g = build_grid(1, 0.5, 1.0, 1.0, 33, 17).unwrap();
        let field = SolutionField::new(g.clone(), vec![0.0; g.len()], true, 0.0, 0, 1.0, vec![]);
        let o = ObstacleSpec::constant(1, -0.5);
        let m = extract_contact_and_boundary(&field, &o, 1e-9).unwrap();
        assert_eq!(m.contact_count(), 0);
        assert!(m.boundary_nodes().is_empty());
        let rep = analyze_free_boundary(&field, &o, 1e-10, &ClassifyConfig::default()).unwrap();
        assert!(rep.points.is_empty());
    }

    #[test]
    fn symmetric_cap_has_two_boundary_nodes() {
        let g = build_grid(1, 0.5, 1.0, 0.5, 129, 33).unwrap();
        let o = make_cap_obstacle(1, 1.0, 0.2, 1.0, 0.6, 0.2).unwrap();
        let cfg = SolverConfig {
            tol: 1e-9,
            ..SolverConfig::default()
        }
        .with_tuned_omega(&g);
        let field = solve_obstacle(&assemble_operator(&g), &o, &cfg).unwrap();
        let tol = 10.0 * cfg.tol * data_scale(&field, &o);
        let m = extract_contact_and_boundary(&field, &o, tol).unwrap();
        let b = m.boundary_nodes();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0] + b[1], g.nx - 1);
        let m2 = extract_contact_and_boundary(&field, &o, 0.5 * tol).unwrap();
        assert_eq!(m, m2);
        // Interior contact node: density 1 at small radius.
        let x0 = [0.0];
        assert_eq!(density_ratio(&g, &m, &x0, 2.0 * g.hx), 1.0);
        let xb = g.trace_point(b[0]);
        let d = density_ratio(&g, &m, &xb[..1], 8.0 * g.hx);
        assert!((d - 0.5).abs() < 0.1, "{d}");
    }

    #[test]
    fn schema_mismatch_rejected() {
        let text = r#"{"schema_version": 99}"#;
        assert!(matches!(
            FreeBoundaryReport::from_json(text),
            Err(Error::SchemaMismatch { expected: 1, found: 99 })
        ));
    }
}
