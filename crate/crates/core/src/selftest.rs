//! Runtime self-test: the closed-form and trivial examples of every module,
//! evaluated on coarse grids so the whole suite stays within a few minutes.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blowup::QuadraticBlowup;
use crate::diagnostics::{
    build_v, build_v_at_node, bulk_d, bulk_g, flux_i, frequency_n, monneau_m,
    nondegeneracy_scan, radial_diagnostics, surface_h, truncated_phi, weiss_w, CenteredField, DiagnosticsConfig,
    PhiBranch,
};
use crate::error::Result;
use crate::freeboundary::{
    blowup_distance, classify, classify_homogeneity, continuity_check, data_scale, density_ratio,
    extract_contact_and_boundary, fit_p2, stratum, Classification, FreeBoundaryPoint, P2Fit, PointClass,
};
use crate::grid::{build_grid, ExtensionGrid};
use crate::obstacle::{make_cap_obstacle, ObstacleSpec};
use crate::quad::GaussLegendre;
use crate::solver::{
    assemble_operator, monotonicity_check, signorini_half_space, solve_obstacle, BoundaryData, SolverConfig,
};
use crate::stopping::{
    estimate_value, far_field_solve, martingale_check, sample_increment, standard_stable, StableProcessConfig,
    Strategy,
};
use crate::SolutionField;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub module: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

type Outcome = Result<(bool, String)>;
type CheckFn = fn() -> Outcome;

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("grid", "transmissibility matches closed form and quadrature", grid_transmissibility),
    ("grid", "obstacle gradient matches central differences", obstacle_gradient),
    ("grid", "blow-up coefficient b = tr A / (1 + a)", blowup_coefficient),
    ("lcp_solver", "residual on the weighted harmonic quadratic vanishes", operator_consistency),
    ("lcp_solver", "supercritical cap: contact set nonempty, u >= 0", cap_contact_nonempty),
    ("lcp_solver", "manufactured Signorini solution reproduced", manufactured_signorini),
    ("lcp_solver", "vertical monotonicity of the solution", vertical_monotonicity),
    ("diagnostics", "cap correction and v(x0, 0) = 0", recentred_field),
    ("diagnostics", "H of a constant and scaling of H for p2", surface_h_examples),
    ("diagnostics", "D of a constant, G' = H, N(p2) = 2", bulk_examples),
    ("diagnostics", "H' = (n + a) H / r + 2 I", h_derivative_identity),
    ("diagnostics", "N of the 3/2-homogeneous solution and rescaling", frequency_examples),
    ("diagnostics", "truncated frequency branches and limits", phi_examples),
    ("diagnostics", "Weiss energy of p2 and of the 3/2 solution", weiss_examples),
    ("diagnostics", "Monneau of equal and of distinct polynomials", monneau_examples),
    ("diagnostics", "non-degeneracy constants at cap free boundary points", nondegeneracy_examples),
    ("freeboundary", "masks: empty for φ <= 0, symmetric interval for a cap", mask_examples),
    ("freeboundary", "density ratio in the contact set and at its boundary", density_examples),
    ("freeboundary", "classification of the model profiles", classification_examples),
    ("freeboundary", "Monneau selection and fit stability", fit_examples),
    ("freeboundary", "blow-up distances, mirror spectra and envelope", continuity_examples),
    ("freeboundary", "strata of model matrices", strata_examples),
    ("stopping_mc", "Cauchy increments pass Kolmogorov-Smirnov", cauchy_ks),
    ("stopping_mc", "stability under summation of increments", stability_ks),
    ("stopping_mc", "payoff estimates: immediate, on contact, dominance", payoff_examples),
    ("stopping_mc", "martingale identity at continuation points", martingale_examples),
];

/// Runs every check, reporting each result to `on_check` as it finishes.
pub fn run_selftest(mut on_check: impl FnMut(&CheckResult)) -> SelftestReport {
    let mut report = SelftestReport::default();
    for (module, name, f) in CHECKS {
        let t = Instant::now();
        let (passed, detail) = match f() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let res = CheckResult {
            module: module.to_string(),
            name: name.to_string(),
            passed,
            detail,
            seconds: t.elapsed().as_secs_f64(),
        };
        on_check(&res);
        report.checks.push(res);
    }
    report
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn solver_cfg(grid: &ExtensionGrid) -> SolverConfig {
    SolverConfig {
        tol: 1e-10,
        ..SolverConfig::default()
    }
    .with_tuned_omega(grid)
}

fn cap_solve(s: f64, nx: usize) -> Result<(SolutionField, ObstacleSpec)> {
    let g = build_grid(1, s, 1.0, 1.0, nx, (nx - 1) / 2 + 1)?;
    let o = make_cap_obstacle(1, 1.0, 0.2, 1.0, 0.6, 0.25)?;
    let f = solve_obstacle(&assemble_operator(&g), &o, &solver_cfg(&g))?;
    Ok((f, o))
}

fn cap_masks(f: &SolutionField, o: &ObstacleSpec) -> Result<crate::freeboundary::Masks> {
    extract_contact_and_boundary(f, o, 1e-9 * data_scale(f, o))
}

fn p2_field(s: f64, nx: usize, q: &QuadraticBlowup) -> Result<CenteredField> {
    let g = build_grid(q.n, s, 1.0, 1.0, nx, (nx - 1) / 2 + 1)?;
    CenteredField::from_fn(&g, &[0.0, 0.0][..q.n], |x, y| q.eval(x, y))
}

fn signorini_field(nx: usize) -> Result<CenteredField> {
    let g = build_grid(1, 0.5, 1.0, 1.0, nx, (nx - 1) / 2 + 1)?;
    CenteredField::from_fn(&g, &[0.0], |x, y| signorini_half_space(x[0], y.abs()))
}

fn grid_transmissibility() -> Outcome {
    let mut worst: f64 = 0.0;
    let gl = GaussLegendre::new(40);
    for s in [0.25, 0.5, 0.75] {
        let g = build_grid(1, s, 1.0, 1.0, 9, 17)?;
        let a = g.a;
        for j in 0..g.ny - 1 {
            let (y0, y1) = (g.y_coord(j), g.y_coord(j + 1));
            let closed = (1.0 - a) / (y1.powf(1.0 - a) - y0.powf(1.0 - a));
            let k = 2.0 / (1.0 - a);
            let integral = if j == 0 {
                gl.integrate(0.0, y1.powf(1.0 / k), |u| k * u.powf(k - 1.0 - a * k))
            } else {
                gl.integrate(y0, y1, |t| t.powf(-a))
            };
            let t = g.y_transmissibility[j];
            worst = worst.max(rel(t, closed)).max(rel(1.0 / integral, t));
        }
    }
    Ok((worst < 1e-7, format!("max relative deviation {worst:.2e}")))
}

fn obstacle_gradient() -> Outcome {
    let o = make_cap_obstacle(2, 1.0, 0.01, 0.05, 0.45, 0.45)?;
    let h = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
        let grad = o.eval_grad_phi(&x);
        for k in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[k] += h;
            xm[k] -= h;
            let fd = (o.eval_phi(&xp) - o.eval_phi(&xm)) / (2.0 * h);
            worst = worst.max((fd - grad[k]).abs());
        }
    }
    Ok((worst <= 10.0 * h * h, format!("max |FD - grad| = {worst:.2e} (bound {:.1e})", 10.0 * h * h)))
}

fn blowup_coefficient() -> Outcome {
    let q = QuadraticBlowup::new(1, 0.0, [[1.0, 0.0], [0.0, 0.0]]);
    let ok_b = (q.b - 1.0).abs() < 1e-15 && (q.eval(&[0.3], 0.2) - (0.09 - 0.04)).abs() < 1e-15;
    // L_a p2 = -|y|^a (2 tr A) + 2b (1 + a)|y|^a vanishes iff b = tr A/(1 + a).
    let mut worst: f64 = 0.0;
    for a in [-0.5, 0.0, 0.5] {
        let q = QuadraticBlowup::new(2, a, [[1.0, 0.3], [0.3, 0.5]]);
        worst = worst.max((2.0 * q.trace_matrix() - 2.0 * q.b * (1.0 + a)).abs());
    }
    Ok((ok_b && worst < 1e-14, format!("b = {}, max |L_a p2| coefficient {worst:.1e}", q.b)))
}

fn operator_consistency() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for s in [0.25, 0.5, 0.75] {
        let lambda = 1.0 / (2.0 - 2.0 * s);
        let res: Vec<f64> = [33, 65]
            .iter()
            .map(|&m| {
                let g = build_grid(1, s, 1.0, 1.0, m, m)?;
                Ok(assemble_operator(&g).consistency_residual(|x, y| x[0] * x[0] - lambda * y * y, 0.75, 0.25, 0.75))
            })
            .collect::<Result<_>>()?;
        ok &= res[1] < 1e-12 || res[1] < 0.3 * res[0];
        detail.push(format!("s={s}: {:.1e} -> {:.1e}", res[0], res[1]));
    }
    Ok((ok, detail.join("; ")))
}

fn cap_contact_nonempty() -> Outcome {
    let (f, o) = cap_solve(0.5, 129)?;
    let masks = cap_masks(&f, &o)?;
    let min = f.values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((
        masks.contact_count() > 0 && min >= -1e-12,
        format!("{} contact nodes, min u = {min:.2e}", masks.contact_count()),
    ))
}

fn signorini_error(nx: usize) -> Result<(f64, SolutionField)> {
    let g = build_grid(1, 0.5, 1.0, 1.0, nx, nx)?;
    let o = ObstacleSpec::constant(1, 0.0);
    let cfg = SolverConfig {
        boundary: BoundaryData::HalfSpaceSignorini,
        ..solver_cfg(&g)
    };
    let f = solve_obstacle(&assemble_operator(&g), &o, &cfg)?;
    let err = (0..g.nx)
        .map(|i| (f.trace[i] - signorini_half_space(g.x_coord(i), 0.0)).abs())
        .fold(0.0, f64::max);
    Ok((err, f))
}

fn manufactured_signorini() -> Outcome {
    let (e1, _) = signorini_error(65)?;
    let (e2, _) = signorini_error(129)?;
    let order = (e1 / e2).log2();
    Ok((order >= 1.0, format!("trace errors {e1:.2e} -> {e2:.2e}, order {order:.2}")))
}

fn vertical_monotonicity() -> Outcome {
    let g = build_grid(1, 0.5, 1.0, 1.0, 33, 17)?;
    let zero = solve_obstacle(&assemble_operator(&g), &ObstacleSpec::constant(1, -1.0), &solver_cfg(&g))?;
    let z = monotonicity_check(&zero, 0.0);
    let (f, _) = cap_solve(0.5, 129)?;
    let cap = monotonicity_check(&f, 1e-9);
    // Re((x + iy)^{3/2}) on x < 0 starts at 0 and is negative above the trace.
    let mut column_max: f64 = f64::NEG_INFINITY;
    for k in 1..=100 {
        column_max = column_max.max(signorini_half_space(-0.5, k as f64 * 0.01));
    }
    Ok((
        z.max_increase == 0.0 && cap.passed && column_max < 0.0,
        format!(
            "zero field {:.1e}, cap {:.1e}, manufactured column max {column_max:.2e}",
            z.max_increase, cap.max_increase
        ),
    ))
}

fn recentred_field() -> Outcome {
    let (f, o) = cap_solve(0.25, 129)?;
    let a = f.grid.a;
    let cf = build_v(&f, &o, &[0.0])?;
    // At the contact point the trace gap vanishes; above it only the correction remains.
    let y = 0.25;
    let j = (y / f.grid.hy).round() as usize;
    let ix = (f.grid.nx - 1) / 2;
    let idx = f.grid.index(&[ix], j);
    let expected = f.values[idx] - o.eval_phi(&[0.0]) - y * y / (1.0 + a);
    let corr_err = (cf.values[idx] - expected).abs();
    let masks = cap_masks(&f, &o)?;
    let fb = masks.boundary_nodes();
    let v0 = build_v_at_node(&f, &o, fb[0])?.value_at(&f.grid.trace_point(fb[0])[..1], 0.0);
    let ok = corr_err < 1e-12 && v0.map(|v| v.abs() < 1e-9).unwrap_or(false);
    Ok((ok, format!("correction error {corr_err:.1e}, v(x0,0) = {:.1e}", v0.unwrap_or(f64::NAN))))
}

fn surface_h_examples() -> Outcome {
    use statrs::function::gamma::gamma;
    let mut worst_const: f64 = 0.0;
    for s in [0.25, 0.5, 0.75] {
        let g = build_grid(1, s, 1.0, 1.0, 65, 33)?;
        let cf = CenteredField::from_fn(&g, &[0.0], |_, _| 1.0)?;
        let a = g.a;
        let beta = PI.sqrt() * gamma((1.0 + a) / 2.0) / gamma(1.0 + a / 2.0);
        for r in [0.2, 0.4] {
            worst_const = worst_const.max(rel(surface_h(&cf, r)?, 2.0 * r.powf(1.0 + a) * beta));
        }
    }
    let mut worst_scale: f64 = 0.0;
    for s in [0.25, 0.75] {
        let cf = p2_field(s, 129, &QuadraticBlowup::new(1, 1.0 - 2.0 * s, [[1.0, 0.0], [0.0, 0.0]]))?;
        let k = 1.0 + cf.a() + 4.0;
        let h: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|&r| Ok(surface_h(&cf, r)? / r.powf(k))).collect::<Result<_>>()?;
        worst_scale = worst_scale.max(rel(h[1], h[0])).max(rel(h[2], h[0]));
    }
    Ok((
        worst_const < 1e-3 && worst_scale < 0.01,
        format!("constant: {worst_const:.1e}; p2 scaling spread {worst_scale:.1e}"),
    ))
}

fn bulk_examples() -> Outcome {
    let g = build_grid(1, 0.25, 1.0, 1.0, 65, 33)?;
    let c = CenteredField::from_fn(&g, &[0.0], |_, _| 3.0)?;
    let d_const = bulk_d(&c, 0.4)?.abs();
    let cf = p2_field(0.25, 129, &QuadraticBlowup::new(1, 0.5, [[1.0, 0.0], [0.0, 0.0]]))?;
    let (r, dr) = (0.3, 0.005);
    let g_prime = (bulk_g(&cf, r + dr)? - bulk_g(&cf, r - dr)?) / (2.0 * dr);
    let gh = rel(g_prime, surface_h(&cf, r)?);
    let n_err = (frequency_n(&cf, 0.3)? - 2.0).abs() / 2.0;
    Ok((
        d_const < 1e-14 && gh < 0.02 && n_err < 0.02,
        format!("D(const) = {d_const:.1e}, |G'/H - 1| = {gh:.1e}, |N/2 - 1| = {n_err:.1e}"),
    ))
}

fn h_derivative_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let fields = [
        p2_field(0.75, 129, &QuadraticBlowup::new(1, -0.5, [[1.0, 0.0], [0.0, 0.0]]))?,
        signorini_field(129)?,
    ];
    for cf in &fields {
        let (r, dr) = (0.3, 0.01);
        let hp = (surface_h(cf, r + dr)? - surface_h(cf, r - dr)?) / (2.0 * dr);
        let rhs = (1.0 + cf.a()) * surface_h(cf, r)? / r + 2.0 * flux_i(cf, r)?.surface;
        worst = worst.max(rel(hp, rhs));
    }
    Ok((worst < 0.02, format!("max relative mismatch {worst:.1e}")))
}

fn frequency_examples() -> Outcome {
    let cf = signorini_field(129)?;
    let n = frequency_n(&cf, 0.3)?;
    // v_ρ(x, y) = v(ρx, ρy) / ρ^{3/2} has N(r, v_ρ) = N(ρ r, v).
    let rho = 0.5;
    let scaled = CenteredField::from_fn(&cf.grid, &[0.0], |x, y| {
        signorini_half_space(rho * x[0], rho * y.abs()) / rho.powf(1.5)
    })?;
    let lhs = frequency_n(&scaled, 0.4)?;
    let rhs = frequency_n(&cf, 0.2)?;
    Ok((
        (n - 1.5).abs() < 0.02 && rel(lhs, rhs) < 0.01,
        format!("N(0.3) = {n:.4}, N(0.4, v_ρ) = {lhs:.4}, N(0.2, v) = {rhs:.4}"),
    ))
}

fn phi_examples() -> Outcome {
    let cfg = DiagnosticsConfig::default();
    let g = build_grid(1, 0.5, 1.0, 1.0, 65, 33)?;
    let zero = CenteredField::from_fn(&g, &[0.0], |_, _| 0.0)?;
    let r = 0.2;
    let p = 1.0 + 4.0 + 2.0 * cfg.gamma;
    let power = truncated_phi(&zero, r, &cfg)?;
    let power_ok = (power - (1.0 + cfg.c0 * r) * p).abs() < 1e-12;
    let p2 = p2_field(0.25, 257, &QuadraticBlowup::new(1, 0.5, [[1.0, 0.0], [0.0, 0.0]]))?;
    let d2 = radial_diagnostics(&p2, &cfg)?;
    let l2 = d2.phi_limit()?.value;
    let sig = radial_diagnostics(&signorini_field(257)?, &cfg)?;
    let l32 = sig.phi_limit()?.value;
    let branch_ok = d2.rows.iter().all(|r| r.phi_branch == PhiBranch::Logarithmic);
    Ok((
        power_ok && branch_ok && (l2 - 5.5).abs() < 0.05 && (l32 - 4.0).abs() < 0.05,
        format!("power branch {power:.4}; Φ(0+) of p2 {l2:.4} (5.5), of the 3/2 solution {l32:.4} (4)"),
    ))
}

fn weiss_examples() -> Outcome {
    let p2 = p2_field(0.5, 129, &QuadraticBlowup::new(1, 0.0, [[1.0, 0.0], [0.0, 0.0]]))?;
    let r = 0.3;
    let k = 1.0 + p2.a();
    let w2 = weiss_w(&p2, r)? / (surface_h(&p2, r)? / r.powf(k + 4.0));
    let sig = signorini_field(129)?;
    let w = weiss_w(&sig, r)?;
    let h = surface_h(&sig, r)?;
    let n = frequency_n(&sig, r)?;
    let identity = (n - 2.0) * h / r.powi(5);
    Ok((
        w2.abs() < 0.01 && w < 0.0 && rel(w, identity) < 1e-9,
        format!("W(p2) relative {w2:.1e}; W(3/2) = {w:.4e} vs (N - 2) H / r^5 = {identity:.4e}"),
    ))
}

fn monneau_examples() -> Outcome {
    let q = QuadraticBlowup::new(1, 0.0, [[1.0, 0.0], [0.0, 0.0]]);
    let cf = p2_field(0.5, 129, &q)?;
    let scale = surface_h(&cf, 0.3)? / 0.3f64.powi(5);
    let self_m = monneau_m(&cf, &q, 0.3)? / scale;
    let other = q.scaled(1.5);
    let m: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|&r| monneau_m(&cf, &other, r)).collect::<Result<_>>()?;
    let spread = rel(m[2], m[0]).max(rel(m[1], m[0]));
    Ok((
        self_m < 1e-4 && spread < 0.01,
        format!("M(q, q) relative {self_m:.1e}; M(p2, p2') spread {spread:.1e}"),
    ))
}

fn nondegeneracy_examples() -> Outcome {
    let (f, o) = cap_solve(0.5, 257)?;
    let masks = cap_masks(&f, &o)?;
    let hx = f.grid.hx;
    let ladder: Vec<f64> = (0..5).map(|k| 64.0 * hx / 2f64.powi(k)).collect();
    let mut detail = Vec::new();
    let mut ok = true;
    for node in masks.boundary_nodes() {
        let x0 = f.grid.trace_point(node);
        let rep = nondegeneracy_scan(&f, &o, &x0[..1], &ladder, 1e-12)?;
        ok &= rep.passed && rep.c1_hat > 0.0 && rep.c2_hat > 0.0 && rep.c1_drop <= 4.0 && rep.c2_drop <= 4.0;
        detail.push(format!(
            "x0={:.3}: c1={:.3e} (drop {:.2}), c2={:.3e} (drop {:.2})",
            x0[0], rep.c1_hat, rep.c1_drop, rep.c2_hat, rep.c2_drop
        ));
    }
    let zero_g = build_grid(1, 0.5, 1.0, 1.0, 33, 17)?;
    let zero_o = ObstacleSpec::constant(1, 0.0);
    let zero = solve_obstacle(&assemble_operator(&zero_g), &zero_o, &solver_cfg(&zero_g))?;
    let rejected = nondegeneracy_scan(&zero, &zero_o, &[0.0], &[0.25], 1e-12).is_err();
    ok &= rejected;
    detail.push(format!("zero problem rejected: {rejected}"));
    Ok((ok, detail.join("; ")))
}

fn mask_examples() -> Outcome {
    let g = build_grid(1, 0.5, 1.0, 1.0, 33, 17)?;
    let neg = ObstacleSpec::constant(1, -0.5);
    let f = solve_obstacle(&assemble_operator(&g), &neg, &solver_cfg(&g))?;
    let empty = extract_contact_and_boundary(&f, &neg, 1e-9)?;
    let empty_ok = empty.contact_count() == 0 && empty.boundary_nodes().is_empty();
    let (f, o) = cap_solve(0.5, 257)?;
    let tol = 1e-8 * data_scale(&f, &o);
    let m1 = extract_contact_and_boundary(&f, &o, tol)?;
    let m2 = extract_contact_and_boundary(&f, &o, 0.5 * tol)?;
    let b = m1.boundary_nodes();
    let nx = f.grid.nx;
    let symmetric = (0..nx).all(|i| m1.contact[i] == m1.contact[nx - 1 - i]);
    let interval = {
        let idx: Vec<usize> = (0..nx).filter(|&i| m1.contact[i]).collect();
        !idx.is_empty() && idx.last().unwrap() - idx[0] + 1 == idx.len()
    };
    let ok = empty_ok && b.len() == 2 && b[0] + b[1] == nx - 1 && symmetric && interval && m1 == m2;
    Ok((
        ok,
        format!("φ<=0 empty: {empty_ok}; boundary nodes {b:?}; tol halving invariant: {}", m1 == m2),
    ))
}

fn density_examples() -> Outcome {
    let (f, o) = cap_solve(0.5, 257)?;
    let masks = cap_masks(&f, &o)?;
    let g = &f.grid;
    let centre = density_ratio(g, &masks, &[0.0], 4.0 * g.hx);
    let fb = g.trace_point(masks.boundary_nodes()[0]);
    let edge = density_ratio(g, &masks, &fb[..1], 16.0 * g.hx);
    Ok((
        centre == 1.0 && (edge - 0.5).abs() < 0.05,
        format!("interior {centre:.3}, free boundary {edge:.3}"),
    ))
}

fn classify_cf(cf: &CenteredField, cfg: &DiagnosticsConfig) -> Result<Classification> {
    Ok(classify(&radial_diagnostics(cf, cfg)?, cf.grid.s, 0.15))
}

fn classification_examples() -> Outcome {
    let cfg = DiagnosticsConfig::default();
    let reg = classify_cf(&signorini_field(257)?, &cfg)?;
    let p2 = p2_field(0.5, 257, &QuadraticBlowup::new(1, 0.0, [[1.0, 0.0], [0.0, 0.0]]))?;
    let sing = classify_cf(&p2, &cfg)?;
    let mid = classify_homogeneity(1.75, 0.5, 0.15);
    let ok = reg.class == PointClass::Regular
        && reg.m_hat.map(|m| (m - 1.5).abs() < 0.05).unwrap_or(false)
        && sing.class == PointClass::Singular
        && sing.m_hat.map(|m| (m - 2.0).abs() < 0.05).unwrap_or(false)
        && mid == PointClass::Unresolved;
    Ok((
        ok,
        format!(
            "3/2 profile {:?} m={:.3}; p2 {:?} m={:.3}; m=1.75 {:?}",
            reg.class,
            reg.m_hat.unwrap_or(f64::NAN),
            sing.class,
            sing.m_hat.unwrap_or(f64::NAN),
            mid
        ),
    ))
}

fn fit_examples() -> Outcome {
    let s = 0.25;
    let g = build_grid(1, s, 1.0, 1.0, 257, 129)?;
    let a = g.a;
    // p2 plus the weighted harmonic cubic x³ - 3xy²/(1 + a).
    let cf = CenteredField::from_fn(&g, &[0.0], |x, y| {
        let x = x[0];
        x * x - y * y / (1.0 + a) + 0.5 * (x.powi(3) - 3.0 * x * y * y / (1.0 + a))
    })?;
    let r_fit = 16.0 * g.hx;
    let fit: P2Fit = fit_p2(&cf, r_fit)?;
    let half = fit_p2(&cf, 0.5 * r_fit)?;
    let wrong = fit.blowup.scaled(2.0);
    let radii = [0.4, 0.2, 0.1, 0.05];
    let m_fit: Vec<f64> = radii.iter().map(|&r| monneau_m(&cf, &fit.blowup, r)).collect::<Result<_>>()?;
    let m_wrong: Vec<f64> = radii.iter().map(|&r| monneau_m(&cf, &wrong, r)).collect::<Result<_>>()?;
    let decreasing = m_fit.windows(2).all(|w| w[1] < w[0]);
    let bounded = m_wrong.iter().all(|&m| m > 100.0 * m_fit[radii.len() - 1]);
    let shift = fit.blowup.matrix_distance(&half.blowup);
    Ok((
        decreasing && bounded && shift <= fit.residual,
        format!(
            "M(fit) {:.2e} -> {:.2e}, M(wrong) >= {:.2e}; |A - A_half| = {shift:.1e} <= residual {:.1e}",
            m_fit[0],
            m_fit[radii.len() - 1],
            m_wrong.iter().cloned().fold(f64::INFINITY, f64::min),
            fit.residual
        ),
    ))
}

fn synthetic_point(id: usize, x: f64, q: QuadraticBlowup) -> FreeBoundaryPoint {
    FreeBoundaryPoint {
        id,
        node: id,
        location: vec![x],
        phi_limit: None,
        n_limit: None,
        m_hat: Some(2.0),
        class: PointClass::Singular,
        density: Vec::new(),
        density_ratio: 0.0,
        p2_fit: Some(P2Fit {
            blowup: q,
            residual: 0.0,
            r_fit: 0.1,
        }),
        stratum: Some(0),
        c1_hat: None,
        c2_hat: None,
        c1_drop: None,
        c2_drop: None,
        nondegenerate: true,
        note: None,
        radial: None,
    }
}

fn continuity_examples() -> Outcome {
    let a = 0.5;
    let q = QuadraticBlowup::new(1, a, [[1.0, 0.0], [0.0, 0.0]]);
    let same = blowup_distance(&q, &q, a);
    let (f, o) = cap_solve(0.5, 257)?;
    let masks = cap_masks(&f, &o)?;
    let b = masks.boundary_nodes();
    let r_fit = 16.0 * f.grid.hx;
    let left = fit_p2(&build_v_at_node(&f, &o, b[0])?, r_fit)?.blowup.eigenvalues();
    let right = fit_p2(&build_v_at_node(&f, &o, b[1])?, r_fit)?.blowup.eigenvalues();
    let mirror = left.iter().zip(&right).map(|(l, r)| (l - r).abs()).fold(0.0, f64::max);
    let pts: Vec<FreeBoundaryPoint> = [(0.0, 1.0), (0.1, 1.2), (0.3, 0.9), (0.35, 2.0)]
        .iter()
        .enumerate()
        .map(|(i, &(x, c))| synthetic_point(i, x, q.scaled(c)))
        .collect();
    let table = continuity_check(&pts, a);
    let monotone = table
        .as_ref()
        .map(|t| t.envelope.windows(2).all(|w| w[1].1 >= w[0].1))
        .unwrap_or(false);
    Ok((
        same == 0.0 && mirror < 1e-8 && monotone,
        format!("d(q, q) = {same}, mirror eigenvalue gap {mirror:.1e}, envelope nondecreasing: {monotone}"),
    ))
}

fn strata_examples() -> Outcome {
    let k1 = stratum(&QuadraticBlowup::new(2, 0.0, [[1.0, 0.0], [0.0, 0.0]]), 1e-3);
    let k0 = stratum(&QuadraticBlowup::paraboloid(2, 0.0), 1e-3);
    Ok((k1 == Some(1) && k0 == Some(0), format!("diag(1,0) -> {k1:?}, identity -> {k0:?}")))
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
pub fn kolmogorov_p(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..100 {
        let kf = k as f64;
        p += 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

fn cauchy_ks() -> Outcome {
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut x: Vec<f64> = (0..n).map(|_| standard_stable(1.0, &mut rng)).collect();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = 0.5 + v.atan() / PI;
            (f - i as f64 / nf).abs().max((f - (i + 1) as f64 / nf).abs())
        })
        .fold(0.0, f64::max);
    let p = kolmogorov_p(nf.sqrt() * d);
    let median = 0.5 * (x[n / 2 - 1] + x[n / 2]);
    Ok((
        p > 0.01 && median.abs() < 0.01,
        format!("KS D = {d:.2e}, p = {p:.3}, median {median:.1e}"),
    ))
}

fn stability_ks() -> Outcome {
    let n = 100_000;
    let k = 4;
    let alpha = 1.2;
    let small = StableProcessConfig {
        alpha,
        dt: 0.01,
        n_paths: 1,
        max_time: 1.0,
        seed: 0,
    };
    let big = StableProcessConfig { dt: 0.04, ..small };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sums: Vec<f64> = (0..n)
        .map(|_| (0..k).map(|_| sample_increment(&small, 1, &mut rng)[0]).sum())
        .collect();
    let mut single: Vec<f64> = (0..n).map(|_| sample_increment(&big, 1, &mut rng)[0]).collect();
    sums.sort_by(f64::total_cmp);
    single.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < n {
        if sums[i] <= single[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 - j as f64).abs() / n as f64);
    }
    let p = kolmogorov_p((n as f64 / 2.0).sqrt() * d);
    Ok((p > 0.01, format!("two-sample KS D = {d:.2e}, p = {p:.3}")))
}

fn windowed_cap(nx: usize) -> Result<(SolutionField, ObstacleSpec)> {
    let g = build_grid(1, 0.5, 2.0, 2.0, nx, (nx - 1) / 2 + 1)?.with_trace_window(1.0)?;
    let o = make_cap_obstacle(1, 2.0, 0.2, 1.0, 0.6, 0.25)?;
    let f = far_field_solve(&g, &o, &solver_cfg(&g), 2)?;
    Ok((f, o))
}

fn payoff_examples() -> Outcome {
    let (f, o) = windowed_cap(257)?;
    let masks = cap_masks(&f, &o)?;
    let cfg = StableProcessConfig {
        alpha: 1.0,
        dt: 1e-3,
        n_paths: 40_000,
        max_time: 4.0,
        seed: 1,
    };
    let x = [0.5];
    let now = estimate_value(&f.grid, &o, Some(&masks), &cfg, &x, Strategy::StopImmediately)?;
    let immediate_ok = now.mean == o.eval_phi(&x) && now.se == 0.0;
    let u = f.trace_at(&x).unwrap_or(f64::NAN);
    let on = estimate_value(&f.grid, &o, Some(&masks), &cfg, &x, Strategy::StopOnContact)?;
    let fixed = estimate_value(&f.grid, &o, Some(&masks), &cfg, &x, Strategy::FixedTime { t: 0.1 })?;
    let agree = (on.mean - u).abs() <= 3.0 * on.se;
    let dominates = on.mean >= fixed.mean - 3.0 * fixed.se.hypot(on.se);
    Ok((
        immediate_ok && agree && dominates,
        format!(
            "u(0.5) = {u:.5}, J(contact) = {:.5} ± {:.5}, J(t=0.1) = {:.5}",
            on.mean, on.se, fixed.mean
        ),
    ))
}

fn martingale_examples() -> Outcome {
    let cfg = StableProcessConfig {
        alpha: 1.0,
        dt: 1e-3,
        n_paths: 40_000,
        max_time: 4.0,
        seed: 2,
    };
    let g = build_grid(1, 0.5, 1.0, 1.0, 65, 33)?;
    let neg = ObstacleSpec::constant(1, -1.0);
    let zero = solve_obstacle(&assemble_operator(&g), &neg, &solver_cfg(&g))?;
    let z = martingale_check(&zero, &neg, &cfg, &[0.1], 1e-3, 1e-9)?;
    let (f, o) = windowed_cap(257)?;
    let tol = 1e-9 * data_scale(&f, &o);
    let cap = martingale_check(&f, &o, &cfg, &[0.5], 1e-3, tol)?;
    let contact_rejected = martingale_check(&f, &o, &cfg, &[0.0], 1e-3, tol).is_err();
    Ok((
        z.gap == 0.0 && cap.passed && contact_rejected,
        format!(
            "zero gap {}; cap gap {:.2e} <= 3 SE {:.2e} + drift {:.2e}; contact rejected: {contact_rejected}",
            z.gap,
            cap.gap,
            3.0 * cap.se,
            cap.drift_budget
        ),
    ))
}
