//! Subcommand bodies. Each returns the input and output artifact paths
//! that go into the manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use fracfb::config::RunConfig;
use fracfb::freeboundary::{
    analyze_free_boundary, bisect_critical_height, data_scale, extract_contact_and_boundary,
    with_height, CriticalBracket, FreeBoundaryReport,
};
use fracfb::selftest::{run_selftest, SelftestReport};
use fracfb::solver::assemble_operator;
use fracfb::stopping::{estimate_value, far_field_solve, martingale_check, write_estimates_csv, MartingaleReport};
use fracfb::{solve_obstacle, ExtensionGrid, ObstacleSpec, SolutionField};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::plot;

pub struct Artifacts {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

pub fn solve(cfg: &RunConfig, out: &Path) -> CliResult<Artifacts> {
    let grid = cfg.build_grid()?;
    let obstacle = cfg.build_obstacle()?;
    let solver = cfg.solver_config(&grid)?;
    let field = if cfg.far_field_passes > 0 {
        far_field_solve(&grid, &obstacle, &solver, cfg.far_field_passes)?
    } else {
        solve_obstacle(&assemble_operator(&grid), &obstacle, &solver)?
    };
    eprintln!(
        "solved {} nodes in {} sweeps, residual {:.3e}, omega {:.4}",
        grid.len(),
        field.iterations,
        field.residual_norm,
        field.omega
    );
    let (bin, sidecar, trace, script) = (
        out.join("field.bin"),
        out.join("field.json"),
        out.join("trace.csv"),
        out.join("plot_trace.gp"),
    );
    field.write(&bin, &sidecar)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&trace)?);
    field.write_trace_csv(&obstacle, &mut w)?;
    w.flush()?;
    std::fs::write(&script, plot::trace_script(grid.n))?;
    Ok(Artifacts {
        inputs: vec![],
        outputs: vec![bin, sidecar, trace, script],
    })
}

/// Reads a field and checks it was computed on the configured grid.
fn load_field(cfg: &RunConfig, bin: &Path) -> CliResult<(SolutionField, PathBuf)> {
    let sidecar = bin.with_extension("json");
    if !bin.exists() {
        return Err(CliError::artifact(bin, std::io::ErrorKind::NotFound.into()));
    }
    if !sidecar.exists() {
        return Err(CliError::artifact(&sidecar, std::io::ErrorKind::NotFound.into()));
    }
    let field = SolutionField::read(bin, Some(&sidecar))?;
    let want = cfg.build_grid()?.params();
    if field.grid.params() != want {
        return Err(CliError::Usage(format!(
            "field grid {:?} does not match the configured grid {:?}",
            field.grid.params(),
            want
        )));
    }
    Ok((field, sidecar))
}

fn classify_report(cfg: &RunConfig, field: &SolutionField, obstacle: &ObstacleSpec) -> CliResult<FreeBoundaryReport> {
    Ok(analyze_free_boundary(field, obstacle, cfg.solver.tol, &cfg.classify)?)
}

pub fn analyze(cfg: &RunConfig, field_path: &Path, out: &Path) -> CliResult<Artifacts> {
    let (field, sidecar) = load_field(cfg, field_path)?;
    let obstacle = cfg.build_obstacle()?;
    let report = classify_report(cfg, &field, &obstacle)?;
    let mut outputs = report.write_point_csvs(out)?;
    let names: Vec<String> = outputs
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    eprintln!("{} free boundary points, {} radial tables", report.points.len(), names.len());
    let script = out.join("plot_radial.gp");
    std::fs::write(&script, plot::radial_script(&names))?;
    outputs.push(script);
    Ok(Artifacts {
        inputs: vec![field_path.to_path_buf(), sidecar],
        outputs,
    })
}

pub fn classify(cfg: &RunConfig, field_path: &Path, out: &Path) -> CliResult<Artifacts> {
    let (field, sidecar) = load_field(cfg, field_path)?;
    let obstacle = cfg.build_obstacle()?;
    let report = classify_report(cfg, &field, &obstacle)?;
    let c = &report.counts;
    eprintln!(
        "{} free boundary points: {} regular, {} singular, {} unresolved",
        report.points.len(),
        c.regular,
        c.singular,
        c.unresolved
    );
    let path = out.join("report.json");
    report.write(&path)?;
    Ok(Artifacts {
        inputs: vec![field_path.to_path_buf(), sidecar],
        outputs: vec![path],
    })
}

/// Ten points along the first axis where `u - φ` clearly exceeds the
/// contact threshold, evenly spread over the candidates.
fn default_points(grid: &ExtensionGrid, field: &SolutionField, obstacle: &ObstacleSpec, tol: f64) -> Vec<Vec<f64>> {
    let mut cands = Vec::new();
    for i in 0..grid.nx {
        let x = grid.x_coord(i);
        if x.abs() > 0.9 * grid.trace_window {
            continue;
        }
        let pt = [x, 0.0];
        let Some(p) = grid.nearest_trace(&pt[..grid.n]) else {
            continue;
        };
        if grid.is_fixed(p) {
            continue;
        }
        if field.trace[p] - obstacle.eval_phi(&pt[..grid.n]) > 100.0 * tol {
            cands.push(pt[..grid.n].to_vec());
        }
    }
    if cands.len() <= 10 {
        return cands;
    }
    (0..10).map(|k| cands[k * (cands.len() - 1) / 9].clone()).collect()
}

#[derive(Serialize)]
struct MartingaleRow {
    x: Vec<f64>,
    delta: f64,
    #[serde(flatten)]
    report: MartingaleReport,
}

pub fn mc(cfg: &RunConfig, field_path: &Path, out: &Path) -> CliResult<Artifacts> {
    let (field, sidecar) = load_field(cfg, field_path)?;
    let obstacle = cfg.build_obstacle()?;
    let process = cfg.process_config()?;
    let grid = &field.grid;
    let tol = cfg
        .classify
        .contact_tol
        .unwrap_or(10.0 * cfg.solver.tol * data_scale(&field, &obstacle));
    let masks = extract_contact_and_boundary(&field, &obstacle, tol)?;
    let points = if cfg.mc.points.is_empty() {
        default_points(grid, &field, &obstacle, tol)
    } else {
        cfg.mc.points.clone()
    };
    if points.is_empty() {
        return Err(CliError::Usage("no continuation-region points to sample".into()));
    }
    let mut estimates = Vec::new();
    for x in &points {
        for &strategy in &cfg.mc.strategies {
            let e = estimate_value(grid, &obstacle, Some(&masks), &process, x, strategy)?;
            eprintln!("x={:?} {}: J={:.6e} SE={:.2e}", e.x, e.strategy, e.mean, e.se);
            estimates.push(e);
        }
    }
    let path = out.join("estimates.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    write_estimates_csv(&estimates, &mut w)?;
    w.flush()?;
    let mut outputs = vec![path];
    if let Some(delta) = cfg.mc.martingale_delta {
        let mut rows = Vec::new();
        for x in &points {
            let report = martingale_check(&field, &obstacle, &process, x, delta, tol)?;
            rows.push(MartingaleRow {
                x: x.clone(),
                delta,
                report,
            });
        }
        let path = out.join("martingale.json");
        std::fs::write(&path, serde_json::to_string_pretty(&rows)? + "\n")?;
        outputs.push(path);
    }
    Ok(Artifacts {
        inputs: vec![field_path.to_path_buf(), sidecar],
        outputs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Cap height of a cap obstacle.
    H0,
    /// Fractional order.
    S,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub contact_nodes: usize,
    /// Contact node count times the trace cell measure.
    pub contact_measure: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    pub monotone: bool,
    pub bracket: Option<CriticalBracket>,
}

pub fn sweep_values(from: f64, to: f64, steps: usize, log: bool) -> CliResult<Vec<f64>> {
    if steps < 2 {
        return Err(CliError::Usage("a sweep needs at least two steps".into()));
    }
    if !(from.is_finite() && to.is_finite()) || (log && !(from > 0.0 && to > 0.0)) {
        return Err(CliError::Usage(format!("invalid sweep range [{from}, {to}]")));
    }
    let t = |k: usize| k as f64 / (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| {
            if log {
                from * (to / from).powf(t(k))
            } else {
                from + (to - from) * t(k)
            }
        })
        .collect())
}

pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64], bisect_iters: usize, out: &Path) -> CliResult<Artifacts> {
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        match param {
            SweepParam::H0 => c.obstacle = with_height(&cfg.obstacle, v)?,
            SweepParam::S => c.grid.s = v,
        }
        let grid = c.build_grid()?;
        let obstacle = c.build_obstacle()?;
        let solver = c.solver_config(&grid)?;
        let field = solve_obstacle(&assemble_operator(&grid), &obstacle, &solver)?;
        let tol = c
            .classify
            .contact_tol
            .unwrap_or(10.0 * solver.tol * data_scale(&field, &obstacle));
        let nodes = extract_contact_and_boundary(&field, &obstacle, tol)?.contact_count();
        eprintln!("{param:?}={v:.6e}: {nodes} contact nodes");
        rows.push(SweepRow {
            value: v,
            contact_nodes: nodes,
            contact_measure: nodes as f64 * grid.hx.powi(grid.n as i32),
        });
    }
    let increasing = values.windows(2).all(|w| w[1] >= w[0]);
    let monotone = rows.windows(2).all(|w| {
        if increasing {
            w[1].contact_nodes >= w[0].contact_nodes
        } else {
            w[1].contact_nodes <= w[0].contact_nodes
        }
    });
    let mut bracket = None;
    if param == SweepParam::H0 {
        let grid = cfg.build_grid()?;
        let solver = cfg.solver_config(&grid)?;
        let pair = rows.windows(2).find_map(|w| {
            let (a, b) = if w[0].value <= w[1].value { (&w[0], &w[1]) } else { (&w[1], &w[0]) };
            (a.contact_nodes <= 1 && b.contact_nodes > 1 && a.value > 0.0).then_some((a.value, b.value))
        });
        if let Some((lo, hi)) = pair {
            let b = bisect_critical_height(&grid, &cfg.obstacle, &solver, lo, hi, bisect_iters)?;
            eprintln!("collapse bracket [{:.6e}, {:.6e}] after {} solves", b.lo, b.hi, b.solves);
            bracket = Some(b);
        }
    }
    let csv = out.join("sweep.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&csv)?);
    writeln!(w, "{},contact_nodes,contact_measure", param_name(param))?;
    for r in &rows {
        writeln!(w, "{:.12e},{},{:.12e}", r.value, r.contact_nodes, r.contact_measure)?;
    }
    w.flush()?;
    let summary = SweepSummary {
        param,
        rows,
        monotone,
        bracket,
    };
    let json = out.join("sweep.json");
    std::fs::write(&json, serde_json::to_string_pretty(&summary)? + "\n")?;
    let script = out.join("plot_sweep.gp");
    std::fs::write(&script, plot::sweep_script(param_name(param)))?;
    Ok(Artifacts {
        inputs: vec![],
        outputs: vec![csv, json, script],
    })
}

fn param_name(p: SweepParam) -> &'static str {
    match p {
        SweepParam::H0 => "h0",
        SweepParam::S => "s",
    }
}

pub fn selftest() -> SelftestReport {
    run_selftest(|c| {
        println!(
            "{} {}::{} [{:.2} s] {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.module,
            c.name,
            c.seconds,
            c.detail
        );
    })
}
