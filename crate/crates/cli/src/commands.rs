use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use wigner_flow::current::{fill_current_grid, CurrentEvaluator};
use wigner_flow::eigenstates::fd::{fd_diagonalize, FdGrid};
use wigner_flow::eigenstates::morse_energy;
use wigner_flow::grid::{GridSpec, PhaseGrid};
use wigner_flow::lee_scully::{current_scale, ls_continuity_residual, ls_equi_wigner_test};
use wigner_flow::potential::{HarmonicPotential, Potential};
use wigner_flow::topology::fieldline::{axis_seeds, boundary_seeds};
use wigner_flow::topology::{
    equi_wigner_deviation, extract_zero_contours, find_stagnation_points, integrate_fieldline, topological_charge, Rect,
    StagnationPoint, Termination,
};
use wigner_flow::validation::{self, Check, Report};
use wigner_flow::wigner::{fill_grid, WignerEvaluator};

use crate::config::{PotentialKind, RunConfig, SeedPolicy};
use crate::output::{float, Sink};

pub struct Run {
    pub cfg: RunConfig,
    pub spec: GridSpec,
    pub sink: Sink,
}

impl Run {
    fn evaluator(&self) -> Result<CurrentEvaluator> {
        let ev = WignerEvaluator::new(self.cfg.state()?, &self.spec, self.cfg.quadrature())?;
        Ok(CurrentEvaluator::new(ev, self.cfg.series())?)
    }

    fn current_grid(&self, ce: &CurrentEvaluator) -> Result<PhaseGrid> {
        Ok(fill_current_grid(ce, &self.spec, self.cfg.series.w_floor_rel)?)
    }

    fn window(&self) -> Rect {
        Rect::from(&self.spec)
    }
}

fn convergence_check(grid: &PhaseGrid) -> Result<Check> {
    let bad = grid.channel("converged")?.iter().filter(|&&c| c != 1.0).count();
    Ok(Check::equal("grid: samples without series convergence", bad as f64, 0.0))
}

pub fn spectrum(run: &mut Run) -> Result<Vec<Check>> {
    let cfg = &run.cfg;
    let (closed, pot, grid): (Vec<f64>, Box<dyn Potential>, FdGrid) = match cfg.morse_params()? {
        Some(params) => {
            let e = (0..=params.n_max).map(|n| morse_energy(&params, n)).collect::<wigner_flow::Result<_>>()?;
            let pot = params.potential;
            let s_min = params.lambda - params.n_max as f64 - 0.5;
            let grid = FdGrid::new(pot.x0() - 2.5 / pot.a(), pot.x0() + 18.0 / (pot.a() * s_min), 4096);
            (e, Box::new(pot), grid)
        }
        None => {
            let sys = &cfg.system;
            let e = (0..6).map(|n| sys.hbar * sys.omega * (n as f64 + 0.5)).collect();
            let length = (sys.hbar / (sys.mass * sys.omega)).sqrt();
            (e, Box::new(HarmonicPotential::new(sys.mass, sys.omega)?), FdGrid::new(-12.0 * length, 12.0 * length, 4097))
        }
    };
    let fd = fd_diagonalize(pot.as_ref(), cfg.system.mass, cfg.system.hbar, grid, closed.len())?;
    let mut worst = 0.0f64;
    let rows: Vec<String> = closed
        .iter()
        .zip(&fd.energies)
        .enumerate()
        .map(|(n, (e, f))| {
            worst = worst.max((e - f).abs());
            format!("{n},{},{},{}", float(*e), float(*f), float((e - f).abs()))
        })
        .collect();
    run.sink.table_csv("spectrum.csv", "n,energy,energy_fd,abs_diff", &rows)?;
    for (n, e) in closed.iter().enumerate() {
        println!("E_{n} = {e:.10}  (fd {:.10})", fd.energies[n]);
    }
    match cfg.morse_params()? {
        Some(params) => Ok(validation::spectrum_checks(&params, 4096)?),
        None => Ok(vec![Check::below("spectrum: max |E_closed - E_fd|", worst, 1e-5)]),
    }
}

pub fn wigner_grid(run: &mut Run) -> Result<Vec<Check>> {
    let ev = WignerEvaluator::new(run.cfg.state()?, &run.spec, run.cfg.quadrature())?;
    let grid = fill_grid(&ev, &run.spec, &[1])?;
    run.sink.grid_csv("wigner_grid.csv", &grid, &["W", "dWdx", "dWdp"])?;
    println!("W_max = {:.10}", grid.max_abs("W")?);
    Ok(Vec::new())
}

pub fn current_grid(run: &mut Run) -> Result<Vec<Check>> {
    let ce = run.evaluator()?;
    let grid = run.current_grid(&ce)?;
    run.sink.grid_csv("current_grid.csv", &grid, &["W", "J_x", "J_p", "j_x", "j_p", "dJpdp", "divJ", "terms_used", "converged"])?;
    let checks = vec![validation::stationarity_check(&grid, "")?, convergence_check(&grid)?];
    Ok(checks)
}

pub fn divergence_grid(run: &mut Run) -> Result<Vec<Check>> {
    let ce = run.evaluator()?;
    let grid = run.current_grid(&ce)?;
    run.sink.grid_csv(
        "divergence_grid.csv",
        &grid,
        &["W", "w_x", "w_p", "divw", "dWdt", "comoving_residual", "singular_mask", "terms_used"],
    )?;
    Ok(vec![convergence_check(&grid)?])
}

#[derive(Serialize)]
struct StagnationRecord {
    x: f64,
    p: f64,
    index: i32,
    winding_residual: f64,
    converged: bool,
    accepted: bool,
    raw_winding: f64,
    ill_conditioned: bool,
    multi_degenerate: bool,
    radius: f64,
}

impl From<&StagnationPoint> for StagnationRecord {
    fn from(s: &StagnationPoint) -> Self {
        Self {
            x: s.x,
            p: s.p,
            index: s.index,
            winding_residual: s.winding_residual,
            converged: s.refinement_converged,
            accepted: s.accepted(),
            raw_winding: s.raw_winding,
            ill_conditioned: s.ill_conditioned,
            multi_degenerate: s.multi_degenerate,
            radius: s.radius,
        }
    }
}

#[derive(Serialize)]
struct Charge {
    boundary_charge: i32,
    index_sum: i32,
    accepted: usize,
    rejected: usize,
}

pub fn stagnation(run: &mut Run) -> Result<Vec<Check>> {
    let ce = run.evaluator()?;
    let points = find_stagnation_points(&ce, run.window(), &run.cfg.stagnation())?;
    let charge = topological_charge(&ce, run.window(), run.cfg.topology.boundary_samples)?;
    let accepted: Vec<&StagnationPoint> = points.iter().filter(|s| s.accepted()).collect();
    let index_sum: i32 = accepted.iter().map(|s| s.index).sum();
    let records: Vec<StagnationRecord> = points.iter().map(StagnationRecord::from).collect();
    run.sink.json_value("stagnation.json", &records)?;
    run.sink.json_object(
        "charge.json",
        &Charge { boundary_charge: charge, index_sum, accepted: accepted.len(), rejected: points.len() - accepted.len() },
    )?;
    for s in &accepted {
        println!("({:+.6}, {:+.6})  index {:+}", s.x, s.p, s.index);
    }
    println!("{} accepted, {} rejected; index sum {index_sum}, boundary winding {charge}", accepted.len(), points.len() - accepted.len());
    let residual = accepted.iter().fold(0.0f64, |m, s| m.max(s.winding_residual));
    Ok(vec![
        Check::below("stagnation: max accepted winding residual", residual, 0.05),
        Check::equal("stagnation: index sum minus boundary winding", (index_sum - charge) as f64, 0.0),
    ])
}

#[derive(Serialize)]
struct CrossingRecord {
    vertex_index: usize,
    x: f64,
    p: f64,
    into_negative: bool,
}

#[derive(Serialize)]
struct FieldlineRecord {
    fieldline_id: usize,
    seed: [f64; 2],
    direction: f64,
    termination: Termination,
    vertices: usize,
    arc_length: f64,
    w_seed: f64,
    /// `None` below ten vertices
    deviation: Option<f64>,
    crossings: Vec<CrossingRecord>,
}

#[derive(Serialize)]
struct FieldlineSummary {
    w_max: f64,
    lines: Vec<FieldlineRecord>,
}

pub fn fieldlines(run: &mut Run) -> Result<Vec<Check>> {
    let ce = run.evaluator()?;
    let window = run.window();
    let controls = run.cfg.fieldline_controls(window);
    let f = &run.cfg.fieldlines;
    let mut seeds = Vec::new();
    if matches!(f.seed_policy, SeedPolicy::Boundary | SeedPolicy::Both) {
        seeds.extend(boundary_seeds(&window, f.boundary_seeds));
    }
    if matches!(f.seed_policy, SeedPolicy::Axis | SeedPolicy::Both) && window.contains(window.x_min, 0.0) {
        let (lo, hi) = ce.wigner().state().turning_points()?;
        let (lo, hi) = (lo.max(window.x_min), hi.min(window.x_max));
        if hi > lo {
            seeds.extend(axis_seeds(lo, hi, f.axis_seeds));
        }
    }
    let jobs: Vec<([f64; 2], f64)> = seeds.iter().flat_map(|&s| [(s, 1.0), (s, -1.0)]).collect();
    let lines = jobs.par_iter().map(|&(s, d)| integrate_fieldline(&ce, s, d, &controls)).collect::<wigner_flow::Result<Vec<_>>>()?;
    let w_max = fill_grid(ce.wigner(), &run.spec, &[])?.max_abs("W")?;

    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (id, line) in lines.iter().enumerate() {
        let mut arc = 0.0;
        for (k, v) in line.vertices.iter().enumerate() {
            if k > 0 {
                let u = line.vertices[k - 1];
                arc += (v[0] - u[0]).hypot(v[1] - u[1]);
            }
            rows.push(format!("{id},{k},{},{},{},{}", float(v[0]), float(v[1]), float(line.w_along[k]), float(arc)));
        }
        records.push(FieldlineRecord {
            fieldline_id: id,
            seed: line.seed,
            direction: line.direction,
            termination: line.termination,
            vertices: line.vertices.len(),
            arc_length: line.arc_length,
            w_seed: line.w_along[0],
            deviation: equi_wigner_deviation(line, w_max).ok().map(|r| r.deviation),
            crossings: line
                .crossings
                .iter()
                .map(|c| CrossingRecord { vertex_index: c.segment, x: c.x, p: c.p, into_negative: c.into_negative })
                .collect(),
        });
    }
    run.sink.table_csv("fieldlines.csv", "fieldline_id,vertex_index,x,p,W,arc_length", &rows)?;
    let crossing = records.iter().filter(|r| r.crossings.len() >= 2).count();
    println!("{} fieldlines, {crossing} with two or more W sign changes", records.len());
    run.sink.json_object("fieldlines.json", &FieldlineSummary { w_max, lines: records })?;
    Ok(Vec::new())
}

pub fn contours(run: &mut Run) -> Result<Vec<Check>> {
    let ce = run.evaluator()?;
    let grid = run.current_grid(&ce)?;
    let mut rows = Vec::new();
    for channel in ["J_x", "J_p", "W"] {
        let set = extract_zero_contours(&grid, channel)?;
        for (id, line) in set.polylines.iter().enumerate() {
            for (k, q) in line.points.iter().enumerate() {
                rows.push(format!("{channel},{id},{k},{},{},{}", float(q[0]), float(q[1]), u8::from(line.closed)));
            }
        }
        let closed = set.polylines.iter().filter(|l| l.closed).count();
        println!("{channel}: {} polylines ({closed} closed)", set.polylines.len());
    }
    run.sink.table_csv("contours.csv", "channel,polyline_id,vertex_index,x,p,closed", &rows)?;
    Ok(Vec::new())
}

#[derive(Serialize)]
struct LeeScullySummary {
    #[serde(flatten)]
    residual: wigner_flow::lee_scully::LsResidual,
    equi_wigner_max: f64,
    equi_wigner_normalized: f64,
}

pub fn lee_scully(run: &mut Run) -> Result<Vec<Check>> {
    let ce = run.evaluator()?;
    let grid = run.current_grid(&ce)?;
    let residual = ls_continuity_residual(&grid, 1e-10)?;
    let mut out = PhaseGrid::new(run.spec);
    out.insert("R", residual.field.clone())?;
    out.insert("masked", residual.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())?;
    run.sink.grid_csv("lee_scully.csv", &out, &["R", "masked"])?;
    let probes = validation::random_probes(&run.spec, 100, 7);
    let report = ls_equi_wigner_test(&ce, &probes, current_scale(&grid)?)?;
    println!(
        "R_max/scale = {:.4e}, baseline/scale = {:.4e}, masked = {:.2}%",
        residual.r_max / residual.scale,
        residual.baseline_max / residual.scale,
        100.0 * residual.masked_fraction
    );
    let check = validation::lee_scully_baseline_check(&residual);
    run.sink.json_object(
        "lee_scully.json",
        &LeeScullySummary { residual, equi_wigner_max: report.max_abs, equi_wigner_normalized: report.normalized },
    )?;
    Ok(vec![check])
}

#[derive(Serialize)]
struct ValidationRecord<'a> {
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    stagnation: Option<StagnationCounts>,
    checks: &'a [Check],
}

#[derive(Serialize)]
struct StagnationCounts {
    accepted: usize,
    positive: usize,
    negative: usize,
    boundary_charge: i32,
}

/// Whether the configured system is expected to show the non-classical flow features.
fn expects_quantum_features(cfg: &RunConfig) -> bool {
    cfg.system.potential == PotentialKind::Morse && cfg.state.n >= 1
}

pub fn validate(run: &mut Run) -> Result<Vec<Check>> {
    let cfg = run.cfg.clone();
    let mut report = Report::default();
    if let Some(params) = cfg.morse_params()? {
        report.extend(validation::spectrum_checks(&params, 4096)?);
    }
    report.extend(validation::wigner_integrity_checks(&cfg.state()?, cfg.quadrature())?);
    let ce = run.evaluator()?;
    let grid = run.current_grid(&ce)?;
    report.extend([validation::stationarity_check(&grid, "")?, convergence_check(&grid)?]);
    let probes = validation::random_probes(&run.spec, 100, 1);
    report.extend(validation::series_checks(&ce, &probes, current_scale(&grid)?, "")?);

    let mut counts = None;
    match cfg.system.potential {
        PotentialKind::Harmonic => report.extend(validation::harmonic_checks(&ce, &grid, &cfg.stagnation())?),
        PotentialKind::Morse => {
            let controls = cfg.fieldline_controls(run.window());
            let summary = validation::flow_summary(&ce, &grid, &cfg.stagnation(), &controls)?;
            report.extend(validation::flow_invariant_checks(&summary));
            let residual = ls_continuity_residual(&grid, 1e-10)?;
            report.extend([validation::lee_scully_baseline_check(&residual)]);
            if expects_quantum_features(&cfg) {
                report.extend(validation::flow_claim_checks(&summary));
                report.extend(validation::lee_scully_checks(&ce, &grid, &residual)?);
            }
            counts = Some(StagnationCounts {
                accepted: summary.stagnation.iter().filter(|s| s.accepted()).count(),
                positive: summary.positive,
                negative: summary.negative,
                boundary_charge: summary.boundary_charge,
            });
        }
    }
    for c in &report.checks {
        println!("{} {}: {:.6e} (need {} {:e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured, c.relation.symbol(), c.threshold);
    }
    run.sink.json_object("validation.json", &ValidationRecord { passed: report.passed(), stagnation: counts, checks: &report.checks })?;
    Ok(report.checks)
}
