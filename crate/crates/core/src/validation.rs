//! Measured checks of the invariants the rest of the crate relies on.
//!
//! Each function evaluates one family of properties and returns [`Check`]
//! records carrying the measured value, the threshold and the verdict, so the
//! same numbers can be printed by a test harness or written to a report.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::current::{CurrentEvaluator, SeriesControl};
use crate::eigenstates::fd::{fd_diagonalize, FdGrid};
use crate::eigenstates::{morse_energy, Eigenstate, MorseSpectrumParams};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PhaseGrid};
use crate::lee_scully::{current_scale, ls_continuity_residual, ls_equi_wigner_test, LsResidual};
use crate::quadrature::GaussLegendre;
use crate::topology::fieldline::axis_seeds;
use crate::topology::{
    equi_wigner_deviation, extract_zero_contours, find_stagnation_points, integrate_fieldline, topological_charge, Fieldline,
    FieldlineControls, Rect, StagnationOptions, StagnationPoint, Termination,
};
use crate::wigner::{QuadratureConfig, WignerEvaluator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::Above => ">",
            Relation::AtLeast => ">=",
            Relation::Equal => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, relation: Relation, threshold: f64) -> Self {
        let passed = match relation {
            Relation::Below => measured < threshold,
            Relation::Above => measured > threshold,
            Relation::AtLeast => measured >= threshold,
            Relation::Equal => measured == threshold,
        };
        Self { name: name.into(), measured, relation, threshold, passed }
    }

    pub fn below(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Relation::Below, threshold)
    }

    pub fn above(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Relation::Above, threshold)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Relation::AtLeast, threshold)
    }

    pub fn equal(name: impl Into<String>, measured: f64, expected: f64) -> Self {
        Self::new(name, measured, Relation::Equal, expected)
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::equal(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failing(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Closed-form Morse energies against a finite-difference diagonalization
/// on `n` points, and the number of bound states below the well depth.
pub fn spectrum_checks(params: &MorseSpectrumParams, n: usize) -> Result<Vec<Check>> {
    let pot = params.potential;
    let s_min = params.lambda - params.n_max as f64 - 0.5;
    let grid = FdGrid::new(pot.x0() - 2.5 / pot.a(), pot.x0() + 18.0 / (pot.a() * s_min), n);
    let fd = fd_diagonalize(&pot, params.mass, params.hbar, grid, params.n_max + 2)?;
    let mut worst = 0.0f64;
    for k in 0..=params.n_max {
        worst = worst.max((morse_energy(params, k)? - fd.energies[k]).abs());
    }
    let below = fd.energies.iter().filter(|&&e| e < pot.depth()).count();
    Ok(vec![
        Check::below("spectrum: max |E_closed - E_fd| over bound states", worst, 1e-5),
        Check::equal("spectrum: finite-difference states below the well depth", below as f64, (params.n_max + 1) as f64),
    ])
}

/// `|φ(p)|²` by quadrature of the Fourier integral over `support`.
pub fn momentum_density(state: &Eigenstate, support: (f64, f64), p: f64) -> f64 {
    let hbar = state.hbar();
    let rule = GaussLegendre::new(24);
    let width = (std::f64::consts::PI * hbar / (4.0 * p.abs().max(1.0))).min(0.25);
    let panels = ((support.1 - support.0) / width).ceil() as usize;
    let (mut c, mut s) = (0.0, 0.0);
    for (x, w) in rule.composite(support.0, support.1, panels) {
        let psi = state.psi(x);
        c += w * psi * (p * x / hbar).cos();
        s += w * psi * (p * x / hbar).sin();
    }
    (c * c + s * s) / (2.0 * std::f64::consts::PI * hbar)
}

/// Normalization and both marginals of `W`, and its quadrature derivatives
/// against finite differences at a few interior points.
pub fn wigner_integrity_checks(state: &Eigenstate, config: QuadratureConfig) -> Result<Vec<Check>> {
    let support = state.support(config.tail_tolerance)?;
    let peak = momentum_density(state, support, 0.0).max(momentum_density(state, support, 0.5));
    let mut p_cut = 1.0;
    while momentum_density(state, support, p_cut) > 1e-14 * peak || momentum_density(state, support, p_cut + 0.5) > 1e-14 * peak {
        p_cut += 0.5;
        if p_cut > 200.0 {
            return Err(Error::Precondition("momentum density does not decay".into()));
        }
    }
    let spec = GridSpec::new(support.0, support.1, 2, -p_cut, p_cut, 2)?;
    let ev = WignerEvaluator::new(state.clone(), &spec, config)?;

    let rule = GaussLegendre::new(16);
    let xs = rule.composite(support.0, support.1, ((support.1 - support.0) / 0.5).ceil() as usize);
    let ps = rule.composite(-p_cut, p_cut, (p_cut / 0.25).ceil() as usize);
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&(x, _)| {
            let slice = ev.slice(x)?;
            Ok(ps.iter().map(|&(p, _)| slice.moments(p, 0).w()).collect())
        })
        .collect::<Result<_>>()?;

    let x_marginal: Vec<f64> = rows.iter().map(|r| r.iter().zip(&ps).map(|(w, (_, wp))| w * wp).sum()).collect();
    let norm: f64 = x_marginal.iter().zip(&xs).map(|(m, (_, wx))| m * wx).sum();
    let x_err = x_marginal.iter().zip(&xs).fold(0.0f64, |m, (v, &(x, _))| m.max((v - state.psi(x).powi(2)).abs()));
    let p_err = ps
        .par_iter()
        .enumerate()
        .map(|(j, &(p, _))| {
            let v: f64 = rows.iter().zip(&xs).map(|(r, (_, wx))| r[j] * wx).sum();
            (v - momentum_density(state, support, p)).abs()
        })
        .reduce(|| 0.0, f64::max);

    // quadrature derivatives against differences of the next lower order
    let (x_lo, x_hi) = state.turning_points()?;
    let probes = [(x_lo + 0.3 * (x_hi - x_lo), 0.45), (x_lo + 0.6 * (x_hi - x_lo), -0.8), (0.5 * (x_lo + x_hi), 1.3)];
    let h = 1e-2;
    let mut dp_err = 0.0f64;
    let mut dx_err = 0.0f64;
    for &(x, p) in &probes {
        for k in 1..=8 {
            let lower = |p: f64| ev.moments(x, p, k - 1).map(|m| m.p_derivs[k - 1]);
            let fd = (lower(p - 2.0 * h)? - 8.0 * lower(p - h)? + 8.0 * lower(p + h)? - lower(p + 2.0 * h)?) / (12.0 * h);
            let exact = ev.wigner_dp(x, p, k)?;
            // scale by the spread of the order at this x to avoid accidental zeros
            let scale = (0..=8).map(|q| ev.wigner_dp(x, 0.25 * q as f64, k)).collect::<Result<Vec<_>>>()?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            dp_err = dp_err.max((exact - fd).abs() / scale);
        }
        let hx = 1e-3;
        let w = |x: f64| ev.wigner(x, p);
        let fd = (w(x - 2.0 * hx)? - 8.0 * w(x - hx)? + 8.0 * w(x + hx)? - w(x + 2.0 * hx)?) / (12.0 * hx);
        let exact = ev.wigner_dx(x, p)?;
        dx_err = dx_err.max((exact - fd).abs() / exact.abs().max(1e-3));
    }

    Ok(vec![
        Check::below("wigner: |∫∫W - 1|", (norm - 1.0).abs(), 1e-6),
        Check::below("wigner: max |∫W dp - |ψ(x)|²|", x_err, 1e-6),
        Check::below("wigner: max |∫W dx - |φ(p)|²|", p_err, 1e-6),
        Check::below("wigner: ∂_p^k W vs finite differences, k <= 8 (rel)", dp_err, 1e-5),
        Check::below("wigner: ∂_x W vs finite differences (rel)", dx_err, 1e-5),
    ])
}

/// `max |∇·J| / max |W|` over a filled current grid.
pub fn stationarity_check(grid: &PhaseGrid, label: &str) -> Result<Check> {
    let ratio = grid.max_abs("divJ")? / grid.max_abs("W")?;
    Ok(Check::below(format!("stationarity{label}: max |div J| / W_max"), ratio, 1e-6))
}

/// Reproducible uniform probes inside `spec`.
pub fn random_probes(spec: &GridSpec, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.random_range(spec.x_min..spec.x_max), rng.random_range(spec.p_min..spec.p_max)))
        .collect()
}

/// The truncated series against a blind 40-term sum and against a run with
/// doubled cap and halved tolerance.
pub fn series_checks(ce: &CurrentEvaluator, probes: &[(f64, f64)], j_scale: f64, label: &str) -> Result<Vec<Check>> {
    let base = ce.sample_points(probes)?;
    let brute = ce.clone().with_series(SeriesControl { l_max: 40, rtol: 0.0, atol: 0.0 })?.sample_points(probes)?;
    let s = ce.series();
    let tight = ce.clone().with_series(SeriesControl { l_max: 2 * s.l_max, rtol: 0.5 * s.rtol, atol: s.atol })?.sample_points(probes)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-10 * j_scale);
    let brute_err = base.iter().zip(&brute).fold(0.0f64, |m, (a, b)| m.max(rel(a.jp, b.jp)));
    let tight_err = base.iter().zip(&tight).fold(0.0f64, |m, (a, b)| m.max(rel(a.jp, b.jp)));
    let unconverged = base.iter().filter(|s| !s.converged).count();
    Ok(vec![
        Check::below(format!("series{label}: J_p vs blind 40-term sum (rel)"), brute_err, 1e-8),
        Check::below(format!("series{label}: J_p vs doubled cap, halved tolerance (rel)"), tight_err, 1e-8),
        Check::equal(format!("series{label}: probes without series convergence"), unconverged as f64, 0.0),
    ])
}

/// Largest finite value of a channel, restricted to nodes passing `keep`.
fn max_finite(grid: &PhaseGrid, name: &str, keep: impl Fn(usize) -> bool) -> Result<f64> {
    Ok(grid.channel(name)?.iter().enumerate().filter(|&(k, v)| v.is_finite() && keep(k)).fold(0.0f64, |m, (_, v)| m.max(v.abs())))
}

/// Fieldlines seeded on `p = 0` between the turning points, both directions.
pub fn axis_fieldlines(ce: &CurrentEvaluator, controls: &FieldlineControls, seeds: usize) -> Result<Vec<Fieldline>> {
    let (lo, hi) = ce.wigner().state().turning_points()?;
    let lo = lo.max(controls.window.x_min);
    let hi = hi.min(controls.window.x_max);
    let jobs: Vec<([f64; 2], f64)> = axis_seeds(lo, hi, seeds).into_iter().flat_map(|s| [(s, 1.0), (s, -1.0)]).collect();
    jobs.par_iter().map(|&(s, d)| integrate_fieldline(ce, s, d, controls)).collect()
}

/// Exactly classical flow of a harmonic eigenstate.
pub fn harmonic_checks(ce: &CurrentEvaluator, grid: &PhaseGrid, stagnation: &StagnationOptions) -> Result<Vec<Check>> {
    let jp = grid.channel("J_p")?;
    let cl = grid.channel("j_p")?;
    let correction = jp.iter().zip(cl).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let div_w = max_finite(grid, "divw", |_| true)?;
    let dwdt = max_finite(grid, "dWdt", |_| true)?;
    let w_max = grid.max_abs("W")?;
    let window = Rect::from(grid.spec());

    let controls = FieldlineControls::new(window);
    let mut lines = axis_fieldlines(ce, &controls, 8)?;
    lines.push(integrate_fieldline(ce, [1.0, 0.0], 1.0, &controls)?);
    let closed = lines.iter().filter(|l| l.termination == Termination::Closed).count();
    let deviation = lines
        .iter()
        .map(|l| equi_wigner_deviation(l, w_max).map(|r| r.deviation))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);

    let points = find_stagnation_points(ce, window, stagnation)?;
    let accepted: Vec<&StagnationPoint> = points.iter().filter(|s| s.accepted()).collect();
    let center = ce.wigner().state().potential().equilibrium();
    let (loc_err, index) = match accepted.as_slice() {
        [s] => ((s.x - center).hypot(s.p), s.index),
        _ => (f64::INFINITY, 0),
    };
    Ok(vec![
        Check::equal("harmonic: max |J_p - j_p|", correction, 0.0),
        Check::below("harmonic: max |div w| off the singular set", div_w, 1e-7),
        Check::below("harmonic: max |dW/dt| off the singular set", dwdt, 1e-7),
        Check::equal("harmonic: closed fieldlines", closed as f64, lines.len() as f64),
        Check::below("harmonic: max fieldline equi-Wigner deviation", deviation, 1e-4),
        Check::equal("harmonic: accepted stagnation points", accepted.len() as f64, 1.0),
        Check::below("harmonic: stagnation point distance from the equilibrium", loc_err, 1e-8),
        Check::equal("harmonic: stagnation index", index as f64, 1.0),
    ])
}

/// Measurements behind the flow claims for an anharmonic eigenstate.
#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub stagnation: Vec<StagnationPoint>,
    pub boundary_charge: i32,
    pub index_sum: i32,
    pub positive: usize,
    pub negative: usize,
    pub max_crossings: usize,
    /// Deviation of the first fieldline (in seed order) with two or more crossings.
    pub crossing_deviation: Option<f64>,
    pub near_contour_div_w: f64,
    pub far_contour_div_w: f64,
    pub closed_w_contours: usize,
    pub max_dw_dt: f64,
    pub max_comoving_residual: f64,
}

/// Largest `|∇·w|` sampled within `reach` of the zero set of `W`, approached
/// from both sides along the local gradient.
fn near_contour_div_w(ce: &CurrentEvaluator, grid: &PhaseGrid, reach: f64) -> Result<f64> {
    let contours = extract_zero_contours(grid, "W")?;
    let mut points = Vec::new();
    for line in &contours.polylines {
        points.extend(line.points.iter().step_by(4).copied());
    }
    let values: Vec<f64> = points
        .par_iter()
        .map(|&[x, p]| {
            let s = ce.sample(x, p)?;
            let g = s.dw_dx.hypot(s.dw_dp);
            if g == 0.0 {
                return Ok(0.0);
            }
            let mut best = 0.0f64;
            for sign in [1.0, -1.0] {
                let (qx, qp) = (x + sign * 0.5 * reach * s.dw_dx / g, p + sign * 0.5 * reach * s.dw_dp / g);
                if let Some(d) = ce.sample(qx, qp)?.div_w(ce.w_floor()) {
                    best = best.max(d.abs());
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

pub fn flow_summary(ce: &CurrentEvaluator, grid: &PhaseGrid, stagnation: &StagnationOptions, controls: &FieldlineControls) -> Result<FlowSummary> {
    let window = Rect::from(grid.spec());
    let points = find_stagnation_points(ce, window, stagnation)?;
    let accepted: Vec<&StagnationPoint> = points.iter().filter(|s| s.accepted()).collect();
    let index_sum = accepted.iter().map(|s| s.index).sum();
    let boundary_charge = topological_charge(ce, window, 1024)?;

    let w_max = grid.max_abs("W")?;
    let lines = axis_fieldlines(ce, controls, 16)?;
    let max_crossings = lines.iter().map(|l| l.crossings.len()).max().unwrap_or(0);
    let crossing_deviation = match lines.iter().find(|l| l.crossings.len() >= 2) {
        Some(l) => Some(equi_wigner_deviation(l, w_max)?.deviation),
        None => None,
    };

    let contours = extract_zero_contours(grid, "W")?;
    let spec = grid.spec();
    let far_div_w = max_finite(grid, "divw", |k| {
        let (i, j) = (k / spec.n_p, k % spec.n_p);
        contours.distance([spec.x(i), spec.p(j)]) > 0.5
    })?;

    // comoving residual against the size of either term
    let mut residual = 0.0f64;
    let dwdt = grid.channel("dWdt")?;
    let res = grid.channel("comoving_residual")?;
    let (wx, wp, gx, gp) = (grid.channel("w_x")?, grid.channel("w_p")?, grid.channel("dWdx")?, grid.channel("dWdp")?);
    for k in 0..spec.len() {
        if res[k].is_finite() {
            let local = wx[k].hypot(wp[k]) * gx[k].hypot(gp[k]);
            if local > 0.0 {
                residual = residual.max(res[k] / local);
            }
        }
    }

    Ok(FlowSummary {
        positive: accepted.iter().filter(|s| s.index == 1).count(),
        negative: accepted.iter().filter(|s| s.index == -1).count(),
        stagnation: points,
        boundary_charge,
        index_sum,
        max_crossings,
        crossing_deviation,
        near_contour_div_w: near_contour_div_w(ce, grid, 0.01)?,
        far_contour_div_w: far_div_w,
        closed_w_contours: contours.polylines.iter().filter(|l| l.closed).count(),
        max_dw_dt: dwdt.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs())) / w_max,
        max_comoving_residual: residual,
    })
}

/// Properties every stationary state must satisfy.
pub fn flow_invariant_checks(summary: &FlowSummary) -> Vec<Check> {
    let accepted: Vec<&StagnationPoint> = summary.stagnation.iter().filter(|s| s.accepted()).collect();
    let residual = accepted.iter().fold(0.0f64, |m, s| m.max(s.winding_residual));
    let generic = accepted.iter().all(|s| s.index.abs() <= 1 || s.multi_degenerate);
    vec![
        Check::below("flow: max accepted winding residual", residual, 0.05),
        Check::flag("flow: accepted indices beyond ±1 carry the degenerate flag", generic),
        Check::equal("flow: index sum minus boundary winding", (summary.index_sum - summary.boundary_charge) as f64, 0.0),
        Check::below("flow: comoving cross-check residual (rel)", summary.max_comoving_residual, 1e-5),
    ]
}

/// The non-classical features expected of an excited anharmonic eigenstate.
pub fn flow_claim_checks(summary: &FlowSummary) -> Vec<Check> {
    let accepted: Vec<&StagnationPoint> = summary.stagnation.iter().filter(|s| s.accepted()).collect();
    let unit = accepted.iter().all(|s| s.index.abs() == 1);
    vec![
        Check::at_least("flow: max W sign changes along an axis-seeded fieldline", summary.max_crossings as f64, 2.0),
        Check::above("flow: equi-Wigner deviation of the crossing fieldline", summary.crossing_deviation.unwrap_or(0.0), 0.05),
        Check::above("flow: max |div w| within 0.01 of the W zero contour", summary.near_contour_div_w, 1e3),
        Check::below("flow: max |div w| farther than 0.5 from the W zero contour", summary.far_contour_div_w, 10.0),
        Check::at_least("flow: closed W zero contours", summary.closed_w_contours as f64, 1.0),
        Check::flag("flow: accepted stagnation indices are ±1", unit),
        Check::at_least("flow: stagnation points of index +1", summary.positive as f64, 1.0),
        Check::at_least("flow: stagnation points of index -1", summary.negative as f64, 1.0),
        Check::above("flow: max |dW/dt| / W_max", summary.max_dw_dt, 1e-3),
    ]
}

/// Falsification measures for the effective-potential velocity.
pub fn lee_scully_checks(ce: &CurrentEvaluator, grid: &PhaseGrid, residual: &LsResidual) -> Result<Vec<Check>> {
    let probes = random_probes(grid.spec(), 100, 7);
    let report = ls_equi_wigner_test(ce, &probes, current_scale(grid)?)?;
    Ok(vec![
        Check::above("lee-scully: max |div(W u)| / scale", residual.r_max / residual.scale, 0.1),
        Check::below("lee-scully: fraction with W u_p = J_p", residual.coincidence_fraction, 0.05),
        Check::above("lee-scully: max |u·∇W| / max |J|", report.normalized, 0.01),
    ])
}

/// The fairness baseline: the true current is divergence free on the same cells.
pub fn lee_scully_baseline_check(residual: &LsResidual) -> Check {
    Check::below("lee-scully: baseline max |div J| / scale", residual.baseline_max / residual.scale, 1e-5)
}

/// Residual of the effective-potential continuity equation with the default floor.
pub fn lee_scully_residual(grid: &PhaseGrid) -> Result<LsResidual> {
    ls_continuity_residual(grid, 1e-10)
}
