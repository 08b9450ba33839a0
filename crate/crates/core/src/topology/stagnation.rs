//! Stagnation points of a planar field.
//!
//! A coarse lattice flags cells on which both components change sign; each
//! flagged cell seeds a damped Newton iteration with a central-difference
//! Jacobian. Converged roots are merged and classified by their winding index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::winding::{winding_index, Rect};
use super::PhaseField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StagnationOptions {
    /// Coarse cells per axis.
    pub coarse_n: usize,
    pub max_iterations: usize,
    pub winding_samples: usize,
    /// Winding circle radius in coarse cells.
    pub winding_cells: f64,
    /// Merge distance in coarse cells.
    pub merge_cells: f64,
}

impl Default for StagnationOptions {
    fn default() -> Self {
        Self { coarse_n: 64, max_iterations: 50, winding_samples: 64, winding_cells: 4.0, merge_cells: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagnationPoint {
    pub x: f64,
    pub p: f64,
    pub index: i32,
    pub raw_winding: f64,
    pub winding_residual: f64,
    pub refinement_converged: bool,
    pub ill_conditioned: bool,
    pub multi_degenerate: bool,
    pub radius: f64,
    /// `|J|` at the refined location.
    pub norm: f64,
}

impl StagnationPoint {
    /// Converged, well-conditioned and with a near-integer winding.
    pub fn accepted(&self) -> bool {
        self.refinement_converged && !self.ill_conditioned && self.winding_residual < 0.05
    }
}

struct Refined {
    at: [f64; 2],
    converged: bool,
    norm: f64,
}

fn newton<F: PhaseField + ?Sized>(field: &F, seed: [f64; 2], cell: [f64; 2], bounds: &Rect, scale: f64, opts: &StagnationOptions) -> Result<Refined> {
    let norm = |v: [f64; 2]| v[0].hypot(v[1]);
    let (hx, hp) = (cell[0] / 8.0, cell[1] / 8.0);
    let mut r = seed;
    let mut f = field.vector(r[0], r[1])?;
    for _ in 0..opts.max_iterations {
        if norm(f) <= 1e-15 * scale {
            return Ok(Refined { at: r, converged: true, norm: norm(f) });
        }
        let fxp = field.vector(r[0] + hx, r[1])?;
        let fxm = field.vector(r[0] - hx, r[1])?;
        let fpp = field.vector(r[0], r[1] + hp)?;
        let fpm = field.vector(r[0], r[1] - hp)?;
        let a = (fxp[0] - fxm[0]) / (2.0 * hx);
        let b = (fpp[0] - fpm[0]) / (2.0 * hp);
        let c = (fxp[1] - fxm[1]) / (2.0 * hx);
        let d = (fpp[1] - fpm[1]) / (2.0 * hp);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let mut step = [-(d * f[0] - b * f[1]) / det, -(-c * f[0] + a * f[1]) / det];
        // trust region of one cell
        let limit = cell[0].hypot(cell[1]);
        let len = norm(step);
        if len > limit {
            step = [step[0] * limit / len, step[1] * limit / len];
        }
        let mut accepted = false;
        for _ in 0..30 {
            let cand = [r[0] + step[0], r[1] + step[1]];
            if !bounds.contains(cand[0], cand[1]) {
                step = [0.5 * step[0], 0.5 * step[1]];
                continue;
            }
            let fc = field.vector(cand[0], cand[1])?;
            if norm(fc) < norm(f) {
                r = cand;
                f = fc;
                accepted = true;
                break;
            }
            step = [0.5 * step[0], 0.5 * step[1]];
        }
        let tiny = 1e-13 * (1.0 + r[0].abs() + r[1].abs());
        if !accepted || norm(step) < tiny {
            // no further progress; accept if the residual is at roundoff level
            let converged = norm(f) <= 1e-10 * scale;
            return Ok(Refined { at: r, converged, norm: norm(f) });
        }
    }
    Ok(Refined { at: r, converged: norm(f) <= 1e-10 * scale, norm: norm(f) })
}

fn straddles(vals: [f64; 4]) -> bool {
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    lo <= 0.0 && hi >= 0.0
}

/// Locates and classifies the zeros of `field` inside `window`.
pub fn find_stagnation_points<F: PhaseField + ?Sized>(field: &F, window: Rect, opts: &StagnationOptions) -> Result<Vec<StagnationPoint>> {
    if opts.coarse_n < 64 {
        return Err(Error::Precondition(format!("coarse grid needs at least 64 cells per axis, got {}", opts.coarse_n)));
    }
    let n = opts.coarse_n;
    let cell = [window.width() / n as f64, window.height() / n as f64];
    let node = |i: usize, j: usize| [window.x_min + cell[0] * i as f64, window.p_min + cell[1] * j as f64];
    let values: Vec<[f64; 2]> = (0..(n + 1) * (n + 1))
        .into_par_iter()
        .map(|k| {
            let [x, p] = node(k / (n + 1), k % (n + 1));
            field.vector(x, p)
        })
        .collect::<Result<_>>()?;
    let at = |i: usize, j: usize| values[i * (n + 1) + j];
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v[0].hypot(v[1])));

    let mut seeds = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let c = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
            if straddles(c.map(|v| v[0])) && straddles(c.map(|v| v[1])) {
                let [x, p] = node(i, j);
                seeds.push([x + 0.5 * cell[0], p + 0.5 * cell[1]]);
            }
        }
    }

    // iterates may wander one cell beyond the window
    let bounds = Rect::new(window.x_min - cell[0], window.x_max + cell[0], window.p_min - cell[1], window.p_max + cell[1]);
    let refined: Vec<Refined> = seeds.par_iter().map(|&s| newton(field, s, cell, &bounds, scale, opts)).collect::<Result<_>>()?;

    let min_cell = cell[0].min(cell[1]);
    let merge = opts.merge_cells * min_cell;
    let mut roots: Vec<Refined> = Vec::new();
    for r in refined {
        if !window.contains(r.at[0], r.at[1]) {
            continue;
        }
        match roots.iter_mut().find(|q| (q.at[0] - r.at[0]).hypot(q.at[1] - r.at[1]) < merge) {
            Some(q) => {
                if r.converged && (!q.converged || r.norm < q.norm) {
                    *q = r;
                }
            }
            None => roots.push(r),
        }
    }

    let base_radius = opts.winding_cells * min_cell;
    let locations: Vec<[f64; 2]> = roots.iter().map(|r| r.at).collect();
    roots
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let nearest = locations
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != k)
                .map(|(_, q)| (q[0] - r.at[0]).hypot(q[1] - r.at[1]))
                .fold(f64::INFINITY, f64::min);
            let mut radius = base_radius;
            while nearest < 2.0 * radius && radius > base_radius / 1024.0 {
                radius *= 0.5;
            }
            let w = winding_index(field, r.at, radius, opts.winding_samples)?;
            // a loop at the noise floor of the field carries no topology
            let ill_conditioned = w.ill_conditioned || w.min_norm < 1e-14 * scale || w.max_norm < 1e-10 * scale;
            Ok(StagnationPoint {
                x: r.at[0],
                p: r.at[1],
                index: w.index,
                raw_winding: w.raw,
                winding_residual: w.residual,
                refinement_converged: r.converged,
                ill_conditioned,
                multi_degenerate: w.multi_degenerate,
                radius,
                norm: r.norm,
            })
        })
        .collect()
}
