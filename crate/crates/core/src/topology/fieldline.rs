//! Fieldlines of a planar field, integrated at unit speed with the
//! Dormand–Prince 5(4) pair, carrying the density sampled at every vertex.

use serde::{Deserialize, Serialize};

use super::winding::Rect;
use super::PhaseField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldlineControls {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// Budget of accepted steps.
    pub max_steps: usize,
    /// Optional budget of arc length; reaching it ends the line with
    /// [`Termination::StepLimit`].
    pub max_arc_length: Option<f64>,
    pub window: Rect,
    /// Closure radius around the seed.
    pub close_eps: f64,
    /// Capture threshold `|J| < stagnation_rel · |J(seed)|`.
    pub stagnation_rel: f64,
}

impl FieldlineControls {
    pub fn new(window: Rect) -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_step: 0.02,
            initial_step: 1e-3,
            min_step: 1e-12,
            max_steps: 20_000,
            max_arc_length: None,
            window,
            close_eps: 1e-4,
            stagnation_rel: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Closed,
    LeftWindow,
    StepLimit,
    StagnationCapture,
}

/// A sign change of the density between two consecutive vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Index of the vertex preceding the crossing.
    pub segment: usize,
    pub x: f64,
    pub p: f64,
    /// Entering the negative region.
    pub into_negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fieldline {
    pub seed: [f64; 2],
    pub direction: f64,
    pub vertices: Vec<[f64; 2]>,
    pub w_along: Vec<f64>,
    /// Sum of segment lengths.
    pub arc_length: f64,
    pub termination: Termination,
    pub crossings: Vec<Crossing>,
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Unit<'a, F: PhaseField + ?Sized> {
    field: &'a F,
    direction: f64,
    floor: f64,
}

impl<F: PhaseField + ?Sized> Unit<'_, F> {
    /// Unit tangent, or `None` when `|J|` is below the capture floor.
    fn tangent(&self, r: [f64; 2]) -> Result<Option<[f64; 2]>> {
        let v = self.field.vector(r[0], r[1])?;
        Ok(normalize(v, self.direction, self.floor))
    }
}

fn normalize(v: [f64; 2], direction: f64, floor: f64) -> Option<[f64; 2]> {
    let n = v[0].hypot(v[1]);
    if !(n > floor) {
        None
    } else {
        Some([direction * v[0] / n, direction * v[1] / n])
    }
}

fn segment_distance(a: [f64; 2], b: [f64; 2], q: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 { (((q[0] - a[0]) * d[0] + (q[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a[0] + t * d[0] - q[0]).hypot(a[1] + t * d[1] - q[1])
}

/// Parameter in `[0, 1]` where the segment `a → b` leaves `rect`.
fn exit_fraction(rect: &Rect, a: [f64; 2], b: [f64; 2]) -> f64 {
    let mut t: f64 = 1.0;
    let d = [b[0] - a[0], b[1] - a[1]];
    let mut clip = |lo: f64, hi: f64, start: f64, delta: f64| {
        if delta > 0.0 && start + delta > hi {
            t = t.min((hi - start) / delta);
        } else if delta < 0.0 && start + delta < lo {
            t = t.min((lo - start) / delta);
        }
    };
    clip(rect.x_min, rect.x_max, a[0], d[0]);
    clip(rect.p_min, rect.p_max, a[1], d[1]);
    t.clamp(0.0, 1.0)
}

/// Integrates `dr/ds = ±J/|J|` from `seed`.
pub fn integrate_fieldline<F: PhaseField + ?Sized>(field: &F, seed: [f64; 2], direction: f64, controls: &FieldlineControls) -> Result<Fieldline> {
    if !controls.window.contains(seed[0], seed[1]) {
        return Err(Error::Precondition(format!("seed {seed:?} lies outside the window")));
    }
    if direction != 1.0 && direction != -1.0 {
        return Err(Error::Precondition(format!("direction must be ±1, got {direction}")));
    }
    let (v0, w0) = field.sample(seed[0], seed[1])?;
    let seed_norm = v0[0].hypot(v0[1]);
    let mut line = Fieldline {
        seed,
        direction,
        vertices: vec![seed],
        w_along: vec![w0],
        arc_length: 0.0,
        termination: Termination::StagnationCapture,
        crossings: Vec::new(),
    };
    let unit = Unit { field, direction, floor: controls.stagnation_rel * seed_norm };
    let Some(t0) = normalize(v0, direction, unit.floor.max(f64::MIN_POSITIVE)) else {
        return Ok(line);
    };

    let min_closure = 10.0 * controls.max_step;
    let mut r = seed;
    let mut k1 = t0;
    let mut w_prev = w0;
    let mut s = 0.0;
    let mut h = controls.initial_step.min(controls.max_step);
    let mut accepted = 0usize;

    loop {
        if accepted >= controls.max_steps {
            line.termination = Termination::StepLimit;
            return Ok(line);
        }
        if let Some(limit) = controls.max_arc_length {
            if s >= limit * (1.0 - 1e-15) {
                line.termination = Termination::StepLimit;
                return Ok(line);
            }
            h = h.min(limit - s);
        }
        if h < controls.min_step {
            line.termination = Termination::StagnationCapture;
            return Ok(line);
        }

        let mut k = [[0.0; 2]; 7];
        k[0] = k1;
        let mut captured = false;
        for stage in 1..7 {
            let mut y = r;
            for (j, kj) in k.iter().enumerate().take(stage) {
                y[0] += h * A[stage][j] * kj[0];
                y[1] += h * A[stage][j] * kj[1];
            }
            match unit.tangent(y)? {
                Some(t) => k[stage] = t,
                None => {
                    captured = true;
                    break;
                }
            }
        }
        debug_assert!(C[6] == 1.0);
        if captured {
            // a stage landed on (or too near) a zero of the field
            h *= 0.25;
            continue;
        }

        let mut y5 = r;
        let mut err = [0.0; 2];
        for i in 0..7 {
            for c in 0..2 {
                y5[c] += h * B5[i] * k[i][c];
                err[c] += h * (B5[i] - B4[i]) * k[i][c];
            }
        }
        let sc = |c: usize| controls.abs_tol + controls.rel_tol * r[c].abs().max(y5[c].abs());
        let e = ((err[0] / sc(0)).powi(2) + (err[1] / sc(1)).powi(2)).sqrt() / std::f64::consts::SQRT_2;
        let chord = (y5[0] - r[0]).hypot(y5[1] - r[1]);
        if e > 1.0 || chord > controls.max_step {
            let factor = if e > 1.0 { (0.9 * e.powf(-0.2)).max(0.2) } else { 0.9 * controls.max_step / chord };
            h *= factor.min(0.9);
            continue;
        }

        // accepted
        accepted += 1;
        let prev = r;
        let mut next = y5;
        let mut left = false;
        if !controls.window.contains(next[0], next[1]) {
            let t = exit_fraction(&controls.window, prev, next);
            next = [prev[0] + t * (next[0] - prev[0]), prev[1] + t * (next[1] - prev[1])];
            next[0] = next[0].clamp(controls.window.x_min, controls.window.x_max);
            next[1] = next[1].clamp(controls.window.p_min, controls.window.p_max);
            left = true;
        }
        let (v, w) = field.sample(next[0], next[1])?;
        if w_prev != 0.0 && w != 0.0 && w_prev.signum() != w.signum() {
            let at = locate_crossing(field, prev, next, w_prev)?;
            line.crossings.push(Crossing { segment: line.vertices.len() - 1, x: at[0], p: at[1], into_negative: w < 0.0 });
        }
        line.arc_length += (next[0] - prev[0]).hypot(next[1] - prev[1]);
        line.vertices.push(next);
        line.w_along.push(w);
        s += h;
        r = next;
        w_prev = w;

        if left {
            line.termination = Termination::LeftWindow;
            return Ok(line);
        }
        let Some(t) = normalize(v, direction, unit.floor) else {
            line.termination = Termination::StagnationCapture;
            return Ok(line);
        };
        if line.arc_length >= min_closure
            && segment_distance(prev, next, seed) < controls.close_eps
            && t[0] * t0[0] + t[1] * t0[1] > 0.0
        {
            line.termination = Termination::Closed;
            return Ok(line);
        }
        k1 = t;
        let grow = if e > 0.0 { (0.9 * e.powf(-0.2)).min(5.0) } else { 5.0 };
        h = (h * grow).min(controls.max_step);
    }
}

fn locate_crossing<F: PhaseField + ?Sized>(field: &F, a: [f64; 2], b: [f64; 2], w_a: f64) -> Result<[f64; 2]> {
    let (mut lo, mut hi) = (0.0, 1.0);
    let point = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        let [x, p] = point(mid);
        let w = field.density(x, p)?;
        if w == 0.0 {
            return Ok([x, p]);
        }
        if w.signum() == w_a.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(point(0.5 * (lo + hi)))
}

/// How far the density strays from its seed value along a fieldline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub w_seed: f64,
    /// `max |W_along - W(seed)| / w_max`
    pub deviation: f64,
    pub crossings: usize,
}

pub fn equi_wigner_deviation(line: &Fieldline, w_max: f64) -> Result<DeviationReport> {
    if line.vertices.len() < 10 {
        return Err(Error::Precondition(format!("deviation needs at least 10 vertices, got {}", line.vertices.len())));
    }
    let w_seed = line.w_along[0];
    let dev = line.w_along.iter().fold(0.0f64, |m, w| m.max((w - w_seed).abs()));
    Ok(DeviationReport { w_seed, deviation: dev / w_max, crossings: line.crossings.len() })
}

/// Seeds spread uniformly along the window boundary, inset by a small margin.
pub fn boundary_seeds(window: &Rect, count: usize) -> Vec<[f64; 2]> {
    let inset = 1e-6 * window.width().min(window.height());
    let inner = Rect::new(window.x_min + inset, window.x_max - inset, window.p_min + inset, window.p_max - inset);
    (0..count).map(|i| inner.perimeter_point((i as f64 + 0.5) / count as f64)).collect()
}

/// Seeds along `p = 0` strictly between `x_lo` and `x_hi`.
pub fn axis_seeds(x_lo: f64, x_hi: f64, count: usize) -> Vec<[f64; 2]> {
    (0..count).map(|i| [x_lo + (x_hi - x_lo) * (i as f64 + 0.5) / count as f64, 0.0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::FnField;

    fn rotation() -> FnField<impl Fn(f64, f64) -> [f64; 2] + Sync, impl Fn(f64, f64) -> f64 + Sync> {
        FnField::with_density(
            |x: f64, p: f64| {
                let w = (-x * x - p * p).exp();
                [p * w, -x * w]
            },
            |x: f64, p: f64| (-x * x - p * p).exp(),
        )
    }

    #[test]
    fn closed_circle() {
        let f = rotation();
        let c = FieldlineControls::new(Rect::new(-3.0, 3.0, -3.0, 3.0));
        let line = integrate_fieldline(&f, [1.0, 0.0], 1.0, &c).unwrap();
        assert_eq!(line.termination, Termination::Closed);
        assert!((line.arc_length - std::f64::consts::TAU).abs() < 0.03);
        let rep = equi_wigner_deviation(&line, 1.0).unwrap();
        assert!(rep.deviation < 1e-6);
        assert_eq!(rep.crossings, 0);
        // clockwise flow: starting at (1, 0) the line heads to -p
        assert!(line.vertices[1][1] < 0.0);
    }

    #[test]
    fn bookkeeping() {
        let f = rotation();
        let c = FieldlineControls::new(Rect::new(-3.0, 3.0, -3.0, 3.0));
        let line = integrate_fieldline(&f, [0.5, 0.5], -1.0, &c).unwrap();
        let mut total = 0.0;
        for w in line.vertices.windows(2) {
            let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            assert!(d <= c.max_step * (1.0 + 1e-12));
            total += d;
        }
        assert!((total - line.arc_length).abs() < 1e-9);
        assert_eq!(line.vertices.len(), line.w_along.len());
    }

    #[test]
    fn leaves_window_and_detects_crossings() {
        // uniform flow in +x across a density that changes sign twice
        let f = FnField::with_density(|_, _| [1.0, 0.0], |x: f64, _| (x - 0.5) * (x - 1.5));
        let c = FieldlineControls::new(Rect::new(0.0, 2.0, -1.0, 1.0));
        let line = integrate_fieldline(&f, [0.1, 0.2], 1.0, &c).unwrap();
        assert_eq!(line.termination, Termination::LeftWindow);
        assert_eq!(line.crossings.len(), 2);
        assert!((line.crossings[0].x - 0.5).abs() < 1e-12);
        assert!(line.crossings[0].into_negative && !line.crossings[1].into_negative);
        assert!((line.vertices.last().unwrap()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn stagnation_capture() {
        let f = FnField::new(|x: f64, p: f64| [x, -p]);
        let c = FieldlineControls::new(Rect::new(-1.0, 1.0, -1.0, 1.0));
        // inflow along the stable manifold of the saddle
        let line = integrate_fieldline(&f, [0.0, 0.8], 1.0, &c).unwrap();
        assert_eq!(line.termination, Termination::StagnationCapture);
        assert!(line.vertices.last().unwrap()[1].abs() < 1e-3);
        let at_zero = integrate_fieldline(&f, [0.0, 0.0], 1.0, &c).unwrap();
        assert_eq!(at_zero.termination, Termination::StagnationCapture);
        assert_eq!(at_zero.vertices.len(), 1);
    }

    #[test]
    fn step_budget_and_arc_budget() {
        let f = rotation();
        let mut c = FieldlineControls::new(Rect::new(-3.0, 3.0, -3.0, 3.0));
        c.max_steps = 5;
        assert_eq!(integrate_fieldline(&f, [1.0, 0.0], 1.0, &c).unwrap().termination, Termination::StepLimit);
        c.max_steps = 10_000;
        c.max_arc_length = Some(1.0);
        let line = integrate_fieldline(&f, [1.0, 0.0], 1.0, &c).unwrap();
        assert_eq!(line.termination, Termination::StepLimit);
        let end = line.vertices.last().unwrap();
        // unit circle, clockwise by one radian
        assert!((end[0] - 1f64.cos()).abs() < 1e-7 && (end[1] + 1f64.sin()).abs() < 1e-7);
    }

    #[test]
    fn deviation_needs_vertices() {
        let f = FnField::new(|x: f64, p: f64| [x, -p]);
        let c = FieldlineControls::new(Rect::new(-1.0, 1.0, -1.0, 1.0));
        let line = integrate_fieldline(&f, [0.0, 0.0], 1.0, &c).unwrap();
        assert!(matches!(equi_wigner_deviation(&line, 1.0), Err(Error::Precondition(_))));
    }
}
