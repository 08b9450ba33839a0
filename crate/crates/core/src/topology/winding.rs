//! Winding numbers of a planar field along closed loops.
//!
//! The field angle is tracked sample to sample; any increment larger than
//! π/4 triggers bisection of the loop parameter, so the wrapped increments are
//! unambiguous.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::PhaseField;
use crate::error::{Error, Result};

/// Axis-aligned window in phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, p_min: f64, p_max: f64) -> Self {
        Self { x_min, x_max, p_min, p_max }
    }

    pub fn contains(&self, x: f64, p: f64) -> bool {
        x >= self.x_min && x <= self.x_max && p >= self.p_min && p <= self.p_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.p_max - self.p_min
    }

    /// Counterclockwise perimeter point for `t ∈ [0, 1]`, starting at the
    /// lower-left corner.
    pub fn perimeter_point(&self, t: f64) -> [f64; 2] {
        let (w, h) = (self.width(), self.height());
        let total = 2.0 * (w + h);
        let s = t.rem_euclid(1.0) * total;
        if s < w {
            [self.x_min + s, self.p_min]
        } else if s < w + h {
            [self.x_max, self.p_min + (s - w)]
        } else if s < 2.0 * w + h {
            [self.x_max - (s - w - h), self.p_max]
        } else {
            [self.x_min, self.p_max - (s - 2.0 * w - h)]
        }
    }
}

impl From<&crate::grid::GridSpec> for Rect {
    fn from(g: &crate::grid::GridSpec) -> Self {
        Rect::new(g.x_min, g.x_max, g.p_min, g.p_max)
    }
}

/// Result of a loop winding computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Winding {
    /// Accumulated angle over 2π.
    pub raw: f64,
    /// Nearest integer to `raw`.
    pub index: i32,
    /// `|raw - index|`
    pub residual: f64,
    /// Some sample had `|J| < 1e-14 · max|J|` on the loop.
    pub ill_conditioned: bool,
    /// `|index| > 1`.
    pub multi_degenerate: bool,
    /// Smallest and largest `|J|` sampled on the loop.
    pub min_norm: f64,
    pub max_norm: f64,
}

const MAX_DEPTH: u32 = 24;
const REFINE_ANGLE: f64 = PI / 4.0;

fn wrap(d: f64) -> f64 {
    let mut d = d % TAU;
    if d > PI {
        d -= TAU;
    } else if d < -PI {
        d += TAU;
    }
    d
}

struct Tracker<'a, F: PhaseField + ?Sized, P: Fn(f64) -> [f64; 2]> {
    field: &'a F,
    path: P,
    min_norm: f64,
    max_norm: f64,
    unresolved: bool,
}

impl<F: PhaseField + ?Sized, P: Fn(f64) -> [f64; 2]> Tracker<'_, F, P> {
    fn angle(&mut self, t: f64) -> Result<f64> {
        let [x, p] = (self.path)(t);
        let [vx, vp] = self.field.vector(x, p)?;
        let n = vx.hypot(vp);
        self.min_norm = self.min_norm.min(n);
        self.max_norm = self.max_norm.max(n);
        Ok(vp.atan2(vx))
    }

    fn increment(&mut self, ta: f64, a: f64, tb: f64, b: f64, depth: u32) -> Result<f64> {
        let d = wrap(b - a);
        if d.abs() <= REFINE_ANGLE {
            return Ok(d);
        }
        if depth >= MAX_DEPTH {
            self.unresolved = true;
            return Ok(d);
        }
        let tm = 0.5 * (ta + tb);
        let m = self.angle(tm)?;
        Ok(self.increment(ta, a, tm, m, depth + 1)? + self.increment(tm, m, tb, b, depth + 1)?)
    }
}

/// Winding of `field` along the closed path `path(t)`, `t ∈ [0, 1]`,
/// starting from `samples` uniform parameter values.
pub fn path_winding<F, P>(field: &F, path: P, samples: usize) -> Result<Winding>
where
    F: PhaseField + ?Sized,
    P: Fn(f64) -> [f64; 2],
{
    if samples < 4 {
        return Err(Error::Precondition(format!("winding needs at least 4 samples, got {samples}")));
    }
    let mut tr = Tracker { field, path, min_norm: f64::INFINITY, max_norm: 0.0, unresolved: false };
    let ts: Vec<f64> = (0..samples).map(|i| i as f64 / samples as f64).collect();
    let angles = ts.iter().map(|&t| tr.angle(t)).collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for i in 0..samples {
        let (ta, a) = (ts[i], angles[i]);
        let (tb, b) = if i + 1 == samples { (1.0, angles[0]) } else { (ts[i + 1], angles[i + 1]) };
        total += tr.increment(ta, a, tb, b, 0)?;
    }
    let raw = total / TAU;
    let index = raw.round() as i32;
    Ok(Winding {
        raw,
        index,
        residual: (raw - index as f64).abs(),
        ill_conditioned: tr.unresolved || !(tr.min_norm >= 1e-14 * tr.max_norm) || tr.max_norm == 0.0,
        multi_degenerate: index.abs() > 1,
        min_norm: tr.min_norm,
        max_norm: tr.max_norm,
    })
}

/// Poincaré–Hopf index of `field` on a counterclockwise circle.
pub fn winding_index<F: PhaseField + ?Sized>(field: &F, center: [f64; 2], radius: f64, samples: usize) -> Result<Winding> {
    if samples < 64 {
        return Err(Error::Precondition(format!("winding index needs at least 64 samples, got {samples}")));
    }
    if !(radius > 0.0) {
        return Err(Error::Precondition(format!("winding radius must be positive, got {radius}")));
    }
    path_winding(
        field,
        |t| {
            let (s, c) = (TAU * t).sin_cos();
            [center[0] + radius * c, center[1] + radius * s]
        },
        samples,
    )
}

/// Winding of `field` along the counterclockwise boundary of `rect`.
pub fn boundary_winding<F: PhaseField + ?Sized>(field: &F, rect: Rect, samples: usize) -> Result<Winding> {
    path_winding(field, |t| rect.perimeter_point(t), samples)
}

/// Total topological charge inside `rect`, i.e. its boundary winding.
pub fn topological_charge<F: PhaseField + ?Sized>(field: &F, rect: Rect, samples: usize) -> Result<i32> {
    Ok(boundary_winding(field, rect, samples)?.index)
}
