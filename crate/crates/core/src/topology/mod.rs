//! Flow topology of the Wigner current: stagnation points and their
//! Poincaré–Hopf indices, fieldlines, and zero contours of sampled channels.

pub mod contour;
pub mod fieldline;
pub mod stagnation;
pub mod winding;

use crate::current::CurrentEvaluator;
use crate::error::Result;

pub use contour::{extract_zero_contours, ContourSet, Polyline};
pub use fieldline::{equi_wigner_deviation, integrate_fieldline, Crossing, DeviationReport, Fieldline, FieldlineControls, Termination};
pub use stagnation::{find_stagnation_points, StagnationOptions, StagnationPoint};
pub use winding::{boundary_winding, topological_charge, winding_index, Rect, Winding};

/// A planar vector field with an optional scalar density carried along.
pub trait PhaseField: Sync {
    fn vector(&self, x: f64, p: f64) -> Result<[f64; 2]>;

    /// Vector and density together; the default density is zero.
    fn sample(&self, x: f64, p: f64) -> Result<([f64; 2], f64)> {
        Ok((self.vector(x, p)?, 0.0))
    }

    fn density(&self, x: f64, p: f64) -> Result<f64> {
        Ok(self.sample(x, p)?.1)
    }
}

impl PhaseField for CurrentEvaluator {
    fn vector(&self, x: f64, p: f64) -> Result<[f64; 2]> {
        let s = self.sample(x, p)?;
        Ok([s.jx, s.jp])
    }

    fn sample(&self, x: f64, p: f64) -> Result<([f64; 2], f64)> {
        let s = CurrentEvaluator::sample(self, x, p)?;
        Ok(([s.jx, s.jp], s.w))
    }
}

/// Wraps closures as a [`PhaseField`]; handy for synthetic fields.
pub struct FnField<F, G = fn(f64, f64) -> f64> {
    pub vector: F,
    pub density: Option<G>,
}

impl<F> FnField<F>
where
    F: Fn(f64, f64) -> [f64; 2] + Sync,
{
    pub fn new(vector: F) -> Self {
        Self { vector, density: None }
    }
}

impl<F, G> FnField<F, G>
where
    F: Fn(f64, f64) -> [f64; 2] + Sync,
    G: Fn(f64, f64) -> f64 + Sync,
{
    pub fn with_density(vector: F, density: G) -> Self {
        Self { vector, density: Some(density) }
    }
}

impl<F, G> PhaseField for FnField<F, G>
where
    F: Fn(f64, f64) -> [f64; 2] + Sync,
    G: Fn(f64, f64) -> f64 + Sync,
{
    fn vector(&self, x: f64, p: f64) -> Result<[f64; 2]> {
        Ok((self.vector)(x, p))
    }

    fn sample(&self, x: f64, p: f64) -> Result<([f64; 2], f64)> {
        let d = self.density.as_ref().map_or(0.0, |g| g(x, p));
        Ok(((self.vector)(x, p), d))
    }
}
