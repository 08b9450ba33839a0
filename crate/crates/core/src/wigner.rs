//! Quadrature of the Wigner transform of a real eigenstate.
//!
//! For real `ψ` the transform reduces to a cosine integral over `y >= 0`,
//!
//! ```text
//! W(x, p)       = (2/πħ) ∫_0^Y ψ(x+y) ψ(x-y) cos(2py/ħ) dy
//! ∂_p^k W(x, p) = (2/πħ) ∫_0^Y ψ(x+y) ψ(x-y) (2y/ħ)^k σ_k(2py/ħ) dy
//! ```
//!
//! with `σ_k = (-1)^{k/2} cos` for even `k` and `(-1)^{(k+1)/2} sin` for odd
//! `k`. The `x`-derivative uses the product-rule integrand
//! `ψ'(x+y)ψ(x-y) + ψ(x+y)ψ'(x-y)` against the same cosine kernel.
//!
//! Composite Gauss–Legendre panels are sized so that neither the kernel at the
//! largest `|p|` nor the wavefunction is under-resolved.

use rayon::prelude::*;

use crate::eigenstates::Eigenstate;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PhaseGrid};
use crate::quadrature::GaussLegendre;

/// Quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub nodes_per_panel: usize,
    /// Relative amplitude below which the wavefunction tail is dropped.
    pub tail_tolerance: f64,
    /// Highest `∂_p` order the evaluator will compute.
    pub max_order: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes_per_panel: 24, tail_tolerance: 1e-12, max_order: 101 }
    }
}

/// `W`, `∂_x W` and `∂_p^k W` for `k = 0..=order` at one phase-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    /// `p_derivs[k] = ∂_p^k W`, so `p_derivs[0] = W`.
    pub p_derivs: Vec<f64>,
    pub dx: f64,
}

impl Moments {
    pub fn w(&self) -> f64 {
        self.p_derivs[0]
    }
}

/// Evaluates the Wigner distribution of one eigenstate inside a window.
#[derive(Debug, Clone)]
pub struct WignerEvaluator {
    state: Eigenstate,
    hbar: f64,
    rule: GaussLegendre,
    support: (f64, f64),
    halfwidth: f64,
    panel_width: f64,
    p_limit: f64,
    max_order: usize,
}

/// Integrand samples for a fixed `x`, reusable for every `p`.
#[derive(Debug, Clone)]
pub struct XSlice {
    x: f64,
    /// `2y/ħ` at each node
    scaled: Vec<f64>,
    /// quadrature weight × prefactor × ψ(x+y)ψ(x-y)
    wf: Vec<f64>,
    /// quadrature weight × prefactor × (ψ'ψ + ψψ')
    wg: Vec<f64>,
}

impl WignerEvaluator {
    /// Builds an evaluator valid for all `x` and for `|p|` up to the largest
    /// momentum of `window`, with a margin for fieldline stages.
    pub fn new(state: Eigenstate, window: &GridSpec, config: QuadratureConfig) -> Result<Self> {
        window.validate()?;
        if config.nodes_per_panel == 0 || !(config.tail_tolerance > 0.0 && config.tail_tolerance < 1.0) {
            return Err(Error::Domain(format!("invalid quadrature configuration {config:?}")));
        }
        let hbar = state.hbar();
        let support = state.support(config.tail_tolerance)?;
        let halfwidth = (support.1 - window.x_min).max(window.x_max - support.0).max(0.0);
        let p_limit = 1.25 * window.max_abs_p();
        let length = state.potential().length_scale();
        let panel_width = (std::f64::consts::PI * hbar / (4.0 * p_limit)).min(length / 4.0);
        let growth = (2.0 * halfwidth / hbar).max(1.0).ln();
        if config.max_order as f64 * growth > 690.0 {
            return Err(Error::Precondition(format!(
                "moment order {} overflows over half-range {halfwidth}",
                config.max_order
            )));
        }
        Ok(Self {
            state,
            hbar,
            rule: GaussLegendre::new(config.nodes_per_panel),
            support,
            halfwidth,
            panel_width,
            p_limit,
            max_order: config.max_order,
        })
    }

    pub fn state(&self) -> &Eigenstate {
        &self.state
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Half-range `Y` such that `|ψ(x ± Y)|` is below the tail tolerance
    /// for every `x` in the window.
    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn panel_width(&self) -> f64 {
        self.panel_width
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn p_limit(&self) -> f64 {
        self.p_limit
    }

    /// Integrand samples at fixed `x`.
    ///
    /// Beyond `min(x_hi - x, x - x_lo)` one of the two factors is already
    /// below the tail tolerance, so the integration range shrinks accordingly.
    pub fn slice(&self, x: f64) -> Result<XSlice> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite position {x}")));
        }
        let (lo, hi) = self.support;
        let reach = (hi - x).min(x - lo).clamp(0.0, self.halfwidth.max(0.0));
        let panels = (reach / self.panel_width).ceil() as usize;
        let prefactor = 2.0 / (std::f64::consts::PI * self.hbar);
        let capacity = panels * self.rule.len();
        let mut slice = XSlice {
            x,
            scaled: Vec::with_capacity(capacity),
            wf: Vec::with_capacity(capacity),
            wg: Vec::with_capacity(capacity),
        };
        if panels == 0 {
            return Ok(slice);
        }
        for (y, w) in self.rule.composite(0.0, reach, panels) {
            let (a, da) = self.state.psi_and_derivative(x + y);
            let (b, db) = self.state.psi_and_derivative(x - y);
            let f = a * b;
            let g = da * b + a * db;
            if f == 0.0 && g == 0.0 {
                continue;
            }
            slice.scaled.push(2.0 * y / self.hbar);
            slice.wf.push(prefactor * w * f);
            slice.wg.push(prefactor * w * g);
        }
        Ok(slice)
    }

    fn check_p(&self, x: f64, p: f64) -> Result<()> {
        if !p.is_finite() || p.abs() > self.p_limit {
            return Err(Error::Accuracy {
                x,
                p,
                reason: format!("|p| exceeds the resolved momentum range {}", self.p_limit),
            });
        }
        Ok(())
    }

    fn check_order(&self, order: usize) -> Result<()> {
        if order > self.max_order {
            Err(Error::OrderLimit { order, limit: self.max_order })
        } else {
            Ok(())
        }
    }

    /// `W`, `∂_x W` and `∂_p^k W` for all `k <= order`.
    pub fn moments(&self, x: f64, p: f64, order: usize) -> Result<Moments> {
        self.check_order(order)?;
        self.check_p(x, p)?;
        Ok(self.slice(x)?.moments(p, order))
    }

    pub fn wigner(&self, x: f64, p: f64) -> Result<f64> {
        Ok(self.moments(x, p, 0)?.w())
    }

    /// `∂_p^k W` for `k >= 1`.
    pub fn wigner_dp(&self, x: f64, p: f64, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Domain("p-derivative order must be at least 1".into()));
        }
        Ok(self.moments(x, p, k)?.p_derivs[k])
    }

    pub fn wigner_dx(&self, x: f64, p: f64) -> Result<f64> {
        Ok(self.moments(x, p, 0)?.dx)
    }

    /// Evaluates `f` on every lattice point, parallel over rows of constant `x`.
    ///
    /// Rows are collected in order, so the result does not depend on the
    /// number of worker threads.
    pub fn map_grid<T, F>(&self, spec: &GridSpec, order: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(f64, f64, &Moments) -> Result<T> + Sync,
    {
        spec.validate()?;
        self.check_order(order)?;
        let rows: Vec<Result<Vec<T>>> = (0..spec.n_x)
            .into_par_iter()
            .map(|i| {
                let x = spec.x(i);
                let slice = self.slice(x)?;
                (0..spec.n_p)
                    .map(|j| {
                        let p = spec.p(j);
                        self.check_p(x, p)?;
                        f(x, p, &slice.moments(p, order)).map_err(|e| locate(e, x, p))
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(spec.len());
        for row in rows {
            out.extend(row?);
        }
        Ok(out)
    }
}

fn locate(err: Error, x: f64, p: f64) -> Error {
    match err {
        Error::Accuracy { .. } => err,
        other => Error::Accuracy { x, p, reason: other.to_string() },
    }
}

impl XSlice {
    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn node_count(&self) -> usize {
        self.scaled.len()
    }

    pub fn moments(&self, p: f64, order: usize) -> Moments {
        let mut even = vec![0.0; order + 1];
        let mut odd = vec![0.0; order + 1];
        let mut dx = 0.0;
        for ((&q, &wf), &wg) in self.scaled.iter().zip(&self.wf).zip(&self.wg) {
            let (s, c) = (p * q).sin_cos();
            dx += wg * c;
            let fc = wf * c;
            let fs = wf * s;
            even[0] += fc;
            let mut power = 1.0;
            for k in 1..=order {
                power *= q;
                if k % 2 == 0 {
                    even[k] += power * fc;
                } else {
                    odd[k] += power * fs;
                }
            }
        }
        let p_derivs = (0..=order)
            .map(|k| {
                if k % 2 == 0 {
                    if (k / 2) % 2 == 0 { even[k] } else { -even[k] }
                } else if k.div_ceil(2) % 2 == 0 {
                    odd[k]
                } else {
                    -odd[k]
                }
            })
            .collect();
        Moments { p_derivs, dx }
    }
}

/// Fills `W`, `dWdx` and the requested `∂_p^k W` channels.
///
/// Channel names: `W`, `dWdx`, `dWdp` for `k = 1`, `dWdp{k}` for `k >= 2`.
pub fn fill_grid(evaluator: &WignerEvaluator, spec: &GridSpec, orders: &[usize]) -> Result<PhaseGrid> {
    let top = orders.iter().copied().max().unwrap_or(0);
    let samples = evaluator.map_grid(spec, top, |_, _, m| Ok(m.clone()))?;
    let mut grid = PhaseGrid::new(*spec);
    grid.insert("W", samples.iter().map(Moments::w).collect())?;
    grid.insert("dWdx", samples.iter().map(|m| m.dx).collect())?;
    let mut sorted: Vec<usize> = orders.iter().copied().filter(|&k| k >= 1).collect();
    sorted.sort_unstable();
    sorted.dedup();
    for k in sorted {
        grid.insert(dp_channel_name(k), samples.iter().map(|m| m.p_derivs[k]).collect())?;
    }
    Ok(grid)
}

pub fn dp_channel_name(k: usize) -> String {
    if k == 1 {
        "dWdp".to_string()
    } else {
        format!("dWdp{k}")
    }
}
