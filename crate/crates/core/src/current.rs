//! Wigner current `J`, velocity field `w = J/W`, their divergences and the
//! comoving derivative of `W`.
//!
//! For a Taylor-expandable potential
//!
//! ```text
//! J_x = (p/M) W
//! J_p = -Σ_{l>=0} c_l ∂_p^{2l} W ∂_x^{2l+1} V,   c_l = (-1)^l (ħ/2)^{2l} / (2l+1)!
//! ```
//!
//! The `l = 0` term is the classical current `j = W v`, `v = (p/M, -V')`;
//! everything else is the quantum correction. `∇·J` is assembled from the
//! same series with one more `p`-derivative on `W`, never by differencing `J`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PhaseGrid};
use crate::potential::Potential;
use crate::wigner::{Moments, WignerEvaluator};

/// Truncation controls for the current series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub l_max: usize,
    /// Relative size below which two consecutive terms end the sum. Zero
    /// disables the stop rule and sums all `l_max` terms.
    pub rtol: f64,
    /// Absolute floor for the partial sum in the stop rule.
    pub atol: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { l_max: 25, rtol: 1e-12, atol: 1e-20 }
    }
}

/// Everything the flow analysis needs at one phase-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentSample {
    pub x: f64,
    pub p: f64,
    pub w: f64,
    pub dw_dx: f64,
    pub dw_dp: f64,
    pub jx: f64,
    pub jp: f64,
    /// classical current `W v`
    pub classical_jx: f64,
    pub classical_jp: f64,
    /// `J_p - j_p`
    pub quantum_correction: f64,
    /// `∂_p J_p`
    pub djp_dp: f64,
    /// `∂_x J_x + ∂_p J_p`
    pub div_j: f64,
    pub terms_used: usize,
    /// magnitude of the first omitted (or, if none could be formed, the last) term
    pub truncation_estimate: f64,
    pub converged: bool,
}

/// `w = J/W`; `None` on the singular set `|W| <= floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocity {
    pub components: Option<[f64; 2]>,
}

impl Velocity {
    pub fn is_singular(&self) -> bool {
        self.components.is_none()
    }
}

/// Both forms of the comoving derivative of `W` for a stationary state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comoving {
    /// `w·∇W`
    pub dw_dt: f64,
    /// `-W ∇·w`
    pub minus_w_div_w: f64,
    /// `|w·∇W + W ∇·w|`
    pub residual: f64,
}

impl CurrentSample {
    pub fn norm(&self) -> f64 {
        self.jx.hypot(self.jp)
    }

    /// `J·∇W`
    pub fn j_dot_grad_w(&self) -> f64 {
        self.jx * self.dw_dx + self.jp * self.dw_dp
    }

    pub fn velocity(&self, w_floor: f64) -> Velocity {
        if self.w.abs() <= w_floor {
            Velocity { components: None }
        } else {
            Velocity { components: Some([self.jx / self.w, self.jp / self.w]) }
        }
    }

    /// `∇·w = (W ∇·J - J·∇W) / W²`.
    pub fn div_w(&self, w_floor: f64) -> Option<f64> {
        if self.w.abs() <= w_floor {
            None
        } else {
            Some((self.w * self.div_j - self.j_dot_grad_w()) / (self.w * self.w))
        }
    }

    pub fn comoving(&self, w_floor: f64) -> Option<Comoving> {
        let [wx, wp] = self.velocity(w_floor).components?;
        let div_w = self.div_w(w_floor)?;
        let dw_dt = wx * self.dw_dx + wp * self.dw_dp;
        let minus_w_div_w = -self.w * div_w;
        Some(Comoving { dw_dt, minus_w_div_w, residual: (dw_dt - minus_w_div_w).abs() })
    }
}

/// Evaluates the Wigner current of one eigenstate in a given potential.
#[derive(Debug, Clone)]
pub struct CurrentEvaluator {
    wigner: WignerEvaluator,
    potential: Arc<dyn Potential>,
    mass: f64,
    hbar: f64,
    series: SeriesControl,
    w_floor: f64,
}

impl CurrentEvaluator {
    /// Uses the eigenstate's own potential, mass and ħ.
    pub fn new(wigner: WignerEvaluator, series: SeriesControl) -> Result<Self> {
        let state = wigner.state();
        let potential = state.potential().clone();
        let (mass, hbar) = (state.mass(), state.hbar());
        Self::with_potential(wigner, potential, mass, series).map(|ce| Self { hbar, ..ce })
    }

    /// Pairs the Wigner distribution with an arbitrary potential, e.g. to
    /// exercise the series on a state that is not stationary in it.
    pub fn with_potential(
        wigner: WignerEvaluator,
        potential: Arc<dyn Potential>,
        mass: f64,
        series: SeriesControl,
    ) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Domain(format!("mass must be positive, got {mass}")));
        }
        if !(series.rtol >= 0.0) || !(series.atol >= 0.0) {
            return Err(Error::Domain(format!("invalid series control {series:?}")));
        }
        let order = 2 * series.l_max + 2;
        if order > wigner.max_order() + 1 {
            return Err(Error::OrderLimit { order: 2 * series.l_max + 1, limit: wigner.max_order() });
        }
        let hbar = wigner.hbar();
        // |W| <= 1/(πħ) for any normalized state
        let w_floor = 1e-10 / (std::f64::consts::PI * hbar);
        Ok(Self { wigner, potential, mass, hbar, series, w_floor })
    }

    pub fn wigner(&self) -> &WignerEvaluator {
        &self.wigner
    }

    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn series(&self) -> SeriesControl {
        self.series
    }

    pub fn w_floor(&self) -> f64 {
        self.w_floor
    }

    /// Singular-set threshold for `w`, normally `1e-10 · max|W|` on the grid.
    pub fn with_w_floor(mut self, w_floor: f64) -> Self {
        self.w_floor = w_floor;
        self
    }

    pub fn with_series(mut self, series: SeriesControl) -> Result<Self> {
        if 2 * series.l_max + 1 > self.wigner.max_order() {
            return Err(Error::OrderLimit { order: 2 * series.l_max + 1, limit: self.wigner.max_order() });
        }
        self.series = series;
        Ok(self)
    }

    /// Number of series terms that can be nonzero for this potential.
    fn active_terms(&self) -> usize {
        match self.potential.derivative_degree() {
            Some(d) if d < 3 => 0,
            Some(d) => ((d - 1) / 2).min(self.series.l_max),
            None => self.series.l_max,
        }
    }

    /// `∂_p` order needed for a full evaluation.
    pub fn moment_order(&self) -> usize {
        // one beyond the last term for the truncation estimate
        (2 * self.active_terms() + 2).min(self.wigner.max_order())
    }

    pub fn sample(&self, x: f64, p: f64) -> Result<CurrentSample> {
        let m = self.wigner.moments(x, p, self.moment_order())?;
        Ok(self.from_moments(x, p, &m))
    }

    /// Current sample from precomputed moments (must reach [`Self::moment_order`]).
    pub fn from_moments(&self, x: f64, p: f64, m: &Moments) -> CurrentSample {
        let w = m.w();
        let dw_dp = m.p_derivs.get(1).copied().unwrap_or(0.0);
        let v1 = self.potential.derivative(x, 1);
        let classical_jx = p / self.mass * w;
        let classical_jp = -w * v1;

        let active = self.active_terms();
        let rule_on = self.series.rtol > 0.0;
        let h2 = 0.25 * self.hbar * self.hbar;
        let mut coeff = 1.0;
        let mut jp = classical_jp;
        let mut djp = -dw_dp * v1;
        let mut quiet_j = 0;
        let mut quiet_d = 0;
        let mut terms_used = 0;
        let mut last_term = 0.0;
        let mut converged = active == 0 || active < self.series.l_max;
        for l in 1..=active {
            let two_l = 2 * l;
            coeff *= -h2 / ((two_l * (two_l + 1)) as f64);
            let dv = self.potential.derivative(x, two_l + 1);
            let tj = -coeff * m.p_derivs[two_l] * dv;
            let td = -coeff * m.p_derivs[two_l + 1] * dv;
            jp += tj;
            djp += td;
            terms_used = l;
            last_term = tj.abs();
            if rule_on {
                let small = |t: f64, s: f64| t.abs() < self.series.rtol * s.abs().max(self.series.atol);
                quiet_j = if small(tj, jp) { quiet_j + 1 } else { 0 };
                quiet_d = if small(td, djp) { quiet_d + 1 } else { 0 };
                if quiet_j >= 2 && quiet_d >= 2 {
                    converged = true;
                    break;
                }
            }
        }
        let next = 2 * terms_used + 2;
        let truncation_estimate = if active == 0 || converged && active < self.series.l_max && terms_used == active {
            0.0
        } else if next < m.p_derivs.len() {
            let c_next = coeff * -h2 / ((next * (next + 1)) as f64);
            (c_next * m.p_derivs[next] * self.potential.derivative(x, next + 1)).abs()
        } else {
            last_term
        };

        let div_j = p / self.mass * m.dx + djp;
        CurrentSample {
            x,
            p,
            w,
            dw_dx: m.dx,
            dw_dp,
            jx: classical_jx,
            jp,
            classical_jx,
            classical_jp,
            quantum_correction: jp - classical_jp,
            djp_dp: djp,
            div_j,
            terms_used,
            truncation_estimate,
            converged,
        }
    }

    /// `J` as a sample; alias of [`Self::sample`].
    pub fn current(&self, x: f64, p: f64) -> Result<CurrentSample> {
        self.sample(x, p)
    }

    pub fn div_j(&self, x: f64, p: f64) -> Result<f64> {
        Ok(self.sample(x, p)?.div_j)
    }

    pub fn velocity(&self, x: f64, p: f64) -> Result<Velocity> {
        Ok(self.sample(x, p)?.velocity(self.w_floor))
    }

    pub fn div_w(&self, x: f64, p: f64) -> Result<Option<f64>> {
        Ok(self.sample(x, p)?.div_w(self.w_floor))
    }

    pub fn comoving_dw_dt(&self, x: f64, p: f64) -> Result<Option<Comoving>> {
        Ok(self.sample(x, p)?.comoving(self.w_floor))
    }

    /// Current samples on every lattice point.
    pub fn sample_grid(&self, spec: &GridSpec) -> Result<Vec<CurrentSample>> {
        self.wigner.map_grid(spec, self.moment_order(), |x, p, m| Ok(self.from_moments(x, p, m)))
    }

    /// Samples at arbitrary points, in input order.
    pub fn sample_points(&self, points: &[(f64, f64)]) -> Result<Vec<CurrentSample>> {
        points.par_iter().map(|&(x, p)| self.sample(x, p)).collect()
    }
}

/// Channels written by [`fill_current_grid`].
pub const CURRENT_CHANNELS: [&str; 17] = [
    "W", "dWdx", "dWdp", "J_x", "J_p", "j_x", "j_p", "dJpdp", "divJ", "w_x", "w_p", "divw", "dWdt", "comoving_residual",
    "singular_mask", "terms_used", "converged",
];

/// Samples the current on a lattice and derives every flow channel.
///
/// The singular-set floor for `w` is `floor_rel · max|W|` over the grid.
/// Singular cells carry NaN in `w_x`, `w_p`, `divw`, `dWdt` and
/// `comoving_residual` and 1 in `singular_mask`.
pub fn fill_current_grid(ce: &CurrentEvaluator, spec: &GridSpec, floor_rel: f64) -> Result<PhaseGrid> {
    let samples = ce.sample_grid(spec)?;
    let w_max = samples.iter().fold(0.0f64, |m, s| m.max(s.w.abs()));
    let floor = floor_rel * w_max;
    let mut grid = PhaseGrid::new(*spec);
    let col = |f: &dyn Fn(&CurrentSample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    grid.insert("W", col(&|s| s.w))?;
    grid.insert("dWdx", col(&|s| s.dw_dx))?;
    grid.insert("dWdp", col(&|s| s.dw_dp))?;
    grid.insert("J_x", col(&|s| s.jx))?;
    grid.insert("J_p", col(&|s| s.jp))?;
    grid.insert("j_x", col(&|s| s.classical_jx))?;
    grid.insert("j_p", col(&|s| s.classical_jp))?;
    grid.insert("dJpdp", col(&|s| s.djp_dp))?;
    grid.insert("divJ", col(&|s| s.div_j))?;
    let nan = f64::NAN;
    grid.insert("w_x", col(&|s| s.velocity(floor).components.map_or(nan, |c| c[0])))?;
    grid.insert("w_p", col(&|s| s.velocity(floor).components.map_or(nan, |c| c[1])))?;
    grid.insert("divw", col(&|s| s.div_w(floor).unwrap_or(nan)))?;
    grid.insert("dWdt", col(&|s| s.comoving(floor).map_or(nan, |c| c.dw_dt)))?;
    grid.insert("comoving_residual", col(&|s| s.comoving(floor).map_or(nan, |c| c.residual)))?;
    grid.insert("singular_mask", col(&|s| if s.w.abs() <= floor { 1.0 } else { 0.0 }))?;
    grid.insert("terms_used", col(&|s| s.terms_used as f64))?;
    grid.insert("converged", col(&|s| if s.converged { 1.0 } else { 0.0 }))?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenstates::{harmonic_state, morse_state, MorseSpectrumParams};
    use crate::potential::{MorsePotential, PolynomialPotential};
    use crate::wigner::QuadratureConfig;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn window() -> GridSpec {
        GridSpec::new(-3.0, 6.0, 201, -3.0, 3.0, 201).unwrap()
    }

    fn harmonic(n: usize) -> CurrentEvaluator {
        let st = harmonic_state(1.0, 1.0, 1.0, n).unwrap();
        let spec = GridSpec::new(-4.0, 4.0, 9, -4.0, 4.0, 9).unwrap();
        let ev = WignerEvaluator::new(st, &spec, QuadratureConfig::default()).unwrap();
        CurrentEvaluator::new(ev, SeriesControl::default()).unwrap()
    }

    fn morse(n: usize) -> CurrentEvaluator {
        let params = MorseSpectrumParams::new(MorsePotential::reference(), 1.0, 1.0).unwrap();
        let ev = WignerEvaluator::new(morse_state(&params, n).unwrap(), &window(), QuadratureConfig::default()).unwrap();
        CurrentEvaluator::new(ev, SeriesControl::default()).unwrap()
    }

    #[test]
    fn harmonic_current_is_classical() {
        let ce = harmonic(0);
        for (x, p) in [(0.0, 0.0), (0.7, -1.1), (-1.5, 0.4)] {
            let s = ce.sample(x, p).unwrap();
            assert_eq!(s.terms_used, 0);
            assert_eq!(s.quantum_correction, 0.0);
            assert_eq!(s.jx, p * s.w);
            assert_eq!(s.jp, -x * s.w);
            let [wx, wp] = ce.velocity(x, p).unwrap().components.unwrap();
            assert_relative_eq!(wx, p, epsilon = 1e-15);
            assert_relative_eq!(wp, -x, epsilon = 1e-15);
            assert!(s.div_w(ce.w_floor()).unwrap().abs() < 1e-7);
            assert!(s.comoving(ce.w_floor()).unwrap().dw_dt.abs() < 1e-7);
        }
    }

    #[test]
    fn harmonic_excited_divergence_free() {
        let ce = harmonic(1);
        for (x, p) in [(0.2, 0.3), (1.1, -0.9), (-2.0, 1.0)] {
            assert!(ce.div_j(x, p).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn current_x_component_vanishes_on_axis() {
        let ce = morse(1);
        for x in [-1.0, 0.0, 2.5] {
            assert_eq!(ce.sample(x, 0.0).unwrap().jx, 0.0);
        }
    }

    #[test]
    fn quartic_series_terminates_after_one_term() {
        let st = harmonic_state(1.0, 1.0, 1.0, 0).unwrap();
        let spec = GridSpec::new(-4.0, 4.0, 9, -4.0, 4.0, 9).unwrap();
        let ev = WignerEvaluator::new(st, &spec, QuadratureConfig::default()).unwrap();
        let quartic = Arc::new(PolynomialPotential::new(vec![0.0, 0.0, 0.5, 0.0, 0.1], 0.0).unwrap());
        let ce = CurrentEvaluator::with_potential(ev, quartic, 1.0, SeriesControl::default()).unwrap();
        let (x, p) = (0.6, 0.8);
        let s = ce.sample(x, p).unwrap();
        assert_eq!(s.terms_used, 1);
        assert!(s.converged);
        // l = 1: -c_1 ∂_p²W V''' with c_1 = -1/24 and V''' = 2.4 x
        let w = (-x * x - p * p).exp() / PI;
        let d2 = (4.0 * p * p - 2.0) * w;
        assert_relative_eq!(s.quantum_correction, d2 * 2.4 * x / 24.0, max_relative = 1e-10);
    }

    #[test]
    fn truncated_series_matches_brute_force_sum() {
        let ce = morse(1);
        let brute = ce.clone().with_series(SeriesControl { l_max: 40, rtol: 0.0, atol: 0.0 }).unwrap();
        for (x, p) in [(0.4, 0.7), (-1.2, 1.5), (2.0, -0.3)] {
            let a = ce.sample(x, p).unwrap();
            let b = brute.sample(x, p).unwrap();
            assert!(a.converged);
            assert_eq!(b.terms_used, 40);
            assert_relative_eq!(a.quantum_correction, b.quantum_correction, max_relative = 1e-8);
            assert_relative_eq!(a.jp, b.jp, max_relative = 1e-8);
        }
    }

    #[test]
    fn morse_divergence_of_current_vanishes() {
        let ce = morse(1);
        for (x, p) in [(0.0, 0.0), (0.4, 0.7), (-1.2, 1.5), (2.0, -0.3), (4.0, 2.0)] {
            let s = ce.sample(x, p).unwrap();
            assert!(s.div_j.abs() < 1e-9, "({x}, {p}): {}", s.div_j);
        }
    }

    #[test]
    fn divergence_matches_finite_differences_of_current() {
        let ce = morse(1);
        let (x, p) = (0.8, 0.6);
        let h = 1e-3;
        let jx = |x: f64, p: f64| ce.sample(x, p).unwrap().jx;
        let jp = |x: f64, p: f64| ce.sample(x, p).unwrap().jp;
        let djx = (jx(x + h, p) - jx(x - h, p)) / (2.0 * h);
        let djp = (jp(x, p + h) - jp(x, p - h)) / (2.0 * h);
        let s = ce.sample(x, p).unwrap();
        assert!((s.div_j - (djx + djp)).abs() < 1e-5);
        assert!((s.djp_dp - djp).abs() < 1e-5);
    }

    #[test]
    fn velocity_identities_off_singular_set() {
        let ce = morse(1);
        for (x, p) in [(0.9, 0.3), (-0.5, -1.0), (3.0, 1.2)] {
            let s = ce.sample(x, p).unwrap();
            let [wx, wp] = s.velocity(ce.w_floor()).components.unwrap();
            assert_relative_eq!(wx * s.w, s.jx, max_relative = 1e-12);
            assert_relative_eq!(wp * s.w, s.jp, max_relative = 1e-12);
            let c = s.comoving(ce.w_floor()).unwrap();
            let scale = (s.j_dot_grad_w() / s.w).abs().max(1e-12);
            assert!(c.residual < 1e-5 * scale.max(1.0), "{c:?}");
        }
    }

    #[test]
    fn singular_flag_on_zero_of_w() {
        let ce = morse(1);
        // W(x, 0) changes sign between the center of the negative patch and the outside
        let w = |x: f64| ce.sample(x, 0.0).unwrap().w;
        let (mut a, mut b) = (0.0, 3.0);
        assert!(w(a) < 0.0 && w(b) > 0.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if w(m) < 0.0 { a = m } else { b = m }
        }
        let s = ce.sample(a, 0.0).unwrap();
        assert!(s.velocity(ce.w_floor()).is_singular());
        assert!(s.div_w(ce.w_floor()).is_none());
        assert!(s.comoving(ce.w_floor()).is_none());
    }

    #[test]
    fn velocity_divergence_matches_finite_differences() {
        let ce = morse(1);
        let (x, p) = (1.6, 1.3);
        let h = 1e-3;
        let w = |x: f64, p: f64| ce.velocity(x, p).unwrap().components.unwrap();
        let fd = (w(x + h, p)[0] - w(x - h, p)[0]) / (2.0 * h) + (w(x, p + h)[1] - w(x, p - h)[1]) / (2.0 * h);
        let exact = ce.div_w(x, p).unwrap().unwrap();
        assert_relative_eq!(exact, fd, max_relative = 1e-3);
    }

    #[test]
    fn grid_fill_channels() {
        let ce = harmonic(1);
        let spec = GridSpec::new(-2.0, 2.0, 11, -2.0, 2.0, 11).unwrap();
        let g = fill_current_grid(&ce, &spec, 1e-10).unwrap();
        assert_eq!(g.channel_names().collect::<Vec<_>>(), CURRENT_CHANNELS);
        assert!(g.max_abs("divJ").unwrap() < 1e-9);
    }

    #[test]
    fn rejects_series_beyond_moment_limit() {
        let ce = morse(0);
        assert!(ce.with_series(SeriesControl { l_max: 51, rtol: 0.0, atol: 0.0 }).is_err());
    }
}
