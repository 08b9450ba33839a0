//! The Lee–Scully effective-potential velocity `u = (p/M, J_p/∂_pW)` and the
//! measures of how far it is from a consistent description of the flow.

use serde::Serialize;

use crate::current::{CurrentEvaluator, CurrentSample};
use crate::error::{Error, Result};
use crate::grid::PhaseGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LsVelocitySample {
    pub u_x: f64,
    /// `None` where `|∂_pW|` is at or below the floor.
    pub u_p: Option<f64>,
    pub singular: bool,
}

impl LsVelocitySample {
    pub fn from_sample(s: &CurrentSample, mass: f64, dwdp_floor: f64) -> Self {
        let singular = !(s.dw_dp.abs() > dwdp_floor);
        Self { u_x: s.p / mass, u_p: (!singular).then(|| s.jp / s.dw_dp), singular }
    }

    /// The effective-potential gradient is the momentum component itself.
    pub fn v_eff_gradient(&self) -> Option<f64> {
        self.u_p
    }
}

pub fn ls_velocity(ce: &CurrentEvaluator, x: f64, p: f64, dwdp_floor: f64) -> Result<LsVelocitySample> {
    let s = ce.sample(x, p)?;
    Ok(LsVelocitySample::from_sample(&s, ce.mass(), dwdp_floor))
}

/// Divergence of `W u` on a filled current grid, with the analytic `∇·J` as
/// baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsResidual {
    /// `R = ∂_x J_x + ∂_p (W J_p / ∂_pW)`; NaN on masked and boundary nodes.
    #[serde(skip)]
    pub field: Vec<f64>,
    #[serde(skip)]
    pub mask: Vec<bool>,
    #[serde(rename = "R_max")]
    pub r_max: f64,
    #[serde(rename = "R_l2")]
    pub r_l2: f64,
    pub baseline_max: f64,
    pub baseline_l2: f64,
    /// Same finite-difference stencil applied to `J` itself.
    pub fd_baseline_max: f64,
    pub fd_baseline_l2: f64,
    /// `max |∂_pJ_p|` over the grid.
    pub scale: f64,
    pub masked_fraction: f64,
    /// Fraction of unmasked nodes where `|W u_p - J_p| < 1e-9 · scale`.
    pub coincidence_fraction: f64,
    pub dx: f64,
    pub dp: f64,
}

const REQUIRED: [&str; 6] = ["W", "dWdp", "J_x", "J_p", "dJpdp", "divJ"];

/// Interior nodes are masked when the node or one of its `p` neighbours has
/// `|∂_pW| <= floor_rel · max|∂_pW|`; boundary nodes are never evaluated.
pub fn ls_continuity_residual(grid: &PhaseGrid, floor_rel: f64) -> Result<LsResidual> {
    for name in REQUIRED {
        grid.channel(name)?;
    }
    let spec = *grid.spec();
    let (nx, np) = (spec.n_x, spec.n_p);
    if nx < 3 || np < 3 {
        return Err(Error::Precondition("residual needs at least 3 nodes per axis".into()));
    }
    let w = grid.channel("W")?;
    let dwdp = grid.channel("dWdp")?;
    let jx = grid.channel("J_x")?;
    let jp = grid.channel("J_p")?;
    let floor = floor_rel * grid.max_abs("dWdp")?;
    let scale = grid.max_abs("dJpdp")?;
    let singular: Vec<bool> = dwdp.iter().map(|d| !(d.abs() > floor)).collect();
    let flux_p: Vec<f64> = (0..spec.len()).map(|k| if singular[k] { f64::NAN } else { w[k] * jp[k] / dwdp[k] }).collect();
    let (dx, dp) = (spec.dx(), spec.dp());
    let cell = dx * dp;

    let mut field = vec![f64::NAN; spec.len()];
    let mut mask = vec![false; spec.len()];
    let (mut r_max, mut r_sq, mut b_max, mut b_sq, mut f_max, mut f_sq) = (0.0f64, 0.0, 0.0f64, 0.0, 0.0f64, 0.0);
    let (mut masked, mut interior, mut coincident) = (0usize, 0usize, 0usize);
    let div_j = grid.channel("divJ")?;
    for i in 1..nx - 1 {
        for j in 1..np - 1 {
            let k = spec.index(i, j);
            interior += 1;
            let (up, down) = (spec.index(i, j + 1), spec.index(i, j - 1));
            if singular[k] || singular[up] || singular[down] {
                mask[k] = true;
                masked += 1;
                continue;
            }
            let djx = (jx[spec.index(i + 1, j)] - jx[spec.index(i - 1, j)]) / (2.0 * dx);
            let r = djx + (flux_p[up] - flux_p[down]) / (2.0 * dp);
            field[k] = r;
            r_max = r_max.max(r.abs());
            r_sq += r * r * cell;
            b_max = b_max.max(div_j[k].abs());
            b_sq += div_j[k] * div_j[k] * cell;
            let fd = djx + (jp[up] - jp[down]) / (2.0 * dp);
            f_max = f_max.max(fd.abs());
            f_sq += fd * fd * cell;
            if (flux_p[k] - jp[k]).abs() < 1e-9 * scale {
                coincident += 1;
            }
        }
    }
    if 2 * masked > interior {
        return Err(Error::InsufficientCoverage { masked, total: interior });
    }
    let unmasked = interior - masked;
    Ok(LsResidual {
        field,
        mask,
        r_max,
        r_l2: r_sq.sqrt(),
        baseline_max: b_max,
        baseline_l2: b_sq.sqrt(),
        fd_baseline_max: f_max,
        fd_baseline_l2: f_sq.sqrt(),
        scale,
        masked_fraction: masked as f64 / interior as f64,
        coincidence_fraction: if unmasked == 0 { 0.0 } else { coincident as f64 / unmasked as f64 },
        dx,
        dp,
    })
}

/// `u·∇W = (p/M) ∂_xW + J_p` at each probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquiWignerReport {
    pub values: Vec<f64>,
    pub max_abs: f64,
    /// `max_abs / scale`
    pub normalized: f64,
    pub scale: f64,
}

/// `scale` is usually the grid maximum of `|J|`.
pub fn ls_equi_wigner_test(ce: &CurrentEvaluator, probes: &[(f64, f64)], scale: f64) -> Result<EquiWignerReport> {
    if !(scale > 0.0) {
        return Err(Error::Precondition(format!("scale must be positive, got {scale}")));
    }
    let samples = ce.sample_points(probes)?;
    let values: Vec<f64> = samples.iter().map(|s| s.p / ce.mass() * s.dw_dx + s.jp).collect();
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(EquiWignerReport { values, max_abs, normalized: max_abs / scale, scale })
}

/// Largest `|J|` on a filled current grid.
pub fn current_scale(grid: &PhaseGrid) -> Result<f64> {
    let jx = grid.channel("J_x")?;
    let jp = grid.channel("J_p")?;
    Ok(jx.iter().zip(jp).fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::current::{fill_current_grid, SeriesControl};
    use crate::eigenstates::harmonic_state;
    use crate::grid::GridSpec;
    use crate::wigner::{QuadratureConfig, WignerEvaluator};
    use approx::assert_relative_eq;

    fn harmonic_ground(spec: &GridSpec) -> CurrentEvaluator {
        let ev = WignerEvaluator::new(harmonic_state(1.0, 1.0, 1.0, 0).unwrap(), spec, QuadratureConfig::default()).unwrap();
        CurrentEvaluator::new(ev, SeriesControl::default()).unwrap()
    }

    #[test]
    fn gaussian_velocity_differs_from_w() {
        let spec = GridSpec::new(-3.0, 3.0, 61, -3.0, 3.0, 61).unwrap();
        let ce = harmonic_ground(&spec);
        let u = ls_velocity(&ce, 1.0, 1.0, 1e-12).unwrap();
        assert!(!u.singular);
        assert_relative_eq!(u.u_x, 1.0);
        assert_relative_eq!(u.u_p.unwrap(), 0.5, max_relative = 1e-10);
        let w = ce.velocity(1.0, 1.0).unwrap().components.unwrap();
        assert_relative_eq!(w[1], -1.0, max_relative = 1e-10);
        // ∂_pW vanishes on the axis
        assert!(ls_velocity(&ce, 0.7, 0.0, 1e-12).unwrap().singular);
    }

    #[test]
    fn gaussian_equi_wigner_value() {
        let spec = GridSpec::new(-3.0, 3.0, 61, -3.0, 3.0, 61).unwrap();
        let ce = harmonic_ground(&spec);
        let w = ce.wigner().wigner(1.0, 1.0).unwrap();
        let rep = ls_equi_wigner_test(&ce, &[(1.0, 1.0)], 1.0).unwrap();
        assert_relative_eq!(rep.values[0], -3.0 * w, max_relative = 1e-10);
        let s = ce.sample(1.0, 1.0).unwrap();
        assert_relative_eq!(rep.values[0], s.jp + s.p * s.dw_dx, max_relative = 1e-10);
        assert!(ls_equi_wigner_test(&ce, &[(1.0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn residual_masks_and_baseline() {
        let spec = GridSpec::new(-3.0, 3.0, 61, -3.0, 3.0, 61).unwrap();
        let ce = harmonic_ground(&spec);
        let grid = fill_current_grid(&ce, &spec, 1e-10).unwrap();
        let r = ls_continuity_residual(&grid, 1e-10).unwrap();
        assert!(r.baseline_max < 1e-10 * r.scale, "{}", r.baseline_max / r.scale);
        assert!(r.r_max > 0.1 * r.scale);
        // the p = 0 row is singular, so it and its two neighbours are masked
        let dwdp = grid.channel("dWdp").unwrap();
        let floor = 1e-10 * grid.max_abs("dWdp").unwrap();
        for i in 1..spec.n_x - 1 {
            for j in 1..spec.n_p - 1 {
                let k = spec.index(i, j);
                let near = [j - 1, j, j + 1].iter().any(|&q| dwdp[spec.index(i, q)].abs() <= floor);
                assert_eq!(r.mask[k], near);
                assert_eq!(r.field[k].is_nan(), near);
            }
            assert!(r.mask[spec.index(i, 30)]);
        }
        assert_relative_eq!(r.masked_fraction, 3.0 / 59.0, max_relative = 1e-12);
    }

    #[test]
    fn insufficient_coverage() {
        let spec = GridSpec::new(-1.0, 1.0, 5, -1.0, 1.0, 5).unwrap();
        let mut g = PhaseGrid::new(spec);
        for name in REQUIRED {
            g.insert(name, vec![1.0; spec.len()]).unwrap();
        }
        // ∂_pW nonzero only on one row
        let mut dwdp = vec![0.0; spec.len()];
        for i in 0..5 {
            dwdp[spec.index(i, 2)] = 1.0;
        }
        g.insert("dWdp", dwdp).unwrap();
        assert!(matches!(ls_continuity_residual(&g, 1e-10), Err(Error::InsufficientCoverage { .. })));
        let missing = PhaseGrid::new(spec);
        assert!(matches!(ls_continuity_residual(&missing, 1e-10), Err(Error::UnknownChannel(_))));
    }
}
