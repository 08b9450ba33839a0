//! Finite-difference diagonalization of `-(ħ²/2M) ∂_x² + V` on a uniform grid
//! with Dirichlet walls.
//!
//! Eigenvalues of the symmetric tridiagonal matrix come from Sturm-sequence
//! bisection, eigenvectors from inverse iteration. The three-point Laplacian
//! carries an `O(h²)` energy error, which is removed by one Richardson step
//! against a coarser grid sharing the same walls.

use crate::error::{Error, Result};
use crate::potential::Potential;

/// Uniform grid `x_min..=x_max` with `n` points including both walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl FdGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Self {
        Self { x_min, x_max, n }
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.spacing() * i as f64
    }
}

/// Result of [`fd_diagonalize`].
#[derive(Debug, Clone)]
pub struct FdSpectrum {
    pub grid: FdGrid,
    /// Richardson-extrapolated eigenvalues, ascending.
    pub energies: Vec<f64>,
    /// Raw eigenvalues on the requested grid.
    pub fine_energies: Vec<f64>,
    /// Eigenvectors on all `grid.n` points (walls included, zero there),
    /// normalized with trapezoid weights, positive in the right tail.
    pub states: Vec<Vec<f64>>,
    /// Set when some state has not decayed before reaching the walls.
    pub accuracy_warning: bool,
}

struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    fn hamiltonian(pot: &dyn Potential, mass: f64, hbar: f64, grid: &FdGrid) -> Self {
        let h = grid.spacing();
        let t = hbar * hbar / (2.0 * mass * h * h);
        let diag = (1..grid.n - 1).map(|i| 2.0 * t + pot.value(grid.x(i))).collect();
        Self { diag, off: -t }
    }

    /// Number of eigenvalues strictly below `lambda`.
    fn count_below(&self, lambda: f64) -> usize {
        let e2 = self.off * self.off;
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - lambda } else { d - lambda - e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + self.off.abs());
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bounds(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().fold(f64::INFINITY, |m, &d| m.min(d - r));
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d + r));
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue by bisection.
    fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let m = self.diag.len();
        let scale = self.diag.iter().fold(0.0f64, |a, d| a.max(d.abs())) + self.off.abs();
        let shift = lambda + 1e-13 * scale;
        let lu = TridiagonalLu::factor(&self.diag, self.off, shift, scale);
        let mut v: Vec<f64> = (0..m).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        for _ in 0..4 {
            lu.solve(&mut v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

/// LU factorization of `T - shift·I` with partial pivoting.
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: f64, shift: f64, scale: f64) -> Self {
        let n = diag.len();
        let mut dl = vec![off; n.saturating_sub(1)];
        let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
        let mut du = vec![off; n.saturating_sub(1)];
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = f64::EPSILON * scale;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if let Some(last) = d.last_mut() {
            if *last == 0.0 {
                *last = f64::EPSILON * scale;
            }
        }
        Self { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Lowest `count` eigenpairs of `-(ħ²/2M) ∂_x² + V` on `grid`.
pub fn fd_diagonalize(pot: &dyn Potential, mass: f64, hbar: f64, grid: FdGrid, count: usize) -> Result<FdSpectrum> {
    if grid.n < 512 {
        return Err(Error::Precondition(format!("finite-difference grid needs N >= 512, got {}", grid.n)));
    }
    if !(grid.x_max > grid.x_min) || !grid.x_min.is_finite() || !grid.x_max.is_finite() {
        return Err(Error::Precondition("finite-difference grid bounds must be finite and increasing".into()));
    }
    if count == 0 || count > grid.n - 2 {
        return Err(Error::Precondition(format!("cannot extract {count} eigenpairs")));
    }

    let fine = Tridiagonal::hamiltonian(pot, mass, hbar, &grid);
    let coarse_grid = FdGrid { n: (grid.n - 1) / 2 + 1, ..grid };
    let coarse = Tridiagonal::hamiltonian(pot, mass, hbar, &coarse_grid);
    let r2 = (coarse_grid.spacing() / grid.spacing()).powi(2);

    let fine_energies: Vec<f64> = (0..count).map(|k| fine.eigenvalue(k)).collect();
    let energies = fine_energies
        .iter()
        .enumerate()
        .map(|(k, &ef)| (r2 * ef - coarse.eigenvalue(k)) / (r2 - 1.0))
        .collect();

    let h = grid.spacing();
    let edge = (grid.n / 50).max(2);
    let mut accuracy_warning = false;
    let states = fine_energies
        .iter()
        .map(|&e| {
            let inner = fine.eigenvector(e);
            let mut psi = Vec::with_capacity(grid.n);
            psi.push(0.0);
            psi.extend(inner);
            psi.push(0.0);
            let norm = (h * psi.iter().map(|x| x * x).sum::<f64>()).sqrt();
            let peak = psi.iter().fold(0.0f64, |m, x| m.max(x.abs())) / norm;
            psi.iter_mut().for_each(|x| *x /= norm);
            if let Some(&tail) = psi.iter().rev().find(|x| x.abs() > 1e-3 * peak) {
                if tail < 0.0 {
                    psi.iter_mut().for_each(|x| *x = -*x);
                }
            }
            let wall = psi[..edge].iter().chain(&psi[grid.n - edge..]).fold(0.0f64, |m, x| m.max(x.abs()));
            if wall > 1e-6 * peak {
                accuracy_warning = true;
            }
            psi
        })
        .collect();

    Ok(FdSpectrum { grid, energies, fine_energies, states, accuracy_warning })
}
