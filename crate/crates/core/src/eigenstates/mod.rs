//! Bound eigenstates of the Morse and harmonic potentials.
//!
//! Morse states use the variable `z = 2λ exp(-a(x - x0))` with
//! `ψ_n = N_n z^{λ-n-1/2} e^{-z/2} L_n^{(2λ-2n-1)}(z)` and
//! `N_n = sqrt(a (2λ-2n-1) n! / Γ(2λ-n))`. Harmonic states are Hermite
//! functions. The finite-difference diagonalization in [`fd`] is the
//! independent check for both.

pub mod fd;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::potential::{HarmonicPotential, MorsePotential, Potential};
use crate::special::{hermite_functions, laguerre, ln_gamma};

pub use fd::{fd_diagonalize, FdGrid, FdSpectrum};

/// Depth parameter and bound-state count of a Morse oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseSpectrumParams {
    pub potential: MorsePotential,
    pub mass: f64,
    pub hbar: f64,
    /// `sqrt(2 M D) / (a ħ)`
    pub lambda: f64,
    /// Largest bound quantum number.
    pub n_max: usize,
}

impl MorseSpectrumParams {
    pub fn new(potential: MorsePotential, mass: f64, hbar: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) || !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Domain(format!("mass and ħ must be positive, got M = {mass}, ħ = {hbar}")));
        }
        let lambda = (2.0 * mass * potential.depth()).sqrt() / (potential.a() * hbar);
        if lambda <= 0.5 {
            return Err(Error::Domain(format!("Morse well with λ = {lambda} has no bound states")));
        }
        let n_max = ((lambda - 0.5).ceil() as usize) - 1;
        Ok(Self { potential, mass, hbar, lambda, n_max })
    }

    /// Harmonic frequency of the well bottom, `a sqrt(2D/M)`.
    pub fn omega(&self) -> f64 {
        self.potential.a() * (2.0 * self.potential.depth() / self.mass).sqrt()
    }

    fn check_bound(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            Err(Error::UnboundState { n, n_max: self.n_max })
        } else {
            Ok(())
        }
    }
}

/// `E_n = ħω(n+½) - (ħω)²(n+½)²/(4D)`.
pub fn morse_energy(params: &MorseSpectrumParams, n: usize) -> Result<f64> {
    params.check_bound(n)?;
    let hw = params.hbar * params.omega();
    let v = n as f64 + 0.5;
    Ok(hw * v - hw * hw * v * v / (4.0 * params.potential.depth()))
}

#[derive(Debug, Clone)]
enum Wavefunction {
    Morse {
        a: f64,
        x0: f64,
        two_lambda: f64,
        /// `λ - n - 1/2`
        s: f64,
        /// Laguerre parameter `2λ - 2n - 1`
        alpha: f64,
        ln_norm: f64,
    },
    Harmonic {
        x0: f64,
        /// inverse oscillator length `sqrt(Mω/ħ)`
        beta: f64,
    },
}

/// A real, normalized bound eigenstate with its energy.
#[derive(Debug, Clone)]
pub struct Eigenstate {
    n: usize,
    energy: f64,
    mass: f64,
    hbar: f64,
    potential: Arc<dyn Potential>,
    form: Wavefunction,
}

/// Morse eigenstate `ψ_n`.
pub fn morse_state(params: &MorseSpectrumParams, n: usize) -> Result<Eigenstate> {
    let energy = morse_energy(params, n)?;
    let pot = params.potential;
    let nf = n as f64;
    let alpha = 2.0 * params.lambda - 2.0 * nf - 1.0;
    let ln_norm = 0.5 * (pot.a().ln() + alpha.ln() + ln_gamma(nf + 1.0) - ln_gamma(2.0 * params.lambda - nf));
    Ok(Eigenstate {
        n,
        energy,
        mass: params.mass,
        hbar: params.hbar,
        potential: Arc::new(pot),
        form: Wavefunction::Morse {
            a: pot.a(),
            x0: pot.x0(),
            two_lambda: 2.0 * params.lambda,
            s: params.lambda - nf - 0.5,
            alpha,
            ln_norm,
        },
    })
}

/// Harmonic oscillator eigenstate with `E_n = ħω(n + ½)`.
pub fn harmonic_state(mass: f64, omega: f64, hbar: f64, n: usize) -> Result<Eigenstate> {
    let pot = HarmonicPotential::new(mass, omega)?;
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::Domain(format!("ħ must be positive, got {hbar}")));
    }
    Ok(Eigenstate {
        n,
        energy: hbar * omega * (n as f64 + 0.5),
        mass,
        hbar,
        potential: Arc::new(pot),
        form: Wavefunction::Harmonic { x0: pot.x0(), beta: (mass * omega / hbar).sqrt() },
    })
}

impl Eigenstate {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.psi_and_derivative(x).0
    }

    pub fn dpsi(&self, x: f64) -> f64 {
        self.psi_and_derivative(x).1
    }

    /// `(ψ(x), ψ'(x))`, sharing the expensive parts.
    pub fn psi_and_derivative(&self, x: f64) -> (f64, f64) {
        match self.form {
            Wavefunction::Morse { a, x0, two_lambda, s, alpha, ln_norm } => {
                let z = two_lambda * (-a * (x - x0)).exp();
                if z == 0.0 || !z.is_finite() {
                    return (0.0, 0.0);
                }
                let envelope = (ln_norm + s * z.ln() - 0.5 * z).exp();
                if envelope == 0.0 {
                    return (0.0, 0.0);
                }
                let l = laguerre(self.n, alpha, z);
                // d/dz L_n^α = -L_{n-1}^{α+1}
                let dl = if self.n == 0 { 0.0 } else { -laguerre(self.n - 1, alpha + 1.0, z) };
                let psi = envelope * l;
                // dz/dx = -a z
                let dpsi = -a * envelope * ((s - 0.5 * z) * l + z * dl);
                (psi, dpsi)
            }
            Wavefunction::Harmonic { x0, beta } => {
                let xi = beta * (x - x0);
                let phi = hermite_functions(self.n + 1, xi);
                let n = self.n as f64;
                let lower = if self.n == 0 { 0.0 } else { phi[self.n - 1] };
                let dphi = (n / 2.0).sqrt() * lower - ((n + 1.0) / 2.0).sqrt() * phi[self.n + 1];
                (beta.sqrt() * phi[self.n], beta * beta.sqrt() * dphi)
            }
        }
    }

    /// Classical turning points `V(x) = E`, found by outward stepping and bisection.
    pub fn turning_points(&self) -> Result<(f64, f64)> {
        let x0 = self.potential.equilibrium();
        let step = self.potential.length_scale() / 16.0;
        let above = |x: f64| self.potential.value(x) > self.energy;
        let find = |dir: f64| -> Result<f64> {
            let mut inner = x0;
            for i in 1..=200_000 {
                let outer = x0 + dir * step * i as f64;
                if above(outer) {
                    return Ok(bisect(inner, outer, |x| !above(x)));
                }
                inner = outer;
            }
            Err(Error::Domain("no classical turning point found".into()))
        };
        Ok((find(-1.0)?, find(1.0)?))
    }

    /// Largest `|ψ|`, sampled densely across the classically allowed region.
    pub fn max_abs_psi(&self) -> Result<f64> {
        let (lo, hi) = self.turning_points()?;
        let pad = 0.25 * (hi - lo);
        let n = 4000;
        let h = (hi - lo + 2.0 * pad) / n as f64;
        Ok((0..=n).map(|i| self.psi(lo - pad + h * i as f64).abs()).fold(0.0, f64::max))
    }

    /// Interval outside of which `|ψ| < rel_tol · max|ψ|`.
    pub fn support(&self, rel_tol: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.turning_points()?;
        let threshold = rel_tol * self.max_abs_psi()?;
        let step = self.potential.length_scale() / 8.0;
        let find = |start: f64, dir: f64| -> Result<f64> {
            let mut inner = start;
            for i in 1..=1_000_000 {
                let outer = start + dir * step * i as f64;
                if self.psi(outer).abs() < threshold {
                    return Ok(bisect(inner, outer, |x| self.psi(x).abs() >= threshold));
                }
                inner = outer;
            }
            Err(Error::Domain(format!("wavefunction tail does not fall below {rel_tol} of its peak")))
        };
        Ok((find(lo, -1.0)?, find(hi, 1.0)?))
    }

    /// `(-ħ²/2M) ψ'' + V ψ - E ψ`, with `ψ''` from central differences of `ψ'`.
    pub fn schrodinger_residual(&self, x: f64, h: f64) -> f64 {
        let d2 = (self.dpsi(x + h) - self.dpsi(x - h)) / (2.0 * h);
        -self.hbar * self.hbar / (2.0 * self.mass) * d2 + (self.potential.value(x) - self.energy) * self.psi(x)
    }
}

/// Boundary of a predicate that holds at `inside` and fails at `outside`.
fn bisect(mut inside: f64, mut outside: f64, holds: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if holds(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}
