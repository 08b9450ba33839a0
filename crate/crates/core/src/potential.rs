//! One-dimensional potentials with closed-form derivatives of any order.
//!
//! The Wigner current series pairs `∂_p^{2l} W` with `∂_x^{2l+1} V` for `l` up
//! to a few dozen, so every potential here returns exact derivatives instead of
//! finite differences.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// A 1D potential `V(x)` with exact derivatives.
pub trait Potential: Debug + Send + Sync {
    /// `V(x)`.
    fn value(&self, x: f64) -> f64;

    /// `∂_x^k V(x)` for `k >= 1`.
    fn derivative(&self, x: f64, k: usize) -> f64;

    /// Location of the potential minimum.
    fn equilibrium(&self) -> f64;

    /// Characteristic length over which the potential changes appreciably.
    fn length_scale(&self) -> f64;

    /// Highest derivative order that can be nonzero, `None` if unbounded.
    fn derivative_degree(&self) -> Option<usize>;

    /// Short human-readable name.
    fn name(&self) -> &'static str;
}

/// Checked `V(x)`.
pub fn eval(pot: &dyn Potential, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite position {x}")));
    }
    Ok(pot.value(x))
}

/// Checked `∂_x^k V(x)`.
///
/// `k` is signed here so that callers parsing user input get a domain error
/// rather than a wrap-around; `k = 0` is rejected, use [`eval`].
pub fn deriv(pot: &dyn Potential, x: f64, k: i64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite position {x}")));
    }
    match k {
        k if k < 0 => Err(Error::Domain(format!("negative derivative order {k}"))),
        0 => Err(Error::Domain("derivative order 0 requested, use eval".into())),
        k => Ok(pot.derivative(x, k as usize)),
    }
}

/// `V(x) = D (1 - exp(-a (x - x0)))^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorsePotential {
    depth: f64,
    a: f64,
    x0: f64,
}

impl MorsePotential {
    pub fn new(depth: f64, a: f64, x0: f64) -> Result<Self> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::Domain(format!("Morse depth must be positive, got {depth}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("Morse range parameter must be positive, got {a}")));
        }
        if !x0.is_finite() {
            return Err(Error::Domain("Morse equilibrium must be finite".into()));
        }
        Ok(Self { depth, a, x0 })
    }

    /// `V(x) = 3 (1 - exp(-x/√6))^2`.
    pub fn reference() -> Self {
        Self { depth: 3.0, a: 1.0 / 6f64.sqrt(), x0: 0.0 }
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
}

impl Potential for MorsePotential {
    fn value(&self, x: f64) -> f64 {
        let e = (-self.a * (x - self.x0)).exp();
        self.depth * (1.0 - e) * (1.0 - e)
    }

    fn derivative(&self, x: f64, k: usize) -> f64 {
        // V = D (1 - 2e^{-aξ} + e^{-2aξ})
        let xi = x - self.x0;
        let k = k as i32;
        let s1 = (-self.a).powi(k) * (-self.a * xi).exp();
        let s2 = (-2.0 * self.a).powi(k) * (-2.0 * self.a * xi).exp();
        self.depth * (s2 - 2.0 * s1)
    }

    fn equilibrium(&self) -> f64 {
        self.x0
    }

    fn length_scale(&self) -> f64 {
        1.0 / self.a
    }

    fn derivative_degree(&self) -> Option<usize> {
        None
    }

    fn name(&self) -> &'static str {
        "morse"
    }
}

/// `V(x) = ½ M ω² (x - x0)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicPotential {
    mass: f64,
    omega: f64,
    x0: f64,
}

impl HarmonicPotential {
    pub fn new(mass: f64, omega: f64) -> Result<Self> {
        Self::centered(mass, omega, 0.0)
    }

    pub fn centered(mass: f64, omega: f64, x0: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) || !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Domain(format!(
                "harmonic potential needs positive mass and frequency, got M = {mass}, ω = {omega}"
            )));
        }
        if !x0.is_finite() {
            return Err(Error::Domain("harmonic center must be finite".into()));
        }
        Ok(Self { mass, omega, x0 })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    fn stiffness(&self) -> f64 {
        self.mass * self.omega * self.omega
    }
}

impl Potential for HarmonicPotential {
    fn value(&self, x: f64) -> f64 {
        let d = x - self.x0;
        0.5 * self.stiffness() * d * d
    }

    fn derivative(&self, x: f64, k: usize) -> f64 {
        match k {
            1 => self.stiffness() * (x - self.x0),
            2 => self.stiffness(),
            _ => 0.0,
        }
    }

    fn equilibrium(&self) -> f64 {
        self.x0
    }

    fn length_scale(&self) -> f64 {
        // oscillator length at ħ = 1
        1.0 / (self.mass * self.omega).sqrt()
    }

    fn derivative_degree(&self) -> Option<usize> {
        Some(2)
    }

    fn name(&self) -> &'static str {
        "harmonic"
    }
}

/// `V(x) = Σ c_j (x - x0)^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPotential {
    coefficients: Vec<f64>,
    x0: f64,
}

impl PolynomialPotential {
    pub fn new(coefficients: Vec<f64>, x0: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Domain("polynomial potential needs at least one coefficient".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) || !x0.is_finite() {
            return Err(Error::Domain("polynomial coefficients must be finite".into()));
        }
        let mut coefficients = coefficients;
        while coefficients.len() > 1 && coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        Ok(Self { coefficients, x0 })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

impl Potential for PolynomialPotential {
    fn value(&self, x: f64) -> f64 {
        let d = x - self.x0;
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * d + c)
    }

    fn derivative(&self, x: f64, k: usize) -> f64 {
        if k > self.degree() {
            return 0.0;
        }
        let d = x - self.x0;
        // coefficient of d^(j-k) in the k-th derivative is c_j j!/(j-k)!
        let mut acc = 0.0;
        for j in (k..=self.degree()).rev() {
            let falling: f64 = ((j - k + 1)..=j).map(|m| m as f64).product();
            acc = acc * d + self.coefficients[j] * falling;
        }
        acc
    }

    fn equilibrium(&self) -> f64 {
        self.x0
    }

    fn length_scale(&self) -> f64 {
        let c2 = self.coefficients.get(2).copied().unwrap_or(0.0);
        if c2 > 0.0 {
            (1.0 / (2.0 * c2)).sqrt().sqrt()
        } else {
            1.0
        }
    }

    fn derivative_degree(&self) -> Option<usize> {
        Some(self.degree())
    }

    fn name(&self) -> &'static str {
        "polynomial"
    }
}
