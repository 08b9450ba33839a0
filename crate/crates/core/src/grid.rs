//! Rectangular phase-space lattices carrying named sample channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Window and resolution of a phase-space lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub n_p: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_x: usize, p_min: f64, p_max: f64, n_p: usize) -> Result<Self> {
        let spec = Self { x_min, x_max, n_x, p_min, p_max, n_p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.p_min, self.p_max].iter().all(|v| v.is_finite());
        if !finite || !(self.x_max > self.x_min) || !(self.p_max > self.p_min) {
            return Err(Error::Domain(format!("degenerate window {self:?}")));
        }
        if self.n_x < 2 || self.n_p < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 points per axis, got {}x{}", self.n_x, self.n_p)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n_p - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_x {
            self.x_max
        } else {
            self.x_min + self.dx() * i as f64
        }
    }

    pub fn p(&self, j: usize) -> f64 {
        if j + 1 == self.n_p {
            self.p_max
        } else {
            self.p_min + self.dp() * j as f64
        }
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major in x then p.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_p + j
    }

    pub fn contains(&self, x: f64, p: f64) -> bool {
        x >= self.x_min && x <= self.x_max && p >= self.p_min && p <= self.p_max
    }

    pub fn max_abs_p(&self) -> f64 {
        self.p_min.abs().max(self.p_max.abs())
    }
}

/// Sampled fields on a [`GridSpec`], in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    spec: GridSpec,
    channels: Vec<(String, Vec<f64>)>,
}

impl PhaseGrid {
    pub fn new(spec: GridSpec) -> Self {
        Self { spec, channels: Vec::new() }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Adds or replaces a channel.
    pub fn insert(&mut self, name: impl Into<String>, data: Vec<f64>) -> Result<()> {
        let name = name.into();
        if data.len() != self.spec.len() {
            return Err(Error::Precondition(format!(
                "channel `{name}` has {} samples, grid has {}",
                data.len(),
                self.spec.len()
            )));
        }
        match self.channels.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = data,
            None => self.channels.push((name, data)),
        }
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn has_channel(&self, name: &str) -> bool {
        self.channels.iter().any(|(n, _)| n == name)
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    pub fn at(&self, name: &str, i: usize, j: usize) -> Result<f64> {
        Ok(self.channel(name)?[self.spec.index(i, j)])
    }

    /// Largest absolute value of a channel, ignoring NaN.
    pub fn max_abs(&self, name: &str) -> Result<f64> {
        Ok(self.channel(name)?.iter().filter(|v| !v.is_nan()).fold(0.0, |m, v| m.max(v.abs())))
    }

    /// Restricts the grid to the listed channels, in the listed order.
    pub fn select(&self, names: &[&str]) -> Result<PhaseGrid> {
        let mut out = PhaseGrid::new(self.spec);
        for name in names {
            out.insert(*name, self.channel(name)?.to_vec())?;
        }
        Ok(out)
    }

    /// Bilinear interpolation of a channel inside the window.
    pub fn interpolate(&self, name: &str, x: f64, p: f64) -> Result<f64> {
        let data = self.channel(name)?;
        let s = &self.spec;
        let fx = ((x - s.x_min) / s.dx()).clamp(0.0, (s.n_x - 1) as f64);
        let fp = ((p - s.p_min) / s.dp()).clamp(0.0, (s.n_p - 1) as f64);
        let i = (fx.floor() as usize).min(s.n_x - 2);
        let j = (fp.floor() as usize).min(s.n_p - 2);
        let (tx, tp) = (fx - i as f64, fp - j as f64);
        let v = |a, b| data[s.index(a, b)];
        Ok((1.0 - tx) * (1.0 - tp) * v(i, j) + tx * (1.0 - tp) * v(i + 1, j) + (1.0 - tx) * tp * v(i, j + 1) + tx * tp * v(i + 1, j + 1))
    }
}
