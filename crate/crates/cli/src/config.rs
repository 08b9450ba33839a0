//! Run configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wigner_flow::current::SeriesControl;
use wigner_flow::eigenstates::{harmonic_state, morse_state, Eigenstate, MorseSpectrumParams};
use wigner_flow::grid::GridSpec;
use wigner_flow::potential::MorsePotential;
use wigner_flow::topology::{FieldlineControls, Rect, StagnationOptions};
use wigner_flow::wigner::QuadratureConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Morse,
    Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub potential: PotentialKind,
    /// Morse well depth
    pub depth: f64,
    /// Morse range parameter
    pub a: f64,
    /// equilibrium position
    pub x0: f64,
    /// harmonic frequency
    pub omega: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { potential: PotentialKind::Morse, depth: 3.0, a: 1.0 / 6f64.sqrt(), x0: 0.0, omega: 1.0, mass: 1.0, hbar: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub n: usize,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self { n: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub n_p: usize,
}

impl WindowConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.x_min, self.x_max, self.n_x, self.p_min, self.p_max, self.n_p)?)
    }

    /// Parses `X0:X1:NX,P0:P1:NP`.
    pub fn parse(text: &str) -> Result<Self> {
        let axes: Vec<&str> = text.split(',').collect();
        if axes.len() != 2 {
            bail!("window must look like X0:X1:NX,P0:P1:NP, got `{text}`");
        }
        let axis = |s: &str| -> Result<(f64, f64, usize)> {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                bail!("window axis must look like LO:HI:N, got `{s}`");
            }
            Ok((
                parts[0].trim().parse().with_context(|| format!("bad bound `{}`", parts[0]))?,
                parts[1].trim().parse().with_context(|| format!("bad bound `{}`", parts[1]))?,
                parts[2].trim().parse().with_context(|| format!("bad node count `{}`", parts[2]))?,
            ))
        };
        let (x_min, x_max, n_x) = axis(axes[0])?;
        let (p_min, p_max, n_p) = axis(axes[1])?;
        Ok(Self { x_min, x_max, n_x, p_min, p_max, n_p })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesConfig {
    pub l_max: usize,
    pub rtol: f64,
    pub atol: f64,
    /// singular set of `w`: `|W| <= w_floor_rel · max|W|`
    pub w_floor_rel: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        let s = SeriesControl::default();
        Self { l_max: s.l_max, rtol: s.rtol, atol: s.atol, w_floor_rel: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    pub nodes_per_panel: usize,
    pub tail_tolerance: f64,
    pub max_order: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        Self { nodes_per_panel: q.nodes_per_panel, tail_tolerance: q.tail_tolerance, max_order: q.max_order }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SeedPolicy {
    Boundary,
    Axis,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldlineConfig {
    pub seed_policy: SeedPolicy,
    pub boundary_seeds: usize,
    pub axis_seeds: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    pub close_eps: f64,
}

impl Default for FieldlineConfig {
    fn default() -> Self {
        let c = FieldlineControls::new(Rect::new(0.0, 1.0, 0.0, 1.0));
        Self {
            seed_policy: SeedPolicy::Both,
            boundary_seeds: 16,
            axis_seeds: 16,
            abs_tol: c.abs_tol,
            rel_tol: c.rel_tol,
            max_step: c.max_step,
            max_steps: c.max_steps,
            close_eps: c.close_eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub coarse_n: usize,
    pub winding_cells: f64,
    pub winding_samples: usize,
    pub boundary_samples: usize,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        let s = StagnationOptions::default();
        Self { coarse_n: s.coarse_n, winding_cells: s.winding_cells, winding_samples: s.winding_samples, boundary_samples: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub state: StateConfig,
    /// Defaults depend on the potential, see [`RunConfig::window`].
    pub window: Option<WindowConfig>,
    pub series: SeriesConfig,
    pub quadrature: QuadratureSection,
    pub fieldlines: FieldlineConfig,
    pub topology: TopologyConfig,
    pub output: OutputConfig,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub state: Option<usize>,
    pub window: Option<String>,
    pub lmax: Option<usize>,
    pub seed_policy: Option<SeedPolicy>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(out) = &overrides.out {
            cfg.output.directory = out.clone();
        }
        if let Some(n) = overrides.state {
            cfg.state.n = n;
        }
        if let Some(w) = &overrides.window {
            cfg.window = Some(WindowConfig::parse(w)?);
        }
        if let Some(l) = overrides.lmax {
            cfg.series.l_max = l;
        }
        if let Some(s) = overrides.seed_policy {
            cfg.fieldlines.seed_policy = s;
        }
        if cfg.window.is_none() {
            cfg.window = Some(cfg.default_window());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn default_window(&self) -> WindowConfig {
        match self.system.potential {
            PotentialKind::Morse => WindowConfig { x_min: -3.0, x_max: 6.0, n_x: 201, p_min: -3.0, p_max: 3.0, n_p: 201 },
            PotentialKind::Harmonic => {
                let c = self.system.x0;
                WindowConfig { x_min: c - 3.0, x_max: c + 3.0, n_x: 201, p_min: -3.0, p_max: 3.0, n_p: 201 }
            }
        }
    }

    pub fn window(&self) -> WindowConfig {
        self.window.unwrap_or_else(|| self.default_window())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("system.mass", self.system.mass),
            ("system.hbar", self.system.hbar),
            ("series.w_floor_rel", self.series.w_floor_rel),
            ("quadrature.tail_tolerance", self.quadrature.tail_tolerance),
            ("fieldlines.abs_tol", self.fieldlines.abs_tol),
            ("fieldlines.rel_tol", self.fieldlines.rel_tol),
            ("fieldlines.max_step", self.fieldlines.max_step),
            ("fieldlines.close_eps", self.fieldlines.close_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive and finite, got {v}");
            }
        }
        if !(self.series.rtol >= 0.0 && self.series.atol >= 0.0) {
            bail!("series tolerances must not be negative");
        }
        self.window().spec()?;
        self.state()?;
        if self.topology.boundary_samples < 4 {
            bail!("topology.boundary_samples must be at least 4");
        }
        Ok(())
    }

    pub fn morse_params(&self) -> Result<Option<MorseSpectrumParams>> {
        match self.system.potential {
            PotentialKind::Morse => {
                let pot = MorsePotential::new(self.system.depth, self.system.a, self.system.x0)?;
                Ok(Some(MorseSpectrumParams::new(pot, self.system.mass, self.system.hbar)?))
            }
            PotentialKind::Harmonic => Ok(None),
        }
    }

    pub fn state(&self) -> Result<Eigenstate> {
        match self.morse_params()? {
            Some(params) => Ok(morse_state(&params, self.state.n)?),
            None => {
                let st = harmonic_state(self.system.mass, self.system.omega, self.system.hbar, self.state.n)?;
                if self.system.x0 != 0.0 {
                    bail!("harmonic potential is centred at the origin; set system.x0 = 0");
                }
                Ok(st)
            }
        }
    }

    pub fn series(&self) -> SeriesControl {
        SeriesControl { l_max: self.series.l_max, rtol: self.series.rtol, atol: self.series.atol }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            nodes_per_panel: self.quadrature.nodes_per_panel,
            tail_tolerance: self.quadrature.tail_tolerance,
            max_order: self.quadrature.max_order,
        }
    }

    pub fn stagnation(&self) -> StagnationOptions {
        StagnationOptions {
            coarse_n: self.topology.coarse_n,
            winding_cells: self.topology.winding_cells,
            winding_samples: self.topology.winding_samples,
            ..StagnationOptions::default()
        }
    }

    pub fn fieldline_controls(&self, window: Rect) -> FieldlineControls {
        let f = &self.fieldlines;
        FieldlineControls {
            abs_tol: f.abs_tol,
            rel_tol: f.rel_tol,
            max_step: f.max_step,
            max_steps: f.max_steps,
            close_eps: f.close_eps,
            ..FieldlineControls::new(window)
        }
    }

    /// SHA-256 over everything except the output section.
    pub fn hash(&self) -> String {
        let mut physics = self.clone();
        physics.output = OutputConfig::default();
        physics.window = Some(self.window());
        let canonical = serde_json::to_string(&physics).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
