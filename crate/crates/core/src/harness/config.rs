use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Side;
use crate::solvers::{AdmmConfig, LdConfig, PdIpmConfig};

/// A named face of the domain box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideName {
    Left,
    Right,
    Bottom,
    Top,
    Back,
    Front,
}

impl SideName {
    pub fn side(self) -> Side {
        let (axis, upper) = match self {
            SideName::Left => (0, false),
            SideName::Right => (0, true),
            SideName::Bottom => (1, false),
            SideName::Top => (1, true),
            SideName::Back => (2, false),
            SideName::Front => (2, true),
        };
        Side { axis, upper }
    }
}

/// Domain nodes and PML of one grid; the time axis is shared and lives in
/// [`TimeConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dims: Vec<usize>,
    /// mm per axis.
    pub spacing: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub origin: Vec<f64>,
    pub pml_size: usize,
    pub pml_alpha: f64,
}

/// Shared time axis. Unset `dt` comes from `cfl` on the finest grid and the
/// fastest sound speed of either medium; unset `nt` covers the generation
/// domain diagonal at the slowest sound speed (or `t_end` seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

fn default_cfl() -> f64 {
    0.3
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            cfl: default_cfl(),
            dt: None,
            nt: None,
            t_end: None,
        }
    }
}

/// Inclusion geometry in mm. Disks and rectangles are 2D, balls and boxes 3D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Disk { centre: Vec<f64>, radius: f64 },
    Rect { lo: Vec<f64>, hi: Vec<f64> },
    Ball { centre: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Shape {
    pub fn dimension(&self) -> usize {
        match self {
            Shape::Disk { .. } | Shape::Rect { .. } => 2,
            Shape::Ball { .. } | Shape::Box { .. } => 3,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Disk { centre, radius } | Shape::Ball { centre, radius } => {
                x.iter().zip(centre).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() <= radius * radius
            }
            Shape::Rect { lo, hi } | Shape::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).all(|(a, (l, h))| *l <= *a && *a <= *h)
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.dimension() != dim {
            return Err(Error::config(format!("{self:?} does not fit a {dim}D experiment")));
        }
        let ok = match self {
            Shape::Disk { centre, radius } | Shape::Ball { centre, radius } => centre.len() == dim && *radius > 0.0,
            Shape::Rect { lo, hi } | Shape::Box { lo, hi } => {
                lo.len() == dim && hi.len() == dim && lo.iter().zip(hi).all(|(l, h)| l < h)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("malformed inclusion {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Mu,
    Kappa,
}

/// One optical inclusion. Without an explicit `value` it draws the next
/// entry of the seed-permuted value list of its coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    #[serde(flatten)]
    pub shape: Shape,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    /// 1/mm.
    pub mu_background: f64,
    /// mm.
    pub kappa_background: f64,
    pub mu_range: [f64; 2],
    pub kappa_range: [f64; 2],
    #[serde(default)]
    pub mu_values: Vec<f64>,
    #[serde(default)]
    pub kappa_values: Vec<f64>,
    #[serde(default)]
    pub inclusions: Vec<Inclusion>,
}

/// A region of the clean acoustic maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcousticInclusion {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcousticSpec {
    /// m/s.
    pub c_background: f64,
    /// kg/m³.
    pub rho_background: f64,
    /// dB MHz^-y cm^-1.
    pub alpha0: f64,
    pub y: f64,
    /// SNR of the noise added to the generation maps; `inf` disables it.
    pub corruption_snr_db: f64,
    #[serde(default)]
    pub inclusions: Vec<AcousticInclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub sides: Vec<SideName>,
    /// Points per free axis of every side.
    pub per_side: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Admm,
    Ld,
    Pdipm,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "admm" => Ok(Method::Admm),
            "ld" => Ok(Method::Ld),
            "pdipm" => Ok(Method::Pdipm),
            _ => Err(Error::config(format!("unknown method {s:?} (expected admm, ld or pdipm)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Admm => "admm",
            Method::Ld => "ld",
            Method::Pdipm => "pdipm",
        })
    }
}

/// Band limit of the source smoothing window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceSmoothing {
    /// Each grid's window vanishes at its own Nyquist wavenumber.
    Grid,
    /// Both grids use the Nyquist wavenumber of the coarser one.
    #[default]
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub phantom: u64,
    pub medium: u64,
    pub data: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub method: Method,
    #[serde(default = "default_guess")]
    pub initial_guess_factor: f64,
    pub data_noise_snr_db: f64,
    #[serde(default)]
    pub allow_inverse_crime: bool,
    /// Wall-clock seconds in traces; off keeps bundles reproducible.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub source_smoothing: SourceSmoothing,
    /// Boundary sides lit by each illumination.
    pub illuminations: Vec<Vec<SideName>>,
    pub seeds: Seeds,
    pub generation_grid: GridConfig,
    pub reconstruction_grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    pub detectors: DetectorSpec,
    pub phantom: PhantomSpec,
    pub acoustic: AcousticSpec,
    #[serde(default)]
    pub admm: AdmmConfig,
    #[serde(default)]
    pub ld: LdConfig,
    #[serde(default)]
    pub pdipm: PdIpmConfig,
}

fn default_guess() -> f64 {
    1.2
}

impl ExperimentConfig {
    /// Per-axis cutoff (rad/m) of the source smoothing window, if shared.
    pub fn smoothing_cutoff(&self) -> Option<Vec<f64>> {
        let (g, r) = (&self.generation_grid, &self.reconstruction_grid);
        match self.source_smoothing {
            SourceSmoothing::Grid => None,
            SourceSmoothing::Shared => Some(
                g.spacing
                    .iter()
                    .zip(&r.spacing)
                    .map(|(a, b)| std::f64::consts::PI / (a.max(*b) * 1e-3))
                    .collect(),
            ),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.check_fields()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(reason) => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config is always representable in TOML")
    }

    /// Field checks plus the inverse-crime guard.
    pub fn validate(&self) -> Result<()> {
        self.check_fields()?;
        self.inverse_crime_check()
    }

    fn check_fields(&self) -> Result<()> {
        let d = self.dimension;
        if !(2..=3).contains(&d) {
            return Err(Error::config(format!("dimension must be 2 or 3, got {d}")));
        }
        for (name, g) in [("generation", &self.generation_grid), ("reconstruction", &self.reconstruction_grid)] {
            if g.dims.len() != d || g.spacing.len() != d || (!g.origin.is_empty() && g.origin.len() != d) {
                return Err(Error::config(format!("{name} grid does not match dimension {d}")));
            }
        }
        let t = &self.time;
        if !(t.cfl > 0.0) || t.dt.is_some_and(|x| !(x > 0.0)) || t.t_end.is_some_and(|x| !(x > 0.0)) {
            return Err(Error::config("time axis needs positive cfl, dt and t_end"));
        }
        if self.illuminations.is_empty() || self.illuminations.iter().any(|q| q.is_empty()) {
            return Err(Error::config("every illumination needs at least one lit side"));
        }
        let sides = self.illuminations.iter().flatten().chain(&self.detectors.sides);
        if let Some(s) = sides.clone().find(|s| s.side().axis >= d) {
            return Err(Error::config(format!("side {s:?} does not exist in {d}D")));
        }
        if self.detectors.sides.is_empty() || self.detectors.per_side == 0 {
            return Err(Error::config("need at least one detector"));
        }
        if !(self.initial_guess_factor > 0.0) {
            return Err(Error::config("initial_guess_factor must be positive"));
        }
        if self.data_noise_snr_db.is_nan() || self.acoustic.corruption_snr_db.is_nan() {
            return Err(Error::config("SNR must be a number (use inf for no noise)"));
        }
        let p = &self.phantom;
        let in_range = |v: f64, r: [f64; 2]| r[0] <= v && v <= r[1];
        if !(p.mu_range[0] > 0.0 && p.kappa_range[0] > 0.0) {
            return Err(Error::config("coefficient ranges must be positive"));
        }
        let mus = p.inclusions.iter().filter(|i| i.target == Target::Mu).filter_map(|i| i.value);
        let kappas = p.inclusions.iter().filter(|i| i.target == Target::Kappa).filter_map(|i| i.value);
        let all_mu = std::iter::once(p.mu_background).chain(p.mu_values.iter().copied()).chain(mus);
        let all_kappa = std::iter::once(p.kappa_background).chain(p.kappa_values.iter().copied()).chain(kappas);
        if let Some(v) = all_mu.clone().find(|&v| !in_range(v, p.mu_range)) {
            return Err(Error::config(format!("mu value {v} outside {:?}", p.mu_range)));
        }
        if let Some(v) = all_kappa.clone().find(|&v| !in_range(v, p.kappa_range)) {
            return Err(Error::config(format!("kappa value {v} outside {:?}", p.kappa_range)));
        }
        for (target, values) in [(Target::Mu, &p.mu_values), (Target::Kappa, &p.kappa_values)] {
            let sampled = p.inclusions.iter().any(|i| i.target == target && i.value.is_none());
            if sampled && values.is_empty() {
                return Err(Error::config(format!("{target:?} inclusions without value need a value list")));
            }
        }
        for inc in &p.inclusions {
            inc.shape.validate(d)?;
        }
        let a = &self.acoustic;
        if !(a.c_background > 0.0 && a.rho_background > 0.0) {
            return Err(Error::config("acoustic background values must be positive"));
        }
        for inc in &a.inclusions {
            inc.shape.validate(d)?;
            if inc.c.is_some_and(|c| !(c > 0.0)) || inc.rho.is_some_and(|r| !(r > 0.0)) {
                return Err(Error::config("acoustic inclusion values must be positive"));
            }
        }
        self.admm.validate()?;
        self.ld.pcg.validate()?;
        self.pdipm.pcg.validate()
    }

    /// Refuses a run whose generation and reconstruction share the grid or the
    /// acoustic medium, unless explicitly allowed.
    pub fn inverse_crime_check(&self) -> Result<()> {
        if self.allow_inverse_crime {
            return Ok(());
        }
        let (g, r) = (&self.generation_grid, &self.reconstruction_grid);
        let origin = |c: &GridConfig| if c.origin.is_empty() { vec![0.0; c.dims.len()] } else { c.origin.clone() };
        if g.dims == r.dims && g.spacing == r.spacing && origin(g) == origin(r) {
            return Err(Error::config(
                "generation and reconstruction grids coincide (inverse crime); pass --allow-inverse-crime to run anyway",
            ));
        }
        if self.acoustic.corruption_snr_db == f64::INFINITY {
            return Err(Error::config(
                "generation medium is not corrupted (inverse crime); pass --allow-inverse-crime to run anyway",
            ));
        }
        Ok(())
    }
}
