//! TOML run configuration.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::dynamics::{Coupling, EvolveOptions, SystemState};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, GridSpec};
use crate::harness::io::read_snapshot;
use crate::noise::{NoiseModel, NoiseSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub sigma: f64,
    pub lambda: [[f64; 2]; 2],
    #[serde(default)]
    pub allow_asymmetric: bool,
}

impl CouplingSpec {
    pub fn build(&self, dim: usize) -> Result<Coupling> {
        if self.allow_asymmetric {
            Coupling::with_asymmetry(self.sigma, self.lambda, dim)
        } else {
            Coupling::new(self.sigma, self.lambda, dim)
        }
    }
}

/// Initial profile of one component. Coordinates are measured from `center`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialSpec {
    /// `amplitude · exp(-|x|²/width²) · exp(i chirp |x|²)`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        chirp: f64,
    },
    /// `amplitude · sech(|x|/width)`.
    Sech {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// A binary snapshot; relative paths resolve against the config file.
    File { path: PathBuf },
    #[default]
    Zero,
}

fn offset(center: &[f64], dim: usize, x: [f64; 2]) -> Result<f64> {
    if !(center.is_empty() || center.len() == dim) {
        return Err(Error::Config(format!(
            "center has {} coordinates, grid has dimension {dim}",
            center.len()
        )));
    }
    let c = |a: usize| center.get(a).copied().unwrap_or(0.0);
    Ok((0..dim).map(|a| (x[a] - c(a)).powi(2)).sum())
}

impl InitialSpec {
    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "initial {name} must be positive, got {v}"
                )))
            }
        };
        match self {
            InitialSpec::Gaussian {
                amplitude,
                width,
                center,
                chirp,
            } => {
                positive("width", *width)?;
                if !amplitude.is_finite()
                    || !chirp.is_finite()
                    || center.iter().any(|c| !c.is_finite())
                {
                    return Err(Error::Config("gaussian parameters must be finite".into()));
                }
            }
            InitialSpec::Sech {
                amplitude,
                width,
                center,
            } => {
                positive("width", *width)?;
                if !amplitude.is_finite() || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("sech parameters must be finite".into()));
                }
            }
            InitialSpec::File { .. } | InitialSpec::Zero => {}
        }
        Ok(())
    }

    /// Samples the profile; `component` picks the field out of a two-field snapshot.
    pub fn sample(&self, grid: &Grid, component: usize, base_dir: &Path) -> Result<ComplexField> {
        let dim = grid.dim();
        match self {
            InitialSpec::Gaussian {
                amplitude,
                width,
                center,
                chirp,
            } => {
                offset(center, dim, [0.0; 2])?;
                Ok(grid.sample(|x| {
                    let r2 = offset(center, dim, x).unwrap_or(0.0);
                    Complex64::from_polar(amplitude * (-r2 / (width * width)).exp(), chirp * r2)
                }))
            }
            InitialSpec::Sech {
                amplitude,
                width,
                center,
            } => {
                offset(center, dim, [0.0; 2])?;
                Ok(grid.sample(|x| {
                    let r = offset(center, dim, x).unwrap_or(0.0).sqrt();
                    Complex64::new(amplitude / (r / width).cosh(), 0.0)
                }))
            }
            InitialSpec::File { path } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let fields = read_snapshot(&full, grid)?;
                let pick = component.min(fields.len() - 1);
                Ok(fields[pick].clone())
            }
            InitialSpec::Zero => Ok(vec![Complex64::default(); grid.len()]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default)]
    pub u: InitialSpec,
    #[serde(default)]
    pub v: InitialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Keep per-step identity integrands and write residual columns.
    #[serde(default)]
    pub track_identities: bool,
    /// Write the initial and final fields as binary snapshots.
    #[serde(default)]
    pub snapshots: bool,
    /// Write one trajectory CSV per ensemble path.
    #[serde(default)]
    pub path_trajectories: bool,
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            seed: 0,
            output_dir: default_output(),
            track_identities: false,
            snapshots: false,
            path_trajectories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionSpec {
    pub t_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateSpec {
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    5000
}

impl Default for GroundStateSpec {
    fn default() -> Self {
        GroundStateSpec {
            beta: 0.0,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    /// Target values of `√λ11‖u0‖² + √λ22‖v0‖²`.
    #[serde(default)]
    pub masses: Vec<f64>,
    #[serde(default = "default_paths")]
    pub paths: usize,
}

fn default_paths() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<CriterionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groundstate: Option<GroundStateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdSpec>,
    /// Directory that relative snapshot paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Everything needed to integrate one configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub coupling: Coupling,
    pub noise: NoiseModel,
    pub initial: SystemState,
    pub options: EvolveOptions,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Checks every section without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        Grid::from_spec(&self.grid)?;
        self.coupling.build(self.grid.dim)?;
        self.initial.u.validate()?;
        self.initial.v.validate()?;
        self.noise.validate()?;
        if !(self.time.t_final > 0.0 && self.time.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "t_final must be positive, got {}",
                self.time.t_final
            )));
        }
        self.evolve_options().validate()?;
        if let Some(c) = &self.criterion {
            if !(c.t_bar > 0.0 && c.t_bar.is_finite()) {
                return Err(Error::Config(format!(
                    "t_bar must be positive, got {}",
                    c.t_bar
                )));
            }
        }
        if let Some(g) = &self.groundstate {
            if !(g.beta >= 0.0 && g.tol > 0.0 && g.max_iter > 0) {
                return Err(Error::Config(
                    "groundstate needs beta >= 0, tol > 0, max_iter > 0".into(),
                ));
            }
        }
        if let Some(t) = &self.threshold {
            if t.masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
                return Err(Error::Config("threshold masses must be positive".into()));
            }
            if t.paths == 0 {
                return Err(Error::Config("threshold paths must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            t_final: self.time.t_final,
            dt: self.time.dt,
            record_every: self.time.record_every,
            track_identities: self.run.track_identities,
            detector: self.detector,
        }
    }

    pub fn build(&self) -> Result<Problem> {
        self.validate()?;
        let grid = Grid::from_spec(&self.grid)?;
        let coupling = self.coupling.build(grid.dim())?;
        let noise = NoiseModel::build(&self.noise, &grid)?;
        let u = self.initial.u.sample(&grid, 0, &self.base_dir)?;
        let v = self.initial.v.sample(&grid, 1, &self.base_dir)?;
        let initial = SystemState::new(u, v);
        initial.check(&grid)?;
        Ok(Problem {
            grid,
            coupling,
            noise,
            initial,
            options: self.evolve_options(),
        })
    }

    /// Horizon used for criterion values: `[criterion] t_bar`, else `t_final`.
    pub fn criterion_horizon(&self) -> f64 {
        self.criterion
            .as_ref()
            .map_or(self.time.t_final, |c| c.t_bar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLITON: &str = r#"
[grid]
dim = 1
n = 256
length = 40.0

[coupling]
sigma = 1.0
lambda = [[1.0, 0.0], [0.0, 0.0]]

[initial.u]
family = "sech"
amplitude = 1.4142135623730951
width = 1.0

[time]
t_final = 0.1
dt = 0.001
record_every = 10
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = RunConfig::from_toml_str(SOLITON).unwrap();
        assert_eq!(cfg.grid.n, 256);
        assert_eq!(cfg.noise.modes, 0);
        assert_eq!(cfg.initial.v, InitialSpec::Zero);
        assert_eq!(cfg.detector, DetectorConfig::default());
        let p = cfg.build().unwrap();
        assert!((p.initial.u[128].re - 2f64.sqrt()).abs() < 1e-15);
        // Round trip through TOML.
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let typo = SOLITON.replace("record_every", "record_evrey");
        assert!(matches!(
            RunConfig::from_toml_str(&typo),
            Err(Error::Config(_))
        ));
        let typo = SOLITON.replace("width = 1.0", "width = 1.0\nwidht = 2.0");
        assert!(RunConfig::from_toml_str(&typo).is_err());
        let extra = format!("{SOLITON}\n[bogus]\nx = 1\n");
        assert!(RunConfig::from_toml_str(&extra).is_err());
    }

    #[test]
    fn rejects_invalid_values() {
        for (from, to) in [
            ("sigma = 1.0", "sigma = -1.0"),
            ("dt = 0.001", "dt = 0.0"),
            ("t_final = 0.1", "t_final = 0.0"),
            ("n = 256", "n = 100"),
            ("record_every = 10", "record_every = 0"),
            ("[[1.0, 0.0], [0.0, 0.0]]", "[[1.0, 0.5], [0.0, 0.0]]"),
        ] {
            let bad = SOLITON.replace(from, to);
            let err = RunConfig::from_toml_str(&bad).unwrap_err();
            assert!(err.is_config_error(), "{from} -> {to}: {err}");
        }
        let ok = SOLITON.replace(
            "[[1.0, 0.0], [0.0, 0.0]]",
            "[[1.0, 0.5], [0.0, 0.0]]\nallow_asymmetric = true",
        );
        assert!(RunConfig::from_toml_str(&ok).is_ok());
    }

    #[test]
    fn gaussian_with_center_and_chirp() {
        let text = SOLITON.replace(
            "family = \"sech\"\namplitude = 1.4142135623730951\nwidth = 1.0",
            "family = \"gaussian\"\namplitude = 2.0\nwidth = 0.5\ncenter = [1.0]\nchirp = 0.3",
        );
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        let p = cfg.build().unwrap();
        let g = &p.grid;
        for (z, x) in p.initial.u.iter().zip(g.axis_coords()) {
            let r2 = (x - 1.0).powi(2);
            let e = Complex64::from_polar(2.0 * (-r2 / 0.25).exp(), 0.3 * r2);
            assert!((z - e).norm() < 1e-15);
        }
        let bad = text.replace("center = [1.0]", "center = [1.0, 2.0]");
        assert!(RunConfig::from_toml_str(&bad).unwrap().build().is_err());
    }
}
