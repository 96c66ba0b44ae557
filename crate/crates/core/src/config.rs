//! Run configuration and the on-disk descriptions of maps and potentials.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circle::{pl_approximate, MapSamples, PlMap, Potential};
use crate::error::{Error, Result};
use crate::measure::RandomOrbits;
use crate::perturb::PipelineOptions;

/// A circle endomorphism as stored in a map file. A bare
/// `{"breakpoints", "liftValues", "degree"}` object is a PL map; the other
/// shapes are conveniences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    #[serde(rename_all = "camelCase")]
    Pl {
        breakpoints: Vec<f64>,
        lift_values: Vec<f64>,
        degree: i64,
    },
    #[serde(rename_all = "camelCase")]
    Slopes {
        breakpoints: Vec<f64>,
        v0: f64,
        slopes: Vec<f64>,
        degree: i64,
    },
    /// Sampled lift, made piecewise linear by `pl_approximate` at `epsilon`.
    Sampled {
        samples: MapSamples,
        epsilon: f64,
    },
    Named(NamedMap),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum NamedMap {
    Doubling,
    Rotation { angle: f64 },
}

impl MapSpec {
    pub fn build(&self) -> Result<PlMap> {
        match self {
            MapSpec::Named(NamedMap::Doubling) => Ok(PlMap::doubling()),
            MapSpec::Named(NamedMap::Rotation { angle }) => Ok(PlMap::rotation(*angle)),
            MapSpec::Slopes { breakpoints, v0, slopes, degree } => {
                PlMap::from_slopes(breakpoints.clone(), *v0, slopes, *degree)
            }
            MapSpec::Pl { breakpoints, lift_values, degree } => {
                PlMap::new(breakpoints.clone(), lift_values.clone(), *degree)
            }
            MapSpec::Sampled { samples, epsilon } => pl_approximate(samples, *epsilon),
        }
    }

    pub fn from_map(f: &PlMap) -> Self {
        MapSpec::Pl { breakpoints: f.breakpoints().to_vec(), lift_values: f.lift_values().to_vec(), degree: f.degree() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// A potential as stored in a potential file. A bare
/// `{"samples", "lipschitz"}` object is a sampled potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Samples { samples: Vec<f64>, lipschitz: f64 },
    Named(NamedPotential),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum NamedPotential {
    /// `amplitude · cos(2π(x − phase)) + offset`.
    Cosine {
        resolution: usize,
        amplitude: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    Constant { value: f64, resolution: usize },
}

impl PotentialSpec {
    pub fn cosine(resolution: usize, amplitude: f64, phase: f64) -> Self {
        PotentialSpec::Named(NamedPotential::Cosine { resolution, amplitude, phase, offset: 0.0 })
    }

    pub fn build(&self) -> Result<Potential> {
        match self {
            PotentialSpec::Named(NamedPotential::Cosine { resolution, amplitude, phase, offset }) => {
                let (a, ph, c) = (*amplitude, *phase, *offset);
                Potential::from_fn(*resolution, std::f64::consts::TAU * a.abs(), |x| {
                    a * (std::f64::consts::TAU * (x - ph)).cos() + c
                })
            }
            PotentialSpec::Named(NamedPotential::Constant { value, resolution }) => {
                Ok(Potential::constant(*value, *resolution))
            }
            PotentialSpec::Samples { samples, lipschitz } => Potential::new(samples.clone(), *lipschitz),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Everything a run needs besides the instance itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub map: PathBuf,
    pub potential: PathBuf,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::grid")]
    pub grid: usize,
    #[serde(default = "defaults::bins")]
    pub bins: usize,
    #[serde(default = "defaults::horizon_factor")]
    pub horizon_factor: usize,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn epsilon() -> f64 {
        0.1
    }
    pub fn grid() -> usize {
        1 << 14
    }
    pub fn bins() -> usize {
        1 << 12
    }
    pub fn horizon_factor() -> usize {
        4
    }
    pub fn tol() -> f64 {
        1e-3
    }
    pub fn eta() -> f64 {
        1e-6
    }
    pub fn seed() -> u64 {
        7
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl RunConfig {
    pub fn new(map: impl Into<PathBuf>, potential: impl Into<PathBuf>) -> Self {
        RunConfig {
            map: map.into(),
            potential: potential.into(),
            epsilon: defaults::epsilon(),
            grid: defaults::grid(),
            bins: defaults::bins(),
            horizon_factor: defaults::horizon_factor(),
            tol: defaults::tol(),
            eta: defaults::eta(),
            seed: defaults::seed(),
            out_dir: defaults::out_dir(),
        }
    }

    /// Reads a config file. Relative instance paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.map, &mut cfg.potential] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1/2), got {}", self.epsilon)));
        }
        for (name, v) in [("grid", self.grid), ("bins", self.bins)] {
            if v < 16 || !v.is_power_of_two() {
                return Err(Error::Config(format!("{name} must be a power of two >= 16, got {v}")));
            }
        }
        if self.horizon_factor == 0 {
            return Err(Error::Config("horizonFactor must be positive".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }

    /// Validates, then loads and builds the map and the potential.
    pub fn instance(&self) -> Result<(PlMap, Potential)> {
        self.validate()?;
        let f = MapSpec::load(&self.map)?.build()?;
        let phi = PotentialSpec::load(&self.potential)?.build()?;
        Ok((f, phi))
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            epsilon: self.epsilon,
            grid: self.grid,
            bins: self.bins,
            horizon_factor: self.horizon_factor,
            tol: self.tol,
            eta: self.eta,
            random: RandomOrbits { seed: self.seed, ..RandomOrbits::default() },
            ..PipelineOptions::default()
        }
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path.display().to_string(), e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        RunConfig::new("map.json", "phi.json")
    }

    #[test]
    fn defaults_validate() {
        cfg().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_values() {
        for eps in [0.0, 0.5, 0.6, -0.1, f64::NAN] {
            let c = RunConfig { epsilon: eps, ..cfg() };
            assert!(matches!(c.validate(), Err(Error::Config(_))), "eps {eps}");
        }
        for n in [8, 100, 0] {
            assert!(RunConfig { grid: n, ..cfg() }.validate().is_err());
            assert!(RunConfig { bins: n, ..cfg() }.validate().is_err());
        }
    }

    #[test]
    fn parses_camel_case_with_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"map": "m.json", "potential": "p.json", "horizonFactor": 6}"#).unwrap();
        assert_eq!(c.horizon_factor, 6);
        assert_eq!(c.grid, 1 << 14);
        assert!(serde_json::from_str::<RunConfig>(r#"{"map": "m", "potential": "p", "bogus": 1}"#).is_err());
    }

    #[test]
    fn map_specs_build() {
        let m: MapSpec = serde_json::from_str(r#"{"kind": "rotation", "angle": 0.5}"#).unwrap();
        assert_eq!(m.build().unwrap(), PlMap::rotation(0.5));
        let m: MapSpec = serde_json::from_str(r#"{"kind": "doubling"}"#).unwrap();
        assert_eq!(m.build().unwrap(), PlMap::doubling());
        let m: MapSpec = serde_json::from_str(r#"{"breakpoints": [0, 1], "liftValues": [0, 2], "degree": 2}"#).unwrap();
        assert_eq!(m.build().unwrap(), PlMap::doubling());
        assert_eq!(serde_json::to_string(&MapSpec::from_map(&PlMap::doubling())).unwrap(), r#"{"breakpoints":[0.0,1.0],"liftValues":[0.0,2.0],"degree":2}"#);
        let m = MapSpec::Slopes { breakpoints: vec![0.0, 0.25, 1.0], v0: 0.0, slopes: vec![4.0, 4.0 / 3.0], degree: 2 };
        assert_eq!(m.build().unwrap().degree(), 2);
    }

    #[test]
    fn cosine_spec_matches_builtin() {
        let p = PotentialSpec::cosine(256, 1.0, 0.0);
        assert_eq!(p.build().unwrap(), Potential::cosine(256, 1.0));
        let p: PotentialSpec = serde_json::from_str(r#"{"samples": [0.5, 0.25], "lipschitz": 1}"#).unwrap();
        assert_eq!(p.build().unwrap().samples(), &[0.5, 0.25]);
    }
}
