use serde::{Deserialize, Serialize};

use super::CirclePoint;
use crate::error::{Error, Result};

/// A continuous potential sampled on the uniform grid `i / n`, evaluated by
/// periodic linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    samples: Vec<f64>,
    lipschitz: f64,
}

impl Potential {
    pub fn new(samples: Vec<f64>, lipschitz: f64) -> Result<Self> {
        let p = Potential { samples, lipschitz };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.samples.len();
        if n < 2 {
            return Err(Error::InvalidPotential("need at least two samples".into()));
        }
        if !(self.lipschitz >= 0.0) || self.samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidPotential("samples and lipschitz bound must be finite".into()));
        }
        let h = 1.0 / n as f64;
        for i in 0..n {
            let jump = (self.samples[(i + 1) % n] - self.samples[i]).abs();
            if jump > self.lipschitz * h * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::InvalidPotential(format!(
                    "jump {jump} between samples {i} and {} exceeds lipschitz * h = {}",
                    (i + 1) % n,
                    self.lipschitz * h
                )));
            }
        }
        Ok(())
    }

    /// Samples `phi` at `n` grid points. `lipschitz` must bound its Lipschitz
    /// constant.
    pub fn from_fn(n: usize, lipschitz: f64, phi: impl Fn(f64) -> f64) -> Result<Self> {
        Potential::new((0..n).map(|i| phi(i as f64 / n as f64)).collect(), lipschitz)
    }

    pub fn constant(c: f64, n: usize) -> Self {
        Potential { samples: vec![c; n], lipschitz: 0.0 }
    }

    /// `cos(2πx)` scaled by `amplitude`.
    pub fn cosine(n: usize, amplitude: f64) -> Self {
        let lip = std::f64::consts::TAU * amplitude.abs();
        Potential::from_fn(n, lip, |x| amplitude * (std::f64::consts::TAU * x).cos())
            .expect("cosine samples satisfy their Lipschitz bound")
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn resolution(&self) -> usize {
        self.samples.len()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.samples.len() as f64
    }

    pub fn eval(&self, x: CirclePoint) -> f64 {
        let n = self.samples.len();
        let pos = x.value() * n as f64;
        let i = (pos.floor() as usize).min(n - 1);
        let w = pos - i as f64;
        let a = self.samples[i];
        if w == 0.0 {
            return a;
        }
        a + w * (self.samples[(i + 1) % n] - a)
    }

    /// Exact maximum of the interpolant over the lift interval `[a, b]`.
    pub fn max_on(&self, a: f64, b: f64) -> f64 {
        if b - a >= 1.0 {
            return self.max();
        }
        let n = self.samples.len() as f64;
        let mut m = self.eval(CirclePoint::new(a)).max(self.eval(CirclePoint::new(b)));
        let first = (a * n).floor() as i64 + 1;
        let last = (b * n).ceil() as i64 - 1;
        for i in first..=last {
            m = m.max(self.samples[i.rem_euclid(self.samples.len() as i64) as usize]);
        }
        m
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `phi - beta`.
    pub fn shifted(&self, beta: f64) -> Potential {
        Potential {
            samples: self.samples.iter().map(|s| s - beta).collect(),
            lipschitz: self.lipschitz,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_hits_samples_and_wraps() {
        let p = Potential::new(vec![0.0, 1.0, 0.0, -1.0], 4.0).unwrap();
        assert_eq!(p.eval(CirclePoint::new(0.25)), 1.0);
        assert!((p.eval(CirclePoint::new(0.875)) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_bound_is_checked() {
        assert!(Potential::new(vec![0.0, 1.0], 1.0).is_err());
        assert!(Potential::new(vec![0.0, 0.5], 1.0).is_ok());
    }

    #[test]
    fn interval_max_is_exact() {
        let p = Potential::cosine(1024, 1.0);
        assert_eq!(p.max_on(-0.01, 0.01), 1.0);
        let inner = p.max_on(0.2, 0.3);
        assert!((inner - (std::f64::consts::TAU * 0.2).cos()).abs() < 1e-3);
        // interpolant between grid points never exceeds the sampled max
        assert!(p.max_on(0.1, 0.9) <= 1.0);
    }
}
