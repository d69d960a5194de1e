//! 1-D semi-linear heat equation `w_t = w_xx + f(w)` on `[0, L]` with
//! Dirichlet ends `w(t, 0) = c` and `w(t, L) = u(t)`, discretized by the
//! method of lines and integrated with explicit Euler sub-steps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeatSource {
    None,
    /// `f(w) = w³`
    Cubic,
}

impl HeatSource {
    #[inline]
    fn eval(self, w: f64) -> f64 {
        match self {
            HeatSource::None => 0.0,
            HeatSource::Cubic => w * w * w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatRod {
    pub length: f64,
    /// Fixed temperature at `x = 0`.
    pub c: f64,
    /// Measurement abscissa.
    pub xc: f64,
    pub source: HeatSource,
    field: Vec<f64>,
    scratch: Vec<f64>,
}

impl HeatRod {
    /// Rod with `nx` grid points (including both ends) and initial profile
    /// `sin(πx/L) + (u₀ − c) x/L + c`.
    pub fn new(length: f64, nx: usize, c: f64, xc: f64, source: HeatSource, u0: f64) -> Result<Self> {
        if nx < 5 {
            return Err(Error::config("heat grid needs at least 3 interior points"));
        }
        if !(length > 0.0) {
            return Err(Error::config("rod length must be > 0"));
        }
        if !(0.0..=length).contains(&xc) {
            return Err(Error::config(format!("measurement point {xc} outside [0, {length}]")));
        }
        let dx = length / (nx - 1) as f64;
        let mut field: Vec<f64> = (0..nx)
            .map(|i| {
                let x = i as f64 * dx;
                (PI * x / length).sin() + (u0 - c) * x / length + c
            })
            .collect();
        field[0] = c;
        field[nx - 1] = u0;
        Ok(Self { length, c, xc, source, scratch: field.clone(), field })
    }

    pub fn nx(&self) -> usize {
        self.field.len()
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.nx() - 1) as f64
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn abscissae(&self) -> impl Iterator<Item = f64> + '_ {
        let dx = self.dx();
        (0..self.nx()).map(move |i| i as f64 * dx)
    }

    /// Number of explicit sub-steps per sampling period, chosen so that the
    /// inner step never exceeds `0.5·dx²`.
    pub fn substeps(&self, te: f64) -> usize {
        let limit = 0.5 * self.dx() * self.dx();
        let mut n = (te / limit).ceil() as usize;
        while te / n as f64 > limit {
            n += 1;
        }
        n.max(1)
    }

    /// Linear interpolation of the field at `x`.
    pub fn sample(&self, x: f64) -> f64 {
        let dx = self.dx();
        let pos = (x / dx).clamp(0.0, (self.nx() - 1) as f64);
        let i = (pos.floor() as usize).min(self.nx() - 2);
        let frac = pos - i as f64;
        self.field[i] * (1.0 - frac) + self.field[i + 1] * frac
    }

    pub fn output(&self) -> f64 {
        self.sample(self.xc)
    }

    pub fn advance(&mut self, u: f64, te: f64) {
        let n_sub = self.substeps(te);
        let dt = te / n_sub as f64;
        let dx = self.dx();
        let r = dt / (dx * dx);
        let nx = self.nx();
        for _ in 0..n_sub {
            self.field[0] = self.c;
            self.field[nx - 1] = u;
            self.scratch[0] = self.c;
            self.scratch[nx - 1] = u;
            for i in 1..nx - 1 {
                let w = self.field[i];
                let lap = self.field[i - 1] - 2.0 * w + self.field[i + 1];
                self.scratch[i] = w + r * lap + dt * self.source.eval(w);
            }
            std::mem::swap(&mut self.field, &mut self.scratch);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.field.iter().all(|w| w.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_profile_matches_boundaries() {
        let rod = HeatRod::new(1.0, 101, 0.5, 1.0 / 3.0, HeatSource::None, 0.0).unwrap();
        assert_eq!(rod.field()[0], 0.5);
        assert_eq!(rod.field()[100], 0.0);
        let x = 0.25;
        let expected = (PI * x).sin() + (0.0 - 0.5) * x + 0.5;
        assert!((rod.sample(x) - expected).abs() < 1e-12);
    }

    #[test]
    fn substeps_respect_stability_limit() {
        for nx in [11, 51, 101, 201] {
            let rod = HeatRod::new(1.0, nx, 0.0, 0.5, HeatSource::None, 0.0).unwrap();
            for te in [0.001, 0.01, 0.05] {
                let n = rod.substeps(te);
                assert!(te / n as f64 <= 0.5 * rod.dx() * rod.dx());
            }
        }
    }

    #[test]
    fn linear_steady_state() {
        let mut rod = HeatRod::new(1.0, 101, 0.0, 1.0 / 3.0, HeatSource::None, 0.0).unwrap();
        for _ in 0..300 {
            rod.advance(1.0, 0.01);
        }
        assert!((rod.output() - 1.0 / 3.0).abs() < 0.01 / 3.0);
        for (x, w) in rod.abscissae().zip(rod.field()) {
            assert!((w - x).abs() < 1e-3);
        }
    }

    #[test]
    fn decays_to_zero_with_homogeneous_ends() {
        // sin(πx) decays like exp(−π² t)
        let mut rod = HeatRod::new(1.0, 101, 0.0, 0.5, HeatSource::None, 0.0).unwrap();
        for _ in 0..10 {
            rod.advance(0.0, 0.01);
        }
        let expected = (-PI * PI * 0.1).exp();
        assert!((rod.output() - expected).abs() < 1e-3, "{}", rod.output());
    }

    #[test]
    fn rejects_small_grids() {
        assert!(HeatRod::new(1.0, 4, 0.0, 0.5, HeatSource::None, 0.0).is_err());
        assert!(HeatRod::new(1.0, 11, 0.0, 1.5, HeatSource::None, 0.0).is_err());
    }
}
