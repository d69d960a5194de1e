//! Benchmark plants stepped at a fixed sampling period under a zero-order
//! hold input.

mod delay;
mod heat;
mod lti;

pub use delay::{delay_walk, DelayParams, DelayPlant};
pub use heat::{HeatRod, HeatSource};
pub use lti::{poly_eval, poly_from_roots, poly_mul, CanonicalRealization, TransferFunction};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RK4 sub-steps per sampling period for the ODE plants.
pub const RK4_SUBSTEPS: usize = 4;

/// One classic Runge–Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step(x: &mut [f64], t: f64, dt: f64, mut f: impl FnMut(f64, &[f64], &mut [f64])) {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(t, x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    f(t + dt, &tmp, &mut k4);
    for i in 0..n {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Tustin friction: Coulomb level plus a Stribeck bump at low speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TustinFriction {
    pub fc: f64,
    pub fs: f64,
    pub vs: f64,
}

impl Default for TustinFriction {
    fn default() -> Self {
        Self { fc: 0.25, fs: 0.5, vs: 0.1 }
    }
}

impl TustinFriction {
    pub fn validate(&self) -> Result<()> {
        if !(self.fc > 0.0 && self.fs >= self.fc && self.vs > 0.0) {
            return Err(Error::config(format!("invalid Tustin friction {self:?}")));
        }
        Ok(())
    }
}

/// `−sign(v)·(fc + (fs − fc)·exp(−|v|/vs))`, zero at rest.
pub fn tustin_force(v: f64, f: &TustinFriction) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    -v.signum() * (f.fc + (f.fs - f.fc) * (-v.abs() / f.vs).exp())
}

/// Actuator power loss: the applied control is scaled by `gain_factor` from
/// `t_fault` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub t_fault: f64,
    pub gain_factor: f64,
}

impl FaultSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain_factor > 0.0 && self.gain_factor <= 1.0) {
            return Err(Error::config(format!(
                "fault gain factor must lie in (0, 1], got {}",
                self.gain_factor
            )));
        }
        Ok(())
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_fault
    }
}

pub fn apply_fault(u: f64, t: f64, f: &FaultSpec) -> f64 {
    if f.is_active(t) {
        u * f.gain_factor
    } else {
        u
    }
}

/// Nominal input `u* = m ÿ* + k̂₁ y*` that makes `y*` an exact solution of
/// the flat nominal model `m ÿ = −k̂₁ y + u`.
pub fn flat_feedforward(ystar: f64, ddystar: f64, m: f64, k1_hat: f64) -> f64 {
    m * ddystar + k1_hat * ystar
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatFeedforward {
    pub m: f64,
    pub k1_hat: f64,
}

/// `ÿ + c ẏ + k y = u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub c: f64,
    pub stiffness: f64,
    pub y: f64,
    pub v: f64,
}

impl Oscillator {
    pub fn new(c: f64, stiffness: f64) -> Self {
        Self { c, stiffness, y: 0.0, v: 0.0 }
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.v * self.v + 0.5 * self.stiffness * self.y * self.y
    }
}

/// Duffing spring with linear and Tustin friction:
/// `m ÿ = −(k₁ y + k₃ y³) + 𝓕(ẏ) − d ẏ + u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingSpring {
    pub m: f64,
    pub k1: f64,
    pub k3: f64,
    pub d: f64,
    pub friction: TustinFriction,
    pub y: f64,
    pub v: f64,
}

/// Unstable `ẏ = y + u³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicPlant {
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtiPlant {
    pub tf: TransferFunction,
    pub realization: CanonicalRealization,
    pub x: Vec<f64>,
}

impl LtiPlant {
    pub fn new(tf: TransferFunction) -> Self {
        let realization = CanonicalRealization::from_tf(&tf);
        let x = vec![0.0; realization.order()];
        Self { tf, realization, x }
    }
}

/// The benchmark plants.
#[derive(Debug, Clone)]
pub enum PlantModel {
    Oscillator(Oscillator),
    Duffing(DuffingSpring),
    Lti(LtiPlant),
    NonlinearCubic(CubicPlant),
    Delay(DelayPlant),
    Heat(HeatRod),
}

impl PlantModel {
    pub fn name(&self) -> &'static str {
        match self {
            PlantModel::Oscillator(_) => "oscillator",
            PlantModel::Duffing(_) => "duffing",
            PlantModel::Lti(_) => "lti",
            PlantModel::NonlinearCubic(_) => "nonlinear_cubic",
            PlantModel::Delay(_) => "delay",
            PlantModel::Heat(_) => "heat_1d",
        }
    }

    pub fn output(&self) -> f64 {
        match self {
            PlantModel::Oscillator(p) => p.y,
            PlantModel::Duffing(p) => p.y,
            PlantModel::Lti(p) => p.realization.output(&p.x),
            PlantModel::NonlinearCubic(p) => p.y,
            PlantModel::Delay(p) => p.output(),
            PlantModel::Heat(p) => p.output(),
        }
    }

    /// Auxiliary per-step quantity worth logging (the delay `τ`).
    pub fn aux(&self) -> Option<f64> {
        match self {
            PlantModel::Delay(p) => Some(p.tau()),
            _ => None,
        }
    }

    /// Full state vector (the temperature field for the heat rod).
    pub fn state(&self) -> Vec<f64> {
        match self {
            PlantModel::Oscillator(p) => vec![p.y, p.v],
            PlantModel::Duffing(p) => vec![p.y, p.v],
            PlantModel::Lti(p) => p.x.clone(),
            PlantModel::NonlinearCubic(p) => vec![p.y],
            PlantModel::Delay(p) => vec![p.output()],
            PlantModel::Heat(p) => p.field().to_vec(),
        }
    }

    fn advance(&mut self, u: f64, te: f64) {
        let dt = te / RK4_SUBSTEPS as f64;
        match self {
            PlantModel::Oscillator(p) => {
                let (c, k) = (p.c, p.stiffness);
                let mut x = [p.y, p.v];
                for i in 0..RK4_SUBSTEPS {
                    rk4_step(&mut x, i as f64 * dt, dt, |_, s, dx| {
                        dx[0] = s[1];
                        dx[1] = u - c * s[1] - k * s[0];
                    });
                }
                p.y = x[0];
                p.v = x[1];
            }
            PlantModel::Duffing(p) => {
                let q = *p;
                let mut x = [p.y, p.v];
                for i in 0..RK4_SUBSTEPS {
                    rk4_step(&mut x, i as f64 * dt, dt, |_, s, dx| {
                        let spring = q.k1 * s[0] + q.k3 * s[0] * s[0] * s[0];
                        dx[0] = s[1];
                        dx[1] = (-spring + tustin_force(s[1], &q.friction) - q.d * s[1] + u) / q.m;
                    });
                }
                p.y = x[0];
                p.v = x[1];
            }
            PlantModel::Lti(p) => {
                let ss = &p.realization;
                for i in 0..RK4_SUBSTEPS {
                    rk4_step(&mut p.x, i as f64 * dt, dt, |_, s, dx| ss.derivative(s, u, dx));
                }
            }
            PlantModel::NonlinearCubic(p) => {
                let mut x = [p.y];
                let u3 = u * u * u;
                for i in 0..RK4_SUBSTEPS {
                    rk4_step(&mut x, i as f64 * dt, dt, |_, s, dx| dx[0] = s[0] + u3);
                }
                p.y = x[0];
            }
            PlantModel::Delay(p) => p.advance(u, te, RK4_SUBSTEPS),
            PlantModel::Heat(p) => p.advance(u, te),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            PlantModel::Heat(p) => p.is_finite(),
            _ => self.state().iter().all(|v| v.is_finite()) && self.output().is_finite(),
        }
    }
}

/// A plant model together with its step counter.
#[derive(Debug, Clone)]
pub struct Plant {
    model: PlantModel,
    steps: usize,
}

impl Plant {
    pub fn new(model: PlantModel) -> Self {
        Self { model, steps: 0 }
    }

    pub fn model(&self) -> &PlantModel {
        &self.model
    }

    pub fn output(&self) -> f64 {
        self.model.output()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Advances by one sampling period with `u` held constant and returns the
    /// new output.
    pub fn step(&mut self, u: f64, te: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::NonFinite { step: self.steps, quantity: "plant input" });
        }
        self.model.advance(u, te);
        self.steps += 1;
        if !self.model.is_finite() {
            return Err(Error::Divergence {
                step: self.steps,
                what: format!("{} state became non-finite", self.model.name()),
            });
        }
        Ok(self.model.output())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TE: f64 = 0.01;

    fn run(model: PlantModel, u: f64, seconds: f64) -> Plant {
        let mut p = Plant::new(model);
        for _ in 0..(seconds / TE).round() as usize {
            p.step(u, TE).unwrap();
        }
        p
    }

    #[test]
    fn oscillator_rest_is_equilibrium() {
        let p = run(PlantModel::Oscillator(Oscillator::new(3.0, 4.0)), 0.0, 5.0);
        assert_eq!(p.output(), 0.0);
    }

    #[test]
    fn oscillator_energy_non_increasing() {
        let mut p = Plant::new(PlantModel::Oscillator(Oscillator { c: 0.5, stiffness: 4.0, y: 1.0, v: -0.3 }));
        let energy = |p: &Plant| match p.model() {
            PlantModel::Oscillator(o) => o.energy(),
            _ => unreachable!(),
        };
        let mut last = energy(&p);
        for _ in 0..2000 {
            p.step(0.0, TE).unwrap();
            let e = energy(&p);
            assert!(e <= last + 1e-15);
            last = e;
        }
    }

    /// Unit-step response of `ÿ + 3ẏ + 4y = u` from rest.
    fn oscillator_step(t: f64) -> f64 {
        let w = 1.75f64.sqrt();
        0.25 - 0.25 * (-1.5 * t).exp() * ((w * t).cos() + 1.5 / w * (w * t).sin())
    }

    #[test]
    fn rk4_oscillator_matches_closed_form() {
        let mut p = Plant::new(PlantModel::Oscillator(Oscillator::new(3.0, 4.0)));
        let mut worst: f64 = 0.0;
        for k in 1..=1000 {
            let y = p.step(1.0, TE).unwrap();
            worst = worst.max((y - oscillator_step(k as f64 * TE)).abs());
        }
        assert!(worst <= 1e-6, "max deviation {worst:e}");
    }

    #[test]
    fn rk4_error_is_fourth_order() {
        let err = |te: f64| {
            let mut p = Plant::new(PlantModel::Oscillator(Oscillator::new(3.0, 4.0)));
            let n = (2.0 / te).round() as usize;
            let mut y = 0.0;
            for _ in 0..n {
                y = p.step(1.0, te).unwrap();
            }
            (y - oscillator_step(2.0)).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn lti_step_matches_partial_fractions() {
        // (s+2)²/(s+1)³ · 1/s = 4/s − 4/(s+1) − 3/(s+1)² − 1/(s+1)³
        let tf = TransferFunction::from_roots(1.0, &[-2.0, -2.0], &[-1.0, -1.0, -1.0]).unwrap();
        let mut p = Plant::new(PlantModel::Lti(LtiPlant::new(tf)));
        let mut worst: f64 = 0.0;
        for k in 1..=1000 {
            let t = k as f64 * TE;
            let exact = 4.0 - (4.0 + 3.0 * t + 0.5 * t * t) * (-t).exp();
            worst = worst.max((p.step(1.0, TE).unwrap() - exact).abs());
        }
        assert!(worst <= 1e-6, "max deviation {worst:e}");
    }

    #[test]
    fn lti_dc_gains() {
        let cases = [
            (TransferFunction::from_roots(1.0, &[-2.0, -2.0], &[-1.0, -1.0, -1.0]).unwrap(), 30.0),
            (TransferFunction::from_roots(1.0, &[-2.0, -2.0], &[-2.2, -2.2, -2.2]).unwrap(), 20.0),
            (TransferFunction::from_roots(1.0, &[1.0], &[-1.0, -2.0]).unwrap(), 20.0),
        ];
        for (tf, horizon) in cases {
            let dc = tf.dc_gain();
            let p = run(PlantModel::Lti(LtiPlant::new(tf)), 1.0, horizon);
            assert!((p.output() - dc).abs() < 1e-3, "{} vs {dc}", p.output());
        }
        assert!((4.0 / 2.2f64.powi(3) - 0.37565).abs() < 1e-5);
    }

    #[test]
    fn cubic_plant_equilibrium_input() {
        // ẏ = y + u³ = 0 at y = 0.125 with u = −0.5
        let p = run(PlantModel::NonlinearCubic(CubicPlant { y: 0.125 }), -0.5, 2.0);
        assert!((p.output() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn tustin_examples() {
        let f = TustinFriction::default();
        assert_eq!(tustin_force(0.0, &f), 0.0);
        assert!((tustin_force(1e3, &f) + f.fc).abs() < 1e-12);
        assert!((tustin_force(1e-9, &f) + f.fs).abs() < 1e-6);
        for i in 1..200 {
            let v = i as f64 * 0.013;
            assert_eq!(tustin_force(-v, &f), -tustin_force(v, &f));
        }
        assert!(f.validate().is_ok());
        assert!(TustinFriction { fc: 0.5, fs: 0.25, vs: 0.1 }.validate().is_err());
    }

    #[test]
    fn fault_examples() {
        let f = FaultSpec { t_fault: 8.0, gain_factor: 0.5 };
        assert_eq!(apply_fault(2.0, 7.99, &f), 2.0);
        assert_eq!(apply_fault(2.0, 8.0, &f), 1.0);
        let id = FaultSpec { t_fault: 0.0, gain_factor: 1.0 };
        for t in [0.0, 1.0, 100.0] {
            assert_eq!(apply_fault(-3.5, t, &id), -3.5);
        }
        assert!(FaultSpec { t_fault: 1.0, gain_factor: 0.0 }.validate().is_err());
        assert!(FaultSpec { t_fault: 1.0, gain_factor: 1.5 }.validate().is_err());
    }

    #[test]
    fn feedforward_examples() {
        assert_eq!(flat_feedforward(0.0, 0.0, 0.5, 2.0), 0.0);
        assert_eq!(flat_feedforward(1.0, 0.0, 0.5, 2.0), 2.0);
    }

    #[test]
    fn feedforward_inverts_nominal_model() {
        // m ÿ = −k̂₁ y + u*, y*(t) = sin t, started on the trajectory
        let (m, k1) = (0.5, 2.0);
        let mut x = [0.0f64, 1.0];
        let dt = TE / RK4_SUBSTEPS as f64;
        let mut t = 0.0;
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            for _ in 0..RK4_SUBSTEPS {
                rk4_step(&mut x, t, dt, |s, st, dx| {
                    let u = flat_feedforward(s.sin(), -s.sin(), m, k1);
                    dx[0] = st[1];
                    dx[1] = (-k1 * st[0] + u) / m;
                });
                t += dt;
            }
            worst = worst.max((x[0] - t.sin()).abs());
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let mut p = Plant::new(PlantModel::NonlinearCubic(CubicPlant { y: 1.0 }));
        let err = (0..10).map(|_| p.step(1e200, TE)).find_map(|r| r.err()).unwrap();
        assert!(matches!(err, Error::Divergence { step: 1, .. }), "{err:?}");
        let mut q = Plant::new(PlantModel::NonlinearCubic(CubicPlant { y: 1.0 }));
        assert!(matches!(q.step(f64::NAN, TE), Err(Error::NonFinite { step: 0, .. })));
    }
}
