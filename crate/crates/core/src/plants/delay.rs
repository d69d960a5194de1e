//! `ẏ(t) = a y(t) + b y(t − τ(t)) + u` with a bounded time-varying delay.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::rk4_step;
use crate::error::{Error, Result};
use crate::signals::{NoiseSource, NoiseStream};

/// Random walk of the delay: `τ ← clamp(τ + 10·te·sign(N), 0, τ_max)`.
pub fn delay_walk(tau_prev: f64, te: f64, noise: &mut NoiseStream, tau_max: f64) -> f64 {
    let draw = noise.sample();
    let sign = if draw > 0.0 {
        1.0
    } else if draw < 0.0 {
        -1.0
    } else {
        0.0
    };
    (tau_prev + 10.0 * te * sign).clamp(0.0, tau_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayParams {
    pub a: f64,
    pub b: f64,
    pub tau0: f64,
    pub tau_max: f64,
    /// Seed of the standard-normal draws driving the walk; `None` freezes `τ`.
    pub walk: Option<NoiseSource>,
}

#[derive(Debug, Clone)]
pub struct DelayPlant {
    pub params: DelayParams,
    y: f64,
    tau: f64,
    t: f64,
    initial: f64,
    te: f64,
    /// Output at past grid points, newest last; the newest equals `y`.
    history: VecDeque<f64>,
    capacity: usize,
    walk: Option<NoiseStream>,
}

impl DelayPlant {
    pub fn new(params: DelayParams, y0: f64, te: f64) -> Result<Self> {
        if !(params.tau_max >= 0.0) || !(0.0..=params.tau_max).contains(&params.tau0) {
            return Err(Error::config(format!(
                "initial delay {} outside [0, {}]",
                params.tau0, params.tau_max
            )));
        }
        if !(te > 0.0) {
            return Err(Error::config("sampling period must be > 0"));
        }
        let capacity = (params.tau_max / te).ceil() as usize + 2;
        let mut history = VecDeque::with_capacity(capacity);
        history.push_back(y0);
        Ok(Self {
            params,
            y: y0,
            tau: params.tau0,
            t: 0.0,
            initial: y0,
            te,
            history,
            capacity,
            walk: params.walk.map(|n| n.stream()),
        })
    }

    pub fn output(&self) -> f64 {
        self.y
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Output at an absolute time `s ≤ t`, from the stored grid samples.
    fn past(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return self.initial;
        }
        let back = (self.t - s) / self.te;
        let n = self.history.len();
        let max_back = (n - 1) as f64;
        if back >= max_back {
            return self.history[0];
        }
        let k = back.floor();
        let frac = back - k;
        let newer = self.history[n - 1 - k as usize];
        let older = self.history[n - 2 - k as usize];
        newer * (1.0 - frac) + older * frac
    }

    /// Delayed value at stage time `s` given the stage state `y_stage`. For
    /// `s − τ` inside the current step, interpolate between the step start and
    /// the stage.
    fn delayed(&self, s: f64, y_stage: f64) -> f64 {
        let target = s - self.tau;
        if target <= self.t {
            self.past(target)
        } else {
            let span = s - self.t;
            let frac = (target - self.t) / span;
            self.y * (1.0 - frac) + y_stage * frac
        }
    }

    pub fn advance(&mut self, u: f64, te: f64, substeps: usize) {
        let (a, b) = (self.params.a, self.params.b);
        let dt = te / substeps as f64;
        let mut x = [self.y];
        for i in 0..substeps {
            let t0 = self.t + i as f64 * dt;
            rk4_step(&mut x, t0, dt, |s, st, dx| {
                dx[0] = a * st[0] + b * self.delayed(s, st[0]) + u;
            });
        }
        self.y = x[0];
        self.t += te;
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back(self.y);
        if let Some(noise) = self.walk.as_mut() {
            self.tau = delay_walk(self.tau, te, noise, self.params.tau_max);
        }
    }
}
