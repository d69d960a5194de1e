//! Time grids, sliding sample windows, smooth reference trajectories and the
//! measurement-noise source.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling grid `k * te`, `k = 0..n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    te: f64,
    duration: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(te: f64, duration: f64) -> Result<Self> {
        if !(te > 0.0) || !te.is_finite() {
            return Err(Error::config(format!("sampling period must be > 0, got {te}")));
        }
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(Error::config(format!("duration must be >= 0, got {duration}")));
        }
        let n_steps = (duration / te).round() as usize + 1;
        Ok(Self { te, duration, n_steps })
    }

    pub fn te(&self) -> f64 {
        self.te
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.te
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_steps).map(move |k| self.time(k))
    }
}

/// Fixed-capacity window of uniformly spaced `(timestamp, value)` samples,
/// oldest first. Pushing into a full window evicts the oldest sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    capacity: usize,
    te: f64,
    entries: VecDeque<(f64, f64)>,
}

impl SampleWindow {
    pub fn new(capacity: usize, te: f64) -> Result<Self> {
        if capacity < 1 {
            return Err(Error::config("window capacity must be >= 1"));
        }
        if !(te > 0.0) {
            return Err(Error::config("window spacing must be > 0"));
        }
        Ok(Self { capacity, te, entries: VecDeque::with_capacity(capacity) })
    }

    /// Window sized so that a full window spans `length` seconds.
    pub fn with_length(length: f64, te: f64) -> Result<Self> {
        let intervals = (length / te).round();
        if intervals < 1.0 {
            return Err(Error::config(format!(
                "window length {length} shorter than one sampling period {te}"
            )));
        }
        Self::new(intervals as usize + 1, te)
    }

    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if let Some(&(last, _)) = self.entries.back() {
            if ((t - last) - self.te).abs() > 1e-6 * self.te {
                return Err(Error::config(format!(
                    "non-uniform sample: {t} after {last} with spacing {}",
                    self.te
                )));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((t, value));
        Ok(())
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn te(&self) -> f64 {
        self.te
    }

    /// Span covered by the stored samples, `(len - 1) * te`.
    pub fn length(&self) -> f64 {
        self.entries.len().saturating_sub(1) as f64 * self.te
    }

    pub fn first(&self) -> Option<(f64, f64)> {
        self.entries.front().copied()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        self.entries.back().copied()
    }

    /// Value `lag` samples back from the newest one.
    pub fn back(&self, lag: usize) -> Option<f64> {
        let n = self.entries.len();
        if lag < n {
            Some(self.entries[n - 1 - lag].1)
        } else {
            None
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, v)| v)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(t, _)| t)
    }

    /// True when both windows hold the same number of samples on the same
    /// timestamps.
    pub fn aligned_with(&self, other: &SampleWindow) -> bool {
        self.len() == other.len()
            && (self.te - other.te).abs() <= 1e-12 * self.te
            && self
                .timestamps()
                .zip(other.timestamps())
                .all(|(a, b)| (a - b).abs() <= 1e-6 * self.te)
    }
}

/// Quadrature weights on `n` uniformly spaced nodes with spacing `h`.
///
/// Composite Simpson for an even number of intervals, Simpson followed by a
/// closing 3/8 panel for an odd number, trapezoid for a single interval.
/// All cases integrate cubics exactly.
pub fn quadrature_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    let intervals = n - 1;
    if intervals == 1 {
        w[0] = h / 2.0;
        w[1] = h / 2.0;
        return w;
    }
    let simpson_intervals = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    for panel in (0..simpson_intervals).step_by(2) {
        w[panel] += h / 3.0;
        w[panel + 1] += 4.0 * h / 3.0;
        w[panel + 2] += h / 3.0;
    }
    if simpson_intervals < intervals {
        let s = simpson_intervals;
        let c = 3.0 * h / 8.0;
        w[s] += c;
        w[s + 1] += 3.0 * c;
        w[s + 2] += 3.0 * c;
        w[s + 3] += c;
    }
    w
}

/// Approximates `∫₀^L weight(σ) · value(σ) dσ` over the window, where `σ` is
/// window-local time (`σ = 0` at the oldest sample, `L` at the newest).
pub fn window_quadrature(window: &SampleWindow, weight: impl Fn(f64) -> f64) -> Result<f64> {
    if window.len() < 2 {
        return Err(Error::NotReady("window holds fewer than 2 samples"));
    }
    let h = window.te();
    let w = quadrature_weights(window.len(), h);
    Ok(window
        .values()
        .enumerate()
        .zip(w)
        .map(|((j, v), q)| q * weight(j as f64 * h) * v)
        .sum())
}

// 3-point Gauss–Legendre on [a, b]: exact for polynomials of degree ≤ 5.
fn gauss3(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const X: f64 = 0.774_596_669_241_483_4;
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    r * (5.0 / 9.0 * (f(m - r * X) + f(m + r * X)) + 8.0 / 9.0 * f(m))
}

/// Like [`window_quadrature`], but integrates `weight` against the linear
/// interpolant of the samples, interval by interval. Exact when the signal is
/// piecewise linear between samples and `weight` has degree ≤ 4.
pub fn window_quadrature_linear(window: &SampleWindow, weight: impl Fn(f64) -> f64) -> Result<f64> {
    if window.len() < 2 {
        return Err(Error::NotReady("window holds fewer than 2 samples"));
    }
    let h = window.te();
    let v: Vec<f64> = window.values().collect();
    Ok((1..v.len())
        .map(|i| {
            let (a, b) = ((i - 1) as f64 * h, i as f64 * h);
            let (ya, yb) = (v[i - 1], v[i]);
            gauss3(a, b, |s| weight(s) * (ya + (yb - ya) * (s - a) / h))
        })
        .sum())
}

/// Integrates `weight` against a zero-order-hold signal whose sample at node
/// `i` is the value held over the interval ending there. The oldest sample
/// only closes the interval before the window and is ignored. Exact for
/// `weight` of degree ≤ 5.
pub fn window_quadrature_held(window: &SampleWindow, weight: impl Fn(f64) -> f64) -> Result<f64> {
    if window.len() < 2 {
        return Err(Error::NotReady("window holds fewer than 2 samples"));
    }
    let h = window.te();
    Ok(window
        .values()
        .enumerate()
        .skip(1)
        .map(|(i, v)| v * gauss3((i - 1) as f64 * h, i as f64 * h, &weight))
        .sum())
}

/// Reference `y*` with its exact first and second derivatives, sampled on a
/// [`TimeGrid`], plus the piecewise-constant setpoint it is derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub ystar: Vec<f64>,
    pub dystar: Vec<f64>,
    pub ddystar: Vec<f64>,
    pub setpoint: Vec<f64>,
}

impl ReferenceTrajectory {
    pub fn len(&self) -> usize {
        self.ystar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ystar.is_empty()
    }

    /// Constant reference with zero derivatives.
    pub fn constant(level: f64, grid: &TimeGrid) -> Self {
        let n = grid.n_steps();
        Self {
            ystar: vec![level; n],
            dystar: vec![0.0; n],
            ddystar: vec![0.0; n],
            setpoint: vec![level; n],
        }
    }
}

// s(τ) = 10τ³ − 15τ⁴ + 6τ⁵ and its first two derivatives.
fn quintic(tau: f64) -> (f64, f64, f64) {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let s = t3 * (10.0 - 15.0 * tau + 6.0 * t2);
    let ds = 30.0 * t2 * (1.0 - tau) * (1.0 - tau);
    let dds = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau);
    (s, ds, dds)
}

/// Builds a reference joining successive setpoint levels with quintic
/// transitions of length `transition_time`, each starting at its setpoint
/// time. The first setpoint is the initial level.
pub fn make_reference(
    setpoints: &[(f64, f64)],
    transition_time: f64,
    grid: &TimeGrid,
) -> Result<ReferenceTrajectory> {
    if setpoints.is_empty() {
        return Err(Error::config("reference needs at least one setpoint"));
    }
    if !(transition_time >= 0.0) || !transition_time.is_finite() {
        return Err(Error::config("transition time must be >= 0"));
    }
    for w in setpoints.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::config(format!(
                "setpoint times must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
    }
    // the first setpoint is the initial level and carries no transition
    for w in setpoints.windows(2).skip(1) {
        if w[0].0 + transition_time > w[1].0 + 1e-12 {
            return Err(Error::config(format!(
                "transition starting at {} overlaps the setpoint at {}",
                w[0].0, w[1].0
            )));
        }
    }
    for &(t, level) in setpoints {
        if !t.is_finite() || !level.is_finite() || t < 0.0 || t > grid.duration() + 1e-12 {
            return Err(Error::config(format!("setpoint ({t}, {level}) outside the horizon")));
        }
    }

    let n = grid.n_steps();
    let mut rt = ReferenceTrajectory {
        ystar: Vec::with_capacity(n),
        dystar: Vec::with_capacity(n),
        ddystar: Vec::with_capacity(n),
        setpoint: Vec::with_capacity(n),
    };
    let eps = 1e-9 * grid.te();
    for t in grid.times() {
        // index of the latest setpoint switched on at or before t
        let i = setpoints.iter().rposition(|&(ts, _)| ts <= t + eps).unwrap_or(0);
        let level = setpoints[i].1;
        rt.setpoint.push(level);
        let elapsed = t - setpoints[i].0;
        if i > 0 && transition_time > 0.0 && elapsed < transition_time {
            let from = setpoints[i - 1].1;
            let span = level - from;
            let (s, ds, dds) = quintic((elapsed / transition_time).clamp(0.0, 1.0));
            rt.ystar.push(from + span * s);
            rt.dystar.push(span * ds / transition_time);
            rt.ddystar.push(span * dds / (transition_time * transition_time));
        } else {
            rt.ystar.push(level);
            rt.dystar.push(0.0);
            rt.ddystar.push(0.0);
        }
    }
    Ok(rt)
}

/// Seeded zero-mean Gaussian noise configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub seed: u64,
    pub std: f64,
}

impl NoiseSource {
    pub fn new(seed: u64, std: f64) -> Self {
        Self { seed, std }
    }

    pub fn silent() -> Self {
        Self { seed: 0, std: 0.0 }
    }

    pub fn stream(&self) -> NoiseStream {
        NoiseStream { rng: ChaCha8Rng::seed_from_u64(self.seed), std: self.std }
    }

    /// Independent source derived from this one's seed, used for auxiliary
    /// random processes (e.g. the delay walk) so they do not perturb the
    /// measurement noise sequence.
    pub fn substream(&self, tag: u64, std: f64) -> NoiseSource {
        // splitmix64 finalizer
        let mut z = self.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        NoiseSource { seed: z ^ (z >> 31), std }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    std: f64,
}

impl NoiseStream {
    pub fn sample(&mut self) -> f64 {
        if self.std == 0.0 {
            return 0.0;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        self.std * z
    }
}

impl Iterator for NoiseStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.sample())
    }
}

/// `n` draws from a fresh stream of `source`.
pub fn noise_stream(source: &NoiseSource, n: usize) -> Vec<f64> {
    source.stream().take(n).collect()
}
