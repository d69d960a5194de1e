//! Sampled classic and intelligent controllers in velocity form, and the gain
//! maps under which they produce identical control sequences.
//!
//! Both families are written as `u(t) = u(t − h) + …` with zero initial
//! memory, `ė` and `ë` as backward differences and `∫e` as the running sum
//! `I(t) = I(t − h) + h e(t)`. The intelligent recursions here use the
//! plus-`K_P` form (`u = (ẏ* − F + K_P e)/α`), the form under which the
//! maps below are stated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::signals::NoiseSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MapDirection {
    #[serde(rename = "iP->PI")]
    IpToPi,
    #[serde(rename = "iPD->PID")]
    IpdToPid,
    #[serde(rename = "iPI->PI2")]
    IpiToPi2,
    #[serde(rename = "iPID->PI2D")]
    IpidToPi2d,
}

impl MapDirection {
    pub const ALL: [MapDirection; 4] =
        [MapDirection::IpToPi, MapDirection::IpdToPid, MapDirection::IpiToPi2, MapDirection::IpidToPi2d];

    pub fn label(self) -> &'static str {
        match self {
            MapDirection::IpToPi => "iP->PI",
            MapDirection::IpdToPid => "iPD->PID",
            MapDirection::IpiToPi2 => "iPI->PI2",
            MapDirection::IpidToPi2d => "iPID->PI2D",
        }
    }
}

/// Intelligent-side gains; unused entries are ignored by the map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SourceGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// Classic-side gains of `u = k_p e + k_i ∫e + k_ii ∫∫e + k_d ė`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ClassicSampledGains {
    pub kp: f64,
    pub ki: f64,
    pub kii: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainMap {
    pub direction: MapDirection,
    pub h: f64,
    pub alpha: f64,
    pub source: SourceGains,
    pub mapped: ClassicSampledGains,
}

pub fn map_ip_to_pi(alpha: f64, h: f64, kp: f64) -> (f64, f64) {
    let ah = alpha * h;
    (-1.0 / ah, kp / ah)
}

pub fn map_ipd_to_pid(alpha: f64, h: f64, kp: f64, kd: f64) -> (f64, f64, f64) {
    let ah = alpha * h;
    (kd / ah, kp / ah, -1.0 / ah)
}

pub fn map_ipi_to_pi2(alpha: f64, h: f64, kp: f64, ki: f64) -> (f64, f64, f64) {
    let ah = alpha * h;
    (-1.0 / ah, kp / ah, ki / ah)
}

pub fn map_ipid_to_pi2d(alpha: f64, h: f64, kp: f64, ki: f64, kd: f64) -> (f64, f64, f64, f64) {
    let ah = alpha * h;
    (kd / ah, kp / ah, ki / ah, -1.0 / ah)
}

impl GainMap {
    pub fn new(direction: MapDirection, alpha: f64, h: f64, source: SourceGains) -> Result<Self> {
        if alpha * h == 0.0 || !(alpha * h).is_finite() {
            return Err(Error::config("gain maps need a finite nonzero alpha*h"));
        }
        let s = source;
        let mapped = match direction {
            MapDirection::IpToPi => {
                let (kp, ki) = map_ip_to_pi(alpha, h, s.kp);
                ClassicSampledGains { kp, ki, ..Default::default() }
            }
            MapDirection::IpdToPid => {
                let (kp, ki, kd) = map_ipd_to_pid(alpha, h, s.kp, s.kd);
                ClassicSampledGains { kp, ki, kd, ..Default::default() }
            }
            MapDirection::IpiToPi2 => {
                let (kp, ki, kii) = map_ipi_to_pi2(alpha, h, s.kp, s.ki);
                ClassicSampledGains { kp, ki, kii, ..Default::default() }
            }
            MapDirection::IpidToPi2d => {
                let (kp, ki, kii, kd) = map_ipid_to_pi2d(alpha, h, s.kp, s.ki, s.kd);
                ClassicSampledGains { kp, ki, kii, kd }
            }
        };
        Ok(Self { direction, h, alpha, source, mapped })
    }

    /// Runs the intelligent recursion and its mapped classic counterpart on
    /// `e` and returns both control sequences.
    pub fn run_pair(&self, e: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let s = self.source;
        let intelligent = match self.direction {
            MapDirection::IpToPi => sampled_ip(e, self.h, self.alpha, s.kp),
            MapDirection::IpdToPid => sampled_ipd(e, self.h, self.alpha, s.kp, s.kd),
            MapDirection::IpiToPi2 => sampled_ipi(e, self.h, self.alpha, s.kp, s.ki),
            MapDirection::IpidToPi2d => sampled_ipid(e, self.h, self.alpha, s.kp, s.ki, s.kd),
        };
        (intelligent, sampled_classic(e, self.h, &self.mapped))
    }
}

/// Backward-difference memory shared by all recursions.
#[derive(Default)]
struct Memory {
    e1: f64,
    e2: f64,
    int: f64,
    u: f64,
}

impl Memory {
    /// Returns `(ė, ë, ∫e)` at the new sample.
    fn push(&mut self, e: f64, h: f64) -> (f64, f64, f64) {
        let de = (e - self.e1) / h;
        let dde = (e - 2.0 * self.e1 + self.e2) / (h * h);
        self.int += h * e;
        self.e2 = self.e1;
        self.e1 = e;
        (de, dde, self.int)
    }
}

/// `u(t) = u(t − h) + k_p h ė + k_i h e + k_ii h ∫e + k_d h ë`.
pub fn sampled_classic(e: &[f64], h: f64, g: &ClassicSampledGains) -> Vec<f64> {
    let mut m = Memory::default();
    e.iter()
        .map(|&ek| {
            let (de, dde, int) = m.push(ek, h);
            m.u += g.kp * h * de + g.ki * h * ek + g.kii * h * int + g.kd * h * dde;
            m.u
        })
        .collect()
}

/// `u(t) = u(t − h) + k_p (e(t) − e(t − h)) + k_i h e(t)`.
pub fn sampled_pi(e: &[f64], h: f64, kp: f64, ki: f64) -> Vec<f64> {
    sampled_classic(e, h, &ClassicSampledGains { kp, ki, ..Default::default() })
}

pub fn sampled_pid(e: &[f64], h: f64, kp: f64, ki: f64, kd: f64) -> Vec<f64> {
    sampled_classic(e, h, &ClassicSampledGains { kp, ki, kd, ..Default::default() })
}

pub fn sampled_pi2(e: &[f64], h: f64, kp: f64, ki: f64, kii: f64) -> Vec<f64> {
    sampled_classic(e, h, &ClassicSampledGains { kp, ki, kii, ..Default::default() })
}

pub fn sampled_pi2d(e: &[f64], h: f64, g: &ClassicSampledGains) -> Vec<f64> {
    sampled_classic(e, h, g)
}

/// Intelligent recursion for `ν ∈ {1, 2}`:
/// `u(t) = u(t − h) − e^{(ν)}/α + (K_P e + K_I ∫e + K_D ė)/α`, with the
/// `K_D` term only for `ν = 2`.
fn sampled_intelligent(e: &[f64], h: f64, alpha: f64, nu: usize, g: SourceGains) -> Vec<f64> {
    let mut m = Memory::default();
    e.iter()
        .map(|&ek| {
            let (de, dde, int) = m.push(ek, h);
            let lead = if nu == 1 { de } else { dde };
            let kd_term = if nu == 1 { 0.0 } else { g.kd * de };
            m.u += -lead / alpha + (g.kp * ek + g.ki * int + kd_term) / alpha;
            m.u
        })
        .collect()
}

/// `u(t) = u(t − h) − (e(t) − e(t − h))/(hα) + K_P e(t)/α`.
pub fn sampled_ip(e: &[f64], h: f64, alpha: f64, kp: f64) -> Vec<f64> {
    sampled_intelligent(e, h, alpha, 1, SourceGains { kp, ..Default::default() })
}

pub fn sampled_ipi(e: &[f64], h: f64, alpha: f64, kp: f64, ki: f64) -> Vec<f64> {
    sampled_intelligent(e, h, alpha, 1, SourceGains { kp, ki, kd: 0.0 })
}

pub fn sampled_ipd(e: &[f64], h: f64, alpha: f64, kp: f64, kd: f64) -> Vec<f64> {
    sampled_intelligent(e, h, alpha, 2, SourceGains { kp, ki: 0.0, kd })
}

pub fn sampled_ipid(e: &[f64], h: f64, alpha: f64, kp: f64, ki: f64, kd: f64) -> Vec<f64> {
    sampled_intelligent(e, h, alpha, 2, SourceGains { kp, ki, kd })
}

/// Largest `|a_k − b_k|`, absolute and relative to `max(1, max_k |a_k|)`.
pub fn max_deviation(a: &[f64], b: &[f64]) -> (f64, f64) {
    let abs = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().map(|x| x.abs()).fold(1.0, f64::max);
    (abs, abs / scale)
}

#[derive(Debug, Clone, Serialize)]
pub struct RowReport {
    pub map: GainMap,
    pub max_abs_du: f64,
    pub max_rel_du: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrespondenceReport {
    pub n_random: usize,
    pub length: usize,
    pub seed: u64,
    pub rows: Vec<RowReport>,
}

impl CorrespondenceReport {
    pub fn max_rel(&self) -> f64 {
        self.rows.iter().map(|r| r.max_rel_du).fold(0.0, f64::max)
    }
}

impl std::fmt::Display for CorrespondenceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{} random error sequences of length {} (seed {})", self.n_random, self.length, self.seed)?;
        for r in &self.rows {
            let m = &r.mapped_display();
            writeln!(
                f,
                "{:<11} h={} alpha={} {}  max|du|={:.3e} rel={:.3e}",
                r.map.direction.label(),
                r.map.h,
                r.map.alpha,
                m,
                r.max_abs_du,
                r.max_rel_du
            )?;
        }
        Ok(())
    }
}

impl RowReport {
    fn mapped_display(&self) -> String {
        let g = self.map.mapped;
        match self.map.direction {
            MapDirection::IpToPi => format!("k_p={} k_i={}", g.kp, g.ki),
            MapDirection::IpdToPid => format!("k_p={} k_i={} k_d={}", g.kp, g.ki, g.kd),
            MapDirection::IpiToPi2 => format!("k_p={} k_i={} k_ii={}", g.kp, g.ki, g.kii),
            MapDirection::IpidToPi2d => {
                format!("k_p={} k_i={} k_ii={} k_d={}", g.kp, g.ki, g.kii, g.kd)
            }
        }
    }
}

/// Length of each random error sequence.
pub const SEQUENCE_LENGTH: usize = 1000;

/// Runs every map on `n_random` standard-normal error sequences and reports
/// the worst deviation between the paired control sequences.
pub fn verify_correspondence(
    h: f64,
    alpha: f64,
    gains: SourceGains,
    n_random: usize,
    seed: u64,
) -> Result<CorrespondenceReport> {
    if n_random == 0 {
        return Err(Error::config("n_random must be >= 1"));
    }
    let maps = MapDirection::ALL
        .iter()
        .map(|&d| GainMap::new(d, alpha, h, gains))
        .collect::<Result<Vec<_>>>()?;
    let base = NoiseSource::new(seed, 1.0);
    let worst = (0..n_random)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(base.substream(i as u64, 1.0).seed);
            let e: Vec<f64> =
                (0..SEQUENCE_LENGTH).map(|_| StandardNormal.sample(&mut rng)).collect();
            maps.iter()
                .map(|m| {
                    let (a, b) = m.run_pair(&e);
                    max_deviation(&a, &b)
                })
                .collect::<Vec<_>>()
        })
        .reduce(
            || vec![(0.0, 0.0); maps.len()],
            |x, y| x.iter().zip(&y).map(|(a, b)| (a.0.max(b.0), a.1.max(b.1))).collect(),
        );
    let rows = maps
        .into_iter()
        .zip(worst)
        .map(|(map, (abs, rel))| RowReport { map, max_abs_du: abs, max_rel_du: rel })
        .collect();
    Ok(CorrespondenceReport { n_random, length: SEQUENCE_LENGTH, seed, rows })
}
