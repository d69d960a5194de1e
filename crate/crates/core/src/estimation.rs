//! Online estimation of the lumped term `F` of the ultra-local model
//! `y^(ν) = F + α u (+ β ∫u)`.
//!
//! `F` is treated as a constant `φ` over a short sliding window and recovered
//! from iterated integrals of the measured output and the applied input. The
//! integral weights are chosen so that the unknown initial condition at the
//! window start drops out: a constant offset on `y` does not change `φ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{
    window_quadrature, window_quadrature_held, window_quadrature_linear, SampleWindow,
};

/// Derivative order of the ultra-local model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn as_usize(self) -> usize {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }

    pub fn from_usize(nu: usize) -> Result<Self> {
        match nu {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(Error::config(format!("ultra-local order must be 1 or 2, got {nu}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// Window integral of `y` and `u` with initial-condition annihilation.
    OpenLoopIntegral,
    /// Window mean of `ẏ* − αu` corrected by the error increment, valid with
    /// an iP in the loop.
    ClosedLoopIp,
    /// Backward difference of `y` minus the last input.
    OneStep,
}

/// Everything needed to run the ultra-local model and its estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UltraLocalConfig {
    pub nu: Order,
    pub alpha: f64,
    /// Gain on `∫u` (generalized model only, else 0).
    pub beta: f64,
    pub estimator: EstimatorKind,
    /// Window length `L` in seconds for the integral variants.
    pub window_len: f64,
}

impl UltraLocalConfig {
    pub fn first_order(alpha: f64) -> Self {
        Self {
            nu: Order::First,
            alpha,
            beta: 0.0,
            estimator: EstimatorKind::OpenLoopIntegral,
            window_len: 0.1,
        }
    }

    pub fn second_order(alpha: f64) -> Self {
        Self {
            nu: Order::Second,
            alpha,
            beta: 0.0,
            estimator: EstimatorKind::OneStep,
            window_len: 0.1,
        }
    }

    pub fn validate(&self, te: f64) -> Result<()> {
        if self.alpha == 0.0 || !self.alpha.is_finite() {
            return Err(Error::config("alpha must be finite and nonzero"));
        }
        if !self.beta.is_finite() {
            return Err(Error::config("beta must be finite"));
        }
        match self.estimator {
            EstimatorKind::OneStep => {}
            EstimatorKind::OpenLoopIntegral | EstimatorKind::ClosedLoopIp => {
                if self.estimator == EstimatorKind::ClosedLoopIp && self.nu != Order::First {
                    return Err(Error::config("the closed-loop estimator needs a first-order model"));
                }
                if !(self.window_len >= 2.0 * te - 1e-12) {
                    return Err(Error::config(format!(
                        "window length {} must be at least 2 sampling periods",
                        self.window_len
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FEstimate {
    pub value: f64,
    pub t: f64,
    pub ready: bool,
}

impl FEstimate {
    pub fn not_ready(t: f64) -> Self {
        Self { value: 0.0, t, ready: false }
    }
}

fn check_aligned(a: &SampleWindow, b: &SampleWindow) -> Result<()> {
    if a.aligned_with(b) {
        Ok(())
    } else {
        Err(Error::config("estimator windows are not aligned on the same grid"))
    }
}

fn newest_time(w: &SampleWindow) -> f64 {
    w.last().map_or(0.0, |(t, _)| t)
}

/// Open-loop algebraic estimate for `ẏ = φ + αu`:
///
/// `φ = −(6/L³) ∫₀^L [(L − 2σ) y(σ) + α σ (L − σ) u(σ)] dσ`
///
/// `y` is integrated as its linear interpolant and `u` as a zero-order hold
/// (the sample at each node is the input held over the interval ending
/// there), which makes the estimate exact for a held input.
pub fn estimate_openloop(
    y_win: &SampleWindow,
    u_win: &SampleWindow,
    alpha: f64,
) -> Result<FEstimate> {
    let t = newest_time(y_win);
    if !y_win.is_full() || !u_win.is_full() || y_win.len() < 2 {
        return Ok(FEstimate::not_ready(t));
    }
    check_aligned(y_win, u_win)?;
    let l = y_win.length();
    let y_term = window_quadrature_linear(y_win, |s| l - 2.0 * s)?;
    let u_term = window_quadrature_held(u_win, |s| s * (l - s))?;
    let value = -6.0 / (l * l * l) * (y_term + alpha * u_term);
    Ok(FEstimate { value, t, ready: true })
}

/// Open-loop algebraic estimate for `ÿ = φ + αu`:
///
/// `φ = (60/L⁵) ∫₀^L [(L² − 6Lσ + 6σ²) y(σ) − (α/2) σ² (L − σ)² u(σ)] dσ`
///
/// The `y` weight is orthogonal to `1` and `σ`, so the unknown initial
/// position and velocity drop out.
pub fn estimate_openloop_second(
    y_win: &SampleWindow,
    u_win: &SampleWindow,
    alpha: f64,
) -> Result<FEstimate> {
    let t = newest_time(y_win);
    if !y_win.is_full() || !u_win.is_full() || y_win.len() < 2 {
        return Ok(FEstimate::not_ready(t));
    }
    check_aligned(y_win, u_win)?;
    let l = y_win.length();
    let y_term = window_quadrature(y_win, |s| l * l - 6.0 * l * s + 6.0 * s * s)?;
    let u_term = window_quadrature_held(u_win, |s| s * s * (l - s) * (l - s))?;
    let value = 60.0 / l.powi(5) * (y_term - 0.5 * alpha * u_term);
    Ok(FEstimate { value, t, ready: true })
}

/// Closed-loop estimate with the iP in the loop, as the window mean of
/// `ẏ* − αu − K_P e`.
///
/// This form substitutes the ideal error dynamics `ė = −K_P e` for the output
/// derivative. Fed back into the very iP that produced `u`, the integrand
/// equals the previous estimate and carries no plant information, so the
/// stateful estimator uses [`estimate_closedloop_increment`] instead.
pub fn estimate_closedloop_ip(
    dystar_win: &SampleWindow,
    u_win: &SampleWindow,
    e_win: &SampleWindow,
    alpha: f64,
    kp: f64,
) -> Result<FEstimate> {
    let t = newest_time(dystar_win);
    if !dystar_win.is_full() || !u_win.is_full() || !e_win.is_full() || dystar_win.len() < 2 {
        return Ok(FEstimate::not_ready(t));
    }
    check_aligned(dystar_win, u_win)?;
    check_aligned(dystar_win, e_win)?;
    let l = dystar_win.length();
    let integral = window_quadrature(dystar_win, |_| 1.0)?
        - alpha * window_quadrature(u_win, |_| 1.0)?
        - kp * window_quadrature(e_win, |_| 1.0)?;
    Ok(FEstimate { value: integral / l, t, ready: true })
}

/// Closed-loop estimate using the measured error increment in place of the
/// assumed error dynamics:
///
/// `φ = (1/L) [∫ (ẏ* − αu) dσ + e(t) − e(t − L)]`
///
/// Identical to [`estimate_closedloop_ip`] whenever `ė = −K_P e` holds on the
/// window.
pub fn estimate_closedloop_increment(
    dystar_win: &SampleWindow,
    u_win: &SampleWindow,
    e_win: &SampleWindow,
    alpha: f64,
) -> Result<FEstimate> {
    let t = newest_time(dystar_win);
    if !dystar_win.is_full() || !u_win.is_full() || !e_win.is_full() || dystar_win.len() < 2 {
        return Ok(FEstimate::not_ready(t));
    }
    check_aligned(dystar_win, u_win)?;
    check_aligned(dystar_win, e_win)?;
    let l = dystar_win.length();
    let (e_old, e_new) = match (e_win.first(), e_win.last()) {
        (Some((_, a)), Some((_, b))) => (a, b),
        _ => return Ok(FEstimate::not_ready(t)),
    };
    let integral = window_quadrature(dystar_win, |_| 1.0)?
        - alpha * window_quadrature_held(u_win, |_| 1.0)?
        + (e_new - e_old);
    Ok(FEstimate { value: integral / l, t, ready: true })
}

/// One-step estimate from backward differences of `y` and the previous input.
///
/// `ν = 1`: `F = (y(t) − y(t−h))/h − α u(t−h)`;
/// `ν = 2`: `F = (y(t) − 2y(t−h) + y(t−2h))/h² − α u(t−h)`.
pub fn estimate_onestep(y_win: &SampleWindow, u_prev: f64, alpha: f64, nu: Order) -> FEstimate {
    let t = newest_time(y_win);
    let h = y_win.te();
    let derivative = match nu {
        Order::First => match (y_win.back(0), y_win.back(1)) {
            (Some(y0), Some(y1)) => (y0 - y1) / h,
            _ => return FEstimate::not_ready(t),
        },
        Order::Second => match (y_win.back(0), y_win.back(1), y_win.back(2)) {
            (Some(y0), Some(y1), Some(y2)) => (y0 - 2.0 * y1 + y2) / (h * h),
            _ => return FEstimate::not_ready(t),
        },
    };
    FEstimate { value: derivative - alpha * u_prev, t, ready: true }
}

/// One sample worth of loop signals handed to [`FEstimator::update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSample {
    pub t: f64,
    /// Measured output at `t`.
    pub y: f64,
    /// Input held over the previous sampling interval.
    pub u_prev: f64,
    /// Running integral of the input up to the previous sample.
    pub int_u: f64,
    pub dystar: f64,
    pub e: f64,
}

/// Stateful estimator owning its sliding windows.
#[derive(Debug, Clone)]
pub struct FEstimator {
    cfg: UltraLocalConfig,
    y: SampleWindow,
    input: SampleWindow,
    dystar: SampleWindow,
    e: SampleWindow,
}

impl FEstimator {
    pub fn new(cfg: UltraLocalConfig, te: f64) -> Result<Self> {
        cfg.validate(te)?;
        let (y, input) = match cfg.estimator {
            EstimatorKind::OneStep => (
                SampleWindow::new(cfg.nu.as_usize() + 1, te)?,
                SampleWindow::new(1, te)?,
            ),
            _ => (
                SampleWindow::with_length(cfg.window_len, te)?,
                SampleWindow::with_length(cfg.window_len, te)?,
            ),
        };
        let dystar = SampleWindow::new(input.capacity(), te)?;
        let e = SampleWindow::new(input.capacity(), te)?;
        Ok(Self { cfg, y, input, dystar, e })
    }

    pub fn config(&self) -> &UltraLocalConfig {
        &self.cfg
    }

    pub fn update(&mut self, s: EstimatorSample) -> Result<FEstimate> {
        let alpha = self.cfg.alpha;
        // αu + β∫u written as α · (u + (β/α) ∫u)
        let input = s.u_prev + self.cfg.beta / alpha * s.int_u;
        self.y.push(s.t, s.y)?;
        self.input.push(s.t, input)?;
        let est = match self.cfg.estimator {
            EstimatorKind::OneStep => estimate_onestep(&self.y, input, alpha, self.cfg.nu),
            EstimatorKind::OpenLoopIntegral => match self.cfg.nu {
                Order::First => estimate_openloop(&self.y, &self.input, alpha)?,
                Order::Second => estimate_openloop_second(&self.y, &self.input, alpha)?,
            },
            EstimatorKind::ClosedLoopIp => {
                self.dystar.push(s.t, s.dystar)?;
                self.e.push(s.t, s.e)?;
                estimate_closedloop_increment(&self.dystar, &self.input, &self.e, alpha)?
            }
        };
        Ok(est)
    }
}
