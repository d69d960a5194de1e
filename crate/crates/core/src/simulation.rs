//! Closed-loop engine: plant, estimator, controller, reference and noise
//! advanced together on one time grid, with per-step logging and metrics.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controllers::{Controller, ControllerSpec, RefSample};
use crate::error::{Error, Result};
use crate::estimation::{EstimatorSample, FEstimator, UltraLocalConfig};
use crate::plants::{apply_fault, flat_feedforward, FaultSpec, FlatFeedforward, Plant, PlantModel};
use crate::signals::{NoiseSource, NoiseStream, ReferenceTrajectory, TimeGrid};

/// Everything needed to run one loop.
#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub name: String,
    pub grid: TimeGrid,
    pub plant: PlantModel,
    pub controller: ControllerSpec,
    /// Required for intelligent controllers, ignored otherwise.
    pub ultra_local: Option<UltraLocalConfig>,
    pub reference: ReferenceTrajectory,
    pub noise: NoiseSource,
    pub fault: Option<FaultSpec>,
    pub feedforward: Option<FlatFeedforward>,
    /// Record the full plant state every this many steps (heat field dumps).
    pub state_stride: Option<usize>,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        if self.reference.len() != self.grid.n_steps() {
            return Err(Error::config(format!(
                "reference has {} samples, grid has {}",
                self.reference.len(),
                self.grid.n_steps()
            )));
        }
        if !(self.noise.std >= 0.0) {
            return Err(Error::config("noise std must be >= 0"));
        }
        if let Some(f) = &self.fault {
            f.validate()?;
        }
        if let Some(ff) = &self.feedforward {
            if !(ff.m > 0.0) {
                return Err(Error::config("feedforward mass must be > 0"));
            }
        }
        if self.state_stride == Some(0) {
            return Err(Error::config("state stride must be >= 1"));
        }
        if let ControllerSpec::Intelligent { kind, gains, .. } = &self.controller {
            let ul = self
                .ultra_local
                .as_ref()
                .ok_or_else(|| Error::config("intelligent controller needs an ultra-local model"))?;
            ul.validate(self.grid.te())?;
            if ul.nu != kind.order() {
                return Err(Error::config(format!(
                    "controller {kind:?} needs nu = {}, model has nu = {}",
                    kind.order().as_usize(),
                    ul.nu.as_usize()
                )));
            }
            if ul.alpha != gains.alpha || ul.beta != gains.beta {
                return Err(Error::config("controller and ultra-local model disagree on alpha/beta"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the configuration's debug rendering.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{self:?}").as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub t: f64,
    pub setpoint: f64,
    pub y_ref: f64,
    pub dy_ref: f64,
    pub y_true: f64,
    pub y_meas: f64,
    pub u_cmd: f64,
    pub u_eff: f64,
    /// `None` for classic controllers.
    pub f_est: Option<f64>,
    pub aux: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSnapshot {
    pub t: f64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopRecord {
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub te: f64,
    pub fault: Option<FaultSpec>,
    pub rows: Vec<RecordRow>,
    pub snapshots: Vec<StateSnapshot>,
}

/// A loop that can be stepped one sample at a time.
pub struct Simulation {
    cfg: LoopConfig,
    plant: Plant,
    controller: Controller,
    estimator: Option<FEstimator>,
    noise: NoiseStream,
    k: usize,
    u_prev: f64,
    rows: Vec<RecordRow>,
    snapshots: Vec<StateSnapshot>,
    hash: String,
}

impl Simulation {
    pub fn new(cfg: LoopConfig) -> Result<Self> {
        cfg.validate()?;
        let te = cfg.grid.te();
        let estimator = match (&cfg.controller, &cfg.ultra_local) {
            (ControllerSpec::Intelligent { .. }, Some(ul)) => Some(FEstimator::new(*ul, te)?),
            _ => None,
        };
        Ok(Self {
            plant: Plant::new(cfg.plant.clone()),
            controller: Controller::new(cfg.controller)?,
            noise: cfg.noise.stream(),
            rows: Vec::with_capacity(cfg.grid.n_steps()),
            snapshots: Vec::new(),
            hash: cfg.hash(),
            estimator,
            k: 0,
            u_prev: 0.0,
            cfg,
        })
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn plant_mut(&mut self) -> &mut Plant {
        &mut self.plant
    }

    pub fn rows(&self) -> &[RecordRow] {
        &self.rows
    }

    pub fn is_done(&self) -> bool {
        self.k >= self.cfg.grid.n_steps()
    }

    /// Runs one sample: measure, estimate, control, record, then advance the
    /// plant (except after the last sample).
    pub fn step(&mut self) -> Result<Option<RecordRow>> {
        let n = self.cfg.grid.n_steps();
        if self.k >= n {
            return Ok(None);
        }
        let k = self.k;
        let te = self.cfg.grid.te();
        let t = self.cfg.grid.time(k);
        let r = RefSample {
            ystar: self.cfg.reference.ystar[k],
            dystar: self.cfg.reference.dystar[k],
            ddystar: self.cfg.reference.ddystar[k],
        };

        let y_true = self.plant.output();
        let y_meas = y_true + self.noise.sample();

        let f_est = match self.estimator.as_mut() {
            Some(est) => {
                let sample = EstimatorSample {
                    t,
                    y: y_meas,
                    u_prev: self.u_prev,
                    int_u: self.controller.state().int_u,
                    dystar: r.dystar,
                    e: y_meas - r.ystar,
                };
                let f = est.update(sample)?;
                Some(if f.ready { f.value } else { 0.0 })
            }
            None => None,
        };
        if let Some(f) = f_est {
            if !f.is_finite() {
                return Err(Error::NonFinite { step: k, quantity: "F estimate" });
            }
        }

        let mut u_cmd = self.controller.control(f_est.unwrap_or(0.0), r, y_meas, te);
        if let Some(ff) = &self.cfg.feedforward {
            u_cmd += flat_feedforward(r.ystar, r.ddystar, ff.m, ff.k1_hat);
        }
        if !u_cmd.is_finite() {
            return Err(Error::NonFinite { step: k, quantity: "control" });
        }
        let u_eff = match &self.cfg.fault {
            Some(f) => apply_fault(u_cmd, t, f),
            None => u_cmd,
        };

        let row = RecordRow {
            t,
            setpoint: self.cfg.reference.setpoint[k],
            y_ref: r.ystar,
            dy_ref: r.dystar,
            y_true,
            y_meas,
            u_cmd,
            u_eff,
            f_est,
            aux: self.plant.model().aux(),
        };
        self.rows.push(row);
        if let Some(stride) = self.cfg.state_stride {
            if k % stride == 0 {
                self.snapshots.push(StateSnapshot { t, state: self.plant.model().state() });
            }
        }

        self.controller.commit(u_cmd, te);
        self.u_prev = u_cmd;
        if k + 1 < n {
            self.plant.step(u_eff, te)?;
        }
        self.k += 1;
        Ok(Some(row))
    }

    pub fn finish(self) -> ClosedLoopRecord {
        ClosedLoopRecord {
            name: self.cfg.name,
            seed: self.cfg.noise.seed,
            config_hash: self.hash,
            te: self.cfg.grid.te(),
            fault: self.cfg.fault,
            rows: self.rows,
            snapshots: self.snapshots,
        }
    }
}

pub fn run_closed_loop(cfg: LoopConfig) -> Result<ClosedLoopRecord> {
    let mut sim = Simulation::new(cfg)?;
    while sim.step()?.is_some() {}
    Ok(sim.finish())
}

/// Time the error must stay inside the band to count as recovered.
pub const RECOVERY_HOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rms_error: f64,
    pub iae: f64,
    pub max_abs_error: f64,
    pub control_effort: f64,
    /// Seconds from the fault until the error re-enters the band for good;
    /// infinite if it never does. Absent without a fault.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_time: Option<f64>,
}

/// Tracking metrics of `y_true − y*` over samples with `t0 ≤ t < t1`.
pub fn compute_metrics(rec: &ClosedLoopRecord, window: (f64, f64), band: f64) -> Result<Metrics> {
    let (t0, t1) = window;
    if !(t0 < t1) {
        return Err(Error::config(format!("empty evaluation window [{t0}, {t1})")));
    }
    let eps = 1e-9 * rec.te;
    let rows: Vec<&RecordRow> =
        rec.rows.iter().filter(|r| r.t >= t0 - eps && r.t < t1 - eps).collect();
    if rows.is_empty() {
        return Err(Error::config(format!("no samples in evaluation window [{t0}, {t1})")));
    }
    let n = rows.len() as f64;
    let err = |r: &RecordRow| r.y_true - r.y_ref;
    let sq: f64 = rows.iter().map(|r| err(r).powi(2)).sum();
    let iae: f64 = rows.iter().map(|r| err(r).abs() * rec.te).sum();
    let max_abs_error = rows.iter().map(|r| err(r).abs()).fold(0.0, f64::max);
    let control_effort: f64 = rows.iter().map(|r| r.u_eff * r.u_eff * rec.te).sum();

    let recovery_time = rec.fault.map(|f| {
        let after: Vec<&RecordRow> = rec.rows.iter().filter(|r| r.t >= f.t_fault - eps).collect();
        let hold = (RECOVERY_HOLD / rec.te).round() as usize;
        // last sample outside the band; recovery starts right after it
        match after.iter().rposition(|r| err(r).abs() > band) {
            None => 0.0,
            Some(i) if after.len() - 1 - i > hold => after[i + 1].t - f.t_fault,
            Some(_) => f64::INFINITY,
        }
    });

    Ok(Metrics { rms_error: (sq / n).sqrt(), iae, max_abs_error, control_effort, recovery_time })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{IntelligentGains, IntelligentKind};
    use crate::estimation::EstimatorKind;
    use crate::plants::{CubicPlant, Oscillator};
    use crate::signals::make_reference;

    fn oscillator_ipi(duration: f64, std: f64, seed: u64) -> LoopConfig {
        let grid = TimeGrid::new(0.01, duration).unwrap();
        LoopConfig {
            name: "test".into(),
            reference: make_reference(&[(0.0, 0.0), (1.0, 1.0)], 2.0, &grid).unwrap(),
            grid,
            plant: PlantModel::Oscillator(Oscillator::new(3.0, 4.0)),
            controller: ControllerSpec::intelligent(
                IntelligentKind::PI,
                IntelligentGains::ipi(1.0, 16.0, 25.0),
            ),
            ultra_local: Some(UltraLocalConfig { window_len: 2.0, ..UltraLocalConfig::first_order(1.0) }),
            noise: NoiseSource::new(seed, std),
            fault: None,
            feedforward: None,
            state_stride: None,
        }
    }

    fn record_with_error(e: f64, te: f64, n: usize) -> ClosedLoopRecord {
        let rows = (0..n)
            .map(|k| RecordRow {
                t: k as f64 * te,
                setpoint: 1.0,
                y_ref: 1.0,
                dy_ref: 0.0,
                y_true: 1.0 + e,
                y_meas: 1.0 + e,
                u_cmd: 0.0,
                u_eff: 0.0,
                f_est: None,
                aux: None,
            })
            .collect();
        ClosedLoopRecord {
            name: "synthetic".into(),
            seed: 0,
            config_hash: String::new(),
            te,
            fault: None,
            rows,
            snapshots: Vec::new(),
        }
    }

    #[test]
    fn zero_plant_stays_at_rest() {
        let mut cfg = oscillator_ipi(2.0, 0.0, 0);
        cfg.reference = ReferenceTrajectory::constant(0.0, &cfg.grid);
        let rec = run_closed_loop(cfg).unwrap();
        assert_eq!(rec.rows.len(), 201);
        assert!(rec.rows.iter().all(|r| r.u_cmd == 0.0 && r.y_true == 0.0));
    }

    #[test]
    fn noiseless_ipi_settles_exactly() {
        let rec = run_closed_loop(oscillator_ipi(25.0, 0.0, 0)).unwrap();
        let last = rec.rows.last().unwrap();
        assert!((last.y_true - 1.0).abs() < 1e-6, "{}", last.y_true);
        let m = compute_metrics(&rec, (20.0, 25.0), 0.02).unwrap();
        assert!(m.max_abs_error < 0.02, "{m:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let a = run_closed_loop(oscillator_ipi(3.0, 0.03, 9)).unwrap();
        let b = run_closed_loop(oscillator_ipi(3.0, 0.03, 9)).unwrap();
        assert_eq!(a, b);
        let c = run_closed_loop(oscillator_ipi(3.0, 0.03, 10)).unwrap();
        assert_ne!(a.rows, c.rows);
        assert_eq!(a.config_hash, b.config_hash);
        assert_ne!(a.config_hash, c.config_hash);
    }

    #[test]
    fn future_perturbation_leaves_past_untouched() {
        let base = run_closed_loop(oscillator_ipi(3.0, 0.03, 4)).unwrap();
        let mut sim = Simulation::new(oscillator_ipi(3.0, 0.03, 4)).unwrap();
        let cut = 150;
        for _ in 0..cut {
            sim.step().unwrap();
        }
        // kick the plant state after sample `cut - 1` has been logged
        *sim.plant_mut() =
            Plant::new(PlantModel::Oscillator(Oscillator { c: 3.0, stiffness: 4.0, y: 5.0, v: -3.0 }));
        while sim.step().unwrap().is_some() {}
        let rec = sim.finish();
        assert_eq!(&rec.rows[..cut], &base.rows[..cut]);
        assert_ne!(rec.rows[cut].y_true, base.rows[cut].y_true);
    }

    #[test]
    fn u_eff_differs_only_under_fault() {
        let mut cfg = oscillator_ipi(4.0, 0.0, 0);
        cfg.fault = Some(FaultSpec { t_fault: 2.0, gain_factor: 0.5 });
        let rec = run_closed_loop(cfg).unwrap();
        for r in &rec.rows {
            if r.t < 2.0 - 1e-9 {
                assert_eq!(r.u_cmd, r.u_eff);
            } else {
                assert_eq!(r.u_eff, 0.5 * r.u_cmd);
            }
        }
    }

    #[test]
    fn f_cancellation_on_cubic_plant() {
        // ẏ = y + u³ around y ≈ 0.25, iP with K_P = 2 and the one-step
        // estimator: e must decay like exp(−K_P t)
        let kp = 2.0;
        let grid = TimeGrid::new(0.01, 6.0).unwrap();
        let mut ul = UltraLocalConfig::first_order(1.0);
        ul.estimator = EstimatorKind::OneStep;
        let y0 = 0.2;
        let cfg = LoopConfig {
            name: "cubic".into(),
            reference: make_reference(&[(0.0, y0), (1.0, 0.3)], 0.0, &grid).unwrap(),
            grid,
            plant: PlantModel::NonlinearCubic(CubicPlant { y: y0 }),
            controller: ControllerSpec::intelligent(IntelligentKind::P, IntelligentGains::ip(1.0, kp)),
            ultra_local: Some(ul),
            noise: NoiseSource::silent(),
            fault: None,
            feedforward: None,
            state_stride: None,
        };
        let rec = run_closed_loop(cfg).unwrap();
        let e_at = |t: f64| {
            let r = rec.rows.iter().find(|r| (r.t - t).abs() < 1e-9).unwrap();
            r.y_true - r.y_ref
        };
        let (e1, e2) = (e_at(1.2), e_at(2.2));
        let rate = (e1 / e2).ln();
        assert!((rate / kp - 1.0).abs() < 0.2, "rate {rate}, e1 {e1}, e2 {e2}");
    }

    #[test]
    fn metrics_constant_error() {
        let rec = record_with_error(0.1, 0.01, 1000);
        let m = compute_metrics(&rec, (0.0, 10.0), 0.05).unwrap();
        assert!((m.rms_error - 0.1).abs() < 1e-12);
        assert!((m.iae - 1.0).abs() < 1e-9);
        assert!((m.max_abs_error - 0.1).abs() < 1e-12);
        assert_eq!(m.recovery_time, None);
        let perfect = record_with_error(0.0, 0.01, 100);
        let p = compute_metrics(&perfect, (0.0, 1.0), 0.05).unwrap();
        assert_eq!((p.rms_error, p.iae, p.max_abs_error), (0.0, 0.0, 0.0));
        assert!(compute_metrics(&rec, (3.0, 3.0), 0.05).is_err());
        assert!(compute_metrics(&rec, (20.0, 30.0), 0.05).is_err());
    }

    #[test]
    fn recovery_time_after_fault() {
        let te = 0.01;
        let mut rec = record_with_error(0.0, te, 1000);
        rec.fault = Some(FaultSpec { t_fault: 2.0, gain_factor: 0.5 });
        for r in rec.rows.iter_mut().filter(|r| r.t >= 2.0 && r.t < 3.0) {
            r.y_true += 0.5;
        }
        let m = compute_metrics(&rec, (0.0, 10.0), 0.1).unwrap();
        assert!((m.recovery_time.unwrap() - 1.0).abs() < 1e-9, "{m:?}");
        // never recovers
        for r in rec.rows.iter_mut().filter(|r| r.t >= 9.8) {
            r.y_true += 0.5;
        }
        let m = compute_metrics(&rec, (0.0, 10.0), 0.1).unwrap();
        assert_eq!(m.recovery_time, Some(f64::INFINITY));
    }

    #[test]
    fn rejects_inconsistent_configs() {
        let mut cfg = oscillator_ipi(1.0, 0.0, 0);
        cfg.ultra_local = Some(UltraLocalConfig::second_order(1.0));
        assert!(Simulation::new(cfg).is_err());
        let mut cfg = oscillator_ipi(1.0, 0.0, 0);
        cfg.ultra_local = None;
        assert!(Simulation::new(cfg).is_err());
        let mut cfg = oscillator_ipi(1.0, 0.0, 0);
        cfg.ultra_local = Some(UltraLocalConfig::first_order(2.0));
        assert!(Simulation::new(cfg).is_err());
    }
}
