//! Built-in scenarios. Every numeric default is a [`Param`] tagged with its
//! origin.

use super::{bench, chosen, CorrespondenceConfig, Param, Params, Plan, ScenarioConfig, ScenarioDef, Segment};
use crate::controllers::{ClassicGains, ControllerSpec, IntelligentGains, IntelligentKind};
use crate::correspondence::SourceGains;
use crate::error::{Error, Result};
use crate::estimation::{EstimatorKind, Order, UltraLocalConfig};
use crate::plants::{
    CubicPlant, DelayParams, DelayPlant, DuffingSpring, FaultSpec, FlatFeedforward, HeatRod,
    HeatSource, LtiPlant, Oscillator, PlantModel, TransferFunction, TustinFriction,
};
use crate::signals::{make_reference, NoiseSource, ReferenceTrajectory, TimeGrid};
use crate::simulation::LoopConfig;

pub(super) static CATALOG: &[ScenarioDef] = &[
    ScenarioDef {
        name: "oscillator-ipi",
        summary: "iPI on the damped oscillator (c = 3)",
        defaults: || oscillator_params(3.0),
        build: build_oscillator,
    },
    ScenarioDef {
        name: "oscillator-undamped",
        summary: "same first-order iPI on the undamped oscillator (c = 0)",
        defaults: || oscillator_params(0.0),
        build: build_oscillator,
    },
    ScenarioDef {
        name: "spring-pid",
        summary: "PID with flat feedforward on the Duffing spring",
        defaults: || spring_params(SpringCtl::Pid),
        build: build_spring,
    },
    ScenarioDef {
        name: "spring-ipid",
        summary: "second-order iPID on the Duffing spring",
        defaults: || spring_params(SpringCtl::Ipid),
        build: build_spring,
    },
    ScenarioDef {
        name: "spring-ip",
        summary: "first-order iP on the Duffing spring",
        defaults: || spring_params(SpringCtl::Ip),
        build: build_spring,
    },
    ScenarioDef {
        name: "lti-nominal",
        summary: "PID vs iP on (s+2)^2/(s+1)^3",
        defaults: || lti_params(1.0, false),
        build: build_lti,
    },
    ScenarioDef {
        name: "lti-aging",
        summary: "same controllers on the aged plant (s+2)^2/(s+2.2)^3",
        defaults: || lti_params(2.2, false),
        build: build_lti,
    },
    ScenarioDef {
        name: "lti-fault",
        summary: "nominal plant, actuator loses half its gain at t = 8 s",
        defaults: || lti_params(1.0, true),
        build: build_lti,
    },
    ScenarioDef {
        name: "nonlinear-cubic",
        summary: "PID vs iP on y' = y + u^3 over a staircase of levels",
        defaults: cubic_params,
        build: build_cubic,
    },
    ScenarioDef {
        name: "delay-varying",
        summary: "iP on y' = y + 5 y(t - tau) + u with a random-walk delay",
        defaults: delay_params,
        build: build_delay,
    },
    ScenarioDef {
        name: "heat-1",
        summary: "iP on the heat rod, x_c = L/3, f = 0, c = 0",
        defaults: || heat_params(1.0 / 3.0, 0.0),
        build: build_heat,
    },
    ScenarioDef {
        name: "heat-2",
        summary: "iP on the heat rod, x_c = L/3, f = 0, c = 0.5",
        defaults: || heat_params(1.0 / 3.0, 0.5),
        build: build_heat,
    },
    ScenarioDef {
        name: "heat-3",
        summary: "iP on the heat rod, x_c = 2L/3, f = 0, c = 0",
        defaults: || heat_params(2.0 / 3.0, 0.0),
        build: build_heat,
    },
    ScenarioDef {
        name: "heat-4",
        summary: "iP on the heat rod, x_c = 2L/3, f = w^3, c = 0",
        defaults: || heat_params(2.0 / 3.0, 0.0),
        build: build_heat,
    },
    ScenarioDef {
        name: "nonminphase-igpi",
        summary: "iGPI on (s-1)/((s+1)(s+2))",
        defaults: nmp_params,
        build: build_nmp,
    },
    ScenarioDef {
        name: "correspondence-check",
        summary: "classic/intelligent sampled gain correspondence on random errors",
        defaults: correspondence_params,
        build: build_correspondence,
    },
];

const REF_T: [&str; 5] = ["", "ref.t1", "ref.t2", "ref.t3", "ref.t4"];
const REF_Y: [&str; 5] = ["ref.y0", "ref.y1", "ref.y2", "ref.y3", "ref.y4"];

fn common(duration: f64, noise: f64, t0: f64) -> Vec<Param> {
    vec![
        bench("te", 0.01, "sampling period"),
        chosen("duration", duration, "simulation horizon"),
        bench("noise.std", noise, "additive Gaussian output noise"),
        chosen("metrics.t0", t0, "metrics skip two estimation windows"),
        chosen("metrics.band", 0.05, "recovery band"),
    ]
}

/// `ref.y0` then `(ref.t_i, ref.y_i)` steps joined by ramps of `ref.ramp`.
fn reference_params(y0: Option<f64>, steps: &[(f64, f64)], ramp: f64) -> Vec<Param> {
    let mut v = Vec::new();
    if let Some(y0) = y0 {
        v.push(chosen(REF_Y[0], y0, "initial reference level"));
    }
    for (i, &(t, y)) in steps.iter().enumerate() {
        v.push(chosen(REF_T[i + 1], t, "setpoint switch time"));
        v.push(chosen(REF_Y[i + 1], y, "setpoint level"));
    }
    v.push(chosen("ref.ramp", ramp, "quintic transition length"));
    v
}

fn setpoints(p: &Params, y0: f64) -> Vec<(f64, f64)> {
    let mut sp = vec![(0.0, y0)];
    for i in 1..REF_T.len() {
        if p.contains(REF_T[i]) {
            sp.push((p.get(REF_T[i]), p.get(REF_Y[i])));
        }
    }
    sp
}

fn grid(p: &Params) -> Result<TimeGrid> {
    TimeGrid::new(p.get("te"), p.get("duration"))
}

fn reference(p: &Params, g: &TimeGrid, y0: f64) -> Result<ReferenceTrajectory> {
    make_reference(&setpoints(p, y0), p.get("ref.ramp"), g)
}

/// One segment per setpoint level, from its switch time to the next one.
fn level_segments(p: &Params, y0: f64) -> Vec<Segment> {
    let sp = setpoints(p, y0);
    let end = p.get("duration");
    sp.iter()
        .enumerate()
        .map(|(i, &(t, y))| Segment {
            label: format!("level {}", (y * 1e4).round() / 1e4),
            t0: t.max(p.get("metrics.t0")),
            t1: sp.get(i + 1).map_or(end, |n| n.0),
        })
        .filter(|s| s.t0 < s.t1)
        .collect()
}

struct Shared {
    grid: TimeGrid,
    reference: ReferenceTrajectory,
    noise: NoiseSource,
}

impl Shared {
    fn new(p: &Params, seed: u64, y0: f64) -> Result<Self> {
        let grid = grid(p)?;
        let reference = reference(p, &grid, y0)?;
        Ok(Self { grid, reference, noise: NoiseSource::new(seed, p.get("noise.std")) })
    }

    fn lp(
        &self,
        name: &str,
        plant: PlantModel,
        controller: ControllerSpec,
        ultra_local: Option<UltraLocalConfig>,
    ) -> LoopConfig {
        LoopConfig {
            name: name.to_string(),
            grid: self.grid,
            plant,
            controller,
            ultra_local,
            reference: self.reference.clone(),
            noise: self.noise,
            fault: None,
            feedforward: None,
            state_stride: None,
        }
    }
}

fn scenario(name: &str, p: &Params, seed: u64, loops: Vec<LoopConfig>, segments: Vec<Segment>) -> Plan {
    Plan::Loops(ScenarioConfig {
        name: name.to_string(),
        seed,
        params: p.clone(),
        loops,
        eval_window: (p.get("metrics.t0"), p.get("duration") + p.get("te")),
        band: p.get("metrics.band"),
        segments,
    })
}

fn first_order(p: &Params, prefix: &str, kind: EstimatorKind) -> UltraLocalConfig {
    UltraLocalConfig {
        estimator: kind,
        window_len: p.get("est.window"),
        ..UltraLocalConfig::first_order(p.get(&format!("{prefix}.alpha")))
    }
}

fn ip_spec(p: &Params, prefix: &str) -> ControllerSpec {
    ControllerSpec::intelligent(
        IntelligentKind::P,
        IntelligentGains::ip(p.get(&format!("{prefix}.alpha")), p.get(&format!("{prefix}.kp"))),
    )
}

fn pid_spec(p: &Params) -> ControllerSpec {
    ControllerSpec::classic_pid(ClassicGains::pid(
        p.get("pid.kp"),
        p.get("pid.ki"),
        p.get("pid.kd"),
        p.get("deriv.tau"),
    ))
}

fn check_positive(p: &Params, keys: &[&str]) -> Result<()> {
    for k in keys {
        if !(p.get(k) > 0.0) {
            return Err(Error::config(format!("{k} must be > 0")));
        }
    }
    Ok(())
}

fn count(p: &Params, key: &str) -> Result<usize> {
    let v = p.get(key);
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::config(format!("{key} must be a positive integer, got {v}")))
    }
}

fn oscillator_params(c: f64) -> Vec<Param> {
    let mut v = common(15.0, 0.03, 4.0);
    v.extend([
        bench("plant.c", c, "viscous damping"),
        bench("plant.k", 4.0, "stiffness"),
        bench("ipi.alpha", 1.0, "first-order model gain"),
        bench("ipi.kp", 16.0, "proportional gain"),
        bench("ipi.ki", 25.0, "integral gain"),
        chosen("est.window", 2.0, "shorter windows destabilize the fast iPI"),
    ]);
    v.extend(reference_params(Some(0.0), &[(1.0, 1.0)], 2.0));
    v
}

fn build_oscillator(name: &str, p: &Params, seed: u64) -> Result<Plan> {
    let sh = Shared::new(p, seed, p.get("ref.y0"))?;
    let plant = PlantModel::Oscillator(Oscillator::new(p.get("plant.c"), p.get("plant.k")));
    let ctl = ControllerSpec::intelligent(
        IntelligentKind::PI,
        IntelligentGains::ipi(p.get("ipi.alpha"), p.get("ipi.kp"), p.get("ipi.ki")),
    );
    let ul = first_order(p, "ipi", EstimatorKind::OpenLoopIntegral);
    Ok(scenario(name, p, seed, vec![sh.lp("ipi", plant, ctl, Some(ul))], vec![]))
}

#[derive(Clone, Copy, PartialEq)]
enum SpringCtl {
    Pid,
    Ipid,
    Ip,
}

fn spring_params(ctl: SpringCtl) -> Vec<Param> {
    let mut v = common(15.0, 0.01, 0.2);
    v.extend([
        bench("plant.m", 0.5, "mass"),
        bench("plant.k1", 3.0, "linear stiffness"),
        bench("plant.k3", 2.0, "cubic stiffness"),
        bench("plant.d", 1.0, "viscous friction"),
        chosen("friction.fc", 0.25, "Tustin Coulomb level"),
        chosen("friction.fs", 0.5, "Tustin static level"),
        chosen("friction.vs", 0.1, "Tustin Stribeck velocity"),
        chosen("deriv.tau", 0.05, "derivative low-pass time constant"),
    ]);
    match ctl {
        SpringCtl::Pid => v.extend([
            bench("pid.kp", 1.375, "(s+1.5)^3 placement on the nominal model"),
            bench("pid.ki", 1.6875, "(s+1.5)^3 placement on the nominal model"),
            bench("pid.kd", 2.25, "(s+1.5)^3 placement on the nominal model"),
            bench("ff.m", 0.5, "feedforward mass"),
            bench("ff.k1", 2.0, "feedforward stiffness estimate"),
        ]),
        SpringCtl::Ipid => v.extend([
            chosen("ipid.alpha", 2.0, "1/m so that alpha u matches the acceleration"),
            chosen("ipid.kp", 6.75, "error dynamics (s+1.5)^3"),
            chosen("ipid.ki", 3.375, "error dynamics (s+1.5)^3"),
            chosen("ipid.kd", 4.5, "error dynamics (s+1.5)^3"),
            chosen("est.window", 0.1, "second-order integral estimator window"),
        ]),
        SpringCtl::Ip => v.extend([
            chosen("ip.alpha", 1.0, "first-order model gain"),
            bench("ip.kp", 1.5, "error-dynamics pole at -1.5"),
            chosen("est.window", 0.1, "estimation window"),
        ]),
    }
    v.extend(reference_params(Some(0.0), &[(1.0, 1.0), (7.0, 0.3)], 3.0));
    v
}

fn build_spring(name: &str, p: &Params, seed: u64) -> Result<Plan> {
    let sh = Shared::new(p, seed, p.get("ref.y0"))?;
    let friction = TustinFriction {
        fc: p.get("friction.fc"),
        fs: p.get("friction.fs"),
        vs: p.get("friction.vs"),
    };
    friction.validate()?;
    check_positive(p, &["plant.m"])?;
    let plant = PlantModel::Duffing(DuffingSpring {
        m: p.get("plant.m"),
        k1: p.get("plant.k1"),
        k3: p.get("plant.k3"),
        d: p.get("plant.d"),
        friction,
        y: p.get("ref.y0"),
        v: 0.0,
    });
    let lc = if p.contains("pid.kp") {
        let mut lc = sh.lp("pid", plant, pid_spec(p), None);
        lc.feedforward = Some(FlatFeedforward { m: p.get("ff.m"), k1_hat: p.get("ff.k1") });
        lc
    } else if p.contains("ipid.kp") {
        let alpha = p.get("ipid.alpha");
        let ctl = ControllerSpec::Intelligent {
            kind: IntelligentKind::PID,
            gains: IntelligentGains::ipid(alpha, p.get("ipid.kp"), p.get("ipid.ki"), p.get("ipid.kd")),
            deriv_filter_tau: p.get("deriv.tau"),
        };
        let ul = UltraLocalConfig {
            nu: Order::Second,
            estimator: EstimatorKind::OpenLoopIntegral,
            window_len: p.get("est.window"),
            ..UltraLocalConfig::second_order(alpha)
        };
        sh.lp("ipid", plant, ctl, Some(ul))
    } else {
        let ul = first_order(p, "ip", EstimatorKind::OpenLoopIntegral);
        sh.lp("ip", plant, ip_spec(p, "ip"), Some(ul))
    };
    Ok(scenario(name, p, seed, vec![lc], vec![]))
}

fn lti_params(pole: f64, fault: bool) -> Vec<Param> {
    let mut v = common(15.0, 0.03, 0.2);
    v.extend([
        bench("plant.zero", 2.0, "double zero at -zero"),
        bench("plant.pole", pole, "triple pole at -pole"),
        bench("pid.kp", 1.8177, "PID proportional gain"),
        bench("pid.ki", 0.7755, "PID integral gain"),
        bench("pid.kd", 0.1766, "PID derivative gain"),
        chosen("deriv.tau", 0.05, "derivative low-pass time constant"),
        bench("ip.alpha", 1.0, "first-order model gain"),
        bench("ip.kp", 1.8177, "iP gain equal to the PID proportional gain"),
        chosen("est.window", 0.05, "estimation window; the lag error dominates on the aged plant"),
    ]);
    if fault {
        v.extend([
            bench("fault.t", 8.0, "actuator fault time"),
            bench("fault.factor", 0.5, "actuator gain after the fault"),
        ]);
    }
    v.extend(reference_params(Some(0.0), &[(1.0, 1.0)], 2.0));
    v
}

fn build_lti(name: &str, p: &Params, seed: u64) -> Result<Plan> {
    let sh = Shared::new(p, seed, p.get("ref.y0"))?;
    let (z, a) = (p.get("plant.zero"), p.get("plant.pole"));
    let tf = TransferFunction::from_roots(1.0, &[-z, -z], &[-a, -a, -a])?;
    let plant = PlantModel::Lti(LtiPlant::new(tf));
    let fault = if p.contains("fault.t") {
        let f = FaultSpec { t_fault: p.get("fault.t"), gain_factor: p.get("fault.factor") };
        f.validate()?;
        Some(f)
    } else {
        None
    };
    let mut plan = scenario(name, p, seed, lti_loops(&sh, p, plant, fault), vec![]);
    if let Plan::Loops(c) = &mut plan {
        // the band is a fraction of the final setpoint
        let last = sh.reference.setpoint.last().copied().unwrap_or(1.0);
        c.band = p.get("metrics.band") * last.abs();
    }
    Ok(plan)
}

fn lti_loops(sh: &Shared, p: &Params, plant: PlantModel, fault: Option<FaultSpec>) -> Vec<LoopConfig> {
    let mut pid = sh.lp("pid", plant.clone(), pid_spec(p), None);
    let ul = first_order(p, "ip", EstimatorKind::OpenLoopIntegral);
    let mut ip = sh.lp("ip", plant, ip_spec(p, "ip"), Some(ul));
    pid.fault = fault;
    ip.fault = fault;
    vec![pid, ip]
}

fn cubic_params() -> Vec<Param> {
    let mut v = common(25.0, 0.03, 0.2);
    v.extend([
        bench("pid.kp", 2.2727, "PID proportional gain"),
        bench("pid.ki", 1.8769, "PID integral gain"),
        bench("pid.kd", 0.1750, "PID derivative gain"),
        chosen("deriv.tau", 0.05, "derivative low-pass time constant"),
        chosen("ip.alpha", 1.0, "first-order model gain"),
        bench("ip.kp", 2.2727, "iP gain equal to the PID proportional gain"),
        chosen("est.window", 0.1, "estimation window"),
    ]);
    v.extend(reference_params(
        Some(0.0),
        &[(1.0, 0.5), (7.0, 0.2), (13.0, 0.05), (19.0, 0.01)],
        1.0,
    ));
    v
}

fn build_cubic(name: &str, p: &Params, seed: u64) -> Result<Plan> {
    let y0 = p.get("ref.y0");
    let sh = Shared::new(p, seed, y0)?;
    let plant = PlantModel::NonlinearCubic(CubicPlant { y: y0 });
    let ul = first_order(p, "ip", EstimatorKind::OpenLoopIntegral);
    let loops = vec![
        sh.lp("pid", plant.clone(), pid_spec(p), None),
        sh.lp("ip", plant, ip_spec(p, "ip"), Some(ul)),
    ];
    // levels after the first switch, each measured once its ramp is over
    let ramp = p.get("ref.ramp");
    let segments = level_segments(p, y0)
        .into_iter()
        .skip(1)
        .map(|s| Segment { t0: s.t0 + ramp, ..s })
        .filter(|s| s.t0 < s.t1)
        .collect();
    Ok(scenario(name, p, seed, loops, segments))
}

fn delay_params() -> Vec<Param> {
    let mut v = common(60.0, 0.03, 0.2);
    v.extend([
        bench("plant.a", 1.0, "coefficient of y(t)"),
        bench("plant.b", 5.0, "coefficient of y(t - tau)"),
        bench("tau.0", 2.5, "initial delay"),
        bench("tau.max", 5.0, "delay upper clamp"),
        chosen("ip.alpha", 1.0, "first-order model gain"),
        bench("ip.kp", 1.0, "iP gain"),
        chosen("est.window", 0.1, "estimation window"),
    ]);
    v.extend(reference_params(Some(0.0), &[(1.0, 1.0), (30.0, 0.5)], 2.0));
    v
}

/// Tag of the delay random walk substream.
pub const DELAY_WALK_STREAM: u64 = 1;

fn build_delay(name: &str, p: &Params, seed: u64) -> Result<Plan> {
    let y0 = p.get("ref.y0");
    let sh = Shared::new(p, seed, y0)?;
    let params = DelayParams {
        a: p.get("plant.a"),
        b: p.get("plant.b"),
        tau0: p.get("tau.0"),
        tau_max: p.get("tau.max"),
        walk: Some(sh.noise.substream(DELAY_WALK_STREAM, 1.0)),
    };
    let plant = PlantModel::Delay(DelayPlant::new(params, y0, p.get("te"))?);
    let ul = first_order(p, "ip", EstimatorKind::OpenLoopIntegral);
    Ok(scenario(name, p, seed, vec![sh.lp("ip", plant, ip_spec(p, "ip"), Some(ul))], vec![]))
}

fn heat_params(xc: f64, c: f64) -> Vec<Param> {
    let mut v = common(15.0, 0.01, 0.2);
    v.extend([
        chosen("heat.length", 1.0, "rod length, zero of sin(pi x / L) at both ends"),
        chosen("heat.nx", 101.0, "grid points including both ends"),
        bench("heat.xc", xc, "measurement abscissa as a fraction of L"),
        bench("heat.c", c, "fixed temperature at x = 0"),
        chosen("heat.u0", 0.0, "initial boundary input"),
        bench("ip.alpha", 10.0, "first-order model gain"),
        bench("ip.kp", 10.0, "iP gain"),
        chosen("est.window", 0.1, "estimation window"),
        chosen("field.stride", 10.0, "steps between field snapshots"),
    ]);
    v.extend(reference_params(None, &[(1.0, 1.0), (8.0, 0.5)], 2.0));
    v
}

fn build_heat(name: &str, p: &Params, seed: u64) -> Result<Plan> {
    let source = if name == "heat-4" { HeatSource::Cubic } else { HeatSource::None };
    let length = p.get("heat.length");
    let rod = HeatRod::new(
        length,
        count(p, "heat.nx")?,
        p.get("heat.c"),
        p.get("heat.xc") * length,
        source,
        p.get("heat.u0"),
    )?;
    // the reference starts from the initial temperature at x_c
    let y0 = rod.output();
    let sh = Shared::new(p, seed, y0)?;
    let ul = first_order(p, "ip", EstimatorKind::OpenLoopIntegral);
    let mut lc = sh.lp("ip", PlantModel::Heat(rod), ip_spec(p, "ip"), Some(ul));
    lc.state_stride = Some(count(p, "field.stride")?);
    Ok(scenario(name, p, seed, vec![lc], level_segments(p, y0)))
}

fn nmp_params() -> Vec<Param> {
    let mut v = common(15.0, 0.03, 0.2);
    v.extend([
        bench("igpi.alpha", 10.0, "model input gain"),
        bench("igpi.beta", -10.0, "model gain on the input integral"),
        bench("igpi.kp", 3.0, "proportional gain"),
        bench("igpi.ki", 5.0, "integral gain"),
        bench("igpi.kii", 5.0, "double-integral gain"),
        chosen("est.window", 0.1, "estimation window"),
    ]);
    v.extend(reference_params(Some(0.0), &[(1.0, 1.0)], 2.0));
    v
}

fn build_nmp(name: &str, p: &Params, seed: u64) -> Result<Plan> {
    let sh = Shared::new(p, seed, p.get("ref.y0"))?;
    let tf = TransferFunction::from_roots(1.0, &[1.0], &[-1.0, -2.0])?;
    let (alpha, beta) = (p.get("igpi.alpha"), p.get("igpi.beta"));
    let gains =
        IntelligentGains::igpi(alpha, beta, p.get("igpi.kp"), p.get("igpi.ki"), p.get("igpi.kii"));
    let ctl = ControllerSpec::intelligent(IntelligentKind::GPI, gains);
    let ul = UltraLocalConfig { beta, ..first_order(p, "igpi", EstimatorKind::OpenLoopIntegral) };
    let lc = sh.lp("igpi", PlantModel::Lti(LtiPlant::new(tf)), ctl, Some(ul));
    Ok(scenario(name, p, seed, vec![lc], vec![]))
}

fn correspondence_params() -> Vec<Param> {
    vec![
        bench("h", 0.01, "sampling period"),
        chosen("alpha", 1.0, "model input gain"),
        chosen("kp", 2.0, "intelligent proportional gain"),
        chosen("ki", 1.0, "intelligent integral gain"),
        chosen("kd", 0.5, "intelligent derivative gain"),
        chosen("n", 10_000.0, "number of random error sequences"),
    ]
}

fn build_correspondence(name: &str, p: &Params, seed: u64) -> Result<Plan> {
    Ok(Plan::Correspondence(CorrespondenceConfig {
        name: name.to_string(),
        seed,
        params: p.clone(),
        h: p.get("h"),
        alpha: p.get("alpha"),
        gains: SourceGains { kp: p.get("kp"), ki: p.get("ki"), kd: p.get("kd") },
        n_random: count(p, "n")?,
    }))
}
