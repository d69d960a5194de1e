//! Scenario registry and runner: builds closed loops from named, overridable
//! parameter sets, runs them and writes CSV records, metrics and summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::correspondence::{verify_correspondence, CorrespondenceReport, SourceGains};
use crate::error::{Error, Result};
use crate::simulation::{compute_metrics, run_closed_loop, ClosedLoopRecord, LoopConfig, Metrics};

mod catalog;

/// Where a default value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Origin {
    /// Fixed by the benchmark problem.
    Benchmark,
    /// Picked for this implementation.
    Chosen,
    /// Replaced on the command line.
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Param {
    pub key: &'static str,
    pub value: f64,
    pub origin: Origin,
    pub note: &'static str,
}

pub(crate) fn bench(key: &'static str, value: f64, note: &'static str) -> Param {
    Param { key, value, origin: Origin::Benchmark, note }
}

pub(crate) fn chosen(key: &'static str, value: f64, note: &'static str) -> Param {
    Param { key, value, origin: Origin::Chosen, note }
}

/// Ordered parameter set of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params(Vec<Param>);

impl Params {
    pub fn new(params: Vec<Param>) -> Self {
        Self(params)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.0.iter()
    }

    pub fn find(&self, key: &str) -> Option<&Param> {
        self.0.iter().find(|p| p.key == key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.find(key).is_some()
    }

    /// Value of a key every builder declares alongside its use.
    pub fn get(&self, key: &str) -> f64 {
        match self.find(key) {
            Some(p) => p.value,
            None => panic!("scenario parameter `{key}` is not declared"),
        }
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::config(format!("override {key}={value} is not finite")));
        }
        match self.0.iter_mut().find(|p| p.key == key) {
            Some(p) => {
                p.value = value;
                p.origin = Origin::Override;
                Ok(())
            }
            None => Err(Error::config(format!("unknown parameter `{key}`"))),
        }
    }
}

/// Parses a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{s}` is not of the form key=value")))?;
    let value: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("override `{s}`: `{v}` is not a number")))?;
    Ok((k.trim().to_string(), value))
}

/// A named sub-interval reported separately (e.g. one setpoint level).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub label: String,
    pub t0: f64,
    pub t1: f64,
}

/// Loops compared within one scenario; they share grid, reference and noise.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub params: Params,
    pub loops: Vec<LoopConfig>,
    pub eval_window: (f64, f64),
    pub band: f64,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone)]
pub struct CorrespondenceConfig {
    pub name: String,
    pub seed: u64,
    pub params: Params,
    pub h: f64,
    pub alpha: f64,
    pub gains: SourceGains,
    pub n_random: usize,
}

#[derive(Debug, Clone)]
pub enum Plan {
    Loops(ScenarioConfig),
    Correspondence(CorrespondenceConfig),
}

impl Plan {
    pub fn name(&self) -> &str {
        match self {
            Plan::Loops(c) => &c.name,
            Plan::Correspondence(c) => &c.name,
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            Plan::Loops(c) => &c.params,
            Plan::Correspondence(c) => &c.params,
        }
    }
}

/// A catalog entry.
#[derive(Clone, Copy)]
pub struct ScenarioDef {
    pub name: &'static str,
    pub summary: &'static str,
    defaults: fn() -> Vec<Param>,
    build: fn(&str, &Params, u64) -> Result<Plan>,
}

impl ScenarioDef {
    pub fn defaults(&self) -> Params {
        Params::new((self.defaults)())
    }
}

pub fn catalog() -> &'static [ScenarioDef] {
    catalog::CATALOG
}

pub fn find_scenario(name: &str) -> Result<&'static ScenarioDef> {
    catalog()
        .iter()
        .find(|d| d.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// Builds a scenario from its defaults with `overrides` applied in order.
pub fn build_scenario(name: &str, seed: u64, overrides: &[(String, f64)]) -> Result<Plan> {
    let def = find_scenario(name)?;
    let mut params = def.defaults();
    for (k, v) in overrides {
        params.set(k, *v)?;
    }
    (def.build)(def.name, &params, seed)
}

pub fn list_scenarios() -> String {
    let mut s = String::new();
    for d in catalog() {
        let _ = writeln!(s, "{:<22} {}", d.name, d.summary);
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentMetrics {
    pub segment: Segment,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub record: ClosedLoopRecord,
    pub metrics: Metrics,
    pub segments: Vec<SegmentMetrics>,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Loops { config: ScenarioConfig, loops: Vec<LoopOutcome> },
    Correspondence { config: CorrespondenceConfig, report: CorrespondenceReport },
}

impl Outcome {
    /// Outcome of the loop labelled `label`.
    pub fn lp(&self, label: &str) -> Option<&LoopOutcome> {
        match self {
            Outcome::Loops { loops, .. } => loops.iter().find(|l| l.record.name == label),
            Outcome::Correspondence { .. } => None,
        }
    }
}

fn run_loop(cfg: &ScenarioConfig, lc: &LoopConfig) -> Result<LoopOutcome> {
    let record = run_closed_loop(lc.clone())?;
    let metrics = compute_metrics(&record, cfg.eval_window, cfg.band)?;
    let segments = cfg
        .segments
        .iter()
        .map(|s| {
            Ok(SegmentMetrics {
                segment: s.clone(),
                metrics: compute_metrics(&record, (s.t0, s.t1), cfg.band)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoopOutcome { record, metrics, segments })
}

/// Runs every loop of a plan in parallel, in memory.
pub fn run_plan(plan: Plan) -> Result<Outcome> {
    match plan {
        Plan::Loops(config) => {
            let loops = config
                .loops
                .par_iter()
                .map(|lc| run_loop(&config, lc))
                .collect::<Result<Vec<_>>>()?;
            Ok(Outcome::Loops { config, loops })
        }
        Plan::Correspondence(config) => {
            let report =
                verify_correspondence(config.h, config.alpha, config.gains, config.n_random, config.seed)?;
            Ok(Outcome::Correspondence { config, report })
        }
    }
}

/// Builds, runs and writes a scenario into `out_dir/<name>/`.
pub fn run_scenario(
    name: &str,
    seed: u64,
    overrides: &[(String, f64)],
    out_dir: &Path,
) -> Result<(Outcome, Vec<PathBuf>)> {
    let outcome = run_plan(build_scenario(name, seed, overrides)?)?;
    let files = write_outcome(&outcome, &out_dir.join(name))?;
    Ok((outcome, files))
}

/// Writes `contents` to a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub const CSV_HEADER: [&str; 10] =
    ["t", "setpoint", "y_ref", "dy_ref", "y_true", "y_meas", "u_cmd", "u_eff", "F_est", "aux"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn record_csv(rec: &ClosedLoopRecord) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &rec.rows {
        w.write_record([
            r.t.to_string(),
            r.setpoint.to_string(),
            r.y_ref.to_string(),
            r.dy_ref.to_string(),
            r.y_true.to_string(),
            r.y_meas.to_string(),
            r.u_cmd.to_string(),
            r.u_eff.to_string(),
            opt(r.f_est),
            opt(r.aux),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Long-format dump of recorded state snapshots as `t,x,w`.
pub fn field_csv(rec: &ClosedLoopRecord, abscissae: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "x", "w"])?;
    for s in &rec.snapshots {
        for (x, v) in abscissae.iter().zip(&s.state) {
            w.write_record([s.t.to_string(), x.to_string(), v.to_string()])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn params_table(params: &Params) -> String {
    let mut s = String::new();
    for p in params.iter() {
        let origin = match p.origin {
            Origin::Benchmark => "benchmark",
            Origin::Chosen => "chosen",
            Origin::Override => "override",
        };
        let _ = writeln!(s, "  {:<16} {:>12} {:<9} {}", p.key, p.value, origin, p.note);
    }
    s
}

fn fmt_metrics(m: &Metrics) -> String {
    let mut s = format!(
        "rms={:.6} iae={:.6} max={:.6} effort={:.4}",
        m.rms_error, m.iae, m.max_abs_error, m.control_effort
    );
    if let Some(r) = m.recovery_time {
        let _ = write!(s, " recovery={r:.3}");
    }
    s
}

pub fn summary_text(outcome: &Outcome) -> String {
    let mut s = String::new();
    match outcome {
        Outcome::Loops { config, loops } => {
            let _ = writeln!(s, "scenario {} (seed {})", config.name, config.seed);
            let _ = writeln!(s, "parameters:");
            s.push_str(&params_table(&config.params));
            let (t0, t1) = config.eval_window;
            let _ = writeln!(s, "metrics over [{t0}, {t1}) s, band {}:", config.band);
            for l in loops {
                let _ = writeln!(s, "  {:<6} {}", l.record.name, fmt_metrics(&l.metrics));
            }
            if loops.len() > 1 {
                let _ = writeln!(s, "comparisons (rms ratio):");
                for (i, a) in loops.iter().enumerate() {
                    for b in &loops[i + 1..] {
                        let ratio = a.metrics.rms_error / b.metrics.rms_error;
                        let _ = writeln!(s, "  {}/{} = {:.4}", a.record.name, b.record.name, ratio);
                    }
                }
            }
            if !config.segments.is_empty() {
                let _ = writeln!(s, "segments:");
                for l in loops {
                    for sm in &l.segments {
                        let _ = writeln!(
                            s,
                            "  {:<6} {:<14} [{}, {}) {}",
                            l.record.name,
                            sm.segment.label,
                            sm.segment.t0,
                            sm.segment.t1,
                            fmt_metrics(&sm.metrics)
                        );
                    }
                }
            }
        }
        Outcome::Correspondence { config, report } => {
            let _ = writeln!(s, "scenario {} (seed {})", config.name, config.seed);
            let _ = writeln!(s, "parameters:");
            s.push_str(&params_table(&config.params));
            let _ = write!(s, "{report}");
            let _ = writeln!(s, "max relative deviation {:.3e}", report.max_rel());
        }
    }
    s
}

#[derive(Serialize)]
struct SegmentJson<'a> {
    label: &'a str,
    t0: f64,
    t1: f64,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

pub fn metrics_json(outcome: &Outcome) -> Result<String> {
    let value = match outcome {
        Outcome::Loops { loops, .. } => {
            let mut map = BTreeMap::new();
            for l in loops {
                map.insert(l.record.name.clone(), serde_json::to_value(l.metrics)?);
            }
            serde_json::to_value(map)?
        }
        Outcome::Correspondence { report, .. } => serde_json::to_value(report)?,
    };
    Ok(serde_json::to_string_pretty(&value)?)
}

fn segments_json(loops: &[LoopOutcome]) -> Result<String> {
    let mut map = BTreeMap::new();
    for l in loops {
        let segs: Vec<SegmentJson> = l
            .segments
            .iter()
            .map(|s| SegmentJson {
                label: &s.segment.label,
                t0: s.segment.t0,
                t1: s.segment.t1,
                metrics: &s.metrics,
            })
            .collect();
        map.insert(l.record.name.clone(), segs);
    }
    Ok(serde_json::to_string_pretty(&map)?)
}

/// Writes all artifacts of an outcome into `dir`, returning their paths.
pub fn write_outcome(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    if let Outcome::Loops { config, loops } = outcome {
        for (l, lc) in loops.iter().zip(&config.loops) {
            files.push((dir.join(format!("{}.csv", l.record.name)), record_csv(&l.record)?));
            if !l.record.snapshots.is_empty() {
                let xs = match &lc.plant {
                    crate::plants::PlantModel::Heat(rod) => rod.abscissae().collect(),
                    _ => (0..l.record.snapshots[0].state.len()).map(|i| i as f64).collect::<Vec<_>>(),
                };
                let name = format!("field_{}.csv", l.record.name);
                files.push((dir.join(name), field_csv(&l.record, &xs)?));
            }
        }
        if !config.segments.is_empty() {
            files.push((dir.join("segments.json"), segments_json(loops)?.into_bytes()));
        }
    }
    files.push((dir.join("metrics.json"), metrics_json(outcome)?.into_bytes()));
    files.push((dir.join("summary.txt"), summary_text(outcome).into_bytes()));
    files
        .par_iter()
        .map(|(p, bytes)| write_atomic(p, bytes))
        .collect::<Result<Vec<_>>>()?;
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
