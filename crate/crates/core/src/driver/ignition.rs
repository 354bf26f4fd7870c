//! First-crossing ignition detection and the imposed-flux sweep.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{HeatSource, IgnitionAggregation, IgnitionConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::materials::AssembledDomain;

use super::sim::{PatchRecord, Simulation};

/// A patch or a whole object (all patches of one material) with its
/// ignition temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct IgnitionTarget {
    pub name: String,
    pub patches: Vec<usize>,
    /// K
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IgnitionEvent {
    pub target: String,
    /// Seconds from the run start.
    pub t_ignition_s: f64,
}

/// Tracks the first upward crossing of each target's threshold, with
/// linear interpolation inside the step.
#[derive(Debug, Clone)]
pub struct IgnitionDetector {
    pub targets: Vec<IgnitionTarget>,
    areas: Vec<f64>,
    prev: Vec<Option<(f64, f64)>>,
    events: Vec<Option<f64>>,
}

impl IgnitionDetector {
    /// Targets are the materials with a threshold (from the config, else
    /// the material's own ignition temperature).
    pub fn new(domain: &AssembledDomain, cfg: &IgnitionConfig) -> Self {
        let mut targets = Vec::new();
        for (mi, m) in domain.materials.iter().enumerate() {
            let Some(threshold) = cfg.thresholds.get(&m.name).copied().or(m.ignition_temperature) else {
                continue;
            };
            let members: Vec<usize> = domain.patches.iter().filter(|p| p.material == Some(mi)).map(|p| p.id).collect();
            match cfg.aggregation {
                IgnitionAggregation::Object if !members.is_empty() => targets.push(IgnitionTarget {
                    name: m.name.clone(),
                    patches: members,
                    threshold,
                }),
                IgnitionAggregation::Object => {}
                IgnitionAggregation::Patch => targets.extend(members.into_iter().map(|i| IgnitionTarget {
                    name: format!("{}:{i}", m.name),
                    patches: vec![i],
                    threshold,
                })),
            }
        }
        let n = targets.len();
        Self {
            targets,
            areas: domain.patches.iter().map(|p| p.area).collect(),
            prev: vec![None; n],
            events: vec![None; n],
        }
    }

    fn value(&self, k: usize, metric: &impl Fn(usize) -> f64) -> f64 {
        let t = &self.targets[k];
        let (mut s, mut a) = (0.0, 0.0);
        for &i in &t.patches {
            s += metric(i) * self.areas[i];
            a += self.areas[i];
        }
        s / a
    }

    /// Records the metric at time `t`; `metric(i)` is the value of patch `i`.
    pub fn observe(&mut self, t: f64, metric: impl Fn(usize) -> f64) {
        for k in 0..self.targets.len() {
            let v = self.value(k, &metric);
            let thr = self.targets[k].threshold;
            if self.events[k].is_none() {
                match self.prev[k] {
                    Some((t0, v0)) if v0 < thr && v >= thr => {
                        self.events[k] = Some(t0 + (t - t0) * (thr - v0) / (v - v0));
                    }
                    None if v >= thr => self.events[k] = Some(t),
                    _ => {}
                }
            }
            self.prev[k] = Some((t, v));
        }
    }

    pub fn observe_records(&mut self, t: f64, records: &[PatchRecord]) {
        self.observe(t, |i| records[i].metric);
    }

    pub fn all_ignited(&self) -> bool {
        !self.events.is_empty() && self.events.iter().all(Option::is_some)
    }

    /// Ignition time per target, `None` when it never crossed.
    pub fn times(&self) -> Vec<(String, Option<f64>)> {
        self.targets.iter().zip(&self.events).map(|(t, e)| (t.name.clone(), *e)).collect()
    }

    pub fn events(&self) -> Vec<IgnitionEvent> {
        self.times()
            .into_iter()
            .filter_map(|(target, t)| t.map(|t_ignition_s| IgnitionEvent { target, t_ignition_s }))
            .collect()
    }
}

/// Runs a scenario to the end (or to ignition of every target when the
/// config asks for it) and returns the detector.
pub fn run_to_ignition(sim: &mut Simulation) -> Result<IgnitionDetector> {
    let mut det = IgnitionDetector::new(&sim.domain, &sim.cfg.ignition);
    let t0: Vec<f64> = sim.t_surf.clone();
    det.observe(0.0, |i| t0[i]);
    for _ in 0..sim.total_steps() {
        let r = sim.step()?;
        det.observe_records(r.time, &r.patches);
        if sim.cfg.ignition.stop_when_ignited && det.all_ignited() {
            break;
        }
    }
    Ok(det)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub flux_w_m2: f64,
    pub target: String,
    pub t_ignition_s: Option<f64>,
}

/// One run per flux of `ignition.sweep`, each with that flux added to the
/// selected patches from time zero. Runs are independent and go in parallel.
pub fn flux_sweep(cfg: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    let sweep = cfg
        .ignition
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("ignition.sweep is not set".into()))?;
    let base = Simulation::new(cfg)?;
    let vf = Arc::clone(&base.vf);
    drop(base);
    let runs: Vec<Result<Vec<SweepRow>>> = sweep
        .fluxes_w_m2
        .par_iter()
        .map(|&flux| {
            let mut c = cfg.clone();
            c.heat_sources.push(HeatSource {
                select: sweep.select.clone(),
                start_s: 0.0,
                end_s: f64::INFINITY,
                flux_w_m2: flux,
            });
            c.ignition.stop_when_ignited = true;
            let mut sim = Simulation::with_view_factors(&c, Some(Arc::clone(&vf)))?;
            let det = run_to_ignition(&mut sim)?;
            Ok(det
                .times()
                .into_iter()
                .map(|(target, t)| SweepRow {
                    flux_w_m2: flux,
                    target,
                    t_ignition_s: t,
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in runs {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut text = String::from("flux_w_m2,target,t_ignition_s\n");
    for r in rows {
        let t = r.t_ignition_s.map(|t| format!("{t:.3}")).unwrap_or_default();
        text += &format!("{},{},{}\n", r.flux_w_m2, r.target, t);
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::tests::MINIMAL;

    fn detector(threshold: f64) -> IgnitionDetector {
        let mut cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        cfg.ignition.thresholds.insert("slab".into(), threshold);
        cfg.ignition.aggregation = IgnitionAggregation::Object;
        let sim = Simulation::new(&cfg).unwrap();
        IgnitionDetector::new(&sim.domain, &cfg.ignition)
    }

    #[test]
    fn interpolated_first_crossing_only() {
        let mut d = detector(400.0);
        assert_eq!(d.targets.len(), 1);
        d.observe(0.0, |_| 300.0);
        d.observe(10.0, |_| 390.0);
        d.observe(20.0, |_| 410.0);
        d.observe(30.0, |_| 380.0);
        d.observe(40.0, |_| 500.0);
        assert_eq!(d.events(), vec![IgnitionEvent {
            target: "slab".into(),
            t_ignition_s: 15.0
        }]);
        assert!(d.all_ignited());
    }

    #[test]
    fn no_crossing_no_event() {
        let mut d = detector(549.0);
        for k in 0..10 {
            d.observe(k as f64, |_| 300.0 + k as f64);
        }
        assert!(d.events().is_empty());
        assert!(!d.all_ignited());
    }

    #[test]
    fn per_patch_targets() {
        let mut cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        cfg.ignition.thresholds.insert("slab".into(), 400.0);
        let sim = Simulation::new(&cfg).unwrap();
        let mut d = IgnitionDetector::new(&sim.domain, &cfg.ignition);
        assert_eq!(d.targets.len(), 2);
        d.observe(0.0, |_| 300.0);
        d.observe(1.0, |i| if i == 0 { 500.0 } else { 300.0 });
        let ev = d.events();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].target, "slab:0");
        assert!((ev[0].t_ignition_s - 0.5).abs() < 1e-12);
    }
}
