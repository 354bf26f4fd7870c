//! Full runs with spin-up and reporting windows, written to CSV and JSON.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::materials::MaterialKind;

use super::ignition::{IgnitionDetector, IgnitionEvent};
use super::sim::{Simulation, StepRecord};

/// Where and when an extreme value occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extreme {
    pub value: f64,
    pub patch_id: usize,
    pub time_s: f64,
}

impl Extreme {
    fn update_min(slot: &mut Option<Extreme>, value: f64, patch_id: usize, time_s: f64) {
        if slot.is_none_or(|e| value < e.value) {
            *slot = Some(Extreme { value, patch_id, time_s });
        }
    }

    fn update_max(slot: &mut Option<Extreme>, value: f64, patch_id: usize, time_s: f64) {
        if slot.is_none_or(|e| value > e.value) {
            *slot = Some(Extreme { value, patch_id, time_s });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub patches: usize,
    pub steps: usize,
    pub dt_s: f64,
    pub spinup_days: f64,
    pub report_days: f64,
    /// Rows per patch in `patch_series.csv`.
    pub report_rows: usize,
    pub t_surf_min_k: Option<Extreme>,
    pub t_surf_max_k: Option<Extreme>,
    /// Column-mean fuel moisture extremes over fuel patches.
    pub m_f_min: Option<Extreme>,
    pub m_f_max: Option<Extreme>,
    /// Lowest column-mean fuel moisture per reporting day.
    pub daily_min_moisture: Vec<f64>,
    pub ignition: Vec<IgnitionEvent>,
    /// Largest surface-balance residual over all solves, W.
    pub max_residual_w: f64,
    /// True when the run ended early because every target ignited.
    pub stopped_at_ignition: bool,
}

fn multiple_of(x: f64, step: f64) -> bool {
    let r = x / step;
    (r - r.round()).abs() < 1e-6
}

/// Writes the per-step tables while the run advances.
struct Writers {
    series: Option<BufWriter<File>>,
    facets: BufWriter<File>,
    facet_of: Vec<usize>,
    facet_names: Vec<String>,
    snapshots: Option<PathBuf>,
    series_path: PathBuf,
    facets_path: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

impl Writers {
    fn new(sim: &Simulation, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let series_path = dir.join("patch_series.csv");
        let facets_path = dir.join("facet_series.csv");
        let series = if sim.cfg.outputs.series {
            let mut w = create(&series_path)?;
            writeln!(w, "time_s,patch_id,T_surf_K,m_f_top,shaded,R_sw_net_W,R_lw_net_W,Q_H_W,Q_G_W,Q_E_W,Q_F_W")
                .map_err(|e| Error::io(&series_path, e))?;
            Some(w)
        } else {
            None
        };
        let mut names: BTreeMap<String, usize> = BTreeMap::new();
        let keys: Vec<String> = sim
            .domain
            .patches
            .iter()
            .map(|p| p.group.clone().unwrap_or_else(|| sim.domain.material_of(p.id).name.clone()))
            .collect();
        for k in &keys {
            let next = names.len();
            names.entry(k.clone()).or_insert(next);
        }
        let mut facet_names = vec![String::new(); names.len()];
        for (k, &i) in &names {
            facet_names[i] = k.clone();
        }
        let facet_of = keys.iter().map(|k| names[k]).collect();
        let mut facets = create(&facets_path)?;
        writeln!(facets, "time_s,facet,area_m2,T_surf_mean_K,m_f_mean").map_err(|e| Error::io(&facets_path, e))?;
        let snapshots = match sim.cfg.outputs.snapshot_every_s {
            Some(_) => {
                let d = dir.join("snapshots");
                std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
                Some(d)
            }
            None => None,
        };
        Ok(Self {
            series,
            facets,
            facet_of,
            facet_names,
            snapshots,
            series_path,
            facets_path,
        })
    }

    fn row(&mut self, sim: &Simulation, r: &StepRecord) -> Result<()> {
        if let Some(w) = self.series.as_mut() {
            let io = |e| Error::io(&self.series_path, e);
            for (i, p) in r.patches.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{:.4},{:.6},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                    r.time,
                    i,
                    p.t_surf,
                    p.m_f_top,
                    u8::from(p.shaded),
                    p.sw_net,
                    p.lw_net,
                    p.q_h,
                    p.q_g,
                    p.q_e,
                    p.q_f
                )
                .map_err(io)?;
            }
        }
        let nf = self.facet_names.len();
        let (mut area, mut t, mut m) = (vec![0.0; nf], vec![0.0; nf], vec![0.0; nf]);
        for (i, p) in r.patches.iter().enumerate() {
            let f = self.facet_of[i];
            let a = sim.domain.patches[i].area;
            area[f] += a;
            t[f] += a * p.t_surf;
            m[f] += a * p.m_f_mean;
        }
        let io = |e| Error::io(&self.facets_path, e);
        for f in 0..nf {
            writeln!(
                self.facets,
                "{},{},{:.6},{:.4},{:.6}",
                r.time,
                self.facet_names[f],
                area[f],
                t[f] / area[f],
                m[f] / area[f]
            )
            .map_err(io)?;
        }
        Ok(())
    }

    fn snapshot(&self, sim: &Simulation, r: &StepRecord) -> Result<()> {
        let Some(dir) = &self.snapshots else {
            return Ok(());
        };
        let path = dir.join(format!("t{}.csv", r.time.round() as i64));
        let mut w = create(&path)?;
        let io = |e| Error::io(&path, e);
        writeln!(w, "patch_id,cx,cy,cz,T_surf_K,m_f_mean").map_err(io)?;
        for (i, p) in r.patches.iter().enumerate() {
            let c = sim.domain.patches[i].centroid;
            writeln!(w, "{},{:.6},{:.6},{:.6},{:.4},{:.6}", i, c.x, c.y, c.z, p.t_surf, p.m_f_mean).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    fn finish(mut self) -> Result<()> {
        if let Some(w) = self.series.as_mut() {
            w.flush().map_err(|e| Error::io(&self.series_path, e))?;
        }
        self.facets.flush().map_err(|e| Error::io(&self.facets_path, e))
    }
}

/// Runs spin-up then reporting days and writes `patch_series.csv`,
/// `facet_series.csv`, optional snapshots and `summary.json` into the
/// configured output directory. Everything is checked before the first step.
pub fn run_simulation(cfg: &ScenarioConfig) -> Result<RunSummary> {
    let mut sim = Simulation::new(cfg)?;
    let dir = cfg.outputs.dir.clone();
    let mut out = Writers::new(&sim, &dir)?;
    let summary = drive(&mut sim, Some(&mut out))?;
    out.finish()?;
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

/// Steps a prepared simulation through the whole run, collecting the summary.
fn drive(sim: &mut Simulation, mut out: Option<&mut Writers>) -> Result<RunSummary> {
    let cfg = sim.cfg.clone();
    let dt = sim.dt;
    let spinup = cfg.time.spinup_seconds();
    let cadence = cfg.outputs.cadence_s.unwrap_or(dt);
    let fuel: Vec<bool> = (0..sim.domain.len()).map(|i| sim.domain.material_of(i).kind == MaterialKind::Fuel).collect();
    let mut det = IgnitionDetector::new(&sim.domain, &cfg.ignition);
    let t0 = sim.t_surf.clone();
    det.observe(0.0, |i| t0[i]);
    let mut s = RunSummary {
        patches: sim.domain.len(),
        steps: 0,
        dt_s: dt,
        spinup_days: cfg.time.spinup_days,
        report_days: cfg.time.report_days,
        report_rows: 0,
        t_surf_min_k: None,
        t_surf_max_k: None,
        m_f_min: None,
        m_f_max: None,
        daily_min_moisture: Vec::new(),
        ignition: Vec::new(),
        max_residual_w: 0.0,
        stopped_at_ignition: false,
    };
    let mut daily: BTreeMap<usize, f64> = BTreeMap::new();
    for _ in 0..sim.total_steps() {
        let r = sim.step()?;
        s.steps += 1;
        det.observe_records(r.time, &r.patches);
        for p in &r.patches {
            s.max_residual_w = s.max_residual_w.max(p.residual.abs());
        }
        let since = r.time - spinup;
        if since > 1e-9 {
            for (i, p) in r.patches.iter().enumerate() {
                Extreme::update_min(&mut s.t_surf_min_k, p.t_surf, i, r.time);
                Extreme::update_max(&mut s.t_surf_max_k, p.t_surf, i, r.time);
                if fuel[i] {
                    Extreme::update_min(&mut s.m_f_min, p.m_f_mean, i, r.time);
                    Extreme::update_max(&mut s.m_f_max, p.m_f_mean, i, r.time);
                    let day = ((since - 1e-9) / 86400.0).floor() as usize;
                    let e = daily.entry(day).or_insert(f64::INFINITY);
                    *e = e.min(p.m_f_mean);
                }
            }
            if multiple_of(since, cadence) {
                s.report_rows += 1;
                if let Some(w) = out.as_deref_mut() {
                    w.row(sim, &r)?;
                }
            }
            if let (Some(every), Some(w)) = (cfg.outputs.snapshot_every_s, out.as_deref()) {
                if multiple_of(since, every) {
                    w.snapshot(sim, &r)?;
                }
            }
        }
        if cfg.ignition.stop_when_ignited && det.all_ignited() {
            s.stopped_at_ignition = true;
            break;
        }
    }
    s.daily_min_moisture = daily.into_values().collect();
    s.ignition = det.events();
    Ok(s)
}

/// Runs without writing anything; used by tests and the scans.
pub fn run_summary(cfg: &ScenarioConfig) -> Result<RunSummary> {
    let mut sim = Simulation::new(cfg)?;
    drive(&mut sim, None)
}
