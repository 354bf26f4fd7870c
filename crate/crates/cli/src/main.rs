//! `fuelsim` command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDateTime;
use clap::{Parser, Subcommand};

use fuelsim_core::driver::{flux_sweep, run_simulation, sensitivity_scan, write_sensitivity_csv, write_sweep_csv, Simulation, PARAMETERS};
use fuelsim_core::{solar_position, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "fuelsim", version, about = "Surface temperature and fuel moisture of 3D scenes")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write patch_series.csv, snapshots and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `outputs.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute and write the view-factor matrix and sky view factors.
    Viewfactors {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sun azimuth and zenith for a place and local time.
    Solar {
        /// Degrees north.
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        /// Degrees west (east longitudes are negative).
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        /// Hours east of UTC, e.g. -7 for PDT.
        #[arg(long, allow_hyphen_values = true)]
        tz: f64,
        /// Local time, YYYY-MM-DDTHH:MM:SS.
        #[arg(long)]
        when: String,
    },
    /// Ignition time against imposed flux, one run per flux of `ignition.sweep`.
    Ignition {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ±20% one-at-a-time sensitivity of surface temperature and fuel moisture.
    Sensitivity {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated parameter names, or `all`.
        #[arg(long, default_value = "all")]
        params: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &Path, out: Option<PathBuf>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(o) = out {
        cfg.outputs.dir = o;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn parse_params(list: &str) -> Result<Vec<String>> {
    if list.trim() == "all" {
        return Ok(PARAMETERS.iter().map(|s| s.to_string()).collect());
    }
    let params: Vec<String> = list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if params.is_empty() {
        bail!("no sensitivity parameters given");
    }
    Ok(params)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load(&config, out)?;
            let s = run_simulation(&cfg)?;
            let range = match (s.t_surf_min_k, s.t_surf_max_k) {
                (Some(lo), Some(hi)) => format!("T_surf {:.2}..{:.2} K", lo.value, hi.value),
                _ => "no reporting rows".to_string(),
            };
            println!(
                "{} patches, {} steps; {range}; {} ignition events; outputs in {}",
                s.patches,
                s.steps,
                s.ignition.len(),
                cfg.outputs.dir.display()
            );
        }
        Command::Viewfactors { config, out } => {
            let cfg = load(&config, out)?;
            let sim = Simulation::new(&cfg)?;
            sim.vf.write_csv(&cfg.outputs.dir)?;
            let mean_sky = sim.vf.sky_vf.iter().sum::<f64>() / sim.vf.len() as f64;
            println!("{} patches, mean sky view factor {mean_sky:.4}; written to {}", sim.vf.len(), cfg.outputs.dir.display());
        }
        Command::Solar { lat, lon, tz, when } => {
            let t = NaiveDateTime::parse_from_str(&when, "%Y-%m-%dT%H:%M:%S")
                .with_context(|| format!("'{when}' is not YYYY-MM-DDTHH:MM:SS"))?;
            let (az, zen) = solar_position(lat, lon, t, tz)?;
            println!("{}", serde_json::json!({"azimuth_deg": az, "zenith_deg": zen, "elevation_deg": 90.0 - zen}));
        }
        Command::Ignition { config, out } => {
            let cfg = load(&config, out)?;
            let rows = flux_sweep(&cfg)?;
            create_dir(&cfg.outputs.dir)?;
            let path = cfg.outputs.dir.join("ignition_sweep.csv");
            write_sweep_csv(&rows, &path)?;
            for r in &rows {
                match r.t_ignition_s {
                    Some(t) => println!("{:>10.1} W/m2  {:<20} {t:.2} s", r.flux_w_m2, r.target),
                    None => println!("{:>10.1} W/m2  {:<20} no ignition", r.flux_w_m2, r.target),
                }
            }
            println!("written to {}", path.display());
        }
        Command::Sensitivity { config, params, out } => {
            let cfg = load(&config, out)?;
            let params = parse_params(&params)?;
            let rows = sensitivity_scan(&cfg, &params)?;
            create_dir(&cfg.outputs.dir)?;
            let path = cfg.outputs.dir.join("sensitivity.csv");
            write_sensitivity_csv(&rows, &path)?;
            println!("{} parameters written to {}", rows.len(), path.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            std::process::exit(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
