//! Time stepping, outputs, ignition detection and the sensitivity scan.

mod forcing;
mod heat;
mod ignition;
mod output;
mod sensitivity;
mod sim;
mod solve;

pub use forcing::{Forcing, PatchAir, PatchForcing};
pub use heat::apply_external_heat;
pub use ignition::{flux_sweep, run_to_ignition, write_sweep_csv, IgnitionDetector, IgnitionEvent, IgnitionTarget, SweepRow};
pub use output::{run_simulation, run_summary, Extreme, RunSummary};
pub use sensitivity::{
    perturb, reporting_outputs, scaled_celsius, sensitivity_scan, write_sensitivity_csv, SensitivityRow, PARAMETERS,
    PERTURBATION,
};
pub use sim::{PatchRecord, Simulation, StepRecord, Substrate, FUEL_SOIL_DAMPING_DEPTH, MIN_WIND_HEIGHT};
pub use solve::{solve_patch_energy_balance, NEWTON_TOL_K};
