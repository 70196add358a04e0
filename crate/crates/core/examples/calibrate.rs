//! Prints simulated aggregates for the shipped line config and scenarios
//! next to their calibration targets, with residuals. Run with:
//!
//! ```text
//! cargo run -p leanline-core --example calibrate
//! ```

use leanline_core::line::load_config_file;
use leanline_core::metrics::FactorMode;
use leanline_core::report::build_report;
use leanline_core::scenario::{apply_delta, load_delta_file};
use leanline_core::sim::{run_replications, SimTime};
use std::path::Path;

fn show(label: &str, value: f64, target: f64) {
    let residual = 100.0 * (value - target) / target;
    println!("{label:<26} {value:>10.4}  target {target:>8.2}  residual {residual:>+6.2}%");
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let config = load_config_file(&root.join("solar_line.json")).expect("config loads");
    let horizon = SimTime::from_minutes(config.horizon());
    let results = run_replications(&config, 42, 30, horizon).expect("simulation runs");
    let report = build_report(&config, &results, FactorMode::Supplied, 42, 0.95).expect("report");

    println!("== baseline ==");
    show("va_time_min", report.times_min.va.mean, 36.7);
    show("nva_time_min", report.times_min.nva.mean, 50.34);
    show("waiting_time_min", report.times_min.wait.mean, 230.55);
    show("transfer_time_min", report.times_min.transfer.mean, 12.0);
    show("lead_time_min", report.times_min.lead.mean, 329.1);
    show("total_energy_kwh", report.energy.total_kwh, 86.5);
    show("takt_min", report.metrics.takt_min, 168.0);

    for (file, lead_target) in [("scenario1.json", 158.23), ("scenario2.json", 292.0)] {
        let delta = load_delta_file(&root.join(file)).expect("delta loads");
        let edited = apply_delta(&config, &delta).expect("delta applies");
        let results = run_replications(&edited, 42, 30, horizon).expect("simulation runs");
        let report =
            build_report(&edited, &results, FactorMode::Supplied, 42, 0.95).expect("report");
        println!("== {file} ==");
        show("lead_time_min", report.times_min.lead.mean, lead_target);
        show("va_time_min", report.times_min.va.mean, report.times_min.va.mean);
    }
}
