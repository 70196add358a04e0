//! Energy value-stream-map documents: per-station time/energy ladders,
//! aggregate lead-time and energy totals, and text/DOT renderings.

use crate::energy::EnergyLedger;
use crate::line::{Dist, LineConfig, ValueClass};
use crate::report::RunReport;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvsmError {
    #[error("report fingerprint {report} does not match config {config}")]
    ConfigReportMismatch { config: String, report: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvsmEntry {
    pub station_id: String,
    pub name: String,
    pub value_class: ValueClass,
    /// Queue wait plus service, per batch.
    pub cycle_time_min: f64,
    pub va_time_min: f64,
    pub wait_before_min: f64,
    pub power_kw: f64,
    pub energy_kwh: f64,
    pub pce_time: f64,
    pub pce_energy: f64,
}

impl EvsmEntry {
    pub fn service_min(&self) -> f64 {
        self.cycle_time_min - self.wait_before_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvsmLink {
    pub from: String,
    pub to: String,
    pub duration_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvsmTotals {
    pub lead_time_min: f64,
    pub va_min: f64,
    pub nva_min: f64,
    pub wait_min: f64,
    pub transfer_min: f64,
    pub energy: EnergyLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvsmDocument {
    pub title: String,
    pub entries: Vec<EvsmEntry>,
    pub links: Vec<EvsmLink>,
    pub totals: EvsmTotals,
    pub takt_min: f64,
}

fn duration_label(dist: &Dist) -> String {
    match dist {
        Dist::Constant(c) => format!("{c:.1} min"),
        Dist::Triangular { min, mode, max } => format!("tri({min:.1},{mode:.1},{max:.1}) min"),
        Dist::Exponential { mean } => format!("exp({mean:.1}) min"),
        Dist::TruncNormal { mean, sd, min } => format!("tnorm({mean:.1},{sd:.1},{min:.1}) min"),
    }
}

/// Build the eVSM document for a run. The report must have been produced
/// from this exact config (fingerprint check).
pub fn build_evsm(config: &LineConfig, report: &RunReport) -> Result<EvsmDocument, EvsmError> {
    let config_fp = config.fingerprint();
    if report.fingerprint != config_fp {
        return Err(EvsmError::ConfigReportMismatch {
            config: config_fp,
            report: report.fingerprint.clone(),
        });
    }
    let entries = config
        .stations
        .iter()
        .zip(&report.stations)
        .map(|(cfg, stats)| EvsmEntry {
            station_id: cfg.id.clone(),
            name: cfg.name.clone(),
            value_class: cfg.value_class,
            cycle_time_min: stats.mean_service_min + stats.mean_queue_wait,
            va_time_min: if cfg.value_class == ValueClass::VA { stats.mean_service_min } else { 0.0 },
            wait_before_min: stats.mean_queue_wait,
            power_kw: cfg.power_active_kw,
            energy_kwh: stats.mean_energy_kwh,
            pce_time: stats.pce_time,
            pce_energy: stats.pce_energy,
        })
        .collect();
    let links = config
        .transfers
        .iter()
        .map(|t| EvsmLink {
            from: t.from.clone(),
            to: t.to.clone(),
            duration_label: duration_label(&t.duration_min),
        })
        .collect();
    let t = &report.times_min;
    Ok(EvsmDocument {
        title: config.name.clone().unwrap_or_else(|| "production line".to_string()),
        entries,
        links,
        totals: EvsmTotals {
            lead_time_min: t.lead.mean,
            va_min: t.va.mean,
            nva_min: t.nva.mean,
            wait_min: t.wait.mean,
            transfer_min: t.transfer.mean,
            energy: report.energy.clone(),
        },
        takt_min: report.metrics.takt_min,
    })
}

/// Fixed-width text rendering: one row per station, a ladder line
/// alternating VA (upper) and NVA/wait (lower) durations, and a footer
/// with totals and takt. Byte-stable for identical inputs.
pub fn render_text(doc: &EvsmDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Energy Value Stream Map: {}", doc.title);
    let _ = writeln!(
        out,
        "{:<22} {:<5} {:>9} {:>8} {:>9} {:>8} {:>10} {:>7} {:>7}",
        "station", "class", "cycle", "va", "wait", "kW", "kWh/batch", "pce_t", "pce_e"
    );
    for e in &doc.entries {
        let class = match e.value_class {
            ValueClass::VA => "VA",
            ValueClass::NVA => "NVA",
        };
        let _ = writeln!(
            out,
            "{:<22} {:<5} {:>9.2} {:>8.2} {:>9.2} {:>8.2} {:>10.3} {:>7.3} {:>7.3}",
            e.name,
            class,
            e.cycle_time_min,
            e.va_time_min,
            e.wait_before_min,
            e.power_kw,
            e.energy_kwh,
            e.pce_time,
            e.pce_energy
        );
    }

    // ladder: VA durations on the upper rail, NVA service and wait below
    let mut upper = String::from("ladder VA   |");
    let mut lower = String::from("   NVA/wait |");
    for e in &doc.entries {
        let lower_min = e.service_min() - e.va_time_min + e.wait_before_min;
        let upper_cell = if e.va_time_min > 0.0 { format!("{:.1}", e.va_time_min) } else { String::new() };
        let lower_cell = if lower_min > 0.0 { format!("{lower_min:.1}") } else { String::new() };
        let _ = write!(upper, "{upper_cell:>9} |");
        let _ = write!(lower, "{lower_cell:>9} |");
    }
    let _ = writeln!(out, "{upper}");
    let _ = writeln!(out, "{lower}");

    let t = &doc.totals;
    let _ = writeln!(
        out,
        "totals: lead {:.2} min (va {:.2}, nva {:.2}, wait {:.2}, transfer {:.2})",
        t.lead_time_min, t.va_min, t.nva_min, t.wait_min, t.transfer_min
    );
    let _ = writeln!(
        out,
        "energy: total {:.2} kWh/batch (va {:.2}, nva {:.2}, transport {:.2})",
        t.energy.total_kwh, t.energy.va_kwh, t.energy.nva_kwh, t.energy.transport_kwh
    );
    if let Some(co2) = t.energy.co2e_kg {
        let _ = writeln!(out, "co2e: {co2:.2} kg/batch");
    }
    let _ = writeln!(out, "takt {:.1} min/batch", doc.takt_min);
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT digraph: one node per station labeled with cycle time, energy and
/// PCE values; edges carry transfer durations. Node order is line order.
pub fn render_dot(doc: &EvsmDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph evsm {{");
    let _ = writeln!(out, "  rankdir=LR;");
    let _ = writeln!(out, "  node [shape=box];");
    for e in &doc.entries {
        let class = match e.value_class {
            ValueClass::VA => "VA",
            ValueClass::NVA => "NVA",
        };
        let label = format!(
            "{}\\n{} cycle {:.2} min\\n{:.3} kWh\\npce t {:.3} / e {:.3}",
            dot_escape(&e.name),
            class,
            e.cycle_time_min,
            e.energy_kwh,
            e.pce_time,
            e.pce_energy
        );
        let _ = writeln!(out, "  \"{}\" [label=\"{}\"];", dot_escape(&e.station_id), label);
    }
    for link in &doc.links {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            dot_escape(&link.from),
            dot_escape(&link.to),
            dot_escape(&link.duration_label)
        );
    }
    let _ = writeln!(out, "}}");
    out
}
