//! What-if engine: declarative edit deltas over a base line config,
//! paired-seed simulation of both states, and improvement tables.

use crate::line::{
    validate, ConfigError, Dist, LineConfig, Station, SuppliedFactors, TransferLink, ValueClass,
};
use crate::metrics::FactorMode;
use crate::report::{build_report, ReportError, RunReport};
use crate::sim::{run_replications, SimError, SimTime};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown station `{0}`")]
    UnknownStation(String),
    #[error("invalid merge: {0}")]
    InvalidMerge(String),
    #[error("edited config fails validation: {0}")]
    ValidationFailed(String),
    #[error("cannot splice transfers around `{0}`: {1}")]
    InvalidRemoval(String, String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{side} simulation failed: {source}")]
    Simulation {
        side: &'static str,
        #[source]
        source: SimError,
    },
    #[error("{side} report failed: {source}")]
    Report {
        side: &'static str,
        #[source]
        source: ReportError,
    },
    #[error("zero baseline value for `{0}`")]
    ZeroBaseline(String),
}

/// One declarative edit. Serialized with an `op` discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Edit {
    /// Replace a run of adjacent stations by one explicit merged station.
    MergeStations { ids: Vec<String>, merged: Station },
    /// Drop a station; interior removals need an explicit splice link.
    RemoveStation {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        splice_transfer: Option<TransferLink>,
    },
    SetServiceTime { id: String, service_time: Dist },
    SetPerModuleTime { id: String, minutes: f64 },
    SetPower { id: String, active_kw: f64, idle_kw: f64 },
    SetValueClass { id: String, value_class: ValueClass },
    SetFactors { factors: SuppliedFactors },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDelta {
    pub name: String,
    pub edits: Vec<Edit>,
}

pub fn load_delta(document: &str) -> Result<ScenarioDelta, ConfigError> {
    serde_json::from_str(document).map_err(|e| {
        if e.classify() == serde_json::error::Category::Data {
            ConfigError::Schema { field: "<delta>".into(), message: e.to_string() }
        } else {
            ConfigError::Parse(e.to_string())
        }
    })
}

pub fn load_delta_file(path: &std::path::Path) -> Result<ScenarioDelta, ConfigError> {
    load_delta(&std::fs::read_to_string(path)?)
}

fn find_station(config: &LineConfig, id: &str) -> Result<usize, ScenarioError> {
    config.station_index(id).ok_or_else(|| ScenarioError::UnknownStation(id.to_string()))
}

fn apply_edit(config: &mut LineConfig, edit: &Edit) -> Result<(), ScenarioError> {
    match edit {
        Edit::MergeStations { ids, merged } => {
            if ids.len() < 2 {
                return Err(ScenarioError::InvalidMerge("need at least two station ids".into()));
            }
            let first = find_station(config, &ids[0])?;
            for (offset, id) in ids.iter().enumerate() {
                let idx = find_station(config, id)?;
                if idx != first + offset {
                    return Err(ScenarioError::InvalidMerge(format!(
                        "stations {ids:?} are not adjacent in line order"
                    )));
                }
            }
            let last = first + ids.len() - 1;
            let first_id = config.stations[first].id.clone();
            let last_id = config.stations[last].id.clone();
            // rewire boundary links, drop the interior ones
            config.transfers.retain(|t| {
                !(ids.contains(&t.from) && ids.contains(&t.to))
            });
            for t in &mut config.transfers {
                if t.to == first_id {
                    t.to = merged.id.clone();
                }
                if t.from == last_id {
                    t.from = merged.id.clone();
                }
            }
            config.stations.splice(first..=last, [merged.clone()]);
        }
        Edit::RemoveStation { id, splice_transfer } => {
            let idx = find_station(config, id)?;
            let interior = idx > 0 && idx + 1 < config.stations.len();
            let prev = idx.checked_sub(1).map(|i| config.stations[i].id.clone());
            let next = config.stations.get(idx + 1).map(|s| s.id.clone());
            config.stations.remove(idx);
            config.transfers.retain(|t| t.from != *id && t.to != *id);
            if interior {
                let splice = splice_transfer.as_ref().ok_or_else(|| {
                    ScenarioError::InvalidRemoval(id.clone(), "interior removal needs a splice link".into())
                })?;
                if Some(&splice.from) != prev.as_ref() || Some(&splice.to) != next.as_ref() {
                    return Err(ScenarioError::InvalidRemoval(
                        id.clone(),
                        format!("splice must connect {prev:?} -> {next:?}"),
                    ));
                }
                config.transfers.push(splice.clone());
            }
        }
        Edit::SetServiceTime { id, service_time } => {
            let idx = find_station(config, id)?;
            config.stations[idx].service_time = service_time.clone();
            config.stations[idx].per_module_time_min = None;
        }
        Edit::SetPerModuleTime { id, minutes } => {
            let idx = find_station(config, id)?;
            config.stations[idx].per_module_time_min = Some(*minutes);
        }
        Edit::SetPower { id, active_kw, idle_kw } => {
            let idx = find_station(config, id)?;
            config.stations[idx].power_active_kw = *active_kw;
            config.stations[idx].power_idle_kw = *idle_kw;
        }
        Edit::SetValueClass { id, value_class } => {
            let idx = find_station(config, id)?;
            config.stations[idx].value_class = *value_class;
        }
        Edit::SetFactors { factors } => {
            config.supplied_factors = Some(*factors);
        }
    }
    Ok(())
}

/// Apply every edit in order to a copy of `base`. The result validates;
/// the base is unchanged.
pub fn apply_delta(base: &LineConfig, delta: &ScenarioDelta) -> Result<LineConfig, ScenarioError> {
    let mut config = base.clone();
    if config.name.is_some() || !delta.name.is_empty() {
        config.name = Some(match &config.name {
            Some(base_name) if !delta.name.is_empty() => format!("{base_name} / {}", delta.name),
            _ => delta.name.clone(),
        });
    }
    for edit in &delta.edits {
        apply_edit(&mut config, edit)?;
    }
    let violations = validate(&config);
    if !violations.is_empty() {
        return Err(ScenarioError::ValidationFailed(
            violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        ));
    }
    Ok(config)
}

/// Signed improvement rate (current - scenario) / current; negative means
/// the quantity worsened.
pub fn improvement_rate(current: f64, scenario: f64) -> Result<f64, ScenarioError> {
    if current == 0.0 {
        return Err(ScenarioError::ZeroBaseline("current".into()));
    }
    Ok((current - scenario) / current)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub parameter: String,
    pub scenario_value: f64,
    pub current_value: f64,
    /// Signed fraction; `None` when the baseline is zero.
    pub improvement_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub scenario: String,
    pub replications: u64,
    pub seed: u64,
    pub factor_mode: FactorMode,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, parameter: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.parameter == parameter)
    }
}

fn push_row(rows: &mut Vec<ComparisonRow>, parameter: &str, current: f64, scenario: f64) {
    rows.push(ComparisonRow {
        parameter: parameter.to_string(),
        scenario_value: scenario,
        current_value: current,
        improvement_rate: improvement_rate(current, scenario).ok(),
    });
}

fn table_from_reports(
    delta_name: &str,
    current: &RunReport,
    scenario: &RunReport,
    reps: u64,
    seed: u64,
    mode: FactorMode,
) -> ComparisonTable {
    let mut rows = Vec::new();
    let (ct, st) = (&current.times_min, &scenario.times_min);
    push_row(&mut rows, "va_time_min", ct.va.mean, st.va.mean);
    push_row(&mut rows, "nva_time_min", ct.nva.mean, st.nva.mean);
    push_row(&mut rows, "waiting_time_min", ct.wait.mean, st.wait.mean);
    push_row(&mut rows, "transfer_time_min", ct.transfer.mean, st.transfer.mean);
    push_row(&mut rows, "va_energy_kwh", current.energy.va_kwh, scenario.energy.va_kwh);
    push_row(&mut rows, "nva_energy_kwh", current.energy.nva_kwh, scenario.energy.nva_kwh);
    push_row(
        &mut rows,
        "transport_energy_kwh",
        current.energy.transport_kwh,
        scenario.energy.transport_kwh,
    );
    push_row(&mut rows, "lead_time_min", ct.lead.mean, st.lead.mean);
    push_row(&mut rows, "oeee", current.metrics.oeee, scenario.metrics.oeee);
    ComparisonTable {
        scenario: delta_name.to_string(),
        replications: reps,
        seed,
        factor_mode: mode,
        rows,
    }
}

/// Run base and scenario campaigns with paired seeds (common random
/// numbers) and assemble the improvement table.
pub fn compare(
    base: &LineConfig,
    delta: &ScenarioDelta,
    reps: u64,
    seed: u64,
    mode: FactorMode,
) -> Result<(ComparisonTable, RunReport, RunReport), ScenarioError> {
    let scenario_config = apply_delta(base, delta)?;
    let sim = |cfg: &LineConfig, side: &'static str| {
        run_replications(cfg, seed, reps, SimTime::from_minutes(cfg.horizon()))
            .map_err(|source| ScenarioError::Simulation { side, source })
    };
    let base_results = sim(base, "current")?;
    let scenario_results = sim(&scenario_config, "scenario")?;
    let report = |cfg: &LineConfig, results, side: &'static str| {
        build_report(cfg, results, mode, seed, 0.95)
            .map_err(|source| ScenarioError::Report { side, source })
    };
    let current_report = report(base, &base_results, "current")?;
    let scenario_report = report(&scenario_config, &scenario_results, "scenario")?;
    let table =
        table_from_reports(&delta.name, &current_report, &scenario_report, reps, seed, mode);
    Ok((table, current_report, scenario_report))
}

/// Aligned text rendering of a comparison table.
pub fn render_table(table: &ComparisonTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", table.scenario);
    let _ = writeln!(
        out,
        "{:<22} {:>14} {:>14} {:>14}",
        "parameter", "scenario", "current", "improvement %"
    );
    for row in &table.rows {
        let rate = row
            .improvement_rate
            .map(|r| format!("{:.2}", r * 100.0))
            .unwrap_or_else(|| "n/a".to_string());
        let _ = writeln!(
            out,
            "{:<22} {:>14.4} {:>14.4} {:>14}",
            row.parameter, row.scenario_value, row.current_value, rate
        );
    }
    out
}
