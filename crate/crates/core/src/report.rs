//! Cross-replication aggregation into a machine-readable run report:
//! time summaries in minutes and hours, the energy ledger, per-station
//! statistics and the metrics block.

use crate::energy::{build_ledger, va_energy_share, EnergyLedger, TimeClass};
use crate::line::{LineConfig, ValueClass};
use crate::metrics::{
    classify_oeee, compute_oee, compute_oeee, derive_factors, rank_bottlenecks, round_pct,
    summarize, DerivedInputs, FactorMode, MetricsError, OeeeClass, OeeeFactors, StatSummary,
    StationStats,
};
use crate::sim::ReplicationResult;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no batch completed in any replication")]
    NoCompletedBatches,
    #[error("factor mode `supplied` requires `supplied_factors` in the config")]
    MissingSuppliedFactors,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSummaries {
    pub va: StatSummary,
    pub nva: StatSummary,
    pub wait: StatSummary,
    pub transfer: StatSummary,
    pub lead: StatSummary,
}

impl TimeSummaries {
    fn scale(&self, k: f64) -> TimeSummaries {
        TimeSummaries {
            va: self.va.scale(k),
            nva: self.nva.scale(k),
            wait: self.wait.scale(k),
            transfer: self.transfer.scale(k),
            lead: self.lead.scale(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorsOut {
    pub mode: FactorMode,
    pub a: f64,
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceEntry {
    pub station_id: String,
    pub pce_time: f64,
    pub pce_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub oee: f64,
    pub oeee: f64,
    pub oeee_pct_rounded: f64,
    pub oeee_class: OeeeClass,
    pub factors: FactorsOut,
    pub pce_per_station: Vec<PceEntry>,
    pub bottleneck_ranking: Vec<String>,
    pub takt_min: f64,
    pub lead_time_min: f64,
    pub takt_gap_min: f64,
}

/// Per-run aggregate report. Times are reported per completed batch, both
/// in minutes and hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub fingerprint: String,
    pub seed: u64,
    pub replications: usize,
    pub completed_mean: f64,
    pub in_flight_mean: f64,
    pub times_min: TimeSummaries,
    pub times_hours: TimeSummaries,
    pub energy: EnergyLedger,
    pub stations: Vec<StationStats>,
    pub metrics: MetricsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
}

impl RunReport {
    /// Re-check report invariants offline; returns one message per breach.
    pub fn verify(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let t = &self.times_min;
        let sum = t.va.mean + t.nva.mean + t.wait.mean + t.transfer.mean;
        if (sum - t.lead.mean).abs() > 1e-9 * t.lead.mean.abs().max(1.0) {
            problems.push(format!("bucket means {sum} do not sum to lead {}", t.lead.mean));
        }
        let e = &self.energy;
        let etotal = e.va_kwh + e.nva_kwh + e.transport_kwh + e.idle_kwh.unwrap_or(0.0);
        if (etotal - e.total_kwh).abs() > 1e-9 * e.total_kwh.abs().max(1.0) {
            problems.push(format!("energy buckets {etotal} do not sum to total {}", e.total_kwh));
        }
        if (self.metrics.takt_gap_min - (self.metrics.lead_time_min - self.metrics.takt_min)).abs()
            > 1e-9
        {
            problems.push("takt gap is not lead minus takt".into());
        }
        problems
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

struct RepAggregate {
    va: f64,
    nva: f64,
    wait: f64,
    transfer: f64,
    lead: f64,
    ledger: EnergyLedger,
    completed: f64,
    in_flight: f64,
    // entity-level extremes per bucket: (va, nva, wait, transfer, lead)
    minima: [f64; 5],
    maxima: [f64; 5],
    station_service: Vec<f64>,
    station_wait: Vec<f64>,
    station_energy: Vec<f64>,
    station_busy: Vec<f64>,
    station_util: Vec<f64>,
}

fn aggregate_replication(
    config: &LineConfig,
    result: &ReplicationResult,
) -> Option<RepAggregate> {
    let completed: Vec<_> = result
        .completed
        .iter()
        .filter(|e| e.created_at.minutes() >= config.warmup_min)
        .collect();
    if completed.is_empty() {
        return None;
    }
    let n = completed.len() as f64;

    let mut minima = [f64::INFINITY; 5];
    let mut maxima = [f64::NEG_INFINITY; 5];
    let mut sums = [0.0f64; 5];
    let mut all_records = Vec::new();
    for e in &completed {
        let vals = [e.va_min, e.nva_min, e.wait_min, e.transfer_min, e.flow_time_min()];
        for (i, v) in vals.iter().enumerate() {
            sums[i] += v;
            minima[i] = minima[i].min(*v);
            maxima[i] = maxima[i].max(*v);
        }
        all_records.extend(e.records.iter().cloned());
    }
    let ledger = build_ledger(&all_records, config.emission_factor_kg_per_kwh, config.idle_bucket)
        .scale(1.0 / n);

    let n_stations = config.stations.len();
    let mut station_service = vec![0.0; n_stations];
    let mut station_wait = vec![0.0; n_stations];
    let mut station_energy = vec![0.0; n_stations];
    for record in &all_records {
        if let Some(idx) = config.station_index(&record.location) {
            match record.time_class {
                TimeClass::VA | TimeClass::NVA => {
                    station_service[idx] += record.duration_min();
                    station_energy[idx] += record.energy_kwh;
                }
                TimeClass::Wait => {
                    station_wait[idx] += record.duration_min();
                    station_energy[idx] += record.energy_kwh;
                }
                TimeClass::Transfer => {}
            }
        }
    }
    for v in station_service.iter_mut().chain(&mut station_wait).chain(&mut station_energy) {
        *v /= n;
    }

    let span = result.span.minutes().max(f64::MIN_POSITIVE);
    let station_busy: Vec<f64> = result.stations.iter().map(|t| t.busy_min).collect();
    let station_util: Vec<f64> = config
        .stations
        .iter()
        .zip(&result.stations)
        .map(|(cfg, t)| (t.busy_min / (cfg.servers as f64 * span)).clamp(0.0, 1.0))
        .collect();

    Some(RepAggregate {
        va: sums[0] / n,
        nva: sums[1] / n,
        wait: sums[2] / n,
        transfer: sums[3] / n,
        lead: sums[4] / n,
        ledger,
        completed: n,
        in_flight: result.in_flight as f64,
        minima,
        maxima,
        station_service,
        station_wait,
        station_energy,
        station_busy,
        station_util,
    })
}

fn summarize_bucket(
    per_rep: &[f64],
    minima: f64,
    maxima: f64,
    confidence: f64,
) -> Result<StatSummary, MetricsError> {
    let mut s = summarize(per_rep, confidence)?;
    s.min_value = Some(minima);
    s.max_value = Some(maxima);
    Ok(s)
}

/// Assemble the aggregate report for a finished campaign.
pub fn build_report(
    config: &LineConfig,
    results: &[ReplicationResult],
    mode: FactorMode,
    seed: u64,
    confidence: f64,
) -> Result<RunReport, ReportError> {
    let aggregates: Vec<RepAggregate> =
        results.iter().filter_map(|r| aggregate_replication(config, r)).collect();
    if aggregates.len() != results.len() || aggregates.is_empty() {
        return Err(ReportError::NoCompletedBatches);
    }

    let collect = |f: fn(&RepAggregate) -> f64| -> Vec<f64> { aggregates.iter().map(f).collect() };
    let bucket_min = |i: usize| aggregates.iter().map(|a| a.minima[i]).fold(f64::INFINITY, f64::min);
    let bucket_max =
        |i: usize| aggregates.iter().map(|a| a.maxima[i]).fold(f64::NEG_INFINITY, f64::max);

    let times_min = TimeSummaries {
        va: summarize_bucket(&collect(|a| a.va), bucket_min(0), bucket_max(0), confidence)?,
        nva: summarize_bucket(&collect(|a| a.nva), bucket_min(1), bucket_max(1), confidence)?,
        wait: summarize_bucket(&collect(|a| a.wait), bucket_min(2), bucket_max(2), confidence)?,
        transfer: summarize_bucket(&collect(|a| a.transfer), bucket_min(3), bucket_max(3), confidence)?,
        lead: summarize_bucket(&collect(|a| a.lead), bucket_min(4), bucket_max(4), confidence)?,
    };
    let times_hours = times_min.scale(1.0 / 60.0);

    let n_reps = aggregates.len() as f64;
    let energy = EnergyLedger {
        va_kwh: mean(&collect(|a| a.ledger.va_kwh)),
        nva_kwh: mean(&collect(|a| a.ledger.nva_kwh)),
        transport_kwh: mean(&collect(|a| a.ledger.transport_kwh)),
        idle_kwh: aggregates[0]
            .ledger
            .idle_kwh
            .map(|_| aggregates.iter().filter_map(|a| a.ledger.idle_kwh).sum::<f64>() / n_reps),
        total_kwh: mean(&collect(|a| a.ledger.total_kwh)),
        co2e_kg: aggregates[0]
            .ledger
            .co2e_kg
            .map(|_| aggregates.iter().filter_map(|a| a.ledger.co2e_kg).sum::<f64>() / n_reps),
    };

    let stations: Vec<StationStats> = config
        .stations
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let service = mean(&aggregates.iter().map(|a| a.station_service[i]).collect::<Vec<_>>());
            let wait = mean(&aggregates.iter().map(|a| a.station_wait[i]).collect::<Vec<_>>());
            let station_energy =
                mean(&aggregates.iter().map(|a| a.station_energy[i]).collect::<Vec<_>>());
            let cycle = service + wait;
            let is_va = cfg.value_class == ValueClass::VA;
            let service_energy_share = if is_va && station_energy > 0.0 {
                // wait episodes at a VA station dilute its energy PCE
                let idle = wait * cfg.power_idle_kw / 60.0;
                ((station_energy - idle) / station_energy).clamp(0.0, 1.0)
            } else {
                0.0
            };
            StationStats {
                station_id: cfg.id.clone(),
                utilization: mean(&aggregates.iter().map(|a| a.station_util[i]).collect::<Vec<_>>()),
                mean_queue_wait: wait,
                pce_time: if is_va && cycle > 0.0 { service / cycle } else { 0.0 },
                pce_energy: service_energy_share,
                busy_min: mean(&aggregates.iter().map(|a| a.station_busy[i]).collect::<Vec<_>>()),
                mean_service_min: service,
                mean_energy_kwh: station_energy,
            }
        })
        .collect();

    let factors = match mode {
        FactorMode::Supplied => {
            let f = config.supplied_factors.ok_or(ReportError::MissingSuppliedFactors)?;
            OeeeFactors {
                availability: f.availability,
                performance: f.performance,
                quality: f.quality,
                sustainability: f.sustainability,
                source: FactorMode::Supplied,
            }
        }
        FactorMode::Derived => {
            let inputs = DerivedInputs {
                total_busy_min: stations.iter().map(|s| s.busy_min).sum(),
                completed_batches: mean(&collect(|a| a.completed)),
                va_energy_share_input: va_energy_share(&energy).ok(),
            };
            derive_factors(&inputs, config, &energy)?
        }
    };
    let oee = compute_oee(factors.availability, factors.performance, factors.quality)?;
    let oeee = compute_oeee(&factors)?;
    let takt_min = crate::line::takt_time(config);
    let lead_time_min = times_min.lead.mean;

    let metrics = MetricsBlock {
        oee,
        oeee,
        oeee_pct_rounded: round_pct(oeee),
        oeee_class: classify_oeee(oeee)?,
        factors: FactorsOut {
            mode: factors.source,
            a: factors.availability,
            p: factors.performance,
            q: factors.quality,
            s: factors.sustainability,
        },
        pce_per_station: stations
            .iter()
            .map(|s| PceEntry {
                station_id: s.station_id.clone(),
                pce_time: s.pce_time,
                pce_energy: s.pce_energy,
            })
            .collect(),
        bottleneck_ranking: rank_bottlenecks(&stations)
            .into_iter()
            .map(|s| s.station_id)
            .collect(),
        takt_min,
        lead_time_min,
        takt_gap_min: lead_time_min - takt_min,
    };

    Ok(RunReport {
        fingerprint: config.fingerprint(),
        seed,
        replications: results.len(),
        completed_mean: mean(&collect(|a| a.completed)),
        in_flight_mean: mean(&collect(|a| a.in_flight)),
        times_min,
        times_hours,
        energy,
        stations,
        metrics,
        timestamp_unix: None,
    })
}
