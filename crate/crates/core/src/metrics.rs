//! Evaluation layer: OEE/OEEE, process cycle efficiency for time and
//! energy, replication statistics with Student-t half-widths, bottleneck
//! ranking and acceptability classification.

use crate::energy::va_energy_share;
use crate::line::LineConfig;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("factor `{name}` out of range [0, 1]: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("cycle time must be > 0")]
    ZeroCycle,
    #[error("VA time {va} exceeds cycle time {cycle}")]
    VaExceedsCycle { va: f64, cycle: f64 },
    #[error("total energy must be > 0")]
    ZeroEnergy,
    #[error("VA energy {va} exceeds total energy {total}")]
    VaExceedsTotal { va: f64, total: f64 },
    #[error("need at least {need} values, got {got}")]
    TooFewReplications { need: usize, got: usize },
    #[error("no completed batches; cannot derive factors")]
    InsufficientData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMode {
    Supplied,
    Derived,
}

/// The four OEEE factors, each a fraction in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OeeeFactors {
    pub availability: f64,
    pub performance: f64,
    pub quality: f64,
    pub sustainability: f64,
    pub source: FactorMode,
}

fn check_fraction(name: &'static str, value: f64) -> Result<(), MetricsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(MetricsError::OutOfRange { name, value })
    }
}

/// OEE = availability x performance x quality.
pub fn compute_oee(availability: f64, performance: f64, quality: f64) -> Result<f64, MetricsError> {
    check_fraction("availability", availability)?;
    check_fraction("performance", performance)?;
    check_fraction("quality", quality)?;
    Ok(availability * performance * quality)
}

/// OEEE = OEE x sustainability.
pub fn compute_oeee(factors: &OeeeFactors) -> Result<f64, MetricsError> {
    check_fraction("sustainability", factors.sustainability)?;
    Ok(compute_oee(factors.availability, factors.performance, factors.quality)?
        * factors.sustainability)
}

/// OEEE as a percentage rounded to one decimal place, for reports.
pub fn round_pct(fraction: f64) -> f64 {
    (fraction * 1000.0).round() / 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OeeeClass {
    Acceptable,
    NeedsImprovement,
}

/// 50% and above is acceptable.
pub fn classify_oeee(value: f64) -> Result<OeeeClass, MetricsError> {
    check_fraction("oeee", value)?;
    Ok(if value >= 0.5 { OeeeClass::Acceptable } else { OeeeClass::NeedsImprovement })
}

/// PCE for time: VA minutes over cycle minutes.
pub fn pce_time(va_minutes: f64, cycle_minutes: f64) -> Result<f64, MetricsError> {
    if cycle_minutes <= 0.0 {
        return Err(MetricsError::ZeroCycle);
    }
    if va_minutes < 0.0 || va_minutes > cycle_minutes {
        return Err(MetricsError::VaExceedsCycle { va: va_minutes, cycle: cycle_minutes });
    }
    Ok(va_minutes / cycle_minutes)
}

/// PCE for energy: VA kWh over total kWh.
pub fn pce_energy(va_kwh: f64, total_kwh: f64) -> Result<f64, MetricsError> {
    if total_kwh <= 0.0 {
        return Err(MetricsError::ZeroEnergy);
    }
    if va_kwh < 0.0 || va_kwh > total_kwh {
        return Err(MetricsError::VaExceedsTotal { va: va_kwh, total: total_kwh });
    }
    Ok(va_kwh / total_kwh)
}

/// Cross-replication summary of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub n: usize,
    pub mean: f64,
    /// Student-t confidence half-width; `None` with fewer than two values.
    pub half_width: Option<f64>,
    pub min_avg: f64,
    pub max_avg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_value: Option<f64>,
}

impl StatSummary {
    pub fn scale(&self, k: f64) -> StatSummary {
        StatSummary {
            n: self.n,
            mean: self.mean * k,
            half_width: self.half_width.map(|h| h * k),
            min_avg: self.min_avg * k,
            max_avg: self.max_avg * k,
            min_value: self.min_value.map(|v| v * k),
            max_value: self.max_value.map(|v| v * k),
        }
    }
}

/// Two-sided Student-t quantile t(1 - (1-confidence)/2, df).
pub fn t_quantile(confidence: f64, df: f64) -> f64 {
    let p = 1.0 - (1.0 - confidence) / 2.0;
    StudentsT::new(0.0, 1.0, df).expect("valid t distribution").inverse_cdf(p)
}

/// Half width of the `confidence` interval on the mean of `values`.
pub fn half_width(values: &[f64], confidence: f64) -> Result<f64, MetricsError> {
    let n = values.len();
    if n < 2 {
        return Err(MetricsError::TooFewReplications { need: 2, got: n });
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok(0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Ok(t_quantile(confidence, n as f64 - 1.0) * (var / n as f64).sqrt())
}

/// Summarize per-replication values: sample mean, t half-width, extrema of
/// replication averages.
pub fn summarize(values: &[f64], confidence: f64) -> Result<StatSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::TooFewReplications { need: 1, got: 0 });
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let hw = half_width(values, confidence).ok();
    let min_avg = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_avg = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(StatSummary { n, mean, half_width: hw, min_avg, max_avg, min_value: None, max_value: None })
}

/// Per-station statistics averaged across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationStats {
    pub station_id: String,
    pub utilization: f64,
    pub mean_queue_wait: f64,
    pub pce_time: f64,
    pub pce_energy: f64,
    /// Mean busy minutes per replication; input to derived factors.
    pub busy_min: f64,
    /// Mean service minutes per completed batch.
    pub mean_service_min: f64,
    /// Mean service-plus-queue-idle energy per completed batch.
    pub mean_energy_kwh: f64,
}

/// Stations sorted by mean queue wait, descending; ties keep line order.
pub fn rank_bottlenecks(stats: &[StationStats]) -> Vec<StationStats> {
    let mut ranked = stats.to_vec();
    ranked.sort_by(|a, b| b.mean_queue_wait.total_cmp(&a.mean_queue_wait));
    ranked
}

/// Inputs needed to derive factors from a finished run.
#[derive(Debug, Clone, Copy)]
pub struct DerivedInputs {
    pub total_busy_min: f64,
    pub completed_batches: f64,
    pub va_energy_share_input: Option<f64>,
}

/// Derive the four factors from run aggregates:
/// availability = busy / scheduled, performance = ideal work / busy,
/// quality = product of yields, sustainability = VA energy share.
pub fn derive_factors(
    inputs: &DerivedInputs,
    config: &LineConfig,
    ledger: &crate::energy::EnergyLedger,
) -> Result<OeeeFactors, MetricsError> {
    if inputs.completed_batches < 1.0 {
        return Err(MetricsError::InsufficientData);
    }
    let scheduled = config.stations.len() as f64 * config.available_time_min;
    let availability = (inputs.total_busy_min / scheduled).clamp(0.0, 1.0);
    let ideal_cycle: f64 = config
        .stations
        .iter()
        .map(|s| s.effective_service(config.batch_size).minimum())
        .sum();
    let performance =
        (ideal_cycle * inputs.completed_batches / inputs.total_busy_min).clamp(0.0, 1.0);
    let quality = config.stations.iter().map(|s| s.yield_fraction).product();
    let sustainability = inputs
        .va_energy_share_input
        .map(Ok)
        .unwrap_or_else(|| va_energy_share(ledger).map_err(|_| MetricsError::InsufficientData))?;
    Ok(OeeeFactors { availability, performance, quality, sustainability, source: FactorMode::Derived })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oee_examples() {
        assert_eq!(compute_oee(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!((compute_oee(0.26, 0.60, 0.95).unwrap() - 0.1482).abs() < 1e-12);
        assert!((compute_oee(0.43, 0.90, 0.95).unwrap() - 0.36765).abs() < 1e-12);
        assert!(matches!(compute_oee(1.2, 0.5, 0.5), Err(MetricsError::OutOfRange { .. })));
    }

    fn factors(a: f64, p: f64, q: f64, s: f64) -> OeeeFactors {
        OeeeFactors {
            availability: a,
            performance: p,
            quality: q,
            sustainability: s,
            source: FactorMode::Supplied,
        }
    }

    #[test]
    fn oeee_examples() {
        let current = compute_oeee(&factors(0.26, 0.60, 0.95, 0.88)).unwrap();
        assert!((current - 0.130416).abs() < 1e-12);
        assert_eq!(round_pct(current), 13.0);

        let s2 = compute_oeee(&factors(0.40, 0.95, 0.70, 0.88)).unwrap();
        assert!((s2 - 0.23408).abs() < 1e-12);

        assert_eq!(compute_oeee(&factors(1.0, 1.0, 1.0, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn oeee_is_oee_times_sustainability() {
        let f = factors(0.7, 0.8, 0.9, 0.6);
        let oee = compute_oee(f.availability, f.performance, f.quality).unwrap();
        assert_eq!(compute_oeee(&f).unwrap(), oee * f.sustainability);
    }

    #[test]
    fn classification_threshold() {
        assert_eq!(classify_oeee(0.131).unwrap(), OeeeClass::NeedsImprovement);
        assert_eq!(classify_oeee(0.5).unwrap(), OeeeClass::Acceptable);
        assert_eq!(classify_oeee(1.0).unwrap(), OeeeClass::Acceptable);
    }

    #[test]
    fn pce_time_examples() {
        assert!((pce_time(36.7, 329.1).unwrap() - 0.1115).abs() < 5e-5);
        assert_eq!(pce_time(0.0, 12.0).unwrap(), 0.0);
        assert_eq!(pce_time(8.0, 8.0).unwrap(), 1.0);
        assert_eq!(pce_time(1.0, 0.0), Err(MetricsError::ZeroCycle));
        assert!(matches!(pce_time(9.0, 8.0), Err(MetricsError::VaExceedsCycle { .. })));
    }

    #[test]
    fn pce_energy_examples() {
        assert!((pce_energy(23.0, 86.5).unwrap() - 0.2659).abs() < 5e-5);
        assert_eq!(pce_energy(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(pce_energy(5.0, 5.0).unwrap(), 1.0);
        assert_eq!(pce_energy(1.0, 0.0), Err(MetricsError::ZeroEnergy));
    }

    #[test]
    fn constant_values_have_zero_half_width() {
        let s = summarize(&[5.0, 5.0, 5.0, 5.0], 0.95).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.half_width, Some(0.0));
        assert_eq!((s.min_avg, s.max_avg), (5.0, 5.0));
    }

    #[test]
    fn single_value_has_mean_but_no_half_width() {
        let s = summarize(&[3.5], 0.95).unwrap();
        assert_eq!(s.mean, 3.5);
        assert_eq!(s.half_width, None);
        assert!(matches!(
            half_width(&[3.5], 0.95),
            Err(MetricsError::TooFewReplications { need: 2, got: 1 })
        ));
    }

    #[test]
    fn t_quantile_matches_tables() {
        // t(0.975, 29) from standard tables
        assert!((t_quantile(0.95, 29.0) - 2.045229642132703).abs() < 1e-9);
    }

    #[test]
    fn ranking_is_permutation_with_line_order_ties() {
        let stat = |id: &str, wait: f64| StationStats {
            station_id: id.into(),
            utilization: 0.0,
            mean_queue_wait: wait,
            pce_time: 0.0,
            pce_energy: 0.0,
            busy_min: 0.0,
            mean_service_min: 0.0,
            mean_energy_kwh: 0.0,
        };
        let stats = vec![stat("a", 0.0), stat("b", 0.0), stat("c", 0.0)];
        let ranked: Vec<String> =
            rank_bottlenecks(&stats).into_iter().map(|s| s.station_id).collect();
        assert_eq!(ranked, vec!["a", "b", "c"]);

        let stats = vec![stat("a", 1.0), stat("b", 9.0), stat("c", 4.0)];
        let ranked: Vec<String> =
            rank_bottlenecks(&stats).into_iter().map(|s| s.station_id).collect();
        assert_eq!(ranked, vec!["b", "c", "a"]);

        let one = vec![stat("solo", 2.0)];
        assert_eq!(rank_bottlenecks(&one).len(), 1);
    }
}
