//! Per-activity energy accounting over simulation traces: classification
//! into VA/NVA/transport buckets and greenhouse-gas equivalency.

use crate::line::IdleBucket;
use crate::sim::SimTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("negative duration: end {end} < start {start}")]
    NegativeDuration { start: f64, end: f64 },
    #[error("total energy is zero")]
    ZeroTotalEnergy,
}

/// How an episode's minutes are classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeClass {
    /// Value-added service.
    VA,
    /// Non-value-added service (inspections and the like).
    NVA,
    /// Queueing in front of a station; carries that station's idle power.
    Wait,
    /// Movement on a transfer link.
    Transfer,
}

/// One timed, energy-bearing episode of an entity at a station or link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityRecord {
    pub entity_id: u64,
    /// Station id, or `from->to` for transfer links.
    pub location: String,
    pub time_class: TimeClass,
    pub start: SimTime,
    pub end: SimTime,
    pub power_kw: f64,
    pub energy_kwh: f64,
}

impl ActivityRecord {
    pub fn new(
        entity_id: u64,
        location: impl Into<String>,
        time_class: TimeClass,
        start: SimTime,
        end: SimTime,
        power_kw: f64,
    ) -> Result<Self, EnergyError> {
        let energy_kwh = activity_energy(power_kw, start, end)?;
        Ok(Self { entity_id, location: location.into(), time_class, start, end, power_kw, energy_kwh })
    }

    pub fn duration_min(&self) -> f64 {
        self.end.minutes() - self.start.minutes()
    }
}

/// Energy of one activity: power times duration in hours.
pub fn activity_energy(power_kw: f64, start: SimTime, end: SimTime) -> Result<f64, EnergyError> {
    if end < start {
        return Err(EnergyError::NegativeDuration { start: start.minutes(), end: end.minutes() });
    }
    Ok(power_kw * (end.minutes() - start.minutes()) / 60.0)
}

/// Bucketed energy totals for a trace, with optional CO2 equivalency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EnergyLedger {
    pub va_kwh: f64,
    pub nva_kwh: f64,
    pub transport_kwh: f64,
    /// Populated only under `idle_bucket: separate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idle_kwh: Option<f64>,
    pub total_kwh: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub co2e_kg: Option<f64>,
}

impl EnergyLedger {
    /// Scale every bucket by `k` (CO2e included; it is a linear multiple
    /// of the total).
    pub fn scale(&self, k: f64) -> EnergyLedger {
        EnergyLedger {
            va_kwh: self.va_kwh * k,
            nva_kwh: self.nva_kwh * k,
            transport_kwh: self.transport_kwh * k,
            idle_kwh: self.idle_kwh.map(|v| v * k),
            total_kwh: self.total_kwh * k,
            co2e_kg: self.co2e_kg.map(|v| v * k),
        }
    }
}

/// Sum a trace into buckets: VA -> va, NVA -> nva, Transfer -> transport;
/// Wait-idle energy goes to nva by default, or to its own bucket under
/// `IdleBucket::Separate`.
pub fn build_ledger(
    trace: &[ActivityRecord],
    emission_factor_kg_per_kwh: Option<f64>,
    idle_bucket: IdleBucket,
) -> EnergyLedger {
    let mut ledger = EnergyLedger::default();
    let mut idle = 0.0;
    for record in trace {
        match record.time_class {
            TimeClass::VA => ledger.va_kwh += record.energy_kwh,
            TimeClass::NVA => ledger.nva_kwh += record.energy_kwh,
            TimeClass::Wait => idle += record.energy_kwh,
            TimeClass::Transfer => ledger.transport_kwh += record.energy_kwh,
        }
    }
    match idle_bucket {
        IdleBucket::Nva => ledger.nva_kwh += idle,
        IdleBucket::Separate => ledger.idle_kwh = Some(idle),
    }
    ledger.total_kwh = ledger.va_kwh
        + ledger.nva_kwh
        + ledger.transport_kwh
        + ledger.idle_kwh.unwrap_or(0.0);
    ledger.co2e_kg = emission_factor_kg_per_kwh.map(|f| ledger.total_kwh * f);
    ledger
}

/// VA share of total energy.
pub fn va_energy_share(ledger: &EnergyLedger) -> Result<f64, EnergyError> {
    if ledger.total_kwh <= 0.0 {
        return Err(EnergyError::ZeroTotalEnergy);
    }
    Ok(ledger.va_kwh / ledger.total_kwh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(min: f64) -> SimTime {
        SimTime::from_minutes(min)
    }

    #[test]
    fn two_kw_for_thirty_minutes_is_one_kwh() {
        assert_eq!(activity_energy(2.0, t(0.0), t(30.0)).unwrap(), 1.0);
    }

    #[test]
    fn zero_duration_and_zero_power() {
        assert_eq!(activity_energy(7.0, t(5.0), t(5.0)).unwrap(), 0.0);
        assert_eq!(activity_energy(0.0, t(0.0), t(120.0)).unwrap(), 0.0);
    }

    #[test]
    fn negative_duration_is_an_error() {
        assert_eq!(
            activity_energy(1.0, t(10.0), t(5.0)),
            Err(EnergyError::NegativeDuration { start: 10.0, end: 5.0 })
        );
    }

    #[test]
    fn empty_trace_yields_zero_ledger() {
        let ledger = build_ledger(&[], None, IdleBucket::Nva);
        assert_eq!(ledger.total_kwh, 0.0);
        assert_eq!(ledger.co2e_kg, None);
    }

    #[test]
    fn reference_totals_and_unit_emission_factor() {
        // va 23, nva 62.5, transport 1 -> total 86.5
        let mk = |class, power_kw, minutes| {
            ActivityRecord::new(0, "x", class, t(0.0), t(minutes), power_kw).unwrap()
        };
        let trace = vec![
            mk(TimeClass::VA, 23.0, 60.0),
            mk(TimeClass::NVA, 62.5, 60.0),
            mk(TimeClass::Transfer, 1.0, 60.0),
        ];
        let ledger = build_ledger(&trace, Some(1.0), IdleBucket::Nva);
        assert!((ledger.total_kwh - 86.5).abs() < 1e-12);
        assert!((ledger.co2e_kg.unwrap() - 86.5).abs() < 1e-12);
    }

    #[test]
    fn va_share_matches_reference_roundings() {
        let ledger = EnergyLedger { va_kwh: 23.0, total_kwh: 86.5, ..Default::default() };
        assert!((va_energy_share(&ledger).unwrap() - 0.2659).abs() < 5e-5);

        let s1 = EnergyLedger { va_kwh: 20.0, total_kwh: 20.0 + 25.62 + 0.53, ..Default::default() };
        assert!((va_energy_share(&s1).unwrap() - 0.4334).abs() < 5e-5);

        let all_va = EnergyLedger { va_kwh: 4.0, total_kwh: 4.0, ..Default::default() };
        assert_eq!(va_energy_share(&all_va).unwrap(), 1.0);

        assert_eq!(va_energy_share(&EnergyLedger::default()), Err(EnergyError::ZeroTotalEnergy));
    }

    #[test]
    fn separate_idle_bucket_keeps_total_conserved() {
        let wait = ActivityRecord::new(0, "q", TimeClass::Wait, t(0.0), t(60.0), 3.0).unwrap();
        let nva = build_ledger(std::slice::from_ref(&wait), None, IdleBucket::Nva);
        let sep = build_ledger(std::slice::from_ref(&wait), None, IdleBucket::Separate);
        assert_eq!(nva.nva_kwh, 3.0);
        assert_eq!(sep.idle_kwh, Some(3.0));
        assert_eq!(sep.nva_kwh, 0.0);
        assert_eq!(nva.total_kwh, sep.total_kwh);
    }
}
