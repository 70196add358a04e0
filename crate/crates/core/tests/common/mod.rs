//! Shared helpers for the integration suites: a randomized small-line
//! generator and a closed-form departure-time oracle for constant-service
//! FIFO lines.

use leanline_core::line::{
    Dist, LineConfig, ReleaseRule, Station, TransferLink, ValueClass,
};
use rand::Rng;

pub fn constant_station(id: &str, service_min: f64, class: ValueClass) -> Station {
    Station {
        id: id.to_string(),
        name: id.to_string(),
        servers: 1,
        service_time: Dist::Constant(service_min),
        value_class: class,
        power_active_kw: 4.0,
        power_idle_kw: 1.0,
        yield_fraction: 1.0,
        per_module_time_min: None,
        provenance: None,
    }
}

fn random_dist<R: Rng>(rng: &mut R) -> Dist {
    let base = rng.gen_range(0.5..8.0);
    match rng.gen_range(0..4) {
        0 => Dist::Constant(base),
        1 => Dist::Triangular { min: base, mode: base + rng.gen_range(0.1..2.0), max: base + rng.gen_range(2.1..5.0) },
        2 => Dist::Exponential { mean: base },
        _ => Dist::TruncNormal { mean: base + 1.0, sd: rng.gen_range(0.1..1.5), min: 0.1 },
    }
}

/// A random serial line: 1-4 single-server stations, mixed service-time
/// families, random release rule and a horizon that sometimes cuts the
/// run short.
pub fn random_config<R: Rng>(rng: &mut R) -> LineConfig {
    let n: usize = rng.gen_range(1..=4);
    let stations: Vec<Station> = (0..n)
        .map(|i| {
            let idle = rng.gen_range(0.0..2.0);
            Station {
                id: format!("s{i}"),
                name: format!("station {i}"),
                servers: rng.gen_range(1..=2),
                service_time: random_dist(rng),
                value_class: if rng.gen_bool(0.7) { ValueClass::VA } else { ValueClass::NVA },
                power_active_kw: idle + rng.gen_range(0.5..10.0),
                power_idle_kw: idle,
                yield_fraction: rng.gen_range(0.8..=1.0),
                per_module_time_min: None,
                provenance: None,
            }
        })
        .collect();
    let transfers = (0..n.saturating_sub(1))
        .map(|i| TransferLink {
            from: format!("s{i}"),
            to: format!("s{}", i + 1),
            duration_min: Dist::Constant(rng.gen_range(0.1..2.0)),
            power_kw: rng.gen_range(0.0..3.0),
        })
        .collect();
    let batches = rng.gen_range(1..=6);
    let release = if rng.gen_bool(0.5) {
        ReleaseRule::AllAtStart
    } else {
        ReleaseRule::Interval { interval_min: rng.gen_range(0.5..6.0), count: batches }
    };
    LineConfig {
        name: None,
        stations,
        transfers,
        batch_size: rng.gen_range(1..=5),
        demand_per_day: batches as f64,
        available_time_min: 480.0,
        emission_factor_kg_per_kwh: None,
        warmup_min: 0.0,
        horizon_min: Some(if rng.gen_bool(0.25) { rng.gen_range(5.0..60.0) } else { 480.0 }),
        release,
        supplied_factors: None,
        idle_bucket: Default::default(),
        calibration: None,
    }
}

/// Departure times for a constant-service serial FIFO line with one
/// server per station: D(k, i) = max(A(k, i), D(k-1, i)) + s_i, where
/// A(k, i) is the arrival of batch k at station i (previous departure
/// plus transfer). Returns final-station departure per batch, in release
/// order.
pub fn fifo_oracle(release_times: &[f64], services: &[f64], transfers: &[f64]) -> Vec<f64> {
    assert_eq!(transfers.len() + 1, services.len());
    let mut prev_departure = vec![f64::NEG_INFINITY; services.len()];
    let mut finals = Vec::with_capacity(release_times.len());
    for &released in release_times {
        let mut arrival = released;
        for (i, &service) in services.iter().enumerate() {
            let start = arrival.max(prev_departure[i]);
            let departure = start + service;
            prev_departure[i] = departure;
            arrival = departure + transfers.get(i).copied().unwrap_or(0.0);
        }
        finals.push(prev_departure[services.len() - 1]);
    }
    finals
}
