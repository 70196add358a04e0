//! Declarative data model of a production line: stations, transfers,
//! routing and demand, with loading, validation and takt arithmetic.
//!
//! The schema is JSON with exact field names; unknown keys are rejected.
//! Routing is strictly serial: the stations form a single path and every
//! consecutive pair is connected by exactly one transfer link.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Exp, Normal, Triangular};
use thiserror::Error;

pub type StationId = String;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Service or transfer duration distribution, in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistSpec", into = "DistSpec")]
pub enum Dist {
    Constant(f64),
    Triangular { min: f64, mode: f64, max: f64 },
    Exponential { mean: f64 },
    /// Normal truncated from below by resampling.
    TruncNormal { mean: f64, sd: f64, min: f64 },
}

/// Wire form: `{"dist": "constant", "params": [10.0]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistSpec {
    dist: String,
    params: Vec<f64>,
}

impl TryFrom<DistSpec> for Dist {
    type Error = String;

    fn try_from(spec: DistSpec) -> Result<Self, Self::Error> {
        let need = |n: usize| -> Result<(), String> {
            if spec.params.len() == n {
                Ok(())
            } else {
                Err(format!(
                    "distribution `{}` takes {} params, got {}",
                    spec.dist,
                    n,
                    spec.params.len()
                ))
            }
        };
        let p = &spec.params;
        match spec.dist.as_str() {
            "constant" => {
                need(1)?;
                Ok(Dist::Constant(p[0]))
            }
            "triangular" => {
                need(3)?;
                Ok(Dist::Triangular { min: p[0], mode: p[1], max: p[2] })
            }
            "exponential" => {
                need(1)?;
                Ok(Dist::Exponential { mean: p[0] })
            }
            "truncnormal" => {
                need(3)?;
                Ok(Dist::TruncNormal { mean: p[0], sd: p[1], min: p[2] })
            }
            other => Err(format!("unknown distribution `{other}`")),
        }
    }
}

impl From<Dist> for DistSpec {
    fn from(d: Dist) -> Self {
        match d {
            Dist::Constant(c) => DistSpec { dist: "constant".into(), params: vec![c] },
            Dist::Triangular { min, mode, max } => {
                DistSpec { dist: "triangular".into(), params: vec![min, mode, max] }
            }
            Dist::Exponential { mean } => {
                DistSpec { dist: "exponential".into(), params: vec![mean] }
            }
            Dist::TruncNormal { mean, sd, min } => {
                DistSpec { dist: "truncnormal".into(), params: vec![mean, sd, min] }
            }
        }
    }
}

impl Dist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use rand::distributions::Distribution;
        match self {
            Dist::Constant(c) => *c,
            Dist::Triangular { min, mode, max } => Triangular::new(*min, *max, *mode)
                .expect("validated triangular params")
                .sample(rng),
            Dist::Exponential { mean } => {
                Exp::new(1.0 / mean).expect("validated exponential mean").sample(rng)
            }
            Dist::TruncNormal { mean, sd, min } => {
                let n = Normal::new(*mean, *sd).expect("validated normal params");
                loop {
                    let x = n.sample(rng);
                    if x >= *min {
                        return x;
                    }
                }
            }
        }
    }

    /// Smallest value the distribution can produce; the per-station
    /// ideal cycle time in derived-factor mode.
    pub fn minimum(&self) -> f64 {
        match self {
            Dist::Constant(c) => *c,
            Dist::Triangular { min, .. } => *min,
            Dist::Exponential { .. } => 0.0,
            Dist::TruncNormal { min, .. } => *min,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Dist::Constant(_))
    }

    fn check(&self, field: &str) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::Schema { field: field.to_string(), message };
        match self {
            Dist::Constant(c) => {
                if *c < 0.0 || !c.is_finite() {
                    return Err(bad(format!("constant duration must be >= 0, got {c}")));
                }
            }
            Dist::Triangular { min, mode, max } => {
                if !(0.0 <= *min && min <= mode && mode <= max) {
                    return Err(bad(format!(
                        "triangular needs 0 <= min <= mode <= max, got ({min}, {mode}, {max})"
                    )));
                }
            }
            Dist::Exponential { mean } => {
                if *mean <= 0.0 {
                    return Err(bad(format!("exponential mean must be > 0, got {mean}")));
                }
            }
            Dist::TruncNormal { mean, sd, min } => {
                if *sd <= 0.0 || *min < 0.0 || !mean.is_finite() {
                    return Err(bad(format!(
                        "truncnormal needs sd > 0 and min >= 0, got ({mean}, {sd}, {min})"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueClass {
    VA,
    NVA,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Station {
    pub id: StationId,
    pub name: String,
    #[serde(default = "default_servers")]
    pub servers: u32,
    pub service_time: Dist,
    pub value_class: ValueClass,
    pub power_active_kw: f64,
    pub power_idle_kw: f64,
    #[serde(default = "default_yield")]
    pub yield_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_module_time_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

fn default_servers() -> u32 {
    1
}

fn default_yield() -> f64 {
    1.0
}

impl Station {
    /// Effective service distribution. A per-module time replaces the
    /// service time as `batch_size x per_module_time`.
    pub fn effective_service(&self, batch_size: u32) -> Dist {
        match self.per_module_time_min {
            Some(per_module) => Dist::Constant(batch_size as f64 * per_module),
            None => self.service_time.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferLink {
    pub from: StationId,
    pub to: StationId,
    pub duration_min: Dist,
    pub power_kw: f64,
}

impl TransferLink {
    pub fn link_id(&self) -> String {
        format!("{}->{}", self.from, self.to)
    }
}

/// Batch release rule. The default releases `demand_per_day` batches at
/// shift start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReleaseRule {
    #[default]
    AllAtStart,
    Interval { interval_min: f64, count: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuppliedFactors {
    pub availability: f64,
    pub performance: f64,
    pub quality: f64,
    pub sustainability: f64,
}

/// Where idle-draw energy accrued while batches queue is bucketed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IdleBucket {
    #[default]
    Nva,
    Separate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub stations: Vec<Station>,
    pub transfers: Vec<TransferLink>,
    pub batch_size: u32,
    pub demand_per_day: f64,
    pub available_time_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission_factor_kg_per_kwh: Option<f64>,
    #[serde(default)]
    pub warmup_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_min: Option<f64>,
    #[serde(default)]
    pub release: ReleaseRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supplied_factors: Option<SuppliedFactors>,
    #[serde(default)]
    pub idle_bucket: IdleBucket,
    /// Free-form calibration notes carried with the shipped example.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<serde_json::Value>,
}

impl LineConfig {
    /// Horizon defaults to one production day.
    pub fn horizon(&self) -> f64 {
        self.horizon_min.unwrap_or(self.available_time_min)
    }

    /// Batch release times for one replication, in minutes.
    pub fn release_times(&self) -> Vec<f64> {
        match &self.release {
            ReleaseRule::AllAtStart => {
                let n = self.demand_per_day.ceil().max(1.0) as usize;
                vec![0.0; n]
            }
            ReleaseRule::Interval { interval_min, count } => {
                (0..*count).map(|k| k as f64 * interval_min).collect()
            }
        }
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    /// Content hash of the canonical serialized form. Whitespace and key
    /// layout of the source file do not matter; field values do.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        format!("{digest:x}")
    }
}

/// Takt time in minutes per batch: available production time over demand.
pub fn takt_time(config: &LineConfig) -> f64 {
    config.available_time_min / config.demand_per_day
}

pub fn load_config(document: &str) -> Result<LineConfig, ConfigError> {
    let config: LineConfig = serde_json::from_str(document).map_err(|e| {
        if e.classify() == serde_json::error::Category::Data {
            ConfigError::Schema { field: "<document>".into(), message: e.to_string() }
        } else {
            ConfigError::Parse(e.to_string())
        }
    })?;
    schema_checks(&config)?;
    Ok(config)
}

pub fn load_config_file(path: &std::path::Path) -> Result<LineConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    load_config(&text)
}

/// Per-field sign and shape checks applied at load time. Cross-field and
/// structural rules live in [`validate`].
fn schema_checks(config: &LineConfig) -> Result<(), ConfigError> {
    let nonneg = |field: String, v: f64| -> Result<(), ConfigError> {
        if v < 0.0 || !v.is_finite() {
            Err(ConfigError::Schema { field, message: format!("must be >= 0 and finite, got {v}") })
        } else {
            Ok(())
        }
    };
    for s in &config.stations {
        nonneg(format!("stations[{}].power_active_kw", s.id), s.power_active_kw)?;
        nonneg(format!("stations[{}].power_idle_kw", s.id), s.power_idle_kw)?;
        if let Some(pm) = s.per_module_time_min {
            nonneg(format!("stations[{}].per_module_time_min", s.id), pm)?;
        }
        s.service_time.check(&format!("stations[{}].service_time", s.id))?;
    }
    for t in &config.transfers {
        nonneg(format!("transfers[{}].power_kw", t.link_id()), t.power_kw)?;
        t.duration_min.check(&format!("transfers[{}].duration_min", t.link_id()))?;
    }
    nonneg("warmup_min".into(), config.warmup_min)?;
    if let Some(f) = config.emission_factor_kg_per_kwh {
        nonneg("emission_factor_kg_per_kwh".into(), f)?;
    }
    Ok(())
}

/// One violated invariant; data, not a failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
    pub value: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {} (got {})", self.field, self.rule, self.value)
    }
}

/// Pure and total: returns the empty list iff all `LineConfig` invariants
/// hold. Never aborts on a parseable config.
pub fn validate(config: &LineConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &str, rule: &str, value: String| {
        out.push(Violation { field: field.into(), rule: rule.into(), value });
    };

    if config.stations.is_empty() {
        push("stations", "at least one station required", "0".into());
    }
    if config.demand_per_day <= 0.0 {
        push("demand_per_day", "must be > 0", config.demand_per_day.to_string());
    }
    if config.available_time_min <= 0.0 {
        push("available_time_min", "must be > 0", config.available_time_min.to_string());
    }
    if config.batch_size < 1 {
        push("batch_size", "must be >= 1", config.batch_size.to_string());
    }
    if config.horizon() <= 0.0 {
        push("horizon_min", "must be > 0", config.horizon().to_string());
    }
    if let ReleaseRule::Interval { interval_min, count } = &config.release {
        if *interval_min <= 0.0 {
            push("release.interval_min", "must be > 0", interval_min.to_string());
        }
        if *count == 0 {
            push("release.count", "must be >= 1", count.to_string());
        }
    }

    let mut seen = std::collections::HashSet::new();
    for s in &config.stations {
        let f = |suffix: &str| format!("stations[{}].{}", s.id, suffix);
        if !seen.insert(s.id.clone()) {
            push("stations", "station ids must be unique", s.id.clone());
        }
        if s.servers < 1 {
            push(&f("servers"), "must be >= 1", s.servers.to_string());
        }
        if !(0.0..=1.0).contains(&s.yield_fraction) {
            push(&f("yield_fraction"), "must be within [0, 1]", s.yield_fraction.to_string());
        }
        if s.power_active_kw < s.power_idle_kw {
            push(
                &f("power_active_kw"),
                "must be >= power_idle_kw",
                format!("{} < {}", s.power_active_kw, s.power_idle_kw),
            );
        }
        if s.power_idle_kw < 0.0 {
            push(&f("power_idle_kw"), "must be >= 0", s.power_idle_kw.to_string());
        }
    }

    // Serial routing: exactly one link per consecutive station pair, none
    // elsewhere.
    for pair in config.stations.windows(2) {
        let (a, b) = (&pair[0].id, &pair[1].id);
        let n = config.transfers.iter().filter(|t| &t.from == a && &t.to == b).count();
        if n != 1 {
            push(
                "transfers",
                "exactly one transfer link per consecutive station pair",
                format!("{a}->{b} has {n}"),
            );
        }
    }
    for t in &config.transfers {
        let from = config.station_index(&t.from);
        let to = config.station_index(&t.to);
        match (from, to) {
            (Some(i), Some(j)) if j == i + 1 => {}
            (None, _) | (_, None) => {
                push("transfers", "link endpoints must be station ids", t.link_id());
            }
            _ => push("transfers", "routing must be a single serial path", t.link_id()),
        }
    }

    if let Some(f) = &config.supplied_factors {
        for (name, v) in [
            ("availability", f.availability),
            ("performance", f.performance),
            ("quality", f.quality),
            ("sustainability", f.sustainability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                push(&format!("supplied_factors.{name}"), "must be within [0, 1]", v.to_string());
            }
        }
    }

    out
}
