//! Shared domain types and their validation.
//!
//! Every type here serializes to the canonical JSON form used by the REST
//! API, the store files and the frontend: snake_case field names, and maps
//! keyed by label strings (`"FP16"`, `"accuracy"`, `"smart_home"`).
//!
//! The two normalized quantities, [`SensitivityWeights`] and
//! [`TaskDistribution`], enforce their invariants at construction and on
//! deserialization. Composite records expose a `validate()` method instead.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};

/// Tolerance on the sum of a normalized weight vector or distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Precision tier a client can run at, ordered by bit width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuantizationLevel {
    #[serde(rename = "INT4")]
    Int4,
    #[serde(rename = "INT8")]
    Int8,
    #[serde(rename = "FP16")]
    Fp16,
    #[serde(rename = "FP32")]
    Fp32,
}

impl QuantizationLevel {
    pub const ALL: [QuantizationLevel; 4] = [
        QuantizationLevel::Int4,
        QuantizationLevel::Int8,
        QuantizationLevel::Fp16,
        QuantizationLevel::Fp32,
    ];

    pub fn bit_width(self) -> u32 {
        match self {
            QuantizationLevel::Int4 => 4,
            QuantizationLevel::Int8 => 8,
            QuantizationLevel::Fp16 => 16,
            QuantizationLevel::Fp32 => 32,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QuantizationLevel::Int4 => "INT4",
            QuantizationLevel::Int8 => "INT8",
            QuantizationLevel::Fp16 => "FP16",
            QuantizationLevel::Fp32 => "FP32",
        }
    }

    /// `bit_width / 32`: how effectively an update at this level contributes.
    pub fn precision_factor(self) -> f64 {
        f64::from(self.bit_width()) / 32.0
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for QuantizationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for QuantizationLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QuantizationLevel::ALL
            .into_iter()
            .find(|l| l.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownLabel {
                kind: "quantization level",
                value: s.to_string(),
            })
    }
}

/// Performance factor a user can be sensitive to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Accuracy,
    Energy,
    Latency,
}

impl Factor {
    pub const ALL: [Factor; 3] = [Factor::Accuracy, Factor::Energy, Factor::Latency];

    pub fn label(self) -> &'static str {
        match self {
            Factor::Accuracy => "accuracy",
            Factor::Energy => "energy",
            Factor::Latency => "latency",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One real value per [`Factor`]. Serializes as a map keyed by factor label.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorValues {
    pub accuracy: f64,
    pub energy: f64,
    pub latency: f64,
}

impl FactorValues {
    pub fn new(accuracy: f64, energy: f64, latency: f64) -> Self {
        Self {
            accuracy,
            energy,
            latency,
        }
    }

    pub fn splat(value: f64) -> Self {
        Self::new(value, value, value)
    }

    pub fn from_fn(mut f: impl FnMut(Factor) -> f64) -> Self {
        Self::new(f(Factor::Accuracy), f(Factor::Energy), f(Factor::Latency))
    }

    pub fn get(&self, factor: Factor) -> f64 {
        match factor {
            Factor::Accuracy => self.accuracy,
            Factor::Energy => self.energy,
            Factor::Latency => self.latency,
        }
    }

    pub fn set(&mut self, factor: Factor, value: f64) {
        match factor {
            Factor::Accuracy => self.accuracy = value,
            Factor::Energy => self.energy = value,
            Factor::Latency => self.latency = value,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Factor, f64)> + '_ {
        Factor::ALL.into_iter().map(move |f| (f, self.get(f)))
    }

    pub fn sum(&self) -> f64 {
        self.accuracy + self.energy + self.latency
    }

    /// Every value finite and inside `[0, 1]`.
    pub fn check_unit_interval(&self) -> Result<(), ValidationError> {
        for (f, v) in self.iter() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(ValidationError::new(
                    f.label(),
                    format!("must lie in [0, 1], got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Per-factor user concern, non-negative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct SensitivityWeights {
    weights: FactorValues,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    weights: FactorValues,
}

impl TryFrom<RawWeights> for SensitivityWeights {
    type Error = ValidationError;

    fn try_from(raw: RawWeights) -> Result<Self, ValidationError> {
        let w = raw.weights;
        for (f, v) in w.iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(ValidationError::new(
                    format!("weights.{f}"),
                    format!("must be non-negative, got {v}"),
                ));
            }
        }
        if (w.sum() - 1.0).abs() > SUM_TOLERANCE {
            return Err(ValidationError::new(
                "weights",
                format!("must sum to 1, got {}", w.sum()),
            ));
        }
        Ok(Self { weights: w })
    }
}

impl From<SensitivityWeights> for RawWeights {
    fn from(w: SensitivityWeights) -> Self {
        RawWeights { weights: w.weights }
    }
}

impl SensitivityWeights {
    pub fn uniform() -> Self {
        Self {
            weights: FactorValues::splat(1.0 / 3.0),
        }
    }

    pub fn get(&self, factor: Factor) -> f64 {
        self.weights.get(factor)
    }

    pub fn values(&self) -> &FactorValues {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (Factor, f64)> + '_ {
        self.weights.iter()
    }

    /// Factors by descending weight; ties keep the canonical factor order.
    pub fn ranking(&self) -> [Factor; 3] {
        let mut order = Factor::ALL;
        order.sort_by(|a, b| self.get(*b).total_cmp(&self.get(*a)));
        order
    }
}

/// Rescale non-negative per-factor values so they sum to one.
///
/// Every factor must appear; the order in which they arrive is irrelevant.
pub fn validate_weights(
    raw: impl IntoIterator<Item = (Factor, f64)>,
) -> Result<SensitivityWeights, ValidationError> {
    let mut seen = [false; 3];
    let mut values = FactorValues::default();
    for (f, v) in raw {
        if !v.is_finite() || v < 0.0 {
            return Err(ValidationError::new(
                f.label(),
                format!("must be non-negative, got {v}"),
            ));
        }
        seen[f as usize] = true;
        values.set(f, v);
    }
    if let Some(f) = Factor::ALL.into_iter().find(|f| !seen[*f as usize]) {
        return Err(ValidationError::new(f.label(), "missing"));
    }
    let total = values.sum();
    if total <= 0.0 {
        return Err(ValidationError::new("weights", "all weights are zero"));
    }
    Ok(SensitivityWeights {
        weights: FactorValues::from_fn(|f| values.get(f) / total),
    })
}

/// Voice-assistant task family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskCategory {
    Entertainment,
    SmartHome,
    GeneralQuery,
    PersonalRequest,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 4] = [
        TaskCategory::Entertainment,
        TaskCategory::SmartHome,
        TaskCategory::GeneralQuery,
        TaskCategory::PersonalRequest,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TaskCategory::Entertainment => "entertainment",
            TaskCategory::SmartHome => "smart_home",
            TaskCategory::GeneralQuery => "general_query",
            TaskCategory::PersonalRequest => "personal_request",
        }
    }
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One real value per [`TaskCategory`]. Serializes as a map keyed by label.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskValues {
    pub entertainment: f64,
    pub smart_home: f64,
    pub general_query: f64,
    pub personal_request: f64,
}

impl TaskValues {
    pub fn new(entertainment: f64, smart_home: f64, general_query: f64, personal_request: f64) -> Self {
        Self {
            entertainment,
            smart_home,
            general_query,
            personal_request,
        }
    }

    pub fn splat(value: f64) -> Self {
        Self::new(value, value, value, value)
    }

    pub fn from_fn(mut f: impl FnMut(TaskCategory) -> f64) -> Self {
        Self::new(
            f(TaskCategory::Entertainment),
            f(TaskCategory::SmartHome),
            f(TaskCategory::GeneralQuery),
            f(TaskCategory::PersonalRequest),
        )
    }

    pub fn get(&self, c: TaskCategory) -> f64 {
        match c {
            TaskCategory::Entertainment => self.entertainment,
            TaskCategory::SmartHome => self.smart_home,
            TaskCategory::GeneralQuery => self.general_query,
            TaskCategory::PersonalRequest => self.personal_request,
        }
    }

    pub fn get_mut(&mut self, c: TaskCategory) -> &mut f64 {
        match c {
            TaskCategory::Entertainment => &mut self.entertainment,
            TaskCategory::SmartHome => &mut self.smart_home,
            TaskCategory::GeneralQuery => &mut self.general_query,
            TaskCategory::PersonalRequest => &mut self.personal_request,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskCategory, f64)> + '_ {
        TaskCategory::ALL.into_iter().map(move |c| (c, self.get(c)))
    }

    pub fn sum(&self) -> f64 {
        self.iter().map(|(_, v)| v).sum()
    }
}

/// Probability distribution over task categories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaskValues", into = "TaskValues")]
pub struct TaskDistribution(TaskValues);

impl TryFrom<TaskValues> for TaskDistribution {
    type Error = ValidationError;

    fn try_from(v: TaskValues) -> Result<Self, ValidationError> {
        for (c, p) in v.iter() {
            if !p.is_finite() || p < 0.0 {
                return Err(ValidationError::new(
                    c.label(),
                    format!("must be non-negative, got {p}"),
                ));
            }
        }
        if (v.sum() - 1.0).abs() > SUM_TOLERANCE {
            return Err(ValidationError::new(
                "distribution",
                format!("must sum to 1, got {}", v.sum()),
            ));
        }
        Ok(Self(v))
    }
}

impl From<TaskDistribution> for TaskValues {
    fn from(d: TaskDistribution) -> Self {
        d.0
    }
}

impl TaskDistribution {
    pub fn uniform() -> Self {
        Self(TaskValues::splat(0.25))
    }

    pub fn point(category: TaskCategory) -> Self {
        Self(TaskValues::from_fn(|c| if c == category { 1.0 } else { 0.0 }))
    }

    /// The smart voice assistant usage mix used as the default global
    /// distribution: 32.7 / 16.0 / 31.9 / 19.4 percent.
    pub fn voice_assistant() -> Self {
        validate_distribution(TaskValues::new(32.7, 16.0, 31.9, 19.4).iter())
            .expect("constant distribution is valid")
    }

    pub fn get(&self, c: TaskCategory) -> f64 {
        self.0.get(c)
    }

    pub fn values(&self) -> &TaskValues {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskCategory, f64)> + '_ {
        self.0.iter()
    }

    /// Categories whose global share is below the uniform share.
    pub fn minority_classes(&self) -> Vec<TaskCategory> {
        TaskCategory::ALL
            .into_iter()
            .filter(|c| self.get(*c) < 0.25)
            .collect()
    }

    pub fn majority_classes(&self) -> Vec<TaskCategory> {
        TaskCategory::ALL
            .into_iter()
            .filter(|c| self.get(*c) >= 0.25)
            .collect()
    }
}

/// Normalize non-negative per-category values into a distribution.
/// Categories that do not appear count as zero.
pub fn validate_distribution(
    raw: impl IntoIterator<Item = (TaskCategory, f64)>,
) -> Result<TaskDistribution, ValidationError> {
    let mut values = TaskValues::default();
    for (c, v) in raw {
        if !v.is_finite() || v < 0.0 {
            return Err(ValidationError::new(
                c.label(),
                format!("must be non-negative, got {v}"),
            ));
        }
        *values.get_mut(c) = v;
    }
    let total = values.sum();
    if total <= 0.0 {
        return Err(ValidationError::new("distribution", "all values are zero"));
    }
    Ok(TaskDistribution(TaskValues::from_fn(|c| values.get(c) / total)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerState {
    Mains,
    BatteryHigh,
    BatteryLow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareSpec {
    pub processor_class: String,
    pub ram_mb: u32,
    pub power_state: PowerState,
    pub available_levels: Vec<QuantizationLevel>,
}

impl HardwareSpec {
    /// A device exposing every level from INT4 up to `max_level`.
    pub fn up_to(
        processor_class: impl Into<String>,
        ram_mb: u32,
        power_state: PowerState,
        max_level: QuantizationLevel,
    ) -> Self {
        Self {
            processor_class: processor_class.into(),
            ram_mb,
            power_state,
            available_levels: QuantizationLevel::ALL
                .into_iter()
                .filter(|l| *l <= max_level)
                .collect(),
        }
    }

    /// Levels must be non-empty, ascending and gap-free from INT4: support for
    /// a precision implies support for everything below it.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.processor_class.trim().is_empty() {
            return Err(ValidationError::new("processor_class", "must not be empty"));
        }
        if self.available_levels.is_empty() {
            return Err(ValidationError::new("available_levels", "must not be empty"));
        }
        let expected = &QuantizationLevel::ALL[..self.available_levels.len().min(4)];
        if self.available_levels.len() > 4 || self.available_levels != expected {
            return Err(ValidationError::new(
                "available_levels",
                "must be a gap-free ascending run starting at INT4",
            ));
        }
        Ok(())
    }

    pub fn max_level(&self) -> QuantizationLevel {
        *self
            .available_levels
            .last()
            .expect("validated hardware has levels")
    }

    pub fn supports(&self, level: QuantizationLevel) -> bool {
        self.available_levels.contains(&level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceLocation {
    Bedroom,
    LivingRoom,
    Kitchen,
    Office,
    Other,
}

impl DeviceLocation {
    pub const ALL: [DeviceLocation; 5] = [
        DeviceLocation::Bedroom,
        DeviceLocation::LivingRoom,
        DeviceLocation::Kitchen,
        DeviceLocation::Office,
        DeviceLocation::Other,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionTime {
    Daytime,
    Nighttime,
    Mixed,
}

impl InteractionTime {
    pub const ALL: [InteractionTime; 3] = [
        InteractionTime::Daytime,
        InteractionTime::Nighttime,
        InteractionTime::Mixed,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionFrequency {
    Low,
    Medium,
    High,
}

impl InteractionFrequency {
    pub const ALL: [InteractionFrequency; 3] = [
        InteractionFrequency::Low,
        InteractionFrequency::Medium,
        InteractionFrequency::High,
    ];

    /// 0 for low, 1 for medium, 2 for high.
    pub fn ordinal(self) -> u8 {
        self as u8
    }
}

/// Observable usage descriptors collected during the interview.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextualFactors {
    pub device_location: DeviceLocation,
    pub interaction_time: InteractionTime,
    pub interaction_frequency: InteractionFrequency,
    pub task_type_mix: TaskDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataQuantity {
    Low,
    High,
}

/// Data properties derived from the context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferredFactors {
    pub noise_level: NoiseLevel,
    pub data_quantity: DataQuantity,
    pub data_distribution: TaskDistribution,
}

/// Expected model behaviour at one level on one hardware tier.
///
/// `relative_energy` and `latency_norm` are fractions of a full-precision
/// reference run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceEstimate {
    pub accuracy: f64,
    pub relative_energy: f64,
    pub latency_norm: f64,
}

impl PerformanceEstimate {
    pub fn new(accuracy: f64, relative_energy: f64, latency_norm: f64) -> Self {
        Self {
            accuracy,
            relative_energy,
            latency_norm,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let in_half_open = |v: f64| v.is_finite() && v > 0.0 && v <= 1.0;
        if !(self.accuracy.is_finite() && (0.0..=1.0).contains(&self.accuracy)) {
            return Err(ValidationError::new("accuracy", "must lie in [0, 1]"));
        }
        if !in_half_open(self.relative_energy) {
            return Err(ValidationError::new("relative_energy", "must lie in (0, 1]"));
        }
        if !in_half_open(self.latency_norm) {
            return Err(ValidationError::new("latency_norm", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Per-level performance of one hardware tier.
pub type PerfTable = BTreeMap<QuantizationLevel, PerformanceEstimate>;

/// Range checks per entry plus monotonicity in bit width for every metric.
pub fn validate_perf_table(table: &PerfTable) -> Result<(), ValidationError> {
    if table.is_empty() {
        return Err(ValidationError::new("table", "must not be empty"));
    }
    for (level, est) in table {
        est.validate().map_err(|e| e.within(level.label()))?;
    }
    for ((lo, a), (hi, b)) in table.iter().zip(table.iter().skip(1)) {
        let checks = [
            ("accuracy", a.accuracy, b.accuracy),
            ("relative_energy", a.relative_energy, b.relative_energy),
            ("latency_norm", a.latency_norm, b.latency_norm),
        ];
        for (name, below, above) in checks {
            if above < below {
                return Err(ValidationError::new(
                    format!("{hi}.{name}"),
                    format!("must not decrease from {lo} ({below}) to {hi} ({above})"),
                ));
            }
        }
    }
    Ok(())
}

/// Opaque client identifier; ordering is lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClientId(String);

impl ClientId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClientId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// A user's verbatim per-round judgement of the level they ran at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRecord {
    pub client_id: ClientId,
    pub round: u64,
    pub level: QuantizationLevel,
    pub ratings: FactorValues,
    #[serde(default)]
    pub free_text: String,
}

impl FeedbackRecord {
    pub fn validate(&self) -> Result<(), ValidationError> {
        self.ratings
            .check_unit_interval()
            .map_err(|e| e.within("ratings"))
    }
}

/// Everything the planner knows about one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientProfile {
    pub client_id: ClientId,
    pub hardware: HardwareSpec,
    pub context: ContextualFactors,
    pub inferred: InferredFactors,
    pub estimated_weights: SensitivityWeights,
    /// Contribution multiplier C_q per available level.
    pub contribution_estimate: BTreeMap<QuantizationLevel, f64>,
}

impl ClientProfile {
    pub fn validate(&self) -> Result<(), ValidationError> {
        self.hardware.validate().map_err(|e| e.within("hardware"))?;
        for level in &self.hardware.available_levels {
            match self.contribution_estimate.get(level) {
                Some(c) if c.is_finite() && *c > 0.0 => {}
                Some(c) => {
                    return Err(ValidationError::new(
                        format!("contribution_estimate.{level}"),
                        format!("must be positive, got {c}"),
                    ))
                }
                None => {
                    return Err(ValidationError::new(
                        format!("contribution_estimate.{level}"),
                        "missing",
                    ))
                }
            }
        }
        Ok(())
    }
}

/// Per-client level assignments for one federated round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub round: u64,
    pub assignments: BTreeMap<ClientId, QuantizationLevel>,
    pub slot_usage: BTreeMap<QuantizationLevel, u32>,
    pub utilization: f64,
    /// Clients that kept their optimum without a free aggregation slot.
    #[serde(default)]
    pub over_capacity: Vec<ClientId>,
}

impl RoundPlan {
    pub fn empty(round: u64) -> Self {
        Self {
            round,
            assignments: BTreeMap::new(),
            slot_usage: BTreeMap::new(),
            utilization: 0.0,
            over_capacity: Vec::new(),
        }
    }

    /// Level histogram of the assignments.
    pub fn histogram(assignments: &BTreeMap<ClientId, QuantizationLevel>) -> BTreeMap<QuantizationLevel, u32> {
        let mut usage = BTreeMap::new();
        for level in assignments.values() {
            *usage.entry(*level).or_insert(0) += 1;
        }
        usage
    }
}

/// Level index helpers used by table-backed modules.
pub(crate) fn level_slot(level: QuantizationLevel) -> usize {
    level.index()
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn weights_already_normalized_are_kept() {
        let w = validate_weights(FactorValues::new(0.5, 0.3, 0.2).iter()).unwrap();
        assert!(close(w.get(Factor::Accuracy), 0.5));
        assert!(close(w.get(Factor::Energy), 0.3));
        assert!(close(w.get(Factor::Latency), 0.2));
    }

    #[test]
    fn weights_rescale_proportionally_in_any_order() {
        let w = validate_weights([
            (Factor::Latency, 2.0),
            (Factor::Accuracy, 1.0),
            (Factor::Energy, 1.0),
        ])
        .unwrap();
        assert_eq!(w.values(), &FactorValues::new(0.25, 0.25, 0.5));
    }

    #[test]
    fn degenerate_weights_are_rejected() {
        let err = validate_weights(FactorValues::splat(0.0).iter()).unwrap_err();
        assert_eq!(err.field, "weights");
        let err = validate_weights(FactorValues::new(0.5, -0.1, 0.2).iter()).unwrap_err();
        assert_eq!(err.field, "energy");
        let err = validate_weights([(Factor::Accuracy, 1.0), (Factor::Energy, 1.0)]).unwrap_err();
        assert_eq!(err.field, "latency");
    }

    #[test]
    fn voice_assistant_distribution() {
        let d = validate_distribution(TaskValues::new(32.7, 16.0, 31.9, 19.4).iter()).unwrap();
        assert!(close(d.get(TaskCategory::Entertainment), 0.327));
        assert!(close(d.get(TaskCategory::SmartHome), 0.160));
        assert!(close(d.get(TaskCategory::GeneralQuery), 0.319));
        assert!(close(d.get(TaskCategory::PersonalRequest), 0.194));
        assert_eq!(d, TaskDistribution::voice_assistant());
        assert_eq!(d.minority_classes(), [TaskCategory::SmartHome, TaskCategory::PersonalRequest]);
        assert_eq!(d.majority_classes(), [TaskCategory::Entertainment, TaskCategory::GeneralQuery]);
    }

    #[test]
    fn point_and_uniform_distributions() {
        let d = validate_distribution(TaskValues::new(1.0, 0.0, 0.0, 0.0).iter()).unwrap();
        assert_eq!(d, TaskDistribution::point(TaskCategory::Entertainment));
        let d = validate_distribution(TaskValues::splat(1.0).iter()).unwrap();
        assert_eq!(d, TaskDistribution::uniform());
        assert!(validate_distribution(TaskValues::splat(0.0).iter()).is_err());
    }

    #[test]
    fn weights_reject_bad_json() {
        let bad = r#"{"weights":{"accuracy":0.5,"energy":0.5,"latency":0.5}}"#;
        assert!(serde_json::from_str::<SensitivityWeights>(bad).is_err());
        let missing = r#"{"weights":{"accuracy":0.5,"energy":0.5}}"#;
        assert!(serde_json::from_str::<SensitivityWeights>(missing).is_err());
        let ok = r#"{"weights":{"accuracy":0.5,"energy":0.25,"latency":0.25}}"#;
        assert!(serde_json::from_str::<SensitivityWeights>(ok).is_ok());
    }

    #[test]
    fn level_labels_and_order() {
        assert_eq!(serde_json::to_string(&QuantizationLevel::Fp16).unwrap(), "\"FP16\"");
        assert!(QuantizationLevel::Int4 < QuantizationLevel::Fp32);
        assert_eq!("int8".parse::<QuantizationLevel>().unwrap(), QuantizationLevel::Int8);
        assert!("fp64".parse::<QuantizationLevel>().is_err());
        assert_eq!(QuantizationLevel::Int8.precision_factor(), 0.25);
    }

    #[test]
    fn hardware_levels_must_be_contiguous_from_int4() {
        use QuantizationLevel::*;
        let mut hw = HardwareSpec::up_to("mid", 4096, PowerState::Mains, Fp16);
        assert!(hw.validate().is_ok());
        assert_eq!(hw.max_level(), Fp16);
        hw.available_levels = vec![Int4, Fp16];
        assert_eq!(hw.validate().unwrap_err().field, "available_levels");
        hw.available_levels = vec![Int8, Fp16];
        assert!(hw.validate().is_err());
        hw.available_levels.clear();
        assert!(hw.validate().is_err());
    }

    #[test]
    fn perf_table_must_be_monotone() {
        use QuantizationLevel::*;
        let mut t = PerfTable::new();
        t.insert(Int4, PerformanceEstimate::new(0.6, 0.2, 0.3));
        t.insert(Int8, PerformanceEstimate::new(0.8, 0.4, 0.5));
        assert!(validate_perf_table(&t).is_ok());
        t.insert(Fp16, PerformanceEstimate::new(0.7, 1.0, 1.0));
        assert_eq!(validate_perf_table(&t).unwrap_err().field, "FP16.accuracy");
        t.insert(Fp16, PerformanceEstimate::new(0.9, 0.0, 1.0));
        assert!(validate_perf_table(&t).is_err());
    }

    #[test]
    fn feedback_ratings_range_is_checked() {
        let mut fb = FeedbackRecord {
            client_id: "c1".into(),
            round: 0,
            level: QuantizationLevel::Int8,
            ratings: FactorValues::new(0.2, 0.4, 0.9),
            free_text: String::new(),
        };
        assert!(fb.validate().is_ok());
        fb.ratings.energy = 1.5;
        assert_eq!(fb.validate().unwrap_err().field, "ratings.energy");
    }

    proptest! {
        #[test]
        fn validate_weights_is_idempotent(raw in arb::factor_values(0.0, 5.0)) {
            prop_assume!(raw.sum() > 1e-6);
            let once = validate_weights(raw.iter()).unwrap();
            let twice = validate_weights(once.iter()).unwrap();
            for f in Factor::ALL {
                prop_assert!((once.get(f) - twice.get(f)).abs() < 1e-15);
            }
            prop_assert!((once.values().sum() - 1.0).abs() < SUM_TOLERANCE);
        }

        #[test]
        fn generated_profiles_satisfy_invariants(p in arb::profile()) {
            prop_assert!(p.validate().is_ok());
            prop_assert!((p.estimated_weights.values().sum() - 1.0).abs() < SUM_TOLERANCE);
            prop_assert!((p.context.task_type_mix.values().sum() - 1.0).abs() < SUM_TOLERANCE);
        }

        #[test]
        fn profile_json_round_trip(p in arb::profile()) {
            let json = serde_json::to_string(&p).unwrap();
            let back: ClientProfile = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn plan_feedback_and_table_round_trip(
            plan in arb::round_plan(),
            fb in arb::feedback(),
            table in arb::perf_table(),
        ) {
            prop_assert!(validate_perf_table(&table).is_ok());
            let back: RoundPlan = serde_json::from_str(&serde_json::to_string(&plan).unwrap()).unwrap();
            prop_assert_eq!(back, plan);
            let back: FeedbackRecord = serde_json::from_str(&serde_json::to_string(&fb).unwrap()).unwrap();
            prop_assert_eq!(back, fb);
            let back: PerfTable = serde_json::from_str(&serde_json::to_string(&table).unwrap()).unwrap();
            prop_assert_eq!(back, table);
        }
    }
}
