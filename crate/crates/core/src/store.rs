//! The two knowledge stores: historical cases (context, level, feedback) for
//! retrieval, and per-hardware performance tables.
//!
//! Both persist as append-only newline-delimited JSON with the whole store
//! held in memory. Writes are serialized by `&mut self`; readers share `&self`.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_perf_table, validate_weights, ContextualFactors, DeviceLocation, FeedbackRecord,
    HardwareSpec, InteractionTime, PerfTable, QuantizationLevel, SensitivityWeights, TaskCategory,
};
use crate::error::{Error, Result, ValidationError};

pub const CASES_FILE: &str = "cases.ndjson";
pub const HWPERF_FILE: &str = "hwperf.ndjson";
pub const FEATURE_LEN: usize = 13;
pub const DEFAULT_K: usize = 5;

/// Fixed 13-dimensional encoding of a context:
/// one-hot location (5), one-hot time (3), frequency ordinal / 2, task mix (4).
pub fn encode_context(context: &ContextualFactors) -> Vec<f64> {
    let mut v = Vec::with_capacity(FEATURE_LEN);
    v.extend(
        DeviceLocation::ALL
            .iter()
            .map(|l| if *l == context.device_location { 1.0 } else { 0.0 }),
    );
    v.extend(
        InteractionTime::ALL
            .iter()
            .map(|t| if *t == context.interaction_time { 1.0 } else { 0.0 }),
    );
    v.push(f64::from(context.interaction_frequency.ordinal()) / 2.0);
    v.extend(TaskCategory::ALL.iter().map(|c| context.task_type_mix.get(*c)));
    v
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRecord {
    pub id: u64,
    pub context: ContextualFactors,
    pub level: QuantizationLevel,
    pub feedback: FeedbackRecord,
    pub inferred_weights: SensitivityWeights,
    pub feature: Vec<f64>,
}

impl CaseRecord {
    fn check(&self) -> Result<(), ValidationError> {
        if self.feature != encode_context(&self.context) {
            return Err(ValidationError::new("feature", "does not match the encoded context"));
        }
        self.feedback.validate().map_err(|e| e.within("feedback"))
    }
}

/// Input for [`CaseStore::insert_case`]; the store assigns id and feature.
#[derive(Debug, Clone, PartialEq)]
pub struct NewCase {
    pub context: ContextualFactors,
    pub level: QuantizationLevel,
    pub feedback: FeedbackRecord,
    pub inferred_weights: SensitivityWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HwPerfRecord {
    pub hardware: HardwareSpec,
    pub table: PerfTable,
}

impl HwPerfRecord {
    pub fn validate(&self) -> Result<(), ValidationError> {
        self.hardware.validate().map_err(|e| e.within("hardware"))?;
        let covered: Vec<_> = self.table.keys().copied().collect();
        if covered != self.hardware.available_levels {
            return Err(ValidationError::new(
                "table",
                "must cover exactly the hardware's available levels",
            ));
        }
        validate_perf_table(&self.table).map_err(|e| e.within("table"))
    }
}

/// Append-only NDJSON file. `None` keeps everything in memory.
#[derive(Debug)]
struct NdjsonLog {
    path: Option<PathBuf>,
}

impl NdjsonLog {
    fn load<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(path, e)),
        };
        let mut lines = Vec::new();
        for line in BufReader::new(file).lines() {
            lines.push(line.map_err(|e| Error::io(path, e))?);
        }
        let mut records = Vec::with_capacity(lines.len());
        let last = lines.len();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(r) => records.push(r),
                // a torn final line is an append that never completed
                Err(e) if i + 1 == last && e.is_eof() => break,
                Err(e) => {
                    return Err(Error::CorruptRecord {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        Ok(records)
    }

    fn append<T: Serialize>(&self, record: &T) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.write_all(&line).map_err(|e| Error::io(path, e))?;
        file.sync_data().map_err(|e| Error::io(path, e))
    }
}

/// Context-quantization-feedback cases with cosine retrieval.
#[derive(Debug)]
pub struct CaseStore {
    log: NdjsonLog,
    records: Vec<CaseRecord>,
}

impl CaseStore {
    pub fn in_memory() -> Self {
        Self {
            log: NdjsonLog { path: None },
            records: Vec::new(),
        }
    }

    /// Open (or create on first insert) `cases.ndjson` under `dir`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(CASES_FILE);
        let records: Vec<CaseRecord> = NdjsonLog::load(&path)?;
        let mut prev = None;
        for (i, r) in records.iter().enumerate() {
            let corrupt = |message: String| Error::CorruptRecord {
                path: path.clone(),
                line: i + 1,
                message,
            };
            r.check().map_err(|e| corrupt(e.to_string()))?;
            if prev.is_some_and(|p| r.id <= p) {
                return Err(corrupt(format!("id {} is not increasing", r.id)));
            }
            prev = Some(r.id);
        }
        Ok(Self {
            log: NdjsonLog { path: Some(path) },
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[CaseRecord] {
        &self.records
    }

    /// Durably append a case; nothing becomes visible if the write fails.
    pub fn insert_case(&mut self, case: NewCase) -> Result<u64> {
        case.feedback.validate().map_err(|e| e.within("feedback"))?;
        let id = self.records.last().map_or(0, |r| r.id + 1);
        let record = CaseRecord {
            id,
            feature: encode_context(&case.context),
            context: case.context,
            level: case.level,
            feedback: case.feedback,
            inferred_weights: case.inferred_weights,
        };
        self.log.append(&record)?;
        self.records.push(record);
        Ok(id)
    }

    /// Top-`k` cases by cosine similarity to `query`, most similar first;
    /// equal similarities keep insertion order.
    pub fn retrieve_similar(&self, query: &ContextualFactors, k: usize) -> Result<Vec<(&CaseRecord, f64)>> {
        if k < 1 {
            return Err(ValidationError::new("k", "must be at least 1").into());
        }
        let q = encode_context(query);
        let mut scored: Vec<_> = self
            .records
            .iter()
            .map(|r| (r, cosine_similarity(&r.feature, &q).clamp(0.0, 1.0)))
            .collect();
        // stable sort keeps older records first among equals
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        scored.truncate(k);
        Ok(scored)
    }
}

/// Similarity-weighted mean of the cases' weights, renormalized.
///
/// Returns [`Error::NoPrior`] when there is nothing to average.
pub fn estimate_weights_from_cases(cases: &[(&CaseRecord, f64)]) -> Result<SensitivityWeights> {
    if cases.iter().any(|(_, s)| !s.is_finite() || *s < 0.0) {
        return Err(ValidationError::new("similarity", "must be non-negative").into());
    }
    let total: f64 = cases.iter().map(|(_, s)| s).sum();
    if total <= 0.0 {
        return Err(Error::NoPrior);
    }
    let mean = crate::domain::FactorValues::from_fn(|f| {
        cases
            .iter()
            .map(|(c, s)| s * c.inferred_weights.get(f))
            .sum::<f64>()
            / total
    });
    Ok(validate_weights(mean.iter())?)
}

/// Hardware-quantization-performance records.
#[derive(Debug)]
pub struct HwPerfStore {
    log: NdjsonLog,
    records: Vec<HwPerfRecord>,
}

impl HwPerfStore {
    pub fn in_memory() -> Self {
        Self {
            log: NdjsonLog { path: None },
            records: Vec::new(),
        }
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(HWPERF_FILE);
        let records: Vec<HwPerfRecord> = NdjsonLog::load(&path)?;
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(|e| Error::CorruptRecord {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(Self {
            log: NdjsonLog { path: Some(path) },
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[HwPerfRecord] {
        &self.records
    }

    /// Append a record; its id is its position in the store.
    pub fn insert_hw(&mut self, record: HwPerfRecord) -> Result<u64> {
        record.validate()?;
        self.log.append(&record)?;
        self.records.push(record);
        Ok(self.records.len() as u64 - 1)
    }

    /// Performance table for `hw`: the first record of the same processor
    /// class, else the record nearest in RAM (ties to the smaller RAM).
    /// The result is restricted to `hw`'s available levels.
    pub fn lookup_performance(&self, hw: &HardwareSpec) -> Result<PerfTable> {
        let record = self
            .records
            .iter()
            .find(|r| r.hardware.processor_class == hw.processor_class)
            .or_else(|| {
                self.records.iter().min_by_key(|r| {
                    (
                        r.hardware.ram_mb.abs_diff(hw.ram_mb),
                        r.hardware.ram_mb,
                    )
                })
            })
            .ok_or_else(|| Error::NoPerformanceData("hardware store is empty".into()))?;
        let table: PerfTable = record
            .table
            .iter()
            .filter(|(l, _)| hw.supports(**l))
            .map(|(l, e)| (*l, *e))
            .collect();
        if table.is_empty() {
            return Err(Error::NoPerformanceData(format!(
                "record `{}` covers none of the levels of `{}`",
                record.hardware.processor_class, hw.processor_class
            )));
        }
        Ok(table)
    }
}
