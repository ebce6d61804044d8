//! Reward-penalty scoring of quantization levels.
//!
//! For level `q`:
//!
//! ```text
//! reward_total(q)  = C_q * sum_f w_f * R_f(q)
//! penalty_total(q) = sum_f w_f * P_f(q)
//! satisfaction(q)  = reward_total(q) - penalty_total(q)
//! ```
//!
//! and the chosen level is the argmax of satisfaction, lowest bit width first
//! on ties.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{
    FactorValues, InferredFactors, PerfTable, QuantizationLevel, SensitivityWeights, TaskDistribution,
};
use crate::error::{Error, Result, ValidationError};

/// Default strength of the class-biased contribution multipliers.
pub const DEFAULT_BETA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScore {
    pub level: QuantizationLevel,
    pub reward_total: f64,
    pub penalty_total: f64,
    pub satisfaction: f64,
}

/// `R_f(q)` and `P_f(q)` for every level of one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardPenaltyTable {
    pub rewards: BTreeMap<QuantizationLevel, FactorValues>,
    pub penalties: BTreeMap<QuantizationLevel, FactorValues>,
}

impl RewardPenaltyTable {
    pub fn levels(&self) -> impl Iterator<Item = QuantizationLevel> + '_ {
        self.rewards.keys().copied()
    }

    fn rewards_at(&self, q: QuantizationLevel) -> Result<&FactorValues> {
        self.rewards.get(&q).ok_or(Error::MissingLevels(vec![q]))
    }

    fn penalties_at(&self, q: QuantizationLevel) -> Result<&FactorValues> {
        self.penalties.get(&q).ok_or(Error::MissingLevels(vec![q]))
    }
}

/// Rewards are the normalized performance figures (accuracy, energy saved,
/// latency saved); each penalty is the complement of its reward.
///
/// Every level in `required` must be present in `perf`.
pub fn build_reward_penalty(
    perf: &PerfTable,
    required: &[QuantizationLevel],
) -> Result<RewardPenaltyTable> {
    if perf.is_empty() {
        return Err(Error::NoPerformanceData("performance table is empty".into()));
    }
    let missing: Vec<_> = required
        .iter()
        .copied()
        .filter(|q| !perf.contains_key(q))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingLevels(missing));
    }
    let mut rewards = BTreeMap::new();
    let mut penalties = BTreeMap::new();
    for (level, est) in perf {
        let r = FactorValues::new(
            est.accuracy,
            1.0 - est.relative_energy,
            1.0 - est.latency_norm,
        );
        r.check_unit_interval()
            .map_err(|e| e.within(level.label()))?;
        rewards.insert(*level, r);
        penalties.insert(*level, FactorValues::from_fn(|f| 1.0 - r.get(f)));
    }
    Ok(RewardPenaltyTable { rewards, penalties })
}

fn weighted_sum(weights: &SensitivityWeights, values: &FactorValues) -> f64 {
    weights.iter().map(|(f, w)| w * values.get(f)).sum()
}

pub fn total_reward(
    weights: &SensitivityWeights,
    table: &RewardPenaltyTable,
    c_q: f64,
    q: QuantizationLevel,
) -> Result<f64> {
    if !(c_q.is_finite() && c_q > 0.0) {
        return Err(ValidationError::new("c_q", format!("must be positive, got {c_q}")).into());
    }
    Ok(c_q * weighted_sum(weights, table.rewards_at(q)?))
}

pub fn total_penalty(
    weights: &SensitivityWeights,
    table: &RewardPenaltyTable,
    q: QuantizationLevel,
) -> Result<f64> {
    Ok(weighted_sum(weights, table.penalties_at(q)?))
}

pub fn satisfaction_score(
    weights: &SensitivityWeights,
    table: &RewardPenaltyTable,
    contribution: &BTreeMap<QuantizationLevel, f64>,
    q: QuantizationLevel,
) -> Result<LevelScore> {
    let c_q = *contribution.get(&q).ok_or(Error::MissingLevels(vec![q]))?;
    let reward_total = total_reward(weights, table, c_q, q)?;
    let penalty_total = total_penalty(weights, table, q)?;
    Ok(LevelScore {
        level: q,
        reward_total,
        penalty_total,
        satisfaction: reward_total - penalty_total,
    })
}

/// Scores for each candidate, in ascending level order.
pub fn score_levels(
    weights: &SensitivityWeights,
    table: &RewardPenaltyTable,
    contribution: &BTreeMap<QuantizationLevel, f64>,
    candidates: &[QuantizationLevel],
) -> Result<Vec<LevelScore>> {
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted
        .into_iter()
        .map(|q| satisfaction_score(weights, table, contribution, q))
        .collect()
}

/// The first score with maximal satisfaction in ascending level order.
pub fn best_score(scores: &[LevelScore]) -> Option<&LevelScore> {
    scores.iter().fold(None, |best: Option<&LevelScore>, s| match best {
        Some(b) if b.satisfaction >= s.satisfaction => Some(b),
        _ => Some(s),
    })
}

/// Argmax of satisfaction over `candidates`; ties go to the lower bit width.
pub fn optimal_level(
    weights: &SensitivityWeights,
    table: &RewardPenaltyTable,
    contribution: &BTreeMap<QuantizationLevel, f64>,
    candidates: &[QuantizationLevel],
) -> Result<QuantizationLevel> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let scores = score_levels(weights, table, contribution, candidates)?;
    Ok(best_score(&scores).expect("non-empty").level)
}

/// How the server values contributions from different data distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Every sample counts the same.
    Fedavg,
    /// Favour clients holding rare classes.
    ClassEqual,
    /// Favour clients holding common classes.
    MajorityCentric,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Fedavg => "fedavg",
            Strategy::ClassEqual => "class_equal",
            Strategy::MajorityCentric => "majority_centric",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(Strategy::Fedavg),
            "class_equal" => Ok(Strategy::ClassEqual),
            "majority_centric" => Ok(Strategy::MajorityCentric),
            other => Err(Error::UnknownLabel {
                kind: "strategy",
                value: other.to_string(),
            }),
        }
    }
}

/// Contribution multiplier `C_q`.
///
/// `fedavg` is neutral. The biased strategies scale with the client's rarity
/// `r = sum_c d_c (1 - g_c)` or majority alignment `m = sum_c d_c g_c`, and with
/// the normalized bit width, so higher levels earn a larger bonus.
pub fn contribution_multiplier(
    strategy: Strategy,
    inferred: &InferredFactors,
    global: &TaskDistribution,
    level: QuantizationLevel,
    beta: f64,
) -> f64 {
    let local = &inferred.data_distribution;
    let alignment: f64 = local.iter().map(|(c, d)| d * global.get(c)).sum();
    let bias = match strategy {
        Strategy::Fedavg => return 1.0,
        Strategy::ClassEqual => local.iter().map(|(c, d)| d * (1.0 - global.get(c))).sum(),
        Strategy::MajorityCentric => alignment,
    };
    1.0 + beta * bias * level.precision_factor()
}

/// `C_q` for every level of `levels`.
pub fn contribution_estimates(
    strategy: Strategy,
    inferred: &InferredFactors,
    global: &TaskDistribution,
    levels: &[QuantizationLevel],
    beta: f64,
) -> BTreeMap<QuantizationLevel, f64> {
    levels
        .iter()
        .map(|q| (*q, contribution_multiplier(strategy, inferred, global, *q, beta)))
        .collect()
}
