//! Synthetic-population experiments.
//!
//! Each simulated client has hidden true weights and context. Personalized
//! planners only see what the scripted interview and the case store reveal;
//! the reported satisfaction is always computed from the hidden truth.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Normal};
use serde::{Deserialize, Serialize};

use crate::accuracy::AccuracyProxy;
use crate::domain::{
    validate_distribution, validate_weights, ClientId, ClientProfile, ContextualFactors, DataQuantity,
    DeviceLocation, Factor, FactorValues, FeedbackRecord, HardwareSpec, InteractionFrequency, InteractionTime,
    PerfTable, QuantizationLevel, SensitivityWeights, TaskCategory, TaskDistribution, TaskValues,
};
use crate::error::{Error, Result, ValidationError};
use crate::fixtures::default_hw_records;
use crate::planner::{
    aggregate_round, fixed_plan, plan_round, select_clients, GlobalModelState, SlotConfig, DEFAULT_EPSILON,
};
use crate::profiling::extract::{
    describe_frequency, describe_location, describe_ranking, describe_task_mix, describe_time, VAGUE_REPLY,
};
use crate::profiling::{build_profile, infer_factors, InterviewSession, ProfileSettings, RuleExtractor, Scenario, Slot, Turn};
use crate::satisfaction::{build_reward_penalty, satisfaction_score, Strategy, DEFAULT_BETA};
use crate::store::{CaseStore, HwPerfRecord, HwPerfStore, NewCase, DEFAULT_K};

pub const REPORT_FILE: &str = "report.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const HISTOGRAM_BINS: usize = 20;

/// How levels are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planner {
    /// Interview, retrieve similar cases, pick each client's best level.
    Personalized,
    /// One fixed level per hardware tier.
    Unified,
    /// Personalized, but with most of the weight moved onto energy.
    EnergyPriority,
}

impl Planner {
    pub const ALL: [Planner; 3] = [Planner::Personalized, Planner::Unified, Planner::EnergyPriority];

    pub fn label(self) -> &'static str {
        match self {
            Planner::Personalized => "personalized",
            Planner::Unified => "unified",
            Planner::EnergyPriority => "energy_priority",
        }
    }
}

impl fmt::Display for Planner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Planner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Planner::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::UnknownLabel {
                kind: "planner",
                value: s.to_string(),
            })
    }
}

/// Relative frequencies of each context label in the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextPriors {
    pub device_location: BTreeMap<DeviceLocation, f64>,
    pub interaction_time: BTreeMap<InteractionTime, f64>,
    pub interaction_frequency: BTreeMap<InteractionFrequency, f64>,
}

impl Default for ContextPriors {
    fn default() -> Self {
        Self {
            device_location: DeviceLocation::ALL.into_iter().map(|l| (l, 1.0)).collect(),
            interaction_time: InteractionTime::ALL.into_iter().map(|t| (t, 1.0)).collect(),
            interaction_frequency: InteractionFrequency::ALL.into_iter().map(|f| (f, 1.0)).collect(),
        }
    }
}

fn categorical<T: Copy + Ord>(field: &str, all: &[T], prior: &BTreeMap<T, f64>) -> Result<WeightedIndex<f64>> {
    let weights: Vec<f64> = all.iter().map(|l| prior.get(l).copied().unwrap_or(0.0)).collect();
    WeightedIndex::new(&weights)
        .map_err(|e| ValidationError::new(format!("context_priors.{field}"), e.to_string()).into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_clients: usize,
    pub num_rounds: u64,
    pub participation: usize,
    pub planner: Planner,
    pub strategy: Strategy,
    pub seed: u64,
    /// Means of the per-factor normal draws, before clipping and
    /// normalization.
    pub weight_means: FactorValues,
    pub weight_stddev: f64,
    pub global_dist: TaskDistribution,
    pub accuracy_kappa: f64,
    pub accuracy_max: TaskValues,
    /// Per-level slots; defaults to `participation` at every level.
    pub slots: Option<SlotConfig>,
    pub epsilon: f64,
    pub k: usize,
    pub beta: f64,
    /// Share of interview hints when blending with retrieved cases.
    pub hint_share: f64,
    /// Concentration of each client's task mix around `global_dist`.
    pub mix_concentration: f64,
    pub vague_probability: f64,
    pub feedback_noise: f64,
    /// Weight put on energy by the energy-priority planner.
    pub energy_mass: f64,
    pub context_priors: ContextPriors,
    /// Hardware tiers, drawn uniformly.
    pub tiers: Vec<HwPerfRecord>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let proxy = AccuracyProxy::default();
        Self {
            num_clients: 100,
            num_rounds: 100,
            participation: 10,
            planner: Planner::Personalized,
            strategy: Strategy::Fedavg,
            seed: 0,
            weight_means: FactorValues::new(0.4, 0.35, 0.25),
            weight_stddev: 0.15,
            global_dist: TaskDistribution::voice_assistant(),
            accuracy_kappa: proxy.kappa,
            accuracy_max: proxy.max,
            slots: None,
            epsilon: DEFAULT_EPSILON,
            k: DEFAULT_K,
            beta: DEFAULT_BETA,
            hint_share: 0.5,
            mix_concentration: 5.0,
            vague_probability: 0.1,
            feedback_noise: 0.05,
            energy_mass: 0.7,
            context_priors: ContextPriors::default(),
            tiers: default_hw_records(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.num_clients == 0 {
            return Err(ValidationError::new("num_clients", "must be positive"));
        }
        if self.participation == 0 || self.participation > self.num_clients {
            return Err(ValidationError::new("participation", "must lie in 1..=num_clients"));
        }
        for (f, m) in self.weight_means.iter() {
            if !(m.is_finite() && m >= 0.0) {
                return Err(ValidationError::new(format!("weight_means.{f}"), "must be non-negative"));
            }
        }
        let non_negative = [
            ("weight_stddev", self.weight_stddev),
            ("epsilon", self.epsilon),
            ("beta", self.beta),
            ("feedback_noise", self.feedback_noise),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ValidationError::new(name, "must be a non-negative number"));
            }
        }
        let unit = [
            ("hint_share", self.hint_share),
            ("vague_probability", self.vague_probability),
            ("energy_mass", self.energy_mass),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(ValidationError::new(name, "must lie in [0, 1]"));
            }
        }
        if !(self.mix_concentration.is_finite() && self.mix_concentration > 0.0) {
            return Err(ValidationError::new("mix_concentration", "must be positive"));
        }
        if self.k == 0 {
            return Err(ValidationError::new("k", "must be positive"));
        }
        self.proxy().validate().map_err(|e| e.within("accuracy"))?;
        if let Some(slots) = &self.slots {
            slots.validate().map_err(|e| e.within("slots"))?;
        }
        if self.tiers.is_empty() {
            return Err(ValidationError::new("tiers", "must not be empty"));
        }
        for (i, t) in self.tiers.iter().enumerate() {
            t.validate().map_err(|e| e.within(&format!("tiers.{i}")))?;
        }
        Ok(())
    }

    pub fn proxy(&self) -> AccuracyProxy {
        AccuracyProxy {
            kappa: self.accuracy_kappa,
            max: self.accuracy_max,
        }
    }

    pub fn slot_config(&self) -> SlotConfig {
        self.slots
            .clone()
            .unwrap_or_else(|| SlotConfig::uniform(self.participation as u32))
    }

    fn profile_settings(&self) -> ProfileSettings {
        ProfileSettings {
            k: self.k,
            hint_share: self.hint_share,
            strategy: self.strategy,
            beta: self.beta,
            global_dist: self.global_dist,
        }
    }
}

/// A simulated user with hidden ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimClient {
    pub client_id: ClientId,
    pub hardware: HardwareSpec,
    pub true_context: ContextualFactors,
    pub true_weights: SensitivityWeights,
    pub data_quantity: f64,
    pub noise_seed: u64,
}

/// Whole-percent shares summing to 100, by largest remainder.
fn whole_percents(shares: [f64; 4]) -> [u32; 4] {
    let total: f64 = shares.iter().sum();
    let exact = shares.map(|s| s / total * 100.0);
    let mut out = exact.map(|e| e.floor() as u32);
    let mut left = 100 - out.iter().sum::<u32>();
    let mut by_remainder: Vec<usize> = (0..4).collect();
    by_remainder.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for i in by_remainder {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

fn percent_distribution(percent: [u32; 4]) -> Result<TaskDistribution> {
    Ok(validate_distribution(
        TaskCategory::ALL.into_iter().zip(percent.map(f64::from)),
    )?)
}

/// Draw the population. Pure function of the config.
pub fn spawn_population(config: &ExperimentConfig) -> Result<Vec<SimClient>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let priors = &config.context_priors;
    let locations = categorical("device_location", &DeviceLocation::ALL, &priors.device_location)?;
    let times = categorical("interaction_time", &InteractionTime::ALL, &priors.interaction_time)?;
    let frequencies = categorical("interaction_frequency", &InteractionFrequency::ALL, &priors.interaction_frequency)?;
    let normals = Factor::ALL.map(|f| {
        Normal::new(config.weight_means.get(f), config.weight_stddev).expect("validated stddev")
    });
    let alpha = TaskCategory::ALL.map(|c| (config.mix_concentration * 4.0 * config.global_dist.get(c)).max(1e-3));
    let dirichlet = Dirichlet::new(alpha).map_err(|e| ValidationError::new("global_dist", e.to_string()))?;
    let width = (config.num_clients.max(2) - 1).to_string().len().max(3);

    let mut clients = Vec::with_capacity(config.num_clients);
    for i in 0..config.num_clients {
        let tier = rng.random_range(0..config.tiers.len());
        let raw = Factor::ALL
            .into_iter()
            .zip(&normals)
            .map(|(f, n)| (f, n.sample(&mut rng).clamp(0.01, 1.0)));
        let true_weights = validate_weights(raw)?;
        let shares: [f64; 4] = dirichlet.sample(&mut rng);
        let true_context = ContextualFactors {
            device_location: DeviceLocation::ALL[locations.sample(&mut rng)],
            interaction_time: InteractionTime::ALL[times.sample(&mut rng)],
            interaction_frequency: InteractionFrequency::ALL[frequencies.sample(&mut rng)],
            task_type_mix: percent_distribution(whole_percents(shares))?,
        };
        let data_quantity = match infer_factors(&true_context).data_quantity {
            DataQuantity::High => 2.0,
            DataQuantity::Low => 1.0,
        };
        clients.push(SimClient {
            client_id: ClientId::new(format!("client-{i:0width$}")),
            hardware: config.tiers[tier].hardware.clone(),
            true_context,
            true_weights,
            data_quantity,
            noise_seed: rng.random(),
        });
    }
    Ok(clients)
}

fn truthful_reply(client: &SimClient, slot: Slot) -> String {
    let ctx = &client.true_context;
    match slot {
        Slot::DeviceLocation => describe_location(ctx.device_location),
        Slot::UsageTime => describe_time(ctx.interaction_time),
        Slot::UsageFrequency => describe_frequency(ctx.interaction_frequency),
        Slot::TaskTypes => {
            let mix = ctx.task_type_mix;
            describe_task_mix(TaskCategory::ALL.map(|c| (mix.get(c) * 100.0).round() as u32))
        }
        Slot::PriorityRanking => describe_ranking(client.true_weights.ranking()),
        _ => VAGUE_REPLY.to_string(),
    }
}

/// Initialization interview answered from the client's true context and
/// weights. Each answer is vague with probability `vague_probability`.
pub fn simulate_interview(client: &SimClient, vague_probability: f64) -> Result<Vec<Turn>> {
    let mut rng = ChaCha8Rng::seed_from_u64(client.noise_seed);
    let mut session = InterviewSession::new(client.client_id.clone(), Scenario::Initialization);
    session.interview_next(None)?;
    for slot in Scenario::Initialization.slots() {
        let vague = rng.random::<f64>() < vague_probability;
        let reply = if vague {
            VAGUE_REPLY.to_string()
        } else {
            truthful_reply(client, slot)
        };
        session.interview_next(Some(&reply))?;
    }
    debug_assert!(session.is_done());
    Ok(session.transcript)
}

/// Satisfaction at `level` under the client's true weights, with no
/// contribution bonus.
pub fn ground_truth_satisfaction(client: &SimClient, level: QuantizationLevel, perf: &PerfTable) -> Result<f64> {
    if !client.hardware.supports(level) {
        return Err(Error::MissingLevels(vec![level]));
    }
    let table = build_reward_penalty(perf, &[level])?;
    let neutral = BTreeMap::from([(level, 1.0)]);
    Ok(satisfaction_score(&client.true_weights, &table, &neutral, level)?.satisfaction)
}

/// The unified baseline's level: one below the tier's highest, or the only
/// level of a single-level tier.
pub fn unified_level(hardware: &HardwareSpec) -> QuantizationLevel {
    let levels = &hardware.available_levels;
    levels[levels.len().saturating_sub(2)]
}

/// `mass` on energy; the rest split between accuracy and latency in the
/// proportion of the estimate.
pub fn energy_priority_weights(estimate: &SensitivityWeights, mass: f64) -> Result<SensitivityWeights> {
    let a = estimate.get(Factor::Accuracy);
    let l = estimate.get(Factor::Latency);
    let (a, l) = if a + l > 0.0 { (a / (a + l), l / (a + l)) } else { (0.5, 0.5) };
    let rest = 1.0 - mass;
    Ok(validate_weights(FactorValues::new(rest * a, mass, rest * l).iter())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u64,
    pub mean_satisfaction: f64,
    pub mean_relative_energy: f64,
    pub utilization: f64,
    pub accuracy: TaskValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub planner: Planner,
    pub strategy: Strategy,
    pub seed: u64,
    pub mean_satisfaction: f64,
    pub satisfaction_histogram: Vec<HistogramBin>,
    pub mean_relative_energy: f64,
    pub per_class_accuracy: TaskValues,
    pub final_class_mass: TaskValues,
    pub mean_utilization: f64,
    pub per_round_series: Vec<RoundSummary>,
}

fn histogram(values: &[f64]) -> Vec<HistogramBin> {
    let mut bins: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|i| HistogramBin {
            lower: (2 * i as i64 - HISTOGRAM_BINS as i64) as f64 / HISTOGRAM_BINS as f64,
            upper: (2 * (i as i64 + 1) - HISTOGRAM_BINS as i64) as f64 / HISTOGRAM_BINS as f64,
            count: 0,
        })
        .collect();
    for v in values {
        let i = ((v + 1.0) / 2.0 * HISTOGRAM_BINS as f64).floor();
        bins[(i.max(0.0) as usize).min(HISTOGRAM_BINS - 1)].count += 1;
    }
    bins
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// What the server learned about a client at planning time.
struct Learned {
    context: ContextualFactors,
    weights: SensitivityWeights,
}

/// Run `num_rounds` rounds of select, profile, plan, feedback, aggregate.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let population = spawn_population(config)?;
    let slots = config.slot_config();
    let proxy = config.proxy();
    let settings = config.profile_settings();
    let extractor = RuleExtractor::default();

    let mut hw_store = HwPerfStore::in_memory();
    for record in &config.tiers {
        hw_store.insert_hw(record.clone())?;
    }
    let clients: BTreeMap<ClientId, &SimClient> = population.iter().map(|c| (c.client_id.clone(), c)).collect();
    let ids: Vec<ClientId> = clients.keys().cloned().collect();
    let mut perf = BTreeMap::new();
    let mut truth = BTreeMap::new();
    let mut quantity = BTreeMap::new();
    for c in &population {
        perf.insert(c.client_id.clone(), hw_store.lookup_performance(&c.hardware)?);
        truth.insert(
            c.client_id.clone(),
            ClientProfile {
                client_id: c.client_id.clone(),
                hardware: c.hardware.clone(),
                context: c.true_context,
                inferred: infer_factors(&c.true_context),
                estimated_weights: c.true_weights,
                contribution_estimate: c.hardware.available_levels.iter().map(|l| (*l, 1.0)).collect(),
            },
        );
        quantity.insert(c.client_id.clone(), c.data_quantity);
    }

    let mut interviews: BTreeMap<ClientId, (ContextualFactors, FactorValues)> = BTreeMap::new();
    let mut cases = CaseStore::in_memory();
    let mut state = GlobalModelState::new();
    let mut feedback_rng = ChaCha8Rng::seed_from_u64(config.seed);
    feedback_rng.set_stream(1);
    let noise = Normal::new(0.0, config.feedback_noise).expect("validated noise");

    let mut all_sat = Vec::new();
    let mut all_energy = Vec::new();
    let mut series = Vec::with_capacity(config.num_rounds as usize);
    for round in 0..config.num_rounds {
        let selected = select_clients(round, &ids, config.participation)?;
        let mut learned = BTreeMap::new();
        let plan = if config.planner == Planner::Unified {
            let assignments = selected
                .iter()
                .map(|id| (id.clone(), unified_level(&clients[id].hardware)))
                .collect();
            fixed_plan(round, assignments, &slots)?
        } else {
            let mut profiles = Vec::with_capacity(selected.len());
            let mut tables = BTreeMap::new();
            for id in &selected {
                if !interviews.contains_key(id) {
                    let transcript = simulate_interview(clients[id], config.vague_probability)?;
                    interviews.insert(id.clone(), extractor.extract_factors(&transcript)?);
                }
                let (context, hints) = &interviews[id];
                let built = build_profile(
                    id.clone(),
                    &clients[id].hardware,
                    context,
                    hints,
                    &cases,
                    &hw_store,
                    &settings,
                )?;
                let mut planning = built.profile;
                learned.insert(
                    id.clone(),
                    Learned {
                        context: planning.context,
                        weights: planning.estimated_weights,
                    },
                );
                if config.planner == Planner::EnergyPriority {
                    planning.estimated_weights = energy_priority_weights(&planning.estimated_weights, config.energy_mass)?;
                }
                tables.insert(id.clone(), built.performance);
                profiles.push(planning);
            }
            plan_round(round, &profiles, &tables, &slots, config.epsilon)?
        };

        let mut round_sat = Vec::with_capacity(plan.assignments.len());
        let mut round_energy = Vec::with_capacity(plan.assignments.len());
        for (id, level) in &plan.assignments {
            let table = &perf[id];
            round_sat.push(ground_truth_satisfaction(clients[id], *level, table)?);
            round_energy.push(table[level].relative_energy);
            if let Some(l) = learned.get(id) {
                let est = table[level];
                let truth_rewards = FactorValues::new(est.accuracy, 1.0 - est.relative_energy, 1.0 - est.latency_norm);
                let ratings = FactorValues::from_fn(|f| {
                    (truth_rewards.get(f) + noise.sample(&mut feedback_rng)).clamp(0.0, 1.0)
                });
                cases.insert_case(NewCase {
                    context: l.context,
                    level: *level,
                    feedback: FeedbackRecord {
                        client_id: id.clone(),
                        round,
                        level: *level,
                        ratings,
                        free_text: String::new(),
                    },
                    inferred_weights: l.weights,
                })?;
            }
        }
        state = aggregate_round(&plan, &truth, &state, &quantity, &proxy)?;
        series.push(RoundSummary {
            round,
            mean_satisfaction: mean(&round_sat),
            mean_relative_energy: mean(&round_energy),
            utilization: plan.utilization,
            accuracy: state.accuracy,
        });
        all_sat.extend(round_sat);
        all_energy.extend(round_energy);
    }

    Ok(ExperimentReport {
        planner: config.planner,
        strategy: config.strategy,
        seed: config.seed,
        mean_satisfaction: mean(&all_sat),
        satisfaction_histogram: histogram(&all_sat),
        mean_relative_energy: mean(&all_energy),
        per_class_accuracy: state.accuracy,
        final_class_mass: state.class_mass,
        mean_utilization: mean(&series.iter().map(|s| s.utilization).collect::<Vec<_>>()),
        per_round_series: series,
    })
}

pub const METRICS_COLUMNS: [&str; 7] = [
    "round",
    "mean_satisfaction",
    "mean_relative_energy",
    "accuracy_entertainment",
    "accuracy_smart_home",
    "accuracy_general_query",
    "accuracy_personal_request",
];

/// Write `report.json` and `metrics.csv` into `dir`, creating it if needed.
pub fn emit_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join(REPORT_FILE);
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;

    let csv_path = dir.join(METRICS_FILE);
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::Csv {
        path: csv_path.clone(),
        source: e,
    })?;
    let rows = std::iter::once(METRICS_COLUMNS.map(String::from).to_vec()).chain(report.per_round_series.iter().map(|s| {
        let mut row = vec![
            s.round.to_string(),
            s.mean_satisfaction.to_string(),
            s.mean_relative_energy.to_string(),
        ];
        row.extend(TaskCategory::ALL.map(|c| s.accuracy.get(c).to_string()));
        row
    }));
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Csv {
            path: csv_path.clone(),
            source: e,
        })?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok((json_path, csv_path))
}
