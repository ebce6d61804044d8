//! Round scheduling, level packing and contribution accounting.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::accuracy::AccuracyProxy;
use crate::domain::{level_slot, ClientId, ClientProfile, PerfTable, QuantizationLevel, RoundPlan, TaskValues};
use crate::error::{Error, Result, ValidationError};
use crate::satisfaction::{best_score, build_reward_penalty, score_levels};

pub const DEFAULT_EPSILON: f64 = 0.05;

/// Aggregation slots per level and round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotConfig {
    pub capacity: BTreeMap<QuantizationLevel, u32>,
}

impl SlotConfig {
    /// `per_level` slots at every level.
    pub fn uniform(per_level: u32) -> Self {
        Self {
            capacity: QuantizationLevel::ALL.into_iter().map(|l| (l, per_level)).collect(),
        }
    }

    pub fn unbounded() -> Self {
        Self::uniform(u32::MAX)
    }

    pub fn capacity_of(&self, level: QuantizationLevel) -> u32 {
        self.capacity.get(&level).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.capacity.values().map(|c| u64::from(*c)).sum()
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.total() == 0 {
            return Err(ValidationError::new("capacity", "needs at least one positive entry"));
        }
        Ok(())
    }

    fn utilization(&self, within_capacity: usize) -> f64 {
        (within_capacity as f64 / self.total() as f64).clamp(0.0, 1.0)
    }
}

/// Round-robin window of `participation` clients in id order, starting at
/// `round * participation` and wrapping around.
pub fn select_clients(round: u64, population: &[ClientId], participation: usize) -> Result<Vec<ClientId>> {
    if population.is_empty() {
        return Err(ValidationError::new("population", "must not be empty").into());
    }
    if participation == 0 || participation > population.len() {
        return Err(ValidationError::new(
            "participation",
            format!("must lie in 1..={}, got {participation}", population.len()),
        )
        .into());
    }
    let mut sorted = population.to_vec();
    sorted.sort();
    let n = sorted.len() as u64;
    let start = (round % n) * (participation as u64 % n) % n;
    Ok((0..participation as u64)
        .map(|i| sorted[((start + i) % n) as usize].clone())
        .collect())
}

struct Candidates {
    /// Merit-filtered levels, best first.
    levels: Vec<QuantizationLevel>,
    optimum: QuantizationLevel,
    best: f64,
}

fn candidates(profile: &ClientProfile, perf: &PerfTable, epsilon: f64) -> Result<Candidates> {
    let available = &profile.hardware.available_levels;
    let table = build_reward_penalty(perf, available)?;
    let scores = score_levels(&profile.estimated_weights, &table, &profile.contribution_estimate, available)?;
    let best = *best_score(&scores).ok_or(Error::EmptyCandidates)?;
    let mut kept: Vec<_> = scores
        .into_iter()
        .filter(|s| s.satisfaction >= best.satisfaction - epsilon)
        .collect();
    // stable: equal scores keep ascending level order
    kept.sort_by(|a, b| b.satisfaction.total_cmp(&a.satisfaction));
    Ok(Candidates {
        levels: kept.into_iter().map(|s| s.level).collect(),
        optimum: best.level,
        best: best.satisfaction,
    })
}

struct Packing<'a> {
    candidates: &'a [Candidates],
    free: [u64; 4],
    holders: [Vec<usize>; 4],
    assigned: Vec<Option<QuantizationLevel>>,
}

impl Packing<'_> {
    fn take(&mut self, client: usize, level: QuantizationLevel) {
        self.holders[level_slot(level)].push(client);
        self.assigned[client] = Some(level);
    }

    /// Find room for `client`, moving already placed clients to other
    /// candidates of theirs if needed.
    fn augment(&mut self, client: usize, visited: &mut [bool; 4]) -> bool {
        for &level in &self.candidates[client].levels {
            let slot = level_slot(level);
            if visited[slot] {
                continue;
            }
            visited[slot] = true;
            if self.free[slot] > 0 {
                self.free[slot] -= 1;
                self.take(client, level);
                return true;
            }
            for holder in self.holders[slot].clone() {
                if self.augment(holder, visited) {
                    self.holders[slot].retain(|h| *h != holder);
                    self.take(client, level);
                    return true;
                }
            }
        }
        false
    }
}

/// Assign a level to every profiled client.
///
/// Each client's candidates are the levels scoring within `epsilon` of its
/// optimum. Clients are served by descending optimum score (ties by id) and
/// take their best candidate that still has a free slot. Clients left
/// without one are then fitted in by reshuffling others among their own
/// candidates where possible, so the number of clients within capacity is
/// maximal. Whoever still has no slot trains at its optimum, over capacity.
pub fn plan_round(
    round: u64,
    profiles: &[ClientProfile],
    perf_tables: &BTreeMap<ClientId, PerfTable>,
    slots: &SlotConfig,
    epsilon: f64,
) -> Result<RoundPlan> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(ValidationError::new("epsilon", "must be a non-negative number").into());
    }
    slots.validate().map_err(|e| e.within("slots"))?;
    let mut seen = BTreeSet::new();
    for p in profiles {
        if !seen.insert(&p.client_id) {
            return Err(ValidationError::new("profiles", format!("duplicate client `{}`", p.client_id)).into());
        }
    }

    let cands = profiles
        .iter()
        .map(|p| {
            let perf = perf_tables
                .get(&p.client_id)
                .ok_or_else(|| Error::NoPerformanceData(format!("no table for client `{}`", p.client_id)))?;
            candidates(p, perf, epsilon)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.sort_by(|&a, &b| {
        cands[b]
            .best
            .total_cmp(&cands[a].best)
            .then_with(|| profiles[a].client_id.cmp(&profiles[b].client_id))
    });

    let mut packing = Packing {
        candidates: &cands,
        free: QuantizationLevel::ALL.map(|l| u64::from(slots.capacity_of(l))),
        holders: Default::default(),
        assigned: vec![None; profiles.len()],
    };
    let mut waiting = Vec::new();
    for &i in &order {
        let free = cands[i].levels.iter().copied().find(|l| packing.free[level_slot(*l)] > 0);
        match free {
            Some(level) => {
                packing.free[level_slot(level)] -= 1;
                packing.take(i, level);
            }
            None => waiting.push(i),
        }
    }
    for &i in &waiting {
        packing.augment(i, &mut [false; 4]);
    }

    let mut assignments = BTreeMap::new();
    let mut over_capacity = Vec::new();
    let mut within = 0;
    for (i, p) in profiles.iter().enumerate() {
        let level = match packing.assigned[i] {
            Some(level) => {
                within += 1;
                level
            }
            None => {
                over_capacity.push(p.client_id.clone());
                cands[i].optimum
            }
        };
        assignments.insert(p.client_id.clone(), level);
    }
    over_capacity.sort();
    Ok(RoundPlan {
        round,
        slot_usage: RoundPlan::histogram(&assignments),
        assignments,
        utilization: slots.utilization(within),
        over_capacity,
    })
}

/// A plan for levels chosen elsewhere. Slots are handed out in id order;
/// clients beyond a level's capacity are over capacity.
pub fn fixed_plan(
    round: u64,
    assignments: BTreeMap<ClientId, QuantizationLevel>,
    slots: &SlotConfig,
) -> Result<RoundPlan> {
    slots.validate().map_err(|e| e.within("slots"))?;
    let mut used = BTreeMap::new();
    let mut over_capacity = Vec::new();
    let mut within = 0;
    for (id, level) in &assignments {
        let n = used.entry(*level).or_insert(0u32);
        if *n < slots.capacity_of(*level) {
            *n += 1;
            within += 1;
        } else {
            over_capacity.push(id.clone());
        }
    }
    Ok(RoundPlan {
        round,
        slot_usage: RoundPlan::histogram(&assignments),
        assignments,
        utilization: slots.utilization(within),
        over_capacity,
    })
}

/// What the server knows about the global model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalModelState {
    pub round: u64,
    pub class_mass: TaskValues,
    pub accuracy: TaskValues,
}

impl GlobalModelState {
    pub fn new() -> Self {
        Self {
            round: 0,
            class_mass: TaskValues::default(),
            accuracy: TaskValues::default(),
        }
    }
}

impl Default for GlobalModelState {
    fn default() -> Self {
        Self::new()
    }
}

/// Credit each assigned client's data to the classes it holds, scaled by
/// quantity and precision, then advance the round.
pub fn aggregate_round(
    plan: &RoundPlan,
    profiles: &BTreeMap<ClientId, ClientProfile>,
    state: &GlobalModelState,
    quantity: &BTreeMap<ClientId, f64>,
    proxy: &AccuracyProxy,
) -> Result<GlobalModelState> {
    let mut class_mass = state.class_mass;
    for (id, level) in &plan.assignments {
        let profile = profiles.get(id).ok_or_else(|| Error::UnknownClient(id.clone()))?;
        let q = *quantity.get(id).ok_or_else(|| Error::MissingQuantity(id.clone()))?;
        if !(q.is_finite() && q >= 0.0) {
            return Err(ValidationError::new(format!("quantity.{id}"), "must be a non-negative number").into());
        }
        let scale = q * level.precision_factor();
        for (c, d) in profile.inferred.data_distribution.iter() {
            *class_mass.get_mut(c) += scale * d;
        }
    }
    Ok(GlobalModelState {
        round: state.round + 1,
        class_mass,
        accuracy: proxy.accuracy(&class_mass),
    })
}
