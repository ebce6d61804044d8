use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_weights, ClientId, ClientProfile, ContextualFactors, FactorValues, HardwareSpec,
    PerfTable, TaskDistribution,
};
use crate::error::{Error, Result};
use crate::profiling::infer::infer_factors;
use crate::satisfaction::{contribution_estimates, Strategy, DEFAULT_BETA};
use crate::store::{estimate_weights_from_cases, CaseStore, HwPerfStore, DEFAULT_K};

/// Knobs of the profiling pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileSettings {
    /// Number of similar cases retrieved.
    pub k: usize,
    /// Share of the interview hints in the blended weights; the rest comes
    /// from retrieved cases.
    pub hint_share: f64,
    pub strategy: Strategy,
    pub beta: f64,
    pub global_dist: TaskDistribution,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            hint_share: 0.5,
            strategy: Strategy::Fedavg,
            beta: DEFAULT_BETA,
            global_dist: TaskDistribution::voice_assistant(),
        }
    }
}

/// A profile together with the performance table it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltProfile {
    pub profile: ClientProfile,
    pub performance: PerfTable,
}

/// Assemble a client profile:
///
/// 1. take the hardware spec as given,
/// 2. look up its quantization-performance table,
/// 3. and 4. use the interview's context and weight hints,
/// 5. retrieve the `k` most similar past cases,
/// 6. blend hints with the case-based weight estimate and compute `C_q`
///    for every available level.
pub fn build_profile(
    client_id: ClientId,
    hardware: &HardwareSpec,
    context: &ContextualFactors,
    weight_hints: &FactorValues,
    cases: &CaseStore,
    hw_store: &HwPerfStore,
    settings: &ProfileSettings,
) -> Result<BuiltProfile> {
    hardware.validate().map_err(|e| e.within("hardware"))?;
    let performance = hw_store.lookup_performance(hardware)?;

    let hints = validate_weights(weight_hints.iter()).map_err(|e| e.within("weight_hints"))?;
    let retrieved = cases.retrieve_similar(context, settings.k.max(1))?;
    let estimated_weights = match estimate_weights_from_cases(&retrieved) {
        Ok(from_cases) => {
            let s = settings.hint_share;
            let blend = FactorValues::from_fn(|f| s * hints.get(f) + (1.0 - s) * from_cases.get(f));
            validate_weights(blend.iter())?
        }
        Err(Error::NoPrior) => hints,
        Err(e) => return Err(e),
    };

    let inferred = infer_factors(context);
    let contribution_estimate = contribution_estimates(
        settings.strategy,
        &inferred,
        &settings.global_dist,
        &hardware.available_levels,
        settings.beta,
    );
    let profile = ClientProfile {
        client_id,
        hardware: hardware.clone(),
        context: *context,
        inferred,
        estimated_weights,
        contribution_estimate,
    };
    profile.validate()?;
    Ok(BuiltProfile {
        profile,
        performance,
    })
}
