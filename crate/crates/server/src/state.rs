//! Server state and the operations behind each endpoint.
//!
//! Everything here is synchronous; the HTTP layer wraps one instance in a
//! mutex so that mutations are serialized.

use std::collections::{BTreeMap, BTreeSet};

use precplan_core::domain::{
    ClientId, ClientProfile, ContextualFactors, DataQuantity, Factor, FactorValues, FeedbackRecord, HardwareSpec,
    PerfTable, QuantizationLevel, RoundPlan, TaskValues,
};
use precplan_core::fixtures::default_hw_records;
use precplan_core::planner::{aggregate_round, plan_round, select_clients, GlobalModelState};
use precplan_core::profiling::{
    build_profile, ExtractionSource, ExtractorDefaults, FactorExtractor, InterviewSession, LlmClient, ProfileSettings,
    Scenario, Turn,
};
use precplan_core::store::{CaseStore, HwPerfStore, NewCase};
use precplan_core::{Error, ValidationError};
use serde::{Deserialize, Serialize};

use crate::config::ServerConfig;
use crate::error::ApiError;

pub type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone)]
pub struct ClientEntry {
    pub hardware: HardwareSpec,
    pub context: Option<ContextualFactors>,
    pub weight_hints: Option<FactorValues>,
    pub profile: Option<ClientProfile>,
    pub performance: Option<PerfTable>,
    /// Round and level of the most recent plan that included the client.
    pub last_assignment: Option<(u64, QuantizationLevel)>,
}

#[derive(Debug, Clone)]
struct SessionEntry {
    session: InterviewSession,
    /// Hardware proposed when a hardware-change interview was opened.
    pending_hardware: Option<HardwareSpec>,
}

/// Running summary of satisfaction implied by submitted feedback.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionStats {
    pub count: u64,
    pub mean: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl SatisfactionStats {
    fn record(&mut self, value: f64) {
        self.count += 1;
        self.mean += (value - self.mean) / self.count as f64;
        self.min = Some(self.min.map_or(value, |m| m.min(value)));
        self.max = Some(self.max.map_or(value, |m| m.max(value)));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub round: u64,
    pub class_mass: TaskValues,
    pub accuracy: TaskValues,
    pub satisfaction: SatisfactionStats,
    pub case_count: usize,
    pub client_count: usize,
    pub profiled_clients: usize,
}

/// Extraction work that can run without holding the state lock.
#[derive(Debug, Clone)]
pub struct PendingExtraction {
    pub session_id: String,
    pub client_id: ClientId,
    pub transcript: Vec<Turn>,
    pub extractor: FactorExtractor,
}

pub struct ServerState {
    config: ServerConfig,
    cases: CaseStore,
    hw: HwPerfStore,
    extractor: FactorExtractor,
    clients: BTreeMap<ClientId, ClientEntry>,
    sessions: BTreeMap<String, SessionEntry>,
    next_client: u64,
    next_session: u64,
    global: GlobalModelState,
    plans: BTreeMap<u64, RoundPlan>,
    aggregated: BTreeSet<u64>,
    satisfaction: SatisfactionStats,
}

impl ServerState {
    /// Open (or create) the stores and seed the hardware store with the
    /// default tiers when it is empty.
    pub fn new(config: ServerConfig) -> precplan_core::Result<Self> {
        config.validate()?;
        let (cases, mut hw) = match &config.data_dir {
            Some(dir) => (CaseStore::open(dir)?, HwPerfStore::open(dir)?),
            None => (CaseStore::in_memory(), HwPerfStore::in_memory()),
        };
        if hw.is_empty() {
            for record in default_hw_records() {
                hw.insert_hw(record)?;
            }
        }
        let llm = if config.llm.enabled() {
            Some(LlmClient::new(config.llm.clone())?)
        } else {
            None
        };
        let extractor = FactorExtractor {
            llm,
            ..FactorExtractor::rules_only(ExtractorDefaults::default())
        };
        Ok(Self {
            config,
            cases,
            hw,
            extractor,
            clients: BTreeMap::new(),
            sessions: BTreeMap::new(),
            next_client: 1,
            next_session: 1,
            global: GlobalModelState::new(),
            plans: BTreeMap::new(),
            aggregated: BTreeSet::new(),
            satisfaction: SatisfactionStats::default(),
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    fn settings(&self) -> ProfileSettings {
        ProfileSettings {
            k: self.config.k,
            hint_share: self.config.hint_share,
            strategy: self.config.strategy,
            beta: self.config.beta,
            global_dist: self.config.global_dist,
        }
    }

    fn client(&self, id: &ClientId) -> ApiResult<&ClientEntry> {
        self.clients
            .get(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown client `{id}`")))
    }

    fn client_mut(&mut self, id: &ClientId) -> ApiResult<&mut ClientEntry> {
        self.clients
            .get_mut(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown client `{id}`")))
    }

    pub fn register(&mut self, hardware: HardwareSpec) -> ApiResult<ClientId> {
        hardware.validate()?;
        let id = ClientId::new(format!("client-{:04}", self.next_client));
        self.next_client += 1;
        self.clients.insert(
            id.clone(),
            ClientEntry {
                hardware,
                context: None,
                weight_hints: None,
                profile: None,
                performance: None,
                last_assignment: None,
            },
        );
        Ok(id)
    }

    /// Open an interview and return its id and the first question.
    pub fn start_interview(
        &mut self,
        client_id: &ClientId,
        scenario: Scenario,
        hardware: Option<HardwareSpec>,
    ) -> ApiResult<(String, String)> {
        let entry = self.client(client_id)?;
        match scenario {
            Scenario::Initialization => {}
            Scenario::PreAggregation if entry.last_assignment.is_none() => {
                return Err(ApiError::conflict("client has not been assigned a level yet"));
            }
            Scenario::PreAggregation | Scenario::HardwareChange if entry.profile.is_none() => {
                return Err(ApiError::conflict("client has no profile yet; run the initialization interview first"));
            }
            _ => {}
        }
        if let Some(hw) = &hardware {
            if scenario != Scenario::HardwareChange {
                return Err(ApiError::invalid("hardware", "only accepted for hardware_change interviews"));
            }
            hw.validate().map_err(|e| ApiError::from(Error::from(e.within("hardware"))))?;
        }
        let mut session = InterviewSession::new(client_id.clone(), scenario);
        let (message, _) = session.interview_next(None)?;
        let session_id = format!("session-{:04}", self.next_session);
        self.next_session += 1;
        self.sessions.insert(
            session_id.clone(),
            SessionEntry {
                session,
                pending_hardware: hardware,
            },
        );
        Ok((session_id, message))
    }

    pub fn session(&self, session_id: &str) -> ApiResult<&InterviewSession> {
        self.sessions
            .get(session_id)
            .map(|e| &e.session)
            .ok_or_else(|| ApiError::not_found(format!("unknown session `{session_id}`")))
    }

    /// Record a user reply. When it completes an initialization interview the
    /// returned extraction job must be run and handed to
    /// [`ServerState::finish_initialization`]; other scenarios are finished
    /// here.
    pub fn post_message(
        &mut self,
        session_id: &str,
        text: &str,
    ) -> ApiResult<(String, bool, Option<PendingExtraction>)> {
        if text.trim().is_empty() {
            return Err(ApiError::invalid("text", "must not be empty"));
        }
        let entry = self
            .sessions
            .get_mut(session_id)
            .ok_or_else(|| ApiError::not_found(format!("unknown session `{session_id}`")))?;
        let (message, done) = entry.session.interview_next(Some(text))?;
        if !done {
            return Ok((message, false, None));
        }
        let session = entry.session.clone();
        let pending_hardware = entry.pending_hardware.clone();
        match session.scenario {
            Scenario::Initialization => {
                let job = PendingExtraction {
                    session_id: session_id.to_string(),
                    client_id: session.client_id.clone(),
                    transcript: session.transcript.clone(),
                    extractor: self.extractor.clone(),
                };
                Ok((message, true, Some(job)))
            }
            Scenario::PreAggregation => {
                self.finish_feedback_interview(&session)?;
                Ok((message, true, None))
            }
            Scenario::HardwareChange => {
                self.finish_hardware_interview(&session, pending_hardware)?;
                Ok((message, true, None))
            }
        }
    }

    /// Store what an initialization interview revealed and build the profile.
    pub fn finish_initialization(
        &mut self,
        job: &PendingExtraction,
        extracted: (ContextualFactors, FactorValues, ExtractionSource),
    ) -> ApiResult<()> {
        let (context, hints, source) = extracted;
        tracing::info!(client = %job.client_id, ?source, "initialization interview complete");
        if let Some(entry) = self.sessions.get_mut(&job.session_id) {
            entry.session.extracted = Some(context);
            entry.session.weight_hints = Some(hints);
        }
        let entry = self.client_mut(&job.client_id)?;
        entry.context = Some(context);
        entry.weight_hints = Some(hints);
        self.rebuild_profile(&job.client_id)?;
        Ok(())
    }

    fn finish_feedback_interview(&mut self, session: &InterviewSession) -> ApiResult<()> {
        let extraction = self.extractor.rules.extract(session.scenario, &session.transcript)?;
        let entry = self.client(&session.client_id)?;
        let (round, level) = entry
            .last_assignment
            .ok_or_else(|| ApiError::conflict("client has not been assigned a level yet"))?;
        let context = entry
            .context
            .ok_or_else(|| ApiError::conflict("client has no profile yet"))?;
        if let Some(ratings) = extraction.ratings {
            let free_text = session
                .answers()
                .last()
                .map(|(_, text)| text.to_string())
                .unwrap_or_default();
            let record = FeedbackRecord {
                client_id: session.client_id.clone(),
                round,
                level,
                ratings,
                free_text,
            };
            self.feedback(&session.client_id, record)?;
        }
        self.client_mut(&session.client_id)?.context = Some(extraction.apply(&context));
        self.rebuild_profile(&session.client_id)
    }

    fn finish_hardware_interview(
        &mut self,
        session: &InterviewSession,
        pending_hardware: Option<HardwareSpec>,
    ) -> ApiResult<()> {
        let extraction = self.extractor.rules.extract(session.scenario, &session.transcript)?;
        let entry = self.client_mut(&session.client_id)?;
        if let (Some(true), Some(hw)) = (extraction.hardware_confirmed, pending_hardware) {
            entry.hardware = hw;
        }
        if let Some(context) = entry.context {
            entry.context = Some(extraction.apply(&context));
        }
        self.rebuild_profile(&session.client_id)
    }

    fn rebuild_profile(&mut self, client_id: &ClientId) -> ApiResult<()> {
        let settings = self.settings();
        let entry = self.client(client_id)?;
        let (Some(context), Some(hints)) = (entry.context, entry.weight_hints) else {
            return Ok(());
        };
        let built = build_profile(
            client_id.clone(),
            &entry.hardware,
            &context,
            &hints,
            &self.cases,
            &self.hw,
            &settings,
        )?;
        let entry = self.client_mut(client_id)?;
        entry.profile = Some(built.profile);
        entry.performance = Some(built.performance);
        Ok(())
    }

    pub fn profile(&self, client_id: &ClientId) -> ApiResult<&ClientProfile> {
        self.client(client_id)?
            .profile
            .as_ref()
            .ok_or_else(|| ApiError::not_found(format!("client `{client_id}` has no profile yet")))
    }

    /// Schedule profiled clients for `round` and assign their levels.
    pub fn plan(&mut self, round: u64) -> ApiResult<RoundPlan> {
        if self.aggregated.contains(&round) {
            return Err(ApiError::conflict(format!("round {round} is already aggregated")));
        }
        let population: Vec<ClientId> = self
            .clients
            .iter()
            .filter(|(_, e)| e.profile.is_some())
            .map(|(id, _)| id.clone())
            .collect();
        if population.is_empty() {
            return Err(ApiError::conflict("no client has completed an interview yet"));
        }
        let participation = self.config.participation.min(population.len());
        let selected = select_clients(round, &population, participation)?;
        let mut profiles = Vec::with_capacity(selected.len());
        let mut tables = BTreeMap::new();
        for id in &selected {
            // pick up cases added since the profile was last built
            self.rebuild_profile(id)?;
            let entry = self.client(id)?;
            profiles.push(entry.profile.clone().expect("selected from profiled clients"));
            tables.insert(id.clone(), entry.performance.clone().expect("built with profile"));
        }
        let plan = plan_round(round, &profiles, &tables, &self.config.slots, self.config.epsilon)?;
        for (id, level) in &plan.assignments {
            self.client_mut(id)?.last_assignment = Some((round, *level));
        }
        self.plans.insert(round, plan.clone());
        Ok(plan)
    }

    /// Fold the stored plan for `round` into the global model state.
    pub fn aggregate(&mut self, round: u64) -> ApiResult<GlobalModelState> {
        let plan = self
            .plans
            .get(&round)
            .ok_or_else(|| ApiError::not_found(format!("no plan for round {round}")))?;
        if self.aggregated.contains(&round) {
            return Err(ApiError::conflict(format!("round {round} is already aggregated")));
        }
        let mut profiles = BTreeMap::new();
        let mut quantity = BTreeMap::new();
        for id in plan.assignments.keys() {
            let profile = self.profile(id)?;
            let q = match profile.inferred.data_quantity {
                DataQuantity::High => 2.0,
                DataQuantity::Low => 1.0,
            };
            quantity.insert(id.clone(), q);
            profiles.insert(id.clone(), profile.clone());
        }
        let next = aggregate_round(plan, &profiles, &self.global, &quantity, &self.config.accuracy)?;
        self.global = next.clone();
        self.aggregated.insert(round);
        Ok(next)
    }

    /// Store a feedback record as a new case and return its id.
    pub fn feedback(&mut self, client_id: &ClientId, record: FeedbackRecord) -> ApiResult<u64> {
        if &record.client_id != client_id {
            return Err(ApiError::invalid("client_id", "does not match the client in the path"));
        }
        record.validate()?;
        let profile = self.profile(client_id)?;
        if !profile.hardware.supports(record.level) {
            return Err(ApiError::invalid("level", format!("{} is not available on this device", record.level)));
        }
        let weights = profile.estimated_weights;
        let case = NewCase {
            context: profile.context,
            level: record.level,
            inferred_weights: weights,
            feedback: record,
        };
        let satisfaction = Factor::ALL
            .iter()
            .map(|f| weights.get(*f) * (2.0 * case.feedback.ratings.get(*f) - 1.0))
            .sum();
        let id = self.cases.insert_case(case)?;
        self.satisfaction.record(satisfaction);
        Ok(id)
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            round: self.global.round,
            class_mass: self.global.class_mass,
            accuracy: self.global.accuracy,
            satisfaction: self.satisfaction,
            case_count: self.cases.len(),
            client_count: self.clients.len(),
            profiled_clients: self.clients.values().filter(|c| c.profile.is_some()).count(),
        }
    }
}

impl From<ValidationError> for ApiError {
    fn from(e: ValidationError) -> Self {
        ApiError::from(Error::from(e))
    }
}
