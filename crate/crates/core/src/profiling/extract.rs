//! Turning interview transcripts into contextual factors and weight hints.
//!
//! The rule-based path maps answers to labels with keyword tables. The
//! `describe_*` functions are the inverse of those tables: the sentence they
//! produce for a label is read back as that label.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_distribution, validate_weights, ContextualFactors, DeviceLocation, Factor,
    FactorValues, InteractionFrequency, InteractionTime, TaskCategory, TaskDistribution,
    TaskValues,
};
use crate::error::{Error, Result};
use crate::profiling::llm::{ChatMessage, LlmClient};
use crate::profiling::script::{answers, Role, Scenario, Slot, Turn};

/// Hint weights given to the factors ranked first, second and third.
pub const RANK_HINTS: [f64; 3] = [0.5, 0.3, 0.2];

/// Reply a simulated user gives when unsure.
pub const VAGUE_REPLY: &str = "Hmm, I'm not sure.";

static VAGUE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"not sure|don'?t know|dunno|no idea|unsure|hard to say").unwrap());
static CLAUSE_SPLIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[,;.]|\band\b|\bplus\b|\bthen\b").unwrap());
static PERCENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\d+(?:\.\d+)?)\s*%").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());

static LOCATION_WORDS: LazyLock<Vec<(DeviceLocation, Regex)>> = LazyLock::new(|| {
    vec![
        (DeviceLocation::Bedroom, Regex::new(r"\bbed ?rooms?\b|\bbedside\b|\bnightstand\b").unwrap()),
        (
            DeviceLocation::LivingRoom,
            Regex::new(r"\bliving ?room\b|\blounge\b|\bsitting room\b|\bfamily room\b").unwrap(),
        ),
        (DeviceLocation::Kitchen, Regex::new(r"\bkitchen\b").unwrap()),
        (DeviceLocation::Office, Regex::new(r"\boffice\b|\bstudy\b|\bdesk\b").unwrap()),
        (
            DeviceLocation::Other,
            Regex::new(r"\bgarage\b|\bhallway\b|\bsomewhere else\b|\belsewhere\b|\bother\b").unwrap(),
        ),
    ]
});

static DAY_WORDS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(day|days|daytime|morning|mornings|afternoon|afternoons)\b").unwrap());
static NIGHT_WORDS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(night|nights|nighttime|evening|evenings|late)\b").unwrap());
static MIXED_WORDS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(both|mix|mixed|any ?time|all hours)\b").unwrap());

static FREQUENCY_WORDS: LazyLock<Vec<(InteractionFrequency, Regex)>> = LazyLock::new(|| {
    vec![
        (
            InteractionFrequency::High,
            Regex::new(r"all day|constantly|all the time|many times a day|very often|nonstop").unwrap(),
        ),
        (
            InteractionFrequency::Medium,
            Regex::new(r"every day|daily|times a day|once a day|regularly").unwrap(),
        ),
        (
            InteractionFrequency::Low,
            Regex::new(r"week|rarely|occasionally|seldom|now and then|once in a while").unwrap(),
        ),
    ]
});

static TASK_WORDS: LazyLock<Vec<(TaskCategory, Regex)>> = LazyLock::new(|| {
    vec![
        (
            TaskCategory::Entertainment,
            Regex::new(r"music|entertainment|songs?|podcasts?|radio|games?|movies?").unwrap(),
        ),
        (
            TaskCategory::SmartHome,
            Regex::new(r"smart home|lights?|thermostat|home control|appliances?|heating").unwrap(),
        ),
        (
            TaskCategory::GeneralQuery,
            Regex::new(r"general|questions?|quer(y|ies)|weather|news|facts?|search").unwrap(),
        ),
        (
            TaskCategory::PersonalRequest,
            Regex::new(r"personal|reminders?|calendar|alarms?|messages?|timers?|shopping list").unwrap(),
        ),
    ]
});

static AMOUNT_WORDS: LazyLock<Vec<(f64, Regex)>> = LazyLock::new(|| {
    vec![
        (0.0, Regex::new(r"\bnever\b|\bnot at all\b").unwrap()),
        (4.0, Regex::new(r"\bmostly\b|\bmainly\b|\bprimarily\b|\blots\b|\ba lot\b").unwrap()),
        (3.0, Regex::new(r"\boften\b|\bfrequently\b").unwrap()),
        (1.0, Regex::new(r"\boccasionally\b|\brarely\b|\ba little\b|\ba bit\b").unwrap()),
        (2.0, Regex::new(r"\bsome\b|\bsometimes\b").unwrap()),
    ]
});

static FACTOR_WORDS: LazyLock<Vec<(Factor, Regex)>> = LazyLock::new(|| {
    vec![
        (
            Factor::Accuracy,
            Regex::new(r"accura|correct|understand|precis|quality|recogni").unwrap(),
        ),
        (Factor::Energy, Regex::new(r"battery|energy|power|charg").unwrap()),
        (
            Factor::Latency,
            Regex::new(r"speed|fast|quick|latency|respon|snappy|delay|lag").unwrap(),
        ),
    ]
});

static RANK_LAST: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\blast\b|\bleast\b|don'?t care|doesn'?t matter").unwrap());
static RANK_FIRST: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bfirst\b|\bmost\b|\btop\b|above all").unwrap());

static NEGATIVE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\W*(no|nope|nothing|same|not really|nah)\b|\bno changes?\b").unwrap());
static DENIAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bwrong\b|\bincorrect\b|\bnot right\b").unwrap());
static AFFIRMATIVE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(yes|yeah|yep|correct|right|sure|that's it)\b").unwrap());

static RATING_WORDS: LazyLock<Vec<(f64, Regex)>> = LazyLock::new(|| {
    vec![
        (0.9, Regex::new(r"great|excellent|perfect|very happy|love").unwrap()),
        (0.2, Regex::new(r"bad|poor|terrible|awful|unhappy|annoy").unwrap()),
        (0.7, Regex::new(r"good|happy|fine").unwrap()),
        (0.5, Regex::new(r"\bok\b|okay|so-so|average").unwrap()),
    ]
});

/// Labels assumed when an answer is vague or unrecognized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractorDefaults {
    pub device_location: DeviceLocation,
    pub interaction_time: InteractionTime,
    pub interaction_frequency: InteractionFrequency,
    pub task_type_mix: TaskDistribution,
    pub weight_hints: FactorValues,
    pub rating: f64,
}

impl Default for ExtractorDefaults {
    fn default() -> Self {
        Self {
            device_location: DeviceLocation::Other,
            interaction_time: InteractionTime::Mixed,
            interaction_frequency: InteractionFrequency::Medium,
            task_type_mix: TaskDistribution::voice_assistant(),
            weight_hints: FactorValues::splat(1.0 / 3.0),
            rating: 0.5,
        }
    }
}

/// Slot values read from one transcript. `None` means the slot was not part
/// of the scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub device_location: Option<DeviceLocation>,
    pub interaction_time: Option<InteractionTime>,
    pub interaction_frequency: Option<InteractionFrequency>,
    pub task_type_mix: Option<TaskDistribution>,
    pub weight_hints: Option<FactorValues>,
    pub ratings: Option<FactorValues>,
    pub hardware_confirmed: Option<bool>,
}

impl Extraction {
    /// Overlay the extracted labels onto an existing context.
    pub fn apply(&self, base: &ContextualFactors) -> ContextualFactors {
        ContextualFactors {
            device_location: self.device_location.unwrap_or(base.device_location),
            interaction_time: self.interaction_time.unwrap_or(base.interaction_time),
            interaction_frequency: self.interaction_frequency.unwrap_or(base.interaction_frequency),
            task_type_mix: self.task_type_mix.unwrap_or(base.task_type_mix),
        }
    }
}

fn first_match<T: Copy>(table: &[(T, Regex)], text: &str) -> Option<T> {
    table
        .iter()
        .filter_map(|(label, re)| re.find(text).map(|m| (m.start(), *label)))
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, label)| label)
}

fn unless_vague<T>(vague: bool, parsed: Option<T>) -> Option<T> {
    if vague {
        None
    } else {
        parsed
    }
}

fn parse_location(text: &str) -> Option<DeviceLocation> {
    first_match(&LOCATION_WORDS, text)
}

fn parse_time(text: &str) -> Option<InteractionTime> {
    let day = DAY_WORDS.is_match(text);
    let night = NIGHT_WORDS.is_match(text);
    if MIXED_WORDS.is_match(text) || (day && night) {
        Some(InteractionTime::Mixed)
    } else if day {
        Some(InteractionTime::Daytime)
    } else if night {
        Some(InteractionTime::Nighttime)
    } else {
        None
    }
}

fn parse_frequency(text: &str) -> Option<InteractionFrequency> {
    // ordered from most to least frequent so "all day" wins over "day"
    FREQUENCY_WORDS
        .iter()
        .find(|(_, re)| re.is_match(text))
        .map(|(f, _)| *f)
}

fn parse_task_mix(text: &str) -> Option<TaskDistribution> {
    let mut amounts = TaskValues::default();
    let mut seen = false;
    for clause in CLAUSE_SPLIT.split(text) {
        let cats: Vec<TaskCategory> = TASK_WORDS
            .iter()
            .filter(|(_, re)| re.is_match(clause))
            .map(|(c, _)| *c)
            .collect();
        if cats.is_empty() {
            continue;
        }
        seen = true;
        let amount = PERCENT
            .captures(clause)
            .and_then(|c| c[1].parse::<f64>().ok())
            .or_else(|| first_match(&AMOUNT_WORDS, clause))
            .unwrap_or(2.0);
        for c in cats {
            *amounts.get_mut(c) += amount;
        }
    }
    if !seen {
        return None;
    }
    validate_distribution(amounts.iter()).ok()
}

fn parse_ranking(text: &str) -> Option<FactorValues> {
    let mut found: Vec<(u8, usize, Factor)> = Vec::new();
    let mut offset = 0;
    for clause in CLAUSE_SPLIT.split(text) {
        let bucket = if RANK_LAST.is_match(clause) {
            2
        } else if RANK_FIRST.is_match(clause) {
            0
        } else {
            1
        };
        for (f, re) in FACTOR_WORDS.iter() {
            if found.iter().any(|(_, _, g)| g == f) {
                continue;
            }
            if let Some(m) = re.find(clause) {
                found.push((bucket, offset + m.start(), *f));
            }
        }
        offset += clause.len() + 1;
    }
    if found.is_empty() {
        return None;
    }
    found.sort_by_key(|(bucket, pos, _)| (*bucket, *pos));
    let mut order: Vec<Factor> = found.into_iter().map(|(_, _, f)| f).collect();
    let rest: Vec<Factor> = Factor::ALL.into_iter().filter(|f| !order.contains(f)).collect();
    order.extend(rest);
    let mut hints = FactorValues::default();
    for (f, h) in order.into_iter().zip(RANK_HINTS) {
        hints.set(f, h);
    }
    Some(hints)
}

fn parse_rating(text: &str) -> Option<f64> {
    if let Some(m) = NUMBER.find(text) {
        let v: f64 = m.as_str().parse().ok()?;
        return Some((v / 10.0).clamp(0.0, 1.0));
    }
    first_match(&RATING_WORDS, text)
}

/// Deterministic keyword-table extractor.
#[derive(Debug, Clone, Default)]
pub struct RuleExtractor {
    pub defaults: ExtractorDefaults,
}

impl RuleExtractor {
    pub fn new(defaults: ExtractorDefaults) -> Self {
        Self { defaults }
    }

    /// Read every slot of `scenario` from `transcript`. Vague or unrecognized
    /// answers take the default label; absent or blank answers are an error.
    pub fn extract(&self, scenario: Scenario, transcript: &[Turn]) -> Result<Extraction> {
        let given = answers(scenario, transcript);
        let missing: Vec<Slot> = scenario
            .slots()
            .enumerate()
            .filter(|(i, _)| given.get(*i).is_none_or(|(_, a)| a.trim().is_empty()))
            .map(|(_, s)| s)
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingAnswers(missing));
        }
        let d = &self.defaults;
        let mut out = Extraction::default();
        let mut ratings = FactorValues::splat(d.rating);
        let mut has_ratings = false;
        for (slot, raw) in given {
            let text = raw.to_lowercase();
            let vague = VAGUE.is_match(&text);
            match slot {
                Slot::DeviceLocation => {
                    out.device_location = Some(unless_vague(vague, parse_location(&text)).unwrap_or(d.device_location))
                }
                Slot::UsageTime => {
                    out.interaction_time = Some(unless_vague(vague, parse_time(&text)).unwrap_or(d.interaction_time))
                }
                Slot::UsageFrequency => {
                    out.interaction_frequency =
                        Some(unless_vague(vague, parse_frequency(&text)).unwrap_or(d.interaction_frequency))
                }
                Slot::TaskTypes => {
                    out.task_type_mix = Some(unless_vague(vague, parse_task_mix(&text)).unwrap_or(d.task_type_mix))
                }
                Slot::PriorityRanking => {
                    out.weight_hints = Some(unless_vague(vague, parse_ranking(&text)).unwrap_or(d.weight_hints))
                }
                Slot::AccuracyRating | Slot::SpeedRating | Slot::BatteryRating => {
                    let factor = match slot {
                        Slot::AccuracyRating => Factor::Accuracy,
                        Slot::SpeedRating => Factor::Latency,
                        _ => Factor::Energy,
                    };
                    has_ratings = true;
                    ratings.set(factor, unless_vague(vague, parse_rating(&text)).unwrap_or(d.rating));
                }
                Slot::ContextChange => {
                    if !vague && !NEGATIVE.is_match(&text) {
                        out.device_location = parse_location(&text);
                        out.interaction_time = parse_time(&text);
                        out.interaction_frequency = parse_frequency(&text);
                    }
                }
                Slot::ConfirmHardware => {
                    let denied = DENIAL.is_match(&text)
                        || (NEGATIVE.is_match(&text) && !AFFIRMATIVE.is_match(&text));
                    out.hardware_confirmed = Some(!denied);
                }
            }
        }
        if has_ratings {
            out.ratings = Some(ratings);
        }
        Ok(out)
    }

    /// Context and weight hints from a complete initialization transcript.
    pub fn extract_factors(&self, transcript: &[Turn]) -> Result<(ContextualFactors, FactorValues)> {
        let e = self.extract(Scenario::Initialization, transcript)?;
        let context = ContextualFactors {
            device_location: e.device_location.expect("initialization asks location"),
            interaction_time: e.interaction_time.expect("initialization asks time"),
            interaction_frequency: e.interaction_frequency.expect("initialization asks frequency"),
            task_type_mix: e.task_type_mix.expect("initialization asks tasks"),
        };
        Ok((context, e.weight_hints.expect("initialization asks ranking")))
    }
}

pub const EXTRACTION_PROMPT: &str = r#"You read an onboarding interview between a voice assistant and its user and extract the user's usage context and priorities.
Reply with exactly one JSON object and nothing else, with this shape:
{"context": {"device_location": "bedroom" | "living_room" | "kitchen" | "office" | "other",
             "interaction_time": "daytime" | "nighttime" | "mixed",
             "interaction_frequency": "low" | "medium" | "high",
             "task_type_mix": {"entertainment": p, "smart_home": p, "general_query": p, "personal_request": p}},
 "weight_hints": {"accuracy": w, "energy": w, "latency": w}}
task_type_mix values are non-negative shares of the user's requests. weight_hints are non-negative numbers expressing how much the user cares about recognition accuracy, battery/energy use and response latency; judge them from the ranking and from the wording of every answer."#;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LlmContext {
    device_location: DeviceLocation,
    interaction_time: InteractionTime,
    interaction_frequency: InteractionFrequency,
    task_type_mix: TaskValues,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LlmExtraction {
    context: LlmContext,
    weight_hints: FactorValues,
}

/// Validate and normalize a model reply. Code fences and chatter around the
/// JSON object are tolerated.
pub fn parse_llm_extraction(reply: &str) -> Result<(ContextualFactors, FactorValues)> {
    let start = reply.find('{').ok_or_else(|| crate::error::ValidationError::new("reply", "no JSON object"))?;
    let end = reply.rfind('}').ok_or_else(|| crate::error::ValidationError::new("reply", "no JSON object"))?;
    let raw: LlmExtraction = serde_json::from_str(&reply[start..=end])?;
    let task_type_mix = validate_distribution(raw.context.task_type_mix.iter())
        .map_err(|e| e.within("task_type_mix"))?;
    let hints = validate_weights(raw.weight_hints.iter()).map_err(|e| e.within("weight_hints"))?;
    Ok((
        ContextualFactors {
            device_location: raw.context.device_location,
            interaction_time: raw.context.interaction_time,
            interaction_frequency: raw.context.interaction_frequency,
            task_type_mix,
        },
        *hints.values(),
    ))
}

fn render_transcript(transcript: &[Turn]) -> String {
    transcript
        .iter()
        .map(|t| {
            let who = match t.role {
                Role::Agent => "assistant",
                Role::User => "user",
            };
            format!("{who}: {}", t.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Which path produced an extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionSource {
    Llm,
    Rules,
}

/// Language-model extraction with the rule tables as fallback.
#[derive(Debug, Clone, Default)]
pub struct FactorExtractor {
    pub rules: RuleExtractor,
    pub llm: Option<LlmClient>,
}

impl FactorExtractor {
    pub fn rules_only(defaults: ExtractorDefaults) -> Self {
        Self {
            rules: RuleExtractor::new(defaults),
            llm: None,
        }
    }

    pub fn extract_factors(
        &self,
        transcript: &[Turn],
    ) -> Result<(ContextualFactors, FactorValues, ExtractionSource)> {
        // the rule pass also checks the transcript is complete
        let (context, hints) = self.rules.extract_factors(transcript)?;
        if let Some(client) = &self.llm {
            let messages = [ChatMessage::user(render_transcript(transcript))];
            let attempts = client.config().max_retries + 1;
            for _ in 0..attempts {
                let parsed = client
                    .complete(EXTRACTION_PROMPT, &messages)
                    .map_err(Error::from)
                    .and_then(|reply| parse_llm_extraction(&reply));
                match parsed {
                    Ok((c, h)) => return Ok((c, h, ExtractionSource::Llm)),
                    // transport failures were already retried inside the client
                    Err(Error::Llm(_)) => break,
                    Err(_) => continue,
                }
            }
        }
        Ok((context, hints, ExtractionSource::Rules))
    }
}

pub fn describe_location(location: DeviceLocation) -> String {
    match location {
        DeviceLocation::Bedroom => "It's going in my bedroom.",
        DeviceLocation::LivingRoom => "It'll sit in the living room.",
        DeviceLocation::Kitchen => "On the kitchen counter.",
        DeviceLocation::Office => "In my home office.",
        DeviceLocation::Other => "Somewhere else, in the garage.",
    }
    .to_string()
}

pub fn describe_time(time: InteractionTime) -> String {
    match time {
        InteractionTime::Daytime => "Mostly during the day.",
        InteractionTime::Nighttime => "Mostly at night.",
        InteractionTime::Mixed => "A mix of both, day and night.",
    }
    .to_string()
}

pub fn describe_frequency(frequency: InteractionFrequency) -> String {
    match frequency {
        InteractionFrequency::Low => "A few times a week.",
        InteractionFrequency::Medium => "A few times a day.",
        InteractionFrequency::High => "Constantly, pretty much all day.",
    }
    .to_string()
}

/// Whole-percent shares of each category.
pub fn describe_task_mix(percent: [u32; 4]) -> String {
    let [ent, home, query, personal] = percent;
    format!(
        "Entertainment like music about {ent}%, smart home control {home}%, general questions {query}%, personal requests {personal}%."
    )
}

fn factor_word(f: Factor) -> &'static str {
    match f {
        Factor::Accuracy => "accuracy",
        Factor::Energy => "battery",
        Factor::Latency => "speed",
    }
}

pub fn describe_ranking(order: [Factor; 3]) -> String {
    format!(
        "{} first, then {}, {} last.",
        factor_word(order[0]),
        factor_word(order[1]),
        factor_word(order[2])
    )
}

/// Rank hint weights for a factor ordering.
pub fn rank_hints(order: [Factor; 3]) -> FactorValues {
    let mut hints = FactorValues::default();
    for (f, h) in order.into_iter().zip(RANK_HINTS) {
        hints.set(f, h);
    }
    hints
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiling::script::InterviewSession;

    fn transcript(scenario: Scenario, replies: &[&str]) -> Vec<Turn> {
        let mut s = InterviewSession::new("c1".into(), scenario);
        s.interview_next(None).unwrap();
        for r in replies {
            s.interview_next(Some(r)).unwrap();
        }
        s.transcript
    }

    #[test]
    fn fixture_transcript_keywords() {
        let t = transcript(
            Scenario::Initialization,
            &[
                "it's in my bedroom",
                "mostly at night",
                "a few times a week",
                "mostly music, sometimes the weather",
                "accuracy first, then battery, speed last",
            ],
        );
        let (ctx, hints) = RuleExtractor::default().extract_factors(&t).unwrap();
        assert_eq!(ctx.device_location, DeviceLocation::Bedroom);
        assert_eq!(ctx.interaction_time, InteractionTime::Nighttime);
        assert_eq!(ctx.interaction_frequency, InteractionFrequency::Low);
        assert_eq!(hints, FactorValues::new(0.5, 0.3, 0.2));
        assert!((ctx.task_type_mix.get(TaskCategory::Entertainment) - 4.0 / 6.0).abs() < 1e-12);
        assert!((ctx.task_type_mix.get(TaskCategory::GeneralQuery) - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn ranking_honours_first_and_last_markers() {
        assert_eq!(parse_ranking("speed last, accuracy first, battery"), Some(FactorValues::new(0.5, 0.3, 0.2)));
        assert_eq!(parse_ranking("battery life matters most"), Some(FactorValues::new(0.3, 0.5, 0.2)));
        assert_eq!(parse_ranking("whatever"), None);
    }

    #[test]
    fn frequency_prefers_the_strongest_phrase() {
        assert_eq!(parse_frequency("all day long"), Some(InteractionFrequency::High));
        assert_eq!(parse_frequency("a few times a day"), Some(InteractionFrequency::Medium));
        assert_eq!(parse_frequency("a few times a week"), Some(InteractionFrequency::Low));
    }

    #[test]
    fn time_both_words_is_mixed() {
        assert_eq!(parse_time("at night and in the morning"), Some(InteractionTime::Mixed));
        assert_eq!(parse_time("mornings"), Some(InteractionTime::Daytime));
    }

    #[test]
    fn vague_answers_use_defaults() {
        let t = transcript(Scenario::Initialization, &[VAGUE_REPLY; 5]);
        let (ctx, hints) = RuleExtractor::default().extract_factors(&t).unwrap();
        let d = ExtractorDefaults::default();
        assert_eq!(ctx.device_location, d.device_location);
        assert_eq!(ctx.interaction_time, d.interaction_time);
        assert_eq!(ctx.interaction_frequency, d.interaction_frequency);
        assert_eq!(ctx.task_type_mix, d.task_type_mix);
        assert_eq!(hints, d.weight_hints);
    }

    #[test]
    fn incomplete_transcript_lists_missing_slots() {
        let t = transcript(Scenario::Initialization, &["kitchen", "  ", "daily"]);
        match RuleExtractor::default().extract_factors(&t) {
            Err(Error::MissingAnswers(slots)) => assert_eq!(
                slots,
                vec![Slot::UsageTime, Slot::TaskTypes, Slot::PriorityRanking]
            ),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pre_aggregation_ratings_and_changes() {
        let t = transcript(
            Scenario::PreAggregation,
            &["8", "pretty bad honestly", "not sure", "I moved it to the kitchen"],
        );
        let e = RuleExtractor::default().extract(Scenario::PreAggregation, &t).unwrap();
        assert_eq!(e.ratings, Some(FactorValues::new(0.8, 0.5, 0.2)));
        assert_eq!(e.device_location, Some(DeviceLocation::Kitchen));
        assert_eq!(e.interaction_time, None);

        let t = transcript(Scenario::PreAggregation, &["10", "5", "3", "no, nothing changed"]);
        let e = RuleExtractor::default().extract(Scenario::PreAggregation, &t).unwrap();
        assert_eq!(e.device_location, None);
    }

    #[test]
    fn hardware_confirmation() {
        let t = transcript(Scenario::HardwareChange, &["office", "daytime", "daily", "nope, that's wrong"]);
        let e = RuleExtractor::default().extract(Scenario::HardwareChange, &t).unwrap();
        assert_eq!(e.hardware_confirmed, Some(false));
        assert_eq!(e.device_location, Some(DeviceLocation::Office));
        let t = transcript(Scenario::HardwareChange, &["office", "daytime", "daily", "yes"]);
        let e = RuleExtractor::default().extract(Scenario::HardwareChange, &t).unwrap();
        assert_eq!(e.hardware_confirmed, Some(true));
    }

    #[test]
    fn descriptions_invert_the_tables() {
        for l in DeviceLocation::ALL {
            assert_eq!(parse_location(&describe_location(l).to_lowercase()), Some(l));
        }
        for t in InteractionTime::ALL {
            assert_eq!(parse_time(&describe_time(t).to_lowercase()), Some(t));
        }
        for f in InteractionFrequency::ALL {
            assert_eq!(parse_frequency(&describe_frequency(f).to_lowercase()), Some(f));
        }
        let orders = [
            [Factor::Accuracy, Factor::Energy, Factor::Latency],
            [Factor::Latency, Factor::Accuracy, Factor::Energy],
            [Factor::Energy, Factor::Latency, Factor::Accuracy],
        ];
        for o in orders {
            assert_eq!(parse_ranking(&describe_ranking(o).to_lowercase()), Some(rank_hints(o)));
        }
        let mix = parse_task_mix(&describe_task_mix([33, 16, 32, 19]).to_lowercase()).unwrap();
        let expected = validate_distribution(TaskValues::new(33.0, 16.0, 32.0, 19.0).iter()).unwrap();
        assert_eq!(mix, expected);
    }

    #[test]
    fn llm_reply_parsing() {
        let reply = "```json\n{\"context\":{\"device_location\":\"kitchen\",\"interaction_time\":\"daytime\",\
            \"interaction_frequency\":\"high\",\"task_type_mix\":{\"entertainment\":2,\"smart_home\":1,\
            \"general_query\":1,\"personal_request\":0}},\"weight_hints\":{\"accuracy\":2,\"energy\":1,\"latency\":1}}\n```";
        let (ctx, hints) = parse_llm_extraction(reply).unwrap();
        assert_eq!(ctx.device_location, DeviceLocation::Kitchen);
        assert_eq!(ctx.task_type_mix.get(TaskCategory::Entertainment), 0.5);
        assert_eq!(hints, FactorValues::new(0.5, 0.25, 0.25));
        assert!(parse_llm_extraction("sorry, I can't").is_err());
        assert!(parse_llm_extraction(r#"{"context": {"device_location": "moon"}}"#).is_err());
    }
}
