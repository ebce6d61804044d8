//! Scripted interview scenarios and the session state machine.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{ClientId, ContextualFactors, FactorValues};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// First contact with a new device.
    Initialization,
    /// Feedback before the server aggregates a round.
    PreAggregation,
    /// The device reported a different hardware spec.
    HardwareChange,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::Initialization => "initialization",
            Scenario::PreAggregation => "pre_aggregation",
            Scenario::HardwareChange => "hardware_change",
        }
    }

    /// The ordered questions asked in this scenario.
    pub fn script(self) -> &'static [(Slot, &'static str)] {
        match self {
            Scenario::Initialization => INITIALIZATION,
            Scenario::PreAggregation => PRE_AGGREGATION,
            Scenario::HardwareChange => HARDWARE_CHANGE,
        }
    }

    pub fn slots(self) -> impl Iterator<Item = Slot> {
        self.script().iter().map(|(s, _)| *s)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initialization" => Ok(Scenario::Initialization),
            "pre_aggregation" => Ok(Scenario::PreAggregation),
            "hardware_change" => Ok(Scenario::HardwareChange),
            other => Err(Error::UnknownLabel {
                kind: "scenario",
                value: other.to_string(),
            }),
        }
    }
}

/// What a scripted question asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    DeviceLocation,
    UsageTime,
    UsageFrequency,
    TaskTypes,
    PriorityRanking,
    AccuracyRating,
    SpeedRating,
    BatteryRating,
    ContextChange,
    ConfirmHardware,
}

impl Slot {
    pub fn label(self) -> &'static str {
        match self {
            Slot::DeviceLocation => "device_location",
            Slot::UsageTime => "usage_time",
            Slot::UsageFrequency => "usage_frequency",
            Slot::TaskTypes => "task_types",
            Slot::PriorityRanking => "priority_ranking",
            Slot::AccuracyRating => "accuracy_rating",
            Slot::SpeedRating => "speed_rating",
            Slot::BatteryRating => "battery_rating",
            Slot::ContextChange => "context_change",
            Slot::ConfirmHardware => "confirm_hardware",
        }
    }
}

const Q_LOCATION: &str =
    "Hi! Let's set up your assistant. Where will this device live, for example the bedroom, living room, kitchen or office?";
const Q_TIME: &str = "When do you expect to talk to it most: during the day, at night, or a mix of both?";
const Q_FREQUENCY: &str = "How often do you think you'll use it?";
const Q_TASKS: &str =
    "What will you mostly ask it to do? For example music and entertainment, smart home control, general questions, or personal things like reminders.";
const Q_RANKING: &str =
    "Last one: please rank what matters most to you between accuracy, speed and battery life.";

static INITIALIZATION: &[(Slot, &str)] = &[
    (Slot::DeviceLocation, Q_LOCATION),
    (Slot::UsageTime, Q_TIME),
    (Slot::UsageFrequency, Q_FREQUENCY),
    (Slot::TaskTypes, Q_TASKS),
    (Slot::PriorityRanking, Q_RANKING),
];

static PRE_AGGREGATION: &[(Slot, &str)] = &[
    (
        Slot::AccuracyRating,
        "Quick check-in. On a scale from 0 to 10, how happy were you with how well the assistant understood you lately?",
    ),
    (Slot::SpeedRating, "And from 0 to 10, how happy were you with its response speed?"),
    (Slot::BatteryRating, "From 0 to 10, how happy were you with its battery use?"),
    (
        Slot::ContextChange,
        "Has anything changed since last time, like where the device is or when you use it?",
    ),
];

static HARDWARE_CHANGE: &[(Slot, &str)] = &[
    (
        Slot::DeviceLocation,
        "It looks like your device hardware changed. Where is the device located now?",
    ),
    (Slot::UsageTime, "When do you use it most now: during the day, at night, or both?"),
    (Slot::UsageFrequency, "How often do you use it these days?"),
    (
        Slot::ConfirmHardware,
        "We detected an updated hardware specification for this device. Is that correct?",
    ),
];

pub const CLOSING_INITIALIZATION: &str = "Thanks, that's everything I need. Your assistant is now tuned to you.";
pub const CLOSING_FEEDBACK: &str = "Thanks for the feedback! I'll take it into account for the next round.";
pub const CLOSING_HARDWARE: &str = "Thanks, your profile has been updated for the new hardware.";

fn closing(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::Initialization => CLOSING_INITIALIZATION,
        Scenario::PreAggregation => CLOSING_FEEDBACK,
        Scenario::HardwareChange => CLOSING_HARDWARE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Agent,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

/// Position in the script.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    NotStarted,
    /// Waiting for the answer to question `n` (0-based).
    Awaiting(usize),
    Done,
}

/// A scripted interview with one client.
///
/// The transcript alternates agent and user turns, starting with the agent;
/// the closing message is the last agent turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterviewSession {
    pub client_id: ClientId,
    pub scenario: Scenario,
    pub transcript: Vec<Turn>,
    pub state: SessionState,
    pub extracted: Option<ContextualFactors>,
    pub weight_hints: Option<FactorValues>,
}

impl InterviewSession {
    pub fn new(client_id: ClientId, scenario: Scenario) -> Self {
        Self {
            client_id,
            scenario,
            transcript: Vec::new(),
            state: SessionState::NotStarted,
            extracted: None,
            weight_hints: None,
        }
    }

    pub fn is_done(&self) -> bool {
        self.state == SessionState::Done
    }

    /// Advance the script.
    ///
    /// The first call takes no reply and returns the opening question; each
    /// later call records the reply and returns the next question, or the
    /// closing message with `done = true` once the script is exhausted.
    pub fn interview_next(&mut self, reply: Option<&str>) -> Result<(String, bool)> {
        let script = self.scenario.script();
        let next = match (self.state, reply) {
            (SessionState::Done, _) => return Err(Error::SessionFinished),
            (SessionState::NotStarted, _) => 0,
            (SessionState::Awaiting(_), None) => return Err(Error::ReplyRequired),
            (SessionState::Awaiting(n), Some(text)) => {
                self.transcript.push(Turn {
                    role: Role::User,
                    text: text.to_string(),
                });
                n + 1
            }
        };
        let (message, done) = match script.get(next) {
            Some((_, question)) => {
                self.state = SessionState::Awaiting(next);
                (*question, false)
            }
            None => {
                self.state = SessionState::Done;
                (closing(self.scenario), true)
            }
        };
        self.transcript.push(Turn {
            role: Role::Agent,
            text: message.to_string(),
        });
        Ok((message.to_string(), done))
    }

    /// User answers paired with the slot each one fills.
    pub fn answers(&self) -> Vec<(Slot, &str)> {
        answers(self.scenario, &self.transcript)
    }
}

/// Pair the user turns of `transcript` with `scenario`'s slots in order.
pub fn answers(scenario: Scenario, transcript: &[Turn]) -> Vec<(Slot, &str)> {
    scenario
        .slots()
        .zip(
            transcript
                .iter()
                .filter(|t| t.role == Role::User)
                .map(|t| t.text.as_str()),
        )
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(scenario: Scenario, replies: &[&str]) -> InterviewSession {
        let mut s = InterviewSession::new("c1".into(), scenario);
        s.interview_next(None).unwrap();
        for r in replies {
            s.interview_next(Some(r)).unwrap();
        }
        s
    }

    #[test]
    fn initialization_opens_with_location() {
        let mut s = InterviewSession::new("c1".into(), Scenario::Initialization);
        let (msg, done) = s.interview_next(None).unwrap();
        assert!(!done);
        assert!(msg.contains("Where will this device live"));
        assert_eq!(s.state, SessionState::Awaiting(0));
    }

    #[test]
    fn scripts_finish_after_last_answer() {
        for scenario in [Scenario::Initialization, Scenario::PreAggregation, Scenario::HardwareChange] {
            let n = scenario.script().len();
            let mut s = InterviewSession::new("c1".into(), scenario);
            s.interview_next(None).unwrap();
            for i in 0..n {
                let (_, done) = s.interview_next(Some("whatever")).unwrap();
                assert_eq!(done, i + 1 == n, "{scenario} question {i}");
            }
            assert!(s.is_done());
            assert!(matches!(s.interview_next(Some("more")), Err(Error::SessionFinished)));
            // roles alternate starting with the agent
            for (i, t) in s.transcript.iter().enumerate() {
                let expected = if i % 2 == 0 { Role::Agent } else { Role::User };
                assert_eq!(t.role, expected);
            }
            assert_eq!(s.transcript.len(), 2 * n + 1);
        }
    }

    #[test]
    fn reply_required_after_opening() {
        let mut s = InterviewSession::new("c1".into(), Scenario::PreAggregation);
        s.interview_next(None).unwrap();
        assert!(matches!(s.interview_next(None), Err(Error::ReplyRequired)));
    }

    #[test]
    fn golden_initialization_transcript() {
        let s = run(
            Scenario::Initialization,
            &["bedroom", "night", "weekly", "music", "accuracy, battery, speed"],
        );
        let agent: Vec<&str> = s
            .transcript
            .iter()
            .filter(|t| t.role == Role::Agent)
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(
            agent,
            vec![
                "Hi! Let's set up your assistant. Where will this device live, for example the bedroom, living room, kitchen or office?",
                "When do you expect to talk to it most: during the day, at night, or a mix of both?",
                "How often do you think you'll use it?",
                "What will you mostly ask it to do? For example music and entertainment, smart home control, general questions, or personal things like reminders.",
                "Last one: please rank what matters most to you between accuracy, speed and battery life.",
                "Thanks, that's everything I need. Your assistant is now tuned to you.",
            ]
        );
        let slots: Vec<Slot> = s.answers().into_iter().map(|(s, _)| s).collect();
        assert_eq!(slots, Scenario::Initialization.slots().collect::<Vec<_>>());
    }
}
