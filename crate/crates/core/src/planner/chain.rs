//! Skill vocabulary, skill chains and their validation.

use super::PlannerError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skill {
    Nav,
    Pick,
    Place,
    OpenDoor,
    CloseSink,
}

impl Skill {
    pub const ALL: [Skill; 5] = [Skill::Nav, Skill::Pick, Skill::Place, Skill::OpenDoor, Skill::CloseSink];

    pub fn as_str(self) -> &'static str {
        match self {
            Skill::Nav => "nav",
            Skill::Pick => "pick",
            Skill::Place => "place",
            Skill::OpenDoor => "open_door",
            Skill::CloseSink => "close_sink",
        }
    }

    /// Column heading used in reports.
    pub fn title(self) -> &'static str {
        match self {
            Skill::Nav => "Navigate",
            Skill::Pick => "Pick",
            Skill::Place => "Place",
            Skill::OpenDoor => "Open Door",
            Skill::CloseSink => "Close Sink",
        }
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Skill {
    type Err = PlannerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Skill::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PlannerError::PlanInvalid(s.to_string()))
    }
}

/// A plan: one skill list, or one per source for dual-source episodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkillChain {
    Single(Vec<Skill>),
    Dual { first_sound: Vec<Skill>, second_sound: Vec<Skill> },
}

fn names(skills: &[Skill]) -> Value {
    Value::from(skills.iter().map(|s| s.as_str()).collect::<Vec<_>>())
}

impl SkillChain {
    /// The `plan` value in the wire format.
    pub fn to_plan_value(&self) -> Value {
        match self {
            SkillChain::Single(s) => names(s),
            SkillChain::Dual { first_sound, second_sound } => json!({
                "first_sound": names(first_sound),
                "second_sound": names(second_sound),
            }),
        }
    }

    /// `{"plan": ...}` as emitted by planners.
    pub fn to_json(&self) -> String {
        json!({ "plan": self.to_plan_value() }).to_string()
    }

    /// Skill lists in execution order.
    pub fn stages(&self) -> Vec<&[Skill]> {
        match self {
            SkillChain::Single(s) => vec![s.as_slice()],
            SkillChain::Dual { first_sound, second_sound } => vec![first_sound.as_slice(), second_sound.as_slice()],
        }
    }
}

impl fmt::Display for SkillChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_plan_value().to_string())
    }
}

impl Serialize for SkillChain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_plan_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SkillChain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        validate_chain(&v).map_err(serde::de::Error::custom)
    }
}

fn skill_list(v: &Value) -> Result<Vec<Skill>, PlannerError> {
    let items = v
        .as_array()
        .ok_or_else(|| PlannerError::PlanInvalid(format!("expected a list, got {v}")))?;
    if items.is_empty() {
        return Err(PlannerError::PlanInvalid("empty".into()));
    }
    items
        .iter()
        .map(|item| match item.as_str() {
            Some(s) => s.parse(),
            None => Err(PlannerError::PlanInvalid(item.to_string())),
        })
        .collect()
}

/// Accepts a non-empty list of vocabulary skills, or an object with exactly
/// the keys `first_sound` and `second_sound` each holding such a list.
pub fn validate_chain(raw: &Value) -> Result<SkillChain, PlannerError> {
    match raw {
        Value::Array(_) => Ok(SkillChain::Single(skill_list(raw)?)),
        Value::Object(map) => {
            for key in map.keys() {
                if key != "first_sound" && key != "second_sound" {
                    return Err(PlannerError::PlanInvalid(key.clone()));
                }
            }
            let get = |k: &str| map.get(k).ok_or_else(|| PlannerError::PlanInvalid(format!("missing {k}")));
            Ok(SkillChain::Dual {
                first_sound: skill_list(get("first_sound")?)?,
                second_sound: skill_list(get("second_sound")?)?,
            })
        }
        other => Err(PlannerError::PlanInvalid(other.to_string())),
    }
}

/// Parses a full `{"plan": ...}` document.
pub fn parse_plan_document(doc: &Value) -> Result<SkillChain, PlannerError> {
    let map = doc
        .as_object()
        .ok_or_else(|| PlannerError::PlanInvalid("response is not a JSON object".into()))?;
    match map.get("plan") {
        Some(plan) if map.len() == 1 => validate_chain(plan),
        Some(_) => Err(PlannerError::PlanInvalid(
            map.keys().find(|k| *k != "plan").cloned().unwrap_or_default(),
        )),
        None => Err(PlannerError::PlanInvalid("missing plan".into())),
    }
}
