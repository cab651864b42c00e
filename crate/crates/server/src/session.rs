//! Interactive sessions: named style slots, the current per-group
//! assignment and an append-only history of mixes.

use serde::{Deserialize, Serialize};

use styleprobe::generator::{LayerAssignment, LayerGrouping, LayerStyle, StyleVector};

use crate::error::{ApiError, ApiResult};

/// Style choice for one layer group, by slot name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupChoice {
    Single { slot: String },
    Blend { a: String, b: String, alpha: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub style: StyleVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub assignment: Vec<GroupChoice>,
    pub score: f64,
}

/// Everything needed to rebuild a session. Restoring a snapshot and
/// replaying the same requests yields the same responses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub scenario: String,
    pub model_id: String,
    pub grouping: LayerGrouping,
    /// In creation order.
    pub slots: Vec<Slot>,
    pub assignment: Vec<GroupChoice>,
    pub history: Vec<HistoryEntry>,
    /// Seed for the next `generate` call without an explicit seed.
    pub next_seed: u64,
    /// Suffix for the next generated or inverted slot name.
    pub next_slot: u64,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub state: SessionSnapshot,
    pub active_job: Option<String>,
}

impl Session {
    pub fn new(
        id: String,
        scenario: String,
        model_id: String,
        grouping: LayerGrouping,
        base: StyleVector,
    ) -> Self {
        let assignment = (0..grouping.group_count())
            .map(|_| GroupChoice::Single {
                slot: "base".into(),
            })
            .collect();
        Self {
            id,
            state: SessionSnapshot {
                scenario,
                model_id,
                grouping,
                slots: vec![Slot {
                    name: "base".into(),
                    style: base,
                }],
                assignment,
                history: Vec::new(),
                next_seed: 0,
                next_slot: 1,
            },
            active_job: None,
        }
    }

    pub fn restore(id: String, snapshot: SessionSnapshot) -> ApiResult<Self> {
        let session = Self {
            id,
            state: snapshot,
            active_job: None,
        };
        let mut names: Vec<&str> = session
            .state
            .slots
            .iter()
            .map(|s| s.name.as_str())
            .collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(ApiError::bad_request("snapshot has duplicate slot names"));
        }
        session.resolve(&session.state.assignment)?;
        Ok(session)
    }

    pub fn slot(&self, name: &str) -> ApiResult<&StyleVector> {
        self.state
            .slots
            .iter()
            .find(|s| s.name == name)
            .map(|s| &s.style)
            .ok_or_else(|| ApiError::not_found("slot", name))
    }

    /// Adds a slot named `{prefix}{n}` and returns the name.
    pub fn add_slot(&mut self, prefix: &str, style: StyleVector) -> String {
        let name = format!("{prefix}{}", self.state.next_slot);
        self.state.next_slot += 1;
        self.state.slots.push(Slot {
            name: name.clone(),
            style,
        });
        name
    }

    pub fn slot_names(&self) -> Vec<String> {
        self.state.slots.iter().map(|s| s.name.clone()).collect()
    }

    fn layer_style(&self, choice: &GroupChoice) -> ApiResult<LayerStyle> {
        Ok(match choice {
            GroupChoice::Single { slot } => LayerStyle::single(self.slot(slot)?.clone()),
            GroupChoice::Blend { a, b, alpha } => {
                if !(0.0..=1.0).contains(alpha) {
                    return Err(ApiError::bad_request(format!(
                        "alpha {alpha} outside [0, 1]"
                    )));
                }
                LayerStyle::blend(self.slot(a)?.clone(), self.slot(b)?.clone(), *alpha)
            }
        })
    }

    /// Per-group choices expanded to a per-layer assignment.
    pub fn resolve(&self, choices: &[GroupChoice]) -> ApiResult<LayerAssignment> {
        let groups = self.state.grouping.group_count();
        if choices.len() != groups {
            return Err(ApiError::bad_request(format!(
                "assignment has {} groups, session grouping has {groups}",
                choices.len()
            )));
        }
        let per_group = choices
            .iter()
            .map(|c| self.layer_style(c))
            .collect::<ApiResult<Vec<_>>>()?;
        Ok(self.state.grouping.expand(per_group)?)
    }
}
