//! JSON file formats for instances and schedules.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{lr_of_mask, ClientId, ClientRequirement, ProblemInstance, Schedule};
use crate::ratio::{format_ratio, parse_ratio};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientEntry {
    pub name: String,
    pub rate: String,
    pub latency_slots: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub frame_size: usize,
    pub clients: Vec<ClientEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

impl InstanceFile {
    pub fn from_instance(inst: &ProblemInstance, comment: Option<String>) -> Self {
        InstanceFile {
            frame_size: inst.frame_size,
            clients: inst
                .clients
                .iter()
                .map(|c| ClientEntry {
                    name: c.name.clone(),
                    rate: format_ratio(&c.rate),
                    latency_slots: c.latency.as_ref().map(format_ratio),
                })
                .collect(),
            comment,
        }
    }

    pub fn to_instance(&self) -> Result<ProblemInstance> {
        let clients = self
            .clients
            .iter()
            .map(|c| {
                Ok(ClientRequirement::new(
                    c.name.clone(),
                    parse_ratio(&c.rate)?,
                    c.latency_slots.as_deref().map(parse_ratio).transpose()?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        ProblemInstance::new(self.frame_size, clients)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Canonical pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }
}

pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::InvalidInstance(format!("{}: {e}", path.display())))?;
    InstanceFile::parse(&text)?.to_instance()
}

/// One slot of a schedule file: empty, one owner, or (invalidly) several.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlotEntry {
    Owner(String),
    Shared(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub frame_size: usize,
    pub slots: Vec<Option<SlotEntry>>,
    #[serde(default)]
    pub phi: BTreeMap<String, usize>,
    #[serde(default)]
    pub theta: BTreeMap<String, Option<String>>,
    #[serde(default)]
    pub objective: Option<String>,
}

impl ScheduleFile {
    pub fn from_schedule(schedule: &Schedule, inst: &ProblemInstance) -> Self {
        let slots = schedule
            .slots()
            .iter()
            .map(|s| s.map(|c| SlotEntry::Owner(inst.clients[c].name.clone())))
            .collect();
        let mut phi = BTreeMap::new();
        let mut theta = BTreeMap::new();
        for (i, c) in inst.clients.iter().enumerate() {
            let mask = schedule.mask(i);
            phi.insert(c.name.clone(), schedule.alloc_count(i));
            theta.insert(
                c.name.clone(),
                lr_of_mask(&mask).map(|lr| format_ratio(&lr.latency)),
            );
        }
        ScheduleFile {
            frame_size: schedule.frame_size(),
            slots,
            phi,
            theta,
            objective: Some(format_ratio(&schedule.objective())),
        }
    }

    /// Slot owners resolved against the instance's client names.
    pub fn owners(&self, inst: &ProblemInstance) -> Result<Vec<Vec<ClientId>>> {
        if self.frame_size != inst.frame_size || self.slots.len() != self.frame_size {
            return Err(CoreError::InvalidSchedule(format!(
                "schedule frame size {} ({} slots) does not match instance frame size {}",
                self.frame_size,
                self.slots.len(),
                inst.frame_size
            )));
        }
        let lookup = |name: &str| {
            inst.client_by_name(name)
                .ok_or_else(|| CoreError::InvalidSchedule(format!("unknown client {name:?}")))
        };
        self.slots
            .iter()
            .map(|s| match s {
                None => Ok(Vec::new()),
                Some(SlotEntry::Owner(n)) => Ok(vec![lookup(n)?]),
                Some(SlotEntry::Shared(ns)) => ns.iter().map(|n| lookup(n)).collect(),
            })
            .collect()
    }

    pub fn to_schedule(&self, inst: &ProblemInstance) -> Result<Schedule> {
        let owners = self.owners(inst)?;
        let slots = owners
            .iter()
            .enumerate()
            .map(|(j, o)| match o.as_slice() {
                [] => Ok(None),
                [c] => Ok(Some(*c)),
                _ => Err(CoreError::InvalidSchedule(format!(
                    "slot {} has several owners",
                    j + 1
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Schedule::new(slots, inst.n())
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }
}
