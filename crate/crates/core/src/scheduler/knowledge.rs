use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Result, RuntimeError, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub value: String,
    pub tick: Tick,
}

/// Who wrote a fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChangeSource {
    External,
    Task(u64),
}

/// One entry of the append-only change log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub seq: u64,
    pub tick: Tick,
    pub key: String,
    pub value: String,
    pub source: ChangeSource,
}

/// Shared fact store. Keys are unique; a re-post overwrites the value and
/// still logs a change.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeSpace {
    facts: BTreeMap<String, Fact>,
    log: Vec<ChangeEvent>,
    now: Tick,
}

impl KnowledgeSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn post(
        &mut self,
        key: impl Into<String>,
        value: impl Into<String>,
        tick: Tick,
        source: ChangeSource,
    ) -> Result<ChangeEvent> {
        if tick < self.now {
            return Err(RuntimeError::StaleTick {
                tick,
                now: self.now,
            });
        }
        self.now = tick;
        let key = key.into();
        let value = value.into();
        self.facts.insert(
            key.clone(),
            Fact {
                value: value.clone(),
                tick,
            },
        );
        let event = ChangeEvent {
            seq: self.log.len() as u64,
            tick,
            key,
            value,
            source,
        };
        self.log.push(event.clone());
        Ok(event)
    }

    /// Moves the clock forward without writing.
    pub fn advance(&mut self, tick: Tick) {
        self.now = self.now.max(tick);
    }

    pub fn get(&self, key: &str) -> Option<&Fact> {
        self.facts.get(key)
    }

    pub fn value(&self, key: &str) -> Option<&str> {
        self.facts.get(key).map(|f| f.value.as_str())
    }

    /// Value of `key` as seen by a reader at `tick`.
    pub fn value_at(&self, key: &str, tick: Tick) -> Option<&str> {
        self.log
            .iter()
            .rev()
            .find(|e| e.key == key && e.tick <= tick)
            .map(|e| e.value.as_str())
    }

    pub fn log(&self) -> &[ChangeEvent] {
        &self.log
    }

    pub fn facts(&self) -> impl Iterator<Item = (&str, &Fact)> {
        self.facts.iter().map(|(k, f)| (k.as_str(), f))
    }
}
