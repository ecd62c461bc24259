//! Offline re-evaluation of a session log.
//!
//! The logged touch states are fed through a fresh event engine and the
//! action map. Any event or action that comes out different from the logged
//! one is a mismatch.

use std::path::Path;

use eit_core::hmi::{map_action, Action, EventEngine, MappedAction, TouchEvent};
use serde::{Deserialize, Serialize};

use crate::config::HmiSettings;
use crate::formats::read_json_lines;
use crate::session::LogRecord;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub frame_index: u64,
    pub logged_event: Option<TouchEvent>,
    pub replayed_event: Option<TouchEvent>,
    pub logged_action: Option<Action>,
    pub replayed_action: Option<Action>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub frames: usize,
    pub events: usize,
    pub actions: Vec<Action>,
    pub mismatches: Vec<Mismatch>,
}

impl ReplayReport {
    pub fn is_consistent(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn replay(records: &[LogRecord], hmi: &HmiSettings) -> Result<ReplayReport> {
    let mut engine = EventEngine::new(hmi.debounce_frames);
    let mut report = ReplayReport {
        frames: records.len(),
        events: 0,
        actions: Vec::new(),
        mismatches: Vec::new(),
    };
    for record in records {
        let event = engine
            .update(&record.state)?
            .map(|e| hmi.actions.annotate(e));
        let action = event
            .as_ref()
            .and_then(|e| match map_action(e, &hmi.actions) {
                MappedAction::Action(a) => Some(a),
                MappedAction::NoAction => None,
            });
        report.events += usize::from(event.is_some());
        if let Some(a) = &action {
            report.actions.push(a.clone());
        }
        if event != record.event || action != record.action {
            report.mismatches.push(Mismatch {
                frame_index: record.state.frame_index,
                logged_event: record.event.clone(),
                replayed_event: event,
                logged_action: record.action.clone(),
                replayed_action: action,
            });
        }
    }
    Ok(report)
}

pub fn replay_file(path: &Path, hmi: &HmiSettings) -> Result<ReplayReport> {
    let file = crate::formats::open(path)?;
    let records: Vec<LogRecord> = read_json_lines(file)?;
    replay(&records, hmi)
}
