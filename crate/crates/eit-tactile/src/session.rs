//! Touchpad sessions: the JSON wire messages and the per-message pipeline
//! `touch → simulate → ΔV → reconstruct → classify → events → action`.
//!
//! Every accepted message advances the session by exactly one frame. Rejected
//! messages get an error reply and leave the session untouched.

use std::sync::Arc;

use eit_core::hmi::{
    classify_frame, map_action, Action, Amplitude, EventEngine, EventKind, MappedAction,
    TouchEvent, TouchState,
};
use eit_core::inverse::{postprocess, ReconstructionImage, Reconstructor};
use eit_core::phantom::TouchSpec;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, HmiSettings};
use crate::experiment::Pipeline;
use crate::raster::Raster;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    TouchDown,
    TouchMove,
    TouchUp,
    Tick,
}

/// Client → server. Coordinates are in mm; `x`/`y` are required for
/// `touch_down` and `touch_move` and ignored otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientMessage {
    #[serde(rename = "type")]
    pub kind: ClientKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl ClientMessage {
    pub fn touch(kind: ClientKind, x: f64, y: f64) -> Self {
        Self {
            kind,
            x: Some(x),
            y: Some(y),
            radius: None,
        }
    }

    pub fn bare(kind: ClientKind) -> Self {
        Self {
            kind,
            x: None,
            y: None,
            radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub frame_index: u64,
    /// Normalized image, `raster_size` rows from the top of the pad down.
    pub grid: Vec<Vec<f64>>,
    pub active: bool,
    pub centroid: Option<[f64; 2]>,
    /// Raw reconstruction peak, S/m.
    pub intensity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Amplitude>,
}

/// Server → client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame(FrameMessage),
    Error { message: String },
}

/// One line of the session event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub input: ClientKind,
    pub state: TouchState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<TouchEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Touch {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Read-only state shared by all sessions: meshes, reference frame, the
/// prepared reconstructor and the raster map.
#[derive(Debug)]
pub struct TouchpadModel {
    pipeline: Pipeline,
    reconstructor: Reconstructor,
    raster: Raster,
    hmi: HmiSettings,
}

impl TouchpadModel {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let pipeline = Pipeline::new(config)?;
        let reconstructor = pipeline.reconstructor(config, config.hmi.method)?;
        let raster = Raster::new(&pipeline.recon_mesh, config.raster_size);
        Ok(Self {
            pipeline,
            reconstructor,
            raster,
            hmi: config.hmi.clone(),
        })
    }

    pub fn side(&self) -> f64 {
        self.pipeline.sim_mesh.domain_side()
    }

    pub fn hmi(&self) -> &HmiSettings {
        &self.hmi
    }

    /// Postprocessed image and touch state of one frame.
    pub fn frame(
        &self,
        touch: Option<Touch>,
        frame_index: u64,
    ) -> Result<(ReconstructionImage, TouchState)> {
        let touches: Vec<TouchSpec> = touch
            .map(|t| TouchSpec::disc(t.center, t.radius, self.hmi.touch_level))
            .into_iter()
            .collect();
        let dv = self.pipeline.delta_v(&touches, frame_index)?;
        let mesh = &self.pipeline.recon_mesh;
        let image = postprocess(&self.reconstructor.reconstruct(&dv.voltages, mesh.id())?);
        let state = classify_frame(&image, mesh, self.hmi.activation_threshold, frame_index)?;
        Ok((image, state))
    }
}

pub struct Session {
    model: Arc<TouchpadModel>,
    engine: EventEngine,
    touch: Option<Touch>,
    next_frame: u64,
}

impl Session {
    pub fn new(model: Arc<TouchpadModel>) -> Self {
        let engine = EventEngine::new(model.hmi.debounce_frames);
        Self {
            model,
            engine,
            touch: None,
            next_frame: 0,
        }
    }

    pub fn frames_processed(&self) -> u64 {
        self.next_frame
    }

    pub fn is_pressed(&self) -> bool {
        self.engine.is_pressed()
    }

    /// Parses and handles one text message; never fails, errors become replies.
    pub fn handle_text(&mut self, text: &str) -> (ServerMessage, Option<LogRecord>) {
        let result = serde_json::from_str::<ClientMessage>(text)
            .map_err(|e| format!("malformed message: {e}"))
            .and_then(|msg| self.handle(&msg).map_err(|e| e.to_string()));
        match result {
            Ok((frame, record)) => (ServerMessage::Frame(frame), Some(record)),
            Err(message) => (ServerMessage::Error { message }, None),
        }
    }

    pub fn handle(&mut self, msg: &ClientMessage) -> Result<(FrameMessage, LogRecord)> {
        let touch = self.next_touch(msg)?;
        let frame_index = self.next_frame;
        let (image, state) = self.model.frame(touch, frame_index)?;
        let event = self.engine.update(&state)?;
        self.touch = touch;
        self.next_frame += 1;

        let actions = &self.model.hmi.actions;
        let event = event.map(|e| actions.annotate(e));
        let action = match &event {
            Some(e) => match map_action(e, actions) {
                MappedAction::Action(a) => Some(a),
                MappedAction::NoAction => None,
            },
            None => None,
        };
        let grid = self
            .model
            .raster
            .sample(&image.values)
            .into_iter()
            .map(|row| row.into_iter().map(|v| (v * 1e4).round() / 1e4).collect())
            .collect();
        let frame = FrameMessage {
            frame_index,
            grid,
            active: state.active,
            centroid: state.centroid,
            intensity: state.intensity,
            event: event.as_ref().map(|e| e.kind),
            action: action.as_ref().map(|a| a.name.clone()),
            amplitude: action.as_ref().map(|a| a.amplitude),
        };
        let record = LogRecord {
            input: msg.kind,
            state,
            event,
            action,
        };
        Ok((frame, record))
    }

    fn next_touch(&self, msg: &ClientMessage) -> Result<Option<Touch>> {
        let invalid = |detail: String| crate::Error::Format {
            what: "touch message",
            detail,
        };
        match msg.kind {
            ClientKind::TouchUp => Ok(None),
            ClientKind::Tick => Ok(self.touch),
            ClientKind::TouchMove if self.touch.is_none() => {
                Err(invalid("touch_move without touch_down".into()))
            }
            ClientKind::TouchDown | ClientKind::TouchMove => {
                let (Some(x), Some(y)) = (msg.x, msg.y) else {
                    return Err(invalid("x and y are required".into()));
                };
                let side = self.model.side();
                if !(0.0..=side).contains(&x) || !(0.0..=side).contains(&y) {
                    return Err(invalid(format!(
                        "({x}, {y}) lies outside the {side} mm pad"
                    )));
                }
                let radius = msg.radius.unwrap_or(self.model.hmi.default_radius_mm);
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(invalid(format!("radius {radius}")));
                }
                Ok(Some(Touch {
                    center: [x, y],
                    radius,
                }))
            }
        }
    }
}
