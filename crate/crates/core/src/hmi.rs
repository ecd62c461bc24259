//! Touch-to-action mapping for the virtual touchpad.
//!
//! Frames are classified into [`TouchState`]s, a debounced state machine turns
//! the state stream into press start/end events, and released presses map to
//! an action by location and to an amplitude by duration.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::{postprocess, ReconstructionImage};
use crate::mesh::Mesh;
use crate::metrics::detect_blobs;

/// Default blob cut, as a fraction of the image maximum.
pub const DEFAULT_BLOB_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchState {
    pub frame_index: u64,
    pub active: bool,
    pub centroid: Option<[f64; 2]>,
    /// Raw reconstruction peak (S/m), before normalization.
    pub intensity: f64,
}

impl TouchState {
    pub fn inactive(frame_index: u64) -> Self {
        Self {
            frame_index,
            active: false,
            centroid: None,
            intensity: 0.0,
        }
    }
}

/// Active iff the raw peak reaches `activation_threshold`; the centroid is
/// that of the dominant blob of the normalized image.
pub fn classify_frame(
    image: &ReconstructionImage,
    mesh: &Mesh,
    activation_threshold: f64,
    frame_index: u64,
) -> Result<TouchState> {
    let normalized = if image.postprocessed {
        image.clone()
    } else {
        postprocess(image)
    };
    let intensity = normalized.peak;
    if !(intensity > 0.0) || intensity < activation_threshold {
        return Ok(TouchState {
            intensity,
            ..TouchState::inactive(frame_index)
        });
    }
    let blobs = detect_blobs(&normalized, mesh, DEFAULT_BLOB_THRESHOLD)?;
    let centroid = blobs.dominant().map(|b| b.centroid);
    Ok(TouchState {
        frame_index,
        active: centroid.is_some(),
        centroid,
        intensity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PressStart,
    PressEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchEvent {
    pub kind: EventKind,
    pub frame_index: u64,
    pub centroid: [f64; 2],
    /// Active frames of the press, counted from its first active frame.
    /// Present on `PressEnd` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_frames: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_label: Option<String>,
}

/// Debounced press detector; one per session.
///
/// A press starts once `debounce_frames` consecutive active frames have been
/// seen, and ends on the first inactive frame after that. Active runs shorter
/// than the debounce never produce events.
#[derive(Debug, Clone)]
pub struct EventEngine {
    debounce_frames: u64,
    run_start: Option<u64>,
    run_length: u64,
    pressed: bool,
    last_centroid: [f64; 2],
    last_frame: Option<u64>,
}

impl EventEngine {
    pub fn new(debounce_frames: u64) -> Self {
        Self {
            debounce_frames: debounce_frames.max(1),
            run_start: None,
            run_length: 0,
            pressed: false,
            last_centroid: [0.0; 2],
            last_frame: None,
        }
    }

    pub fn is_pressed(&self) -> bool {
        self.pressed
    }

    /// Frames in the current active run (0 when inactive).
    pub fn active_run(&self) -> u64 {
        self.run_length
    }

    pub fn update(&mut self, current: &TouchState) -> Result<Option<TouchEvent>> {
        if let Some(prev) = self.last_frame {
            if current.frame_index != prev + 1 {
                return Err(Error::InvalidParameter(alloc::format!(
                    "frame {} does not follow frame {prev}",
                    current.frame_index
                )));
            }
        }
        self.last_frame = Some(current.frame_index);

        match (current.active, current.centroid) {
            (true, Some(c)) => {
                self.last_centroid = c;
                if self.run_start.is_none() {
                    self.run_start = Some(current.frame_index);
                }
                self.run_length += 1;
                if !self.pressed && self.run_length >= self.debounce_frames {
                    self.pressed = true;
                    return Ok(Some(TouchEvent {
                        kind: EventKind::PressStart,
                        frame_index: current.frame_index,
                        centroid: c,
                        duration_frames: None,
                        region_label: None,
                    }));
                }
                Ok(None)
            }
            _ => {
                let run = self.run_length;
                let was_pressed = self.pressed;
                self.run_start = None;
                self.run_length = 0;
                self.pressed = false;
                Ok(was_pressed.then_some(TouchEvent {
                    kind: EventKind::PressEnd,
                    frame_index: current.frame_index,
                    centroid: self.last_centroid,
                    duration_frames: Some(run),
                    region_label: None,
                }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    /// Half-open on the max sides so neighbouring regions can share an edge;
    /// the sensor's far edge is closed.
    fn contains(&self, p: [f64; 2], side: f64) -> bool {
        let within = |v: f64, lo: f64, hi: f64| v >= lo && (v < hi || (hi >= side && v <= hi));
        within(p[0], self.x_min, self.x_max) && within(p[1], self.y_min, self.y_max)
    }

    fn overlaps(&self, o: &Rect) -> bool {
        self.x_min < o.x_max && o.x_min < self.x_max && self.y_min < o.y_max && o.y_min < self.y_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub label: String,
    pub rect: Rect,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionConfig {
    pub regions: Vec<Region>,
    pub duration_threshold_frames: u64,
    pub frame_rate: f64,
    #[serde(default = "default_side")]
    pub sensor_side: f64,
}

fn default_side() -> f64 {
    100.0
}

impl Default for ActionConfig {
    /// Left half advances, right half jumps; 6 frames (300 ms at 20 fps)
    /// separates short from long presses.
    fn default() -> Self {
        let half = |label: &str, x_min: f64, x_max: f64, action: &str| Region {
            label: label.into(),
            rect: Rect {
                x_min,
                y_min: 0.0,
                x_max,
                y_max: 100.0,
            },
            action: action.into(),
        };
        Self {
            regions: alloc::vec![
                half("left", 0.0, 50.0, "advance"),
                half("right", 50.0, 100.0, "jump"),
            ],
            duration_threshold_frames: 6,
            frame_rate: 20.0,
            sensor_side: 100.0,
        }
    }
}

impl ActionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration_threshold_frames < 1 {
            return Err(Error::InvalidParameter(
                "duration threshold must be at least 1 frame".into(),
            ));
        }
        if !(self.frame_rate > 0.0) {
            return Err(Error::InvalidParameter(
                "frame rate must be positive".into(),
            ));
        }
        for (i, a) in self.regions.iter().enumerate() {
            for b in &self.regions[i + 1..] {
                if a.rect.overlaps(&b.rect) {
                    return Err(Error::InvalidParameter(alloc::format!(
                        "regions '{}' and '{}' overlap",
                        a.label,
                        b.label
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn region_at(&self, p: [f64; 2]) -> Option<&Region> {
        self.regions
            .iter()
            .find(|r| r.rect.contains(p, self.sensor_side))
    }

    /// Fills in the region label of an event.
    pub fn annotate(&self, mut event: TouchEvent) -> TouchEvent {
        event.region_label = self.region_at(event.centroid).map(|r| r.label.clone());
        event
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Amplitude {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    pub amplitude: Amplitude,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MappedAction {
    Action(Action),
    NoAction,
}

/// Released presses map to the action of the region containing their centroid.
/// Durations at or above the threshold are high amplitude.
pub fn map_action(event: &TouchEvent, config: &ActionConfig) -> MappedAction {
    let (EventKind::PressEnd, Some(duration)) = (event.kind, event.duration_frames) else {
        return MappedAction::NoAction;
    };
    match config.region_at(event.centroid) {
        Some(region) => MappedAction::Action(Action {
            name: region.action.clone(),
            amplitude: if duration < config.duration_threshold_frames {
                Amplitude::Low
            } else {
                Amplitude::High
            },
        }),
        None => MappedAction::NoAction,
    }
}
