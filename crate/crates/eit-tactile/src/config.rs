//! Experiment configuration.
//!
//! A JSON document in which every field is optional; missing fields take the
//! reference sensor settings, so `{}` is a complete configuration. Errors carry the line
//! of the offending key when it can be found in the source text.

use std::fmt;
use std::path::{Path, PathBuf};

use eit_core::hmi::ActionConfig;
use eit_core::inverse::{Method, ReconstructionParams};
use eit_core::mesh::build_mesh;
use eit_core::phantom::{LatticeSpec, TouchShape, TouchSpec};
use serde::{Deserialize, Serialize};

use crate::{io_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSettings {
    pub side_mm: f64,
    pub electrode_count: usize,
    pub electrode_width_mm: f64,
    /// Mesh that generates synthetic data.
    pub sim_divisions: usize,
    /// Mesh the Jacobian and images live on.
    pub recon_divisions: usize,
    /// Permits `sim_divisions == recon_divisions`.
    pub allow_inverse_crime: bool,
}

impl Default for MeshSettings {
    fn default() -> Self {
        Self {
            side_mm: 100.0,
            electrode_count: 16,
            electrode_width_mm: 3.0,
            sim_divisions: 64,
            recon_divisions: 32,
            allow_inverse_crime: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSettings {
    pub reciprocity_reduced: bool,
    /// Amperes.
    pub drive_current: f64,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        Self {
            reciprocity_reduced: true,
            drive_current: eit_core::DEFAULT_CURRENT,
        }
    }
}

/// Disc touches sharing one radius; the level comes from the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPhantom {
    pub label: String,
    pub centers: Vec<[f64; 2]>,
    pub radius_mm: f64,
}

impl SweepPhantom {
    pub fn touches(&self, level: f64) -> Vec<TouchSpec> {
        self.centers
            .iter()
            .map(|&c| TouchSpec::disc(c, self.radius_mm, level))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    /// The sweep mesh must resolve the narrowest channel, so it is finer
    /// than the reconstruction meshes.
    pub divisions: usize,
    pub pitch_mm: f64,
    pub channel_widths_mm: Vec<f64>,
    pub include_uniform: bool,
    pub filler_conductivity: f64,
    pub levels: Vec<f64>,
    pub phantoms: Vec<SweepPhantom>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        // Touches sit on channel crossings of the 20 mm lattice.
        let phantom = |label: &str, centers: &[[f64; 2]]| SweepPhantom {
            label: label.into(),
            centers: centers.to_vec(),
            radius_mm: 10.0,
        };
        Self {
            divisions: 100,
            pitch_mm: 20.0,
            channel_widths_mm: vec![2.0, 4.0, 6.0, 8.0, 10.0],
            include_uniform: true,
            filler_conductivity: eit_core::phantom::FILLER_CONDUCTIVITY,
            levels: vec![2.0, 3.0, 4.0, 5.0],
            phantoms: vec![
                phantom("single", &[[40.0, 40.0]]),
                phantom("double", &[[40.0, 40.0], [60.0, 60.0]]),
                phantom("triple", &[[40.0, 60.0], [60.0, 60.0], [40.0, 40.0]]),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phantom {
    pub label: String,
    pub touches: Vec<TouchSpec>,
}

impl Phantom {
    /// Centers of the individual touches, as localization ground truth.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        self.touches.iter().map(|t| t.center).collect()
    }

    /// The single annulus, if that is what this phantom is.
    pub fn ring(&self) -> Option<(TouchSpec, f64, f64)> {
        match self.touches.as_slice() {
            [t @ TouchSpec {
                shape:
                    TouchShape::Annulus {
                        inner_radius,
                        outer_radius,
                    },
                ..
            }] => Some((*t, *inner_radius, *outer_radius)),
            _ => None,
        }
    }
}

/// Single, double, triple and annular touches at 5 S/m.
pub fn default_phantoms() -> Vec<Phantom> {
    let discs = |label: &str, centers: &[[f64; 2]]| Phantom {
        label: label.into(),
        touches: centers
            .iter()
            .map(|&c| TouchSpec::disc(c, 10.0, 5.0))
            .collect(),
    };
    vec![
        discs("single", &[[50.0, 50.0]]),
        discs("double", &[[25.0, 50.0], [75.0, 50.0]]),
        discs("triple", &[[25.0, 70.0], [75.0, 70.0], [50.0, 25.0]]),
        Phantom {
            label: "annulus".into(),
            touches: vec![TouchSpec::annulus([50.0, 50.0], 30.0, 40.0, 5.0)],
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    /// `null` disables noise. Signal power is that of ΔV.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            snr_db: Some(40.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmiSettings {
    pub method: Method,
    /// Raw reconstruction peak (S/m) at which a frame counts as touched.
    pub activation_threshold: f64,
    pub debounce_frames: u64,
    /// Conductivity of a pressed region, S/m.
    pub touch_level: f64,
    pub default_radius_mm: f64,
    pub actions: ActionConfig,
}

impl Default for HmiSettings {
    fn default() -> Self {
        Self {
            method: Method::Tikhonov,
            activation_threshold: 0.05,
            debounce_frames: 2,
            touch_level: 5.0,
            default_radius_mm: 10.0,
            actions: ActionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh: MeshSettings,
    pub protocol: ProtocolSettings,
    /// Conductivity of the untouched layer (or of the channels, with a lattice).
    pub background_conductivity: f64,
    /// Lattice under the reconstruction and touchpad phantoms; `null` for a
    /// uniform layer.
    pub lattice: Option<LatticeSpec>,
    pub sweep: SweepSettings,
    pub phantoms: Vec<Phantom>,
    pub noise: NoiseSettings,
    pub tikhonov: ReconstructionParams,
    pub l1: ReconstructionParams,
    /// Blob cut as a fraction of the image maximum.
    pub blob_threshold: f64,
    /// Cut for the ring check of annular phantoms.
    pub ring_threshold: f64,
    /// Side of the square raster used for PGM images and touchpad frames.
    pub raster_size: usize,
    pub hmi: HmiSettings,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mesh: MeshSettings::default(),
            protocol: ProtocolSettings::default(),
            background_conductivity: eit_core::BACKGROUND_CONDUCTIVITY,
            lattice: None,
            sweep: SweepSettings::default(),
            phantoms: default_phantoms(),
            noise: NoiseSettings::default(),
            tikhonov: ReconstructionParams::tikhonov(),
            l1: ReconstructionParams::l1(),
            blob_threshold: eit_core::hmi::DEFAULT_BLOB_THRESHOLD,
            ring_threshold: 0.5,
            raster_size: 64,
            hmi: HmiSettings::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// A configuration problem, located in the source text where possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    /// Dotted path of the offending field, when known.
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if let Some(field) = &self.field {
            write!(f, "{field}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

struct Problem {
    field: &'static str,
    message: String,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> std::result::Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text).map_err(|e| ConfigError {
            line: Some(e.line()),
            column: Some(e.column()),
            field: None,
            message: e.to_string(),
        })?;
        config.validate_against(Some(text))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(Self::from_json_str(&text)?)
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        self.validate_against(None)
    }

    fn validate_against(&self, source: Option<&str>) -> std::result::Result<(), ConfigError> {
        match self.problems().into_iter().next() {
            None => Ok(()),
            Some(p) => {
                let key = p.field.rsplit('.').next().unwrap_or(p.field);
                Err(ConfigError {
                    line: source.and_then(|s| key_line(s, key)),
                    column: None,
                    field: Some(p.field.into()),
                    message: p.message,
                })
            }
        }
    }

    fn problems(&self) -> Vec<Problem> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &'static str, message: String| {
            if !ok {
                out.push(Problem { field, message });
            }
        };
        let m = &self.mesh;
        check(
            m.side_mm > 0.0,
            "mesh.side_mm",
            format!("must be positive, got {}", m.side_mm),
        );
        for (field, div) in [
            ("mesh.sim_divisions", m.sim_divisions),
            ("mesh.recon_divisions", m.recon_divisions),
            ("sweep.divisions", self.sweep.divisions),
        ] {
            let built = build_mesh(m.side_mm, div, m.electrode_count, m.electrode_width_mm);
            check(
                built.is_ok(),
                field,
                built.err().map(|e| e.to_string()).unwrap_or_default(),
            );
        }
        check(
            m.allow_inverse_crime || m.sim_divisions != m.recon_divisions,
            "mesh.recon_divisions",
            "equals sim_divisions; set allow_inverse_crime to permit this".into(),
        );
        check(
            self.protocol.drive_current > 0.0 && self.protocol.drive_current.is_finite(),
            "protocol.drive_current",
            format!("must be positive, got {}", self.protocol.drive_current),
        );
        check(
            self.background_conductivity > 0.0 && self.background_conductivity.is_finite(),
            "background_conductivity",
            format!("must be positive, got {}", self.background_conductivity),
        );
        if let Some(l) = &self.lattice {
            let v = l.validate();
            check(
                v.is_ok(),
                "lattice",
                v.err().map(|e| e.to_string()).unwrap_or_default(),
            );
        }

        let s = &self.sweep;
        for &w in &s.channel_widths_mm {
            check(
                w > 0.0 && w <= s.pitch_mm,
                "sweep.channel_widths_mm",
                format!("width {w} must be in (0, pitch = {}]", s.pitch_mm),
            );
        }
        check(
            s.filler_conductivity > 0.0,
            "sweep.filler_conductivity",
            format!("must be positive, got {}", s.filler_conductivity),
        );
        for &level in &s.levels {
            check(
                level > 0.0,
                "sweep.levels",
                format!("level {level} must be positive"),
            );
        }
        for p in &s.phantoms {
            check(
                p.radius_mm > 0.0,
                "sweep.phantoms",
                format!("'{}' needs a positive radius", p.label),
            );
        }

        for p in &self.phantoms {
            for t in &p.touches {
                let radii_ok = match t.shape {
                    TouchShape::Disc { radius } => radius > 0.0,
                    TouchShape::Annulus {
                        inner_radius,
                        outer_radius,
                    } => inner_radius > 0.0 && inner_radius < outer_radius,
                };
                check(
                    t.level > 0.0 && radii_ok,
                    "phantoms",
                    format!("'{}' has an invalid touch {t:?}", p.label),
                );
            }
        }
        if let Some(snr) = self.noise.snr_db {
            check(
                snr.is_finite(),
                "noise.snr_db",
                format!("must be finite, got {snr}"),
            );
        }
        for (field, params, method) in [
            ("tikhonov", &self.tikhonov, Method::Tikhonov),
            ("l1", &self.l1, Method::L1),
        ] {
            let v = params.validate();
            check(
                v.is_ok(),
                field,
                v.err().map(|e| e.to_string()).unwrap_or_default(),
            );
            check(
                params.method == method,
                field,
                format!("method must be {method:?}"),
            );
        }
        for (field, t) in [
            ("blob_threshold", self.blob_threshold),
            ("ring_threshold", self.ring_threshold),
        ] {
            check(
                t > 0.0 && t < 1.0,
                field,
                format!("must be in (0, 1), got {t}"),
            );
        }
        check(
            self.raster_size >= 1,
            "raster_size",
            "must be at least 1".into(),
        );

        let h = &self.hmi;
        check(
            h.activation_threshold > 0.0,
            "hmi.activation_threshold",
            format!("must be positive, got {}", h.activation_threshold),
        );
        check(
            h.debounce_frames >= 1,
            "hmi.debounce_frames",
            "must be at least 1".into(),
        );
        check(
            h.touch_level > 0.0,
            "hmi.touch_level",
            format!("must be positive, got {}", h.touch_level),
        );
        check(
            h.default_radius_mm > 0.0,
            "hmi.default_radius_mm",
            format!("must be positive, got {}", h.default_radius_mm),
        );
        let a = h.actions.validate();
        check(
            a.is_ok(),
            "hmi.actions",
            a.err().map(|e| e.to_string()).unwrap_or_default(),
        );
        out
    }

    pub fn params_for(&self, method: Method) -> &ReconstructionParams {
        match method {
            Method::Tikhonov => &self.tikhonov,
            Method::L1 => &self.l1,
        }
    }
}

/// 1-based line of the first `"key":` in `text`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines()
        .position(|line| {
            line.match_indices(&quoted)
                .any(|(i, _)| line[i + quoted.len()..].trim_start().starts_with(':'))
        })
        .map(|i| i + 1)
}
