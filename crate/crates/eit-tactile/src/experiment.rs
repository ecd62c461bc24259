//! Batch experiments: the lattice sensitivity sweep, the phantom
//! reconstruction set, and the mesh export.

use std::io::Write;
use std::path::{Path, PathBuf};

use eit_core::forward::{add_noise, simulate_frame};
use eit_core::inverse::{postprocess, Method, ReconstructionImage, Reconstructor};
use eit_core::mesh::{build_mesh, uniform_field};
use eit_core::metrics::{
    detect_blobs, localization_error, mean_relative_change, BlobReport, RingCoverage,
};
use eit_core::phantom::{apply_lattice, apply_touches, LatticeSpec, TouchSpec};
use eit_core::protocol::generate_adjacent_protocol;
use eit_core::sensitivity::{compute_jacobian, SensitivityRecord};
use eit_core::{ConductivityField, MeasurementFrame, Mesh, Protocol, SensitivityMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Phantom};
use crate::formats::{create, write_frame_csv, write_image_csv, write_json, write_mesh, write_pgm};
use crate::raster::Raster;
use crate::Result;

pub const METHODS: [Method; 2] = [Method::Tikhonov, Method::L1];

pub fn method_name(method: Method) -> &'static str {
    match method {
        Method::Tikhonov => "tikhonov",
        Method::L1 => "l1",
    }
}

fn reference_field(config: &ExperimentConfig, mesh: &Mesh) -> Result<ConductivityField> {
    Ok(match &config.lattice {
        Some(spec) => apply_lattice(mesh, spec, config.background_conductivity)?,
        None => uniform_field(mesh, config.background_conductivity)?,
    })
}

/// Simulation and reconstruction state shared by every phantom or frame.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub sim_mesh: Mesh,
    pub recon_mesh: Mesh,
    pub protocol: Protocol,
    pub sim_reference: ConductivityField,
    pub reference_frame: MeasurementFrame,
    pub jacobian: SensitivityMatrix,
    pub snr_db: Option<f64>,
    pub noise_seed: u64,
}

impl Pipeline {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let m = &config.mesh;
        let sim_mesh = build_mesh(
            m.side_mm,
            m.sim_divisions,
            m.electrode_count,
            m.electrode_width_mm,
        )?;
        let recon_mesh = build_mesh(
            m.side_mm,
            m.recon_divisions,
            m.electrode_count,
            m.electrode_width_mm,
        )?;
        let protocol =
            generate_adjacent_protocol(m.electrode_count, config.protocol.reciprocity_reduced)?;
        let current = config.protocol.drive_current;
        let sim_reference = reference_field(config, &sim_mesh)?;
        let reference_frame = simulate_frame(&sim_mesh, &sim_reference, &protocol, current)?;
        let recon_reference = reference_field(config, &recon_mesh)?;
        let jacobian = compute_jacobian(&recon_mesh, &recon_reference, &protocol, current)?;
        Ok(Self {
            sim_mesh,
            recon_mesh,
            protocol,
            sim_reference,
            reference_frame,
            jacobian,
            snr_db: config.noise.snr_db,
            noise_seed: config.noise.seed,
        })
    }

    /// Noisy ΔV of a touch configuration; `stream` selects the noise draw.
    /// No touches give an exactly zero frame.
    pub fn delta_v(&self, touches: &[TouchSpec], stream: u64) -> Result<MeasurementFrame> {
        let mut zero = self.reference_frame.clone();
        zero.voltages.iter_mut().for_each(|v| *v = 0.0);
        if touches.is_empty() {
            return Ok(zero);
        }
        let field = apply_touches(&self.sim_reference, &self.sim_mesh, touches)?;
        let touched = simulate_frame(
            &self.sim_mesh,
            &field,
            &self.protocol,
            self.reference_frame.drive_current,
        )?;
        let dv = touched.delta(&self.reference_frame)?;
        Ok(match self.snr_db {
            Some(snr) => add_noise(&dv, snr, self.noise_seed.wrapping_add(stream))?,
            None => dv,
        })
    }

    pub fn reconstructor(
        &self,
        config: &ExperimentConfig,
        method: Method,
    ) -> Result<Reconstructor> {
        Ok(Reconstructor::new(
            &self.jacobian,
            config.params_for(method),
        )?)
    }
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: String,
    /// Empty for the uniform layer.
    pub channel_width_mm: Option<f64>,
    pub phantom: String,
    pub level: f64,
    pub mean_relative_change: f64,
    pub excluded: usize,
}

pub const SWEEP_HEADER: [&str; 6] = [
    "config",
    "channel_width_mm",
    "phantom",
    "level",
    "mean_relative_change",
    "excluded",
];

/// Rows ordered by layer (uniform first, then widths as listed), phantom, level.
pub fn sweep_rows(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let s = &config.sweep;
    let m = &config.mesh;
    let mesh = build_mesh(
        m.side_mm,
        s.divisions,
        m.electrode_count,
        m.electrode_width_mm,
    )?;
    let protocol =
        generate_adjacent_protocol(m.electrode_count, config.protocol.reciprocity_reduced)?;
    let current = config.protocol.drive_current;

    let mut layers: Vec<Option<f64>> = Vec::new();
    if s.include_uniform {
        layers.push(None);
    }
    layers.extend(s.channel_widths_mm.iter().map(|&w| Some(w)));
    if s.levels.is_empty() || s.phantoms.is_empty() {
        return Ok(Vec::new());
    }

    let per_layer: Vec<Vec<SweepRow>> = layers
        .par_iter()
        .map(|&width| -> Result<Vec<SweepRow>> {
            let (label, base) = match width {
                None => (
                    "uniform".to_string(),
                    uniform_field(&mesh, config.background_conductivity)?,
                ),
                Some(w) => {
                    let spec = LatticeSpec {
                        pitch: s.pitch_mm,
                        channel_width: w,
                        background_conductivity: s.filler_conductivity,
                    };
                    (
                        format!("lattice-{w}mm"),
                        apply_lattice(&mesh, &spec, config.background_conductivity)?,
                    )
                }
            };
            let reference = simulate_frame(&mesh, &base, &protocol, current)?;
            let mut rows = Vec::new();
            for phantom in &s.phantoms {
                for &level in &s.levels {
                    let field = apply_touches(&base, &mesh, &phantom.touches(level))?;
                    let touched = simulate_frame(&mesh, &field, &protocol, current)?;
                    let report = mean_relative_change(&reference, &touched, &label)?;
                    rows.push(SweepRow {
                        config: label.clone(),
                        channel_width_mm: width,
                        phantom: phantom.label.clone(),
                        level,
                        mean_relative_change: report.mean_relative_change,
                        excluded: report.excluded,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_layer.into_iter().flatten().collect())
}

/// Header line always, then one line per row.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(r: R) -> Result<Vec<SweepRow>> {
    Ok(csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<_, _>>()?)
}

/// Writes `sweep.csv` under `out_dir`.
pub fn run_sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    let rows = sweep_rows(config)?;
    let path = out_dir.join("sweep.csv");
    let mut w = create(&path)?;
    write_sweep_csv(&mut w, &rows)?;
    w.flush()?;
    log::info!("sweep: {} rows -> {}", rows.len(), path.display());
    Ok(path)
}

// ------------------------------------------------------- reconstruction

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    /// Raw peak Δσ (S/m).
    pub peak: f64,
    pub blob_count: usize,
    /// Matched centroid distances in touch order; absent on a count mismatch
    /// or for ring phantoms.
    pub localization_error_mm: Option<Vec<f64>>,
    pub ring: Option<RingCoverage>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomResult {
    pub label: String,
    pub touch_count: usize,
    /// Set when this phantom failed; the rest of the batch still runs.
    pub error: Option<String>,
    pub methods: Vec<MethodResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub sim_mesh_id: String,
    pub recon_mesh_id: String,
    pub protocol_id: String,
    pub measurements: usize,
    pub snr_db: Option<f64>,
    pub blob_threshold: f64,
    pub phantoms: Vec<PhantomResult>,
}

/// Everything computed for one phantom and method, before any file IO.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub method: Method,
    pub image: ReconstructionImage,
    pub blobs: BlobReport,
    pub result: MethodResult,
}

/// ΔV for phantom number `index` and its reconstruction by each method.
pub fn evaluate_phantom(
    config: &ExperimentConfig,
    pipeline: &Pipeline,
    reconstructors: &[(Method, Reconstructor)],
    phantom: &Phantom,
    index: usize,
) -> Result<(MeasurementFrame, Vec<Outcome>)> {
    let dv = pipeline.delta_v(&phantom.touches, index as u64)?;
    let mesh = &pipeline.recon_mesh;
    let mut outcomes = Vec::new();
    for (method, rec) in reconstructors {
        let image = postprocess(&rec.reconstruct(&dv.voltages, mesh.id())?);
        let blobs = detect_blobs(&image, mesh, config.blob_threshold)?;
        let ring = phantom
            .ring()
            .map(|(t, inner, outer)| {
                eit_core::metrics::ring_coverage(
                    &image,
                    mesh,
                    t.center,
                    inner,
                    outer,
                    config.ring_threshold,
                )
            })
            .transpose()?;
        let localization_error_mm = match ring {
            Some(_) => None,
            None => localization_error(&blobs, &phantom.centers()).ok(),
        };
        outcomes.push(Outcome {
            method: *method,
            result: MethodResult {
                method: *method,
                peak: image.peak,
                blob_count: blobs.blobs.len(),
                localization_error_mm,
                ring,
                files: Vec::new(),
            },
            image,
            blobs,
        });
    }
    Ok((dv, outcomes))
}

fn write_phantom(
    pipeline: &Pipeline,
    raster: &Raster,
    phantom: &Phantom,
    dv: &MeasurementFrame,
    outcomes: &mut [Outcome],
    out_dir: &Path,
) -> Result<()> {
    let label = &phantom.label;
    let mut w = create(&out_dir.join(format!("{label}_dv.csv")))?;
    write_frame_csv(&mut w, dv, &pipeline.protocol)?;
    w.flush()?;
    for o in outcomes.iter_mut() {
        let stem = format!("{label}_{}", method_name(o.method));
        let names = [
            format!("{stem}.pgm"),
            format!("{stem}.csv"),
            format!("{stem}_blobs.json"),
        ];
        let mut w = create(&out_dir.join(&names[0]))?;
        write_pgm(&mut w, &raster.sample(&o.image.values))?;
        w.flush()?;
        let mut w = create(&out_dir.join(&names[1]))?;
        write_image_csv(&mut w, &o.image, &pipeline.recon_mesh)?;
        w.flush()?;
        write_json(&out_dir.join(&names[2]), &o.blobs)?;
        o.result.files = names.to_vec();
    }
    Ok(())
}

/// Reconstructs every configured phantom with both methods and writes images,
/// blob reports and `report.json` under `out_dir`. A failing phantom is
/// recorded in the report and does not stop the others.
pub fn run_reconstruction(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ReconstructionReport> {
    let pipeline = Pipeline::new(config)?;
    let reconstructors = METHODS
        .iter()
        .map(|&m| Ok((m, pipeline.reconstructor(config, m)?)))
        .collect::<Result<Vec<_>>>()?;
    let raster = Raster::new(&pipeline.recon_mesh, config.raster_size);
    std::fs::create_dir_all(out_dir).map_err(crate::io_err(out_dir))?;

    let phantoms: Vec<PhantomResult> = config
        .phantoms
        .par_iter()
        .enumerate()
        .map(|(index, phantom)| {
            let run = || -> Result<Vec<MethodResult>> {
                let (dv, mut outcomes) =
                    evaluate_phantom(config, &pipeline, &reconstructors, phantom, index)?;
                write_phantom(&pipeline, &raster, phantom, &dv, &mut outcomes, out_dir)?;
                Ok(outcomes.into_iter().map(|o| o.result).collect())
            };
            match run() {
                Ok(methods) => PhantomResult {
                    label: phantom.label.clone(),
                    touch_count: phantom.touches.len(),
                    error: None,
                    methods,
                },
                Err(e) => {
                    log::warn!("phantom '{}' failed: {e}", phantom.label);
                    PhantomResult {
                        label: phantom.label.clone(),
                        touch_count: phantom.touches.len(),
                        error: Some(e.to_string()),
                        methods: Vec::new(),
                    }
                }
            }
        })
        .collect();

    let report = ReconstructionReport {
        sim_mesh_id: format!("{:016x}", pipeline.sim_mesh.id()),
        recon_mesh_id: format!("{:016x}", pipeline.recon_mesh.id()),
        protocol_id: format!("{:016x}", pipeline.protocol.id()),
        measurements: pipeline.protocol.len(),
        snr_db: config.noise.snr_db,
        blob_threshold: config.blob_threshold,
        phantoms,
    };
    write_json(&out_dir.join("report.json"), &report)?;
    log::info!(
        "recon: {} phantoms -> {}",
        report.phantoms.len(),
        out_dir.display()
    );
    Ok(report)
}

// ----------------------------------------------------------------- mesh

/// Writes both meshes, the protocol and the reconstruction Jacobian.
pub fn run_mesh_export(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let pipeline = Pipeline::new(config)?;
    let paths = [
        "sim_mesh.json",
        "recon_mesh.json",
        "protocol.json",
        "jacobian.json",
    ]
    .map(|n| out_dir.join(n));
    write_mesh(&paths[0], &pipeline.sim_mesh)?;
    write_mesh(&paths[1], &pipeline.recon_mesh)?;
    write_json(&paths[2], &pipeline.protocol)?;
    write_json(&paths[3], &SensitivityRecord::from(&pipeline.jacobian))?;
    Ok(paths.to_vec())
}
