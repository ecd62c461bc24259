//! Quasistatic conduction forward model.
//!
//! Linear triangular elements with piecewise-constant conductivity. Current
//! enters through electrode segments with uniform density (gap model) and
//! electrode voltages are length averages of the boundary potential, so the
//! measurement functional of an electrode pair equals its unit injection
//! vector. The ground is node 0.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, BandCholesky, SparseMatrix};
use crate::mesh::{ConductivityField, Mesh};
use crate::protocol::Protocol;

const GROUND_NODE: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub node_potentials: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFrame {
    pub voltages: Vec<f64>,
    pub protocol_id: u64,
    pub drive_current: f64,
}

impl MeasurementFrame {
    pub fn len(&self) -> usize {
        self.voltages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltages.is_empty()
    }

    /// `self - reference`, pattern by pattern.
    pub fn delta(&self, reference: &MeasurementFrame) -> Result<MeasurementFrame> {
        if self.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                expected: reference.len(),
                actual: self.len(),
            });
        }
        if self.protocol_id != reference.protocol_id {
            return Err(Error::InvalidParameter(format!(
                "frames come from different protocols ({:016x} vs {:016x})",
                self.protocol_id, reference.protocol_id
            )));
        }
        Ok(MeasurementFrame {
            voltages: self
                .voltages
                .iter()
                .zip(&reference.voltages)
                .map(|(a, b)| a - b)
                .collect(),
            protocol_id: self.protocol_id,
            drive_current: self.drive_current,
        })
    }
}

/// Assembles the (ungrounded, singular) stiffness matrix ∫σ∇φᵢ·∇φⱼ.
pub fn assemble_system(mesh: &Mesh, field: &ConductivityField) -> Result<SparseMatrix> {
    field.check_len(mesh)?;
    let mut triplets = Vec::with_capacity(9 * mesh.element_count());
    for (k, el) in mesh.elements().iter().enumerate() {
        let sigma = field.values()[k];
        if !(sigma > 0.0) {
            return Err(Error::NonPositiveConductivity {
                element: k,
                value: sigma,
            });
        }
        let g = mesh.shape_gradients(k);
        let scale = sigma * mesh.area(k);
        for i in 0..3 {
            for j in 0..3 {
                let v = scale * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                triplets.push((el[i], el[j], v));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(mesh.node_count(), &triplets))
}

/// Nodal current vector for `current` amperes injected at `plus` and
/// withdrawn at `minus`.
pub fn injection_vector(mesh: &Mesh, plus: usize, minus: usize, current: f64) -> Result<Vec<f64>> {
    let e = mesh.electrode_count();
    if plus >= e || minus >= e || plus == minus {
        return Err(Error::InvalidParameter(format!(
            "invalid electrode pair ({plus}, {minus}) for {e} electrodes"
        )));
    }
    let mut rhs = vec![0.0; mesh.node_count()];
    for &(n, w) in mesh.electrode_weights(plus) {
        rhs[n] += current * w;
    }
    for &(n, w) in mesh.electrode_weights(minus) {
        rhs[n] -= current * w;
    }
    Ok(rhs)
}

/// Length-averaged potential over an electrode.
pub fn electrode_potential(mesh: &Mesh, electrode: usize, potentials: &[f64]) -> f64 {
    mesh.electrode_weights(electrode)
        .iter()
        .map(|&(n, w)| w * potentials[n])
        .sum()
}

/// Grounded, factorized conduction operator for one conductivity field.
/// Factorized once, then reused for every drive pair.
#[derive(Debug, Clone)]
pub struct ForwardSystem {
    factor: BandCholesky,
}

impl ForwardSystem {
    pub fn new(mesh: &Mesh, field: &ConductivityField) -> Result<Self> {
        Self::from_stiffness(assemble_system(mesh, field)?)
    }

    pub fn from_stiffness(mut stiffness: SparseMatrix) -> Result<Self> {
        stiffness.ground(GROUND_NODE);
        Ok(Self {
            factor: BandCholesky::factor_sparse(&stiffness)?,
        })
    }

    /// Potentials for an arbitrary nodal current vector (ground node forced to 0 V).
    pub fn solve_currents(&self, currents: &[f64]) -> Result<Vec<f64>> {
        if currents.len() != self.factor.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.factor.dim(),
                actual: currents.len(),
            });
        }
        let mut x = currents.to_vec();
        x[GROUND_NODE] = 0.0;
        self.factor.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_drive(
        &self,
        mesh: &Mesh,
        drive: (usize, usize),
        current: f64,
    ) -> Result<PotentialField> {
        let rhs = injection_vector(mesh, drive.0, drive.1, current)?;
        let node_potentials = self.solve_currents(&rhs)?;
        if node_potentials.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite {
                row: 0,
                pivot: f64::NAN,
            });
        }
        Ok(PotentialField { node_potentials })
    }
}

fn check_protocol(mesh: &Mesh, protocol: &Protocol) -> Result<()> {
    if protocol.electrode_count != mesh.electrode_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.electrode_count(),
            actual: protocol.electrode_count,
        });
    }
    Ok(())
}

/// Simulated voltages for every pattern; one solve per distinct drive pair.
pub fn simulate_frame(
    mesh: &Mesh,
    field: &ConductivityField,
    protocol: &Protocol,
    current: f64,
) -> Result<MeasurementFrame> {
    check_protocol(mesh, protocol)?;
    let system = ForwardSystem::new(mesh, field)?;
    simulate_with(&system, mesh, protocol, current)
}

/// Like [`simulate_frame`] with an already factorized system.
pub fn simulate_with(
    system: &ForwardSystem,
    mesh: &Mesh,
    protocol: &Protocol,
    current: f64,
) -> Result<MeasurementFrame> {
    check_protocol(mesh, protocol)?;
    let mut solutions: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for pair in protocol.drive_pairs() {
        let u = system.solve_drive(mesh, pair, current)?;
        solutions.insert(pair, u.node_potentials);
    }
    let voltages = protocol
        .patterns
        .iter()
        .map(|p| {
            let u = &solutions[&p.drive_pair()];
            electrode_potential(mesh, p.meas_plus, u) - electrode_potential(mesh, p.meas_minus, u)
        })
        .collect();
    Ok(MeasurementFrame {
        voltages,
        protocol_id: protocol.id(),
        drive_current: current,
    })
}

/// Adds white Gaussian noise at the given signal-to-noise ratio, where signal
/// power is the mean square of the frame. An infinite SNR returns the frame
/// unchanged.
pub fn add_noise(frame: &MeasurementFrame, snr_db: f64, seed: u64) -> Result<MeasurementFrame> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("snr {snr_db} dB")));
    }
    if snr_db == f64::INFINITY || frame.is_empty() {
        return Ok(frame.clone());
    }
    let signal_power = dot(&frame.voltages, &frame.voltages) / frame.len() as f64;
    let std_dev = libm::sqrt(signal_power / libm::pow(10.0, snr_db / 10.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let voltages = frame
        .voltages
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + std_dev * z
        })
        .collect();
    Ok(MeasurementFrame {
        voltages,
        ..frame.clone()
    })
}
