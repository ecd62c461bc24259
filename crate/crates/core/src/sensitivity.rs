//! Linearized sensitivity of the measurements to per-element conductivity.
//!
//! For pattern `p` with drive pair `d` and measurement pair `m`, the discrete
//! model gives `V_p = w_mᵀ K⁻¹ (I·w_d)` where `w` is the unit injection vector
//! of a pair. Differentiating `K(σ)` gives
//!
//! ```text
//! ∂V_p/∂σ_k = -I · area_k · (∇u_d · ∇u_m)_k
//! ```
//!
//! with `u_d`, `u_m` the unit-current potentials of the two pairs. One solve
//! per electrode pair covers every pattern.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{ForwardSystem, MeasurementFrame};
use crate::linalg::DenseMatrix;
use crate::mesh::{ConductivityField, Mesh};
use crate::protocol::Protocol;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    /// Rows follow the protocol order, columns the mesh elements; V per S/m.
    pub entries: DenseMatrix,
    pub reference_field: ConductivityField,
    pub protocol_id: u64,
    pub mesh_id: u64,
    pub drive_current: f64,
}

/// Row-major serialized layout with a shape header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityRecord {
    pub rows: usize,
    pub cols: usize,
    pub protocol_id: u64,
    pub mesh_id: u64,
    pub drive_current: f64,
    pub reference_field: Vec<f64>,
    pub data: Vec<f64>,
}

impl From<&SensitivityMatrix> for SensitivityRecord {
    fn from(j: &SensitivityMatrix) -> Self {
        Self {
            rows: j.entries.rows(),
            cols: j.entries.cols(),
            protocol_id: j.protocol_id,
            mesh_id: j.mesh_id,
            drive_current: j.drive_current,
            reference_field: j.reference_field.values().to_vec(),
            data: j.entries.as_slice().to_vec(),
        }
    }
}

impl TryFrom<SensitivityRecord> for SensitivityMatrix {
    type Error = Error;
    fn try_from(r: SensitivityRecord) -> Result<Self> {
        if r.reference_field.len() != r.cols {
            return Err(Error::DimensionMismatch {
                expected: r.cols,
                actual: r.reference_field.len(),
            });
        }
        if r.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite sensitivity entry".into(),
            ));
        }
        Ok(Self {
            entries: DenseMatrix::from_row_major(r.rows, r.cols, r.data)?,
            reference_field: ConductivityField::new(r.reference_field)?,
            protocol_id: r.protocol_id,
            mesh_id: r.mesh_id,
            drive_current: r.drive_current,
        })
    }
}

impl SensitivityMatrix {
    pub fn rows(&self) -> usize {
        self.entries.rows()
    }

    pub fn cols(&self) -> usize {
        self.entries.cols()
    }

    /// Linear prediction ΔV = J Δσ.
    pub fn predict_delta(&self, delta_sigma: &[f64]) -> Result<MeasurementFrame> {
        if delta_sigma.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                actual: delta_sigma.len(),
            });
        }
        Ok(MeasurementFrame {
            voltages: self.entries.mul_vec(delta_sigma),
            protocol_id: self.protocol_id,
            drive_current: self.drive_current,
        })
    }
}

pub fn compute_jacobian(
    mesh: &Mesh,
    field: &ConductivityField,
    protocol: &Protocol,
    current: f64,
) -> Result<SensitivityMatrix> {
    field.check_len(mesh)?;
    if protocol.electrode_count != mesh.electrode_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.electrode_count(),
            actual: protocol.electrode_count,
        });
    }
    let system = ForwardSystem::new(mesh, field)?;

    // Per-element gradients of the unit-current solution of every pair.
    let mut gradients: BTreeMap<(usize, usize), Vec<[f64; 2]>> = BTreeMap::new();
    for pair in protocol.electrode_pairs() {
        let u = system.solve_drive(mesh, pair, 1.0)?.node_potentials;
        let g = (0..mesh.element_count())
            .map(|k| mesh.field_gradient(k, &u))
            .collect();
        gradients.insert(pair, g);
    }
    let areas: Vec<f64> = (0..mesh.element_count()).map(|k| mesh.area(k)).collect();

    let mut entries = DenseMatrix::zeros(protocol.len(), mesh.element_count());
    for (r, p) in protocol.patterns.iter().enumerate() {
        let gd = &gradients[&p.drive_pair()];
        let gm = &gradients[&p.meas_pair()];
        let row = entries.row_mut(r);
        for k in 0..row.len() {
            row[k] = -current * areas[k] * (gd[k][0] * gm[k][0] + gd[k][1] * gm[k][1]);
        }
    }
    Ok(SensitivityMatrix {
        entries,
        reference_field: field.clone(),
        protocol_id: protocol.id(),
        mesh_id: mesh.id(),
        drive_current: current,
    })
}
