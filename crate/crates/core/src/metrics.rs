//! Sensitivity and reconstruction-quality measures.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::MeasurementFrame;
use crate::inverse::ReconstructionImage;
use crate::mesh::Mesh;

/// References smaller than this (in volts) are left out of the mean.
pub const NEGLIGIBLE_VOLTAGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub config_label: String,
    pub mean_relative_change: f64,
    /// `|touched - reference| / |reference|` per pattern; `None` where the
    /// reference voltage was negligible.
    pub per_measurement_changes: Vec<Option<f64>>,
    pub excluded: usize,
}

pub fn mean_relative_change(
    reference: &MeasurementFrame,
    touched: &MeasurementFrame,
    config_label: &str,
) -> Result<SensitivityReport> {
    // Same protocol and length, or an error.
    touched.delta(reference)?;
    let per: Vec<Option<f64>> = reference
        .voltages
        .iter()
        .zip(&touched.voltages)
        .map(|(r, t)| (r.abs() >= NEGLIGIBLE_VOLTAGE).then(|| (t - r).abs() / r.abs()))
        .collect();
    let used: Vec<f64> = per.iter().flatten().copied().collect();
    let mean = if used.is_empty() {
        0.0
    } else {
        used.iter().sum::<f64>() / used.len() as f64
    };
    Ok(SensitivityReport {
        config_label: config_label.into(),
        mean_relative_change: mean,
        excluded: per.len() - used.len(),
        per_measurement_changes: per,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub centroid: [f64; 2],
    pub area: f64,
    pub peak: f64,
    pub elements: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobReport {
    pub threshold: f64,
    pub blobs: Vec<Blob>,
}

impl BlobReport {
    /// Blob with the highest peak; the first one wins ties.
    pub fn dominant(&self) -> Option<&Blob> {
        self.blobs
            .iter()
            .fold(None, |best: Option<&Blob>, b| match best {
                Some(a) if a.peak >= b.peak => Some(a),
                _ => Some(b),
            })
    }
}

/// Edge-connected groups of elements at or above `threshold × max`, in order
/// of their lowest element index.
pub fn detect_blobs(
    image: &ReconstructionImage,
    mesh: &Mesh,
    threshold: f64,
) -> Result<BlobReport> {
    if image.values.len() != mesh.element_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.element_count(),
            actual: image.values.len(),
        });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "blob threshold {threshold} must be in (0, 1)"
        )));
    }
    let max = image.values.iter().copied().fold(0.0, f64::max);
    let mut blobs = Vec::new();
    if max <= 0.0 {
        return Ok(BlobReport { threshold, blobs });
    }
    let cut = threshold * max;
    let above: Vec<bool> = image.values.iter().map(|&v| v >= cut).collect();
    let mut seen = vec![false; above.len()];
    for start in 0..above.len() {
        if !above[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut members = Vec::new();
        while let Some(k) = queue.pop_front() {
            members.push(k);
            for &nb in mesh.neighbors(k).iter().flatten() {
                if above[nb] && !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
        members.sort_unstable();
        let mut area = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut peak = f64::MIN;
        for &k in &members {
            let a = mesh.area(k);
            let c = mesh.centroid(k);
            area += a;
            cx += a * c[0];
            cy += a * c[1];
            peak = peak.max(image.values[k]);
        }
        blobs.push(Blob {
            centroid: [cx / area, cy / area],
            area,
            peak,
            elements: members,
        });
    }
    Ok(BlobReport { threshold, blobs })
}

/// Distance of each true center to the blob matched to it by a minimum
/// total-distance one-to-one assignment. Output follows the order of `truth`.
pub fn localization_error(report: &BlobReport, truth: &[[f64; 2]]) -> Result<Vec<f64>> {
    if report.blobs.len() != truth.len() {
        return Err(Error::CountMismatch {
            blobs: report.blobs.len(),
            truth: truth.len(),
        });
    }
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| {
            report
                .blobs
                .iter()
                .map(|b| libm::hypot(b.centroid[0] - t[0], b.centroid[1] - t[1]))
                .collect()
        })
        .collect();
    let assignment = min_cost_assignment(&cost);
    Ok(assignment
        .iter()
        .enumerate()
        .map(|(t, &b)| cost[t][b])
        .collect())
}

/// How well a normalized image reproduces a ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingCoverage {
    /// Fraction of elements with centroid in the annulus at or above the cut.
    pub coverage: f64,
    /// Elements with centroid within `inner_radius / 2` of the center that
    /// reach the cut.
    pub center_hits: usize,
}

impl RingCoverage {
    pub fn center_clear(&self) -> bool {
        self.center_hits == 0
    }
}

/// Thresholds `image` at `threshold × max` and compares it with the annulus
/// `inner ≤ |p − center| ≤ outer`.
pub fn ring_coverage(
    image: &ReconstructionImage,
    mesh: &Mesh,
    center: [f64; 2],
    inner_radius: f64,
    outer_radius: f64,
    threshold: f64,
) -> Result<RingCoverage> {
    if image.values.len() != mesh.element_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.element_count(),
            actual: image.values.len(),
        });
    }
    if !(inner_radius > 0.0 && inner_radius < outer_radius) {
        return Err(Error::InvalidParameter(alloc::format!(
            "ring radii {inner_radius}, {outer_radius}"
        )));
    }
    let max = image.values.iter().copied().fold(0.0, f64::max);
    let cut = threshold * max;
    let hit = |k: usize| max > 0.0 && image.values[k] >= cut;
    let (mut inside, mut covered, mut center_hits) = (0usize, 0usize, 0usize);
    for k in 0..mesh.element_count() {
        let c = mesh.centroid(k);
        let d = libm::hypot(c[0] - center[0], c[1] - center[1]);
        if d >= inner_radius && d <= outer_radius {
            inside += 1;
            covered += usize::from(hit(k));
        }
        if d <= 0.5 * inner_radius && hit(k) {
            center_hits += 1;
        }
    }
    Ok(RingCoverage {
        coverage: if inside == 0 {
            0.0
        } else {
            covered as f64 / inside as f64
        },
        center_hits,
    })
}

/// Hungarian algorithm (shortest augmenting paths with potentials) for a
/// square cost matrix. Returns the column assigned to each row.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let reduced = cost[r - 1][c - 1] - u[r] - v[c];
                if reduced < min_to[c] {
                    min_to[c] = reduced;
                    way[c] = col0;
                }
                if min_to[c] < delta {
                    delta = min_to[c];
                    col1 = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    min_to[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for c in 1..=n {
        assignment[owner[c] - 1] = c - 1;
    }
    assignment
}
