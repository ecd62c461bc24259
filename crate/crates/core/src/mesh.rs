//! Triangulated square conductive layer with boundary electrodes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type Span = (f64, f64, usize);

/// Part of a boundary edge covered by an electrode.
///
/// `start` and `end` are positions along the edge from `nodes[0]` to
/// `nodes[1]`, as fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub nodes: [usize; 2],
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub segments: Vec<BoundarySegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMesh", into = "RawMesh")]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    electrodes: Vec<Electrode>,
    domain_side: f64,
    // Derived data, rebuilt on construction.
    neighbors: Vec<[Option<usize>; 3]>,
    electrode_weights: Vec<Vec<(usize, f64)>>,
}

/// Serialized form of [`Mesh`]; field order is fixed for diffable output.
#[derive(Serialize, Deserialize)]
struct RawMesh {
    domain_side: f64,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    electrodes: Vec<Electrode>,
}

impl TryFrom<RawMesh> for Mesh {
    type Error = Error;
    fn try_from(raw: RawMesh) -> Result<Self> {
        Mesh::new(raw.nodes, raw.elements, raw.electrodes, raw.domain_side)
    }
}

impl From<Mesh> for RawMesh {
    fn from(m: Mesh) -> Self {
        RawMesh {
            domain_side: m.domain_side,
            nodes: m.nodes,
            elements: m.elements,
            electrodes: m.electrodes,
        }
    }
}

impl Mesh {
    /// Builds a mesh from raw parts and checks every invariant.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 3]>,
        electrodes: Vec<Electrode>,
        domain_side: f64,
    ) -> Result<Self> {
        if !(domain_side > 0.0) || !domain_side.is_finite() {
            return Err(Error::InvalidMesh(format!("domain side {domain_side}")));
        }
        if electrodes.len() < 4 {
            return Err(Error::InvalidMesh(format!(
                "{} electrodes, at least 4 required",
                electrodes.len()
            )));
        }
        for (k, el) in elements.iter().enumerate() {
            if el.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::InvalidMesh(format!(
                    "element {k} references a missing node"
                )));
            }
            if el[0] == el[1] || el[1] == el[2] || el[0] == el[2] {
                return Err(Error::InvalidMesh(format!("element {k} repeats a node")));
            }
            if !(signed_area(&nodes, el) > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "element {k} has non-positive area"
                )));
            }
        }

        let edge_owners = edge_owners(&elements);
        let mut neighbors = vec![[None; 3]; elements.len()];
        for (k, el) in elements.iter().enumerate() {
            for i in 0..3 {
                let key = edge_key(el[i], el[(i + 1) % 3]);
                let owners = &edge_owners[&key];
                if owners.len() > 2 {
                    return Err(Error::InvalidMesh(format!(
                        "edge {key:?} shared by >2 elements"
                    )));
                }
                neighbors[k][i] = owners.iter().copied().find(|&o| o != k);
            }
        }

        // Segments must sit on boundary edges and must not overlap.
        // boundary edge -> (start, end, electrode) of the segments on it
        let mut covered: BTreeMap<(usize, usize), Vec<Span>> = BTreeMap::new();
        for (e, electrode) in electrodes.iter().enumerate() {
            if electrode.segments.is_empty() {
                return Err(Error::InvalidMesh(format!("electrode {e} has no segments")));
            }
            for seg in &electrode.segments {
                let key = edge_key(seg.nodes[0], seg.nodes[1]);
                match edge_owners.get(&key) {
                    Some(o) if o.len() == 1 => {}
                    _ => {
                        return Err(Error::InvalidMesh(format!(
                            "electrode {e} segment {:?} is not on a boundary edge",
                            seg.nodes
                        )))
                    }
                }
                if !(0.0 <= seg.start && seg.start < seg.end && seg.end <= 1.0) {
                    return Err(Error::InvalidMesh(format!(
                        "electrode {e} segment range [{}, {}]",
                        seg.start, seg.end
                    )));
                }
                // Normalize the range to the canonical edge direction.
                let (a, b) = if seg.nodes[0] < seg.nodes[1] {
                    (seg.start, seg.end)
                } else {
                    (1.0 - seg.end, 1.0 - seg.start)
                };
                let list = covered.entry(key).or_default();
                for &(a2, b2, e2) in list.iter() {
                    if a < b2 && a2 < b {
                        return Err(Error::InvalidMesh(format!(
                            "electrodes {e2} and {e} overlap"
                        )));
                    }
                }
                list.push((a, b, e));
            }
        }

        let electrode_weights = electrodes
            .iter()
            .map(|el| segment_weights(&nodes, el))
            .collect();

        Ok(Self {
            nodes,
            elements,
            electrodes,
            domain_side,
            neighbors,
            electrode_weights,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn domain_side(&self) -> f64 {
        self.domain_side
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn electrode_count(&self) -> usize {
        self.electrodes.len()
    }

    pub fn area(&self, element: usize) -> f64 {
        signed_area(&self.nodes, &self.elements[element])
    }

    pub fn centroid(&self, element: usize) -> [f64; 2] {
        let [a, b, c] = self.elements[element].map(|n| self.nodes[n]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Gradients of the three linear shape functions of an element.
    pub fn shape_gradients(&self, element: usize) -> [[f64; 2]; 3] {
        let el = self.elements[element];
        let p = el.map(|n| self.nodes[n]);
        let two_a = 2.0 * self.area(element);
        core::array::from_fn(|i| {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            [(p[j][1] - p[k][1]) / two_a, (p[k][0] - p[j][0]) / two_a]
        })
    }

    /// Gradient of a nodal field interpolated linearly over an element.
    pub fn field_gradient(&self, element: usize, nodal: &[f64]) -> [f64; 2] {
        let g = self.shape_gradients(element);
        let el = self.elements[element];
        let mut out = [0.0; 2];
        for i in 0..3 {
            out[0] += g[i][0] * nodal[el[i]];
            out[1] += g[i][1] * nodal[el[i]];
        }
        out
    }

    /// Edge-adjacent elements; slot `i` is across edge (node i, node i+1).
    pub fn neighbors(&self, element: usize) -> &[Option<usize>; 3] {
        &self.neighbors[element]
    }

    /// Nodal weights of an electrode: the length-averaging functional over its
    /// segments. Weights sum to one; injecting unit current through the
    /// electrode puts exactly these currents on the nodes.
    pub fn electrode_weights(&self, electrode: usize) -> &[(usize, f64)] {
        &self.electrode_weights[electrode]
    }

    /// Nodes lying on boundary edges.
    pub fn boundary_nodes(&self) -> Vec<bool> {
        let mut on = vec![false; self.nodes.len()];
        for (k, el) in self.elements.iter().enumerate() {
            for i in 0..3 {
                if self.neighbors[k][i].is_none() {
                    on[el[i]] = true;
                    on[el[(i + 1) % 3]] = true;
                }
            }
        }
        on
    }

    /// Elements having a boundary edge covered by the electrode.
    pub fn electrode_elements(&self, electrode: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for seg in &self.electrodes[electrode].segments {
            let key = edge_key(seg.nodes[0], seg.nodes[1]);
            for (k, el) in self.elements.iter().enumerate() {
                if (0..3).any(|i| edge_key(el[i], el[(i + 1) % 3]) == key) && !out.contains(&k) {
                    out.push(k);
                }
            }
        }
        out
    }

    /// Element containing the point, boundary inclusive. Ties go to the
    /// lowest element index.
    pub fn locate_element(&self, point: [f64; 2]) -> Option<usize> {
        let eps = 1e-12;
        self.elements.iter().position(|el| {
            let [a, b, c] = el.map(|n| self.nodes[n]);
            let area = orient(a, b, c);
            let l0 = orient(point, b, c) / area;
            let l1 = orient(a, point, c) / area;
            let l2 = orient(a, b, point) / area;
            l0 >= -eps && l1 >= -eps && l2 >= -eps
        })
    }

    /// Stable content hash, used as a provenance id.
    pub fn id(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write(&self.domain_side.to_le_bytes());
        for p in &self.nodes {
            h.write(&p[0].to_le_bytes());
            h.write(&p[1].to_le_bytes());
        }
        for el in &self.elements {
            for &n in el {
                h.write(&(n as u64).to_le_bytes());
            }
        }
        for e in &self.electrodes {
            h.write(&(e.segments.len() as u64).to_le_bytes());
            for s in &e.segments {
                h.write(&(s.nodes[0] as u64).to_le_bytes());
                h.write(&(s.nodes[1] as u64).to_le_bytes());
                h.write(&s.start.to_le_bytes());
                h.write(&s.end.to_le_bytes());
            }
        }
        h.finish()
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

fn signed_area(nodes: &[[f64; 2]], el: &[usize; 3]) -> f64 {
    0.5 * orient(nodes[el[0]], nodes[el[1]], nodes[el[2]])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn edge_owners(elements: &[[usize; 3]]) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut owners: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (k, el) in elements.iter().enumerate() {
        for i in 0..3 {
            owners
                .entry(edge_key(el[i], el[(i + 1) % 3]))
                .or_default()
                .push(k);
        }
    }
    owners
}

/// Exact integrals of the two hat functions over each covered sub-segment,
/// divided by the electrode length.
fn segment_weights(nodes: &[[f64; 2]], electrode: &Electrode) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total = 0.0;
    for seg in &electrode.segments {
        let [p, q] = seg.nodes.map(|n| nodes[n]);
        let len = libm::hypot(q[0] - p[0], q[1] - p[1]);
        let (s0, s1) = (seg.start, seg.end);
        let half_sq = 0.5 * (s1 * s1 - s0 * s0);
        *acc.entry(seg.nodes[0]).or_default() += len * ((s1 - s0) - half_sq);
        *acc.entry(seg.nodes[1]).or_default() += len * half_sq;
        total += len * (s1 - s0);
    }
    acc.into_iter().map(|(n, w)| (n, w / total)).collect()
}

/// Per-element conductivity in S/m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ConductivityField {
    values: Vec<f64>,
}

impl ConductivityField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((element, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::NonPositiveConductivity { element, value });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }

    /// Returns a copy with one element replaced.
    pub fn with_value(&self, element: usize, value: f64) -> Result<Self> {
        let mut values = self.values.clone();
        values[element] = value;
        Self::new(values)
    }

    /// Element-wise `self - other`.
    pub fn difference(&self, other: &Self) -> Result<Vec<f64>> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect())
    }

    pub(crate) fn check_len(&self, mesh: &Mesh) -> Result<()> {
        if self.len() != mesh.element_count() {
            return Err(Error::DimensionMismatch {
                expected: mesh.element_count(),
                actual: self.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for ConductivityField {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ConductivityField> for Vec<f64> {
    fn from(f: ConductivityField) -> Self {
        f.values
    }
}

pub fn uniform_field(mesh: &Mesh, sigma: f64) -> Result<ConductivityField> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "conductivity must be positive, got {sigma}"
        )));
    }
    ConductivityField::new(vec![sigma; mesh.element_count()])
}

/// Structured triangulation of `[0, side]²` with `electrode_count / 4`
/// evenly centered electrodes per side.
///
/// Nodes are numbered row by row from the origin. Each grid cell is cut along
/// one diagonal, alternating in a checkerboard so the triangulation maps onto
/// itself under quarter turns when `divisions` is even. Electrodes are
/// numbered counterclockwise starting at the bottom-left, so a quarter turn
/// maps electrode `e` to `e + electrode_count / 4`.
pub fn build_mesh(
    side_mm: f64,
    divisions: usize,
    electrode_count: usize,
    electrode_width_mm: f64,
) -> Result<Mesh> {
    if !(side_mm > 0.0) || !side_mm.is_finite() {
        return Err(Error::InvalidParameter(format!("side {side_mm} mm")));
    }
    if divisions == 0 {
        return Err(Error::InvalidParameter("divisions must be positive".into()));
    }
    if electrode_count < 4 || !electrode_count.is_multiple_of(4) {
        return Err(Error::InvalidParameter(format!(
            "electrode count {electrode_count} must be a positive multiple of 4"
        )));
    }
    if !(electrode_width_mm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "electrode width {electrode_width_mm} mm"
        )));
    }
    let per_side = electrode_count / 4;
    let pitch = side_mm / per_side as f64;
    if electrode_width_mm > pitch {
        return Err(Error::ElectrodeOverlap {
            count: electrode_count,
            width: electrode_width_mm,
            side: side_mm,
        });
    }

    let n = divisions;
    let h = side_mm / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 * h, j as f64 * h]);
        }
    }
    // Snap the far edges so boundary coordinates are exact.
    for p in nodes.iter_mut() {
        for c in p.iter_mut() {
            if (*c - side_mm).abs() < 1e-9 * side_mm {
                *c = side_mm;
            }
        }
    }

    let mut elements = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (p00, p10, p01, p11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                elements.push([p00, p10, p11]);
                elements.push([p00, p11, p01]);
            } else {
                elements.push([p00, p10, p01]);
                elements.push([p10, p11, p01]);
            }
        }
    }

    // Boundary node sequence of each side in counterclockwise travel order.
    let sides: [Vec<usize>; 4] = [
        (0..=n).map(|m| idx(m, 0)).collect(),
        (0..=n).map(|m| idx(n, m)).collect(),
        (0..=n).map(|m| idx(n - m, n)).collect(),
        (0..=n).map(|m| idx(0, n - m)).collect(),
    ];
    let mut electrodes = Vec::with_capacity(electrode_count);
    for chain in &sides {
        for k in 0..per_side {
            let center = pitch * (k as f64 + 0.5);
            let (a, b) = (
                center - electrode_width_mm / 2.0,
                center + electrode_width_mm / 2.0,
            );
            let mut segments = Vec::new();
            for m in 0..n {
                let (t0, t1) = (m as f64 * h, (m + 1) as f64 * h);
                let (lo, hi) = (a.max(t0), b.min(t1));
                if hi - lo > 1e-12 * side_mm {
                    segments.push(BoundarySegment {
                        nodes: [chain[m], chain[m + 1]],
                        start: ((lo - t0) / h).clamp(0.0, 1.0),
                        end: ((hi - t0) / h).clamp(0.0, 1.0),
                    });
                }
            }
            let covers_node = (0..=n).any(|m| {
                let t = m as f64 * h;
                t >= a - 1e-12 * side_mm && t <= b + 1e-12 * side_mm
            });
            if !covers_node {
                return Err(Error::MeshResolution {
                    electrode: electrodes.len(),
                });
            }
            electrodes.push(Electrode { segments });
        }
    }

    Mesh::new(nodes, elements, electrodes, side_mm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap as Map;

    #[test]
    fn default_mesh_counts() {
        let m = build_mesh(100.0, 32, 16, 3.0).unwrap();
        assert_eq!(m.element_count(), 2048);
        assert_eq!(m.node_count(), 33 * 33);
        assert_eq!(m.electrode_count(), 16);
        // Four per side, counterclockwise from the bottom.
        for e in 0..16 {
            let (n, _) = m.electrode_weights(e)[0];
            let [x, y] = m.nodes()[n];
            match e / 4 {
                0 => assert_eq!(y, 0.0),
                1 => assert_eq!(x, 100.0),
                2 => assert_eq!(y, 100.0),
                _ => assert_eq!(x, 0.0),
            }
        }
    }

    #[test]
    fn smallest_mesh() {
        let m = build_mesh(100.0, 2, 4, 3.0).unwrap();
        assert_eq!(m.element_count(), 8);
        assert_eq!(m.electrode_count(), 4);
    }

    #[test]
    fn areas_partition_domain() {
        let m = build_mesh(100.0, 32, 16, 3.0).unwrap();
        let total: f64 = (0..m.element_count()).map(|k| m.area(k)).sum();
        assert!((total - 1e4).abs() <= 1e-9 * 1e4);
        assert!((0..m.element_count()).all(|k| m.area(k) > 0.0));
    }

    #[test]
    fn edge_incidence() {
        let m = build_mesh(100.0, 8, 16, 3.0).unwrap();
        let mut count: Map<(usize, usize), usize> = Map::new();
        for el in m.elements() {
            for i in 0..3 {
                *count.entry(edge_key(el[i], el[(i + 1) % 3])).or_default() += 1;
            }
        }
        for ((a, b), c) in count {
            let [pa, pb] = [m.nodes()[a], m.nodes()[b]];
            let on_boundary = |p: [f64; 2], q: [f64; 2]| {
                (0..2).any(|d| (p[d] == 0.0 && q[d] == 0.0) || (p[d] == 100.0 && q[d] == 100.0))
            };
            assert_eq!(c, if on_boundary(pa, pb) { 1 } else { 2 });
        }
    }

    #[test]
    fn electrode_weights_cover_width() {
        let m = build_mesh(100.0, 32, 16, 3.0).unwrap();
        for e in 0..16 {
            let w = m.electrode_weights(e);
            let s: f64 = w.iter().map(|(_, v)| v).sum();
            assert!((s - 1.0).abs() < 1e-14);
            let len: f64 = m.electrodes()[e]
                .segments
                .iter()
                .map(|s| (s.end - s.start) * 100.0 / 32.0)
                .sum();
            assert!((len - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn electrodes_rotate_onto_each_other() {
        let m = build_mesh(100.0, 16, 16, 3.0).unwrap();
        let rot = |p: [f64; 2]| [100.0 - p[1], p[0]];
        for e in 0..16 {
            let a = &m.electrodes()[e].segments;
            let b = &m.electrodes()[(e + 4) % 16].segments;
            assert_eq!(a.len(), b.len());
            for (s, t) in a.iter().zip(b) {
                for i in 0..2 {
                    let p = rot(m.nodes()[s.nodes[i]]);
                    let q = m.nodes()[t.nodes[i]];
                    assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
                }
                assert!((s.start - t.start).abs() < 1e-12 && (s.end - t.end).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn triangulation_is_quarter_turn_symmetric() {
        let m = build_mesh(100.0, 8, 16, 3.0).unwrap();
        let centroids: Vec<[f64; 2]> = (0..m.element_count()).map(|k| m.centroid(k)).collect();
        for c in &centroids {
            let r = [100.0 - c[1], c[0]];
            assert!(centroids
                .iter()
                .any(|d| (d[0] - r[0]).abs() < 1e-9 && (d[1] - r[1]).abs() < 1e-9));
        }
    }

    #[test]
    fn overlap_and_resolution_errors() {
        assert!(matches!(
            build_mesh(100.0, 32, 16, 26.0),
            Err(Error::ElectrodeOverlap { .. })
        ));
        assert!(matches!(
            build_mesh(100.0, 1, 4, 3.0),
            Err(Error::MeshResolution { electrode: 0 })
        ));
        assert!(build_mesh(100.0, 32, 6, 3.0).is_err());
    }

    #[test]
    fn uniform_fields() {
        let m = build_mesh(100.0, 32, 16, 3.0).unwrap();
        let f = uniform_field(&m, 1.0).unwrap();
        assert_eq!(f.len(), 2048);
        assert!(f.values().iter().all(|&v| v == 1.0));
        let small = build_mesh(100.0, 2, 4, 3.0).unwrap();
        let f = uniform_field(&small, 5.0).unwrap();
        assert_eq!(f.values(), &[5.0; 8]);
        assert!(uniform_field(&small, 0.0).is_err());
        assert!(ConductivityField::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn locate() {
        let m = build_mesh(100.0, 32, 16, 3.0).unwrap();
        let k = m.locate_element([50.0, 50.0]).unwrap();
        let [a, b, c] = m.elements()[k].map(|n| m.nodes()[n]);
        assert!(orient(a, b, [50.0, 50.0]) >= 0.0);
        assert!(orient(b, c, [50.0, 50.0]) >= 0.0);
        assert!(orient(c, a, [50.0, 50.0]) >= 0.0);
        assert_eq!(m.locate_element([150.0, 50.0]), None);
        assert_eq!(m.locate_element([0.0, 0.0]), Some(0));
    }

    #[test]
    fn invalid_meshes_are_rejected() {
        let m = build_mesh(100.0, 2, 4, 3.0).unwrap();
        let mut elements = m.elements().to_vec();
        elements[0].swap(1, 2);
        assert!(Mesh::new(m.nodes().to_vec(), elements, m.electrodes().to_vec(), 100.0).is_err());

        let mut electrodes = m.electrodes().to_vec();
        electrodes[1] = electrodes[0].clone();
        assert!(Mesh::new(m.nodes().to_vec(), m.elements().to_vec(), electrodes, 100.0).is_err());

        let mut electrodes = m.electrodes().to_vec();
        // Interior edge: node 0 to the center node.
        electrodes[0].segments[0].nodes = [0, 4];
        assert!(Mesh::new(m.nodes().to_vec(), m.elements().to_vec(), electrodes, 100.0).is_err());
    }

    #[test]
    fn id_is_content_based() {
        let a = build_mesh(100.0, 8, 16, 3.0).unwrap();
        let b = build_mesh(100.0, 8, 16, 3.0).unwrap();
        let c = build_mesh(100.0, 8, 16, 2.0).unwrap();
        assert_eq!(a.id(), b.id());
        assert_ne!(a.id(), c.id());
    }
}
