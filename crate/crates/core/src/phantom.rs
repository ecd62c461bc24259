//! Touch phantoms and lattice channel patterns, rasterized by element centroid.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{ConductivityField, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum TouchShape {
    Disc {
        radius: f64,
    },
    Annulus {
        inner_radius: f64,
        outer_radius: f64,
    },
}

impl TouchShape {
    fn validate(&self) -> Result<()> {
        match *self {
            TouchShape::Disc { radius } if radius > 0.0 => Ok(()),
            TouchShape::Annulus {
                inner_radius,
                outer_radius,
            } if inner_radius > 0.0 && inner_radius < outer_radius => Ok(()),
            other => Err(Error::InvalidParameter(format!(
                "bad touch shape {other:?}"
            ))),
        }
    }

    fn contains(&self, center: [f64; 2], p: [f64; 2]) -> bool {
        let d = libm::hypot(p[0] - center[0], p[1] - center[1]);
        match *self {
            TouchShape::Disc { radius } => d <= radius,
            TouchShape::Annulus {
                inner_radius,
                outer_radius,
            } => d >= inner_radius && d <= outer_radius,
        }
    }
}

/// A touched region and the conductivity it takes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchSpec {
    #[serde(flatten)]
    pub shape: TouchShape,
    pub center: [f64; 2],
    pub level: f64,
}

impl TouchSpec {
    pub fn disc(center: [f64; 2], radius: f64, level: f64) -> Self {
        Self {
            shape: TouchShape::Disc { radius },
            center,
            level,
        }
    }

    pub fn annulus(center: [f64; 2], inner_radius: f64, outer_radius: f64, level: f64) -> Self {
        Self {
            shape: TouchShape::Annulus {
                inner_radius,
                outer_radius,
            },
            center,
            level,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.shape.contains(self.center, p)
    }
}

/// Elements whose centroid lies in a touch take its level; later touches win.
pub fn apply_touches(
    field: &ConductivityField,
    mesh: &Mesh,
    touches: &[TouchSpec],
) -> Result<ConductivityField> {
    field.check_len(mesh)?;
    let side = mesh.domain_side();
    for t in touches {
        t.shape.validate()?;
        if !(t.level > 0.0) || !t.level.is_finite() {
            return Err(Error::InvalidParameter(format!("touch level {}", t.level)));
        }
        if !(0.0..=side).contains(&t.center[0]) || !(0.0..=side).contains(&t.center[1]) {
            return Err(Error::InvalidParameter(format!(
                "touch center {:?} outside the sensor",
                t.center
            )));
        }
    }
    let mut values = field.values().to_vec();
    for (k, v) in values.iter_mut().enumerate() {
        let c = mesh.centroid(k);
        if let Some(t) = touches.iter().rev().find(|t| t.contains(c)) {
            *v = t.level;
        }
    }
    ConductivityField::new(values)
}

/// Orthogonal grid of conductive channels in an insulating filler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub pitch: f64,
    pub channel_width: f64,
    /// Filler conductivity, S/m. Must stay positive so the system is SPD.
    #[serde(default = "default_filler")]
    pub background_conductivity: f64,
}

/// Filler conductivity of a lattice, S/m.
pub const FILLER_CONDUCTIVITY: f64 = 1e-6;

fn default_filler() -> f64 {
    FILLER_CONDUCTIVITY
}

impl LatticeSpec {
    pub fn new(pitch: f64, channel_width: f64) -> Self {
        Self {
            pitch,
            channel_width,
            background_conductivity: FILLER_CONDUCTIVITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.channel_width > 0.0 && self.channel_width <= self.pitch) {
            return Err(Error::InvalidParameter(format!(
                "channel width {} must be in (0, pitch = {}]",
                self.channel_width, self.pitch
            )));
        }
        if !(self.background_conductivity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "background conductivity {}",
                self.background_conductivity
            )));
        }
        Ok(())
    }

    fn on_channel(&self, p: [f64; 2]) -> bool {
        let half = 0.5 * self.channel_width * (1.0 + 1e-12);
        p.iter().any(|&x| {
            let k = libm::round(x / self.pitch);
            (x - k * self.pitch).abs() <= half
        })
    }
}

/// Conductive elements: centroid within half a channel width of a grid line
/// `x = k·pitch` or `y = k·pitch`, plus every element touching the boundary.
pub fn lattice_mask(mesh: &Mesh, spec: &LatticeSpec) -> Result<Vec<bool>> {
    spec.validate()?;
    let boundary = mesh.boundary_nodes();
    Ok((0..mesh.element_count())
        .map(|k| {
            mesh.elements()[k].iter().any(|&n| boundary[n]) || spec.on_channel(mesh.centroid(k))
        })
        .collect())
}

pub fn apply_lattice(
    mesh: &Mesh,
    spec: &LatticeSpec,
    channel_conductivity: f64,
) -> Result<ConductivityField> {
    if !(channel_conductivity > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "channel conductivity {channel_conductivity}"
        )));
    }
    let mask = lattice_mask(mesh, spec)?;
    check_connectivity(mesh, &mask)?;
    ConductivityField::new(
        mask.iter()
            .map(|&on| {
                if on {
                    channel_conductivity
                } else {
                    spec.background_conductivity
                }
            })
            .collect(),
    )
}

/// Every electrode must touch the conductive component reached from
/// electrode 0 through edge-adjacent conductive elements.
pub fn check_connectivity(mesh: &Mesh, conductive: &[bool]) -> Result<()> {
    let mut seen = vec![false; mesh.element_count()];
    let mut queue = VecDeque::new();
    for k in mesh.electrode_elements(0) {
        if conductive[k] && !seen[k] {
            seen[k] = true;
            queue.push_back(k);
        }
    }
    if queue.is_empty() {
        return Err(Error::LatticeDisconnected { electrode: 0 });
    }
    while let Some(k) = queue.pop_front() {
        for nb in mesh.neighbors(k).iter().flatten() {
            if conductive[*nb] && !seen[*nb] {
                seen[*nb] = true;
                queue.push_back(*nb);
            }
        }
    }
    for e in 1..mesh.electrode_count() {
        if !mesh.electrode_elements(e).iter().any(|&k| seen[k]) {
            return Err(Error::LatticeDisconnected { electrode: e });
        }
    }
    Ok(())
}

/// Linear press-depth surrogate: `base + gain·depth`, never below `base`.
pub fn press_to_level(depth_mm: f64, base: f64, gain: f64) -> f64 {
    (base + gain * depth_mm).max(base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, uniform_field};

    fn mesh() -> Mesh {
        build_mesh(100.0, 32, 16, 3.0).unwrap()
    }

    #[test]
    fn disc_touch() {
        let m = mesh();
        let f = uniform_field(&m, 1.0).unwrap();
        let t = apply_touches(&f, &m, &[TouchSpec::disc([50.0, 50.0], 10.0, 5.0)]).unwrap();
        let mut touched = 0;
        for k in 0..m.element_count() {
            let c = m.centroid(k);
            let inside = libm::hypot(c[0] - 50.0, c[1] - 50.0) <= 10.0;
            assert_eq!(t.values()[k], if inside { 5.0 } else { 1.0 });
            touched += inside as usize;
        }
        assert!(touched > 0);
        assert_eq!(apply_touches(&f, &m, &[]).unwrap(), f);
    }

    #[test]
    fn annulus_matches_geometric_count() {
        let m = mesh();
        let f = uniform_field(&m, 1.0).unwrap();
        let t =
            apply_touches(&f, &m, &[TouchSpec::annulus([50.0, 50.0], 15.0, 25.0, 5.0)]).unwrap();
        let oracle = (0..m.element_count())
            .filter(|&k| {
                let c = m.centroid(k);
                let d2 = (c[0] - 50.0).powi(2) + (c[1] - 50.0).powi(2);
                (225.0..=625.0).contains(&d2)
            })
            .count();
        assert_eq!(t.values().iter().filter(|v| **v == 5.0).count(), oracle);
    }

    #[test]
    fn later_touch_wins() {
        let m = mesh();
        let f = uniform_field(&m, 1.0).unwrap();
        let t = apply_touches(
            &f,
            &m,
            &[
                TouchSpec::disc([50.0, 50.0], 10.0, 5.0),
                TouchSpec::disc([50.0, 50.0], 5.0, 2.0),
            ],
        )
        .unwrap();
        let k = m.locate_element([50.5, 50.2]).unwrap();
        assert_eq!(t.values()[k], 2.0);
    }

    #[test]
    fn touch_validation() {
        let m = mesh();
        let f = uniform_field(&m, 1.0).unwrap();
        assert!(apply_touches(&f, &m, &[TouchSpec::disc([50.0, 50.0], 10.0, 0.0)]).is_err());
        assert!(apply_touches(&f, &m, &[TouchSpec::disc([150.0, 50.0], 10.0, 2.0)]).is_err());
        assert!(apply_touches(&f, &m, &[TouchSpec::annulus([50.0, 50.0], 9.0, 3.0, 2.0)]).is_err());
    }

    #[test]
    fn full_width_lattice_is_uniform() {
        let m = mesh();
        let f = apply_lattice(&m, &LatticeSpec::new(20.0, 20.0), 1.0).unwrap();
        assert!(f.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn lattice_fraction_matches_centroid_oracle() {
        let m = build_mesh(100.0, 64, 16, 3.0).unwrap();
        let spec = LatticeSpec::new(20.0, 2.0);
        let f = apply_lattice(&m, &spec, 1.0).unwrap();
        let oracle = (0..m.element_count())
            .filter(|&k| {
                let c = m.centroid(k);
                let near_line = c
                    .iter()
                    .any(|&x| (0..=5).any(|i| (x - 20.0 * i as f64).abs() <= 1.0));
                let touches_boundary = m.elements()[k].iter().any(|&n| {
                    let p = m.nodes()[n];
                    p[0] == 0.0 || p[1] == 0.0 || p[0] == 100.0 || p[1] == 100.0
                });
                near_line || touches_boundary
            })
            .count();
        let conductive = f.values().iter().filter(|v| **v == 1.0).count();
        assert_eq!(conductive, oracle);
        let frac = conductive as f64 / m.element_count() as f64;
        assert!(frac > 0.15 && frac < 0.4, "fraction {frac}");
    }

    #[test]
    fn lattices_connect_all_electrodes() {
        let m = build_mesh(100.0, 64, 16, 3.0).unwrap();
        for w in [2.0, 4.0, 6.0, 8.0, 10.0] {
            let mask = lattice_mask(&m, &LatticeSpec::new(20.0, w)).unwrap();
            check_connectivity(&m, &mask).unwrap();
        }
    }

    #[test]
    fn disconnected_network_is_reported() {
        let m = build_mesh(100.0, 16, 16, 3.0).unwrap();
        let mut mask = vec![true; m.element_count()];
        for k in m.electrode_elements(5) {
            mask[k] = false;
        }
        assert_eq!(
            check_connectivity(&m, &mask),
            Err(Error::LatticeDisconnected { electrode: 5 })
        );
    }

    #[test]
    fn press_levels() {
        assert_eq!(press_to_level(0.0, 1.0, 0.8), 1.0);
        assert!((press_to_level(5.0, 1.0, 0.8) - 5.0).abs() < 1e-12);
        assert!((press_to_level(2.0, 1.0, 0.8) - 2.6).abs() < 1e-12);
        assert_eq!(press_to_level(-1.0, 1.0, 0.8), 1.0);
    }

    proptest::proptest! {
        #[test]
        fn touches_are_idempotent(x in 5.0f64..95.0, y in 5.0f64..95.0, r in 2.0f64..20.0, level in 1.5f64..6.0) {
            let m = build_mesh(100.0, 16, 16, 3.0).unwrap();
            let f = uniform_field(&m, 1.0).unwrap();
            let touches = [TouchSpec::disc([x, y], r, level)];
            let once = apply_touches(&f, &m, &touches).unwrap();
            let twice = apply_touches(&once, &m, &touches).unwrap();
            proptest::prop_assert_eq!(once, twice);
        }
    }
}
