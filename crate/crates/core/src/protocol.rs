//! Adjacent-drive, adjacent-measurement excitation schedules.

use alloc::format;
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measurement: current driven from `drive_plus` to `drive_minus`,
/// voltage read as `meas_plus - meas_minus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern {
    pub drive_plus: usize,
    pub drive_minus: usize,
    pub meas_plus: usize,
    pub meas_minus: usize,
}

impl Pattern {
    pub fn drive_pair(&self) -> (usize, usize) {
        (self.drive_plus, self.drive_minus)
    }

    pub fn meas_pair(&self) -> (usize, usize) {
        (self.meas_plus, self.meas_minus)
    }

    /// Drive and measurement roles swapped.
    pub fn reciprocal(&self) -> Pattern {
        Pattern {
            drive_plus: self.meas_plus,
            drive_minus: self.meas_minus,
            meas_plus: self.drive_plus,
            meas_minus: self.drive_minus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub electrode_count: usize,
    pub reciprocity_reduced: bool,
    pub patterns: Vec<Pattern>,
}

impl Protocol {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Distinct electrode pairs used as drive or measurement pairs, sorted.
    pub fn electrode_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .patterns
            .iter()
            .flat_map(|p| [p.drive_pair(), p.meas_pair()])
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// Distinct drive pairs in first-use order.
    pub fn drive_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for p in &self.patterns {
            if !pairs.contains(&p.drive_pair()) {
                pairs.push(p.drive_pair());
            }
        }
        pairs
    }

    /// Stable hash of the ordered pattern list.
    pub fn id(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write(&(self.electrode_count as u64).to_le_bytes());
        for p in &self.patterns {
            for v in [p.drive_plus, p.drive_minus, p.meas_plus, p.meas_minus] {
                h.write(&(v as u32).to_le_bytes());
            }
        }
        h.finish()
    }
}

/// Drive pairs (k, k+1 mod E) in ascending k; for each, every adjacent
/// measurement pair (m, m+1 mod E) sharing no electrode with it, in ascending
/// m. With `reciprocity_reduced`, a pattern is kept only when its
/// (drive, measurement) tuple sorts before its reciprocal, which keeps exactly
/// one of each reciprocal twin.
pub fn generate_adjacent_protocol(
    electrode_count: usize,
    reciprocity_reduced: bool,
) -> Result<Protocol> {
    if electrode_count < 4 {
        return Err(Error::InvalidParameter(format!(
            "adjacent protocol needs at least 4 electrodes, got {electrode_count}"
        )));
    }
    let e = electrode_count;
    let mut patterns = Vec::with_capacity(e * (e - 3));
    for k in 0..e {
        let drive = (k, (k + 1) % e);
        for m in 0..e {
            let meas = (m, (m + 1) % e);
            if meas.0 == drive.0 || meas.0 == drive.1 || meas.1 == drive.0 || meas.1 == drive.1 {
                continue;
            }
            if reciprocity_reduced && (drive, meas) > (meas, drive) {
                continue;
            }
            patterns.push(Pattern {
                drive_plus: drive.0,
                drive_minus: drive.1,
                meas_plus: meas.0,
                meas_minus: meas.1,
            });
        }
    }
    Ok(Protocol {
        electrode_count,
        reciprocity_reduced,
        patterns,
    })
}
