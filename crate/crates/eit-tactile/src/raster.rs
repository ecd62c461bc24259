//! Nearest-element resampling of per-element images onto a square pixel grid.

use eit_core::Mesh;

/// Pixel → element lookup for one mesh, computed once and reused per frame.
///
/// Row 0 is the top of the sensor (largest y) and column 0 its left edge;
/// pixel `(r, c)` samples the point
/// `((c + ½)·s/n, side − (r + ½)·s/n)`.
#[derive(Debug, Clone)]
pub struct Raster {
    size: usize,
    mesh_id: u64,
    map: Vec<usize>,
}

impl Raster {
    pub fn new(mesh: &Mesh, size: usize) -> Self {
        let side = mesh.domain_side();
        let pitch = side / size as f64;
        let centroids: Vec<[f64; 2]> = (0..mesh.element_count())
            .map(|k| mesh.centroid(k))
            .collect();
        let mut map = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                let p = [(c as f64 + 0.5) * pitch, side - (r as f64 + 0.5) * pitch];
                let k = mesh
                    .locate_element(p)
                    .unwrap_or_else(|| nearest(&centroids, p));
                map.push(k);
            }
        }
        Self {
            size,
            mesh_id: mesh.id(),
            map,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn element_at(&self, row: usize, col: usize) -> usize {
        self.map[row * self.size + col]
    }

    /// Samples per-element `values` into `size` rows of `size` pixels.
    pub fn sample(&self, values: &[f64]) -> Vec<Vec<f64>> {
        self.map
            .chunks(self.size)
            .map(|row| row.iter().map(|&k| values[k]).collect())
            .collect()
    }
}

fn nearest(centroids: &[[f64; 2]], p: [f64; 2]) -> usize {
    let d2 = |c: &[f64; 2]| (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2);
    (0..centroids.len())
        .min_by(|&a, &b| d2(&centroids[a]).total_cmp(&d2(&centroids[b])))
        .unwrap_or(0)
}
