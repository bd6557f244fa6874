//! Synthetic scene generation for desk-scale experiments.

use crate::density::PointAnnotation;
use crate::error::{Result, UepError};
use crate::rng::CounterRng;

// Draw streams within a scene; the image id keys nothing here because the
// scene is fully determined by its seed.
const STREAM_CENTERS: u64 = 0;
const STREAM_UNIFORM: u64 = 1;
const STREAM_CLUSTER_PICK: u64 = 2;
const STREAM_CLUSTER_OFFSET: u64 = 3;

/// Spatial layout of generated head points.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneLayout {
    /// Points uniform over the image rectangle.
    Uniform,
    /// Points around `clusters` uniformly placed centers with isotropic
    /// Gaussian scatter of `spread` pixels; produces long-tailed local
    /// counts.
    GaussianClusters { clusters: usize, spread: f64 },
}

/// Deterministic synthetic annotation; the same arguments always produce the
/// same point list, independent of platform.
pub fn synth_scene(
    n_points: usize,
    layout: SceneLayout,
    width: u32,
    height: u32,
    seed: u64,
) -> Result<PointAnnotation> {
    if width == 0 || height == 0 {
        return Err(UepError::InvalidParameter {
            name: "dimensions",
            message: "scene width and height must be positive".into(),
        });
    }
    if let SceneLayout::GaussianClusters { clusters, spread } = layout {
        if clusters < 1 {
            return Err(UepError::InvalidParameter {
                name: "clusters",
                message: "must be at least 1".into(),
            });
        }
        if !(spread > 0.0) || !spread.is_finite() {
            return Err(UepError::InvalidParameter {
                name: "spread",
                message: format!("must be a positive finite number, got {spread}"),
            });
        }
    }

    let rng = CounterRng::new(seed);
    let (w, h) = (width as f64, height as f64);
    // Largest representable coordinate still strictly inside the bounds.
    let x_hi = w.next_down();
    let y_hi = h.next_down();

    let mut points = Vec::with_capacity(n_points);
    match layout {
        SceneLayout::Uniform => {
            for i in 0..n_points as u64 {
                let x = rng.uniform(STREAM_UNIFORM, i, 0) * w;
                let y = rng.uniform(STREAM_UNIFORM, i, 1) * h;
                points.push((x.min(x_hi), y.min(y_hi)));
            }
        }
        SceneLayout::GaussianClusters { clusters, spread } => {
            let centers: Vec<(f64, f64)> = (0..clusters as u64)
                .map(|j| {
                    (
                        rng.uniform(STREAM_CENTERS, j, 0) * w,
                        rng.uniform(STREAM_CENTERS, j, 1) * h,
                    )
                })
                .collect();
            for i in 0..n_points as u64 {
                let pick = (rng.bits(STREAM_CLUSTER_PICK, i, 0) % clusters as u64) as usize;
                let (gx, gy) = rng.normal_pair(STREAM_CLUSTER_OFFSET, i, 0);
                let (cx, cy) = centers[pick];
                let x = (cx + spread * gx).clamp(0.0, x_hi);
                let y = (cy + spread * gy).clamp(0.0, y_hi);
                points.push((x, y));
            }
        }
    }
    PointAnnotation::new(format!("scene-{seed:08x}"), width, height, points)
}
