//! Density maps, local-count maps, and the pooled count collection.
//!
//! Point annotations are turned into per-pixel density grids by stamping one
//! unit-mass truncated Gaussian per head, then aggregated into per-patch
//! local counts by non-overlapping block sums. The sorted multiset of all
//! local counts in a training set is what the partition algorithms consume.

use std::collections::HashMap;

use crate::error::{Result, UepError};
use crate::stats::kahan_sum;

/// Head-point coordinates for one image.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PointAnnotation {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    /// (x, y) pairs with 0 <= x < width and 0 <= y < height.
    pub points: Vec<(f64, f64)>,
}

impl PointAnnotation {
    pub fn new(
        image_id: impl Into<String>,
        width: u32,
        height: u32,
        points: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let image_id = image_id.into();
        if width == 0 || height == 0 {
            return Err(UepError::InvalidParameter {
                name: "dimensions",
                message: format!("image {image_id} has zero width or height"),
            });
        }
        let ann = Self {
            image_id,
            width,
            height,
            points,
        };
        ann.validate()?;
        Ok(ann)
    }

    /// Check every point against the image bounds.
    pub fn validate(&self) -> Result<()> {
        for (index, &(x, y)) in self.points.iter().enumerate() {
            let inside =
                x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64;
            if !inside {
                return Err(UepError::PointOutOfBounds {
                    image_id: self.image_id.clone(),
                    index,
                    x,
                    y,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        Ok(())
    }

    /// Number of annotated heads.
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

/// How the Gaussian spread is chosen.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    /// One sigma, in pixels, for every point.
    FixedSigma { sigma: f64 },
    /// Per-point sigma from the mean distance to the k nearest neighbors,
    /// scaled by beta.
    GeometryAdaptive { k: usize, beta: f64 },
}

/// Gaussian stamping configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelSpec {
    pub mode: KernelMode,
    /// Kernel support half-width, in sigmas.
    pub truncation_radius_sigmas: f64,
    /// Rescale each clipped stamp back to unit mass at image borders.
    pub renormalize_at_borders: bool,
}

/// Spread used for a point with no neighbors under the adaptive mode.
pub const SINGLE_POINT_FALLBACK_SIGMA: f64 = 15.0;

pub const DEFAULT_TRUNCATION_SIGMAS: f64 = 4.0;

impl KernelSpec {
    pub fn fixed(sigma: f64) -> Self {
        Self {
            mode: KernelMode::FixedSigma { sigma },
            truncation_radius_sigmas: DEFAULT_TRUNCATION_SIGMAS,
            renormalize_at_borders: true,
        }
    }

    pub fn adaptive(k: usize, beta: f64) -> Self {
        Self {
            mode: KernelMode::GeometryAdaptive { k, beta },
            truncation_radius_sigmas: DEFAULT_TRUNCATION_SIGMAS,
            renormalize_at_borders: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            KernelMode::FixedSigma { sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(UepError::InvalidParameter {
                        name: "sigma",
                        message: format!("must be a positive finite number, got {sigma}"),
                    });
                }
            }
            KernelMode::GeometryAdaptive { k, beta } => {
                if k < 1 {
                    return Err(UepError::InvalidParameter {
                        name: "k",
                        message: "must be at least 1".into(),
                    });
                }
                if !(beta > 0.0) || !beta.is_finite() {
                    return Err(UepError::InvalidParameter {
                        name: "beta",
                        message: format!("must be a positive finite number, got {beta}"),
                    });
                }
            }
        }
        if !(self.truncation_radius_sigmas > 0.0) {
            return Err(UepError::InvalidParameter {
                name: "truncation_radius_sigmas",
                message: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Per-pixel density grid whose values integrate to the head count.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    pub image_id: String,
    pub height: usize,
    pub width: usize,
    /// Row-major, height * width values, all non-negative.
    pub values: Vec<f64>,
}

impl DensityMap {
    pub fn zeros(image_id: impl Into<String>, height: usize, width: usize) -> Self {
        Self {
            image_id: image_id.into(),
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.values.iter().copied())
    }
}

/// Per-patch count grid aggregated from a density map.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCountMap {
    pub image_id: String,
    pub patch_size: usize,
    pub height: usize,
    pub width: usize,
    /// Row-major, height * width values, all non-negative.
    pub values: Vec<f64>,
}

impl LocalCountMap {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.values.iter().copied())
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }
}

/// Sorted multiset of all local counts in a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct CountCollection {
    counts: Vec<f64>,
}

impl CountCollection {
    /// Build from raw counts; sorts and validates non-negativity.
    pub fn new(mut counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(UepError::EmptyInput("count collection"));
        }
        for (i, &c) in counts.iter().enumerate() {
            if !c.is_finite() || c < 0.0 {
                return Err(UepError::NegativeCount {
                    image_id: String::new(),
                    index: i,
                    value: c,
                });
            }
        }
        counts.sort_unstable_by(f64::total_cmp);
        Ok(Self { counts })
    }

    /// Ascending counts.
    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Largest local count.
    pub fn max_count(&self) -> f64 {
        *self.counts.last().expect("collection is never empty")
    }

    /// The ascending tail of counts that are >= threshold.
    pub fn at_least(&self, threshold: f64) -> &[f64] {
        let start = self.counts.partition_point(|&c| c < threshold);
        &self.counts[start..]
    }
}

/// Per-point sigmas from the mean distance to the k nearest other points.
///
/// With n <= k the mean runs over all n-1 others; a single isolated point
/// falls back to [`SINGLE_POINT_FALLBACK_SIGMA`].
pub fn adaptive_sigmas(ann: &PointAnnotation, k: usize, beta: f64) -> Result<Vec<f64>> {
    if ann.points.is_empty() {
        return Err(UepError::EmptyInput("annotation has no points"));
    }
    if k < 1 {
        return Err(UepError::InvalidParameter {
            name: "k",
            message: "must be at least 1".into(),
        });
    }
    if !(beta > 0.0) {
        return Err(UepError::InvalidParameter {
            name: "beta",
            message: "must be positive".into(),
        });
    }
    let n = ann.points.len();
    if n == 1 {
        return Ok(vec![SINGLE_POINT_FALLBACK_SIGMA]);
    }
    let mut sigmas = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n - 1);
    for (i, &(xi, yi)) in ann.points.iter().enumerate() {
        dists.clear();
        for (j, &(xj, yj)) in ann.points.iter().enumerate() {
            if i != j {
                dists.push(((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt());
            }
        }
        dists.sort_unstable_by(f64::total_cmp);
        let take = k.min(dists.len());
        let mean = kahan_sum(dists[..take].iter().copied()) / take as f64;
        sigmas.push(beta * mean);
    }
    Ok(sigmas)
}

/// Discrete truncated Gaussian normalized to unit mass.
struct Stamp {
    radius: i64,
    /// (2r+1)^2 weights, row-major, summing to 1.
    weights: Vec<f64>,
}

fn build_stamp(sigma: f64, truncation_sigmas: f64) -> Stamp {
    let radius = (truncation_sigmas * sigma).ceil() as i64;
    let side = (2 * radius + 1) as usize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut weights = Vec::with_capacity(side * side);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            weights.push((-((dx * dx + dy * dy) as f64) * inv).exp());
        }
    }
    let mass = kahan_sum(weights.iter().copied());
    for w in &mut weights {
        *w /= mass;
    }
    Stamp { radius, weights }
}

/// Stamp one unit-mass truncated Gaussian per annotated point.
///
/// Stamps are centered on the rounded pixel position. When
/// `renormalize_at_borders` is set, the visible part of a clipped stamp is
/// rescaled so every point still contributes exactly one unit of mass.
pub fn generate_density_map(ann: &PointAnnotation, spec: &KernelSpec) -> Result<DensityMap> {
    ann.validate()?;
    spec.validate()?;
    let mut map = DensityMap::zeros(&ann.image_id, ann.height as usize, ann.width as usize);
    if ann.points.is_empty() {
        return Ok(map);
    }

    let sigmas: Vec<f64> = match spec.mode {
        KernelMode::FixedSigma { sigma } => vec![sigma; ann.points.len()],
        KernelMode::GeometryAdaptive { k, beta } => adaptive_sigmas(ann, k, beta)?,
    };

    // Stamps depend only on sigma; fixed-sigma runs build exactly one.
    let mut cache: HashMap<u64, Stamp> = HashMap::new();
    let (h, w) = (map.height as i64, map.width as i64);

    for (&(x, y), &sigma) in ann.points.iter().zip(&sigmas) {
        if !(sigma > 0.0) {
            return Err(UepError::InvalidParameter {
                name: "sigma",
                message: format!("derived sigma {sigma} is not positive"),
            });
        }
        let stamp = cache
            .entry(sigma.to_bits())
            .or_insert_with(|| build_stamp(sigma, spec.truncation_radius_sigmas));
        let cx = (x.round() as i64).min(w - 1);
        let cy = (y.round() as i64).min(h - 1);
        let side = 2 * stamp.radius + 1;

        let row_lo = (cy - stamp.radius).max(0);
        let row_hi = (cy + stamp.radius).min(h - 1);
        let col_lo = (cx - stamp.radius).max(0);
        let col_hi = (cx + stamp.radius).min(w - 1);

        let scale = if spec.renormalize_at_borders {
            let full = row_hi - row_lo == side - 1 && col_hi - col_lo == side - 1;
            if full {
                1.0
            } else {
                let mut visible = Vec::with_capacity(((row_hi - row_lo + 1) * (col_hi - col_lo + 1)) as usize);
                for row in row_lo..=row_hi {
                    let sy = (row - (cy - stamp.radius)) as usize;
                    for col in col_lo..=col_hi {
                        let sx = (col - (cx - stamp.radius)) as usize;
                        visible.push(stamp.weights[sy * side as usize + sx]);
                    }
                }
                1.0 / kahan_sum(visible)
            }
        } else {
            1.0
        };

        for row in row_lo..=row_hi {
            let sy = (row - (cy - stamp.radius)) as usize;
            for col in col_lo..=col_hi {
                let sx = (col - (cx - stamp.radius)) as usize;
                map.values[row as usize * map.width + col as usize] +=
                    scale * stamp.weights[sy * side as usize + sx];
            }
        }
    }
    Ok(map)
}

/// Non-overlapping block sums of size s x s; ragged right and bottom blocks
/// sum whatever pixels remain.
pub fn extract_local_counts(map: &DensityMap, patch_size: usize) -> Result<LocalCountMap> {
    if patch_size == 0 {
        return Err(UepError::InvalidParameter {
            name: "patch_size",
            message: "must be at least 1".into(),
        });
    }
    let out_h = map.height.div_ceil(patch_size);
    let out_w = map.width.div_ceil(patch_size);
    let mut values = vec![0.0f64; out_h * out_w];
    for (row, chunk) in map.values.chunks(map.width).enumerate() {
        let block_row = row / patch_size;
        for (col, &v) in chunk.iter().enumerate() {
            values[block_row * out_w + col / patch_size] += v;
        }
    }
    Ok(LocalCountMap {
        image_id: map.image_id.clone(),
        patch_size,
        height: out_h,
        width: out_w,
        values,
    })
}

/// Pool every local count into one ascending collection.
pub fn collect_counts(maps: &[LocalCountMap]) -> Result<CountCollection> {
    if maps.is_empty() {
        return Err(UepError::EmptyInput("no local count maps"));
    }
    let mut counts = Vec::with_capacity(maps.iter().map(|m| m.values.len()).sum());
    for m in maps {
        counts.extend_from_slice(&m.values);
    }
    CountCollection::new(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(points: Vec<(f64, f64)>, w: u32, h: u32) -> PointAnnotation {
        PointAnnotation::new("test", w, h, points).unwrap()
    }

    /// Sum of a clipped discrete kernel computed independently of the
    /// stamping code path.
    fn clipped_kernel_sum(cx: i64, cy: i64, w: i64, h: i64, sigma: f64, trunc: f64) -> f64 {
        let radius = (trunc * sigma).ceil() as i64;
        let mut raw = Vec::new();
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                raw.push((-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp());
            }
        }
        let mass: f64 = kahan_sum(raw.iter().copied());
        let mut visible = 0.0;
        let mut i = 0;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let (px, py) = (cx + dx, cy + dy);
                if px >= 0 && px < w && py >= 0 && py < h {
                    visible += raw[i] / mass;
                }
                i += 1;
            }
        }
        visible
    }

    #[test]
    fn empty_annotation_gives_zero_map() {
        let d = generate_density_map(&ann(vec![], 32, 32), &KernelSpec::fixed(5.0)).unwrap();
        assert_eq!(d.total(), 0.0);
        assert_eq!(d.values.len(), 32 * 32);
    }

    #[test]
    fn interior_point_has_unit_mass() {
        let d = generate_density_map(&ann(vec![(32.0, 32.0)], 64, 64), &KernelSpec::fixed(5.0)).unwrap();
        assert!((d.total() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn corner_point_renormalization() {
        let a = ann(vec![(0.0, 0.0)], 64, 64);
        let on = generate_density_map(&a, &KernelSpec::fixed(5.0)).unwrap();
        assert!((on.total() - 1.0).abs() <= 1e-6);

        let mut spec = KernelSpec::fixed(5.0);
        spec.renormalize_at_borders = false;
        let off = generate_density_map(&a, &spec).unwrap();
        assert!(off.total() < 1.0);
        let expected = clipped_kernel_sum(0, 0, 64, 64, 5.0, 4.0);
        assert!((off.total() - expected).abs() <= 1e-12);
    }

    #[test]
    fn out_of_bounds_point_is_rejected_with_index() {
        let bad = PointAnnotation::new("x", 10, 10, vec![(1.0, 1.0), (10.0, 3.0)]);
        match bad {
            Err(UepError::PointOutOfBounds { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected out-of-bounds rejection, got {other:?}"),
        }
    }

    #[test]
    fn non_positive_sigma_is_a_parameter_error() {
        let err = generate_density_map(&ann(vec![(1.0, 1.0)], 8, 8), &KernelSpec::fixed(0.0));
        assert!(matches!(err, Err(UepError::InvalidParameter { .. })));
    }

    #[test]
    fn adaptive_two_points() {
        let a = ann(vec![(0.0, 0.0), (10.0, 0.0)], 32, 32);
        let s = adaptive_sigmas(&a, 3, 0.3).unwrap();
        assert_eq!(s, vec![3.0, 3.0]);
    }

    #[test]
    fn adaptive_single_point_uses_fallback() {
        let a = ann(vec![(5.0, 5.0)], 32, 32);
        assert_eq!(adaptive_sigmas(&a, 3, 0.3).unwrap(), vec![SINGLE_POINT_FALLBACK_SIGMA]);
    }

    #[test]
    fn adaptive_unit_square_corners() {
        // Each corner has two neighbors at distance 1 and one at sqrt(2);
        // k=2 keeps the two unit distances.
        let a = ann(vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)], 8, 8);
        let s = adaptive_sigmas(&a, 2, 0.3).unwrap();
        for v in s {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn local_counts_patch_one_is_identity() {
        let d = generate_density_map(&ann(vec![(3.0, 4.0)], 16, 16), &KernelSpec::fixed(2.0)).unwrap();
        let lc = extract_local_counts(&d, 1).unwrap();
        assert_eq!(lc.values, d.values);
    }

    #[test]
    fn local_counts_uniform_blocks() {
        let d = DensityMap {
            image_id: "ones".into(),
            height: 16,
            width: 16,
            values: vec![1.0; 256],
        };
        let lc = extract_local_counts(&d, 8).unwrap();
        assert_eq!(lc.height, 2);
        assert_eq!(lc.width, 2);
        assert!(lc.values.iter().all(|&v| v == 64.0));
    }

    #[test]
    fn local_counts_match_double_loop_oracle() {
        // Pseudo-random 24x24 grid, patch 8.
        let mut values = Vec::with_capacity(24 * 24);
        let rng = crate::rng::CounterRng::new(99);
        for i in 0..24 * 24 {
            values.push(rng.uniform(0, i as u64, 0));
        }
        let d = DensityMap {
            image_id: "r".into(),
            height: 24,
            width: 24,
            values,
        };
        let lc = extract_local_counts(&d, 8).unwrap();
        for br in 0..3 {
            for bc in 0..3 {
                let mut expect = 0.0;
                for r in br * 8..br * 8 + 8 {
                    for c in bc * 8..bc * 8 + 8 {
                        expect += d.at(r, c);
                    }
                }
                assert!((lc.at(br, bc) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ragged_blocks_sum_exactly() {
        let d = DensityMap {
            image_id: "ragged".into(),
            height: 10,
            width: 10,
            values: vec![1.0; 100],
        };
        let lc = extract_local_counts(&d, 8).unwrap();
        assert_eq!((lc.height, lc.width), (2, 2));
        assert_eq!(lc.at(0, 0), 64.0);
        assert_eq!(lc.at(0, 1), 16.0);
        assert_eq!(lc.at(1, 0), 16.0);
        assert_eq!(lc.at(1, 1), 4.0);
        assert!((lc.total() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn collect_sorts_and_merges() {
        let m1 = LocalCountMap {
            image_id: "a".into(),
            patch_size: 1,
            height: 1,
            width: 3,
            values: vec![2.0, 1.0, 3.0],
        };
        let c = collect_counts(std::slice::from_ref(&m1)).unwrap();
        assert_eq!(c.counts(), &[1.0, 2.0, 3.0]);
        assert_eq!(c.len(), 3);
        assert_eq!(c.max_count(), 3.0);

        let m2 = LocalCountMap {
            image_id: "b".into(),
            patch_size: 1,
            height: 1,
            width: 2,
            values: vec![2.0, 0.0],
        };
        let m3 = LocalCountMap {
            image_id: "c".into(),
            patch_size: 1,
            height: 1,
            width: 2,
            values: vec![1.0, 2.0],
        };
        let merged = collect_counts(&[m3, m2]).unwrap();
        assert_eq!(merged.counts(), &[0.0, 1.0, 2.0, 2.0]);
        assert_eq!(merged.len(), 4);
    }

    #[test]
    fn collect_of_nothing_is_an_error() {
        assert!(matches!(collect_counts(&[]), Err(UepError::EmptyInput(_))));
    }

    #[test]
    fn collect_matches_concat_sort_oracle() {
        let rng = crate::rng::CounterRng::new(5);
        let mut maps = Vec::new();
        let mut all = Vec::new();
        for m in 0..1000u64 {
            let cells = 1 + (rng.bits(1, m, 0) % 8) as usize;
            let values: Vec<f64> = (0..cells).map(|i| rng.uniform(2, m, i as u64) * 10.0).collect();
            all.extend_from_slice(&values);
            maps.push(LocalCountMap {
                image_id: format!("img{m}"),
                patch_size: 1,
                height: 1,
                width: cells,
                values,
            });
        }
        let c = collect_counts(&maps).unwrap();
        all.sort_unstable_by(f64::total_cmp);
        assert_eq!(c.counts(), all.as_slice());
        assert!(c.counts().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mass_is_conserved_through_aggregation() {
        let a = ann(vec![(2.0, 3.0), (30.0, 30.0), (0.0, 31.0)], 32, 32);
        let d = generate_density_map(&a, &KernelSpec::fixed(3.0)).unwrap();
        assert!((d.total() - 3.0).abs() <= 1e-6 * 3.0);
        let lc = extract_local_counts(&d, 8).unwrap();
        assert!((lc.total() - d.total()).abs() <= 1e-9 * lc.cells() as f64);
    }

    #[test]
    fn adding_a_point_never_decreases_mass() {
        let spec = KernelSpec::fixed(2.5);
        let base = ann(vec![(8.0, 8.0)], 32, 32);
        let more = ann(vec![(8.0, 8.0), (0.5, 0.5)], 32, 32);
        let d0 = generate_density_map(&base, &spec).unwrap();
        let d1 = generate_density_map(&more, &spec).unwrap();
        assert!(d1.total() >= d0.total());
    }
}
