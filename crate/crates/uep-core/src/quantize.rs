//! Encoding counts to classes, decoding classes to counts, and the error
//! reports quantifying what that round trip costs.

use crate::density::LocalCountMap;
use crate::error::{Result, UepError};
use crate::partition::Partition;
use crate::proxy::{IphPair, ProxyTable};
use crate::stats::KahanSum;

/// Per-patch interval indices produced by encoding a local-count map.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    pub image_id: String,
    pub patch_size: usize,
    pub height: usize,
    pub width: usize,
    /// Interval count of the generating partition; every value is below it.
    pub m: usize,
    /// Row-major interval indices.
    pub values: Vec<u16>,
}

impl ClassMap {
    pub fn cells(&self) -> usize {
        self.values.len()
    }
}

/// Encoded map plus how many counts exceeded the closing border.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOutcome {
    pub map: ClassMap,
    /// Counts above t_max, clamped into the last interval.
    pub clamped: usize,
}

/// Class index per count with half-open membership, the last interval
/// closed, and counts above t_max clamped into the last interval.
pub fn encode_class_map(lc: &LocalCountMap, p: &Partition) -> Result<EncodeOutcome> {
    if p.m() > u16::MAX as usize + 1 {
        return Err(UepError::InvalidParameter {
            name: "m",
            message: format!("class maps hold at most {} intervals, got {}", u16::MAX as usize + 1, p.m()),
        });
    }
    let mut values = Vec::with_capacity(lc.values.len());
    let mut clamped = 0usize;
    let t_max = p.t_max();
    for (index, &d) in lc.values.iter().enumerate() {
        if !d.is_finite() || d < 0.0 {
            return Err(UepError::NegativeCount {
                image_id: lc.image_id.clone(),
                index,
                value: d,
            });
        }
        if d > t_max {
            clamped += 1;
        }
        values.push(p.interval_of(d) as u16);
    }
    Ok(EncodeOutcome {
        map: ClassMap {
            image_id: lc.image_id.clone(),
            patch_size: lc.patch_size,
            height: lc.height,
            width: lc.width,
            m: p.m(),
            values,
        },
        clamped,
    })
}

fn ensure_decodable(c: &ClassMap, proxies: &ProxyTable) -> Result<()> {
    if proxies.len() != c.m {
        return Err(UepError::ShapeMismatch {
            message: format!(
                "{} proxies for a class map over {} intervals",
                proxies.len(),
                c.m
            ),
        });
    }
    for (i, w) in proxies.proxies().windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(UepError::NonMonotoneProxies {
                index: i + 1,
                value: w[1],
                previous: w[0],
            });
        }
    }
    Ok(())
}

/// Replace every class index with its proxy count.
pub fn decode_count_map(c: &ClassMap, proxies: &ProxyTable) -> Result<LocalCountMap> {
    ensure_decodable(c, proxies)?;
    let mut values = Vec::with_capacity(c.values.len());
    for (index, &class) in c.values.iter().enumerate() {
        if class as usize >= c.m {
            return Err(UepError::ClassOutOfRange {
                image_id: c.image_id.clone(),
                index,
                value: class,
                classes: c.m,
            });
        }
        values.push(proxies.get(class as usize));
    }
    Ok(LocalCountMap {
        image_id: c.image_id.clone(),
        patch_size: c.patch_size,
        height: c.height,
        width: c.width,
        values,
    })
}

/// Decode both heads and average them cell by cell.
pub fn decode_iph(c0: &ClassMap, c1: &ClassMap, pair: &IphPair) -> Result<LocalCountMap> {
    if c0.height != c1.height || c0.width != c1.width || c0.image_id != c1.image_id {
        return Err(UepError::ShapeMismatch {
            message: format!(
                "head class maps disagree: {} {}x{} vs {} {}x{}",
                c0.image_id, c0.height, c0.width, c1.image_id, c1.height, c1.width
            ),
        });
    }
    let d0 = decode_count_map(c0, &pair.head0.proxies)?;
    let d1 = decode_count_map(c1, &pair.head1.proxies)?;
    let values = d0
        .values
        .iter()
        .zip(&d1.values)
        .map(|(&a, &b)| 0.5 * (a + b))
        .collect();
    Ok(LocalCountMap {
        image_id: d0.image_id,
        patch_size: d0.patch_size,
        height: d0.height,
        width: d0.width,
        values,
    })
}

/// One image's contribution to a report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ImageErrorRow {
    pub image_id: String,
    /// Sum over cells of (true count - decoded count).
    pub signed: f64,
    /// |signed|: the image-level counting error.
    pub absolute: f64,
}

/// One interval's contribution, grouped by the true interval of each cell.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntervalErrorRow {
    pub index: usize,
    /// Evaluation cells whose true count falls in this interval.
    pub n: usize,
    pub length: f64,
    pub nl: f64,
    /// Mean |true - decoded| over member cells; None when empty.
    pub class_mae: Option<f64>,
    /// Sum of (true - decoded) over member cells.
    pub signed_sum: f64,
    pub empty: bool,
}

/// Image-level and interval-level error accounting for one configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorReport {
    pub per_image: Vec<ImageErrorRow>,
    pub per_interval: Vec<IntervalErrorRow>,
    /// Mean of per-image absolute errors.
    pub mae: f64,
    /// Root of the mean squared per-image signed error.
    pub mse: f64,
    /// Sum of the per-interval signed sums, in interval order.
    pub total_signed: f64,
    /// Sum of the per-image signed sums, in image order.
    pub pooled_signed: f64,
    /// Evaluation counts above t_max, grouped into the last interval.
    pub clamped: usize,
}

struct ReportBuilder<'a> {
    partition: &'a Partition,
    signed: Vec<KahanSum>,
    abs: Vec<KahanSum>,
    n: Vec<usize>,
    per_image: Vec<ImageErrorRow>,
    clamped: usize,
}

impl<'a> ReportBuilder<'a> {
    fn new(partition: &'a Partition) -> Self {
        let m = partition.m();
        Self {
            partition,
            signed: vec![KahanSum::default(); m],
            abs: vec![KahanSum::default(); m],
            n: vec![0; m],
            per_image: Vec::new(),
            clamped: 0,
        }
    }

    /// Feed one image's (true, decoded) cell pairs.
    fn image(
        &mut self,
        image_id: &str,
        cells: impl Iterator<Item = (f64, f64)>,
    ) -> Result<()> {
        let mut image_signed = KahanSum::default();
        let t_max = self.partition.t_max();
        for (index, (d, d_hat)) in cells.enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(UepError::NegativeCount {
                    image_id: image_id.to_string(),
                    index,
                    value: d,
                });
            }
            if d > t_max {
                self.clamped += 1;
            }
            let i = self.partition.interval_of(d);
            let err = d - d_hat;
            self.signed[i].add(err);
            self.abs[i].add(err.abs());
            self.n[i] += 1;
            image_signed.add(err);
        }
        let signed = image_signed.value();
        self.per_image.push(ImageErrorRow {
            image_id: image_id.to_string(),
            signed,
            absolute: signed.abs(),
        });
        Ok(())
    }

    fn finish(self) -> ErrorReport {
        let mut per_interval = Vec::with_capacity(self.partition.m());
        let mut total_signed = KahanSum::default();
        for i in 0..self.partition.m() {
            let n = self.n[i];
            let signed_sum = self.signed[i].value();
            total_signed.add(signed_sum);
            per_interval.push(IntervalErrorRow {
                index: i,
                n,
                length: self.partition.length(i),
                nl: n as f64 * self.partition.length(i),
                class_mae: (n > 0).then(|| self.abs[i].value() / n as f64),
                signed_sum,
                empty: n == 0,
            });
        }
        let mut abs_acc = KahanSum::default();
        let mut sq_acc = KahanSum::default();
        let mut pooled = KahanSum::default();
        for row in &self.per_image {
            abs_acc.add(row.absolute);
            sq_acc.add(row.signed * row.signed);
            pooled.add(row.signed);
        }
        let images = self.per_image.len() as f64;
        ErrorReport {
            per_image: self.per_image,
            per_interval,
            mae: abs_acc.value() / images,
            mse: (sq_acc.value() / images).sqrt(),
            total_signed: total_signed.value(),
            pooled_signed: pooled.value(),
            clamped: self.clamped,
        }
    }
}

/// Error report under the assumption of perfect classification: every count
/// decodes to the proxy of its own interval.
pub fn discretization_error(
    maps: &[LocalCountMap],
    p: &Partition,
    proxies: &ProxyTable,
) -> Result<ErrorReport> {
    if maps.is_empty() {
        return Err(UepError::EmptyInput("evaluation set"));
    }
    if proxies.len() != p.m() {
        return Err(UepError::ShapeMismatch {
            message: format!("{} proxies for {} intervals", proxies.len(), p.m()),
        });
    }
    let mut builder = ReportBuilder::new(p);
    for map in maps {
        builder.image(
            &map.image_id,
            map.values
                .iter()
                .map(|&d| (d, proxies.get(p.interval_of(d)))),
        )?;
    }
    Ok(builder.finish())
}

/// Error report for decoded predictions against true counts, grouped by the
/// true interval of each cell.
pub fn error_decomposition(
    preds: &[LocalCountMap],
    truths: &[LocalCountMap],
    p: &Partition,
) -> Result<ErrorReport> {
    if preds.is_empty() {
        return Err(UepError::EmptyInput("evaluation set"));
    }
    if preds.len() != truths.len() {
        return Err(UepError::ShapeMismatch {
            message: format!("{} predictions for {} truth maps", preds.len(), truths.len()),
        });
    }
    let mut builder = ReportBuilder::new(p);
    for (pred, truth) in preds.iter().zip(truths) {
        if pred.image_id != truth.image_id
            || pred.height != truth.height
            || pred.width != truth.width
        {
            return Err(UepError::ShapeMismatch {
                message: format!(
                    "prediction {} {}x{} does not match truth {} {}x{}",
                    pred.image_id, pred.height, pred.width, truth.image_id, truth.height, truth.width
                ),
            });
        }
        builder.image(
            &truth.image_id,
            truth.values.iter().zip(&pred.values).map(|(&d, &e)| (d, e)),
        )?;
    }
    Ok(builder.finish())
}
