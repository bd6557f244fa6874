//! Interval partitions over a count collection.
//!
//! Three strategies produce the borders that turn counting into
//! classification: a binary search that equalizes the per-interval product
//! n_i*l_i (sample count times interval length), an equal-length split, and
//! an equal-population split. Interval 0 is always the background class
//! [0, t0).

use crate::density::CountCollection;
use crate::error::{Result, UepError};
use crate::stats::{coefficient_of_variation, kahan_sum};

/// How a partition's borders were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Equalized n_i*l_i via binary search.
    Uep,
    /// Equal-length intervals over [t0, t_max].
    UniformLen,
    /// Equal-population intervals over the filtered samples.
    UniformNum,
    /// Caller-supplied borders.
    Explicit,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Strategy::Uep => "uep",
            Strategy::UniformLen => "uniform-len",
            Strategy::UniformNum => "uniform-num",
            Strategy::Explicit => "explicit",
        };
        f.write_str(s)
    }
}

/// Strictly ascending borders [0, t0, ..., t_max] delimiting m intervals.
///
/// Interval i spans [b_i, b_{i+1}); the last interval is closed on the
/// right so membership is total on [0, t_max].
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    borders: Vec<f64>,
    strategy: Strategy,
}

impl Partition {
    pub fn from_borders(borders: Vec<f64>, strategy: Strategy) -> Result<Self> {
        if borders.len() < 3 {
            return Err(UepError::InvalidParameter {
                name: "borders",
                message: format!(
                    "need at least 3 border values for a background and one count interval, got {}",
                    borders.len()
                ),
            });
        }
        if borders[0] != 0.0 {
            return Err(UepError::InvalidParameter {
                name: "borders",
                message: format!("first border must be 0, got {}", borders[0]),
            });
        }
        for (i, w) in borders.windows(2).enumerate() {
            if !w[1].is_finite() || w[1] <= w[0] {
                return Err(UepError::BorderCollision {
                    left: w[0],
                    right: w[1],
                    left_index: i,
                    right_index: i + 1,
                });
            }
        }
        Ok(Self { borders, strategy })
    }

    pub fn borders(&self) -> &[f64] {
        &self.borders
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Number of intervals.
    pub fn m(&self) -> usize {
        self.borders.len() - 1
    }

    /// Background border: interval 0 is [0, t0).
    pub fn t0(&self) -> f64 {
        self.borders[1]
    }

    /// Closing border of the last interval.
    pub fn t_max(&self) -> f64 {
        *self.borders.last().expect("validated non-empty")
    }

    /// [b_i, b_{i+1}) bounds of interval i.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.borders[i], self.borders[i + 1])
    }

    /// Length l_i of interval i.
    pub fn length(&self, i: usize) -> f64 {
        self.borders[i + 1] - self.borders[i]
    }

    /// Index of the interval containing d. Total on all reals: values above
    /// t_max clamp to the last interval, values below 0 to the background.
    pub fn interval_of(&self, d: f64) -> usize {
        let idx = self.borders.partition_point(|&b| b <= d);
        idx.saturating_sub(1).min(self.m() - 1)
    }

    /// Per-interval half-open index ranges into an ascending count slice;
    /// the last interval also takes values equal to t_max.
    pub fn member_ranges(&self, sorted_counts: &[f64]) -> Vec<(usize, usize)> {
        let m = self.m();
        let mut ranges = Vec::with_capacity(m);
        let mut lo = 0usize;
        for i in 0..m {
            let hi = if i == m - 1 {
                sorted_counts.len()
            } else {
                sorted_counts.partition_point(|&c| c < self.borders[i + 1])
            };
            ranges.push((lo, hi));
            lo = hi;
        }
        ranges
    }

    /// Reject collections reaching beyond the closing border.
    pub fn ensure_covers(&self, t: &CountCollection) -> Result<()> {
        if t.max_count() > self.t_max() {
            return Err(UepError::ShapeMismatch {
                message: format!(
                    "collection maximum {} exceeds the partition's closing border {}",
                    t.max_count(),
                    self.t_max()
                ),
            });
        }
        Ok(())
    }
}

/// Bracket state of the n*l binary search.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BisectionState {
    /// Lower bracket end at termination.
    pub low: f64,
    /// Upper bracket end at termination.
    pub high: f64,
    /// The product target whose sweep produced the returned borders; one
    /// sweep at this value reproduces the partition exactly.
    pub candidate: f64,
    pub epsilon: f64,
    pub iterations: u32,
}

const MAX_BISECTION_ITERATIONS: u32 = 200;

/// Left-to-right endpoint sweep at a fixed product target.
///
/// Walks the ascending filtered counts keeping a running membership count n
/// and the current left border p; when (d_k - p)*n exceeds l_bar the sample
/// d_k closes the interval and becomes the next left border. The returned
/// list always begins with t0.
pub fn greedy_sweep(t: &CountCollection, t_0: f64, l_bar: f64) -> Result<Vec<f64>> {
    if !(t_0 > 0.0) || !t_0.is_finite() {
        return Err(UepError::InvalidParameter {
            name: "t0",
            message: format!("must be a positive finite number, got {t_0}"),
        });
    }
    if !(l_bar > 0.0) || !l_bar.is_finite() {
        return Err(UepError::InvalidParameter {
            name: "l_bar",
            message: format!("must be a positive finite number, got {l_bar}"),
        });
    }
    let filtered = t.at_least(t_0);
    if filtered.is_empty() {
        return Err(UepError::EmptyInput("no counts at or above t0"));
    }
    Ok(sweep(filtered, t_0, l_bar).endpoints)
}

struct SweepOutcome {
    endpoints: Vec<f64>,
    /// Samples seen since the last endpoint.
    tail_n: usize,
    /// Left border of the open tail interval.
    tail_p: f64,
}

fn sweep(filtered: &[f64], t_0: f64, l_bar: f64) -> SweepOutcome {
    let mut p = t_0;
    let mut n = 0usize;
    let mut endpoints = vec![t_0];
    for &d in filtered {
        n += 1;
        if (d - p) * n as f64 > l_bar {
            endpoints.push(d);
            p = d;
            n = 0;
        }
    }
    SweepOutcome {
        endpoints,
        tail_n: n,
        tail_p: p,
    }
}

/// Borders [0, endpoints.., t_max] with a trailing endpoint equal to t_max
/// deduplicated, so t_max closes the partition exactly once.
fn assemble_borders(endpoints: &[f64], t_max: f64) -> Vec<f64> {
    let mut borders = Vec::with_capacity(endpoints.len() + 2);
    borders.push(0.0);
    borders.extend_from_slice(endpoints);
    if borders.last() == Some(&t_max) {
        borders.pop();
    }
    borders.push(t_max);
    borders
}

fn distinct_count(sorted: &[f64]) -> usize {
    if sorted.is_empty() {
        0
    } else {
        1 + sorted.windows(2).filter(|w| w[1] > w[0]).count()
    }
}

/// Equalized-error partition: binary search on the product target.
///
/// The bracket [low, high] on n_i*l_i halves until its width is at most
/// epsilon; each probe runs one sweep and classifies the target as too
/// small (too many endpoints, or an overfull tail at exactly m-1) or
/// feasible. The final partition is assembled from a sweep at the feasible
/// bracket end, falling back to the low end when endpoint collapse at t_max
/// leaves the high end one interval short.
pub fn partition_uep(
    t: &CountCollection,
    m: usize,
    t_0: f64,
    epsilon: f64,
    search: Option<(f64, f64)>,
) -> Result<(Partition, BisectionState)> {
    if m < 2 {
        return Err(UepError::InvalidParameter {
            name: "m",
            message: format!("need at least 2 intervals, got {m}"),
        });
    }
    if !(t_0 > 0.0) || !t_0.is_finite() {
        return Err(UepError::InvalidParameter {
            name: "t0",
            message: format!("must be a positive finite number, got {t_0}"),
        });
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(UepError::InvalidParameter {
            name: "epsilon",
            message: format!("must be a positive finite number, got {epsilon}"),
        });
    }
    let filtered = t.at_least(t_0);
    let distinct = distinct_count(filtered);
    if distinct < m - 1 {
        return Err(UepError::InfeasiblePartition {
            needed: m - 1,
            available: distinct,
            what: "distinct count values at or above t0",
        });
    }
    let t_max = t.max_count();
    if t_max <= t_0 {
        return Err(UepError::InvalidParameter {
            name: "t0",
            message: format!("must lie strictly below the maximum count {t_max}, got {t_0}"),
        });
    }

    let (mut low, mut high) = match search {
        Some((lo, hi)) => {
            if !lo.is_finite() || !hi.is_finite() || lo < 0.0 || lo >= hi {
                return Err(UepError::InvalidParameter {
                    name: "search",
                    message: format!("range must satisfy 0 <= low < high, got [{lo}, {hi}]"),
                });
            }
            (lo, hi)
        }
        // The product of the degenerate single-interval partition bounds
        // every achievable n_i*l_i from above.
        None => (0.0, (t_max - t_0) * filtered.len() as f64),
    };

    let mut iterations = 0u32;
    while high - low > epsilon {
        iterations += 1;
        if iterations > MAX_BISECTION_ITERATIONS {
            return Err(UepError::SearchDiverged {
                iterations: MAX_BISECTION_ITERATIONS,
                tolerance: epsilon,
                gap: high - low,
            });
        }
        let l_bar = 0.5 * (low + high);
        let out = sweep(filtered, t_0, l_bar);
        let count = out.endpoints.len();
        if count >= m {
            low = l_bar;
        } else if count == m - 1 {
            if (t_max - out.tail_p) * out.tail_n as f64 > l_bar {
                low = l_bar;
            } else {
                high = l_bar;
            }
        } else {
            high = l_bar;
        }
    }

    // The high end is feasible in the usual case; when the last endpoint
    // collapses into t_max there, the low end carries the m-interval sweep.
    for candidate in [high, low] {
        let out = sweep(filtered, t_0, candidate);
        let borders = assemble_borders(&out.endpoints, t_max);
        if borders.len() == m + 1 {
            let partition = Partition::from_borders(borders, Strategy::Uep)?;
            let state = BisectionState {
                low,
                high,
                candidate,
                epsilon,
                iterations,
            };
            return Ok((partition, state));
        }
    }
    let at_high = assemble_borders(&sweep(filtered, t_0, high).endpoints, t_max).len() - 1;
    Err(UepError::InfeasiblePartition {
        needed: m,
        available: at_high,
        what: "intervals at the converged product target",
    })
}

/// Equal-length intervals over [t0, t_max] plus the background.
pub fn partition_uniform_len(t: &CountCollection, m: usize, t_0: f64) -> Result<Partition> {
    if m < 2 {
        return Err(UepError::InvalidParameter {
            name: "m",
            message: format!("need at least 2 intervals, got {m}"),
        });
    }
    if !(t_0 > 0.0) || !t_0.is_finite() {
        return Err(UepError::InvalidParameter {
            name: "t0",
            message: format!("must be a positive finite number, got {t_0}"),
        });
    }
    let t_max = t.max_count();
    if t_max <= t_0 {
        return Err(UepError::InvalidParameter {
            name: "t0",
            message: format!("must lie strictly below the maximum count {t_max}, got {t_0}"),
        });
    }
    let mut borders = Vec::with_capacity(m + 1);
    borders.push(0.0);
    borders.push(t_0);
    let step = (t_max - t_0) / (m - 1) as f64;
    for j in 1..m - 1 {
        borders.push(t_0 + step * j as f64);
    }
    borders.push(t_max);
    Partition::from_borders(borders, Strategy::UniformLen)
}

/// Equal-population intervals over the filtered samples plus the background.
///
/// The m-1 groups are as equal in size as possible with the remainder
/// spread over the earliest groups; each interior border is the first
/// sample value of the next group.
pub fn partition_uniform_num(t: &CountCollection, m: usize, t_0: f64) -> Result<Partition> {
    if m < 2 {
        return Err(UepError::InvalidParameter {
            name: "m",
            message: format!("need at least 2 intervals, got {m}"),
        });
    }
    if !(t_0 > 0.0) || !t_0.is_finite() {
        return Err(UepError::InvalidParameter {
            name: "t0",
            message: format!("must be a positive finite number, got {t_0}"),
        });
    }
    let t_max = t.max_count();
    if t_max <= t_0 {
        return Err(UepError::InvalidParameter {
            name: "t0",
            message: format!("must lie strictly below the maximum count {t_max}, got {t_0}"),
        });
    }
    let filtered = t.at_least(t_0);
    let groups = m - 1;
    if filtered.len() < groups {
        return Err(UepError::InfeasiblePartition {
            needed: groups,
            available: filtered.len(),
            what: "samples at or above t0",
        });
    }
    let base = filtered.len() / groups;
    let remainder = filtered.len() % groups;
    let mut borders = Vec::with_capacity(m + 1);
    borders.push(0.0);
    borders.push(t_0);
    let mut start = 0usize;
    for g in 0..groups - 1 {
        start += base + usize::from(g < remainder);
        borders.push(filtered[start]);
    }
    borders.push(t_max);
    Partition::from_borders(borders, Strategy::UniformNum)
}

/// Per-interval sample statistics of a collection under a partition.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntervalRow {
    pub n: usize,
    pub length: f64,
    /// n * length, the equalized product.
    pub nl: f64,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntervalStats {
    pub rows: Vec<IntervalRow>,
}

impl IntervalStats {
    /// Spread of n*l over the non-background intervals.
    pub fn nl_cv(&self) -> f64 {
        let nl: Vec<f64> = self.rows.iter().skip(1).map(|r| r.nl).collect();
        coefficient_of_variation(&nl)
    }
}

/// Count, length, and product per interval, with half-open membership and
/// the last interval closed.
pub fn interval_stats(t: &CountCollection, p: &Partition) -> Result<IntervalStats> {
    p.ensure_covers(t)?;
    let counts = t.counts();
    let mut rows = Vec::with_capacity(p.m());
    for (i, (lo, hi)) in p.member_ranges(counts).into_iter().enumerate() {
        let members = &counts[lo..hi];
        let length = p.length(i);
        rows.push(IntervalRow {
            n: members.len(),
            length,
            nl: members.len() as f64 * length,
            mean: (!members.is_empty())
                .then(|| kahan_sum(members.iter().copied()) / members.len() as f64),
            min: members.first().copied(),
            max: members.last().copied(),
        });
    }
    Ok(IntervalStats { rows })
}
