//! Count proxies per interval and the interleaved second head.
//!
//! A proxy is the single count value decoded for every patch classified
//! into an interval. The mean proxy makes the signed discretization error
//! vanish on the fitting collection; midpoint and sample-median proxies are
//! the comparison baselines.

use crate::density::CountCollection;
use crate::error::{Result, UepError};
use crate::partition::{Partition, Strategy};
use crate::stats::{kahan_sum, median_of_sorted};

/// How interval proxies are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyMethod {
    /// Arithmetic mean of member counts.
    Mcp,
    /// Interval midpoint (b_i + b_{i+1}) / 2.
    Midpoint,
    /// Median of member counts.
    SampleMedian,
}

impl std::fmt::Display for ProxyMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProxyMethod::Mcp => "mcp",
            ProxyMethod::Midpoint => "midpoint",
            ProxyMethod::SampleMedian => "sample-median",
        };
        f.write_str(s)
    }
}

/// One decoded count value per interval, with empty intervals flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyTable {
    method: ProxyMethod,
    proxies: Vec<f64>,
    empty_flags: Vec<bool>,
}

impl ProxyTable {
    pub fn new(method: ProxyMethod, proxies: Vec<f64>, empty_flags: Vec<bool>) -> Result<Self> {
        if proxies.is_empty() {
            return Err(UepError::EmptyInput("proxy table"));
        }
        if proxies.len() != empty_flags.len() {
            return Err(UepError::ShapeMismatch {
                message: format!(
                    "{} proxies but {} empty flags",
                    proxies.len(),
                    empty_flags.len()
                ),
            });
        }
        for (i, &v) in proxies.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(UepError::InvalidParameter {
                    name: "proxies",
                    message: format!("proxy {i} must be a non-negative finite number, got {v}"),
                });
            }
        }
        Ok(Self {
            method,
            proxies,
            empty_flags,
        })
    }

    pub fn method(&self) -> ProxyMethod {
        self.method
    }

    pub fn proxies(&self) -> &[f64] {
        &self.proxies
    }

    pub fn empty_flags(&self) -> &[bool] {
        &self.empty_flags
    }

    pub fn len(&self) -> usize {
        self.proxies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proxies.is_empty()
    }

    /// Decoded count for class i.
    pub fn get(&self, i: usize) -> f64 {
        self.proxies[i]
    }

    /// Replace the background proxy with 0, for pipelines that want empty
    /// patches decoded as exactly empty.
    pub fn with_background_zero(mut self) -> Self {
        self.proxies[0] = 0.0;
        self
    }
}

fn midpoint(p: &Partition, i: usize) -> f64 {
    let (lo, hi) = p.bounds(i);
    0.5 * (lo + hi)
}

/// Mean-of-members proxies; empty intervals fall back to the midpoint and
/// are flagged.
pub fn compute_mcp(t: &CountCollection, p: &Partition) -> Result<ProxyTable> {
    p.ensure_covers(t)?;
    let counts = t.counts();
    let mut proxies = Vec::with_capacity(p.m());
    let mut flags = Vec::with_capacity(p.m());
    for (i, (lo, hi)) in p.member_ranges(counts).into_iter().enumerate() {
        let members = &counts[lo..hi];
        if members.is_empty() {
            proxies.push(midpoint(p, i));
            flags.push(true);
        } else {
            proxies.push(kahan_sum(members.iter().copied()) / members.len() as f64);
            flags.push(false);
        }
    }
    ProxyTable::new(ProxyMethod::Mcp, proxies, flags)
}

/// Interval-midpoint proxies; independent of the samples.
pub fn compute_midpoint_proxies(p: &Partition) -> ProxyTable {
    let proxies = (0..p.m()).map(|i| midpoint(p, i)).collect();
    ProxyTable {
        method: ProxyMethod::Midpoint,
        proxies,
        empty_flags: vec![false; p.m()],
    }
}

/// Median-of-members proxies; empty intervals fall back to the midpoint and
/// are flagged.
pub fn compute_sample_median_proxies(t: &CountCollection, p: &Partition) -> Result<ProxyTable> {
    p.ensure_covers(t)?;
    let counts = t.counts();
    let mut proxies = Vec::with_capacity(p.m());
    let mut flags = Vec::with_capacity(p.m());
    for (i, (lo, hi)) in p.member_ranges(counts).into_iter().enumerate() {
        let members = &counts[lo..hi];
        if members.is_empty() {
            proxies.push(midpoint(p, i));
            flags.push(true);
        } else {
            proxies.push(median_of_sorted(members));
            flags.push(false);
        }
    }
    ProxyTable::new(ProxyMethod::SampleMedian, proxies, flags)
}

/// Fit a proxy table for a partition with the named method.
pub fn fit_proxies(t: &CountCollection, p: &Partition, method: ProxyMethod) -> Result<ProxyTable> {
    match method {
        ProxyMethod::Mcp => compute_mcp(t, p),
        ProxyMethod::Midpoint => Ok(compute_midpoint_proxies(p)),
        ProxyMethod::SampleMedian => compute_sample_median_proxies(t, p),
    }
}

/// One classification head: interval borders plus decoded proxies.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionHead {
    pub partition: Partition,
    pub proxies: ProxyTable,
}

/// Two heads whose borders interleave; decoded counts are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct IphPair {
    pub head0: PredictionHead,
    pub head1: PredictionHead,
}

/// Second head derived from the first: head1's interior borders are head0's
/// non-background proxies, so a sample near a head0 border sits mid-interval
/// in head1. Head1 keeps the background border and closes at t_max, giving
/// one interval more than head0; its proxies are means recomputed on t.
pub fn derive_iph(
    t: &CountCollection,
    head0_partition: &Partition,
    head0_proxies: &ProxyTable,
) -> Result<IphPair> {
    let m = head0_partition.m();
    if head0_proxies.len() != m {
        return Err(UepError::ShapeMismatch {
            message: format!("{} proxies for {m} intervals", head0_proxies.len()),
        });
    }
    for i in 1..m {
        let (lo, hi) = head0_partition.bounds(i);
        let d = head0_proxies.get(i);
        if !(d > lo && d < hi) {
            return Err(UepError::InvalidParameter {
                name: "proxies",
                message: format!(
                    "proxy {d} of interval {i} must lie strictly inside ({lo}, {hi}) to become a border"
                ),
            });
        }
    }
    let mut borders = Vec::with_capacity(m + 2);
    borders.push(0.0);
    borders.push(head0_partition.t0());
    borders.extend_from_slice(&head0_proxies.proxies()[1..]);
    borders.push(head0_partition.t_max());
    let head1_partition = Partition::from_borders(borders, Strategy::Explicit)?;
    let head1_proxies = compute_mcp(t, &head1_partition)?;
    Ok(IphPair {
        head0: PredictionHead {
            partition: head0_partition.clone(),
            proxies: head0_proxies.clone(),
        },
        head1: PredictionHead {
            partition: head1_partition,
            proxies: head1_proxies,
        },
    })
}
