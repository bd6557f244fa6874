//! Flag parsing and file plumbing shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use uep_core::density::{CountCollection, LocalCountMap};
use uep_core::io::grids::load_local_counts;
use uep_core::partition::Strategy;
use uep_core::proxy::ProxyMethod;
use uep_core::simulate::NoiseKind;

/// Fitting strategies selectable from the command line. Explicit borders
/// stay out: they describe loaded partitions, not a fitting method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StrategyArg {
    Uep,
    UniformLen,
    UniformNum,
}

impl From<StrategyArg> for Strategy {
    fn from(arg: StrategyArg) -> Self {
        match arg {
            StrategyArg::Uep => Strategy::Uep,
            StrategyArg::UniformLen => Strategy::UniformLen,
            StrategyArg::UniformNum => Strategy::UniformNum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    Mcp,
    Midpoint,
    SampleMedian,
}

impl From<MethodArg> for ProxyMethod {
    fn from(arg: MethodArg) -> Self {
        match arg {
            MethodArg::Mcp => ProxyMethod::Mcp,
            MethodArg::Midpoint => ProxyMethod::Midpoint,
            MethodArg::SampleMedian => ProxyMethod::SampleMedian,
        }
    }
}

/// Noise flag syntax: `adjacent:P` or `geometric:P[:DECAY]`, decay 0.5 when
/// omitted. The long JSON names `adjacent-flip` and `geometric-hop` are
/// accepted as aliases.
#[derive(Debug, Clone, Copy)]
pub struct NoiseArg(pub NoiseKind);

impl FromStr for NoiseArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default();
        let p: f64 = parts
            .next()
            .ok_or_else(|| format!("expected {kind}:P, got {s:?}"))?
            .parse()
            .map_err(|e| format!("bad probability in {s:?}: {e}"))?;
        let noise = match kind {
            "adjacent" | "adjacent-flip" => {
                if parts.next().is_some() {
                    return Err(format!("adjacent noise takes one number, got {s:?}"));
                }
                NoiseKind::AdjacentFlip { p }
            }
            "geometric" | "geometric-hop" => {
                let decay = match parts.next() {
                    Some(text) => text
                        .parse()
                        .map_err(|e| format!("bad decay in {s:?}: {e}"))?,
                    None => 0.5,
                };
                if parts.next().is_some() {
                    return Err(format!("geometric noise takes two numbers, got {s:?}"));
                }
                NoiseKind::GeometricHop { p, decay }
            }
            other => return Err(format!("unknown noise kind {other:?}")),
        };
        noise.validate().map_err(|e| e.to_string())?;
        Ok(NoiseArg(noise))
    }
}

/// One line of JSON-safe noise description for the stdout summary.
pub fn noise_summary(kind: &NoiseKind) -> serde_json::Value {
    serde_json::to_value(kind).expect("noise kinds serialize")
}

/// Adaptive kernel flag syntax: `K,BETA`.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveArg {
    pub k: usize,
    pub beta: f64,
}

impl FromStr for AdaptiveArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (k, beta) = s
            .split_once(',')
            .ok_or_else(|| format!("expected K,BETA, got {s:?}"))?;
        Ok(AdaptiveArg {
            k: k.parse().map_err(|e| format!("bad K in {s:?}: {e}"))?,
            beta: beta.parse().map_err(|e| format!("bad BETA in {s:?}: {e}"))?,
        })
    }
}

/// Bisection tolerance when `--epsilon` is not given, scaled to the data so
/// desk-sized collections converge as tightly as full-sized ones.
pub fn default_epsilon(t: &CountCollection) -> f64 {
    1e-6 * t.len() as f64 * t.max_count()
}

/// Size the global worker pool once, before any parallel stage runs.
pub fn init_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("worker pool already initialized")?;
    }
    Ok(())
}

/// Binary grid files in a directory, sorted by name so every run visits
/// images in the same order regardless of filesystem iteration order.
pub fn list_grids(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|entry| Ok(entry?.path()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "bin"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .bin grids under {}", dir.display());
    }
    Ok(paths)
}

/// Load every local count grid in the directory, sorted by image id.
pub fn load_count_maps(dir: &Path) -> Result<Vec<LocalCountMap>> {
    list_grids(dir)?
        .iter()
        .map(|p| load_local_counts(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_flag_accepts_both_kinds() {
        let NoiseArg(kind) = "adjacent:0.1".parse().unwrap();
        assert_eq!(kind, NoiseKind::AdjacentFlip { p: 0.1 });
        let NoiseArg(kind) = "geometric:0.2:0.75".parse().unwrap();
        assert_eq!(
            kind,
            NoiseKind::GeometricHop {
                p: 0.2,
                decay: 0.75
            }
        );
        let NoiseArg(kind) = "geometric-hop:0.2".parse().unwrap();
        assert_eq!(kind, NoiseKind::GeometricHop { p: 0.2, decay: 0.5 });
    }

    #[test]
    fn noise_flag_rejects_junk() {
        assert!("adjacent".parse::<NoiseArg>().is_err());
        assert!("adjacent:2.0".parse::<NoiseArg>().is_err());
        assert!("adjacent:0.1:0.5".parse::<NoiseArg>().is_err());
        assert!("geometric:0.1:1.5".parse::<NoiseArg>().is_err());
        assert!("brownian:0.1".parse::<NoiseArg>().is_err());
    }

    #[test]
    fn adaptive_flag_needs_both_numbers() {
        let arg: AdaptiveArg = "3,0.3".parse().unwrap();
        assert_eq!(arg.k, 3);
        assert_eq!(arg.beta, 0.3);
        assert!("3".parse::<AdaptiveArg>().is_err());
        assert!("x,0.3".parse::<AdaptiveArg>().is_err());
    }
}
