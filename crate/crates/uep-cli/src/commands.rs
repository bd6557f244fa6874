//! One function per subcommand. Each returns the one-line JSON summary
//! printed to standard output on success.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde_json::json;
use uep_core::density::{
    collect_counts, extract_local_counts, generate_density_map, CountCollection, KernelSpec,
    LocalCountMap,
};
use uep_core::io::annotations::{load_annotations_json, save_annotations_json};
use uep_core::io::formats::{
    load_comparison, load_counts, load_error_report, load_iph, load_partition, load_proxies,
    save_comparison, save_counts, save_error_report, save_iph, save_partition, save_proxies,
    PartitionRecord, COMPARISON_FORMAT, ERROR_REPORT_FORMAT, PARTITION_FORMAT,
};
use uep_core::io::grids::{
    load_class_map, load_density_map, load_local_counts, save_class_map, save_density_map,
    save_local_counts,
};
use uep_core::io::reports::{
    save_comparison_csv, save_error_report_csv, save_interval_stats_csv,
};
use uep_core::partition::{
    interval_stats, partition_uep, partition_uniform_len, partition_uniform_num, Partition,
};
use uep_core::proxy::{derive_iph, fit_proxies, ProxyTable};
use uep_core::quantize::{
    decode_count_map, decode_iph, discretization_error, encode_class_map, error_decomposition,
    ErrorReport,
};
use uep_core::simulate::{compare_strategies, simulate_classifier, CellOutcome, NoiseModel};
use uep_core::stats::KahanSum;
use uep_core::synth::{synth_scene, SceneLayout};
use uep_core::UepError;

use crate::support::{
    default_epsilon, ensure_dir, list_grids, load_count_maps, noise_summary, AdaptiveArg,
    MethodArg, NoiseArg, StrategyArg,
};

fn param_error(name: &'static str, message: impl Into<String>) -> anyhow::Error {
    UepError::InvalidParameter {
        name,
        message: message.into(),
    }
    .into()
}

/// Sibling path sharing the stem of `path`, for derived outputs.
fn sibling(path: &Path, tail: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{tail}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LayoutArg {
    Uniform,
    Clusters,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Number of scenes to generate; scene i uses seed SEED+i.
    #[arg(long, default_value_t = 1)]
    pub scenes: usize,
    /// Head points per scene.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = LayoutArg::Clusters)]
    pub layout: LayoutArg,
    /// Cluster count for the clusters layout.
    #[arg(long, default_value_t = 4)]
    pub clusters: usize,
    /// Gaussian scatter around each cluster center, in pixels.
    #[arg(long, default_value_t = 25.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 512)]
    pub width: u32,
    #[arg(long, default_value_t = 512)]
    pub height: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Annotations JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth(args: &SynthArgs) -> Result<serde_json::Value> {
    if args.scenes == 0 {
        return Err(param_error("scenes", "need at least 1 scene"));
    }
    let layout = match args.layout {
        LayoutArg::Uniform => SceneLayout::Uniform,
        LayoutArg::Clusters => SceneLayout::GaussianClusters {
            clusters: args.clusters,
            spread: args.spread,
        },
    };
    let anns = (0..args.scenes)
        .map(|i| {
            synth_scene(
                args.points,
                layout,
                args.width,
                args.height,
                args.seed + i as u64,
            )
        })
        .collect::<uep_core::Result<Vec<_>>>()?;
    save_annotations_json(&args.out, &anns)?;
    Ok(json!({
        "command": "synth",
        "scenes": anns.len(),
        "points": anns.iter().map(|a| a.count()).sum::<usize>(),
        "out": args.out,
    }))
}

#[derive(Args)]
pub struct DensifyArgs {
    /// Annotations JSON to read.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Fixed kernel bandwidth in pixels.
    #[arg(long, default_value_t = 4.0, conflicts_with = "adaptive")]
    pub sigma: f64,
    /// Adaptive bandwidth K,BETA: per-point sigma from the K nearest
    /// neighbors scaled by BETA.
    #[arg(long)]
    pub adaptive: Option<AdaptiveArg>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for the per-image density grids.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn densify(args: &DensifyArgs) -> Result<serde_json::Value> {
    let spec = match args.adaptive {
        Some(AdaptiveArg { k, beta }) => KernelSpec::adaptive(k, beta),
        None => KernelSpec::fixed(args.sigma),
    };
    spec.validate()?;
    let mut anns = load_annotations_json(&args.annotations)?;
    anns.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    ensure_dir(&args.out)?;
    let totals = anns
        .par_iter()
        .map(|ann| {
            let map = generate_density_map(ann, &spec)?;
            save_density_map(&args.out.join(format!("{}.bin", ann.image_id)), &map)?;
            Ok(map.total())
        })
        .collect::<uep_core::Result<Vec<f64>>>()?;
    Ok(json!({
        "command": "densify",
        "images": anns.len(),
        "total_density": kahan(&totals),
        "out": args.out,
    }))
}

#[derive(Args)]
pub struct CountsArgs {
    /// Directory of density grids to read.
    #[arg(long)]
    pub density: PathBuf,
    /// Patch edge in density cells; one count cell per patch.
    #[arg(long, default_value_t = 8)]
    pub patch_size: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for the per-image count grids plus collection.json.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn counts(args: &CountsArgs) -> Result<serde_json::Value> {
    ensure_dir(&args.out)?;
    let maps = list_grids(&args.density)?
        .par_iter()
        .map(|path| {
            let density = load_density_map(path)?;
            let lc = extract_local_counts(&density, args.patch_size)?;
            save_local_counts(&args.out.join(format!("{}.bin", lc.image_id)), &lc)?;
            Ok(lc)
        })
        .collect::<uep_core::Result<Vec<_>>>()?;
    let collection = collect_counts(&maps)?;
    let collection_path = args.out.join("collection.json");
    save_counts(&collection_path, &collection)?;
    Ok(json!({
        "command": "counts",
        "images": maps.len(),
        "cells": collection.len(),
        "max_count": collection.max_count(),
        "collection": collection_path,
        "out": args.out,
    }))
}

/// Interval fitting flags shared by `partition` and `compare`.
#[derive(Args)]
pub struct FitArgs {
    /// Number of intervals, background included.
    #[arg(long, default_value_t = 25)]
    pub m: usize,
    /// Upper border of the background interval.
    #[arg(long, default_value_t = 1.6e-4)]
    pub t0: f64,
    /// Bisection tolerance; scales with the data when omitted.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

impl FitArgs {
    fn epsilon_for(&self, t: &CountCollection) -> f64 {
        self.epsilon.unwrap_or_else(|| default_epsilon(t))
    }
}

#[derive(Args)]
pub struct PartitionArgs {
    /// Count collection JSON to fit on.
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long, value_enum, default_value_t = StrategyArg::Uep)]
    pub strategy: StrategyArg,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Also write per-interval occupancy rows next to the partition.
    #[arg(long)]
    pub plot_data: bool,
    /// Partition JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn partition(args: &PartitionArgs) -> Result<serde_json::Value> {
    let t = load_counts(&args.counts)?;
    let epsilon = args.fit.epsilon_for(&t);
    let record = match args.strategy {
        StrategyArg::Uep => {
            let (p, state) = partition_uep(&t, args.fit.m, args.fit.t0, epsilon, None)?;
            PartitionRecord::from_search(p, &state)
        }
        StrategyArg::UniformLen => {
            PartitionRecord::bare(partition_uniform_len(&t, args.fit.m, args.fit.t0)?)
        }
        StrategyArg::UniformNum => {
            PartitionRecord::bare(partition_uniform_num(&t, args.fit.m, args.fit.t0)?)
        }
    };
    save_partition(&args.out, &record)?;
    let stats = interval_stats(&t, &record.partition)?;
    let mut summary = json!({
        "command": "partition",
        "strategy": record.partition.strategy().to_string(),
        "m": record.partition.m(),
        "t0": record.partition.t0(),
        "epsilon": epsilon,
        "t_max": record.partition.t_max(),
        "nl_cv": stats.nl_cv(),
        "out": args.out,
    });
    if args.plot_data {
        let plot = sibling(&args.out, "-intervals.csv");
        save_interval_stats_csv(&plot, &stats)?;
        summary["plot"] = json!(plot);
    }
    Ok(summary)
}

#[derive(Args)]
pub struct ProxiesArgs {
    /// Count collection JSON the proxies are fitted on.
    #[arg(long)]
    pub counts: PathBuf,
    /// Partition JSON naming the intervals.
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long = "proxies", value_enum, default_value_t = MethodArg::Mcp)]
    pub method: MethodArg,
    /// Force the background interval to decode to exactly zero.
    #[arg(long)]
    pub background_zero: bool,
    /// Proxy table JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn proxies(args: &ProxiesArgs) -> Result<serde_json::Value> {
    let t = load_counts(&args.counts)?;
    let record = load_partition(&args.partition)?;
    let mut table = fit_proxies(&t, &record.partition, args.method.into())?;
    if args.background_zero {
        table = table.with_background_zero();
    }
    save_proxies(&args.out, &table)?;
    Ok(json!({
        "command": "proxies",
        "method": table.method().to_string(),
        "m": table.len(),
        "background": table.get(0),
        "out": args.out,
    }))
}

#[derive(Args)]
pub struct IphArgs {
    /// Count collection JSON the second head is fitted on.
    #[arg(long)]
    pub counts: PathBuf,
    /// First head's partition JSON.
    #[arg(long)]
    pub partition: PathBuf,
    /// First head's proxy table JSON.
    #[arg(long)]
    pub proxies: PathBuf,
    /// Head pair JSON to write; the derived head's partition and proxies
    /// are also written as standalone siblings for reuse by `quantize`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn iph(args: &IphArgs) -> Result<serde_json::Value> {
    let t = load_counts(&args.counts)?;
    let record = load_partition(&args.partition)?;
    let table = load_proxies(&args.proxies)?;
    let pair = derive_iph(&t, &record.partition, &table)?;
    save_iph(&args.out, &pair)?;
    let head1_partition = sibling(&args.out, "-head1-partition.json");
    save_partition(
        &head1_partition,
        &PartitionRecord::bare(pair.head1.partition.clone()),
    )?;
    let head1_proxies = sibling(&args.out, "-head1-proxies.json");
    save_proxies(&head1_proxies, &pair.head1.proxies)?;
    Ok(json!({
        "command": "iph",
        "head0_m": pair.head0.partition.m(),
        "head1_m": pair.head1.partition.m(),
        "out": args.out,
        "head1_partition": head1_partition,
        "head1_proxies": head1_proxies,
    }))
}

#[derive(Args)]
pub struct QuantizeArgs {
    /// Directory of local count grids to encode.
    #[arg(long)]
    pub counts_dir: PathBuf,
    /// Partition JSON naming the intervals.
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for the per-image class grids.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn quantize(args: &QuantizeArgs) -> Result<serde_json::Value> {
    let record = load_partition(&args.partition)?;
    ensure_dir(&args.out)?;
    let outcomes = list_grids(&args.counts_dir)?
        .par_iter()
        .map(|path| {
            let lc = load_local_counts(path)?;
            let encoded = encode_class_map(&lc, &record.partition)?;
            save_class_map(
                &args.out.join(format!("{}.bin", encoded.map.image_id)),
                &encoded.map,
            )?;
            Ok((encoded.map.cells(), encoded.clamped))
        })
        .collect::<uep_core::Result<Vec<_>>>()?;
    Ok(json!({
        "command": "quantize",
        "images": outcomes.len(),
        "cells": outcomes.iter().map(|(c, _)| c).sum::<usize>(),
        "clamped": outcomes.iter().map(|(_, c)| c).sum::<usize>(),
        "m": record.partition.m(),
        "out": args.out,
    }))
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Directory of class grids to corrupt.
    #[arg(long)]
    pub classes: PathBuf,
    /// Noise model, `adjacent:P` or `geometric:P[:DECAY]`.
    #[arg(long)]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for the corrupted class grids.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn simulate(args: &SimulateArgs) -> Result<serde_json::Value> {
    let noise = NoiseModel {
        kind: args.noise.0,
        seed: args.seed,
    };
    noise.validate()?;
    ensure_dir(&args.out)?;
    let outcomes = list_grids(&args.classes)?
        .par_iter()
        .map(|path| {
            let truth = load_class_map(path)?;
            let noisy = simulate_classifier(&truth, &noise);
            let changed = truth
                .values
                .iter()
                .zip(&noisy.values)
                .filter(|(a, b)| a != b)
                .count();
            save_class_map(&args.out.join(format!("{}.bin", noisy.image_id)), &noisy)?;
            Ok((noisy.cells(), changed))
        })
        .collect::<uep_core::Result<Vec<_>>>()?;
    Ok(json!({
        "command": "simulate",
        "images": outcomes.len(),
        "cells": outcomes.iter().map(|(c, _)| c).sum::<usize>(),
        "changed": outcomes.iter().map(|(_, c)| c).sum::<usize>(),
        "noise": noise_summary(&noise.kind),
        "seed": args.seed,
        "out": args.out,
    }))
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Directory of true local count grids.
    #[arg(long)]
    pub truth: PathBuf,
    /// Partition JSON; required unless `--iph` supplies the heads.
    #[arg(long, conflicts_with = "iph")]
    pub partition: Option<PathBuf>,
    /// Proxy table JSON to decode with.
    #[arg(long, conflicts_with_all = ["method", "iph"])]
    pub proxies_file: Option<PathBuf>,
    /// Proxy method fitted on the fly when no table file is given.
    #[arg(long = "proxies", value_enum, default_value_t = MethodArg::Mcp)]
    pub method: MethodArg,
    /// Count collection JSON to fit on-the-fly proxies on; defaults to the
    /// pooled truth grids.
    #[arg(long, conflicts_with_all = ["proxies_file", "iph"])]
    pub counts: Option<PathBuf>,
    /// Force on-the-fly proxies to decode background as exactly zero.
    #[arg(long, conflicts_with_all = ["proxies_file", "iph"])]
    pub background_zero: bool,
    /// Directory of predicted class grids; perfect classification is
    /// assumed when omitted.
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// Second head's predicted class grids, paired with `--iph`.
    #[arg(long, requires = "iph")]
    pub classes1: Option<PathBuf>,
    /// Head pair JSON; switches decoding to the two-head average.
    #[arg(long, requires_all = ["classes", "classes1"])]
    pub iph: Option<PathBuf>,
    /// Also write the report as CSV next to the JSON.
    #[arg(long)]
    pub plot_data: bool,
    /// Error report JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn decoded_predictions(args: &AnalyzeArgs, partition: &Partition, table: &ProxyTable) -> Result<Option<Vec<LocalCountMap>>> {
    let Some(dir) = &args.classes else {
        return Ok(None);
    };
    let decoded = list_grids(dir)?
        .par_iter()
        .map(|path| {
            let map = load_class_map(path)?;
            if map.m != partition.m() {
                return Err(UepError::ShapeMismatch {
                    message: format!(
                        "class grid {} has {} classes, the partition has {}",
                        map.image_id,
                        map.m,
                        partition.m()
                    ),
                });
            }
            decode_count_map(&map, table)
        })
        .collect::<uep_core::Result<Vec<_>>>()?;
    Ok(Some(decoded))
}

pub fn analyze(args: &AnalyzeArgs) -> Result<serde_json::Value> {
    let truth = load_count_maps(&args.truth)?;
    let report: ErrorReport;
    if let Some(iph_path) = &args.iph {
        let pair = load_iph(iph_path)?;
        let classes0 = args.classes.as_ref().expect("clap requires --classes");
        let classes1 = args.classes1.as_ref().expect("clap requires --classes1");
        let paths0 = list_grids(classes0)?;
        let paths1 = list_grids(classes1)?;
        if paths0.len() != paths1.len() {
            bail!(
                "{} head-0 grids but {} head-1 grids",
                paths0.len(),
                paths1.len()
            );
        }
        let decoded = paths0
            .par_iter()
            .zip(&paths1)
            .map(|(p0, p1)| {
                let c0 = load_class_map(p0)?;
                let c1 = load_class_map(p1)?;
                decode_iph(&c0, &c1, &pair)
            })
            .collect::<uep_core::Result<Vec<_>>>()?;
        report = error_decomposition(&decoded, &truth, &pair.head0.partition)?;
    } else {
        let Some(partition_path) = &args.partition else {
            return Err(param_error("partition", "required unless --iph is given"));
        };
        let record = load_partition(partition_path)?;
        let table = match &args.proxies_file {
            Some(path) => load_proxies(path)?,
            None => {
                let t = match &args.counts {
                    Some(path) => load_counts(path)?,
                    None => collect_counts(&truth)?,
                };
                let mut table = fit_proxies(&t, &record.partition, args.method.into())?;
                if args.background_zero {
                    table = table.with_background_zero();
                }
                table
            }
        };
        report = match decoded_predictions(args, &record.partition, &table)? {
            Some(decoded) => error_decomposition(&decoded, &truth, &record.partition)?,
            None => discretization_error(&truth, &record.partition, &table)?,
        };
    }
    save_error_report(&args.out, &report)?;
    let mut summary = json!({
        "command": "analyze",
        "images": report.per_image.len(),
        "mae": report.mae,
        "mse": report.mse,
        "total_signed": report.total_signed,
        "pooled_signed": report.pooled_signed,
        "clamped": report.clamped,
        "out": args.out,
    });
    if args.plot_data {
        let plot = sibling(&args.out, ".csv");
        save_error_report_csv(&plot, &report)?;
        summary["plot"] = json!(plot);
    }
    Ok(summary)
}

#[derive(Args)]
pub struct CompareArgs {
    /// Count collection JSON partitions and proxies are fitted on.
    #[arg(long)]
    pub counts: PathBuf,
    /// Directory of evaluation local count grids.
    #[arg(long)]
    pub eval: PathBuf,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Noise model applied to every cell of the grid.
    #[arg(long)]
    pub noise: NoiseArg,
    /// First noise seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of consecutive seeds to run.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Fitting strategies to compare; repeat to select, all when omitted.
    #[arg(long = "strategy", value_enum)]
    pub strategies: Vec<StrategyArg>,
    /// Proxy methods to compare; repeat to select, all when omitted.
    #[arg(long = "proxies", value_enum)]
    pub methods: Vec<MethodArg>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for per-seed matrices and the cross-seed summary.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn compare(args: &CompareArgs) -> Result<serde_json::Value> {
    if args.seeds == 0 {
        return Err(param_error("seeds", "need at least 1 seed"));
    }
    let strategies: Vec<uep_core::partition::Strategy> = if args.strategies.is_empty() {
        vec![StrategyArg::Uep, StrategyArg::UniformLen, StrategyArg::UniformNum]
    } else {
        args.strategies.clone()
    }
    .into_iter()
    .map(Into::into)
    .collect();
    let methods: Vec<uep_core::proxy::ProxyMethod> = if args.methods.is_empty() {
        vec![MethodArg::Mcp, MethodArg::Midpoint, MethodArg::SampleMedian]
    } else {
        args.methods.clone()
    }
    .into_iter()
    .map(Into::into)
    .collect();

    let t = load_counts(&args.counts)?;
    let eval = load_count_maps(&args.eval)?;
    let epsilon = args.fit.epsilon_for(&t);
    ensure_dir(&args.out)?;

    let matrices = (0..args.seeds)
        .into_par_iter()
        .map(|k| {
            let seed = args.seed + k;
            let noise = NoiseModel {
                kind: args.noise.0,
                seed,
            };
            let matrix = compare_strategies(
                &t,
                &eval,
                args.fit.m,
                &noise,
                &strategies,
                &methods,
                args.fit.t0,
                epsilon,
            )?;
            let dir = args.out.join(format!("seed-{seed}"));
            ensure_dir(&dir)?;
            save_comparison(&dir.join("matrix.json"), &matrix)?;
            save_comparison_csv(&dir.join("cells.csv"), &dir.join("per_image.csv"), &matrix)?;
            Ok((seed, matrix))
        })
        .collect::<Result<Vec<_>>>()?;

    let summary_path = args.out.join("summary.csv");
    write_seed_summary(&summary_path, &matrices)?;
    Ok(json!({
        "command": "compare",
        "seeds": args.seeds,
        "first_seed": args.seed,
        "strategies": strategies.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "methods": methods.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "images": eval.len(),
        "noise": noise_summary(&args.noise.0),
        "summary": summary_path,
        "out": args.out,
    }))
}

/// One row per seed and cell so cross-seed orderings can be tallied
/// without reopening the per-seed files.
fn write_seed_summary(
    path: &Path,
    matrices: &[(u64, uep_core::simulate::ComparisonMatrix)],
) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record([
        "seed",
        "strategy",
        "method",
        "status",
        "mae",
        "mse",
        "mean_discretization",
        "nl_cv",
    ])?;
    for (seed, matrix) in matrices {
        for (i, strategy) in matrix.strategies.iter().enumerate() {
            for (j, method) in matrix.methods.iter().enumerate() {
                match &matrix.cells[i][j] {
                    CellOutcome::Feasible(cell) => out.write_record([
                        seed.to_string(),
                        strategy.to_string(),
                        method.to_string(),
                        "feasible".to_string(),
                        cell.mae.to_string(),
                        cell.mse.to_string(),
                        cell.mean_discretization.to_string(),
                        cell.nl_cv.to_string(),
                    ])?,
                    CellOutcome::Infeasible { .. } => out.write_record([
                        seed.to_string(),
                        strategy.to_string(),
                        method.to_string(),
                        "infeasible".to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ])?,
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Args)]
pub struct ReportArgs {
    /// Versioned JSON document to render as CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Count collection JSON, needed to render a partition's intervals.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Directory for the CSV files.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn report(args: &ReportArgs) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let format = value
        .get("format")
        .and_then(|f| f.as_str())
        .unwrap_or_default()
        .to_string();
    ensure_dir(&args.out)?;
    let written: Vec<PathBuf> = match format.as_str() {
        ERROR_REPORT_FORMAT => {
            let report = load_error_report(&args.input)?;
            let path = args.out.join("report.csv");
            save_error_report_csv(&path, &report)?;
            vec![path]
        }
        COMPARISON_FORMAT => {
            let matrix = load_comparison(&args.input)?;
            let cells = args.out.join("cells.csv");
            let per_image = args.out.join("per_image.csv");
            save_comparison_csv(&cells, &per_image, &matrix)?;
            vec![cells, per_image]
        }
        PARTITION_FORMAT => {
            let Some(counts) = &args.counts else {
                return Err(param_error(
                    "counts",
                    "rendering a partition needs the collection it was fitted on",
                ));
            };
            let record = load_partition(&args.input)?;
            let stats = interval_stats(&load_counts(counts)?, &record.partition)?;
            let path = args.out.join("intervals.csv");
            save_interval_stats_csv(&path, &stats)?;
            vec![path]
        }
        found => {
            return Err(UepError::VersionMismatch {
                found: found.to_string(),
                expected: format!(
                    "{ERROR_REPORT_FORMAT}, {COMPARISON_FORMAT}, or {PARTITION_FORMAT}"
                ),
            }
            .into())
        }
    };
    Ok(json!({
        "command": "report",
        "input_format": format,
        "written": written,
        "out": args.out,
    }))
}

fn kahan(values: &[f64]) -> f64 {
    let mut sum = KahanSum::default();
    for &v in values {
        sum.add(v);
    }
    sum.value()
}
