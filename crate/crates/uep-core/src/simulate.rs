//! Monte-Carlo simulation of an imperfect patch classifier, plus the
//! comparative analyses that measure how partition and proxy choices move
//! image-level counting error.

use crate::density::{CountCollection, LocalCountMap};
use crate::error::{Result, UepError};
use crate::partition::{
    interval_stats, partition_uep, partition_uniform_len, partition_uniform_num, Partition,
    Strategy,
};
use crate::proxy::{derive_iph, fit_proxies, IphPair, PredictionHead, ProxyMethod};
use crate::quantize::{decode_count_map, decode_iph, encode_class_map, ClassMap};
use crate::rng::{stream_of, CounterRng};
use crate::stats::KahanSum;

/// How a simulated classifier corrupts class labels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseKind {
    /// With probability p the class moves one interval, up or down with
    /// equal odds; extreme classes move inward with the full mass p.
    AdjacentFlip { p: f64 },
    /// With probability p the class hops h >= 1 intervals, h geometric
    /// with ratio decay, direction uniform; extreme classes hop inward
    /// and the landing class is clamped into range.
    GeometricHop { p: f64, decay: f64 },
}

impl NoiseKind {
    /// Marginal probability that a cell's class changes.
    pub fn p(&self) -> f64 {
        match self {
            NoiseKind::AdjacentFlip { p } => *p,
            NoiseKind::GeometricHop { p, .. } => *p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(UepError::InvalidParameter {
                name: "p",
                message: format!("flip probability {p} is outside [0, 1]"),
            });
        }
        if let NoiseKind::GeometricHop { decay, .. } = self {
            if !decay.is_finite() || !(*decay > 0.0 && *decay < 1.0) {
                return Err(UepError::InvalidParameter {
                    name: "decay",
                    message: format!("hop decay {decay} is outside (0, 1)"),
                });
            }
        }
        Ok(())
    }
}

/// A noise kind plus the seed that makes its draws reproducible.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        self.kind.validate()
    }
}

/// Corrupt a class map cell by cell. Each cell's decision depends only on
/// (seed, image id, cell index), so results are order-independent and two
/// maps with equal geometry see the identical draw sequence.
pub fn simulate_classifier(truth: &ClassMap, noise: &NoiseModel) -> ClassMap {
    let mut out = truth.clone();
    if truth.m < 2 {
        return out;
    }
    let rng = CounterRng::new(noise.seed);
    let stream = stream_of(&truth.image_id);
    let last = (truth.m - 1) as i64;
    for (cell, class) in out.values.iter_mut().enumerate() {
        let c = *class as i64;
        let landed = match noise.kind {
            NoiseKind::AdjacentFlip { p } => {
                let u = rng.uniform(stream, cell as u64, 0);
                if u >= p {
                    c
                } else {
                    let down = if c == 0 {
                        false
                    } else if c == last {
                        true
                    } else {
                        u < 0.5 * p
                    };
                    if down { c - 1 } else { c + 1 }
                }
            }
            NoiseKind::GeometricHop { p, decay } => {
                if rng.uniform(stream, cell as u64, 0) >= p {
                    c
                } else {
                    let u = rng.uniform(stream, cell as u64, 1);
                    let h = 1 + ((1.0 - u).ln() / decay.ln()).floor() as i64;
                    let up = if c == 0 {
                        true
                    } else if c == last {
                        false
                    } else {
                        rng.uniform(stream, cell as u64, 2) < 0.5
                    };
                    (if up { c + h } else { c - h }).clamp(0, last)
                }
            }
        };
        *class = landed as u16;
    }
    out
}

/// Image-level counting error: MAE and root-mean-square error over the
/// per-image total differences.
pub fn evaluate_counts(preds: &[LocalCountMap], truths: &[LocalCountMap]) -> Result<(f64, f64)> {
    if preds.is_empty() {
        return Err(UepError::EmptyInput("evaluation set"));
    }
    if preds.len() != truths.len() {
        return Err(UepError::ShapeMismatch {
            message: format!("{} predictions for {} truth maps", preds.len(), truths.len()),
        });
    }
    let mut abs = KahanSum::default();
    let mut sq = KahanSum::default();
    for (pred, truth) in preds.iter().zip(truths) {
        if pred.image_id != truth.image_id || pred.cells() != truth.cells() {
            return Err(UepError::ShapeMismatch {
                message: format!(
                    "prediction {} with {} cells does not match truth {} with {} cells",
                    pred.image_id,
                    pred.cells(),
                    truth.image_id,
                    truth.cells()
                ),
            });
        }
        let err = truth.total() - pred.total();
        abs.add(err.abs());
        sq.add(err * err);
    }
    let n = preds.len() as f64;
    Ok((abs.value() / n, (sq.value() / n).sqrt()))
}

/// Fit a partition on a training collection with the named strategy.
pub fn fit_partition(
    t: &CountCollection,
    strategy: Strategy,
    m: usize,
    t_0: f64,
    epsilon: f64,
) -> Result<Partition> {
    match strategy {
        Strategy::Uep => partition_uep(t, m, t_0, epsilon, None).map(|(p, _)| p),
        Strategy::UniformLen => partition_uniform_len(t, m, t_0),
        Strategy::UniformNum => partition_uniform_num(t, m, t_0),
        Strategy::Explicit => Err(UepError::InvalidParameter {
            name: "strategy",
            message: "explicit borders are given, not fitted".into(),
        }),
    }
}

/// One evaluation image inside a comparison cell; every aggregate in the
/// cell recomputes from these rows.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComparisonImageRow {
    pub image_id: String,
    pub truth_total: f64,
    /// Decoded total after simulated classification.
    pub predicted_total: f64,
    /// Decoded total under perfect classification.
    pub disc_total: f64,
}

/// Aggregates for one strategy and proxy method combination.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComparisonCell {
    pub mae: f64,
    /// Root of the mean squared per-image error.
    pub mse: f64,
    /// Mean per-image |error| under perfect classification.
    pub mean_discretization: f64,
    /// Coefficient of variation of n_i*l_i over the fitted partition's
    /// non-background intervals, measured on the training collection.
    pub nl_cv: f64,
    pub per_image: Vec<ComparisonImageRow>,
}

/// A cell either carries results or records why its strategy could not fit.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CellOutcome {
    Feasible(ComparisonCell),
    Infeasible { reason: String },
}

impl CellOutcome {
    pub fn feasible(&self) -> Option<&ComparisonCell> {
        match self {
            CellOutcome::Feasible(cell) => Some(cell),
            CellOutcome::Infeasible { .. } => None,
        }
    }
}

/// Strategy-by-method grid of paired simulation results.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComparisonMatrix {
    pub strategies: Vec<Strategy>,
    pub methods: Vec<ProxyMethod>,
    /// cells[i][j] pairs strategies[i] with methods[j].
    pub cells: Vec<Vec<CellOutcome>>,
}

impl ComparisonMatrix {
    pub fn cell(&self, strategy: Strategy, method: ProxyMethod) -> Option<&CellOutcome> {
        let i = self.strategies.iter().position(|&s| s == strategy)?;
        let j = self.methods.iter().position(|&m| m == method)?;
        Some(&self.cells[i][j])
    }
}

fn cell_report(
    t_train: &CountCollection,
    scenes_eval: &[LocalCountMap],
    partition: &Partition,
    method: ProxyMethod,
    noise: &NoiseModel,
    nl_cv: f64,
) -> Result<ComparisonCell> {
    let proxies = fit_proxies(t_train, partition, method)?;
    let mut per_image = Vec::with_capacity(scenes_eval.len());
    let mut abs = KahanSum::default();
    let mut sq = KahanSum::default();
    let mut disc = KahanSum::default();
    for truth in scenes_eval {
        let encoded = encode_class_map(truth, partition)?.map;
        let noisy = simulate_classifier(&encoded, noise);
        let predicted = decode_count_map(&noisy, &proxies)?;
        let clean = decode_count_map(&encoded, &proxies)?;
        let row = ComparisonImageRow {
            image_id: truth.image_id.clone(),
            truth_total: truth.total(),
            predicted_total: predicted.total(),
            disc_total: clean.total(),
        };
        let err = row.truth_total - row.predicted_total;
        abs.add(err.abs());
        sq.add(err * err);
        disc.add((row.truth_total - row.disc_total).abs());
        per_image.push(row);
    }
    let n = scenes_eval.len() as f64;
    Ok(ComparisonCell {
        mae: abs.value() / n,
        mse: (sq.value() / n).sqrt(),
        mean_discretization: disc.value() / n,
        nl_cv,
        per_image,
    })
}

/// Run every strategy-method combination over the same evaluation scenes
/// and the same noise seed, so differences between cells come only from
/// the partition and proxy choices. A strategy that cannot fit marks its
/// whole row infeasible and the run continues.
pub fn compare_strategies(
    t_train: &CountCollection,
    scenes_eval: &[LocalCountMap],
    m: usize,
    noise: &NoiseModel,
    strategies: &[Strategy],
    methods: &[ProxyMethod],
    t_0: f64,
    epsilon: f64,
) -> Result<ComparisonMatrix> {
    noise.validate()?;
    if scenes_eval.is_empty() {
        return Err(UepError::EmptyInput("evaluation set"));
    }
    if strategies.is_empty() || methods.is_empty() {
        return Err(UepError::EmptyInput("strategy and method lists"));
    }
    let mut cells = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let partition = match fit_partition(t_train, strategy, m, t_0, epsilon) {
            Ok(p) => p,
            Err(err) => {
                let reason = err.to_string();
                cells.push(vec![
                    CellOutcome::Infeasible { reason };
                    methods.len()
                ]);
                continue;
            }
        };
        let nl_cv = interval_stats(t_train, &partition)?.nl_cv();
        let row = methods
            .iter()
            .map(|&method| {
                match cell_report(t_train, scenes_eval, &partition, method, noise, nl_cv) {
                    Ok(cell) => CellOutcome::Feasible(cell),
                    Err(err) => CellOutcome::Infeasible { reason: err.to_string() },
                }
            })
            .collect();
        cells.push(row);
    }
    Ok(ComparisonMatrix {
        strategies: strategies.to_vec(),
        methods: methods.to_vec(),
        cells,
    })
}

/// Single-head against interleaved two-head decoding under the same noise.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IphAblationReport {
    pub single_mae: f64,
    pub single_mse: f64,
    pub iph_mae: f64,
    pub iph_mse: f64,
    /// Fraction of cells whose noisy head0 class equals the true one.
    pub head0_correct: f64,
    pub head1_correct: f64,
    /// Fraction of cells correct in both heads at once.
    pub both_correct: f64,
    pub cells: usize,
    /// True when head1 reused head0's partition and noise stream.
    pub shared_noise: bool,
}

/// Compare single-head decoding with two-head averaging. With
/// `shared_noise` false the second head gets the interleaved partition and
/// an independent noise stream at the same marginal p; with it true both
/// heads share one partition and one stream, so averaging changes nothing.
pub fn iph_ablation(
    t_train: &CountCollection,
    scenes_eval: &[LocalCountMap],
    m: usize,
    noise: &NoiseModel,
    t_0: f64,
    epsilon: f64,
    shared_noise: bool,
) -> Result<IphAblationReport> {
    noise.validate()?;
    if scenes_eval.is_empty() {
        return Err(UepError::EmptyInput("evaluation set"));
    }
    let (partition, _) = partition_uep(t_train, m, t_0, epsilon, None)?;
    let proxies = fit_proxies(t_train, &partition, ProxyMethod::Mcp)?;
    let head0 = PredictionHead {
        partition,
        proxies,
    };
    let pair = if shared_noise {
        IphPair {
            head0: head0.clone(),
            head1: head0,
        }
    } else {
        derive_iph(t_train, &head0.partition, &head0.proxies)?
    };
    let head1_noise = if shared_noise {
        *noise
    } else {
        NoiseModel {
            kind: noise.kind,
            seed: noise.seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
        }
    };
    let mut single_abs = KahanSum::default();
    let mut single_sq = KahanSum::default();
    let mut iph_abs = KahanSum::default();
    let mut iph_sq = KahanSum::default();
    let mut head0_ok = 0usize;
    let mut head1_ok = 0usize;
    let mut both_ok = 0usize;
    let mut cells = 0usize;
    for truth in scenes_eval {
        let enc0 = encode_class_map(truth, &pair.head0.partition)?.map;
        let noisy0 = simulate_classifier(&enc0, noise);
        let enc1 = encode_class_map(truth, &pair.head1.partition)?.map;
        let noisy1 = simulate_classifier(&enc1, &head1_noise);
        let single = decode_count_map(&noisy0, &pair.head0.proxies)?;
        let averaged = decode_iph(&noisy0, &noisy1, &pair)?;
        for i in 0..enc0.values.len() {
            let ok0 = enc0.values[i] == noisy0.values[i];
            let ok1 = enc1.values[i] == noisy1.values[i];
            head0_ok += ok0 as usize;
            head1_ok += ok1 as usize;
            both_ok += (ok0 && ok1) as usize;
        }
        cells += enc0.values.len();
        let err_single = truth.total() - single.total();
        let err_iph = truth.total() - averaged.total();
        single_abs.add(err_single.abs());
        single_sq.add(err_single * err_single);
        iph_abs.add(err_iph.abs());
        iph_sq.add(err_iph * err_iph);
    }
    let n = scenes_eval.len() as f64;
    let denom = cells.max(1) as f64;
    Ok(IphAblationReport {
        single_mae: single_abs.value() / n,
        single_mse: (single_sq.value() / n).sqrt(),
        iph_mae: iph_abs.value() / n,
        iph_mse: (iph_sq.value() / n).sqrt(),
        head0_correct: head0_ok as f64 / denom,
        head1_correct: head1_ok as f64 / denom,
        both_correct: both_ok as f64 / denom,
        cells,
        shared_noise,
    })
}
