//! Versioned JSON documents. Every document carries a "format" tag; a
//! reader rejects any tag it was not built for. Loaded values pass through
//! the same constructors as freshly computed ones, so invalid files cannot
//! smuggle in broken invariants.

use std::path::{Path, PathBuf};

use crate::density::{CountCollection, KernelSpec};
use crate::error::{Result, UepError};
use crate::io::{read_tagged_json, write_json};
use crate::partition::{BisectionState, Partition, Strategy};
use crate::proxy::{IphPair, PredictionHead, ProxyMethod, ProxyTable};
use crate::quantize::ErrorReport;
use crate::simulate::{ComparisonMatrix, NoiseModel};

pub const PARTITION_FORMAT: &str = "uep-partition/1";
pub const PROXIES_FORMAT: &str = "uep-proxies/1";
pub const IPH_FORMAT: &str = "uep-iph/1";
pub const COUNTS_FORMAT: &str = "uep-counts/1";
pub const ERROR_REPORT_FORMAT: &str = "uep-error-report/1";
pub const COMPARISON_FORMAT: &str = "uep-comparison/1";
pub const MANIFEST_FORMAT: &str = "uep-manifest/1";

/// A partition plus the search metadata worth keeping on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionRecord {
    pub partition: Partition,
    /// Bisection tolerance, present when the partition was searched.
    pub epsilon: Option<f64>,
    /// Product target whose sweep produced the borders.
    pub final_l_bar: Option<f64>,
}

impl PartitionRecord {
    pub fn bare(partition: Partition) -> Self {
        Self {
            partition,
            epsilon: None,
            final_l_bar: None,
        }
    }

    pub fn from_search(partition: Partition, state: &BisectionState) -> Self {
        Self {
            partition,
            epsilon: Some(state.epsilon),
            final_l_bar: Some(state.candidate),
        }
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct PartitionBody {
    strategy: Strategy,
    m: usize,
    t0: f64,
    borders: Vec<f64>,
    t_max: f64,
    epsilon: Option<f64>,
    final_l_bar: Option<f64>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct PartitionDoc {
    format: String,
    #[serde(flatten)]
    body: PartitionBody,
}

fn partition_to_body(record: &PartitionRecord) -> PartitionBody {
    let p = &record.partition;
    PartitionBody {
        strategy: p.strategy(),
        m: p.m(),
        t0: p.t0(),
        borders: p.borders().to_vec(),
        t_max: p.t_max(),
        epsilon: record.epsilon,
        final_l_bar: record.final_l_bar,
    }
}

fn body_to_partition(body: PartitionBody) -> Result<PartitionRecord> {
    let partition = Partition::from_borders(body.borders, body.strategy)?;
    if body.m != partition.m() || body.t0 != partition.t0() || body.t_max != partition.t_max() {
        return Err(UepError::ShapeMismatch {
            message: format!(
                "document says m {}, t0 {}, t_max {}, the borders say m {}, t0 {}, t_max {}",
                body.m,
                body.t0,
                body.t_max,
                partition.m(),
                partition.t0(),
                partition.t_max()
            ),
        });
    }
    Ok(PartitionRecord {
        partition,
        epsilon: body.epsilon,
        final_l_bar: body.final_l_bar,
    })
}

pub fn save_partition(path: &Path, record: &PartitionRecord) -> Result<()> {
    write_json(
        path,
        &PartitionDoc {
            format: PARTITION_FORMAT.to_string(),
            body: partition_to_body(record),
        },
    )
}

pub fn load_partition(path: &Path) -> Result<PartitionRecord> {
    let doc: PartitionDoc = read_tagged_json(path, PARTITION_FORMAT)?;
    body_to_partition(doc.body)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ProxyBody {
    method: ProxyMethod,
    proxies: Vec<f64>,
    empty_flags: Vec<bool>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ProxyDoc {
    format: String,
    #[serde(flatten)]
    body: ProxyBody,
}

fn proxies_to_body(table: &ProxyTable) -> ProxyBody {
    ProxyBody {
        method: table.method(),
        proxies: table.proxies().to_vec(),
        empty_flags: table.empty_flags().to_vec(),
    }
}

fn body_to_proxies(body: ProxyBody) -> Result<ProxyTable> {
    ProxyTable::new(body.method, body.proxies, body.empty_flags)
}

pub fn save_proxies(path: &Path, table: &ProxyTable) -> Result<()> {
    write_json(
        path,
        &ProxyDoc {
            format: PROXIES_FORMAT.to_string(),
            body: proxies_to_body(table),
        },
    )
}

pub fn load_proxies(path: &Path) -> Result<ProxyTable> {
    let doc: ProxyDoc = read_tagged_json(path, PROXIES_FORMAT)?;
    body_to_proxies(doc.body)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct HeadBody {
    partition: PartitionBody,
    proxies: ProxyBody,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct IphDoc {
    format: String,
    head0: HeadBody,
    head1: HeadBody,
}

fn head_to_body(head: &PredictionHead) -> HeadBody {
    HeadBody {
        partition: partition_to_body(&PartitionRecord::bare(head.partition.clone())),
        proxies: proxies_to_body(&head.proxies),
    }
}

fn body_to_head(body: HeadBody) -> Result<PredictionHead> {
    let partition = body_to_partition(body.partition)?.partition;
    let proxies = body_to_proxies(body.proxies)?;
    if proxies.len() != partition.m() {
        return Err(UepError::ShapeMismatch {
            message: format!(
                "{} proxies for a head with {} intervals",
                proxies.len(),
                partition.m()
            ),
        });
    }
    Ok(PredictionHead { partition, proxies })
}

pub fn save_iph(path: &Path, pair: &IphPair) -> Result<()> {
    write_json(
        path,
        &IphDoc {
            format: IPH_FORMAT.to_string(),
            head0: head_to_body(&pair.head0),
            head1: head_to_body(&pair.head1),
        },
    )
}

pub fn load_iph(path: &Path) -> Result<IphPair> {
    let doc: IphDoc = read_tagged_json(path, IPH_FORMAT)?;
    Ok(IphPair {
        head0: body_to_head(doc.head0)?,
        head1: body_to_head(doc.head1)?,
    })
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CountsDoc {
    format: String,
    counts: Vec<f64>,
}

pub fn save_counts(path: &Path, t: &CountCollection) -> Result<()> {
    write_json(
        path,
        &CountsDoc {
            format: COUNTS_FORMAT.to_string(),
            counts: t.counts().to_vec(),
        },
    )
}

pub fn load_counts(path: &Path) -> Result<CountCollection> {
    let doc: CountsDoc = read_tagged_json(path, COUNTS_FORMAT)?;
    CountCollection::new(doc.counts)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ErrorReportDoc {
    format: String,
    #[serde(flatten)]
    report: ErrorReport,
}

pub fn save_error_report(path: &Path, report: &ErrorReport) -> Result<()> {
    write_json(
        path,
        &ErrorReportDoc {
            format: ERROR_REPORT_FORMAT.to_string(),
            report: report.clone(),
        },
    )
}

pub fn load_error_report(path: &Path) -> Result<ErrorReport> {
    let doc: ErrorReportDoc = read_tagged_json(path, ERROR_REPORT_FORMAT)?;
    Ok(doc.report)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ComparisonDoc {
    format: String,
    #[serde(flatten)]
    matrix: ComparisonMatrix,
}

pub fn save_comparison(path: &Path, matrix: &ComparisonMatrix) -> Result<()> {
    write_json(
        path,
        &ComparisonDoc {
            format: COMPARISON_FORMAT.to_string(),
            matrix: matrix.clone(),
        },
    )
}

pub fn load_comparison(path: &Path) -> Result<ComparisonMatrix> {
    let doc: ComparisonDoc = read_tagged_json(path, COMPARISON_FORMAT)?;
    Ok(doc.matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSplit {
    Train,
    Eval,
}

/// Names a dataset: its annotation files plus the kernel and patch size
/// used to turn them into counts.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub split: DatasetSplit,
    /// Annotation files; relative paths resolve against the manifest's
    /// directory.
    pub annotations: Vec<PathBuf>,
    pub kernel: KernelSpec,
    pub patch_size: usize,
    #[serde(default)]
    pub notes: String,
}

impl DatasetManifest {
    pub fn resolved_annotations(&self, base: &Path) -> Vec<PathBuf> {
        self.annotations.iter().map(|p| base.join(p)).collect()
    }

    pub fn validate(&self, base: &Path) -> Result<()> {
        if self.patch_size < 1 {
            return Err(UepError::InvalidParameter {
                name: "patch_size",
                message: "must be at least 1".into(),
            });
        }
        self.kernel.validate()?;
        for path in self.resolved_annotations(base) {
            if !path.is_file() {
                return Err(UepError::MissingFile(path.display().to_string()));
            }
        }
        Ok(())
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ManifestDoc {
    format: String,
    #[serde(flatten)]
    manifest: DatasetManifest,
}

pub fn save_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    write_json(
        path,
        &ManifestDoc {
            format: MANIFEST_FORMAT.to_string(),
            manifest: manifest.clone(),
        },
    )
}

/// Load and validate a manifest; referenced files must exist.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let doc: ManifestDoc = read_tagged_json(path, MANIFEST_FORMAT)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    doc.manifest.validate(base)?;
    Ok(doc.manifest)
}

/// One run's hyperparameters, shared by the pipeline subcommands.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub m: usize,
    pub t_0: f64,
    pub epsilon: f64,
    pub strategy: Strategy,
    pub proxy_method: ProxyMethod,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(UepError::InvalidParameter {
                name: "m",
                message: format!("need at least 2 intervals, got {}", self.m),
            });
        }
        if !self.t_0.is_finite() || self.t_0 <= 0.0 {
            return Err(UepError::InvalidParameter {
                name: "t0",
                message: format!("must be a positive finite number, got {}", self.t_0),
            });
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(UepError::InvalidParameter {
                name: "epsilon",
                message: format!("must be a positive finite number, got {}", self.epsilon),
            });
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::partition_uep;
    use crate::proxy::{compute_mcp, derive_iph};
    use crate::quantize::discretization_error;
    use crate::simulate::{compare_strategies, NoiseKind};
    use crate::testutil::{log_normal, seven_count_fixture};
    use std::fs;

    #[test]
    fn partition_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partition.json");
        let t = log_normal(5000, 5, 0.0, 1.0);
        let eps = 1e-6 * t.len() as f64 * t.max_count();
        let (p, state) = partition_uep(&t, 25, 1.6e-4, eps, None).unwrap();
        let record = PartitionRecord::from_search(p, &state);
        save_partition(&path, &record).unwrap();
        let loaded = load_partition(&path).unwrap();
        assert_eq!(loaded, record);
        assert_eq!(loaded.partition.borders(), record.partition.borders());
    }

    #[test]
    fn bare_partition_round_trips_without_search_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partition.json");
        let p = Partition::from_borders(vec![0.0, 0.1, 1.0 / 3.0, 2.0], Strategy::Explicit).unwrap();
        save_partition(&path, &PartitionRecord::bare(p.clone())).unwrap();
        let loaded = load_partition(&path).unwrap();
        assert_eq!(loaded.partition, p);
        assert_eq!(loaded.epsilon, None);
        assert_eq!(loaded.final_l_bar, None);
    }

    #[test]
    fn future_partition_versions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partition.json");
        fs::write(
            &path,
            r#"{"format":"uep-partition/2","strategy":"uep","m":2,"t0":0.1,"borders":[0.0,0.1,1.0],"t_max":1.0,"epsilon":null,"final_l_bar":null}"#,
        )
        .unwrap();
        match load_partition(&path) {
            Err(UepError::VersionMismatch { found, expected }) => {
                assert_eq!(found, "uep-partition/2");
                assert_eq!(expected, PARTITION_FORMAT);
            }
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }

    #[test]
    fn tampered_partition_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partition.json");
        fs::write(
            &path,
            r#"{"format":"uep-partition/1","strategy":"explicit","m":3,"t0":0.1,"borders":[0.0,0.1,1.0],"t_max":1.0,"epsilon":null,"final_l_bar":null}"#,
        )
        .unwrap();
        assert!(matches!(
            load_partition(&path),
            Err(UepError::ShapeMismatch { .. })
        ));
        fs::write(
            &path,
            r#"{"format":"uep-partition/1","strategy":"explicit","m":2,"t0":0.1,"borders":[0.0,0.1,0.1],"t_max":0.1,"epsilon":null,"final_l_bar":null}"#,
        )
        .unwrap();
        assert!(matches!(
            load_partition(&path),
            Err(UepError::BorderCollision { .. })
        ));
    }

    #[test]
    fn proxies_round_trip_and_reject_other_formats() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proxies.json");
        let t = seven_count_fixture();
        let p = Partition::from_borders(vec![0.0, 1e-4, 0.4, 3.2], Strategy::Explicit).unwrap();
        let table = compute_mcp(&t, &p).unwrap();
        save_proxies(&path, &table).unwrap();
        assert_eq!(load_proxies(&path).unwrap(), table);
        assert!(matches!(
            load_partition(&path),
            Err(UepError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn iph_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("iph.json");
        let t = log_normal(2000, 7, 0.0, 1.0);
        let eps = 1e-6 * t.len() as f64 * t.max_count();
        let (p, _) = partition_uep(&t, 8, 1.6e-4, eps, None).unwrap();
        let proxies = compute_mcp(&t, &p).unwrap();
        let pair = derive_iph(&t, &p, &proxies).unwrap();
        save_iph(&path, &pair).unwrap();
        assert_eq!(load_iph(&path).unwrap(), pair);
    }

    #[test]
    fn counts_round_trip_and_sorted_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("counts.json");
        let t = log_normal(500, 11, 0.0, 1.0);
        save_counts(&path, &t).unwrap();
        assert_eq!(load_counts(&path).unwrap(), t);
        fs::write(&path, r#"{"format":"uep-counts/1","counts":[3.0,1.0,2.0]}"#).unwrap();
        assert_eq!(load_counts(&path).unwrap().counts(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn error_report_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let t = seven_count_fixture();
        let p = Partition::from_borders(vec![0.0, 1e-4, 0.4, 3.2], Strategy::Explicit).unwrap();
        let proxies = compute_mcp(&t, &p).unwrap();
        let maps = vec![crate::density::LocalCountMap {
            image_id: "img".into(),
            patch_size: 8,
            height: 1,
            width: t.len(),
            values: t.counts().to_vec(),
        }];
        let report = discretization_error(&maps, &p, &proxies).unwrap();
        save_error_report(&path, &report).unwrap();
        assert_eq!(load_error_report(&path).unwrap(), report);
    }

    #[test]
    fn comparison_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("comparison.json");
        let t = log_normal(2000, 13, 0.0, 1.0);
        let maps = vec![crate::density::LocalCountMap {
            image_id: "img0".into(),
            patch_size: 8,
            height: 1,
            width: t.len(),
            values: t.counts().to_vec(),
        }];
        let eps = 1e-6 * t.len() as f64 * t.max_count();
        let noise = NoiseModel {
            kind: NoiseKind::AdjacentFlip { p: 0.1 },
            seed: 3,
        };
        let matrix = compare_strategies(
            &t,
            &maps,
            6,
            &noise,
            &[Strategy::Uep, Strategy::UniformLen],
            &[ProxyMethod::Mcp, ProxyMethod::Midpoint],
            1.6e-4,
            eps,
        )
        .unwrap();
        save_comparison(&path, &matrix).unwrap();
        assert_eq!(load_comparison(&path).unwrap(), matrix);
    }

    #[test]
    fn manifest_round_trip_checks_referenced_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        fs::write(dir.path().join("train.json"), "[]").unwrap();
        let manifest = DatasetManifest {
            name: "desk".into(),
            split: DatasetSplit::Train,
            annotations: vec![PathBuf::from("train.json")],
            kernel: KernelSpec::fixed(4.0),
            patch_size: 8,
            notes: String::new(),
        };
        save_manifest(&path, &manifest).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), manifest);
        fs::remove_file(dir.path().join("train.json")).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(UepError::MissingFile(_))
        ));
    }

    #[test]
    fn manifest_rejects_zero_patch_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let manifest = DatasetManifest {
            name: "desk".into(),
            split: DatasetSplit::Eval,
            annotations: vec![],
            kernel: KernelSpec::fixed(4.0),
            patch_size: 0,
            notes: String::new(),
        };
        save_manifest(&path, &manifest).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(UepError::InvalidParameter { name: "patch_size", .. })
        ));
    }

    #[test]
    fn run_config_validation() {
        let good = RunConfig {
            m: 25,
            t_0: 1.6e-4,
            epsilon: 1e-3,
            strategy: Strategy::Uep,
            proxy_method: ProxyMethod::Mcp,
            noise: None,
            seed: 0,
            out_dir: PathBuf::from("out"),
        };
        good.validate().unwrap();
        let mut bad = good.clone();
        bad.m = 1;
        assert!(matches!(
            bad.validate(),
            Err(UepError::InvalidParameter { name: "m", .. })
        ));
        let mut bad = good.clone();
        bad.t_0 = 0.0;
        assert!(matches!(
            bad.validate(),
            Err(UepError::InvalidParameter { name: "t0", .. })
        ));
        let mut bad = good.clone();
        bad.epsilon = f64::NAN;
        assert!(matches!(
            bad.validate(),
            Err(UepError::InvalidParameter { name: "epsilon", .. })
        ));
        let mut bad = good;
        bad.noise = Some(NoiseModel {
            kind: NoiseKind::AdjacentFlip { p: 1.5 },
            seed: 0,
        });
        assert!(matches!(
            bad.validate(),
            Err(UepError::InvalidParameter { name: "p", .. })
        ));
    }
}
