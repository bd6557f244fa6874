//! CSV report emission. Floats are written in shortest round-trip form,
//! so sums recomputed from a report's rows reproduce its stored aggregates
//! bit for bit.

use std::path::Path;

use crate::error::Result;
use crate::partition::IntervalStats;
use crate::quantize::ErrorReport;
use crate::simulate::{CellOutcome, ComparisonMatrix};

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per interval, then one summary row carrying the aggregates.
pub fn save_error_report_csv(path: &Path, report: &ErrorReport) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record([
        "kind",
        "index",
        "n",
        "length",
        "nl",
        "class_mae",
        "signed_sum",
        "mae",
        "mse",
        "total_signed",
        "pooled_signed",
        "clamped",
    ])?;
    for row in &report.per_interval {
        out.write_record([
            "interval".to_string(),
            row.index.to_string(),
            row.n.to_string(),
            row.length.to_string(),
            row.nl.to_string(),
            opt(row.class_mae),
            row.signed_sum.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    out.write_record([
        "summary".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        report.mae.to_string(),
        report.mse.to_string(),
        report.total_signed.to_string(),
        report.pooled_signed.to_string(),
        report.clamped.to_string(),
    ])?;
    out.flush()?;
    Ok(())
}

/// Two files: aggregate cells, and the per-image rows every aggregate
/// recomputes from.
pub fn save_comparison_csv(
    cells_path: &Path,
    per_image_path: &Path,
    matrix: &ComparisonMatrix,
) -> Result<()> {
    let mut cells = csv::Writer::from_path(cells_path)?;
    cells.write_record([
        "strategy",
        "method",
        "status",
        "mae",
        "mse",
        "mean_discretization",
        "nl_cv",
        "reason",
    ])?;
    let mut rows = csv::Writer::from_path(per_image_path)?;
    rows.write_record([
        "strategy",
        "method",
        "image_id",
        "truth_total",
        "predicted_total",
        "disc_total",
    ])?;
    for (i, strategy) in matrix.strategies.iter().enumerate() {
        for (j, method) in matrix.methods.iter().enumerate() {
            match &matrix.cells[i][j] {
                CellOutcome::Feasible(cell) => {
                    cells.write_record([
                        strategy.to_string(),
                        method.to_string(),
                        "feasible".to_string(),
                        cell.mae.to_string(),
                        cell.mse.to_string(),
                        cell.mean_discretization.to_string(),
                        cell.nl_cv.to_string(),
                        String::new(),
                    ])?;
                    for row in &cell.per_image {
                        rows.write_record([
                            strategy.to_string(),
                            method.to_string(),
                            row.image_id.clone(),
                            row.truth_total.to_string(),
                            row.predicted_total.to_string(),
                            row.disc_total.to_string(),
                        ])?;
                    }
                }
                CellOutcome::Infeasible { reason } => {
                    cells.write_record([
                        strategy.to_string(),
                        method.to_string(),
                        "infeasible".to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        reason.clone(),
                    ])?;
                }
            }
        }
    }
    cells.flush()?;
    rows.flush()?;
    Ok(())
}

/// Per-interval occupancy rows for plotting.
pub fn save_interval_stats_csv(path: &Path, stats: &IntervalStats) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["index", "n", "length", "nl", "mean", "min", "max"])?;
    for (index, row) in stats.rows.iter().enumerate() {
        out.write_record([
            index.to_string(),
            row.n.to_string(),
            row.length.to_string(),
            row.nl.to_string(),
            opt(row.mean),
            opt(row.min),
            opt(row.max),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{interval_stats, partition_uep, Partition, Strategy};
    use crate::proxy::{compute_midpoint_proxies, ProxyMethod};
    use crate::quantize::discretization_error;
    use crate::simulate::{compare_strategies, NoiseKind, NoiseModel};
    use crate::stats::KahanSum;
    use crate::testutil::log_normal;

    fn maps_from(t: &crate::density::CountCollection, images: usize) -> Vec<crate::density::LocalCountMap> {
        let per = t.len() / images;
        t.counts()
            .chunks(per)
            .enumerate()
            .map(|(i, c)| crate::density::LocalCountMap {
                image_id: format!("img{i}"),
                patch_size: 8,
                height: 1,
                width: c.len(),
                values: c.to_vec(),
            })
            .collect()
    }

    #[test]
    fn error_report_csv_columns_match_json_aggregates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let t = log_normal(3000, 17, 0.0, 1.0);
        let eps = 1e-6 * t.len() as f64 * t.max_count();
        let (p, _) = partition_uep(&t, 8, 1.6e-4, eps, None).unwrap();
        let proxies = compute_midpoint_proxies(&p);
        let report = discretization_error(&maps_from(&t, 3), &p, &proxies).unwrap();
        save_error_report_csv(&path, &report).unwrap();

        let mut reader = csv::Reader::from_path(&path).unwrap();
        let mut signed = KahanSum::default();
        let mut interval_rows = 0usize;
        let mut summary: Option<csv::StringRecord> = None;
        for record in reader.records() {
            let record = record.unwrap();
            match record.get(0).unwrap() {
                "interval" => {
                    interval_rows += 1;
                    signed.add(record.get(6).unwrap().parse::<f64>().unwrap());
                }
                "summary" => summary = Some(record.clone()),
                other => panic!("unexpected row kind {other}"),
            }
        }
        assert_eq!(interval_rows, p.m());
        assert_eq!(signed.value(), report.total_signed);
        let summary = summary.unwrap();
        assert_eq!(summary.get(7).unwrap().parse::<f64>().unwrap(), report.mae);
        assert_eq!(summary.get(8).unwrap().parse::<f64>().unwrap(), report.mse);
        assert_eq!(
            summary.get(10).unwrap().parse::<f64>().unwrap(),
            report.pooled_signed
        );
        assert_eq!(
            summary.get(11).unwrap().parse::<usize>().unwrap(),
            report.clamped
        );
    }

    #[test]
    fn comparison_cells_recompute_from_per_image_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cells_path = dir.path().join("cells.csv");
        let rows_path = dir.path().join("per_image.csv");
        let t = log_normal(4000, 19, 0.0, 1.0);
        let eps = 1e-6 * t.len() as f64 * t.max_count();
        let noise = NoiseModel {
            kind: NoiseKind::AdjacentFlip { p: 0.1 },
            seed: 5,
        };
        let matrix = compare_strategies(
            &t,
            &maps_from(&t, 4),
            8,
            &noise,
            &[Strategy::Uep, Strategy::UniformLen],
            &[ProxyMethod::Mcp, ProxyMethod::Midpoint],
            1.6e-4,
            eps,
        )
        .unwrap();
        save_comparison_csv(&cells_path, &rows_path, &matrix).unwrap();

        let mut stored = std::collections::HashMap::new();
        let mut reader = csv::Reader::from_path(&cells_path).unwrap();
        for record in reader.records() {
            let record = record.unwrap();
            assert_eq!(record.get(2).unwrap(), "feasible");
            stored.insert(
                (record.get(0).unwrap().to_string(), record.get(1).unwrap().to_string()),
                record.get(3).unwrap().parse::<f64>().unwrap(),
            );
        }
        assert_eq!(stored.len(), 4);

        let mut acc: std::collections::HashMap<(String, String), (KahanSum, usize)> =
            std::collections::HashMap::new();
        let mut reader = csv::Reader::from_path(&rows_path).unwrap();
        for record in reader.records() {
            let record = record.unwrap();
            let key = (
                record.get(0).unwrap().to_string(),
                record.get(1).unwrap().to_string(),
            );
            let truth: f64 = record.get(3).unwrap().parse().unwrap();
            let pred: f64 = record.get(4).unwrap().parse().unwrap();
            let entry = acc.entry(key).or_insert((KahanSum::default(), 0));
            entry.0.add((truth - pred).abs());
            entry.1 += 1;
        }
        for (key, (sum, n)) in acc {
            let recomputed = sum.value() / n as f64;
            assert_eq!(recomputed, stored[&key], "cell {key:?}");
        }
    }

    #[test]
    fn infeasible_cells_carry_their_reason() {
        let dir = tempfile::tempdir().unwrap();
        let cells_path = dir.path().join("cells.csv");
        let rows_path = dir.path().join("per_image.csv");
        let t = crate::density::CountCollection::new(vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        let maps = vec![crate::density::LocalCountMap {
            image_id: "img0".into(),
            patch_size: 8,
            height: 1,
            width: 2,
            values: vec![1.0, 2.0],
        }];
        let noise = NoiseModel {
            kind: NoiseKind::AdjacentFlip { p: 0.1 },
            seed: 5,
        };
        let matrix = compare_strategies(
            &t,
            &maps,
            6,
            &noise,
            &[Strategy::Uep],
            &[ProxyMethod::Mcp],
            1e-2,
            1e-6,
        )
        .unwrap();
        save_comparison_csv(&cells_path, &rows_path, &matrix).unwrap();
        let mut reader = csv::Reader::from_path(&cells_path).unwrap();
        let record = reader.records().next().unwrap().unwrap();
        assert_eq!(record.get(2).unwrap(), "infeasible");
        assert!(!record.get(7).unwrap().is_empty());
    }

    #[test]
    fn interval_stats_rows_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats.csv");
        let t = log_normal(1000, 23, 0.0, 1.0);
        let p = Partition::from_borders(
            vec![0.0, 1.6e-4, 0.5, t.max_count()],
            Strategy::Explicit,
        )
        .unwrap();
        let stats = interval_stats(&t, &p).unwrap();
        save_interval_stats_csv(&path, &stats).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let mut rows = 0usize;
        for (index, record) in reader.records().enumerate() {
            let record = record.unwrap();
            rows += 1;
            assert_eq!(record.get(0).unwrap().parse::<usize>().unwrap(), index);
            let row = &stats.rows[index];
            assert_eq!(record.get(1).unwrap().parse::<usize>().unwrap(), row.n);
            assert_eq!(record.get(3).unwrap().parse::<f64>().unwrap(), row.nl);
            match row.mean {
                Some(mean) => assert_eq!(record.get(4).unwrap().parse::<f64>().unwrap(), mean),
                None => assert!(record.get(4).unwrap().is_empty()),
            }
        }
        assert_eq!(rows, stats.rows.len());
    }
}
