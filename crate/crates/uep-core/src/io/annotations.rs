//! Point-annotation files: a JSON document per dataset, or CSV point rows
//! paired with a dimensions sidecar.

use std::collections::HashMap;
use std::path::Path;

use crate::density::PointAnnotation;
use crate::error::{Result, UepError};
use crate::io::{read_json, write_json};

fn check(ann: &PointAnnotation) -> Result<()> {
    if ann.width == 0 || ann.height == 0 {
        return Err(UepError::InvalidParameter {
            name: "dimensions",
            message: format!("image {} has zero width or height", ann.image_id),
        });
    }
    ann.validate()
}

/// Load a JSON array of annotations and validate every point.
pub fn load_annotations_json(path: &Path) -> Result<Vec<PointAnnotation>> {
    let list: Vec<PointAnnotation> = read_json(path)?;
    for ann in &list {
        check(ann)?;
    }
    Ok(list)
}

pub fn save_annotations_json(path: &Path, list: &[PointAnnotation]) -> Result<()> {
    write_json(path, &list)
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> UepError {
    UepError::MalformedRow {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn row_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    index: usize,
    what: &str,
) -> Result<T> {
    let raw = record.get(index).ok_or_else(|| {
        malformed(path, row_line(record), format!("missing {what} field"))
    })?;
    raw.trim().parse().map_err(|_| {
        malformed(
            path,
            row_line(record),
            format!("cannot parse {what} from {raw:?}"),
        )
    })
}

fn read_rows(path: &Path, fields: usize) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != fields {
            return Err(malformed(
                path,
                row_line(&record),
                format!("expected {fields} fields, found {}", record.len()),
            ));
        }
        rows.push(record);
    }
    Ok(rows)
}

/// Load point rows (image_id,x,y) against a dimensions sidecar
/// (image_id,width,height). The sidecar defines the image set and its
/// order; images without points become empty annotations.
pub fn load_annotations_csv(points: &Path, dims: &Path) -> Result<Vec<PointAnnotation>> {
    let mut list = Vec::new();
    let mut index_of: HashMap<String, usize> = HashMap::new();
    for record in read_rows(dims, 3)? {
        let image_id = record.get(0).unwrap().to_string();
        let width: u32 = parse_field(dims, &record, 1, "width")?;
        let height: u32 = parse_field(dims, &record, 2, "height")?;
        if index_of.contains_key(&image_id) {
            return Err(malformed(
                dims,
                row_line(&record),
                format!("duplicate dimensions for image {image_id}"),
            ));
        }
        index_of.insert(image_id.clone(), list.len());
        list.push(PointAnnotation {
            image_id,
            width,
            height,
            points: Vec::new(),
        });
    }
    for record in read_rows(points, 3)? {
        let image_id = record.get(0).unwrap();
        let x: f64 = parse_field(points, &record, 1, "x")?;
        let y: f64 = parse_field(points, &record, 2, "y")?;
        let &at = index_of.get(image_id).ok_or_else(|| {
            malformed(
                points,
                row_line(&record),
                format!("image {image_id} has no dimensions row"),
            )
        })?;
        list[at].points.push((x, y));
    }
    for ann in &list {
        check(ann)?;
    }
    Ok(list)
}

/// Write the two CSV files consumed by [`load_annotations_csv`].
pub fn save_annotations_csv(
    points: &Path,
    dims: &Path,
    list: &[PointAnnotation],
) -> Result<()> {
    let mut dim_rows = csv::WriterBuilder::new().has_headers(false).from_path(dims)?;
    for ann in list {
        dim_rows.write_record([
            ann.image_id.as_str(),
            &ann.width.to_string(),
            &ann.height.to_string(),
        ])?;
    }
    dim_rows.flush()?;
    let mut point_rows = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(points)?;
    for ann in list {
        for &(x, y) in &ann.points {
            point_rows.write_record([ann.image_id.as_str(), &x.to_string(), &y.to_string()])?;
        }
    }
    point_rows.flush()?;
    Ok(())
}
