//! Grid containers: a flat binary format for density, local-count, and
//! class maps, plus CSV grids for plotting.
//!
//! Binary layout is a 16-byte header (4-byte magic, u32 height, u32 width,
//! u32 aux, little-endian) followed by row-major cells. "UEPD" files hold
//! f64 cells with aux 0 for density maps and aux = patch size for
//! local-count maps; "UEPC" files hold u16 class cells with
//! aux = m | patch_size << 16. The image id is the file stem.

use std::fs;
use std::path::Path;

use crate::density::{DensityMap, LocalCountMap};
use crate::error::{Result, UepError};
use crate::quantize::ClassMap;

const DENSITY_MAGIC: [u8; 4] = *b"UEPD";
const CLASS_MAGIC: [u8; 4] = *b"UEPC";

fn stem_id(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("grid")
        .to_string()
}

fn dim_u32(value: usize, name: &'static str) -> Result<u32> {
    u32::try_from(value).map_err(|_| UepError::InvalidParameter {
        name,
        message: format!("{value} does not fit the binary header"),
    })
}

fn check_cells(what: &str, id: &str, height: usize, width: usize, cells: usize) -> Result<()> {
    if height * width != cells {
        return Err(UepError::ShapeMismatch {
            message: format!("{what} {id} is {height}x{width} but holds {cells} cells"),
        });
    }
    Ok(())
}

fn header(magic: [u8; 4], height: u32, width: u32, aux: u32) -> [u8; 16] {
    let mut h = [0u8; 16];
    h[0..4].copy_from_slice(&magic);
    h[4..8].copy_from_slice(&height.to_le_bytes());
    h[8..12].copy_from_slice(&width.to_le_bytes());
    h[12..16].copy_from_slice(&aux.to_le_bytes());
    h
}

struct RawGrid {
    height: usize,
    width: usize,
    aux: u32,
    body: Vec<u8>,
}

fn read_raw(path: &Path, magic: [u8; 4], cell_bytes: u64) -> Result<RawGrid> {
    let mut bytes = fs::read(path)?;
    if bytes.len() < 16 {
        return Err(UepError::ShapeMismatch {
            message: format!("{} is shorter than the 16-byte header", path.display()),
        });
    }
    if bytes[0..4] != magic {
        return Err(UepError::VersionMismatch {
            found: String::from_utf8_lossy(&bytes[0..4]).into_owned(),
            expected: String::from_utf8_lossy(&magic).into_owned(),
        });
    }
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let aux = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let expected = 16 + u64::from(height) * u64::from(width) * cell_bytes;
    if bytes.len() as u64 != expected {
        return Err(UepError::ShapeMismatch {
            message: format!(
                "{} holds {} bytes, a {height}x{width} grid needs {expected}",
                path.display(),
                bytes.len()
            ),
        });
    }
    Ok(RawGrid {
        height: height as usize,
        width: width as usize,
        aux,
        body: bytes.split_off(16),
    })
}

fn write_f64_grid(
    path: &Path,
    height: usize,
    width: usize,
    aux: u32,
    values: &[f64],
) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + values.len() * 8);
    buf.extend_from_slice(&header(
        DENSITY_MAGIC,
        dim_u32(height, "height")?,
        dim_u32(width, "width")?,
        aux,
    ));
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

fn decode_f64_cells(raw: &RawGrid, image_id: &str) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(raw.height * raw.width);
    for (index, chunk) in raw.body.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() || v < 0.0 {
            return Err(UepError::NegativeCount {
                image_id: image_id.to_string(),
                index,
                value: v,
            });
        }
        values.push(v);
    }
    Ok(values)
}

pub fn save_density_map(path: &Path, map: &DensityMap) -> Result<()> {
    check_cells("density map", &map.image_id, map.height, map.width, map.values.len())?;
    write_f64_grid(path, map.height, map.width, 0, &map.values)
}

pub fn load_density_map(path: &Path) -> Result<DensityMap> {
    let raw = read_raw(path, DENSITY_MAGIC, 8)?;
    if raw.aux != 0 {
        return Err(UepError::ShapeMismatch {
            message: format!(
                "{} is a local-count grid (patch size {}), not a density map",
                path.display(),
                raw.aux
            ),
        });
    }
    let image_id = stem_id(path);
    let values = decode_f64_cells(&raw, &image_id)?;
    Ok(DensityMap {
        image_id,
        height: raw.height,
        width: raw.width,
        values,
    })
}

pub fn save_local_counts(path: &Path, map: &LocalCountMap) -> Result<()> {
    check_cells("count map", &map.image_id, map.height, map.width, map.values.len())?;
    let patch = dim_u32(map.patch_size, "patch_size")?;
    if patch == 0 {
        return Err(UepError::InvalidParameter {
            name: "patch_size",
            message: "must be at least 1".into(),
        });
    }
    write_f64_grid(path, map.height, map.width, patch, &map.values)
}

pub fn load_local_counts(path: &Path) -> Result<LocalCountMap> {
    let raw = read_raw(path, DENSITY_MAGIC, 8)?;
    if raw.aux == 0 {
        return Err(UepError::ShapeMismatch {
            message: format!(
                "{} is a density map and carries no patch size",
                path.display()
            ),
        });
    }
    let image_id = stem_id(path);
    let values = decode_f64_cells(&raw, &image_id)?;
    Ok(LocalCountMap {
        image_id,
        patch_size: raw.aux as usize,
        height: raw.height,
        width: raw.width,
        values,
    })
}

pub fn save_class_map(path: &Path, map: &ClassMap) -> Result<()> {
    check_cells("class map", &map.image_id, map.height, map.width, map.values.len())?;
    if map.m == 0 || map.m > 0xFFFF {
        return Err(UepError::InvalidParameter {
            name: "m",
            message: format!("class files hold 1 to 65535 intervals, got {}", map.m),
        });
    }
    if map.patch_size == 0 || map.patch_size > 0xFFFF {
        return Err(UepError::InvalidParameter {
            name: "patch_size",
            message: format!("class files hold patch sizes 1 to 65535, got {}", map.patch_size),
        });
    }
    let aux = map.m as u32 | (map.patch_size as u32) << 16;
    let mut buf = Vec::with_capacity(16 + map.values.len() * 2);
    buf.extend_from_slice(&header(
        CLASS_MAGIC,
        dim_u32(map.height, "height")?,
        dim_u32(map.width, "width")?,
        aux,
    ));
    for v in &map.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_class_map(path: &Path) -> Result<ClassMap> {
    let raw = read_raw(path, CLASS_MAGIC, 2)?;
    let m = (raw.aux & 0xFFFF) as usize;
    let patch_size = (raw.aux >> 16) as usize;
    if m == 0 || patch_size == 0 {
        return Err(UepError::ShapeMismatch {
            message: format!(
                "{} declares m {m} and patch size {patch_size}; both must be at least 1",
                path.display()
            ),
        });
    }
    let image_id = stem_id(path);
    let mut values = Vec::with_capacity(raw.height * raw.width);
    for (index, chunk) in raw.body.chunks_exact(2).enumerate() {
        let v = u16::from_le_bytes(chunk.try_into().unwrap());
        if v as usize >= m {
            return Err(UepError::ClassOutOfRange {
                image_id: image_id.clone(),
                index,
                value: v,
                classes: m,
            });
        }
        values.push(v);
    }
    Ok(ClassMap {
        image_id,
        patch_size,
        height: raw.height,
        width: raw.width,
        m,
        values,
    })
}

fn write_csv_grid(path: &Path, height: usize, width: usize, values: &[f64]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in 0..height {
        let record: Vec<String> = (0..width)
            .map(|col| values[row * width + col].to_string())
            .collect();
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

fn read_csv_grid(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0usize;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(UepError::MalformedRow {
                path: path.display().to_string(),
                line,
                message: format!("expected {expected} cells, found {}", record.len()),
            });
        }
        for raw in record.iter() {
            let v: f64 = raw.trim().parse().map_err(|_| UepError::MalformedRow {
                path: path.display().to_string(),
                line,
                message: format!("cannot parse cell {raw:?}"),
            })?;
            values.push(v);
        }
        height += 1;
    }
    let width = width.ok_or(UepError::EmptyInput("grid file"))?;
    Ok((height, width, values))
}

pub fn save_density_csv(path: &Path, map: &DensityMap) -> Result<()> {
    check_cells("density map", &map.image_id, map.height, map.width, map.values.len())?;
    write_csv_grid(path, map.height, map.width, &map.values)
}

pub fn load_density_csv(path: &Path) -> Result<DensityMap> {
    let (height, width, values) = read_csv_grid(path)?;
    Ok(DensityMap {
        image_id: stem_id(path),
        height,
        width,
        values,
    })
}

pub fn save_local_counts_csv(path: &Path, map: &LocalCountMap) -> Result<()> {
    check_cells("count map", &map.image_id, map.height, map.width, map.values.len())?;
    write_csv_grid(path, map.height, map.width, &map.values)
}

/// CSV grids carry no header, so the patch size is the caller's to supply.
pub fn load_local_counts_csv(path: &Path, patch_size: usize) -> Result<LocalCountMap> {
    if patch_size == 0 {
        return Err(UepError::InvalidParameter {
            name: "patch_size",
            message: "must be at least 1".into(),
        });
    }
    let (height, width, values) = read_csv_grid(path)?;
    Ok(LocalCountMap {
        image_id: stem_id(path),
        patch_size,
        height,
        width,
        values,
    })
}
