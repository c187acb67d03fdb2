//! Point-cloud, chain and curvature-tensor file formats.
//!
//! CSV: one point per row, comma separated, 17 significant digits.
//! Binary: 32-byte little-endian header `{magic, m, d, n}` (four u64) followed by
//! `m * d` little-endian f64 values in row-major order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curvature::{riemann_curvature, weitzenboeck};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::zoo::{PointCloud, SimplicialChain};

pub const BINARY_MAGIC: u64 = u64::from_le_bytes(*b"CHCLOUD1");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudFormat {
    Csv,
    Binary,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") | Some("txt") => CloudFormat::Csv,
            _ => CloudFormat::Binary,
        }
    }
}

pub fn write_csv<W: Write>(cloud: &PointCloud, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for p in cloud.iter() {
        let row: Vec<String> = p.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R, intrinsic_dim: usize) -> Result<PointCloud> {
    let reader = BufReader::new(input);
    let mut points = Vec::new();
    let mut dim = None;
    for (row, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| Error::Format {
                    location: format!("row {row}"),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format {
                location: format!("row {row}"),
                message: "non-finite coordinate".into(),
            });
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Format {
                    location: format!("row {row}"),
                    message: format!("expected {d} columns, found {}", values.len()),
                })
            }
            _ => {}
        }
        points.extend(values);
    }
    let dim = dim.ok_or_else(|| Error::Format {
        location: "csv".into(),
        message: "no rows".into(),
    })?;
    PointCloud::new(points, dim, intrinsic_dim)
}

pub fn write_binary<W: Write>(cloud: &PointCloud, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for word in [
        BINARY_MAGIC,
        cloud.len() as u64,
        cloud.dim() as u64,
        cloud.intrinsic_dim() as u64,
    ] {
        out.write_all(&word.to_le_bytes())?;
    }
    for x in cloud.points() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Writes an m × cols row-major f64 matrix with the binary cloud header.
pub fn write_binary_matrix<W: Write>(rows: usize, cols: usize, tag: usize, data: &[f64], out: W) -> Result<()> {
    assert_eq!(data.len(), rows * cols);
    let mut out = BufWriter::new(out);
    for word in [BINARY_MAGIC, rows as u64, cols as u64, tag as u64] {
        out.write_all(&word.to_le_bytes())?;
    }
    for x in data {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(input: R) -> Result<PointCloud> {
    let mut input = BufReader::new(input);
    let mut header = [0u8; 32];
    input.read_exact(&mut header).map_err(|_| Error::Format {
        location: "header".into(),
        message: "truncated header".into(),
    })?;
    let word = |i: usize| u64::from_le_bytes(header[8 * i..8 * i + 8].try_into().unwrap());
    if word(0) != BINARY_MAGIC {
        return Err(Error::Format {
            location: "header".into(),
            message: format!("bad magic {:#018x}", word(0)),
        });
    }
    let (m, d, n) = (word(1) as usize, word(2) as usize, word(3) as usize);
    if d == 0 || m == 0 || m.checked_mul(d).is_none() {
        return Err(Error::Format {
            location: "header".into(),
            message: format!("invalid shape m={m} d={d}"),
        });
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != m * d * 8 {
        return Err(Error::Format {
            location: "body".into(),
            message: format!("expected {} bytes, found {}", m * d * 8, bytes.len()),
        });
    }
    let points: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PointCloud::new(points, d, n)
}

pub fn export_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    let file = File::create(path)?;
    match format {
        CloudFormat::Csv => write_csv(cloud, file),
        CloudFormat::Binary => write_binary(cloud, file),
    }
}

/// Reads a cloud; CSV files carry no intrinsic dimension so it must be supplied.
pub fn ingest(path: &Path, format: CloudFormat, intrinsic_dim: Option<usize>) -> Result<PointCloud> {
    let file = File::open(path)?;
    match format {
        CloudFormat::Csv => {
            let n =
                intrinsic_dim.ok_or_else(|| Error::InvalidConfig("CSV input needs the intrinsic dimension".into()))?;
            read_csv(file, n)
        }
        CloudFormat::Binary => {
            let cloud = read_binary(file)?;
            match intrinsic_dim {
                Some(n) if n != cloud.intrinsic_dim() => Err(Error::DimensionMismatch {
                    expected: n,
                    found: cloud.intrinsic_dim(),
                }),
                _ => Ok(cloud),
            }
        }
    }
}

pub fn read_chain(path: &Path) -> Result<SimplicialChain> {
    let chain: SimplicialChain = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    chain.validate()?;
    Ok(chain)
}

pub fn write_chain(chain: &SimplicialChain, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, chain)?;
    out.flush()?;
    Ok(())
}

/// Optional tensors in a curvature dump; B̂ and Ĥ are always written.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TensorDumpOptions {
    pub riemann: bool,
    /// Degrees k for which Ŵ_k is written.
    pub weitzenboeck: Vec<usize>,
}

/// One line of a curvature dump. Ambient coordinates, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub index: usize,
    pub p: Vec<f64>,
    /// d³ entries, B[out][u][v].
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    /// d⁴ entries.
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    /// "W_k" → C(d,k)² entries.
    #[serde(flatten)]
    pub w: BTreeMap<String, Vec<f64>>,
}

/// Writes one JSON record per sample.
pub fn write_tensor_dump<W: Write>(geometry: &Geometry, options: &TensorDumpOptions, out: W) -> Result<()> {
    let curv = geometry
        .curvature
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("tensor dumps need B̂; build the geometry with curvature".into()))?;
    let mut out = BufWriter::new(out);
    for i in 0..geometry.cloud.len() {
        let bsym = curv.sym(i);
        let mut w = BTreeMap::new();
        for &k in &options.weitzenboeck {
            let frame = geometry.field.frame(i);
            w.insert(
                format!("W_{k}"),
                weitzenboeck(bsym, curv.mean_curvature(i), &frame, k)?
                    .transpose()
                    .as_slice()
                    .to_vec(),
            );
        }
        let record = TensorRecord {
            index: i,
            p: geometry.cloud.point(i).to_vec(),
            b: bsym.data().to_vec(),
            h: curv.mean_curvature(i).to_vec(),
            r: options.riemann.then(|| riemann_curvature(bsym).data().to_vec()),
            w,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{sample, ManifoldSpec};

    #[test]
    fn csv_uses_seventeen_significant_digits() {
        let cloud = PointCloud::new(vec![0.1, 1.0 / 3.0, -2.5], 3, 2).unwrap();
        let mut buf = Vec::new();
        write_csv(&cloud, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.trim(),
            "1.0000000000000001e-1,3.3333333333333331e-1,-2.5000000000000000e0"
        );
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cloud = sample(&ManifoldSpec::flat_torus(2).unwrap(), 40, 9).unwrap();
        let mut buf = Vec::new();
        write_csv(&cloud, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), 2).unwrap();
        assert_eq!(back.points(), cloud.points());
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let cloud = sample(&ManifoldSpec::cp2(), 17, 2).unwrap();
        let mut buf = Vec::new();
        write_binary(&cloud, &mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 17 * 9 * 8);
        let back = read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.points(), cloud.points());
        assert_eq!(back.intrinsic_dim(), 4);
    }

    #[test]
    fn malformed_header_is_rejected() {
        let mut buf = vec![0u8; 32];
        buf[..8].copy_from_slice(b"NOTACLOU");
        assert!(matches!(read_binary(buf.as_slice()), Err(Error::Format { .. })));
        assert!(matches!(read_binary(&b"short"[..]), Err(Error::Format { .. })));
    }

    #[test]
    fn csv_nan_reports_row() {
        let text = "1,0,0\n0,1,0\n0,NaN,1\n";
        match read_csv(text.as_bytes(), 2) {
            Err(Error::Format { location, .. }) => assert_eq!(location, "row 2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tensor_dump_has_one_record_per_sample() {
        use crate::geometry::GeometryOptions;
        use crate::kernel::KernelConfig;
        let cloud = sample(&ManifoldSpec::sphere(2, 1.0).unwrap(), 400, 3).unwrap();
        let config = KernelConfig::new(0.05, 0.8, 2, 4.0 * std::f64::consts::PI).unwrap();
        let options = GeometryOptions {
            curvature: true,
            ..Default::default()
        };
        let g = Geometry::build(cloud, config, options).unwrap();
        let dump = TensorDumpOptions {
            riemann: true,
            weitzenboeck: vec![1, 2],
        };
        let mut buf = Vec::new();
        write_tensor_dump(&g, &dump, &mut buf).unwrap();
        let records: Vec<TensorRecord> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(records.len(), 400);
        let r = &records[17];
        assert_eq!(r.index, 17);
        assert_eq!((r.b.len(), r.h.len(), r.r.as_ref().unwrap().len()), (27, 3, 81));
        assert_eq!((r.w["W_1"].len(), r.w["W_2"].len()), (9, 9));
        assert_eq!(r.b, g.curvature.as_ref().unwrap().sym(17).data());

        let mut plain = Vec::new();
        write_tensor_dump(&g, &TensorDumpOptions::default(), &mut plain).unwrap();
        let first: serde_json::Value =
            serde_json::from_str(String::from_utf8(plain).unwrap().lines().next().unwrap()).unwrap();
        assert!(first.get("R").is_none() && first.get("W_1").is_none());
    }
}
