//! On-disk formats.
//!
//! Binary embeddings (`P2ID`), all integers little-endian:
//!
//! ```text
//! offset  size     field
//! 0       4        magic "P2ID"
//! 4       4        version (u32) = 1
//! 8       8        n (u64), number of rows
//! 16      8        d (u64), row dimension, >= 1
//! 24      4·n·d    f32 values, row-major
//! ```
//!
//! Row metadata lives next to the binary at `path + ".meta.jsonl"`, one JSON
//! object per row in row order. Feature files use `{"id", "cam", "name"}`;
//! auxiliary files store `n·M` rows grouped by sample and use
//! `{"name", "aux_m", "source"}`, where `aux_m` runs `0..M` within a group.
//!
//! Readers reject malformed input; every error names a byte offset or a
//! 1-based line number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::centralize::AuxFeatureSet;
use crate::cleanse::pose::{Keypoint, PoseRecord, NUM_KEYPOINTS};
use crate::error::{Error, Result};
use crate::features::FeatureSet;

pub const MAGIC: &[u8; 4] = b"P2ID";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 24;
pub const META_SUFFIX: &str = ".meta.jsonl";

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(META_SUFFIX);
    PathBuf::from(s)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowMeta {
    id: i64,
    cam: Option<i64>,
    name: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AuxMeta {
    name: Option<String>,
    aux_m: usize,
    source: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeypointLine {
    name: String,
    keypoints: Vec<Vec<f64>>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_binary(path: &Path, n: usize, dim: usize, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(n as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(dim as u64).to_le_bytes()).map_err(io)?;
    for &v in values {
        w.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Returns `(n, d, values)`.
fn read_binary(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let len = bytes.len() as u64;
    let truncated = |expected| Error::TruncatedFile {
        path: path.to_owned(),
        offset: len,
        expected,
    };
    if len < 4 || &bytes[..4] != MAGIC {
        return Err(if len < 4 { truncated(HEADER_LEN) } else { Error::BadMagic { path: path.to_owned() } });
    }
    if len < HEADER_LEN {
        return Err(truncated(HEADER_LEN));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::VersionUnsupported {
            path: path.to_owned(),
            version,
        });
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if d == 0 {
        return Err(Error::InvalidHeader {
            path: path.to_owned(),
            offset: 16,
            message: "dimension must be >= 1".into(),
        });
    }
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::InvalidHeader {
            path: path.to_owned(),
            offset: 8,
            message: format!("n = {n}, d = {d} overflows the addressable size"),
        })?;
    if len < expected {
        return Err(truncated(expected));
    }
    if len > expected {
        return Err(Error::TrailingData {
            path: path.to_owned(),
            offset: expected,
        });
    }
    let values = bytes[HEADER_LEN as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((n as usize, d as usize, values))
}

/// Reads a JSON Lines file; a single trailing newline is allowed, blank
/// lines elsewhere are errors.
fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let parsed = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: k as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(parsed);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `set` as `P2ID` plus its metadata sidecar. Values are rounded to
/// `f32`.
pub fn write_embeddings(set: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_binary(path, set.len(), set.dim(), set.as_slice())?;
    write_jsonl(
        &meta_path(path),
        (0..set.len()).map(|i| RowMeta {
            id: set.ids()[i],
            cam: set.cams()[i],
            name: set.names()[i].clone(),
        }),
    )
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    let (n, d, values) = read_binary(path)?;
    let meta_file = meta_path(path);
    let meta: Vec<RowMeta> = read_jsonl(&meta_file)?;
    if meta.len() != n {
        return Err(Error::MetadataLengthMismatch {
            path: meta_file,
            expected: n,
            found: meta.len(),
        });
    }
    let mut ids = Vec::with_capacity(n);
    let mut cams = Vec::with_capacity(n);
    let mut names = Vec::with_capacity(n);
    for m in meta {
        ids.push(m.id);
        cams.push(m.cam);
        names.push(m.name);
    }
    FeatureSet::new(values, d, ids)?.with_cams(cams)?.with_names(names)
}

/// Reads `id,cam,f0,...,f{d-1}` CSV. An empty `cam` field means no camera.
/// Feature values are parsed as `f32`.
pub fn read_csv_embeddings(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, e))?;
    let mut records = reader.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, 1, e))?,
        None => {
            return Err(Error::HeaderMismatch {
                path: path.to_owned(),
                line: 1,
                message: "file is empty".into(),
            })
        }
    };
    let d = header.len().saturating_sub(2);
    let expected: Vec<String> = ["id".to_owned(), "cam".to_owned()]
        .into_iter()
        .chain((0..d).map(|k| format!("f{k}")))
        .collect();
    if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::HeaderMismatch {
            path: path.to_owned(),
            line: 1,
            message: format!(
                "expected `id,cam,f0,...`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut data = Vec::new();
    let mut ids = Vec::new();
    let mut cams = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(path, 0, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != d + 2 {
            return Err(Error::RaggedRow {
                path: path.to_owned(),
                line,
                expected: d + 2,
                found: record.len(),
            });
        }
        let parse_err = |what: &str, field: &str| Error::Parse {
            path: path.to_owned(),
            line,
            message: format!("invalid {what} `{field}`"),
        };
        ids.push(record[0].parse::<i64>().map_err(|_| parse_err("id", &record[0]))?);
        cams.push(match &record[1] {
            "" => None,
            c => Some(c.parse::<i64>().map_err(|_| parse_err("cam", c))?),
        });
        for field in record.iter().skip(2) {
            let v: f32 = field.parse().map_err(|_| parse_err("feature value", field))?;
            data.push(v as f64);
        }
    }
    FeatureSet::new(data, d, ids)?.with_cams(cams)
}

fn csv_error(path: &Path, line: u64, e: csv::Error) -> Error {
    let line = e.position().map_or(line, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_owned(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Reads features by extension: `.csv` as CSV, anything else as `P2ID`.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv_embeddings(path),
        _ => read_embeddings(path),
    }
}

pub fn write_aux(aux: &AuxFeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (n, m) = (aux.samples(), aux.per_sample());
    write_binary(path, n * m, aux.dim(), aux.as_slice())?;
    write_jsonl(
        &meta_path(path),
        (0..n * m).map(|r| AuxMeta {
            name: aux.sample_names()[r / m].clone(),
            aux_m: r % m,
            source: aux.source_tag().to_owned(),
        }),
    )
}

/// Reads an auxiliary file. `M` is one more than the largest `aux_m`; rows
/// must come in complete groups `0..M` that share a sample name and source.
/// A file without rows yields `n = 0, M = 0`.
pub fn read_aux(path: impl AsRef<Path>) -> Result<AuxFeatureSet> {
    let path = path.as_ref();
    let (rows, d, values) = read_binary(path)?;
    let meta_file = meta_path(path);
    let meta: Vec<AuxMeta> = read_jsonl(&meta_file)?;
    if meta.len() != rows {
        return Err(Error::MetadataLengthMismatch {
            path: meta_file,
            expected: rows,
            found: meta.len(),
        });
    }
    let Some(m) = meta.iter().map(|r| r.aux_m + 1).max() else {
        return AuxFeatureSet::new(values, 0, 0, d, "");
    };
    let source = meta[0].source.clone();
    let misaligned = |line: usize, message: String| Error::Parse {
        path: meta_file.clone(),
        line: line as u64 + 1,
        message,
    };
    if rows % m != 0 {
        return Err(misaligned(
            rows - 1,
            format!("{rows} rows do not form complete groups of {m}"),
        ));
    }
    let mut names = Vec::with_capacity(rows / m);
    for (r, row) in meta.iter().enumerate() {
        if row.aux_m != r % m {
            return Err(misaligned(r, format!("aux_m is {}, expected {}", row.aux_m, r % m)));
        }
        if row.source != source {
            return Err(misaligned(r, format!("source `{}` differs from `{source}`", row.source)));
        }
        if r % m == 0 {
            names.push(row.name.clone());
        } else if row.name != meta[r - 1].name {
            return Err(misaligned(r, format!("sample name {:?} changes inside a group", row.name)));
        }
    }
    AuxFeatureSet::new(values, rows / m, m, d, source)?.with_sample_names(names)
}

/// Reads `{"name": ..., "keypoints": [[x, y, c], ...]}` lines, 18 triplets
/// each.
pub fn read_keypoints(path: impl AsRef<Path>) -> Result<Vec<PoseRecord>> {
    let path = path.as_ref();
    let lines: Vec<KeypointLine> = read_jsonl(path)?;
    lines
        .into_iter()
        .enumerate()
        .map(|(k, rec)| {
            let line = k as u64 + 1;
            if rec.keypoints.len() != NUM_KEYPOINTS {
                return Err(Error::BadKeypointCount {
                    path: path.to_owned(),
                    line,
                    name: rec.name,
                    found: rec.keypoints.len(),
                });
            }
            let mut kps = [Keypoint::new(0.0, 0.0, 0.0); NUM_KEYPOINTS];
            for (slot, t) in kps.iter_mut().zip(&rec.keypoints) {
                let [x, y, c] = t[..] else {
                    return Err(Error::Parse {
                        path: path.to_owned(),
                        line,
                        message: format!("pose `{}`: keypoint has {} values, expected 3", rec.name, t.len()),
                    });
                };
                *slot = Keypoint::new(x, y, c);
            }
            PoseRecord::new(rec.name, kps).map_err(|e| Error::Parse {
                path: path.to_owned(),
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_keypoints(poses: &[PoseRecord], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(
        path.as_ref(),
        poses.iter().map(|p| KeypointLine {
            name: p.name.clone(),
            keypoints: p.keypoints().iter().map(|k| vec![k.x, k.y, k.confidence]).collect(),
        }),
    )
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
