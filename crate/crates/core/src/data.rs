//! Dataset ingestion (IDX, CSV) and the synthetic blobs generator.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};
use crate::tensor::Tensor;

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

/// Feature rows with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor,
    pub labels: Option<Vec<usize>>,
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Idx { images: PathBuf, labels: PathBuf },
    Csv { path: PathBuf, label_column: Option<String> },
    Blobs { n: usize, k: usize, dim: usize, separation: f64, seed: u64 },
}

impl FromStr for DatasetSpec {
    type Err = Error;

    /// `idx:IMAGES,LABELS`, `csv:PATH` or `csv:PATH#LABEL_COLUMN`, and
    /// `blobs:N,K,DIM,SEPARATION,SEED`.
    fn from_str(s: &str) -> Result<Self> {
        let usage = || Error::Usage(format!("unrecognised dataset {s:?}; use idx:IMAGES,LABELS, csv:PATH[#LABEL] or blobs:N,K,DIM,SEP,SEED"));
        let (kind, rest) = s.split_once(':').ok_or_else(usage)?;
        match kind {
            "idx" => {
                let (images, labels) = rest.split_once(',').ok_or_else(usage)?;
                Ok(Self::Idx {
                    images: images.into(),
                    labels: labels.into(),
                })
            }
            "csv" => {
                let (path, label) = match rest.rsplit_once('#') {
                    Some((p, l)) => (p, Some(l.to_string())),
                    None => (rest, None),
                };
                Ok(Self::Csv {
                    path: path.into(),
                    label_column: label,
                })
            }
            "blobs" => {
                let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
                if parts.len() != 5 {
                    return Err(usage());
                }
                let int = |p: &str| p.parse::<usize>().map_err(|_| usage());
                Ok(Self::Blobs {
                    n: int(parts[0])?,
                    k: int(parts[1])?,
                    dim: int(parts[2])?,
                    separation: parts[3].parse().map_err(|_| usage())?,
                    seed: parts[4].parse().map_err(|_| usage())?,
                })
            }
            _ => Err(usage()),
        }
    }
}

impl DatasetSpec {
    /// Files the spec reads, for checking existence before any work starts.
    pub fn paths(&self) -> Vec<&Path> {
        match self {
            Self::Idx { images, labels } => vec![images, labels],
            Self::Csv { path, .. } => vec![path],
            Self::Blobs { .. } => vec![],
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            Self::Idx { images, labels } => {
                let (features, labels) = load_idx(images, labels)?;
                Ok(Dataset {
                    features,
                    labels: Some(labels),
                })
            }
            Self::Csv { path, label_column } => {
                let (features, labels) = load_csv(path, label_column.as_deref())?;
                Ok(Dataset { features, labels })
            }
            &Self::Blobs {
                n,
                k,
                dim,
                separation,
                seed,
            } => {
                let b = gen_blobs(n, k, dim, separation, seed)?;
                Ok(Dataset {
                    features: b.features,
                    labels: Some(b.labels),
                })
            }
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct IdxReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl IdxReader<'_> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let b = self.bytes.get(self.pos..end).ok_or_else(|| Error::Truncated {
            path: self.path.to_path_buf(),
            detail: format!("missing {what}"),
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes(b.try_into().expect("4 bytes")))
    }

    fn body(&self, len: usize) -> Result<&[u8]> {
        let body = &self.bytes[self.pos..];
        if body.len() < len {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                detail: format!("header promises {len} data bytes, file has {}", body.len()),
            });
        }
        Ok(&body[..len])
    }
}

fn idx_header<'a>(path: &'a Path, bytes: &'a [u8], magic: u32) -> Result<IdxReader<'a>> {
    let mut r = IdxReader { path, bytes, pos: 0 };
    let found = r.u32("magic number")?;
    if found != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    Ok(r)
}

/// Reads an IDX image file (`u8` pixels, scaled by 1/255 and flattened per
/// item) and its label file.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<(Tensor, Vec<usize>)> {
    let img_bytes = read(images_path)?;
    let lbl_bytes = read(labels_path)?;

    let mut img = idx_header(images_path, &img_bytes, IDX_IMAGES)?;
    let n = img.u32("item count")? as usize;
    let rows = img.u32("row count")? as usize;
    let cols = img.u32("column count")? as usize;
    let d = rows * cols;
    let pixels = img.body(n * d)?;

    let mut lbl = idx_header(labels_path, &lbl_bytes, IDX_LABELS)?;
    let n_labels = lbl.u32("item count")? as usize;
    if n_labels != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: n_labels,
        });
    }
    let labels = lbl.body(n)?.iter().map(|&b| b as usize).collect();

    let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    Ok((Tensor::new(vec![n, d], data)?, labels))
}

/// Writes `images` (values in [0,1], rounded to bytes) and `labels` as an IDX
/// pair with `side × side` images.
pub fn write_idx(images_path: &Path, labels_path: &Path, images: &Tensor, labels: &[usize], side: (usize, usize)) -> Result<()> {
    let n = images.rows();
    if images.cols() != side.0 * side.1 || labels.len() != n {
        return Err(Error::Parameter("image size or label count does not match".into()));
    }
    let mut img = Vec::with_capacity(16 + images.len());
    for v in [IDX_IMAGES, n as u32, side.0 as u32, side.1 as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend(images.data().iter().map(|&x| (x * 255.0).round().clamp(0.0, 255.0) as u8));

    let mut lbl = Vec::with_capacity(8 + n);
    for v in [IDX_LABELS, n as u32] {
        lbl.extend_from_slice(&v.to_be_bytes());
    }
    for &l in labels {
        lbl.push(u8::try_from(l).map_err(|_| Error::Parameter(format!("label {l} does not fit in a byte")))?);
    }

    let write = |path: &Path, bytes: &[u8]| {
        fs::write(path, bytes).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    write(images_path, &img)?;
    write(labels_path, &lbl)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => Error::Ragged {
            path: path.to_path_buf(),
            row: pos.map_or(0, |p| p.line() as usize),
            expected: expected_len as usize,
            found: len as usize,
        },
        other => Error::Corrupt(format!("{}: {other:?}", path.display())),
    }
}

/// Reads a headered numeric CSV. When `label_column` names a header cell
/// that column is parsed as integer labels and removed from the features.
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<(Tensor, Option<Vec<usize>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let label_idx = match label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Usage(format!("{} has no column named {name:?}", path.display())))?,
        ),
        None => None,
    };

    let width = headers.len() - usize::from(label_idx.is_some());
    let mut data = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let row = i + 2;
        for (column, cell) in record.iter().enumerate() {
            let bad = || Error::NonNumeric {
                path: path.to_path_buf(),
                row,
                column,
                cell: cell.to_string(),
            };
            if Some(column) == label_idx {
                let label: usize = cell.parse().map_err(|_| bad())?;
                labels.as_mut().expect("label column").push(label);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| bad())?;
            if !v.is_finite() {
                return Err(Error::Parameter(format!(
                    "non-finite value {cell:?} at row {row}, column {column} in {}",
                    path.display()
                )));
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Empty("csv file has no data rows"));
    }
    Ok((Tensor::new(vec![rows, width], data)?, labels))
}

/// Writes features (and labels as a trailing `label` column) as a headered
/// CSV that [`load_csv`] reads back exactly.
pub fn write_csv(path: &Path, features: &Tensor, labels: Option<&[usize]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<String> = (0..features.cols()).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, row) in features.iter_rows().enumerate() {
        // `{:?}` prints the shortest string that parses back to the same f64.
        let mut cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        if let Some(l) = labels {
            cells.push(l[i].to_string());
        }
        w.write_record(&cells).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Output of [`gen_blobs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Blobs {
    /// Embedded, min-max normalised points.
    pub features: Tensor,
    pub labels: Vec<usize>,
    /// The 2-D coordinates before embedding.
    pub plane: Tensor,
}

/// `k` unit-variance Gaussian blobs in a plane, embedded linearly into
/// `dim` dimensions and normalised per feature to [0,1].
///
/// Centers lie at distance `separation` from the origin at evenly spaced
/// angles under a random rotation, so every pair of centers is at least
/// `separation · 2 sin(π/k)` apart. Point `j` belongs to blob `j mod k`.
pub fn gen_blobs(n: usize, k: usize, dim: usize, separation: f64, seed: u64) -> Result<Blobs> {
    if k == 0 || n < k {
        return Err(Error::Parameter(format!("blobs need 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    if dim < 2 {
        return Err(Error::Parameter(format!("blobs need at least 2 dimensions, got {dim}")));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::Parameter(format!("separation must be finite and ≥ 0, got {separation}")));
    }
    let mut rng = rng_for(seed, Stream::Blobs);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let mut embed = vec![0.0; 2 * dim];
    embed.iter_mut().for_each(|w| *w = normal());

    let mut plane = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(2 * n);
    for j in 0..n {
        labels.push(j % k);
        noise.push(normal());
        noise.push(normal());
    }
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    for (j, &c) in labels.iter().enumerate() {
        let angle = phase + std::f64::consts::TAU * c as f64 / k as f64;
        plane.push(separation * angle.cos() + noise[2 * j]);
        plane.push(separation * angle.sin() + noise[2 * j + 1]);
    }

    let mut features = vec![0.0; n * dim];
    for j in 0..n {
        let (p0, p1) = (plane[2 * j], plane[2 * j + 1]);
        for f in 0..dim {
            features[j * dim + f] = p0 * embed[f] + p1 * embed[dim + f];
        }
    }
    for f in 0..dim {
        let col = (0..n).map(|j| features[j * dim + f]);
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let span = hi - lo;
        for j in 0..n {
            let x = &mut features[j * dim + f];
            *x = if span > 0.0 { (*x - lo) / span } else { 0.0 };
        }
    }
    Ok(Blobs {
        features: Tensor::from_raw(vec![n, dim], features),
        labels,
        plane: Tensor::from_raw(vec![n, 2], plane),
    })
}
