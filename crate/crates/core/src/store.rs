//! Embedding sets, image/text pairing and the EMB1 container.
//!
//! EMB1 layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `b"EMB1"`                         |
//! | 4      | 1    | modality (0 image, 1 text, 2 other)     |
//! | 5      | 4    | dim, `u32`                              |
//! | 9      | 8    | count, `u64`                            |
//! | 17     | 1    | flags, bit 0 = ids present              |
//! | 18     | 4·count·dim | row-major `f32` payload          |
//!
//! When the id flag is set the payload is followed by `count` strings, each a
//! `u16` byte length and that many bytes of UTF-8.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const HEADER_LEN: usize = 18;
const FLAG_IDS: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Text,
    Other,
}

impl Modality {
    pub fn code(self) -> u8 {
        match self {
            Modality::Image => 0,
            Modality::Text => 1,
            Modality::Other => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Modality::Image),
            1 => Ok(Modality::Text),
            2 => Ok(Modality::Other),
            c => Err(Error::UnknownModality(c)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Text => "text",
            Modality::Other => "other",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Modality::Image),
            "text" => Ok(Modality::Text),
            "other" => Ok(Modality::Other),
            other => Err(Error::InvalidParameter(format!("unknown modality {other:?}"))),
        }
    }
}

/// A modality-tagged `count × dim` matrix of raw embedding vectors.
///
/// Rows are stored row-major in 64-bit precision. Every entry is finite and
/// ids, when present, are unique and one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    modality: Modality,
    dim: usize,
    data: Vec<f64>,
    ids: Option<Vec<String>>,
}

impl EmbeddingSet {
    pub fn new(
        modality: Modality,
        dim: usize,
        data: Vec<f64>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("dim must be positive".into()));
        }
        if data.is_empty() {
            return Err(Error::Empty("embedding set has no rows".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} values do not fill rows of width {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        let count = data.len() / dim;
        if let Some(ids) = &ids {
            if ids.len() != count {
                return Err(Error::Shape(format!(
                    "{} ids for {count} rows",
                    ids.len()
                )));
            }
            let mut seen = HashSet::with_capacity(ids.len());
            for id in ids {
                if !seen.insert(id.as_str()) {
                    return Err(Error::DuplicateId(id.clone()));
                }
            }
        }
        Ok(Self {
            modality,
            dim,
            data,
            ids,
        })
    }

    pub fn from_rows(modality: Modality, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(modality, dim, rows.concat(), None)
    }

    pub fn with_ids(self, ids: Vec<String>) -> Result<Self> {
        Self::new(self.modality, self.dim, self.data, Some(ids))
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Row-major values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let m = self.count() as f64;
        mean.iter_mut().for_each(|v| *v /= m);
        mean
    }

    /// Every row translated by `-alpha * offset`.
    pub fn shifted(&self, alpha: f64, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: offset.len(),
            });
        }
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.dim) {
            for (v, o) in row.iter_mut().zip(offset) {
                *v -= alpha * o;
            }
        }
        Self::new(self.modality, self.dim, data, self.ids.clone())
    }

    /// Row index of `key`: an id when the set carries ids, otherwise (or as
    /// fallback) a decimal row index.
    pub fn resolve_row(&self, key: &str) -> Option<usize> {
        if let Some(ids) = &self.ids {
            if let Some(j) = ids.iter().position(|id| id == key) {
                return Some(j);
            }
        }
        key.parse::<usize>().ok().filter(|&j| j < self.count())
    }

    /// Rows `indices`, in that order, ids carried along.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &j in indices {
            if j >= self.count() {
                return Err(Error::Shape(format!("row {j} out of range")));
            }
            data.extend_from_slice(self.row(j));
        }
        let ids = self
            .ids
            .as_ref()
            .map(|ids| indices.iter().map(|&j| ids[j].clone()).collect());
        Self::new(self.modality, self.dim, data, ids)
    }

    /// Column `col` of every row.
    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }
}

/// Reads an EMB1 file.
pub fn load_emb(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_emb(&bytes)
}

pub fn decode_emb(bytes: &[u8]) -> Result<EmbeddingSet> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        let mut found = [0u8; 4];
        let n = bytes.len().min(4);
        found[..n].copy_from_slice(&bytes[..n]);
        return Err(Error::BadMagic(found));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedHeader(bytes.len()));
    }
    let modality = Modality::from_code(bytes[4])?;
    let dim = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as u64;
    let count = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
    let flags = bytes[17];
    if dim == 0 || count == 0 {
        return Err(Error::Shape(format!("header declares {count}x{dim}")));
    }

    let payload_len = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Shape(format!("{count}x{dim} overflows")))?;
    let available = (bytes.len() - HEADER_LEN) as u64;
    let has_ids = flags & FLAG_IDS != 0;
    if available < payload_len || (!has_ids && available != payload_len) {
        return Err(Error::PayloadLengthMismatch {
            expected: payload_len,
            found: available,
        });
    }
    let payload_end = HEADER_LEN + payload_len as usize;
    let data: Vec<f64> = bytes[HEADER_LEN..payload_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();

    let ids = if has_ids {
        Some(decode_ids(&bytes[payload_end..], count as usize)?)
    } else {
        None
    };
    EmbeddingSet::new(modality, dim as usize, data, ids)
}

fn decode_ids(mut rest: &[u8], count: usize) -> Result<Vec<String>> {
    let mut ids = Vec::with_capacity(count);
    for j in 0..count {
        if rest.len() < 2 {
            return Err(Error::MalformedIds(format!("id {j} length prefix truncated")));
        }
        let len = u16::from_le_bytes([rest[0], rest[1]]) as usize;
        rest = &rest[2..];
        if rest.len() < len {
            return Err(Error::MalformedIds(format!("id {j} body truncated")));
        }
        let id = std::str::from_utf8(&rest[..len])
            .map_err(|e| Error::MalformedIds(format!("id {j}: {e}")))?;
        ids.push(id.to_owned());
        rest = &rest[len..];
    }
    if !rest.is_empty() {
        return Err(Error::MalformedIds(format!(
            "{} trailing bytes after id section",
            rest.len()
        )));
    }
    Ok(ids)
}

/// Encodes a set as EMB1 bytes. Fails before producing output if a value is
/// not representable as a finite `f32` or an id is longer than 65535 bytes.
pub fn encode_emb(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let dim = u32::try_from(set.dim)
        .map_err(|_| Error::Shape(format!("dim {} exceeds u32", set.dim)))?;
    let mut out = Vec::with_capacity(HEADER_LEN + set.data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.push(set.modality.code());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(set.count() as u64).to_le_bytes());
    out.push(if set.ids.is_some() { FLAG_IDS } else { 0 });
    for (pos, &v) in set.data.iter().enumerate() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::NonFinite {
                row: pos / set.dim,
                col: pos % set.dim,
            });
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    if let Some(ids) = &set.ids {
        for id in ids {
            let len = u16::try_from(id.len())
                .map_err(|_| Error::MalformedIds(format!("id {id:?} longer than 65535 bytes")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
    }
    Ok(out)
}

/// Writes an EMB1 file via a temporary sibling and a rename.
pub fn save_emb(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_emb(set)?;
    write_atomic(path.as_ref(), &bytes)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::ErrorKind::InvalidInput.into()))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Reads a CSV of one vector per row.
///
/// With `has_header`, the first record is a header; if its first cell is
/// `id` (case-insensitive) the first column holds row ids.
pub fn import_csv(path: impl AsRef<Path>, modality: Modality, has_header: bool) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, modality, has_header)
}

pub fn parse_csv(text: &str, modality: Modality, has_header: bool) -> Result<EmbeddingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let mut id_column = false;
    if has_header {
        match records.next() {
            Some(header) => {
                let header = header.map_err(|e| Error::Csv(e.to_string()))?;
                id_column = header
                    .get(0)
                    .is_some_and(|h| h.eq_ignore_ascii_case("id"));
            }
            None => return Err(Error::Empty("csv has no rows".into())),
        }
    }

    let mut width: Option<usize> = None;
    let mut data = Vec::new();
    let mut ids = Vec::new();
    for record in records {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                line,
                expected,
                found: record.len(),
            });
        }
        let mut fields = record.iter().enumerate();
        if id_column {
            let (_, id) = fields.next().expect("non-empty record");
            ids.push(id.to_owned());
        }
        for (field, cell) in fields {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                line,
                field,
                cell: cell.to_owned(),
            })?;
            data.push(v);
        }
    }

    let width = width.ok_or_else(|| Error::Empty("csv has no data rows".into()))?;
    let dim = if id_column { width - 1 } else { width };
    if dim == 0 {
        return Err(Error::Empty("csv rows carry no values".into()));
    }
    EmbeddingSet::new(modality, dim, data, id_column.then_some(ids))
}

/// Index-aligned image/text sets: row `j` of each forms positive pair `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedEmbeddings {
    images: EmbeddingSet,
    texts: EmbeddingSet,
}

/// Which modality an α-shift translates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftTarget {
    Image,
    Text,
    Both,
}

impl ShiftTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftTarget::Image => "image",
            ShiftTarget::Text => "text",
            ShiftTarget::Both => "both",
        }
    }
}

impl std::str::FromStr for ShiftTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(ShiftTarget::Image),
            "text" => Ok(ShiftTarget::Text),
            "both" => Ok(ShiftTarget::Both),
            other => Err(Error::InvalidParameter(format!("unknown shift target {other:?}"))),
        }
    }
}

/// Pairs an image set with a text set.
///
/// When both sets carry ids the text rows are reordered to follow the image
/// ids; otherwise rows are paired by index.
pub fn pair(images: EmbeddingSet, texts: EmbeddingSet) -> Result<PairedEmbeddings> {
    if images.modality != Modality::Image {
        return Err(Error::ModalityMismatch {
            expected: "image",
            found: images.modality.as_str(),
        });
    }
    if texts.modality != Modality::Text {
        return Err(Error::ModalityMismatch {
            expected: "text",
            found: texts.modality.as_str(),
        });
    }
    if images.count() != texts.count() {
        return Err(Error::CountMismatch {
            images: images.count(),
            texts: texts.count(),
        });
    }
    if images.dim != texts.dim {
        return Err(Error::DimMismatch {
            expected: images.dim,
            found: texts.dim,
        });
    }

    let texts = match (&images.ids, &texts.ids) {
        (Some(image_ids), Some(text_ids)) => {
            let by_id: HashMap<&str, usize> = text_ids
                .iter()
                .enumerate()
                .map(|(j, id)| (id.as_str(), j))
                .collect();
            let order = image_ids
                .iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| Error::IdSetMismatch(id.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            texts.select_rows(&order)?
        }
        _ => texts,
    };
    Ok(PairedEmbeddings { images, texts })
}

impl PairedEmbeddings {
    pub fn images(&self) -> &EmbeddingSet {
        &self.images
    }

    pub fn texts(&self) -> &EmbeddingSet {
        &self.texts
    }

    pub fn count(&self) -> usize {
        self.images.count()
    }

    pub fn dim(&self) -> usize {
        self.images.dim
    }

    pub fn into_parts(self) -> (EmbeddingSet, EmbeddingSet) {
        (self.images, self.texts)
    }

    /// Image and text modality means.
    pub fn means(&self) -> (Vec<f64>, Vec<f64>) {
        (self.images.mean(), self.texts.mean())
    }

    /// Applies `v ↦ v − α·m` to the targeted modality(ies), each with its own
    /// mean taken from `means`.
    pub fn shifted(&self, alpha: f64, target: ShiftTarget, means: &(Vec<f64>, Vec<f64>)) -> Result<Self> {
        let images = match target {
            ShiftTarget::Image | ShiftTarget::Both => self.images.shifted(alpha, &means.0)?,
            ShiftTarget::Text => self.images.clone(),
        };
        let texts = match target {
            ShiftTarget::Text | ShiftTarget::Both => self.texts.shifted(alpha, &means.1)?,
            ShiftTarget::Image => self.texts.clone(),
        };
        Ok(Self { images, texts })
    }

    /// Subset of pairs, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            images: self.images.select_rows(indices)?,
            texts: self.texts.select_rows(indices)?,
        })
    }
}
