//! Embedding archives (`.prbe`) and weight matrices (`.wmat`).
//!
//! `.prbe` layout, all integers little-endian `u32`:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "PRBE"
//! 4       4     version (1)
//! 8       4     n_prompts
//! 12      4     n_layers
//! 16      4     hidden_dim
//! 20      4     dtype_code (1 = f32 LE)
//! 24      ...   payload [prompt][layer][dim] f32 LE
//! ```
//!
//! The manifest lives next to it as `<path>.manifest.json`.
//!
//! `.wmat` uses the same discipline: magic "PRWM", version, rows, cols,
//! dtype_code, name byte length, UTF-8 name, then the row-major payload.
//! Token strings, when present, go to `<path>.tokens.json`.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{PositionSchedule, Task};
use crate::rng::{self, stream};
use crate::Scalar;

pub const ARCHIVE_MAGIC: [u8; 4] = *b"PRBE";
pub const WEIGHT_MAGIC: [u8; 4] = *b"PRWM";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32_LE: u32 = 1;
pub const HEADER_LEN: usize = 24;

pub const LAYER_INDEXING_NOTE: &str = "layer 0 = input embedding output; layers 1..L = transformer block outputs; vectors are the last prompt token before generation";

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("length error: expected {expected} bytes, found {actual}")]
    Length { expected: u64, actual: u64 },
    #[error("non-finite value {value} at prompt {prompt}, layer {layer}, dim {dim}")]
    NonFinite {
        prompt: usize,
        layer: usize,
        dim: usize,
        value: f32,
    },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("layer {layer} out of range (archive has {n_layers})")]
    LayerOutOfRange { layer: usize, n_layers: usize },
    #[error("incompatible archives: {0}")]
    Incompatible(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub version: u32,
    pub n_prompts: u32,
    pub n_layers: u32,
    pub hidden_dim: u32,
    pub dtype_code: u32,
}

impl ArchiveHeader {
    pub fn new(n_prompts: u32, n_layers: u32, hidden_dim: u32) -> Self {
        Self {
            version: FORMAT_VERSION,
            n_prompts,
            n_layers,
            hidden_dim,
            dtype_code: DTYPE_F32_LE,
        }
    }

    pub fn payload_len(&self) -> u64 {
        self.n_prompts as u64 * self.n_layers as u64 * self.hidden_dim as u64 * 4
    }

    pub fn n_values(&self) -> usize {
        self.n_prompts as usize * self.n_layers as usize * self.hidden_dim as usize
    }

    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..4].copy_from_slice(&ARCHIVE_MAGIC);
        for (i, v) in [
            self.version,
            self.n_prompts,
            self.n_layers,
            self.hidden_dim,
            self.dtype_code,
        ]
        .into_iter()
        .enumerate()
        {
            b[4 + 4 * i..8 + 4 * i].copy_from_slice(&v.to_le_bytes());
        }
        b
    }

    /// Parses and checks magic, version, dtype and non-zero counts.
    fn parse(bytes: &[u8]) -> Result<Self, ArchiveError> {
        if bytes.len() >= 4 && bytes[..4] != ARCHIVE_MAGIC {
            return Err(ArchiveError::Format(format!(
                "bad magic {:?}, expected \"PRBE\"",
                String::from_utf8_lossy(&bytes[..4])
            )));
        }
        if bytes.len() < HEADER_LEN {
            return Err(ArchiveError::Length {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let h = Self {
            version: le_u32(bytes, 4),
            n_prompts: le_u32(bytes, 8),
            n_layers: le_u32(bytes, 12),
            hidden_dim: le_u32(bytes, 16),
            dtype_code: le_u32(bytes, 20),
        };
        if h.version != FORMAT_VERSION {
            return Err(ArchiveError::Format(format!(
                "unsupported version {}",
                h.version
            )));
        }
        if h.dtype_code != DTYPE_F32_LE {
            return Err(ArchiveError::Format(format!(
                "unsupported dtype code {}",
                h.dtype_code
            )));
        }
        if h.n_prompts == 0 || h.n_layers == 0 || h.hidden_dim == 0 {
            return Err(ArchiveError::Format(format!(
                "zero count in header (prompts={}, layers={}, dim={})",
                h.n_prompts, h.n_layers, h.hidden_dim
            )));
        }
        Ok(h)
    }
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt_id: String,
    pub output_text: String,
    pub answer: String,
    pub answer_aliases: Vec<String>,
    /// Vocabulary row of the greedy first generated token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_token_row: Option<u32>,
    /// The model's own probability for that token at the final layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_token_prob: Option<f32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPrompt {
    pub prompt_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model_name: String,
    pub layer_indexing_note: String,
    pub prompt_ids: Vec<String>,
    pub gold_classes: Vec<u32>,
    pub gold_positions: Vec<u32>,
    pub task: Task,
    pub schedule: PositionSchedule,
    #[serde(default)]
    pub generations: Option<Vec<GenerationRecord>>,
    pub extractor_version: String,
    /// Per prompt, the vocabulary row of the first answer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_token_rows: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedPrompt>,
}

impl Manifest {
    /// Every inconsistency in the manifest, checked against `n_prompts`.
    pub fn problems(&self, n_prompts: usize) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.schedule.validate() {
            out.push(e.to_string());
        }
        for (name, len) in [
            ("prompt_ids", self.prompt_ids.len()),
            ("gold_classes", self.gold_classes.len()),
            ("gold_positions", self.gold_positions.len()),
        ] {
            if len != n_prompts {
                out.push(format!("{name} has {len} entries, header n_prompts = {n_prompts}"));
            }
        }
        if let Some(rows) = &self.target_token_rows {
            if rows.len() != n_prompts {
                out.push(format!(
                    "target_token_rows has {} entries, header n_prompts = {n_prompts}",
                    rows.len()
                ));
            }
        }
        let n_classes = self.schedule.len();
        for (i, &c) in self.gold_classes.iter().enumerate() {
            if c as usize >= n_classes {
                out.push(format!(
                    "gold_classes[{i}] = {c} out of range (schedule has {n_classes} classes)"
                ));
            } else if let Some(&p) = self.gold_positions.get(i) {
                if self.schedule.positions[c as usize] != p {
                    out.push(format!(
                        "gold_positions[{i}] = {p} does not match schedule class {c}"
                    ));
                }
            }
        }
        let mut ids = HashSet::new();
        for id in &self.prompt_ids {
            if !ids.insert(id.as_str()) {
                out.push(format!("duplicate prompt_id {id}"));
            }
        }
        if let Some(gens) = &self.generations {
            for g in gens {
                if !ids.contains(g.prompt_id.as_str()) {
                    out.push(format!(
                        "generation for unknown prompt_id {}",
                        g.prompt_id
                    ));
                }
            }
        }
        out
    }

    pub fn gold_labels(&self) -> Vec<usize> {
        self.gold_classes.iter().map(|&c| c as usize).collect()
    }
}

/// Embeddings `[prompt][layer][dim]` plus their manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingArchive {
    pub header: ArchiveHeader,
    pub data: Vec<f32>,
    pub manifest: Manifest,
}

impl EmbeddingArchive {
    /// Builds an archive, checking every invariant.
    pub fn new(
        n_layers: u32,
        hidden_dim: u32,
        data: Vec<f32>,
        manifest: Manifest,
    ) -> Result<Self, ArchiveError> {
        let n_prompts = manifest.prompt_ids.len() as u32;
        let a = Self {
            header: ArchiveHeader::new(n_prompts, n_layers, hidden_dim),
            data,
            manifest,
        };
        a.check()?;
        Ok(a)
    }

    pub fn n_prompts(&self) -> usize {
        self.header.n_prompts as usize
    }

    pub fn n_layers(&self) -> usize {
        self.header.n_layers as usize
    }

    pub fn hidden_dim(&self) -> usize {
        self.header.hidden_dim as usize
    }

    pub fn n_classes(&self) -> usize {
        self.manifest.schedule.len()
    }

    /// The embedding of `prompt` at `layer`.
    pub fn embedding(&self, prompt: usize, layer: usize) -> &[f32] {
        let d = self.hidden_dim();
        let start = (prompt * self.n_layers() + layer) * d;
        &self.data[start..start + d]
    }

    /// Checks header counts, payload length, finiteness and the manifest.
    pub fn check(&self) -> Result<(), ArchiveError> {
        let h = &self.header;
        if h.n_prompts == 0 || h.n_layers == 0 || h.hidden_dim == 0 {
            return Err(ArchiveError::Format("all header counts must be >= 1".into()));
        }
        if self.data.len() != h.n_values() {
            return Err(ArchiveError::Length {
                expected: h.payload_len(),
                actual: self.data.len() as u64 * 4,
            });
        }
        if let Some(e) = first_non_finite(&self.data, h) {
            return Err(e);
        }
        let problems = self.manifest.problems(self.n_prompts());
        if !problems.is_empty() {
            return Err(ArchiveError::Manifest(problems.join("; ")));
        }
        Ok(())
    }

    /// Keeps the prompts at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, ArchiveError> {
        let per_prompt = self.n_layers() * self.hidden_dim();
        let mut data = Vec::with_capacity(indices.len() * per_prompt);
        for &i in indices {
            data.extend_from_slice(&self.data[i * per_prompt..(i + 1) * per_prompt]);
        }
        let m = &self.manifest;
        let pick_u32 = |v: &[u32]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let ids: Vec<String> = indices.iter().map(|&i| m.prompt_ids[i].clone()).collect();
        let id_set: HashSet<&str> = ids.iter().map(String::as_str).collect();
        let manifest = Manifest {
            prompt_ids: ids.clone(),
            gold_classes: pick_u32(&m.gold_classes),
            gold_positions: pick_u32(&m.gold_positions),
            generations: m.generations.as_ref().map(|g| {
                g.iter()
                    .filter(|r| id_set.contains(r.prompt_id.as_str()))
                    .cloned()
                    .collect()
            }),
            target_token_rows: m.target_token_rows.as_ref().map(|r| pick_u32(r)),
            ..m.clone()
        };
        Self::new(self.header.n_layers, self.header.hidden_dim, data, manifest)
    }
}

fn first_non_finite(data: &[f32], h: &ArchiveHeader) -> Option<ArchiveError> {
    data.iter().position(|v| !v.is_finite()).map(|i| {
        let (prompt, layer, dim) = unravel(i, h);
        ArchiveError::NonFinite {
            prompt,
            layer,
            dim,
            value: data[i],
        }
    })
}

fn unravel(i: usize, h: &ArchiveHeader) -> (usize, usize, usize) {
    let d = h.hidden_dim as usize;
    let l = h.n_layers as usize;
    (i / (l * d), (i / d) % l, i % d)
}

/// Sidecar manifest path for an archive.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn tokens_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".tokens.json");
    PathBuf::from(s)
}

pub fn write_manifest(manifest: &Manifest, archive_path: &Path) -> Result<(), ArchiveError> {
    let mpath = manifest_path(archive_path);
    let mut json = serde_json::to_string_pretty(manifest)
        .map_err(|e| ArchiveError::Manifest(e.to_string()))?;
    json.push('\n');
    fs::write(&mpath, json).map_err(io_err(&mpath))
}

pub fn read_manifest(archive_path: &Path) -> Result<Manifest, ArchiveError> {
    let mpath = manifest_path(archive_path);
    let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    serde_json::from_str(&text)
        .map_err(|e| ArchiveError::Manifest(format!("{}: {e}", mpath.display())))
}

pub fn write_archive(archive: &EmbeddingArchive, path: &Path) -> Result<(), ArchiveError> {
    archive.check()?;
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(&archive.header.to_bytes()).map_err(io_err(path))?;
    for v in &archive.data {
        w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    write_manifest(&archive.manifest, path)
}

fn decode_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

fn check_payload_len(expected: u64, actual: usize) -> Result<(), ArchiveError> {
    if expected != actual as u64 {
        return Err(ArchiveError::Length {
            expected,
            actual: actual as u64,
        });
    }
    Ok(())
}

/// Reads and fully validates an archive and its manifest. Any defect yields
/// an error; no partially-read archive is returned.
pub fn read_archive(path: &Path) -> Result<EmbeddingArchive, ArchiveError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let header = ArchiveHeader::parse(&bytes)?;
    check_payload_len(header.payload_len(), bytes.len() - HEADER_LEN)?;
    let data = decode_f32s(&bytes[HEADER_LEN..]);
    if let Some(e) = first_non_finite(&data, &header) {
        return Err(e);
    }
    let manifest = read_manifest(path)?;
    let archive = EmbeddingArchive {
        header,
        data,
        manifest,
    };
    archive.check()?;
    Ok(archive)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationFailure {
    Header { message: String },
    PayloadLength { expected: u64, actual: u64 },
    NonFinite { prompt: usize, layer: usize, dim: usize },
    Manifest { message: String },
}

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Header { message } => write!(f, "header: {message}"),
            Self::PayloadLength { expected, actual } => {
                write!(f, "payload length: expected {expected} bytes, found {actual}")
            }
            Self::NonFinite { prompt, layer, dim } => {
                write!(f, "non-finite value at prompt {prompt}, layer {layer}, dim {dim}")
            }
            Self::Manifest { message } => write!(f, "manifest: {message}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub path: PathBuf,
    pub header: Option<ArchiveHeader>,
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Collects every defect in an archive. Only an unreadable archive file is
/// an error.
pub fn validate_archive(path: &Path) -> Result<ValidationReport, ArchiveError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut failures = Vec::new();
    let header = match ArchiveHeader::parse(&bytes) {
        Ok(h) => Some(h),
        Err(e) => {
            failures.push(ValidationFailure::Header {
                message: e.to_string(),
            });
            None
        }
    };
    if let Some(h) = &header {
        let payload = &bytes[HEADER_LEN..];
        if h.payload_len() != payload.len() as u64 {
            failures.push(ValidationFailure::PayloadLength {
                expected: h.payload_len(),
                actual: payload.len() as u64,
            });
        }
        // Scan whatever whole values are present.
        let usable = payload.len().min(h.payload_len() as usize) / 4 * 4;
        for (i, c) in payload[..usable].chunks_exact(4).enumerate() {
            if !f32::from_le_bytes(c.try_into().unwrap()).is_finite() {
                let (prompt, layer, dim) = unravel(i, h);
                failures.push(ValidationFailure::NonFinite { prompt, layer, dim });
            }
        }
    }
    match read_manifest(path) {
        Ok(m) => {
            let n = header.map(|h| h.n_prompts as usize).unwrap_or(m.prompt_ids.len());
            failures.extend(
                m.problems(n)
                    .into_iter()
                    .map(|message| ValidationFailure::Manifest { message }),
            );
        }
        Err(e) => failures.push(ValidationFailure::Manifest {
            message: e.to_string(),
        }),
    }
    Ok(ValidationReport {
        path: path.to_path_buf(),
        header,
        failures,
    })
}

/// All prompts' embeddings at `layer` (N×d, manifest order) and their gold
/// classes.
pub fn slice_layer(
    archive: &EmbeddingArchive,
    layer: usize,
) -> Result<(Array2<f32>, Vec<usize>), ArchiveError> {
    slice_layer_as::<f32>(archive, layer)
}

/// [`slice_layer`] converted to scalar type `T`.
pub fn slice_layer_as<T: Scalar>(
    archive: &EmbeddingArchive,
    layer: usize,
) -> Result<(Array2<T>, Vec<usize>), ArchiveError> {
    let n_layers = archive.n_layers();
    if layer >= n_layers {
        return Err(ArchiveError::LayerOutOfRange { layer, n_layers });
    }
    let (n, d) = (archive.n_prompts(), archive.hidden_dim());
    let mut x = Array2::<T>::zeros((n, d));
    for (p, mut row) in x.rows_mut().into_iter().enumerate() {
        for (dst, &src) in row.iter_mut().zip(archive.embedding(p, layer)) {
            *dst = T::of_f32(src);
        }
    }
    Ok((x, archive.manifest.gold_labels()))
}

/// Checks that two archives can be used as a train/test pair.
pub fn check_compatible(a: &EmbeddingArchive, b: &EmbeddingArchive) -> Result<(), ArchiveError> {
    if a.header.n_layers != b.header.n_layers {
        return Err(ArchiveError::Incompatible(format!(
            "n_layers {} vs {}",
            a.header.n_layers, b.header.n_layers
        )));
    }
    if a.header.hidden_dim != b.header.hidden_dim {
        return Err(ArchiveError::Incompatible(format!(
            "hidden_dim {} vs {}",
            a.header.hidden_dim, b.header.hidden_dim
        )));
    }
    if a.manifest.schedule != b.manifest.schedule {
        return Err(ArchiveError::Incompatible("position schedules differ".into()));
    }
    Ok(())
}

/// Stratified split by prompt: in each class, `round(test_fraction × count)`
/// prompts (at least one, at most count − 1) go to the test half. Meant for
/// synthetic archives whose prompts carry no shared content.
pub fn split_archive(
    archive: &EmbeddingArchive,
    test_fraction: f64,
    seed: u64,
) -> Result<(EmbeddingArchive, EmbeddingArchive), ArchiveError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(ArchiveError::Incompatible(format!(
            "test_fraction {test_fraction} not in (0, 1)"
        )));
    }
    let mut rng = rng::sub_rng(seed, stream::ARCHIVE_SPLIT, 0);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..archive.n_classes() {
        let mut members: Vec<usize> = (0..archive.n_prompts())
            .filter(|&p| archive.manifest.gold_classes[p] as usize == class)
            .collect();
        if members.len() < 2 {
            return Err(ArchiveError::Incompatible(format!(
                "class {class} has {} prompt(s); need at least 2 to split",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let k = ((test_fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((archive.subset(&train)?, archive.subset(&test)?))
}

/// A dense `rows × cols` matrix exported from a model, e.g. the LM head
/// (vocabulary × hidden) or the final norm scale (1 × hidden).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub name: String,
    pub rows: u32,
    pub cols: u32,
    pub data: Vec<f32>,
    pub token_strings: Option<Vec<String>>,
}

impl WeightMatrix {
    pub fn check(&self) -> Result<(), ArchiveError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(ArchiveError::Format("weight matrix with zero dimension".into()));
        }
        let expected = self.rows as u64 * self.cols as u64 * 4;
        check_payload_len(expected, self.data.len() * 4)?;
        if self.name == "final_norm_scale" && self.rows != 1 {
            return Err(ArchiveError::Format(format!(
                "final_norm_scale must have 1 row, found {}",
                self.rows
            )));
        }
        if let Some(t) = &self.token_strings {
            if t.len() != self.rows as usize {
                return Err(ArchiveError::Format(format!(
                    "{} token strings for {} rows",
                    t.len(),
                    self.rows
                )));
            }
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(ArchiveError::Format(format!(
                "non-finite weight at row {}, col {}",
                i / self.cols as usize,
                i % self.cols as usize
            )));
        }
        Ok(())
    }

    pub fn to_array<T: Scalar>(&self) -> Array2<T> {
        Array2::from_shape_fn((self.rows as usize, self.cols as usize), |(r, c)| {
            T::of_f32(self.data[r * self.cols as usize + c])
        })
    }
}

pub fn write_weights(w: &WeightMatrix, path: &Path) -> Result<(), ArchiveError> {
    w.check()?;
    let mut out = Vec::with_capacity(24 + w.name.len() + w.data.len() * 4);
    out.extend_from_slice(&WEIGHT_MAGIC);
    for v in [
        FORMAT_VERSION,
        w.rows,
        w.cols,
        DTYPE_F32_LE,
        w.name.len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(w.name.as_bytes());
    for v in &w.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(io_err(path))?;
    if let Some(tokens) = &w.token_strings {
        let tpath = tokens_path(path);
        let json = serde_json::to_string(tokens).map_err(|e| ArchiveError::Format(e.to_string()))?;
        fs::write(&tpath, json).map_err(io_err(&tpath))?;
    }
    Ok(())
}

pub fn read_weights(path: &Path) -> Result<WeightMatrix, ArchiveError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() >= 4 && bytes[..4] != WEIGHT_MAGIC {
        return Err(ArchiveError::Format("bad magic, expected \"PRWM\"".into()));
    }
    if bytes.len() < 24 {
        return Err(ArchiveError::Length {
            expected: 24,
            actual: bytes.len() as u64,
        });
    }
    let (version, rows, cols, dtype, name_len) = (
        le_u32(&bytes, 4),
        le_u32(&bytes, 8),
        le_u32(&bytes, 12),
        le_u32(&bytes, 16),
        le_u32(&bytes, 20) as usize,
    );
    if version != FORMAT_VERSION {
        return Err(ArchiveError::Format(format!("unsupported version {version}")));
    }
    if dtype != DTYPE_F32_LE {
        return Err(ArchiveError::Format(format!("unsupported dtype code {dtype}")));
    }
    let body = &bytes[24..];
    if body.len() < name_len {
        return Err(ArchiveError::Length {
            expected: 24 + name_len as u64,
            actual: bytes.len() as u64,
        });
    }
    let name = String::from_utf8(body[..name_len].to_vec())
        .map_err(|_| ArchiveError::Format("weight name is not UTF-8".into()))?;
    let payload = &body[name_len..];
    check_payload_len(rows as u64 * cols as u64 * 4, payload.len())?;
    let tpath = tokens_path(path);
    let token_strings = if tpath.exists() {
        let text = fs::read_to_string(&tpath).map_err(io_err(&tpath))?;
        Some(serde_json::from_str(&text).map_err(|e| ArchiveError::Format(e.to_string()))?)
    } else {
        None
    };
    let w = WeightMatrix {
        name,
        rows,
        cols,
        data: decode_f32s(payload),
        token_strings,
    };
    w.check()?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_manifest(n_prompts: usize, n_classes: u32) -> Manifest {
        let schedule =
            PositionSchedule::from_positions(n_classes, (1..=n_classes).collect()).unwrap();
        let gold_classes: Vec<u32> = (0..n_prompts).map(|i| i as u32 % n_classes).collect();
        Manifest {
            model_name: "toy".into(),
            layer_indexing_note: LAYER_INDEXING_NOTE.into(),
            prompt_ids: (0..n_prompts).map(|i| format!("p{i}")).collect(),
            gold_positions: gold_classes.iter().map(|c| c + 1).collect(),
            gold_classes,
            task: Task::Synthetic,
            schedule,
            generations: None,
            extractor_version: "test".into(),
            target_token_rows: None,
            skipped: vec![],
        }
    }

    fn counting_archive() -> EmbeddingArchive {
        let data: Vec<f32> = (0..24).map(|v| v as f32).collect();
        EmbeddingArchive::new(3, 4, data, toy_manifest(2, 2)).unwrap()
    }

    #[test]
    fn round_trip_counting_archive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.prbe");
        let a = counting_archive();
        write_archive(&a, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 24 + 96);
        assert!(manifest_path(&path).exists());
        assert_eq!(read_archive(&path).unwrap(), a);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.prbe");
        write_archive(&counting_archive(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_archive(&path), Err(ArchiveError::Format(_))));
    }

    #[test]
    fn truncated_payload_is_length_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.prbe");
        write_archive(&counting_archive(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        match read_archive(&path) {
            Err(ArchiveError::Length { expected, actual }) => {
                assert_eq!((expected, actual), (96, 92));
            }
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, &bytes[..10]).unwrap();
        assert!(matches!(read_archive(&path), Err(ArchiveError::Length { .. })));
    }

    #[test]
    fn nan_is_reported_with_indices() {
        let mut a = counting_archive();
        // prompt 1, layer 2, dim 3 -> flat (1*3 + 2)*4 + 3
        a.data[23] = f32::NAN;
        match a.check() {
            Err(ArchiveError::NonFinite {
                prompt: 1,
                layer: 2,
                dim: 3,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_lists_each_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.prbe");
        let shape = ArchiveHeader::new(2, 3, 4);
        let mut a = EmbeddingArchive {
            header: shape,
            data: vec![0.5; 24],
            manifest: toy_manifest(2, 2),
        };
        write_archive(&a, &path).unwrap();
        assert!(validate_archive(&path).unwrap().is_valid());

        // Plant NaN at (p=1, l=2, i=3) directly in the file.
        let mut bytes = fs::read(&path).unwrap();
        let at = HEADER_LEN + 23 * 4;
        bytes[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        let r = validate_archive(&path).unwrap();
        assert_eq!(
            r.failures,
            vec![ValidationFailure::NonFinite {
                prompt: 1,
                layer: 2,
                dim: 3
            }]
        );

        a.manifest = toy_manifest(3, 2);
        write_manifest(&a.manifest, &path).unwrap();
        let r = validate_archive(&path).unwrap();
        assert_eq!(r.failures.len(), 4, "{:?}", r.failures);
        assert!(r
            .failures
            .iter()
            .any(|f| f.to_string().contains("prompt_ids has 3 entries")));
    }

    #[test]
    fn validation_survives_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.prbe");
        fs::write(&path, b"PR").unwrap();
        let r = validate_archive(&path).unwrap();
        assert_eq!(r.failures.len(), 2); // header + missing manifest
        assert!(validate_archive(&dir.path().join("missing.prbe")).is_err());
    }

    #[test]
    fn gold_class_bounds_are_checked() {
        let mut m = toy_manifest(2, 2);
        m.gold_classes[1] = 5;
        assert!(EmbeddingArchive::new(3, 4, vec![0.0; 24], m).is_err());
    }

    #[test]
    fn slice_layer_indexing() {
        let a = counting_archive();
        let (x, y) = slice_layer(&a, 0).unwrap();
        assert_eq!(x.row(0).to_vec(), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(x.row(1).to_vec(), vec![12.0, 13.0, 14.0, 15.0]);
        assert_eq!(y, vec![0, 1]);
        assert!(matches!(
            slice_layer(&a, 3),
            Err(ArchiveError::LayerOutOfRange {
                layer: 3,
                n_layers: 3
            })
        ));
    }

    #[test]
    fn weights_round_trip_and_reject_bad_norm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lm_head.wmat");
        let w = WeightMatrix {
            name: "lm_head".into(),
            rows: 3,
            cols: 2,
            data: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            token_strings: Some(vec!["a".into(), "b".into(), "c".into()]),
        };
        write_weights(&w, &path).unwrap();
        assert_eq!(read_weights(&path).unwrap(), w);
        assert_eq!(w.to_array::<f64>()[[2, 1]], 6.0);

        let bad = WeightMatrix {
            name: "final_norm_scale".into(),
            rows: 2,
            cols: 1,
            data: vec![1.0, 1.0],
            token_strings: None,
        };
        assert!(write_weights(&bad, &path).is_err());

        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_weights(&path), Err(ArchiveError::Length { .. })));
    }

    #[test]
    fn stratified_split_keeps_balance() {
        let data = vec![0.0f32; 40 * 2];
        let a = EmbeddingArchive::new(1, 2, data, toy_manifest(40, 4)).unwrap();
        let (train, test) = split_archive(&a, 0.2, 3).unwrap();
        assert_eq!(train.n_prompts(), 32);
        assert_eq!(test.n_prompts(), 8);
        let mut ids: Vec<_> = train
            .manifest
            .prompt_ids
            .iter()
            .chain(&test.manifest.prompt_ids)
            .cloned()
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 40);
    }
}
