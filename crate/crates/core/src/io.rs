//! Readers and writers for the little-endian binary formats:
//!
//! * `FERD` raw recordings: magic, u16 version, u16 label, u32 n_frames,
//!   u16 n_rx, u16 n_chirps, u16 n_samples, u64 seed, then f32 samples in
//!   `[frame][rx][chirp][sample]` order.
//! * `FERF` feature dumps: magic, u16 version, u16 label, u32 n_windows,
//!   u16 rows, u16 cols, then per window four row-major f32 images
//!   (RDI, micro-RDI, RAI, REI).
//! * `FERM` model files: magic, u16 version, u32 tensor count, then per
//!   tensor a u16-length name, u8 rank, u32 dims and f32 data.
//!
//! Decoders validate magic, version and dimensions before allocating and
//! report the byte offset of the first problem.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::FeatureWindow;
use crate::error::{Error, FormatError, Result};
use crate::label::{label_code, label_from_code, ClassLabel};
use crate::radar::AdcCube;
use crate::sim::Recording;

pub const RECORDING_MAGIC: [u8; 4] = *b"FERD";
pub const FEATURE_MAGIC: [u8; 4] = *b"FERF";
pub const MODEL_MAGIC: [u8; 4] = *b"FERM";
pub const FORMAT_VERSION: u16 = 1;

pub const RECORDING_HEADER_LEN: usize = 26;
pub const FEATURE_HEADER_LEN: usize = 16;
const MAX_TENSOR_RANK: u8 = 8;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    /// Offset of `buf[0]` within the file.
    base: u64,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], base: u64) -> Self {
        Reader { buf, pos: 0, base }
    }

    fn offset(&self) -> u64 {
        self.base + self.pos as u64
    }

    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], FormatError> {
        let remaining = self.buf.len() - self.pos;
        if remaining < n {
            return Err(FormatError::Truncated {
                offset: self.offset(),
                field,
                expected: n as u64,
                actual: remaining as u64,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let offset = self.offset();
        let found: [u8; 4] = self.take(4, "magic")?.try_into().unwrap();
        if found != expected {
            return Err(FormatError::BadMagic {
                offset,
                expected,
                found,
            });
        }
        Ok(())
    }

    fn version(&mut self) -> Result<(), FormatError> {
        let offset = self.offset();
        let found = self.u16("version")?;
        if found != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion {
                offset,
                found,
                supported: FORMAT_VERSION,
            });
        }
        Ok(())
    }

    fn u8(&mut self, field: &'static str) -> Result<u8, FormatError> {
        Ok(self.take(1, field)?[0])
    }

    fn u16(&mut self, field: &'static str) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2, field)?.try_into().unwrap()))
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u64(&mut self, field: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }

    fn label(&mut self) -> Result<Option<ClassLabel>, FormatError> {
        let offset = self.offset();
        let code = self.u16("label")?;
        label_from_code(code).ok_or(FormatError::InvalidField {
            offset,
            field: "label",
            value: code as u64,
        })
    }

    fn nonzero_u16(&mut self, field: &'static str) -> Result<u16, FormatError> {
        let offset = self.offset();
        let v = self.u16(field)?;
        if v == 0 {
            return Err(FormatError::InvalidField {
                offset,
                field,
                value: 0,
            });
        }
        Ok(v)
    }

    fn f32s(&mut self, count: usize, field: &'static str, finite: bool) -> Result<Vec<f32>, FormatError> {
        let start = self.offset();
        let bytes = self.take(count * 4, field)?;
        let mut out = Vec::with_capacity(count);
        for (i, chunk) in bytes.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if finite && !v.is_finite() {
                return Err(FormatError::NonFinite {
                    offset: start + 4 * i as u64,
                });
            }
            out.push(v);
        }
        Ok(out)
    }

    fn finish(&self) -> Result<(), FormatError> {
        let extra = self.buf.len() - self.pos;
        if extra != 0 {
            return Err(FormatError::TrailingBytes {
                offset: self.offset(),
                extra: extra as u64,
            });
        }
        Ok(())
    }
}

fn checked_product(factors: &[u64], offset: u64, field: &'static str) -> Result<u64, FormatError> {
    factors
        .iter()
        .try_fold(1u64, |acc, &f| acc.checked_mul(f))
        .ok_or(FormatError::DimensionOverflow { offset, field })
}

fn payload_len_check(body: u64, available: u64, offset: u64, field: &'static str) -> Result<(), FormatError> {
    if available < body {
        return Err(FormatError::Truncated {
            offset,
            field,
            expected: body,
            actual: available,
        });
    }
    if available > body {
        return Err(FormatError::TrailingBytes {
            offset: offset + body,
            extra: available - body,
        });
    }
    Ok(())
}

fn put_f32s(out: &mut Vec<u8>, data: &[f32]) {
    out.reserve(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- recordings

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordingHeader {
    pub label: Option<ClassLabel>,
    pub n_frames: u32,
    pub n_rx: u16,
    pub n_chirps: u16,
    pub n_samples: u16,
    pub seed: u64,
}

impl RecordingHeader {
    fn parse(r: &mut Reader<'_>) -> Result<Self, FormatError> {
        r.magic(RECORDING_MAGIC)?;
        r.version()?;
        let label = r.label()?;
        let n_frames = r.u32("n_frames")?;
        let n_rx = r.nonzero_u16("n_rx")?;
        let n_chirps = r.nonzero_u16("n_chirps")?;
        let n_samples = r.nonzero_u16("n_samples")?;
        let seed = r.u64("seed")?;
        Ok(RecordingHeader {
            label,
            n_frames,
            n_rx,
            n_chirps,
            n_samples,
            seed,
        })
    }

    fn frame_len(&self) -> usize {
        self.n_rx as usize * self.n_chirps as usize * self.n_samples as usize
    }

    /// Byte length of the sample payload.
    pub fn payload_len(&self) -> Result<u64, FormatError> {
        checked_product(
            &[
                self.n_frames as u64,
                self.n_rx as u64,
                self.n_chirps as u64,
                self.n_samples as u64,
                4,
            ],
            8,
            "n_frames",
        )
    }
}

pub fn encode_recording(rec: &Recording) -> Result<Vec<u8>> {
    let (n_rx, n_chirps, n_samples) = rec
        .frames
        .first()
        .map_or((1, 1, 1), |f| (f.n_rx, f.n_chirps, f.n_samples));
    for f in &rec.frames {
        if (f.n_rx, f.n_chirps, f.n_samples) != (n_rx, n_chirps, n_samples) {
            return Err(Error::shape(
                "encode_recording",
                (n_rx, n_chirps, n_samples),
                (f.n_rx, f.n_chirps, f.n_samples),
            ));
        }
    }
    let dims16 = |v: usize, name: &str| {
        u16::try_from(v).map_err(|_| Error::Config(format!("{name} = {v} does not fit u16")))
    };
    let n_frames = u32::try_from(rec.frames.len())
        .map_err(|_| Error::Config("too many frames for u32".into()))?;
    let mut out = Vec::with_capacity(RECORDING_HEADER_LEN + rec.frames.len() * n_rx * n_chirps * n_samples * 4);
    out.extend_from_slice(&RECORDING_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&label_code(rec.label).to_le_bytes());
    out.extend_from_slice(&n_frames.to_le_bytes());
    out.extend_from_slice(&dims16(n_rx, "n_rx")?.to_le_bytes());
    out.extend_from_slice(&dims16(n_chirps, "n_chirps")?.to_le_bytes());
    out.extend_from_slice(&dims16(n_samples, "n_samples")?.to_le_bytes());
    out.extend_from_slice(&rec.seed.to_le_bytes());
    for f in &rec.frames {
        put_f32s(&mut out, &f.data);
    }
    Ok(out)
}

fn decode_recording_body(header: RecordingHeader, body: &[u8]) -> Result<Recording, FormatError> {
    payload_len_check(
        header.payload_len()?,
        body.len() as u64,
        RECORDING_HEADER_LEN as u64,
        "samples",
    )?;
    let mut r = Reader::new(body, RECORDING_HEADER_LEN as u64);
    let frame_len = header.frame_len();
    let mut frames = Vec::with_capacity(header.n_frames as usize);
    for k in 0..header.n_frames {
        let data = r.f32s(frame_len, "samples", true)?;
        frames.push(AdcCube {
            n_rx: header.n_rx as usize,
            n_chirps: header.n_chirps as usize,
            n_samples: header.n_samples as usize,
            frame_index: k as u64,
            data,
        });
    }
    r.finish()?;
    Ok(Recording {
        label: header.label,
        seed: header.seed,
        frames,
    })
}

pub fn decode_recording(bytes: &[u8]) -> Result<Recording, FormatError> {
    let mut r = Reader::new(bytes, 0);
    let header = RecordingHeader::parse(&mut r)?;
    decode_recording_body(header, &bytes[RECORDING_HEADER_LEN..])
}

/// Reads only the header of a recording file.
pub fn read_recording_header(path: &Path) -> Result<RecordingHeader> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = Vec::with_capacity(RECORDING_HEADER_LEN);
    (&mut file)
        .take(RECORDING_HEADER_LEN as u64)
        .read_to_end(&mut head)
        .map_err(|e| Error::io(path, e))?;
    Ok(RecordingHeader::parse(&mut Reader::new(&head, 0))?)
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    let header = read_recording_header(path)?;
    let len = std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    let available = len.saturating_sub(RECORDING_HEADER_LEN as u64);
    payload_len_check(header.payload_len()?, available, RECORDING_HEADER_LEN as u64, "samples")?;
    let bytes = read_file(path)?;
    Ok(decode_recording_body(header, &bytes[RECORDING_HEADER_LEN..])?)
}

pub fn write_recording(path: &Path, rec: &Recording) -> Result<()> {
    write_file(path, &encode_recording(rec)?)
}

// ------------------------------------------------------------------ features

/// Four equally-sized images per window, in RDI, micro-RDI, RAI, REI order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub label: Option<ClassLabel>,
    pub rows: usize,
    pub cols: usize,
    pub windows: Vec<[Vec<f32>; 4]>,
}

impl FeatureFile {
    pub fn from_windows(label: Option<ClassLabel>, windows: &[FeatureWindow]) -> Result<Self> {
        let (rows, cols) = windows.first().map_or((0, 0), |w| (w.rdi.rows, w.rdi.cols));
        let mut out = Vec::with_capacity(windows.len());
        for w in windows {
            let images = w.images();
            for img in images {
                if (img.rows, img.cols) != (rows, cols) {
                    return Err(Error::shape("FeatureFile", (rows, cols), (img.rows, img.cols)));
                }
            }
            out.push(images.map(|img| img.data.clone()));
        }
        Ok(FeatureFile {
            label,
            rows,
            cols,
            windows: out,
        })
    }
}

pub fn encode_features(f: &FeatureFile) -> Result<Vec<u8>> {
    let rows = u16::try_from(f.rows).map_err(|_| Error::Config("rows exceed u16".into()))?;
    let cols = u16::try_from(f.cols).map_err(|_| Error::Config("cols exceed u16".into()))?;
    let n = u32::try_from(f.windows.len()).map_err(|_| Error::Config("too many windows".into()))?;
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + f.windows.len() * 4 * f.rows * f.cols * 4);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&label_code(f.label).to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for w in &f.windows {
        for img in w {
            if img.len() != f.rows * f.cols {
                return Err(Error::shape("encode_features", f.rows * f.cols, img.len()));
            }
            put_f32s(&mut out, img);
        }
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureFile, FormatError> {
    let mut r = Reader::new(bytes, 0);
    r.magic(FEATURE_MAGIC)?;
    r.version()?;
    let label = r.label()?;
    let n_windows = r.u32("n_windows")?;
    let (rows, cols) = if n_windows == 0 {
        (r.u16("rows")?, r.u16("cols")?)
    } else {
        (r.nonzero_u16("rows")?, r.nonzero_u16("cols")?)
    };
    let body = checked_product(&[n_windows as u64, 4, rows as u64, cols as u64, 4], 8, "n_windows")?;
    payload_len_check(body, (bytes.len() - r.pos) as u64, r.offset(), "images")?;
    let pixels = rows as usize * cols as usize;
    let mut windows = Vec::with_capacity(n_windows as usize);
    for _ in 0..n_windows {
        windows.push([
            r.f32s(pixels, "images", false)?,
            r.f32s(pixels, "images", false)?,
            r.f32s(pixels, "images", false)?,
            r.f32s(pixels, "images", false)?,
        ]);
    }
    r.finish()?;
    Ok(FeatureFile {
        label,
        rows: rows as usize,
        cols: cols as usize,
        windows,
    })
}

pub fn write_features(path: &Path, f: &FeatureFile) -> Result<()> {
    write_file(path, &encode_features(f)?)
}

pub fn read_features(path: &Path) -> Result<FeatureFile> {
    Ok(decode_features(&read_file(path)?)?)
}

// -------------------------------------------------------------------- models

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

pub fn encode_model(tensors: &[NamedTensor]) -> Result<Vec<u8>> {
    let count = u32::try_from(tensors.len()).map_err(|_| Error::Config("too many tensors".into()))?;
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for t in tensors {
        let name_len = u16::try_from(t.name.len())
            .map_err(|_| Error::Config(format!("tensor name too long: {}", t.name)))?;
        if t.dims.len() > MAX_TENSOR_RANK as usize {
            return Err(Error::Config(format!("tensor {} rank {} > {MAX_TENSOR_RANK}", t.name, t.dims.len())));
        }
        let numel: u64 = t.dims.iter().map(|&d| d as u64).product();
        if numel != t.data.len() as u64 {
            return Err(Error::shape("encode_model", &t.dims, t.data.len()));
        }
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.dims.len() as u8);
        for d in &t.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        put_f32s(&mut out, &t.data);
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<Vec<NamedTensor>, FormatError> {
    let mut r = Reader::new(bytes, 0);
    r.magic(MODEL_MAGIC)?;
    r.version()?;
    let count_offset = r.offset();
    let count = r.u32("tensor_count")?;
    // Each tensor needs at least 3 header bytes; reject absurd counts before allocating.
    if count as u64 * 3 > (bytes.len() - r.pos) as u64 {
        return Err(FormatError::Truncated {
            offset: count_offset,
            field: "tensor_count",
            expected: count as u64 * 3,
            actual: (bytes.len() - r.pos) as u64,
        });
    }
    let mut tensors = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = r.u16("name_len")? as usize;
        let name_offset = r.offset();
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| FormatError::InvalidField {
                offset: name_offset,
                field: "name",
                value: name_len as u64,
            })?
            .to_owned();
        let rank_offset = r.offset();
        let rank = r.u8("rank")?;
        if rank > MAX_TENSOR_RANK {
            return Err(FormatError::InvalidField {
                offset: rank_offset,
                field: "rank",
                value: rank as u64,
            });
        }
        let dims_offset = r.offset();
        let dims = (0..rank).map(|_| r.u32("dims")).collect::<Result<Vec<_>, _>>()?;
        let mut factors: Vec<u64> = dims.iter().map(|&d| d as u64).collect();
        factors.push(4);
        let body = checked_product(&factors, dims_offset, "dims")?;
        let available = (bytes.len() - r.pos) as u64;
        if available < body {
            return Err(FormatError::Truncated {
                offset: r.offset(),
                field: "tensor_data",
                expected: body,
                actual: available,
            });
        }
        let data = r.f32s((body / 4) as usize, "tensor_data", false)?;
        tensors.push(NamedTensor { name, dims, data });
    }
    r.finish()?;
    Ok(tensors)
}

pub fn write_model_file(path: &Path, tensors: &[NamedTensor]) -> Result<()> {
    write_file(path, &encode_model(tensors)?)
}

pub fn read_model_file(path: &Path) -> Result<Vec<NamedTensor>> {
    Ok(decode_model(&read_file(path)?)?)
}

// ------------------------------------------------------------------ manifest

/// One line of `manifest.jsonl`; `path` is relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Option<ClassLabel>,
    pub seed: u64,
    pub n_frames: u32,
}

impl ManifestEntry {
    pub fn resolve(&self, manifest_path: &Path) -> PathBuf {
        let p = Path::new(&self.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = String::new();
    for e in entries {
        text.push_str(&serde_json::to_string(e).expect("manifest entry serializes"));
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })
        })
        .collect()
}

/// SHA-256 over the concatenated contents of `paths`, hex encoded.
pub fn hash_files<P: AsRef<Path>>(paths: &[P]) -> Result<String> {
    let mut hasher = Sha256::new();
    for p in paths {
        hasher.update(read_file(p.as_ref())?);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_recording(n_frames: usize) -> Recording {
        Recording {
            label: Some(ClassLabel::Anger),
            seed: 0xDEAD_BEEF,
            frames: (0..n_frames)
                .map(|k| AdcCube {
                    n_rx: 3,
                    n_chirps: 2,
                    n_samples: 4,
                    frame_index: k as u64,
                    data: (0..24).map(|i| (i + 100 * k) as f32 * 0.5).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn recording_round_trip() {
        let rec = tiny_recording(4);
        let bytes = encode_recording(&rec).unwrap();
        assert_eq!(bytes.len(), RECORDING_HEADER_LEN + 4 * 24 * 4);
        let back = decode_recording(&bytes).unwrap();
        assert_eq!(back, rec);
        assert_eq!(encode_recording(&back).unwrap(), bytes);
    }

    #[test]
    fn recording_header_layout_is_little_endian() {
        let bytes = encode_recording(&tiny_recording(1)).unwrap();
        assert_eq!(&bytes[0..4], b"FERD");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..8], &[1, 0]); // anger
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(&bytes[12..18], &[3, 0, 2, 0, 4, 0]);
        assert_eq!(&bytes[18..26], &0xDEAD_BEEFu64.to_le_bytes());
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let mut bytes = encode_recording(&tiny_recording(1)).unwrap();
        bytes[0] ^= 0xFF;
        match decode_recording(&bytes) {
            Err(FormatError::BadMagic { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_frame_is_truncation_with_sizes() {
        let rec = tiny_recording(10);
        let bytes = encode_recording(&rec).unwrap();
        let cut = &bytes[..bytes.len() - 24 * 4];
        match decode_recording(cut) {
            Err(FormatError::Truncated {
                expected, actual, offset, ..
            }) => {
                assert_eq!(expected, 10 * 96);
                assert_eq!(actual, 9 * 96);
                assert_eq!(offset, 26);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_label_and_dims_are_validated() {
        let good = encode_recording(&tiny_recording(1)).unwrap();
        let mut v = good.clone();
        v[4] = 2;
        assert!(matches!(decode_recording(&v), Err(FormatError::UnsupportedVersion { offset: 4, found: 2, .. })));
        let mut v = good.clone();
        v[6] = 9;
        assert!(matches!(decode_recording(&v), Err(FormatError::InvalidField { field: "label", .. })));
        let mut v = good.clone();
        v[12] = 0;
        assert!(matches!(decode_recording(&v), Err(FormatError::InvalidField { field: "n_rx", .. })));
        let mut v = good.clone();
        v.push(0);
        assert!(matches!(decode_recording(&v), Err(FormatError::TrailingBytes { extra: 1, .. })));
        let mut v = good;
        v[26..30].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_recording(&v), Err(FormatError::NonFinite { offset: 26 })));
    }

    #[test]
    fn huge_header_dims_overflow_without_allocating() {
        let mut v = encode_recording(&tiny_recording(0)).unwrap();
        v[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        v[12..18].copy_from_slice(&[0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF]);
        assert!(matches!(decode_recording(&v), Err(FormatError::DimensionOverflow { .. })));
        // Large but representable: reported as truncation, not an allocation.
        v[12..18].copy_from_slice(&[3, 0, 64, 0, 128, 0]);
        assert!(matches!(decode_recording(&v), Err(FormatError::Truncated { .. })));
    }

    #[test]
    fn short_header_is_truncation() {
        let bytes = encode_recording(&tiny_recording(1)).unwrap();
        assert!(matches!(
            decode_recording(&bytes[..10]),
            Err(FormatError::Truncated { offset: 8, field: "n_frames", .. })
        ));
    }

    #[test]
    fn big_endian_host_reading_little_endian_header() {
        // A big-endian machine sees the raw bytes reversed per field; decoding
        // through an explicit byte swap must give the same values.
        let bytes = encode_recording(&tiny_recording(2)).unwrap();
        let as_be = |b: &[u8]| {
            let mut r = b.to_vec();
            r.reverse();
            r
        };
        let n_frames = u32::from_be_bytes(as_be(&bytes[8..12]).try_into().unwrap());
        let seed = u64::from_be_bytes(as_be(&bytes[18..26]).try_into().unwrap());
        let first = f32::from_be_bytes(as_be(&bytes[26..30]).try_into().unwrap());
        assert_eq!((n_frames, seed, first), (2, 0xDEAD_BEEF, 0.0));
        let second = f32::from_be_bytes(as_be(&bytes[30..34]).try_into().unwrap());
        assert_eq!(second, 0.5);
    }

    #[test]
    fn feature_round_trip_and_errors() {
        let f = FeatureFile {
            label: None,
            rows: 2,
            cols: 3,
            windows: vec![
                [vec![0.1; 6], vec![0.2; 6], vec![0.3; 6], vec![0.4; 6]],
                [vec![1.0; 6], vec![0.0; 6], vec![0.5; 6], vec![0.25; 6]],
            ],
        };
        let bytes = encode_features(&f).unwrap();
        assert_eq!(bytes.len(), FEATURE_HEADER_LEN + 2 * 4 * 6 * 4);
        assert_eq!(&bytes[6..8], &[0xFF, 0xFF]);
        assert_eq!(decode_features(&bytes).unwrap(), f);
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(matches!(decode_features(&bad), Err(FormatError::BadMagic { offset: 0, .. })));
        assert!(matches!(
            decode_features(&bytes[..bytes.len() - 1]),
            Err(FormatError::Truncated { .. })
        ));
    }

    #[test]
    fn model_round_trip_and_errors() {
        let tensors = vec![
            NamedTensor {
                name: "a.weight".into(),
                dims: vec![2, 3],
                data: (0..6).map(|i| i as f32).collect(),
            },
            NamedTensor {
                name: "scalar".into(),
                dims: vec![],
                data: vec![7.0],
            },
        ];
        let bytes = encode_model(&tensors).unwrap();
        assert_eq!(decode_model(&bytes).unwrap(), tensors);
        let mut bad = bytes.clone();
        bad[3] = b'D';
        assert!(matches!(decode_model(&bad), Err(FormatError::BadMagic { .. })));
        assert!(matches!(decode_model(&bytes[..bytes.len() - 2]), Err(FormatError::Truncated { .. })));
        let mut bad = bytes;
        bad[6..10].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode_model(&bad), Err(FormatError::Truncated { field: "tensor_count", .. })));
    }

    #[test]
    fn manifest_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let entries = vec![
            ManifestEntry {
                path: "smile_0000.ferd".into(),
                label: Some(ClassLabel::Smile),
                seed: 1,
                n_frames: 208,
            },
            ManifestEntry {
                path: "x.ferd".into(),
                label: None,
                seed: 2,
                n_frames: 3,
            },
        ];
        write_manifest(&path, &entries).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"path":"smile_0000.ferd","label":"smile","seed":1,"n_frames":208}"#));
        assert_eq!(read_manifest(&path).unwrap(), entries);
        assert_eq!(entries[0].resolve(&path), dir.path().join("smile_0000.ferd"));
    }
}
