//! Recordings on disk: a JSON manifest, one raw little-endian `f32`
//! channel-major file per segment, and an `annotations.csv` of seizures.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::spectral::FilterReport;
use crate::time::{sample_offset_us, Span};

pub const AMPLITUDE_UNITS: &str = "microvolt";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("segment file `{}` does not exist", .0.display())]
    MissingFile(PathBuf),
    #[error("segment file `{}` is {actual} bytes, expected {expected}", file.display())]
    SizeMismatch { file: PathBuf, expected: u64, actual: u64 },
    #[error("segment {index} overlaps the preceding segment")]
    OverlappingSegments { index: usize },
    #[error("bad manifest field `{field}`: {reason}")]
    BadManifestField { field: String, reason: String },
    #[error("bad annotation on line {line}: {reason}")]
    BadAnnotation { line: usize, reason: String },
    #[error("I/O failure on `{}`: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub file: String,
    pub start_time_us: i64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingManifest {
    pub recording_id: String,
    pub sample_rate_hz: f64,
    pub channel_labels: Vec<String>,
    #[serde(rename = "segments")]
    pub segment_entries: Vec<SegmentEntry>,
    pub amplitude_units: String,
}

impl RecordingManifest {
    pub fn new(recording_id: impl Into<String>, sample_rate_hz: f64, channel_labels: Vec<String>) -> Self {
        RecordingManifest {
            recording_id: recording_id.into(),
            sample_rate_hz,
            channel_labels,
            segment_entries: Vec::new(),
            amplitude_units: AMPLITUDE_UNITS.to_string(),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.channel_labels.len()
    }

    pub fn segment_file_name(&self, index: usize) -> String {
        format!("{}_{index}.f32", self.recording_id)
    }

    fn validate(&self) -> Result<(), IngestError> {
        let bad = |field: &str, reason: &str| IngestError::BadManifestField {
            field: field.to_string(),
            reason: reason.to_string(),
        };
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(bad("sample_rate_hz", "must be a positive finite number"));
        }
        if self.channel_labels.is_empty() {
            return Err(bad("channel_labels", "at least one channel is required"));
        }
        if self.amplitude_units != AMPLITUDE_UNITS {
            return Err(bad("amplitude_units", "only \"microvolt\" is supported"));
        }
        if self.recording_id.is_empty() {
            return Err(bad("recording_id", "must not be empty"));
        }
        for (i, e) in self.segment_entries.iter().enumerate() {
            if e.n_samples == 0 {
                return Err(bad(&format!("segments[{i}].n_samples"), "must be at least 1"));
            }
            if e.file.is_empty() {
                return Err(bad(&format!("segments[{i}].file"), "must not be empty"));
            }
        }
        Ok(())
    }
}

/// One gap-free stretch of a recording, channels by samples, in µV.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub data: Array2<f32>,
    pub start_time_us: i64,
    pub sample_rate_hz: f64,
    /// Filters applied to produce `data`, oldest first.
    pub provenance: Vec<FilterReport>,
}

impl Segment {
    pub fn new(data: Array2<f32>, start_time_us: i64, sample_rate_hz: f64) -> Self {
        Segment {
            data,
            start_time_us,
            sample_rate_hz,
            provenance: Vec::new(),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration_us(&self) -> i64 {
        sample_offset_us(self.n_samples(), self.sample_rate_hz)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }

    /// Absolute time of sample `index`.
    pub fn time_of(&self, index: usize) -> i64 {
        self.start_time_us + sample_offset_us(index, self.sample_rate_hz)
    }

    pub fn span(&self) -> Span {
        Span::new(self.start_time_us, self.start_time_us + self.duration_us())
    }

    /// Channel `c` widened to `f64`.
    pub fn channel_f64(&self, c: usize) -> Vec<f64> {
        row_f64(self.data.row(c))
    }

    /// Samples `[from, to)` as a new segment with corrected start time.
    pub fn slice(&self, from: usize, to: usize) -> Segment {
        Segment {
            data: self.data.slice(ndarray::s![.., from..to]).to_owned(),
            start_time_us: self.time_of(from),
            sample_rate_hz: self.sample_rate_hz,
            provenance: self.provenance.clone(),
        }
    }

    /// Builds a segment from `f64` rows, keeping metadata of `self`.
    pub fn with_rows(&self, rows: Vec<Vec<f64>>, sample_rate_hz: f64, report: FilterReport) -> Segment {
        let t = rows.first().map_or(0, Vec::len);
        let data = Array2::from_shape_fn((rows.len(), t), |(c, i)| rows[c][i] as f32);
        let mut provenance = self.provenance.clone();
        provenance.push(report);
        Segment {
            data,
            start_time_us: self.start_time_us,
            sample_rate_hz,
            provenance,
        }
    }
}

pub(crate) fn row_f64(row: ArrayView1<'_, f32>) -> Vec<f64> {
    row.iter().map(|&v| f64::from(v)).collect()
}

/// Seizure marks: earliest EEG change and end, µs since recording start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeizureAnnotation {
    pub eec_us: i64,
    pub end_us: i64,
}

impl SeizureAnnotation {
    pub fn ictal_span(&self) -> Span {
        Span::new(self.eec_us, self.end_us)
    }
}

pub fn validate_annotations(annotations: &[SeizureAnnotation]) -> Result<(), IngestError> {
    for (i, a) in annotations.iter().enumerate() {
        if a.eec_us >= a.end_us {
            return Err(IngestError::BadAnnotation {
                line: i + 2,
                reason: format!("eec_us {} must precede end_us {}", a.eec_us, a.end_us),
            });
        }
        if i > 0 && a.eec_us < annotations[i - 1].end_us {
            return Err(IngestError::BadAnnotation {
                line: i + 2,
                reason: "seizures must be sorted and non-overlapping".to_string(),
            });
        }
    }
    Ok(())
}

pub fn read_annotations(path: &Path) -> Result<Vec<SeizureAnnotation>, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            IngestError::MissingFile(path.to_path_buf())
        } else {
            IngestError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    parse_annotations(&text)
}

pub fn parse_annotations(text: &str) -> Result<Vec<SeizureAnnotation>, IngestError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "eec_us,end_us" => {}
        _ => {
            return Err(IngestError::BadAnnotation {
                line: 1,
                reason: "expected header `eec_us,end_us`".to_string(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| IngestError::BadAnnotation { line: i + 1, reason };
        let mut cols = line.split(',');
        let mut field = |name: &str| -> Result<i64, IngestError> {
            let raw = cols.next().ok_or_else(|| bad(format!("missing column {name}")))?;
            raw.trim()
                .parse()
                .map_err(|_| bad(format!("{name} `{raw}` is not an integer")))
        };
        let eec_us = field("eec_us")?;
        let end_us = field("end_us")?;
        if cols.next().is_some() {
            return Err(bad("too many columns".to_string()));
        }
        out.push(SeizureAnnotation { eec_us, end_us });
    }
    validate_annotations(&out)?;
    Ok(out)
}

pub fn write_annotations(path: &Path, annotations: &[SeizureAnnotation]) -> Result<(), IngestError> {
    let mut text = String::from("eec_us,end_us\n");
    for a in annotations {
        text.push_str(&format!("{},{}\n", a.eec_us, a.end_us));
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Loads a manifest and every segment it references, in time order.
pub fn load_recording(manifest_path: &Path) -> Result<(RecordingManifest, Vec<Segment>), IngestError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            IngestError::MissingFile(manifest_path.to_path_buf())
        } else {
            IngestError::Io {
                path: manifest_path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let mut manifest: RecordingManifest = serde_json::from_str(&text).map_err(|e| IngestError::BadManifestField {
        field: "<manifest>".to_string(),
        reason: e.to_string(),
    })?;
    manifest.validate()?;
    manifest.segment_entries.sort_by_key(|e| e.start_time_us);

    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let n_channels = manifest.n_channels();
    let fs = manifest.sample_rate_hz;
    let mut segments = Vec::with_capacity(manifest.segment_entries.len());
    let mut prev_end = i64::MIN;
    for (index, entry) in manifest.segment_entries.iter().enumerate() {
        if entry.start_time_us < prev_end {
            return Err(IngestError::OverlappingSegments { index });
        }
        prev_end = entry.start_time_us + sample_offset_us(entry.n_samples, fs);

        let path = dir.join(&entry.file);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(IngestError::MissingFile(path)),
            Err(e) => return Err(IngestError::Io { path, source: e }),
        };
        let expected = (n_channels * entry.n_samples * 4) as u64;
        if bytes.len() as u64 != expected {
            return Err(IngestError::SizeMismatch {
                file: path,
                expected,
                actual: bytes.len() as u64,
            });
        }
        let samples: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let data =
            Array2::from_shape_vec((n_channels, entry.n_samples), samples).expect("length checked against manifest");
        segments.push(Segment::new(data, entry.start_time_us, fs));
    }
    Ok((manifest, segments))
}

/// Writes `manifest.json` and one data file per segment into `dir`.
///
/// Segment entries are regenerated from `segments`; every other manifest
/// field is written as given.
pub fn write_recording(
    manifest: &RecordingManifest,
    segments: &[Segment],
    dir: &Path,
) -> Result<RecordingManifest, IngestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = manifest.clone();
    out.segment_entries.clear();
    for (index, seg) in segments.iter().enumerate() {
        if seg.n_channels() != manifest.n_channels() {
            return Err(IngestError::BadManifestField {
                field: format!("segments[{index}]"),
                reason: format!(
                    "segment has {} channels, manifest lists {}",
                    seg.n_channels(),
                    manifest.n_channels()
                ),
            });
        }
        let file = manifest.segment_file_name(index);
        let path = dir.join(&file);
        let mut bytes = Vec::with_capacity(seg.data.len() * 4);
        for row in seg.data.rows() {
            for v in row {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        out.segment_entries.push(SegmentEntry {
            file,
            start_time_us: seg.start_time_us,
            n_samples: seg.n_samples(),
        });
    }
    let path = dir.join("manifest.json");
    let mut file = fs::File::create(&path).map_err(io_err(&path))?;
    let json = serde_json::to_string_pretty(&out).expect("manifest serializes");
    file.write_all(json.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(io_err(&path))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny_manifest() -> RecordingManifest {
        RecordingManifest::new("rec", 512.0, vec!["a".into(), "b".into()])
    }

    #[test]
    fn smallest_recording_loads() {
        let dir = tempfile::tempdir().unwrap();
        let seg = Segment::new(array![[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]], 0, 512.0);
        write_recording(&tiny_manifest(), std::slice::from_ref(&seg), dir.path()).unwrap();
        assert_eq!(fs::metadata(dir.path().join("rec_0.f32")).unwrap().len(), 32);
        let (m, segs) = load_recording(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(m.segment_entries.len(), 1);
        assert_eq!(segs[0].data.dim(), (2, 4));
        assert_eq!(segs[0].data, seg.data);
    }

    #[test]
    fn channel_major_layout() {
        let dir = tempfile::tempdir().unwrap();
        let seg = Segment::new(array![[1.0, 2.0], [3.0, 4.0]], 0, 512.0);
        write_recording(&tiny_manifest(), &[seg], dir.path()).unwrap();
        let bytes = fs::read(dir.path().join("rec_0.f32")).unwrap();
        let first: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        assert_eq!(first, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn truncated_file_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let seg = Segment::new(Array2::zeros((2, 4)), 0, 512.0);
        write_recording(&tiny_manifest(), &[seg], dir.path()).unwrap();
        fs::write(dir.path().join("rec_0.f32"), [0u8; 31]).unwrap();
        let err = load_recording(&dir.path().join("manifest.json")).unwrap_err();
        assert!(
            matches!(
                err,
                IngestError::SizeMismatch {
                    expected: 32,
                    actual: 31,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let seg = Segment::new(Array2::zeros((2, 4)), 0, 512.0);
        write_recording(&tiny_manifest(), &[seg], dir.path()).unwrap();
        fs::remove_file(dir.path().join("rec_0.f32")).unwrap();
        match load_recording(&dir.path().join("manifest.json")).unwrap_err() {
            IngestError::MissingFile(p) => assert!(p.ends_with("rec_0.f32")),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn overlapping_segments_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = Segment::new(Array2::zeros((2, 512)), 0, 512.0);
        let b = Segment::new(Array2::zeros((2, 512)), 500_000, 512.0);
        write_recording(&tiny_manifest(), &[a, b], dir.path()).unwrap();
        let err = load_recording(&dir.path().join("manifest.json")).unwrap_err();
        assert!(matches!(err, IngestError::OverlappingSegments { index: 1 }));
    }

    #[test]
    fn bad_fields_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = tiny_manifest();
        m.sample_rate_hz = -1.0;
        write_recording(&m, &[], dir.path()).unwrap();
        let err = load_recording(&dir.path().join("manifest.json")).unwrap_err();
        assert!(matches!(err, IngestError::BadManifestField { ref field, .. } if field == "sample_rate_hz"));
    }

    #[test]
    fn empty_recording_has_no_data_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = write_recording(&tiny_manifest(), &[], dir.path()).unwrap();
        assert!(out.segment_entries.is_empty());
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
    }

    #[test]
    fn annotations_parse_and_validate() {
        let a = parse_annotations("eec_us,end_us\n10,20\n30,40\n").unwrap();
        assert_eq!(a.len(), 2);
        assert!(parse_annotations("eec_us,end_us\n10,5\n").is_err());
        assert!(parse_annotations("eec_us,end_us\n10,50\n30,60\n").is_err());
        assert!(parse_annotations("start,end\n").is_err());
        assert!(matches!(
            parse_annotations("eec_us,end_us\n1,x\n"),
            Err(IngestError::BadAnnotation { line: 2, .. })
        ));
    }
}
