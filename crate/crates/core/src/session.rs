//! Tracking-data and manifest formats: parsing, validation, and slicing a
//! session recording into its 12 story segments.
//!
//! Frame streams are line-delimited JSON (one object per line), manifests are
//! single JSON objects, and a cohort index is a JSON array of per-subject file
//! paths. All parsed values are immutable; validation is total, so an invalid
//! input never yields a partially constructed session.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// AU ids tracked per frame, in canonical order.
pub const AU_IDS: [u8; 6] = [1, 2, 4, 12, 15, 20];

/// Animation-unit ids in canonical order (left side, then right side).
pub const ANU_IDS: [&str; 12] = [
    "L1", "L2", "L3", "L4", "L5", "L6", "R1", "R2", "R3", "R4", "R5", "R6",
];

/// Number of story segments per session.
pub const SEGMENT_COUNT: usize = 12;

/// Minimum frames per segment (speed moving-average window + 1).
pub const MIN_SEGMENT_FRAMES: u64 = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Control,
    Asd,
    Adhd,
    Comorbid,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Group::Control => "control",
            Group::Asd => "asd",
            Group::Adhd => "adhd",
            Group::Comorbid => "comorbid",
        };
        f.write_str(s)
    }
}

/// One tracked frame of the recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_index: u64,
    /// AU intensities in `AU_IDS` order, each in [0, 5].
    pub au_intensity: [f64; 6],
    /// Blink (AU45) occurring this frame.
    pub au45_active: bool,
    /// Animation-unit intensities in `ANU_IDS` order, each in [-1, 1].
    pub anu_intensity: [f64; 12],
    /// (pitch, yaw, roll) in degrees, each in [-180, 180).
    pub head_rotation: [f64; 3],
    /// 8 stable landmarks (4 eye corners + 4 nose points) in camera space, meters.
    pub landmarks: [[f64; 3]; 8],
    /// Face tracking valid this frame.
    pub tracked: bool,
}

/// Per-session manifest: label, frame rate, segment spans, response times.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionManifest {
    pub subject_id: String,
    pub group: Group,
    pub frame_rate: f64,
    /// Exactly 12 half-open frame-index intervals [start, end), ascending.
    pub segments: Vec<(u64, u64)>,
    /// Exactly 12 response times, seconds.
    pub response_times: Vec<f64>,
}

/// A subject's full recording: manifest plus frame stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecording {
    pub manifest: SessionManifest,
    pub frames: Vec<FrameRecord>,
}

/// A set of sessions with pairwise-distinct subject ids.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub sessions: Vec<SessionRecording>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("line {line}: malformed frame record: {msg}")]
    Parse { line: usize, msg: String },
    #[error("frame {frame}: {field} out of range: {value}")]
    OutOfRange {
        frame: u64,
        field: String,
        value: f64,
    },
    #[error("frame {frame}: {field} is not finite")]
    NonFinite { frame: u64, field: String },
    #[error("line {line}: frame index {frame} not strictly increasing")]
    NonMonotone { line: usize, frame: u64 },
    #[error("frame {frame}: expected {expected} {what}, got {got}")]
    FrameCardinality {
        frame: u64,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("frame {frame}: unexpected AU id {id:?}")]
    UnknownAu { frame: u64, id: String },
    #[error("manifest: expected {expected} {what}, got {got}")]
    Cardinality {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("manifest: {msg}")]
    Manifest { msg: String },
    #[error("segments {a} and {b} overlap or are out of order")]
    SegmentOverlap { a: usize, b: usize },
    #[error("segment {index} has {len} frames, minimum is {min}")]
    SegmentTooShort { index: usize, len: u64, min: u64 },
    #[error("segment {index} [{start}, {end}) extends past the frame stream ({frames} frames)")]
    SegmentOutOfRange {
        index: usize,
        start: u64,
        end: u64,
        frames: u64,
    },
    #[error("cohort: duplicate subject id {0:?}")]
    DuplicateSubject(String),
}

// ---------------------------------------------------------------------------
// Wire formats

#[derive(Serialize, Deserialize)]
struct FrameWire {
    frame: u64,
    au: BTreeMap<String, f64>,
    au45: bool,
    anu: Vec<f64>,
    rot: Vec<f64>,
    lm: Vec<[f64; 3]>,
    tracked: bool,
}

#[derive(Serialize, Deserialize)]
struct ManifestWire {
    subject_id: String,
    group: Group,
    frame_rate: f64,
    segments: Vec<[u64; 2]>,
    response_times: Vec<f64>,
}

/// One entry of the cohort index file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortEntry {
    pub subject_id: String,
    pub manifest_path: PathBuf,
    pub frames_path: PathBuf,
}

impl FrameRecord {
    fn from_wire(wire: FrameWire) -> Result<FrameRecord, SessionError> {
        let frame = wire.frame;
        if wire.au.len() != AU_IDS.len() {
            return Err(SessionError::FrameCardinality {
                frame,
                what: "AU intensities",
                expected: AU_IDS.len(),
                got: wire.au.len(),
            });
        }
        let mut au_intensity = [0.0; 6];
        for (slot, id) in au_intensity.iter_mut().zip(AU_IDS) {
            let key = id.to_string();
            let value = *wire
                .au
                .get(&key)
                .ok_or_else(|| SessionError::UnknownAu {
                    frame,
                    id: wire
                        .au
                        .keys()
                        .find(|k| !AU_IDS.iter().any(|a| a.to_string() == **k))
                        .cloned()
                        .unwrap_or(key.clone()),
                })?;
            if !value.is_finite() {
                return Err(SessionError::NonFinite {
                    frame,
                    field: format!("au.{id}"),
                });
            }
            if !(0.0..=5.0).contains(&value) {
                return Err(SessionError::OutOfRange {
                    frame,
                    field: format!("au.{id}"),
                    value,
                });
            }
            *slot = value;
        }
        if wire.anu.len() != 12 {
            return Err(SessionError::FrameCardinality {
                frame,
                what: "AnU intensities",
                expected: 12,
                got: wire.anu.len(),
            });
        }
        let mut anu_intensity = [0.0; 12];
        for (i, (slot, &value)) in anu_intensity.iter_mut().zip(&wire.anu).enumerate() {
            if !value.is_finite() {
                return Err(SessionError::NonFinite {
                    frame,
                    field: format!("anu[{i}]"),
                });
            }
            if !(-1.0..=1.0).contains(&value) {
                return Err(SessionError::OutOfRange {
                    frame,
                    field: format!("anu[{i}]"),
                    value,
                });
            }
            *slot = value;
        }
        if wire.rot.len() != 3 {
            return Err(SessionError::FrameCardinality {
                frame,
                what: "rotation components",
                expected: 3,
                got: wire.rot.len(),
            });
        }
        let mut head_rotation = [0.0; 3];
        for (i, (slot, &value)) in head_rotation.iter_mut().zip(&wire.rot).enumerate() {
            if !value.is_finite() {
                return Err(SessionError::NonFinite {
                    frame,
                    field: format!("rot[{i}]"),
                });
            }
            if !(-180.0..180.0).contains(&value) {
                return Err(SessionError::OutOfRange {
                    frame,
                    field: format!("rot[{i}]"),
                    value,
                });
            }
            *slot = value;
        }
        if wire.lm.len() != 8 {
            return Err(SessionError::FrameCardinality {
                frame,
                what: "landmarks",
                expected: 8,
                got: wire.lm.len(),
            });
        }
        let mut landmarks = [[0.0; 3]; 8];
        for (i, (slot, point)) in landmarks.iter_mut().zip(&wire.lm).enumerate() {
            if wire.tracked && point.iter().any(|c| !c.is_finite()) {
                return Err(SessionError::NonFinite {
                    frame,
                    field: format!("lm[{i}]"),
                });
            }
            *slot = *point;
        }
        Ok(FrameRecord {
            frame_index: frame,
            au_intensity,
            au45_active: wire.au45,
            anu_intensity,
            head_rotation,
            landmarks,
            tracked: wire.tracked,
        })
    }

    fn to_wire(&self) -> FrameWire {
        FrameWire {
            frame: self.frame_index,
            au: AU_IDS
                .iter()
                .zip(self.au_intensity)
                .map(|(id, v)| (id.to_string(), v))
                .collect(),
            au45: self.au45_active,
            anu: self.anu_intensity.to_vec(),
            rot: self.head_rotation.to_vec(),
            lm: self.landmarks.to_vec(),
            tracked: self.tracked,
        }
    }

    /// Serializes one frame as a single JSON line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_wire()).expect("frame record serializes")
    }
}

/// Parses a line-delimited frame stream, validating ranges and monotonicity.
pub fn parse_frames<R: BufRead>(reader: R) -> Result<Vec<FrameRecord>, SessionError> {
    let mut records = Vec::new();
    let mut last_index: Option<u64> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| SessionError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: FrameWire = serde_json::from_str(&line).map_err(|e| SessionError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let record = FrameRecord::from_wire(wire)?;
        if let Some(prev) = last_index {
            if record.frame_index <= prev {
                return Err(SessionError::NonMonotone {
                    line: lineno,
                    frame: record.frame_index,
                });
            }
        }
        last_index = Some(record.frame_index);
        records.push(record);
    }
    Ok(records)
}

/// Parses and validates a session manifest document.
pub fn parse_manifest(doc: &str) -> Result<SessionManifest, SessionError> {
    let wire: ManifestWire = serde_json::from_str(doc).map_err(|e| SessionError::Manifest {
        msg: e.to_string(),
    })?;
    if wire.segments.len() != SEGMENT_COUNT {
        return Err(SessionError::Cardinality {
            what: "segments",
            expected: SEGMENT_COUNT,
            got: wire.segments.len(),
        });
    }
    if wire.response_times.len() != SEGMENT_COUNT {
        return Err(SessionError::Cardinality {
            what: "response times",
            expected: SEGMENT_COUNT,
            got: wire.response_times.len(),
        });
    }
    if !(wire.frame_rate.is_finite() && wire.frame_rate > 0.0) {
        return Err(SessionError::Manifest {
            msg: format!("frame_rate must be positive, got {}", wire.frame_rate),
        });
    }
    for (i, rt) in wire.response_times.iter().enumerate() {
        if !(rt.is_finite() && *rt >= 0.0) {
            return Err(SessionError::Manifest {
                msg: format!("response_times[{i}] must be >= 0, got {rt}"),
            });
        }
    }
    let segments: Vec<(u64, u64)> = wire.segments.iter().map(|s| (s[0], s[1])).collect();
    for (i, &(start, end)) in segments.iter().enumerate() {
        if end <= start {
            return Err(SessionError::Manifest {
                msg: format!("segment {i} has empty or inverted interval [{start}, {end})"),
            });
        }
        if end - start < MIN_SEGMENT_FRAMES {
            return Err(SessionError::SegmentTooShort {
                index: i,
                len: end - start,
                min: MIN_SEGMENT_FRAMES,
            });
        }
        if i > 0 && segments[i - 1].1 > start {
            return Err(SessionError::SegmentOverlap { a: i - 1, b: i });
        }
    }
    Ok(SessionManifest {
        subject_id: wire.subject_id,
        group: wire.group,
        frame_rate: wire.frame_rate,
        segments,
        response_times: wire.response_times,
    })
}

impl SessionManifest {
    /// Serializes the manifest as a JSON document.
    pub fn to_json(&self) -> String {
        let wire = ManifestWire {
            subject_id: self.subject_id.clone(),
            group: self.group,
            frame_rate: self.frame_rate,
            segments: self.segments.iter().map(|&(s, e)| [s, e]).collect(),
            response_times: self.response_times.clone(),
        };
        serde_json::to_string_pretty(&wire).expect("manifest serializes")
    }
}

impl SessionRecording {
    /// Pairs a manifest with its frame stream, checking segment coverage.
    pub fn new(
        manifest: SessionManifest,
        frames: Vec<FrameRecord>,
    ) -> Result<SessionRecording, SessionError> {
        let frame_count = frames.last().map(|f| f.frame_index + 1).unwrap_or(0);
        for (i, &(start, end)) in manifest.segments.iter().enumerate() {
            if end > frame_count {
                return Err(SessionError::SegmentOutOfRange {
                    index: i,
                    start,
                    end,
                    frames: frame_count,
                });
            }
        }
        Ok(SessionRecording { manifest, frames })
    }

    /// Slices the recording into its 12 story segments.
    ///
    /// Subsequence `k` contains exactly the frames whose index falls in
    /// `segments[k]`; untracked frames are retained (downstream computations
    /// filter on the `tracked` flag).
    pub fn slice_segments(&self) -> Vec<&[FrameRecord]> {
        self.manifest
            .segments
            .iter()
            .map(|&(start, end)| {
                let lo = self.frames.partition_point(|f| f.frame_index < start);
                let hi = self.frames.partition_point(|f| f.frame_index < end);
                &self.frames[lo..hi]
            })
            .collect()
    }
}

impl Cohort {
    pub fn new(sessions: Vec<SessionRecording>) -> Result<Cohort, SessionError> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &sessions {
            if !seen.insert(s.manifest.subject_id.clone()) {
                return Err(SessionError::DuplicateSubject(s.manifest.subject_id.clone()));
            }
        }
        Ok(Cohort { sessions })
    }
}

/// Loads one session from its manifest and frame-stream files.
pub fn load_session(
    manifest_path: &Path,
    frames_path: &Path,
) -> Result<SessionRecording, crate::Error> {
    let doc = std::fs::read_to_string(manifest_path)
        .map_err(|e| crate::Error::io(manifest_path, e))?;
    let manifest = parse_manifest(&doc)?;
    let file =
        std::fs::File::open(frames_path).map_err(|e| crate::Error::io(frames_path, e))?;
    let frames = parse_frames(std::io::BufReader::new(file))?;
    Ok(SessionRecording::new(manifest, frames)?)
}

/// Reads a cohort index file and returns its entries with paths resolved
/// relative to the index file's directory.
pub fn read_cohort_index(index_path: &Path) -> Result<Vec<CohortEntry>, crate::Error> {
    let doc =
        std::fs::read_to_string(index_path).map_err(|e| crate::Error::io(index_path, e))?;
    let mut entries: Vec<CohortEntry> =
        serde_json::from_str(&doc).map_err(|e| SessionError::Manifest {
            msg: format!("cohort index: {e}"),
        })?;
    let base = index_path.parent().unwrap_or_else(|| Path::new("."));
    for entry in &mut entries {
        if entry.manifest_path.is_relative() {
            entry.manifest_path = base.join(&entry.manifest_path);
        }
        if entry.frames_path.is_relative() {
            entry.frames_path = base.join(&entry.frames_path);
        }
    }
    Ok(entries)
}

/// Loads every session named by a cohort index.
pub fn load_cohort(index_path: &Path) -> Result<Cohort, crate::Error> {
    let entries = read_cohort_index(index_path)?;
    let mut sessions = Vec::with_capacity(entries.len());
    for entry in &entries {
        sessions.push(load_session(&entry.manifest_path, &entry.frames_path)?);
    }
    Ok(Cohort::new(sessions)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn frame_line(index: u64) -> String {
        format!(
            r#"{{"frame":{index},"au":{{"1":0.0,"2":0.0,"4":0.0,"12":0.0,"15":0.0,"20":0.0}},"au45":false,"anu":[0,0,0,0,0,0,0,0,0,0,0,0],"rot":[0,0,0],"lm":[[0,0,1],[0,0,1],[0,0,1],[0,0,1],[0,0,1],[0,0,1],[0,0,1],[0,0,1]],"tracked":true}}"#
        )
    }

    fn manifest_json(segments: &[[u64; 2]]) -> String {
        let rts: Vec<f64> = vec![1.0; segments.len()];
        serde_json::json!({
            "subject_id": "s01",
            "group": "control",
            "frame_rate": 30.0,
            "segments": segments,
            "response_times": rts,
        })
        .to_string()
    }

    fn twelve_equal_segments(len: u64) -> Vec<[u64; 2]> {
        (0..12).map(|k| [k * len, (k + 1) * len]).collect()
    }

    #[test]
    fn empty_stream_yields_empty_sequence() {
        let frames = parse_frames(std::io::Cursor::new("")).unwrap();
        assert!(frames.is_empty());
    }

    #[test]
    fn single_zero_frame_parses() {
        let frames = parse_frames(std::io::Cursor::new(frame_line(0))).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].au_intensity, [0.0; 6]);
        assert!(frames[0].tracked);
    }

    #[test]
    fn non_monotone_frame_index_errors_at_line() {
        let input = [frame_line(0), frame_line(2), frame_line(1)].join("\n");
        let err = parse_frames(std::io::Cursor::new(input)).unwrap_err();
        match err {
            SessionError::NonMonotone { line, frame } => {
                assert_eq!(line, 3);
                assert_eq!(frame, 1);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn out_of_range_au_rejected() {
        let line = frame_line(0).replace(r#""1":0.0"#, r#""1":5.5"#);
        let err = parse_frames(std::io::Cursor::new(line)).unwrap_err();
        match err {
            SessionError::OutOfRange { field, value, .. } => {
                assert_eq!(field, "au.1");
                assert_eq!(value, 5.5);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn malformed_line_names_line_number() {
        let input = format!("{}\nnot json", frame_line(0));
        let err = parse_frames(std::io::Cursor::new(input)).unwrap_err();
        match err {
            SessionError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn well_formed_manifest_parses() {
        let m = parse_manifest(&manifest_json(&twelve_equal_segments(100))).unwrap();
        assert_eq!(m.segments.len(), 12);
        assert_eq!(m.frame_rate, 30.0);
        assert_eq!(m.group, Group::Control);
    }

    #[test]
    fn eleven_segments_is_cardinality_error() {
        let segments: Vec<[u64; 2]> = (0..11).map(|k| [k * 100, (k + 1) * 100]).collect();
        let mut doc: serde_json::Value =
            serde_json::from_str(&manifest_json(&twelve_equal_segments(100))).unwrap();
        doc["segments"] = serde_json::json!(segments);
        let err = parse_manifest(&doc.to_string()).unwrap_err();
        assert!(matches!(
            err,
            SessionError::Cardinality { what: "segments", expected: 12, got: 11 }
        ));
    }

    #[test]
    fn overlapping_segments_rejected() {
        let mut segments = twelve_equal_segments(100);
        segments[1] = [90, 200];
        let err = parse_manifest(&manifest_json(&segments)).unwrap_err();
        assert!(matches!(err, SessionError::SegmentOverlap { a: 0, b: 1 }));
    }

    #[test]
    fn short_segment_rejected() {
        let mut segments = twelve_equal_segments(100);
        segments[0] = [0, 20];
        segments[1] = [20, 200];
        let err = parse_manifest(&manifest_json(&segments)).unwrap_err();
        assert!(matches!(err, SessionError::SegmentTooShort { index: 0, len: 20, .. }));
    }

    fn recording(frame_count: u64, seg_len: u64) -> SessionRecording {
        let manifest = parse_manifest(&manifest_json(&twelve_equal_segments(seg_len))).unwrap();
        let lines: Vec<String> = (0..frame_count).map(frame_line).collect();
        let frames = parse_frames(std::io::Cursor::new(lines.join("\n"))).unwrap();
        SessionRecording::new(manifest, frames).unwrap()
    }

    #[test]
    fn twelve_equal_slices() {
        let rec = recording(1200, 100);
        let slices = rec.slice_segments();
        assert_eq!(slices.len(), 12);
        assert!(slices.iter().all(|s| s.len() == 100));
    }

    #[test]
    fn minimum_length_segment_slices() {
        let manifest = parse_manifest(&manifest_json(&twelve_equal_segments(21))).unwrap();
        let lines: Vec<String> = (0..252).map(frame_line).collect();
        let frames = parse_frames(std::io::Cursor::new(lines.join("\n"))).unwrap();
        let rec = SessionRecording::new(manifest, frames).unwrap();
        assert_eq!(rec.slice_segments()[0].len(), 21);
    }

    #[test]
    fn segment_past_last_frame_is_range_error() {
        let manifest = parse_manifest(&manifest_json(&twelve_equal_segments(100))).unwrap();
        let lines: Vec<String> = (0..1199).map(frame_line).collect();
        let frames = parse_frames(std::io::Cursor::new(lines.join("\n"))).unwrap();
        let err = SessionRecording::new(manifest, frames).unwrap_err();
        assert!(matches!(err, SessionError::SegmentOutOfRange { index: 11, .. }));
    }

    #[test]
    fn slices_concatenate_to_covered_frames() {
        let rec = recording(1200, 100);
        let slices = rec.slice_segments();
        let concatenated: Vec<u64> = slices
            .iter()
            .flat_map(|s| s.iter().map(|f| f.frame_index))
            .collect();
        let expected: Vec<u64> = (0..1200).collect();
        assert_eq!(concatenated, expected);
    }

    #[test]
    fn frame_round_trip() {
        let line = frame_line(7);
        let parsed = parse_frames(std::io::Cursor::new(line)).unwrap();
        let reparsed =
            parse_frames(std::io::Cursor::new(parsed[0].to_json_line())).unwrap();
        assert_eq!(parsed, reparsed);
    }

    #[test]
    fn manifest_round_trip() {
        let m = parse_manifest(&manifest_json(&twelve_equal_segments(100))).unwrap();
        let again = parse_manifest(&m.to_json()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn duplicate_subject_ids_rejected() {
        let a = recording(1200, 100);
        let b = a.clone();
        let err = Cohort::new(vec![a, b]).unwrap_err();
        assert!(matches!(err, SessionError::DuplicateSubject(_)));
    }
}
