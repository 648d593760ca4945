//! Per-segment behavioral feature families and assembly of the canonical
//! 2976-dimensional session descriptor.
//!
//! Per segment: 6 AU intensity histograms (10 bins each on [0, 5]) plus blink
//! frequency and mean blink duration (62 dims), 12 AnU histograms (10 bins on
//! [-1, 1], 120 dims), 3 head-rotation-deviation histograms (18 bins centred
//! on [-45, 45], 54 dims), a head-speed histogram (10 bins on [0, 0.5] m/s),
//! and the cumulative centroid distance (1 dim). Every per-segment entry is
//! divided by the segment's total frame count; the 12 response times are
//! appended unscaled.
//!
//! Untracked frames are excluded from every histogram, speed, and distance
//! computation but still count toward the normalizing frame total.

use std::sync::LazyLock;

use thiserror::Error;

use crate::session::{FrameRecord, SessionRecording, ANU_IDS, AU_IDS, SEGMENT_COUNT};

pub const AU_FEATURE_LEN: usize = 62;
pub const ANU_FEATURE_LEN: usize = 120;
pub const HEADPOSE_FEATURE_LEN: usize = 54;
pub const SPEED_FEATURE_LEN: usize = 10;
pub const SEGMENT_FEATURE_LEN: usize =
    AU_FEATURE_LEN + ANU_FEATURE_LEN + HEADPOSE_FEATURE_LEN + SPEED_FEATURE_LEN + 1;
/// 12 segments of 247 features each, plus 12 response times.
pub const FEATURE_LEN: usize = SEGMENT_COUNT * SEGMENT_FEATURE_LEN + SEGMENT_COUNT;

const HISTOGRAM_BINS: usize = 10;
const POSE_BINS: usize = 18;
const POSE_BIN_STEP: f64 = 90.0 / 17.0;
const SPEED_RANGE: f64 = 0.5;
const SPEED_WINDOW: usize = 20;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("segment has no frames")]
    EmptySegment,
    #[error("segment has fewer than 2 tracked frames")]
    InsufficientData,
    #[error("session has no tracked frames")]
    DegenerateSession,
    #[error("segment {segment}: {source}")]
    Assembly {
        segment: usize,
        source: Box<FeatureError>,
    },
}

/// Raw (pre-normalization) per-segment feature families.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    pub f_au: Vec<f64>,
    pub f_an: Vec<f64>,
    pub f_hp: Vec<f64>,
    pub f_sp: Vec<f64>,
    pub f_cd: f64,
}

/// Per-axis median head rotation over a session's tracked frames, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianPose {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

/// The assembled 2976-dimensional session descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

fn tracked(segment: &[FrameRecord]) -> impl Iterator<Item = &FrameRecord> {
    segment.iter().filter(|f| f.tracked)
}

/// 10-bin count histogram over uniform bins on [lo, hi], last bin
/// right-inclusive. Values are assumed in range (validated at parse time).
fn histogram10(values: impl Iterator<Item = f64>, lo: f64, hi: f64) -> [f64; HISTOGRAM_BINS] {
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut bins = [0.0; HISTOGRAM_BINS];
    for v in values {
        let mut bin = ((v - lo) / width) as usize;
        if bin >= HISTOGRAM_BINS {
            bin = HISTOGRAM_BINS - 1;
        }
        bins[bin] += 1.0;
    }
    bins
}

/// AU intensity histograms plus blink statistics, 62 entries.
///
/// Blink frequency counts maximal runs of `au45_active` among consecutive
/// segment frames (untracked frames break a run); mean blink duration is the
/// mean run length divided by the frame rate, in seconds, 0 when no blinks.
pub fn au_features(segment: &[FrameRecord], frame_rate: f64) -> Result<Vec<f64>, FeatureError> {
    if segment.is_empty() {
        return Err(FeatureError::EmptySegment);
    }
    let mut out = Vec::with_capacity(AU_FEATURE_LEN);
    for au in 0..AU_IDS.len() {
        let hist = histogram10(tracked(segment).map(|f| f.au_intensity[au]), 0.0, 5.0);
        out.extend_from_slice(&hist);
    }
    let mut runs = 0usize;
    let mut total_len = 0usize;
    let mut current = 0usize;
    for frame in segment {
        if frame.tracked && frame.au45_active {
            current += 1;
        } else if current > 0 {
            runs += 1;
            total_len += current;
            current = 0;
        }
    }
    if current > 0 {
        runs += 1;
        total_len += current;
    }
    out.push(runs as f64);
    let mean_duration = if runs > 0 {
        total_len as f64 / runs as f64 / frame_rate
    } else {
        0.0
    };
    out.push(mean_duration);
    debug_assert_eq!(out.len(), AU_FEATURE_LEN);
    Ok(out)
}

/// AnU intensity histograms, 120 entries.
pub fn anu_features(segment: &[FrameRecord]) -> Result<Vec<f64>, FeatureError> {
    if segment.is_empty() {
        return Err(FeatureError::EmptySegment);
    }
    let mut out = Vec::with_capacity(ANU_FEATURE_LEN);
    for anu in 0..ANU_IDS.len() {
        let hist = histogram10(tracked(segment).map(|f| f.anu_intensity[anu]), -1.0, 1.0);
        out.extend_from_slice(&hist);
    }
    debug_assert_eq!(out.len(), ANU_FEATURE_LEN);
    Ok(out)
}

fn lower_middle_median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[(values.len() - 1) / 2]
}

/// Per-axis median head rotation over all tracked frames of the session.
/// Even counts take the lower-middle order statistic.
pub fn median_pose(session: &SessionRecording) -> Result<MedianPose, FeatureError> {
    let mut axes: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for frame in session.frames.iter().filter(|f| f.tracked) {
        for (axis, &angle) in axes.iter_mut().zip(&frame.head_rotation) {
            axis.push(angle);
        }
    }
    if axes[0].is_empty() {
        return Err(FeatureError::DegenerateSession);
    }
    Ok(MedianPose {
        pitch: lower_middle_median(&mut axes[0]),
        yaw: lower_middle_median(&mut axes[1]),
        roll: lower_middle_median(&mut axes[2]),
    })
}

/// Wraps an angle difference to [-180, 180).
fn wrap_angle(d: f64) -> f64 {
    (d + 180.0).rem_euclid(360.0) - 180.0
}

/// Bin index for a rotation deviation: 18 bins with equally spaced centres
/// from -45 to 45 degrees, edges midway between centres, out-of-range values
/// clamped into the extreme bins.
pub fn pose_bin(deviation: f64) -> usize {
    let k = (deviation / POSE_BIN_STEP + 9.0).floor();
    k.clamp(0.0, (POSE_BINS - 1) as f64) as usize
}

/// Head-rotation-deviation histograms (pitch, yaw, roll), 54 entries.
pub fn headpose_features(
    segment: &[FrameRecord],
    median: &MedianPose,
) -> Result<Vec<f64>, FeatureError> {
    if segment.is_empty() {
        return Err(FeatureError::EmptySegment);
    }
    let reference = [median.pitch, median.yaw, median.roll];
    let mut out = vec![0.0; HEADPOSE_FEATURE_LEN];
    for frame in tracked(segment) {
        for axis in 0..3 {
            let deviation = wrap_angle(frame.head_rotation[axis] - reference[axis]);
            out[axis * POSE_BINS + pose_bin(deviation)] += 1.0;
        }
    }
    Ok(out)
}

/// Per-tracked-frame centroid of the 8 stable landmarks; untracked frames are
/// omitted, so the track is the subsequence of tracked frames.
pub fn centroid_track(segment: &[FrameRecord]) -> Result<Vec<[f64; 3]>, FeatureError> {
    if segment.is_empty() {
        return Err(FeatureError::EmptySegment);
    }
    Ok(tracked(segment)
        .map(|frame| {
            let mut c = [0.0; 3];
            for point in &frame.landmarks {
                for (acc, coord) in c.iter_mut().zip(point) {
                    *acc += coord;
                }
            }
            c.map(|v| v / frame.landmarks.len() as f64)
        })
        .collect())
}

fn displacement(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let dz = b[2] - a[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn raw_speeds(track: &[[f64; 3]], frame_rate: f64) -> Vec<f64> {
    track
        .windows(2)
        .map(|w| displacement(&w[0], &w[1]) * frame_rate)
        .collect()
}

/// Head-speed histogram, 10 entries.
///
/// Raw speeds are centroid displacements times the frame rate, smoothed by a
/// trailing moving average over the last `min(20, available)` raw speeds,
/// then binned on [0, 0.5] m/s with values above range clamped into the last
/// bin.
pub fn speed_features(segment: &[FrameRecord], frame_rate: f64) -> Result<Vec<f64>, FeatureError> {
    let track = centroid_track(segment)?;
    if track.len() < 2 {
        return Err(FeatureError::InsufficientData);
    }
    let raw = raw_speeds(&track, frame_rate);
    let mut bins = vec![0.0; SPEED_FEATURE_LEN];
    let width = SPEED_RANGE / SPEED_FEATURE_LEN as f64;
    let mut window_sum = 0.0;
    for (i, &s) in raw.iter().enumerate() {
        window_sum += s;
        if i >= SPEED_WINDOW {
            window_sum -= raw[i - SPEED_WINDOW];
        }
        let smoothed = window_sum / (i.min(SPEED_WINDOW - 1) + 1) as f64;
        let mut bin = (smoothed / width) as usize;
        if bin >= SPEED_FEATURE_LEN {
            bin = SPEED_FEATURE_LEN - 1;
        }
        bins[bin] += 1.0;
    }
    Ok(bins)
}

/// Total centroid path length over the segment, meters.
pub fn cumulative_distance(segment: &[FrameRecord]) -> Result<f64, FeatureError> {
    let track = centroid_track(segment)?;
    if track.len() < 2 {
        return Err(FeatureError::InsufficientData);
    }
    Ok(track.windows(2).map(|w| displacement(&w[0], &w[1])).sum())
}

/// Computes all raw (pre-normalization) families for one segment.
pub fn segment_features(
    segment: &[FrameRecord],
    frame_rate: f64,
    median: &MedianPose,
) -> Result<SegmentFeatures, FeatureError> {
    Ok(SegmentFeatures {
        f_au: au_features(segment, frame_rate)?,
        f_an: anu_features(segment)?,
        f_hp: headpose_features(segment, median)?,
        f_sp: speed_features(segment, frame_rate)?,
        f_cd: cumulative_distance(segment)?,
    })
}

/// Assembles the canonical session descriptor: per segment every family entry
/// is divided by that segment's total frame count (tracked + untracked), then
/// the 12 response times are appended unscaled.
pub fn assemble(session: &SessionRecording) -> Result<FeatureVector, FeatureError> {
    let median = median_pose(session)?;
    let segments = session.slice_segments();
    let mut values = Vec::with_capacity(FEATURE_LEN);
    for (k, segment) in segments.iter().enumerate() {
        let features =
            segment_features(segment, session.manifest.frame_rate, &median).map_err(|e| {
                FeatureError::Assembly {
                    segment: k + 1,
                    source: Box::new(e),
                }
            })?;
        let divisor = segment.len() as f64;
        let all = features
            .f_au
            .iter()
            .chain(&features.f_an)
            .chain(&features.f_hp)
            .chain(&features.f_sp)
            .chain(std::iter::once(&features.f_cd));
        values.extend(all.map(|v| v / divisor));
    }
    values.extend_from_slice(&session.manifest.response_times);
    debug_assert_eq!(values.len(), FEATURE_LEN);
    Ok(FeatureVector { values })
}

/// Human-readable names for all 2976 dimensions, in canonical order.
pub fn feature_names() -> &'static [String] {
    static NAMES: LazyLock<Vec<String>> = LazyLock::new(|| {
        let mut names = Vec::with_capacity(FEATURE_LEN);
        for seg in 1..=SEGMENT_COUNT {
            for au in AU_IDS {
                for bin in 0..HISTOGRAM_BINS {
                    names.push(format!("seg{seg:02}.au{au}.bin{bin:02}"));
                }
            }
            names.push(format!("seg{seg:02}.blink.freq"));
            names.push(format!("seg{seg:02}.blink.dur"));
            for anu in ANU_IDS {
                for bin in 0..HISTOGRAM_BINS {
                    names.push(format!("seg{seg:02}.anu.{anu}.bin{bin:02}"));
                }
            }
            for axis in ["pitch", "yaw", "roll"] {
                for bin in 0..POSE_BINS {
                    names.push(format!("seg{seg:02}.hp.{axis}.bin{bin:02}"));
                }
            }
            for bin in 0..SPEED_FEATURE_LEN {
                names.push(format!("seg{seg:02}.sp.bin{bin:02}"));
            }
            names.push(format!("seg{seg:02}.cd"));
        }
        for seg in 1..=SEGMENT_COUNT {
            names.push(format!("rt.seg{seg:02}"));
        }
        debug_assert_eq!(names.len(), FEATURE_LEN);
        names
    });
    &NAMES
}
