//! Deterministic synthetic cohort generator.
//!
//! Stands in for a private recording corpus: each subject gets a 12-segment
//! session whose blink, expression, head-pose, and head-motion statistics are
//! drawn from a group profile. A separation parameter scales how far each
//! group's profile sits from a shared baseline; at zero separation all groups
//! are statistically identical.
//!
//! The pseudorandom source is ChaCha8 (rand_chacha's `ChaCha8Rng`), seeded
//! per subject from the cohort seed mixed with the subject ordinal, so
//! cohorts are reproducible across platforms and subjects can be generated
//! independently.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{
    Cohort, FrameRecord, Group, SessionManifest, SessionRecording, MIN_SEGMENT_FRAMES,
    SEGMENT_COUNT,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("config field {field}: {msg}")]
    Config { field: &'static str, msg: String },
}

/// Group-dependent behavioral statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProfile {
    /// Mean blink rate, blinks per minute.
    pub blink_rate: f64,
    /// Typical head speed scale, m/s.
    pub head_speed: f64,
    /// Stationary std of head-rotation drift, degrees.
    pub pose_drift: f64,
    /// Per-frame activation probability for each of the 6 AUs.
    pub au_activation: [f64; 6],
    /// Mean intensity of an active AU.
    pub au_intensity: [f64; 6],
    /// AnU mean offset and noise std.
    pub anu_bias: f64,
    pub anu_noise: f64,
    /// Response-time mean and std, seconds.
    pub rt_mean: f64,
    pub rt_std: f64,
}

fn shared_baseline() -> GroupProfile {
    GroupProfile {
        blink_rate: 15.0,
        head_speed: 0.02,
        pose_drift: 4.0,
        au_activation: [0.10; 6],
        au_intensity: [1.0; 6],
        anu_bias: 0.0,
        anu_noise: 0.20,
        rt_mean: 6.0,
        rt_std: 1.5,
    }
}

/// Profile for a group at separation `delta`: baseline plus delta-scaled
/// group offsets. Expression-side offsets mark the ASD axis, motion-side
/// offsets the ADHD axis; the comorbid group carries both.
fn group_profile(group: Group, delta: f64) -> GroupProfile {
    let mut p = shared_baseline();
    let asd = matches!(group, Group::Asd | Group::Comorbid);
    let adhd = matches!(group, Group::Adhd | Group::Comorbid);
    if asd {
        for a in &mut p.au_activation {
            *a = (*a + 0.18 * delta).min(0.95);
        }
        for m in &mut p.au_intensity {
            *m += 1.2 * delta;
        }
        p.anu_bias += 0.25 * delta;
        p.rt_mean += 4.0 * delta;
    }
    if adhd {
        p.head_speed += 0.05 * delta;
        p.pose_drift += 10.0 * delta;
        p.blink_rate += 18.0 * delta;
    }
    p
}

/// Generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Subjects per group; groups absent from the map get zero subjects.
    pub subjects: BTreeMap<Group, usize>,
    /// Separation between group profiles and the shared baseline; 0 makes
    /// all groups identical.
    pub separation: f64,
    pub frame_rate: f64,
    pub frames_per_segment: u64,
    /// Per-frame probability of a tracking dropout.
    pub dropout: f64,
}

impl Default for GeneratorConfig {
    fn default() -> GeneratorConfig {
        let mut subjects = BTreeMap::new();
        subjects.insert(Group::Control, 4);
        subjects.insert(Group::Asd, 4);
        GeneratorConfig {
            seed: 0,
            subjects,
            separation: 1.0,
            frame_rate: 30.0,
            frames_per_segment: 120,
            dropout: 0.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.frames_per_segment < MIN_SEGMENT_FRAMES {
            return Err(SynthError::Config {
                field: "frames_per_segment",
                msg: format!(
                    "must be >= {MIN_SEGMENT_FRAMES}, got {}",
                    self.frames_per_segment
                ),
            });
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(SynthError::Config {
                field: "frame_rate",
                msg: format!("must be positive, got {}", self.frame_rate),
            });
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(SynthError::Config {
                field: "dropout",
                msg: format!("must be in [0, 1), got {}", self.dropout),
            });
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(SynthError::Config {
                field: "separation",
                msg: format!("must be >= 0, got {}", self.separation),
            });
        }
        Ok(())
    }
}

/// Landmark template: 4 eye corners + 4 nose points relative to head centre,
/// meters.
const LANDMARK_OFFSETS: [[f64; 3]; 8] = [
    [-0.045, 0.030, 0.020],
    [-0.015, 0.030, 0.020],
    [0.015, 0.030, 0.020],
    [0.045, 0.030, 0.020],
    [0.000, 0.000, 0.045],
    [0.000, -0.010, 0.050],
    [-0.008, -0.015, 0.042],
    [0.008, -0.015, 0.042],
];

const HEAD_BASE: [f64; 3] = [0.0, 0.0, 0.9];

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream simple and portable
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn subject_rng(seed: u64, ordinal: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ ordinal.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn clamp_rotation(r: f64) -> f64 {
    r.clamp(-179.999, 179.999)
}

fn generate_session(
    subject_id: &str,
    group: Group,
    cfg: &GeneratorConfig,
    ordinal: u64,
) -> SessionRecording {
    let profile = group_profile(group, cfg.separation);
    let mut rng = subject_rng(cfg.seed, ordinal);
    let f = cfg.frame_rate;
    let total_frames = cfg.frames_per_segment * SEGMENT_COUNT as u64;

    // mean-reverting random walks for head centre and rotation
    let kappa_pos = 0.05;
    let step_pos = profile.head_speed / f;
    let kappa_rot = 0.02_f64;
    let step_rot = profile.pose_drift * (2.0 * kappa_rot).sqrt();

    let mut centre = HEAD_BASE;
    let mut rotation = [0.0f64; 3];
    let blink_start_p = profile.blink_rate / (60.0 * f);
    let mut blink_left = 0u64;

    let mut frames = Vec::with_capacity(total_frames as usize);
    for idx in 0..total_frames {
        for (c, base) in centre.iter_mut().zip(HEAD_BASE) {
            *c += kappa_pos * (base - *c) + step_pos * gaussian(&mut rng);
            // seated-subject plausibility bound: stay inside a 0.5 m cube
            *c = c.clamp(base - 0.25, base + 0.25);
        }
        for r in rotation.iter_mut() {
            *r += kappa_rot * (0.0 - *r) + step_rot * gaussian(&mut rng);
            *r = clamp_rotation(*r);
        }
        if blink_left == 0 && rng.gen::<f64>() < blink_start_p {
            // blink duration around 4 frames
            blink_left = 2 + rng.gen_range(0..5);
        }
        let au45 = blink_left > 0;
        blink_left = blink_left.saturating_sub(1);

        let mut au_intensity = [0.0f64; 6];
        for (i, a) in au_intensity.iter_mut().enumerate() {
            let v = if rng.gen::<f64>() < profile.au_activation[i] {
                profile.au_intensity[i] + 0.5 * gaussian(&mut rng)
            } else {
                0.08 * gaussian(&mut rng).abs()
            };
            *a = v.clamp(0.0, 5.0);
        }
        let mut anu_intensity = [0.0f64; 12];
        for a in anu_intensity.iter_mut() {
            *a = (profile.anu_bias + profile.anu_noise * gaussian(&mut rng)).clamp(-1.0, 1.0);
        }

        let seg_pos = idx % cfg.frames_per_segment;
        // keep the first two frames of each segment tracked so every segment
        // has a usable centroid track
        let tracked = seg_pos < 2 || rng.gen::<f64>() >= cfg.dropout;
        let landmarks = LANDMARK_OFFSETS.map(|o| {
            [centre[0] + o[0], centre[1] + o[1], centre[2] + o[2]]
        });
        frames.push(FrameRecord {
            frame_index: idx,
            au_intensity,
            au45_active: au45,
            anu_intensity,
            head_rotation: rotation.map(clamp_rotation),
            landmarks,
            tracked,
        });
    }

    let response_times: Vec<f64> = (0..SEGMENT_COUNT)
        .map(|_| (profile.rt_mean + profile.rt_std * gaussian(&mut rng)).max(0.0))
        .collect();
    let segments: Vec<(u64, u64)> = (0..SEGMENT_COUNT as u64)
        .map(|k| (k * cfg.frames_per_segment, (k + 1) * cfg.frames_per_segment))
        .collect();
    let manifest = SessionManifest {
        subject_id: subject_id.to_string(),
        group,
        frame_rate: f,
        segments,
        response_times,
    };
    SessionRecording::new(manifest, frames).expect("generated session is valid")
}

fn group_prefix(group: Group) -> &'static str {
    match group {
        Group::Control => "ctl",
        Group::Asd => "asd",
        Group::Adhd => "adh",
        Group::Comorbid => "cmb",
    }
}

/// Generates a cohort fully determined by the config seed.
pub fn generate(cfg: &GeneratorConfig) -> Result<Cohort, SynthError> {
    cfg.validate()?;
    let mut sessions = Vec::new();
    let mut ordinal = 0u64;
    for (&group, &count) in &cfg.subjects {
        for k in 0..count {
            let id = format!("{}{:02}", group_prefix(group), k + 1);
            sessions.push(generate_session(&id, group, cfg, ordinal));
            ordinal += 1;
        }
    }
    Ok(Cohort::new(sessions).expect("generated subject ids are distinct"))
}
