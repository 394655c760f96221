//! 18-point body keypoints: normalization and validity screening.
//!
//! Keypoint order (index → joint):
//! 0 nose, 1 neck, 2 right shoulder, 3 right elbow, 4 right wrist,
//! 5 left shoulder, 6 left elbow, 7 left wrist, 8 right hip, 9 right knee,
//! 10 right ankle, 11 left hip, 12 left knee, 13 left ankle, 14 right eye,
//! 15 left eye, 16 right ear, 17 left ear.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_KEYPOINTS: usize = 18;

pub const NOSE: usize = 0;
pub const NECK: usize = 1;
pub const R_SHOULDER: usize = 2;
pub const R_ELBOW: usize = 3;
pub const R_WRIST: usize = 4;
pub const L_SHOULDER: usize = 5;
pub const L_ELBOW: usize = 6;
pub const L_WRIST: usize = 7;
pub const R_HIP: usize = 8;
pub const R_KNEE: usize = 9;
pub const R_ANKLE: usize = 10;
pub const L_HIP: usize = 11;
pub const L_KNEE: usize = 12;
pub const L_ANKLE: usize = 13;

/// Body segments whose length is bounded by [`PoseValidConfig::limb_length`].
pub const LIMBS: [(usize, usize); 13] = [
    (NECK, NOSE),
    (NECK, R_SHOULDER),
    (R_SHOULDER, R_ELBOW),
    (R_ELBOW, R_WRIST),
    (NECK, L_SHOULDER),
    (L_SHOULDER, L_ELBOW),
    (L_ELBOW, L_WRIST),
    (NECK, R_HIP),
    (R_HIP, R_KNEE),
    (R_KNEE, R_ANKLE),
    (NECK, L_HIP),
    (L_HIP, L_KNEE),
    (L_KNEE, L_ANKLE),
];

/// Right/left segment pairs compared by [`PoseValidConfig::symmetry_ratio`].
pub const SYMMETRIC_PAIRS: [((usize, usize), (usize, usize)); 6] = [
    ((NECK, R_SHOULDER), (NECK, L_SHOULDER)),
    ((R_SHOULDER, R_ELBOW), (L_SHOULDER, L_ELBOW)),
    ((R_ELBOW, R_WRIST), (L_ELBOW, L_WRIST)),
    ((NECK, R_HIP), (NECK, L_HIP)),
    ((R_HIP, R_KNEE), (L_HIP, L_KNEE)),
    ((R_KNEE, R_ANKLE), (L_KNEE, L_ANKLE)),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    fn distance(&self, other: &Keypoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Pixel-space pose of one sample; `y` grows downwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecord {
    pub name: String,
    keypoints: [Keypoint; NUM_KEYPOINTS],
}

impl PoseRecord {
    pub fn new(name: impl Into<String>, keypoints: [Keypoint; NUM_KEYPOINTS]) -> Result<Self> {
        let name = name.into();
        if let Some(i) = keypoints
            .iter()
            .position(|k| !(0.0..=1.0).contains(&k.confidence) || !k.x.is_finite() || !k.y.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "pose `{name}`: keypoint {i} has non-finite coordinates or confidence outside [0, 1]"
            )));
        }
        Ok(Self { name, keypoints })
    }

    pub fn keypoints(&self) -> &[Keypoint; NUM_KEYPOINTS] {
        &self.keypoints
    }

    pub fn keypoint(&self, i: usize) -> &Keypoint {
        &self.keypoints[i]
    }
}

/// Translates the neck to the origin and divides by the neck–left-hip
/// distance. Confidences are untouched.
pub fn normalize_pose(pose: &PoseRecord, confidence_floor: f64) -> Result<PoseRecord> {
    for anchor in [NECK, L_HIP] {
        if pose.keypoints[anchor].confidence < confidence_floor {
            return Err(Error::MissingAnchor {
                name: pose.name.clone(),
                keypoint: anchor,
            });
        }
    }
    let neck = pose.keypoints[NECK];
    let height = neck.distance(&pose.keypoints[L_HIP]);
    if !(height > 1e-6) {
        return Err(Error::DegeneratePose {
            name: pose.name.clone(),
        });
    }
    let mut keypoints = pose.keypoints;
    for k in keypoints.iter_mut() {
        k.x = (k.x - neck.x) / height;
        k.y = (k.y - neck.y) / height;
    }
    Ok(PoseRecord {
        name: pose.name.clone(),
        keypoints,
    })
}

/// Thresholds for [`pose_valid`]. A `None` bound disables that check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseValidConfig {
    pub confidence_floor: f64,
    pub min_visible: usize,
    /// Allowed segment length in body heights.
    pub limb_length: Option<(f64, f64)>,
    /// Allowed right/left length ratio of paired segments.
    pub symmetry_ratio: Option<(f64, f64)>,
    /// Require the nose (when visible) above the hip midpoint.
    pub head_above_hips: bool,
}

impl Default for PoseValidConfig {
    fn default() -> Self {
        Self {
            confidence_floor: 0.3,
            min_visible: 6,
            limb_length: Some((0.05, 3.0)),
            symmetry_ratio: Some((1.0 / 3.0, 3.0)),
            head_above_hips: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum PoseIssue {
    NoPose,
    MissingKeypoints { visible: usize, required: usize },
    MissingAnchor { keypoint: usize },
    DegeneratePose,
    LimbLength { from: usize, to: usize, length: f64 },
    Asymmetry { right: (usize, usize), left: (usize, usize), ratio: f64 },
    Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseVerdict {
    pub valid: bool,
    pub issues: Vec<PoseIssue>,
}

impl PoseVerdict {
    pub(crate) fn invalid(issue: PoseIssue) -> Self {
        Self {
            valid: false,
            issues: vec![issue],
        }
    }
}

/// Screens a pose for failed keypoint extraction. Every failing check is
/// reported; the pose is valid iff none fail.
pub fn pose_valid(pose: &PoseRecord, config: &PoseValidConfig) -> PoseVerdict {
    let floor = config.confidence_floor;
    let visible = |i: usize| pose.keypoints[i].confidence >= floor;
    let mut issues = Vec::new();

    let n_visible = (0..NUM_KEYPOINTS).filter(|&i| visible(i)).count();
    if n_visible < config.min_visible {
        issues.push(PoseIssue::MissingKeypoints {
            visible: n_visible,
            required: config.min_visible,
        });
    }

    let normalized = match normalize_pose(pose, floor) {
        Ok(p) => p,
        Err(Error::MissingAnchor { .. }) => {
            for anchor in [NECK, L_HIP] {
                if !visible(anchor) {
                    issues.push(PoseIssue::MissingAnchor { keypoint: anchor });
                }
            }
            return PoseVerdict { valid: false, issues };
        }
        Err(_) => {
            issues.push(PoseIssue::DegeneratePose);
            return PoseVerdict { valid: false, issues };
        }
    };
    let kp = &normalized.keypoints;
    let seg = |(a, b): (usize, usize)| (visible(a) && visible(b)).then(|| kp[a].distance(&kp[b]));

    if let Some((lo, hi)) = config.limb_length {
        for &(a, b) in &LIMBS {
            if let Some(len) = seg((a, b)) {
                if !(lo..=hi).contains(&len) {
                    issues.push(PoseIssue::LimbLength { from: a, to: b, length: len });
                }
            }
        }
    }

    if let Some((lo, hi)) = config.symmetry_ratio {
        for &(right, left) in &SYMMETRIC_PAIRS {
            if let (Some(r), Some(l)) = (seg(right), seg(left)) {
                let ratio = r / l;
                if !(lo..=hi).contains(&ratio) {
                    issues.push(PoseIssue::Asymmetry { right, left, ratio });
                }
            }
        }
    }

    if config.head_above_hips && visible(NOSE) {
        let hip_y = if visible(R_HIP) {
            0.5 * (kp[L_HIP].y + kp[R_HIP].y)
        } else {
            kp[L_HIP].y
        };
        if !(kp[NOSE].y < hip_y) {
            issues.push(PoseIssue::Orientation);
        }
    }

    PoseVerdict {
        valid: issues.is_empty(),
        issues,
    }
}
