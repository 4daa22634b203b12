//! Versioned JSON file formats.
//!
//! All formats carry `"version": "1"`. Joint indices are 0-based and the root's
//! parent is written as `-1`. Positions and relation vectors are in mm.
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! write/read cycle reproduces every finite value bit for bit.
//!
//! Sequence file:
//!
//! ```json
//! { "version": "1", "joint_count": 3, "dims": 3, "parents": [-1, 0, 1],
//!   "units": "mm", "frames": [[[x, y, z], ...K], ...T] }
//! ```
//!
//! Problem file: the same header plus `single_frame` (T x K x D), `bones`
//! (T x K, `null` at the root), `displacements` keyed by duration (T x K,
//! `null` where `t - d` is outside the sequence), `durations`, `alpha` and
//! `gamma`.
//!
//! Relation-map file: a grid header and a list of maps, each with its joint,
//! kind, optional duration, anchor and row-major `height x width x dims` values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relations::{GridTransform, RelationError, RelationMap, RelationVectors};
use crate::skeleton::{JointTree, PoseSequence, SkeletonError};
use crate::tracker::{DurationSet, TrackerConfig, TrackerError, TrackingProblem};

pub const FORMAT_VERSION: &str = "1";
pub const UNITS: &str = "mm";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format version {0:?}, expected \"1\"")]
    Version(String),
    #[error("unsupported units {0:?}, expected \"mm\"")]
    Units(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Relation(#[from] RelationError),
}

fn check_version(v: &str) -> Result<(), FormatError> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(FormatError::Version(v.to_string()))
    }
}

fn version() -> String {
    FORMAT_VERSION.to_string()
}

fn units() -> String {
    UNITS.to_string()
}

type Frames = Vec<Vec<Vec<f64>>>;
type SparseFrames = Vec<Vec<Option<Vec<f64>>>>;

fn pose_to_frames(pose: &PoseSequence) -> Frames {
    (0..pose.frames()).map(|t| (0..pose.joints()).map(|k| pose.get(t, k).to_vec()).collect()).collect()
}

fn frames_to_pose(frames: &Frames, joints: usize, dims: usize) -> Result<PoseSequence, FormatError> {
    let mut data = Vec::with_capacity(frames.len() * joints * dims);
    for (t, frame) in frames.iter().enumerate() {
        if frame.len() != joints {
            return Err(FormatError::Invalid(format!("frame {t} has {} joints, expected {joints}", frame.len())));
        }
        for (k, v) in frame.iter().enumerate() {
            if v.len() != dims {
                return Err(FormatError::Invalid(format!(
                    "frame {t}, joint {k} has {} coordinates, expected {dims}",
                    v.len()
                )));
            }
            data.extend_from_slice(v);
        }
    }
    Ok(PoseSequence::new(frames.len(), joints, dims, data)?)
}

fn relations_to_frames(rel: &RelationVectors) -> SparseFrames {
    (0..rel.frames()).map(|t| (0..rel.joints()).map(|k| rel.get(t, k).map(<[f64]>::to_vec)).collect()).collect()
}

fn frames_to_relations(
    what: &str,
    frames: &SparseFrames,
    n_frames: usize,
    joints: usize,
    dims: usize,
) -> Result<RelationVectors, FormatError> {
    if frames.len() != n_frames {
        return Err(FormatError::Invalid(format!("{what} has {} frames, expected {n_frames}", frames.len())));
    }
    let mut out = RelationVectors::empty(n_frames, joints, dims);
    for (t, frame) in frames.iter().enumerate() {
        if frame.len() != joints {
            return Err(FormatError::Invalid(format!(
                "{what} frame {t} has {} joints, expected {joints}",
                frame.len()
            )));
        }
        for (k, v) in frame.iter().enumerate() {
            if let Some(v) = v {
                out.set(t, k, v).map_err(|e| FormatError::Invalid(format!("{what} frame {t}, joint {k}: {e}")))?;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    #[serde(default = "version")]
    pub version: String,
    pub joint_count: usize,
    pub dims: usize,
    pub parents: Vec<i64>,
    #[serde(default = "units")]
    pub units: String,
    pub frames: Frames,
}

impl SequenceFile {
    pub fn from_pose(tree: &JointTree, pose: &PoseSequence) -> Self {
        Self {
            version: version(),
            joint_count: tree.joint_count(),
            dims: pose.dims(),
            parents: tree.to_signed(),
            units: units(),
            frames: pose_to_frames(pose),
        }
    }

    pub fn decode(&self) -> Result<(JointTree, PoseSequence), FormatError> {
        check_version(&self.version)?;
        if self.units != UNITS {
            return Err(FormatError::Units(self.units.clone()));
        }
        if self.parents.len() != self.joint_count {
            return Err(FormatError::Invalid(format!(
                "{} parents for {} joints",
                self.parents.len(),
                self.joint_count
            )));
        }
        let tree = JointTree::from_signed(&self.parents)?;
        let pose = frames_to_pose(&self.frames, self.joint_count, self.dims)?;
        Ok((tree, pose))
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(default = "version")]
    pub version: String,
    /// Path of the ground-truth sequence this problem was derived from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<String>,
    pub joint_count: usize,
    pub dims: usize,
    pub parents: Vec<i64>,
    #[serde(default = "units")]
    pub units: String,
    pub single_frame: Frames,
    pub bones: SparseFrames,
    /// Keyed by the duration written as a decimal integer.
    pub displacements: BTreeMap<String, SparseFrames>,
    pub durations: Vec<i32>,
    pub alpha: f64,
    pub gamma: Vec<f64>,
}

/// Decoded contents of a problem file before a duration set is chosen.
#[derive(Debug, Clone)]
pub struct ProblemInputs {
    pub tree: JointTree,
    pub single_frame: PoseSequence,
    pub bones: RelationVectors,
    pub displacements: BTreeMap<i32, RelationVectors>,
    pub durations: DurationSet,
    pub alpha: f64,
    pub gamma: Vec<f64>,
}

impl ProblemInputs {
    /// Builds a problem over `durations`; every duration needs a displacement block.
    pub fn problem(&self, durations: &DurationSet, config: TrackerConfig) -> Result<TrackingProblem, TrackerError> {
        let disp = durations
            .as_slice()
            .iter()
            .map(|d| self.displacements.get(d).cloned().ok_or(TrackerError::MissingDisplacements(*d)))
            .collect::<Result<Vec<_>, _>>()?;
        TrackingProblem::new(
            self.tree.clone(),
            self.single_frame.clone(),
            self.bones.clone(),
            disp,
            durations.clone(),
            config,
        )
    }

    /// The problem as stored: the file's own durations and weights.
    pub fn default_problem(&self) -> Result<TrackingProblem, TrackerError> {
        self.problem(&self.durations, TrackerConfig::new(self.alpha, self.gamma.clone()))
    }
}

impl ProblemFile {
    pub fn from_problem(problem: &TrackingProblem, sequence: Option<String>) -> Self {
        let tree = problem.tree();
        let displacements = problem
            .durations()
            .as_slice()
            .iter()
            .zip(problem.displacements())
            .map(|(d, rel)| (d.to_string(), relations_to_frames(rel)))
            .collect();
        Self {
            version: version(),
            sequence,
            joint_count: tree.joint_count(),
            dims: problem.dims(),
            parents: tree.to_signed(),
            units: units(),
            single_frame: pose_to_frames(problem.single_frame()),
            bones: relations_to_frames(problem.bones()),
            displacements,
            durations: problem.durations().as_slice().to_vec(),
            alpha: problem.config().alpha,
            gamma: problem.config().gamma.clone(),
        }
    }

    pub fn decode(&self) -> Result<ProblemInputs, FormatError> {
        check_version(&self.version)?;
        if self.units != UNITS {
            return Err(FormatError::Units(self.units.clone()));
        }
        if self.parents.len() != self.joint_count {
            return Err(FormatError::Invalid(format!(
                "{} parents for {} joints",
                self.parents.len(),
                self.joint_count
            )));
        }
        let tree = JointTree::from_signed(&self.parents)?;
        let single_frame = frames_to_pose(&self.single_frame, self.joint_count, self.dims)?;
        let t = single_frame.frames();
        let bones = frames_to_relations("bones", &self.bones, t, self.joint_count, self.dims)?;
        let mut displacements = BTreeMap::new();
        for (key, frames) in &self.displacements {
            let d: i32 = key
                .trim()
                .parse()
                .map_err(|_| FormatError::Invalid(format!("displacement key {key:?} is not an integer duration")))?;
            if d == 0 {
                return Err(FormatError::Invalid("displacement key 0 is not a valid duration".into()));
            }
            let rel = frames_to_relations(&format!("displacements[{d}]"), frames, t, self.joint_count, self.dims)?;
            displacements.insert(d, rel);
        }
        let durations = DurationSet::new(self.durations.clone())?;
        Ok(ProblemInputs {
            tree,
            single_frame,
            bones,
            displacements,
            durations,
            alpha: self.alpha,
            gamma: self.gamma.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub joint: usize,
    pub kind: MapKind,
    /// Required for temporal maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<i32>,
    /// Predicted location of the related joint, image-plane coordinates.
    pub anchor: [f64; 2],
    /// Row-major `height x width x dims`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMapFile {
    #[serde(default = "version")]
    pub version: String,
    pub height: usize,
    pub width: usize,
    pub dims: usize,
    #[serde(default)]
    pub transform: GridTransform,
    pub maps: Vec<MapEntry>,
}

impl RelationMapFile {
    /// Validates and returns each entry paired with its decoded map.
    pub fn decode(&self) -> Result<Vec<(&MapEntry, RelationMap)>, FormatError> {
        check_version(&self.version)?;
        self.maps
            .iter()
            .enumerate()
            .map(|(i, e)| {
                match (e.kind, e.duration) {
                    (MapKind::Temporal, None | Some(0)) => {
                        return Err(FormatError::Invalid(format!("map {i}: temporal maps need a nonzero duration")))
                    }
                    (MapKind::Spatial, Some(_)) => {
                        return Err(FormatError::Invalid(format!("map {i}: spatial maps take no duration")))
                    }
                    _ => {}
                }
                let m = RelationMap::new(self.height, self.width, self.dims, e.values.clone(), self.transform)
                    .map_err(|err| FormatError::Invalid(format!("map {i} (joint {}): {err}", e.joint)))?;
                Ok((e, m))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedRelation {
    pub joint: usize,
    pub kind: MapKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<i32>,
    pub value: Vec<f64>,
    pub total_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedFile {
    #[serde(default = "version")]
    pub version: String,
    /// Weight specs used, e.g. `["binary:5"]`; several means an ensemble.
    pub weights: Vec<String>,
    pub relations: Vec<DecodedRelation>,
}

impl DecodedFile {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("formats serialize infallibly");
    s.push('\n');
    s
}
