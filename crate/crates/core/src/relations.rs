//! Spatial and temporal joint relations.
//!
//! A relation is the vector pointing from a related joint to a joint: the bone
//! vector `J_k - J_parent(k)` in the spatial case, and the displacement
//! `J_k^t - J_k^{t-d}` over a duration `d` in the temporal case.
//!
//! Relation maps hold one relation prediction per pixel. They are decoded by a
//! weighted average whose weights decay with the pixel's distance to the
//! related joint ([`build_weight_map`], [`weighted_inference`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeleton::{JointTree, PoseSequence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelationError {
    #[error("temporal relation requires a nonzero duration")]
    ZeroDuration,
    #[error("anchor ({0}, {1}) is not finite")]
    AnchorNotFinite(f64, f64),
    #[error("grid must be at least 1x1, got {height}x{width}")]
    EmptyGrid { height: usize, width: usize },
    #[error("grid transform scale must be finite and nonzero")]
    BadTransform,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("total weight is zero")]
    ZeroTotalWeight,
    #[error("weight decay rate must be finite and nonnegative, got {0}")]
    BadBeta(f64),
    #[error("relation values must be finite")]
    NonFinite,
}

/// Per-(frame, joint) relation vectors with a presence mask.
///
/// Bones are present for every non-root joint; displacements over `d` are
/// present for frames `t` with `t - d` inside the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationVectors {
    frames: usize,
    joints: usize,
    dims: usize,
    values: Vec<f64>,
    present: Vec<bool>,
}

impl RelationVectors {
    pub fn empty(frames: usize, joints: usize, dims: usize) -> Self {
        Self { frames, joints, dims, values: vec![0.0; frames * joints * dims], present: vec![false; frames * joints] }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn get(&self, frame: usize, joint: usize) -> Option<&[f64]> {
        let cell = frame * self.joints + joint;
        self.present[cell].then(|| &self.values[cell * self.dims..(cell + 1) * self.dims])
    }

    pub fn set(&mut self, frame: usize, joint: usize, value: &[f64]) -> Result<(), RelationError> {
        if value.len() != self.dims {
            return Err(RelationError::ShapeMismatch(format!(
                "vector has {} components, expected {}",
                value.len(),
                self.dims
            )));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(RelationError::NonFinite);
        }
        let cell = frame * self.joints + joint;
        self.values[cell * self.dims..(cell + 1) * self.dims].copy_from_slice(value);
        self.present[cell] = true;
        Ok(())
    }

    pub fn clear(&mut self, frame: usize, joint: usize) {
        self.present[frame * self.joints + joint] = false;
    }

    pub fn is_present(&self, frame: usize, joint: usize) -> bool {
        self.present[frame * self.joints + joint]
    }

    /// Present entries as `(frame, joint, vector)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &[f64])> + '_ {
        (0..self.frames * self.joints)
            .filter(move |&c| self.present[c])
            .map(move |c| (c / self.joints, c % self.joints, &self.values[c * self.dims..(c + 1) * self.dims]))
    }

    pub fn present_count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    pub fn same_support(&self, other: &RelationVectors) -> bool {
        self.frames == other.frames
            && self.joints == other.joints
            && self.dims == other.dims
            && self.present == other.present
    }
}

/// Bone vectors `J_k^t - J_parent(k)^t` for every non-root joint and frame.
pub fn compute_bone_vectors(tree: &JointTree, pose: &PoseSequence) -> RelationVectors {
    let mut out = RelationVectors::empty(pose.frames(), pose.joints(), pose.dims());
    let mut v = vec![0.0; pose.dims()];
    for t in 0..pose.frames() {
        for k in tree.bone_joints() {
            let parent = pose.get(t, tree.parent(k).unwrap());
            for ((o, a), b) in v.iter_mut().zip(pose.get(t, k)).zip(parent) {
                *o = a - b;
            }
            out.set(t, k, &v).expect("pose values are finite");
        }
    }
    out
}

/// Displacements `J_k^t - J_k^{t-d}`; frames whose partner falls outside the
/// sequence are left absent.
pub fn compute_displacements(pose: &PoseSequence, duration: i32) -> Result<RelationVectors, RelationError> {
    if duration == 0 {
        return Err(RelationError::ZeroDuration);
    }
    let mut out = RelationVectors::empty(pose.frames(), pose.joints(), pose.dims());
    let mut v = vec![0.0; pose.dims()];
    for t in 0..pose.frames() {
        let Some(src) = shifted_frame(t, duration, pose.frames()) else { continue };
        for k in 0..pose.joints() {
            for ((o, a), b) in v.iter_mut().zip(pose.get(t, k)).zip(pose.get(src, k)) {
                *o = a - b;
            }
            out.set(t, k, &v).expect("pose values are finite");
        }
    }
    Ok(out)
}

/// `t - d` when it lies in `[0, frames)`.
pub fn shifted_frame(t: usize, duration: i32, frames: usize) -> Option<usize> {
    let s = t as i64 - i64::from(duration);
    (0..frames as i64).contains(&s).then_some(s as usize)
}

/// Axis-aligned affine map from grid coordinates `(col, row)` to image-plane
/// coordinates: `image = offset + scale * grid`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridTransform {
    pub offset: [f64; 2],
    pub scale: [f64; 2],
}

impl Default for GridTransform {
    fn default() -> Self {
        Self { offset: [0.0, 0.0], scale: [1.0, 1.0] }
    }
}

impl GridTransform {
    pub fn validate(&self) -> Result<(), RelationError> {
        let ok = self.offset.iter().all(|v| v.is_finite()) && self.scale.iter().all(|s| s.is_finite() && *s != 0.0);
        if ok {
            Ok(())
        } else {
            Err(RelationError::BadTransform)
        }
    }

    pub fn to_image(&self, grid: [f64; 2]) -> [f64; 2] {
        [self.offset[0] + self.scale[0] * grid[0], self.offset[1] + self.scale[1] * grid[1]]
    }

    pub fn to_grid(&self, image: [f64; 2]) -> [f64; 2] {
        [(image[0] - self.offset[0]) / self.scale[0], (image[1] - self.offset[1]) / self.scale[1]]
    }
}

/// One relation map: an `height x width` grid of `dims`-vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationMap {
    height: usize,
    width: usize,
    dims: usize,
    values: Vec<f64>,
    pub transform: GridTransform,
}

impl RelationMap {
    pub fn new(
        height: usize,
        width: usize,
        dims: usize,
        values: Vec<f64>,
        transform: GridTransform,
    ) -> Result<Self, RelationError> {
        if height == 0 || width == 0 {
            return Err(RelationError::EmptyGrid { height, width });
        }
        if dims == 0 || values.len() != height * width * dims {
            return Err(RelationError::ShapeMismatch(format!(
                "{} values for a {height}x{width}x{dims} map",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RelationError::NonFinite);
        }
        transform.validate()?;
        Ok(Self { height, width, dims, values, transform })
    }

    /// Every pixel predicts `value`.
    pub fn constant(
        height: usize,
        width: usize,
        value: &[f64],
        transform: GridTransform,
    ) -> Result<Self, RelationError> {
        let values = value.iter().copied().cycle().take(height * width * value.len()).collect();
        Self::new(height, width, value.len(), values, transform)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.width + col) * self.dims;
        &self.values[i..i + self.dims]
    }
}

/// Distance, in grid pixels, from each pixel centre to the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub height: usize,
    pub width: usize,
    /// Anchor in grid coordinates `(col, row)`.
    pub anchor: [f64; 2],
    pub values: Vec<f64>,
}

impl DistanceMap {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Builds the distance map for an anchor given in image-plane coordinates.
pub fn build_distance_map(
    anchor: [f64; 2],
    height: usize,
    width: usize,
    transform: &GridTransform,
) -> Result<DistanceMap, RelationError> {
    if !anchor[0].is_finite() || !anchor[1].is_finite() {
        return Err(RelationError::AnchorNotFinite(anchor[0], anchor[1]));
    }
    if height == 0 || width == 0 {
        return Err(RelationError::EmptyGrid { height, width });
    }
    transform.validate()?;
    let a = transform.to_grid(anchor);
    let mut values = Vec::with_capacity(height * width);
    for row in 0..height {
        for col in 0..width {
            values.push((col as f64 - a[0]).hypot(row as f64 - a[1]));
        }
    }
    Ok(DistanceMap { height, width, anchor: a, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightFamily {
    Binary,
    Gaussian,
    Linear,
    Exponential,
    JointOne,
    Full,
}

impl WeightFamily {
    pub const ALL: [WeightFamily; 6] = [
        WeightFamily::Binary,
        WeightFamily::Gaussian,
        WeightFamily::Linear,
        WeightFamily::Exponential,
        WeightFamily::JointOne,
        WeightFamily::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightFamily::Binary => "binary",
            WeightFamily::Gaussian => "gaussian",
            WeightFamily::Linear => "linear",
            WeightFamily::Exponential => "exponential",
            WeightFamily::JointOne => "joint-one",
            WeightFamily::Full => "full",
        }
    }
}

impl std::str::FromStr for WeightFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        WeightFamily::ALL
            .into_iter()
            .find(|f| f.name() == norm || (norm == "jointone" && *f == WeightFamily::JointOne))
            .ok_or_else(|| {
                let names: Vec<_> = WeightFamily::ALL.iter().map(|f| f.name()).collect();
                format!("unknown weight family {s:?}, expected one of {}", names.join(", "))
            })
    }
}

/// Decay family and rate. `beta` is ignored by `JointOne` and `Full`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub family: WeightFamily,
    #[serde(default)]
    pub beta: f64,
}

impl WeightSpec {
    pub fn new(family: WeightFamily, beta: f64) -> Result<Self, RelationError> {
        let spec = Self { family, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), RelationError> {
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(RelationError::BadBeta(self.beta));
        }
        Ok(())
    }

    /// Weight at distance `f` for the four decay families. `JointOne` needs the
    /// whole map and is handled by [`build_weight_map`].
    pub fn decay(&self, f: f64) -> f64 {
        let b = self.beta;
        match self.family {
            WeightFamily::Binary => {
                if f <= b {
                    1.0
                } else {
                    0.0
                }
            }
            WeightFamily::Gaussian => (-b * f * f).exp(),
            WeightFamily::Linear => (1.0 - b * f).clamp(0.0, 1.0),
            WeightFamily::Exponential => (-b * f).exp(),
            WeightFamily::Full => 1.0,
            WeightFamily::JointOne => {
                if f == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.family {
            WeightFamily::JointOne | WeightFamily::Full => write!(f, "{}", self.family.name()),
            _ => write!(f, "{}:{}", self.family.name(), self.beta),
        }
    }
}

impl std::str::FromStr for WeightSpec {
    type Err = String;

    /// `family[:beta]`, e.g. `binary:5` or `full`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (fam, beta) = match s.split_once(':') {
            Some((f, b)) => (f, b.trim().parse::<f64>().map_err(|e| format!("bad beta {b:?}: {e}"))?),
            None => (s, 0.0),
        };
        WeightSpec::new(fam.trim().parse()?, beta).map_err(|e| e.to_string())
    }
}

/// Pixel weights in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl WeightMap {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

pub fn build_weight_map(distance: &DistanceMap, spec: &WeightSpec) -> WeightMap {
    let values = match spec.family {
        WeightFamily::JointOne => {
            // every pixel attaining the minimum distance
            let min = distance.min();
            distance.values.iter().map(|&f| if f == min { 1.0 } else { 0.0 }).collect()
        }
        _ => distance.values.iter().map(|&f| spec.decay(f)).collect(),
    };
    WeightMap { height: distance.height, width: distance.width, values }
}

/// Weighted average of the per-pixel predictions: `sum(W M) / sum(W)`.
pub fn weighted_inference(map: &RelationMap, weights: &WeightMap) -> Result<Vec<f64>, RelationError> {
    if map.height != weights.height || map.width != weights.width || weights.values.len() != map.height * map.width {
        return Err(RelationError::ShapeMismatch(format!(
            "map is {}x{}, weights are {}x{}",
            map.height, map.width, weights.height, weights.width
        )));
    }
    let total = weights.total();
    if !(total > 0.0) {
        return Err(RelationError::ZeroTotalWeight);
    }
    let mut acc = vec![0.0; map.dims];
    for (w, px) in weights.values.iter().zip(map.values.chunks_exact(map.dims)) {
        if *w != 0.0 {
            for (a, v) in acc.iter_mut().zip(px) {
                *a += w * v;
            }
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}

/// Decodes `map` around `anchor` (image-plane coordinates) with one weight spec.
pub fn decode_relation(map: &RelationMap, anchor: [f64; 2], spec: &WeightSpec) -> Result<Decoded, RelationError> {
    spec.validate()?;
    let distance = build_distance_map(anchor, map.height, map.width, &map.transform)?;
    let weights = build_weight_map(&distance, spec);
    let total_weight = weights.total();
    let value = weighted_inference(map, &weights)?;
    Ok(Decoded { value, total_weight })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub value: Vec<f64>,
    pub total_weight: f64,
}

/// Unweighted mean of the decodes produced by each spec in `specs`.
///
/// `total_weight` reports the smallest per-spec total, so a zero flags any
/// degenerate member.
pub fn ensemble_inference(map: &RelationMap, anchor: [f64; 2], specs: &[WeightSpec]) -> Result<Decoded, RelationError> {
    if specs.is_empty() {
        return Err(RelationError::ShapeMismatch("empty ensemble".into()));
    }
    let mut value = vec![0.0; map.dims];
    let mut min_total = f64::INFINITY;
    for spec in specs {
        let d = decode_relation(map, anchor, spec)?;
        min_total = min_total.min(d.total_weight);
        for (a, v) in value.iter_mut().zip(&d.value) {
            *a += v;
        }
    }
    value.iter_mut().for_each(|a| *a /= specs.len() as f64);
    Ok(Decoded { value, total_weight: min_total })
}

/// Weighted L1 loss `sum_p W(p) * |M_pre(p) - M_gt(p)|_1`.
pub fn relation_loss(pred: &RelationMap, gt: &RelationMap, weights: &WeightMap) -> Result<f64, RelationError> {
    if pred.height != gt.height || pred.width != gt.width || pred.dims != gt.dims {
        return Err(RelationError::ShapeMismatch(format!(
            "predicted map is {}x{}x{}, ground truth is {}x{}x{}",
            pred.height, pred.width, pred.dims, gt.height, gt.width, gt.dims
        )));
    }
    if weights.height != pred.height || weights.width != pred.width {
        return Err(RelationError::ShapeMismatch(format!(
            "weights are {}x{}, maps are {}x{}",
            weights.height, weights.width, pred.height, pred.width
        )));
    }
    let d = pred.dims;
    Ok(weights
        .values
        .iter()
        .zip(pred.values.chunks_exact(d).zip(gt.values.chunks_exact(d)))
        .map(|(w, (p, g))| w * p.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .sum())
}
