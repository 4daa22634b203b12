//! Evaluation metrics: joint, bone and displacement errors, percentage of
//! correct frames, and displacement difficulty bins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relations::{shifted_frame, RelationVectors};
use crate::skeleton::PoseSequence;

/// Easy displacements are strictly below this, in mm.
pub const EASY_BELOW_MM: f64 = 30.0;
/// Hard displacements are strictly above this, in mm.
pub const HARD_ABOVE_MM: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("thresholds must be sorted ascending and not NaN")]
    UnsortedThresholds,
    #[error("nothing to average")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcfPoint {
    pub threshold_mm: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub joint_error_mm: f64,
    pub per_joint: Vec<f64>,
    /// Mean absolute error per coordinate axis.
    pub per_dimension: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bone_error_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displ_error_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcf_curve: Option<Vec<PcfPoint>>,
}

fn check_shapes(pred: &PoseSequence, gt: &PoseSequence) -> Result<(), MetricError> {
    if pred.same_shape(gt) {
        Ok(())
    } else {
        Err(MetricError::ShapeMismatch(format!(
            "prediction is {}x{}x{}, ground truth is {}x{}x{}",
            pred.frames(),
            pred.joints(),
            pred.dims(),
            gt.frames(),
            gt.joints(),
            gt.dims()
        )))
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean per-joint position error plus per-joint and per-axis breakdowns.
pub fn joint_error(pred: &PoseSequence, gt: &PoseSequence) -> Result<MetricReport, MetricError> {
    check_shapes(pred, gt)?;
    let (frames, joints, dims) = (gt.frames(), gt.joints(), gt.dims());
    let mut per_joint = vec![0.0; joints];
    let mut per_dimension = vec![0.0; dims];
    for t in 0..frames {
        for k in 0..joints {
            let (p, g) = (pred.get(t, k), gt.get(t, k));
            per_joint[k] += dist(p, g);
            for (c, acc) in per_dimension.iter_mut().enumerate() {
                *acc += (p[c] - g[c]).abs();
            }
        }
    }
    let n = (frames * joints) as f64;
    let joint_error_mm = per_joint.iter().sum::<f64>() / n;
    per_joint.iter_mut().for_each(|v| *v /= frames as f64);
    per_dimension.iter_mut().for_each(|v| *v /= n);
    Ok(MetricReport {
        joint_error_mm,
        per_joint,
        per_dimension,
        bone_error_mm: None,
        displ_error_mm: None,
        pcf_curve: None,
    })
}

/// Mean Euclidean norm of bone-vector differences over the shared support.
pub fn bone_error(pred: &RelationVectors, gt: &RelationVectors) -> Result<f64, MetricError> {
    if !pred.same_support(gt) {
        return Err(MetricError::SupportMismatch("predicted and ground-truth bones cover different joints".into()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (t, k, p) in pred.iter() {
        sum += dist(p, gt.get(t, k).unwrap());
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::Empty);
    }
    Ok(sum / n as f64)
}

/// Joint error of `J_gt^{t-d} + Δ_pred^t` against `J_gt^t`.
pub fn displ_error(pred: &RelationVectors, gt: &PoseSequence, duration: i32) -> Result<f64, MetricError> {
    if pred.frames() != gt.frames() || pred.joints() != gt.joints() || pred.dims() != gt.dims() {
        return Err(MetricError::ShapeMismatch("displacements do not match the pose shape".into()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (t, k, delta) in pred.iter() {
        let s = shifted_frame(t, duration, gt.frames())
            .ok_or_else(|| MetricError::SupportMismatch(format!("frame {t} has no partner {duration} frames back")))?;
        let prev = gt.get(s, k);
        let cur = gt.get(t, k);
        // (J^{t-d} + Δ) - J^t, grouped as Δ - (J^t - J^{t-d}) so exact displacements give exactly 0
        sum += prev.iter().zip(delta).zip(cur).map(|((a, d), c)| (d - (c - a)).powi(2)).sum::<f64>().sqrt();
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::Empty);
    }
    Ok(sum / n as f64)
}

/// Largest per-joint error in each frame.
pub fn frame_max_errors(pred: &PoseSequence, gt: &PoseSequence) -> Result<Vec<f64>, MetricError> {
    check_shapes(pred, gt)?;
    Ok((0..gt.frames())
        .map(|t| (0..gt.joints()).map(|k| dist(pred.get(t, k), gt.get(t, k))).fold(0.0, f64::max))
        .collect())
}

/// Fraction of frames whose maximum joint error is strictly below each threshold.
pub fn pcf(pred: &PoseSequence, gt: &PoseSequence, thresholds: &[f64]) -> Result<Vec<PcfPoint>, MetricError> {
    if thresholds.iter().any(|t| t.is_nan()) || thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(MetricError::UnsortedThresholds);
    }
    let mut errs = frame_max_errors(pred, gt)?;
    errs.sort_by(f64::total_cmp);
    let n = errs.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&tau| PcfPoint { threshold_mm: tau, fraction: errs.partition_point(|&e| e < tau) as f64 / n })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Middle,
    Hard,
}

impl Difficulty {
    /// `< 30` easy, `[30, 60]` middle, `> 60` hard.
    pub fn of(magnitude_mm: f64) -> Self {
        if magnitude_mm < EASY_BELOW_MM {
            Difficulty::Easy
        } else if magnitude_mm <= HARD_ABOVE_MM {
            Difficulty::Middle
        } else {
            Difficulty::Hard
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub count: usize,
    pub fraction: f64,
    /// Mean magnitude in the bin; 0 for an empty bin.
    pub mean_mm: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DisplacementBins {
    pub easy: BinStats,
    pub middle: BinStats,
    pub hard: BinStats,
}

pub fn displacement_bins(magnitudes: &[f64]) -> DisplacementBins {
    let mut out = DisplacementBins::default();
    for &m in magnitudes {
        let bin = match Difficulty::of(m) {
            Difficulty::Easy => &mut out.easy,
            Difficulty::Middle => &mut out.middle,
            Difficulty::Hard => &mut out.hard,
        };
        bin.count += 1;
        bin.mean_mm += m;
    }
    let total = magnitudes.len().max(1) as f64;
    for bin in [&mut out.easy, &mut out.middle, &mut out.hard] {
        if bin.count > 0 {
            bin.mean_mm /= bin.count as f64;
        }
        bin.fraction = bin.count as f64 / total;
    }
    out
}

/// Euclidean norms of the present displacement vectors.
pub fn displacement_magnitudes(displacements: &RelationVectors) -> Vec<f64> {
    displacements.iter().map(|(_, _, v)| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
}

impl MetricReport {
    /// `joint,error_mm` rows: one per joint, one per axis (`x`, `y`, `z`),
    /// then optional `bone` and `displ` rows, then `mean`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("joint,error_mm\n");
        for (k, e) in self.per_joint.iter().enumerate() {
            s.push_str(&format!("{k},{e}\n"));
        }
        for (axis, e) in ["x", "y", "z"].iter().zip(&self.per_dimension) {
            s.push_str(&format!("{axis},{e}\n"));
        }
        if let Some(b) = self.bone_error_mm {
            s.push_str(&format!("bone,{b}\n"));
        }
        if let Some(d) = self.displ_error_mm {
            s.push_str(&format!("displ,{d}\n"));
        }
        s.push_str(&format!("mean,{}\n", self.joint_error_mm));
        s
    }
}

/// `threshold_mm,fraction` rows.
pub fn pcf_csv(curve: &[PcfPoint]) -> String {
    let mut s = String::from("threshold_mm,fraction\n");
    for p in curve {
        s.push_str(&format!("{},{}\n", p.threshold_mm, p.fraction));
    }
    s
}
