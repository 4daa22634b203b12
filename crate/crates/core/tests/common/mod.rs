#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relfuse::relations::{shifted_frame, RelationVectors};
use relfuse::{DurationSet, JointTree, PoseSequence, Preset, TrackerConfig, TrackingProblem};

pub const WEIGHT_CHOICES: [f64; 3] = [0.1, 1.0, 10.0];

/// Random tree rooted at 0 where each joint's parent has a smaller index.
pub fn random_tree(rng: &mut ChaCha8Rng, joints: usize) -> JointTree {
    JointTree::new((0..joints).map(|k| if k == 0 { None } else { Some(rng.gen_range(0..k)) }).collect()).unwrap()
}

fn random_pose(rng: &mut ChaCha8Rng, frames: usize, joints: usize, dims: usize, scale: f64) -> PoseSequence {
    PoseSequence::new(frames, joints, dims, (0..frames * joints * dims).map(|_| rng.gen_range(-scale..scale)).collect())
        .unwrap()
}

/// Problem with unrelated random data for every term.
pub fn random_problem(seed: u64, preset: Preset) -> TrackingProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let joints = rng.gen_range(2..=6);
    let frames = rng.gen_range(3..=30);
    let dims = if rng.gen_bool(0.5) { 2 } else { 3 };
    let tree = random_tree(&mut rng, joints);
    let single = random_pose(&mut rng, frames, joints, dims, 1000.0);
    let mut bones = RelationVectors::empty(frames, joints, dims);
    for t in 0..frames {
        for k in tree.bone_joints() {
            let v: Vec<f64> = (0..dims).map(|_| rng.gen_range(-300.0..300.0)).collect();
            bones.set(t, k, &v).unwrap();
        }
    }
    let durations = preset.durations();
    let displacements = durations
        .as_slice()
        .iter()
        .map(|&d| {
            let mut r = RelationVectors::empty(frames, joints, dims);
            for t in 0..frames {
                if shifted_frame(t, d, frames).is_some() {
                    for k in 0..joints {
                        let v: Vec<f64> = (0..dims).map(|_| rng.gen_range(-100.0..100.0)).collect();
                        r.set(t, k, &v).unwrap();
                    }
                }
            }
            r
        })
        .collect();
    let alpha = WEIGHT_CHOICES[rng.gen_range(0..3)];
    let gamma = (0..durations.len()).map(|_| WEIGHT_CHOICES[rng.gen_range(0..3)]).collect();
    TrackingProblem::new(tree, single, bones, displacements, durations, TrackerConfig::new(alpha, gamma)).unwrap()
}

/// Problem whose predictions are a random ground truth plus small uniform noise,
/// so the optimum has a small objective.
pub fn near_consistent_problem(seed: u64, durations: &DurationSet, noise: f64) -> (TrackingProblem, PoseSequence) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let joints = rng.gen_range(2..=6);
    let frames = rng.gen_range(3..=20);
    let tree = random_tree(&mut rng, joints);
    let gt = random_pose(&mut rng, frames, joints, 3, 900.0);
    let mut jitter = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x + rng.gen_range(-noise..=noise)).collect() };
    let single_data: Vec<f64> = jitter(gt.as_slice());
    let single = PoseSequence::new(frames, joints, 3, single_data).unwrap();
    let mut bones = RelationVectors::empty(frames, joints, 3);
    for (t, k, v) in relfuse::relations::compute_bone_vectors(&tree, &gt).iter() {
        bones.set(t, k, &jitter(v)).unwrap();
    }
    let mut displacements = Vec::new();
    for &d in durations.as_slice() {
        let exact = relfuse::relations::compute_displacements(&gt, d).unwrap();
        let mut r = RelationVectors::empty(frames, joints, 3);
        for (t, k, v) in exact.iter() {
            r.set(t, k, &jitter(v)).unwrap();
        }
        displacements.push(r);
    }
    let problem = TrackingProblem::new(
        tree,
        single,
        bones,
        displacements,
        durations.clone(),
        TrackerConfig::new(1.0, vec![1.0; durations.len()]),
    )
    .unwrap();
    (problem, gt)
}

/// Tracking objective written out term by term, independent of the library's
/// residual enumeration.
pub fn reference_objective(problem: &TrackingProblem, x: &PoseSequence) -> f64 {
    let cfg = problem.config();
    let sq = |a: &[f64], b: &[f64], c: &[f64]| -> f64 {
        a.iter().zip(b).zip(c).map(|((a, b), c)| (a - b - c).powi(2)).sum()
    };
    let zeros = vec![0.0; problem.dims()];
    let mut e = 0.0;
    for t in 0..problem.frames() {
        for k in 0..problem.joints() {
            e += cfg.data_weight * sq(x.get(t, k), problem.single_frame().get(t, k), &zeros);
            if let Some(p) = problem.tree().parent(k) {
                e += cfg.alpha * sq(x.get(t, k), x.get(t, p), problem.bones().get(t, k).unwrap());
            }
            for (n, &d) in problem.durations().as_slice().iter().enumerate() {
                let s = t as i64 - d as i64;
                if s < 0 || s >= problem.frames() as i64 {
                    continue;
                }
                if let Some(delta) = problem.displacements()[n].get(t, k) {
                    e += cfg.gamma[n] * sq(x.get(t, k), x.get(s as usize, k), delta);
                }
            }
        }
    }
    e
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(x: &PoseSequence, step: f64, f: impl Fn(&PoseSequence) -> f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.as_slice().len());
    let (t, k, d) = (x.frames(), x.joints(), x.dims());
    for i in 0..x.as_slice().len() {
        let mut plus = x.as_slice().to_vec();
        let mut minus = plus.clone();
        plus[i] += step;
        minus[i] -= step;
        let fp = f(&PoseSequence::new(t, k, d, plus).unwrap());
        let fm = f(&PoseSequence::new(t, k, d, minus).unwrap());
        grad.push((fp - fm) / (2.0 * step));
    }
    grad
}

pub fn max_abs_diff(a: &PoseSequence, b: &PoseSequence) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the mean.
pub fn std_error(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
    (var / v.len() as f64).sqrt()
}
