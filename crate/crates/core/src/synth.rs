//! Deterministic synthetic motion and prediction noise.
//!
//! Each bone direction follows a sum of seeded sinusoids in angle space, so
//! bone lengths stay fixed while the joints move. The frame-rate tag sets the
//! time step between frames and therefore the typical per-frame displacement.
//! Every random quantity is drawn from its own ChaCha stream, keyed by joint or
//! by prediction kind, so outputs do not depend on evaluation order.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::relations::{compute_bone_vectors, compute_displacements, RelationVectors};
use crate::skeleton::{JointTree, PoseSequence};
use crate::tracker::{DurationSet, TrackerConfig, TrackerError, TrackingProblem};

const HARMONICS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("unsupported frame rate {0:?}, expected one of {{25, 8, 2.5}}")]
    BadFrameRate(String),
    #[error("invalid motion spec: {0}")]
    BadMotion(String),
    #[error("noise sigmas must be finite and nonnegative")]
    BadNoise,
}

/// Frame-rate tag. Lower rates mean longer steps between frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameRate {
    Fps25,
    Fps8,
    Fps2_5,
}

impl FrameRate {
    pub const ALL: [FrameRate; 3] = [FrameRate::Fps25, FrameRate::Fps8, FrameRate::Fps2_5];

    /// Seconds between frames: 1, 3 and 10 steps of a 25 Hz clock.
    pub fn interval(self) -> f64 {
        match self {
            FrameRate::Fps25 => 0.04,
            FrameRate::Fps8 => 0.12,
            FrameRate::Fps2_5 => 0.4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FrameRate::Fps25 => "25",
            FrameRate::Fps8 => "8",
            FrameRate::Fps2_5 => "2.5",
        }
    }
}

impl std::str::FromStr for FrameRate {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().trim_end_matches("fps").trim_end_matches("FPS") {
            "25" => Ok(FrameRate::Fps25),
            "8" => Ok(FrameRate::Fps8),
            "2.5" => Ok(FrameRate::Fps2_5),
            _ => Err(SynthError::BadFrameRate(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSpec {
    pub tree: JointTree,
    /// Length in mm for each joint's bone; the root entry is ignored.
    pub bone_lengths: Vec<f64>,
    pub frames: usize,
    pub dims: usize,
    pub frame_rate: FrameRate,
    /// Range of the total angular swing per bone, radians.
    pub amplitude: (f64, f64),
    /// Range of sinusoid frequencies, Hz.
    pub frequency: (f64, f64),
    /// Peak root translation per axis, mm.
    pub root_travel_mm: f64,
    pub seed: u64,
}

impl MotionSpec {
    /// Default motion for `tree`: swings of 0.3-0.9 rad at 0.2-1.0 Hz and
    /// 150 mm of root travel.
    pub fn new(tree: JointTree, frames: usize, frame_rate: FrameRate, seed: u64) -> Self {
        let bone_lengths = default_bone_lengths(&tree);
        Self {
            tree,
            bone_lengths,
            frames,
            dims: 3,
            frame_rate,
            amplitude: (0.3, 0.9),
            frequency: (0.2, 1.0),
            root_travel_mm: 150.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::BadMotion(m.to_string()));
        if self.frames < 2 {
            return bad("at least 2 frames are required");
        }
        if self.dims != 2 && self.dims != 3 {
            return bad("dims must be 2 or 3");
        }
        if self.bone_lengths.len() != self.tree.joint_count() {
            return bad("one bone length per joint is required");
        }
        if self.tree.bone_joints().any(|k| !(self.bone_lengths[k] > 0.0 && self.bone_lengths[k].is_finite())) {
            return bad("bone lengths must be positive");
        }
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi;
        if !range_ok(self.amplitude) || !range_ok(self.frequency) {
            return bad("amplitude and frequency ranges must satisfy 0 <= lo <= hi");
        }
        if !(self.root_travel_mm.is_finite() && self.root_travel_mm >= 0.0) {
            return bad("root travel must be nonnegative");
        }
        Ok(())
    }
}

/// Bone lengths in mm. The 17-joint body gets anatomical lengths, other trees
/// cycle through 200-350 mm.
pub fn default_bone_lengths(tree: &JointTree) -> Vec<f64> {
    if *tree == JointTree::human17() {
        return vec![
            0.0, 130.0, 450.0, 440.0, 130.0, 450.0, 440.0, 230.0, 250.0, 110.0, 120.0, 150.0, 280.0, 250.0, 150.0,
            280.0, 250.0,
        ];
    }
    (0..tree.joint_count())
        .map(|k| if tree.parent(k).is_some() { 200.0 + 50.0 * (k % 4) as f64 } else { 0.0 })
        .collect()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy)]
struct Sinusoid {
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

fn draw_sinusoids(rng: &mut ChaCha8Rng, spec: &MotionSpec) -> [Sinusoid; HARMONICS] {
    let swing = rng.gen_range(spec.amplitude.0..=spec.amplitude.1);
    std::array::from_fn(|_| Sinusoid {
        amplitude: swing / HARMONICS as f64 * rng.gen_range(0.5..=1.5),
        frequency: rng.gen_range(spec.frequency.0..=spec.frequency.1),
        phase: rng.gen_range(0.0..TAU),
    })
}

fn evaluate(base: f64, waves: &[Sinusoid; HARMONICS], time: f64) -> f64 {
    base + waves.iter().map(|w| w.amplitude * (TAU * w.frequency * time + w.phase).sin()).sum::<f64>()
}

struct JointMotion {
    polar: (f64, [Sinusoid; HARMONICS]),
    azimuth: (f64, [Sinusoid; HARMONICS]),
}

/// Ground-truth sequence for `spec`. Identical specs give bit-identical output.
pub fn generate_sequence(spec: &MotionSpec) -> Result<PoseSequence, SynthError> {
    spec.validate()?;
    let (k_count, dims) = (spec.tree.joint_count(), spec.dims);

    let mut root_rng = stream(spec.seed, 0);
    let root_waves: Vec<(f64, Sinusoid)> = (0..dims)
        .map(|_| {
            let centre = root_rng.gen_range(-200.0..200.0);
            let w = Sinusoid {
                amplitude: spec.root_travel_mm * root_rng.gen_range(0.5..=1.0),
                frequency: root_rng.gen_range(spec.frequency.0..=spec.frequency.1) * 0.5,
                phase: root_rng.gen_range(0.0..TAU),
            };
            (centre, w)
        })
        .collect();

    let motions: Vec<Option<JointMotion>> = (0..k_count)
        .map(|k| {
            spec.tree.parent(k)?;
            let mut rng = stream(spec.seed, k as u64 + 1);
            let polar0 = rng.gen_range(0.35 * PI..0.65 * PI);
            let azimuth0 = rng.gen_range(0.0..TAU);
            let polar = (polar0, draw_sinusoids(&mut rng, spec));
            let azimuth = (azimuth0, draw_sinusoids(&mut rng, spec));
            Some(JointMotion { polar, azimuth })
        })
        .collect();

    let mut pose = PoseSequence::zeros(spec.frames, k_count, dims).expect("validated shape");
    let dt = spec.frame_rate.interval();
    let mut dir = vec![0.0; dims];
    for t in 0..spec.frames {
        let time = t as f64 * dt;
        let root = spec.tree.root();
        for (c, (centre, w)) in root_waves.iter().enumerate() {
            pose.get_mut(t, root)[c] = centre + w.amplitude * (TAU * w.frequency * time + w.phase).sin();
        }
        for &k in &spec.tree.topological_order()[1..] {
            let m = motions[k].as_ref().unwrap();
            let az = evaluate(m.azimuth.0, &m.azimuth.1, time);
            if dims == 3 {
                let po = evaluate(m.polar.0, &m.polar.1, time);
                dir.copy_from_slice(&[po.sin() * az.cos(), po.sin() * az.sin(), po.cos()]);
            } else {
                dir.copy_from_slice(&[az.cos(), az.sin()]);
            }
            let parent = spec.tree.parent(k).unwrap();
            let len = spec.bone_lengths[k];
            for c in 0..dims {
                let p = pose.get(t, parent)[c];
                pose.get_mut(t, k)[c] = p + len * dir[c];
            }
        }
    }
    Ok(pose)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_single_frame: f64,
    pub sigma_bone: f64,
    pub sigma_displ: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma_single_frame: f64, sigma_bone: f64, sigma_displ: f64, seed: u64) -> Self {
        Self { sigma_single_frame, sigma_bone, sigma_displ, seed }
    }

    pub fn noiseless(seed: u64) -> Self {
        Self::new(0.0, 0.0, 0.0, seed)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let ok =
            [self.sigma_single_frame, self.sigma_bone, self.sigma_displ].iter().all(|s| s.is_finite() && *s >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(SynthError::BadNoise)
        }
    }
}

/// Simulated predictor outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub single_frame: PoseSequence,
    pub bones: RelationVectors,
    /// Aligned with the duration set passed to [`corrupt_predictions`].
    pub displacements: Vec<RelationVectors>,
}

const SINGLE_FRAME_STREAM: u64 = 1;
const BONE_STREAM: u64 = 2;

/// Streams for displacements are keyed by duration so adding a duration does
/// not change the noise drawn for the others.
fn displacement_stream(d: i32) -> u64 {
    let zigzag = ((d << 1) ^ (d >> 31)) as u32 as u64;
    16 + zigzag
}

fn gaussian(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma validated"))
}

fn perturb(values: &mut [f64], noise: Option<&Normal<f64>>, rng: &mut ChaCha8Rng) {
    if let Some(n) = noise {
        values.iter_mut().for_each(|v| *v += n.sample(rng));
    }
}

/// Adds independent zero-mean Gaussian noise to the ground-truth joints,
/// bones and per-duration displacements.
pub fn corrupt_predictions(
    tree: &JointTree,
    gt: &PoseSequence,
    durations: &DurationSet,
    noise: &NoiseSpec,
) -> Result<Predictions, SynthError> {
    noise.validate()?;
    let dims = gt.dims();

    let mut rng = stream(noise.seed, SINGLE_FRAME_STREAM);
    let single = gaussian(noise.sigma_single_frame);
    let mut data = gt.as_slice().to_vec();
    perturb(&mut data, single.as_ref(), &mut rng);
    let single_frame = PoseSequence::new(gt.frames(), gt.joints(), dims, data).expect("shape preserved");

    let mut bones = compute_bone_vectors(tree, gt);
    let mut rng = stream(noise.seed, BONE_STREAM);
    let bone_noise = gaussian(noise.sigma_bone);
    jitter(&mut bones, bone_noise.as_ref(), &mut rng);

    let displ_noise = gaussian(noise.sigma_displ);
    let displacements = durations
        .as_slice()
        .iter()
        .map(|&d| {
            let mut disp = compute_displacements(gt, d).expect("durations are nonzero");
            let mut rng = stream(noise.seed, displacement_stream(d));
            jitter(&mut disp, displ_noise.as_ref(), &mut rng);
            disp
        })
        .collect();
    Ok(Predictions { single_frame, bones, displacements })
}

fn jitter(rel: &mut RelationVectors, noise: Option<&Normal<f64>>, rng: &mut ChaCha8Rng) {
    if noise.is_none() {
        return;
    }
    let cells: Vec<(usize, usize, Vec<f64>)> = rel.iter().map(|(t, k, v)| (t, k, v.to_vec())).collect();
    for (t, k, mut v) in cells {
        perturb(&mut v, noise, rng);
        rel.set(t, k, &v).expect("finite");
    }
}

impl Predictions {
    pub fn into_problem(
        self,
        tree: &JointTree,
        durations: &DurationSet,
        config: TrackerConfig,
    ) -> Result<TrackingProblem, TrackerError> {
        TrackingProblem::new(tree.clone(), self.single_frame, self.bones, self.displacements, durations.clone(), config)
    }
}
