use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use relfuse::metrics::joint_error;
use relfuse::relations::{build_distance_map, build_weight_map, decode_relation, GridTransform, RelationMap};
use relfuse::synth::{corrupt_predictions, generate_sequence};
use relfuse::tracker::solve_tracking;
use relfuse::{FrameRate, JointTree, MotionSpec, NoiseSpec, Preset, TrackerConfig, WeightFamily, WeightSpec};
use serde::Serialize;

pub const MAX_GRID: usize = 256;
pub const MAX_FRAMES: usize = 400;

fn family(name: &str) -> Result<WeightFamily, String> {
    name.parse()
}

pub fn parse_tree(spec: &str) -> Result<JointTree, String> {
    if spec == "human17" {
        return Ok(JointTree::human17());
    }
    let (kind, n) = spec.split_once(':').ok_or_else(|| format!("unknown skeleton {spec:?}"))?;
    let n: usize = n.parse().map_err(|_| format!("bad joint count in {spec:?}"))?;
    match kind {
        "chain" => JointTree::chain(n),
        "star" => JointTree::star(n),
        _ => return Err(format!("unknown skeleton {spec:?}")),
    }
    .map_err(|e| e.to_string())
}

fn check_grid(height: usize, width: usize) -> Result<(), String> {
    if height == 0 || width == 0 || height > MAX_GRID || width > MAX_GRID {
        return Err(format!("grid must be between 1x1 and {MAX_GRID}x{MAX_GRID}"));
    }
    Ok(())
}

pub fn weight_map(name: &str, beta: f64, height: usize, width: usize, anchor: [f64; 2]) -> Result<Vec<f64>, String> {
    check_grid(height, width)?;
    let spec = WeightSpec::new(family(name)?, beta).map_err(|e| e.to_string())?;
    let distance = build_distance_map(anchor, height, width, &GridTransform::default()).map_err(|e| e.to_string())?;
    Ok(build_weight_map(&distance, &spec).values)
}

pub struct DecodeParams {
    pub beta: f64,
    pub size: usize,
    pub anchor: [f64; 2],
    /// Error scale per pixel of distance from the anchor. Far pixels get both
    /// random noise and a drift shared by the whole map.
    pub noise_growth: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct FamilyResult {
    pub family: &'static str,
    pub value: Option<[f64; 2]>,
    pub error: Option<f64>,
    pub total_weight: f64,
}

#[derive(Debug, Serialize)]
pub struct DecodeReport {
    pub truth: [f64; 2],
    /// Row-major `size * size` magnitude of each pixel's prediction error.
    pub pixel_error: Vec<f64>,
    pub results: Vec<FamilyResult>,
}

/// Builds a relation map whose predictions degrade with distance from the
/// anchor and decodes it with every family.
pub fn decode_noisy_map(p: &DecodeParams) -> Result<String, String> {
    check_grid(p.size, p.size)?;
    if !(p.noise_growth.is_finite() && p.noise_growth >= 0.0) {
        return Err("noise growth must be a nonnegative number".into());
    }
    let truth = [120.0, -45.0];
    let transform = GridTransform::default();
    let distance = build_distance_map(p.anchor, p.size, p.size, &transform).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let drift = [unit.sample(&mut rng), unit.sample(&mut rng)];
    let mut values = Vec::with_capacity(p.size * p.size * 2);
    let mut pixel_error = Vec::with_capacity(p.size * p.size);
    for &f in &distance.values {
        let sigma = p.noise_growth * f;
        let e = [sigma * (drift[0] + unit.sample(&mut rng)), sigma * (drift[1] + unit.sample(&mut rng))];
        values.extend([truth[0] + e[0], truth[1] + e[1]]);
        pixel_error.push(e[0].hypot(e[1]));
    }
    let map = RelationMap::new(p.size, p.size, 2, values, transform).map_err(|e| e.to_string())?;

    let results = WeightFamily::ALL
        .iter()
        .map(|&fam| {
            let spec = WeightSpec::new(fam, p.beta).map_err(|e| e.to_string())?;
            Ok(match decode_relation(&map, p.anchor, &spec) {
                Ok(d) => FamilyResult {
                    family: fam.name(),
                    value: Some([d.value[0], d.value[1]]),
                    error: Some((d.value[0] - truth[0]).hypot(d.value[1] - truth[1])),
                    total_weight: d.total_weight,
                },
                Err(_) => FamilyResult { family: fam.name(), value: None, error: None, total_weight: 0.0 },
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&DecodeReport { truth, pixel_error, results }).map_err(|e| e.to_string())
}

pub struct TrackParams {
    pub joints: String,
    pub frames: usize,
    pub sigma_single: f64,
    /// Noise on both bone and displacement predictions.
    pub sigma_relation: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct PresetResult {
    pub preset: &'static str,
    pub joint_error_mm: f64,
    /// First coordinate of the plotted joint per frame.
    pub trace: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct TrackReport {
    pub joint: usize,
    pub ground_truth: Vec<f64>,
    pub single_frame: Vec<f64>,
    pub single_frame_error_mm: f64,
    pub presets: Vec<PresetResult>,
}

pub fn track_demo(p: &TrackParams) -> Result<String, String> {
    if p.frames < 2 || p.frames > MAX_FRAMES {
        return Err(format!("frames must be between 2 and {MAX_FRAMES}"));
    }
    let tree = parse_tree(&p.joints)?;
    let spec = MotionSpec::new(tree.clone(), p.frames, FrameRate::Fps8, p.seed);
    let gt = generate_sequence(&spec).map_err(|e| e.to_string())?;
    let all = Preset::MultiForwardBackward.durations();
    let noise = NoiseSpec::new(p.sigma_single, p.sigma_relation, p.sigma_relation, p.seed.wrapping_add(1));
    let full = corrupt_predictions(&tree, &gt, &all, &noise)
        .map_err(|e| e.to_string())?
        .into_problem(&tree, &all, TrackerConfig::uniform(all.len()))
        .map_err(|e| e.to_string())?;

    // a leaf: last in topological order
    let joint = tree.topological_order().last().copied().unwrap_or(0);
    let trace = |pose: &relfuse::PoseSequence| (0..p.frames).map(|t| pose.get(t, joint)[0]).collect::<Vec<_>>();
    let err =
        |pose: &relfuse::PoseSequence| joint_error(pose, &gt).map(|r| r.joint_error_mm).map_err(|e| e.to_string());

    let presets = Preset::ALL
        .iter()
        .map(|&preset| {
            let d = preset.durations();
            let problem = full.select(&d, p.alpha, vec![p.gamma; d.len()]).map_err(|e| e.to_string())?;
            let solved = solve_tracking(&problem).map_err(|e| e.to_string())?;
            Ok(PresetResult {
                preset: preset.name(),
                joint_error_mm: err(&solved.solution)?,
                trace: trace(&solved.solution),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let report = TrackReport {
        joint,
        ground_truth: trace(&gt),
        single_frame: trace(full.single_frame()),
        single_frame_error_mm: err(full.single_frame())?,
        presets,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}
