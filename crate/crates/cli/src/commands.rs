use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use relfuse::formats::{to_json, DecodedFile, DecodedRelation, ProblemFile, SequenceFile};
use relfuse::metrics::{bone_error, displ_error, joint_error, pcf, pcf_csv};
use relfuse::relations::{compute_bone_vectors, ensemble_inference, RelationError};
use relfuse::synth::{corrupt_predictions, generate_sequence};
use relfuse::tracker::{objective_value, solve_tracking};
use relfuse::{DurationSet, JointTree, MotionSpec, NoiseSpec, Preset, TrackerConfig, WeightSpec};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{read_maps, read_problem, read_sequence, write_atomic};
use crate::{DecodeCmd, EvalCmd, MotionArgs, SynthCmd, TrackCmd};

const THREADS_ENV: &str = "RELFUSE_THREADS";

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn parse_tree(spec: &str) -> CliResult<JointTree> {
    let bad = || usage(format!("invalid --joints {spec:?}, expected chain:N, star:N or human17"));
    if spec == "human17" {
        return Ok(JointTree::human17());
    }
    let (kind, n) = spec.split_once(':').ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    let tree = match kind {
        "chain" => JointTree::chain(n),
        "star" => JointTree::star(n),
        _ => return Err(bad()),
    };
    tree.map_err(|e| usage(format!("--joints {spec}: {e}")))
}

/// A preset name or an explicit comma-separated list.
pub fn parse_durations(spec: &str) -> CliResult<DurationSet> {
    if let Ok(p) = spec.parse::<Preset>() {
        return Ok(p.durations());
    }
    let list = spec.split(',').map(|s| s.trim().parse::<i32>()).collect::<Result<Vec<_>, _>>().map_err(|_| {
        usage(format!("invalid durations {spec:?}, expected a preset (f, fb, mf, mfb) or a list like 1,-1"))
    })?;
    DurationSet::new(list).map_err(|e| usage(e.to_string()))
}

fn motion_spec(args: &MotionArgs, seed: u64) -> CliResult<MotionSpec> {
    let tree = parse_tree(&args.joints)?;
    let mut spec = MotionSpec::new(tree, args.frames, args.fps, seed);
    spec.dims = args.dims as usize;
    if let Some(a) = args.amplitude {
        spec.amplitude = a;
    }
    if let Some(r) = args.root_travel {
        spec.root_travel_mm = r;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn noise_spec(args: &MotionArgs, seed: u64) -> CliResult<NoiseSpec> {
    let noise = NoiseSpec::new(args.sigma_single, args.sigma_bone, args.sigma_displ, seed);
    noise.validate().map_err(|e| usage(e.to_string()))?;
    Ok(noise)
}

fn gamma_or_default(gamma: &Option<Vec<f64>>, n: usize) -> CliResult<Vec<f64>> {
    match gamma {
        Some(g) if g.len() != n => Err(usage(format!("--gamma has {} values for {n} durations", g.len()))),
        Some(g) => Ok(g.clone()),
        None => Ok(vec![1.0; n]),
    }
}

fn default_problem_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sequence".into());
    out.with_file_name(format!("{stem}.problem.json"))
}

pub fn synth(cmd: &SynthCmd) -> CliResult<()> {
    let spec = motion_spec(&cmd.motion, cmd.seed)?;
    let noise = noise_spec(&cmd.motion, cmd.noise_seed.unwrap_or(cmd.seed))?;
    let durations = parse_durations(&cmd.durations)?;
    let gamma = gamma_or_default(&cmd.gamma, durations.len())?;
    let gt = generate_sequence(&spec).map_err(|e| usage(e.to_string()))?;
    let problem = corrupt_predictions(&spec.tree, &gt, &durations, &noise)
        .map_err(|e| usage(e.to_string()))?
        .into_problem(&spec.tree, &durations, TrackerConfig::new(cmd.alpha, gamma))
        .map_err(|e| usage(e.to_string()))?;

    let problem_path = cmd.problem_out.clone().unwrap_or_else(|| default_problem_path(&cmd.out));
    let seq_ref = cmd.out.file_name().map(|n| n.to_string_lossy().into_owned());
    write_atomic(&cmd.out, &SequenceFile::from_pose(&spec.tree, &gt).to_json())?;
    write_atomic(&problem_path, &ProblemFile::from_problem(&problem, seq_ref).to_json())?;
    println!(
        "wrote {} ({} frames, {} joints) and {}",
        cmd.out.display(),
        gt.frames(),
        gt.joints(),
        problem_path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrackReport {
    preset: String,
    durations: Vec<i32>,
    alpha: f64,
    gamma: Vec<f64>,
    frames: usize,
    joints: usize,
    objective: f64,
    single_frame_objective: f64,
    residual_norm: f64,
    iterations: usize,
    wall_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    joint_error_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    single_frame_joint_error_mm: Option<f64>,
}

/// Resolves `--preset`/`--durations` to a label and a duration set.
fn resolve_durations(preset: Option<&str>, durations: &Option<Vec<i32>>) -> CliResult<Option<(String, DurationSet)>> {
    match (preset, durations) {
        (Some("custom") | None, Some(list)) => {
            let set = DurationSet::new(list.clone()).map_err(|e| usage(e.to_string()))?;
            Ok(Some(("custom".into(), set)))
        }
        (Some("custom"), None) => Err(usage("--preset custom needs --durations")),
        (Some(p), None) => {
            let preset: Preset = p.parse().map_err(|e: relfuse::tracker::TrackerError| usage(e.to_string()))?;
            Ok(Some((preset.name().into(), preset.durations())))
        }
        (Some(p), Some(_)) => Err(usage(format!("--durations only applies to --preset custom, not {p:?}"))),
        (None, None) => Ok(None),
    }
}

pub fn track(cmd: &TrackCmd) -> CliResult<()> {
    if cmd.seeds.is_some() {
        return track_batch(cmd);
    }
    if cmd.preset.len() > 1 {
        return Err(usage("several presets are only allowed in batch mode (--seeds)"));
    }
    let path = cmd.problem.as_ref().expect("clap requires --problem without --seeds");
    let inputs = read_problem(path)?.decode().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let (label, durations) = match resolve_durations(cmd.preset.first().map(String::as_str), &cmd.durations)? {
        Some(x) => x,
        None => ("file".into(), inputs.durations.clone()),
    };
    let gamma = match (&cmd.gamma, cmd.preset.is_empty() && cmd.durations.is_none()) {
        (None, true) => inputs.gamma.clone(),
        _ => gamma_or_default(&cmd.gamma, durations.len())?,
    };
    let alpha = cmd.alpha.unwrap_or(inputs.alpha);
    let problem = inputs.problem(&durations, TrackerConfig::new(alpha, gamma.clone()))?;

    let started = Instant::now();
    let result = solve_tracking(&problem)?;
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;

    let (mut joint_err, mut single_err) = (None, None);
    if let Some(gt_path) = &cmd.gt {
        let (_, gt) = read_sequence(gt_path)?;
        let je = |p| joint_error(p, &gt).map(|r| r.joint_error_mm).map_err(|e| CliError::Input(e.to_string()));
        joint_err = Some(je(&result.solution)?);
        single_err = Some(je(problem.single_frame())?);
    }
    let report = TrackReport {
        preset: label,
        durations: durations.as_slice().to_vec(),
        alpha,
        gamma,
        frames: problem.frames(),
        joints: problem.joints(),
        objective: result.objective,
        single_frame_objective: objective_value(&problem, problem.single_frame())?,
        residual_norm: result.residual_norm,
        iterations: result.iterations,
        wall_time_ms,
        joint_error_mm: joint_err,
        single_frame_joint_error_mm: single_err,
    };
    write_atomic(&cmd.out, &SequenceFile::from_pose(problem.tree(), &result.solution).to_json())?;
    let json = to_json(&report);
    if let Some(r) = &cmd.report {
        write_atomic(r, &json)?;
    }
    print!("{json}");
    Ok(())
}

fn parse_seed_range(s: &str) -> CliResult<std::ops::RangeInclusive<u64>> {
    let bad = || usage(format!("invalid --seeds {s:?}, expected a..b"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| CliError::Solver(format!("cannot start worker pool: {e}")))
}

struct SeedRow {
    seed: u64,
    single_frame_error: f64,
    /// Tracked joint error and objective for each preset, in flag order.
    tracked: Vec<(f64, f64)>,
}

fn track_batch(cmd: &TrackCmd) -> CliResult<()> {
    if cmd.problem.is_some() {
        return Err(usage("--problem and --seeds are mutually exclusive"));
    }
    let seeds = parse_seed_range(cmd.seeds.as_deref().unwrap())?;
    let mut runs = Vec::new();
    if cmd.preset.is_empty() {
        runs.push(
            resolve_durations(None, &cmd.durations)?
                .unwrap_or(("mfb".into(), Preset::MultiForwardBackward.durations())),
        );
    }
    for p in &cmd.preset {
        let run = resolve_durations(Some(p), &cmd.durations)?.unwrap();
        if runs.iter().any(|(label, _)| label == &run.0) {
            return Err(usage(format!("preset {} listed twice", run.0)));
        }
        runs.push(run);
    }
    let mut union: Vec<i32> = Vec::new();
    for (_, d) in &runs {
        for &x in d.as_slice() {
            if !union.contains(&x) {
                union.push(x);
            }
        }
    }
    let union = DurationSet::new(union).map_err(|e| usage(e.to_string()))?;
    let alpha = cmd.alpha.unwrap_or(1.0);
    if cmd.gamma.is_some() && runs.len() > 1 {
        return Err(usage("--gamma cannot be combined with several presets"));
    }
    let gammas = runs.iter().map(|(_, d)| gamma_or_default(&cmd.gamma, d.len())).collect::<CliResult<Vec<_>>>()?;
    motion_spec(&cmd.motion, 0)?;
    noise_spec(&cmd.motion, 0)?;

    let seeds: Vec<u64> = seeds.collect();
    let input = |e: relfuse::metrics::MetricError| CliError::Input(e.to_string());
    let pool = thread_pool()?;
    let results: Vec<CliResult<SeedRow>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let spec = motion_spec(&cmd.motion, seed)?;
                let noise = noise_spec(&cmd.motion, seed)?;
                let gt = generate_sequence(&spec).map_err(|e| usage(e.to_string()))?;
                let preds = corrupt_predictions(&spec.tree, &gt, &union, &noise).map_err(|e| usage(e.to_string()))?;
                let single_frame_error = joint_error(&preds.single_frame, &gt).map_err(input)?.joint_error_mm;
                let full = preds.into_problem(&spec.tree, &union, TrackerConfig::uniform(union.len()))?;
                let tracked = runs
                    .iter()
                    .zip(&gammas)
                    .map(|((_, d), g)| {
                        let solved = solve_tracking(&full.select(d, alpha, g.clone())?)?;
                        Ok((joint_error(&solved.solution, &gt).map_err(input)?.joint_error_mm, solved.objective))
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                Ok(SeedRow { seed, single_frame_error, tracked })
            })
            .collect()
    });
    let mut rows = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    rows.sort_by_key(|r| r.seed);

    let mut csv = String::from("seed,single_frame_error_mm");
    for (label, _) in &runs {
        csv.push_str(&format!(",{label}_error_mm,{label}_objective"));
    }
    csv.push('\n');
    for r in &rows {
        csv.push_str(&format!("{},{}", r.seed, r.single_frame_error));
        for (err, obj) in &r.tracked {
            csv.push_str(&format!(",{err},{obj}"));
        }
        csv.push('\n');
    }
    write_atomic(&cmd.out, &csv)?;

    let n = rows.len() as f64;
    let single_mean = rows.iter().map(|r| r.single_frame_error).sum::<f64>() / n;
    println!("{} seeds; single-frame mean joint error {single_mean:.4} mm", rows.len());
    for (i, (label, _)) in runs.iter().enumerate() {
        let m = rows.iter().map(|r| r.tracked[i].0).sum::<f64>() / n;
        println!("preset {label}: mean joint error {m:.4} mm");
    }
    Ok(())
}

fn parse_thresholds(s: &str) -> CliResult<Vec<f64>> {
    let bad = || usage(format!("invalid --thresholds {s:?}, expected START:STOP:STEP or a comma list"));
    let parts: Vec<&str> = s.split(':').collect();
    let list = if parts.len() == 3 {
        let nums = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad())?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || !(stop >= start) {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| start + step * i as f64).collect()
    } else {
        s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad())?
    };
    if list.windows(2).any(|w| w[0] > w[1]) {
        return Err(usage("--thresholds must be ascending"));
    }
    Ok(list)
}

pub fn eval(cmd: &EvalCmd) -> CliResult<()> {
    let thresholds = parse_thresholds(&cmd.thresholds)?;
    let (pred_tree, pred) = read_sequence(&cmd.pred)?;
    let (gt_tree, gt) = read_sequence(&cmd.gt)?;
    if pred_tree != gt_tree {
        return Err(CliError::Input("predicted and ground-truth sequences use different joint trees".into()));
    }
    let input = |e: relfuse::metrics::MetricError| CliError::Input(e.to_string());
    let mut report = joint_error(&pred, &gt).map_err(input)?;
    if gt_tree.bone_joints().next().is_some() {
        report.bone_error_mm = Some(
            bone_error(&compute_bone_vectors(&pred_tree, &pred), &compute_bone_vectors(&gt_tree, &gt))
                .map_err(input)?,
        );
    }
    if let Some(p) = &cmd.problem {
        let inputs = read_problem(p)?.decode()?;
        let disp = inputs.displacements.get(&cmd.duration).ok_or_else(|| {
            CliError::Input(format!("{} has no displacements for duration {}", p.display(), cmd.duration))
        })?;
        report.displ_error_mm = Some(displ_error(disp, &gt, cmd.duration).map_err(input)?);
    }
    let curve = pcf(&pred, &gt, &thresholds).map_err(input)?;
    report.pcf_curve = Some(curve.clone());

    if let Some(path) = &cmd.csv {
        write_atomic(path, &report.to_csv())?;
    }
    if let Some(path) = &cmd.json {
        write_atomic(path, &to_json(&report))?;
    }
    if let Some(path) = &cmd.pcf {
        write_atomic(path, &pcf_csv(&curve))?;
    }
    println!("joint error: {:.6} mm", report.joint_error_mm);
    if let Some(b) = report.bone_error_mm {
        println!("bone error: {b:.6} mm");
    }
    if let Some(d) = report.displ_error_mm {
        println!("displacement error (d={}): {d:.6} mm", cmd.duration);
    }
    Ok(())
}

pub fn decode(cmd: &DecodeCmd) -> CliResult<()> {
    let specs: Vec<WeightSpec> = match (&cmd.ensemble, cmd.family) {
        (Some(list), _) if !list.is_empty() => list.clone(),
        (_, Some(family)) => vec![WeightSpec::new(family, cmd.beta).map_err(|e| usage(e.to_string()))?],
        _ => return Err(usage("pass --family (with --beta) or --ensemble")),
    };
    let file = read_maps(&cmd.maps)?;
    let maps = file.decode().map_err(|e| CliError::Input(format!("{}: {e}", cmd.maps.display())))?;
    let mut relations = Vec::with_capacity(maps.len());
    let mut empty = Vec::new();
    for (entry, map) in &maps {
        match ensemble_inference(map, entry.anchor, &specs) {
            Ok(d) => relations.push(DecodedRelation {
                joint: entry.joint,
                kind: entry.kind,
                duration: entry.duration,
                value: d.value,
                total_weight: d.total_weight,
            }),
            Err(RelationError::ZeroTotalWeight) => empty.push(entry.joint),
            Err(e) => return Err(CliError::Input(format!("joint {}: {e}", entry.joint))),
        }
    }
    if !empty.is_empty() {
        empty.sort_unstable();
        empty.dedup();
        return Err(CliError::Input(format!("zero total weight for joints {empty:?}")));
    }
    let out = DecodedFile {
        version: relfuse::formats::FORMAT_VERSION.into(),
        weights: specs.iter().map(|s| s.to_string()).collect(),
        relations,
    };
    write_atomic(&cmd.out, &out.to_json())?;
    println!("decoded {} relation maps with {}", out.relations.len(), out.weights.join(", "));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_specs() {
        assert_eq!(parse_tree("chain:5").unwrap().joint_count(), 5);
        assert_eq!(parse_tree("star:3").unwrap().children(0), &[1, 2]);
        assert_eq!(parse_tree("human17").unwrap().joint_count(), 17);
        assert!(parse_tree("ring:4").is_err());
        assert!(parse_tree("chain:0").is_err());
    }

    #[test]
    fn duration_specs() {
        assert_eq!(parse_durations("fb").unwrap().as_slice(), &[1, -1]);
        assert_eq!(parse_durations("2,-3").unwrap().as_slice(), &[2, -3]);
        assert!(parse_durations("1,1").is_err());
        assert!(parse_durations("0").is_err());
    }

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("0..99").unwrap(), 0..=99);
        assert_eq!(parse_seed_range("3..=5").unwrap(), 3..=5);
        assert!(parse_seed_range("5..3").is_err());
        assert!(parse_seed_range("7").is_err());
    }

    #[test]
    fn threshold_specs() {
        assert_eq!(parse_thresholds("0:10:5").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_thresholds("1,2.5,40").unwrap(), vec![1.0, 2.5, 40.0]);
        assert!(parse_thresholds("3,1").is_err());
        assert!(parse_thresholds("0:10:0").is_err());
    }
}
