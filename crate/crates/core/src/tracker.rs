//! Spatiotemporal least-squares tracking.
//!
//! Given single-frame joint predictions `J`, bone predictions `B` and
//! displacement predictions `Δ(d)` for each duration `d` of a [`DurationSet`],
//! the tracked poses minimise
//!
//! ```text
//! e = Σ_t Σ_k  w‖Ĵ_k^t − J_k^t‖²
//!            + α ‖Ĵ_k^t − Ĵ_parent(k)^t − B_k^t‖²            (non-root k)
//!            + Σ_n γ_n ‖Ĵ_k^t − Ĵ_k^{t−d_n} − Δ_k^{t,d_n}‖²   (t − d_n in range)
//! ```
//!
//! with `w = 1`. The problem separates per coordinate and every coordinate
//! shares the same normal matrix, which is factored once.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{norm2, BandCholesky, CsrMatrix, TripletBuilder};
use crate::relations::{shifted_frame, RelationVectors};
use crate::skeleton::{JointTree, PoseSequence, SkeletonError};

/// Relative residual the solver must reach per coordinate.
pub const RELATIVE_RESIDUAL_TOL: f64 = 1e-10;
/// Absolute residual used when the right-hand side is zero.
pub const ABSOLUTE_RESIDUAL_TOL: f64 = 1e-12;
/// `K * T` above which [`dense_oracle_solve`] refuses to run.
pub const DENSE_ORACLE_LIMIT: usize = 10_000;

const MAX_REFINEMENT_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid duration set: {0}")]
    BadDurations(String),
    #[error("unknown duration preset {0:?}, expected one of f, fb, mf, mfb")]
    UnknownPreset(String),
    #[error("invalid tracker weights: {0}")]
    BadWeights(String),
    #[error("missing bone prediction for joint {joint} at frame {frame}")]
    MissingBone { frame: usize, joint: usize },
    #[error("unexpected {what} entry for joint {joint} at frame {frame}")]
    StrayEntry { what: String, frame: usize, joint: usize },
    #[error("no displacement predictions supplied for duration {0}")]
    MissingDisplacements(i32),
    #[error("normal matrix is not positive definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("solver residual {residual:e} above tolerance in coordinate {dim}")]
    ResidualTooLarge { dim: usize, residual: f64 },
    #[error("dense oracle limited to {DENSE_ORACLE_LIMIT} unknowns, problem has {0}")]
    ProblemTooLarge(usize),
}

/// Named duration sets used for experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `{1}`
    Forward,
    /// `{1, -1}`
    ForwardBackward,
    /// `{1, 2, 3}`
    MultiForward,
    /// `{1, 2, 3, -1, -2, -3}`
    MultiForwardBackward,
}

impl Preset {
    pub const ALL: [Preset; 4] =
        [Preset::Forward, Preset::ForwardBackward, Preset::MultiForward, Preset::MultiForwardBackward];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Forward => "f",
            Preset::ForwardBackward => "fb",
            Preset::MultiForward => "mf",
            Preset::MultiForwardBackward => "mfb",
        }
    }

    pub fn durations(self) -> DurationSet {
        let d: &[i32] = match self {
            Preset::Forward => &[1],
            Preset::ForwardBackward => &[1, -1],
            Preset::MultiForward => &[1, 2, 3],
            Preset::MultiForwardBackward => &[1, 2, 3, -1, -2, -3],
        };
        DurationSet(d.to_vec())
    }
}

impl std::str::FromStr for Preset {
    type Err = TrackerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| TrackerError::UnknownPreset(s.to_string()))
    }
}

/// Ordered list of distinct nonzero durations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DurationSet(Vec<i32>);

impl DurationSet {
    pub fn new(durations: Vec<i32>) -> Result<Self, TrackerError> {
        if durations.contains(&0) {
            return Err(TrackerError::BadDurations("duration 0 is not allowed".into()));
        }
        for (i, d) in durations.iter().enumerate() {
            if durations[..i].contains(d) {
                return Err(TrackerError::BadDurations(format!("duration {d} repeated")));
            }
        }
        Ok(Self(durations))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, d: i32) -> Option<usize> {
        self.0.iter().position(|&x| x == d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Weight of the bone term.
    pub alpha: f64,
    /// One weight per duration, aligned with the duration set.
    pub gamma: Vec<f64>,
    /// Weight of the single-frame term. Fixed at 1 in normal use.
    pub data_weight: f64,
}

impl TrackerConfig {
    /// `α = 1` and `γ_n = 1` for `n` durations.
    pub fn uniform(n: usize) -> Self {
        Self { alpha: 1.0, gamma: vec![1.0; n], data_weight: 1.0 }
    }

    pub fn new(alpha: f64, gamma: Vec<f64>) -> Self {
        Self { alpha, gamma, data_weight: 1.0 }
    }
}

/// Everything needed to evaluate and minimise the tracking objective.
#[derive(Debug, Clone)]
pub struct TrackingProblem {
    tree: JointTree,
    single_frame: PoseSequence,
    bones: RelationVectors,
    displacements: Vec<RelationVectors>,
    durations: DurationSet,
    config: TrackerConfig,
}

impl TrackingProblem {
    /// `displacements[n]` holds predictions for `durations[n]`.
    pub fn new(
        tree: JointTree,
        single_frame: PoseSequence,
        bones: RelationVectors,
        displacements: Vec<RelationVectors>,
        durations: DurationSet,
        config: TrackerConfig,
    ) -> Result<Self, TrackerError> {
        single_frame.check_tree(&tree)?;
        let (t, k, d) = (single_frame.frames(), single_frame.joints(), single_frame.dims());
        let shape_ok = |r: &RelationVectors| r.frames() == t && r.joints() == k && r.dims() == d;
        if !shape_ok(&bones) {
            return Err(TrackerError::ShapeMismatch("bone predictions do not match the pose shape".into()));
        }
        if displacements.len() != durations.len() {
            return Err(TrackerError::ShapeMismatch(format!(
                "{} displacement sets for {} durations",
                displacements.len(),
                durations.len()
            )));
        }
        if config.gamma.len() != durations.len() {
            return Err(TrackerError::BadWeights(format!(
                "{} gamma values for {} durations",
                config.gamma.len(),
                durations.len()
            )));
        }
        let weights_ok = std::iter::once(config.alpha)
            .chain(config.gamma.iter().copied())
            .chain(std::iter::once(config.data_weight))
            .all(|w| w.is_finite() && w >= 0.0);
        if !weights_ok {
            return Err(TrackerError::BadWeights("weights must be finite and nonnegative".into()));
        }
        for frame in 0..t {
            for joint in 0..k {
                let has = bones.is_present(frame, joint);
                if tree.parent(joint).is_some() && !has {
                    return Err(TrackerError::MissingBone { frame, joint });
                }
                if tree.parent(joint).is_none() && has {
                    return Err(TrackerError::StrayEntry { what: "root bone".into(), frame, joint });
                }
            }
        }
        for (disp, &dur) in displacements.iter().zip(durations.as_slice()) {
            if !shape_ok(disp) {
                return Err(TrackerError::ShapeMismatch(format!(
                    "displacements for duration {dur} do not match the pose shape"
                )));
            }
            for (frame, joint, _) in disp.iter() {
                if shifted_frame(frame, dur, t).is_none() {
                    return Err(TrackerError::StrayEntry {
                        what: format!("duration {dur} displacement"),
                        frame,
                        joint,
                    });
                }
            }
        }
        Ok(Self { tree, single_frame, bones, displacements, durations, config })
    }

    pub fn tree(&self) -> &JointTree {
        &self.tree
    }

    pub fn single_frame(&self) -> &PoseSequence {
        &self.single_frame
    }

    pub fn bones(&self) -> &RelationVectors {
        &self.bones
    }

    pub fn displacements(&self) -> &[RelationVectors] {
        &self.displacements
    }

    pub fn durations(&self) -> &DurationSet {
        &self.durations
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn frames(&self) -> usize {
        self.single_frame.frames()
    }

    pub fn joints(&self) -> usize {
        self.single_frame.joints()
    }

    pub fn dims(&self) -> usize {
        self.single_frame.dims()
    }

    pub fn unknowns(&self) -> usize {
        self.frames() * self.joints()
    }

    /// Same inputs with different weights.
    pub fn with_config(&self, config: TrackerConfig) -> Result<Self, TrackerError> {
        Self::new(
            self.tree.clone(),
            self.single_frame.clone(),
            self.bones.clone(),
            self.displacements.clone(),
            self.durations.clone(),
            config,
        )
    }

    /// Restricts the problem to `durations`, which must all be available.
    /// `gamma` is aligned with the new set.
    pub fn select(&self, durations: &DurationSet, alpha: f64, gamma: Vec<f64>) -> Result<Self, TrackerError> {
        let mut disp = Vec::with_capacity(durations.len());
        for &d in durations.as_slice() {
            let n = self.durations.position(d).ok_or(TrackerError::MissingDisplacements(d))?;
            disp.push(self.displacements[n].clone());
        }
        Self::new(
            self.tree.clone(),
            self.single_frame.clone(),
            self.bones.clone(),
            disp,
            durations.clone(),
            TrackerConfig { alpha, gamma, data_weight: self.config.data_weight },
        )
    }

    /// Every residual term as `(weight, unknown, partner, target)`; the
    /// residual is `x[unknown] - x[partner] - target`, or `x[unknown] - target`
    /// when `partner` is `None`.
    fn for_each_term(&self, mut f: impl FnMut(f64, usize, Option<usize>, &[f64])) {
        let (frames, joints) = (self.frames(), self.joints());
        let idx = |t: usize, k: usize| t * joints + k;
        for t in 0..frames {
            for k in 0..joints {
                f(self.config.data_weight, idx(t, k), None, self.single_frame.get(t, k));
                if let (Some(p), Some(b)) = (self.tree.parent(k), self.bones.get(t, k)) {
                    f(self.config.alpha, idx(t, k), Some(idx(t, p)), b);
                }
                for ((disp, &d), &g) in self.displacements.iter().zip(self.durations.as_slice()).zip(&self.config.gamma)
                {
                    if let (Some(s), Some(v)) = (shifted_frame(t, d, frames), disp.get(t, k)) {
                        f(g, idx(t, k), Some(idx(s, k)), v);
                    }
                }
            }
        }
    }
}

/// The tracking objective evaluated at `candidate`.
pub fn objective_value(problem: &TrackingProblem, candidate: &PoseSequence) -> Result<f64, TrackerError> {
    if !candidate.same_shape(&problem.single_frame) {
        return Err(TrackerError::ShapeMismatch(format!(
            "candidate is {}x{}x{}, problem is {}x{}x{}",
            candidate.frames(),
            candidate.joints(),
            candidate.dims(),
            problem.frames(),
            problem.joints(),
            problem.dims()
        )));
    }
    let x = candidate.as_slice();
    let dims = problem.dims();
    let mut e = 0.0;
    problem.for_each_term(|w, i, j, target| {
        if w == 0.0 {
            return;
        }
        let mut sq = 0.0;
        for c in 0..dims {
            let partner = j.map_or(0.0, |j| x[j * dims + c]);
            let r = x[i * dims + c] - partner - target[c];
            sq += r * r;
        }
        e += w * sq;
    });
    Ok(e)
}

/// Normal equations `A x_c = b_c`, one right-hand side per coordinate `c`.
/// Unknown `t * K + k` is joint `k` at frame `t`.
#[derive(Debug, Clone)]
pub struct NormalSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<Vec<f64>>,
}

pub fn assemble_system(problem: &TrackingProblem) -> NormalSystem {
    let n = problem.unknowns();
    let dims = problem.dims();
    let mut a = TripletBuilder::new(n);
    let mut rhs = vec![vec![0.0; n]; dims];
    problem.for_each_term(|w, i, j, target| {
        if w == 0.0 {
            return;
        }
        match j {
            None => a.add(i, i, w),
            Some(j) => a.add_difference(i, j, w),
        }
        for (c, b) in rhs.iter_mut().enumerate() {
            b[i] += w * target[c];
            if let Some(j) = j {
                b[j] -= w * target[c];
            }
        }
    });
    NormalSystem { matrix: a.build(), rhs }
}

#[derive(Debug, Clone)]
pub struct TrackedResult {
    pub solution: PoseSequence,
    pub objective: f64,
    /// Largest per-coordinate residual: relative `‖Ax − b‖/‖b‖`, or absolute when `b = 0`.
    pub residual_norm: f64,
    /// Triangular solves per coordinate, counting refinement steps.
    pub iterations: usize,
}

fn residual_measure(a: &CsrMatrix, x: &[f64], b: &[f64], scratch: &mut [f64]) -> (f64, bool) {
    a.mul_vec(x, scratch);
    scratch.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let bn = norm2(b);
    if bn > 0.0 {
        let rel = norm2(scratch) / bn;
        (rel, rel <= RELATIVE_RESIDUAL_TOL)
    } else {
        let abs = norm2(scratch);
        (abs, abs <= ABSOLUTE_RESIDUAL_TOL)
    }
}

/// Minimises the tracking objective with a band Cholesky factorization of the
/// shared normal matrix, followed by iterative refinement when needed.
pub fn solve_tracking(problem: &TrackingProblem) -> Result<TrackedResult, TrackerError> {
    let system = assemble_system(problem);
    let factor = BandCholesky::factor(&system.matrix)
        .map_err(|e| TrackerError::NotPositiveDefinite { pivot: e.pivot, value: e.value })?;
    let (n, dims) = (problem.unknowns(), problem.dims());
    let mut coords = Vec::with_capacity(dims);
    let mut worst = 0.0f64;
    let mut iterations = 0;
    let mut scratch = vec![0.0; n];
    for (c, b) in system.rhs.iter().enumerate() {
        let mut x = b.clone();
        factor.solve_in_place(&mut x);
        let mut steps = 1;
        let (mut res, mut ok) = residual_measure(&system.matrix, &x, b, &mut scratch);
        while !ok && steps <= MAX_REFINEMENT_STEPS {
            factor.solve_in_place(&mut scratch);
            x.iter_mut().zip(&scratch).for_each(|(x, dx)| *x += dx);
            steps += 1;
            (res, ok) = residual_measure(&system.matrix, &x, b, &mut scratch);
        }
        if !ok {
            return Err(TrackerError::ResidualTooLarge { dim: c, residual: res });
        }
        worst = worst.max(res);
        iterations = iterations.max(steps);
        coords.push(x);
    }
    let mut data = vec![0.0; n * dims];
    for (c, x) in coords.iter().enumerate() {
        for (i, v) in x.iter().enumerate() {
            data[i * dims + c] = *v;
        }
    }
    let solution = PoseSequence::new(problem.frames(), problem.joints(), dims, data)?;
    let objective = objective_value(problem, &solution)?;
    Ok(TrackedResult { solution, objective, residual_norm: worst, iterations })
}

/// Verification oracle: builds the dense normal matrix directly from the
/// residual terms and solves it with a dense Cholesky factorization.
pub fn dense_oracle_solve(problem: &TrackingProblem) -> Result<TrackedResult, TrackerError> {
    let n = problem.unknowns();
    if n > DENSE_ORACLE_LIMIT {
        return Err(TrackerError::ProblemTooLarge(n));
    }
    let dims = problem.dims();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, dims);
    problem.for_each_term(|w, i, j, target| {
        // residual row r = e_i - e_j, contributes w r r^T and w r target^T
        let mut row = vec![(i, 1.0)];
        if let Some(j) = j {
            row.push((j, -1.0));
        }
        for &(p, sp) in &row {
            for &(q, sq) in &row {
                a[(p, q)] += w * sp * sq;
            }
            for c in 0..dims {
                b[(p, c)] += w * sp * target[c];
            }
        }
    });
    let chol = a.clone().cholesky().ok_or(TrackerError::NotPositiveDefinite { pivot: 0, value: 0.0 })?;
    let x = chol.solve(&b);
    let mut worst = 0.0f64;
    for c in 0..dims {
        let bc: DVector<f64> = b.column(c).into();
        let xc: DVector<f64> = x.column(c).into();
        let r = (&a * &xc - &bc).norm();
        let bn = bc.norm();
        worst = worst.max(if bn > 0.0 { r / bn } else { r });
    }
    let mut data = vec![0.0; n * dims];
    for i in 0..n {
        for c in 0..dims {
            data[i * dims + c] = x[(i, c)];
        }
    }
    let solution = PoseSequence::new(problem.frames(), problem.joints(), dims, data)?;
    let objective = objective_value(problem, &solution)?;
    Ok(TrackedResult { solution, objective, residual_norm: worst, iterations: 1 })
}
