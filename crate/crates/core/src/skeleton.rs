//! Joint trees, pose sequences and the relation-index function.
//!
//! Joints are indexed from 0. A [`JointTree`] stores one optional parent per
//! joint; exactly one joint (the root) has no parent and every other joint
//! must reach the root by following parents.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkeletonError {
    #[error("joint tree has no joints")]
    Empty,
    #[error("joint {joint} lies on a parent cycle")]
    CycleDetected { joint: usize },
    #[error("joint tree has {count} roots ({roots:?}), expected exactly one")]
    MultipleRoots { count: usize, roots: Vec<usize> },
    #[error("joint {joint} has parent {parent}, outside [0, {joint_count})")]
    DanglingParent { joint: usize, parent: usize, joint_count: usize },
    #[error("joint {joint} is the root and has no parent")]
    RootHasNoParent { joint: usize },
    #[error("joint index {joint} out of range for {joint_count} joints")]
    JointOutOfRange { joint: usize, joint_count: usize },
    #[error("temporal relation requires a nonzero duration")]
    ZeroDuration,
    #[error("pose dimension must be 2 or 3, got {0}")]
    BadDims(usize),
    #[error("pose sequence needs at least one frame")]
    NoFrames,
    #[error("expected {expected} coordinates, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("non-finite coordinate at frame {frame}, joint {joint}")]
    NonFinite { frame: usize, joint: usize },
}

/// Checks the tree invariants on a raw parent list.
///
/// Dangling parents are reported first, then cycles, then the root count, so a
/// pure two-cycle such as `[Some(1), Some(0)]` reports [`SkeletonError::CycleDetected`].
pub fn validate_tree(parents: &[Option<usize>]) -> Result<(), SkeletonError> {
    let k = parents.len();
    if k == 0 {
        return Err(SkeletonError::Empty);
    }
    for (joint, parent) in parents.iter().enumerate() {
        if let Some(p) = *parent {
            if p >= k {
                return Err(SkeletonError::DanglingParent { joint, parent: p, joint_count: k });
            }
        }
    }
    // 0 = unvisited, 1 = on current walk, 2 = known to reach a root
    let mut state = vec![0u8; k];
    for start in 0..k {
        let mut walk = Vec::new();
        let mut cur = start;
        loop {
            match state[cur] {
                2 => break,
                1 => return Err(SkeletonError::CycleDetected { joint: cur }),
                _ => {}
            }
            state[cur] = 1;
            walk.push(cur);
            match parents[cur] {
                Some(p) => cur = p,
                None => break,
            }
        }
        for j in walk {
            state[j] = 2;
        }
    }
    let roots: Vec<usize> = (0..k).filter(|&j| parents[j].is_none()).collect();
    if roots.len() != 1 {
        return Err(SkeletonError::MultipleRoots { count: roots.len(), roots });
    }
    Ok(())
}

/// A validated kinematic tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointTree {
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    root: usize,
    order: Vec<usize>,
}

impl JointTree {
    pub fn new(parents: Vec<Option<usize>>) -> Result<Self, SkeletonError> {
        validate_tree(&parents)?;
        let k = parents.len();
        let mut children = vec![Vec::new(); k];
        let mut root = 0;
        for (j, p) in parents.iter().enumerate() {
            match p {
                Some(p) => children[*p].push(j),
                None => root = j,
            }
        }
        let mut order = Vec::with_capacity(k);
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let j = order[head];
            order.extend_from_slice(&children[j]);
            head += 1;
        }
        Ok(Self { parents, children, root, order })
    }

    /// Parent list with `-1` marking the root, as stored in files.
    pub fn from_signed(parents: &[i64]) -> Result<Self, SkeletonError> {
        let k = parents.len();
        let mut out = Vec::with_capacity(k);
        for (joint, &p) in parents.iter().enumerate() {
            out.push(match p {
                -1 => None,
                p if p >= 0 => Some(p as usize),
                // any other negative value cannot name a joint
                _ => return Err(SkeletonError::DanglingParent { joint, parent: usize::MAX, joint_count: k }),
            });
        }
        Self::new(out)
    }

    pub fn to_signed(&self) -> Vec<i64> {
        self.parents.iter().map(|p| p.map_or(-1, |p| p as i64)).collect()
    }

    /// `0 <- 1 <- 2 <- ...`
    pub fn chain(joint_count: usize) -> Result<Self, SkeletonError> {
        Self::new((0..joint_count).map(|j| j.checked_sub(1)).collect())
    }

    /// Joint 0 is the root and every other joint hangs directly off it.
    pub fn star(joint_count: usize) -> Result<Self, SkeletonError> {
        Self::new((0..joint_count).map(|j| if j == 0 { None } else { Some(0) }).collect())
    }

    /// 17-joint human body: pelvis root, two legs, spine, neck/head and two arms.
    pub fn human17() -> Self {
        let parents = [
            None,     // 0 pelvis
            Some(0),  // 1 right hip
            Some(1),  // 2 right knee
            Some(2),  // 3 right ankle
            Some(0),  // 4 left hip
            Some(4),  // 5 left knee
            Some(5),  // 6 left ankle
            Some(0),  // 7 spine
            Some(7),  // 8 thorax
            Some(8),  // 9 neck
            Some(9),  // 10 head
            Some(8),  // 11 left shoulder
            Some(11), // 12 left elbow
            Some(12), // 13 left wrist
            Some(8),  // 14 right shoulder
            Some(14), // 15 right elbow
            Some(15), // 16 right wrist
        ];
        Self::new(parents.to_vec()).expect("human17 tree is valid")
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn children(&self, joint: usize) -> &[usize] {
        &self.children[joint]
    }

    /// Breadth-first order starting at the root; every parent precedes its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Non-root joints, i.e. the joints that own a bone.
    pub fn bone_joints(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.parents.len()).filter(move |&j| self.parents[j].is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationKind {
    Spatial,
    Temporal(i32),
}

/// Index of a joint at a (possibly out-of-range) frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JointAt {
    pub joint: usize,
    pub frame: i64,
}

/// The joint a relation points from: the parent at the same frame for a
/// spatial relation, the same joint `d` frames earlier for a temporal one.
pub fn relation(tree: &JointTree, joint: usize, frame: i64, kind: RelationKind) -> Result<JointAt, SkeletonError> {
    let k = tree.joint_count();
    if joint >= k {
        return Err(SkeletonError::JointOutOfRange { joint, joint_count: k });
    }
    match kind {
        RelationKind::Spatial => {
            tree.parent(joint).map(|p| JointAt { joint: p, frame }).ok_or(SkeletonError::RootHasNoParent { joint })
        }
        RelationKind::Temporal(0) => Err(SkeletonError::ZeroDuration),
        RelationKind::Temporal(d) => Ok(JointAt { joint, frame: frame - i64::from(d) }),
    }
}

/// Joint positions for `frames` frames of `joints` joints in `dims` (2 or 3)
/// dimensions, in millimetres. Frames are indexed from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    frames: usize,
    joints: usize,
    dims: usize,
    data: Vec<f64>,
}

impl PoseSequence {
    pub fn new(frames: usize, joints: usize, dims: usize, data: Vec<f64>) -> Result<Self, SkeletonError> {
        if dims != 2 && dims != 3 {
            return Err(SkeletonError::BadDims(dims));
        }
        if frames == 0 {
            return Err(SkeletonError::NoFrames);
        }
        if joints == 0 {
            return Err(SkeletonError::Empty);
        }
        let expected = frames * joints * dims;
        if data.len() != expected {
            return Err(SkeletonError::BadLength { expected, got: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            let cell = i / dims;
            return Err(SkeletonError::NonFinite { frame: cell / joints, joint: cell % joints });
        }
        Ok(Self { frames, joints, dims, data })
    }

    pub fn zeros(frames: usize, joints: usize, dims: usize) -> Result<Self, SkeletonError> {
        Self::new(frames, joints, dims, vec![0.0; frames * joints * dims])
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &PoseSequence) -> bool {
        self.frames == other.frames && self.joints == other.joints && self.dims == other.dims
    }

    #[inline]
    pub fn get(&self, frame: usize, joint: usize) -> &[f64] {
        let i = (frame * self.joints + joint) * self.dims;
        &self.data[i..i + self.dims]
    }

    /// Callers are responsible for keeping values finite.
    #[inline]
    pub fn get_mut(&mut self, frame: usize, joint: usize) -> &mut [f64] {
        let i = (frame * self.joints + joint) * self.dims;
        &mut self.data[i..i + self.dims]
    }

    /// Checks that the joint count agrees with `tree`.
    pub fn check_tree(&self, tree: &JointTree) -> Result<(), SkeletonError> {
        if self.joints != tree.joint_count() {
            return Err(SkeletonError::BadLength { expected: tree.joint_count(), got: self.joints });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_is_valid() {
        assert_eq!(validate_tree(&[None, Some(0), Some(1)]), Ok(()));
    }

    #[test]
    fn two_cycle_detected() {
        assert!(matches!(validate_tree(&[Some(1), Some(0)]), Err(SkeletonError::CycleDetected { .. })));
    }

    #[test]
    fn cycle_beside_a_root_detected() {
        assert!(matches!(validate_tree(&[None, Some(2), Some(1)]), Err(SkeletonError::CycleDetected { .. })));
    }

    #[test]
    fn dangling_parent() {
        assert_eq!(
            validate_tree(&[None, Some(0), Some(7)]),
            Err(SkeletonError::DanglingParent { joint: 2, parent: 7, joint_count: 3 })
        );
    }

    #[test]
    fn multiple_roots() {
        assert!(matches!(validate_tree(&[None, None, Some(0)]), Err(SkeletonError::MultipleRoots { count: 2, .. })));
    }

    #[test]
    fn relation_examples() {
        let tree = JointTree::chain(3).unwrap();
        assert_eq!(relation(&tree, 2, 5, RelationKind::Spatial), Ok(JointAt { joint: 1, frame: 5 }));
        assert_eq!(relation(&tree, 2, 5, RelationKind::Temporal(1)), Ok(JointAt { joint: 2, frame: 4 }));
        assert_eq!(relation(&tree, 0, 5, RelationKind::Spatial), Err(SkeletonError::RootHasNoParent { joint: 0 }));
        assert_eq!(relation(&tree, 1, 0, RelationKind::Temporal(0)), Err(SkeletonError::ZeroDuration));
        assert_eq!(relation(&tree, 1, 0, RelationKind::Temporal(-2)), Ok(JointAt { joint: 1, frame: 2 }));
    }

    #[test]
    fn human17_order_has_parents_first() {
        let tree = JointTree::human17();
        let order = tree.topological_order();
        assert_eq!(order[0], tree.root());
        let pos: Vec<usize> = {
            let mut p = vec![0; order.len()];
            for (i, &j) in order.iter().enumerate() {
                p[j] = i;
            }
            p
        };
        for j in tree.bone_joints() {
            assert!(pos[tree.parent(j).unwrap()] < pos[j]);
        }
    }

    #[test]
    fn signed_round_trip() {
        let tree = JointTree::human17();
        assert_eq!(JointTree::from_signed(&tree.to_signed()).unwrap(), tree);
        assert!(JointTree::from_signed(&[-1, -3]).is_err());
    }

    #[test]
    fn pose_rejects_non_finite() {
        let err = PoseSequence::new(1, 2, 2, vec![0.0, 0.0, f64::NAN, 1.0]).unwrap_err();
        assert_eq!(err, SkeletonError::NonFinite { frame: 0, joint: 1 });
        assert!(PoseSequence::new(1, 1, 4, vec![0.0; 4]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_parents() -> impl Strategy<Value = Vec<Option<usize>>> {
            (1usize..10).prop_flat_map(|k| proptest::collection::vec(proptest::option::of(0usize..k + 2), k))
        }

        // A tree is valid iff ordering joints by depth (root first) is possible,
        // which is checked here by repeatedly peeling joints whose parent is placed.
        fn has_topological_order(parents: &[Option<usize>]) -> bool {
            let k = parents.len();
            if parents.iter().flatten().any(|&p| p >= k) {
                return false;
            }
            if parents.iter().filter(|p| p.is_none()).count() != 1 {
                return false;
            }
            let mut placed = vec![false; k];
            let mut changed = true;
            while changed {
                changed = false;
                for j in 0..k {
                    if !placed[j] && parents[j].is_none_or(|p| placed[p]) {
                        placed[j] = true;
                        changed = true;
                    }
                }
            }
            placed.iter().all(|&x| x)
        }

        proptest! {
            #[test]
            fn validate_matches_topological_order(parents in arb_parents()) {
                prop_assert_eq!(validate_tree(&parents).is_ok(), has_topological_order(&parents));
            }

            #[test]
            fn temporal_shift_inverts(k in 0usize..5, t in -50i64..50, d in 1i32..10, neg in any::<bool>()) {
                let tree = JointTree::chain(5).unwrap();
                let d = if neg { -d } else { d };
                let a = relation(&tree, k, t, RelationKind::Temporal(d)).unwrap();
                let b = relation(&tree, a.joint, a.frame, RelationKind::Temporal(-d)).unwrap();
                prop_assert_eq!(b, JointAt { joint: k, frame: t });
            }
        }
    }
}
