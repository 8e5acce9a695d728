//! Greedy CART regression tree on scalar targets.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FeatureVector, FEATURE_DIM};

/// Binary regression tree. `feature < threshold` routes left, everything else
/// (ties included) routes right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf(Leaf),
}

/// Terminal region of the partition with its conformal factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub id: usize,
    /// Training samples (partition set) that reached the leaf.
    pub n_part: usize,
    /// Mean training residual.
    pub value: f64,
    /// Calibration samples (scale set) that reached the leaf.
    pub n_scale: usize,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub q_hat: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub xi: f64,
}

impl Leaf {
    pub fn is_unbounded(&self) -> bool {
        !self.xi.is_finite()
    }
}

impl TreeNode {
    pub fn leaf_for(&self, f: &FeatureVector) -> &Leaf {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf(leaf) => return leaf,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if f.0[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf(leaf) => out.push(leaf),
                TreeNode::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    pub(crate) fn for_each_leaf_mut(&mut self, f: &mut impl FnMut(&mut Leaf)) {
        match self {
            TreeNode::Leaf(leaf) => f(leaf),
            TreeNode::Split { left, right, .. } => {
                left.for_each_leaf_mut(f);
                right.for_each_leaf_mut(f);
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Same splits, leaf statistics ignored.
    pub fn same_structure(&self, other: &TreeNode) -> bool {
        match (self, other) {
            (TreeNode::Leaf(a), TreeNode::Leaf(b)) => a.id == b.id && a.n_part == b.n_part,
            (
                TreeNode::Split {
                    feature: fa,
                    threshold: ta,
                    left: la,
                    right: ra,
                },
                TreeNode::Split {
                    feature: fb,
                    threshold: tb,
                    left: lb,
                    right: rb,
                },
            ) => fa == fb && ta == tb && la.same_structure(lb) && ra.same_structure(rb),
            _ => false,
        }
    }
}

struct Fit<'a> {
    features: &'a [FeatureVector],
    targets: &'a [f64],
    max_depth: usize,
    min_samples_split: usize,
    next_id: usize,
    scratch: Vec<(f64, f64)>,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    child_sse: f64,
}

fn sse(sum: f64, sumsq: f64, n: usize) -> f64 {
    (sumsq - sum * sum / n as f64).max(0.0)
}

impl Fit<'_> {
    fn leaf(&mut self, idx: &[usize], mean: f64) -> TreeNode {
        let id = self.next_id;
        self.next_id += 1;
        TreeNode::Leaf(Leaf {
            id,
            n_part: idx.len(),
            value: mean,
            n_scale: 0,
            q_hat: f64::INFINITY,
            xi: f64::INFINITY,
        })
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<Candidate> {
        let n = idx.len();
        let mut best: Option<Candidate> = None;
        for feature in 0..FEATURE_DIM {
            self.scratch.clear();
            self.scratch
                .extend(idx.iter().map(|&i| (self.features[i].0[feature], self.targets[i])));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let total_sum: f64 = self.scratch.iter().map(|p| p.1).sum();
            let total_sq: f64 = self.scratch.iter().map(|p| p.1 * p.1).sum();
            let (mut ls, mut lsq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let (x, y) = self.scratch[k];
                ls += y;
                lsq += y * y;
                let next = self.scratch[k + 1].0;
                if next <= x {
                    continue;
                }
                let nl = k + 1;
                let child = sse(ls, lsq, nl) + sse(total_sum - ls, total_sq - lsq, n - nl);
                if best.is_none_or(|b| child < b.child_sse) {
                    best = Some(Candidate {
                        feature,
                        threshold: 0.5 * (x + next),
                        child_sse: child,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> TreeNode {
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.targets[i]).sum();
        let sumsq: f64 = idx.iter().map(|&i| self.targets[i] * self.targets[i]).sum();
        let mean = if n > 0 { sum / n as f64 } else { 0.0 };
        let parent = if n > 0 { sse(sum, sumsq, n) } else { 0.0 };
        let degenerate = parent <= 1e-12 * sumsq.max(f64::MIN_POSITIVE);
        if depth >= self.max_depth || n < self.min_samples_split.max(2) || degenerate {
            return self.leaf(idx, mean);
        }
        let Some(best) = self.best_split(idx) else {
            return self.leaf(idx, mean);
        };
        if parent - best.child_sse <= 1e-12 * parent {
            return self.leaf(idx, mean);
        }
        let mut split = 0;
        for k in 0..n {
            if self.features[idx[k]].0[best.feature] < best.threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = Box::new(self.build(l, depth + 1));
        let right = Box::new(self.build(r, depth + 1));
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        }
    }
}

/// Fits a regression tree by exhaustive variance-reduction splits.
///
/// Candidates are midpoints between consecutive distinct feature values. A
/// node becomes a leaf at `max_depth`, below `min_samples_split` samples, or
/// when no split lowers the squared error. Leaf ids are dense, left-first.
pub fn fit_cart(
    features: &[FeatureVector],
    residuals: &[f64],
    max_depth: usize,
    min_samples_split: usize,
) -> TreeNode {
    assert_eq!(features.len(), residuals.len(), "one residual per feature vector");
    let mut idx: Vec<usize> = (0..features.len()).collect();
    let mut fit = Fit {
        features,
        targets: residuals,
        max_depth,
        min_samples_split,
        next_id: 0,
        scratch: Vec::with_capacity(features.len()),
    };
    fit.build(&mut idx, 0)
}
