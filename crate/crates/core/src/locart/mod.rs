//! Local conformal calibration over a CART partition of state-action space.
//!
//! The tree is grown on one part of the calibration data to separate regions
//! of different model accuracy; the held-out scale set is then routed to the
//! leaves and each leaf gets its own conformal factor `ξ_k`. Leaves whose
//! local quantile lands on the `+∞` element fall back to the factor computed
//! on the whole scale set.

mod cart;

pub use cart::{fit_cart, Leaf, TreeNode};

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::conformal::{CalibrationResult, ResidualScorer, ResidualSet, STATE_DOF};
use crate::dynamics::{Environment, LinearModel, TransitionTuple};
use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::statmath::{CovMatrix, Vec2, Vec4};

pub const FEATURE_DIM: usize = 6;
/// Column order of [`FeatureVector`]. The input covariance is not a feature.
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = ["p_x", "p_y", "v_x", "v_y", "a_x", "a_y"];

/// `[p_x, p_y, v_x, v_y, a_x, a_y]`: belief mean followed by action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn new(state: &Vec4, action: &Vec2) -> Self {
        Self([state[0], state[1], state[2], state[3], action[0], action[1]])
    }

    pub fn of_tuple(t: &TransitionTuple) -> Self {
        Self::new(&t.state(), &t.action())
    }
}

/// Result of routing a feature vector to its scaling factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiQuery {
    pub xi: f64,
    pub leaf_id: usize,
    pub fallback_used: bool,
}

/// Anything that maps features to a covariance multiplier.
pub trait XiSource {
    fn query(&self, f: &FeatureVector) -> XiQuery;
}

/// The same `ξ` everywhere; `ConstantXi(1.0)` is the uncalibrated baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantXi(pub f64);

impl XiSource for ConstantXi {
    fn query(&self, _f: &FeatureVector) -> XiQuery {
        XiQuery {
            xi: self.0,
            leaf_id: 0,
            fallback_used: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocartConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Fraction of tuples used to grow the tree (rounded up).
    pub part_ratio: f64,
    pub seed: u64,
}

impl Default for LocartConfig {
    fn default() -> Self {
        Self {
            max_depth: 13,
            min_samples_split: 40,
            part_ratio: 0.8,
            seed: 0,
        }
    }
}

/// Fitted partition with one conformal factor per leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocartModel {
    pub root: TreeNode,
    pub alpha: f64,
    pub sigma0: CovMatrix<4>,
    pub config: LocartConfig,
    pub global_fallback: CalibrationResult,
}

/// Partition and scale subsets of a calibration set.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationSplit {
    pub part: Vec<usize>,
    pub scale: Vec<usize>,
}

/// Seeded random split with `⌈ratio·n⌉` tuples in the partition set.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<CalibrationSplit> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid("part_ratio must lie in (0, 1]"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut SeedTree::new(seed).stream("locart-split", 0));
    let n_part = (libm::ceil(ratio * n as f64 - 1e-9) as usize).min(n);
    let scale = idx.split_off(n_part);
    Ok(CalibrationSplit { part: idx, scale })
}

impl LocartModel {
    /// Calibrates the leaves of a partition grown elsewhere.
    pub fn from_partition(
        mut root: TreeNode,
        scale_features: &[FeatureVector],
        scale_residuals: &[f64],
        alpha: f64,
        sigma0: CovMatrix<4>,
        config: LocartConfig,
    ) -> Result<Self> {
        if scale_features.len() != scale_residuals.len() {
            return Err(Error::invalid("one residual per feature vector"));
        }
        if scale_residuals.is_empty() {
            return Err(Error::EmptyCalibrationSet);
        }
        let n_leaves = root.n_leaves();
        let mut per_leaf: Vec<Vec<f64>> = (0..n_leaves).map(|_| Vec::new()).collect();
        for (f, r) in scale_features.iter().zip(scale_residuals) {
            per_leaf[root.leaf_for(f).id].push(*r);
        }
        let mut outcome = Ok(());
        root.for_each_leaf_mut(&mut |leaf| {
            let values = core::mem::take(&mut per_leaf[leaf.id]);
            leaf.n_scale = values.len();
            if values.is_empty() {
                leaf.q_hat = f64::INFINITY;
                leaf.xi = f64::INFINITY;
                return;
            }
            match ResidualSet::new(values).and_then(|s| CalibrationResult::from_residuals(&s, alpha, STATE_DOF)) {
                Ok(cal) => {
                    leaf.q_hat = cal.q_hat;
                    leaf.xi = cal.xi;
                }
                Err(e) => outcome = Err(e),
            }
        });
        outcome?;
        let global_fallback =
            CalibrationResult::from_residuals(&ResidualSet::new(scale_residuals.to_vec())?, alpha, STATE_DOF)?;
        Ok(Self {
            root,
            alpha,
            sigma0,
            config,
            global_fallback,
        })
    }

    pub fn leaves(&self) -> Vec<&Leaf> {
        self.root.leaves()
    }

    pub fn n_leaves(&self) -> usize {
        self.root.n_leaves()
    }

    pub fn query_xi(&self, f: &FeatureVector) -> XiQuery {
        let leaf = self.root.leaf_for(f);
        if leaf.is_unbounded() {
            XiQuery {
                xi: self.global_fallback.xi,
                leaf_id: leaf.id,
                fallback_used: true,
            }
        } else {
            XiQuery {
                xi: leaf.xi,
                leaf_id: leaf.id,
                fallback_used: false,
            }
        }
    }
}

impl XiSource for LocartModel {
    fn query(&self, f: &FeatureVector) -> XiQuery {
        self.query_xi(f)
    }
}

pub fn query_xi(m: &LocartModel, f: &FeatureVector) -> XiQuery {
    m.query_xi(f)
}

/// Splits the tuples, grows the partition on residuals of the first part and
/// conformalizes each leaf on the rest.
pub fn fit_locart(
    model: &LinearModel,
    tuples: &[TransitionTuple],
    sigma0: &CovMatrix<4>,
    alpha: f64,
    config: &LocartConfig,
) -> Result<LocartModel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidProbability(alpha));
    }
    if tuples.is_empty() {
        return Err(Error::EmptyCalibrationSet);
    }
    let split = split_indices(tuples.len(), config.part_ratio, config.seed)?;
    let residuals = ResidualScorer::new(model, sigma0)?.score_all(tuples);
    let features: Vec<FeatureVector> = tuples.iter().map(FeatureVector::of_tuple).collect();
    let gather = |ids: &[usize]| -> (Vec<FeatureVector>, Vec<f64>) {
        ids.iter().map(|&i| (features[i], residuals[i])).unzip()
    };
    let (part_f, part_r) = gather(&split.part);
    let (scale_f, scale_r) = gather(&split.scale);
    let root = fit_cart(&part_f, &part_r, config.max_depth, config.min_samples_split);
    LocartModel::from_partition(root, &scale_f, &scale_r, alpha, *sigma0, *config)
}

/// Non-position features held fixed while sweeping a heatmap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedFeatures {
    pub v_x: f64,
    pub v_y: f64,
    pub a_x: f64,
    pub a_y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub p_x: f64,
    pub p_y: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub xi: f64,
    pub leaf_id: usize,
    pub fallback: bool,
}

/// `ξ` on a `resolution × resolution` grid of cell centers over the workspace.
/// Rows are ordered by `p_y`, then `p_x`.
pub fn heatmap_grid<S: XiSource + ?Sized>(
    m: &S,
    env: &Environment,
    fixed: &FixedFeatures,
    resolution: usize,
) -> Result<Vec<HeatmapCell>> {
    if resolution < 2 {
        return Err(Error::invalid("heatmap resolution must be at least 2"));
    }
    let b = &env.bounds;
    let step_x = (b.x_max - b.x_min) / resolution as f64;
    let step_y = (b.y_max - b.y_min) / resolution as f64;
    let mut cells = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        let p_y = b.y_min + (j as f64 + 0.5) * step_y;
        for i in 0..resolution {
            let p_x = b.x_min + (i as f64 + 0.5) * step_x;
            let f = FeatureVector([p_x, p_y, fixed.v_x, fixed.v_y, fixed.a_x, fixed.a_y]);
            let q = m.query(&f);
            cells.push(HeatmapCell {
                p_x,
                p_y,
                xi: q.xi,
                leaf_id: q.leaf_id,
                fallback: q.fallback_used,
            });
        }
    }
    Ok(cells)
}
