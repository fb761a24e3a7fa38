//! Regression trees and the two randomized ensembles built on them: random
//! forests (searched thresholds) and extremely randomized trees (random
//! thresholds). Trees are grown greedily on the variance criterion with a
//! single-pass sum/sum-of-squares accumulator.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Scan midpoints between consecutive distinct values (random forest).
    BestSplit,
    /// Draw one uniform threshold per considered feature (extra trees).
    RandomThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// Depth cap; `None` grows until the leaf rules stop it.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` means ⌈p/3⌉.
    pub n_features_considered: Option<usize>,
    pub mode: SplitMode,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            n_features_considered: None,
            mode: SplitMode::BestSplit,
        }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split must be at least 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if self.max_depth == Some(0) {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        Ok(())
    }

    fn features_per_split(&self, p: usize) -> usize {
        self.n_features_considered
            .unwrap_or_else(|| p.div_ceil(3))
            .clamp(1, p)
    }
}

/// Flattened tree node. `feature < 0` marks a leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode<F> {
    pub feature: i32,
    pub threshold: F,
    pub left: u32,
    pub right: u32,
    pub value: F,
    pub n_samples: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree<F> {
    pub nodes: Vec<TreeNode<F>>,
    pub n_features: usize,
}

impl<F: Scalar> Tree<F> {
    pub fn predict_row(&self, row: &[F]) -> Result<F> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.feature < 0 {
                return Ok(node.value);
            }
            idx = if row[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature < 0).count()
    }

    pub fn depth(&self) -> usize {
        fn rec<F>(nodes: &[TreeNode<F>], idx: usize) -> usize {
            let node = &nodes[idx];
            if node.feature < 0 {
                0
            } else {
                1 + rec(nodes, node.left as usize).max(rec(nodes, node.right as usize))
            }
        }
        rec(&self.nodes, 0)
    }

    pub fn min_leaf_samples(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.feature < 0)
            .map(|n| n.n_samples as usize)
            .min()
            .unwrap_or(0)
    }
}

struct TreeBuilder<'a, F> {
    x: &'a Array2<F>,
    y: &'a Array1<F>,
    params: TreeParams,
    nodes: Vec<TreeNode<F>>,
}

struct SplitChoice<F> {
    feature: usize,
    threshold: F,
    score: F,
}

impl<'a, F: Scalar> TreeBuilder<'a, F> {
    fn grow(&mut self, rows: &mut [u32], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let n = rows.len();
        let (sum, sum_sq) = rows.iter().fold((F::zero(), F::zero()), |(s, q), &r| {
            let v = self.y[r as usize];
            (s + v, q + v * v)
        });
        let n_f = F::from_usize(n).unwrap();
        let mean = sum / n_f;
        let sse = (sum_sq - sum * sum / n_f).max(F::zero());

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let splittable = depth_ok
            && n >= self.params.min_samples_split
            && n >= 2 * self.params.min_samples_leaf
            && sse > F::epsilon() * sum_sq.abs().max(F::one());

        let choice = if splittable {
            self.pick_split(rows, rng)
        } else {
            None
        };

        let node_idx = self.nodes.len() as u32;
        self.nodes.push(TreeNode {
            feature: -1,
            threshold: F::zero(),
            left: 0,
            right: 0,
            value: mean,
            n_samples: n as u32,
        });

        if let Some(split) = choice {
            let mid = partition_rows(self.x, rows, split.feature, split.threshold);
            // A degenerate partition can only come from float pathologies;
            // fall back to a leaf rather than recurse on an empty side.
            if mid == 0 || mid == n {
                return node_idx;
            }
            let (left_rows, right_rows) = rows.split_at_mut(mid);
            let left = self.grow(left_rows, depth + 1, rng);
            let right = self.grow(right_rows, depth + 1, rng);
            let node = &mut self.nodes[node_idx as usize];
            node.feature = split.feature as i32;
            node.threshold = split.threshold;
            node.left = left;
            node.right = right;
        }
        node_idx
    }

    /// Feature subset for this split, in ascending order so score ties fall
    /// to the lowest feature index.
    fn sample_features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let p = self.x.ncols();
        let m = self.params.features_per_split(p);
        if m >= p {
            return (0..p).collect();
        }
        // Partial Fisher-Yates over an index pool.
        let mut pool: Vec<usize> = (0..p).collect();
        for i in 0..m {
            let j = rng.random_range(i..p);
            pool.swap(i, j);
        }
        let mut picked = pool[..m].to_vec();
        picked.sort_unstable();
        picked
    }

    fn pick_split(&self, rows: &[u32], rng: &mut ChaCha8Rng) -> Option<SplitChoice<F>> {
        let features = self.sample_features(rng);
        let mut best: Option<SplitChoice<F>> = None;
        for feature in features {
            let candidate = match self.params.mode {
                SplitMode::BestSplit => self.best_split_on(rows, feature),
                SplitMode::RandomThreshold => self.random_split_on(rows, feature, rng),
            };
            if let Some(c) = candidate {
                let better = match &best {
                    None => true,
                    // Strict improvement only: first-seen wins ties, which is
                    // the lowest feature index / lowest threshold.
                    Some(b) => c.score < b.score,
                };
                if better {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_split_on(&self, rows: &[u32], feature: usize) -> Option<SplitChoice<F>> {
        let n = rows.len();
        let mut order: Vec<u32> = rows.to_vec();
        order.sort_by(|&a, &b| {
            self.x[(a as usize, feature)]
                .partial_cmp(&self.x[(b as usize, feature)])
                .unwrap()
        });
        let min_leaf = self.params.min_samples_leaf;
        let total: F = order.iter().map(|&r| self.y[r as usize]).sum();
        let total_sq: F = order
            .iter()
            .map(|&r| {
                let v = self.y[r as usize];
                v * v
            })
            .sum();

        let mut best: Option<SplitChoice<F>> = None;
        let mut left_sum = F::zero();
        let mut left_sq = F::zero();
        for i in 0..n - 1 {
            let v = self.y[order[i] as usize];
            left_sum = left_sum + v;
            left_sq = left_sq + v * v;
            let here = self.x[(order[i] as usize, feature)];
            let next = self.x[(order[i + 1] as usize, feature)];
            if here == next {
                continue;
            }
            let left_n = i + 1;
            let right_n = n - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let ln = F::from_usize(left_n).unwrap();
            let rn = F::from_usize(right_n).unwrap();
            let right_sum = total - left_sum;
            let right_sq = total_sq - left_sq;
            let score = (left_sq - left_sum * left_sum / ln).max(F::zero())
                + (right_sq - right_sum * right_sum / rn).max(F::zero());
            let threshold = (here + next) / F::c(2.0);
            let better = match &best {
                None => true,
                Some(b) => score < b.score,
            };
            if better {
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        best
    }

    fn random_split_on(
        &self,
        rows: &[u32],
        feature: usize,
        rng: &mut ChaCha8Rng,
    ) -> Option<SplitChoice<F>> {
        let (mut lo, mut hi) = (F::infinity(), F::neg_infinity());
        for &r in rows {
            let v = self.x[(r as usize, feature)];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo >= hi || !hi.is_finite() || !lo.is_finite() {
            return None;
        }
        let u = F::c(rng.random::<f64>());
        let threshold = lo + u * (hi - lo);
        // threshold == hi would send everything left; nudge inside.
        let threshold = if threshold >= hi { lo } else { threshold };

        let min_leaf = self.params.min_samples_leaf;
        let mut left_n = 0usize;
        let mut left_sum = F::zero();
        let mut left_sq = F::zero();
        let mut total = F::zero();
        let mut total_sq = F::zero();
        for &r in rows {
            let v = self.y[r as usize];
            total = total + v;
            total_sq = total_sq + v * v;
            if self.x[(r as usize, feature)] <= threshold {
                left_n += 1;
                left_sum = left_sum + v;
                left_sq = left_sq + v * v;
            }
        }
        let right_n = rows.len() - left_n;
        if left_n < min_leaf || right_n < min_leaf {
            return None;
        }
        let ln = F::from_usize(left_n).unwrap();
        let rn = F::from_usize(right_n).unwrap();
        let right_sum = total - left_sum;
        let right_sq = total_sq - left_sq;
        let score = (left_sq - left_sum * left_sum / ln).max(F::zero())
            + (right_sq - right_sum * right_sum / rn).max(F::zero());
        Some(SplitChoice {
            feature,
            threshold,
            score,
        })
    }
}

/// Stable in-place partition; returns the size of the `<= threshold` side.
fn partition_rows<F: Scalar>(x: &Array2<F>, rows: &mut [u32], feature: usize, threshold: F) -> usize {
    let mut left: Vec<u32> = Vec::with_capacity(rows.len());
    let mut right: Vec<u32> = Vec::with_capacity(rows.len());
    for &r in rows.iter() {
        if x[(r as usize, feature)] <= threshold {
            left.push(r);
        } else {
            right.push(r);
        }
    }
    let mid = left.len();
    rows[..mid].copy_from_slice(&left);
    rows[mid..].copy_from_slice(&right);
    mid
}

/// Grows a single tree on the given rows with the provided generator.
pub fn fit_tree<F: Scalar>(
    x: &Array2<F>,
    y: &Array1<F>,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<Tree<F>> {
    params.validate()?;
    if x.nrows() == 0 {
        return Err(Error::invalid("cannot fit a tree on zero rows"));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let mut rows: Vec<u32> = (0..x.nrows() as u32).collect();
    let mut builder = TreeBuilder {
        x,
        y,
        params: *params,
        nodes: Vec::new(),
    };
    builder.grow(&mut rows, 0, rng);
    Ok(Tree {
        nodes: builder.nodes,
        n_features: x.ncols(),
    })
}

/// Averaged ensemble of trees; prediction is the unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest<F> {
    pub trees: Vec<Tree<F>>,
    pub params: TreeParams,
    pub bootstrap: bool,
    pub seed: u64,
}

/// Fits `n_estimators` trees, each on its own bootstrap sample (when
/// enabled) and its own stream of the shared seeded generator, so parallel
/// and serial fits produce identical forests.
pub fn fit_ensemble<F: Scalar>(
    x: &Array2<F>,
    y: &Array1<F>,
    params: &TreeParams,
    n_estimators: usize,
    bootstrap: bool,
    seed: u64,
) -> Result<Forest<F>> {
    params.validate()?;
    if n_estimators == 0 {
        return Err(Error::invalid("n_estimators must be at least 1"));
    }
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::invalid("ensemble needs matching non-empty X and y"));
    }
    let trees: Result<Vec<Tree<F>>> = (0..n_estimators)
        .into_par_iter()
        .map(|tree_idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(tree_idx as u64);
            if bootstrap {
                let n = x.nrows();
                let mut bx = Array2::zeros((n, x.ncols()));
                let mut by = Array1::zeros(n);
                for out in 0..n {
                    let pick = rng.random_range(0..n);
                    bx.row_mut(out).assign(&x.row(pick));
                    by[out] = y[pick];
                }
                fit_tree(&bx, &by, params, &mut rng)
            } else {
                fit_tree(x, y, params, &mut rng)
            }
        })
        .collect();
    Ok(Forest {
        trees: trees?,
        params: *params,
        bootstrap,
        seed,
    })
}

impl<F: Scalar> Forest<F> {
    pub fn n_features(&self) -> usize {
        self.trees[0].n_features
    }

    pub fn predict_row(&self, row: &[F]) -> Result<F> {
        let mut acc = F::zero();
        for tree in &self.trees {
            acc = acc + tree.predict_row(row)?;
        }
        Ok(acc / F::from_usize(self.trees.len()).unwrap())
    }

    pub fn predict(&self, x: &Array2<F>) -> Result<Array1<F>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        let rows: Vec<Vec<F>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let out: Result<Vec<F>> = rows.par_iter().map(|r| self.predict_row(r)).collect();
        Ok(Array1::from_vec(out?))
    }

    /// Reported model size: 4 slots per node plus one per leaf.
    pub fn param_count(&self) -> usize {
        self.trees
            .iter()
            .map(|t| t.node_count() * 4 + t.leaf_count())
            .sum()
    }
}
