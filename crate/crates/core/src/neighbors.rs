//! k-nearest-neighbor regression over standardized features.
//!
//! Search is exact. A k-d tree accelerates queries where the geometry
//! allows pruning; a brute-force scan is kept as the reference path and the
//! two must agree point-for-point, ties included. Ties at the k-th neighbor
//! are broken by (distance, feature-lexicographic order, label), never by
//! training-row order.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    Distance,
}

/// Lazy learner: stores the training data verbatim plus a k-d index.
#[derive(Debug, Clone)]
pub struct KnnModel<F> {
    x: Array2<F>,
    y: Array1<F>,
    pub k: usize,
    pub weighting: Weighting,
    tree: KdTree<F>,
}

pub fn fit_knn<F: Scalar>(
    x: Array2<F>,
    y: Array1<F>,
    k: usize,
    weighting: Weighting,
) -> Result<KnnModel<F>> {
    if x.nrows() == 0 {
        return Err(Error::invalid("k-NN needs at least one training row"));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if k == 0 || k > x.nrows() {
        return Err(Error::invalid(format!(
            "k must lie in 1..={} (got {k})",
            x.nrows()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("k-NN training data must be finite"));
    }
    let tree = KdTree::build(&x);
    Ok(KnnModel {
        x,
        y,
        k,
        weighting,
        tree,
    })
}

impl<F: Scalar> KnnModel<F> {
    pub fn n_stored(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn stored_x(&self) -> &Array2<F> {
        &self.x
    }

    pub fn stored_y(&self) -> &Array1<F> {
        &self.y
    }

    /// Stored-parameter count n·(p+1).
    pub fn param_count(&self) -> usize {
        self.n_stored() * (self.n_features() + 1)
    }

    fn check_width(&self, got: usize) -> Result<()> {
        if got != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got,
            });
        }
        Ok(())
    }

    /// Exact prediction through the k-d index.
    pub fn predict_row(&self, query: &[F]) -> Result<F> {
        self.check_width(query.len())?;
        if query.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("query must be finite"));
        }
        let selected = self.tree.k_nearest(&self.x, &self.y, query, self.k);
        Ok(self.combine(&selected, query))
    }

    /// Exact prediction by exhaustive scan; reference path for the index.
    pub fn predict_row_brute(&self, query: &[F]) -> Result<F> {
        self.check_width(query.len())?;
        let mut heap = NeighborHeap::new(self.k);
        for r in 0..self.x.nrows() {
            let d2 = dist2_row(&self.x, r, query);
            heap.offer(d2, r as u32, &self.x, &self.y);
        }
        let selected = heap.into_sorted(&self.x, &self.y);
        Ok(self.combine(&selected, query))
    }

    pub fn predict(&self, queries: &Array2<F>) -> Result<Array1<F>> {
        self.check_width(queries.ncols())?;
        let rows: Vec<Vec<F>> = queries.rows().into_iter().map(|r| r.to_vec()).collect();
        let out: Result<Vec<F>> = rows
            .par_iter()
            .map(|row| self.predict_row(row))
            .collect();
        Ok(Array1::from_vec(out?))
    }

    fn combine(&self, selected: &[(F, u32)], _query: &[F]) -> F {
        match self.weighting {
            Weighting::Uniform => {
                let sum: F = selected.iter().map(|&(_, i)| self.y[i as usize]).sum();
                sum / F::from_usize(selected.len()).unwrap()
            }
            Weighting::Distance => {
                // Zero-distance neighbors dominate in the limit 1/d → ∞:
                // average exactly those when present.
                let zeros: Vec<u32> = selected
                    .iter()
                    .filter(|&&(d2, _)| d2 == F::zero())
                    .map(|&(_, i)| i)
                    .collect();
                if !zeros.is_empty() {
                    let sum: F = zeros.iter().map(|&i| self.y[i as usize]).sum();
                    return sum / F::from_usize(zeros.len()).unwrap();
                }
                let mut num = F::zero();
                let mut den = F::zero();
                for &(d2, i) in selected {
                    let w = F::one() / d2.sqrt();
                    num = num + w * self.y[i as usize];
                    den = den + w;
                }
                num / den
            }
        }
    }
}

fn dist2_row<F: Scalar>(x: &Array2<F>, row: usize, query: &[F]) -> F {
    let mut acc = F::zero();
    for (c, &q) in query.iter().enumerate() {
        let d = x[(row, c)] - q;
        acc = acc + d * d;
    }
    acc
}

/// Total neighbor ordering: distance, then feature-lexicographic row
/// comparison, then label. Assumes finite data (enforced at fit).
fn neighbor_less<F: Scalar>(
    x: &Array2<F>,
    y: &Array1<F>,
    a: (F, u32),
    b: (F, u32),
) -> bool {
    if a.0 != b.0 {
        return a.0 < b.0;
    }
    let (ra, rb) = (a.1 as usize, b.1 as usize);
    for c in 0..x.ncols() {
        let (va, vb) = (x[(ra, c)], x[(rb, c)]);
        if va != vb {
            return va < vb;
        }
    }
    y[ra] < y[rb]
}

/// Fixed-capacity buffer of the current k best candidates. Unsorted; the
/// worst entry is tracked and replaced on improvement.
struct NeighborHeap<F> {
    entries: Vec<(F, u32)>,
    k: usize,
    worst: usize,
}

impl<F: Scalar> NeighborHeap<F> {
    fn new(k: usize) -> Self {
        NeighborHeap {
            entries: Vec::with_capacity(k),
            k,
            worst: 0,
        }
    }

    fn full(&self) -> bool {
        self.entries.len() == self.k
    }

    /// Squared distance of the current worst candidate (∞ until full).
    fn worst_dist2(&self) -> F {
        if self.full() {
            self.entries[self.worst].0
        } else {
            F::infinity()
        }
    }

    fn offer(&mut self, d2: F, idx: u32, x: &Array2<F>, y: &Array1<F>) {
        if !self.full() {
            self.entries.push((d2, idx));
            if self.full() {
                self.refresh_worst(x, y);
            }
            return;
        }
        if neighbor_less(x, y, (d2, idx), self.entries[self.worst]) {
            self.entries[self.worst] = (d2, idx);
            self.refresh_worst(x, y);
        }
    }

    fn refresh_worst(&mut self, x: &Array2<F>, y: &Array1<F>) {
        let mut w = 0;
        for i in 1..self.entries.len() {
            if neighbor_less(x, y, self.entries[w], self.entries[i]) {
                w = i;
            }
        }
        self.worst = w;
    }

    fn into_sorted(self, x: &Array2<F>, y: &Array1<F>) -> Vec<(F, u32)> {
        let mut entries = self.entries;
        entries.sort_by(|&a, &b| {
            if neighbor_less(x, y, a, b) {
                std::cmp::Ordering::Less
            } else if neighbor_less(x, y, b, a) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        entries
    }
}

const LEAF_SIZE: usize = 32;

#[derive(Debug, Clone)]
enum KdNode<F> {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: F,
        left: usize,
        right: usize,
    },
}

/// Exact k-d tree over row indices; splits on the widest dimension at the
/// median.
#[derive(Debug, Clone)]
struct KdTree<F> {
    nodes: Vec<KdNode<F>>,
    order: Vec<u32>,
    root: usize,
}

impl<F: Scalar> KdTree<F> {
    fn build(x: &Array2<F>) -> Self {
        let mut order: Vec<u32> = (0..x.nrows() as u32).collect();
        let mut nodes = Vec::new();
        let root = Self::build_rec(x, &mut order, 0, x.nrows(), &mut nodes);
        KdTree { nodes, order, root }
    }

    fn build_rec(
        x: &Array2<F>,
        order: &mut [u32],
        start: usize,
        end: usize,
        nodes: &mut Vec<KdNode<F>>,
    ) -> usize {
        let len = end - start;
        if len <= LEAF_SIZE {
            nodes.push(KdNode::Leaf { start, end });
            return nodes.len() - 1;
        }
        // Widest dimension over this slice.
        let mut best_dim = 0;
        let mut best_spread = F::neg_infinity();
        for dim in 0..x.ncols() {
            let mut lo = F::infinity();
            let mut hi = F::neg_infinity();
            for &i in &order[start..end] {
                let v = x[(i as usize, dim)];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = dim;
            }
        }
        if best_spread <= F::zero() {
            // All points identical along every axis: keep as one leaf.
            nodes.push(KdNode::Leaf { start, end });
            return nodes.len() - 1;
        }
        let mid = start + len / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            x[(a as usize, best_dim)]
                .partial_cmp(&x[(b as usize, best_dim)])
                .unwrap()
        });
        let split_value = x[(order[mid] as usize, best_dim)];
        let node_idx = nodes.len();
        nodes.push(KdNode::Leaf { start, end }); // placeholder
        let left = Self::build_rec(x, order, start, mid, nodes);
        let right = Self::build_rec(x, order, mid, end, nodes);
        nodes[node_idx] = KdNode::Split {
            dim: best_dim,
            value: split_value,
            left,
            right,
        };
        node_idx
    }

    fn k_nearest(&self, x: &Array2<F>, y: &Array1<F>, query: &[F], k: usize) -> Vec<(F, u32)> {
        let mut heap = NeighborHeap::new(k);
        self.search(self.root, x, y, query, &mut heap);
        heap.into_sorted(x, y)
    }

    fn search(
        &self,
        node: usize,
        x: &Array2<F>,
        y: &Array1<F>,
        query: &[F],
        heap: &mut NeighborHeap<F>,
    ) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2_row(x, i as usize, query);
                    heap.offer(d2, i, x, y);
                }
            }
            KdNode::Split {
                dim,
                value,
                left,
                right,
            } => {
                let delta = query[dim] - value;
                let (near, far) = if delta < F::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, x, y, query, heap);
                // Equal plane distance can still hold tie-winning points, so
                // only a strictly larger bound prunes.
                if delta * delta <= heap.worst_dist2() {
                    self.search(far, x, y, query, heap);
                }
            }
        }
    }
}
