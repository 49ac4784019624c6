//! Classification-tree engine used by the random forest.
//!
//! Trees grow on bootstrap weights to purity (or until no split reduces the
//! weighted Gini impurity), choosing the best midpoint threshold among
//! `mtry` features sampled per node. Row orderings per feature are sorted
//! once per fit and stably partitioned at each split, so no sorting happens
//! inside the growth loop.
//!
//! Ties between candidate splits resolve lexicographically by
//! (impurity, feature index, threshold), making the grown tree independent
//! of the order in which candidates are scanned.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::DesignMatrix;
use crate::num::Scalar;

const LEAF: u32 = u32::MAX;
const MIN_GINI_GAIN: f64 = 1e-12;

/// Row indices per feature, sorted by `(value, row)`. Built once per fit.
#[derive(Debug)]
pub struct SortedColumns {
    cols: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn build<F: Scalar>(x: &DesignMatrix<F>) -> Self {
        let cols = (0..x.p)
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.n as u32).collect();
                idx.sort_unstable_by(|&a, &b| {
                    let va = x.data[a as usize * x.p + f];
                    let vb = x.data[b as usize * x.p + f];
                    va.partial_cmp(&vb).expect("finite features").then(a.cmp(&b))
                });
                idx
            })
            .collect();
        SortedColumns { cols }
    }
}

#[derive(Debug, Clone)]
struct Node<F> {
    /// `LEAF` marks a leaf.
    feature: u32,
    threshold: F,
    /// Left child index; the right child is `children + 1`.
    children: u32,
    vote: u8,
}

/// One grown classification tree.
#[derive(Debug, Clone)]
pub struct CartTree<F: Scalar> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> CartTree<F> {
    /// Majority vote of the leaf the row lands in.
    pub fn predict_row(&self, row: &[F]) -> u8 {
        let mut id = 0usize;
        loop {
            let node = &self.nodes[id];
            if node.feature == LEAF {
                return node.vote;
            }
            id = node.children as usize
                + usize::from(row[node.feature as usize] > node.threshold);
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

struct Pending {
    node: u32,
    start: u32,
    end: u32,
    weight: u32,
    pos: u32,
}

/// Reusable growth buffers.
pub(super) struct CartScratch {
    ordered: Vec<Vec<u32>>,
    temp: Vec<u32>,
    mark: Vec<u32>,
    generation: u32,
    feats: Vec<u32>,
    stack: Vec<Pending>,
    /// Bootstrap weight and label packed as `(weight << 1) | label`.
    packed: Vec<u32>,
    /// `recip[w] = 1.0 / w`, avoiding divisions in the split sweep.
    recip: Vec<f64>,
}

impl CartScratch {
    pub(super) fn new(n: usize, p: usize) -> Self {
        CartScratch {
            ordered: vec![Vec::with_capacity(n); p],
            temp: Vec::with_capacity(n),
            mark: vec![0; n],
            generation: 0,
            feats: (0..p as u32).collect(),
            stack: Vec::new(),
            packed: vec![0; n],
            recip: (0..=n).map(|w| 1.0 / w as f64).collect(),
        }
    }
}

#[inline]
fn gini_sum(weight: u32, pos: u32, recip: &[f64]) -> f64 {
    let w = f64::from(weight);
    let pos = f64::from(pos);
    let neg = w - pos;
    w - (pos * pos + neg * neg) * recip[weight as usize]
}

/// Grows one tree on the rows with nonzero bootstrap weight.
pub(super) fn grow_tree<F: Scalar>(
    x: &DesignMatrix<F>,
    y: &[u8],
    weights: &[u32],
    sorted: &SortedColumns,
    mtry: usize,
    rng: &mut ChaCha8Rng,
    scratch: &mut CartScratch,
) -> CartTree<F> {
    let p = x.p;
    let value = |row: u32, f: u32| x.data[row as usize * p + f as usize];
    let CartScratch {
        ordered,
        temp,
        mark,
        generation,
        feats,
        stack,
        packed,
        recip,
    } = scratch;

    let mut m = 0;
    for f in 0..p {
        let dst = &mut ordered[f];
        dst.clear();
        dst.resize(sorted.cols[f].len(), 0);
        let mut len = 0usize;
        for &r in &sorted.cols[f] {
            dst[len] = r;
            len += usize::from(weights[r as usize] > 0);
        }
        dst.truncate(len);
        m = len;
    }
    let (mut w_root, mut pos_root) = (0u32, 0u32);
    for (slot, (&w, &label)) in packed.iter_mut().zip(weights.iter().zip(y)) {
        *slot = (w << 1) | u32::from(label);
        w_root += w;
        pos_root += w * u32::from(label);
    }
    let packed: &[u32] = packed;
    let recip: &[f64] = recip;

    let mut nodes: Vec<Node<F>> = Vec::with_capacity(2 * m + 1);
    nodes.push(Node {
        feature: LEAF,
        threshold: F::zero(),
        children: 0,
        vote: 0,
    });
    stack.clear();
    stack.push(Pending {
        node: 0,
        start: 0,
        end: m as u32,
        weight: w_root,
        pos: pos_root,
    });

    while let Some(task) = stack.pop() {
        let (start, end) = (task.start as usize, task.end as usize);
        if task.pos == 0 || task.pos == task.weight || end - start < 2 {
            nodes[task.node as usize] = Node {
                feature: LEAF,
                threshold: F::zero(),
                children: 0,
                vote: u8::from(2 * task.pos > task.weight),
            };
            continue;
        }

        // sample mtry candidate features without replacement; the pool is
        // re-identified so the draw is a pure function of the rng state
        let m_try = mtry.min(p);
        for (i, f) in feats.iter_mut().enumerate() {
            *f = i as u32;
        }
        for i in 0..m_try {
            let j = rng.random_range(i..p);
            feats.swap(i, j);
        }

        let parent_score = gini_sum(task.weight, task.pos, recip);
        let mut best_score = parent_score - MIN_GINI_GAIN;
        let mut best: Option<(u32, F, u32, u32, u32)> = None; // feature, thr, left rows, wl, posl
        for &f in &feats[..m_try] {
            let seg = &ordered[f as usize][start..end];
            let (mut wl, mut posl) = (0u32, 0u32);
            let mut prev = value(seg[0], f);
            for i in 0..seg.len() - 1 {
                let pair = packed[seg[i] as usize];
                let w = pair >> 1;
                wl += w;
                posl += w * (pair & 1);
                let next = value(seg[i + 1], f);
                if prev < next {
                    let score = gini_sum(wl, posl, recip)
                        + gini_sum(task.weight - wl, task.pos - posl, recip);
                    if score < best_score {
                        best_score = score;
                        best = Some((f, (prev + next) * F::of(0.5), (i + 1) as u32, wl, posl));
                    } else if score == best_score {
                        if let Some((bf, bt, ..)) = &best {
                            let threshold = (prev + next) * F::of(0.5);
                            if f < *bf || (f == *bf && threshold < *bt) {
                                best = Some((f, threshold, (i + 1) as u32, wl, posl));
                            }
                        }
                    }
                }
                prev = next;
            }
        }

        let Some((feature, threshold, left_rows, wl, posl)) = best else {
            nodes[task.node as usize] = Node {
                feature: LEAF,
                threshold: F::zero(),
                children: 0,
                vote: u8::from(2 * task.pos > task.weight),
            };
            continue;
        };

        // mark the left block of the winning feature's ordering
        *generation += 1;
        let generation = *generation;
        for &r in &ordered[feature as usize][start..start + left_rows as usize] {
            mark[r as usize] = generation;
        }
        // stable partition of every feature's segment; speculative dual
        // writes avoid a data-dependent branch
        let left_len = left_rows as usize;
        temp.resize(end - start, 0);
        for seg in ordered.iter_mut() {
            let mut write = start;
            let mut spill = 0usize;
            for i in start..end {
                let r = seg[i];
                let is_left = usize::from(mark[r as usize] == generation);
                seg[write] = r;
                temp[spill] = r;
                write += is_left;
                spill += 1 - is_left;
            }
            debug_assert_eq!(write, start + left_len);
            seg[start + left_len..end].copy_from_slice(&temp[..spill]);
        }

        let left_id = nodes.len() as u32;
        nodes[task.node as usize] = Node {
            feature,
            threshold,
            children: left_id,
            vote: 0,
        };
        for _ in 0..2 {
            nodes.push(Node {
                feature: LEAF,
                threshold: F::zero(),
                children: 0,
                vote: 0,
            });
        }
        let mid = start as u32 + left_rows;
        stack.push(Pending {
            node: left_id + 1,
            start: mid,
            end: end as u32,
            weight: task.weight - wl,
            pos: task.pos - posl,
        });
        stack.push(Pending {
            node: left_id,
            start: start as u32,
            end: mid,
            weight: wl,
            pos: posl,
        });
    }

    CartTree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn matrix(data: Vec<f64>, n: usize, p: usize) -> DesignMatrix<f64> {
        DesignMatrix {
            n,
            p,
            data,
            column_labels: (0..p).map(|i| format!("c{i}")).collect(),
        }
    }

    #[test]
    fn splits_a_separable_feature() {
        let x = matrix(vec![1.0, 2.0, 3.0, 10.0, 11.0, 12.0], 6, 1);
        let y = [0, 0, 0, 1, 1, 1];
        let weights = vec![1u32; 6];
        let sorted = SortedColumns::build(&x);
        let mut scratch = CartScratch::new(6, 1);
        let mut rng = seed::stream(&[1]);
        let tree = grow_tree(&x, &y, &weights, &sorted, 1, &mut rng, &mut scratch);
        assert_eq!(tree.predict_row(&[2.5]), 0);
        assert_eq!(tree.predict_row(&[10.5]), 1);
        assert_eq!(tree.n_nodes(), 3);
    }

    #[test]
    fn conflicting_duplicates_become_a_majority_leaf() {
        let x = matrix(vec![5.0, 5.0, 5.0], 3, 1);
        let y = [1, 0, 0];
        let weights = vec![1u32; 3];
        let sorted = SortedColumns::build(&x);
        let mut scratch = CartScratch::new(3, 1);
        let mut rng = seed::stream(&[2]);
        let tree = grow_tree(&x, &y, &weights, &sorted, 1, &mut rng, &mut scratch);
        assert_eq!(tree.n_nodes(), 1);
        assert_eq!(tree.predict_row(&[5.0]), 0);
    }

    #[test]
    fn grows_to_purity_on_distinct_rows() {
        let mut rng = seed::stream(&[3]);
        use rand::Rng;
        let n = 64;
        let data: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>()).collect();
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let x = matrix(data, n, 2);
        let weights = vec![1u32; n];
        let sorted = SortedColumns::build(&x);
        let mut scratch = CartScratch::new(n, 2);
        let mut grow_rng = seed::stream(&[4]);
        let tree = grow_tree(&x, &y, &weights, &sorted, 2, &mut grow_rng, &mut scratch);
        for i in 0..n {
            assert_eq!(tree.predict_row(x.row(i)), y[i], "row {i} not memorized");
        }
    }
}
