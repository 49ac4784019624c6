//! Stage-wise gradient boosting on binomial deviance.
//!
//! The model starts from the empirical log odds. Each stage fits a
//! depth-limited regression tree to the negative gradient
//! `y − logistic(F)` with least-squares splits, then moves every leaf by one
//! Newton step (`Σ gradient / Σ hessian`) scaled by the shrinkage. Feature
//! values are quantized once per fit into at most 64 bins whose cut points
//! lie halfway between observed values, so trees on small data are exact.

use crate::dataset::DesignMatrix;
use crate::num::Scalar;

use super::{FitWarning, LearnerError, LearnerKind, ParamSetting};

const MAX_BINS: usize = 64;
const LEAF: u32 = u32::MAX;
const MIN_GAIN: f64 = 1e-12;
// Overflow guards for runaway stages (high shrinkage, deep trees).
const MAX_ABS_SCORE: f64 = 36.0;
const MAX_ABS_LEAF: f64 = 1e3;

#[derive(Debug, Clone)]
struct RegNode {
    feature: u32,
    cut_value: f64,
    children: u32,
    value: f64,
}

#[derive(Debug, Clone)]
struct RegTree {
    nodes: Vec<RegNode>,
}

impl RegTree {
    fn predict_row<F: Scalar>(&self, row: &[F]) -> f64 {
        let mut id = 0usize;
        loop {
            let node = &self.nodes[id];
            if node.feature == LEAF {
                return node.value;
            }
            id = node.children as usize
                + usize::from(row[node.feature as usize].f64() > node.cut_value);
        }
    }
}

struct Bins {
    /// Cut values per feature, strictly increasing, at most `MAX_BINS - 1`.
    cuts: Vec<Vec<f64>>,
    /// Row-major `n × p` bin indices.
    index: Vec<u8>,
}

fn build_bins<F: Scalar>(x: &DesignMatrix<F>) -> Bins {
    let (n, p) = (x.n, x.p);
    let mut cuts = Vec::with_capacity(p);
    let mut sorted = vec![0.0f64; n];
    for f in 0..p {
        for i in 0..n {
            sorted[i] = x.data[i * p + f].f64();
        }
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let boundaries: Vec<usize> = (1..n).filter(|&i| sorted[i - 1] < sorted[i]).collect();
        let mut feature_cuts = Vec::new();
        if boundaries.len() < MAX_BINS {
            for &i in &boundaries {
                feature_cuts.push((sorted[i - 1] + sorted[i]) * 0.5);
            }
        } else {
            for c in 1..MAX_BINS {
                let pos = c * n / MAX_BINS;
                if pos > 0 && pos < n && sorted[pos - 1] < sorted[pos] {
                    feature_cuts.push((sorted[pos - 1] + sorted[pos]) * 0.5);
                }
            }
        }
        cuts.push(feature_cuts);
    }
    let mut index = vec![0u8; n * p];
    for i in 0..n {
        for f in 0..p {
            let v = x.data[i * p + f].f64();
            index[i * p + f] = cuts[f].partition_point(|&c| c < v) as u8;
        }
    }
    Bins { cuts, index }
}

#[derive(Debug)]
pub struct BrtModel<F: Scalar> {
    f0: f64,
    shrinkage: f64,
    trees: Vec<RegTree>,
    p: usize,
    pub column_labels: Vec<String>,
    pub warnings: Vec<FitWarning>,
    _marker: std::marker::PhantomData<F>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct BrtParams {
    n_tree: usize,
    shrinkage: f64,
    max_depth: usize,
}

fn parse_params(setting: &ParamSetting) -> Result<BrtParams, LearnerError> {
    const KIND: LearnerKind = LearnerKind::Brt;
    let n_tree = setting.get_int(KIND, "n_tree")?;
    let shrinkage = setting.get_real(KIND, "shrinkage")?;
    let depth = setting.get_int(KIND, "interaction_depth")?;
    if n_tree < 1 {
        return Err(LearnerError::BadParam {
            learner: KIND,
            name: "n_tree",
            message: format!("must be positive, got {n_tree}"),
        });
    }
    if !(shrinkage > 0.0 && shrinkage.is_finite()) {
        return Err(LearnerError::BadParam {
            learner: KIND,
            name: "shrinkage",
            message: format!("must be positive, got {shrinkage}"),
        });
    }
    if depth < 1 {
        return Err(LearnerError::BadParam {
            learner: KIND,
            name: "interaction_depth",
            message: format!("must be at least 1, got {depth}"),
        });
    }
    Ok(BrtParams {
        n_tree: n_tree as usize,
        shrinkage,
        max_depth: depth as usize,
    })
}

struct StageScratch {
    rows: Vec<u32>,
    spill: Vec<u32>,
    stack: Vec<NodeTask>,
    /// Histogram buffer pool; slot = feature * MAX_BINS + bin.
    hists: Vec<Hist>,
    free_hists: Vec<u32>,
    /// `recip[c] = 1.0 / c` for split scoring without divisions.
    recip: Vec<f64>,
}

#[derive(Clone)]
struct Hist {
    counts: Vec<u32>,
    sums: Vec<f64>,
}

struct NodeTask {
    node: u32,
    start: u32,
    end: u32,
    depth: u32,
    /// Sum of gradients over the node's rows.
    sum_g: f64,
    /// Index into the histogram pool, or `u32::MAX` when not precomputed.
    hist: u32,
}

const NO_HIST: u32 = u32::MAX;

impl StageScratch {
    fn new(n: usize, p: usize) -> Self {
        StageScratch {
            rows: Vec::with_capacity(n),
            spill: vec![0; n],
            stack: Vec::new(),
            hists: vec![
                Hist {
                    counts: vec![0; p * MAX_BINS],
                    sums: vec![0.0; p * MAX_BINS],
                };
                2
            ],
            free_hists: vec![0, 1],
            recip: (0..=n).map(|c| 1.0 / c as f64).collect(),
        }
    }

    fn alloc_hist(&mut self, p: usize) -> u32 {
        match self.free_hists.pop() {
            Some(i) => i,
            None => {
                self.hists.push(Hist {
                    counts: vec![0; p * MAX_BINS],
                    sums: vec![0.0; p * MAX_BINS],
                });
                (self.hists.len() - 1) as u32
            }
        }
    }
}

fn accumulate_hist(hist: &mut Hist, bins: &Bins, p: usize, grad: &[f64], rows: &[u32]) {
    hist.counts.fill(0);
    hist.sums.fill(0.0);
    for &r in rows {
        let row_bins = &bins.index[r as usize * p..(r as usize + 1) * p];
        let g = grad[r as usize];
        for (f, &b) in row_bins.iter().enumerate() {
            let slot = f * MAX_BINS + b as usize;
            hist.counts[slot] += 1;
            hist.sums[slot] += g;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn grow_stage(
    bins: &Bins,
    p: usize,
    grad: &[f64],
    hess: &[f64],
    max_depth: usize,
    min_leaf: usize,
    shrinkage: f64,
    score: &mut [f64],
    scratch: &mut StageScratch,
) -> RegTree {
    let n = grad.len();
    scratch.rows.clear();
    scratch.rows.extend(0..n as u32);
    let mut nodes = vec![RegNode {
        feature: LEAF,
        cut_value: 0.0,
        children: 0,
        value: 0.0,
    }];
    scratch.stack.clear();
    let root_sum: f64 = grad.iter().sum();
    scratch.stack.push(NodeTask {
        node: 0,
        start: 0,
        end: n as u32,
        depth: 0,
        sum_g: root_sum,
        hist: NO_HIST,
    });

    while let Some(task) = scratch.stack.pop() {
        let (start, end) = (task.start as usize, task.end as usize);
        let m = end - start;
        let splittable = (task.depth as usize) < max_depth && m >= 2 * min_leaf;

        let mut best: Option<(u32, u8, f64, f64)> = None; // feature, cut bin, cut value, left sum
        let mut hist_idx = task.hist;
        if splittable {
            if hist_idx == NO_HIST {
                hist_idx = scratch.alloc_hist(p);
                let (hist, rows) = (&mut scratch.hists, &scratch.rows[start..end]);
                accumulate_hist(&mut hist[hist_idx as usize], bins, p, grad, rows);
            }
            let hist = &scratch.hists[hist_idx as usize];
            let total_g = task.sum_g;
            let parent_score = total_g * total_g * scratch.recip[m];
            let mut best_gain = MIN_GAIN;
            let max_left = m - min_leaf;
            for f in 0..p {
                let n_cuts = bins.cuts[f].len();
                let (mut nl, mut sl) = (0usize, 0.0f64);
                for b in 0..n_cuts {
                    let slot = f * MAX_BINS + b;
                    let c = hist.counts[slot];
                    if c == 0 {
                        continue;
                    }
                    nl += c as usize;
                    sl += hist.sums[slot];
                    if nl > max_left {
                        break;
                    }
                    if nl < min_leaf {
                        continue;
                    }
                    let nr = m - nl;
                    let sr = total_g - sl;
                    let gain = sl * sl * scratch.recip[nl] + sr * sr * scratch.recip[nr]
                        - parent_score;
                    if gain > best_gain {
                        best_gain = gain;
                        best = Some((f as u32, b as u8, bins.cuts[f][b], sl));
                    }
                    // equal gains keep the earlier (feature, bin) candidate,
                    // which this ascending scan already guarantees
                }
            }
        }

        match best {
            Some((feature, cut_bin, cut_value, left_sum)) => {
                // stable partition (bin <= cut goes left) with speculative
                // dual writes instead of a data-dependent branch
                let mid = {
                    let mut write = start;
                    let mut spilled = 0usize;
                    for i in start..end {
                        let r = scratch.rows[i];
                        let is_left = usize::from(
                            bins.index[r as usize * p + feature as usize] <= cut_bin,
                        );
                        scratch.rows[write] = r;
                        scratch.spill[spilled] = r;
                        write += is_left;
                        spilled += 1 - is_left;
                    }
                    scratch.rows[write..end].copy_from_slice(&scratch.spill[..spilled]);
                    write
                };
                let left = nodes.len() as u32;
                nodes[task.node as usize] = RegNode {
                    feature,
                    cut_value,
                    children: left,
                    value: 0.0,
                };
                for _ in 0..2 {
                    nodes.push(RegNode {
                        feature: LEAF,
                        cut_value: 0.0,
                        children: 0,
                        value: 0.0,
                    });
                }

                // hand histograms down: accumulate the smaller child, derive
                // the sibling from the parent by subtraction
                let left_m = mid - start;
                let right_m = end - mid;
                let left_can = (task.depth as usize + 1) < max_depth && left_m >= 2 * min_leaf;
                let right_can = (task.depth as usize + 1) < max_depth && right_m >= 2 * min_leaf;
                let (mut left_hist, mut right_hist) = (NO_HIST, NO_HIST);
                if left_can && right_can {
                    let (small, small_m) = if left_m <= right_m {
                        ((start, mid), left_m)
                    } else {
                        ((mid, end), right_m)
                    };
                    // direct accumulation of the big child is cheaper only
                    // for tiny siblings; otherwise subtract from the parent
                    if m - small_m <= MAX_BINS / 3 {
                        let other = scratch.alloc_hist(p);
                        {
                            let rows = &scratch.rows[start..mid];
                            let hists = &mut scratch.hists;
                            accumulate_hist(&mut hists[other as usize], bins, p, grad, rows);
                        }
                        left_hist = other;
                        right_hist = hist_idx;
                        let rows = &scratch.rows[mid..end];
                        let hists = &mut scratch.hists;
                        accumulate_hist(&mut hists[right_hist as usize], bins, p, grad, rows);
                    } else {
                        let small_idx = scratch.alloc_hist(p);
                        {
                            let rows = &scratch.rows[small.0..small.1];
                            let hists = &mut scratch.hists;
                            accumulate_hist(&mut hists[small_idx as usize], bins, p, grad, rows);
                        }
                        // parent buffer becomes the sibling via subtraction
                        let (parent, small_h) = index_two(&mut scratch.hists, hist_idx, small_idx);
                        for (c, sc) in parent.counts.iter_mut().zip(&small_h.counts) {
                            *c -= sc;
                        }
                        for (g, sg) in parent.sums.iter_mut().zip(&small_h.sums) {
                            *g -= sg;
                        }
                        if left_m <= right_m {
                            left_hist = small_idx;
                            right_hist = hist_idx;
                        } else {
                            left_hist = hist_idx;
                            right_hist = small_idx;
                        }
                    }
                } else {
                    if hist_idx != NO_HIST {
                        scratch.free_hists.push(hist_idx);
                    }
                    // children that can still split recompute on demand
                }
                if !left_can && left_hist != NO_HIST {
                    scratch.free_hists.push(left_hist);
                    left_hist = NO_HIST;
                }
                if !right_can && right_hist != NO_HIST {
                    scratch.free_hists.push(right_hist);
                    right_hist = NO_HIST;
                }

                scratch.stack.push(NodeTask {
                    node: left + 1,
                    start: mid as u32,
                    end: end as u32,
                    depth: task.depth + 1,
                    sum_g: task.sum_g - left_sum,
                    hist: right_hist,
                });
                scratch.stack.push(NodeTask {
                    node: left,
                    start: start as u32,
                    end: mid as u32,
                    depth: task.depth + 1,
                    sum_g: left_sum,
                    hist: left_hist,
                });
            }
            None => {
                if hist_idx != NO_HIST {
                    scratch.free_hists.push(hist_idx);
                }
                let rows = &scratch.rows[start..end];
                let mut sh = 0.0f64;
                for &r in rows {
                    sh += hess[r as usize];
                }
                let value = (task.sum_g / sh.max(1e-12)).clamp(-MAX_ABS_LEAF, MAX_ABS_LEAF);
                nodes[task.node as usize].value = value;
                for &r in rows {
                    let s = score[r as usize] + shrinkage * value;
                    score[r as usize] = s.clamp(-MAX_ABS_SCORE, MAX_ABS_SCORE);
                }
            }
        }
    }
    RegTree { nodes }
}

#[inline]
fn index_two(hists: &mut [Hist], a: u32, b: u32) -> (&mut Hist, &Hist) {
    debug_assert_ne!(a, b);
    let (a, b) = (a as usize, b as usize);
    if a < b {
        let (lo, hi) = hists.split_at_mut(b);
        (&mut lo[a], &hi[0])
    } else {
        let (lo, hi) = hists.split_at_mut(a);
        (&mut hi[0], &lo[b])
    }
}

pub(super) fn fit_brt<F: Scalar>(
    x: &DesignMatrix<F>,
    y: &[u8],
    setting: &ParamSetting,
) -> Result<BrtModel<F>, LearnerError> {
    fit_inner(x, y, setting, None)
}

/// Fit variant that records the training deviance after every stage.
pub fn fit_brt_traced<F: Scalar>(
    x: &DesignMatrix<F>,
    y: &[u8],
    setting: &ParamSetting,
) -> Result<(BrtModel<F>, Vec<f64>), LearnerError> {
    let mut trace = Vec::new();
    let model = fit_inner(x, y, setting, Some(&mut trace))?;
    Ok((model, trace))
}

fn fit_inner<F: Scalar>(
    x: &DesignMatrix<F>,
    y: &[u8],
    setting: &ParamSetting,
    mut deviance_trace: Option<&mut Vec<f64>>,
) -> Result<BrtModel<F>, LearnerError> {
    let n = x.n;
    if n == 0 {
        return Err(LearnerError::TooFewRows(0));
    }
    let params = parse_params(setting)?;
    let p = x.p;
    let bins = build_bins(x);
    let min_leaf = (n / 4).clamp(1, 10);

    let prevalence = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let prevalence = prevalence.clamp(1e-12, 1.0 - 1e-12);
    let f0 = (prevalence / (1.0 - prevalence)).ln();

    let mut score = vec![f0; n];
    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];
    let mut scratch = StageScratch::new(n, p);

    let mut trees = Vec::with_capacity(params.n_tree);
    for _ in 0..params.n_tree {
        for i in 0..n {
            let prob = sigmoid(score[i]);
            grad[i] = f64::from(y[i]) - prob;
            hess[i] = prob * (1.0 - prob);
        }
        trees.push(grow_stage(
            &bins,
            p,
            &grad,
            &hess,
            params.max_depth,
            min_leaf,
            params.shrinkage,
            &mut score,
            &mut scratch,
        ));
        if let Some(trace) = deviance_trace.as_deref_mut() {
            let mut dev = 0.0;
            for i in 0..n {
                let prob = sigmoid(score[i]).clamp(1e-12, 1.0 - 1e-12);
                dev -= 2.0 * if y[i] == 1 { prob.ln() } else { (1.0 - prob).ln() };
            }
            trace.push(dev);
        }
    }

    Ok(BrtModel {
        f0,
        shrinkage: params.shrinkage,
        trees,
        p,
        column_labels: x.column_labels.clone(),
        warnings: Vec::new(),
        _marker: std::marker::PhantomData,
    })
}

impl<F: Scalar> BrtModel<F> {
    pub fn predict(&self, x: &DesignMatrix<F>) -> Result<Vec<F>, LearnerError> {
        if x.p != self.p {
            return Err(LearnerError::SchemaMismatch {
                expected: self.p,
                got: x.p,
            });
        }
        Ok((0..x.n)
            .map(|i| {
                let row = x.row(i);
                let mut f = self.f0;
                for tree in &self.trees {
                    f += self.shrinkage * tree.predict_row(row);
                }
                F::of(sigmoid(f.clamp(-MAX_ABS_SCORE, MAX_ABS_SCORE)))
            })
            .collect())
    }
}
