use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A binary regression tree; samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if row(feature) <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    /// Greedy least-squares tree, grown level by level. `order[f]` lists
    /// sample indices sorted by feature `f` and `bins[f]` their quantile bin;
    /// splits are only placed between different bins. A node with no split
    /// that reduces the squared error becomes a leaf holding its mean target.
    fn grow(x: &DMatrix<f64>, target: &[f64], order: &[Vec<usize>], bins: &[Vec<u32>], max_depth: usize) -> Self {
        const DONE: usize = usize::MAX;
        let n = target.len();
        let mut nodes = vec![Node::Leaf(0.0)];
        // frontier slot of each sample, DONE once its node is final
        let mut slot = vec![0usize; n];
        let mut frontier = vec![0usize]; // node ids

        for depth in 0..=max_depth {
            let k = frontier.len();
            let mut sum = vec![0.0; k];
            let mut count = vec![0usize; k];
            for i in 0..n {
                if slot[i] != DONE {
                    sum[slot[i]] += target[i];
                    count[slot[i]] += 1;
                }
            }

            // best (gain, feature, threshold) per frontier node
            let mut best: Vec<Option<(f64, usize, f64)>> = vec![None; k];
            if depth < max_depth {
                for (f, sorted) in order.iter().enumerate() {
                    let mut left_sum = vec![0.0; k];
                    let mut left_n = vec![0usize; k];
                    let mut last = vec![f64::NAN; k];
                    let bin = &bins[f];
                    let mut last_bin = vec![0u32; k];
                    for &i in sorted {
                        let s = slot[i];
                        if s == DONE {
                            continue;
                        }
                        let v = x[(i, f)];
                        if left_n[s] > 0 && bin[i] > last_bin[s] {
                            let (ln, rn) = (left_n[s] as f64, (count[s] - left_n[s]) as f64);
                            let rs = sum[s] - left_sum[s];
                            let gain = left_sum[s] * left_sum[s] / ln + rs * rs / rn
                                - sum[s] * sum[s] / count[s] as f64;
                            if best[s].is_none_or(|(g, _, _)| gain > g) {
                                best[s] = Some((gain, f, 0.5 * (last[s] + v)));
                            }
                        }
                        left_sum[s] += target[i];
                        left_n[s] += 1;
                        last[s] = v;
                        last_bin[s] = bin[i];
                    }
                }
            }

            let mut next = Vec::new();
            let mut child_slot = vec![(DONE, DONE); k];
            for (s, &node) in frontier.iter().enumerate() {
                let gain_floor = 1e-12 * sum[s].abs().max(1.0);
                match best[s] {
                    Some((gain, feature, threshold)) if gain > gain_floor => {
                        let left = nodes.len();
                        nodes.push(Node::Leaf(0.0));
                        nodes.push(Node::Leaf(0.0));
                        nodes[node] = Node::Split { feature, threshold, left, right: left + 1 };
                        child_slot[s] = (next.len(), next.len() + 1);
                        next.push(left);
                        next.push(left + 1);
                    }
                    _ => {
                        let mean = if count[s] > 0 { sum[s] / count[s] as f64 } else { 0.0 };
                        nodes[node] = Node::Leaf(mean);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            for i in 0..n {
                let s = slot[i];
                if s == DONE {
                    continue;
                }
                let (l, r) = child_slot[s];
                slot[i] = match nodes[frontier[s]] {
                    Node::Split { feature, threshold, .. } => {
                        if x[(i, feature)] <= threshold {
                            l
                        } else {
                            r
                        }
                    }
                    Node::Leaf(_) => DONE,
                };
            }
            frontier = next;
        }
        RegressionTree { nodes }
    }
}

/// Bin index of every sample for feature `f`: the number of cut points at or
/// below its value, with cuts at the `k * n / max_bins` order statistics.
fn quantile_bins(x: &DMatrix<f64>, f: usize, sorted: &[usize], max_bins: usize) -> Vec<u32> {
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..max_bins)
        .map(|k| k * n / max_bins)
        .filter(|&r| r > 0 && r < n)
        .map(|r| x[(sorted[r], f)])
        .collect();
    cuts.dedup();
    let mut bin = vec![0u32; n];
    let mut c = 0;
    for &i in sorted {
        let v = x[(i, f)];
        while c < cuts.len() && cuts[c] <= v {
            c += 1;
        }
        bin[i] = c as u32;
    }
    bin
}

/// Additive ensemble `base + learning_rate * sum(tree(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Training MSE after the initial constant and after each round.
    pub training_mse: Vec<f64>,
}

impl TreeEnsemble {
    /// `x` must already be standardized.
    pub(super) fn fit(
        x: &DMatrix<f64>,
        y: &[f64],
        estimators: usize,
        max_depth: usize,
        learning_rate: f64,
        max_bins: usize,
    ) -> Self {
        let n = y.len();
        let base = y.iter().sum::<f64>() / n as f64;
        let order: Vec<Vec<usize>> = (0..x.ncols())
            .map(|f| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let bins: Vec<Vec<u32>> = order
            .iter()
            .enumerate()
            .map(|(f, sorted)| quantile_bins(x, f, sorted, max_bins))
            .collect();

        let mut fitted = vec![base; n];
        let mse = |fitted: &[f64]| fitted.iter().zip(y).map(|(f, t)| (t - f) * (t - f)).sum::<f64>() / n as f64;
        let mut training_mse = vec![mse(&fitted)];
        let mut trees = Vec::with_capacity(estimators);
        for _ in 0..estimators {
            let resid: Vec<f64> = y.iter().zip(&fitted).map(|(t, f)| t - f).collect();
            let tree = RegressionTree::grow(x, &resid, &order, &bins, max_depth);
            for (i, f) in fitted.iter_mut().enumerate() {
                *f += learning_rate * tree.predict_row(|j| x[(i, j)]);
            }
            training_mse.push(mse(&fitted));
            trees.push(tree);
        }
        TreeEnsemble { base, learning_rate, trees, training_mse }
    }

    pub(super) fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                self.base
                    + self.learning_rate
                        * self.trees.iter().map(|t| t.predict_row(|j| x[(i, j)])).sum::<f64>()
            })
            .collect()
    }
}
