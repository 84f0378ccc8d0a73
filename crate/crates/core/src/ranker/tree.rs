use crate::dataset::FeatureRow;

/// Splits must improve the objective by more than this to be taken.
const MIN_GAIN: f64 = 1e-12;

/// Column-major feature values with per-feature presorted row orders,
/// built once per training run and shared by every boosting round.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    n_rows: usize,
    columns: Vec<Vec<Option<f64>>>,
    /// Rows with a present value, ascending by (value, row index).
    sorted: Vec<Vec<u32>>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[FeatureRow]) -> Self {
        let n_features = rows.first().map_or(0, FeatureRow::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); n_features];
        for r in rows {
            assert_eq!(r.len(), n_features, "rows must share one schema");
            for (col, v) in columns.iter_mut().zip(r.values()) {
                col.push(*v);
            }
        }
        let sorted = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).filter(|&i| col[i as usize].is_some()).collect();
                idx.sort_by(|&a, &b| {
                    let (va, vb) = (col[a as usize].unwrap(), col[b as usize].unwrap());
                    va.total_cmp(&vb).then(a.cmp(&b))
                });
                idx
            })
            .collect();
        FeatureMatrix {
            n_rows: rows.len(),
            columns,
            sorted,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn value(&self, row: usize, feature: usize) -> Option<f64> {
        self.columns[feature][row]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_leaves: usize,
    pub min_leaf_count: usize,
    /// L2 regularizer added to hessian sums.
    pub lambda_reg: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_leaves: 16,
            min_leaf_count: 5,
            lambda_reg: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `value <= threshold` go to `left` (the "yes" branch);
    /// missing values follow `missing_goes_left`.
    Split {
        feature: usize,
        threshold: f64,
        missing_goes_left: bool,
        gain: f64,
        left: usize,
        right: usize,
    },
}

/// A binary regression tree stored as a node arena rooted at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Builds a tree from an arena, checking that the structure is a proper
    /// binary tree rooted at index 0 with finite thresholds.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, String> {
        if nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(format!("node {i} reached twice"));
            }
            match &nodes[i] {
                Node::Leaf { value } if !value.is_finite() => return Err(format!("leaf {i} is not finite")),
                Node::Leaf { .. } => {}
                Node::Split {
                    threshold, left, right, ..
                } => {
                    if !threshold.is_finite() {
                        return Err(format!("node {i} has a non-finite threshold"));
                    }
                    for &c in [left, right] {
                        if c >= nodes.len() {
                            return Err(format!("node {i} points past the arena"));
                        }
                        stack.push(c);
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("tree has unreachable nodes".into());
        }
        Ok(RegressionTree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn split_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    fn evaluate(&self, value_of: impl Fn(usize) -> Option<f64>) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    missing_goes_left,
                    left,
                    right,
                    ..
                } => {
                    let go_left = match value_of(*feature) {
                        Some(v) => v <= *threshold,
                        None => *missing_goes_left,
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, values: &[Option<f64>]) -> f64 {
        self.evaluate(|f| values.get(f).copied().flatten())
    }

    pub(crate) fn predict_matrix_row(&self, matrix: &FeatureMatrix, row: usize) -> f64 {
        self.evaluate(|f| matrix.value(row, f))
    }

    /// Largest feature index referenced by a split.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    feature: usize,
    threshold: f64,
    missing_goes_left: bool,
    gain: f64,
}

struct GrowingLeaf {
    node: usize,
    rows: Vec<u32>,
    sorted: Vec<Vec<u32>>,
    grad_sum: f64,
    hess_sum: f64,
    best: Option<SplitCandidate>,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn split_threshold(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi || mid < lo {
        lo
    } else {
        mid
    }
}

fn best_split(
    leaf: &GrowingLeaf,
    matrix: &FeatureMatrix,
    grad: &[f64],
    hess: &[f64],
    params: &TreeParams,
) -> Option<SplitCandidate> {
    let n = leaf.rows.len();
    let min = params.min_leaf_count.max(1);
    if n < 2 * min {
        return None;
    }
    let (g, h, lambda) = (leaf.grad_sum, leaf.hess_sum, params.lambda_reg);
    let parent = score(g, h, lambda);
    let mut best: Option<SplitCandidate> = None;

    for (feature, present) in leaf.sorted.iter().enumerate() {
        if present.is_empty() {
            continue;
        }
        let col = &matrix.columns[feature];
        let (gp, hp) = present
            .iter()
            .fold((0.0, 0.0), |(a, b), &r| (a + grad[r as usize], b + hess[r as usize]));
        let (g_miss, h_miss, n_miss) = (g - gp, h - hp, n - present.len());

        let mut consider = |count_left_present: usize, gl: f64, hl: f64, threshold: f64, miss_left: bool| {
            let (mut cl, mut gl, mut hl) = (count_left_present, gl, hl);
            if miss_left {
                cl += n_miss;
                gl += g_miss;
                hl += h_miss;
            }
            let cr = n - cl;
            if cl < min || cr < min {
                return;
            }
            let gain = score(gl, hl, lambda) + score(g - gl, h - hl, lambda) - parent;
            if gain > best.map_or(MIN_GAIN, |b| b.gain) {
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    missing_goes_left: miss_left,
                    gain,
                });
            }
        };

        let (mut gl, mut hl) = (0.0, 0.0);
        for k in 0..present.len() {
            let r = present[k] as usize;
            gl += grad[r];
            hl += hess[r];
            let v = col[r].unwrap();
            if let Some(&next) = present.get(k + 1) {
                let next_v = col[next as usize].unwrap();
                if next_v == v {
                    continue;
                }
                let t = split_threshold(v, next_v);
                consider(k + 1, gl, hl, t, true);
                consider(k + 1, gl, hl, t, false);
            } else if n_miss > 0 {
                // Present values on one side, missing on the other.
                consider(k + 1, gl, hl, v, false);
            }
        }
    }
    best
}

/// Fits one regression tree to gradient/hessian statistics.
///
/// Growth is leaf-wise: the leaf whose best split has the largest gain is
/// split next, until `max_leaves` is reached or no split with positive gain
/// leaves at least `min_leaf_count` rows on each side. Gain is
/// `G_L²/(H_L+λ) + G_R²/(H_R+λ) - G²/(H+λ)` and leaf values are `-G/(H+λ)`.
/// Equal gains resolve to the lower feature index, then the lower
/// threshold, then missing-left.
pub fn fit_tree(matrix: &FeatureMatrix, grad: &[f64], hess: &[f64], params: &TreeParams) -> RegressionTree {
    assert_eq!(grad.len(), matrix.n_rows(), "one gradient per row");
    assert_eq!(hess.len(), matrix.n_rows(), "one hessian per row");
    let lambda = params.lambda_reg;
    let rows: Vec<u32> = (0..matrix.n_rows() as u32).collect();
    let mut root = GrowingLeaf {
        node: 0,
        grad_sum: grad.iter().sum(),
        hess_sum: hess.iter().sum(),
        rows,
        sorted: matrix.sorted.clone(),
        best: None,
    };
    root.best = best_split(&root, matrix, grad, hess, params);

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut leaves = vec![root];
    let mut go_left = vec![false; matrix.n_rows()];

    while leaves.len() < params.max_leaves.max(1) {
        let pick = leaves
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.best.map(|b| (i, b.gain, l.node)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)));
        let Some((idx, _, _)) = pick else { break };
        let leaf = leaves.swap_remove(idx);
        let split = leaf.best.expect("picked leaf has a split");

        let col = &matrix.columns[split.feature];
        for &r in &leaf.rows {
            go_left[r as usize] = match col[r as usize] {
                Some(v) => v <= split.threshold,
                None => split.missing_goes_left,
            };
        }
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&r| go_left[r as usize]);
        let (mut left_sorted, mut right_sorted) = (Vec::new(), Vec::new());
        for list in &leaf.sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = list.iter().partition(|&&r| go_left[r as usize]);
            left_sorted.push(l);
            right_sorted.push(r);
        }

        let left_node = nodes.len();
        let right_node = left_node + 1;
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            missing_goes_left: split.missing_goes_left,
            gain: split.gain,
            left: left_node,
            right: right_node,
        };

        for (node, rows, sorted) in [(left_node, left_rows, left_sorted), (right_node, right_rows, right_sorted)] {
            let mut child = GrowingLeaf {
                node,
                grad_sum: rows.iter().map(|&r| grad[r as usize]).sum(),
                hess_sum: rows.iter().map(|&r| hess[r as usize]).sum(),
                rows,
                sorted,
                best: None,
            };
            child.best = best_split(&child, matrix, grad, hess, params);
            leaves.push(child);
        }
    }

    for leaf in &leaves {
        nodes[leaf.node] = Node::Leaf {
            value: -leaf.grad_sum / (leaf.hess_sum + lambda),
        };
    }
    RegressionTree { nodes }
}
