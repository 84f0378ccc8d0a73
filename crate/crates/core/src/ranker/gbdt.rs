use serde::{Deserialize, Serialize};

use super::lambda::lambda_gradients;
use super::metrics::ndcg_at_p;
use super::tree::{fit_tree, FeatureMatrix, Node, RegressionTree, TreeParams};
use crate::dataset::{FeatureRow, FeatureSchema, RankingDataset};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "langrank-gbdt";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Training configuration. Defaults: 100 trees of at most 16 leaves,
/// relevance cap 10, evaluation at NDCG@3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub num_trees: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
    pub min_leaf_count: usize,
    pub lambda_reg: f64,
    pub sigma: f64,
    pub gamma_max: u32,
    /// NDCG truncation seen by the gradients; `None` uses `gamma_max`.
    pub train_truncation: Option<usize>,
    /// NDCG truncation used for evaluation reports.
    pub eval_p: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            num_trees: 100,
            max_leaves: 16,
            learning_rate: 0.1,
            min_leaf_count: 5,
            lambda_reg: 1.0,
            sigma: 1.0,
            gamma_max: 10,
            train_truncation: None,
            eval_p: 3,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_owned()));
        if self.max_leaves < 1 {
            return bad("max_leaves must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.lambda_reg.is_finite() && self.lambda_reg > 0.0) {
            return bad("lambda_reg must be positive");
        }
        if self.gamma_max < 1 {
            return bad("gamma_max must be at least 1");
        }
        if self.eval_p < 1 || self.train_truncation == Some(0) {
            return bad("NDCG truncation must be at least 1");
        }
        Ok(())
    }

    pub fn truncation(&self) -> usize {
        self.train_truncation.unwrap_or(self.gamma_max as usize)
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_leaves: self.max_leaves,
            min_leaf_count: self.min_leaf_count,
            lambda_reg: self.lambda_reg,
        }
    }
}

/// Additive tree ensemble: `score(x) = learning_rate * Σ_k tree_k(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    schema: FeatureSchema,
    hyperparams: Hyperparams,
    trees: Vec<RegressionTree>,
}

impl GbdtModel {
    pub fn new(schema: FeatureSchema, hyperparams: Hyperparams, trees: Vec<RegressionTree>) -> Result<Self> {
        hyperparams.validate()?;
        for (k, t) in trees.iter().enumerate() {
            if t.max_feature().is_some_and(|f| f >= schema.len()) {
                return Err(Error::Schema(format!("tree {k} splits on a feature outside the schema")));
            }
        }
        Ok(GbdtModel {
            schema,
            hyperparams,
            trees,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn learning_rate(&self) -> f64 {
        self.hyperparams.learning_rate
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn score(&self, values: &[Option<f64>]) -> f64 {
        self.learning_rate() * self.trees.iter().map(|t| t.predict(values)).sum::<f64>()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_FORMAT_VERSION,
            feature_names: self.schema.clone(),
            hyperparams: self.hyperparams.clone(),
            num_trees: self.trees.len(),
            trees: self
                .trees
                .iter()
                .map(|t| TreeRecord {
                    leaves: t.leaf_count(),
                    root: nest(t, 0, &self.schema),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::parse("model", e.line(), e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Schema(format!("not a model file (format '{}')", file.format)));
        }
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!("unsupported model version {}", file.version)));
        }
        if file.num_trees != file.trees.len() {
            return Err(Error::Schema(format!(
                "model declares {} trees but holds {}",
                file.num_trees,
                file.trees.len()
            )));
        }
        let schema = FeatureSchema::new(file.feature_names.names().to_vec())?;
        let mut trees = Vec::with_capacity(file.trees.len());
        for (k, rec) in file.trees.iter().enumerate() {
            let mut nodes = Vec::new();
            flatten(&rec.root, &schema, &mut nodes)?;
            let tree = RegressionTree::from_nodes(nodes).map_err(|e| Error::Schema(format!("tree {k}: {e}")))?;
            if tree.leaf_count() != rec.leaves {
                return Err(Error::Schema(format!("tree {k}: leaf count mismatch")));
            }
            trees.push(tree);
        }
        GbdtModel::new(schema, file.hyperparams, trees)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    feature_names: FeatureSchema,
    hyperparams: Hyperparams,
    num_trees: usize,
    trees: Vec<TreeRecord>,
}

#[derive(Serialize, Deserialize)]
struct TreeRecord {
    leaves: usize,
    root: NestedNode,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NestedNode {
    Leaf {
        leaf: f64,
    },
    Split {
        feature: String,
        threshold: f64,
        missing_goes_left: bool,
        gain: f64,
        yes: Box<NestedNode>,
        no: Box<NestedNode>,
    },
}

fn nest(tree: &RegressionTree, i: usize, schema: &FeatureSchema) -> NestedNode {
    match &tree.nodes()[i] {
        Node::Leaf { value } => NestedNode::Leaf { leaf: *value },
        Node::Split {
            feature,
            threshold,
            missing_goes_left,
            gain,
            left,
            right,
        } => NestedNode::Split {
            feature: schema.names()[*feature].clone(),
            threshold: *threshold,
            missing_goes_left: *missing_goes_left,
            gain: *gain,
            yes: Box::new(nest(tree, *left, schema)),
            no: Box::new(nest(tree, *right, schema)),
        },
    }
}

fn flatten(node: &NestedNode, schema: &FeatureSchema, out: &mut Vec<Node>) -> Result<usize> {
    let idx = out.len();
    match node {
        NestedNode::Leaf { leaf } => out.push(Node::Leaf { value: *leaf }),
        NestedNode::Split {
            feature,
            threshold,
            missing_goes_left,
            gain,
            yes,
            no,
        } => {
            let f = schema
                .index_of(feature)
                .ok_or_else(|| Error::Schema(format!("split on unknown feature '{feature}'")))?;
            out.push(Node::Leaf { value: 0.0 });
            let left = flatten(yes, schema, out)?;
            let right = flatten(no, schema, out)?;
            out[idx] = Node::Split {
                feature: f,
                threshold: *threshold,
                missing_goes_left: *missing_goes_left,
                gain: *gain,
                left,
                right,
            };
        }
    }
    Ok(idx)
}

/// Trains the ensemble; see [`train_with_history`].
pub fn train(dataset: &RankingDataset, hyperparams: &Hyperparams) -> Result<GbdtModel> {
    train_with_history(dataset, hyperparams).map(|(m, _)| m)
}

/// Boosting loop. Scores start at 0; each round computes LambdaRank
/// gradients per group, fits one tree to all rows, and adds
/// `learning_rate * tree(x)` to the scores. Groups with a single candidate
/// carry no pairwise signal and are skipped.
///
/// Also returns the mean training NDCG@`eval_p` after every round.
pub fn train_with_history(dataset: &RankingDataset, hp: &Hyperparams) -> Result<(GbdtModel, Vec<f64>)> {
    hp.validate()?;
    let relabeled;
    let dataset = if dataset.gamma_max() == hp.gamma_max {
        dataset
    } else {
        relabeled = dataset.clone().with_gamma_max(hp.gamma_max)?;
        &relabeled
    };

    let groups: Vec<_> = dataset
        .groups()
        .iter()
        .filter(|g| g.candidates.len() >= 2 && g.candidates.iter().any(|c| c.relevance > 0))
        .collect();
    if groups.is_empty() {
        return Err(Error::invalid(
            "degenerate dataset: no group has two or more candidates with a positive relevance",
        ));
    }

    let mut rows: Vec<FeatureRow> = Vec::new();
    let mut spans = Vec::with_capacity(groups.len());
    let mut relevances = Vec::new();
    for g in &groups {
        let start = rows.len();
        for c in &g.candidates {
            rows.push(c.features.clone());
            relevances.push(c.relevance);
        }
        spans.push(start..rows.len());
    }
    let matrix = FeatureMatrix::from_rows(&rows);
    let params = hp.tree_params();
    let truncation = hp.truncation();

    let mut scores = vec![0.0; rows.len()];
    let mut grad = vec![0.0; rows.len()];
    let mut hess = vec![0.0; rows.len()];
    let mut trees = Vec::with_capacity(hp.num_trees);
    let mut history = Vec::with_capacity(hp.num_trees);

    for _ in 0..hp.num_trees {
        for span in &spans {
            let (g, h) = lambda_gradients(&scores[span.clone()], &relevances[span.clone()], truncation, hp.sigma);
            grad[span.clone()].copy_from_slice(&g);
            hess[span.clone()].copy_from_slice(&h);
        }
        let tree = fit_tree(&matrix, &grad, &hess, &params);
        for (r, s) in scores.iter_mut().enumerate() {
            *s += hp.learning_rate * tree.predict_matrix_row(&matrix, r);
        }
        trees.push(tree);

        let mean = spans
            .iter()
            .map(|sp| ndcg_at_p(&scores[sp.clone()], &relevances[sp.clone()], hp.eval_p).expect("aligned"))
            .sum::<f64>()
            / spans.len() as f64;
        history.push(mean);
    }

    let model = GbdtModel::new(dataset.schema().clone(), hp.clone(), trees)?;
    Ok((model, history))
}

/// Scores each row independently.
pub fn predict(model: &GbdtModel, rows: &[FeatureRow]) -> Result<Vec<f64>> {
    rows.iter()
        .map(|r| {
            if r.len() != model.schema.len() {
                return Err(Error::Schema(format!(
                    "row has {} features, model expects {}",
                    r.len(),
                    model.schema.len()
                )));
            }
            Ok(model.score(r.values()))
        })
        .collect()
}

/// Normalized per-feature weights in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub kind: &'static str,
    pub weights: Vec<(String, f64)>,
}

impl FeatureImportance {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.weights.iter().find(|(n, _)| n == name).map(|(_, w)| *w)
    }

    /// Features sorted by descending weight, ties by schema order.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.weights.iter().map(|(n, w)| (n.as_str(), *w)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("feature\t{}\n", self.kind);
        for (n, w) in &self.weights {
            out.push_str(&format!("{n}\t{w}\n"));
        }
        out
    }
}

fn importance_by(model: &GbdtModel, kind: &'static str, weight: impl Fn(f64) -> f64) -> Result<FeatureImportance> {
    let mut totals = vec![0.0; model.schema.len()];
    for t in &model.trees {
        for n in t.nodes() {
            if let Node::Split { feature, gain, .. } = n {
                totals[*feature] += weight(*gain);
            }
        }
    }
    let sum: f64 = totals.iter().sum();
    if sum == 0.0 {
        return Err(Error::invalid("model has no splits; feature importance is undefined"));
    }
    Ok(FeatureImportance {
        kind,
        weights: model
            .schema
            .names()
            .iter()
            .cloned()
            .zip(totals.into_iter().map(|t| t / sum))
            .collect(),
    })
}

/// How often each feature is chosen as a split, normalized to sum to 1.
pub fn feature_importance(model: &GbdtModel) -> Result<FeatureImportance> {
    importance_by(model, "split_count", |_| 1.0)
}

/// Total split gain per feature, normalized to sum to 1. Secondary to the
/// split-count importance.
pub fn gain_importance(model: &GbdtModel) -> Result<FeatureImportance> {
    importance_by(model, "gain", |g| g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(names: &[&str]) -> FeatureSchema {
        FeatureSchema::new(names.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn split(feature: usize, threshold: f64, left: usize, right: usize) -> Node {
        Node::Split {
            feature,
            threshold,
            missing_goes_left: false,
            gain: 1.0,
            left,
            right,
        }
    }

    fn stump(feature: usize) -> RegressionTree {
        RegressionTree::from_nodes(vec![split(feature, 0.5, 1, 2), Node::Leaf { value: 1.0 }, Node::Leaf { value: -1.0 }])
            .unwrap()
    }

    #[test]
    fn empty_ensemble_scores_zero() {
        let m = GbdtModel::new(schema(&["a"]), Hyperparams::default(), vec![]).unwrap();
        let rows = vec![FeatureRow::new(vec![Some(2.0)]).unwrap()];
        assert_eq!(predict(&m, &rows).unwrap(), [0.0]);
    }

    #[test]
    fn single_leaf_scaled_by_learning_rate() {
        let m = GbdtModel::new(schema(&["a"]), Hyperparams::default(), vec![RegressionTree::leaf(2.5)]).unwrap();
        let rows = vec![FeatureRow::new(vec![Some(2.0)]).unwrap(), FeatureRow::new(vec![None]).unwrap()];
        assert_eq!(predict(&m, &rows).unwrap(), [0.1 * 2.5, 0.1 * 2.5]);
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let m = GbdtModel::new(schema(&["a"]), Hyperparams::default(), vec![]).unwrap();
        let rows = vec![FeatureRow::new(vec![Some(2.0), None]).unwrap()];
        assert!(matches!(predict(&m, &rows), Err(Error::Schema(_))));
    }

    #[test]
    fn importance_counts_splits() {
        let s = schema(&["k", "m"]);
        let m = GbdtModel::new(s.clone(), Hyperparams::default(), vec![stump(0)]).unwrap();
        let imp = feature_importance(&m).unwrap();
        assert_eq!(imp.get("k"), Some(1.0));
        assert_eq!(imp.get("m"), Some(0.0));

        let m = GbdtModel::new(s, Hyperparams::default(), vec![stump(0), stump(1), stump(0), stump(1)]).unwrap();
        let imp = feature_importance(&m).unwrap();
        assert_eq!(imp.get("k"), Some(0.5));
        assert_eq!(imp.get("m"), Some(0.5));
    }

    #[test]
    fn importance_without_splits_fails() {
        let m = GbdtModel::new(schema(&["k"]), Hyperparams::default(), vec![RegressionTree::leaf(1.0)]).unwrap();
        assert!(feature_importance(&m).is_err());
        assert!(gain_importance(&m).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = GbdtModel::new(schema(&["k", "m"]), Hyperparams::default(), vec![stump(1), stump(0)]).unwrap();
        let back = GbdtModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_foreign_json() {
        let m = GbdtModel::new(schema(&["k"]), Hyperparams::default(), vec![]).unwrap();
        let text = m.to_json().replace(MODEL_FORMAT, "other");
        assert!(GbdtModel::from_json(&text).is_err());
        assert!(GbdtModel::from_json("{").is_err());
    }

    #[test]
    fn rejects_out_of_schema_split() {
        assert!(GbdtModel::new(schema(&["k"]), Hyperparams::default(), vec![stump(3)]).is_err());
    }
}
