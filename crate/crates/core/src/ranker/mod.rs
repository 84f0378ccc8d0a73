//! Gradient-boosted regression trees trained with LambdaRank gradients.

mod export;
mod gbdt;
mod lambda;
mod metrics;
mod tree;

pub use export::{export_trees, parse_text_tree, ExportFormat};
pub use gbdt::{
    feature_importance, gain_importance, predict, train, train_with_history, FeatureImportance, GbdtModel,
    Hyperparams, MODEL_FORMAT, MODEL_FORMAT_VERSION,
};
pub use lambda::lambda_gradients;
pub use metrics::{assign_relevance, dcg_at_p, ndcg_at_p, ndcg_of_order, ranking_order};
pub use tree::{fit_tree, FeatureMatrix, Node, RegressionTree, TreeParams};
