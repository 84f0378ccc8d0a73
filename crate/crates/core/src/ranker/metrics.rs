use crate::error::{Error, Result};

/// Indices sorted by descending score; equal scores keep ascending index
/// order, which callers align with ascending language code.
pub fn ranking_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Graded relevance from gold scores: the best candidate gets `gamma_max`,
/// the next `gamma_max - 1`, down to 1; everything below gets 0. Labels
/// always start at `gamma_max`, even for groups smaller than the cap.
pub fn assign_relevance(gold_scores: &[f64], gamma_max: u32) -> Vec<u32> {
    let mut labels = vec![0; gold_scores.len()];
    for (rank, idx) in ranking_order(gold_scores).into_iter().enumerate() {
        labels[idx] = gamma_max.saturating_sub(rank as u32);
    }
    labels
}

pub(crate) fn gain(relevance: u32) -> f64 {
    2f64.powi(relevance as i32) - 1.0
}

pub(crate) fn discount(position: usize) -> f64 {
    1.0 / ((position + 2) as f64).log2()
}

/// `sum_{i <= p} (2^rel_i - 1) / log2(i + 1)` over relevances already in
/// ranked order.
pub fn dcg_at_p(relevances_in_order: &[u32], p: usize) -> f64 {
    relevances_in_order
        .iter()
        .take(p)
        .enumerate()
        .map(|(i, &r)| gain(r) * discount(i))
        .sum()
}

pub(crate) fn ideal_dcg(relevances: &[u32], p: usize) -> f64 {
    let mut ideal = relevances.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    dcg_at_p(&ideal, p)
}

/// NDCG@p of an explicit predicted order (indices into `relevances`).
/// Returns 1 when the ideal DCG is 0.
pub fn ndcg_of_order(order: &[usize], relevances: &[u32], p: usize) -> f64 {
    let idcg = ideal_dcg(relevances, p);
    if idcg == 0.0 {
        return 1.0;
    }
    let ranked: Vec<u32> = order.iter().map(|&i| relevances[i]).collect();
    dcg_at_p(&ranked, p) / idcg
}

/// NDCG@p of the ranking induced by `predicted_scores`.
pub fn ndcg_at_p(predicted_scores: &[f64], relevances: &[u32], p: usize) -> Result<f64> {
    if predicted_scores.len() != relevances.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} relevance labels",
            predicted_scores.len(),
            relevances.len()
        )));
    }
    Ok(ndcg_of_order(&ranking_order(predicted_scores), relevances, p))
}
