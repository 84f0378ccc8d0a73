use super::metrics::{discount, gain, ideal_dcg, ranking_order};

/// LambdaRank gradients and hessians for one group.
///
/// For every pair with `rel_i > rel_j`, the pairwise logistic gradient is
/// scaled by `|ΔNDCG@p|`, the change in truncated NDCG from swapping the two
/// items at their current positions:
///
/// `λ_ij = -σ |ΔNDCG_ij| / (1 + exp(σ (s_i - s_j)))`
///
/// `λ_ij` is added to item `i` and subtracted from item `j`, so the
/// gradients of a group sum to zero. The hessian of both items grows by
/// `σ² |ΔNDCG_ij| ρ (1 - ρ)` with `ρ = 1 / (1 + exp(σ (s_i - s_j)))`.
pub fn lambda_gradients(scores: &[f64], relevances: &[u32], p: usize, sigma: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(scores.len(), relevances.len(), "scores and relevances must align");
    let n = scores.len();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let idcg = ideal_dcg(relevances, p);
    if n < 2 || idcg == 0.0 {
        return (grad, hess);
    }
    let inv_idcg = 1.0 / idcg;

    let mut position = vec![0; n];
    for (pos, idx) in ranking_order(scores).into_iter().enumerate() {
        position[idx] = pos;
    }
    let truncated = |pos: usize| if pos < p { discount(pos) } else { 0.0 };

    for i in 0..n {
        for j in 0..n {
            if relevances[i] <= relevances[j] {
                continue;
            }
            let delta = (gain(relevances[i]) - gain(relevances[j])).abs()
                * (truncated(position[i]) - truncated(position[j])).abs()
                * inv_idcg;
            if delta == 0.0 {
                continue;
            }
            let rho = 1.0 / (1.0 + (sigma * (scores[i] - scores[j])).exp());
            let lambda = -sigma * delta * rho;
            let h = sigma * sigma * delta * rho * (1.0 - rho);
            grad[i] += lambda;
            grad[j] -= lambda;
            hess[i] += h;
            hess[j] += h;
        }
    }
    (grad, hess)
}
