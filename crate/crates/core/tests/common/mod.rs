// Shared fixtures for the integration tests: seeded synthetic datasets and
// straight-line formula oracles that do not call into the crate's metrics.

#![allow(dead_code)]

use std::path::PathBuf;

use langrank::dataset::{DatasetRecord, FeatureRow, RankingDataset};
use langrank::features::standard_schema;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SYNTHETIC_SEED: u64 = 20_190_728;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn lang_code(i: usize) -> String {
    format!("l{i:02}")
}

/// 14-feature rows for every ordered pair of `n` synthetic languages, with
/// gold scores from `gold(o_w, d_gen, rng)`.
///
/// Per-language sizes and TTRs feed the size and TTR columns; overlaps and
/// distances are drawn per unordered pair so they are symmetric.
pub fn synthetic_records<F>(n: usize, seed: u64, mut gold: F) -> Vec<DatasetRecord>
where
    F: FnMut(f64, f64, &mut ChaCha8Rng) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(3.0..6.0)).round()).collect();
    let ttrs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..0.9)).collect();
    // o_w, o_sw, d_gen, d_syn, d_fea, d_pho, d_inv, d_geo
    let mut pair = vec![[0.0; 8]; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let mut v = [0.0; 8];
            v[0] = rng.gen_range(0.0..0.5);
            v[1] = rng.gen_range(0.0..0.5);
            for x in &mut v[2..] {
                *x = rng.gen_range(0.0..1.0);
            }
            pair[i * n + j] = v;
            pair[j * n + i] = v;
        }
    }
    let mut records = Vec::with_capacity(n * (n - 1));
    for t in 0..n {
        for a in 0..n {
            if t == a {
                continue;
            }
            let p = pair[t * n + a];
            let values = vec![
                sizes[a],
                sizes[t],
                sizes[a] / sizes[t],
                ttrs[a],
                ttrs[t],
                (1.0 - ttrs[a] / ttrs[t]).powi(2),
                p[0],
                p[1],
                p[2],
                p[3],
                p[4],
                p[5],
                p[6],
                p[7],
            ];
            let gold_score = gold(p[0], p[2], &mut rng);
            records.push(DatasetRecord {
                task_lang: lang_code(t),
                transfer_lang: lang_code(a),
                gold_score,
                features: FeatureRow::new(values.into_iter().map(Some).collect()).unwrap(),
            });
        }
    }
    records
}

/// The end-to-end benchmark: gold = 0.6·o_w − 0.4·d_gen + ε, ε ~ U[−0.02, 0.02].
pub fn synthetic_benchmark(n: usize) -> RankingDataset {
    let records = synthetic_records(n, SYNTHETIC_SEED, |o_w, d_gen, rng| {
        0.6 * o_w - 0.4 * d_gen + rng.gen_range(-0.02..=0.02)
    });
    RankingDataset::from_records(standard_schema(), records, 10).unwrap()
}

/// Gold score is a strictly increasing function of o_w alone.
pub fn monotone_dataset(n: usize, seed: u64) -> RankingDataset {
    let records = synthetic_records(n, seed, |o_w, _, _| (3.0 * o_w).exp());
    RankingDataset::from_records(standard_schema(), records, 10).unwrap()
}

/// DCG written out term by term: Σ (2^γ − 1) / log2(i + 1), i from 1.
pub fn oracle_dcg(rels: &[u32], p: usize) -> f64 {
    let mut total = 0.0;
    for (k, &r) in rels.iter().take(p).enumerate() {
        let i = (k + 1) as f64;
        total += (2f64.powi(r as i32) - 1.0) / (i + 1.0).log2();
    }
    total
}

pub fn oracle_ndcg(rels_in_predicted_order: &[u32], p: usize) -> f64 {
    let mut ideal = rels_in_predicted_order.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = oracle_dcg(&ideal, p);
    if idcg == 0.0 {
        1.0
    } else {
        oracle_dcg(rels_in_predicted_order, p) / idcg
    }
}

/// Labels by descending score with index tie-break: γ_max, γ_max − 1, …, 0.
pub fn oracle_labels(scores: &[f64], gamma_max: u32) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut labels = vec![0; scores.len()];
    for (pos, i) in idx.into_iter().enumerate() {
        labels[i] = gamma_max.saturating_sub(pos as u32);
    }
    labels
}

/// The pairwise gradient on a two-item group with `rels[0] > rels[1]`.
pub fn oracle_two_item_gradient(s: [f64; 2], rels: [u32; 2], sigma: f64) -> [f64; 2] {
    let g = |r: u32| 2f64.powi(r as i32) - 1.0;
    let idcg = g(rels[0]) + g(rels[1]) / 3f64.log2();
    let delta = (g(rels[0]) - g(rels[1])).abs() * (1.0 - 1.0 / 3f64.log2()) / idcg;
    let lambda = -sigma * delta / (1.0 + (sigma * (s[0] - s[1])).exp());
    [lambda, -lambda]
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_langrank")
}
