mod common;

use std::collections::BTreeMap;

use common::{oracle_ndcg, synthetic_records};
use langrank::bpe::{learn_bpe, subword_overlap};
use langrank::corpus::{ttr_distance, type_token_ratio, word_overlap, Corpus};
use langrank::dataset::{FeatureRow, FeatureSchema, RankingDataset};
use langrank::evaluation::{leave_one_out, parse_ranked_lists, ranked_lists_to_tsv, topk_best_ratio, RankedEntry, RankedList};
use langrank::features::standard_schema;
use langrank::ranker::{
    assign_relevance, lambda_gradients, ndcg_at_p, ranking_order, train, GbdtModel, Hyperparams, Node, RegressionTree,
};
use langrank::typology::{
    cosine_distance, DistanceKind, PrecomputedDistanceTable, Trait, TypologyDatabase, TypologyVectorStore, VectorKind,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn word() -> impl Strategy<Value = String> {
    "[a-e]{1,5}"
}

fn sentences() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(word(), 1..6), 1..8)
}

fn corpus(lang: &str, s: &[Vec<String>]) -> Corpus {
    Corpus::new(lang, s.to_vec()).unwrap()
}

fn trait_vec(len: usize) -> impl Strategy<Value = Vec<Trait>> {
    prop::collection::vec(
        prop_oneof![Just(Trait::Absent), Just(Trait::Present), Just(Trait::Missing)],
        len,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn word_overlap_is_symmetric_and_bounded(a in sentences(), b in sentences()) {
        let (ca, cb) = (corpus("a", &a), corpus("b", &b));
        let ab = word_overlap(&ca, &cb).unwrap();
        let ba = word_overlap(&cb, &ca).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=0.5).contains(&ab));
    }

    #[test]
    fn subword_overlap_is_symmetric_and_bounded(a in sentences(), b in sentences(), merges in 0usize..20) {
        let va = learn_bpe(&[&corpus("a", &a)], merges).unwrap();
        let vb = learn_bpe(&[&corpus("b", &b)], merges).unwrap();
        let ab = subword_overlap(&va, &vb).unwrap();
        prop_assert_eq!(ab, subword_overlap(&vb, &va).unwrap());
        prop_assert!((0.0..=0.5).contains(&ab));
    }

    #[test]
    fn ttr_ignores_sentence_order(s in sentences(), seed in any::<u64>()) {
        let mut shuffled = s.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(
            type_token_ratio(&corpus("x", &s)).unwrap(),
            type_token_ratio(&corpus("x", &shuffled)).unwrap()
        );
    }

    #[test]
    fn ttr_distance_is_zero_on_the_diagonal_and_non_negative(x in 1e-6f64..1.0, y in 1e-6f64..1.0) {
        prop_assert_eq!(ttr_distance(x, x).unwrap(), 0.0);
        prop_assert!(ttr_distance(x, y).unwrap() >= 0.0);
    }

    #[test]
    fn bpe_is_deterministic_and_adds_one_symbol_per_merge(s in sentences(), k in 0usize..15) {
        let c = corpus("x", &s);
        let v = learn_bpe(&[&c], k).unwrap();
        prop_assert_eq!(&v, &learn_bpe(&[&c], k).unwrap());
        let next = learn_bpe(&[&c], k + 1).unwrap();
        prop_assert!(v.subword_types().is_subset(next.subword_types()));
        if next.num_merges() > v.num_merges() {
            let (l, r) = next.merges().last().unwrap();
            let added: Vec<_> = next.subword_types().difference(v.subword_types()).cloned().collect();
            prop_assert!(added.len() <= 1);
            let merged = format!("{l}{r}");
            prop_assert!(next.subword_types().contains(&merged));
            prop_assert_eq!(&next.merges()[..k], v.merges());
        } else {
            prop_assert_eq!(next.subword_types(), v.subword_types());
        }
    }

    #[test]
    fn ndcg_is_bounded_and_matches_the_oracle(
        scores in prop::collection::vec(-10.0f64..10.0, 1..40),
        gold_seed in any::<u64>(),
        p in 1usize..12,
    ) {
        let mut gold: Vec<f64> = (0..scores.len()).map(|i| i as f64).collect();
        gold.shuffle(&mut ChaCha8Rng::seed_from_u64(gold_seed));
        let rels = assign_relevance(&gold, 10);
        let got = ndcg_at_p(&scores, &rels, p).unwrap();
        let ordered: Vec<u32> = ranking_order(&scores).into_iter().map(|i| rels[i]).collect();
        prop_assert!((got - oracle_ndcg(&ordered, p)).abs() < 1e-12);
        prop_assert!(got <= 1.0 + 1e-12);
        prop_assert!((ndcg_at_p(&gold, &rels, p).unwrap() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = scores.iter().map(|s| 2.0 * s + 7.0).collect();
        prop_assert_eq!(got, ndcg_at_p(&shifted, &rels, p).unwrap());
    }

    #[test]
    fn lambda_gradients_sum_to_zero(
        scores in prop::collection::vec(-5.0f64..5.0, 2..30),
        p in 1usize..11,
        sigma in 0.1f64..3.0,
    ) {
        let gold: Vec<f64> = scores.iter().map(|s| s.sin()).collect();
        let rels = assign_relevance(&gold, 10);
        let (g, h) = lambda_gradients(&scores, &rels, p, sigma);
        prop_assert!(g.iter().sum::<f64>().abs() < 1e-12);
        prop_assert!(h.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn topk_ratio_is_non_decreasing_in_k(golds in prop::collection::vec(0.01f64..100.0, 1..15), seed in any::<u64>()) {
        let names: Vec<String> = (0..golds.len()).map(|i| format!("c{i:02}")).collect();
        let gold: BTreeMap<String, f64> = names.iter().cloned().zip(golds.iter().copied()).collect();
        let mut ranking = names.clone();
        ranking.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut prev = 0.0;
        for k in 1..=names.len() + 1 {
            let r = topk_best_ratio(&ranking, &gold, k).unwrap();
            prop_assert!(r >= prev);
            prop_assert!(r <= 1.0);
            prev = r;
        }
        prop_assert_eq!(prev, 1.0);
    }

    #[test]
    fn cosine_distance_is_symmetric_bounded_and_zero_on_self(a in trait_vec(8), b in trait_vec(8)) {
        let ab = cosine_distance(&a, &b);
        prop_assert_eq!(ab, cosine_distance(&b, &a));
        if let Some(d) = ab {
            prop_assert!((0.0..=1.0).contains(&d));
        }
        if let Some(d) = cosine_distance(&a, &a) {
            prop_assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn vector_store_round_trips(rows in prop::collection::vec(trait_vec(5), 1..6)) {
        let rows: Vec<Vec<Trait>> = rows
            .into_iter()
            .filter(|r| r.iter().any(|t| *t != Trait::Missing))
            .collect();
        prop_assume!(!rows.is_empty());
        let mut text = String::from("lang\tf0\tf1\tf2\tf3\tf4\n");
        for (i, r) in rows.iter().enumerate() {
            text.push_str(&format!("x{i}"));
            for t in r {
                text.push_str(match t {
                    Trait::Absent => "\t0",
                    Trait::Present => "\t1",
                    Trait::Missing => "\t--",
                });
            }
            text.push('\n');
        }
        let store = TypologyVectorStore::parse(&text, VectorKind::Syntax, "gen").unwrap();
        prop_assert_eq!(store.to_tsv(), text.clone());
        let again = TypologyVectorStore::parse(&store.to_tsv(), VectorKind::Syntax, "gen").unwrap();
        prop_assert_eq!(again.to_tsv(), text);
    }

    #[test]
    fn query_distances_are_symmetric(
        va in trait_vec(6), vb in trait_vec(6), gen in 0.0f64..=1.0, geo in 0.0f64..=1.0,
    ) {
        prop_assume!(va.iter().any(|t| *t != Trait::Missing) && vb.iter().any(|t| *t != Trait::Missing));
        let render = |v: &[Trait]| v.iter().map(|t| match t {
            Trait::Absent => "0",
            Trait::Present => "1",
            Trait::Missing => "--",
        }).collect::<Vec<_>>().join("\t");
        let text = format!("lang\ta\tb\tc\td\te\tf\nx\t{}\ny\t{}\n", render(&va), render(&vb));
        let mut db = TypologyDatabase::new();
        for kind in VectorKind::ALL {
            db.add_store(TypologyVectorStore::parse(&text, kind, "gen").unwrap());
        }
        let mut g = PrecomputedDistanceTable::new(DistanceKind::Genetic);
        g.insert("x", "y", gen).unwrap();
        let mut h = PrecomputedDistanceTable::new(DistanceKind::Geographic);
        h.insert("y", "x", geo).unwrap();
        db.add_table(g);
        db.add_table(h);
        let xy = db.query_distances("x", "y").unwrap();
        let yx = db.query_distances("y", "x").unwrap();
        prop_assert_eq!(xy.values(), yx.values());
        prop_assert_eq!(xy.d_gen, Some(gen));
        prop_assert_eq!(xy.d_geo, Some(geo));
    }

    #[test]
    fn ranked_lists_round_trip(scores in prop::collection::vec(prop::option::of(-1e6f64..1e6), 1..8)) {
        let entries = scores
            .iter()
            .enumerate()
            .map(|(i, s)| RankedEntry {
                rank: i + 1,
                transfer_lang: format!("c{i}"),
                score: *s,
                true_rank: if i % 2 == 0 { Some(scores.len() - i) } else { None },
            })
            .collect();
        let lists = vec![RankedList { task_lang: "t".into(), entries }];
        let text = ranked_lists_to_tsv(&lists);
        prop_assert_eq!(parse_ranked_lists(&text, "gen").unwrap(), lists);
    }

    #[test]
    fn model_json_round_trips(
        leaves in prop::collection::vec(-1e3f64..1e3, 3),
        thr in -1e3f64..1e3,
        feature in 0usize..14,
        miss in any::<bool>(),
    ) {
        let tree = RegressionTree::from_nodes(vec![
            Node::Split { feature, threshold: thr, missing_goes_left: miss, gain: 1.5, left: 1, right: 2 },
            Node::Leaf { value: leaves[0] },
            Node::Leaf { value: leaves[1] },
        ]).unwrap();
        let model = GbdtModel::new(standard_schema(), Hyperparams::default(), vec![tree, RegressionTree::leaf(leaves[2])]).unwrap();
        let back = GbdtModel::from_json(&model.to_json()).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(back.to_json(), model.to_json());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn loo_is_invariant_to_record_order(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let records = synthetic_records(5, seed, |o_w, d_gen, _| o_w - d_gen);
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let hp = Hyperparams { num_trees: 5, min_leaf_count: 1, ..Hyperparams::default() };
        let a = RankingDataset::from_records(standard_schema(), records, 10).unwrap();
        let b = RankingDataset::from_records(standard_schema(), shuffled, 10).unwrap();
        let ra = leave_one_out(&a, &hp, "m").unwrap();
        let rb = leave_one_out(&b, &hp, "m").unwrap();
        prop_assert_eq!(ra.to_tsv(), rb.to_tsv());
        prop_assert_eq!(
            train(&a, &hp).unwrap().to_json(),
            train(&b, &hp).unwrap().to_json()
        );
    }
}

#[test]
fn feature_rows_reject_nan() {
    assert!(FeatureRow::new(vec![Some(f64::NAN)]).is_err());
    assert!(FeatureSchema::new(vec!["a".into(), "a".into()]).is_err());
}
