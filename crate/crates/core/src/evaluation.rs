//! Leave-one-language-out evaluation, single-feature baselines, top-K
//! best-score curves and the report formats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataset::{FeatureRow, RankingDataset, RankingGroup};
use crate::error::{Error, Result};
use crate::ranker::{assign_relevance, ndcg_of_order, predict, ranking_order, train, GbdtModel, Hyperparams};

/// Outcome of ranking one task language.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub held_out_lang: String,
    pub ndcg: f64,
    pub predicted_ranking: Vec<String>,
    /// Gold scores aligned with `predicted_ranking`.
    pub gold_scores: Vec<f64>,
    pub gold_ranking: Vec<String>,
    /// Task languages of the training groups; empty for baselines.
    pub training_languages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method_label: String,
    pub p: usize,
    pub per_fold: Vec<FoldResult>,
    pub mean_ndcg: f64,
}

impl EvalReport {
    pub fn new(method_label: impl Into<String>, p: usize, per_fold: Vec<FoldResult>) -> Self {
        let mean_ndcg = if per_fold.is_empty() {
            0.0
        } else {
            per_fold.iter().map(|f| f.ndcg).sum::<f64>() / per_fold.len() as f64
        };
        EvalReport {
            method_label: method_label.into(),
            p,
            per_fold,
            mean_ndcg,
        }
    }

    pub fn metric_name(&self) -> String {
        format!("ndcg@{}", self.p)
    }

    /// `method task_lang ndcg@p` rows, one per fold, then a `mean` row.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("method\ttask_lang\t{}\n", self.metric_name());
        for f in &self.per_fold {
            let _ = writeln!(out, "{}\t{}\t{}", self.method_label, f.held_out_lang, f.ndcg);
        }
        let _ = writeln!(out, "{}\tmean\t{}", self.method_label, self.mean_ndcg);
        out
    }

    pub fn to_table(&self) -> String {
        let width = self
            .per_fold
            .iter()
            .map(|f| f.held_out_lang.len())
            .max()
            .unwrap_or(0)
            .max("mean".len())
            .max("task".len());
        let mut out = format!("{}\n", self.method_label);
        let _ = writeln!(out, "{:<width$}  {:>8}  top-3 predicted", "task", format!("NDCG@{}", self.p));
        for f in &self.per_fold {
            let top: Vec<&str> = f.predicted_ranking.iter().take(3).map(String::as_str).collect();
            let _ = writeln!(out, "{:<width$}  {:>8.4}  {}", f.held_out_lang, f.ndcg, top.join(" "));
        }
        let _ = writeln!(out, "{:<width$}  {:>8.4}", "mean", self.mean_ndcg);
        out
    }
}

/// Summary TSV of several reports: `method ndcg@p`.
pub fn summary_tsv(reports: &[EvalReport]) -> String {
    let metric = reports.first().map_or_else(|| "ndcg".to_owned(), EvalReport::metric_name);
    let mut out = format!("method\tmean_{metric}\n");
    for r in reports {
        let _ = writeln!(out, "{}\t{}", r.method_label, r.mean_ndcg);
    }
    out
}

fn fold_result(
    group: &RankingGroup,
    order: &[usize],
    relevances: &[u32],
    p: usize,
    training_languages: Vec<String>,
) -> FoldResult {
    let gold = group.gold_scores();
    let gold_order = ranking_order(&gold);
    FoldResult {
        held_out_lang: group.task_lang.clone(),
        ndcg: ndcg_of_order(order, relevances, p),
        predicted_ranking: order.iter().map(|&i| group.candidates[i].transfer_lang.clone()).collect(),
        gold_scores: order.iter().map(|&i| gold[i]).collect(),
        gold_ranking: gold_order.iter().map(|&i| group.candidates[i].transfer_lang.clone()).collect(),
        training_languages,
    }
}

/// Training data and test group for the fold that holds `held_out` out.
///
/// Fails with an invariant error if the held-out language leaks into the
/// training groups.
pub fn build_fold(dataset: &RankingDataset, held_out: &str) -> Result<(RankingDataset, RankingGroup)> {
    let test = dataset
        .group(held_out)
        .cloned()
        .ok_or_else(|| Error::invalid(format!("language '{held_out}' has no gold scores as a task language")))?;
    let training = dataset.without_language(held_out);
    for g in training.groups() {
        if g.task_lang == held_out || g.transfer_langs().any(|a| a == held_out) {
            return Err(Error::Invariant(format!(
                "held-out language '{held_out}' appears in training group '{}'",
                g.task_lang
            )));
        }
    }
    Ok((training, test))
}

/// Leave-one-language-out cross validation over the task languages.
///
/// For each language, a model is trained on every other task language
/// (with the held-out language removed from their candidates, labels
/// recomputed), then ranks all candidates of the held-out language.
pub fn leave_one_out(dataset: &RankingDataset, hp: &Hyperparams, label: &str) -> Result<EvalReport> {
    hp.validate()?;
    let languages = dataset.task_languages();
    if languages.len() < 3 {
        return Err(Error::invalid(format!(
            "leave-one-out needs at least 3 task languages, found {}",
            languages.len()
        )));
    }
    let task_set: BTreeSet<&str> = languages.iter().copied().collect();
    for g in dataset.groups() {
        if let Some(a) = g.transfer_langs().find(|a| !task_set.contains(a)) {
            return Err(Error::invalid(format!("language '{a}' has no gold scores as a task language")));
        }
    }

    let folds: Vec<FoldResult> = languages
        .par_iter()
        .map(|&lang| {
            let (training, test) = build_fold(dataset, lang)?;
            let model = train(&training, hp)?;
            let rows: Vec<FeatureRow> = test.candidates.iter().map(|c| c.features.clone()).collect();
            let scores = predict(&model, &rows)?;
            let relevances = assign_relevance(&test.gold_scores(), hp.gamma_max);
            let trained_on = training.task_languages().into_iter().map(str::to_owned).collect();
            Ok(fold_result(&test, &ranking_order(&scores), &relevances, hp.eval_p, trained_on))
        })
        .collect::<Result<_>>()?;

    if folds.len() != languages.len() {
        return Err(Error::Invariant(format!("{} languages produced {} folds", languages.len(), folds.len())));
    }
    Ok(EvalReport::new(label, hp.eval_p, folds))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortOrder {
    Ascending,
    Descending,
}

impl FromStr for SortOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asc" => Ok(SortOrder::Ascending),
            "desc" => Ok(SortOrder::Descending),
            other => Err(Error::invalid(format!("unknown sort order '{other}'"))),
        }
    }
}

/// The single-feature heuristics: overlaps and the size ratio rank
/// descending, the TTR distance and the six linguistic distances ascending.
pub fn baseline_registry() -> [(&'static str, SortOrder); 10] {
    use SortOrder::*;
    [
        ("o_w", Descending),
        ("o_sw", Descending),
        ("size_ratio", Descending),
        ("d_ttr", Ascending),
        ("d_gen", Ascending),
        ("d_syn", Ascending),
        ("d_fea", Ascending),
        ("d_pho", Ascending),
        ("d_inv", Ascending),
        ("d_geo", Ascending),
    ]
}

/// Candidate order by one feature; missing values rank last in either
/// direction and ties keep code order.
fn feature_order(group: &RankingGroup, feature: usize, order: SortOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..group.candidates.len()).collect();
    idx.sort_by(|&a, &b| {
        let va = group.candidates[a].features.get(feature);
        let vb = group.candidates[b].features.get(feature);
        let by_value = match (va, vb) {
            (Some(x), Some(y)) => match order {
                SortOrder::Ascending => x.total_cmp(&y),
                SortOrder::Descending => y.total_cmp(&x),
            },
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        by_value.then(a.cmp(&b))
    });
    idx
}

/// Ranks every task language's candidates by one feature. No training.
pub fn baseline_rank(dataset: &RankingDataset, feature: &str, order: SortOrder, p: usize) -> Result<EvalReport> {
    let f = dataset
        .schema()
        .index_of(feature)
        .ok_or_else(|| Error::Schema(format!("unknown feature '{feature}'")))?;
    let folds = dataset
        .groups()
        .iter()
        .map(|g| fold_result(g, &feature_order(g, f, order), &g.relevances(), p, Vec::new()))
        .collect();
    Ok(EvalReport::new(format!("baseline:{feature}"), p, folds))
}

/// Runs every registered baseline whose feature has at least one value.
pub fn run_baselines(dataset: &RankingDataset, p: usize) -> Result<Vec<EvalReport>> {
    baseline_registry()
        .into_iter()
        .filter(|(name, _)| {
            dataset.schema().index_of(name).is_some_and(|f| {
                dataset
                    .groups()
                    .iter()
                    .any(|g| g.candidates.iter().any(|c| c.features.get(f).is_some()))
            })
        })
        .map(|(name, order)| baseline_rank(dataset, name, order, p))
        .collect()
}

/// Best gold score among the top `k` predictions over the best gold score
/// overall. `k` is clamped to the number of candidates.
pub fn topk_best_ratio<S: AsRef<str>>(predicted_ranking: &[S], gold: &BTreeMap<String, f64>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if predicted_ranking.is_empty() {
        return Err(Error::invalid("empty ranking"));
    }
    let scores = predicted_ranking
        .iter()
        .map(|l| {
            let l = l.as_ref();
            match gold.get(l) {
                Some(&s) if s > 0.0 => Ok(s),
                Some(&s) => Err(Error::invalid(format!("gold score {s} for '{l}' is not positive"))),
                None => Err(Error::invalid(format!("no gold score for '{l}'"))),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(top_ratio(&scores, k))
}

fn top_ratio(gold_in_predicted_order: &[f64], k: usize) -> f64 {
    let k = k.min(gold_in_predicted_order.len());
    let best = gold_in_predicted_order.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_k = gold_in_predicted_order[..k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    best_k / best
}

/// Per-language top-`k` ratios of a report.
pub fn topk_per_language(report: &EvalReport, k: usize) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    report
        .per_fold
        .iter()
        .map(|f| {
            if f.gold_scores.is_empty() {
                return Err(Error::invalid(format!("fold '{}' has no candidates", f.held_out_lang)));
            }
            if let Some(s) = f.gold_scores.iter().find(|s| **s <= 0.0) {
                return Err(Error::invalid(format!(
                    "gold score {s} in fold '{}' is not positive",
                    f.held_out_lang
                )));
            }
            Ok((f.held_out_lang.clone(), top_ratio(&f.gold_scores, k)))
        })
        .collect()
}

/// `(K, average ratio over task languages)` for `K = 1..=max_k`.
pub fn topk_curve(report: &EvalReport, max_k: usize) -> Result<Vec<(usize, f64)>> {
    (1..=max_k)
        .map(|k| {
            let per = topk_per_language(report, k)?;
            Ok((k, per.iter().map(|(_, r)| r).sum::<f64>() / per.len().max(1) as f64))
        })
        .collect()
}

pub fn plot_data_csv(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("k,avg_ratio\n");
    for (k, r) in curve {
        let _ = writeln!(out, "{k},{r}");
    }
    out
}

/// One entry of a predicted ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub rank: usize,
    pub transfer_lang: String,
    pub score: Option<f64>,
    /// 1-based position in the gold ordering, when gold scores are known.
    pub true_rank: Option<usize>,
}

/// Predicted ranking of transfer languages for one task language.
///
/// TSV form: `task_lang rank transfer_lang score true_rank`, `NA` for
/// unknown values. Text form: `aze: tur (1), fas (3), hun (4)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub task_lang: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    /// Scores candidates with `model`; ties keep code order. When
    /// `gold` is given, each entry records its true rank.
    pub fn from_model(
        model: &GbdtModel,
        task_lang: &str,
        mut candidates: Vec<(String, FeatureRow)>,
        gold: Option<&BTreeMap<String, f64>>,
    ) -> Result<Self> {
        candidates.sort_by(|a, b| a.0.cmp(&b.0));
        let rows: Vec<FeatureRow> = candidates.iter().map(|(_, r)| r.clone()).collect();
        let scores = predict(model, &rows)?;
        let true_ranks = match gold {
            Some(gold) => {
                let g = candidates
                    .iter()
                    .map(|(l, _)| {
                        gold.get(l)
                            .copied()
                            .ok_or_else(|| Error::invalid(format!("no gold score for ({task_lang}, {l})")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let mut ranks = vec![0; g.len()];
                for (pos, i) in ranking_order(&g).into_iter().enumerate() {
                    ranks[i] = pos + 1;
                }
                Some(ranks)
            }
            None => None,
        };
        let entries = ranking_order(&scores)
            .into_iter()
            .enumerate()
            .map(|(pos, i)| RankedEntry {
                rank: pos + 1,
                transfer_lang: candidates[i].0.clone(),
                score: Some(scores[i]),
                true_rank: true_ranks.as_ref().map(|r| r[i]),
            })
            .collect();
        Ok(RankedList {
            task_lang: task_lang.to_owned(),
            entries,
        })
    }

    pub fn render_text(&self, top: usize) -> String {
        let items: Vec<String> = self
            .entries
            .iter()
            .take(top)
            .map(|e| match e.true_rank {
                Some(r) => format!("{} ({r})", e.transfer_lang),
                None => e.transfer_lang.clone(),
            })
            .collect();
        format!("{}: {}\n", self.task_lang, items.join(", "))
    }
}

pub const RANKED_HEADER: &str = "task_lang\trank\ttransfer_lang\tscore\ttrue_rank";

pub fn ranked_lists_to_tsv(lists: &[RankedList]) -> String {
    let mut out = format!("{RANKED_HEADER}\n");
    for l in lists {
        for e in &l.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                l.task_lang,
                e.rank,
                e.transfer_lang,
                crate::dataset::format_value(e.score),
                e.true_rank.map_or_else(|| "NA".to_owned(), |r| r.to_string())
            );
        }
    }
    out
}

pub fn parse_ranked_lists(text: &str, origin: &str) -> Result<Vec<RankedList>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RANKED_HEADER => {}
        _ => return Err(Error::parse(origin, 1, format!("expected header '{RANKED_HEADER}'"))),
    }
    let mut lists: Vec<RankedList> = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::parse(origin, lineno, format!("expected 5 columns, found {}", f.len())));
        }
        let rank: usize = f[1]
            .parse()
            .map_err(|_| Error::parse(origin, lineno, format!("invalid rank '{}'", f[1])))?;
        let score = match f[3] {
            "NA" => None,
            s => Some(s.parse().map_err(|_| Error::parse(origin, lineno, format!("invalid score '{s}'")))?),
        };
        let true_rank = match f[4] {
            "NA" => None,
            s => Some(s.parse().map_err(|_| Error::parse(origin, lineno, format!("invalid true rank '{s}'")))?),
        };
        if lists.last().is_none_or(|l| l.task_lang != f[0]) {
            if lists.iter().any(|l| l.task_lang == f[0]) {
                return Err(Error::parse(origin, lineno, format!("rows for '{}' are not contiguous", f[0])));
            }
            lists.push(RankedList {
                task_lang: f[0].to_owned(),
                entries: Vec::new(),
            });
        }
        let list = lists.last_mut().expect("just pushed");
        if rank != list.entries.len() + 1 {
            return Err(Error::parse(origin, lineno, format!("rank {rank} out of sequence")));
        }
        list.entries.push(RankedEntry {
            rank,
            transfer_lang: f[2].to_owned(),
            score,
            true_rank,
        });
    }
    Ok(lists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetRecord, FeatureSchema};

    fn dataset(rows: &[(&str, &str, f64, Option<f64>)]) -> RankingDataset {
        let schema = FeatureSchema::new(vec!["o_w".into()]).unwrap();
        let records = rows
            .iter()
            .map(|(t, a, g, v)| DatasetRecord {
                task_lang: t.to_string(),
                transfer_lang: a.to_string(),
                gold_score: *g,
                features: FeatureRow::new(vec![*v]).unwrap(),
            })
            .collect();
        RankingDataset::from_records(schema, records, 10).unwrap()
    }

    #[test]
    fn topk_examples() {
        let gold: BTreeMap<String, f64> = [("a", 10.0), ("b", 8.0), ("c", 6.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(topk_best_ratio(&["b", "c", "a"], &gold, 2).unwrap(), 0.8);
        assert_eq!(topk_best_ratio(&["b", "c", "a"], &gold, 3).unwrap(), 1.0);
        assert_eq!(topk_best_ratio(&["b", "c", "a"], &gold, 30).unwrap(), 1.0);
        assert_eq!(topk_best_ratio(&["a", "c", "b"], &gold, 1).unwrap(), 1.0);
        assert!(topk_best_ratio(&["a"], &gold, 0).is_err());
        let mut bad = gold.clone();
        bad.insert("a".into(), -1.0);
        assert!(topk_best_ratio(&["a", "b"], &bad, 1).is_err());
    }

    #[test]
    fn baseline_equal_to_gold_is_perfect() {
        let ds = dataset(&[
            ("x", "a", 3.0, Some(3.0)),
            ("x", "b", 2.0, Some(2.0)),
            ("x", "c", 1.0, Some(1.0)),
            ("y", "a", 1.0, Some(1.0)),
            ("y", "b", 5.0, Some(5.0)),
        ]);
        let r = baseline_rank(&ds, "o_w", SortOrder::Descending, 3).unwrap();
        assert!(r.per_fold.iter().all(|f| f.ndcg == 1.0));
        assert!(baseline_rank(&ds, "nope", SortOrder::Descending, 3).is_err());
    }

    #[test]
    fn missing_values_rank_last_and_constants_keep_code_order() {
        let ds = dataset(&[
            ("x", "a", 1.0, None),
            ("x", "b", 2.0, Some(0.1)),
            ("x", "c", 3.0, Some(0.1)),
        ]);
        for order in [SortOrder::Ascending, SortOrder::Descending] {
            let r = baseline_rank(&ds, "o_w", order, 3).unwrap();
            assert_eq!(r.per_fold[0].predicted_ranking, ["b", "c", "a"]);
        }
    }

    #[test]
    fn registry_lists_ten_baselines() {
        let names: Vec<&str> = baseline_registry().iter().map(|(n, _)| *n).collect();
        assert_eq!(
            names,
            ["o_w", "o_sw", "size_ratio", "d_ttr", "d_gen", "d_syn", "d_fea", "d_pho", "d_inv", "d_geo"]
        );
    }

    #[test]
    fn loo_rejects_small_or_incomplete_data() {
        let ds = dataset(&[("x", "y", 1.0, Some(1.0)), ("y", "x", 1.0, Some(1.0))]);
        assert!(leave_one_out(&ds, &Hyperparams::default(), "m").is_err());
        let ds = dataset(&[
            ("x", "y", 1.0, Some(1.0)),
            ("y", "x", 1.0, Some(1.0)),
            ("z", "x", 1.0, Some(1.0)),
            ("z", "w", 1.0, Some(1.0)),
        ]);
        let err = leave_one_out(&ds, &Hyperparams::default(), "m").unwrap_err();
        assert!(err.to_string().contains("'w'"), "{err}");
    }

    #[test]
    fn ranked_list_round_trip_and_render() {
        let text = format!("{RANKED_HEADER}\naze\t1\ttur\t0.5\t1\naze\t2\tfas\tNA\t3\n");
        let lists = parse_ranked_lists(&text, "t").unwrap();
        assert_eq!(lists[0].render_text(3), "aze: tur (1), fas (3)\n");
        assert_eq!(ranked_lists_to_tsv(&lists), text);
        assert!(parse_ranked_lists("bad\n", "t").is_err());
    }

    #[test]
    fn report_mean_and_header() {
        let ds = dataset(&[("x", "a", 3.0, Some(1.0)), ("x", "b", 2.0, Some(2.0))]);
        let r = baseline_rank(&ds, "o_w", SortOrder::Descending, 3).unwrap();
        assert!(r.to_tsv().starts_with("method\ttask_lang\tndcg@3\n"));
        assert_eq!(r.mean_ndcg, r.per_fold[0].ndcg);
    }
}
