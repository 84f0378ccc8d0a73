//! Feature rows, gold scores and ranking groups, plus their TSV formats.
//!
//! All tables are tab-separated with a header row; missing feature values
//! are written as `NA`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::ranker::assign_relevance;

pub const MISSING: &str = "NA";

/// Ordered, distinct feature names shared by rows and models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSchema(Vec<String>);

impl FeatureSchema {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for n in &names {
            if n.is_empty() || n.contains(['\t', '\n']) {
                return Err(Error::Schema(format!("invalid feature name '{n}'")));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::Schema(format!("duplicate feature '{n}'")));
            }
        }
        Ok(FeatureSchema(names))
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    pub fn ensure_same(&self, other: &FeatureSchema) -> Result<()> {
        if self != other {
            return Err(Error::Schema(format!(
                "expected features [{}], found [{}]",
                self.0.join(", "),
                other.0.join(", ")
            )));
        }
        Ok(())
    }
}

/// Feature values for one pair, aligned to a [`FeatureSchema`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    values: Vec<Option<f64>>,
}

impl FeatureRow {
    pub fn new(values: Vec<Option<f64>>) -> Result<Self> {
        if let Some(v) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("feature value {v} is not finite")));
        }
        Ok(FeatureRow { values })
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<f64> {
        self.values.get(idx).copied().flatten()
    }
}

pub(crate) fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => MISSING.to_owned(),
    }
}

fn parse_value(s: &str, origin: &str, line: usize) -> Result<Option<f64>> {
    if s == MISSING {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(origin, line, format!("invalid number '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(origin, line, format!("non-finite value '{s}'")));
    }
    Ok(Some(v))
}

fn header_features(header: &str, fixed: &[&str], origin: &str) -> Result<FeatureSchema> {
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < fixed.len() || cols[..fixed.len()] != *fixed {
        return Err(Error::parse(origin, 1, format!("header must start with '{}'", fixed.join("\\t"))));
    }
    FeatureSchema::new(cols[fixed.len()..].iter().map(|s| s.to_string()).collect())
}

/// Feature vectors of (task, transfer) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub schema: FeatureSchema,
    pub rows: Vec<PairFeatures>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    pub task_lang: String,
    pub transfer_lang: String,
    pub features: FeatureRow,
}

impl FeatureTable {
    pub fn new(schema: FeatureSchema) -> Self {
        FeatureTable {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, task_lang: &str, transfer_lang: &str, features: FeatureRow) -> Result<()> {
        if features.len() != self.schema.len() {
            return Err(Error::Schema(format!(
                "row for ({task_lang}, {transfer_lang}) has {} values, schema has {}",
                features.len(),
                self.schema.len()
            )));
        }
        self.rows.push(PairFeatures {
            task_lang: task_lang.to_owned(),
            transfer_lang: transfer_lang.to_owned(),
            features,
        });
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
        let schema = header_features(header, &["task_lang", "transfer_lang"], origin)?;
        let mut table = FeatureTable::new(schema);
        let mut seen = BTreeSet::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 + table.schema.len() {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected {} columns, found {}", 2 + table.schema.len(), fields.len()),
                ));
            }
            if !seen.insert((fields[0], fields[1])) {
                return Err(Error::parse(origin, lineno, format!("duplicate pair ({}, {})", fields[0], fields[1])));
            }
            let values = fields[2..]
                .iter()
                .map(|s| parse_value(s, origin, lineno))
                .collect::<Result<Vec<_>>>()?;
            table.push(fields[0], fields[1], FeatureRow::new(values)?)?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        FeatureTable::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("task_lang\ttransfer_lang");
        for n in self.schema.names() {
            out.push('\t');
            out.push_str(n);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.task_lang);
            out.push('\t');
            out.push_str(&r.transfer_lang);
            for v in r.features.values() {
                out.push('\t');
                out.push_str(&format_value(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Gold transfer scores `c(t, a)`, keyed by (task, transfer).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoldScores {
    scores: BTreeMap<(String, String), f64>,
}

impl GoldScores {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task: &str, transfer: &str, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::invalid(format!("gold score for ({task}, {transfer}) is not finite")));
        }
        if self.scores.insert((task.to_owned(), transfer.to_owned()), score).is_some() {
            return Err(Error::invalid(format!("duplicate gold score for ({task}, {transfer})")));
        }
        Ok(())
    }

    pub fn get(&self, task: &str, transfer: &str) -> Option<f64> {
        self.scores.get(&(task.to_owned(), transfer.to_owned())).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.scores.iter().map(|((t, a), s)| (t.as_str(), a.as_str(), *s))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// TSV rows `task_lang transfer_lang score`; a literal header row is optional.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut gold = GoldScores::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.is_empty() || (lineno == 1 && line.starts_with("task_lang\t")) {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(origin, lineno, format!("expected 3 columns, found {}", fields.len())));
            }
            let score = parse_value(fields[2], origin, lineno)?
                .ok_or_else(|| Error::parse(origin, lineno, "gold score cannot be missing"))?;
            gold.insert(fields[0], fields[1], score)
                .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        }
        Ok(gold)
    }

    pub fn load(path: &Path) -> Result<Self> {
        GoldScores::parse(&read_to_string(path)?, &path.display().to_string())
    }
}

/// One labeled pair of a ranking dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub task_lang: String,
    pub transfer_lang: String,
    pub gold_score: f64,
    pub features: FeatureRow,
}

/// Joins features and gold scores; every pair must be present in both.
pub fn join(features: &FeatureTable, gold: &GoldScores) -> Result<Vec<DatasetRecord>> {
    let mut unmatched: Vec<String> = Vec::new();
    let mut records = Vec::with_capacity(features.rows.len());
    let mut feature_pairs = BTreeSet::new();
    for r in &features.rows {
        feature_pairs.insert((r.task_lang.as_str(), r.transfer_lang.as_str()));
        match gold.get(&r.task_lang, &r.transfer_lang) {
            Some(gold_score) => records.push(DatasetRecord {
                task_lang: r.task_lang.clone(),
                transfer_lang: r.transfer_lang.clone(),
                gold_score,
                features: r.features.clone(),
            }),
            None => unmatched.push(format!("{}/{} (features only)", r.task_lang, r.transfer_lang)),
        }
    }
    for (t, a, _) in gold.iter() {
        if !feature_pairs.contains(&(t, a)) {
            unmatched.push(format!("{t}/{a} (gold only)"));
        }
    }
    if !unmatched.is_empty() {
        return Err(Error::invalid(format!("unmatched pairs: {}", unmatched.join(", "))));
    }
    Ok(records)
}

/// Reads a dataset TSV: `task_lang transfer_lang gold_score <features>`.
pub fn parse_dataset(text: &str, origin: &str) -> Result<(FeatureSchema, Vec<DatasetRecord>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
    let schema = header_features(header, &["task_lang", "transfer_lang", "gold_score"], origin)?;
    let mut records = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 + schema.len() {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected {} columns, found {}", 3 + schema.len(), fields.len()),
            ));
        }
        let gold_score = parse_value(fields[2], origin, lineno)?
            .ok_or_else(|| Error::parse(origin, lineno, "gold score cannot be missing"))?;
        let values = fields[3..]
            .iter()
            .map(|s| parse_value(s, origin, lineno))
            .collect::<Result<Vec<_>>>()?;
        records.push(DatasetRecord {
            task_lang: fields[0].to_owned(),
            transfer_lang: fields[1].to_owned(),
            gold_score,
            features: FeatureRow::new(values)?,
        });
    }
    Ok((schema, records))
}

pub fn dataset_to_tsv(schema: &FeatureSchema, records: &[DatasetRecord]) -> String {
    let mut out = String::from("task_lang\ttransfer_lang\tgold_score");
    for n in schema.names() {
        out.push('\t');
        out.push_str(n);
    }
    out.push('\n');
    for r in records {
        let _ = write!(out, "{}\t{}\t{}", r.task_lang, r.transfer_lang, r.gold_score);
        for v in r.features.values() {
            out.push('\t');
            out.push_str(&format_value(*v));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub transfer_lang: String,
    pub features: FeatureRow,
    pub gold_score: f64,
    pub relevance: u32,
}

/// All candidates for one task language, sorted by transfer-language code.
///
/// Because candidates are kept in code order, index order is the
/// lexicographic tie-break order used by every ranking in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingGroup {
    pub task_lang: String,
    pub candidates: Vec<Candidate>,
}

impl RankingGroup {
    pub fn gold_scores(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.gold_score).collect()
    }

    pub fn relevances(&self) -> Vec<u32> {
        self.candidates.iter().map(|c| c.relevance).collect()
    }

    pub fn transfer_langs(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.transfer_lang.as_str())
    }

    fn relabel(&mut self, gamma_max: u32) {
        let labels = assign_relevance(&self.gold_scores(), gamma_max);
        for (c, l) in self.candidates.iter_mut().zip(labels) {
            c.relevance = l;
        }
    }
}

/// Ranking groups keyed by task language, in code order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingDataset {
    schema: FeatureSchema,
    gamma_max: u32,
    groups: Vec<RankingGroup>,
}

impl RankingDataset {
    pub fn from_records(schema: FeatureSchema, records: Vec<DatasetRecord>, gamma_max: u32) -> Result<Self> {
        if gamma_max < 1 {
            return Err(Error::invalid("gamma_max must be at least 1"));
        }
        let mut by_task: BTreeMap<String, BTreeMap<String, Candidate>> = BTreeMap::new();
        for r in records {
            if r.features.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "row ({}, {}) has {} values, schema has {}",
                    r.task_lang,
                    r.transfer_lang,
                    r.features.len(),
                    schema.len()
                )));
            }
            if !r.gold_score.is_finite() {
                return Err(Error::invalid(format!(
                    "gold score for ({}, {}) is not finite",
                    r.task_lang, r.transfer_lang
                )));
            }
            if r.task_lang == r.transfer_lang {
                return Err(Error::invalid(format!("task language '{}' listed as its own candidate", r.task_lang)));
            }
            let group = by_task.entry(r.task_lang.clone()).or_default();
            let candidate = Candidate {
                transfer_lang: r.transfer_lang.clone(),
                features: r.features,
                gold_score: r.gold_score,
                relevance: 0,
            };
            if group.insert(r.transfer_lang.clone(), candidate).is_some() {
                return Err(Error::invalid(format!(
                    "duplicate candidate '{}' for task '{}'",
                    r.transfer_lang, r.task_lang
                )));
            }
        }
        let groups = by_task
            .into_iter()
            .map(|(task_lang, cands)| {
                let mut g = RankingGroup {
                    task_lang,
                    candidates: cands.into_values().collect(),
                };
                g.relabel(gamma_max);
                g
            })
            .collect();
        Ok(RankingDataset {
            schema,
            gamma_max,
            groups,
        })
    }

    pub fn from_groups(schema: FeatureSchema, groups: Vec<RankingGroup>, gamma_max: u32) -> Result<Self> {
        let records = groups
            .into_iter()
            .flat_map(|g| {
                let task = g.task_lang;
                g.candidates.into_iter().map(move |c| DatasetRecord {
                    task_lang: task.clone(),
                    transfer_lang: c.transfer_lang,
                    gold_score: c.gold_score,
                    features: c.features,
                })
            })
            .collect();
        RankingDataset::from_records(schema, records, gamma_max)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn gamma_max(&self) -> u32 {
        self.gamma_max
    }

    pub fn groups(&self) -> &[RankingGroup] {
        &self.groups
    }

    pub fn group(&self, task_lang: &str) -> Option<&RankingGroup> {
        self.groups.iter().find(|g| g.task_lang == task_lang)
    }

    pub fn task_languages(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.task_lang.as_str()).collect()
    }

    pub fn num_rows(&self) -> usize {
        self.groups.iter().map(|g| g.candidates.len()).sum()
    }

    pub fn records(&self) -> Vec<DatasetRecord> {
        self.groups
            .iter()
            .flat_map(|g| {
                g.candidates.iter().map(move |c| DatasetRecord {
                    task_lang: g.task_lang.clone(),
                    transfer_lang: c.transfer_lang.clone(),
                    gold_score: c.gold_score,
                    features: c.features.clone(),
                })
            })
            .collect()
    }

    /// Recomputes relevance labels under a different cap.
    pub fn with_gamma_max(mut self, gamma_max: u32) -> Result<Self> {
        if gamma_max < 1 {
            return Err(Error::invalid("gamma_max must be at least 1"));
        }
        self.gamma_max = gamma_max;
        for g in &mut self.groups {
            g.relabel(gamma_max);
        }
        Ok(self)
    }

    /// Drops `lang` everywhere (as a task and as a candidate) and relabels
    /// the remaining candidates from their gold scores.
    pub fn without_language(&self, lang: &str) -> RankingDataset {
        let groups = self
            .groups
            .iter()
            .filter(|g| g.task_lang != lang)
            .map(|g| {
                let mut g = RankingGroup {
                    task_lang: g.task_lang.clone(),
                    candidates: g.candidates.iter().filter(|c| c.transfer_lang != lang).cloned().collect(),
                };
                g.relabel(self.gamma_max);
                g
            })
            .filter(|g| !g.candidates.is_empty())
            .collect();
        RankingDataset {
            schema: self.schema.clone(),
            gamma_max: self.gamma_max,
            groups,
        }
    }

    pub fn to_tsv(&self) -> String {
        dataset_to_tsv(&self.schema, &self.records())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec!["f1".into(), "f2".into()]).unwrap()
    }

    fn rec(t: &str, a: &str, g: f64, v: [Option<f64>; 2]) -> DatasetRecord {
        DatasetRecord {
            task_lang: t.into(),
            transfer_lang: a.into(),
            gold_score: g,
            features: FeatureRow::new(v.to_vec()).unwrap(),
        }
    }

    #[test]
    fn feature_table_round_trips_with_missing() {
        let text = "task_lang\ttransfer_lang\tf1\tf2\naze\ttur\t0.25\tNA\n";
        let t = FeatureTable::parse(text, "x").unwrap();
        assert_eq!(t.rows[0].features.values(), &[Some(0.25), None]);
        assert_eq!(t.to_tsv(), text);
    }

    #[test]
    fn feature_table_rejects_bad_rows() {
        assert!(FeatureTable::parse("task_lang\ttransfer_lang\tf1\na\tb\n", "x").is_err());
        assert!(FeatureTable::parse("task_lang\ttransfer_lang\tf1\na\tb\tNaN\n", "x").is_err());
        assert!(FeatureTable::parse("lang\tf1\n", "x").is_err());
        assert!(FeatureTable::parse("task_lang\ttransfer_lang\tf1\tf1\n", "x").is_err());
    }

    #[test]
    fn join_reports_unmatched_pairs() {
        let mut ft = FeatureTable::new(schema());
        ft.push("a", "b", FeatureRow::new(vec![Some(1.0), None]).unwrap()).unwrap();
        ft.push("a", "c", FeatureRow::new(vec![Some(1.0), None]).unwrap()).unwrap();
        let mut gold = GoldScores::new();
        gold.insert("a", "b", 3.0).unwrap();
        gold.insert("b", "a", 3.0).unwrap();
        let err = join(&ft, &gold).unwrap_err().to_string();
        assert!(err.contains("a/c (features only)"), "{err}");
        assert!(err.contains("b/a (gold only)"), "{err}");
        gold = {
            let mut g = GoldScores::new();
            g.insert("a", "b", 3.0).unwrap();
            g.insert("a", "c", 1.0).unwrap();
            g
        };
        assert_eq!(join(&ft, &gold).unwrap().len(), 2);
    }

    #[test]
    fn groups_are_sorted_and_labeled() {
        let ds = RankingDataset::from_records(
            schema(),
            vec![
                rec("x", "c", 1.0, [None, None]),
                rec("x", "a", 5.0, [None, None]),
                rec("x", "b", 3.0, [None, None]),
            ],
            10,
        )
        .unwrap();
        let g = &ds.groups()[0];
        assert_eq!(g.transfer_langs().collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(g.relevances(), [10, 9, 8]);
    }

    #[test]
    fn rejects_self_pairs_and_duplicates() {
        assert!(RankingDataset::from_records(schema(), vec![rec("x", "x", 1.0, [None, None])], 10).is_err());
        let dup = vec![rec("x", "a", 1.0, [None, None]), rec("x", "a", 2.0, [None, None])];
        assert!(RankingDataset::from_records(schema(), dup, 10).is_err());
    }

    #[test]
    fn without_language_relabels() {
        let ds = RankingDataset::from_records(
            schema(),
            vec![
                rec("x", "a", 5.0, [None, None]),
                rec("x", "b", 3.0, [None, None]),
                rec("a", "x", 1.0, [None, None]),
            ],
            10,
        )
        .unwrap();
        let r = ds.without_language("a");
        assert_eq!(r.task_languages(), ["x"]);
        assert_eq!(r.groups()[0].relevances(), [10]);
    }

    #[test]
    fn gold_parse() {
        let g = GoldScores::parse("task_lang\ttransfer_lang\tscore\naze\ttur\t12.5\n", "g").unwrap();
        assert_eq!(g.get("aze", "tur"), Some(12.5));
        assert!(GoldScores::parse("aze\ttur\t1\naze\ttur\t2\n", "g").is_err());
    }
}
