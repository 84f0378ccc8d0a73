//! Tokenized corpora and the statistics computed directly on them.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{read_to_string, Error, Result};

/// Tokenized sentences (or gazetteer entries) for one language.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    language_code: String,
    sentences: Vec<Vec<String>>,
    token_count: usize,
    type_set: BTreeSet<String>,
}

/// Unit in which dataset size is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeUnit {
    /// Sentences of a parallel or treebank corpus.
    Sentences,
    /// Entries of a bilingual entity gazetteer.
    Entities,
}

impl Corpus {
    pub fn new(language_code: impl Into<String>, sentences: Vec<Vec<String>>) -> Result<Self> {
        let language_code = language_code.into();
        if language_code.trim().is_empty() {
            return Err(Error::invalid("corpus language code is empty"));
        }
        let token_count = sentences.iter().map(Vec::len).sum();
        let type_set = sentences.iter().flatten().cloned().collect();
        Ok(Corpus {
            language_code,
            sentences,
            token_count,
            type_set,
        })
    }

    /// Parses pre-tokenized text: one sentence per line, whitespace-separated
    /// tokens. Blank lines are skipped. No case or punctuation normalization
    /// is applied.
    pub fn from_text(language_code: impl Into<String>, text: &str) -> Result<Self> {
        let sentences = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect();
        Corpus::new(language_code, sentences)
    }

    /// Parses a gazetteer: every non-blank line is one entity, kept whole as
    /// a single token so that overlap counts exact entity matches.
    pub fn from_gazetteer(language_code: impl Into<String>, text: &str) -> Result<Self> {
        let sentences = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| vec![l.to_owned()])
            .collect();
        Corpus::new(language_code, sentences)
    }

    pub fn read(language_code: impl Into<String>, path: &Path) -> Result<Self> {
        Corpus::from_text(language_code, &read_to_string(path)?)
    }

    pub fn read_gazetteer(language_code: impl Into<String>, path: &Path) -> Result<Self> {
        Corpus::from_gazetteer(language_code, &read_to_string(path)?)
    }

    pub fn language_code(&self) -> &str {
        &self.language_code
    }

    pub fn sentences(&self) -> &[Vec<String>] {
        &self.sentences
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn type_set(&self) -> &BTreeSet<String> {
        &self.type_set
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    pub fn size(&self, unit: SizeUnit) -> usize {
        match unit {
            SizeUnit::Sentences | SizeUnit::Entities => self.sentences.len(),
        }
    }
}

/// Distinct types divided by tokens.
pub fn type_token_ratio(corpus: &Corpus) -> Result<f64> {
    if corpus.token_count == 0 {
        return Err(Error::invalid(format!(
            "type-token ratio undefined for empty corpus '{}'",
            corpus.language_code
        )));
    }
    Ok(corpus.type_set.len() as f64 / corpus.token_count as f64)
}

/// `(1 - t_tf / t_tk)^2`. Asymmetric in its arguments.
pub fn ttr_distance(transfer_ttr: f64, task_ttr: f64) -> Result<f64> {
    if !transfer_ttr.is_finite() || !task_ttr.is_finite() || task_ttr <= 0.0 {
        return Err(Error::invalid(format!(
            "TTR distance needs finite ratios with a positive task TTR, got {transfer_ttr} and {task_ttr}"
        )));
    }
    let d = 1.0 - transfer_ttr / task_ttr;
    Ok(d * d)
}

/// `|A ∩ B| / (|A| + |B|)`, bounded by 0.5.
pub(crate) fn set_overlap(a: &BTreeSet<String>, b: &BTreeSet<String>) -> Option<f64> {
    let total = a.len() + b.len();
    if total == 0 || a.is_empty() || b.is_empty() {
        return None;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let shared = small.iter().filter(|t| large.contains(*t)).count();
    Some(shared as f64 / total as f64)
}

/// Word-type overlap between the two corpora.
pub fn word_overlap(transfer: &Corpus, task: &Corpus) -> Result<f64> {
    for c in [transfer, task] {
        if c.token_count == 0 {
            return Err(Error::invalid(format!(
                "word overlap undefined for empty corpus '{}'",
                c.language_code
            )));
        }
    }
    set_overlap(&transfer.type_set, &task.type_set)
        .ok_or_else(|| Error::invalid("word overlap over empty type sets"))
}

/// Dataset sizes `(s_tf, s_tk, s_tf / s_tk)`.
pub fn size_features(transfer: &Corpus, task: &Corpus, unit: SizeUnit) -> Result<(f64, f64, f64)> {
    let s_tf = transfer.size(unit) as f64;
    let s_tk = task.size(unit) as f64;
    if s_tk == 0.0 {
        return Err(Error::invalid(format!(
            "task corpus '{}' is empty; size ratio undefined",
            task.language_code
        )));
    }
    Ok((s_tf, s_tk, s_tf / s_tk))
}
