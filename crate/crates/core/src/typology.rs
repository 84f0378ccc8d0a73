//! Typological feature vectors, precomputed distance tables, and the six
//! language-pair distances derived from them.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::RwLock;

use crate::error::{read_to_string, Error, Result};

/// One entry of a binary typological vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trait {
    Absent,
    Present,
    Missing,
}

impl Trait {
    fn parse(s: &str) -> Option<Trait> {
        match s {
            "0" => Some(Trait::Absent),
            "1" => Some(Trait::Present),
            "--" | "NA" => Some(Trait::Missing),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Trait::Absent => "0",
            Trait::Present => "1",
            Trait::Missing => "--",
        }
    }

    fn value(self) -> Option<f64> {
        match self {
            Trait::Absent => Some(0.0),
            Trait::Present => Some(1.0),
            Trait::Missing => None,
        }
    }
}

/// The five vector families of the typological database.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VectorKind {
    Syntax,
    Phonology,
    Inventory,
    Family,
    Geography,
}

impl VectorKind {
    pub const ALL: [VectorKind; 5] = [
        VectorKind::Syntax,
        VectorKind::Phonology,
        VectorKind::Inventory,
        VectorKind::Family,
        VectorKind::Geography,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VectorKind::Syntax => "syntax",
            VectorKind::Phonology => "phonology",
            VectorKind::Inventory => "inventory",
            VectorKind::Family => "family",
            VectorKind::Geography => "geography",
        }
    }
}

/// Per-language binary vectors over a shared, ordered feature list.
#[derive(Debug, Clone, PartialEq)]
pub struct TypologyVectorStore {
    kind: VectorKind,
    feature_names: Vec<String>,
    languages: Vec<String>,
    vectors: HashMap<String, Vec<Trait>>,
}

impl TypologyVectorStore {
    /// Parses a TSV whose header is `lang <feature names...>`.
    pub fn parse(text: &str, kind: VectorKind, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "missing header row"))?;
        let mut cols = header.split('\t');
        if cols.next() != Some("lang") {
            return Err(Error::parse(origin, 1, "header must start with 'lang'"));
        }
        let feature_names: Vec<String> = cols.map(str::to_owned).collect();
        if feature_names.is_empty() {
            return Err(Error::parse(origin, 1, "header names no features"));
        }

        let mut languages = Vec::new();
        let mut vectors = HashMap::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let lang = fields.next().unwrap_or_default();
            if lang.is_empty() {
                return Err(Error::parse(origin, lineno, "empty language code"));
            }
            let entries: Vec<&str> = fields.collect();
            if entries.len() != feature_names.len() {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected {} entries, found {}", feature_names.len(), entries.len()),
                ));
            }
            let vector = entries
                .iter()
                .map(|e| {
                    Trait::parse(e).ok_or_else(|| Error::parse(origin, lineno, format!("invalid entry '{e}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            if vector.iter().all(|t| *t == Trait::Missing) {
                return Err(Error::parse(origin, lineno, format!("'{lang}' has no observed features")));
            }
            if vectors.insert(lang.to_owned(), vector).is_some() {
                return Err(Error::parse(origin, lineno, format!("duplicate language '{lang}'")));
            }
            languages.push(lang.to_owned());
        }
        Ok(TypologyVectorStore {
            kind,
            feature_names,
            languages,
            vectors,
        })
    }

    pub fn load(path: &Path, kind: VectorKind) -> Result<Self> {
        TypologyVectorStore::parse(&read_to_string(path)?, kind, &path.display().to_string())
    }

    /// Writes the store back in load order; missing entries become `--`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lang");
        for name in &self.feature_names {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for lang in &self.languages {
            out.push_str(lang);
            for t in &self.vectors[lang] {
                out.push('\t');
                out.push_str(t.as_str());
            }
            out.push('\n');
        }
        out
    }

    pub fn kind(&self) -> VectorKind {
        self.kind
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn get(&self, lang: &str) -> Option<&[Trait]> {
        self.vectors.get(lang).map(Vec::as_slice)
    }

    pub fn contains(&self, lang: &str) -> bool {
        self.vectors.contains_key(lang)
    }
}

/// Cosine distance over the dimensions observed in both vectors.
///
/// Returns `None` when the shared support is empty or either restriction is
/// the zero vector.
pub fn cosine_distance(a: &[Trait], b: &[Trait]) -> Option<f64> {
    let pairs = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some((x.value()?, y.value()?)));
    cosine_over(pairs)
}

fn cosine_over(pairs: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    // sqrt(na * nb) is exact for identical binary vectors, keeping d(x, x) = 0.
    let sim = dot / (na * nb).sqrt();
    Some((1.0 - sim).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Genetic,
    Geographic,
}

impl DistanceKind {
    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Genetic => "genetic",
            DistanceKind::Geographic => "geographic",
        }
    }
}

fn unordered<'a>(a: &'a str, b: &'a str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

/// Symmetric table of precomputed distances in `[0, 1]`.
///
/// File format: TSV rows `lang_a lang_b distance`. Lines starting with `#`
/// carry provenance and are ignored, as is an optional literal header row.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedDistanceTable {
    kind: DistanceKind,
    entries: HashMap<(String, String), f64>,
    languages: HashSet<String>,
}

impl PrecomputedDistanceTable {
    pub fn new(kind: DistanceKind) -> Self {
        PrecomputedDistanceTable {
            kind,
            entries: HashMap::new(),
            languages: HashSet::new(),
        }
    }

    pub fn insert(&mut self, a: &str, b: &str, distance: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&distance) {
            return Err(Error::invalid(format!(
                "{} distance {distance} for ({a}, {b}) is outside [0, 1]",
                self.kind.name()
            )));
        }
        let key = unordered(a, b);
        if let Some(prev) = self.entries.get(&key).filter(|p| **p != distance) {
            return Err(Error::invalid(format!(
                "conflicting {} distances for ({a}, {b}): {prev} and {distance}",
                self.kind.name()
            )));
        }
        self.languages.insert(a.to_owned());
        self.languages.insert(b.to_owned());
        self.entries.insert(key, distance);
        Ok(())
    }

    pub fn parse(text: &str, kind: DistanceKind, origin: &str) -> Result<Self> {
        let mut table = PrecomputedDistanceTable::new(kind);
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') || line == "lang_a\tlang_b\tdistance" {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(origin, lineno, format!("expected 3 columns, found {}", fields.len())));
            }
            let d: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(origin, lineno, format!("invalid distance '{}'", fields[2])))?;
            table
                .insert(fields[0], fields[1], d)
                .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load(path: &Path, kind: DistanceKind) -> Result<Self> {
        PrecomputedDistanceTable::parse(&read_to_string(path)?, kind, &path.display().to_string())
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    /// Self-pairs resolve to 0 when the language is known to the table.
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        if a == b && self.knows(a) {
            return Some(0.0);
        }
        self.entries.get(&unordered(a, b)).copied()
    }

    pub fn knows(&self, lang: &str) -> bool {
        self.languages.contains(lang)
    }

    pub fn to_tsv(&self) -> String {
        let mut keys: Vec<_> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            let _ = writeln!(out, "{}\t{}\t{}", k.0, k.1, self.entries[k]);
        }
        out
    }
}

/// The six dataset-independent distances for one language pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinguisticDistances {
    pub d_gen: Option<f64>,
    pub d_syn: Option<f64>,
    pub d_fea: Option<f64>,
    pub d_pho: Option<f64>,
    pub d_inv: Option<f64>,
    pub d_geo: Option<f64>,
}

impl LinguisticDistances {
    /// Values in feature-schema order: gen, syn, fea, pho, inv, geo.
    pub fn values(&self) -> [Option<f64>; 6] {
        [self.d_gen, self.d_syn, self.d_fea, self.d_pho, self.d_inv, self.d_geo]
    }
}

/// All typological sources plus a memo of computed pair distances.
#[derive(Debug, Default)]
pub struct TypologyDatabase {
    stores: HashMap<VectorKind, TypologyVectorStore>,
    genetic: Option<PrecomputedDistanceTable>,
    geographic: Option<PrecomputedDistanceTable>,
    cache: RwLock<HashMap<(String, String), LinguisticDistances>>,
}

impl TypologyDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_store(&mut self, store: TypologyVectorStore) {
        self.stores.insert(store.kind(), store);
        self.cache.get_mut().expect("cache lock poisoned").clear();
    }

    pub fn add_table(&mut self, table: PrecomputedDistanceTable) {
        match table.kind() {
            DistanceKind::Genetic => self.genetic = Some(table),
            DistanceKind::Geographic => self.geographic = Some(table),
        }
        self.cache.get_mut().expect("cache lock poisoned").clear();
    }

    pub fn is_empty(&self) -> bool {
        self.stores.is_empty() && self.genetic.is_none() && self.geographic.is_none()
    }

    pub fn knows(&self, lang: &str) -> bool {
        self.stores.values().any(|s| s.contains(lang))
            || self.genetic.as_ref().is_some_and(|t| t.knows(lang))
            || self.geographic.as_ref().is_some_and(|t| t.knows(lang))
    }

    fn vector_distance(&self, kind: VectorKind, a: &str, b: &str) -> Option<f64> {
        let store = self.stores.get(&kind)?;
        cosine_distance(store.get(a)?, store.get(b)?)
    }

    /// Cosine distance over the unweighted concatenation of the five vector
    /// families; families absent for either language contribute no dimensions.
    fn featural_distance(&self, a: &str, b: &str) -> Option<f64> {
        let pairs = VectorKind::ALL
            .iter()
            .filter_map(|k| {
                let store = self.stores.get(k)?;
                Some((store.get(a)?, store.get(b)?))
            })
            .flat_map(|(va, vb)| va.iter().zip(vb))
            .filter_map(|(x, y)| Some((x.value()?, y.value()?)));
        cosine_over(pairs)
    }

    /// Six distances for the pair; memoized under the unordered pair.
    pub fn query_distances(&self, task: &str, transfer: &str) -> Result<LinguisticDistances> {
        for lang in [task, transfer] {
            if !self.knows(lang) {
                return Err(Error::invalid(format!("language '{lang}' is unknown to every typology source")));
            }
        }
        let key = unordered(task, transfer);
        if let Some(d) = self.cache.read().expect("cache lock poisoned").get(&key) {
            return Ok(*d);
        }
        let (a, b) = (key.0.as_str(), key.1.as_str());
        let d = LinguisticDistances {
            d_gen: self.genetic.as_ref().and_then(|t| t.get(a, b)),
            d_syn: self.vector_distance(VectorKind::Syntax, a, b),
            d_fea: self.featural_distance(a, b),
            d_pho: self.vector_distance(VectorKind::Phonology, a, b),
            d_inv: self.vector_distance(VectorKind::Inventory, a, b),
            d_geo: self.geographic.as_ref().and_then(|t| t.get(a, b)),
        };
        self.cache.write().expect("cache lock poisoned").insert(key, d);
        Ok(d)
    }
}
