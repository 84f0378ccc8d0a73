//! Dataset-dependent pair features and the per-task feature profiles.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::bpe::{learn_bpe, subword_overlap, SubwordVocabulary};
use crate::corpus::{size_features, ttr_distance, type_token_ratio, word_overlap, Corpus, SizeUnit};
use crate::dataset::{FeatureRow, FeatureSchema};
use crate::error::{Error, Result};
use crate::typology::LinguisticDistances;

pub const DATASET_FEATURES: [&str; 8] = ["s_tf", "s_tk", "size_ratio", "t_tf", "t_tk", "d_ttr", "o_w", "o_sw"];
pub const DISTANCE_FEATURES: [&str; 6] = ["d_gen", "d_syn", "d_fea", "d_pho", "d_inv", "d_geo"];

pub const DEFAULT_BPE_MERGES: usize = 8000;

/// The full 14-column schema: dataset features followed by distances.
pub fn standard_schema() -> FeatureSchema {
    FeatureSchema::new(DATASET_FEATURES.iter().chain(&DISTANCE_FEATURES).map(|s| s.to_string()).collect())
        .expect("standard feature names are distinct")
}

/// Which features a downstream task supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskProfile {
    /// Machine translation: every feature.
    Mt,
    /// Entity linking over gazetteers: no TTR features, no subword overlap.
    El,
    /// POS tagging: no subword overlap.
    Pos,
    /// Dependency parsing: no subword overlap.
    Dep,
    /// Explicit set of enabled feature names.
    Custom(BTreeSet<String>),
}

impl TaskProfile {
    pub fn is_enabled(&self, feature: &str) -> bool {
        match self {
            TaskProfile::Mt => true,
            TaskProfile::El => !matches!(feature, "t_tf" | "t_tk" | "d_ttr" | "o_sw"),
            TaskProfile::Pos | TaskProfile::Dep => feature != "o_sw",
            TaskProfile::Custom(set) => set.contains(feature),
        }
    }

    pub fn size_unit(&self) -> SizeUnit {
        match self {
            TaskProfile::El => SizeUnit::Entities,
            _ => SizeUnit::Sentences,
        }
    }

    /// Gazetteer input: one entity per line.
    pub fn uses_gazetteers(&self) -> bool {
        matches!(self, TaskProfile::El)
    }

    pub fn custom<I, S>(features: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let schema = standard_schema();
        let set: BTreeSet<String> = features.into_iter().map(Into::into).collect();
        if let Some(unknown) = set.iter().find(|f| schema.index_of(f).is_none()) {
            return Err(Error::invalid(format!("unknown feature '{unknown}' in custom profile")));
        }
        Ok(TaskProfile::Custom(set))
    }
}

impl FromStr for TaskProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mt" => Ok(TaskProfile::Mt),
            "el" => Ok(TaskProfile::El),
            "pos" => Ok(TaskProfile::Pos),
            "dep" => Ok(TaskProfile::Dep),
            "custom" => Ok(TaskProfile::Custom(BTreeSet::new())),
            other => Err(Error::invalid(format!("unknown task profile '{other}'"))),
        }
    }
}

impl fmt::Display for TaskProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskProfile::Mt => "mt",
            TaskProfile::El => "el",
            TaskProfile::Pos => "pos",
            TaskProfile::Dep => "dep",
            TaskProfile::Custom(_) => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    pub profile: TaskProfile,
    pub bpe_merges: usize,
}

impl FeatureSpec {
    pub fn new(profile: TaskProfile) -> Self {
        FeatureSpec {
            profile,
            bpe_merges: DEFAULT_BPE_MERGES,
        }
    }
}

/// Dataset-dependent features of one (task, transfer) pair. Disabled
/// features are `None`, never zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DatasetFeatures {
    pub s_tf: Option<f64>,
    pub s_tk: Option<f64>,
    pub size_ratio: Option<f64>,
    pub t_tf: Option<f64>,
    pub t_tk: Option<f64>,
    pub d_ttr: Option<f64>,
    pub o_w: Option<f64>,
    pub o_sw: Option<f64>,
}

impl DatasetFeatures {
    /// Values in [`DATASET_FEATURES`] order.
    pub fn values(&self) -> [Option<f64>; 8] {
        [
            self.s_tf,
            self.s_tk,
            self.size_ratio,
            self.t_tf,
            self.t_tk,
            self.d_ttr,
            self.o_w,
            self.o_sw,
        ]
    }
}

/// Learns a subword vocabulary per corpus, then extracts the pair features.
pub fn extract_features(task: &Corpus, transfer: &Corpus, spec: &FeatureSpec) -> Result<DatasetFeatures> {
    if spec.profile.is_enabled("o_sw") {
        let vocab_tk = learn_bpe(&[task], spec.bpe_merges)?;
        let vocab_tf = learn_bpe(&[transfer], spec.bpe_merges)?;
        extract_features_with_vocabs(task, transfer, Some((&vocab_tf, &vocab_tk)), spec)
    } else {
        extract_features_with_vocabs(task, transfer, None, spec)
    }
}

/// Like [`extract_features`] with vocabularies `(transfer, task)` learned
/// ahead of time, so one vocabulary per language can serve many pairs.
pub fn extract_features_with_vocabs(
    task: &Corpus,
    transfer: &Corpus,
    vocabs: Option<(&SubwordVocabulary, &SubwordVocabulary)>,
    spec: &FeatureSpec,
) -> Result<DatasetFeatures> {
    let on = |name: &str| spec.profile.is_enabled(name);
    let mut out = DatasetFeatures::default();

    if on("s_tf") || on("s_tk") || on("size_ratio") {
        let (s_tf, s_tk, ratio) = size_features(transfer, task, spec.profile.size_unit())?;
        out.s_tf = on("s_tf").then_some(s_tf);
        out.s_tk = on("s_tk").then_some(s_tk);
        out.size_ratio = on("size_ratio").then_some(ratio);
    }
    if on("t_tf") || on("t_tk") || on("d_ttr") {
        let t_tf = type_token_ratio(transfer)?;
        let t_tk = type_token_ratio(task)?;
        out.t_tf = on("t_tf").then_some(t_tf);
        out.t_tk = on("t_tk").then_some(t_tk);
        if on("d_ttr") {
            out.d_ttr = Some(ttr_distance(t_tf, t_tk)?);
        }
    }
    if on("o_w") {
        out.o_w = Some(word_overlap(transfer, task)?);
    }
    if on("o_sw") {
        let (vocab_tf, vocab_tk) =
            vocabs.ok_or_else(|| Error::invalid("subword overlap enabled but no vocabularies supplied"))?;
        out.o_sw = Some(subword_overlap(vocab_tf, vocab_tk)?);
    }
    Ok(out)
}

/// Assembles the 14-feature row of [`standard_schema`]. Distances disabled
/// by the profile are blanked.
pub fn pair_feature_row(
    dataset: &DatasetFeatures,
    distances: &LinguisticDistances,
    profile: &TaskProfile,
) -> FeatureRow {
    let values = dataset
        .values()
        .into_iter()
        .chain(distances.values())
        .zip(DATASET_FEATURES.iter().chain(&DISTANCE_FEATURES))
        .map(|(v, name)| v.filter(|_| profile.is_enabled(name)))
        .collect();
    FeatureRow::new(values).expect("extracted features are finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(code: &str, text: &str) -> Corpus {
        Corpus::from_text(code, text).unwrap()
    }

    #[test]
    fn mt_profile_populates_all_dataset_features() {
        let tk = corpus("glg", "o can ladra\no gato mia");
        let tf = corpus("por", "o cão ladra\no gato mia\nbom dia");
        let f = extract_features(&tk, &tf, &FeatureSpec::new(TaskProfile::Mt)).unwrap();
        assert!(f.values().iter().all(Option::is_some));
        assert_eq!(f.size_ratio, Some(1.5));
    }

    #[test]
    fn el_profile_marks_ttr_and_subwords_missing() {
        let tk = Corpus::from_gazetteer("tel", "a b\nc").unwrap();
        let tf = Corpus::from_gazetteer("hin", "a b\nd\ne").unwrap();
        let f = extract_features(&tk, &tf, &FeatureSpec::new(TaskProfile::El)).unwrap();
        assert_eq!((f.t_tf, f.t_tk, f.d_ttr, f.o_sw), (None, None, None, None));
        assert_eq!(f.o_w, Some(1.0 / 5.0));
        assert_eq!(f.s_tf, Some(3.0));
    }

    #[test]
    fn pos_profile_drops_only_subwords() {
        let c = corpus("x", "a b");
        let f = extract_features(&c, &c, &FeatureSpec::new(TaskProfile::Pos)).unwrap();
        assert_eq!(f.o_sw, None);
        assert!(f.d_ttr.is_some());
    }

    #[test]
    fn self_pair() {
        let c = corpus("x", "a b c\na d");
        let f = extract_features(&c, &c, &FeatureSpec::new(TaskProfile::Mt)).unwrap();
        assert_eq!(f.o_w, Some(0.5));
        assert_eq!(f.o_sw, Some(0.5));
        assert_eq!(f.d_ttr, Some(0.0));
        assert_eq!(f.size_ratio, Some(1.0));
    }

    #[test]
    fn custom_profile_validates_names() {
        assert!(TaskProfile::custom(["o_w", "d_gen"]).is_ok());
        assert!(TaskProfile::custom(["bogus"]).is_err());
        let p = TaskProfile::custom(["o_w"]).unwrap();
        let f = extract_features(&corpus("a", "x"), &corpus("b", "x"), &FeatureSpec::new(p)).unwrap();
        assert_eq!(f.values().iter().filter(|v| v.is_some()).count(), 1);
    }

    #[test]
    fn profile_blanks_disabled_distances() {
        let p = TaskProfile::custom(["d_gen"]).unwrap();
        let d = LinguisticDistances {
            d_gen: Some(0.1),
            d_syn: Some(0.2),
            ..Default::default()
        };
        let row = pair_feature_row(&DatasetFeatures::default(), &d, &p);
        assert_eq!(row.values()[8], Some(0.1));
        assert_eq!(row.values()[9], None);
    }
}
