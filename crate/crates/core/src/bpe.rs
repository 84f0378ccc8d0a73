//! Greedy byte-pair-encoding subword learner.
//!
//! Words are split into characters followed by an end-of-word marker. Each
//! merge joins the most frequent adjacent symbol pair, counted over word
//! frequencies; equal counts resolve to the lexicographically smaller pair.
//! Symbols that become unused after a merge stay in the vocabulary.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const END_OF_WORD: &str = "</w>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocabulary {
    merges: Vec<(String, String)>,
    subword_types: BTreeSet<String>,
}

impl SubwordVocabulary {
    /// A vocabulary with explicit contents, e.g. one learned elsewhere.
    pub fn from_parts(merges: Vec<(String, String)>, subword_types: BTreeSet<String>) -> Self {
        SubwordVocabulary { merges, subword_types }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn subword_types(&self) -> &BTreeSet<String> {
        &self.subword_types
    }

    pub fn num_merges(&self) -> usize {
        self.merges.len()
    }

    /// Applies the merges in learned order to one word.
    pub fn segment(&self, word: &str) -> Vec<String> {
        let mut symbols = initial_symbols(word);
        for (left, right) in &self.merges {
            let mut out = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == left && &symbols[i + 1] == right {
                    out.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    out.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = out;
        }
        symbols
    }
}

fn initial_symbols(word: &str) -> Vec<String> {
    word.chars()
        .map(String::from)
        .chain(std::iter::once(END_OF_WORD.to_owned()))
        .collect()
}

type Pair = (u32, u32);

struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.names.len() as u32;
        self.ids.insert(s.to_owned(), id);
        self.names.push(s.to_owned());
        id
    }
}

/// Learns up to `num_merges` merges jointly over `corpora`. Fewer merges are
/// returned when no adjacent pair remains.
pub fn learn_bpe(corpora: &[&Corpus], num_merges: usize) -> Result<SubwordVocabulary> {
    let mut word_freq: BTreeMap<&str, u64> = BTreeMap::new();
    for c in corpora {
        for tok in c.tokens() {
            *word_freq.entry(tok).or_default() += 1;
        }
    }
    if word_freq.is_empty() {
        return Err(Error::invalid("cannot learn subwords from corpora without tokens"));
    }

    let mut interner = Interner {
        ids: HashMap::new(),
        names: Vec::new(),
    };
    let mut words: Vec<(Vec<u32>, u64)> = word_freq
        .iter()
        .map(|(w, &f)| {
            let syms = initial_symbols(w).iter().map(|s| interner.intern(s)).collect();
            (syms, f)
        })
        .collect();
    let mut subword_types: BTreeSet<String> = interner.names.iter().cloned().collect();

    let mut pair_counts: HashMap<Pair, u64> = HashMap::new();
    let mut pair_words: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (idx, (syms, freq)) in words.iter().enumerate() {
        for w in syms.windows(2) {
            let p = (w[0], w[1]);
            *pair_counts.entry(p).or_default() += freq;
            pair_words.entry(p).or_default().insert(idx);
        }
    }

    let mut merges = Vec::new();
    while merges.len() < num_merges {
        let best = pair_counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .max_by(|(pa, ca), (pb, cb)| {
                ca.cmp(cb).then_with(|| {
                    let ka = (&interner.names[pa.0 as usize], &interner.names[pa.1 as usize]);
                    let kb = (&interner.names[pb.0 as usize], &interner.names[pb.1 as usize]);
                    kb.cmp(&ka)
                })
            })
            .map(|(p, _)| *p);
        let Some(pair) = best else { break };

        let left = interner.names[pair.0 as usize].clone();
        let right = interner.names[pair.1 as usize].clone();
        let merged_name = format!("{left}{right}");
        let merged = interner.intern(&merged_name);
        subword_types.insert(merged_name);
        merges.push((left, right));

        let mut affected: Vec<usize> = pair_words
            .remove(&pair)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        affected.sort_unstable();
        for idx in affected {
            let (syms, freq) = &mut words[idx];
            let freq = *freq;
            for w in syms.windows(2) {
                let p = (w[0], w[1]);
                if let Some(c) = pair_counts.get_mut(&p) {
                    *c -= freq;
                    if *c == 0 {
                        pair_counts.remove(&p);
                    }
                }
            }
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && (syms[i], syms[i + 1]) == pair {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(syms[i]);
                    i += 1;
                }
            }
            *syms = out;
            for w in syms.windows(2) {
                let p = (w[0], w[1]);
                *pair_counts.entry(p).or_default() += freq;
                pair_words.entry(p).or_default().insert(idx);
            }
        }
        pair_counts.remove(&pair);
    }

    Ok(SubwordVocabulary {
        merges,
        subword_types,
    })
}

/// Overlap of two subword type sets, bounded by 0.5.
pub fn subword_overlap(vocab_tf: &SubwordVocabulary, vocab_tk: &SubwordVocabulary) -> Result<f64> {
    crate::corpus::set_overlap(&vocab_tf.subword_types, &vocab_tk.subword_types)
        .ok_or_else(|| Error::invalid("subword overlap over an empty subword set"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(types: &[&str]) -> SubwordVocabulary {
        SubwordVocabulary {
            merges: Vec::new(),
            subword_types: types.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn zero_merges_gives_characters_and_marker() {
        let c = Corpus::from_text("x", "ab ba\ncab").unwrap();
        let v = learn_bpe(&[&c], 0).unwrap();
        let expected: BTreeSet<String> = ["a", "b", "c", END_OF_WORD].iter().map(|s| s.to_string()).collect();
        assert_eq!(v.subword_types(), &expected);
        assert_eq!(v.num_merges(), 0);
    }

    #[test]
    fn first_merge_joins_most_frequent_pair() {
        // "aaab" x10: (a,a) occurs twice per word, (a,b) and (b,</w>) once.
        let c = Corpus::from_text("x", &"aaab\n".repeat(10)).unwrap();
        let v = learn_bpe(&[&c], 1).unwrap();
        assert_eq!(v.merges(), &[("a".to_string(), "a".to_string())]);
        assert!(v.subword_types().contains("aa"));
    }

    #[test]
    fn ties_prefer_lexicographically_smaller_pair() {
        // (x,y) and (y,</w>) both occur once; "x" < "y" decides.
        let c = Corpus::from_text("x", "xy").unwrap();
        let v = learn_bpe(&[&c], 1).unwrap();
        assert_eq!(v.merges()[0], ("x".to_string(), "y".to_string()));
    }

    #[test]
    fn stops_when_no_pairs_remain() {
        let c = Corpus::from_text("x", "ab").unwrap();
        let v = learn_bpe(&[&c], 100).unwrap();
        assert_eq!(v.num_merges(), 2);
        assert_eq!(v.segment("ab"), vec![format!("ab{END_OF_WORD}")]);
    }

    #[test]
    fn no_tokens_is_an_error() {
        let c = Corpus::from_text("x", "").unwrap();
        assert!(learn_bpe(&[&c], 5).is_err());
    }

    #[test]
    fn subword_overlap_examples() {
        let a = vocab(&["a", "b", "ab"]);
        let b = vocab(&["a", "c"]);
        assert!((subword_overlap(&a, &b).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(subword_overlap(&a, &a).unwrap(), 0.5);
        assert!(subword_overlap(&a, &vocab(&[])).is_err());
    }

    #[test]
    fn disjoint_inventories_without_merges() {
        let a = learn_bpe(&[&Corpus::from_text("a", "ab").unwrap()], 0).unwrap();
        let b = learn_bpe(&[&Corpus::from_text("b", "cd").unwrap()], 0).unwrap();
        let marker_free = |v: &SubwordVocabulary| SubwordVocabulary {
            merges: Vec::new(),
            subword_types: v.subword_types().iter().filter(|s| *s != END_OF_WORD).cloned().collect(),
        };
        assert_eq!(subword_overlap(&marker_free(&a), &marker_free(&b)).unwrap(), 0.0);
        // The shared end-of-word marker is the only common symbol.
        assert_eq!(subword_overlap(&a, &b).unwrap(), 1.0 / 6.0);
    }
}
