//! Bag-of-words vectorization and mutual-information feature selection.
//!
//! MI is computed between the binary presence of a token and the class
//! variable, in nats. Selection keeps the top-N features by MI with
//! lexicographic tie-breaks, which makes the whole pipeline deterministic
//! across runs and corpus row orders.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::corpus::{tokenize, Corpus, TokenSequence};
use crate::error::{Error, Result};

/// Token feature space: token -> contiguous index, plus document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    /// index -> token, in lexicographic token order.
    pub tokens: Vec<String>,
    index: HashMap<String, usize>,
    /// index -> number of instances containing the token.
    pub doc_freq: Vec<usize>,
    pub n_instances: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }
}

/// Sparse occurrence counts over a vocabulary's feature indices.
pub type CountVector = BTreeMap<usize, u32>;

/// One selected feature with its MI score in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedFeature {
    pub index: usize,
    pub token: String,
    pub mi: f64,
}

/// Top-N features by mutual information, scores non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub features: Vec<SelectedFeature>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Re-index a vocabulary-space count vector into this feature set's
    /// dense [0, N) space, dropping unselected features.
    pub fn project(&self, vec: &CountVector) -> CountVector {
        let lookup: HashMap<usize, usize> = self
            .features
            .iter()
            .enumerate()
            .map(|(pos, f)| (f.index, pos))
            .collect();
        vec.iter()
            .filter_map(|(&idx, &count)| lookup.get(&idx).map(|&pos| (pos, count)))
            .collect()
    }
}

/// Index every token with document frequency >= min_df, in lexicographic
/// order.
pub fn build_vocabulary(corpus: &Corpus, min_df: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::InvalidConfig("corpus is empty".into()));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for inst in &corpus.instances {
        let seen: HashSet<String> = tokenize(&inst.text).into_iter().collect();
        for token in seen {
            *df.entry(token).or_insert(0) += 1;
        }
    }
    let mut tokens = Vec::new();
    let mut doc_freq = Vec::new();
    for (token, freq) in df {
        if freq >= min_df.max(1) {
            tokens.push(token);
            doc_freq.push(freq);
        }
    }
    if tokens.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let index = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        tokens,
        index,
        doc_freq,
        n_instances: corpus.len(),
    })
}

/// Count in-vocabulary token occurrences; out-of-vocabulary tokens are
/// ignored.
pub fn vectorize(tokens: &TokenSequence, vocab: &Vocabulary) -> CountVector {
    let mut counts = CountVector::new();
    for token in tokens {
        if let Some(idx) = vocab.index_of(token) {
            *counts.entry(idx).or_insert(0) += 1;
        }
    }
    counts
}

/// Per-feature presence counts split by class, plus class sizes.
/// counts[feature][class] = number of class instances containing the token.
fn presence_by_class(vocab: &Vocabulary, corpus: &Corpus) -> (Vec<Vec<usize>>, Vec<usize>) {
    let k = corpus.labels.len();
    let mut counts = vec![vec![0usize; k]; vocab.len()];
    let mut class_sizes = vec![0usize; k];
    for inst in &corpus.instances {
        let class = corpus
            .class_index(&inst.label)
            .expect("instance label is in the corpus label set");
        class_sizes[class] += 1;
        let seen: HashSet<String> = tokenize(&inst.text).into_iter().collect();
        for token in seen {
            if let Some(idx) = vocab.index_of(&token) {
                counts[idx][class] += 1;
            }
        }
    }
    (counts, class_sizes)
}

/// I(X;Y) for X = binary token presence, Y = class, from the joint counts.
fn mi_from_counts(present_per_class: &[usize], class_sizes: &[usize], n: usize) -> f64 {
    let n = n as f64;
    let total_present: usize = present_per_class.iter().sum();
    let p1 = total_present as f64 / n;
    let p0 = 1.0 - p1;
    let mut mi = 0.0;
    for (y, &size) in class_sizes.iter().enumerate() {
        let py = size as f64 / n;
        let p1y = present_per_class[y] as f64 / n;
        let p0y = (size - present_per_class[y]) as f64 / n;
        if p1y > 0.0 && p1 > 0.0 && py > 0.0 {
            mi += p1y * (p1y / (p1 * py)).ln();
        }
        if p0y > 0.0 && p0 > 0.0 && py > 0.0 {
            mi += p0y * (p0y / (p0 * py)).ln();
        }
    }
    // Clamp the tiny negative values floating point can produce; MI >= 0.
    mi.max(0.0)
}

/// MI in nats between one feature's presence and the class variable.
pub fn mutual_information(vocab: &Vocabulary, corpus: &Corpus, feature: usize) -> f64 {
    let k = corpus.labels.len();
    let mut present = vec![0usize; k];
    let mut class_sizes = vec![0usize; k];
    let token = &vocab.tokens[feature];
    for inst in &corpus.instances {
        let class = corpus
            .class_index(&inst.label)
            .expect("instance label is in the corpus label set");
        class_sizes[class] += 1;
        if tokenize(&inst.text).iter().any(|t| t == token) {
            present[class] += 1;
        }
    }
    mi_from_counts(&present, &class_sizes, corpus.len())
}

/// The n highest-MI features; ties broken by lexicographic token order.
/// Returns all features when n exceeds the vocabulary size.
pub fn select_features(vocab: &Vocabulary, corpus: &Corpus, n: usize) -> Result<FeatureSet> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be >= 1".into()));
    }
    let (counts, class_sizes) = presence_by_class(vocab, corpus);
    let mut scored: Vec<SelectedFeature> = (0..vocab.len())
        .map(|idx| SelectedFeature {
            index: idx,
            token: vocab.tokens[idx].clone(),
            mi: mi_from_counts(&counts[idx], &class_sizes, corpus.len()),
        })
        .collect();
    // Vocabulary order is lexicographic, so a stable sort on descending MI
    // leaves ties in lexicographic order.
    scored.sort_by(|a, b| b.mi.partial_cmp(&a.mi).expect("MI scores are finite"));
    scored.truncate(n);
    Ok(FeatureSet { features: scored })
}
