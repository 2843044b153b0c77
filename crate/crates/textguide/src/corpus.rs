//! Corpus ingestion and serialization, deterministic tokenization, and
//! stratified fold assignment.
//!
//! Token counts produced by [`tokenize`] are the unit every budget in this
//! crate is measured in. The tokenizer is intentionally simple (lowercase,
//! Unicode-whitespace split, edge punctuation stripped) so the budget unit is
//! identical across the importance and truncation phases.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// One labeled document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextInstance {
    pub id: String,
    pub text: String,
    pub label: String,
}

/// Ordered token list; the length of this is what NTA bounds.
pub type TokenSequence = Vec<String>;

/// A labeled document collection with its finite label set.
///
/// `labels` is the sorted distinct label set; class order everywhere in the
/// crate (confusion matrices, boosting score vectors) follows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub instances: Vec<TextInstance>,
    pub labels: Vec<String>,
}

impl Corpus {
    /// Build a corpus from instances, checking id uniqueness and deriving
    /// the sorted label set.
    pub fn from_instances(instances: Vec<TextInstance>) -> Result<Corpus> {
        let mut seen = HashSet::new();
        for inst in &instances {
            if !seen.insert(inst.id.clone()) {
                return Err(Error::DuplicateId(inst.id.clone()));
            }
        }
        let labels: BTreeSet<String> = instances.iter().map(|i| i.label.clone()).collect();
        Ok(Corpus {
            instances,
            labels: labels.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Lowercase, split on Unicode whitespace, strip leading/trailing
/// non-alphanumeric characters from each piece, drop empties.
pub fn tokenize(text: &str) -> TokenSequence {
    text.to_lowercase()
        .split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Join tokens with single spaces. Inverse of [`tokenize`] on canonical
/// sequences: `tokenize(&detokenize(&t)) == t` for any `t` that `tokenize`
/// produced.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

/// On-disk corpus encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<CorpusFormat> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::InvalidConfig(format!(
                "unknown format {other:?}, expected jsonl or csv"
            ))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Jsonl => "jsonl",
            CorpusFormat::Csv => "csv",
        })
    }
}

#[derive(Debug, Deserialize)]
struct RawRow {
    #[serde(default, deserialize_with = "empty_as_none")]
    id: Option<String>,
    text: String,
    label: String,
}

// CSV has no null; an empty id field means "not provided".
fn empty_as_none<'de, D>(de: D) -> std::result::Result<Option<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let opt = Option::<String>::deserialize(de)?;
    Ok(opt.filter(|s| !s.is_empty()))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

/// Load a corpus file. Rows missing an id get the zero-based row index,
/// rendered in decimal. Row numbers in errors are zero-based data rows.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let rows: Vec<RawRow> = match format {
        CorpusFormat::Jsonl => {
            let file = std::fs::File::open(path).map_err(io_err(path))?;
            let mut rows = Vec::new();
            for (line_no, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(io_err(path))?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: RawRow =
                    serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
                        row: rows.len(),
                        reason: format!("line {}: {e}", line_no + 1),
                    })?;
                rows.push(row);
            }
            rows
        }
        CorpusFormat::Csv => {
            let mut reader = csv::Reader::from_path(path).map_err(|e| Error::MalformedRow {
                row: 0,
                reason: e.to_string(),
            })?;
            let mut rows = Vec::new();
            for record in reader.deserialize() {
                let row: RawRow = record.map_err(|e| Error::MalformedRow {
                    row: rows.len(),
                    reason: e.to_string(),
                })?;
                rows.push(row);
            }
            rows
        }
    };

    let mut instances = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    for (row_no, row) in rows.into_iter().enumerate() {
        if row.text.is_empty() {
            return Err(Error::EmptyText { row: row_no });
        }
        let id = row.id.unwrap_or_else(|| row_no.to_string());
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        instances.push(TextInstance {
            id,
            text: row.text,
            label: row.label,
        });
    }
    Corpus::from_instances(instances)
}

/// Serialize a corpus to a string in the given format.
pub fn corpus_to_string(corpus: &Corpus, format: CorpusFormat) -> Result<String> {
    match format {
        CorpusFormat::Jsonl => {
            let mut out = String::new();
            for inst in &corpus.instances {
                out.push_str(&serde_json::to_string(inst).expect("instance serializes"));
                out.push('\n');
            }
            Ok(out)
        }
        CorpusFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record(["id", "text", "label"])
                .expect("in-memory write");
            for inst in &corpus.instances {
                writer
                    .write_record([&inst.id, &inst.text, &inst.label])
                    .expect("in-memory write");
            }
            let bytes = writer.into_inner().expect("in-memory flush");
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
    }
}

/// Write a corpus atomically (temp file in the same directory, then rename).
pub fn write_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let body = corpus_to_string(corpus, format)?;
    write_atomic(path, body.as_bytes())
}

/// Atomic file write used by every output path in the crate.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = std::fs::File::create(&tmp).map_err(io_err(path))?;
        file.write_all(bytes).map_err(io_err(path))?;
        file.sync_all().map_err(io_err(path))?;
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Fold assignment for stratified k-fold cross validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    /// instance id -> fold index in [0, k)
    pub assignment: HashMap<String, usize>,
    /// Classes with fewer members than k; the assignment is still produced.
    pub warnings: Vec<String>,
}

impl FoldAssignment {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }
}

/// Per-class seeded shuffle, then round-robin assignment within each class.
/// Instance ids are sorted before shuffling so the assignment is invariant
/// to corpus row order.
pub fn stratified_folds(corpus: &Corpus, k: usize, base_seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    if corpus.is_empty() {
        return Err(Error::InvalidConfig("corpus is empty".into()));
    }
    let mut assignment = HashMap::with_capacity(corpus.len());
    let mut warnings = Vec::new();
    for class in &corpus.labels {
        let mut ids: Vec<&str> = corpus
            .instances
            .iter()
            .filter(|i| &i.label == class)
            .map(|i| i.id.as_str())
            .collect();
        ids.sort_unstable();
        if ids.len() < k {
            warnings.push(format!(
                "class {class:?} has {} members, fewer than k={k}; some folds will lack it",
                ids.len()
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(
            base_seed,
            &[seed::hash_str(class)],
        ));
        ids.shuffle(&mut rng);
        for (i, id) in ids.into_iter().enumerate() {
            assignment.insert(id.to_owned(), i % k);
        }
    }
    Ok(FoldAssignment {
        k,
        assignment,
        warnings,
    })
}

/// Split a corpus into (train, test) around one fold, preserving instance
/// order. The parent's label set is kept on both sides so class order stays
/// consistent even when a side is missing a class.
pub fn split_fold(corpus: &Corpus, folds: &FoldAssignment, fold: usize) -> (Corpus, Corpus) {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for inst in &corpus.instances {
        if folds.fold_of(&inst.id) == Some(fold) {
            test.push(inst.clone());
        } else {
            train.push(inst.clone());
        }
    }
    let labels = corpus.labels.clone();
    (
        Corpus {
            instances: train,
            labels: labels.clone(),
        },
        Corpus {
            instances: test,
            labels,
        },
    )
}
