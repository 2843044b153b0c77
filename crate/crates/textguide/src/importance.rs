//! Builds the sorted important token feature list: BoW vocabulary, MI
//! selection, boosted-trees training, gain extraction, and the final
//! non-increasing sort. Also the sITFL file format.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::boost::{train_boost, BoostModel, BoostParams};
use crate::corpus::{tokenize, write_atomic, Corpus};
use crate::error::{Error, Result};
use crate::features::{build_vocabulary, select_features, vectorize, FeatureSet};

/// Which ranking backs the sITFL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImportanceBackend {
    /// Cumulative split gain of the boosted-trees classifier.
    #[default]
    Boost,
    /// Tokens ordered directly by mutual information; cheap ablation.
    MiRank,
}

impl FromStr for ImportanceBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<ImportanceBackend> {
        match s {
            "boost" => Ok(ImportanceBackend::Boost),
            "mi-rank" => Ok(ImportanceBackend::MiRank),
            other => Err(Error::InvalidConfig(format!(
                "unknown importance backend {other:?}, expected boost or mi-rank"
            ))),
        }
    }
}

impl fmt::Display for ImportanceBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImportanceBackend::Boost => "boost",
            ImportanceBackend::MiRank => "mi-rank",
        })
    }
}

/// Sorted important token feature list with provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Sitfl {
    /// (token, importance), importance non-increasing, tokens unique.
    pub entries: Vec<(String, f64)>,
    pub n: usize,
    pub corpus_sha256: String,
    pub seed: u64,
}

impl Sitfl {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }
}

/// SHA-256 over the canonical (id, text, label) serialization, independent
/// of on-disk format.
pub fn corpus_sha256(corpus: &Corpus) -> String {
    let mut hasher = Sha256::new();
    for inst in &corpus.instances {
        hasher.update(inst.id.as_bytes());
        hasher.update([0x1f]);
        hasher.update(inst.text.as_bytes());
        hasher.update([0x1f]);
        hasher.update(inst.label.as_bytes());
        hasher.update([0x1e]);
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn sort_entries(mut entries: Vec<(String, f64)>) -> Vec<(String, f64)> {
    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("importances are finite")
            .then_with(|| a.0.cmp(&b.0))
    });
    entries
}

/// Feature importances of a trained model, mapped back to tokens via the
/// feature set the model was trained on.
pub fn feature_importances(model: &BoostModel, features: &FeatureSet) -> BTreeMap<String, f64> {
    features
        .features
        .iter()
        .enumerate()
        .map(|(pos, f)| (f.token.clone(), model.feature_gain[pos]))
        .collect()
}

/// Phase-1 pipeline with the boosting backend.
pub fn build_sitfl(
    corpus: &Corpus,
    n: usize,
    min_df: usize,
    params: &BoostParams,
) -> Result<Sitfl> {
    build_sitfl_with_backend(corpus, n, min_df, params, ImportanceBackend::Boost)
}

/// Phase-1 pipeline: vocabulary, MI selection of N features, then either
/// boosting gains or the MI scores themselves as the importance ranking.
/// Zero-importance features are retained at the tail of the list.
pub fn build_sitfl_with_backend(
    corpus: &Corpus,
    n: usize,
    min_df: usize,
    params: &BoostParams,
    backend: ImportanceBackend,
) -> Result<Sitfl> {
    let vocab =
        build_vocabulary(corpus, min_df).map_err(|e| e.in_phase("vocabulary"))?;
    let features =
        select_features(&vocab, corpus, n).map_err(|e| e.in_phase("feature selection"))?;

    let entries = match backend {
        ImportanceBackend::MiRank => features
            .features
            .iter()
            .map(|f| (f.token.clone(), f.mi))
            .collect(),
        ImportanceBackend::Boost => {
            let x: Vec<_> = corpus
                .instances
                .iter()
                .map(|inst| features.project(&vectorize(&tokenize(&inst.text), &vocab)))
                .collect();
            let y: Vec<String> = corpus.instances.iter().map(|i| i.label.clone()).collect();
            let model = train_boost(&x, &y, features.len(), params)
                .map_err(|e| e.in_phase("boosting"))?;
            sort_entries(feature_importances(&model, &features).into_iter().collect())
        }
    };
    Ok(Sitfl {
        entries,
        n,
        corpus_sha256: corpus_sha256(corpus),
        seed: params.seed,
    })
}

/// Serialize to the sITFL TSV format.
pub fn sitfl_to_string(sitfl: &Sitfl) -> String {
    let mut out = format!(
        "#textguide-sitfl v1 n={} corpus_sha256={} seed={}\n",
        sitfl.n, sitfl.corpus_sha256, sitfl.seed
    );
    for (token, importance) in &sitfl.entries {
        out.push_str(token);
        out.push('\t');
        out.push_str(&importance.to_string());
        out.push('\n');
    }
    out
}

pub fn write_sitfl(sitfl: &Sitfl, path: &Path) -> Result<()> {
    write_atomic(path, sitfl_to_string(sitfl).as_bytes())
}

pub fn read_sitfl(path: &Path) -> Result<Sitfl> {
    let body = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_sitfl(&body)
}

pub fn parse_sitfl(body: &str) -> Result<Sitfl> {
    let mut lines = body.lines();
    let header = lines.next().unwrap_or("");
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 5 || fields[0] != "#textguide-sitfl" || fields[1] != "v1" {
        return Err(Error::VersionMismatch(header.to_owned()));
    }
    let field = |i: usize, prefix: &str| -> Result<&str> {
        fields[i]
            .strip_prefix(prefix)
            .ok_or_else(|| Error::VersionMismatch(header.to_owned()))
    };
    let n: usize = field(2, "n=")?
        .parse()
        .map_err(|_| Error::VersionMismatch(header.to_owned()))?;
    let corpus_sha256 = field(3, "corpus_sha256=")?;
    let seed: u64 = field(4, "seed=")?
        .parse()
        .map_err(|_| Error::VersionMismatch(header.to_owned()))?;
    let mut entries: Vec<(String, f64)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let Some((token, importance)) = line.split_once('\t') else {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: "expected <token>\\t<importance>".into(),
            });
        };
        let importance: f64 = importance.parse().map_err(|_| Error::MalformedLine {
            line: line_no,
            reason: format!("unparseable importance {importance:?}"),
        })?;
        if !importance.is_finite() || importance < 0.0 {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: format!("importance must be finite and non-negative, got {importance}"),
            });
        }
        if let Some((_, prev)) = entries.last() {
            if importance > *prev {
                return Err(Error::MalformedLine {
                    line: line_no,
                    reason: "importances must be non-increasing".into(),
                });
            }
        }
        if entries.iter().any(|(t, _)| t == token) {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: format!("duplicate token {token:?}"),
            });
        }
        entries.push((token.to_owned(), importance));
    }
    Ok(Sitfl {
        entries,
        n,
        corpus_sha256: corpus_sha256.to_owned(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TextInstance;

    fn toy_corpus() -> Corpus {
        // "alpha" deterministically separates the classes; everything else
        // is shared filler.
        let mut rows = Vec::new();
        for i in 0..20 {
            let (text, label) = if i % 2 == 0 {
                (format!("alpha pad{} filler common", i % 3), "a")
            } else {
                (format!("pad{} filler common extra", i % 3), "b")
            };
            rows.push(TextInstance {
                id: i.to_string(),
                text,
                label: label.to_string(),
            });
        }
        Corpus::from_instances(rows).unwrap()
    }

    #[test]
    fn discriminative_token_ranks_first() {
        let params = BoostParams {
            rounds: 20,
            min_samples_leaf: 2,
            ..Default::default()
        };
        let sitfl = build_sitfl(&toy_corpus(), 10, 1, &params).unwrap();
        assert_eq!(sitfl.entries[0].0, "alpha");
        for pair in sitfl.entries.windows(2) {
            assert!(pair[0].1 >= pair[1].1);
        }
    }

    #[test]
    fn sitfl_is_row_order_invariant() {
        let params = BoostParams {
            rounds: 10,
            min_samples_leaf: 2,
            ..Default::default()
        };
        let c = toy_corpus();
        let a = build_sitfl(&c, 10, 1, &params).unwrap();
        let mut shuffled = c.clone();
        shuffled.instances.reverse();
        let b = build_sitfl(&shuffled, 10, 1, &params).unwrap();
        assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn mi_rank_backend_orders_by_mi() {
        let sitfl = build_sitfl_with_backend(
            &toy_corpus(),
            10,
            1,
            &BoostParams::default(),
            ImportanceBackend::MiRank,
        )
        .unwrap();
        assert_eq!(sitfl.entries[0].0, "alpha");
    }

    #[test]
    fn file_round_trip() {
        let params = BoostParams {
            rounds: 5,
            min_samples_leaf: 2,
            ..Default::default()
        };
        let sitfl = build_sitfl(&toy_corpus(), 10, 1, &params).unwrap();
        let parsed = parse_sitfl(&sitfl_to_string(&sitfl)).unwrap();
        assert_eq!(parsed, sitfl);
    }

    #[test]
    fn nan_importance_is_malformed() {
        let body = "#textguide-sitfl v1 n=2 corpus_sha256=ab seed=1\nx\tNaN\n";
        assert!(matches!(
            parse_sitfl(body),
            Err(Error::MalformedLine { line: 2, .. })
        ));
    }

    #[test]
    fn hand_written_file_parses() {
        let body = "#textguide-sitfl v1 n=2 corpus_sha256=ab seed=1\nfoo\t0.5\nbar\t0.25\n";
        let sitfl = parse_sitfl(body).unwrap();
        assert_eq!(
            sitfl.entries,
            vec![("foo".to_string(), 0.5), ("bar".to_string(), 0.25)]
        );
    }

    #[test]
    fn bad_header_is_version_mismatch() {
        assert!(matches!(
            parse_sitfl("#textguide-sitfl v2 n=1 corpus_sha256=ab seed=0\n"),
            Err(Error::VersionMismatch(_))
        ));
    }
}
