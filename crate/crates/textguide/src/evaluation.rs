//! Cross-validated comparison of truncation strategies with a BoW +
//! boosted-trees proxy classifier, multiclass MCC, and the Part1 x Part2 x
//! TN parameter sweep.
//!
//! Every fold and grid point derives its own seed from the base seed, so
//! parallel and sequential execution produce bit-identical results.

use serde::Serialize;

use crate::boost::{predict, train_boost, BoostParams};
use crate::corpus::{split_fold, stratified_folds, tokenize, Corpus, FoldAssignment};
use crate::error::{Error, Result};
use crate::features::{build_vocabulary, select_features, vectorize};
use crate::importance::{build_sitfl_with_backend, ImportanceBackend, Sitfl};
use crate::seed;
use crate::truncation::{apply_strategy, Strategy, TruncationConfig};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// K x K count matrix; rows are true classes, columns predicted, in corpus
/// label order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

/// Tally predictions against truth in the given class order.
pub fn confusion(
    y_true: &[String],
    y_pred: &[String],
    classes: &[String],
) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidConfig(format!(
            "length mismatch: {} true vs {} predicted",
            y_true.len(),
            y_pred.len()
        )));
    }
    let k = classes.len();
    let index = |label: &String| -> Result<usize> {
        classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownLabel(label.clone()))
    };
    let mut counts = vec![vec![0u64; k]; k];
    for (t, p) in y_true.iter().zip(y_pred) {
        counts[index(t)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

/// Multiclass Matthews correlation coefficient.
///
/// (c*s - sum p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2)) with the
/// convention that a zero denominator factor yields 0.
pub fn mcc(m: &ConfusionMatrix) -> f64 {
    let k = m.classes.len();
    let s: f64 = m.counts.iter().flatten().map(|&v| v as f64).sum();
    let c: f64 = (0..k).map(|i| m.counts[i][i] as f64).sum();
    let t: Vec<f64> = (0..k)
        .map(|i| m.counts[i].iter().map(|&v| v as f64).sum())
        .collect();
    let p: Vec<f64> = (0..k)
        .map(|j| m.counts.iter().map(|row| row[j] as f64).sum())
        .collect();
    let cov = c * s - t.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
    let dt = s * s - t.iter().map(|v| v * v).sum::<f64>();
    let dp = s * s - p.iter().map(|v| v * v).sum::<f64>();
    if dt <= 0.0 || dp <= 0.0 {
        return 0.0;
    }
    cov / (dt * dp).sqrt()
}

/// How phase 1 relates to the CV folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeakageMode {
    /// sITFL and vocabulary built on training folds only.
    #[default]
    FoldSafe,
    /// sITFL built once on the whole corpus; labeled as such in output.
    CorpusLevel,
}

impl std::str::FromStr for LeakageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<LeakageMode> {
        match s {
            "fold_safe" => Ok(LeakageMode::FoldSafe),
            "corpus_level" => Ok(LeakageMode::CorpusLevel),
            other => Err(Error::InvalidConfig(format!(
                "unknown leakage mode {other:?}, expected fold_safe or corpus_level"
            ))),
        }
    }
}

impl std::fmt::Display for LeakageMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LeakageMode::FoldSafe => "fold_safe",
            LeakageMode::CorpusLevel => "corpus_level",
        })
    }
}

/// Everything the harness needs besides the truncation config.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub k: usize,
    pub seed: u64,
    pub n_features: usize,
    pub min_df: usize,
    pub boost: BoostParams,
    pub leakage: LeakageMode,
    pub backend: ImportanceBackend,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 5,
            seed: 42,
            n_features: 2000,
            min_df: 2,
            boost: BoostParams::default(),
            leakage: LeakageMode::FoldSafe,
            backend: ImportanceBackend::Boost,
        }
    }
}

/// Cross-validation outcome for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CVResult {
    pub strategy: String,
    pub leakage: String,
    pub nta: usize,
    pub part1: f64,
    pub part2: f64,
    pub tn: usize,
    pub fold_mccs: Vec<f64>,
    pub mean_mcc: f64,
    pub fold_confusions: Vec<ConfusionMatrix>,
}

/// Build the phase-1 list on the training side of one fold.
pub fn build_fold_sitfl(
    corpus: &Corpus,
    folds: &FoldAssignment,
    fold: usize,
    cfg: &EvalConfig,
) -> Result<Sitfl> {
    let (train, _) = split_fold(corpus, folds, fold);
    let params = BoostParams {
        seed: seed::derive(cfg.seed, &[fold as u64, 1]),
        ..cfg.boost.clone()
    };
    build_sitfl_with_backend(&train, cfg.n_features, cfg.min_df, &params, cfg.backend)
        .map_err(|e| e.in_fold(fold))
}

fn eval_fold(
    corpus: &Corpus,
    folds: &FoldAssignment,
    fold: usize,
    strategy: Strategy,
    trunc_cfg: &TruncationConfig,
    cfg: &EvalConfig,
    global_sitfl: Option<&Sitfl>,
) -> Result<(f64, ConfusionMatrix)> {
    let (train, test) = split_fold(corpus, folds, fold);
    let fold_sitfl;
    let sitfl: Option<&Sitfl> = if strategy.needs_sitfl() {
        match cfg.leakage {
            LeakageMode::CorpusLevel => global_sitfl,
            LeakageMode::FoldSafe => {
                fold_sitfl = build_fold_sitfl(corpus, folds, fold, cfg)?;
                Some(&fold_sitfl)
            }
        }
    } else {
        None
    };

    let trunc_train = apply_strategy(&train, strategy, sitfl, trunc_cfg)?.corpus;
    let trunc_test = apply_strategy(&test, strategy, sitfl, trunc_cfg)?.corpus;

    let vocab = build_vocabulary(&trunc_train, cfg.min_df).map_err(|e| e.in_fold(fold))?;
    let features =
        select_features(&vocab, &trunc_train, cfg.n_features).map_err(|e| e.in_fold(fold))?;
    let x: Vec<_> = trunc_train
        .instances
        .iter()
        .map(|i| features.project(&vectorize(&tokenize(&i.text), &vocab)))
        .collect();
    let y: Vec<String> = trunc_train.instances.iter().map(|i| i.label.clone()).collect();
    let params = BoostParams {
        seed: seed::derive(cfg.seed, &[fold as u64, 2]),
        ..cfg.boost.clone()
    };
    let model = train_boost(&x, &y, features.len(), &params).map_err(|e| e.in_fold(fold))?;

    let y_true: Vec<String> = trunc_test.instances.iter().map(|i| i.label.clone()).collect();
    let y_pred: Vec<String> = trunc_test
        .instances
        .iter()
        .map(|i| predict(&model, &features.project(&vectorize(&tokenize(&i.text), &vocab))).0)
        .collect();
    let matrix = confusion(&y_true, &y_pred, &corpus.labels)?;
    Ok((mcc(&matrix), matrix))
}

/// Stratified k-fold evaluation of one strategy.
pub fn cross_validate(
    corpus: &Corpus,
    strategy: Strategy,
    trunc_cfg: &TruncationConfig,
    cfg: &EvalConfig,
) -> Result<CVResult> {
    let folds = stratified_folds(corpus, cfg.k, cfg.seed)?;
    let global_sitfl = if strategy.needs_sitfl() && cfg.leakage == LeakageMode::CorpusLevel {
        let params = BoostParams {
            seed: seed::derive(cfg.seed, &[u64::MAX]),
            ..cfg.boost.clone()
        };
        Some(build_sitfl_with_backend(
            corpus,
            cfg.n_features,
            cfg.min_df,
            &params,
            cfg.backend,
        )?)
    } else {
        None
    };

    let mut fold_mccs = Vec::with_capacity(cfg.k);
    let mut fold_confusions = Vec::with_capacity(cfg.k);
    for fold in 0..cfg.k {
        let (m, matrix) = eval_fold(
            corpus,
            &folds,
            fold,
            strategy,
            trunc_cfg,
            cfg,
            global_sitfl.as_ref(),
        )?;
        fold_mccs.push(m);
        fold_confusions.push(matrix);
    }
    let mean_mcc = fold_mccs.iter().sum::<f64>() / fold_mccs.len() as f64;
    Ok(CVResult {
        strategy: strategy.to_string(),
        leakage: cfg.leakage.to_string(),
        nta: trunc_cfg.nta,
        part1: trunc_cfg.part1,
        part2: trunc_cfg.part2,
        tn: trunc_cfg.tn,
        fold_mccs,
        mean_mcc,
        fold_confusions,
    })
}

/// The Cartesian grid of guided-truncation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub part1: Vec<f64>,
    pub part2: Vec<f64>,
    pub tn: Vec<usize>,
}

impl SweepGrid {
    /// The standard optimization grid: part1 in {0.1..0.5}, part2 in
    /// {0, 0.05, 0.1, 0.15}, tn in {1..10}; 200 points.
    pub fn standard() -> SweepGrid {
        SweepGrid {
            part1: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            part2: vec![0.0, 0.05, 0.1, 0.15],
            tn: (1..=10).collect(),
        }
    }

    fn points(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.part1.len() * self.part2.len() * self.tn.len());
        for &p1 in &self.part1 {
            for &p2 in &self.part2 {
                for &tn in &self.tn {
                    out.push((p1, p2, tn));
                }
            }
        }
        out
    }
}

/// One grid point's result; failed points carry the error message instead
/// of being dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub part1: f64,
    pub part2: f64,
    pub tn: usize,
    pub mean_mcc: Option<f64>,
    pub fold_mccs: Vec<f64>,
    pub error: Option<String>,
}

/// Grid of (part1, part2, tn) -> mean CV MCC, sorted best-first.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// CSV with header part1,part2,tn,mean_mcc,fold_mccs; fold MCCs are
    /// semicolon-separated shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["part1", "part2", "tn", "mean_mcc", "fold_mccs"])
            .expect("in-memory write");
        for row in &self.rows {
            let (mean, folds) = match (&row.mean_mcc, &row.error) {
                (Some(m), _) => (
                    m.to_string(),
                    row.fold_mccs
                        .iter()
                        .map(f64::to_string)
                        .collect::<Vec<_>>()
                        .join(";"),
                ),
                (None, err) => ("error".to_string(), err.clone().unwrap_or_default()),
            };
            w.write_record([
                &row.part1.to_string(),
                &row.part2.to_string(),
                &row.tn.to_string(),
                &mean,
                &folds,
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is UTF-8")
    }

    pub fn best(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.mean_mcc.is_some())
    }
}

fn sweep_point(
    corpus: &Corpus,
    nta: usize,
    cfg: &EvalConfig,
    (p1, p2, tn): (f64, f64, usize),
) -> SweepRow {
    let point_seed = seed::derive(cfg.seed, &[p1.to_bits(), p2.to_bits(), tn as u64]);
    let point_cfg = EvalConfig {
        seed: point_seed,
        ..cfg.clone()
    };
    let outcome = TruncationConfig::new(nta, p1, p2, tn, None)
        .and_then(|tc| cross_validate(corpus, Strategy::TextGuide, &tc, &point_cfg));
    match outcome {
        Ok(res) => SweepRow {
            part1: p1,
            part2: p2,
            tn,
            mean_mcc: Some(res.mean_mcc),
            fold_mccs: res.fold_mccs,
            error: None,
        },
        Err(e) => SweepRow {
            part1: p1,
            part2: p2,
            tn,
            mean_mcc: None,
            fold_mccs: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Evaluate the guided strategy at every grid point. Points run in parallel
/// when the `parallel` feature is on; per-point seeds make the results
/// identical either way.
pub fn sweep(
    corpus: &Corpus,
    grid: &SweepGrid,
    nta: usize,
    cfg: &EvalConfig,
) -> Result<SweepResult> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    #[cfg(feature = "parallel")]
    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&point| sweep_point(corpus, nta, cfg, point))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let mut rows: Vec<SweepRow> = points
        .iter()
        .map(|&point| sweep_point(corpus, nta, cfg, point))
        .collect();

    rows.sort_by(|a, b| {
        let key = |r: &SweepRow| r.mean_mcc.unwrap_or(f64::NEG_INFINITY);
        key(b)
            .partial_cmp(&key(a))
            .expect("grid means are finite")
            .then_with(|| a.part1.partial_cmp(&b.part1).unwrap())
            .then_with(|| a.part2.partial_cmp(&b.part2).unwrap())
            .then_with(|| a.tn.cmp(&b.tn))
    });
    Ok(SweepResult { rows })
}

/// Paired comparison: every strategy is evaluated on identical folds (the
/// fold split depends only on the corpus, k, and seed).
pub fn compare_strategies(
    corpus: &Corpus,
    strategies: &[(Strategy, TruncationConfig)],
    cfg: &EvalConfig,
) -> Result<Vec<CVResult>> {
    strategies
        .iter()
        .map(|(strategy, trunc_cfg)| cross_validate(corpus, *strategy, trunc_cfg, cfg))
        .collect()
}
