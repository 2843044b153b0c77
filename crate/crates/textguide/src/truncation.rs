//! Truncation strategies: naive head, tail, head+tail, importance-guided
//! assembly, and the hybrid variant that only guides instances well past
//! the budget.
//!
//! The guided path assembles the output as head segment, then token groups
//! in importance-rank order, then the tail segment. Tokens move from a
//! working residual into the output and are never reused, so later searches
//! and windows operate on the shrunken sequence.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::{detokenize, tokenize, Corpus, TokenSequence};
use crate::error::{Error, Result};
use crate::importance::Sitfl;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Token budgets for guided truncation.
///
/// Derived budgets: `head = floor(part1*nta)`, `tail = floor(part2*nta)`,
/// `fill = nta - head - tail`; flooring leftovers go to the fill section so
/// the budget is never exceeded.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationConfig {
    pub nta: usize,
    pub part1: f64,
    pub part2: f64,
    pub tn: usize,
    pub hybrid_factor: Option<f64>,
}

impl TruncationConfig {
    pub fn new(
        nta: usize,
        part1: f64,
        part2: f64,
        tn: usize,
        hybrid_factor: Option<f64>,
    ) -> Result<TruncationConfig> {
        if nta == 0 {
            return Err(Error::InvalidConfig("nta must be >= 1".into()));
        }
        for (name, v) in [("part1", part1), ("part2", part2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        if part1 + part2 > 1.0 + 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "part1 + part2 must be <= 1, got {part1} + {part2}"
            )));
        }
        if let Some(f) = hybrid_factor {
            if f < 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "hybrid_factor must be >= 1, got {f}"
                )));
            }
        }
        Ok(TruncationConfig {
            nta,
            part1,
            part2,
            tn,
            hybrid_factor,
        })
    }

    pub fn head_budget(&self) -> usize {
        floor_fraction(self.part1, self.nta)
    }

    pub fn tail_budget(&self) -> usize {
        floor_fraction(self.part2, self.nta)
    }

    pub fn fill_budget(&self) -> usize {
        self.nta - self.head_budget() - self.tail_budget()
    }
}

impl Default for TruncationConfig {
    /// NTA 510 (512-limit models reserve two special tokens), the worked
    /// parameter point part1=0.2 / part2=0.1, tn=2, hybrid threshold 1.5.
    fn default() -> Self {
        TruncationConfig {
            nta: 510,
            part1: 0.2,
            part2: 0.1,
            tn: 2,
            hybrid_factor: Some(1.5),
        }
    }
}

// floor(fraction * nta) with a tolerance for products like 0.29 * 100
// landing just under an integer.
fn floor_fraction(fraction: f64, nta: usize) -> usize {
    (fraction * nta as f64 + 1e-9).floor() as usize
}

/// Truncation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// No-op; useful as a comparison anchor.
    Identity,
    Head,
    Tail,
    HeadTail,
    TextGuide,
    Hybrid,
}

impl Strategy {
    pub const NAMES: [&'static str; 5] = ["head", "tail", "head_tail", "text_guide", "hybrid"];

    pub fn needs_sitfl(self) -> bool {
        matches!(self, Strategy::TextGuide | Strategy::Hybrid)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Strategy> {
        match s {
            "identity" => Ok(Strategy::Identity),
            "head" => Ok(Strategy::Head),
            "tail" => Ok(Strategy::Tail),
            "head_tail" => Ok(Strategy::HeadTail),
            "text_guide" => Ok(Strategy::TextGuide),
            "hybrid" => Ok(Strategy::Hybrid),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy {other:?}; valid strategies: {}",
                Strategy::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Identity => "identity",
            Strategy::Head => "head",
            Strategy::Tail => "tail",
            Strategy::HeadTail => "head_tail",
            Strategy::TextGuide => "text_guide",
            Strategy::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Head,
    Group,
    Tail,
    Pad,
}

/// Provenance for one piece of an assembled output instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub anchor: Option<String>,
    pub rank: Option<usize>,
    pub len: usize,
}

impl Segment {
    fn plain(kind: SegmentKind, len: usize) -> Segment {
        Segment {
            kind,
            anchor: None,
            rank: None,
            len,
        }
    }
}

/// First min(len, nta) tokens.
pub fn truncate_head(tokens: &[String], nta: usize) -> TokenSequence {
    tokens[..tokens.len().min(nta)].to_vec()
}

/// Last min(len, nta) tokens.
pub fn truncate_tail(tokens: &[String], nta: usize) -> TokenSequence {
    tokens[tokens.len() - tokens.len().min(nta)..].to_vec()
}

/// `floor(part1*nta)` leading tokens plus the remaining budget from the end.
/// Requires part1 + part2 == 1; identity when the input already fits.
pub fn truncate_head_tail(
    tokens: &[String],
    nta: usize,
    part1: f64,
    part2: f64,
) -> Result<TokenSequence> {
    if (part1 + part2 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSplit { part1, part2 });
    }
    if tokens.len() <= nta {
        return Ok(tokens.to_vec());
    }
    let head_len = floor_fraction(part1, nta);
    let tail_len = nta - head_len;
    if head_len + tail_len > tokens.len() {
        // would overlap; cannot happen for len > nta, kept as the safe fallback
        return Ok(tokens.to_vec());
    }
    let mut out = tokens[..head_len].to_vec();
    out.extend_from_slice(&tokens[tokens.len() - tail_len..]);
    Ok(out)
}

/// Guided truncation with per-segment provenance.
pub fn text_guide_trace(
    tokens: &[String],
    sitfl: &Sitfl,
    cfg: &TruncationConfig,
) -> Result<(TokenSequence, Vec<Segment>)> {
    if tokens.len() <= cfg.nta {
        return Ok((
            tokens.to_vec(),
            vec![Segment::plain(SegmentKind::Head, tokens.len())],
        ));
    }
    let head_budget = cfg.head_budget();
    let tail_budget = cfg.tail_budget();
    let fill_budget = cfg.fill_budget();

    let head = &tokens[..head_budget];
    let tail = &tokens[tokens.len() - tail_budget..];
    let mut residual: Vec<&String> =
        tokens[head_budget..tokens.len() - tail_budget].iter().collect();

    if sitfl.entries.is_empty() && fill_budget > 0 && residual.is_empty() {
        return Err(Error::EmptySitfl);
    }

    let mut segments = Vec::new();
    if head_budget > 0 {
        segments.push(Segment::plain(SegmentKind::Head, head_budget));
    }
    let mut middle: Vec<&String> = Vec::with_capacity(fill_budget);
    for (rank, (token, _)) in sitfl.entries.iter().enumerate() {
        if middle.len() >= fill_budget {
            break;
        }
        let Some(pos) = residual.iter().position(|t| *t == token) else {
            continue;
        };
        let lo = pos.saturating_sub(cfg.tn);
        let hi = (pos + cfg.tn + 1).min(residual.len());
        let mut group: Vec<&String> = residual.drain(lo..hi).collect();
        let remaining = fill_budget - middle.len();
        group.truncate(remaining); // final group is right-truncated to fit
        segments.push(Segment {
            kind: SegmentKind::Group,
            anchor: Some(token.clone()),
            rank: Some(rank + 1),
            len: group.len(),
        });
        middle.extend(group);
    }
    if middle.len() < fill_budget {
        // sITFL exhausted: pad with the residual's leading tokens.
        let pad = fill_budget - middle.len();
        middle.extend(residual.drain(..pad));
        segments.push(Segment::plain(SegmentKind::Pad, pad));
    }
    if tail_budget > 0 {
        segments.push(Segment::plain(SegmentKind::Tail, tail_budget));
    }

    let mut out: TokenSequence = Vec::with_capacity(cfg.nta);
    out.extend(head.iter().cloned());
    out.extend(middle.into_iter().cloned());
    out.extend(tail.iter().cloned());
    debug_assert_eq!(out.len(), cfg.nta);
    Ok((out, segments))
}

/// Guided truncation of a single token sequence.
pub fn text_guide(
    tokens: &[String],
    sitfl: &Sitfl,
    cfg: &TruncationConfig,
) -> Result<TokenSequence> {
    text_guide_trace(tokens, sitfl, cfg).map(|(out, _)| out)
}

/// Head-only truncation below `hybrid_factor * nta`, guided truncation above.
pub fn text_guide_hybrid(
    tokens: &[String],
    sitfl: &Sitfl,
    cfg: &TruncationConfig,
) -> Result<TokenSequence> {
    text_guide_hybrid_trace(tokens, sitfl, cfg).map(|(out, _)| out)
}

pub fn text_guide_hybrid_trace(
    tokens: &[String],
    sitfl: &Sitfl,
    cfg: &TruncationConfig,
) -> Result<(TokenSequence, Vec<Segment>)> {
    let factor = cfg.hybrid_factor.unwrap_or(1.5);
    if (tokens.len() as f64) <= factor * cfg.nta as f64 {
        let out = truncate_head(tokens, cfg.nta);
        let len = out.len();
        Ok((out, vec![Segment::plain(SegmentKind::Head, len)]))
    } else {
        text_guide_trace(tokens, sitfl, cfg)
    }
}

/// Per-instance provenance, written to the optional sidecar JSONL.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceProvenance {
    pub id: String,
    pub strategy: String,
    pub segments: Vec<Segment>,
}

/// A truncated corpus with per-instance provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationOutput {
    pub corpus: Corpus,
    pub provenance: Vec<InstanceProvenance>,
}

fn truncate_one(
    tokens: &[String],
    strategy: Strategy,
    sitfl: Option<&Sitfl>,
    cfg: &TruncationConfig,
) -> Result<(TokenSequence, Vec<Segment>)> {
    let simple = |kind: SegmentKind, out: TokenSequence| {
        let len = out.len();
        (out, vec![Segment::plain(kind, len)])
    };
    Ok(match strategy {
        Strategy::Identity => simple(SegmentKind::Head, tokens.to_vec()),
        Strategy::Head => simple(SegmentKind::Head, truncate_head(tokens, cfg.nta)),
        Strategy::Tail => simple(SegmentKind::Tail, truncate_tail(tokens, cfg.nta)),
        Strategy::HeadTail => {
            let out = truncate_head_tail(tokens, cfg.nta, cfg.part1, cfg.part2)?;
            if tokens.len() <= cfg.nta {
                simple(SegmentKind::Head, out)
            } else {
                let head_len = floor_fraction(cfg.part1, cfg.nta);
                let segments = vec![
                    Segment::plain(SegmentKind::Head, head_len),
                    Segment::plain(SegmentKind::Tail, cfg.nta - head_len),
                ];
                (out, segments)
            }
        }
        Strategy::TextGuide => {
            let sitfl = sitfl.ok_or_else(|| Error::MissingSitfl(strategy.to_string()))?;
            text_guide_trace(tokens, sitfl, cfg)?
        }
        Strategy::Hybrid => {
            let sitfl = sitfl.ok_or_else(|| Error::MissingSitfl(strategy.to_string()))?;
            text_guide_hybrid_trace(tokens, sitfl, cfg)?
        }
    })
}

fn apply_instance(
    inst: &crate::corpus::TextInstance,
    strategy: Strategy,
    sitfl: Option<&Sitfl>,
    cfg: &TruncationConfig,
) -> Result<(crate::corpus::TextInstance, InstanceProvenance)> {
    let tokens = tokenize(&inst.text);
    let (out, segments) = truncate_one(&tokens, strategy, sitfl, cfg)?;
    Ok((
        crate::corpus::TextInstance {
            id: inst.id.clone(),
            text: detokenize(&out),
            label: inst.label.clone(),
        },
        InstanceProvenance {
            id: inst.id.clone(),
            strategy: strategy.to_string(),
            segments,
        },
    ))
}

/// Sequential corpus transformation; always available as the reference path.
pub fn apply_strategy_serial(
    corpus: &Corpus,
    strategy: Strategy,
    sitfl: Option<&Sitfl>,
    cfg: &TruncationConfig,
) -> Result<TruncationOutput> {
    if strategy.needs_sitfl() && sitfl.is_none() {
        return Err(Error::MissingSitfl(strategy.to_string()));
    }
    let results: Result<Vec<_>> = corpus
        .instances
        .iter()
        .map(|inst| apply_instance(inst, strategy, sitfl, cfg))
        .collect();
    collect_output(corpus, results?)
}

/// Transform every instance; ids and labels preserved, output in input
/// order. Data-parallel across instances when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn apply_strategy(
    corpus: &Corpus,
    strategy: Strategy,
    sitfl: Option<&Sitfl>,
    cfg: &TruncationConfig,
) -> Result<TruncationOutput> {
    if strategy.needs_sitfl() && sitfl.is_none() {
        return Err(Error::MissingSitfl(strategy.to_string()));
    }
    let results: Result<Vec<_>> = corpus
        .instances
        .par_iter()
        .map(|inst| apply_instance(inst, strategy, sitfl, cfg))
        .collect();
    collect_output(corpus, results?)
}

#[cfg(not(feature = "parallel"))]
pub fn apply_strategy(
    corpus: &Corpus,
    strategy: Strategy,
    sitfl: Option<&Sitfl>,
    cfg: &TruncationConfig,
) -> Result<TruncationOutput> {
    apply_strategy_serial(corpus, strategy, sitfl, cfg)
}

fn collect_output(
    corpus: &Corpus,
    results: Vec<(crate::corpus::TextInstance, InstanceProvenance)>,
) -> Result<TruncationOutput> {
    let (instances, provenance): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(TruncationOutput {
        corpus: Corpus {
            instances,
            labels: corpus.labels.clone(),
        },
        provenance,
    })
}
