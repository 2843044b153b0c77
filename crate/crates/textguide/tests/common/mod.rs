//! Shared test helpers: independent oracles (written as literal
//! transcriptions of the documented procedures, separate from the library
//! implementations) and synthetic data generators.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;

use textguide::corpus::{Corpus, TextInstance};
use textguide::importance::Sitfl;

/// Step-by-step guided-truncation oracle. Deliberately naive: works on an
/// explicit "original" copy with per-position deletes and linear scans,
/// mirroring the procedure description rather than the library code.
pub fn text_guide_oracle(
    tokens: &[String],
    sitfl: &[(String, f64)],
    nta: usize,
    part1: f64,
    part2: f64,
    tn: usize,
) -> Vec<String> {
    // Only instances that exceed the length limit are processed.
    if tokens.len() <= nta {
        return tokens.to_vec();
    }
    let head_budget = (part1 * nta as f64 + 1e-9).floor() as usize;
    let tail_budget = (part2 * nta as f64 + 1e-9).floor() as usize;
    let fill_budget = nta - head_budget - tail_budget;

    let mut original: Vec<String> = tokens.to_vec();
    // Step 1: store the beginning of the new instance and delete the
    // portion from the original; reserve the ending likewise.
    let new_head: Vec<String> = original.drain(0..head_budget).collect();
    let tail: Vec<String> = original.split_off(original.len() - tail_budget);

    // Steps 2-4: fill the middle by iterating the importance list.
    let mut middle: Vec<String> = Vec::new();
    for (token, _) in sitfl {
        if middle.len() >= fill_budget {
            break;
        }
        let mut found = None;
        for (i, t) in original.iter().enumerate() {
            if t == token {
                found = Some(i);
                break;
            }
        }
        let Some(p) = found else { continue };
        let start = p.saturating_sub(tn);
        let end = (p + tn + 1).min(original.len());
        let mut group: Vec<String> = Vec::new();
        for i in start..end {
            group.push(original[i].clone());
        }
        for i in (start..end).rev() {
            original.remove(i);
        }
        while middle.len() + group.len() > fill_budget {
            group.pop();
        }
        middle.extend(group);
    }
    // If the list ran dry, complete with the remaining text's beginning.
    while middle.len() < fill_budget {
        middle.push(original.remove(0));
    }

    let mut out = new_head;
    out.extend(middle);
    out.extend(tail);
    out
}

/// Brute-force joint-histogram MI oracle over (presence, class).
pub fn mi_oracle(corpus: &Corpus, token: &str) -> f64 {
    let n = corpus.len() as f64;
    let classes = &corpus.labels;
    let mut joint = vec![[0usize; 2]; classes.len()];
    for inst in &corpus.instances {
        let y = classes.iter().position(|c| c == &inst.label).unwrap();
        let x = usize::from(
            textguide::corpus::tokenize(&inst.text)
                .iter()
                .any(|t| t == token),
        );
        joint[y][x] += 1;
    }
    let mut mi = 0.0;
    for x in 0..2 {
        let px: f64 = joint.iter().map(|row| row[x] as f64).sum::<f64>() / n;
        for (y, row) in joint.iter().enumerate() {
            let py: f64 = joint[y].iter().sum::<usize>() as f64 / n;
            let pxy = row[x] as f64 / n;
            if pxy > 0.0 {
                mi += pxy * (pxy / (px * py)).ln();
            }
        }
    }
    mi
}

/// Binary-MCC closed form over a 2x2 matrix [[tp, fn], [fp, tn]].
pub fn binary_mcc_oracle(tp: f64, fn_: f64, fp: f64, tn: f64) -> f64 {
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

pub fn random_tokens(rng: &mut StdRng, len: usize, alphabet: usize) -> Vec<String> {
    (0..len)
        .map(|_| format!("w{}", rng.gen_range(0..alphabet)))
        .collect()
}

pub fn sitfl_from(tokens: &[&str]) -> Sitfl {
    let n = tokens.len();
    Sitfl {
        entries: tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), (n - i) as f64))
            .collect(),
        n,
        corpus_sha256: String::new(),
        seed: 0,
    }
}

pub fn corpus_from(rows: Vec<(String, String, String)>) -> Corpus {
    Corpus::from_instances(
        rows.into_iter()
            .map(|(id, text, label)| TextInstance { id, text, label })
            .collect(),
    )
    .unwrap()
}

/// The directional-experiment corpus: long filler documents with a handful
/// of class keywords planted past the head region.
pub fn planted_corpus(
    rng: &mut StdRng,
    instances: usize,
    classes: usize,
    filler_len: usize,
    keywords_per_class: usize,
    min_plant_pos: usize,
) -> Corpus {
    let filler_pool = 300;
    let rows = (0..instances)
        .map(|i| {
            let class = i % classes;
            let mut tokens: Vec<String> = (0..filler_len)
                .map(|_| format!("filler{}", rng.gen_range(0..filler_pool)))
                .collect();
            let mut positions: Vec<usize> = Vec::new();
            while positions.len() < keywords_per_class {
                let p = rng.gen_range(min_plant_pos + 1..filler_len);
                if !positions.contains(&p) {
                    positions.push(p);
                }
            }
            for (kw, &p) in positions.iter().enumerate().map(|(k, p)| (k, p)) {
                tokens[p] = format!("class{class}kw{kw}");
            }
            (
                i.to_string(),
                tokens.join(" "),
                format!("c{class}"),
            )
        })
        .collect();
    corpus_from(rows)
}
