//! Seeded synthetic corpora and feature tables.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{FeatureTable, N_FEATURES};
use crate::textsim::edit_distance;

const ONSETS: [&str; 20] = ["b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "st", "tr"];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "y"];
const CODAS: [&str; 8] = ["", "", "", "n", "r", "s", "x", "l"];
const PREFIXES: [&str; 8] = ["py", "node-", "js-", "go-", "lib", "python-", "easy-", "fast-"];
const SUFFIXES: [&str; 10] = ["-js", "-lib", "2", "-utils", "-cli", "-core", "-py", "-plus", "-tools", "-sdk"];

#[derive(Debug, Clone, PartialEq)]
pub struct NameCorpus {
    pub names: Vec<String>,
    /// (variant, original) with edit distance 1 or 2.
    pub typos: Vec<(String, String)>,
    /// (variant, original) sharing the original as a subword.
    pub subwords: Vec<(String, String)>,
}

fn word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("non-empty"));
        w.push_str(VOWELS.choose(rng).expect("non-empty"));
        w.push_str(CODAS.choose(rng).expect("non-empty"));
    }
    w
}

fn package_name(rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.3) {
        format!("{}-{}", word(rng), word(rng))
    } else {
        word(rng)
    }
}

fn random_letter(rng: &mut ChaCha8Rng) -> char {
    rng.gen_range(b'a'..=b'z') as char
}

/// One random insertion, deletion, substitution or adjacent swap.
fn mutate(name: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = name.chars().collect();
    let n = chars.len();
    match rng.gen_range(0..4) {
        0 => chars.insert(rng.gen_range(0..=n), random_letter(rng)),
        1 if n > 1 => {
            chars.remove(rng.gen_range(0..n));
        }
        2 if n > 1 => {
            let i = rng.gen_range(0..n - 1);
            chars.swap(i, i + 1);
        }
        _ => {
            let i = rng.gen_range(0..n);
            chars[i] = random_letter(rng);
        }
    }
    chars.into_iter().collect()
}

/// `n_names` distinct names plus typo and affix variants of distinct
/// originals. No variant collides with a corpus name or another variant.
pub fn name_corpus(seed: u64, n_names: usize, n_typos: usize, n_subwords: usize) -> NameCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = BTreeSet::new();
    let mut names = Vec::with_capacity(n_names);
    while names.len() < n_names {
        let name = package_name(&mut rng);
        if taken.insert(name.clone()) {
            names.push(name);
        }
    }
    let mut order: Vec<usize> = (0..n_names).collect();
    order.shuffle(&mut rng);
    let mut originals = order.into_iter();

    let mut typos = Vec::with_capacity(n_typos);
    while typos.len() < n_typos {
        let Some(i) = originals.next() else { break };
        let original = &names[i];
        for _ in 0..20 {
            let mut variant = mutate(original, &mut rng);
            if rng.gen_bool(0.4) {
                variant = mutate(&variant, &mut rng);
            }
            let d = edit_distance(&variant, original);
            if (1..=2).contains(&d) && variant.len() >= 3 && !variant.starts_with('-') && taken.insert(variant.clone()) {
                typos.push((variant, original.clone()));
                break;
            }
        }
    }

    let mut subwords = Vec::with_capacity(n_subwords);
    while subwords.len() < n_subwords {
        let Some(i) = originals.next() else { break };
        let original = &names[i];
        for _ in 0..20 {
            let variant = if rng.gen_bool(0.5) {
                format!("{}{original}", PREFIXES.choose(&mut rng).expect("non-empty"))
            } else {
                format!("{original}{}", SUFFIXES.choose(&mut rng).expect("non-empty"))
            };
            if taken.insert(variant.clone()) {
                subwords.push((variant, original.clone()));
                break;
            }
        }
    }
    NameCorpus { names, typos, subwords }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleTable {
    pub table: FeatureTable,
    /// Labels before noise.
    pub clean_labels: Vec<u8>,
}

pub const RULE_FEATURES: [usize; 3] = [0, 4, 12];

/// Uniform features; the label is `x0 + x4 + x12 > 1.5`, then each label is
/// flipped with probability `noise`.
pub fn rule_table(seed: u64, n: usize, noise: f64) -> RuleTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = FeatureTable::default();
    let mut clean_labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: [f64; N_FEATURES] = std::array::from_fn(|_| rng.gen::<f64>());
        let clean = u8::from(RULE_FEATURES.iter().map(|&i| row[i]).sum::<f64>() > 1.5);
        let label = if rng.gen_bool(noise) { 1 - clean } else { clean };
        clean_labels.push(clean);
        table.push(row, label);
    }
    RuleTable { table, clean_labels }
}

fn log_days(days: f64) -> f64 {
    days.ln_1p()
}

/// Pair-level feature table in which confusion rows tend to have weak
/// metadata quality, few versions, young timelines and suspicious content.
/// Every group overlaps between the classes. Balanced classes.
pub fn mq_correlated_table(seed: u64, n: usize) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = FeatureTable::default();
    for i in 0..n {
        let y = (i % 2) as u8;
        let confusion = y == 1;
        let mut r = [0.0; N_FEATURES];
        let lev: f64 = if confusion { rng.gen_range(0.6..0.95) } else { rng.gen_range(0.5..0.95) };
        r[0] = lev;
        r[1] = (lev + rng.gen_range(0.02..0.1)).min(1.0);
        r[2] = (lev + rng.gen_range(0.0..0.05)).min(1.0);
        let p_flag = if confusion { 0.3 } else { 0.8 };
        for slot in &mut r[3..7] {
            *slot = f64::from(u8::from(rng.gen_bool(p_flag)));
        }
        r[7] = if confusion { rng.gen_range(1..=6) as f64 } else { rng.gen_range(1..=60) as f64 };
        r[8] = rng.gen_range(0..=3) as f64;
        r[9] = rng.gen_range(0.0..0.4);
        r[10] = if confusion { rng.gen_range(0.3..1.0) } else { rng.gen_range(0.0..1.0) };
        let age: f64 = if confusion { rng.gen_range(1.0..1500.0) } else { rng.gen_range(100.0..5000.0) };
        r[11] = log_days(age);
        r[12] = log_days(rng.gen_range(0.0..age));
        r[13] = log_days(rng.gen_range(0.0..age));
        r[14] = if confusion { rng.gen_range(0.2..0.9) } else { rng.gen_range(0.4..1.2) };
        r[15] = if confusion { rng.gen_range(0.35..1.0) } else { rng.gen_range(0.0..0.45) };
        r[16] = if confusion { rng.gen_range(0.4..1.0) } else { rng.gen_range(0.0..0.5) };
        r[17] = if confusion { rng.gen_range(0.0..0.6) } else { rng.gen_range(0.0..0.5) };
        table.push(r, y);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_shape() {
        let c = name_corpus(7, 500, 50, 50);
        assert_eq!(c.names.len(), 500);
        assert_eq!(c.typos.len(), 50);
        assert_eq!(c.subwords.len(), 50);
        let names: BTreeSet<&String> = c.names.iter().collect();
        for (v, o) in &c.typos {
            assert!(!names.contains(v) && names.contains(o));
            assert!((1..=2).contains(&edit_distance(v, o)));
        }
        for (v, o) in &c.subwords {
            assert!(!names.contains(v) && v.contains(o.as_str()));
        }
        assert_eq!(c, name_corpus(7, 500, 50, 50));
    }

    #[test]
    fn rule_noise_rate() {
        let t = rule_table(1, 5000, 0.1);
        let flipped = t.table.labels.iter().zip(&t.clean_labels).filter(|(a, b)| a != b).count();
        assert!((400..600).contains(&flipped));
    }
}
