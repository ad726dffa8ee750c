use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::QutritState;
use crate::error::{Error, Result};

const SHOTS_PER_TASK: u64 = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Counts atoms found in |0⟩ and in |1⟩.
    TwoState,
    /// Counts atoms found in |0⟩ only.
    SingleState,
}

/// Readout outcome; `ones` is `None` under the single-state scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReadoutBin {
    pub zeros: usize,
    pub ones: Option<usize>,
}

impl std::fmt::Display for ReadoutBin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.ones {
            Some(o) => write!(f, "({},{})", self.zeros, o),
            None => write!(f, "{}", self.zeros),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub scheme: Scheme,
    pub n_sites: usize,
    /// Number of shots, or 0 for an exact distribution.
    pub shots: u64,
    #[serde(with = "bin_list")]
    pub counts: BTreeMap<ReadoutBin, f64>,
}

impl Histogram {
    pub fn total(&self) -> f64 {
        self.counts.values().sum()
    }

    pub fn frequency(&self, bin: ReadoutBin) -> f64 {
        self.counts.get(&bin).copied().unwrap_or(0.0) / self.total()
    }
}

// JSON maps need string keys, so bins travel as a list of pairs.
mod bin_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use super::ReadoutBin;

    pub fn serialize<S: Serializer>(m: &BTreeMap<ReadoutBin, f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<ReadoutBin, f64>, D::Error> {
        Ok(Vec::<(ReadoutBin, f64)>::deserialize(d)?.into_iter().collect())
    }
}

fn readout(index: usize, n: usize, scheme: Scheme) -> ReadoutBin {
    let (mut zeros, mut ones, mut i) = (0, 0, index);
    for _ in 0..n {
        match i % 3 {
            0 => zeros += 1,
            1 => ones += 1,
            _ => {}
        }
        i /= 3;
    }
    ReadoutBin { zeros, ones: (scheme == Scheme::TwoState).then_some(ones) }
}

/// Exact readout distribution (weights sum to 1). Sites outside the layout read |0⟩.
pub fn exact_distribution(state: &QutritState, n_sites: usize, scheme: Scheme) -> Result<Histogram> {
    let total = state.norm_sq();
    if total == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let pad = n_sites.saturating_sub(state.n_sites());
    let mut counts = BTreeMap::new();
    for (i, a) in state.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            let mut bin = readout(i, state.n_sites(), scheme);
            bin.zeros += pad;
            *counts.entry(bin).or_insert(0.0) += p / total;
        }
    }
    Ok(Histogram { scheme, n_sites: state.n_sites() + pad, shots: 0, counts })
}

/// Projective measurements of every site. Shot `k` draws from a ChaCha
/// stream keyed by `(seed, k)`, so results do not depend on the thread count.
pub fn sample_measurements(state: &QutritState, shots: u64, scheme: Scheme, seed: u64) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let n = state.n_sites();
    let mut cdf = Vec::new();
    let mut bins = Vec::new();
    let mut acc = 0.0;
    for (i, a) in state.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            acc += p;
            cdf.push(acc);
            bins.push(readout(i, n, scheme));
        }
    }
    if acc == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let tasks = shots.div_ceil(SHOTS_PER_TASK);
    let partial: Vec<BTreeMap<ReadoutBin, u64>> = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut local = BTreeMap::new();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let end = ((task + 1) * SHOTS_PER_TASK).min(shots);
            for shot in task * SHOTS_PER_TASK..end {
                rng.set_stream(shot);
                rng.set_word_pos(0);
                let u = rng.random::<f64>() * acc;
                let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                *local.entry(bins[k]).or_insert(0u64) += 1;
            }
            local
        })
        .collect();
    let mut counts = BTreeMap::new();
    for m in partial {
        for (b, c) in m {
            *counts.entry(b).or_insert(0.0) += c as f64;
        }
    }
    Ok(Histogram { scheme, n_sites: n, shots, counts })
}
