use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SearchConfiguration;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationPolicy {
    /// Fraction of each frontier that bin dropping must leave in place.
    pub keep_fraction: f64,
    pub max_geometries: usize,
    /// Only bins at least this far below the best entangled count are dropped.
    pub lag: usize,
    /// Parallel sets kept per configuration.
    pub set_cap: usize,
    /// Keep only the largest parallel sets.
    pub largest_sets_only: bool,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { keep_fraction: 0.5, max_geometries: 300, lag: 2, set_cap: 32, largest_sets_only: false }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::InvalidRequest(format!("keep_fraction {} outside (0, 1]", self.keep_fraction)));
        }
        if self.max_geometries == 0 || self.set_cap == 0 {
            return Err(Error::InvalidRequest("max_geometries and set_cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationStats {
    pub input: usize,
    pub dropped_bins: usize,
    pub dropped_by_bin: usize,
    pub dropped_by_cap: usize,
    pub kept: usize,
}

/// Bins by entangled count, drops the smallest bins while enough of the
/// frontier survives, then ranks and caps.
///
/// Ranking: larger entangled set, then centre of mass nearer the lattice
/// centre, then larger spread about the own centre of mass, then hash.
pub fn truncate_frontier(
    mut configs: Vec<SearchConfiguration>,
    policy: &TruncationPolicy,
) -> (Vec<SearchConfiguration>, TruncationStats) {
    let mut stats = TruncationStats { input: configs.len(), ..Default::default() };
    if configs.is_empty() {
        return (configs, stats);
    }
    let mut bins: BTreeMap<usize, usize> = BTreeMap::new();
    for c in &configs {
        *bins.entry(c.size()).or_default() += 1;
    }
    let best = *bins.keys().next_back().expect("nonempty");
    let need = (policy.keep_fraction * configs.len() as f64).ceil() as usize;
    let mut remaining = configs.len();
    let mut cutoff = 0;
    for (&size, &count) in &bins {
        if size + policy.lag > best || remaining - count < need.max(1) {
            break;
        }
        remaining -= count;
        cutoff = size + 1;
        stats.dropped_bins += 1;
        stats.dropped_by_bin += count;
    }
    configs.retain(|c| c.size() >= cutoff);
    configs.sort_by_key(|c| c.rank_key());
    stats.dropped_by_cap = configs.len().saturating_sub(policy.max_geometries);
    configs.truncate(policy.max_geometries);
    stats.kept = configs.len();
    (configs, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Lattice, LatticeSpec};

    fn lattice() -> Lattice {
        Lattice::build(LatticeSpec::square(4, 3.0)).unwrap()
    }

    #[test]
    fn single_config_unchanged() {
        let lat = lattice();
        let c = SearchConfiguration::from_sites(&lat, &[5], vec![0; 16], 0);
        let (out, stats) = truncate_frontier(vec![c.clone()], &TruncationPolicy::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].entangled, c.entangled);
        assert_eq!(stats.kept, 1);
    }

    #[test]
    fn centred_beats_cornered() {
        let lat = lattice();
        let corner = SearchConfiguration::from_sites(&lat, &[0, 1], vec![0; 16], 0);
        let centre = SearchConfiguration::from_sites(&lat, &[5, 6], vec![0; 16], 0);
        let (out, _) = truncate_frontier(vec![corner, centre.clone()], &TruncationPolicy::default());
        assert_eq!(out[0].entangled, centre.entangled);
    }

    #[test]
    fn cap_keeps_top_bins() {
        let lat = lattice();
        let mut configs = Vec::new();
        for i in 0..1000u64 {
            let size = 1 + (i % 6) as usize;
            let sites: Vec<usize> = (0..size).map(|k| (k + i as usize) % 16).collect();
            configs.push(SearchConfiguration::from_sites(&lat, &sites, vec![0; 16], i));
        }
        let policy = TruncationPolicy { max_geometries: 300, ..Default::default() };
        let (out, stats) = truncate_frontier(configs, &policy);
        assert_eq!(out.len(), 300);
        assert_eq!(stats.kept, 300);
        assert!(out.iter().all(|c| c.size() >= 5));
        assert!(out.windows(2).all(|w| w[0].size() >= w[1].size()));
    }
}
