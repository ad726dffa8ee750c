//! Beam search for shallow GHZ-preparation circuits under a crosstalk radius.
//!
//! The search works in CZ rounds. Each configuration tracks the entangled
//! set and, in native mode, how many rounds each site must still wait while
//! its single-qubit gates run. Children apply one maximal set of parallel
//! CNOTs; the frontier is deduplicated up to lattice symmetry and truncated
//! after every round.

mod sets;
mod truncate;

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit_ir::{Circuit, Gate, Layer, Level};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeSpec};

pub use sets::{enumerate_pairs, enumerate_parallel_sets, Pair, EXACT_GROUND_SET};
pub use truncate::{truncate_frontier, TruncationPolicy, TruncationStats};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompileMode {
    /// H and CNOT output; no blocking between rounds.
    Logical,
    /// Native output; a site waits four rounds after each CZ.
    #[default]
    Native,
}

impl CompileMode {
    pub fn blocked_cycles(self) -> u8 {
        match self {
            CompileMode::Logical => 0,
            CompileMode::Native => 4,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GhzTarget {
    #[default]
    GlobalGhz,
    /// One GHZ state per group; sites outside every group stay in `|0⟩`.
    LocalGhz { groups: Vec<Vec<usize>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompileRequest {
    pub lattice: LatticeSpec,
    pub r_g_sq_in_a2: f64,
    pub mode: CompileMode,
    pub target: GhzTarget,
    pub policy: TruncationPolicy,
    pub seed: u64,
    /// CZ(φ) phase stamped into native output.
    pub cz_phi: f64,
    /// Defaults to a bound no connected lattice can exceed.
    pub max_rounds: Option<usize>,
}

impl CompileRequest {
    pub fn new(lattice: LatticeSpec, r_g_sq_in_a2: f64, mode: CompileMode) -> Self {
        Self {
            lattice,
            r_g_sq_in_a2,
            mode,
            target: GhzTarget::GlobalGhz,
            policy: TruncationPolicy::default(),
            seed: 0,
            cz_phi: 0.0,
            max_rounds: None,
        }
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        if !(self.r_g_sq_in_a2 >= 1.0) || !self.r_g_sq_in_a2.is_finite() {
            return Err(Error::InvalidRequest(format!("r_g^2 = {} a^2 must be finite and >= 1", self.r_g_sq_in_a2)));
        }
        if !self.cz_phi.is_finite() {
            return Err(Error::InvalidRequest("cz_phi must be finite".into()));
        }
        self.policy.validate()?;
        if let GhzTarget::LocalGhz { groups } = &self.target {
            let mut seen = vec![false; lattice.len()];
            if groups.is_empty() {
                return Err(Error::InvalidRequest("local target without groups".into()));
            }
            for (g, group) in groups.iter().enumerate() {
                if group.is_empty() {
                    return Err(Error::InvalidRequest(format!("group {g} is empty")));
                }
                for &s in group {
                    if s >= lattice.len() {
                        return Err(Error::InvalidRequest(format!("group {g}: site {s} out of range")));
                    }
                    if std::mem::replace(&mut seen[s], true) {
                        return Err(Error::InvalidRequest(format!("site {s} appears in two groups")));
                    }
                }
                if !connected(lattice, group) {
                    return Err(Error::InvalidRequest(format!("group {g} is not connected")));
                }
            }
        }
        Ok(())
    }
}

fn connected(lattice: &Lattice, sites: &[usize]) -> bool {
    let mut reached = vec![sites[0]];
    let mut i = 0;
    while i < reached.len() {
        for &t in lattice.neighbors(reached[i]) {
            if sites.contains(&t) && !reached.contains(&t) {
                reached.push(t);
            }
        }
        i += 1;
    }
    reached.len() == sites.len()
}

/// Seed-keyed splitmix64 fold; stable across platforms and releases.
pub(crate) fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ 0x6a09_e667_f3bc_c908);
    for &w in words {
        h = splitmix(h ^ w);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug)]
struct Round {
    pairs: Vec<Pair>,
    prev: Option<Arc<Round>>,
}

/// One node of the search.
#[derive(Clone, Debug)]
pub struct SearchConfiguration {
    pub entangled: u64,
    pub blocked: Vec<u8>,
    /// Sites that receive the initial Hadamard.
    pub starts: Arc<Vec<usize>>,
    history: Option<Arc<Round>>,
    pub rounds: usize,
    /// Distance of the entangled centre of mass from the lattice centre, μm.
    pub center_offset_um: f64,
    /// Mean distance of entangled sites from their own centre of mass, μm.
    pub spread_um: f64,
    key: Vec<u8>,
    hash: u64,
}

impl SearchConfiguration {
    /// A configuration with no history, keyed without symmetry reduction.
    pub fn from_sites(lattice: &Lattice, entangled: &[usize], blocked: Vec<u8>, seed: u64) -> Self {
        let mask = entangled.iter().fold(0u64, |m, &s| m | 1 << s);
        let identity = vec![(0..lattice.len()).collect::<Vec<_>>()];
        Self::build(lattice, &identity, seed, mask, blocked, Arc::new(entangled.to_vec()), None, 0)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        lattice: &Lattice,
        perms: &[Vec<usize>],
        seed: u64,
        entangled: u64,
        blocked: Vec<u8>,
        starts: Arc<Vec<usize>>,
        history: Option<Arc<Round>>,
        rounds: usize,
    ) -> Self {
        let n = lattice.len();
        let raw: Vec<u8> = (0..n)
            .map(|s| if entangled >> s & 1 == 1 { 1 + blocked[s] } else { 0 })
            .collect();
        let mut key = raw.clone();
        let mut image = vec![0u8; n];
        for p in perms {
            for s in 0..n {
                image[p[s]] = raw[s];
            }
            if image < key {
                key.copy_from_slice(&image);
            }
        }
        let words: Vec<u64> = key.chunks(8).map(|c| c.iter().fold(0u64, |w, &b| w << 8 | b as u64)).collect();
        let hash = hash_words(seed, &words);
        let members: Vec<usize> = (0..n).filter(|&s| entangled >> s & 1 == 1).collect();
        let m = members.len().max(1) as f64;
        let (sx, sy) = members.iter().fold((0.0, 0.0), |(x, y), &s| {
            let site = lattice.site(s);
            (x + site.x_um, y + site.y_um)
        });
        let (mx, my) = (sx / m, sy / m);
        let (cx, cy) = lattice.centroid();
        let spread = members
            .iter()
            .map(|&s| (lattice.site(s).x_um - mx).hypot(lattice.site(s).y_um - my))
            .sum::<f64>()
            / m;
        Self {
            entangled,
            blocked,
            starts,
            history,
            rounds,
            center_offset_um: (mx - cx).hypot(my - cy),
            spread_um: spread,
            key,
            hash,
        }
    }

    pub fn size(&self) -> usize {
        self.entangled.count_ones() as usize
    }

    /// Parallel CNOT sets applied so far, one entry per round (empty = wait).
    pub fn history(&self) -> Vec<Vec<Pair>> {
        let mut out = Vec::with_capacity(self.rounds);
        let mut node = self.history.as_deref();
        while let Some(r) = node {
            out.push(r.pairs.clone());
            node = r.prev.as_deref();
        }
        out.reverse();
        out
    }

    /// Symmetry-reduced state: 0 for fresh sites, 1 + blocked otherwise.
    pub fn canonical_key(&self) -> &[u8] {
        &self.key
    }

    pub fn tie_hash(&self) -> u64 {
        self.hash
    }

    /// Metrics quantised so that symmetric configurations tie exactly.
    pub(crate) fn rank_key(&self) -> (std::cmp::Reverse<usize>, i64, std::cmp::Reverse<i64>, u64) {
        let q = |x: f64| (x * 1e6).round() as i64;
        (std::cmp::Reverse(self.size()), q(self.center_offset_um), std::cmp::Reverse(q(self.spread_um)), self.hash)
    }
}

/// Result of the search before lowering: starts plus CNOT rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzPlan {
    pub lattice: LatticeSpec,
    pub starts: Vec<usize>,
    pub rounds: Vec<Vec<Pair>>,
    pub blocked_cycles: u8,
}

impl CzPlan {
    pub fn cnot_count(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    /// Index of the last round with a CNOT.
    pub fn last_active_round(&self) -> Option<usize> {
        self.rounds.iter().rposition(|r| !r.is_empty())
    }

    /// One Hadamard layer followed by one CNOT layer per non-empty round.
    pub fn to_logical_circuit(&self) -> Result<Circuit> {
        let mut circuit = Circuit::new(Level::Logical, self.lattice.clone());
        circuit.layers.push(Layer::new(self.starts.iter().map(|&site| Gate::H { site }).collect())?);
        for round in self.rounds.iter().filter(|r| !r.is_empty()) {
            circuit
                .layers
                .push(Layer::new(round.iter().map(|&(control, target)| Gate::Cnot { control, target }).collect())?);
        }
        Ok(circuit)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub frontier: usize,
    pub children: usize,
    pub unique: usize,
    pub truncation: TruncationStats,
    pub best_entangled: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub mode: CompileMode,
    pub r_g_sq_in_a2: f64,
    pub seed: u64,
    pub initial_configurations: usize,
    pub rounds: Vec<RoundReport>,
    pub solutions: usize,
    pub cz_rounds: usize,
    pub cnot_count: usize,
    pub depth: usize,
}

#[derive(Clone, Debug)]
pub struct CompileOutput {
    pub circuit: Circuit,
    pub plan: CzPlan,
    pub report: SearchReport,
}

struct Search<'a> {
    lattice: &'a Lattice,
    far: Vec<u64>,
    perms: Vec<Vec<usize>>,
    group_of: Option<Vec<usize>>,
    blocked_cycles: u8,
    seed: u64,
    policy: &'a TruncationPolicy,
    r_g_sq_in_a2: f64,
    target: u64,
}

impl Search<'_> {
    fn child(&self, parent: &SearchConfiguration, set: Vec<Pair>) -> SearchConfiguration {
        let mut blocked = parent.blocked.clone();
        for b in blocked.iter_mut() {
            *b = b.saturating_sub(1);
        }
        let mut entangled = parent.entangled;
        for &(c, t) in &set {
            blocked[c] = self.blocked_cycles;
            blocked[t] = self.blocked_cycles;
            entangled |= 1 << t;
        }
        let round = Arc::new(Round { pairs: set, prev: parent.history.clone() });
        SearchConfiguration::build(
            self.lattice,
            &self.perms,
            self.seed,
            entangled,
            blocked,
            parent.starts.clone(),
            Some(round),
            parent.rounds + 1,
        )
    }

    fn expand(&self, config: &SearchConfiguration) -> Vec<SearchConfiguration> {
        let pairs = enumerate_pairs(self.lattice, config.entangled, &config.blocked, self.group_of.as_deref());
        if pairs.is_empty() {
            if config.blocked.iter().all(|&b| b == 0) {
                return Vec::new();
            }
            return vec![self.child(config, Vec::new())];
        }
        let sets = sets::parallel_sets(
            &self.far,
            &pairs,
            self.policy.set_cap,
            self.seed ^ config.hash,
            self.policy.largest_sets_only,
        );
        sets.into_iter().map(|s| self.child(config, s)).collect()
    }

    fn dedup(&self, configs: Vec<SearchConfiguration>) -> Vec<SearchConfiguration> {
        let mut seen: HashSet<Vec<u8>> = HashSet::with_capacity(configs.len());
        configs.into_iter().filter(|c| seen.insert(c.key.clone())).collect()
    }

    fn initial(&self, groups: &[Vec<usize>]) -> Vec<SearchConfiguration> {
        let n = self.lattice.len();
        let mut starts: Vec<Vec<usize>> = vec![Vec::new()];
        for g in groups {
            starts = starts
                .into_iter()
                .flat_map(|prefix| {
                    g.iter().map(move |&s| {
                        let mut next = prefix.clone();
                        next.push(s);
                        next
                    })
                })
                .collect();
        }
        let configs = starts
            .into_iter()
            .map(|s| {
                let mask = s.iter().fold(0u64, |m, &x| m | 1 << x);
                SearchConfiguration::build(self.lattice, &self.perms, self.seed, mask, vec![0; n], Arc::new(s), None, 0)
            })
            .collect();
        self.dedup(configs)
    }
}

fn partition_preserving(perms: Vec<Vec<usize>>, groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let sorted: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.sort_unstable();
            g
        })
        .collect();
    perms
        .into_iter()
        .filter(|p| {
            sorted.iter().all(|g| {
                let mut image: Vec<usize> = g.iter().map(|&s| p[s]).collect();
                image.sort_unstable();
                sorted.contains(&image)
            })
        })
        .collect()
}

/// Runs the search and lowers the best plan.
///
/// Native mode returns a native circuit with pinned pipelining; logical mode
/// returns the H + CNOT circuit.
pub fn compile(request: &CompileRequest) -> Result<CompileOutput> {
    let lattice = Lattice::build(request.lattice.clone())?;
    request.validate(&lattice)?;
    let n = lattice.len();
    let groups: Vec<Vec<usize>> = match &request.target {
        GhzTarget::GlobalGhz => vec![(0..n).collect()],
        GhzTarget::LocalGhz { groups } => groups.clone(),
    };
    let target = groups.iter().flatten().fold(0u64, |m, &s| m | 1 << s);
    let group = lattice.symmetry_group();
    let (perms, group_of) = match &request.target {
        GhzTarget::GlobalGhz => (group.perms, None),
        GhzTarget::LocalGhz { groups } => {
            let mut label = vec![usize::MAX; n];
            for (g, sites) in groups.iter().enumerate() {
                for &s in sites {
                    label[s] = g;
                }
            }
            (partition_preserving(group.perms, groups), Some(label))
        }
    };
    let search = Search {
        lattice: &lattice,
        far: sets::far_masks(&lattice, request.r_g_sq_in_a2),
        perms,
        group_of,
        blocked_cycles: request.mode.blocked_cycles(),
        seed: request.seed,
        policy: &request.policy,
        r_g_sq_in_a2: request.r_g_sq_in_a2,
        target,
    };
    // Global GHZ starts from one site per symmetry orbit.
    let initial = match &request.target {
        GhzTarget::GlobalGhz => search.initial(&[lattice.unique_sites()]),
        GhzTarget::LocalGhz { .. } => search.initial(&groups),
    };
    let mut report = SearchReport {
        mode: request.mode,
        r_g_sq_in_a2: request.r_g_sq_in_a2,
        seed: request.seed,
        initial_configurations: initial.len(),
        ..Default::default()
    };
    let max_rounds = request.max_rounds.unwrap_or((search.blocked_cycles as usize + 1) * n + 1);
    let mut frontier = initial;
    let mut round = 0;
    let solution = loop {
        let mut done: Vec<&SearchConfiguration> = frontier.iter().filter(|c| c.entangled == search.target).collect();
        if !done.is_empty() {
            report.solutions = done.len();
            done.sort_by_key(|c| (c.hash, c.key.clone()));
            break done[0].clone();
        }
        if round >= max_rounds || frontier.is_empty() {
            return Err(Error::SearchExhausted { rounds: round });
        }
        let children: Vec<SearchConfiguration> =
            frontier.par_iter().flat_map_iter(|c| search.expand(c)).collect();
        let n_children = children.len();
        let unique = search.dedup(children);
        let n_unique = unique.len();
        let best_entangled = unique.iter().map(|c| c.size()).max().unwrap_or(0);
        let solved: Vec<SearchConfiguration> = unique.iter().filter(|c| c.entangled == target).cloned().collect();
        let (kept, truncation) = if solved.is_empty() {
            truncate_frontier(unique, search.policy)
        } else {
            let stats = TruncationStats { input: n_unique, kept: solved.len(), ..Default::default() };
            (solved, stats)
        };
        report.rounds.push(RoundReport {
            round,
            frontier: frontier.len(),
            children: n_children,
            unique: n_unique,
            truncation,
            best_entangled,
        });
        frontier = kept;
        round += 1;
    };
    let mut rounds = solution.history();
    while rounds.last().is_some_and(Vec::is_empty) {
        rounds.pop();
    }
    let plan = CzPlan {
        lattice: request.lattice.clone(),
        starts: solution.starts.as_ref().clone(),
        rounds,
        blocked_cycles: search.blocked_cycles,
    };
    let mut circuit = match request.mode {
        CompileMode::Native => crate::scheduler::lower_plan(&plan, &lattice, search.r_g_sq_in_a2, request.cz_phi)?,
        CompileMode::Logical => plan.to_logical_circuit()?,
    };
    circuit.metadata.r_g_sq_in_a2 = Some(request.r_g_sq_in_a2);
    circuit.metadata.notes.insert("compile_seed".into(), request.seed.into());
    circuit.metadata.notes.insert("compile_mode".into(), serde_json::to_value(request.mode)?);
    if let GhzTarget::LocalGhz { groups } = &request.target {
        circuit.metadata.notes.insert("ghz_groups".into(), serde_json::to_value(groups)?);
    }
    let violations = crate::circuit_ir::validate_parallel_layers(&circuit, &lattice, request.r_g_sq_in_a2);
    if !violations.is_empty() {
        return Err(Error::Infeasible(format!("{} crosstalk violations in compiled output", violations.len())));
    }
    report.cz_rounds = plan.rounds.len();
    report.cnot_count = plan.cnot_count();
    report.depth = circuit.depth();
    Ok(CompileOutput { circuit, plan, report })
}

/// [`compile`] for a [`GhzTarget::LocalGhz`] request.
pub fn compile_local_ghz(request: &CompileRequest) -> Result<CompileOutput> {
    match request.target {
        GhzTarget::LocalGhz { .. } => compile(request),
        GhzTarget::GlobalGhz => Err(Error::InvalidRequest("compile_local_ghz needs site groups".into())),
    }
}

/// The three five-site repetition-code groups used for the 4×4 local GHZ
/// example: T-shaped blocks tiling fifteen sites, the last corner unused.
pub fn repetition_code_groups() -> Vec<Vec<usize>> {
    vec![vec![0, 1, 2, 3, 5], vec![4, 8, 9, 12, 13], vec![6, 7, 10, 11, 14]]
}
