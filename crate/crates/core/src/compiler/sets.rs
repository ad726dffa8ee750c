use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::hash_words;
use crate::lattice::Lattice;

/// `(control, target)` of one CNOT.
pub type Pair = (usize, usize);

/// Above this many candidate pairs maximal sets are built greedily.
pub const EXACT_GROUND_SET: usize = 20;

/// Nearest-neighbour pairs with an entangled, free control and a fresh, free
/// target. `group_of` restricts pairs to sites with equal labels.
pub fn enumerate_pairs(lattice: &Lattice, entangled: u64, blocked: &[u8], group_of: Option<&[usize]>) -> Vec<Pair> {
    let mut out = Vec::new();
    for c in 0..lattice.len() {
        if entangled >> c & 1 == 0 || blocked[c] > 0 {
            continue;
        }
        for &t in lattice.neighbors(c) {
            if entangled >> t & 1 == 1 || blocked[t] > 0 {
                continue;
            }
            if group_of.is_some_and(|g| g[c] != g[t]) {
                continue;
            }
            out.push((c, t));
        }
    }
    out.sort_unstable();
    out
}

/// `far[s]` holds every site at distance `≥ r_g` from `s`.
pub(crate) fn far_masks(lattice: &Lattice, r_g_sq_in_a2: f64) -> Vec<u64> {
    (0..lattice.len())
        .map(|i| {
            (0..lattice.len())
                .filter(|&j| lattice.at_least(i, j, r_g_sq_in_a2))
                .fold(0u64, |m, j| m | 1 << j)
        })
        .collect()
}

fn compatible(far: &[u64], p: Pair, q: Pair) -> bool {
    let both = far[p.0] & far[p.1];
    both >> q.0 & 1 == 1 && both >> q.1 & 1 == 1
}

/// Maximal sets of pairs that may share a layer: disjoint sites and every
/// cross-pair distance at least `r_g`.
///
/// Small ground sets are enumerated exactly (Bron–Kerbosch); larger ones get
/// greedy maximal sets from `cap` shuffled orders. At most `cap` sets are
/// returned, largest first, ties broken by a seed-keyed hash.
pub fn enumerate_parallel_sets(
    lattice: &Lattice,
    pairs: &[Pair],
    r_g_sq_in_a2: f64,
    cap: usize,
    seed: u64,
    largest_only: bool,
) -> Vec<Vec<Pair>> {
    let far = far_masks(lattice, r_g_sq_in_a2);
    parallel_sets(&far, pairs, cap, seed, largest_only)
}

pub(crate) fn parallel_sets(far: &[u64], pairs: &[Pair], cap: usize, seed: u64, largest_only: bool) -> Vec<Vec<Pair>> {
    if pairs.is_empty() || cap == 0 {
        return Vec::new();
    }
    let n = pairs.len();
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i != j && compatible(far, pairs[i], pairs[j])).collect())
        .collect();
    let mut sets: Vec<Vec<usize>> = if n <= EXACT_GROUND_SET {
        let masks: Vec<u32> = adj
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &ok)| ok).fold(0u32, |m, (j, _)| m | 1 << j))
            .collect();
        let mut out = Vec::new();
        bron_kerbosch(&masks, 0, (1u32 << n) - 1, 0, &mut out);
        out.into_iter()
            .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for _ in 0..cap {
            order.shuffle(&mut rng);
            let mut chosen: Vec<usize> = Vec::new();
            for &i in &order {
                if chosen.iter().all(|&j| adj[i][j]) {
                    chosen.push(i);
                }
            }
            chosen.sort_unstable();
            out.push(chosen);
        }
        out.sort();
        out.dedup();
        out
    };
    let max = sets.iter().map(Vec::len).max().unwrap_or(0);
    if largest_only {
        sets.retain(|s| s.len() == max);
    }
    let mut ranked: Vec<(usize, u64, Vec<Pair>)> = sets
        .into_iter()
        .map(|s| {
            let set: Vec<Pair> = s.into_iter().map(|i| pairs[i]).collect();
            let words: Vec<u64> = set.iter().map(|&(c, t)| (c as u64) << 32 | t as u64).collect();
            (set.len(), hash_words(seed, &words), set)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2)));
    ranked.truncate(cap);
    ranked.into_iter().map(|(_, _, s)| s).collect()
}

fn bron_kerbosch(adj: &[u32], r: u32, mut p: u32, mut x: u32, out: &mut Vec<u32>) {
    if p == 0 {
        if x == 0 {
            out.push(r);
        }
        return;
    }
    let pivot = (p | x).trailing_zeros() as usize;
    let mut candidates = p & !adj[pivot];
    while candidates != 0 {
        let v = candidates.trailing_zeros() as usize;
        candidates &= candidates - 1;
        bron_kerbosch(adj, r | 1 << v, p & adj[v], x & adj[v], out);
        p &= !(1 << v);
        x |= 1 << v;
    }
}
