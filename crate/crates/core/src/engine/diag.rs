//! Diagonal part of the Hamiltonian, which depends only on which sites sit in
//! `|r⟩`. Values are tabulated per Rydberg mask (2^N entries) and looked up
//! through split digit tables, so nothing of size 3^N is stored.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

const LOW_DIGITS: usize = 8;

/// Maps amplitude indices to Rydberg-site bitmasks.
#[derive(Clone, Debug)]
pub struct MaskIndex {
    low: Vec<u16>,
    high: Vec<u16>,
    low_len: usize,
}

impl MaskIndex {
    pub fn new(n: usize) -> Self {
        let nl = n.min(LOW_DIGITS);
        let table = |digits: usize, shift: usize| -> Vec<u16> {
            (0..3usize.pow(digits as u32))
                .map(|mut i| {
                    let mut m = 0u16;
                    for d in 0..digits {
                        if i % 3 == 2 {
                            m |= 1 << (d + shift);
                        }
                        i /= 3;
                    }
                    m
                })
                .collect()
        };
        let low = table(nl, 0);
        let high = table(n - nl, nl);
        Self { low_len: low.len(), low, high }
    }

    #[inline]
    pub fn mask(&self, idx: usize) -> u16 {
        self.high[idx / self.low_len] | self.low[idx % self.low_len]
    }

    /// Visits amplitudes chunk by chunk with their masks; parallel over chunks.
    pub fn for_each_mut<F>(&self, amps: &mut [C64], f: F)
    where
        F: Fn(u16, &mut C64) + Sync,
    {
        amps.par_chunks_mut(self.low_len).zip(self.high.par_iter()).for_each(|(chunk, &hm)| {
            for (a, &lm) in chunk.iter_mut().zip(&self.low) {
                f(hm | lm, a);
            }
        });
    }

    /// Sums `f(mask, amplitude)` over all amplitudes.
    pub fn sum<F, T>(&self, amps: &[C64], zero: T, f: F) -> T
    where
        F: Fn(&mut T, u16, &C64) + Sync,
        T: Send + Clone + Sync + std::ops::AddAssign,
    {
        amps.par_chunks(self.low_len)
            .zip(self.high.par_iter())
            .map(|(chunk, &hm)| {
                let mut acc = zero.clone();
                for (a, &lm) in chunk.iter().zip(&self.low) {
                    f(&mut acc, hm | lm, a);
                }
                acc
            })
            .collect::<Vec<T>>()
            .into_iter()
            .fold(zero, |mut a, b| {
                a += b;
                a
            })
    }
}

/// `D(mask) = Σ_{pairs ⊆ mask} V − iγ·|mask|` in rad/μs.
#[derive(Clone, Debug)]
pub struct DiagTable {
    pub values: Vec<C64>,
}

impl DiagTable {
    /// `pairs` hold digit positions (not lattice sites) and V in rad/μs.
    pub fn new(n: usize, pairs: &[(usize, usize, f64)], gamma: f64) -> Self {
        let mut coupling = vec![vec![0.0; n]; n];
        for &(p, q, v) in pairs {
            coupling[p][q] += v;
            coupling[q][p] += v;
        }
        let mut values = vec![C64::new(0.0, 0.0); 1 << n];
        for mask in 1usize..(1 << n) {
            let low = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            let mut e = values[rest] + C64::new(0.0, -gamma);
            let mut bits = rest;
            while bits != 0 {
                let q = bits.trailing_zeros() as usize;
                e.re += coupling[low][q];
                bits &= bits - 1;
            }
            values[mask] = e;
        }
        Self { values }
    }

    /// True when every entry is zero (no interactions and no decay).
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == C64::new(0.0, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_match_digits() {
        let n = 10;
        let idx = MaskIndex::new(n);
        for i in [0usize, 2, 5, 3usize.pow(9) * 2 + 8, 3usize.pow(10) - 1] {
            let mut m = 0u16;
            let mut x = i;
            for d in 0..n {
                if x % 3 == 2 {
                    m |= 1 << d;
                }
                x /= 3;
            }
            assert_eq!(idx.mask(i), m, "index {i}");
        }
    }

    #[test]
    fn pair_energies_add() {
        let t = DiagTable::new(3, &[(0, 1, -5.0), (1, 2, -2.0), (0, 2, -1.0)], 0.5);
        assert_eq!(t.values[0b011], C64::new(-5.0, -1.0));
        assert_eq!(t.values[0b111], C64::new(-8.0, -1.5));
        assert_eq!(t.values[0b100], C64::new(0.0, -0.5));
    }
}
