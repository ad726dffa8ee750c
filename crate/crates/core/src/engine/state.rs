use nalgebra::{Matrix2, Matrix3, Matrix4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the dense backends accept.
pub const MAX_DENSE_SITES: usize = 16;

const STATE_MAGIC: &[u8; 8] = b"RYDQST01";

/// Below this many amplitudes kernels stay on the calling thread.
const PAR_MIN: usize = 1 << 15;

/// Dense amplitudes over `{0, 1, r}^N`. Digit `p` (stride `3^p`) holds the
/// lattice site `layout[p]`; sites outside the layout are implicitly `|0⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QutritState {
    layout: Vec<usize>,
    amps: Vec<C64>,
}

impl QutritState {
    /// All sites of `layout` in `|0⟩`.
    pub fn zero(layout: Vec<usize>) -> Result<Self> {
        check_layout(&layout)?;
        let mut amps = vec![C64::new(0.0, 0.0); 3usize.pow(layout.len() as u32)];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self { layout, amps })
    }

    pub fn from_amplitudes(layout: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        check_layout(&layout)?;
        if amps.len() != 3usize.pow(layout.len() as u32) {
            return Err(Error::InvalidParameter(format!(
                "{} amplitudes for {} sites",
                amps.len(),
                layout.len()
            )));
        }
        Ok(Self { layout, amps })
    }

    /// Raw little-endian dump: magic, site count, layout (u32 each), then
    /// interleaved `re, im` f64 pairs.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.layout.len() + 16 * self.amps.len());
        out.extend_from_slice(STATE_MAGIC);
        out.extend_from_slice(&(self.layout.len() as u32).to_le_bytes());
        for &s in &self.layout {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for a in &self.amps {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::Schema(format!("state file: {what}"));
        if bytes.len() < 12 || &bytes[..8] != STATE_MAGIC {
            return Err(bad("bad header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let n = word(8);
        if n > MAX_DENSE_SITES {
            return Err(Error::TooManySites { n, max: MAX_DENSE_SITES });
        }
        let body = 12 + 4 * n;
        let len = 3usize.pow(n as u32);
        if bytes.len() != body + 16 * len {
            return Err(bad("length does not match the site count"));
        }
        let layout = (0..n).map(|p| word(12 + 4 * p)).collect();
        let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
        let amps = (0..len).map(|k| C64::new(f(body + 16 * k), f(body + 16 * k + 8))).collect();
        Self::from_amplitudes(layout, amps)
    }

    pub fn n_sites(&self) -> usize {
        self.layout.len()
    }

    pub fn layout(&self) -> &[usize] {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    /// Digit position holding lattice site `site`.
    pub fn position(&self, site: usize) -> Option<usize> {
        self.layout.iter().position(|&s| s == site)
    }

    pub(crate) fn require_position(&self, site: usize) -> Result<usize> {
        self.position(site)
            .ok_or_else(|| Error::InvalidParameter(format!("site {site} is not in the state layout")))
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitude of the basis state given as one digit (0, 1 or 2 = r) per layout position.
    pub fn amplitude(&self, digits: &[u8]) -> C64 {
        self.amps[index_of(digits)]
    }

    /// Plain inner product ⟨self|other⟩ without normalisation.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// ⟨s1|s2⟩ on normalised copies.
    pub fn overlap(&self, other: &Self) -> Result<C64> {
        let (n1, n2) = (self.norm_sq(), other.norm_sq());
        if n1 == 0.0 || n2 == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(self.inner(other)? / (n1 * n2).sqrt())
    }

    /// Qubit-block gate on one site; `|r⟩` untouched.
    pub fn apply_1q(&mut self, site: usize, m: &Matrix2<C64>) -> Result<()> {
        let p = self.require_position(site)?;
        let mut full = Matrix3::identity();
        full.fixed_view_mut::<2, 2>(0, 0).copy_from(m);
        let s = 3usize.pow(p as u32);
        for_each_block(&mut self.amps, s, |blk| {
            for k in 0..s {
                let (a0, a1) = (blk[k], blk[k + s]);
                blk[k] = m[(0, 0)] * a0 + m[(0, 1)] * a1;
                blk[k + s] = m[(1, 0)] * a0 + m[(1, 1)] * a1;
            }
        });
        Ok(())
    }

    /// Full 3×3 operator on one site (drives that touch `|r⟩`).
    pub fn apply_local(&mut self, site: usize, m: &Matrix3<C64>) -> Result<()> {
        let p = self.require_position(site)?;
        apply_local_inplace(&mut self.amps, p, m);
        Ok(())
    }

    /// Qubit-block two-site gate in the |a b⟩ basis (index 2a + b); any
    /// basis state with a site in `|r⟩` is untouched.
    pub fn apply_2q(&mut self, a: usize, b: usize, m: &Matrix4<C64>) -> Result<()> {
        let (pa, pb) = (self.require_position(a)?, self.require_position(b)?);
        let (sa, sb) = (3usize.pow(pa as u32), 3usize.pow(pb as u32));
        let (hi, lo) = (sa.max(sb), sa.min(sb));
        for_each_block(&mut self.amps, hi, |blk| {
            for off in (0..hi).step_by(3 * lo) {
                for k in off..off + lo {
                    let idx = [k, k + sb, k + sa, k + sa + sb];
                    let v = idx.map(|i| blk[i]);
                    for (r, &i) in idx.iter().enumerate() {
                        blk[i] = (0..4).map(|c| m[(r, c)] * v[c]).sum();
                    }
                }
            }
        });
        Ok(())
    }

    /// Multiply every amplitude by a scalar.
    pub fn scale(&mut self, z: C64) {
        self.amps.iter_mut().for_each(|a| *a *= z);
    }
}

fn check_layout(layout: &[usize]) -> Result<()> {
    if layout.is_empty() {
        return Err(Error::InvalidParameter("empty layout".into()));
    }
    if layout.len() > MAX_DENSE_SITES {
        return Err(Error::TooManySites { n: layout.len(), max: MAX_DENSE_SITES });
    }
    let mut seen = layout.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != layout.len() {
        return Err(Error::InvalidParameter("layout repeats a site".into()));
    }
    Ok(())
}

pub(crate) fn index_of(digits: &[u8]) -> usize {
    digits.iter().rev().fold(0, |acc, &d| acc * 3 + d as usize)
}

/// Runs `f` on every contiguous block of length `3·stride`, in parallel for
/// large vectors. Each block holds whole digit triples for that stride.
pub(crate) fn for_each_block<F>(amps: &mut [C64], stride: usize, f: F)
where
    F: Fn(&mut [C64]) + Sync,
{
    let block = 3 * stride;
    if amps.len() < PAR_MIN {
        amps.chunks_mut(block).for_each(f);
    } else {
        let chunk = block * PAR_MIN.div_ceil(block);
        amps.par_chunks_mut(chunk).for_each(|c| c.chunks_mut(block).for_each(&f));
    }
}

pub(crate) fn apply_local_inplace(amps: &mut [C64], p: usize, m: &Matrix3<C64>) {
    let s = 3usize.pow(p as u32);
    for_each_block(amps, s, |blk| {
        for k in 0..s {
            let v = [blk[k], blk[k + s], blk[k + 2 * s]];
            for r in 0..3 {
                blk[k + r * s] = m[(r, 0)] * v[0] + m[(r, 1)] * v[1] + m[(r, 2)] * v[2];
            }
        }
    });
}

/// `out += m · v` on digit `p`.
pub(crate) fn accumulate_local(v: &[C64], out: &mut [C64], p: usize, m: &Matrix3<C64>) {
    let s = 3usize.pow(p as u32);
    let block = 3 * s;
    let run = |(src, dst): (&[C64], &mut [C64])| {
        for k in 0..s {
            let x = [src[k], src[k + s], src[k + 2 * s]];
            for r in 0..3 {
                dst[k + r * s] += m[(r, 0)] * x[0] + m[(r, 1)] * x[1] + m[(r, 2)] * x[2];
            }
        }
    };
    if v.len() < PAR_MIN {
        v.chunks(block).zip(out.chunks_mut(block)).for_each(run);
    } else {
        let chunk = block * PAR_MIN.div_ceil(block);
        v.par_chunks(chunk).zip(out.par_chunks_mut(chunk)).for_each(|(a, b)| {
            a.chunks(block).zip(b.chunks_mut(block)).for_each(run)
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_ir::{cnot_matrix, hadamard_matrix};

    #[test]
    fn hadamard_on_zero() {
        let mut s = QutritState::zero(vec![0]).unwrap();
        s.apply_1q(0, &hadamard_matrix()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitude(&[0]) - h).norm() < 1e-15);
        assert!((s.amplitude(&[1]) - h).norm() < 1e-15);
        assert_eq!(s.amplitude(&[2]).norm(), 0.0);
    }

    #[test]
    fn cnot_ordering_follows_sites() {
        // layout puts the control at the faster digit
        let mut s = QutritState::zero(vec![7, 3]).unwrap();
        s.apply_1q(7, &Matrix2::new(0.0.into(), 1.0.into(), 1.0.into(), 0.0.into())).unwrap();
        s.apply_2q(7, 3, &cnot_matrix()).unwrap();
        assert!((s.amplitude(&[1, 1]).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn overlap_checks_layout() {
        let a = QutritState::zero(vec![0, 1]).unwrap();
        let b = QutritState::zero(vec![1, 0]).unwrap();
        assert!(matches!(a.overlap(&b), Err(Error::LayoutMismatch)));
        assert!((a.overlap(&a).unwrap().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_limit() {
        let layout: Vec<usize> = (0..17).collect();
        assert!(matches!(QutritState::zero(layout), Err(Error::TooManySites { .. })));
    }
}
