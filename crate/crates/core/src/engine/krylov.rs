//! Arnoldi approximation of `exp(τA)·ψ` for a matrix-free operator `A`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

const PAR_MIN: usize = 1 << 15;
const MAX_SPLITS: u32 = 12;

#[derive(Clone, Debug)]
pub struct Krylov {
    pub tol: f64,
    pub m_max: usize,
    basis: Vec<Vec<C64>>,
    /// Largest subspace dimension used since construction.
    pub max_dim_used: usize,
}

impl Krylov {
    pub fn new(tol: f64, m_max: usize) -> Self {
        Self { tol, m_max: m_max.max(2), basis: Vec::new(), max_dim_used: 0 }
    }

    /// `ψ ← exp(τA)ψ` where `matvec(v, out)` writes `out = A v`. Halves the
    /// step recursively when the subspace limit is reached.
    pub fn expv<F>(&mut self, psi: &mut [C64], tau: f64, matvec: &F)
    where
        F: Fn(&[C64], &mut [C64]),
    {
        self.expv_depth(psi, tau, matvec, 0)
    }

    fn expv_depth<F>(&mut self, psi: &mut [C64], tau: f64, matvec: &F, depth: u32)
    where
        F: Fn(&[C64], &mut [C64]),
    {
        if !self.try_expv(psi, tau, matvec) {
            assert!(depth < MAX_SPLITS, "krylov exponential failed to converge");
            self.expv_depth(psi, tau / 2.0, matvec, depth + 1);
            self.expv_depth(psi, tau / 2.0, matvec, depth + 1);
        }
    }

    fn try_expv<F>(&mut self, psi: &mut [C64], tau: f64, matvec: &F) -> bool
    where
        F: Fn(&[C64], &mut [C64]),
    {
        let n = psi.len();
        let beta = norm(psi);
        if beta == 0.0 {
            return true;
        }
        self.ensure(n, 1);
        self.basis[0].iter_mut().zip(psi.iter()).for_each(|(v, p)| *v = p / beta);
        let m_max = self.m_max.min(n);
        let mut h = DMatrix::<C64>::zeros(m_max + 1, m_max);
        for j in 0..m_max {
            self.ensure(n, j + 2);
            let (head, tail) = self.basis.split_at_mut(j + 1);
            let w = &mut tail[0];
            matvec(&head[j], w);
            scale(w, tau);
            for (i, v) in head.iter().enumerate() {
                let hij = dot(v, w);
                h[(i, j)] = hij;
                axpy(w, -hij, v);
            }
            let hn = norm(w);
            let m = j + 1;
            let breakdown = hn <= 1e-14 * beta.max(1.0);
            let e = h.view((0, 0), (m, m)).into_owned().exp();
            let err = beta * hn * e[(m - 1, 0)].norm();
            if breakdown || err <= self.tol * beta || m == n {
                self.combine(psi, &e, beta, m);
                self.max_dim_used = self.max_dim_used.max(m);
                return true;
            }
            h[(j + 1, j)] = C64::new(hn, 0.0);
            scale(w, 1.0 / hn);
        }
        false
    }

    fn combine(&mut self, psi: &mut [C64], e: &DMatrix<C64>, beta: f64, m: usize) {
        let coeffs: Vec<C64> = (0..m).map(|i| e[(i, 0)] * beta).collect();
        let basis = &self.basis[..m];
        let run = |(k, out): (usize, &mut C64)| {
            *out = coeffs.iter().zip(basis).map(|(c, v)| c * v[k]).sum();
        };
        if psi.len() < PAR_MIN {
            psi.iter_mut().enumerate().for_each(run);
        } else {
            psi.par_iter_mut().enumerate().for_each(run);
        }
    }

    fn ensure(&mut self, n: usize, count: usize) {
        for v in &mut self.basis {
            if v.len() != n {
                v.resize(n, C64::new(0.0, 0.0));
            }
        }
        while self.basis.len() < count {
            self.basis.push(vec![C64::new(0.0, 0.0); n]);
        }
    }
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    if a.len() < PAR_MIN {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    } else {
        a.par_iter().zip(b.par_iter()).map(|(x, y)| x.conj() * y).sum()
    }
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    if a.len() < PAR_MIN {
        a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    } else {
        a.par_iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn axpy(y: &mut [C64], alpha: C64, x: &[C64]) {
    if y.len() < PAR_MIN {
        y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
    } else {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(y, x)| *y += alpha * x);
    }
}

fn scale(y: &mut [C64], s: f64) {
    if y.len() < PAR_MIN {
        y.iter_mut().for_each(|y| *y *= s);
    } else {
        y.par_iter_mut().for_each(|y| *y *= s);
    }
}
