//! Fourth-order commutator-free Magnus scheme with two Gauss-Legendre nodes:
//!
//! `U(t+h, t) ≈ exp(−ih(A1·H(t+C1h) + A2·H(t+C2h))) · exp(−ih(A2·H(t+C1h) + A1·H(t+C2h)))`
//!
//! The right factor is applied first. Each exponential is evaluated exactly
//! (dense for small systems, Krylov for state vectors), so the stiff van der
//! Waals diagonal never limits the step.

const SQRT_3: f64 = 1.732_050_807_568_877_2;

pub const C1: f64 = 0.5 - SQRT_3 / 6.0;
pub const C2: f64 = 0.5 + SQRT_3 / 6.0;
pub const A1: f64 = (3.0 - 2.0 * SQRT_3) / 12.0;
pub const A2: f64 = (3.0 + 2.0 * SQRT_3) / 12.0;

/// Weights `(w1, w2)` on `H(t+C1h)` and `H(t+C2h)` for the first and second exponential.
pub const FIRST: (f64, f64) = (A2, A1);
pub const SECOND: (f64, f64) = (A1, A2);

/// Number of equal steps covering `duration` with step at most `dt`.
pub fn step_count(duration: f64, dt: f64) -> usize {
    ((duration / dt) - 1e-9).ceil().max(1.0) as usize
}
