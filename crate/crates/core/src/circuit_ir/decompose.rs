use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C64;

use super::Gate;
use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Maximum entrywise deviation accepted when checking a lowered CNOT.
pub const CNOT_IDENTITY_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// `[RZ(π/2), RX(π/2), RZ(π/2)]` in application order.
pub fn decompose_hadamard(site: usize) -> [Gate; 3] {
    [
        Gate::Rz { site, theta: FRAC_PI_2 },
        Gate::Rx { site, theta: FRAC_PI_2 },
        Gate::Rz { site, theta: FRAC_PI_2 },
    ]
}

/// The native CNOT, grouped by role so the scheduler can pipeline the parts.
#[derive(Clone, Debug, PartialEq)]
pub struct NativeCnot {
    pub control_pre: Vec<Gate>,
    pub target_pre: Vec<Gate>,
    pub cz: Gate,
    pub control_post: Vec<Gate>,
    pub target_post: Vec<Gate>,
}

impl NativeCnot {
    /// All 11 gates in a valid application order.
    pub fn gates(&self) -> Vec<Gate> {
        let mut out = self.control_pre.clone();
        out.extend(&self.target_pre);
        out.push(self.cz);
        out.extend(&self.control_post);
        out.extend(&self.target_post);
        out
    }
}

/// CNOT through one CZ(φ) pulse. Equal to CNOT (up to a global phase) for
/// φ ∈ {0, π}; [`cnot_identity_deviation`] measures the error for other φ.
pub fn decompose_cnot_native(lattice: &Lattice, control: usize, target: usize, phi: f64) -> Result<NativeCnot> {
    if control == target || !lattice.are_neighbors(control, target) {
        return Err(Error::NonAdjacent(control, target));
    }
    Ok(native_cnot(control, target, phi))
}

pub(crate) fn native_cnot(control: usize, target: usize, phi: f64) -> NativeCnot {
    let (c, t) = (control, target);
    NativeCnot {
        control_pre: vec![Gate::Rx { site: c, theta: PI }],
        target_pre: vec![
            Gate::Rx { site: t, theta: FRAC_PI_2 },
            Gate::Rz { site: t, theta: -FRAC_PI_2 },
            Gate::Rx { site: t, theta: FRAC_PI_2 },
        ],
        cz: Gate::CzPhi { control: c, target: t, phi },
        control_post: vec![
            Gate::Rz { site: c, theta: phi - 3.0 * FRAC_PI_2 },
            Gate::Rx { site: c, theta: PI },
            Gate::Rz { site: c, theta: 3.0 * FRAC_PI_2 },
        ],
        target_post: vec![
            Gate::Rz { site: t, theta: -phi - 3.0 * FRAC_PI_2 },
            Gate::Rx { site: t, theta: FRAC_PI_2 },
            Gate::Rz { site: t, theta: 3.0 * FRAC_PI_2 },
        ],
    }
}

pub fn rx_matrix(theta: f64) -> Matrix2<C64> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    Matrix2::new(C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0))
}

pub fn rz_matrix(theta: f64) -> Matrix2<C64> {
    Matrix2::new(C64::from_polar(1.0, -theta / 2.0), ZERO, ZERO, C64::from_polar(1.0, theta / 2.0))
}

pub fn hadamard_matrix() -> Matrix2<C64> {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Matrix2::new(h, h, h, -h)
}

/// Two-site matrices use the basis |control target⟩ with index 2c + t.
pub fn cnot_matrix() -> Matrix4<C64> {
    let mut m = Matrix4::zeros();
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

pub fn cz_phi_matrix(phi: f64) -> Matrix4<C64> {
    let e = C64::from_polar(1.0, phi);
    Matrix4::from_diagonal(&nalgebra::Vector4::new(ONE, e, e, C64::from_polar(1.0, 2.0 * phi - PI)))
}

impl Gate {
    /// Qubit-block matrix of a single-site gate.
    pub fn matrix_1q(&self) -> Option<Matrix2<C64>> {
        match *self {
            Gate::Rx { theta, .. } => Some(rx_matrix(theta)),
            Gate::Rz { theta, .. } => Some(rz_matrix(theta)),
            Gate::H { .. } => Some(hadamard_matrix()),
            _ => None,
        }
    }

    /// Qubit-block matrix of a two-site gate in the |control target⟩ basis.
    pub fn matrix_2q(&self) -> Option<Matrix4<C64>> {
        match *self {
            Gate::Cnot { .. } => Some(cnot_matrix()),
            Gate::CzIdeal { .. } => Some(cz_phi_matrix(0.0)),
            Gate::CzPhi { phi, .. } => Some(cz_phi_matrix(phi)),
            _ => None,
        }
    }
}

/// Assembles a gate list on sites {0 = control, 1 = target} into a 4×4 unitary.
pub(crate) fn assemble_two_site(gates: &[Gate]) -> Matrix4<C64> {
    let mut u = Matrix4::identity();
    for g in gates {
        let step = if let Some(m) = g.matrix_2q() {
            let (c, _) = g.pair().unwrap();
            if c == 0 {
                m
            } else {
                let swap = swap4();
                swap * m * swap
            }
        } else {
            let m = g.matrix_1q().unwrap();
            let id = Matrix2::<C64>::identity();
            if g.sites()[0] == 0 {
                m.kronecker(&id)
            } else {
                id.kronecker(&m)
            }
        };
        u = step * u;
    }
    u
}

fn swap4() -> Matrix4<C64> {
    let mut s = Matrix4::zeros();
    s[(0, 0)] = ONE;
    s[(1, 2)] = ONE;
    s[(2, 1)] = ONE;
    s[(3, 3)] = ONE;
    s
}

/// Max entrywise distance between `u` and `target` after global-phase alignment.
pub(crate) fn phase_aligned_deviation(u: &Matrix4<C64>, target: &Matrix4<C64>) -> f64 {
    let overlap = (target.adjoint() * u).trace();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
    (u - target * phase).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Deviation of the 11-gate lowering from CNOT at a given φ.
pub fn cnot_identity_deviation(phi: f64) -> f64 {
    let u = assemble_two_site(&native_cnot(0, 1, phi).gates());
    phase_aligned_deviation(&u, &cnot_matrix())
}
