use serde::{Deserialize, Serialize};

use super::DeviceParams;
use crate::error::{Error, Result};
use crate::lattice::Lattice;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub a: usize,
    pub b: usize,
    pub distance_um: f64,
    /// `V = −C6/d⁶` in rad/μs.
    pub v: f64,
}

/// Static content of the Hamiltonian: which sites carry drive slots, which
/// pairs interact and the decay rate of `|r⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerms {
    pub sites: Vec<usize>,
    pub pairs: Vec<PairTerm>,
    pub cutoff_um: f64,
    /// Zero for closed systems.
    pub gamma_per_us: f64,
}

impl HamiltonianTerms {
    pub fn is_open(&self) -> bool {
        self.gamma_per_us > 0.0
    }
}

/// Terms over every lattice site.
pub fn build_terms(lattice: &Lattice, r_i_um: f64, open_system: bool, params: &DeviceParams) -> Result<HamiltonianTerms> {
    let sites: Vec<usize> = (0..lattice.len()).collect();
    build_terms_for(lattice, &sites, r_i_um, open_system, params)
}

/// Terms restricted to `sites`; pairs keep lattice indices.
pub fn build_terms_for(
    lattice: &Lattice,
    sites: &[usize],
    r_i_um: f64,
    open_system: bool,
    params: &DeviceParams,
) -> Result<HamiltonianTerms> {
    let a = lattice.spacing();
    if r_i_um < a * (1.0 - 1e-9) {
        return Err(Error::InvalidParameter(format!("interaction radius {r_i_um} um below spacing {a} um")));
    }
    // r_i usually comes from a square root; keep exact lattice distances inside
    let r_sq = (r_i_um / a).powi(2) * (1.0 + 1e-12);
    let mut pairs = Vec::new();
    for (x, &i) in sites.iter().enumerate() {
        for &j in &sites[x + 1..] {
            if lattice.within(i, j, r_sq) {
                let d = lattice.distance(i, j);
                pairs.push(PairTerm { a: i.min(j), b: i.max(j), distance_um: d, v: params.vdw(d) });
            }
        }
    }
    Ok(HamiltonianTerms {
        sites: sites.to_vec(),
        pairs,
        cutoff_um: r_i_um,
        gamma_per_us: if open_system { params.gamma_per_us } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    #[test]
    fn pair_counts() {
        let p = DeviceParams::default();
        let lat = Lattice::build(LatticeSpec::square(4, 3.0)).unwrap();
        assert_eq!(build_terms(&lat, 3.0, false, &p).unwrap().pairs.len(), 24);
        assert_eq!(build_terms(&lat, 3.0 * 2f64.sqrt(), false, &p).unwrap().pairs.len(), 42);
        let closed = build_terms(&lat, 3.0, false, &p).unwrap();
        assert_eq!(closed.gamma_per_us, 0.0);
        assert!(build_terms(&lat, 2.0, false, &p).is_err());
    }
}
