//! Atom-array geometry: square and hexagonal lattices, distances, symmetry
//! group and the Hilbert-curve layout hint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for hexagonal distance comparisons (in units of a²).
pub const HEX_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    Hexagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub rows: usize,
    pub cols: usize,
    pub spacing_um: f64,
}

impl LatticeSpec {
    pub fn square(side: usize, spacing_um: f64) -> Self {
        Self { kind: LatticeKind::Square, rows: side, cols: side, spacing_um }
    }

    pub fn hexagonal(side: usize, spacing_um: f64) -> Self {
        Self { kind: LatticeKind::Hexagonal, rows: side, cols: side, spacing_um }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidLattice(format!(
                "zero dimension {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.spacing_um > 0.0) || !self.spacing_um.is_finite() {
            return Err(Error::InvalidLattice(format!("spacing {} must be positive", self.spacing_um)));
        }
        if self.rows * self.cols > 64 {
            return Err(Error::InvalidLattice(format!(
                "{} sites exceed the 64-site limit of the compiler bitsets",
                self.rows * self.cols
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub x_um: f64,
    pub y_um: f64,
}

/// Isometries of the lattice, each stored as a site permutation `perm[s] = g·s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetryGroup {
    pub perms: Vec<Vec<usize>>,
}

impl SymmetryGroup {
    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn identity_index(&self) -> usize {
        self.perms
            .iter()
            .position(|p| p.iter().enumerate().all(|(i, &j)| i == j))
            .expect("group contains the identity")
    }
}

#[derive(Clone, Debug)]
pub struct Lattice {
    spec: LatticeSpec,
    sites: Vec<Site>,
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Lattice {
    pub fn build(spec: LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let a = spec.spacing_um;
        let mut sites = Vec::with_capacity(spec.rows * spec.cols);
        for row in 0..spec.rows {
            for col in 0..spec.cols {
                let (x, y) = match spec.kind {
                    LatticeKind::Square => (col as f64 * a, row as f64 * a),
                    LatticeKind::Hexagonal => (
                        col as f64 * a + (row % 2) as f64 * a / 2.0,
                        row as f64 * 3f64.sqrt() / 2.0 * a,
                    ),
                };
                sites.push(Site { index: sites.len(), row, col, x_um: x, y_um: y });
            }
        }
        let n = sites.len();
        let mut lattice = Self { spec, sites, adjacency: vec![Vec::new(); n], edges: Vec::new() };
        for i in 0..n {
            for j in (i + 1)..n {
                if lattice.within(i, j, 1.0) {
                    lattice.adjacency[i].push(j);
                    lattice.adjacency[j].push(i);
                    lattice.edges.push((i, j));
                }
            }
        }
        Ok(lattice)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn kind(&self) -> LatticeKind {
        self.spec.kind
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing_um
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, index: usize) -> &Site {
        &self.sites[index]
    }

    pub fn index(&self, row: usize, col: usize) -> Option<usize> {
        (row < self.spec.rows && col < self.spec.cols).then(|| row * self.spec.cols + col)
    }

    pub fn neighbors(&self, index: usize) -> &[usize] {
        &self.adjacency[index]
    }

    /// Nearest-neighbour edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(&j)
    }

    /// Euclidean distance in μm.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (s, t) = (&self.sites[i], &self.sites[j]);
        (s.x_um - t.x_um).hypot(s.y_um - t.y_um)
    }

    /// Squared distance in units of a². Exact integers on square lattices.
    pub fn dist_sq_a2(&self, i: usize, j: usize) -> f64 {
        let (s, t) = (&self.sites[i], &self.sites[j]);
        match self.spec.kind {
            LatticeKind::Square => {
                let dr = s.row.abs_diff(t.row);
                let dc = s.col.abs_diff(t.col);
                (dr * dr + dc * dc) as f64
            }
            LatticeKind::Hexagonal => {
                let a = self.spec.spacing_um;
                let (dx, dy) = ((s.x_um - t.x_um) / a, (s.y_um - t.y_um) / a);
                dx * dx + dy * dy
            }
        }
    }

    fn tol(&self) -> f64 {
        match self.spec.kind {
            LatticeKind::Square => 0.0,
            LatticeKind::Hexagonal => HEX_TOL,
        }
    }

    /// `d(i,j)² ≤ r²`, with `r²` in units of a².
    pub fn within(&self, i: usize, j: usize, r_sq_a2: f64) -> bool {
        self.dist_sq_a2(i, j) <= r_sq_a2 + self.tol()
    }

    /// `d(i,j)² ≥ r²`, with `r²` in units of a².
    pub fn at_least(&self, i: usize, j: usize, r_sq_a2: f64) -> bool {
        self.dist_sq_a2(i, j) >= r_sq_a2 - self.tol()
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.sites.len() as f64;
        let (sx, sy) = self.sites.iter().fold((0.0, 0.0), |(x, y), s| (x + s.x_um, y + s.y_um));
        (sx / n, sy / n)
    }

    /// Bounding rectangle of the atom centres, `(width, height)` in μm.
    pub fn bounding_box(&self) -> (f64, f64) {
        let fold = |f: fn(&Site) -> f64| {
            self.sites.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(f(s)), hi.max(f(s)))
            })
        };
        let (x0, x1) = fold(|s| s.x_um);
        let (y0, y1) = fold(|s| s.y_um);
        (x1 - x0, y1 - y0)
    }

    /// All dihedral isometries about the centroid that map the site set onto itself.
    pub fn symmetry_group(&self) -> SymmetryGroup {
        let (cx, cy) = self.centroid();
        let order = match self.spec.kind {
            LatticeKind::Square => 4,
            LatticeKind::Hexagonal => 6,
        };
        let a = self.spec.spacing_um;
        let mut perms: Vec<Vec<usize>> = Vec::new();
        for reflect in [false, true] {
            for k in 0..order {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / order as f64;
                let (c, s) = (theta.cos(), theta.sin());
                let image = |site: &Site| {
                    let (mut x, y) = (site.x_um - cx, site.y_um - cy);
                    if reflect {
                        x = -x;
                    }
                    (cx + c * x - s * y, cy + s * x + c * y)
                };
                let perm: Option<Vec<usize>> = self
                    .sites
                    .iter()
                    .map(|site| {
                        let (x, y) = image(site);
                        self.sites
                            .iter()
                            .position(|t| (t.x_um - x).hypot(t.y_um - y) < 1e-6 * a)
                    })
                    .collect();
                if let Some(perm) = perm {
                    if !perms.contains(&perm) {
                        perms.push(perm);
                    }
                }
            }
        }
        SymmetryGroup { perms }
    }

    /// One representative (the smallest index) per symmetry orbit, ascending.
    pub fn unique_sites(&self) -> Vec<usize> {
        let group = self.symmetry_group();
        (0..self.len())
            .filter(|&s| group.perms.iter().all(|p| p[s] >= s))
            .collect()
    }

    /// Hilbert-curve visiting order for square power-of-two lattices.
    pub fn hilbert_order(&self) -> Result<Vec<usize>> {
        let (rows, cols) = (self.spec.rows, self.spec.cols);
        if self.spec.kind != LatticeKind::Square || rows != cols || !rows.is_power_of_two() {
            return Err(Error::UnsupportedOrder { rows, cols });
        }
        Ok((0..rows * rows)
            .map(|d| {
                let (x, y) = hilbert_d2xy(rows, d);
                y * cols + x
            })
            .collect())
    }

    /// Boustrophedon row order; the fallback layout when no Hilbert order exists.
    pub fn snake_order(&self) -> Vec<usize> {
        let cols = self.spec.cols;
        (0..self.spec.rows)
            .flat_map(|r| {
                let row: Vec<usize> = (0..cols).map(|c| r * cols + c).collect();
                if r % 2 == 1 {
                    row.into_iter().rev().collect::<Vec<_>>()
                } else {
                    row
                }
            })
            .collect()
    }
}

fn hilbert_d2xy(n: usize, d: usize) -> (usize, usize) {
    let (mut x, mut y, mut t) = (0, 0, d);
    let mut s = 1;
    while s < n {
        let rx = 1 & (t / 2);
        let ry = 1 & (t ^ rx);
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
        s *= 2;
    }
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_to_corner() {
        let lat = Lattice::build(LatticeSpec::square(4, 3.0)).unwrap();
        let d = lat.distance(0, lat.index(3, 3).unwrap());
        assert!((d - 3.0 * 2f64.sqrt() * 3.0).abs() < 1e-12);
        assert_eq!(lat.len(), 16);
    }

    #[test]
    fn spacing_from_blockade_radius() {
        let a: f64 = 4.98 / 1.66;
        assert!((a - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt10_distance() {
        let lat = Lattice::build(LatticeSpec::square(4, 1.0)).unwrap();
        let d = lat.distance(0, lat.index(3, 1).unwrap());
        assert!((d - 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(lat.distance(5, 5), 0.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(Lattice::build(LatticeSpec::square(0, 3.0)).is_err());
        assert!(Lattice::build(LatticeSpec::square(2, 0.0)).is_err());
        assert!(Lattice::build(LatticeSpec::square(2, -1.0)).is_err());
    }

    #[test]
    fn hexagonal_neighbours_at_spacing() {
        let lat = Lattice::build(LatticeSpec::hexagonal(4, 3.0)).unwrap();
        for &(i, j) in lat.edges() {
            assert!((lat.distance(i, j) - 3.0).abs() < 1e-9 * 3.0);
        }
        // interior sites have six neighbours
        assert_eq!(lat.neighbors(lat.index(1, 1).unwrap()).len(), 6);
        assert_eq!(lat.neighbors(lat.index(2, 2).unwrap()).len(), 6);
    }

    #[test]
    fn hexagonal_area_ten_percent_smaller() {
        let lat = Lattice::build(LatticeSpec::hexagonal(8, 1.0)).unwrap();
        let (w, h) = lat.bounding_box();
        let ratio = w * h / 49.0;
        assert!((ratio - 0.90).abs() <= 0.03, "area ratio {ratio}");
    }

    #[test]
    fn edge_counts() {
        for l in [2usize, 3, 4, 8] {
            let lat = Lattice::build(LatticeSpec::square(l, 3.0)).unwrap();
            assert_eq!(lat.edges().len(), 2 * l * (l - 1));
        }
    }

    #[test]
    fn orbit_representatives() {
        let count = |l| Lattice::build(LatticeSpec::square(l, 3.0)).unwrap().unique_sites().len();
        assert_eq!(count(4), 3);
        assert_eq!(count(2), 1);
        assert_eq!(count(3), 3);
        let lat = Lattice::build(LatticeSpec::square(3, 3.0)).unwrap();
        assert_eq!(lat.unique_sites(), vec![0, 1, 4]);
        assert_eq!(lat.symmetry_group().len(), 8);
    }

    #[test]
    fn hilbert_small_orders() {
        let lat = Lattice::build(LatticeSpec::square(2, 1.0)).unwrap();
        let order = lat.hilbert_order().unwrap();
        assert_eq!(order.len(), 4);
        for w in order.windows(2) {
            assert!(lat.are_neighbors(w[0], w[1]));
        }
        let lat3 = Lattice::build(LatticeSpec::square(3, 1.0)).unwrap();
        assert!(matches!(lat3.hilbert_order(), Err(Error::UnsupportedOrder { .. })));
    }

    #[test]
    fn snake_is_adjacent() {
        let lat = Lattice::build(LatticeSpec::square(3, 1.0)).unwrap();
        let order = lat.snake_order();
        for w in order.windows(2) {
            assert!(lat.are_neighbors(w[0], w[1]));
        }
    }
}
