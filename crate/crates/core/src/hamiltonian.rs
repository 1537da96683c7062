//! Spin Hamiltonians built from weighted Pauli strings, and their spectra.
//!
//! Basis convention: σ_z|0⟩ = +|0⟩ and site 0 is the leftmost tensor factor,
//! so site `k` of an `L`-site register is bit `L - 1 - k` of the basis index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

/// Largest register handled with dense storage.
pub const MAX_SITES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Single-qubit Pauli matrix.
    pub fn matrix(self) -> CMatrix {
        let (o, l, i) = (linalg::ZERO, linalg::ONE, C64::new(0.0, 1.0));
        match self {
            Axis::X => CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            Axis::Y => CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            Axis::Z => CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            "z" => Some(Axis::Z),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub factors: Vec<(usize, Axis)>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, factors: Vec<(usize, Axis)>) -> Self {
        PauliTerm { coefficient, factors }
    }

    fn validate(&self, num_sites: usize) -> Result<()> {
        if !self.coefficient.is_finite() {
            return Err(Error::invalid("coefficient", "must be finite"));
        }
        for (n, &(site, _)) in self.factors.iter().enumerate() {
            if site >= num_sites {
                return Err(Error::invalid("site", format!("site {site} out of range for {num_sites} sites")));
            }
            if self.factors[..n].iter().any(|&(s, _)| s == site) {
                return Err(Error::invalid("site", format!("site {site} repeated within one term")));
            }
        }
        Ok(())
    }
}

/// Dense matrix of a single Pauli string (with unit coefficient) on `num_sites` qubits.
pub fn pauli_string_matrix(num_sites: usize, factors: &[(usize, Axis)]) -> CMatrix {
    let dim = 1usize << num_sites;
    let mut flip = 0usize;
    let mut y_mask = 0usize;
    let mut z_mask = 0usize;
    for &(site, axis) in factors {
        let bit = 1usize << (num_sites - 1 - site);
        match axis {
            Axis::X => flip |= bit,
            Axis::Y => {
                flip |= bit;
                y_mask |= bit;
            }
            Axis::Z => z_mask |= bit,
        }
    }
    let mut m = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let row = col ^ flip;
        // Z contributes (-1)^bit, Y contributes i·(-1)^bit acting on the input bit.
        let mut phase = C64::new(1.0, 0.0);
        if (col & z_mask).count_ones() % 2 == 1 {
            phase = -phase;
        }
        for _ in 0..y_mask.count_ones() {
            phase *= C64::new(0.0, 1.0);
        }
        if (col & y_mask).count_ones() % 2 == 1 {
            phase = -phase;
        }
        m[(row, col)] = phase;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub num_sites: usize,
    pub terms: Vec<PauliTerm>,
}

impl HamiltonianSpec {
    pub fn new(num_sites: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if num_sites == 0 || num_sites > MAX_SITES {
            return Err(Error::invalid("num_sites", format!("must be in 1..={MAX_SITES}, got {num_sites}")));
        }
        for term in &terms {
            term.validate(num_sites)?;
        }
        Ok(HamiltonianSpec { num_sites, terms })
    }

    pub fn dim(&self) -> usize {
        1 << self.num_sites
    }

    pub fn matrix(&self) -> CMatrix {
        let dim = self.dim();
        let mut h = CMatrix::zeros(dim, dim);
        for term in &self.terms {
            h += pauli_string_matrix(self.num_sites, &term.factors) * C64::new(term.coefficient, 0.0);
        }
        h
    }
}

/// −0.7σ_z⁰ − Bσ_z¹ + σ_z⁰σ_z¹ + A(σ_x⁰σ_x¹ + σ_y⁰σ_y¹)
pub fn build_two_spin(a: f64, b: f64) -> HamiltonianSpec {
    use Axis::*;
    let terms = vec![
        PauliTerm::new(-0.7, vec![(0, Z)]),
        PauliTerm::new(-b, vec![(1, Z)]),
        PauliTerm::new(1.0, vec![(0, Z), (1, Z)]),
        PauliTerm::new(a, vec![(0, X), (1, X)]),
        PauliTerm::new(a, vec![(0, Y), (1, Y)]),
    ];
    HamiltonianSpec { num_sites: 2, terms }
}

/// Open chain with fields B on even sites and B/2 on odd sites, plus
/// nearest-neighbour J[A(XX + YY) + ZZ] bonds.
pub fn build_chain(num_sites: usize, a: f64, b: f64, j: f64) -> Result<HamiltonianSpec> {
    use Axis::*;
    if num_sites < 2 {
        return Err(Error::invalid("L", format!("chain needs at least 2 sites, got {num_sites}")));
    }
    let mut terms = Vec::new();
    for i in 0..num_sites {
        let field = if i % 2 == 0 { b } else { b / 2.0 };
        terms.push(PauliTerm::new(field, vec![(i, Z)]));
    }
    for i in 0..num_sites - 1 {
        terms.push(PauliTerm::new(j * a, vec![(i, X), (i + 1, X)]));
        terms.push(PauliTerm::new(j * a, vec![(i, Y), (i + 1, Y)]));
        terms.push(PauliTerm::new(j, vec![(i, Z), (i + 1, Z)]));
    }
    HamiltonianSpec::new(num_sites, terms)
}

/// Spectrum of a system Hamiltonian, with levels grouped by degeneracy and
/// every transition frequency assigned to a deduplicated bin.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub energies: Vec<f64>,
    /// Columns are eigenvectors in the computational basis.
    pub eigenvectors: CMatrix,
    pub degeneracy_groups: Vec<Vec<usize>>,
    /// Mean energy of each degeneracy group, ascending.
    pub group_energies: Vec<f64>,
    /// Distinct positive transition frequencies, ascending.
    pub gaps: Vec<f64>,
    pub delta_max: f64,
    pub tol: f64,
    group_of: Vec<usize>,
    /// Signed frequencies: `-gaps` (descending magnitude), 0, `gaps`.
    frequencies: Vec<f64>,
    /// `transition[p * G + q]` indexes `frequencies` for E_q − E_p.
    transition: Vec<usize>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn group_of(&self, level: usize) -> usize {
        self.group_of[level]
    }

    pub fn num_groups(&self) -> usize {
        self.group_energies.len()
    }

    /// All signed frequency labels, ascending; includes 0.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Index into `frequencies()` of ε_q − ε_p for levels `p`, `q`.
    pub fn transition_index(&self, p: usize, q: usize) -> usize {
        let g = self.num_groups();
        self.transition[self.group_of[p] * g + self.group_of[q]]
    }

    /// Binned ε_q − ε_p.
    pub fn transition_frequency(&self, p: usize, q: usize) -> f64 {
        self.frequencies[self.transition_index(p, q)]
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.num_groups() == self.dim()
    }

    /// True when every pair of distinct levels has its own gap.
    pub fn has_distinct_gaps(&self) -> bool {
        let g = self.num_groups();
        self.gaps.len() == g * (g - 1) / 2
    }

    /// Energies as a diagonal matrix (the Hamiltonian in its own eigenbasis).
    pub fn diagonal_hamiltonian(&self) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.energies.iter().map(|&e| C64::new(e, 0.0)),
        ))
    }

    /// Change a computational-basis operator into the energy eigenbasis.
    pub fn to_eigenbasis(&self, op: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * op * &self.eigenvectors
    }

    pub fn from_eigenbasis(&self, op: &CMatrix) -> CMatrix {
        &self.eigenvectors * op * self.eigenvectors.adjoint()
    }
}

/// Sorted values merged into clusters whose consecutive members are within `tol`.
fn cluster_sorted(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if v - values[*c.last().unwrap()] <= tol => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    clusters
}

pub fn diagonalize(spec: &HamiltonianSpec, tol_deg: f64) -> Result<EigenSystem> {
    diagonalize_matrix(&spec.matrix(), tol_deg)
}

pub fn diagonalize_matrix(h: &CMatrix, tol_deg: f64) -> Result<EigenSystem> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
    }
    if !(tol_deg >= 0.0) {
        return Err(Error::invalid("tol_deg", "must be non-negative"));
    }
    let defect = linalg::hermiticity_defect(h);
    if defect > 1e-10 {
        return Err(Error::NotHermitian { defect });
    }
    let (energies, eigenvectors) = linalg::hermitian_eigen(h);
    let dim = energies.len();

    let degeneracy_groups = cluster_sorted(&energies, tol_deg);
    let group_energies: Vec<f64> =
        degeneracy_groups.iter().map(|g| g.iter().map(|&i| energies[i]).sum::<f64>() / g.len() as f64).collect();
    let mut group_of = vec![0; dim];
    for (gi, g) in degeneracy_groups.iter().enumerate() {
        for &i in g {
            group_of[i] = gi;
        }
    }

    let ng = group_energies.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for p in 0..ng {
        for q in p + 1..ng {
            pairs.push((group_energies[q] - group_energies[p], p, q));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let diffs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let gap_clusters = cluster_sorted(&diffs, tol_deg);
    let gaps: Vec<f64> =
        gap_clusters.iter().map(|c| c.iter().map(|&k| diffs[k]).sum::<f64>() / c.len() as f64).collect();

    let n_gaps = gaps.len();
    let mut frequencies: Vec<f64> = gaps.iter().rev().map(|g| -g).collect();
    frequencies.push(0.0);
    frequencies.extend(gaps.iter().cloned());
    let zero = n_gaps;
    let mut transition = vec![zero; ng * ng];
    for (ci, cluster) in gap_clusters.iter().enumerate() {
        for &k in cluster {
            let (_, p, q) = pairs[k];
            transition[p * ng + q] = zero + 1 + ci;
            transition[q * ng + p] = zero - 1 - ci;
        }
    }

    let delta_max = energies[dim - 1] - energies[0];
    Ok(EigenSystem {
        energies,
        eigenvectors,
        degeneracy_groups,
        group_energies,
        gaps,
        delta_max,
        tol: tol_deg,
        group_of,
        frequencies,
        transition,
    })
}
