//! Frequency-resolved coupling operators X_m(ω) and the ergodicity test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{pauli_string_matrix, Axis, EigenSystem};
use crate::linalg::{self, CMatrix, C64};

/// Entries below this magnitude are treated as exact zeros when resolving X(ω).
pub const ENTRY_CUTOFF: f64 = 1e-13;

/// One system-ancilla coupling g·σ_α^{site}·τ_x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub ancilla: usize,
    pub site: usize,
    pub axis: Axis,
    pub strength: f64,
}

impl CouplingSpec {
    pub fn new(ancilla: usize, site: usize, axis: Axis, strength: f64) -> Result<Self> {
        if !strength.is_finite() || strength < 0.0 {
            return Err(Error::invalid("g", format!("coupling strength must be finite and >= 0, got {strength}")));
        }
        Ok(CouplingSpec { ancilla, site, axis, strength })
    }

    /// The system operator σ_α^{site} in the computational basis.
    pub fn system_operator(&self, num_sites: usize) -> CMatrix {
        pauli_string_matrix(num_sites, &[(self.site, self.axis)])
    }
}

#[derive(Debug, Clone)]
pub struct FrequencyComponent {
    /// Binned transition frequency; positive lowers the system energy.
    pub omega: f64,
    /// Index into the eigen-system's signed frequency list.
    pub index: usize,
    /// X(ω) in the energy eigenbasis.
    pub matrix: CMatrix,
}

#[derive(Debug, Clone)]
pub struct FrequencyResolvedOps {
    pub coupling: CouplingSpec,
    /// Coupling operator in the energy eigenbasis.
    pub operator: CMatrix,
    /// Nonzero components, ascending in ω.
    pub components: Vec<FrequencyComponent>,
}

impl FrequencyResolvedOps {
    pub fn dim(&self) -> usize {
        self.operator.nrows()
    }

    pub fn get(&self, omega_index: usize) -> Option<&FrequencyComponent> {
        self.components.iter().find(|c| c.index == omega_index)
    }

    /// Allowed positive transition frequencies.
    pub fn allowed_gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.components.iter().filter(|c| c.omega > 0.0).map(|c| c.omega)
    }
}

/// Split the coupling operator into components X(ω) = Σ Π(ε) σ Π(ε') over ε' − ε = ω.
pub fn frequency_resolve(eig: &EigenSystem, coupling: &CouplingSpec) -> Result<FrequencyResolvedOps> {
    let dim = eig.dim();
    let num_sites = dim.trailing_zeros() as usize;
    if 1usize << num_sites != dim {
        return Err(Error::invalid("eigensystem", "dimension is not a power of two"));
    }
    if coupling.site >= num_sites {
        return Err(Error::invalid(
            "site",
            format!("coupling site {} out of range for {} sites", coupling.site, num_sites),
        ));
    }
    let operator = eig.to_eigenbasis(&coupling.system_operator(num_sites));
    let nf = eig.frequencies().len();
    let mut parts: Vec<Option<CMatrix>> = vec![None; nf];
    for j in 0..dim {
        for i in 0..dim {
            let v = operator[(i, j)];
            if v.norm() < ENTRY_CUTOFF {
                continue;
            }
            let f = eig.transition_index(i, j);
            parts[f].get_or_insert_with(|| CMatrix::zeros(dim, dim))[(i, j)] = v;
        }
    }
    let freqs = eig.frequencies();
    let components = parts
        .into_iter()
        .enumerate()
        .filter_map(|(index, m)| m.map(|matrix| FrequencyComponent { omega: freqs[index], index, matrix }))
        .collect();
    Ok(FrequencyResolvedOps { coupling: *coupling, operator, components })
}

pub fn frequency_resolve_all(eig: &EigenSystem, couplings: &[CouplingSpec]) -> Result<Vec<FrequencyResolvedOps>> {
    couplings.iter().map(|c| frequency_resolve(eig, c)).collect()
}

#[derive(Debug, Clone)]
pub struct ErgodicityVerdict {
    pub ergodic: bool,
    /// Dimension of the commutant of all X_m(ω).
    pub commutant_dim: usize,
    /// A non-identity element of the commutant when the dynamics are not ergodic.
    pub witness: Option<CMatrix>,
}

/// Solves [K, X_m(ω)] = 0 for all m, ω through the Gram operator
/// Σ A†A with A vec(K) = vec(KX − XK); its kernel is the commutant.
pub fn check_ergodicity(ops: &[FrequencyResolvedOps]) -> Result<ErgodicityVerdict> {
    let first = ops.first().ok_or_else(|| Error::invalid("couplings", "at least one coupling is required"))?;
    let d = first.dim();
    let mut xbar_xt = CMatrix::zeros(d, d);
    let mut xdag_x = CMatrix::zeros(d, d);
    let mut cross = CMatrix::zeros(d * d, d * d);
    for op in ops {
        if op.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
        }
        for c in &op.components {
            let x = &c.matrix;
            let xbar = x.map(|z| z.conj());
            xbar_xt += &xbar * x.transpose();
            xdag_x += x.adjoint() * x;
            cross += linalg::kron(&xbar, x) + linalg::kron(&x.transpose(), &x.adjoint());
        }
    }
    let eye = linalg::identity(d);
    let gram = linalg::kron(&xbar_xt, &eye) + linalg::kron(&eye, &xdag_x) - cross;
    let (values, vectors) = linalg::hermitian_eigen(&gram);
    let scale = values.last().cloned().unwrap_or(0.0).abs().max(1e-300);
    let null: Vec<usize> = (0..values.len()).filter(|&k| values[k] <= 1e-10 * scale).collect();
    let commutant_dim = if scale <= 1e-300 { d * d } else { null.len() };
    let ergodic = commutant_dim == 1;
    let witness = if ergodic {
        None
    } else {
        let unit = linalg::vectorize(&eye) / C64::new((d as f64).sqrt(), 0.0);
        let candidates: Vec<linalg::CVector> = if scale <= 1e-300 {
            (0..d * d).map(|k| vectors.column(k).into_owned()).collect()
        } else {
            null.iter().map(|&k| vectors.column(k).into_owned()).collect()
        };
        candidates
            .into_iter()
            .map(|v| {
                let overlap = unit.dotc(&v);
                &v - &unit * overlap
            })
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .map(|v| linalg::unvectorize(&(&v / C64::new(v.norm(), 0.0)), d))
    };
    Ok(ErgodicityVerdict { ergodic, commutant_dim, witness })
}
