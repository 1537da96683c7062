//! Time-dependent reduced generator in the energy eigenbasis.
//!
//! Three equivalent views are provided: the dense column-stacked
//! superoperator ([`build_generator`]), the direct action on a density
//! matrix ([`apply_rhs`]), and a block-diagonal form ([`SectorGenerator`])
//! used for propagation. The blocks come from the connected components of
//! the generator's sparsity pattern, so restricting to them is exact.

use std::collections::BTreeMap;

use crate::bath::BathSchedule;
use crate::error::{Error, Result};
use crate::hamiltonian::EigenSystem;
use crate::jump::FrequencyResolvedOps;
use crate::linalg::{self, CMatrix, CVector, C64};

/// Transition-rate profile λ_t(ω) seen by the system.
pub trait RateFunction: Sync {
    fn rate(&self, t: f64, omega: f64) -> f64;
}

impl RateFunction for BathSchedule {
    fn rate(&self, t: f64, omega: f64) -> f64 {
        self.spectral_density(t, omega)
    }
}

impl<F> RateFunction for F
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn rate(&self, t: f64, omega: f64) -> f64 {
        self(t, omega)
    }
}

/// Hermitian, unit-trace, positive semidefinite d×d matrix in the energy eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let defect = linalg::hermiticity_defect(&m);
        if defect > 1e-10 {
            return Err(Error::NotHermitian { defect });
        }
        let tr = linalg::trace(&m);
        if (tr - linalg::ONE).norm() > 1e-10 {
            return Err(Error::invalid("rho", format!("trace {tr} is not 1")));
        }
        let min = linalg::min_eigenvalue(&m);
        if min < -1e-8 {
            return Err(Error::invalid("rho", format!("negative eigenvalue {min:.3e}")));
        }
        Ok(DensityMatrix(m))
    }

    /// Pure state |k⟩⟨k|.
    pub fn basis_state(d: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = linalg::ONE;
        DensityMatrix(m)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(linalg::identity(d) / C64::new(d as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.diagonal().iter().map(|z| z.re).collect()
    }
}

/// Column-stacked superoperator acting on vec(ρ).
#[derive(Debug, Clone)]
pub struct Superoperator(pub CMatrix);

impl Superoperator {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = rho.nrows();
        linalg::unvectorize(&(&self.0 * linalg::vectorize(rho)), d)
    }

    /// ‖1ᵀ_vec · M‖_max where 1_vec = vec(I); zero for trace-annihilating generators.
    pub fn trace_defect(&self) -> f64 {
        let d = (self.0.nrows() as f64).sqrt().round() as usize;
        (0..self.0.ncols()).map(|c| (0..d).map(|i| self.0[(i + i * d, c)]).sum::<C64>().norm()).fold(0.0, f64::max)
    }
}

fn check_dims(ops: &[FrequencyResolvedOps]) -> Result<usize> {
    let d = ops.first().map(|o| o.dim()).unwrap_or(0);
    for op in ops {
        if op.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
        }
    }
    Ok(d)
}

/// M(t) = Σ_m g_m² Σ_ω λ_t(ω)[(X†)ᵀ⊗X − ½ I⊗X†X − ½ (X†X)ᵀ⊗I].
pub fn build_generator(ops: &[FrequencyResolvedOps], rates: &impl RateFunction, t: f64) -> Result<Superoperator> {
    let d = check_dims(ops)?;
    let eye = linalg::identity(d);
    let mut m = CMatrix::zeros(d * d, d * d);
    for op in ops {
        let g2 = op.coupling.strength * op.coupling.strength;
        for c in &op.components {
            let lam = rates.rate(t, c.omega);
            let x = &c.matrix;
            let xdx = x.adjoint() * x;
            let term = linalg::kron(&x.adjoint().transpose(), x)
                - linalg::kron(&eye, &xdx) * C64::new(0.5, 0.0)
                - linalg::kron(&xdx.transpose(), &eye) * C64::new(0.5, 0.0);
            m += term * C64::new(g2 * lam, 0.0);
        }
    }
    Ok(Superoperator(m))
}

/// dρ/dt = Σ_m g² Σ_ω λ_t(ω)[XρX† − ½{X†X, ρ}].
pub fn apply_rhs(ops: &[FrequencyResolvedOps], rates: &impl RateFunction, t: f64, rho: &CMatrix) -> Result<CMatrix> {
    let d = check_dims(ops)?;
    if rho.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho.nrows() });
    }
    let mut out = CMatrix::zeros(d, d);
    for op in ops {
        let g2 = op.coupling.strength * op.coupling.strength;
        for c in &op.components {
            let lam = rates.rate(t, c.omega);
            let x = &c.matrix;
            let xd = x.adjoint();
            let xdx = &xd * x;
            let term = x * rho * &xd - (&xdx * rho + rho * &xdx) * C64::new(0.5, 0.0);
            out += term * C64::new(g2 * lam, 0.0);
        }
    }
    Ok(out)
}

/// Classical rate matrix and coherence decay rates for a nondegenerate spectrum.
#[derive(Debug, Clone)]
pub struct PopulationRates {
    /// `rates[(i, j)]` is the rate from level j into level i for i ≠ j; the
    /// diagonal holds minus the total outflow, so columns sum to zero.
    pub rates: nalgebra::DMatrix<f64>,
    /// `coherence_decay[(i, j)]`: ċ_ij = −coherence_decay[(i, j)]·c_ij.
    pub coherence_decay: nalgebra::DMatrix<f64>,
}

pub fn population_rates(
    eig: &EigenSystem,
    ops: &[FrequencyResolvedOps],
    rates: &impl RateFunction,
    t: f64,
) -> Result<PopulationRates> {
    let d = check_dims(ops)?;
    if d != eig.dim() {
        return Err(Error::DimensionMismatch { expected: eig.dim(), found: d });
    }
    if !eig.is_nondegenerate() {
        return Err(Error::DegenerateSpectrum { what: "energies" });
    }
    if !eig.has_distinct_gaps() {
        return Err(Error::DegenerateSpectrum { what: "gaps" });
    }
    let mut r = nalgebra::DMatrix::<f64>::zeros(d, d);
    // total rate out of each level, ω = 0 self-transitions included
    let mut outflow = vec![0.0; d];
    // λ(0)·σ_ii·σ̄_jj feeds a coherence back into itself
    let mut self_gain = nalgebra::DMatrix::<f64>::zeros(d, d);
    for op in ops {
        let g2 = op.coupling.strength * op.coupling.strength;
        let sigma = &op.operator;
        for j in 0..d {
            for i in 0..d {
                if sigma[(i, j)].norm() < crate::jump::ENTRY_CUTOFF {
                    continue;
                }
                let k = g2 * rates.rate(t, eig.transition_frequency(i, j)) * sigma[(i, j)].norm_sqr();
                outflow[j] += k;
                if i != j {
                    r[(i, j)] += k;
                }
            }
        }
        let lam0 = g2 * rates.rate(t, 0.0);
        for i in 0..d {
            for j in 0..d {
                let (a, b) = (sigma[(i, i)], sigma[(j, j)]);
                if a.norm() >= crate::jump::ENTRY_CUTOFF && b.norm() >= crate::jump::ENTRY_CUTOFF {
                    self_gain[(i, j)] += lam0 * (a * b.conj()).re;
                }
            }
        }
    }
    for j in 0..d {
        r[(j, j)] = -(0..d).filter(|&i| i != j).map(|i| r[(i, j)]).sum::<f64>();
    }
    let coh = nalgebra::DMatrix::<f64>::from_fn(d, d, |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (outflow[i] + outflow[j]) - self_gain[(i, j)]
        }
    });
    Ok(PopulationRates { rates: r, coherence_decay: coh })
}

/// Generator restricted to one invariant block of index pairs.
#[derive(Debug, Clone)]
pub struct Sector {
    /// Column-stacked indices (i + j·d) that make up the block.
    pub indices: Vec<usize>,
    /// (frequency slot, local row, local column, coefficient) entries.
    entries: Vec<(usize, usize, usize, C64)>,
}

impl Sector {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Dense block Σ_f λ_f · D_f restricted to this sector.
    pub fn block(&self, slot_rates: &[f64]) -> CMatrix {
        let n = self.indices.len();
        let mut m = CMatrix::zeros(n, n);
        for &(f, r, c, v) in &self.entries {
            m[(r, c)] += v * slot_rates[f];
        }
        m
    }
}

/// Generator as a sum over frequencies of fixed superoperators D_ω, split
/// into invariant sectors: M(t) = Σ_ω λ_t(ω) D_ω.
#[derive(Debug, Clone)]
pub struct SectorGenerator {
    dim: usize,
    /// Frequency of each slot.
    pub frequencies: Vec<f64>,
    pub sectors: Vec<Sector>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl SectorGenerator {
    pub fn new(ops: &[FrequencyResolvedOps]) -> Result<Self> {
        let d = check_dims(ops)?;
        if d == 0 {
            return Err(Error::invalid("couplings", "at least one coupling is required"));
        }
        let n = d * d;
        // slot per distinct frequency index
        let mut slot_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut frequencies = Vec::new();
        let mut triplets: BTreeMap<(usize, usize, usize), C64> = BTreeMap::new();
        let half = C64::new(0.5, 0.0);
        for op in ops {
            let g2 = op.coupling.strength * op.coupling.strength;
            if g2 == 0.0 {
                continue;
            }
            let g2 = C64::new(g2, 0.0);
            for c in &op.components {
                let slot = *slot_of.entry(c.index).or_insert_with(|| {
                    frequencies.push(c.omega);
                    frequencies.len() - 1
                });
                let x = &c.matrix;
                let nz: Vec<(usize, usize, C64)> = (0..d)
                    .flat_map(|j| (0..d).map(move |i| (i, j)))
                    .filter(|&(i, j)| x[(i, j)] != linalg::ZERO)
                    .map(|(i, j)| (i, j, x[(i, j)]))
                    .collect();
                // X ρ X†: ρ[k,l] → out[i,j] with coefficient X[i,k]·conj(X[j,l])
                for &(i, k, xik) in &nz {
                    for &(j, l, xjl) in &nz {
                        *triplets.entry((slot, i + j * d, k + l * d)).or_insert(linalg::ZERO) += g2 * xik * xjl.conj();
                    }
                }
                let xdx = x.adjoint() * x;
                for a in 0..d {
                    for b in 0..d {
                        let v = xdx[(a, b)];
                        if v == linalg::ZERO {
                            continue;
                        }
                        // −½ X†X ρ: out[a, j] += v ρ[b, j]; −½ ρ X†X: out[i, b] += ρ[i, a] v
                        for j in 0..d {
                            *triplets.entry((slot, a + j * d, b + j * d)).or_insert(linalg::ZERO) -= half * g2 * v;
                            *triplets.entry((slot, j + b * d, j + a * d)).or_insert(linalg::ZERO) -= half * g2 * v;
                        }
                    }
                }
            }
        }

        let mut uf = UnionFind((0..n).collect());
        for (&(_, r, c), v) in &triplets {
            if *v != linalg::ZERO {
                uf.union(r, c);
            }
        }
        let mut sector_of_root: BTreeMap<usize, usize> = BTreeMap::new();
        let mut sectors: Vec<Sector> = Vec::new();
        let mut local = vec![0usize; n];
        let mut owner = vec![0usize; n];
        for idx in 0..n {
            let root = uf.find(idx);
            let s = *sector_of_root.entry(root).or_insert_with(|| {
                sectors.push(Sector { indices: Vec::new(), entries: Vec::new() });
                sectors.len() - 1
            });
            local[idx] = sectors[s].indices.len();
            owner[idx] = s;
            sectors[s].indices.push(idx);
        }
        for ((slot, r, c), v) in triplets {
            if v != linalg::ZERO {
                sectors[owner[r]].entries.push((slot, local[r], local[c], v));
            }
        }
        Ok(SectorGenerator { dim: d, frequencies, sectors })
    }

    /// Hilbert-space dimension d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slot_rates(&self, rates: &impl RateFunction, t: f64) -> Vec<f64> {
        self.frequencies.iter().map(|&w| rates.rate(t, w)).collect()
    }

    /// Largest sector size.
    pub fn max_sector(&self) -> usize {
        self.sectors.iter().map(Sector::len).max().unwrap_or(0)
    }

    pub fn to_dense(&self, rates: &impl RateFunction, t: f64) -> Superoperator {
        let slot = self.slot_rates(rates, t);
        let n = self.dim * self.dim;
        let mut m = CMatrix::zeros(n, n);
        for s in &self.sectors {
            let b = s.block(&slot);
            for (lr, &r) in s.indices.iter().enumerate() {
                for (lc, &c) in s.indices.iter().enumerate() {
                    m[(r, c)] = b[(lr, lc)];
                }
            }
        }
        Superoperator(m)
    }

    /// Apply M(t) to vec(ρ).
    pub fn apply(&self, rates: &impl RateFunction, t: f64, rho: &CVector) -> CVector {
        let slot = self.slot_rates(rates, t);
        let mut out = CVector::zeros(rho.len());
        for s in &self.sectors {
            let b = s.block(&slot);
            let v = CVector::from_iterator(s.len(), s.indices.iter().map(|&i| rho[i]));
            let w = b * v;
            for (k, &i) in s.indices.iter().enumerate() {
                out[i] = w[k];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{spectral_density_at, BathSchedule};
    use crate::hamiltonian::{build_two_spin, diagonalize, Axis, HamiltonianSpec, PauliTerm};
    use crate::jump::{frequency_resolve_all, CouplingSpec};
    use crate::linalg::max_abs;

    fn setup(g: f64) -> (EigenSystem, Vec<FrequencyResolvedOps>, BathSchedule) {
        let eig = diagonalize(&build_two_spin(0.8, 0.5), 1e-9).unwrap();
        let couplings = [CouplingSpec::new(0, 0, Axis::X, g).unwrap(), CouplingSpec::new(1, 1, Axis::X, g).unwrap()];
        let ops = frequency_resolve_all(&eig, &couplings).unwrap();
        let sched = BathSchedule::sawtooth(1.0, 0.1, 1.2 * eig.delta_max, 40.0).unwrap();
        (eig, ops, sched)
    }

    fn random_state(d: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = CMatrix::from_fn(d, d, |_, _| C64::new(next(), next()));
        let rho = &a * a.adjoint();
        let tr = linalg::trace(&rho);
        rho / tr
    }

    #[test]
    fn zero_coupling_gives_zero_generator() {
        let (_, ops, sched) = setup(0.0);
        let m = build_generator(&ops, &sched, 3.0).unwrap();
        assert_eq!(max_abs(m.matrix()), 0.0);
    }

    #[test]
    fn dense_direct_and_sector_forms_agree() {
        let (_, ops, sched) = setup(0.1);
        let sectors = SectorGenerator::new(&ops).unwrap();
        for (k, t) in [0.0, 7.3, 21.0, 39.99].iter().enumerate() {
            let m = build_generator(&ops, &sched, *t).unwrap();
            let rho = random_state(4, k as u64);
            let direct = apply_rhs(&ops, &sched, *t, &rho).unwrap();
            assert!(max_abs(&(m.apply(&rho) - &direct)) < 1e-12);
            let blocked = sectors.to_dense(&sched, *t);
            assert!(max_abs(&(blocked.matrix() - m.matrix())) < 1e-14);
            let v = sectors.apply(&sched, *t, &linalg::vectorize(&rho));
            assert!(max_abs(&(linalg::unvectorize(&v, 4) - direct)) < 1e-12);
        }
        // populations form one block, the rest are single coherences
        assert_eq!(sectors.max_sector(), 4);
    }

    #[test]
    fn generator_annihilates_trace() {
        let (_, ops, sched) = setup(0.1);
        for k in 0..50 {
            let t = (k as f64 * 0.731) % 40.0;
            let m = build_generator(&ops, &sched, t).unwrap();
            assert!(m.trace_defect() < 1e-10);
        }
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let (_, ops, sched) = setup(0.1);
        let rho = random_state(4, 42);
        let out = apply_rhs(&ops, &sched, 12.0, &rho).unwrap();
        assert!(linalg::trace(&out).norm() < 1e-14);
        assert!(linalg::hermiticity_defect(&out) < 1e-14);
    }

    #[test]
    fn maximally_mixed_is_fixed_at_infinite_temperature() {
        let (_, ops, _) = setup(0.1);
        let hot = BathSchedule::sawtooth(0.0, 0.1, 5.775, 40.0).unwrap();
        let rho = DensityMatrix::maximally_mixed(4);
        for t in [0.0, 5.0, 33.3] {
            let out = apply_rhs(&ops, &hot, t, rho.matrix()).unwrap();
            assert!(max_abs(&out) < 1e-12);
        }
    }

    #[test]
    fn two_level_population_block() {
        let w0 = 2.0;
        let spec = HamiltonianSpec::new(1, vec![PauliTerm::new(w0 / 2.0, vec![(0, Axis::Z)])]).unwrap();
        let eig = diagonalize(&spec, 1e-9).unwrap();
        let ops = frequency_resolve_all(&eig, &[CouplingSpec::new(0, 0, Axis::X, 0.3).unwrap()]).unwrap();
        let bath = BathSchedule::fixed(1.0, 0.1, w0).unwrap();
        let m = build_generator(&ops, &bath, 0.0).unwrap();
        let down = 0.09 * spectral_density_at(1.0, 0.1, w0, w0);
        let up = 0.09 * spectral_density_at(1.0, 0.1, w0, -w0);
        // vec indices: (0,0) -> 0, (1,1) -> 3
        assert!((m.matrix()[(0, 3)].re - down).abs() < 1e-12);
        assert!((m.matrix()[(3, 0)].re - up).abs() < 1e-12);
        assert!((m.matrix()[(0, 0)].re + up).abs() < 1e-12);
        assert!((m.matrix()[(3, 3)].re + down).abs() < 1e-12);
        let pr = population_rates(&eig, &ops, &bath, 0.0).unwrap();
        assert!((pr.rates[(0, 1)] - down).abs() < 1e-12);
        // coherence decays at half the summed rates
        assert!((pr.coherence_decay[(0, 1)] - 0.5 * (up + down)).abs() < 1e-12);
        assert!((m.matrix()[(1, 1)].re + 0.5 * (up + down)).abs() < 1e-12);
    }

    #[test]
    fn population_rates_match_generator_block() {
        let (eig, ops, sched) = setup(0.1);
        for t in [1.0, 17.5, 30.0] {
            let pr = population_rates(&eig, &ops, &sched, t).unwrap();
            let m = build_generator(&ops, &sched, t).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert!((pr.rates[(i, j)] - m.matrix()[(i * 5, j * 5)].re).abs() < 1e-12);
                    if i != j {
                        let k = i + 4 * j;
                        assert!((pr.coherence_decay[(i, j)] + m.matrix()[(k, k)].re).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn population_rates_reject_degenerate() {
        let spec = HamiltonianSpec::new(2, vec![PauliTerm::new(1.0, vec![(0, Axis::Z)])]).unwrap();
        let eig = diagonalize(&spec, 1e-9).unwrap();
        let ops = frequency_resolve_all(&eig, &[CouplingSpec::new(0, 0, Axis::X, 0.1).unwrap()]).unwrap();
        let bath = BathSchedule::fixed(1.0, 0.1, 2.0).unwrap();
        assert!(matches!(population_rates(&eig, &ops, &bath, 0.0), Err(Error::DegenerateSpectrum { .. })));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(linalg::identity(2)).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::new(random_state(3, 1)).is_ok());
        assert_eq!(DensityMatrix::basis_state(4, 2).populations(), vec![0.0, 0.0, 1.0, 0.0]);
    }
}
