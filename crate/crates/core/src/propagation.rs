//! Trotterized propagation, one-cycle maps, steady states and distances.

use crate::bath::BathSchedule;
use crate::error::{Error, Result};
use crate::hamiltonian::EigenSystem;
use crate::jump::FrequencyResolvedOps;
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::liouvillian::{DensityMatrix, RateFunction, SectorGenerator};

/// Default Trotter step in units of 1/J.
pub const DEFAULT_DT: f64 = 0.01;

/// Eigenvalues within this distance of the unit circle count as fixed points.
pub const UNIQUENESS_TOL: f64 = 1e-10;

/// Gibbs state e^{-βH}/Z, diagonal in the energy eigenbasis.
pub fn thermal_state(eig: &EigenSystem, beta: f64) -> Result<DensityMatrix> {
    if !(beta >= 0.0) {
        return Err(Error::invalid("beta", format!("must be >= 0, got {beta}")));
    }
    let e_min = eig.energies[0];
    let weights: Vec<f64> = eig.energies.iter().map(|&e| (-beta * (e - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let diag = CVector::from_iterator(weights.len(), weights.iter().map(|w| C64::new(w / z, 0.0)));
    Ok(DensityMatrix::new(CMatrix::from_diagonal(&diag)).expect("Gibbs weights form a valid state"))
}

/// ½ tr|ρ − σ|.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    assert_eq!(rho.shape(), sigma.shape(), "trace distance needs equal dimensions");
    let diff = rho - sigma;
    0.5 * diff.singular_values().iter().sum::<f64>()
}

/// exp(Δt·M) restricted to every sector at time `t`.
fn sector_factors(gen: &SectorGenerator, rates: &impl RateFunction, t: f64, dt: f64) -> Vec<CMatrix> {
    let slot = gen.slot_rates(rates, t);
    gen.sectors.iter().map(|s| linalg::expm(&(s.block(&slot) * C64::new(dt, 0.0)))).collect()
}

fn step_count(period: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let n = (period / dt).round();
    if n < 1.0 || (n * dt - period).abs() > 1e-9 * period.max(1.0) {
        return Err(Error::invalid("dt", format!("T_cycle = {period} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Block-diagonal one-period propagator V acting on column-stacked ρ.
#[derive(Debug, Clone)]
pub struct CycleMap {
    dim: usize,
    pub sectors: Vec<Vec<usize>>,
    pub blocks: Vec<CMatrix>,
    pub period: f64,
    pub dt: f64,
    pub steps: usize,
}

impl CycleMap {
    /// Wrap a dense d²×d² map as a single block.
    pub fn from_dense(v: CMatrix, period: f64, dt: f64) -> Self {
        let n = v.nrows();
        let dim = (n as f64).sqrt().round() as usize;
        let steps = (period / dt).round() as usize;
        CycleMap { dim, sectors: vec![(0..n).collect()], blocks: vec![v], period, dt, steps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dim * self.dim;
        let mut m = CMatrix::zeros(n, n);
        for (idx, b) in self.sectors.iter().zip(&self.blocks) {
            for (lr, &r) in idx.iter().enumerate() {
                for (lc, &c) in idx.iter().enumerate() {
                    m[(r, c)] = b[(lr, lc)];
                }
            }
        }
        m
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = linalg::vectorize(rho);
        let mut out = CVector::zeros(v.len());
        for (idx, b) in self.sectors.iter().zip(&self.blocks) {
            let local = CVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]));
            let w = b * local;
            for (k, &i) in idx.iter().enumerate() {
                out[i] = w[k];
            }
        }
        linalg::unvectorize(&out, self.dim)
    }

    /// Every eigenvalue of V, gathered block by block.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let mut all = Vec::with_capacity(self.dim * self.dim);
        for b in &self.blocks {
            all.extend(linalg::eigenvalues(b)?);
        }
        Ok(all)
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// max |1ᵀ_vec V − 1ᵀ_vec|: zero for an exactly trace-preserving map.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for (idx, b) in self.sectors.iter().zip(&self.blocks) {
            for (lc, &c) in idx.iter().enumerate() {
                let mut s = linalg::ZERO;
                for (lr, &r) in idx.iter().enumerate() {
                    if r % (d + 1) == 0 {
                        s += b[(lr, lc)];
                    }
                }
                let target = if c % (d + 1) == 0 { linalg::ONE } else { linalg::ZERO };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }
}

/// V = E_{N-1} ⋯ E_1 E_0 with E_i = exp(Δt·M(iΔt)) and N = period/Δt.
pub fn cycle_map_with(gen: &SectorGenerator, rates: &impl RateFunction, period: f64, dt: f64) -> Result<CycleMap> {
    let steps = step_count(period, dt)?;
    let mut blocks: Vec<CMatrix> = gen.sectors.iter().map(|s| linalg::identity(s.len())).collect();
    for i in 0..steps {
        let t = i as f64 * dt;
        let factors = sector_factors(gen, rates, t, dt);
        for (b, f) in blocks.iter_mut().zip(factors) {
            *b = f * &*b;
        }
    }
    Ok(CycleMap {
        dim: gen.dim(),
        sectors: gen.sectors.iter().map(|s| s.indices.clone()).collect(),
        blocks,
        period,
        dt,
        steps,
    })
}

pub fn cycle_map(ops: &[FrequencyResolvedOps], sched: &BathSchedule, dt: f64) -> Result<CycleMap> {
    let gen = SectorGenerator::new(ops)?;
    cycle_map_with(&gen, sched, sched.t_cycle, dt)
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// Eigenvalue of V the state belongs to.
    pub eigenvalue: C64,
    /// Largest modulus among the remaining eigenvalues.
    pub second_modulus: f64,
}

impl SteadyState {
    /// 1 − |λ₂| of the cycle map.
    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.second_modulus
    }
}

/// Fixed point of the cycle map: the eigenvector whose eigenvalue is closest
/// to 1, reshaped, normalized to unit trace and Hermitized.
pub fn steady_state(map: &CycleMap) -> Result<SteadyState> {
    let mut best: Option<(usize, C64, f64)> = None;
    let mut moduli = Vec::new();
    for (k, b) in map.blocks.iter().enumerate() {
        for z in linalg::eigenvalues(b)? {
            moduli.push(z.norm());
            let dist = (z - linalg::ONE).norm();
            if best.is_none_or(|(_, _, d)| dist < d) {
                best = Some((k, z, dist));
            }
        }
    }
    let (block, eigenvalue, _) = best.ok_or_else(|| Error::Numerical("empty cycle map".into()))?;
    let near_one = moduli.iter().filter(|&&m| m > 1.0 - UNIQUENESS_TOL).count();
    if near_one > 1 {
        return Err(Error::NonUniqueSteadyState { count: near_one });
    }
    moduli.sort_by(|a, b| b.total_cmp(a));
    let second_modulus = moduli.get(1).cloned().unwrap_or(0.0);

    let b = &map.blocks[block];
    let shifted = b - linalg::identity(b.nrows()) * eigenvalue;
    let (local, _) = linalg::null_vector(&shifted)?;
    let d = map.dim();
    let mut full = CVector::zeros(d * d);
    for (k, &i) in map.sectors[block].iter().enumerate() {
        full[i] = local[k];
    }
    let raw = linalg::unvectorize(&full, d);
    let tr = linalg::trace(&raw);
    if tr.norm() < 1e-300 {
        return Err(Error::Numerical("fixed point of the cycle map is traceless".into()));
    }
    let rho = linalg::hermitize(&(raw / tr));
    Ok(SteadyState { rho: DensityMatrix::new(rho)?, eigenvalue, second_modulus })
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Record every `record_stride` steps (the initial and final states are always recorded).
    pub record_stride: usize,
    /// Stop at the first multiple of `check_every` steps where the trace
    /// distance to the reference drops below `threshold`.
    pub stop: Option<StopRule>,
}

#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub threshold: f64,
    pub check_every: usize,
}

#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub populations: Vec<f64>,
    /// Frobenius norm of the off-diagonal part of ρ.
    pub coherence_norm: f64,
    pub trace: f64,
    pub trace_distance: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub final_state: CMatrix,
    pub stopped_early: bool,
    /// Largest ‖Δt·M(t)‖₁ over the run.
    pub max_step_norm: f64,
}

fn snapshot(t: f64, rho: &CMatrix, reference: &CMatrix) -> TrajectoryPoint {
    let d = rho.nrows();
    let mut off = 0.0;
    for j in 0..d {
        for i in 0..d {
            if i != j {
                off += rho[(i, j)].norm_sqr();
            }
        }
    }
    TrajectoryPoint {
        t,
        populations: rho.diagonal().iter().map(|z| z.re).collect(),
        coherence_norm: off.sqrt(),
        trace: linalg::trace(rho).re,
        trace_distance: trace_distance(rho, reference),
    }
}

/// Left-endpoint Trotter evolution ρ_{i+1} = exp(Δt·M(iΔt)) ρ_i.
pub fn evolve(
    rho0: &DensityMatrix,
    gen: &SectorGenerator,
    rates: &impl RateFunction,
    reference: &CMatrix,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let d = gen.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho0.dim() });
    }
    if !(opts.dt > 0.0) || !(opts.t_final >= 0.0) {
        return Err(Error::invalid("dt", "dt must be > 0 and t_final >= 0"));
    }
    let stride = opts.record_stride.max(1);
    let steps = (opts.t_final / opts.dt).round() as usize;
    let mut v = linalg::vectorize(rho0.matrix());
    let mut points = vec![snapshot(0.0, rho0.matrix(), reference)];
    let mut stopped_early = false;
    let mut max_step_norm = 0.0f64;
    let mut last_recorded = 0usize;
    for i in 0..steps {
        let t = i as f64 * opts.dt;
        let slot = gen.slot_rates(rates, t);
        for s in &gen.sectors {
            let a = s.block(&slot) * C64::new(opts.dt, 0.0);
            max_step_norm = max_step_norm.max(linalg::one_norm(&a));
            let e = linalg::expm(&a);
            let local = CVector::from_iterator(s.len(), s.indices.iter().map(|&k| v[k]));
            let w = e * local;
            for (k, &idx) in s.indices.iter().enumerate() {
                v[idx] = w[k];
            }
        }
        let n = i + 1;
        let check = opts.stop.is_some_and(|r| n % r.check_every.max(1) == 0);
        if n % stride == 0 || check || n == steps {
            let rho = linalg::unvectorize(&v, d);
            let p = snapshot(n as f64 * opts.dt, &rho, reference);
            let below = opts.stop.is_some_and(|r| check && p.trace_distance < r.threshold);
            if last_recorded != n {
                points.push(p);
                last_recorded = n;
            }
            if below {
                stopped_early = n < steps;
                break;
            }
        }
    }
    if max_step_norm > 0.1 {
        log::warn!("Δt·‖M‖ reached {max_step_norm:.3}; the Trotter step is not small next to the fastest rate");
    }
    Ok(Trajectory { points, final_state: linalg::unvectorize(&v, d), stopped_early, max_step_norm })
}
