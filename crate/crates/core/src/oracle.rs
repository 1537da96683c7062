//! Brute-force system-plus-ancilla model used to check the reduced equation.
//!
//! Qubit order in the joint space: system sites first, then one qubit per
//! ancilla. Ancilla |0⟩ is its ground level (energy −Ω/2).

use serde::{Deserialize, Serialize};

use crate::bath::{boltzmann_population, excited_population, pumping_rates, BathSchedule};
use crate::error::{Error, Result};
use crate::hamiltonian::{diagonalize, pauli_string_matrix, Axis, HamiltonianSpec, PauliTerm};
use crate::jump::{frequency_resolve_all, CouplingSpec};
use crate::linalg::{self, CMatrix, C64};
use crate::liouvillian::SectorGenerator;
use crate::propagation::trace_distance;

/// Largest joint space handled by the oracle (2 system + 2 ancilla qubits).
pub const MAX_JOINT_QUBITS: usize = 4;

#[derive(Debug, Clone)]
pub struct JointModel {
    pub system: HamiltonianSpec,
    pub couplings: Vec<CouplingSpec>,
    pub schedule: BathSchedule,
    num_ancillas: usize,
    static_part: CMatrix,
    half_z: CMatrix,
    raising: Vec<CMatrix>,
    lowering: Vec<CMatrix>,
}

impl JointModel {
    pub fn new(system: HamiltonianSpec, couplings: Vec<CouplingSpec>, schedule: BathSchedule) -> Result<Self> {
        let l = system.num_sites;
        let m = couplings.iter().map(|c| c.ancilla + 1).max().unwrap_or(0);
        if m == 0 {
            return Err(Error::invalid("couplings", "at least one ancilla coupling is required"));
        }
        if l + m > MAX_JOINT_QUBITS {
            return Err(Error::invalid(
                "couplings",
                format!("joint space of {} qubits exceeds the oracle limit of {MAX_JOINT_QUBITS}", l + m),
            ));
        }
        for c in &couplings {
            if c.site >= l {
                return Err(Error::invalid("site", format!("coupling site {} out of range", c.site)));
            }
        }
        let n = l + m;
        let mut static_part = linalg::kron(&system.matrix(), &linalg::identity(1 << m));
        for c in &couplings {
            let op = pauli_string_matrix(n, &[(c.site, c.axis), (l + c.ancilla, Axis::X)]);
            static_part += op * C64::new(c.strength, 0.0);
        }
        let mut half_z = CMatrix::zeros(1 << n, 1 << n);
        let mut raising = Vec::with_capacity(m);
        let mut lowering = Vec::with_capacity(m);
        for a in 0..m {
            let q = l + a;
            half_z += pauli_string_matrix(n, &[(q, Axis::Z)]) * C64::new(0.5, 0.0);
            let x = pauli_string_matrix(n, &[(q, Axis::X)]);
            let y = pauli_string_matrix(n, &[(q, Axis::Y)]);
            let iy = y * C64::new(0.0, 0.5);
            // |1⟩⟨0| = (X − iY)/2 and |0⟩⟨1| = (X + iY)/2
            raising.push(&x * C64::new(0.5, 0.0) - &iy);
            lowering.push(&x * C64::new(0.5, 0.0) + &iy);
        }
        Ok(JointModel { system, couplings, schedule, num_ancillas: m, static_part, half_z, raising, lowering })
    }

    pub fn num_ancillas(&self) -> usize {
        self.num_ancillas
    }

    pub fn dim(&self) -> usize {
        1 << (self.system.num_sites + self.num_ancillas)
    }

    /// H(t) = H_sys ⊗ I − Σ (Ω(t)/2) τ_z + Σ g σ τ_x.
    pub fn hamiltonian(&self, t: f64) -> CMatrix {
        &self.static_part - &self.half_z * C64::new(self.schedule.omega_at(t), 0.0)
    }

    /// Product state ρ_sys ⊗ (ancilla Gibbs states at Ω(t0)).
    pub fn product_state(&self, system: &CMatrix, t0: f64) -> Result<CMatrix> {
        if system.nrows() != self.system.dim() {
            return Err(Error::DimensionMismatch { expected: self.system.dim(), found: system.nrows() });
        }
        let (beta, omega) = (self.schedule.beta, self.schedule.omega_at(t0));
        let mut anc = CMatrix::zeros(2, 2);
        anc[(0, 0)] = C64::new(boltzmann_population(beta, omega), 0.0);
        anc[(1, 1)] = C64::new(excited_population(beta, omega), 0.0);
        let mut r = system.clone();
        for _ in 0..self.num_ancillas {
            r = linalg::kron(&r, &anc);
        }
        Ok(r)
    }

    /// Largest step allowed by the integrator rule.
    pub fn max_step(&self) -> f64 {
        let h_norm = linalg::operator_norm(&self.hamiltonian(0.0))
            .max(linalg::operator_norm(&self.hamiltonian(self.schedule.t_cycle * 0.999_999)));
        0.01f64.min(0.1 / self.schedule.gamma).min(0.1 / h_norm.max(1e-300))
    }
}

fn dissipate(a: &CMatrix, r: &CMatrix, rate: f64, out: &mut CMatrix) {
    let ad = a.adjoint();
    let ada = &ad * a;
    let term = a * r * &ad - (&ada * r + r * &ada) * C64::new(0.5, 0.0);
    *out += term * C64::new(rate, 0.0);
}

/// −i[H(t), R] + Σ γ₊ D[τ₊]R + γ₋ D[τ₋]R.
pub fn joint_rhs(model: &JointModel, t: f64, r: &CMatrix) -> CMatrix {
    let h = model.hamiltonian(t);
    let mut out = (&h * r - r * &h) * C64::new(0.0, -1.0);
    let rates = pumping_rates(&model.schedule, t);
    for (up, down) in model.raising.iter().zip(&model.lowering) {
        dissipate(up, r, rates.gamma_plus, &mut out);
        dissipate(down, r, rates.gamma_minus, &mut out);
    }
    out
}

/// Classical fourth-order Runge–Kutta over [t0, t0 + steps·h].
pub fn integrate(model: &JointModel, r0: &CMatrix, t0: f64, h: f64, steps: usize) -> CMatrix {
    let mut r = r0.clone();
    let half = C64::new(h / 2.0, 0.0);
    let full = C64::new(h, 0.0);
    let sixth = C64::new(h / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = joint_rhs(model, t, &r);
        let k2 = joint_rhs(model, t + h / 2.0, &(&r + &k1 * half));
        let k3 = joint_rhs(model, t + h / 2.0, &(&r + &k2 * half));
        let k4 = joint_rhs(model, t + h, &(&r + &k3 * full));
        r += (k1 + (k2 + k3) * two + k4) * sixth;
    }
    r
}

/// Trace out the last `traced` qubits of an n-qubit operator.
pub fn partial_trace_tail(r: &CMatrix, traced: usize) -> CMatrix {
    let env = 1usize << traced;
    let keep = r.nrows() / env;
    CMatrix::from_fn(keep, keep, |i, j| (0..env).map(|k| r[(i * env + k, j * env + k)]).sum())
}

/// Trace out the system qubits, leaving the ancillae.
pub fn partial_trace_head(r: &CMatrix, traced: usize) -> CMatrix {
    let keep = r.nrows() >> traced;
    let sys = 1usize << traced;
    CMatrix::from_fn(keep, keep, |i, j| (0..sys).map(|k| r[(k * keep + i, k * keep + j)]).sum())
}

/// Single system spin H = field·σ_z coupled through σ_x to one ancilla held at fixed Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleScenario {
    pub field: f64,
    pub g: f64,
    pub gamma: f64,
    pub omega: f64,
    pub beta: f64,
    pub horizon: f64,
    /// Number of comparison points after t = 0.
    pub samples: usize,
}

impl OracleScenario {
    /// H_sys = 2σ_z, Γ = 0.1, Ω = 4 (resonant), β = 1, T = 500.
    pub fn resonant(g: f64) -> Self {
        OracleScenario { field: 2.0, g, gamma: 0.1, omega: 4.0, beta: 1.0, horizon: 500.0, samples: 500 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeRatios {
    pub coupling_over_damping: f64,
    pub damping_over_system: f64,
    pub sweep_over_coupling: f64,
}

/// Reduced model with every rate multiplied by `rate_scale`, compared with the joint marginal.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedComparison {
    pub rate_scale: f64,
    pub deviation: Vec<f64>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub scenario: OracleScenario,
    pub step: f64,
    pub times: Vec<f64>,
    pub comparisons: Vec<ReducedComparison>,
    pub regime: RegimeRatios,
    /// Largest |tr R − 1| seen along the joint trajectory.
    pub joint_trace_defect: f64,
    /// Most negative eigenvalue seen along the joint trajectory.
    pub joint_min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

impl OracleReport {
    pub fn comparison(&self, rate_scale: f64) -> Option<&ReducedComparison> {
        self.comparisons.iter().find(|c| (c.rate_scale - rate_scale).abs() < 1e-12)
    }
}

/// Rate scales compared by [`validate_reduction`]: the spectral density as
/// defined, and twice it (the real part of the one-sided correlation integral
/// counted for both orderings).
pub const RATE_SCALES: [f64; 2] = [1.0, 2.0];

/// Integrate the joint model and the reduced equation from the system's
/// excited eigenstate and report their trace distance over time.
pub fn validate_reduction(sc: &OracleScenario) -> Result<OracleReport> {
    if !(sc.horizon > 0.0) || sc.samples == 0 {
        return Err(Error::invalid("horizon", "horizon and sample count must be positive"));
    }
    let system = HamiltonianSpec::new(1, vec![PauliTerm::new(sc.field, vec![(0, Axis::Z)])])?;
    let coupling = CouplingSpec::new(0, 0, Axis::X, sc.g)?;
    let schedule = BathSchedule::fixed(sc.beta, sc.gamma, sc.omega)?;
    let eig = diagonalize(&system, 1e-9)?;
    let h_norm = linalg::operator_norm(&system.matrix());

    let mut warnings = Vec::new();
    if sc.g > sc.gamma {
        warnings.push(format!("coupling g = {} exceeds the damping Γ = {}", sc.g, sc.gamma));
    }
    if sc.gamma > 0.1 * h_norm {
        warnings.push(format!("damping Γ = {} is not small next to ‖H_sys‖ = {h_norm}", sc.gamma));
    }
    let regime = RegimeRatios {
        coupling_over_damping: sc.g / sc.gamma,
        damping_over_system: sc.gamma / h_norm,
        sweep_over_coupling: 0.0,
    };

    let model = JointModel::new(system, vec![coupling], schedule)?;
    let interval = sc.horizon / sc.samples as f64;
    let substeps = (interval / model.max_step()).ceil().max(1.0) as usize;
    let h = interval / substeps as f64;

    let excited = eig.dim() - 1;
    let sys0 = eig.from_eigenbasis(&CMatrix::from_fn(2, 2, |i, j| {
        if i == excited && j == excited {
            linalg::ONE
        } else {
            linalg::ZERO
        }
    }));
    let mut joint = model.product_state(&sys0, 0.0)?;

    let ops = frequency_resolve_all(&eig, &[coupling])?;
    let gen = SectorGenerator::new(&ops)?;
    let mut reduced: Vec<(f64, CMatrix, linalg::CVector)> = RATE_SCALES
        .iter()
        .map(|&s| {
            let scaled = |t: f64, w: f64| s * schedule.spectral_density(t, w);
            let m = gen.to_dense(&scaled, 0.0);
            let step = linalg::expm(&(m.matrix() * C64::new(interval, 0.0)));
            (s, step, linalg::vectorize(&eig.to_eigenbasis(&sys0)))
        })
        .collect();

    let mut times = vec![0.0];
    let mut curves: Vec<Vec<f64>> = vec![vec![0.0]; RATE_SCALES.len()];
    let mut trace_defect = 0.0f64;
    let mut min_eig = 0.0f64;
    for k in 1..=sc.samples {
        let t0 = (k - 1) as f64 * interval;
        joint = integrate(&model, &joint, t0, h, substeps);
        let t = k as f64 * interval;
        trace_defect = trace_defect.max((linalg::trace(&joint) - linalg::ONE).norm());
        min_eig = min_eig.min(linalg::min_eigenvalue(&linalg::hermitize(&joint)));
        let marginal = partial_trace_tail(&joint, 1);
        times.push(t);
        for (curve, (_, step, state)) in curves.iter_mut().zip(reduced.iter_mut()) {
            *state = &*step * &*state;
            let interaction = linalg::unvectorize(state, 2);
            let lab = CMatrix::from_fn(2, 2, |a, b| {
                let phase = -(eig.energies[a] - eig.energies[b]) * t;
                interaction[(a, b)] * C64::from_polar(1.0, phase)
            });
            curve.push(trace_distance(&eig.from_eigenbasis(&lab), &marginal));
        }
    }
    let comparisons = RATE_SCALES
        .iter()
        .zip(curves)
        .map(|(&rate_scale, deviation)| {
            let max_deviation = deviation.iter().cloned().fold(0.0, f64::max);
            ReducedComparison { rate_scale, deviation, max_deviation }
        })
        .collect();
    Ok(OracleReport {
        scenario: *sc,
        step: h,
        times,
        comparisons,
        regime,
        joint_trace_defect: trace_defect,
        joint_min_eigenvalue: min_eig,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_spin(g: f64, sched: BathSchedule) -> JointModel {
        let sys = HamiltonianSpec::new(1, vec![PauliTerm::new(2.0, vec![(0, Axis::Z)])]).unwrap();
        JointModel::new(sys, vec![CouplingSpec::new(0, 0, Axis::X, g).unwrap()], sched).unwrap()
    }

    fn ket_density(re: [f64; 2]) -> CMatrix {
        CMatrix::from_fn(2, 2, |i, j| C64::new(re[i] * re[j], 0.0))
    }

    #[test]
    fn ladder_operators_act_on_the_ancilla() {
        let m = single_spin(0.0, BathSchedule::fixed(1.0, 0.1, 4.0).unwrap());
        // |s=0, a=0⟩ is index 0, |s=0, a=1⟩ is index 1
        assert_eq!(m.raising[0][(1, 0)], linalg::ONE);
        assert_eq!(m.lowering[0][(0, 1)], linalg::ONE);
        assert!(linalg::max_abs(&(m.raising[0].adjoint() - &m.lowering[0])) < 1e-15);
        // ancilla ground level sits at −Ω/2
        let h = m.hamiltonian(0.0);
        assert!((h[(0, 0)].re - (2.0 - 2.0)).abs() < 1e-14);
        assert!((h[(1, 1)].re - (2.0 + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let m = single_spin(0.05, BathSchedule::sawtooth(1.0, 0.1, 5.0, 40.0).unwrap());
        let v = [0.6, 0.8];
        let r = m.product_state(&ket_density(v), 3.0).unwrap();
        for t in [0.0, 7.3, 39.9] {
            let d = joint_rhs(&m, t, &r);
            assert!(linalg::trace(&d).norm() < 1e-14);
            assert!(linalg::hermiticity_defect(&d) < 1e-14);
        }
    }

    #[test]
    fn ancilla_relaxes_to_boltzmann_with_frozen_system() {
        let sched = BathSchedule::fixed(1.0, 0.1, 4.0).unwrap();
        let m = single_spin(0.0, sched);
        let sys = ket_density([0.6, 0.8]);
        // start the ancilla in its excited level
        let mut anc = CMatrix::zeros(2, 2);
        anc[(1, 1)] = linalg::ONE;
        let r0 = linalg::kron(&sys, &anc);
        let r = integrate(&m, &r0, 0.0, 0.01, 40_000);
        let a = partial_trace_head(&r, 1);
        let p = boltzmann_population(1.0, 4.0);
        assert!((a[(0, 0)].re - p).abs() < 1e-6);
        // the system populations are untouched; its coherence only precesses
        let s = partial_trace_tail(&r, 1);
        assert!((s[(0, 0)].re - 0.36).abs() < 1e-12);
        assert!((s[(0, 1)].norm() - 0.48).abs() < 1e-6);
    }

    #[test]
    fn ancilla_coherence_envelope_decays_at_half_gamma() {
        let gamma = 0.2;
        let m = single_spin(0.0, BathSchedule::fixed(0.7, gamma, 1.5).unwrap());
        let plus = ket_density([std::f64::consts::FRAC_1_SQRT_2; 2]);
        let r0 = linalg::kron(&ket_density([1.0, 0.0]), &plus);
        for (steps, t) in [(500usize, 5.0), (1000, 10.0)] {
            let r = integrate(&m, &r0, 0.0, 0.01, steps);
            let a = partial_trace_head(&r, 1);
            assert!((a[(0, 1)].norm() - 0.5 * (-gamma * t / 2.0).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_and_positivity_preserved() {
        let m = single_spin(0.05, BathSchedule::sawtooth(2.0, 0.1, 5.0, 40.0).unwrap());
        let mut r = m.product_state(&ket_density([0.6, 0.8]), 0.0).unwrap();
        for k in 0..20 {
            r = integrate(&m, &r, k as f64 * 2.0, 0.01, 200);
            assert!((linalg::trace(&r) - linalg::ONE).norm() < 1e-8);
            assert!(linalg::min_eigenvalue(&linalg::hermitize(&r)) > -1e-8);
        }
    }

    #[test]
    fn zero_coupling_reduction_is_exact() {
        let rep = validate_reduction(&OracleScenario { samples: 50, ..OracleScenario::resonant(0.0) }).unwrap();
        for c in &rep.comparisons {
            assert!(c.max_deviation < 1e-9, "{}", c.max_deviation);
        }
    }

    #[test]
    fn broken_regime_is_flagged() {
        let sc = OracleScenario { g: 1.0, horizon: 20.0, samples: 20, ..OracleScenario::resonant(1.0) };
        let rep = validate_reduction(&sc).unwrap();
        assert!(rep.warnings.iter().any(|w| w.contains("exceeds")));
        assert_eq!(rep.times.len(), 21);
    }

    #[test]
    fn partial_traces_of_a_product() {
        let a = ket_density([0.6, 0.8]);
        let b = CMatrix::from_diagonal(&linalg::CVector::from_vec(vec![C64::new(0.3, 0.0), C64::new(0.7, 0.0)]));
        let ab = linalg::kron(&a, &b);
        assert!(linalg::max_abs(&(partial_trace_tail(&ab, 1) - &a)) < 1e-15);
        assert!(linalg::max_abs(&(partial_trace_head(&ab, 1) - &b)) < 1e-15);
    }

    #[test]
    fn rejects_oversized_joint_space() {
        let sys = crate::hamiltonian::build_chain(3, 0.8, 1.0, 1.0).unwrap();
        let cs = vec![CouplingSpec::new(0, 0, Axis::X, 0.1).unwrap(), CouplingSpec::new(1, 2, Axis::X, 0.1).unwrap()];
        assert!(JointModel::new(sys, cs, BathSchedule::fixed(1.0, 0.1, 1.0).unwrap()).is_err());
    }
}
