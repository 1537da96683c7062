//! Swept ancilla bath: schedule, Boltzmann populations, engineered spectral
//! density λ_t(ω), pumping rates and the detailed-balance violation metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sweep ratio (ω_max/T_cycle)/Γ above which the quasi-static assumption is flagged.
pub const QUASI_STATIC_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepProfile {
    /// Ω(t) = (t mod T_cycle)/T_cycle · ω_max
    #[default]
    Sawtooth,
    /// Ω(t) = ω_max for all t.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSchedule {
    pub beta: f64,
    pub gamma: f64,
    pub omega_max: f64,
    pub t_cycle: f64,
    #[serde(default)]
    pub profile: SweepProfile,
}

impl BathSchedule {
    pub fn new(beta: f64, gamma: f64, omega_max: f64, t_cycle: f64, profile: SweepProfile) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::invalid("beta", format!("must be >= 0, got {beta}")));
        }
        for (name, v) in [("gamma", gamma), ("omega_max", omega_max), ("t_cycle", t_cycle)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let sched = BathSchedule { beta, gamma, omega_max, t_cycle, profile };
        if sched.profile == SweepProfile::Sawtooth && sched.quasi_static_ratio() > QUASI_STATIC_WARN {
            log::warn!(
                "sweep rate ω_max/T_cycle = {:.3e} is not small next to Γ = {:.3e} (ratio {:.3})",
                omega_max / t_cycle,
                gamma,
                sched.quasi_static_ratio()
            );
        }
        Ok(sched)
    }

    pub fn sawtooth(beta: f64, gamma: f64, omega_max: f64, t_cycle: f64) -> Result<Self> {
        Self::new(beta, gamma, omega_max, t_cycle, SweepProfile::Sawtooth)
    }

    /// Ancilla held at a fixed splitting `omega`.
    pub fn fixed(beta: f64, gamma: f64, omega: f64) -> Result<Self> {
        Self::new(beta, gamma, omega, 1.0, SweepProfile::Static)
    }

    /// |dΩ/dt| / Γ for the sweep; zero for a static profile.
    pub fn quasi_static_ratio(&self) -> f64 {
        match self.profile {
            SweepProfile::Sawtooth => self.omega_max / self.t_cycle / self.gamma,
            SweepProfile::Static => 0.0,
        }
    }

    pub fn omega_at(&self, t: f64) -> f64 {
        omega_at(self, t)
    }

    pub fn spectral_density(&self, t: f64, omega: f64) -> f64 {
        spectral_density(self, t, omega)
    }
}

pub fn omega_at(sched: &BathSchedule, t: f64) -> f64 {
    match sched.profile {
        SweepProfile::Static => sched.omega_max,
        SweepProfile::Sawtooth => {
            let cycles = t / sched.t_cycle;
            let mut phase = cycles - cycles.floor();
            // t = k·T_cycle built from a sum of steps can land just below the boundary
            if 1.0 - phase < 1e-9 {
                phase = 0.0;
            }
            phase * sched.omega_max
        }
    }
}

/// Ground-state Gibbs population of an ancilla with splitting `omega`.
pub fn boltzmann_population(beta: f64, omega: f64) -> f64 {
    let x = beta * omega;
    if x == 0.0 || x.is_nan() {
        return 0.5;
    }
    // e^{x/2}/(e^{x/2}+e^{-x/2}) = 1/(1+e^{-x})
    if x > 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Excited-state population 1 − P, without the cancellation of subtracting from one.
pub fn excited_population(beta: f64, omega: f64) -> f64 {
    boltzmann_population(-beta, omega)
}

fn lorentzian(half_width: f64, detuning: f64) -> f64 {
    half_width / (half_width * half_width + detuning * detuning)
}

/// λ(ω) for an ancilla at splitting `omega_t`.
pub fn spectral_density_at(beta: f64, gamma: f64, omega_t: f64, omega: f64) -> f64 {
    let p = boltzmann_population(beta, omega_t);
    let hw = 0.5 * gamma;
    let q = excited_population(beta, omega_t);
    p * lorentzian(hw, omega - omega_t) + q * lorentzian(hw, omega + omega_t)
}

pub fn spectral_density(sched: &BathSchedule, t: f64, omega: f64) -> f64 {
    spectral_density_at(sched.beta, sched.gamma, omega_at(sched, t), omega)
}

/// Total-variation distance between the two-level equilibrium set by λ(±ω)
/// and the Boltzmann distribution at β.
pub fn db_violation_at(beta: f64, gamma: f64, omega_t: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::invalid("omega", format!("detailed-balance metric needs ω > 0, got {omega}")));
    }
    let down = spectral_density_at(beta, gamma, omega_t, omega);
    let up = spectral_density_at(beta, gamma, omega_t, -omega);
    let boltz = (-beta * omega).exp();
    Ok(((up - down * boltz) / ((down + up) * (1.0 + boltz))).abs())
}

pub fn db_violation(sched: &BathSchedule, t: f64, omega: f64) -> Result<f64> {
    db_violation_at(sched.beta, sched.gamma, omega_at(sched, t), omega)
}

/// Explicit sinh/cosh expression for the detailed-balance violation.
///
/// Numerator and denominator are both rescaled by e^{-β(ω+Ω)} so that only
/// decaying exponentials appear and large β cannot overflow.
pub fn db_violation_closed_form(beta: f64, gamma: f64, big_omega: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::invalid("omega", format!("must be > 0, got {omega}")));
    }
    if !(big_omega > 0.0) {
        return Err(Error::invalid("Omega", format!("must be > 0, got {big_omega}")));
    }
    let a = (-beta * omega).exp();
    let b = (-beta * big_omega).exp();
    let s = gamma * gamma + 4.0 * (omega * omega + big_omega * big_omega);
    // e^{x}sinh(x) = (e^{2x} - 1)/2 etc.; after rescaling each hyperbolic factor
    // becomes (1 ∓ e^{-2x})/2.
    let num = (1.0 - a) * (1.0 + b) * s - 8.0 * omega * big_omega * (1.0 + a) * (1.0 - b);
    let den = (1.0 + a) * (1.0 + b) * s;
    Ok((0.5 * num / den).abs())
}

/// Zero-temperature limit of the detailed-balance violation.
pub fn db_violation_zero_temperature(gamma: f64, big_omega: f64, omega: f64) -> f64 {
    0.5 - 4.0 * omega * big_omega / (gamma * gamma + 4.0 * (omega * omega + big_omega * big_omega))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    /// Pumping rate into the excited ancilla level.
    pub gamma_plus: f64,
    /// Damping rate into the ground level.
    pub gamma_minus: f64,
}

pub fn pumping_rates(sched: &BathSchedule, t: f64) -> RatePair {
    pumping_rates_at(sched.beta, sched.gamma, omega_at(sched, t))
}

pub fn pumping_rates_at(beta: f64, gamma: f64, omega_t: f64) -> RatePair {
    let p = boltzmann_population(beta, omega_t);
    RatePair { gamma_plus: gamma * excited_population(beta, omega_t), gamma_minus: gamma * p }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(beta: f64) -> BathSchedule {
        BathSchedule::sawtooth(beta, 0.1, 5.7, 40.0).unwrap()
    }

    #[test]
    fn rate_ratio_survives_large_beta_omega() {
        let r = pumping_rates_at(10.0, 0.1, 5.0);
        assert!(((r.gamma_minus / r.gamma_plus).ln() - 50.0).abs() < 1e-10);
        assert!(excited_population(10.0, 5.0) > 0.0);
    }

    #[test]
    fn sawtooth_values() {
        let s = sched(1.0);
        assert_eq!(s.omega_at(0.0), 0.0);
        assert!((s.omega_at(20.0) - 2.85).abs() < 1e-12);
        assert!((s.omega_at(50.0) - 1.425).abs() < 1e-12);
        assert_eq!(s.omega_at(4000.0 * 0.01), 0.0);
        let t: f64 = (0..4000).map(|_| 0.01).sum();
        assert!(s.omega_at(t) < 1e-6);
    }

    #[test]
    fn sawtooth_is_monotone_within_cycle() {
        let s = sched(1.0);
        let mut prev = -1.0;
        for i in 0..4000 {
            let w = s.omega_at(i as f64 * 0.01);
            assert!(w >= prev);
            prev = w;
        }
        assert!(s.omega_at(40.0) < prev);
    }

    #[test]
    fn static_profile() {
        let s = BathSchedule::fixed(1.0, 0.1, 4.0).unwrap();
        assert_eq!(s.omega_at(123.4), 4.0);
        assert_eq!(s.quasi_static_ratio(), 0.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(BathSchedule::sawtooth(-1.0, 0.1, 1.0, 1.0).is_err());
        assert!(BathSchedule::sawtooth(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(BathSchedule::sawtooth(1.0, 0.1, 1.0, f64::NAN).is_err());
        let s = BathSchedule::sawtooth(1.0, 0.1, 5.775, 40.0).unwrap();
        assert!((s.quasi_static_ratio() - 5.775 / 40.0 / 0.1).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_values() {
        assert_eq!(boltzmann_population(3.0, 0.0), 0.5);
        assert_eq!(boltzmann_population(f64::INFINITY, 1.0), 1.0);
        let expected = 4f64.exp() / (4f64.exp() + (-4f64).exp());
        assert!((boltzmann_population(1.0, 8.0) - expected).abs() < 1e-15);
        assert!((boltzmann_population(1.0, 8.0) - 0.99966).abs() < 1e-5);
        let p = boltzmann_population(1.0, 1e4);
        assert!(p.is_finite() && p == 1.0);
    }

    #[test]
    fn spectral_density_values() {
        let p = boltzmann_population(1.0, 8.0);
        let direct = p * 0.05 / 0.0025 + (1.0 - p) * 0.05 / (0.0025 + 256.0);
        let lam = spectral_density_at(1.0, 0.1, 8.0, 8.0);
        assert!((lam - direct).abs() < 1e-12);
        assert!((lam - 19.993).abs() < 1e-3);
        for w in [0.3, 1.0, 7.9] {
            let a = spectral_density_at(0.0, 0.1, 8.0, w);
            let b = spectral_density_at(0.0, 0.1, 8.0, -w);
            assert!((a - b).abs() <= 1e-15 * a.max(b));
        }
        for k in 1..=1000 {
            let w = k as f64 * 0.01;
            assert!(spectral_density_at(1.0, 0.1, 8.0, w) >= spectral_density_at(1.0, 0.1, 8.0, -w));
        }
    }

    #[test]
    fn spectral_density_positive_at_resonance_point() {
        let s = sched(1.0);
        assert!(s.spectral_density(0.0, 0.0) > 0.0);
        assert!(spectral_density_at(1.0, 0.1, 8.0, 8.0).is_finite());
    }

    #[test]
    fn rate_pairs() {
        let r = pumping_rates_at(2.0, 0.1, 0.0);
        assert!((r.gamma_plus - 0.05).abs() < 1e-15 && (r.gamma_minus - 0.05).abs() < 1e-15);
        let r = pumping_rates_at(1.0, 0.1, 4.0);
        assert!((r.gamma_minus / r.gamma_plus / 4f64.exp() - 1.0).abs() < 1e-12);
        assert!((r.gamma_plus + r.gamma_minus - 0.1).abs() < 1e-15);
        let r = pumping_rates_at(1.0, 0.1, 8.0);
        assert!((r.gamma_minus - 0.1 * boltzmann_population(1.0, 8.0)).abs() < 1e-16);
        assert!((r.gamma_minus - 0.099966).abs() < 1e-6);
    }

    #[test]
    fn db_violation_limits() {
        assert!(db_violation_at(1.0, 0.1, 8.0, 0.0).is_err());
        assert!(db_violation_at(1e-9, 0.1, 8.0, 3.0).unwrap() < 1e-8);
        let w = 3.0;
        let limit = db_violation_zero_temperature(0.1, 8.0, w);
        assert!((db_violation_at(60.0, 0.1, 8.0, w).unwrap() - limit).abs() < 1e-12);
        assert!(db_violation_closed_form(0.0, 0.1, 8.0, 2.0).unwrap() < 1e-15);
        assert!(db_violation_closed_form(1.0, 0.1, 8.0, 1e-9).unwrap() < 1e-8);
        assert!(db_violation_closed_form(1.0, 0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn db_violation_minimal_near_resonance_and_zero() {
        let grid: Vec<f64> = (1..=1200).map(|k| k as f64 * 0.01).collect();
        for beta in [1.0, 5.0] {
            let vals: Vec<f64> = grid.iter().map(|&w| db_violation_at(beta, 0.1, 8.0, w).unwrap()).collect();
            let at = |w: f64| vals[(w / 0.01).round() as usize - 1];
            assert!(at(8.0) < 1e-3, "beta {beta}: {}", at(8.0));
            assert!(at(0.01) < at(4.0));
            assert!(at(8.0) < at(6.0) && at(8.0) < at(10.0));
        }
        // lower temperature, larger off-resonant violation
        assert!(db_violation_at(5.0, 0.1, 8.0, 4.0).unwrap() > db_violation_at(1.0, 0.1, 8.0, 4.0).unwrap());
    }

    #[test]
    fn closed_form_agrees_on_grid() {
        for k in 1..=100 {
            let w = k as f64 * 0.1;
            let a = db_violation_at(1.0, 0.1, 8.0, w).unwrap();
            let b = db_violation_closed_form(1.0, 0.1, 8.0, w).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()), "ω={w}: {a} vs {b}");
        }
    }
}
