//! Conversion from simulation units to laboratory temperatures and times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant (J·s), exact SI value.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant (J/K), exact SI value.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Coupling ratio g/J_max used when translating runs to hardware.
pub const DEFAULT_G_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub name: String,
    /// Largest achievable spin-spin coupling, in Hz.
    pub j_max_hz: f64,
}

impl PlatformSpec {
    pub fn new(name: impl Into<String>, j_max_hz: f64) -> Result<Self> {
        if !(j_max_hz > 0.0 && j_max_hz.is_finite()) {
            return Err(Error::invalid("j_max", format!("must be finite and > 0, got {j_max_hz}")));
        }
        Ok(PlatformSpec { name: name.into(), j_max_hz })
    }

    pub fn trapped_ions() -> Self {
        PlatformSpec { name: "trapped_ions".into(), j_max_hz: 10e3 }
    }

    pub fn superconducting() -> Self {
        PlatformSpec { name: "superconducting".into(), j_max_hz: 4e6 }
    }

    pub fn neutral_atoms() -> Self {
        PlatformSpec { name: "neutral_atoms".into(), j_max_hz: 2e6 }
    }

    pub fn all() -> [PlatformSpec; 3] {
        [Self::trapped_ions(), Self::superconducting(), Self::neutral_atoms()]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        let key = name.trim().to_ascii_lowercase().replace('-', "_");
        Self::all().into_iter().find(|p| p.name == key).ok_or_else(|| {
            Error::invalid(
                "platform",
                format!("unknown platform `{name}`; use trapped_ions, superconducting or neutral_atoms"),
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalUnits {
    pub temperature_kelvin: f64,
    pub wall_time_seconds: f64,
}

/// T = h·J_max/(k_B·β); wall time = duration / g with g = g_ratio·J_max.
///
/// `duration_coupling_units` is measured in units of 1/g.
pub fn platform_units(
    p: &PlatformSpec,
    beta: f64,
    duration_coupling_units: f64,
    g_ratio: f64,
) -> Result<PhysicalUnits> {
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", format!("must be > 0 for a finite temperature, got {beta}")));
    }
    if !(g_ratio > 0.0) || !(duration_coupling_units >= 0.0) {
        return Err(Error::invalid("g_ratio", "g_ratio must be > 0 and the duration >= 0"));
    }
    let g_hz = g_ratio * p.j_max_hz;
    Ok(PhysicalUnits {
        temperature_kelvin: PLANCK * p.j_max_hz / (BOLTZMANN * beta),
        wall_time_seconds: duration_coupling_units / g_hz,
    })
}

/// A duration in units of 1/J_max expressed in units of 1/g.
pub fn to_coupling_units(duration: f64, g_ratio: f64) -> f64 {
    duration * g_ratio
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapped_ion_temperature() {
        let u = platform_units(&PlatformSpec::trapped_ions(), 1.0, 0.0, 0.1).unwrap();
        assert!((u.temperature_kelvin - 0.48e-6).abs() < 0.01e-6);
        let u5 = platform_units(&PlatformSpec::trapped_ions(), 5.0, 0.0, 0.1).unwrap();
        assert!((u5.temperature_kelvin - 96e-9).abs() < 1e-9);
    }

    #[test]
    fn wall_time_scales_with_coupling() {
        // 2500 time units of 1/J at g = J/10 on a 10 kHz platform
        let d = to_coupling_units(2500.0, 0.1);
        let u = platform_units(&PlatformSpec::trapped_ions(), 1.0, d, 0.1).unwrap();
        assert!((u.wall_time_seconds - 0.25).abs() < 1e-12);
    }

    #[test]
    fn lookup_and_validation() {
        assert_eq!(PlatformSpec::by_name("Neutral-Atoms").unwrap().j_max_hz, 2e6);
        assert!(PlatformSpec::by_name("photons").is_err());
        assert!(PlatformSpec::new("x", 0.0).is_err());
        assert!(platform_units(&PlatformSpec::trapped_ions(), 0.0, 1.0, 0.1).is_err());
    }
}
