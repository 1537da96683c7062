//! Quantum-system thermalization through periodically swept auxiliary spins.
//!
//! The system is coupled to ancilla qubits whose splitting is swept in a
//! sawtooth; after eliminating the ancillae the system obeys a time-dependent
//! Lindblad equation whose one-cycle map has the Gibbs state as its
//! approximate fixed point.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod jump;
pub mod linalg;
pub mod liouvillian;
pub mod oracle;
pub mod propagation;

pub use bath::{BathSchedule, SweepProfile};
pub use error::{Error, Result};
pub use hamiltonian::{build_chain, build_two_spin, diagonalize, Axis, EigenSystem, HamiltonianSpec, PauliTerm};
pub use jump::{check_ergodicity, frequency_resolve, frequency_resolve_all, CouplingSpec, FrequencyResolvedOps};
pub use liouvillian::{DensityMatrix, RateFunction, SectorGenerator};
pub use propagation::{cycle_map, evolve, steady_state, thermal_state, trace_distance, CycleMap};
