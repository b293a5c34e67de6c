//! Quantum and classical information transfer through finite open XXZ
//! spin-1/2 chains.
//!
//! A sender holds one half of a singlet `|ψ⁻⟩` on sites `0'` and `0`; at
//! `t = 0` site `0` is coupled to the end of an XXZ chain (sites `1..=N`)
//! prepared in its ground state (or a thermal state). The crate evolves the
//! joint system, reads out the two-qubit state between `0'` and the far end
//! of the chain, and characterises it as an entanglement resource, a Pauli
//! channel, and a classical channel.
//!
//! Module map:
//!
//! * [`spinalg`]: basis conventions, magnetization sectors, sparse operators,
//!   state carriers and partial traces.
//! * [`model`]: XXZ Hamiltonians and spin-wave reference quantities.
//! * [`solve`]: ground states, Krylov propagation, thermal ensembles and the
//!   Lindblad integrator.
//! * [`measures`]: concurrence, singlet fraction, correlators, entropies.
//! * [`channel`]: Kraus channels, teleportation and Pauli tomography.
//! * [`capacity`]: single-shot Holevo capacity over orthogonal pure ensembles.
//! * [`distill`]: recurrence entanglement distillation.
//! * [`runner`]: peak finding, parameter sweeps, CSV/JSON output.

pub mod capacity;
pub mod channel;
pub mod distill;
pub mod error;
pub mod measures;
pub mod model;
pub mod runner;
pub mod solve;
pub mod spinalg;

pub use error::{Error, Result};
pub use spinalg::C64;
