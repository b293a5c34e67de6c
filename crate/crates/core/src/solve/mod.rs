//! Ground states, closed-system propagation, thermal ensembles and the
//! Lindblad integrator.

pub mod dynamics;
pub mod ground;
pub mod krylov;
pub mod lanczos;
pub mod lindblad;
pub mod thermal;

pub use dynamics::{propagate, Branch, BranchEvolver, BranchState, EvolutionPlan, JointDynamics, PropagationMethod};
pub use ground::{channel_ground_state, ground_state, ChannelGround, OperatorGround};
pub use krylov::{expm_multiply, KrylovOptions, KrylovPropagator};
pub use lanczos::{lowest_eigenpairs, Eigenpair, LanczosOptions};
pub use lindblad::{propagate_lindblad, LindbladIntegrator, LindbladParams};
pub use thermal::{thermal_members, thermal_state, ThermalMember, ThermalParams};
