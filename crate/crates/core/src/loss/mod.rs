//! SDL objectives: separate-variable loss, lifted losses, gradients, Hessian.

pub mod hessian;
pub mod lifted;
pub mod problem;
pub mod separate;

pub use hessian::{assemble_hessian_small, flatten_state, unflatten_state, HessianLayout};
pub use lifted::{grad_lifted, lifted_activations, loss_lifted};
pub use problem::{BlockConstraints, FactorState, LiftedConstraints, LiftedState, Mode, SdlProblem};
pub use separate::{activation, activations, grad_block, grad_blocks, loss_separate, Block};

#[cfg(test)]
mod tests;
