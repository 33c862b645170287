//! Independent ground truth: split-step integration of the lab-frame
//! Schrödinger equation and the semiclassical Van Vleck kernel, plus the
//! plumbing that applies the closed-form kernel to sampled wavefunctions.

pub mod grid;
pub mod propagation;
pub mod snapshot;
pub mod split_step;
pub mod van_vleck;

pub use grid::{Axis, GaussianPacket, Grid2D, Wavefunction2D};
pub use propagation::{propagate_in_mode_frame, propagate_with_kernel, ModeFrame};
pub use split_step::split_step_evolve;
pub use van_vleck::{van_vleck_kernel, ClassicalTrajectory, ForcedMode, QuadraticHamiltonian, VanVleck};
