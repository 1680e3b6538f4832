//! Unrolled plug-and-play spectral estimation.
//!
//! Each stage applies the back-projection operator, a learned denoiser and a
//! normalization:
//!
//! ```text
//!   w_l = X̂ ρ_{l−1},   z_l = D_l(w_l),   ρ_l = z_l/‖z_l‖
//! ```
//!
//! starting from the fixed vector `ρ₀ = (1/√N)·1`. Stages may share
//! denoiser banks through a tying map. With identity denoisers the network
//! reduces exactly to `L` power-method steps.

mod config;
mod loss;
mod network;
mod train;

pub use config::{InitialVector, TrainingConfig, UnrolledConfig};
pub use loss::{optimal_phase, phase_aligned_error, relative_error, training_loss};
pub use network::{
    pnp_stage, reconstruct, unrolled_forward, unrolled_forward_traced, ReconstructionReport,
    TrainedModel,
};
pub use train::{loss_and_gradients, train, train_with_progress, TrainingSample};

