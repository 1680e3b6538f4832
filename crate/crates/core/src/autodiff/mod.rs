//! Reverse-mode automatic differentiation over real tensors, and the
//! convolutional denoiser built on it.
//!
//! A [`Tape`] records every operation as it runs. Nodes are appended in
//! evaluation order, so node ids already form a topological order and
//! [`Tape::backward`] simply walks them in reverse, accumulating
//! vector-Jacobian products:
//!
//! ```text
//!   add       ga += g,  gb += g
//!   mul_const gx += g ⊙ c
//!   sum       gx += g·1
//!   relu      gx += g ⊙ [x > 0]
//!   conv2d    gx += conv_transpose(g, W),  gW += corr(x, g),  gb += Σ g
//!   normalize gx += (g − y·⟨y, g⟩)/‖x‖
//!   custom    whatever the closure returns
//! ```
//!
//! Complex images travel through the engine as two real channels (real and
//! imaginary planes); see [`complex_to_planes`].

mod conv;
mod denoiser;
mod optim;
mod tape;
mod tensor;

pub use denoiser::{
    complex_to_planes, denoiser_apply, planes_to_complex, ConvLayer, DenoiserArch,
    DenoiserParams, LayerVars,
};
pub use optim::{Adam, AdamConfig};
pub use tape::{BackwardFn, Gradients, Tape, Var};
pub use tensor::Tensor;
