//! Minimal reverse-mode differentiation and MLP machinery for the actor and
//! critic networks. No tensor library: flat parameter vectors, explicit
//! layouts, and hand-rolled backprop that is checked against finite
//! differences.

pub mod adam;
pub mod gaussian;
pub mod mlp;

pub use adam::Adam;
pub use gaussian::{
    deterministic_action, sample_squashed_gaussian, SquashedSample, LOG_STD_MAX, LOG_STD_MIN,
};
pub use mlp::{
    backward, backward_cached, backward_input_grad, forward, forward_cached, Activation,
    ForwardCache, Layout, MlpSpec, NnError, OutputHead, ParamVector,
};
