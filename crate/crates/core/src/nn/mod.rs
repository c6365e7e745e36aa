//! Reverse-mode differentiation and the message-passing models built on it.

pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod params;
pub mod tape;

pub use gradcheck::{gradient_check, GradCheckReport};
pub use layers::{Activation, DirLayerParams};
pub use model::{Forward, GraphOperators, Jk, LayerKind, Mode, Model, ModelConfig};
pub use params::ParamStore;
pub use tape::{Gradients, Propagation, Tape, Var};
