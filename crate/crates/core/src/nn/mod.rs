//! Reverse-mode autodiff engine and the neural building blocks shared by
//! the evaluator and generator networks.

pub mod checkpoint;
pub mod layers;
pub mod optim;
pub mod tape;

pub use checkpoint::Checkpoint;
pub use layers::ParamStore;
pub use optim::{AdamW, PlateauSchedule};
pub use tape::{Id, Matrix, Tape};
