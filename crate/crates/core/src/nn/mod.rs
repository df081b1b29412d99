//! Dense networks, Adam and masked categorical heads.

mod adam;
mod categorical;
mod checkpoint;
mod mlp;

pub use adam::{Adam, AdamHyper};
pub use categorical::Categorical;
pub use checkpoint::{Checkpoint, CheckpointError, CheckpointHeader, NetHeader, FORMAT_VERSION, MAGIC};
pub use mlp::{param_count, Mlp, ShapeError, Trace};
