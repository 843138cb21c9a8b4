//! Feature-enriched Kolmogorov–Arnold networks with physics-informed training.

pub mod basis;
pub mod diffcore;
pub mod enrich;
pub mod model;
pub mod ntk;
pub mod physics;
pub mod separable;
pub mod train;
pub mod gradcheck;
