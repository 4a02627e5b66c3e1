//! Discrete Loewner evolution: Brownian driving functions, chordal and radial
//! traces by backward composition of slit maps, and forward boundary flows.

mod driving;
mod flow;
mod trace;

pub use driving::{sample_driving, sample_radial_driving, DrivingFunction, LoewnerKind};
pub(crate) use driving::splitmix;
pub use flow::{
    chordal_boundary_distances, radial_boundary_distances, FlowOptions,
};
pub use trace::{
    chordal_capacity, chordal_trace, geometric_grid, map_trace, radial_trace, uniform_grid,
    Trace,
};
