//! Exact graphical representation for small populations: Poisson element
//! processes, forward type transport, M-distances and the backward ASG.

pub mod asg;
pub mod elements;
pub mod transport;

pub use asg::{
    asg_backward, audit_transitions, is_allowed_move, merging_time, AsgFlow, AsgRun, AsgSnapshot,
    BackwardClick, MergeTime,
};
pub use elements::{sample_elements, Arrow, Element, Event, GraphicalElements, Mark};
pub use transport::{
    forward_transport, m_distance, Click, DistanceFlow, DistanceTrace, MDist, TypeConfig,
    TypeTransport,
};
