//! Exact continuous-time simulation of the type counts of the Moran model
//! with tournament selection and one-way mutation.

pub mod observe;
pub mod sim;
pub mod state;

pub use observe::{
    click_statistics, empirical_profile, gap_statistics, joint_type_counts, pooled_gap_statistics,
    write_clicks_csv, write_profile_csv, ClickStats, JointCounts,
};
pub use sim::{
    simulate, simulate_from, y0_rates, EventKind, MoranSimulator, ProfileSnapshot, SimOutput,
    Transition,
};
pub use state::PopState;
