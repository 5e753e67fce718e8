//! Cooperative positioning for sparse, fast-moving wireless networks.
//!
//! Each agent runs three stages per time slot:
//!
//! 1. an EKF prediction of its position/velocity state,
//! 2. iterative Gaussian message passing on a factor graph, where every
//!    range factor is turned into a closed-form Gaussian by a second-order
//!    Taylor expansion of the Euclidean distance, fused with the prior and a
//!    temporal message built from the agent's own travelled distance,
//! 3. an EKF update that treats the fused position belief as a measurement.
//!
//! The crate is `no_std` (it needs `alloc`). It also carries a particle
//! baseline ([`spawn`]), a discrete-time world simulator ([`sim`]) and a set
//! of slow, independent reference computations ([`oracle`]) used to check
//! the closed forms.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod linalg;
pub mod localizer;
pub mod messages;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod spawn;

pub use error::{Error, Result};
pub use localizer::{
    broadcast_belief, count_message_ops, step_agent, step_network, AgentRuntime, Inbox,
    LocalizerOptions, SlotStats, TemporalSource,
};
pub use messages::{
    agent_message, anchor_message, fuse_axis, temporal_message, Axis, MessageCoefficients,
    PeerBelief, Rejected, EPS_DIST,
};
pub use model::{
    ekf_predict, ekf_update, make_transition_model, AgentTruth, AxisGaussian, InternalMeasurement,
    NodeId, NodeKind, Position2D, PositionBelief, RangeMeasurement, StateBelief, TransitionModel,
    Velocity2D,
};
pub use sim::{init_world, sense, step_mobility, ScenarioConfig, SensedSlot, WorldState};
pub use spawn::{spa_ekf_step, spawn_step, ParticleCloud, SpaEkfAgent, SpawnAgent};
