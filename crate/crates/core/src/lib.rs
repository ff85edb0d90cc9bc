//! Safety filter for planner-controlled mobile robots based on data-driven
//! reachability analysis.
//!
//! The crate is organized around a receding-horizon control loop
//! ([`safeloop`]): a planner (scripted or an OpenAI-compatible chat endpoint,
//! see [`planners`]) proposes a short plan of velocity commands, the
//! [`reachability`] module turns offline trajectory data into an
//! overapproximated reach tube for that plan, the [`collision`] module checks
//! every tube set against the obstacles with a small linear program, and the
//! [`adjust`] module repairs unsafe plans by projected gradient ascent on the
//! collision-LP value using its dual-based sensitivity. If no safe plan can
//! be found in time, a braking failsafe plan is executed instead.
//!
//! Set arithmetic (zonotopes and constrained zonotopes) lives in [`setops`];
//! the ground-truth simulator, LiDAR model, and data collection live in
//! [`simworld`].

pub mod adjust;
pub mod collision;
pub mod config;
pub mod error;
pub(crate) mod lp;
pub mod planners;
pub mod reachability;
pub mod safeloop;
pub mod setops;
pub mod simworld;

pub use error::{Error, Result};
