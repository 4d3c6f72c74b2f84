//! Robust look-ahead guidance for fixed-wing UAV path following.
//!
//! The crate is organised bottom-up: point-mass [`kinematics`], waypoint
//! [`path`] geometry and target selection, the [`guidance`] laws, the per-tick
//! [`qp`] for compensation gains, and the closed-loop [`sim`] driver.

pub mod guidance;
pub mod kinematics;
pub mod path;
pub mod qp;
pub mod sim;
