//! Coverage maximization for an energy-limited fixed-wing aerial base
//! station.
//!
//! The aircraft flies a closed loop over a square service area for a fixed
//! mission time, transmitting to at most one ground user per time slot. A
//! user is *covered* when it receives its full demanded payload within the
//! mission. The library maximizes the number of covered users by block
//! coordinate descent: an exact slot-scheduling step alternates with a
//! convexified trajectory step solved by an interior-point method on a
//! second-order-cone program (see the `aircover-conic` crate).
//!
//! Module map:
//!
//! * [`model`] — geometry, link budget, propulsion energy, validation.
//! * [`init_traj`] — circular and user-visiting initial trajectories.
//! * [`schedule_solver`] — exact max-coverage slot assignment.
//! * [`sca_builder`] — convexified trajectory subproblem compiler.
//! * [`bcd_driver`] — the alternating optimization loop.
//! * [`robust`] — localization-error-aware variants.

pub mod bcd_driver;
pub mod init_traj;
pub mod model;
pub mod robust;
pub mod sca_builder;
pub mod schedule_solver;
