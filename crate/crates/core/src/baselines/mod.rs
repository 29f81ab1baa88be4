//! Grid-reservation conflict resolution analogues: a reactive cell-locking
//! protocol and a predictive time-slot protocol, both controlling only the
//! speed along a fixed path.

mod fleet;
mod grid;
mod reactive;
mod timeslot;

pub use fleet::{BaselineKind, ReservationFleet};
pub use grid::{CellSpan, Fidelity, IntersectionGrid, Reservation, GRID_EXTENT};
pub use reactive::{cruise, reactive_priority_step, stop_before, PathVehicle, PriorityTicket, ReactiveParams, SpeedCommand};
pub use timeslot::{timeslot_plan_step, track_profile, SpeedProfile, TimeslotParams};
