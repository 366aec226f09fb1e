//! Local many-worlds toolkit.
//!
//! * [`hilbert`]: few-qubit states, observables, Born probabilities, partial traces.
//! * [`correlations`]: EPR/GHZ states and perfect-correlation checks.
//! * [`hv_search`]: exhaustive hidden-variable searches (single world, divergent
//!   global worlds, multivalued local elements).
//! * [`spacetime`]: Minkowski events, light cones, boosts and the frame-relative
//!   branching cascade.
//! * [`worlds`]: the local-worlds simulator that carries wave-field records
//!   along world-line copies ("lives") through source, measurement and meeting
//!   events.
//! * [`audit`]: locality, no-signaling and common-cause checks over traces.
//! * [`cli`]: command-line front end.

pub mod apportion;
pub mod audit;
#[cfg(feature = "cli")]
pub mod cli;
pub mod correlations;
pub mod hilbert;
pub mod hv_search;
pub mod spacetime;
pub mod worlds;

pub use hilbert::{Observable, Outcome, Setting, StateVector};
