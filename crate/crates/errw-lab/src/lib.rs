//! Simulation and exact-verification toolkit for edge-reinforced random
//! walks with several interacting walkers.
//!
//! The crate has two kinds of engines. The exact engines ([`segment`],
//! [`paths`], parts of [`zline`]) work in arbitrary-precision rational
//! arithmetic and verify structural identities of the process (martingale
//! kernels, path recursions, meeting-time laws) with no tolerance at all.
//! The Monte Carlo engine ([`model`], [`zline`]) runs seeded replicas of the
//! actual walker dynamics; [`stats`] post-processes them and [`harness`]
//! wires everything to the `errw-lab` command line tool.

pub mod harness;
pub mod model;
pub mod paths;
pub mod segment;
pub mod sequence;
pub mod stats;
pub mod zline;
