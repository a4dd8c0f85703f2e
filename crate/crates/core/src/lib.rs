//! Discrete-event simulator for duty-cycled MAC/RDC protocols on an
//! IEEE 802.15.4-style radio.
//!
//! The crate models a single-hop PAN — one router, a set of leaf nodes and
//! an always-listening sink — and runs two radio-duty-cycling disciplines
//! over the same unslotted CSMA/CA MAC:
//!
//! * [`scosens`]: a beacon-synchronized cycle of sleeping period, waiting
//!   period and burst transmission period, where the waiting period adapts
//!   to observed traffic through a clamped sliding average;
//! * [`lpl`]: a simplified low-power-listening baseline with periodic
//!   channel checks at the receiver and frame strobing at the sender.
//!
//! Runs are deterministic: integer-microsecond time, FIFO tie-breaking and
//! per-node seeded random streams make traces byte-identical across
//! repeats. The [`harness`] module adds scenario construction, PRR/delay/
//! duty-cycle metrics, trace emission and parameter sweeps.

pub mod events;
pub mod fault;
pub mod harness;
pub mod lpl;
pub mod mac;
pub mod radio;
pub mod scosens;
pub mod sim;
pub mod trace;
pub mod world;

pub use fault::Fault;
pub use radio::NodeId;
pub use sim::{Duration, SimTime};
