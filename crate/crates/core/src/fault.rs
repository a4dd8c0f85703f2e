//! Protocol-violation faults.
//!
//! These indicate programming errors in the protocol layers (transmitting
//! with the radio off, overlapping sends on one node, ...). They abort the
//! run rather than being handled.

use thiserror::Error;

use crate::radio::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Fault {
    #[error("node {node} attempted {op} with its radio off")]
    RadioOff { node: NodeId, op: &'static str },
    #[error("node {node} attempted {op} while transmitting")]
    RadioBusy { node: NodeId, op: &'static str },
    #[error("node {node} began a transmission while one is already active")]
    AlreadyTransmitting { node: NodeId },
    #[error("node {node} started a send while another is in flight")]
    SendInFlight { node: NodeId },
    #[error("mpdu length {len} exceeds the 127-octet limit")]
    OversizeMpdu { len: u16 },
    #[error("waiting period {wp} µs exceeds the subframe {subframe} µs")]
    WpExceedsSubframe { wp: u64, subframe: u64 },
}
