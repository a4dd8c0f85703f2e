//! Event vocabulary dispatched by the simulation loop.

use crate::radio::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ev {
    /// A transmission's airtime elapsed.
    TxEnd { uid: u64 },
    /// A transmission just started; lets periodically-checking receivers
    /// react to energy on the channel at the same instant.
    Carrier,
    /// CSMA machine timer: backoff expiry or ack timeout, by phase.
    MacTimer { node: NodeId },
    /// Rx-to-tx turnaround elapsed; transmit the pending acknowledgement.
    MacSendAck { node: NodeId },
    /// Router cycle start: assess the channel and broadcast the beacon.
    RouterCycleStart { node: NodeId },
    /// Router sleeping period over; open the waiting period.
    RouterSpEnd { node: NodeId },
    /// Router waiting period over.
    RouterWpEnd { node: NodeId },
    /// A new packet is generated at a leaf.
    PacketArrival { node: NodeId },
    /// Leaf wake-up timer for the advertised waiting period.
    LeafWake { node: NodeId },
    /// Leaf's contention window closed.
    LeafWindowEnd { node: NodeId },
    /// Periodic channel check at a low-power-listening receiver.
    LplCheckStart { node: NodeId },
    /// Receiver-side timer: check end or idle linger expiry, by phase.
    LplRxTimer { node: NodeId },
    /// Sender-side timer: backoff, strobe pacing or attempt retry, by phase.
    LplSendTimer { node: NodeId },
}
