//! Run trace: newline-delimited records with a stable field order.
//!
//! One line per event — radio power flips, transmission start/end, intact
//! and collided receptions, beacon and ack emissions, and per-node state
//! changes. The format is plain text so two runs can be diffed byte for
//! byte and a node's timeline can be reconstructed with grep.

use std::fmt;
use std::io::{self, Write};

use crate::radio::{Frame, NodeId};
use crate::sim::SimTime;

enum Sink {
    Off,
    Memory(String),
    Writer(Box<dyn Write + Send>),
}

/// Trace sink. Disabled traces cost one branch per record.
pub struct Trace {
    sink: Sink,
    io_error: Option<io::Error>,
}

impl Trace {
    pub fn disabled() -> Self {
        Trace {
            sink: Sink::Off,
            io_error: None,
        }
    }

    pub fn in_memory() -> Self {
        Trace {
            sink: Sink::Memory(String::new()),
            io_error: None,
        }
    }

    pub fn to_writer(w: Box<dyn Write + Send>) -> Self {
        Trace {
            sink: Sink::Writer(w),
            io_error: None,
        }
    }

    pub fn enabled(&self) -> bool {
        !matches!(self.sink, Sink::Off)
    }

    /// The collected text for in-memory traces.
    pub fn into_string(self) -> Option<String> {
        match self.sink {
            Sink::Memory(s) => Some(s),
            _ => None,
        }
    }

    /// Flush a writer-backed trace, surfacing any deferred I/O error.
    pub fn finish(&mut self) -> io::Result<()> {
        if let Some(e) = self.io_error.take() {
            return Err(e);
        }
        if let Sink::Writer(w) = &mut self.sink {
            w.flush()?;
        }
        Ok(())
    }

    fn line(&mut self, args: fmt::Arguments<'_>) {
        match &mut self.sink {
            Sink::Off => {}
            Sink::Memory(s) => {
                use fmt::Write as _;
                let _ = writeln!(s, "{args}");
            }
            Sink::Writer(w) => {
                if self.io_error.is_none() {
                    if let Err(e) = writeln!(w, "{args}") {
                        self.io_error = Some(e);
                    }
                }
            }
        }
    }

    pub fn radio_on(&mut self, t: SimTime, node: NodeId) {
        if self.enabled() {
            self.line(format_args!("{t} {node} radio_on"));
        }
    }

    pub fn radio_off(&mut self, t: SimTime, node: NodeId) {
        if self.enabled() {
            self.line(format_args!("{t} {node} radio_off"));
        }
    }

    pub fn tx_start(&mut self, t: SimTime, node: NodeId, uid: u64, frame: &Frame) {
        if self.enabled() {
            let dst = match frame.dst {
                Some(d) => d.to_string(),
                None => "bcast".into(),
            };
            self.line(format_args!(
                "{t} {node} tx_start uid={uid} kind={} dst={dst} len={} seq={}",
                frame.kind, frame.mpdu_len, frame.seq
            ));
        }
    }

    pub fn tx_end(&mut self, t: SimTime, node: NodeId, uid: u64) {
        if self.enabled() {
            self.line(format_args!("{t} {node} tx_end uid={uid}"));
        }
    }

    pub fn rx_ok(&mut self, t: SimTime, node: NodeId, uid: u64) {
        if self.enabled() {
            self.line(format_args!("{t} {node} rx_ok uid={uid}"));
        }
    }

    pub fn rx_collision(&mut self, t: SimTime, node: NodeId, uid: u64) {
        if self.enabled() {
            self.line(format_args!("{t} {node} rx_collision uid={uid}"));
        }
    }

    pub fn beacon(&mut self, t: SimTime, node: NodeId, sp_us: u32, wp_us: u32) {
        if self.enabled() {
            self.line(format_args!("{t} {node} beacon sp={sp_us} wp={wp_us}"));
        }
    }

    pub fn ack(&mut self, t: SimTime, node: NodeId, dst: NodeId, seq: u8) {
        if self.enabled() {
            self.line(format_args!("{t} {node} ack dst={dst} seq={seq}"));
        }
    }

    /// Free-form state record; callers keep the field order of a given
    /// state kind stable.
    pub fn state(&mut self, t: SimTime, node: NodeId, tail: fmt::Arguments<'_>) {
        if self.enabled() {
            self.line(format_args!("{t} {node} state {tail}"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::Frame;

    #[test]
    fn records_have_stable_shape() {
        let mut tr = Trace::in_memory();
        tr.radio_on(SimTime(1000), NodeId(3));
        let f = Frame::data(NodeId(2), NodeId(1), 100, 7, Some(0));
        tr.tx_start(SimTime(2000), NodeId(2), 5, &f);
        tr.rx_collision(SimTime(3000), NodeId(1), 5);
        tr.state(SimTime(4000), NodeId(2), format_args!("phase=contend"));
        let text = tr.into_string().unwrap();
        assert_eq!(
            text,
            "1000 3 radio_on\n\
             2000 2 tx_start uid=5 kind=data dst=1 len=100 seq=7\n\
             3000 1 rx_collision uid=5\n\
             4000 2 state phase=contend\n"
        );
    }

    #[test]
    fn disabled_trace_emits_nothing() {
        let mut tr = Trace::disabled();
        tr.radio_on(SimTime(1), NodeId(0));
        assert!(!tr.enabled());
        assert!(tr.into_string().is_none());
    }
}
