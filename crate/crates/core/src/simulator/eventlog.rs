//! Binary per-event log: little-endian `u32` bond, `f64` time, `f64` η.

use std::io::Write;

use super::chain::EventRecord;
use super::SimError;

pub const EVENT_RECORD_BYTES: usize = 4 + 8 + 8;

pub struct EventLogWriter<W: Write> {
    out: W,
    written: u64,
    failure: Option<std::io::Error>,
}

impl<W: Write> EventLogWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            written: 0,
            failure: None,
        }
    }

    /// Appends one record. The first write failure is kept and reported by
    /// [`finish`](Self::finish), so this can be used from an event callback.
    pub fn record(&mut self, e: &EventRecord) {
        if self.failure.is_some() {
            return;
        }
        let mut buf = [0u8; EVENT_RECORD_BYTES];
        buf[..4].copy_from_slice(&e.bond.to_le_bytes());
        buf[4..12].copy_from_slice(&e.time.to_le_bytes());
        buf[12..].copy_from_slice(&e.eta.to_le_bytes());
        match self.out.write_all(&buf) {
            Ok(()) => self.written += 1,
            Err(err) => self.failure = Some(err),
        }
    }

    /// Flushes and returns the number of records written.
    pub fn finish(mut self) -> Result<u64, SimError> {
        if let Some(e) = self.failure.take() {
            return Err(e.into());
        }
        self.out.flush()?;
        Ok(self.written)
    }
}

pub fn read_event_log(bytes: &[u8]) -> Result<Vec<EventRecord>, SimError> {
    if !bytes.len().is_multiple_of(EVENT_RECORD_BYTES) {
        return Err(SimError::Io(format!(
            "event log length {} is not a multiple of {EVENT_RECORD_BYTES}",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(EVENT_RECORD_BYTES)
        .map(|c| EventRecord {
            bond: u32::from_le_bytes(c[..4].try_into().expect("4 bytes")),
            time: f64::from_le_bytes(c[4..12].try_into().expect("8 bytes")),
            eta: f64::from_le_bytes(c[12..].try_into().expect("8 bytes")),
        })
        .collect())
}
