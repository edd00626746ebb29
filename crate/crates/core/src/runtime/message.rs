//! LPU/CPU message types and the optional exchange trace.

use num_complex::Complex64;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;

/// Scalar-only payloads exchanged between processing units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Message {
    /// Grid index handed from one LPU to its outward neighbour.
    DelaySeed {
        from: usize,
        to: usize,
        index: i64,
    },
    DelayReport {
        from: usize,
        index: i64,
    },
    ParamBroadcast {
        angle_sine: f64,
        distance_m: f64,
        range_m: f64,
    },
    GainReport {
        from: usize,
        gain: Complex64,
    },
    StopQuery {
        to: usize,
    },
    /// Seed whose delay track failed decoupling; excluded from later scans.
    SkipIndex {
        to: usize,
        index: usize,
    },
    /// Residual peak `max_m |bᴴ(τ̄_m) y|² / M` of the reporting LPU.
    StopReport {
        from: usize,
        score: f64,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::DelaySeed { .. } => "DelaySeed",
            Message::DelayReport { .. } => "DelayReport",
            Message::ParamBroadcast { .. } => "ParamBroadcast",
            Message::GainReport { .. } => "GainReport",
            Message::StopQuery { .. } => "StopQuery",
            Message::SkipIndex { .. } => "SkipIndex",
            Message::StopReport { .. } => "StopReport",
        }
    }

    /// Sending unit; the CPU is reported as `None`.
    pub fn sender(&self) -> Option<usize> {
        match *self {
            Message::DelaySeed { from, .. }
            | Message::DelayReport { from, .. }
            | Message::GainReport { from, .. }
            | Message::StopReport { from, .. } => Some(from),
            Message::ParamBroadcast { .. }
            | Message::StopQuery { .. }
            | Message::SkipIndex { .. } => None,
        }
    }

    /// Real scalars carried, excluding routing indices.
    pub fn payload(&self) -> Vec<f64> {
        match *self {
            Message::DelaySeed { index, .. } | Message::DelayReport { index, .. } => {
                vec![index as f64]
            }
            Message::ParamBroadcast {
                angle_sine,
                distance_m,
                range_m,
            } => vec![angle_sine, distance_m, range_m],
            Message::GainReport { gain, .. } => vec![gain.re, gain.im],
            Message::StopQuery { .. } => vec![],
            Message::StopReport { score, .. } => vec![score],
            Message::SkipIndex { index, .. } => vec![index as f64],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub message: Message,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn push(&mut self, iteration: usize, message: Message) {
        self.entries.push(TraceEntry { iteration, message });
    }

    pub fn count(&self, iteration: usize, kind: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.iteration == iteration && e.message.kind() == kind)
            .count()
    }

    pub fn max_payload_len(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.message.payload().len())
            .max()
            .unwrap_or(0)
    }

    /// `iter=<i> kind=<variant> from=<k> payload=<scalars>`, one per line;
    /// `from=cpu` for CPU messages, LPU indices 1-based.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.entries {
            let from = e
                .message
                .sender()
                .map_or_else(|| "cpu".to_string(), |k| (k + 1).to_string());
            let mut payload = String::new();
            for (i, v) in e.message.payload().iter().enumerate() {
                if i > 0 {
                    payload.push(',');
                }
                write!(payload, "{v:e}").expect("string write");
            }
            writeln!(
                out,
                "iter={} kind={} from={} payload={}",
                e.iteration,
                e.message.kind(),
                from,
                payload
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_lines() {
        let mut t = Trace::default();
        t.push(0, Message::DelayReport { from: 3, index: 17 });
        t.push(
            0,
            Message::ParamBroadcast {
                angle_sine: 0.5,
                distance_m: 12.0,
                range_m: 0.0,
            },
        );
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iter=0 kind=DelayReport from=4 payload=1.7e1\niter=0 kind=ParamBroadcast from=cpu payload=5e-1,1.2e1,0e0\n"
        );
        assert_eq!(t.count(0, "DelayReport"), 1);
        assert_eq!(t.max_payload_len(), 3);
    }
}
