//! Data Extraction Rate and loss attribution.

use crate::engine::{Fate, PacketRecord, RunLog};
use crate::error::{Result, SimError};

/// Message counters for one network.
///
/// A message is received when at least one of its own network's stations
/// decoded it. Lost messages are attributed to one cause with the precedence
/// collision, then missing demodulator slot, then weak signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NetworkStats {
    pub sent: u64,
    pub received: u64,
    pub lost_collision: u64,
    pub lost_no_slot: u64,
    pub lost_below_sensitivity: u64,
}

/// How one message ended up, across all of its own network's stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageOutcome {
    Received,
    Collided,
    NoDemodSlot,
    BelowSensitivity,
}

/// Outcome of a message from its fates at the sender's own stations.
pub fn classify(fates: impl IntoIterator<Item = Fate>) -> MessageOutcome {
    let mut worst = MessageOutcome::BelowSensitivity;
    for fate in fates {
        match fate {
            Fate::Received => return MessageOutcome::Received,
            Fate::Collided => worst = MessageOutcome::Collided,
            Fate::NoDemodSlot if worst != MessageOutcome::Collided => worst = MessageOutcome::NoDemodSlot,
            _ => {}
        }
    }
    worst
}

impl NetworkStats {
    pub fn record(&mut self, outcome: MessageOutcome) {
        self.sent += 1;
        match outcome {
            MessageOutcome::Received => self.received += 1,
            MessageOutcome::Collided => self.lost_collision += 1,
            MessageOutcome::NoDemodSlot => self.lost_no_slot += 1,
            MessageOutcome::BelowSensitivity => self.lost_below_sensitivity += 1,
        }
    }

    pub fn lost(&self) -> u64 {
        self.lost_collision + self.lost_no_slot + self.lost_below_sensitivity
    }

    pub fn merge(&mut self, other: &NetworkStats) {
        self.sent += other.sent;
        self.received += other.received;
        self.lost_collision += other.lost_collision;
        self.lost_no_slot += other.lost_no_slot;
        self.lost_below_sensitivity += other.lost_below_sensitivity;
    }
}

/// Received over sent.
pub fn der(stats: &NetworkStats) -> Result<f64> {
    if stats.sent == 0 {
        return Err(SimError::UndefinedMetric("DER of a network that sent nothing".into()));
    }
    Ok(stats.received as f64 / stats.sent as f64)
}

/// Counters of `network` in a finished run.
pub fn loss_breakdown(run: &RunLog, network: usize) -> Result<NetworkStats> {
    run.stats
        .get(network)
        .copied()
        .ok_or_else(|| SimError::Config(format!("run has no network {network}")))
}

/// Recomputes the counters of `network` from a packet trace.
pub fn stats_from_packets(run: &RunLog, packets: &[PacketRecord], network: usize) -> NetworkStats {
    let own: Vec<usize> = run
        .stations
        .iter()
        .enumerate()
        .filter(|(_, s)| s.network == network)
        .map(|(i, _)| i)
        .collect();
    let mut stats = NetworkStats::default();
    for p in packets.iter().filter(|p| p.network == network) {
        stats.record(classify(own.iter().map(|&s| p.receptions[s].fate)));
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn der_definition() {
        let s = NetworkStats { sent: 100, received: 80, lost_collision: 20, ..Default::default() };
        assert_eq!(der(&s).unwrap(), 0.8);
        let all = NetworkStats { sent: 7, received: 7, ..Default::default() };
        assert_eq!(der(&all).unwrap(), 1.0);
        assert!(matches!(der(&NetworkStats::default()), Err(SimError::UndefinedMetric(_))));
    }

    #[test]
    fn any_station_suffices() {
        assert_eq!(classify([Fate::Received, Fate::Collided]), MessageOutcome::Received);
        assert_eq!(classify([Fate::Collided, Fate::Received]), MessageOutcome::Received);
    }

    #[test]
    fn loss_precedence() {
        assert_eq!(classify([Fate::Collided, Fate::NoDemodSlot]), MessageOutcome::Collided);
        assert_eq!(classify([Fate::NoDemodSlot, Fate::Collided]), MessageOutcome::Collided);
        assert_eq!(classify([Fate::BelowSensitivity, Fate::NoDemodSlot]), MessageOutcome::NoDemodSlot);
        assert_eq!(classify([Fate::BelowSensitivity; 3]), MessageOutcome::BelowSensitivity);
    }

    #[test]
    fn counters_partition_sent() {
        let mut s = NetworkStats::default();
        for o in [
            MessageOutcome::Received,
            MessageOutcome::Collided,
            MessageOutcome::NoDemodSlot,
            MessageOutcome::BelowSensitivity,
            MessageOutcome::Received,
        ] {
            s.record(o);
        }
        assert_eq!(s.sent, 5);
        assert_eq!(s.received + s.lost(), s.sent);
    }
}
