//! Seeded discrete-event loop.
//!
//! Every node alternates between an exponentially distributed idle gap and one
//! packet on air. At packet start the engine evaluates the packet at every base
//! station of every network: sensitivity first, then demodulator capacity,
//! then collisions against the station's tracked receptions. At packet end
//! still-pending receptions succeed and the demodulator slot is released.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::collision::{resolve_arrival, AirInterval, Arrival};
use crate::error::{Result, SimError};
use crate::metrics::{classify, NetworkStats};
use crate::propagation::{antenna_gain, Position};
use crate::radio::airtime_ms;
use crate::rng::{node_index, stream, StreamTag};
use crate::scenario::{Deployment, Scenario};

/// Default simulated time per run, ms (about 100 packets per node at λ = 1e6 ms).
pub const DEFAULT_DURATION_MS: f64 = 1.0e8;

/// What happened to one packet at one base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fate {
    Pending,
    BelowSensitivity,
    NoDemodSlot,
    Collided,
    Received,
}

impl Fate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fate::Pending => "pending",
            Fate::BelowSensitivity => "below_sensitivity",
            Fate::NoDemodSlot => "no_demod_slot",
            Fate::Collided => "collided",
            Fate::Received => "received",
        }
    }

    /// Whether the packet holds a demodulator slot while in this state.
    fn holds_slot(&self) -> bool {
        matches!(self, Fate::Pending | Fate::Collided)
    }
}

/// Exponential gap with mean `lambda_ms`.
pub fn next_send_time(rng: &mut impl Rng, lambda_ms: f64) -> Result<f64> {
    let exp = Exp::new(1.0 / lambda_ms)
        .ok()
        .filter(|_| lambda_ms.is_finite() && lambda_ms > 0.0)
        .ok_or_else(|| SimError::invalid("lambda", format!("lambda {lambda_ms} must be positive")))?;
    Ok(exp.sample(rng))
}

/// A base station as the engine sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct StationInfo {
    pub network: usize,
    pub position: Position,
}

/// One packet's reception at one station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reception {
    pub power_dbm: f64,
    /// Fate decided when the packet arrived.
    pub at_arrival: Fate,
    /// Terminal fate.
    pub fate: Fate,
}

/// Complete history of one transmission, kept when tracing is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub network: usize,
    pub node: usize,
    pub cf_hz: f64,
    pub bw_hz: u32,
    pub sf: u8,
    pub interval: AirInterval,
    /// Indexed like [`RunLog::stations`].
    pub receptions: Vec<Reception>,
}

/// Output of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub seed: u64,
    pub stations: Vec<StationInfo>,
    /// Per network, index 0 is the measured network.
    pub stats: Vec<NetworkStats>,
    /// Highest number of simultaneously tracked receptions at any station.
    pub max_slot_occupancy: usize,
    /// Node/station links shorter than the path-loss distance floor.
    pub degenerate_links: usize,
    /// Per-packet history in end order, when tracing was requested.
    pub packets: Option<Vec<PacketRecord>>,
}

impl RunLog {
    /// Writes `time_ms,network,node,event,station,power_dbm,fate` rows.
    ///
    /// Start rows carry the fate decided at arrival, end rows the terminal fate.
    pub fn write_trace_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_ms", "network", "node", "event", "station", "power_dbm", "fate"])?;
        let Some(packets) = &self.packets else {
            w.flush()?;
            return Ok(());
        };
        let mut rows: Vec<(f64, u8, &PacketRecord)> = Vec::with_capacity(packets.len() * 2);
        for p in packets {
            rows.push((p.interval.start, 1, p));
            rows.push((p.interval.end, 0, p));
        }
        rows.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then((a.2.network, a.2.node).cmp(&(b.2.network, b.2.node)))
        });
        for (t, kind, p) in rows {
            for (s, rec) in p.receptions.iter().enumerate() {
                let fate = if kind == 1 { rec.at_arrival } else { rec.fate };
                w.write_record([
                    format!("{t:.6}"),
                    p.network.to_string(),
                    p.node.to_string(),
                    (if kind == 1 { "start" } else { "end" }).to_string(),
                    s.to_string(),
                    format!("{:.6}", rec.power_dbm),
                    fate.as_str().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// How packet start times are generated.
#[derive(Debug, Clone, PartialEq)]
pub enum Traffic {
    /// Each node sends after exponential gaps until `duration_ms`.
    Poisson { duration_ms: f64 },
    /// Test hook: exactly these `(network, node, start_ms)` transmissions.
    Injected(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    // ends sort before starts at equal times
    End = 0,
    Start = 1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    kind: EventKind,
    network: usize,
    node: usize,
    /// Flat node index.
    slot: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then((self.kind as u8).cmp(&(other.kind as u8)))
            .then(self.network.cmp(&other.network))
            .then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct ActiveTx {
    interval: AirInterval,
    receptions: Vec<Reception>,
}

struct NodeState {
    network: usize,
    node: usize,
    rng: ChaCha8Rng,
    lambda_ms: f64,
    airtime_ms: f64,
    symbol_ms: f64,
    cf_hz: f64,
    bw_hz: u32,
    sf: u8,
    sensitivity_dbm: f64,
    /// Received power at every station.
    power: Vec<f64>,
    active: Option<ActiveTx>,
}

/// Runs `scenario` for `duration_ms` of simulated time.
pub fn run(scenario: &Scenario, seed: u64, duration_ms: f64) -> Result<RunLog> {
    Simulation::new(scenario, seed, RunOptions::default())?.execute(Traffic::Poisson { duration_ms })
}

/// Knobs that do not change the simulated physics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub trace: bool,
}

/// A deployed scenario ready to execute.
pub struct Simulation {
    seed: u64,
    options: RunOptions,
    demod_slots: usize,
    preamble_symbols: u32,
    thresholds: crate::collision::CollisionThresholds,
    stations: Vec<StationInfo>,
    /// Station indices per network.
    own_stations: Vec<Vec<usize>>,
    nodes: Vec<NodeState>,
    /// Offsets of each network's first node in `nodes`.
    network_offsets: Vec<usize>,
    degenerate_links: usize,
}

impl Simulation {
    pub fn new(scenario: &Scenario, seed: u64, options: RunOptions) -> Result<Self> {
        let deployment = scenario.deploy(seed)?;
        Self::from_deployment(scenario, &deployment, seed, options)
    }

    pub fn from_deployment(
        scenario: &Scenario,
        deployment: &Deployment,
        seed: u64,
        options: RunOptions,
    ) -> Result<Self> {
        let mut stations = Vec::new();
        let mut own_stations = Vec::new();
        for net in &deployment.networks {
            let mut own = Vec::new();
            for &position in &net.stations {
                own.push(stations.len());
                stations.push(StationInfo { network: net.id, position });
            }
            own_stations.push(own);
        }

        let shadow = if scenario.path_loss.sigma_db > 0.0 {
            Some(Normal::new(0.0, scenario.path_loss.sigma_db).map_err(|e| {
                SimError::invalid("sigma_db", e.to_string())
            })?)
        } else {
            None
        };

        let mut nodes = Vec::new();
        let mut network_offsets = Vec::new();
        let mut degenerate_links = 0;
        for net in &deployment.networks {
            network_offsets.push(nodes.len());
            let s = net.settings;
            let airtime = airtime_ms(&s, &scenario.framing)?;
            let sens = scenario.sensitivity.get(s.sf, s.bw_hz)?;
            for (i, site) in net.nodes.iter().enumerate() {
                let mut shadow_rng = stream(seed, StreamTag::Shadowing, node_index(net.id, i));
                let mut power = Vec::with_capacity(stations.len());
                for st in &stations {
                    let d = site.position.distance_to(&st.position);
                    let draw = shadow.map_or(0.0, |n| n.sample(&mut shadow_rng));
                    let loss = scenario.path_loss.path_loss(d, draw);
                    if loss.clamped {
                        degenerate_links += 1;
                    }
                    // a node sitting on a station has no departure direction
                    let gain = antenna_gain(&site.antenna, &site.position, &st.position).unwrap_or(0.0);
                    power.push(s.tp_dbm + gain - loss.db);
                }
                nodes.push(NodeState {
                    network: net.id,
                    node: i,
                    rng: stream(seed, StreamTag::Traffic, node_index(net.id, i)),
                    lambda_ms: s.lambda_ms,
                    airtime_ms: airtime,
                    symbol_ms: s.symbol_time_ms(),
                    cf_hz: s.cf_hz,
                    bw_hz: s.bw_hz,
                    sf: s.sf,
                    sensitivity_dbm: sens,
                    power,
                    active: None,
                });
            }
        }

        Ok(Simulation {
            seed,
            options,
            demod_slots: scenario.demod_slots,
            preamble_symbols: scenario.framing.preamble_symbols,
            thresholds: scenario.thresholds,
            stations,
            own_stations,
            nodes,
            network_offsets,
            degenerate_links,
        })
    }

    pub fn stations(&self) -> &[StationInfo] {
        &self.stations
    }

    /// Received power of `(network, node)` at `station`.
    pub fn link_power(&self, network: usize, node: usize, station: usize) -> f64 {
        self.nodes[self.network_offsets[network] + node].power[station]
    }

    /// Overrides a link's received power; for constructing test cases.
    pub fn set_link_power(&mut self, network: usize, node: usize, station: usize, power_dbm: f64) {
        let slot = self.network_offsets[network] + node;
        self.nodes[slot].power[station] = power_dbm;
    }

    fn slot_of(&self, network: usize, node: usize) -> Result<usize> {
        let base = *self
            .network_offsets
            .get(network)
            .ok_or_else(|| SimError::Config(format!("no network {network}")))?;
        let end = self.network_offsets.get(network + 1).copied().unwrap_or(self.nodes.len());
        if base + node >= end {
            return Err(SimError::Config(format!("no node {node} in network {network}")));
        }
        Ok(base + node)
    }

    pub fn execute(mut self, traffic: Traffic) -> Result<RunLog> {
        let mut queue: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
        let duration = match &traffic {
            Traffic::Poisson { duration_ms } => {
                if !(duration_ms.is_finite() && *duration_ms > 0.0) {
                    return Err(SimError::invalid("duration_ms", "must be positive"));
                }
                for slot in 0..self.nodes.len() {
                    let n = &mut self.nodes[slot];
                    let t = next_send_time(&mut n.rng, n.lambda_ms)?;
                    if t < *duration_ms {
                        queue.push(Reverse(Event {
                            time: t,
                            kind: EventKind::Start,
                            network: n.network,
                            node: n.node,
                            slot,
                        }));
                    }
                }
                Some(*duration_ms)
            }
            Traffic::Injected(starts) => {
                for &(network, node, time) in starts {
                    let slot = self.slot_of(network, node)?;
                    queue.push(Reverse(Event { time, kind: EventKind::Start, network, node, slot }));
                }
                None
            }
        };

        let mut tracked: Vec<Vec<usize>> = vec![Vec::with_capacity(self.demod_slots); self.stations.len()];
        let mut stats = vec![NetworkStats::default(); self.own_stations.len()];
        let mut packets = self.options.trace.then(Vec::new);
        let mut max_occupancy = 0;
        let mut arrivals: Vec<Arrival> = Vec::with_capacity(self.demod_slots);

        while let Some(Reverse(ev)) = queue.pop() {
            match ev.kind {
                EventKind::Start => {
                    if self.nodes[ev.slot].active.is_some() {
                        return Err(SimError::Invariant(format!(
                            "node {} of network {} started while on air",
                            ev.node, ev.network
                        )));
                    }
                    let interval = {
                        let n = &self.nodes[ev.slot];
                        AirInterval::new(ev.time, n.airtime_ms, n.symbol_ms, self.preamble_symbols)
                    };
                    let mut receptions = Vec::with_capacity(self.stations.len());
                    #[allow(clippy::needless_range_loop)]
                    for st in 0..self.stations.len() {
                        let n = &self.nodes[ev.slot];
                        let power = n.power[st];
                        let fate = if power < n.sensitivity_dbm {
                            Fate::BelowSensitivity
                        } else if tracked[st].len() >= self.demod_slots {
                            Fate::NoDemodSlot
                        } else {
                            let new = Arrival {
                                cf_hz: n.cf_hz,
                                bw_hz: n.bw_hz,
                                sf: n.sf,
                                interval,
                                power_dbm: power,
                            };
                            arrivals.clear();
                            for &other in &tracked[st] {
                                let o = &self.nodes[other];
                                let tx = o.active.as_ref().ok_or_else(|| {
                                    SimError::Invariant("tracked packet is not on air".into())
                                })?;
                                arrivals.push(Arrival {
                                    cf_hz: o.cf_hz,
                                    bw_hz: o.bw_hz,
                                    sf: o.sf,
                                    interval: tx.interval,
                                    power_dbm: o.power[st],
                                });
                            }
                            let verdict = resolve_arrival(&self.thresholds, &new, &arrivals);
                            for &lost in &verdict.collided {
                                let other = tracked[st][lost];
                                if let Some(tx) = self.nodes[other].active.as_mut() {
                                    tx.receptions[st].fate = Fate::Collided;
                                }
                            }
                            tracked[st].push(ev.slot);
                            max_occupancy = max_occupancy.max(tracked[st].len());
                            if tracked[st].len() > self.demod_slots {
                                return Err(SimError::Invariant(format!(
                                    "station {st} tracks {} receptions",
                                    tracked[st].len()
                                )));
                            }
                            if verdict.new_collided {
                                Fate::Collided
                            } else {
                                Fate::Pending
                            }
                        };
                        receptions.push(Reception { power_dbm: power, at_arrival: fate, fate });
                    }
                    self.nodes[ev.slot].active = Some(ActiveTx { interval, receptions });
                    queue.push(Reverse(Event {
                        time: interval.end,
                        kind: EventKind::End,
                        ..ev
                    }));
                }
                EventKind::End => {
                    let Some(mut tx) = self.nodes[ev.slot].active.take() else {
                        return Err(SimError::Invariant(format!(
                            "node {} of network {} ended twice",
                            ev.node, ev.network
                        )));
                    };
                    for (st, rec) in tx.receptions.iter_mut().enumerate() {
                        if rec.fate.holds_slot() {
                            let pos = tracked[st].iter().position(|&s| s == ev.slot).ok_or_else(|| {
                                SimError::Invariant(format!("station {st} lost track of a reception"))
                            })?;
                            tracked[st].swap_remove(pos);
                        }
                        if rec.fate == Fate::Pending {
                            rec.fate = Fate::Received;
                        }
                    }
                    let own = &self.own_stations[ev.network];
                    stats[ev.network].record(classify(own.iter().map(|&s| tx.receptions[s].fate)));

                    let n = &mut self.nodes[ev.slot];
                    if let Some(packets) = packets.as_mut() {
                        packets.push(PacketRecord {
                            network: n.network,
                            node: n.node,
                            cf_hz: n.cf_hz,
                            bw_hz: n.bw_hz,
                            sf: n.sf,
                            interval: tx.interval,
                            receptions: tx.receptions,
                        });
                    }
                    if let Some(duration) = duration {
                        let next = ev.time + next_send_time(&mut n.rng, n.lambda_ms)?;
                        if next < duration {
                            queue.push(Reverse(Event {
                                time: next,
                                kind: EventKind::Start,
                                ..ev
                            }));
                        }
                    }
                }
            }
        }

        if tracked.iter().any(|t| !t.is_empty()) || self.nodes.iter().any(|n| n.active.is_some()) {
            return Err(SimError::Invariant("receptions left pending after the run".into()));
        }

        Ok(RunLog {
            seed: self.seed,
            stations: self.stations,
            stats,
            max_slot_occupancy: max_occupancy,
            degenerate_links: self.degenerate_links,
            packets,
        })
    }
}
