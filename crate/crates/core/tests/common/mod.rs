//! Shared helpers for integration and acceptance tests.
#![allow(dead_code)]

use lora_coexist::engine::{Fate, PacketRecord, RunLog, RunOptions, Simulation, Traffic};
use lora_coexist::scenario::{AntennaSelector, Layout, Scenario};
use lora_coexist::TransmitterSettings;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force re-derivation of every (packet, station) fate from a trace.
///
/// Works from first principles: packets are taken in start order with ends
/// before starts at equal times, slot holders are counted by interval overlap
/// and every overlapping accepted pair is checked against the thresholds.
pub fn oracle_fates(scenario: &Scenario, log: &RunLog, packets: &[PacketRecord]) -> Vec<Vec<Fate>> {
    let stations = log.stations.len();
    let mut order: Vec<usize> = (0..packets.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&packets[a], &packets[b]);
        pa.interval
            .start
            .total_cmp(&pb.interval.start)
            .then(pa.network.cmp(&pb.network))
            .then(pa.node.cmp(&pb.node))
    });
    let t = &scenario.thresholds;
    let mut fates = vec![vec![Fate::Pending; stations]; packets.len()];
    #[allow(clippy::needless_range_loop)]
    for st in 0..stations {
        let mut accepted: Vec<usize> = Vec::new();
        for &p in &order {
            let pk = &packets[p];
            let sens = scenario.sensitivity.get(pk.sf, pk.bw_hz).unwrap();
            if pk.receptions[st].power_dbm < sens {
                fates[p][st] = Fate::BelowSensitivity;
                continue;
            }
            let holders = accepted
                .iter()
                .filter(|&&q| packets[q].interval.end > pk.interval.start)
                .count();
            if holders >= scenario.demod_slots {
                fates[p][st] = Fate::NoDemodSlot;
                continue;
            }
            accepted.push(p);
        }
        let mut lost = vec![false; packets.len()];
        for (i, &q) in accepted.iter().enumerate() {
            for &p in &accepted[i + 1..] {
                // q is processed before p
                let (a, b) = (&packets[q], &packets[p]);
                if a.interval.end <= b.interval.start {
                    continue;
                }
                let bw = a.bw_hz.max(b.bw_hz);
                let sep = if bw >= 500_000 {
                    t.freq_sep_500k_hz
                } else if bw >= 250_000 {
                    t.freq_sep_250k_hz
                } else {
                    t.freq_sep_125k_hz
                };
                if (a.cf_hz - b.cf_hz).abs() >= sep || a.sf != b.sf {
                    continue;
                }
                if a.interval.end <= b.interval.critical_start {
                    continue;
                }
                let (pa, pb) = (a.receptions[st].power_dbm, b.receptions[st].power_dbm);
                if (pa - pb).abs() < t.capture_db {
                    lost[q] = true;
                    lost[p] = true;
                } else if pa > pb {
                    lost[p] = true;
                } else {
                    lost[q] = true;
                }
            }
        }
        for &p in &accepted {
            fates[p][st] = if lost[p] { Fate::Collided } else { Fate::Received };
        }
    }
    fates
}

/// First disagreement between engine and oracle, if any.
pub fn compare_with_oracle(scenario: &Scenario, log: &RunLog) -> Result<(), String> {
    let packets = log.packets.as_ref().ok_or("run was not traced")?;
    let expected = oracle_fates(scenario, log, packets);
    for (p, (pk, exp)) in packets.iter().zip(&expected).enumerate() {
        for (st, (rec, want)) in pk.receptions.iter().zip(exp).enumerate() {
            if rec.fate != *want {
                return Err(format!(
                    "packet {p} (network {}, node {}, start {:.3}) at station {st}: engine {:?}, oracle {:?}",
                    pk.network, pk.node, pk.interval.start, rec.fate, want
                ));
            }
        }
    }
    // counters must follow from the fates
    for (net, stats) in log.stats.iter().enumerate() {
        let own: Vec<usize> = (0..log.stations.len()).filter(|&s| log.stations[s].network == net).collect();
        let mine: Vec<usize> = (0..packets.len()).filter(|&p| packets[p].network == net).collect();
        let received = mine
            .iter()
            .filter(|&&p| own.iter().any(|&s| expected[p][s] == Fate::Received))
            .count() as u64;
        if stats.sent != mine.len() as u64 || stats.received != received {
            return Err(format!(
                "network {net}: engine {}/{} received/sent, oracle {received}/{}",
                stats.received,
                stats.sent,
                mine.len()
            ));
        }
    }
    Ok(())
}

/// A small scenario with heterogeneous radio settings and dense traffic.
///
/// Returns `None` for draws that the scenario validation rejects.
pub fn random_scenario(rng: &mut ChaCha8Rng, max_nodes: usize) -> Option<Scenario> {
    let interferers = rng.random_range(0..=4usize);
    let per_net = rng.random_range(1..=(max_nodes / (interferers + 1)).max(1));
    let antennas = [AntennaSelector::Omni, AntennaSelector::Spida, AntennaSelector::Spida2x];
    let mut settings = TransmitterSettings::most_robust();
    settings.lambda_ms = rng.random_range(5.0e3..5.0e4);
    settings.payload_bytes = rng.random_range(1..=40);
    let layout = Layout {
        nodes: per_net,
        radius_m: rng.random_range(5.0..80.0),
        bs_count: rng.random_range(1..=3),
        bs_spacing_m: [0.0, 10.0, 33.0, 67.0][rng.random_range(0..4)],
        antenna: antennas[rng.random_range(0..3)],
        interferer_count: interferers,
        interferer_distance_m: rng.random_range(0.0..150.0),
        interferer_positions: None,
        settings,
    };
    let mut scenario = Scenario::from_layout(&layout).ok()?;
    let cfs = [868.1e6, 868.1e6, 868.12e6, 868.15e6, 868.3e6];
    let bws = [125_000, 125_000, 250_000, 500_000];
    for net in std::iter::once(&mut scenario.interfered).chain(scenario.interferers.iter_mut()) {
        net.settings.sf = rng.random_range(10..=12);
        net.settings.cf_hz = cfs[rng.random_range(0..cfs.len())];
        net.settings.bw_hz = bws[rng.random_range(0..bws.len())];
        net.settings.cr = rng.random_range(1..=4);
    }
    scenario.thresholds.capture_db = rng.random_range(0.5..10.0);
    scenario.demod_slots = [1, 2, 3, 8][rng.random_range(0..4)];
    scenario.validate().ok()?;
    Some(scenario)
}

pub fn traced_run(scenario: &Scenario, seed: u64, duration_ms: f64) -> lora_coexist::Result<RunLog> {
    Simulation::new(scenario, seed, RunOptions { trace: true })?.execute(Traffic::Poisson { duration_ms })
}

/// Runs `count` random scenarios through engine and oracle.
///
/// Returns the number checked and the first mismatch.
pub fn oracle_campaign(seed: u64, count: usize, max_nodes: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < count {
        attempts += 1;
        if attempts > count * 20 {
            return Err(format!("only {checked} of {count} random scenarios were valid"));
        }
        let Some(scenario) = random_scenario(&mut rng, max_nodes) else { continue };
        let run_seed = rng.random::<u64>();
        let log = match traced_run(&scenario, run_seed, 3.0e5) {
            Ok(log) => log,
            // radii beyond range of the drawn settings are rejected at deployment
            Err(e) if e.is_config_error() => continue,
            Err(e) => return Err(format!("scenario {checked}: {e}")),
        };
        compare_with_oracle(&scenario, &log).map_err(|e| format!("scenario {checked} (seed {run_seed}): {e}"))?;
        checked += 1;
    }
    Ok(checked)
}

/// Mean DER of network 0 over `seeds`, with per-seed values.
pub fn mean_der(scenario: &Scenario, seeds: &[u64], duration_ms: f64) -> (f64, Vec<f64>) {
    let ders: Vec<f64> = seeds
        .iter()
        .map(|&s| {
            let log = lora_coexist::run(scenario, s, duration_ms).expect("simulation run");
            lora_coexist::der(&log.stats[0]).expect("measured network sent messages")
        })
        .collect();
    (ders.iter().sum::<f64>() / ders.len() as f64, ders)
}
