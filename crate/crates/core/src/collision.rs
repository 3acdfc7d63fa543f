//! Reception rules for overlapping LoRa transmissions at a single receiver.
//!
//! Two packets interfere only when they share a frequency band, use the same
//! spreading factor, and overlap after the later packet's receiver lock-on
//! window. Interfering pairs are resolved with the capture effect: a packet
//! survives only if it is at least `capture_db` stronger than its rival.

/// Time span of one packet on air, in ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirInterval {
    pub start: f64,
    pub end: f64,
    /// Start of the section where interference destroys reception.
    pub critical_start: f64,
}

impl AirInterval {
    /// Builds the interval for a packet whose receiver tolerates interference
    /// during the first `preamble_symbols - 5` preamble symbols.
    pub fn new(start: f64, airtime_ms: f64, symbol_time_ms: f64, preamble_symbols: u32) -> Self {
        let lock_on = f64::from(preamble_symbols.saturating_sub(5)) * symbol_time_ms;
        AirInterval {
            start,
            end: start + airtime_ms,
            critical_start: start + lock_on,
        }
    }

    pub fn overlaps(&self, other: &AirInterval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Configurable thresholds of the collision model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionThresholds {
    /// Minimum power advantage for the stronger packet to survive, dB.
    pub capture_db: f64,
    /// Carrier separation below which packets collide when either uses 500 kHz.
    pub freq_sep_500k_hz: f64,
    /// Same for 250 kHz.
    pub freq_sep_250k_hz: f64,
    /// Same for 125 kHz.
    pub freq_sep_125k_hz: f64,
}

impl Default for CollisionThresholds {
    fn default() -> Self {
        CollisionThresholds {
            capture_db: 6.0,
            freq_sep_500k_hz: 120e3,
            freq_sep_250k_hz: 60e3,
            freq_sep_125k_hz: 30e3,
        }
    }
}

impl CollisionThresholds {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.capture_db.is_finite() && self.capture_db > 0.0) {
            return Err(crate::SimError::invalid("capture_db", "must be positive"));
        }
        for v in [self.freq_sep_125k_hz, self.freq_sep_250k_hz, self.freq_sep_500k_hz] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(crate::SimError::invalid(
                    "frequency_separation",
                    "must be non-negative",
                ));
            }
        }
        Ok(())
    }
}

pub fn frequency_collides_with(
    t: &CollisionThresholds,
    cf1: f64,
    bw1: u32,
    cf2: f64,
    bw2: u32,
) -> bool {
    let limit = if bw1 == 500_000 || bw2 == 500_000 {
        t.freq_sep_500k_hz
    } else if bw1 == 250_000 || bw2 == 250_000 {
        t.freq_sep_250k_hz
    } else {
        t.freq_sep_125k_hz
    };
    (cf1 - cf2).abs() < limit
}

/// Frequency rule with the default thresholds.
pub fn frequency_collides(cf1: f64, bw1: u32, cf2: f64, bw2: u32) -> bool {
    frequency_collides_with(&CollisionThresholds::default(), cf1, bw1, cf2, bw2)
}

/// Spreading factors are orthogonal: only equal SFs interfere.
pub fn sf_collides(sf1: u8, sf2: u8) -> bool {
    sf1 == sf2
}

/// Whether `existing` still occupies the channel once `new` has passed its
/// lock-on window.
///
/// The two intervals must overlap.
pub fn timing_collides(new: &AirInterval, existing: &AirInterval) -> bool {
    debug_assert!(
        new.overlaps(existing),
        "timing check on non-overlapping intervals {new:?} / {existing:?}"
    );
    existing.end > new.critical_start
}

/// Result of applying the capture effect to two interfering packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaptureOutcome {
    BothLost,
    FirstSurvives,
    SecondSurvives,
    NoInteraction,
}

impl CaptureOutcome {
    pub fn first_lost(self) -> bool {
        matches!(self, CaptureOutcome::BothLost | CaptureOutcome::SecondSurvives)
    }

    pub fn second_lost(self) -> bool {
        matches!(self, CaptureOutcome::BothLost | CaptureOutcome::FirstSurvives)
    }

    pub fn mirrored(self) -> Self {
        match self {
            CaptureOutcome::FirstSurvives => CaptureOutcome::SecondSurvives,
            CaptureOutcome::SecondSurvives => CaptureOutcome::FirstSurvives,
            other => other,
        }
    }
}

pub fn capture(p1_dbm: f64, p2_dbm: f64, threshold_db: f64) -> CaptureOutcome {
    if (p1_dbm - p2_dbm).abs() < threshold_db {
        CaptureOutcome::BothLost
    } else if p1_dbm >= p2_dbm + threshold_db {
        CaptureOutcome::FirstSurvives
    } else {
        CaptureOutcome::SecondSurvives
    }
}

/// A packet as seen by one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub cf_hz: f64,
    pub bw_hz: u32,
    pub sf: u8,
    pub interval: AirInterval,
    pub power_dbm: f64,
}

/// Full pairwise verdict for a newly arrived packet against one in-flight packet.
pub fn interact(t: &CollisionThresholds, new: &Arrival, existing: &Arrival) -> CaptureOutcome {
    if frequency_collides_with(t, new.cf_hz, new.bw_hz, existing.cf_hz, existing.bw_hz)
        && sf_collides(new.sf, existing.sf)
        && timing_collides(&new.interval, &existing.interval)
    {
        capture(new.power_dbm, existing.power_dbm, t.capture_db)
    } else {
        CaptureOutcome::NoInteraction
    }
}

/// Which packets lose when `new` arrives while `in_flight` are being received.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArrivalVerdict {
    pub new_collided: bool,
    /// Indices into `in_flight` of packets destroyed by the newcomer.
    pub collided: Vec<usize>,
}

/// Resolves a new arrival against every packet already being received.
///
/// Callers merge the verdict into existing fates; a packet once collided stays
/// collided.
pub fn resolve_arrival(
    t: &CollisionThresholds,
    new: &Arrival,
    in_flight: &[Arrival],
) -> ArrivalVerdict {
    let mut verdict = ArrivalVerdict::default();
    for (i, existing) in in_flight.iter().enumerate() {
        let outcome = interact(t, new, existing);
        if outcome.first_lost() {
            verdict.new_collided = true;
        }
        if outcome.second_lost() {
            verdict.collided.push(i);
        }
    }
    verdict
}
