//! LoRa transmitter settings, time-on-air and receiver sensitivity.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{Result, SimError};

/// Bandwidths supported by the simulator, in Hz.
pub const BANDWIDTHS_HZ: [u32; 3] = [125_000, 250_000, 500_000];

/// Radio behaviour of one node: power, channel, modulation and traffic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitterSettings {
    /// Transmit power in dBm.
    pub tp_dbm: f64,
    /// Carrier frequency in Hz.
    pub cf_hz: f64,
    /// Spreading factor, 6..=12.
    pub sf: u8,
    /// Bandwidth in Hz.
    pub bw_hz: u32,
    /// Coding rate offset: 1..=4 means 4/5..4/8.
    pub cr: u8,
    /// Mean time between packets in ms.
    pub lambda_ms: f64,
    /// Payload size in bytes.
    pub payload_bytes: u32,
}

impl TransmitterSettings {
    /// The most robust setting: 14 dBm, 868 MHz, SF12, 125 kHz, CR 4/8,
    /// 20 byte payload every 16.7 minutes.
    pub fn most_robust() -> Self {
        TransmitterSettings {
            tp_dbm: 14.0,
            cf_hz: 868.0e6,
            sf: 12,
            bw_hz: 125_000,
            cr: 4,
            lambda_ms: 1.0e6,
            payload_bytes: 20,
        }
    }

    /// Same as [`most_robust`](Self::most_robust) but with coding rate 4/5.
    pub fn low_coding_rate() -> Self {
        TransmitterSettings {
            cr: 1,
            ..Self::most_robust()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tp_dbm.is_finite() && (-4.0..=20.0).contains(&self.tp_dbm)) {
            return Err(SimError::invalid(
                "tp",
                format!("tp {} out of range -4..20 dBm", self.tp_dbm),
            ));
        }
        if !(self.cf_hz.is_finite() && (137.0e6..=1020.0e6).contains(&self.cf_hz)) {
            return Err(SimError::invalid(
                "cf",
                format!("cf {} out of range 137e6..1020e6 Hz", self.cf_hz),
            ));
        }
        if !(6..=12).contains(&self.sf) {
            return Err(SimError::invalid(
                "sf",
                format!("sf {} out of range 6..12", self.sf),
            ));
        }
        if !BANDWIDTHS_HZ.contains(&self.bw_hz) {
            return Err(SimError::invalid(
                "bw",
                format!("bw {} not one of 125000, 250000, 500000 Hz", self.bw_hz),
            ));
        }
        if !(1..=4).contains(&self.cr) {
            return Err(SimError::invalid(
                "cr",
                format!("cr {} out of range 1..4", self.cr),
            ));
        }
        if self.payload_bytes < 1 {
            return Err(SimError::invalid("payload", "payload must be at least 1 byte"));
        }
        if !(self.lambda_ms.is_finite() && self.lambda_ms > 0.0) {
            return Err(SimError::invalid(
                "lambda",
                format!("lambda {} must be positive", self.lambda_ms),
            ));
        }
        Ok(())
    }

    /// Low data rate optimisation, mandated for 125 kHz at SF11 and SF12.
    pub fn low_data_rate_optimize(&self) -> bool {
        self.bw_hz == 125_000 && self.sf >= 11
    }

    /// Duration of one chirp symbol in ms.
    pub fn symbol_time_ms(&self) -> f64 {
        f64::from(1u32 << self.sf) / f64::from(self.bw_hz) * 1.0e3
    }
}

impl Default for TransmitterSettings {
    fn default() -> Self {
        Self::most_robust()
    }
}

/// Packet framing options that influence time-on-air.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Framing {
    pub preamble_symbols: u32,
    pub explicit_header: bool,
    pub crc_on: bool,
}

impl Default for Framing {
    fn default() -> Self {
        Framing {
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
        }
    }
}

/// Number of payload symbols, header included.
pub fn payload_symbols(s: &TransmitterSettings, framing: &Framing) -> u32 {
    let sf = i64::from(s.sf);
    let de = i64::from(s.low_data_rate_optimize());
    let crc = if framing.crc_on { 16 } else { 0 };
    let implicit = if framing.explicit_header { 0 } else { 20 };
    let numerator = 8 * i64::from(s.payload_bytes) - 4 * sf + 28 + crc - implicit;
    let denominator = 4 * (sf - 2 * de);
    // ceil for a positive denominator; negative numerators clamp to zero below
    let blocks = numerator.div_euclid(denominator) + i64::from(numerator.rem_euclid(denominator) != 0);
    8 + (blocks * (i64::from(s.cr) + 4)).max(0) as u32
}

/// Time-on-air of one packet in ms.
pub fn airtime_ms(s: &TransmitterSettings, framing: &Framing) -> Result<f64> {
    s.validate()?;
    if framing.preamble_symbols < 6 {
        return Err(SimError::invalid(
            "preamble_symbols",
            format!("{} preamble symbols, need at least 6", framing.preamble_symbols),
        ));
    }
    let t_sym = s.symbol_time_ms();
    let preamble = (f64::from(framing.preamble_symbols) + 4.25) * t_sym;
    Ok(preamble + f64::from(payload_symbols(s, framing)) * t_sym)
}

#[derive(Deserialize)]
struct SensitivityFile {
    sensitivity: Vec<SensitivityRow>,
}

/// One `(sf, bw_hz, sensitivity_dbm)` row as it appears in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityRow {
    pub sf: u8,
    pub bw_hz: u32,
    pub sensitivity_dbm: f64,
}

const DEFAULT_SENSITIVITY: &str = include_str!("../config/sensitivity.toml");

/// Receiver sensitivity per (SF, BW) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    entries: BTreeMap<(u8, u32), f64>,
}

impl SensitivityTable {
    pub fn from_rows(rows: &[SensitivityRow]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for row in rows {
            if !(6..=12).contains(&row.sf) {
                return Err(SimError::invalid(
                    "sensitivity_table",
                    format!("sf {} out of range 6..12", row.sf),
                ));
            }
            if !BANDWIDTHS_HZ.contains(&row.bw_hz) {
                return Err(SimError::invalid(
                    "sensitivity_table",
                    format!("bw {} not a supported bandwidth", row.bw_hz),
                ));
            }
            if !(row.sensitivity_dbm.is_finite() && row.sensitivity_dbm < 0.0) {
                return Err(SimError::invalid(
                    "sensitivity_table",
                    format!(
                        "sensitivity {} for sf {} bw {} must be negative",
                        row.sensitivity_dbm, row.sf, row.bw_hz
                    ),
                ));
            }
            if entries
                .insert((row.sf, row.bw_hz), row.sensitivity_dbm)
                .is_some()
            {
                return Err(SimError::invalid(
                    "sensitivity_table",
                    format!("duplicate entry for sf {} bw {}", row.sf, row.bw_hz),
                ));
            }
        }
        Ok(SensitivityTable { entries })
    }

    /// Default table covering SF7..12 at all three bandwidths.
    pub fn builtin() -> Self {
        let file: SensitivityFile =
            toml::from_str(DEFAULT_SENSITIVITY).expect("bundled sensitivity table parses");
        Self::from_rows(&file.sensitivity).expect("bundled sensitivity table is valid")
    }

    pub fn get(&self, sf: u8, bw_hz: u32) -> Result<f64> {
        self.entries.get(&(sf, bw_hz)).copied().ok_or_else(|| {
            SimError::Config(format!("no sensitivity entry for sf {sf} bw {bw_hz}"))
        })
    }

    /// Overrides or adds entries from `rows`.
    pub fn merge(&mut self, rows: &[SensitivityRow]) -> Result<()> {
        let extra = Self::from_rows(rows)?;
        self.entries.extend(extra.entries);
        Ok(())
    }

    pub fn rows(&self) -> impl Iterator<Item = SensitivityRow> + '_ {
        self.entries
            .iter()
            .map(|(&(sf, bw_hz), &sensitivity_dbm)| SensitivityRow {
                sf,
                bw_hz,
                sensitivity_dbm,
            })
    }
}

impl Default for SensitivityTable {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Looks up the sensitivity for the given pair.
pub fn sensitivity(table: &SensitivityTable, sf: u8, bw_hz: u32) -> Result<f64> {
    table.get(sf, bw_hz)
}
