//! Log-distance path loss and sectorized antenna gains.

use std::f64::consts::{PI, TAU};

use crate::error::{Result, SimError};

/// Links shorter than this are evaluated at this distance.
pub const MIN_DISTANCE_M: f64 = 0.1;

/// A point in the 2-D deployment plane, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Azimuth of `other` as seen from `self`, radians in (-π, π].
    pub fn azimuth_to(&self, other: &Position) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Position {
        Position::new(self.x + dx, self.y + dy)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Log-distance path loss with optional log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    /// Loss at the reference distance, dB.
    pub pl_d0_db: f64,
    /// Reference distance, m.
    pub d0_m: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Shadowing standard deviation, dB.
    pub sigma_db: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            pl_d0_db: 127.41,
            d0_m: 40.0,
            gamma: 2.08,
            sigma_db: 0.0,
        }
    }
}

/// Result of a path-loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub db: f64,
    /// The link was shorter than [`MIN_DISTANCE_M`] and was clamped.
    pub clamped: bool,
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.pl_d0_db.is_finite() && self.pl_d0_db > 0.0) {
            return Err(SimError::invalid("pl_d0_db", "must be positive"));
        }
        if !(self.d0_m.is_finite() && self.d0_m > 0.0) {
            return Err(SimError::invalid("d0_m", "must be positive"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(SimError::invalid("gamma", "must be positive"));
        }
        if !(self.sigma_db.is_finite() && self.sigma_db >= 0.0) {
            return Err(SimError::invalid("sigma_db", "must be non-negative"));
        }
        Ok(())
    }

    pub fn path_loss(&self, distance_m: f64, shadow_db: f64) -> PathLoss {
        let clamped = distance_m < MIN_DISTANCE_M;
        let d = distance_m.max(MIN_DISTANCE_M);
        PathLoss {
            db: self.pl_d0_db + 10.0 * self.gamma * (d / self.d0_m).log10() + shadow_db,
            clamped,
        }
    }

    /// Largest distance at which `budget_db` of loss is not exceeded (no shadowing).
    pub fn max_range_m(&self, budget_db: f64) -> f64 {
        self.d0_m * 10f64.powf((budget_db - self.pl_d0_db) / (10.0 * self.gamma))
    }
}

/// Gains of the switchable six-element directional antenna, main lobe first,
/// then counter-clockwise in 60° steps.
pub const SPIDA_GAINS_DBI: [f64; 6] = [4.0, 4.0, -4.0, -3.0, -4.0, 4.0];

/// Radiation pattern of a node antenna.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AntennaKind {
    Omni,
    /// Six 60° sectors; index 0 is centred on the main lobe.
    Sectorized([f64; 6]),
}

impl AntennaKind {
    pub fn spida() -> Self {
        AntennaKind::Sectorized(SPIDA_GAINS_DBI)
    }

    pub fn spida_doubled() -> Self {
        AntennaKind::Sectorized(SPIDA_GAINS_DBI.map(|g| 2.0 * g))
    }

    pub fn is_directional(&self) -> bool {
        matches!(self, AntennaKind::Sectorized(_))
    }
}

/// Antenna pattern plus the azimuth its main lobe points at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern {
    pub kind: AntennaKind,
    pub orientation_rad: f64,
}

impl AntennaPattern {
    pub fn omni() -> Self {
        AntennaPattern {
            kind: AntennaKind::Omni,
            orientation_rad: 0.0,
        }
    }

    pub fn new(kind: AntennaKind, orientation_rad: f64) -> Self {
        AntennaPattern {
            kind,
            orientation_rad,
        }
    }

    /// Sector index for a departure azimuth, or `None` for an omni pattern.
    pub fn sector_for(&self, azimuth_rad: f64) -> Option<usize> {
        match self.kind {
            AntennaKind::Omni => None,
            AntennaKind::Sectorized(_) => {
                let delta = (azimuth_rad - self.orientation_rad).rem_euclid(TAU);
                Some(((delta / (PI / 3.0)).round() as usize) % 6)
            }
        }
    }
}

/// Gain of `pattern` in the direction from `tx` towards `rx`.
pub fn antenna_gain(pattern: &AntennaPattern, tx: &Position, rx: &Position) -> Result<f64> {
    if tx == rx {
        return Err(SimError::Geometry(format!(
            "transmitter and receiver both at ({}, {})",
            tx.x, tx.y
        )));
    }
    Ok(match pattern.kind {
        AntennaKind::Omni => 0.0,
        AntennaKind::Sectorized(gains) => {
            let sector = pattern
                .sector_for(tx.azimuth_to(rx))
                .expect("sectorized pattern has sectors");
            gains[sector]
        }
    })
}

/// Received power in dBm.
pub fn received_power(
    tp_dbm: f64,
    pattern: &AntennaPattern,
    tx: &Position,
    rx: &Position,
    model: &PathLossModel,
    shadow_db: f64,
) -> Result<f64> {
    let gain = antenna_gain(pattern, tx, rx)?;
    let loss = model.path_loss(tx.distance_to(rx), shadow_db);
    Ok(tp_dbm + gain - loss.db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn loss_at_reference_distance() {
        let m = PathLossModel::default();
        assert_eq!(m.path_loss(40.0, 0.0).db, 127.41);
    }

    #[test]
    fn loss_hand_evaluated() {
        let m = PathLossModel::default();
        // 127.41 + 20.8 * log10(99 / 40) = 127.41 + 20.8 * 0.393575
        assert_abs_diff_eq!(m.path_loss(99.0, 0.0).db, 135.5964, epsilon = 1e-3);
        // 127.41 + 20.8 * log10(5) = 127.41 + 20.8 * 0.698970
        assert_abs_diff_eq!(m.path_loss(200.0, 0.0).db, 141.9487, epsilon = 1e-3);
        assert_abs_diff_eq!(m.path_loss(99.0, 2.5).db, 138.0964, epsilon = 1e-3);
    }

    #[test]
    fn colocated_link_is_clamped() {
        let m = PathLossModel::default();
        let l = m.path_loss(0.0, 0.0);
        assert!(l.clamped && l.db.is_finite());
        assert_eq!(l.db, m.path_loss(MIN_DISTANCE_M, 0.0).db);
        assert!(!m.path_loss(MIN_DISTANCE_M, 0.0).clamped);
    }

    #[test]
    fn spida_main_and_back_lobes() {
        let p = AntennaPattern::new(AntennaKind::spida(), 0.0);
        let tx = Position::ORIGIN;
        assert_eq!(antenna_gain(&p, &tx, &Position::new(10.0, 0.0)).unwrap(), 4.0);
        assert_eq!(antenna_gain(&p, &tx, &Position::new(-10.0, 0.0)).unwrap(), -3.0);
        // 60° and -60° neighbours share the main gain, 120° sectors are weakest
        let at = |deg: f64| {
            let r = deg.to_radians();
            antenna_gain(&p, &tx, &Position::new(r.cos(), r.sin())).unwrap()
        };
        assert_eq!(at(60.0), 4.0);
        assert_eq!(at(-60.0), 4.0);
        assert_eq!(at(120.0), -4.0);
        assert_eq!(at(-120.0), -4.0);
        assert_eq!(at(29.0), 4.0);
        assert_eq!(at(150.0), -3.0);
    }

    #[test]
    fn sector_boundaries() {
        let p = AntennaPattern::new(AntennaKind::spida(), 0.0);
        assert_eq!(p.sector_for(-30f64.to_radians()), Some(0));
        assert_eq!(p.sector_for(29.999f64.to_radians()), Some(0));
        assert_eq!(p.sector_for(30f64.to_radians()), Some(1));
        assert_eq!(AntennaPattern::omni().sector_for(1.0), None);
    }

    #[test]
    fn omni_is_zero_everywhere() {
        let p = AntennaPattern::omni();
        for (x, y) in [(1.0, 0.0), (-3.0, 2.0), (0.0, -7.0)] {
            assert_eq!(antenna_gain(&p, &Position::ORIGIN, &Position::new(x, y)).unwrap(), 0.0);
        }
    }

    #[test]
    fn identical_positions_error() {
        let p = AntennaPattern::omni();
        let a = Position::new(1.0, 1.0);
        assert!(matches!(antenna_gain(&p, &a, &a), Err(SimError::Geometry(_))));
    }

    #[test]
    fn doubled_pattern_is_twice_spida() {
        match AntennaKind::spida_doubled() {
            AntennaKind::Sectorized(g) => {
                assert_eq!(g, [8.0, 8.0, -8.0, -6.0, -8.0, 8.0]);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn received_power_examples() {
        let m = PathLossModel::default();
        let tx = Position::new(99.0, 0.0);
        let rx = Position::ORIGIN;
        let omni = received_power(14.0, &AntennaPattern::omni(), &tx, &rx, &m, 0.0).unwrap();
        assert_abs_diff_eq!(omni, -121.60, epsilon = 0.01);
        let toward = tx.azimuth_to(&rx);
        let spida = AntennaPattern::new(AntennaKind::spida(), toward);
        let p = received_power(14.0, &spida, &tx, &rx, &m, 0.0).unwrap();
        assert_abs_diff_eq!(p, -117.60, epsilon = 0.01);
        let doubled = AntennaPattern::new(AntennaKind::spida_doubled(), toward);
        let p = received_power(14.0, &doubled, &tx, &rx, &m, 0.0).unwrap();
        assert_abs_diff_eq!(p, -113.60, epsilon = 0.01);
    }

    #[test]
    fn range_inverts_loss() {
        let m = PathLossModel::default();
        let r = m.max_range_m(m.path_loss(99.0, 0.0).db);
        assert_abs_diff_eq!(r, 99.0, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn received_power_monotone_in_distance(d in 0.0f64..5_000.0, extra in 0.0f64..1_000.0) {
            let m = PathLossModel::default();
            let p = AntennaPattern::omni();
            let rx = Position::ORIGIN;
            let near = received_power(14.0, &p, &Position::new(d + 1e-3, 0.0), &rx, &m, 0.0).unwrap();
            let far = received_power(14.0, &p, &Position::new(d + 1e-3 + extra, 0.0), &rx, &m, 0.0).unwrap();
            prop_assert!(far <= near);
        }

        #[test]
        fn gain_is_rotation_equivariant(
            orient in -10.0f64..10.0,
            az in -10.0f64..10.0,
            rot in -10.0f64..10.0,
            r in 1.0f64..500.0,
        ) {
            let base = AntennaPattern::new(AntennaKind::spida(), orient);
            let turned = AntennaPattern::new(AntennaKind::spida(), orient + rot);
            let rx = Position::new(r * az.cos(), r * az.sin());
            let rx_turned = Position::new(r * (az + rot).cos(), r * (az + rot).sin());
            // stay clear of sector edges where rounding could flip the index
            let delta = (az - orient).rem_euclid(TAU) / (PI / 3.0);
            prop_assume!((delta - delta.floor() - 0.5).abs() > 1e-6);
            let g1 = antenna_gain(&base, &Position::ORIGIN, &rx).unwrap();
            let g2 = antenna_gain(&turned, &Position::ORIGIN, &rx_turned).unwrap();
            prop_assert_eq!(g1, g2);
        }
    }
}
