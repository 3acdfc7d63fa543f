//! Deployment construction: the measured network, the ring of interfering
//! networks around it, base-station geometries and antenna orientation.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::collision::CollisionThresholds;
use crate::error::{Result, SimError};
use crate::propagation::{AntennaKind, AntennaPattern, PathLossModel, Position};
use crate::radio::{Framing, SensitivityTable, TransmitterSettings};
use crate::rng::{stream, StreamTag};

/// Antenna fitted to every node of a network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AntennaSelector {
    Omni,
    Spida,
    /// Every gain of the SPIDA pattern doubled (8 dBi main lobe).
    Spida2x,
    Custom([f64; 6]),
}

impl AntennaSelector {
    pub fn kind(&self) -> AntennaKind {
        match self {
            AntennaSelector::Omni => AntennaKind::Omni,
            AntennaSelector::Spida => AntennaKind::spida(),
            AntennaSelector::Spida2x => AntennaKind::spida_doubled(),
            AntennaSelector::Custom(g) => AntennaKind::Sectorized(*g),
        }
    }

    pub fn label(&self) -> String {
        match self {
            AntennaSelector::Omni => "omni".into(),
            AntennaSelector::Spida => "spida".into(),
            AntennaSelector::Spida2x => "spida2x".into(),
            AntennaSelector::Custom(g) => {
                let parts: Vec<String> = g.iter().map(|v| format!("{v}")).collect();
                format!("custom:{}", parts.join("/"))
            }
        }
    }

    /// Parses `omni`, `spida`, `spida2x` or `custom:g0/g1/g2/g3/g4/g5`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "omni" => Ok(AntennaSelector::Omni),
            "spida" => Ok(AntennaSelector::Spida),
            "spida2x" => Ok(AntennaSelector::Spida2x),
            other => {
                let gains = other.strip_prefix("custom:").ok_or_else(|| {
                    SimError::invalid(
                        "antenna",
                        format!("unknown antenna {other:?}; expected omni, spida, spida2x or custom:g0/../g5"),
                    )
                })?;
                let parsed: std::result::Result<Vec<f64>, _> =
                    gains.split('/').map(|g| g.trim().parse::<f64>()).collect();
                match parsed {
                    Ok(v) if v.len() == 6 && v.iter().all(|g| g.is_finite()) => {
                        Ok(AntennaSelector::Custom([v[0], v[1], v[2], v[3], v[4], v[5]]))
                    }
                    _ => Err(SimError::invalid(
                        "antenna",
                        format!("custom pattern {gains:?} must list exactly 6 finite gains"),
                    )),
                }
            }
        }
    }
}

/// One LoRa network: nodes scattered in a disc around `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub nodes: usize,
    pub radius_m: f64,
    pub center: Position,
    pub stations: Vec<Position>,
    pub settings: TransmitterSettings,
    pub antenna: AntennaSelector,
}

impl NetworkSpec {
    fn validate(&self, interfered: bool) -> Result<()> {
        if self.nodes < 1 {
            return Err(SimError::invalid("nodes", "a network needs at least one node"));
        }
        if !(self.radius_m.is_finite() && self.radius_m > 0.0) {
            return Err(SimError::invalid("radius_m", "must be positive"));
        }
        if !self.center.is_finite() || !self.stations.iter().all(Position::is_finite) {
            return Err(SimError::invalid("position", "coordinates must be finite"));
        }
        let max_stations = if interfered { 3 } else { 1 };
        if self.stations.is_empty() || self.stations.len() > max_stations {
            return Err(SimError::invalid(
                "bs_count",
                format!("{} stations, expected 1..={max_stations}", self.stations.len()),
            ));
        }
        self.settings.validate()
    }
}

/// Everything needed to simulate one configuration point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub interfered: NetworkSpec,
    pub interferers: Vec<NetworkSpec>,
    pub path_loss: PathLossModel,
    pub thresholds: CollisionThresholds,
    pub sensitivity: SensitivityTable,
    pub framing: Framing,
    /// Concurrent receptions each base station can track.
    pub demod_slots: usize,
}

/// Parameters of the standard experiment layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub nodes: usize,
    pub radius_m: f64,
    pub bs_count: usize,
    pub bs_spacing_m: f64,
    pub antenna: AntennaSelector,
    pub interferer_count: usize,
    pub interferer_distance_m: f64,
    /// Overrides the ring placement of interfering networks when set.
    pub interferer_positions: Option<Vec<Position>>,
    pub settings: TransmitterSettings,
}

impl Default for Layout {
    fn default() -> Self {
        Layout {
            nodes: 200,
            radius_m: 99.0,
            bs_count: 1,
            bs_spacing_m: 0.0,
            antenna: AntennaSelector::Omni,
            interferer_count: 0,
            interferer_distance_m: 99.0,
            interferer_positions: None,
            settings: TransmitterSettings::most_robust(),
        }
    }
}

impl Scenario {
    /// Builds the measured network at the origin with `layout.interferer_count`
    /// single-station omni networks of the same size around it.
    pub fn from_layout(layout: &Layout) -> Result<Self> {
        let center = Position::ORIGIN;
        let stations = multi_bs_positions(center, layout.bs_count, layout.bs_spacing_m)?;
        if !(layout.interferer_distance_m.is_finite() && layout.interferer_distance_m >= 0.0) {
            return Err(SimError::invalid("interference.distance_m", "must be non-negative"));
        }
        let centers = match &layout.interferer_positions {
            Some(explicit) => explicit.clone(),
            None => interferer_centers(center, layout.interferer_count, layout.interferer_distance_m),
        };
        let interfered = NetworkSpec {
            nodes: layout.nodes,
            radius_m: layout.radius_m,
            center,
            stations,
            settings: layout.settings,
            antenna: layout.antenna,
        };
        let interferers = centers
            .into_iter()
            .map(|c| NetworkSpec {
                center: c,
                stations: vec![c],
                antenna: AntennaSelector::Omni,
                ..interfered.clone()
            })
            .collect();
        let scenario = Scenario {
            interfered,
            interferers,
            path_loss: PathLossModel::default(),
            thresholds: CollisionThresholds::default(),
            sensitivity: SensitivityTable::default(),
            framing: Framing::default(),
            demod_slots: 8,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.interfered.validate(true)?;
        for net in &self.interferers {
            net.validate(false)?;
        }
        self.path_loss.validate()?;
        self.thresholds.validate()?;
        if self.demod_slots == 0 {
            return Err(SimError::invalid("demod_slots", "must be at least 1"));
        }
        for net in self.networks() {
            self.check_reachability(net)?;
            crate::radio::airtime_ms(&net.settings, &self.framing)?;
        }
        Ok(())
    }

    /// All networks; index 0 is the measured network.
    pub fn networks(&self) -> impl Iterator<Item = &NetworkSpec> {
        std::iter::once(&self.interfered).chain(self.interferers.iter())
    }

    /// Places nodes and orients antennas. Pure function of `(self, seed)`.
    pub fn deploy(&self, seed: u64) -> Result<Deployment> {
        self.validate()?;
        let mut networks = Vec::new();
        for (id, spec) in self.networks().enumerate() {
            let mut rng = stream(seed, StreamTag::Placement, id as u64);
            let positions = place_nodes(&mut rng, spec.center, spec.radius_m, spec.nodes);
            let kind = spec.antenna.kind();
            let orientations = orient_antennas(&positions, &spec.stations, kind);
            let nodes = positions
                .into_iter()
                .zip(orientations)
                .map(|(position, orientation)| NodeSite {
                    position,
                    antenna: AntennaPattern::new(kind, orientation.unwrap_or(0.0)),
                })
                .collect();
            networks.push(DeployedNetwork {
                id,
                center: spec.center,
                stations: spec.stations.clone(),
                settings: spec.settings,
                nodes,
            });
        }
        Ok(Deployment { networks })
    }

    /// Every node must be able to reach its network's deployment centre at zero
    /// load, i.e. the deployment radius is within radio range.
    fn check_reachability(&self, net: &NetworkSpec) -> Result<()> {
        let sens = self.sensitivity.get(net.settings.sf, net.settings.bw_hz)?;
        let p = net.settings.tp_dbm - self.path_loss.path_loss(net.radius_m, 0.0).db;
        if p < sens {
            return Err(SimError::invalid(
                "radius_m",
                format!(
                    "a node {:.1} m from its deployment centre cannot reach it ({p:.2} dBm < {sens:.2} dBm)",
                    net.radius_m
                ),
            ));
        }
        Ok(())
    }
}

/// A placed node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSite {
    pub position: Position,
    pub antenna: AntennaPattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeployedNetwork {
    pub id: usize,
    pub center: Position,
    pub stations: Vec<Position>,
    pub settings: TransmitterSettings,
    pub nodes: Vec<NodeSite>,
}

/// Concrete node positions and orientations for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub networks: Vec<DeployedNetwork>,
}

impl Deployment {
    /// Writes `network,node,x,y,orientation_rad` rows.
    pub fn write_placement_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["network", "node", "x", "y", "orientation_rad"])?;
        for net in &self.networks {
            for (i, node) in net.nodes.iter().enumerate() {
                w.write_record([
                    net.id.to_string(),
                    i.to_string(),
                    format!("{:.6}", node.position.x),
                    format!("{:.6}", node.position.y),
                    format!("{:.6}", node.antenna.orientation_rad),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `count` points drawn uniformly over the disc of radius `radius` around `center`.
pub fn place_nodes(rng: &mut ChaCha8Rng, center: Position, radius: f64, count: usize) -> Vec<Position> {
    (0..count)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = TAU * rng.random::<f64>();
            center.offset(r * theta.cos(), r * theta.sin())
        })
        .collect()
}

/// `count` points evenly spaced on a circle of radius `distance`, starting on +x.
pub fn interferer_centers(center: Position, count: usize, distance: f64) -> Vec<Position> {
    (0..count)
        .map(|i| {
            let a = TAU * i as f64 / count as f64;
            center.offset(distance * a.cos(), distance * a.sin())
        })
        .collect()
}

/// Base-station positions replacing a single station at `center`.
///
/// Two stations sit `spacing` to the right and left; three sit one above and
/// two at 45° below-left and below-right, all `spacing` from `center`.
pub fn multi_bs_positions(center: Position, count: usize, spacing: f64) -> Result<Vec<Position>> {
    if !(spacing.is_finite() && spacing >= 0.0) {
        return Err(SimError::invalid("bs_spacing_m", "must be non-negative"));
    }
    let diag = spacing * FRAC_1_SQRT_2;
    match count {
        1 => Ok(vec![center]),
        2 => Ok(vec![center.offset(spacing, 0.0), center.offset(-spacing, 0.0)]),
        3 => Ok(vec![
            center.offset(0.0, spacing),
            center.offset(-diag, -diag),
            center.offset(diag, -diag),
        ]),
        n => Err(SimError::invalid(
            "bs_count",
            format!("{n} stations requested, expected 1, 2 or 3"),
        )),
    }
}

/// Main-lobe azimuth for each node, aimed at its nearest station (ties go to
/// the lowest index). Omni patterns get `None`.
pub fn orient_antennas(nodes: &[Position], stations: &[Position], kind: AntennaKind) -> Vec<Option<f64>> {
    nodes
        .iter()
        .map(|node| {
            if !kind.is_directional() {
                return None;
            }
            let target = stations
                .iter()
                .enumerate()
                .min_by(|(ia, a), (ib, b)| {
                    node.distance_to(a)
                        .total_cmp(&node.distance_to(b))
                        .then(ia.cmp(ib))
                })
                .map(|(_, s)| s)?;
            Some(node.azimuth_to(target))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn disc_sampling_statistics() {
        let mut rng = stream(7, StreamTag::Placement, 0);
        let pts = place_nodes(&mut rng, Position::ORIGIN, 99.0, 100_000);
        assert!(pts.iter().all(|p| p.distance_to(&Position::ORIGIN) <= 99.0));
        let mean = pts.iter().map(|p| p.distance_to(&Position::ORIGIN)).sum::<f64>() / pts.len() as f64;
        assert!((mean - 66.0).abs() < 0.66, "mean {mean}");
        let mut again = stream(7, StreamTag::Placement, 0);
        assert_eq!(pts[..10], place_nodes(&mut again, Position::ORIGIN, 99.0, 10)[..]);
    }

    #[test]
    fn four_interferers_on_axes() {
        let c = interferer_centers(Position::ORIGIN, 4, 99.0);
        let expect = [(99.0, 0.0), (0.0, 99.0), (-99.0, 0.0), (0.0, -99.0)];
        for (p, (x, y)) in c.iter().zip(expect) {
            assert_abs_diff_eq!(p.x, x, epsilon = 1e-9);
            assert_abs_diff_eq!(p.y, y, epsilon = 1e-9);
        }
        assert!(interferer_centers(Position::ORIGIN, 0, 99.0).is_empty());
        assert_eq!(interferer_centers(Position::ORIGIN, 1, 0.0), vec![Position::ORIGIN]);
    }

    #[test]
    fn station_geometries() {
        let three = multi_bs_positions(Position::ORIGIN, 3, 50.0).unwrap();
        let expect = [(0.0, 50.0), (-35.36, -35.36), (35.36, -35.36)];
        for (p, (x, y)) in three.iter().zip(expect) {
            assert_abs_diff_eq!(p.x, x, epsilon = 0.01);
            assert_abs_diff_eq!(p.y, y, epsilon = 0.01);
            assert_abs_diff_eq!(p.distance_to(&Position::ORIGIN), 50.0, epsilon = 1e-9);
        }
        assert_eq!(
            multi_bs_positions(Position::ORIGIN, 2, 0.0).unwrap(),
            vec![Position::ORIGIN, Position::ORIGIN]
        );
        let c = Position::new(3.0, 4.0);
        assert_eq!(multi_bs_positions(c, 1, 70.0).unwrap(), vec![c]);
        assert!(multi_bs_positions(c, 4, 1.0).is_err());
        assert!(multi_bs_positions(c, 0, 1.0).is_err());
    }

    #[test]
    fn antennas_point_at_nearest_station() {
        let o = orient_antennas(&[Position::new(50.0, 0.0)], &[Position::ORIGIN], AntennaKind::spida());
        assert_abs_diff_eq!(o[0].unwrap(), PI, epsilon = 1e-12);
        let stations = [Position::new(10.0, 0.0), Position::new(-10.0, 0.0)];
        let o = orient_antennas(&[Position::new(0.0, 5.0)], &stations, AntennaKind::spida());
        assert_abs_diff_eq!(o[0].unwrap(), Position::new(0.0, 5.0).azimuth_to(&stations[0]));
        let o = orient_antennas(&[Position::new(0.0, 5.0)], &stations, AntennaKind::Omni);
        assert_eq!(o, vec![None]);
    }

    #[test]
    fn antenna_selector_parsing() {
        assert_eq!(AntennaSelector::parse("spida2x").unwrap(), AntennaSelector::Spida2x);
        let c = AntennaSelector::parse("custom:4/4/0/1/0/4").unwrap();
        assert_eq!(c, AntennaSelector::Custom([4.0, 4.0, 0.0, 1.0, 0.0, 4.0]));
        assert_eq!(AntennaSelector::parse(&c.label()).unwrap(), c);
        assert!(AntennaSelector::parse("custom:1/2").is_err());
        assert!(AntennaSelector::parse("yagi").is_err());
    }

    #[test]
    fn deployment_is_pure_in_seed() {
        let layout = Layout { interferer_count: 4, antenna: AntennaSelector::Spida, ..Layout::default() };
        let s = Scenario::from_layout(&layout).unwrap();
        assert_eq!(s.deploy(11).unwrap(), s.deploy(11).unwrap());
        assert_ne!(s.deploy(11).unwrap(), s.deploy(12).unwrap());
    }

    #[test]
    fn default_layout_reaches_centre() {
        let s = Scenario::from_layout(&Layout::default()).unwrap();
        let d = s.deploy(3).unwrap();
        let sens = s.sensitivity.get(12, 125_000).unwrap();
        for node in &d.networks[0].nodes {
            let p = 14.0 - s.path_loss.path_loss(node.position.distance_to(&Position::ORIGIN), 0.0).db;
            assert!(p >= sens);
        }
    }

    #[test]
    fn oversized_radius_rejected() {
        let layout = Layout { radius_m: 5_000.0, ..Layout::default() };
        assert!(matches!(
            Scenario::from_layout(&layout),
            Err(SimError::Validation { field: "radius_m", .. })
        ));
    }

    #[test]
    fn interferers_stay_single_station_omni() {
        let layout = Layout {
            interferer_count: 3,
            bs_count: 3,
            bs_spacing_m: 40.0,
            antenna: AntennaSelector::Spida2x,
            ..Layout::default()
        };
        let s = Scenario::from_layout(&layout).unwrap();
        assert_eq!(s.interfered.stations.len(), 3);
        for net in &s.interferers {
            assert_eq!(net.stations, vec![net.center]);
            assert_eq!(net.antenna, AntennaSelector::Omni);
        }
    }
}
