//! Experiment configuration files.
//!
//! The file is TOML. Every section and key is optional; omitted values take
//! the defaults of a single 200-node network with the most robust radio
//! settings and no interferers. Unknown keys are rejected.
//!
//! ```toml
//! [sim]
//! duration_ms = 1.0e8
//! seeds = [1, 2, 3, 4, 5]
//!
//! [network]
//! nodes = 200
//! radius_m = 99.0
//! bs_count = 1
//! bs_spacing_m = 0.0
//! antenna = "omni"            # omni | spida | spida2x | custom:g0/g1/g2/g3/g4/g5
//!
//! [radio]
//! tp_dbm = 14.0
//! cf_hz = 868.0e6
//! sf = 12
//! bw_hz = 125000
//! cr = 4
//! lambda_ms = 1.0e6
//! payload_bytes = 20
//!
//! [interference]
//! count = 4
//! distance_m = 99.0
//! # positions = [[99.0, 0.0], [0.0, 99.0]]   overrides count/distance
//!
//! [model]
//! pl_d0_db = 127.41
//! d0_m = 40.0
//! gamma = 2.08
//! sigma_db = 0.0
//! capture_db = 6.0
//! sensitivity_table = [{ sf = 12, bw_hz = 125000, sensitivity_dbm = -133.25 }]
//!
//! [sweep]
//! variable = "interferer_distance"
//! values = [0, 50, 100, 150, 200]
//! replications = 5
//! series_variable = "node_count"
//! series_values = [200, 500]
//! ```

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::SimError;
use crate::propagation::Position;
use crate::radio::{SensitivityRow, TransmitterSettings};
use crate::scenario::{AntennaSelector, Layout, Scenario};

/// Errors from loading a configuration file.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Invalid(#[from] SimError),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    network: RawNetwork,
    #[serde(default)]
    radio: RawRadio,
    #[serde(default)]
    interference: RawInterference,
    #[serde(default)]
    model: RawModel,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    duration_ms: Option<f64>,
    seeds: Option<Vec<u64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    nodes: Option<usize>,
    radius_m: Option<f64>,
    bs_count: Option<usize>,
    bs_spacing_m: Option<f64>,
    antenna: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRadio {
    tp_dbm: Option<f64>,
    cf_hz: Option<f64>,
    sf: Option<u8>,
    bw_hz: Option<u32>,
    cr: Option<u8>,
    lambda_ms: Option<f64>,
    payload_bytes: Option<u32>,
    preamble_symbols: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInterference {
    count: Option<usize>,
    distance_m: Option<f64>,
    positions: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    pl_d0_db: Option<f64>,
    d0_m: Option<f64>,
    gamma: Option<f64>,
    sigma_db: Option<f64>,
    capture_db: Option<f64>,
    freq_sep_125k_hz: Option<f64>,
    freq_sep_250k_hz: Option<f64>,
    freq_sep_500k_hz: Option<f64>,
    demod_slots: Option<usize>,
    sensitivity_table: Option<Vec<SensitivityRow>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: String,
    values: Vec<SweepValue>,
    replications: Option<usize>,
    series_variable: Option<String>,
    series_values: Option<Vec<SweepValue>>,
}

/// A sweep coordinate: numeric for most variables, text for antennas.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Number(v) => write!(f, "{v}"),
            SweepValue::Text(s) => f.write_str(s),
        }
    }
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    InterfererDistance,
    NodeCount,
    InterfererCount,
    BsCount,
    BsSpacing,
    Antenna,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 6] = [
        SweepVariable::InterfererDistance,
        SweepVariable::NodeCount,
        SweepVariable::InterfererCount,
        SweepVariable::BsCount,
        SweepVariable::BsSpacing,
        SweepVariable::Antenna,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::InterfererDistance => "interferer_distance",
            SweepVariable::NodeCount => "node_count",
            SweepVariable::InterfererCount => "interferer_count",
            SweepVariable::BsCount => "bs_count",
            SweepVariable::BsSpacing => "bs_spacing",
            SweepVariable::Antenna => "antenna",
        }
    }

    pub fn parse(s: &str) -> Result<Self, SimError> {
        Self::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|v| v.name()).collect();
            SimError::invalid(
                "sweep.variable",
                format!("unknown sweep variable {s:?}; expected one of {}", names.join(", ")),
            )
        })
    }

    /// Applies `value` to `layout`.
    pub fn apply(&self, layout: &mut Layout, value: &SweepValue) -> Result<(), SimError> {
        let field = "sweep.values";
        let number = || match value {
            SweepValue::Number(v) if v.is_finite() => Ok(*v),
            other => Err(SimError::invalid(
                field,
                format!("{} needs numeric values, got {other:?}", self.name()),
            )),
        };
        let count = || {
            let v = number()?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(SimError::invalid(
                    field,
                    format!("{} needs non-negative integers, got {v}", self.name()),
                ));
            }
            Ok(v as usize)
        };
        match self {
            SweepVariable::InterfererDistance => layout.interferer_distance_m = number()?,
            SweepVariable::NodeCount => layout.nodes = count()?,
            SweepVariable::InterfererCount => layout.interferer_count = count()?,
            SweepVariable::BsCount => layout.bs_count = count()?,
            SweepVariable::BsSpacing => layout.bs_spacing_m = number()?,
            SweepVariable::Antenna => {
                layout.antenna = match value {
                    SweepValue::Text(s) => AntennaSelector::parse(s)?,
                    other => {
                        return Err(SimError::invalid(
                            field,
                            format!("antenna needs names, got {other:?}"),
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

/// A parameter sweep: every value (times every series value) is run once per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<SweepValue>,
    pub series: Option<(SweepVariable, Vec<SweepValue>)>,
    pub replications: usize,
}

/// Model constants that are not part of the deployment layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOverrides {
    raw: Vec<ModelKnob>,
}

#[derive(Debug, Clone, PartialEq)]
enum ModelKnob {
    PlD0(f64),
    D0(f64),
    Gamma(f64),
    Sigma(f64),
    Capture(f64),
    Sep125(f64),
    Sep250(f64),
    Sep500(f64),
    DemodSlots(usize),
    Preamble(u32),
    Sensitivity(Vec<SensitivityRow>),
}

impl ModelOverrides {
    fn apply(&self, s: &mut Scenario) -> Result<(), SimError> {
        for knob in &self.raw {
            match knob {
                ModelKnob::PlD0(v) => s.path_loss.pl_d0_db = *v,
                ModelKnob::D0(v) => s.path_loss.d0_m = *v,
                ModelKnob::Gamma(v) => s.path_loss.gamma = *v,
                ModelKnob::Sigma(v) => s.path_loss.sigma_db = *v,
                ModelKnob::Capture(v) => s.thresholds.capture_db = *v,
                ModelKnob::Sep125(v) => s.thresholds.freq_sep_125k_hz = *v,
                ModelKnob::Sep250(v) => s.thresholds.freq_sep_250k_hz = *v,
                ModelKnob::Sep500(v) => s.thresholds.freq_sep_500k_hz = *v,
                ModelKnob::DemodSlots(v) => s.demod_slots = *v,
                ModelKnob::Preamble(v) => s.framing.preamble_symbols = *v,
                ModelKnob::Sensitivity(rows) => s.sensitivity.merge(rows)?,
            }
        }
        Ok(())
    }
}

/// A loaded configuration: the base layout, model constants, seeds and sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub layout: Layout,
    pub model: ModelOverrides,
    pub duration_ms: f64,
    pub seeds: Vec<u64>,
    pub sweep: Option<SweepSpec>,
}

/// Default number of seeds per point when none are listed.
pub const DEFAULT_REPLICATIONS: usize = 5;

impl Experiment {
    /// Scenario for the base layout with model constants applied.
    pub fn scenario(&self) -> Result<Scenario, SimError> {
        self.scenario_for(&self.layout)
    }

    pub fn scenario_for(&self, layout: &Layout) -> Result<Scenario, SimError> {
        let mut s = Scenario::from_layout(layout)?;
        self.model.apply(&mut s)?;
        s.validate()?;
        Ok(s)
    }

    /// Checks every point of the sweep, not only the base layout.
    pub fn validate(&self) -> Result<(), SimError> {
        self.scenario()?;
        if let Some(sweep) = &self.sweep {
            let series = match &sweep.series {
                Some((var, vals)) => vals.iter().map(|v| Some((*var, v))).collect(),
                None => vec![None],
            };
            for s in &series {
                for value in &sweep.values {
                    let mut layout = self.layout.clone();
                    if let Some((var, sv)) = s {
                        var.apply(&mut layout, sv)?;
                    }
                    sweep.variable.apply(&mut layout, value)?;
                    self.scenario_for(&layout)?;
                }
            }
        }
        Ok(())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Experiment, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text).map_err(|e| match e {
        ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<Experiment, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let defaults = TransmitterSettings::most_robust();
    let r = &raw.radio;
    let settings = TransmitterSettings {
        tp_dbm: r.tp_dbm.unwrap_or(defaults.tp_dbm),
        cf_hz: r.cf_hz.unwrap_or(defaults.cf_hz),
        sf: r.sf.unwrap_or(defaults.sf),
        bw_hz: r.bw_hz.unwrap_or(defaults.bw_hz),
        cr: r.cr.unwrap_or(defaults.cr),
        lambda_ms: r.lambda_ms.unwrap_or(defaults.lambda_ms),
        payload_bytes: r.payload_bytes.unwrap_or(defaults.payload_bytes),
    };
    settings.validate()?;

    let base = Layout::default();
    let n = &raw.network;
    let i = &raw.interference;
    let interferer_positions = i
        .positions
        .as_ref()
        .map(|ps| ps.iter().map(|[x, y]| Position::new(*x, *y)).collect::<Vec<_>>());
    let layout = Layout {
        nodes: n.nodes.unwrap_or(base.nodes),
        radius_m: n.radius_m.unwrap_or(base.radius_m),
        bs_count: n.bs_count.unwrap_or(base.bs_count),
        bs_spacing_m: n.bs_spacing_m.unwrap_or(base.bs_spacing_m),
        antenna: match &n.antenna {
            Some(a) => AntennaSelector::parse(a)?,
            None => base.antenna,
        },
        interferer_count: interferer_positions
            .as_ref()
            .map_or(i.count.unwrap_or(base.interferer_count), Vec::len),
        interferer_distance_m: i.distance_m.unwrap_or(base.interferer_distance_m),
        interferer_positions,
        settings,
    };
    if let (Some(c), Some(p)) = (i.count, &i.positions) {
        if c != p.len() {
            return Err(SimError::invalid(
                "interference.count",
                format!("count {c} disagrees with {} listed positions", p.len()),
            )
            .into());
        }
    }

    let m = raw.model;
    let mut knobs = Vec::new();
    type FloatKnob = (Option<f64>, fn(f64) -> ModelKnob);
    let float_knobs: [FloatKnob; 8] = [
        (m.pl_d0_db, ModelKnob::PlD0),
        (m.d0_m, ModelKnob::D0),
        (m.gamma, ModelKnob::Gamma),
        (m.sigma_db, ModelKnob::Sigma),
        (m.capture_db, ModelKnob::Capture),
        (m.freq_sep_125k_hz, ModelKnob::Sep125),
        (m.freq_sep_250k_hz, ModelKnob::Sep250),
        (m.freq_sep_500k_hz, ModelKnob::Sep500),
    ];
    for (value, knob) in float_knobs {
        if let Some(v) = value {
            knobs.push(knob(v));
        }
    }
    if let Some(v) = m.demod_slots {
        knobs.push(ModelKnob::DemodSlots(v));
    }
    if let Some(v) = r.preamble_symbols {
        knobs.push(ModelKnob::Preamble(v));
    }
    if let Some(rows) = m.sensitivity_table {
        knobs.push(ModelKnob::Sensitivity(rows));
    }

    let sweep = match raw.sweep {
        None => None,
        Some(s) => {
            let variable = SweepVariable::parse(&s.variable)?;
            if s.values.is_empty() {
                return Err(SimError::invalid("sweep.values", "must not be empty").into());
            }
            let series = match (s.series_variable, s.series_values) {
                (None, None) => None,
                (Some(var), Some(vals)) => {
                    let var = SweepVariable::parse(&var)?;
                    if var == variable {
                        return Err(SimError::invalid(
                            "sweep.series_variable",
                            "must differ from sweep.variable",
                        )
                        .into());
                    }
                    if vals.is_empty() {
                        return Err(SimError::invalid("sweep.series_values", "must not be empty").into());
                    }
                    Some((var, vals))
                }
                _ => {
                    return Err(SimError::invalid(
                        "sweep.series_variable",
                        "series_variable and series_values must be given together",
                    )
                    .into())
                }
            };
            let replications = s.replications.unwrap_or(DEFAULT_REPLICATIONS);
            if replications == 0 {
                return Err(SimError::invalid("sweep.replications", "must be at least 1").into());
            }
            Some(SweepSpec {
                variable,
                values: s.values,
                series,
                replications,
            })
        }
    };

    let seeds = match raw.sim.seeds {
        Some(seeds) if seeds.is_empty() => {
            return Err(SimError::invalid("sim.seeds", "must not be empty").into())
        }
        Some(seeds) => seeds,
        None => {
            let reps = sweep.as_ref().map_or(DEFAULT_REPLICATIONS, |s| s.replications);
            (1..=reps as u64).collect()
        }
    };
    let duration_ms = raw.sim.duration_ms.unwrap_or(crate::engine::DEFAULT_DURATION_MS);
    if !(duration_ms.is_finite() && duration_ms > 0.0) {
        return Err(SimError::invalid("sim.duration_ms", "must be positive").into());
    }

    let experiment = Experiment {
        layout,
        model: ModelOverrides { raw: knobs },
        duration_ms,
        seeds,
        sweep,
    };
    experiment.validate()?;
    Ok(experiment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let e = parse_config("").unwrap();
        assert_eq!(e.layout, Layout::default());
        assert_eq!(e.layout.settings, TransmitterSettings::most_robust());
        assert_eq!(e.layout.nodes, 200);
        assert_eq!(e.layout.radius_m, 99.0);
        assert_eq!(e.layout.interferer_count, 0);
        assert_eq!(e.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(e.duration_ms, 1.0e8);
        assert!(e.sweep.is_none());
        assert_eq!(e.scenario().unwrap(), Scenario::from_layout(&Layout::default()).unwrap());
    }

    #[test]
    fn out_of_range_sf_is_named() {
        let err = parse_config("[radio]\nsf = 13\n").unwrap_err();
        assert!(err.to_string().contains("sf 13 out of range 6..12"), "{err}");
    }

    #[test]
    fn unknown_keys_are_errors() {
        for text in ["[radio]\nsff = 12\n", "bogus = 1\n", "[sim]\nseed = 3\n"] {
            assert!(matches!(parse_config(text), Err(ConfigError::Parse(_))), "{text}");
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_config("[network]\nnodes = 10\nradius_m = = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn model_and_sensitivity_overrides_apply() {
        let e = parse_config(
            "[model]\ngamma = 3.0\ncapture_db = 3.0\nsensitivity_table = [{ sf = 12, bw_hz = 125000, sensitivity_dbm = -140.0 }]\n",
        )
        .unwrap();
        let s = e.scenario().unwrap();
        assert_eq!(s.path_loss.gamma, 3.0);
        assert_eq!(s.thresholds.capture_db, 3.0);
        assert_eq!(s.sensitivity.get(12, 125_000).unwrap(), -140.0);
        assert_eq!(s.sensitivity.get(7, 125_000).unwrap(), -126.5);
    }

    #[test]
    fn sweep_with_series() {
        let e = parse_config(
            "[sweep]\nvariable = \"antenna\"\nvalues = [\"omni\", \"spida\"]\nseries_variable = \"node_count\"\nseries_values = [100, 200]\nreplications = 2\n",
        )
        .unwrap();
        let s = e.sweep.unwrap();
        assert_eq!(s.variable, SweepVariable::Antenna);
        assert_eq!(s.series.unwrap().0, SweepVariable::NodeCount);
        assert_eq!(e.seeds, vec![1, 2]);
    }

    #[test]
    fn bad_sweeps_rejected() {
        assert!(parse_config("[sweep]\nvariable = \"nodes\"\nvalues = [1]\n").is_err());
        assert!(parse_config("[sweep]\nvariable = \"node_count\"\nvalues = []\n").is_err());
        assert!(parse_config("[sweep]\nvariable = \"node_count\"\nvalues = [\"x\"]\n").is_err());
        assert!(parse_config("[sweep]\nvariable = \"bs_count\"\nvalues = [1, 4]\n").is_err());
        assert!(parse_config("[sweep]\nvariable = \"antenna\"\nvalues = [1]\n").is_err());
    }

    #[test]
    fn explicit_interferer_positions() {
        let e = parse_config("[interference]\npositions = [[10.0, 0.0], [0.0, -20.0]]\n").unwrap();
        let s = e.scenario().unwrap();
        assert_eq!(s.interferers.len(), 2);
        assert_eq!(s.interferers[1].center, Position::new(0.0, -20.0));
        assert!(parse_config("[interference]\ncount = 3\npositions = [[1.0, 0.0]]\n").is_err());
    }
}
