//! Parameter sweeps, result tables and plot-ready aggregates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, SweepValue, SweepVariable};
use crate::engine::{RunLog, RunOptions, Simulation, Traffic};
use crate::error::{Result, SimError};
use crate::metrics::der;
use crate::scenario::{AntennaSelector, Deployment, Layout};

/// One row per (sweep point, seed, network).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_var: String,
    pub value: String,
    pub seed: u64,
    pub network: usize,
    pub sent: u64,
    pub received: u64,
    pub der: f64,
    pub lost_collision: u64,
    pub lost_no_slot: u64,
    pub lost_below_sensitivity: u64,
    pub series_var: String,
    pub series_value: String,
    pub nodes: usize,
    pub interferers: usize,
    pub distance_m: f64,
    pub bs_count: usize,
    pub bs_spacing_m: f64,
    pub antenna: String,
}

/// Mean and sample standard deviation of DER over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sweep_var: String,
    pub value: String,
    pub series_var: String,
    pub series_value: String,
    pub network: usize,
    pub runs: usize,
    pub mean_der: f64,
    pub std_der: f64,
}

/// A single simulation within a sweep: one layout and one seed.
#[derive(Debug, Clone)]
pub struct Job {
    pub sweep_var: String,
    pub value: String,
    pub series_var: String,
    pub series_value: String,
    pub layout: Layout,
    pub seed: u64,
}

impl Job {
    /// File-name friendly identifier, unique within a sweep.
    pub fn tag(&self) -> String {
        let mut parts = Vec::new();
        if !self.series_var.is_empty() {
            parts.push(format!("{}-{}", self.series_var, self.series_value));
        }
        if !self.sweep_var.is_empty() {
            parts.push(format!("{}-{}", self.sweep_var, self.value));
        }
        parts.push(format!("seed{}", self.seed));
        parts
            .join("_")
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
            .collect()
    }
}

/// What a finished job produced.
#[derive(Debug, Clone)]
pub struct JobOutput {
    pub rows: Vec<ResultRow>,
    pub deployment: Deployment,
    pub log: RunLog,
}

/// Expands the sweep into jobs ordered by (series value, sweep value, seed).
pub fn plan(exp: &Experiment) -> Result<Vec<Job>> {
    let mut out = Vec::new();
    let (var, values): (String, Vec<Option<(SweepVariable, SweepValue)>>) = match &exp.sweep {
        Some(s) => (
            s.variable.name().to_string(),
            s.values.iter().map(|v| Some((s.variable, v.clone()))).collect(),
        ),
        None => (String::new(), vec![None]),
    };
    let series: Vec<Option<(SweepVariable, SweepValue)>> = match exp.sweep.as_ref().and_then(|s| s.series.as_ref()) {
        Some((sv, vals)) => vals.iter().map(|v| Some((*sv, v.clone()))).collect(),
        None => vec![None],
    };
    for s in &series {
        for v in &values {
            let mut layout = exp.layout.clone();
            if let Some((sv, val)) = s {
                sv.apply(&mut layout, val)?;
            }
            if let Some((vv, val)) = v {
                vv.apply(&mut layout, val)?;
            }
            for &seed in &exp.seeds {
                out.push(Job {
                    sweep_var: var.clone(),
                    value: v.as_ref().map_or(String::new(), |(_, x)| x.to_string()),
                    series_var: s.as_ref().map_or(String::new(), |(sv, _)| sv.name().to_string()),
                    series_value: s.as_ref().map_or(String::new(), |(_, x)| x.to_string()),
                    layout: layout.clone(),
                    seed,
                });
            }
        }
    }
    Ok(out)
}

/// Runs every sweep point for every seed using up to `parallelism` threads.
///
/// Rows are ordered by (series value, sweep value, seed, network) as listed
/// in the configuration, independent of `parallelism`.
pub fn run_sweep(exp: &Experiment, parallelism: usize) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    run_sweep_with(exp, parallelism, RunOptions::default(), |_, out| {
        rows.extend(out.rows);
        Ok(())
    })?;
    Ok(rows)
}

/// Like [`run_sweep`], handing each job's full output to `sink` in plan order.
pub fn run_sweep_with(
    exp: &Experiment,
    parallelism: usize,
    options: RunOptions,
    mut sink: impl FnMut(&Job, JobOutput) -> Result<()>,
) -> Result<()> {
    let jobs = plan(exp)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| SimError::Config(format!("cannot start worker pool: {e}")))?;
    // Chunks bound the memory held by traces awaiting the sink.
    let chunk = (parallelism.max(1) * 4).max(1);
    for batch in jobs.chunks(chunk) {
        let outputs: Vec<Result<JobOutput>> =
            pool.install(|| batch.par_iter().map(|job| run_job(exp, job, options)).collect());
        for (job, out) in batch.iter().zip(outputs) {
            sink(job, out?)?;
        }
    }
    Ok(())
}

/// Runs a single job.
pub fn run_job(exp: &Experiment, job: &Job, options: RunOptions) -> Result<JobOutput> {
    let scenario = exp.scenario_for(&job.layout)?;
    let deployment = scenario.deploy(job.seed)?;
    let log = Simulation::from_deployment(&scenario, &deployment, job.seed, options)?
        .execute(Traffic::Poisson { duration_ms: exp.duration_ms })?;
    let rows = log
        .stats
        .iter()
        .enumerate()
        .map(|(network, s)| ResultRow {
            sweep_var: job.sweep_var.clone(),
            value: job.value.clone(),
            seed: job.seed,
            network,
            sent: s.sent,
            received: s.received,
            der: der(s).unwrap_or(f64::NAN),
            lost_collision: s.lost_collision,
            lost_no_slot: s.lost_no_slot,
            lost_below_sensitivity: s.lost_below_sensitivity,
            series_var: job.series_var.clone(),
            series_value: job.series_value.clone(),
            nodes: job.layout.nodes,
            interferers: scenario.interferers.len(),
            distance_m: job.layout.interferer_distance_m,
            bs_count: job.layout.bs_count,
            bs_spacing_m: job.layout.bs_spacing_m,
            antenna: job.layout.antenna.label(),
        })
        .collect();
    Ok(JobOutput { rows, deployment, log })
}

/// Mean and sample standard deviation; 0 spread for a single sample.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// DER statistics per (series value, sweep value, network), in first-seen order.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut order: Vec<(String, String, String, String, usize)> = Vec::new();
    let mut groups: BTreeMap<(String, String, String, String, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.series_var.clone(),
            r.series_value.clone(),
            r.sweep_var.clone(),
            r.value.clone(),
            r.network,
        );
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        entry.push(r.der);
    }
    order
        .into_iter()
        .map(|key| {
            let ders = &groups[&key];
            let (mean_der, std_der) = mean_std(ders);
            AggregateRow {
                series_var: key.0,
                series_value: key.1,
                sweep_var: key.2,
                value: key.3,
                network: key.4,
                runs: ders.len(),
                mean_der,
                std_der,
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: std::io::Read>(input: R) -> csv::Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Figures that can be reproduced from sweep results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    /// DER against interferer distance.
    Fig2,
    /// DER against interferer count, one series per node count.
    Fig3,
    /// DER against node count, one series per antenna.
    Fig4,
    /// DER against station spacing, one series per (station count, node count).
    Fig5,
    /// DER against node count for each mitigation strategy.
    Fig6,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6];

    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| SimError::invalid("figure", format!("unknown figure {s:?}; expected fig2..fig6")))
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub series: String,
    pub mean_der: f64,
    pub std_der: f64,
}

fn node_series(r: &ResultRow) -> String {
    format!("N={}", r.nodes)
}

fn is_omni(r: &ResultRow) -> bool {
    r.antenna == AntennaSelector::Omni.label()
}

/// Plot-ready DER of the measured network for `figure`.
///
/// Every combination of the observed x values and series must be present;
/// otherwise the error lists the missing points.
pub fn emit_plot_data(rows: &[ResultRow], figure: Figure) -> Result<Vec<PlotRow>> {
    let measured: Vec<&ResultRow> = rows.iter().filter(|r| r.network == 0).collect();
    // (series, x) -> per-seed DERs
    let mut points: BTreeMap<(String, OrderedX), Vec<f64>> = BTreeMap::new();
    let mut push = |series: String, x: f64, der: f64| {
        points.entry((series, OrderedX(x))).or_default().push(der);
    };
    let mut require_series: Vec<&str> = Vec::new();
    match figure {
        Figure::Fig2 => {
            for r in measured.iter().filter(|r| r.interferers > 0) {
                push(node_series(r), r.distance_m, r.der);
            }
        }
        Figure::Fig3 => {
            for r in measured.iter().filter(|r| r.bs_count == 1 && is_omni(r)) {
                push(node_series(r), r.interferers as f64, r.der);
            }
        }
        Figure::Fig4 => {
            for r in measured.iter().filter(|r| r.bs_count == 1 && r.interferers > 0) {
                push(r.antenna.clone(), r.nodes as f64, r.der);
            }
        }
        Figure::Fig5 => {
            for r in measured.iter().filter(|r| r.bs_count >= 2 && is_omni(r)) {
                push(format!("bs{}/N={}", r.bs_count, r.nodes), r.bs_spacing_m, r.der);
            }
        }
        Figure::Fig6 => {
            require_series = vec!["baseline", "directional"];
            // multi-station results keep the best spacing per (stations, nodes)
            let mut multi: BTreeMap<(usize, usize), BTreeMap<OrderedX, Vec<f64>>> = BTreeMap::new();
            for r in measured.iter().filter(|r| r.interferers > 0) {
                if r.bs_count == 1 && is_omni(r) {
                    push("baseline".into(), r.nodes as f64, r.der);
                } else if r.bs_count == 1 {
                    let label = if r.antenna == AntennaSelector::Spida.label() {
                        "directional".to_string()
                    } else {
                        format!("directional:{}", r.antenna)
                    };
                    push(label, r.nodes as f64, r.der);
                } else if is_omni(r) {
                    multi
                        .entry((r.bs_count, r.nodes))
                        .or_default()
                        .entry(OrderedX(r.bs_spacing_m))
                        .or_default()
                        .push(r.der);
                }
            }
            if multi.is_empty() {
                require_series.push("multi-station");
            }
            for ((bs, nodes), by_spacing) in multi {
                let best = by_spacing
                    .values()
                    .max_by(|a, b| mean_std(a).0.total_cmp(&mean_std(b).0))
                    .expect("non-empty spacing map");
                for &d in best {
                    push(format!("bs{bs}"), nodes as f64, d);
                }
            }
        }
    }

    let series: BTreeSet<&String> = points.keys().map(|(s, _)| s).collect();
    let xs: BTreeSet<OrderedX> = points.keys().map(|(_, x)| *x).collect();
    let mut missing: Vec<String> = require_series
        .iter()
        .filter(|s| !series.iter().any(|have| have.as_str() == **s))
        .map(|s| format!("series {s}"))
        .collect();
    if points.is_empty() || xs.len() < 2 && figure != Figure::Fig6 {
        missing.push(format!("at least two x values for {figure} (found {})", xs.len()));
    }
    for s in &series {
        for x in &xs {
            if !points.contains_key(&((*s).clone(), *x)) {
                missing.push(format!("{s} at x={}", x.0));
            }
        }
    }
    if !missing.is_empty() {
        return Err(SimError::Config(format!(
            "results do not cover {figure}: missing {}",
            missing.join("; ")
        )));
    }

    Ok(points
        .into_iter()
        .map(|((series, x), ders)| {
            let (mean_der, std_der) = mean_std(&ders);
            PlotRow {
                x: x.0,
                series,
                mean_der,
                std_der,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedX(f64);

impl Eq for OrderedX {}

impl Ord for OrderedX {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for OrderedX {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(nodes: usize, interferers: usize, distance: f64, antenna: &str, bs: usize, spacing: f64, der: f64) -> ResultRow {
        ResultRow {
            sweep_var: String::new(),
            value: String::new(),
            seed: 1,
            network: 0,
            sent: 100,
            received: (der * 100.0) as u64,
            der,
            lost_collision: 0,
            lost_no_slot: 0,
            lost_below_sensitivity: 0,
            series_var: String::new(),
            series_value: String::new(),
            nodes,
            interferers,
            distance_m: distance,
            bs_count: bs,
            bs_spacing_m: spacing,
            antenna: antenna.into(),
        }
    }

    #[test]
    fn fig4_has_one_series_per_antenna() {
        let mut rows = Vec::new();
        for n in [200, 400] {
            for a in ["omni", "spida", "spida2x"] {
                rows.push(row(n, 4, 99.0, a, 1, 0.0, 0.5));
            }
        }
        let plot = emit_plot_data(&rows, Figure::Fig4).unwrap();
        let series: BTreeSet<_> = plot.iter().map(|p| p.series.clone()).collect();
        assert_eq!(series.len(), 3);
        assert_eq!(plot.len(), 6);
    }

    #[test]
    fn fig2_needs_distance_sweep() {
        let rows = vec![row(200, 4, 99.0, "omni", 1, 0.0, 0.5), row(500, 4, 99.0, "omni", 1, 0.0, 0.4)];
        let err = emit_plot_data(&rows, Figure::Fig2).unwrap_err();
        assert!(err.to_string().contains("at least two x values"), "{err}");
        assert!(emit_plot_data(&[], Figure::Fig2).is_err());
        assert!(emit_plot_data(&[], Figure::Fig6).is_err());
    }

    #[test]
    fn missing_grid_points_are_listed() {
        let rows = vec![
            row(200, 4, 0.0, "omni", 1, 0.0, 0.1),
            row(200, 4, 100.0, "omni", 1, 0.0, 0.3),
            row(500, 4, 0.0, "omni", 1, 0.0, 0.05),
        ];
        let err = emit_plot_data(&rows, Figure::Fig2).unwrap_err();
        assert!(err.to_string().contains("N=500 at x=100"), "{err}");
    }

    #[test]
    fn fig6_picks_best_spacing() {
        let rows = vec![
            row(600, 4, 99.0, "omni", 1, 0.0, 0.2),
            row(600, 4, 99.0, "spida", 1, 0.0, 0.3),
            row(600, 4, 99.0, "omni", 3, 33.0, 0.4),
            row(600, 4, 99.0, "omni", 3, 67.0, 0.55),
        ];
        let plot = emit_plot_data(&rows, Figure::Fig6).unwrap();
        let bs3 = plot.iter().find(|p| p.series == "bs3").unwrap();
        assert_eq!(bs3.mean_der, 0.55);
        let err = emit_plot_data(&rows[..1], Figure::Fig6).unwrap_err();
        assert!(err.to_string().contains("series directional"), "{err}");
    }

    #[test]
    fn aggregate_matches_rows() {
        let mut rows = vec![row(200, 0, 0.0, "omni", 1, 0.0, 0.5), row(200, 0, 0.0, "omni", 1, 0.0, 0.7)];
        rows[1].seed = 2;
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].runs, 2);
        assert!((agg[0].mean_der - 0.6).abs() < 1e-12);
        assert!((agg[0].std_der - 0.1414213562373095).abs() < 1e-12);
    }

    #[test]
    fn results_csv_round_trip() {
        let rows = vec![row(200, 4, 50.0, "custom:4/4/-4/-3/-4/4", 2, 33.5, 0.25)];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with(
            "sweep_var,value,seed,network,sent,received,der,lost_collision,lost_no_slot,lost_below_sensitivity"
        ));
        assert_eq!(read_results(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn figure_names() {
        for f in Figure::ALL {
            assert_eq!(Figure::parse(f.name()).unwrap(), f);
        }
        assert!(Figure::parse("fig7").is_err());
    }
}
