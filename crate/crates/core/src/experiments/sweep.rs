use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::manifest::{Pipeline, RunManifest};
use super::pipeline::{evaluate, heldout_dataset, train_models, MethodSummary};

pub const CSV_HEADER: &str = "axis,method,mean_rate_bits,std_err,n_eval,manifest_hash";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Number of pilot slots L; models are retrained per value.
    PilotLength,
    /// Surface grid n_h × n_v; models are retrained per value.
    RisElements,
    /// P_T/σ² in dB; models trained once at the manifest's power are
    /// evaluated at every value.
    TransmitPower,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pilot-length" => Ok(SweepAxis::PilotLength),
            "ris-elements" => Ok(SweepAxis::RisElements),
            "transmit-power" => Ok(SweepAxis::TransmitPower),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

/// One point of a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisValue {
    PilotLength(usize),
    Grid(usize, usize),
    SnrDb(f64),
}

impl AxisValue {
    /// Parses `value` for `axis`: a count for pilot length, `HxV` (or a single
    /// side length) for the surface grid, a dB figure for transmit power.
    pub fn parse(axis: SweepAxis, value: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad value {value:?} for sweep axis {axis:?}"));
        let count = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        match axis {
            SweepAxis::PilotLength => Ok(AxisValue::PilotLength(count(value)?)),
            SweepAxis::RisElements => match value.split_once(['x', 'X']) {
                Some((h, v)) => Ok(AxisValue::Grid(count(h)?, count(v)?)),
                None => {
                    let side = count(value)?;
                    Ok(AxisValue::Grid(side, side))
                }
            },
            SweepAxis::TransmitPower => value.trim().parse::<f64>().map(AxisValue::SnrDb).map_err(|_| bad()),
        }
    }

    fn label(&self) -> String {
        match self {
            AxisValue::PilotLength(l) => l.to_string(),
            AxisValue::Grid(h, v) => format!("{h}x{v}"),
            AxisValue::SnrDb(db) => db.to_string(),
        }
    }

    fn apply(&self, m: &mut RunManifest) {
        match *self {
            AxisValue::PilotLength(l) => m.scenario.l = l,
            AxisValue::Grid(h, v) => {
                m.scenario.n_h = h;
                m.scenario.n_v = v;
            }
            AxisValue::SnrDb(db) => m.scenario.p_t_dbm = db + m.scenario.noise_dbm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<AxisValue>,
    pub methods: Vec<Pipeline>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: String,
    pub summary: Option<MethodSummary>,
    pub method: Pipeline,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Failures of individual axis points; the remaining points still ran.
    pub errors: Vec<(String, Error)>,
    pub manifest_hash: String,
}

impl SweepOutcome {
    /// Summary of `method` at the axis point labeled `axis`.
    pub fn get(&self, axis: &str, method: Pipeline) -> Option<&MethodSummary> {
        self.rows
            .iter()
            .find(|r| r.axis == axis && r.method == method)
            .and_then(|r| r.summary.as_ref())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let (mean, se, n) = match &row.summary {
                Some(s) => (s.mean, s.std_err, s.n_eval),
                None => (f64::NAN, f64::NAN, 0),
            };
            writeln!(out, "{},{},{},{},{},{}", row.axis, row.method, mean, se, n, self.manifest_hash).expect("string write");
        }
        out
    }
}

/// Renders summaries as CSV rows under a single axis label.
pub fn summaries_csv(axis: &str, summaries: &[MethodSummary], manifest_hash: &str) -> String {
    SweepOutcome {
        rows: summaries
            .iter()
            .map(|s| SweepRow {
                axis: axis.into(),
                method: s.method,
                summary: Some(s.clone()),
            })
            .collect(),
        errors: Vec::new(),
        manifest_hash: manifest_hash.into(),
    }
    .to_csv()
}

/// Runs every method at every axis value. Mean and standard error use at
/// least the manifest's held-out count of realizations per point.
pub fn run_sweep(manifest: &RunManifest, spec: &SweepSpec) -> Result<SweepOutcome> {
    manifest.validate()?;
    let mut outcome = SweepOutcome {
        rows: Vec::new(),
        errors: Vec::new(),
        manifest_hash: manifest.hash()?,
    };
    if spec.methods.is_empty() {
        return Ok(outcome);
    }
    let shared = if spec.axis == SweepAxis::TransmitPower {
        Some(train_models(manifest, &spec.methods)?)
    } else {
        None
    };
    for value in &spec.values {
        let label = value.label();
        let point = || -> Result<Vec<MethodSummary>> {
            let mut m = manifest.clone();
            value.apply(&mut m);
            m.validate()?;
            let owned;
            let models = match &shared {
                Some(models) => models,
                None => {
                    owned = train_models(&m, &spec.methods)?;
                    &owned
                }
            };
            evaluate(&m, &m.scenario, models, &spec.methods, &heldout_dataset(&m, &m.scenario)?)
        };
        match point() {
            Ok(summaries) => outcome.rows.extend(summaries.into_iter().map(|s| SweepRow {
                axis: label.clone(),
                method: s.method,
                summary: Some(s),
            })),
            Err(e) => {
                outcome.rows.extend(spec.methods.iter().map(|&method| SweepRow {
                    axis: label.clone(),
                    method,
                    summary: None,
                }));
                outcome.errors.push((label, e));
            }
        }
    }
    Ok(outcome)
}
