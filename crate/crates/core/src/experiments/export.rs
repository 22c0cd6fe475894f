//! CSV and JSON rendering with a provenance block.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{Trajectory2, Trajectory4};
use crate::fields::FieldSchedule;
use crate::linalg::{bloch_unchecked, reduced_bloch};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Where a table came from: crate version, experiment name and the full
/// configuration it was computed with.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub generator: String,
    pub experiment: String,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(experiment: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Provenance {
            generator: format!("geogate {}", env!("CARGO_PKG_VERSION")),
            experiment: experiment.to_string(),
            config: serde_json::to_value(config).map_err(|e| Error::Export(e.to_string()))?,
        })
    }

    fn comment_lines(&self) -> String {
        format!(
            "# generator: {}\n# experiment: {}\n# config: {}\n",
            self.generator, self.experiment, self.config
        )
    }
}

/// Renders rows with `#` comment lines carrying the provenance on top.
pub fn render_csv<R: Serialize>(prov: &Provenance, rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Export(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| Error::Export(e.to_string()))?;
    let body = String::from_utf8(body).map_err(|e| Error::Export(e.to_string()))?;
    Ok(prov.comment_lines() + &body)
}

#[derive(Serialize)]
struct Document<'a, R: Serialize> {
    provenance: &'a Provenance,
    rows: &'a [R],
}

pub fn render_json<R: Serialize>(prov: &Provenance, rows: &[R]) -> Result<String> {
    serde_json::to_string_pretty(&Document { provenance: prov, rows }).map_err(|e| Error::Export(e.to_string()))
}

pub fn render<R: Serialize>(format: Format, prov: &Provenance, rows: &[R]) -> Result<String> {
    match format {
        Format::Csv => render_csv(prov, rows),
        Format::Json => render_json(prov, rows),
    }
}

/// Strips the provenance comments and parses the remaining CSV.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::Export(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Export(e.to_string()))?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| Error::Export(format!("{v}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub t: f64,
    #[serde(rename = "Bx")]
    pub bx: f64,
    #[serde(rename = "By")]
    pub by: f64,
    #[serde(rename = "Bz")]
    pub bz: f64,
}

/// One period of a schedule sampled on `samples + 1` evenly spaced points.
pub fn schedule_rows(s: &FieldSchedule, samples: usize) -> Vec<ScheduleRow> {
    let d = s.duration();
    (0..=samples)
        .map(|k| {
            let t = if k == samples { d } else { d * k as f64 / samples as f64 };
            let b = s.sample(t);
            ScheduleRow {
                t,
                bx: b.x,
                by: b.y,
                bz: b.z,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub re0: f64,
    pub im0: f64,
    pub re1: f64,
    pub im1: f64,
    pub nx: f64,
    pub ny: f64,
    pub nz: f64,
}

pub fn trajectory_rows(traj: &Trajectory2) -> Vec<TrajectoryRow> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| {
            let n = bloch_unchecked(psi).0;
            TrajectoryRow {
                t,
                re0: psi.0[0].re,
                im0: psi.0[0].im,
                re1: psi.0[1].re,
                im1: psi.0[1].im,
                nx: n.x,
                ny: n.y,
                nz: n.z,
            }
        })
        .collect()
}

/// Two-qubit trajectory: four amplitudes and both reduced Bloch vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoQubitTrajectoryRow {
    pub t: f64,
    pub re00: f64,
    pub im00: f64,
    pub re01: f64,
    pub im01: f64,
    pub re10: f64,
    pub im10: f64,
    pub re11: f64,
    pub im11: f64,
    pub nx_control: f64,
    pub ny_control: f64,
    pub nz_control: f64,
    pub nx_target: f64,
    pub ny_target: f64,
    pub nz_target: f64,
}

pub fn two_qubit_trajectory_rows(traj: &Trajectory4) -> Vec<TwoQubitTrajectoryRow> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| {
            let (c, g) = (reduced_bloch(psi, 0), reduced_bloch(psi, 1));
            let a = psi.0;
            TwoQubitTrajectoryRow {
                t,
                re00: a[0].re,
                im00: a[0].im,
                re01: a[1].re,
                im01: a[1].im,
                re10: a[2].re,
                im10: a[2].im,
                re11: a[3].re,
                im11: a[3].im,
                nx_control: c.x,
                ny_control: c.y,
                nz_control: c.z,
                nx_target: g.x,
                ny_target: g.y,
                nz_target: g.z,
            }
        })
        .collect()
}
