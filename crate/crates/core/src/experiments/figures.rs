//! Conditional-phase sweeps on the NMR pair and the charge-qubit drive.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Device, Fig1aConfig, Fig1bConfig, Fig2bConfig, Fig2cConfig, Numerics, Tau0, TauGrid};
use super::export::{render, schedule_rows, Format, Provenance};
use super::{Check, OutputFile, RunOutput, VerificationReport};
use crate::error::{Error, Result};
use crate::fields::{josephson_schedule, nmr_conditional_schedule, NmrParams};
use crate::phases::{
    berry_adiabatic, cyclic_pair_josephson, cyclic_pair_nmr, decompose, phase_distance, signed_law_distance,
    unwrap_phases, wrap_phase,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fig1Variant {
    /// Fixed `omega1`.
    A,
    /// `omega1 = J - omega`.
    B,
}

impl Fig1Variant {
    pub fn name(self) -> &'static str {
        match self {
            Fig1Variant::A => "fig1a",
            Fig1Variant::B => "fig1b",
        }
    }
}

/// Inputs of a conditional-phase sweep on the NMR pair; `omega1` is ignored for variant B.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fig1Setup {
    pub omega0: f64,
    pub omega1: Option<f64>,
    pub coupling: f64,
    pub grid: TauGrid,
}

impl From<Fig1aConfig> for Fig1Setup {
    fn from(c: Fig1aConfig) -> Self {
        Fig1Setup {
            omega0: c.omega0,
            omega1: Some(c.omega1),
            coupling: c.coupling,
            grid: c.grid,
        }
    }
}

impl From<Fig1bConfig> for Fig1Setup {
    fn from(c: Fig1bConfig) -> Self {
        Fig1Setup {
            omega0: c.omega0,
            omega1: None,
            coupling: c.coupling,
            grid: c.grid,
        }
    }
}

impl Fig1Setup {
    /// Target parameters at `tau / tau0 = r` with `tau0 = 2 pi / omega0`.
    pub fn params(&self, variant: Fig1Variant, r: f64, delta: u8) -> Result<NmrParams> {
        let omega = self.omega0 / r;
        let omega1 = match variant {
            Fig1Variant::A => self.omega1.ok_or_else(|| Error::Config("fig1a needs omega1".into()))?,
            Fig1Variant::B => self.coupling - omega,
        };
        let p = NmrParams {
            omega0: self.omega0,
            omega1,
            omega,
            coupling: self.coupling,
            delta,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Per-loop phases of `psi_+` in both control branches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fig1Row {
    pub tau_over_tau0: f64,
    pub omega: f64,
    pub omega1: f64,
    pub chi0: f64,
    pub chi1: f64,
    pub gamma0_exact: f64,
    pub gamma1_exact: f64,
    pub gamma0_adiabatic: f64,
    pub gamma1_adiabatic: f64,
    pub gamma0_exact_unwrapped: f64,
    pub gamma1_exact_unwrapped: f64,
    pub gamma0_adiabatic_unwrapped: f64,
    pub gamma1_adiabatic_unwrapped: f64,
    pub cyclicity_defect0: f64,
    pub cyclicity_defect1: f64,
}

/// One conditional branch of a phase sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchRow {
    pub tau_over_tau0: f64,
    pub gamma_exact: f64,
    pub gamma_adiabatic: f64,
    pub chi: f64,
    pub cyclicity_defect: f64,
    pub gamma_exact_unwrapped: f64,
    pub gamma_adiabatic_unwrapped: f64,
}

struct BranchPoint {
    chi: f64,
    exact: f64,
    adiabatic: f64,
    defect: f64,
}

fn nmr_branch(p: &NmrParams, numerics: &Numerics) -> Result<BranchPoint> {
    let s = nmr_conditional_schedule(p)?;
    let pair = cyclic_pair_nmr(p)?;
    let d = decompose(&s, &pair.psi_plus, &numerics.phase_config())?;
    Ok(BranchPoint {
        chi: pair.chi,
        exact: d.geometric,
        adiabatic: wrap_phase(berry_adiabatic(&s, numerics.adiabatic_samples)?),
        defect: d.cyclicity_defect,
    })
}

pub fn compute_fig1(variant: Fig1Variant, setup: &Fig1Setup, numerics: &Numerics) -> Result<Vec<Fig1Row>> {
    setup.grid.validate()?;
    let points = setup
        .grid
        .values()
        .par_iter()
        .map(|&r| {
            let p0 = setup.params(variant, r, 0)?;
            let b0 = nmr_branch(&p0, numerics)?;
            let b1 = nmr_branch(&p0.with_delta(1), numerics)?;
            Ok((r, p0, b0, b1))
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |f: &dyn Fn(&(f64, NmrParams, BranchPoint, BranchPoint)) -> f64| {
        unwrap_phases(&points.iter().map(f).collect::<Vec<_>>())
    };
    let (e0, e1) = (col(&|x| x.2.exact), col(&|x| x.3.exact));
    let (a0, a1) = (col(&|x| x.2.adiabatic), col(&|x| x.3.adiabatic));
    Ok(points
        .iter()
        .enumerate()
        .map(|(k, (r, p, b0, b1))| Fig1Row {
            tau_over_tau0: *r,
            omega: p.omega,
            omega1: p.omega1,
            chi0: b0.chi,
            chi1: b1.chi,
            gamma0_exact: b0.exact,
            gamma1_exact: b1.exact,
            gamma0_adiabatic: b0.adiabatic,
            gamma1_adiabatic: b1.adiabatic,
            gamma0_exact_unwrapped: e0[k],
            gamma1_exact_unwrapped: e1[k],
            gamma0_adiabatic_unwrapped: a0[k],
            gamma1_adiabatic_unwrapped: a1[k],
            cyclicity_defect0: b0.defect,
            cyclicity_defect1: b1.defect,
        })
        .collect())
}

pub fn branch_rows(rows: &[Fig1Row], delta: u8) -> Vec<BranchRow> {
    rows.iter()
        .map(|r| {
            let pick = |a: f64, b: f64| if delta == 0 { a } else { b };
            BranchRow {
                tau_over_tau0: r.tau_over_tau0,
                gamma_exact: pick(r.gamma0_exact, r.gamma1_exact),
                gamma_adiabatic: pick(r.gamma0_adiabatic, r.gamma1_adiabatic),
                chi: pick(r.chi0, r.chi1),
                cyclicity_defect: pick(r.cyclicity_defect0, r.cyclicity_defect1),
                gamma_exact_unwrapped: pick(r.gamma0_exact_unwrapped, r.gamma1_exact_unwrapped),
                gamma_adiabatic_unwrapped: pick(r.gamma0_adiabatic_unwrapped, r.gamma1_adiabatic_unwrapped),
            }
        })
        .collect()
}

pub fn run_fig1(variant: Fig1Variant, setup: &Fig1Setup, numerics: &Numerics, format: Format) -> Result<RunOutput> {
    let name = variant.name();
    let rows = compute_fig1(variant, setup, numerics)?;
    let prov = Provenance::new(name, &serde_json::json!({ "setup": setup, "numerics": numerics }))?;
    let ext = format.extension();
    let mut files = vec![OutputFile::new(format!("{name}.{ext}"), render(format, &prov, &rows)?)];
    for delta in 0..2u8 {
        files.push(OutputFile::new(
            format!("{name}_branch{delta}.{ext}"),
            render(format, &prov, &branch_rows(&rows, delta))?,
        ));
    }
    Ok(RunOutput { files, report: None })
}

/// Drive frequency for `tau = r tau0`.
pub fn omega_at(device: &Device, def: Tau0, r: f64) -> f64 {
    TAU / (r * device.tau0(def))
}

pub fn run_fig2b(cfg: &Fig2bConfig, format: Format) -> Result<RunOutput> {
    let p = cfg.device.params(omega_at(&cfg.device, cfg.tau0, cfg.tau_over_tau0))?;
    let rows = schedule_rows(&josephson_schedule(&p)?, cfg.samples);
    let prov = Provenance::new("fig2b", &serde_json::json!({ "fig2b": cfg, "params": p }))?;
    Ok(RunOutput {
        files: vec![OutputFile::new(
            format!("fig2b.{}", format.extension()),
            render(format, &prov, &rows)?,
        )],
        report: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fig2cRow {
    pub tau_over_tau0: f64,
    pub tau: f64,
    pub tau_over_tau0_e_plus: f64,
    pub tau_over_tau0_e_minus: f64,
    pub tau_over_tau0_mean_ej: f64,
    pub omega: f64,
    pub gamma_exact: f64,
    pub gamma_adiabatic: f64,
    pub gamma_exact_unwrapped: f64,
    pub gamma_adiabatic_unwrapped: f64,
    pub relative_deviation: f64,
    pub cyclicity_defect: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossoverEstimate {
    pub tau0_definition: Tau0,
    pub tau0: f64,
    pub tau_star_over_tau0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fig2cResult {
    pub rows: Vec<Fig2cRow>,
    /// `pi (1 - cos chi0)`.
    pub expected_magnitude: f64,
    /// Smallest `tau` with relative adiabatic deviation below the threshold;
    /// `None` when the grid never gets there.
    pub tau_star: Option<f64>,
    pub crossover: Vec<CrossoverEstimate>,
}

fn adiabatic_deviation(device: &Device, tau: f64, reference: f64, samples: usize) -> Result<f64> {
    let p = device.params(TAU / tau)?;
    let g = berry_adiabatic(&josephson_schedule(&p)?, samples)?;
    Ok(phase_distance(g, reference) / reference.abs())
}

pub fn compute_fig2c(cfg: &Fig2cConfig, numerics: &Numerics) -> Result<Fig2cResult> {
    cfg.grid.validate()?;
    let chi0 = cfg.device.chi0()?;
    let tau0 = cfg.device.tau0(cfg.tau0);
    let [t_plus, t_minus, t_mean] = Tau0::ALL.map(|d| cfg.device.tau0(d));
    let pcfg = numerics.phase_config();
    let points = cfg
        .grid
        .values()
        .par_iter()
        .map(|&r| {
            let tau = r * tau0;
            let p = cfg.device.params(TAU / tau)?;
            let s = josephson_schedule(&p)?;
            let pair = cyclic_pair_josephson(&p)?;
            let d = decompose(&s, &pair.psi_plus, &pcfg)?;
            let a = wrap_phase(berry_adiabatic(&s, numerics.adiabatic_samples)?);
            Ok((r, tau, p.omega, d, a))
        })
        .collect::<Result<Vec<_>>>()?;
    let exact_u = unwrap_phases(&points.iter().map(|x| x.3.geometric).collect::<Vec<_>>());
    let adia_u = unwrap_phases(&points.iter().map(|x| x.4).collect::<Vec<_>>());
    let rows: Vec<Fig2cRow> = points
        .iter()
        .enumerate()
        .map(|(k, (r, tau, omega, d, a))| Fig2cRow {
            tau_over_tau0: *r,
            tau: *tau,
            tau_over_tau0_e_plus: tau / t_plus,
            tau_over_tau0_e_minus: tau / t_minus,
            tau_over_tau0_mean_ej: tau / t_mean,
            omega: *omega,
            gamma_exact: d.geometric,
            gamma_adiabatic: *a,
            gamma_exact_unwrapped: exact_u[k],
            gamma_adiabatic_unwrapped: adia_u[k],
            relative_deviation: phase_distance(*a, d.geometric) / d.geometric.abs(),
            cyclicity_defect: d.cyclicity_defect,
        })
        .collect();

    let thr = cfg.crossover_threshold;
    let tau_star = match rows.iter().position(|r| r.relative_deviation <= thr) {
        None => None,
        Some(0) => Some(rows[0].tau),
        Some(k) => {
            let reference = rows[k].gamma_exact;
            let (mut lo, mut hi) = (rows[k - 1].tau.ln(), rows[k].tau.ln());
            for _ in 0..48 {
                let mid = 0.5 * (lo + hi);
                if adiabatic_deviation(&cfg.device, mid.exp(), reference, numerics.adiabatic_samples)? <= thr {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi.exp())
        }
    };
    let crossover = Tau0::ALL
        .iter()
        .map(|&d| {
            let t0 = cfg.device.tau0(d);
            CrossoverEstimate {
                tau0_definition: d,
                tau0: t0,
                tau_star_over_tau0: tau_star.map_or(f64::NAN, |t| t / t0),
            }
        })
        .collect();
    Ok(Fig2cResult {
        rows,
        expected_magnitude: std::f64::consts::PI * (1.0 - chi0.cos()),
        tau_star,
        crossover,
    })
}

/// Checks on a charge-qubit phase sweep: flat exact phase of the expected magnitude,
/// convergence of the adiabatic curve, and the crossover window.
pub fn fig2c_report(cfg: &Fig2cConfig, res: &Fig2cResult) -> VerificationReport {
    let target = res.expected_magnitude;
    let law = res
        .rows
        .iter()
        .map(|r| signed_law_distance(r.gamma_exact, target))
        .fold(0.0, f64::max);
    let (lo, hi) = res
        .rows
        .iter()
        .map(|r| r.gamma_exact_unwrapped)
        .fold((f64::MAX, f64::MIN), |(a, b), g| (a.min(g), b.max(g)));
    let first = res.rows.first().map_or(f64::NAN, |r| r.relative_deviation);
    let last = res.rows.last().map_or(f64::NAN, |r| r.relative_deviation);
    let mut checks = vec![
        Check::asserted("exact phase magnitude equals pi(1 - cos chi0)", law, 0.0, 1e-7),
        Check::asserted("exact phase is flat in tau", hi - lo, 0.0, 1e-7),
        Check::asserted(
            "adiabatic deviation at largest tau below threshold",
            last,
            0.0,
            cfg.crossover_threshold,
        ),
        Check::bool(
            "adiabatic deviation shrinks from smallest to largest tau",
            last < first,
            last,
            first,
        ),
    ];
    for c in &res.crossover {
        checks.push(Check::info(
            &format!("crossover tau*/tau0 ({})", c.tau0_definition.name()),
            c.tau_star_over_tau0,
            cfg.crossover_reference.unwrap_or(f64::NAN),
        ));
    }
    if let Some(reference) = cfg.crossover_reference {
        let best = res
            .crossover
            .iter()
            .map(|c| (c.tau_star_over_tau0 / reference).ln().abs())
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::asserted(
            "crossover within a factor of 3 of the reference for some tau0",
            best.exp(),
            1.0,
            2.0,
        ));
    }
    VerificationReport::new("fig2c", checks)
}

#[derive(Serialize)]
struct CrossoverDocument<'a> {
    threshold: f64,
    tau_star: Option<f64>,
    expected_magnitude: f64,
    estimates: &'a [CrossoverEstimate],
    report: &'a VerificationReport,
}

pub fn run_fig2c(cfg: &Fig2cConfig, numerics: &Numerics, format: Format, name: &str) -> Result<RunOutput> {
    let res = compute_fig2c(cfg, numerics)?;
    let report = fig2c_report(cfg, &res);
    let prov = Provenance::new(name, &serde_json::json!({ "fig2c": cfg, "numerics": numerics }))?;
    let ext = format.extension();
    let branch: Vec<BranchRow> = res
        .rows
        .iter()
        .map(|r| BranchRow {
            tau_over_tau0: r.tau_over_tau0,
            gamma_exact: r.gamma_exact,
            gamma_adiabatic: r.gamma_adiabatic,
            chi: cfg.device.chi0().unwrap_or(f64::NAN),
            cyclicity_defect: r.cyclicity_defect,
            gamma_exact_unwrapped: r.gamma_exact_unwrapped,
            gamma_adiabatic_unwrapped: r.gamma_adiabatic_unwrapped,
        })
        .collect();
    let doc = CrossoverDocument {
        threshold: cfg.crossover_threshold,
        tau_star: res.tau_star,
        expected_magnitude: res.expected_magnitude,
        estimates: &res.crossover,
        report: &report,
    };
    let summary = serde_json::to_string_pretty(&doc).map_err(|e| Error::Export(e.to_string()))?;
    Ok(RunOutput {
        files: vec![
            OutputFile::new(format!("{name}.{ext}"), render(format, &prov, &res.rows)?),
            OutputFile::new(format!("{name}_branch0.{ext}"), render(format, &prov, &branch)?),
            OutputFile::new(format!("{name}_crossover.json"), summary),
        ],
        report: Some(report),
    })
}
