//! Control-target decoupling versus detuning of the two spins.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Numerics, SweepConfig};
use super::export::{render, Format, Provenance};
use super::{OutputFile, RunOutput};
use crate::error::Result;
use crate::evolve::{propagate_two_qubit, TwoQubitRoute};
use crate::fields::{nmr_conditional_schedule, NmrParams, TwoQubitModel};
use crate::linalg::{kron_state, reduced_bloch, CVec2};
use crate::phases::{conditional_decomposition_two_qubit, cyclic_pair_nmr, decompose, phase_distance};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub detuning_over_j: f64,
    pub omega1_control: f64,
    /// Population of the initial control state after the protocol, per branch.
    pub control_fidelity0: f64,
    pub control_fidelity1: f64,
    pub gamma_block0: f64,
    pub gamma_block1: f64,
    pub gamma_full0: f64,
    pub gamma_full1: f64,
    pub phase_error0: f64,
    pub phase_error1: f64,
    pub cyclicity_defect0: f64,
    pub cyclicity_defect1: f64,
}

fn model_for(cfg: &SweepConfig, detuning: f64) -> Result<(NmrParams, TwoQubitModel)> {
    let p = NmrParams {
        omega0: cfg.omega0,
        omega1: cfg.omega1_target,
        omega: cfg.omega,
        coupling: cfg.coupling,
        delta: 0,
    };
    let omega1_control = cfg.omega1_target + detuning * cfg.coupling;
    let mut m = TwoQubitModel::nmr(&p, omega1_control, cfg.drive_on_control)?;
    if cfg.loops > 1 {
        m.control = m.control.repeated(cfg.loops);
        m.target = m.target.repeated(cfg.loops);
    }
    Ok((p, m))
}

pub fn sweep_point(cfg: &SweepConfig, detuning: f64, numerics: &Numerics) -> Result<SweepRow> {
    let pcfg = numerics.phase_config();
    let (p, m) = model_for(cfg, detuning)?;
    let route = if m.is_block_diagonal() {
        TwoQubitRoute::Block
    } else {
        TwoQubitRoute::Dense
    };
    let mut fid = [0.0; 2];
    let mut block = [0.0; 2];
    let mut full = [0.0; 2];
    let mut defect = [0.0; 2];
    for delta in 0..2u8 {
        let pd = p.with_delta(delta);
        let pair = cyclic_pair_nmr(&pd)?;
        let s = nmr_conditional_schedule(&pd)?.repeated(cfg.loops);
        block[delta as usize] = decompose(&s, &pair.psi_plus, &pcfg)?.geometric;
        let d = conditional_decomposition_two_qubit(&m, delta, &pair.psi_plus, &pcfg, route)?;
        full[delta as usize] = d.geometric;
        defect[delta as usize] = d.cyclicity_defect;
        let psi0 = kron_state(&CVec2::basis(delta as usize), &pair.psi_plus);
        let traj = propagate_two_qubit(&m, &psi0, &pcfg.propagator, route)?;
        let nz = reduced_bloch(traj.final_state(), 0).z;
        let sign = if delta == 0 { 1.0 } else { -1.0 };
        fid[delta as usize] = 0.5 * (1.0 + sign * nz);
    }
    Ok(SweepRow {
        detuning_over_j: detuning,
        omega1_control: cfg.omega1_target + detuning * cfg.coupling,
        control_fidelity0: fid[0],
        control_fidelity1: fid[1],
        gamma_block0: block[0],
        gamma_block1: block[1],
        gamma_full0: full[0],
        gamma_full1: full[1],
        phase_error0: phase_distance(full[0], block[0]),
        phase_error1: phase_distance(full[1], block[1]),
        cyclicity_defect0: defect[0],
        cyclicity_defect1: defect[1],
    })
}

pub fn compute_sweep(cfg: &SweepConfig, numerics: &Numerics) -> Result<Vec<SweepRow>> {
    cfg.detunings()?
        .par_iter()
        .map(|&d| sweep_point(cfg, d, numerics))
        .collect()
}

pub fn run_sweep(cfg: &SweepConfig, numerics: &Numerics, format: Format) -> Result<RunOutput> {
    let rows = compute_sweep(cfg, numerics)?;
    let prov = Provenance::new("sweep", &serde_json::json!({ "sweep": cfg, "numerics": numerics }))?;
    Ok(RunOutput {
        files: vec![OutputFile::new(
            format!("sweep.{}", format.extension()),
            render(format, &prov, &rows)?,
        )],
        report: None,
    })
}
