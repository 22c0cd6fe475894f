//! The invariant suite behind `geogate verify`.

use std::f64::consts::{PI, TAU};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use super::config::{Numerics, Tau0, VerifyConfig};
use super::figures::{omega_at, Fig1Setup, Fig1Variant};
use super::{Check, VerificationReport};
use crate::error::Result;
use crate::evolve::{propagate, rotating_frame_oracle, TwoQubitRoute};
use crate::fields::{
    josephson_schedule, nmr_conditional_schedule, nmr_schedule, rotate_schedule, FieldSchedule, NmrParams,
    TwoQubitModel,
};
use crate::gates::{
    build_gate, build_two_qubit, commutator_max, is_product_operator, noncommutable, nontrivial_two_qubit,
    phase_aligned_distance, reconstruct_gate_from_runs, synthesize_double_loop, DynamicalPhase, GateSpec, ReversalRule,
    TwoQubitGateSpec, COMMUTATOR_TOLERANCE,
};
use crate::linalg::{state_of_angles, CMat2, Vec3, C64};
use crate::phases::{
    conditional_decomposition_two_qubit, cyclic_pair_josephson, cyclic_pair_nmr, decompose, phase_distance,
    signed_law_distance, solid_angle, verify_cyclic, CyclicPair, PhaseConfig,
};

/// Largest `1 - fidelity` and phase offset between propagated states and the
/// rotating-frame solution, over every sample of every grid point.
pub fn oracle_agreement(grid: &[(f64, f64, f64)], numerics: &Numerics) -> Result<(f64, f64)> {
    let psi0 = state_of_angles(1.1, 0.4)?;
    let per_point = grid
        .par_iter()
        .map(|&(w0, w1, w)| {
            let p = NmrParams::single(w0, w1, w);
            let traj = propagate(&nmr_schedule(&p)?, &psi0, &numerics.propagator())?;
            let mut worst = (0.0f64, 0.0f64);
            for (&t, psi) in traj.times.iter().zip(&traj.states) {
                let ov = rotating_frame_oracle(&p, &psi0, t)?.inner(psi);
                worst.0 = worst.0.max(1.0 - ov.norm());
                worst.1 = worst.1.max(ov.arg().abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1))))
}

/// Worst deviations over a set of cyclic runs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CyclicAudit {
    pub cyclicity: f64,
    pub phase_law: f64,
    pub solid_angle: f64,
    pub antisymmetry: f64,
}

impl CyclicAudit {
    fn merge(self, o: CyclicAudit) -> CyclicAudit {
        CyclicAudit {
            cyclicity: self.cyclicity.max(o.cyclicity),
            phase_law: self.phase_law.max(o.phase_law),
            solid_angle: self.solid_angle.max(o.solid_angle),
            antisymmetry: self.antisymmetry.max(o.antisymmetry),
        }
    }
}

/// Propagates both pair members one period and compares against
/// `+-pi (1 - cos chi)`, the solid angle and each other.
pub fn audit_cyclic_run(s: &FieldSchedule, pair: &CyclicPair, cfg: &PhaseConfig) -> Result<CyclicAudit> {
    let plus = decompose(s, &pair.psi_plus, cfg)?;
    let minus = decompose(s, &pair.psi_minus, cfg)?;
    let traj = propagate(s, &pair.psi_plus, &cfg.propagator)?;
    let sa = solid_angle(&traj.bloch_path())?;
    Ok(CyclicAudit {
        cyclicity: plus.cyclicity_defect.max(minus.cyclicity_defect),
        phase_law: signed_law_distance(plus.geometric, PI * (1.0 - pair.chi.cos())),
        solid_angle: phase_distance(sa.gamma, plus.geometric),
        antisymmetry: phase_distance(minus.geometric, -plus.geometric),
    })
}

/// NMR drive realizing cone angle `chi` with field magnitude `field`.
pub fn nmr_for_cone(chi: f64, field: f64, omega: f64) -> NmrParams {
    NmrParams::single(field * chi.sin(), field * chi.cos() - omega, omega)
}

/// Random spec pairs where the noncommutability criterion and the built
/// matrices disagree.
pub fn noncommutability_disagreements(rng: &mut StdRng, n: usize) -> usize {
    (0..n)
        .filter(|_| {
            let a = GateSpec::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let b = GateSpec::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            noncommutable(a, b) != (commutator_max(a, b) > COMMUTATOR_TOLERANCE)
        })
        .count()
}

/// Random two-qubit specs where the nontriviality criterion disagrees with a
/// product-operator test of the built matrix. One third of the specs repeat
/// the control-0 parameters shifted by whole turns.
pub fn nontriviality_disagreements(rng: &mut StdRng, n: usize) -> usize {
    (0..n)
        .filter(|k| {
            let spec0 = GateSpec::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let spec1 = if k % 3 == 0 {
                let (a, b) = (rng.gen_range(-2i32..=2), rng.gen_range(-2i32..=2));
                GateSpec::new(spec0.chi + TAU * a as f64, spec0.gamma + TAU * b as f64)
            } else {
                GateSpec::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI))
            };
            let spec = TwoQubitGateSpec { spec0, spec1 };
            nontrivial_two_qubit(spec) == is_product_operator(&build_two_qubit(spec), 1e-9)
        })
        .count()
}

/// Worst unitarity defect and eigenphase residual of built gates on an
/// `n x n` grid over `[-pi, pi]^2`.
pub fn gate_grid_defects(n: usize) -> (f64, f64) {
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let chi = -PI + TAU * i as f64 / (n - 1) as f64;
            let g = -PI + TAU * j as f64 / (n - 1) as f64;
            let u = build_gate(GateSpec::new(chi, g));
            let pair = CyclicPair::from_chi(chi);
            let plus = u.apply(&pair.psi_plus) - pair.psi_plus.scale(C64::from_polar(1.0, g));
            let minus = u.apply(&pair.psi_minus) - pair.psi_minus.scale(C64::from_polar(1.0, -g));
            worst.0 = worst.0.max(u.unitarity_defect());
            worst.1 = worst.1.max(plus.norm()).max(minus.norm());
        }
    }
    worst
}

/// Largest difference between conditional phases from full two-qubit runs
/// (both routes) and the single-qubit block runs, plus the worst distance
/// from the flat per-loop values `pi` and `3 pi / 4` of the `omega1 = J - omega`
/// parameter set.
pub fn block_exactness(setup: &Fig1Setup, numerics: &Numerics) -> Result<(f64, f64)> {
    let cfg = numerics.phase_config();
    let per_point = setup
        .grid
        .values()
        .par_iter()
        .map(|&r| {
            let p0 = setup.params(Fig1Variant::B, r, 0)?;
            let model = TwoQubitModel::nmr(&p0, p0.omega1 + 40.0 * p0.coupling, false)?;
            let mut worst = (0.0f64, 0.0f64);
            for delta in 0..2u8 {
                let p = p0.with_delta(delta);
                let pair = cyclic_pair_nmr(&p)?;
                let block = decompose(&nmr_conditional_schedule(&p)?, &pair.psi_plus, &cfg)?.geometric;
                for route in [TwoQubitRoute::Block, TwoQubitRoute::Dense] {
                    let full = conditional_decomposition_two_qubit(&model, delta, &pair.psi_plus, &cfg, route)?;
                    worst.0 = worst.0.max(phase_distance(full.geometric, block));
                }
                let flat = if delta == 0 { PI } else { 0.75 * PI };
                worst.1 = worst.1.max(signed_law_distance(block, flat));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1))))
}

pub fn run_verify(cfg: &VerifyConfig, numerics: &Numerics) -> Result<VerificationReport> {
    let pcfg = numerics.phase_config();
    let mut checks = Vec::new();

    let mut grid = Vec::new();
    for &w0 in &cfg.oracle_omega0 {
        for &w1 in &cfg.oracle_omega1 {
            for &w in &cfg.oracle_omega {
                grid.push((w0, w1, w));
            }
        }
    }
    let (infidelity, phase) = oracle_agreement(&grid, numerics)?;
    checks.push(Check::at_most("oracle: 1 - fidelity", infidelity, 1e-9));
    checks.push(Check::at_most("oracle: phase offset (rad)", phase, 1e-8));

    let nmr = NmrParams::single(cfg.nmr.omega0, cfg.nmr.omega1, cfg.nmr.omega);
    let nmr_s = nmr_schedule(&nmr)?;
    let nmr_pair = cyclic_pair_nmr(&nmr)?;
    checks.push(Check::at_most(
        "cyclicity: NMR pair",
        verify_cyclic(&nmr_s, &nmr_pair, &pcfg.propagator)?,
        1e-8,
    ));

    let josephson_runs = cfg
        .device_tau_over_tau0
        .iter()
        .map(|&r| {
            let p = cfg.device.params(omega_at(&cfg.device, Tau0::EPlus, r))?;
            Ok((josephson_schedule(&p)?, cyclic_pair_josephson(&p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut jc = 0.0f64;
    for (s, pair) in &josephson_runs {
        jc = jc.max(verify_cyclic(s, pair, &pcfg.propagator)?);
    }
    checks.push(Check::at_most("cyclicity: charge-qubit pair", jc, 1e-8));

    let nmr_audit = cfg
        .phase_law_chi
        .par_iter()
        .map(|&chi| {
            let p = nmr_for_cone(chi, cfg.phase_law_field, cfg.phase_law_omega);
            audit_cyclic_run(&nmr_schedule(&p)?, &cyclic_pair_nmr(&p)?, &pcfg)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(CyclicAudit::default(), CyclicAudit::merge);
    let first_tau = cfg.device_tau_over_tau0.first().copied().unwrap_or(10.0);
    let mut device_runs = Vec::new();
    for &chi in &cfg.phase_law_chi {
        let mut d = cfg.device;
        d.chi0 = Some(chi);
        d.cos_chi0 = None;
        device_runs.push(d.params(omega_at(&d, Tau0::EPlus, first_tau))?);
    }
    let josephson_audit = device_runs
        .par_iter()
        .map(|p| audit_cyclic_run(&josephson_schedule(p)?, &cyclic_pair_josephson(p)?, &pcfg))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(CyclicAudit::default(), CyclicAudit::merge);
    for (label, a) in [("NMR", nmr_audit), ("charge qubit", josephson_audit)] {
        checks.push(Check::at_most(
            &format!("phase law +-pi(1 - cos chi): {label}"),
            a.phase_law,
            1e-7,
        ));
        checks.push(Check::at_most(
            &format!("solid angle vs total - dynamical: {label}"),
            a.solid_angle,
            1e-6,
        ));
        checks.push(Check::at_most(&format!("antisymmetry: {label}"), a.antisymmetry, 1e-8));
    }

    let base = decompose(&nmr_s, &nmr_pair.psi_plus, &pcfg)?.geometric;
    let mut rot_phase = 0.0f64;
    let mut rot_chi = 0.0f64;
    let mut rot_cyc = 0.0f64;
    for &dchi in &cfg.rotations {
        let rs = rotate_schedule(&nmr_s, dchi);
        let rp = nmr_pair.rotated(dchi);
        rot_chi = rot_chi.max((rp.chi - nmr_pair.chi - dchi).abs());
        rot_cyc = rot_cyc.max(verify_cyclic(&rs, &rp, &pcfg.propagator)?);
        rot_phase = rot_phase.max(phase_distance(decompose(&rs, &rp.psi_plus, &pcfg)?.geometric, base));
    }
    checks.push(Check::at_most("rotation: geometric phase unchanged", rot_phase, 1e-8));
    checks.push(Check::at_most(
        "rotation: cone angle shifted by the rotation",
        rot_chi,
        1e-12,
    ));
    checks.push(Check::at_most("rotation: rotated pair cyclic", rot_cyc, 1e-8));

    let (unitarity, eigen) = gate_grid_defects(50);
    checks.push(Check::at_most("gate matrix unitarity (50 x 50 grid)", unitarity, 1e-12));
    checks.push(Check::at_most("gate eigenphases on the cyclic pair", eigen, 1e-12));
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let nc = noncommutability_disagreements(&mut rng, cfg.random_pairs);
    checks.push(Check::at_most(
        "noncommutability criterion vs commutator",
        nc as f64,
        0.0,
    ));
    let nt = nontriviality_disagreements(&mut rng, cfg.random_specs);
    checks.push(Check::at_most(
        "nontriviality criterion vs product test",
        nt as f64,
        0.0,
    ));

    let (s_j, pair_j) = &josephson_runs[0];
    for (label, s, pair) in [("NMR", &nmr_s, &nmr_pair), ("charge qubit", s_j, pair_j)] {
        let r = synthesize_double_loop(s, pair, &pcfg, ReversalRule::Literal)?;
        let dyn_sum = r.protocol.iter().map(|p| p.dynamical_sum.abs()).fold(0.0, f64::max);
        checks.push(Check::at_most(
            &format!("two-period dynamical phase cancels: {label}"),
            dyn_sum,
            1e-6,
        ));
        checks.push(Check::info(
            &format!("two-period gate distance to identity: {label}"),
            r.identity_distance,
            0.0,
        ));
        checks.push(Check::info(
            &format!("two-period gate distance to doubled-phase target: {label}"),
            r.target_distance,
            0.0,
        ));
    }

    let (block, flat) = block_exactness(&Fig1Setup::from(cfg.fig1b), numerics)?;
    checks.push(Check::at_most(
        "two-qubit conditional phases match block runs",
        block,
        1e-8,
    ));
    checks.push(Check::at_most("flat conditional phases pi and 3pi/4", flat, 1e-7));

    let probe = CyclicPair::from_chi(nmr_pair.chi + cfg.probe_offset);
    let probe_defect = verify_cyclic(&nmr_s, &probe, &pcfg.propagator)?;
    checks.push(Check::at_least(
        "negative control: perturbed pair is not cyclic",
        probe_defect,
        pcfg.cyclic_threshold,
    ));

    let zero = FieldSchedule::constant("zero field", Vec3::ZERO, 1.0);
    let id = reconstruct_gate_from_runs(&zero, &CyclicPair::from_chi(0.0), &pcfg, DynamicalPhase::Keep)?;
    checks.push(Check::at_most(
        "zero field gives the identity gate",
        phase_aligned_distance(&id, &CMat2::identity()),
        1e-12,
    ));

    Ok(VerificationReport::new("verify", checks))
}
