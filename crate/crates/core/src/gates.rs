//! Gate matrices built from a cyclic pair and its geometric phase, gate-set
//! classification, and the two-period protocol that removes dynamical phases.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{evolution_operator, propagate_two_qubit, PropagatorConfig, TwoQubitRoute};
use crate::fields::{concat, negated_schedule, retraced_schedule, reversed_schedule, FieldSchedule, TwoQubitModel};
use crate::linalg::{block_diag, kron_state, CMat, CMat2, CMat4, CVec2, CVec4, C64};
use crate::phases::{
    conditional_decomposition_two_qubit, decompose, integrate_segments, propagate_for_phase, wrap_phase, CyclicPair,
    PhaseConfig, PhaseDecomposition,
};

/// Unitarity tolerance for matrices handed to [`gate_fidelity`].
pub const UNITARY_TOLERANCE: f64 = 1e-9;
/// Threshold below which the commutator of two built gates counts as zero.
pub const COMMUTATOR_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub chi: f64,
    pub gamma: f64,
}

impl GateSpec {
    pub fn new(chi: f64, gamma: f64) -> Self {
        GateSpec { chi, gamma }
    }
}

/// Conditional gate: `spec0` acts on the target when the control is `|0>`,
/// `spec1` when it is `|1>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitGateSpec {
    pub spec0: GateSpec,
    pub spec1: GateSpec,
}

/// `U(chi, gamma) = e^{i gamma} |psi_+><psi_+| + e^{-i gamma} |psi_-><psi_-|`:
///
/// ```text
/// [ e^{i g} cos^2(chi/2) + e^{-i g} sin^2(chi/2)    i sin(chi) sin(g)                             ]
/// [ i sin(chi) sin(g)                               e^{-i g} cos^2(chi/2) + e^{i g} sin^2(chi/2) ]
/// ```
pub fn build_gate(spec: GateSpec) -> CMat2 {
    let (c2, s2) = ((spec.chi / 2.0).cos().powi(2), (spec.chi / 2.0).sin().powi(2));
    let plus = C64::from_polar(1.0, spec.gamma);
    let minus = plus.conj();
    let off = C64::new(0.0, spec.chi.sin() * spec.gamma.sin());
    CMat2::new(plus * c2 + minus * s2, off, off, minus * c2 + plus * s2)
}

/// Same construction for a pair with arbitrary azimuth.
pub fn gate_from_pair(pair: &CyclicPair, gamma: f64) -> CMat2 {
    projector_sum(pair, C64::from_polar(1.0, gamma), C64::from_polar(1.0, -gamma))
}

fn projector_sum(pair: &CyclicPair, a: C64, b: C64) -> CMat2 {
    let mut m = CMat2::zeros();
    for (v, w) in [(pair.psi_plus, a), (pair.psi_minus, b)] {
        for i in 0..2 {
            for j in 0..2 {
                m.0[i][j] += w * v.0[i] * v.0[j].conj();
            }
        }
    }
    m
}

/// `diag(U(spec0), U(spec1))` in the basis `|control, target>`.
pub fn build_two_qubit(spec: TwoQubitGateSpec) -> CMat4 {
    block_diag(&build_gate(spec.spec0), &build_gate(spec.spec1))
}

/// `sin(g1) sin(g2) sin(chi2 - chi1)`; the two gates commute exactly when it vanishes.
pub fn noncommutability_factor(a: GateSpec, b: GateSpec) -> f64 {
    a.gamma.sin() * b.gamma.sin() * (b.chi - a.chi).sin()
}

pub fn noncommutable(a: GateSpec, b: GateSpec) -> bool {
    noncommutability_factor(a, b).abs() > 1e-12
}

/// Largest entry of `U_a U_b - U_b U_a`.
pub fn commutator_max(a: GateSpec, b: GateSpec) -> f64 {
    build_gate(a).commutator(&build_gate(b)).max_abs()
}

fn equal_mod_2pi(a: f64, b: f64) -> bool {
    let r = (a - b).rem_euclid(TAU);
    r.min(TAU - r) <= 1e-12
}

/// `gamma1 != gamma0 or chi1 != chi0`, compared mod `2 pi`.
pub fn nontrivial_two_qubit(spec: TwoQubitGateSpec) -> bool {
    !(equal_mod_2pi(spec.spec0.gamma, spec.spec1.gamma) && equal_mod_2pi(spec.spec0.chi, spec.spec1.chi))
}

/// `true` when `u = A (x) B`: the realigned matrix
/// `R[(i1 j1), (i2 j2)] = u[(i1 i2), (j1 j2)]` has rank one, i.e. every 2x2
/// minor vanishes within `tol`.
pub fn is_product_operator(u: &CMat4, tol: f64) -> bool {
    let mut r = [[C64::new(0.0, 0.0); 4]; 4];
    for i1 in 0..2 {
        for i2 in 0..2 {
            for j1 in 0..2 {
                for j2 in 0..2 {
                    r[2 * i1 + j1][2 * i2 + j2] = u.0[2 * i1 + i2][2 * j1 + j2];
                }
            }
        }
    }
    for a in 0..4 {
        for c in a + 1..4 {
            for b in 0..4 {
                for d in b + 1..4 {
                    if (r[a][b] * r[c][d] - r[a][d] * r[c][b]).norm() > tol {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// `|tr(U^dagger V)| / d`.
pub fn gate_fidelity<const N: usize>(u: &CMat<N>, v: &CMat<N>) -> Result<f64> {
    for m in [u, v] {
        let defect = m.unitarity_defect();
        if defect > UNITARY_TOLERANCE {
            return Err(Error::NotUnitary(defect));
        }
    }
    Ok((u.adjoint().matmul(v).trace().norm() / N as f64).min(1.0))
}

/// Max-entry difference of `e^{i phi} U` and `V` after choosing the global
/// phase `phi = arg tr(U^dagger V)`.
pub fn phase_aligned_distance<const N: usize>(u: &CMat<N>, v: &CMat<N>) -> f64 {
    let tr = u.adjoint().matmul(v).trace();
    let phase = if tr.norm() > 1e-12 {
        C64::from_polar(1.0, tr.arg())
    } else {
        // fall back to the largest entry of U
        let (mut best, mut idx) = (0.0, (0, 0));
        for i in 0..N {
            for j in 0..N {
                if u.0[i][j].norm() > best {
                    best = u.0[i][j].norm();
                    idx = (i, j);
                }
            }
        }
        let z = v.0[idx.0][idx.1] * u.0[idx.0][idx.1].conj();
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            C64::new(1.0, 0.0)
        }
    };
    u.scale(phase).max_abs_diff(v)
}

/// How the second period of the two-period protocol is derived from the first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReversalRule {
    /// `B(2 tau - t) = -B(t)`.
    #[default]
    Literal,
    /// `B(2 tau - t) = B(t)`.
    Retrace,
    /// `B(tau + t) = -B(t)`.
    Negate,
    /// `B(tau + t) = B(t)`.
    Repeat,
}

impl ReversalRule {
    pub const ALL: [ReversalRule; 4] = [
        ReversalRule::Literal,
        ReversalRule::Retrace,
        ReversalRule::Negate,
        ReversalRule::Repeat,
    ];

    pub fn second_period(self, s: &FieldSchedule) -> FieldSchedule {
        match self {
            ReversalRule::Literal => reversed_schedule(s),
            ReversalRule::Retrace => retraced_schedule(s),
            ReversalRule::Negate => negated_schedule(s),
            ReversalRule::Repeat => s.clone(),
        }
    }

    pub fn protocol(self, s: &FieldSchedule) -> FieldSchedule {
        concat(s, &self.second_period(s))
    }
}

/// Row-major complex matrix as `[re, im]` pairs, for JSON export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntries(pub Vec<Vec<[f64; 2]>>);

impl<const N: usize> From<&CMat<N>> for MatrixEntries {
    fn from(m: &CMat<N>) -> Self {
        MatrixEntries(
            m.0.iter()
                .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        )
    }
}

/// Phases of one pair member over the two-period protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPhases {
    pub dynamical_first: f64,
    pub dynamical_second: f64,
    pub dynamical_sum: f64,
    pub total: f64,
    pub geometric: f64,
    pub cyclicity_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub label: String,
    pub rule: ReversalRule,
    pub spec: GateSpec,
    /// One-loop phase decompositions of `psi_+` and `psi_-`.
    pub one_loop: [PhaseDecomposition; 2],
    /// Two-period phases of `psi_+` and `psi_-`.
    pub protocol: [ProtocolPhases; 2],
    pub matrix: MatrixEntries,
    /// Fidelity against the gate with doubled one-loop geometric phase.
    pub target_fidelity: f64,
    pub target_distance: f64,
    pub identity_fidelity: f64,
    pub identity_distance: f64,
    /// `max |U_2 - U_1^dagger|`; zero when the second period undoes the first.
    pub inverse_defect: f64,
    pub cyclic: bool,
    pub nontrivial: bool,
}

/// Runs the pair through one period and through `rule.protocol(s)`, and
/// scores the two-period evolution operator.
pub fn synthesize_double_loop(
    s: &FieldSchedule,
    pair: &CyclicPair,
    cfg: &PhaseConfig,
    rule: ReversalRule,
) -> Result<GateReport> {
    let one_loop = [decompose(s, &pair.psi_plus, cfg)?, decompose(s, &pair.psi_minus, cfg)?];
    let second = rule.second_period(s);
    let composite = concat(s, &second);
    let tau = s.duration();

    let mut protocol = Vec::with_capacity(2);
    for psi in [pair.psi_plus, pair.psi_minus] {
        let (traj, e) = propagate_for_phase(&composite, &psi, cfg)?;
        let last = traj.times.len() - 1;
        let mid = traj
            .index_of(tau)
            .ok_or_else(|| Error::InvalidParams("protocol grid misses the period boundary".into()))?;
        let first = -integrate_segments(&traj.times, &e, &traj.segment_ends, 0, mid, false);
        let second = -integrate_segments(&traj.times, &e, &traj.segment_ends, mid, last, false);
        let ov = psi.inner(traj.final_state());
        protocol.push(ProtocolPhases {
            dynamical_first: first,
            dynamical_second: second,
            dynamical_sum: first + second,
            total: ov.arg(),
            geometric: wrap_phase(ov.arg() - first - second),
            cyclicity_defect: 1.0 - ov.norm(),
        });
    }

    let u1 = evolution_operator(s, &cfg.propagator)?;
    let u2 = evolution_operator(&second, &cfg.propagator)?;
    let u = u2.matmul(&u1);
    let spec = GateSpec::new(pair.chi, 2.0 * one_loop[0].geometric);
    let target = gate_from_pair(pair, spec.gamma);
    let id = CMat2::identity();
    let cyclic = protocol.iter().all(|p| p.cyclicity_defect <= cfg.cyclic_threshold);
    Ok(GateReport {
        label: composite.label().to_string(),
        rule,
        spec,
        one_loop,
        protocol: [protocol[0], protocol[1]],
        matrix: MatrixEntries::from(&u),
        target_fidelity: gate_fidelity(&u, &target)?,
        target_distance: phase_aligned_distance(&u, &target),
        identity_fidelity: gate_fidelity(&u, &id)?,
        identity_distance: phase_aligned_distance(&u, &id),
        inverse_defect: u2.max_abs_diff(&u1.adjoint()),
        cyclic,
        nontrivial: phase_aligned_distance(&target, &id) > 1e-6,
    })
}

/// Whether reconstructed gates keep the dynamical phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicalPhase {
    Keep,
    #[default]
    Remove,
}

/// Evolution operator assembled column by column from runs of `|0>` and
/// `|1>`. With [`DynamicalPhase::Remove`] the dynamical phase of each pair
/// member is divided out along its projector.
pub fn reconstruct_gate_from_runs(
    s: &FieldSchedule,
    pair: &CyclicPair,
    cfg: &PhaseConfig,
    mode: DynamicalPhase,
) -> Result<CMat2> {
    let mut cols = [CVec2::zeros(); 2];
    for (k, col) in cols.iter_mut().enumerate() {
        let (traj, _) = propagate_for_phase(s, &CVec2::basis(k), cfg)?;
        *col = *traj.final_state();
    }
    let u = CMat2::from_columns(cols);
    match mode {
        DynamicalPhase::Keep => Ok(u),
        DynamicalPhase::Remove => {
            let dp = decompose(s, &pair.psi_plus, cfg)?.dynamical;
            let dm = decompose(s, &pair.psi_minus, cfg)?.dynamical;
            Ok(u.matmul(&projector_sum(
                pair,
                C64::from_polar(1.0, -dp),
                C64::from_polar(1.0, -dm),
            )))
        }
    }
}

/// One-loop geometric phase of `psi_+`.
pub fn measured_gamma(s: &FieldSchedule, pair: &CyclicPair, cfg: &PhaseConfig) -> Result<f64> {
    Ok(decompose(s, &pair.psi_plus, cfg)?.geometric)
}

/// Two-qubit evolution operator from runs of the four basis states.
pub fn two_qubit_operator(m: &TwoQubitModel, cfg: &PropagatorConfig, route: TwoQubitRoute) -> Result<CMat4> {
    let mut cols = [CVec4::zeros(); 4];
    for (k, col) in cols.iter_mut().enumerate() {
        *col = *propagate_two_qubit(m, &CVec4::basis(k), cfg, route)?.final_state();
    }
    Ok(CMat4::from_columns(cols))
}

/// Two-qubit gate with the dynamical phase of every conditional pair member
/// divided out. `pairs[delta]` is the target pair in control block `delta`.
pub fn reconstruct_two_qubit(
    m: &TwoQubitModel,
    pairs: &[CyclicPair; 2],
    cfg: &PhaseConfig,
    route: TwoQubitRoute,
) -> Result<CMat4> {
    let u = two_qubit_operator(m, &cfg.propagator, route)?;
    let mut correction = CMat4::zeros();
    for (delta, pair) in pairs.iter().enumerate() {
        for psi in [pair.psi_plus, pair.psi_minus] {
            let d = conditional_decomposition_two_qubit(m, delta as u8, &psi, cfg, route)?.dynamical;
            let v = kron_state(&CVec2::basis(delta), &psi);
            let w = C64::from_polar(1.0, -d);
            for i in 0..4 {
                for j in 0..4 {
                    correction.0[i][j] += w * v.0[i] * v.0[j].conj();
                }
            }
        }
    }
    Ok(u.matmul(&correction))
}

/// The same model run for two periods under `rule` on both qubits.
pub fn two_qubit_protocol(m: &TwoQubitModel, rule: ReversalRule) -> TwoQubitModel {
    TwoQubitModel {
        control: rule.protocol(&m.control),
        target: rule.protocol(&m.target),
        coupling: m.coupling,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{josephson_schedule, nmr_conditional_schedule, nmr_schedule, JosephsonParams, NmrParams};
    use crate::linalg::Vec3;
    use crate::phases::{cyclic_pair_josephson, cyclic_pair_nmr, phase_distance};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn build_gate_examples() {
        let g = 0.37;
        let z = build_gate(GateSpec::new(0.0, g));
        let want = CMat2::from_diag([C64::from_polar(1.0, g), C64::from_polar(1.0, -g)]);
        assert!(z.max_abs_diff(&want) < 1e-15);
        let phase_gate = CMat2::from_diag([c(1.0, 0.0), C64::from_polar(1.0, -2.0 * g)]).scale(C64::from_polar(1.0, g));
        assert!(z.max_abs_diff(&phase_gate) < 1e-15);

        let not = build_gate(GateSpec::new(FRAC_PI_2, FRAC_PI_2));
        assert!(not.max_abs_diff(&CMat2::pauli_x().scale(c(0.0, 1.0))) < 1e-15);

        assert!(build_gate(GateSpec::new(1.3, 0.0)).max_abs_diff(&CMat2::identity()) < 1e-15);

        let h = build_gate(GateSpec::new(FRAC_PI_2, FRAC_PI_4));
        let r = 0.5f64.sqrt();
        assert!(h.max_abs_diff(&CMat2::new(c(r, 0.0), c(0.0, r), c(0.0, r), c(r, 0.0))) < 1e-15);
        let out = h.apply(&CVec2::basis(0));
        assert!((out.0[0].norm() - out.0[1].norm()).abs() < 1e-15);
    }

    #[test]
    fn gate_from_pair_matches_build_gate() {
        for (chi, g) in [(0.3, 1.1), (2.0, -0.4), (PI, 0.9)] {
            let a = gate_from_pair(&CyclicPair::from_chi(chi), g);
            assert!(a.max_abs_diff(&build_gate(GateSpec::new(chi, g))) < 1e-15);
        }
        let p = CyclicPair::from_angles(0.8, 0.5);
        let u = gate_from_pair(&p, 0.7);
        assert!(
            u.apply(&p.psi_plus)
                .max_abs_diff(&p.psi_plus.scale(C64::from_polar(1.0, 0.7)))
                < 1e-15
        );
    }

    #[test]
    fn unitary_and_eigenphases_on_grid() {
        for i in 0..50 {
            for j in 0..50 {
                let chi = -PI + TAU * i as f64 / 49.0;
                let g = -PI + TAU * j as f64 / 49.0;
                let u = build_gate(GateSpec::new(chi, g));
                assert!(u.unitarity_defect() <= 1e-12);
                let pair = CyclicPair::from_chi(chi);
                let plus = u.apply(&pair.psi_plus) - pair.psi_plus.scale(C64::from_polar(1.0, g));
                let minus = u.apply(&pair.psi_minus) - pair.psi_minus.scale(C64::from_polar(1.0, -g));
                assert!(plus.norm() <= 1e-12 && minus.norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn two_qubit_examples() {
        let a = GateSpec::new(0.7, 0.4);
        let u = build_two_qubit(TwoQubitGateSpec { spec0: a, spec1: a });
        assert!(u.max_abs_diff(&crate::linalg::kron(&CMat2::identity(), &build_gate(a))) < 1e-15);
        assert!(is_product_operator(&u, 1e-12));

        let cp = build_two_qubit(TwoQubitGateSpec {
            spec0: GateSpec::new(0.0, 0.0),
            spec1: GateSpec::new(0.0, FRAC_PI_2),
        });
        let want = CMat4::from_diag([c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)]);
        assert!(cp.max_abs_diff(&want) < 1e-15);
        assert!(!is_product_operator(&cp, 1e-9));

        let fig = TwoQubitGateSpec {
            spec0: GateSpec::new(FRAC_PI_2, TAU),
            spec1: GateSpec::new(0.25f64.acos(), 1.5 * PI),
        };
        let u = build_two_qubit(fig);
        assert!(nontrivial_two_qubit(fig));
        assert!(!is_product_operator(&u, 1e-9));
        // the control-0 block is the identity, the control-1 block a spin flip
        // about the tilted axis
        assert!(phase_aligned_distance(&u, &block_diag(&CMat2::identity(), &build_gate(fig.spec1))) < 1e-15);
    }

    #[test]
    fn two_qubit_commutes_with_control_z() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let zc = crate::linalg::kron(&CMat2::pauli_z(), &CMat2::identity());
        for _ in 0..200 {
            let spec = TwoQubitGateSpec {
                spec0: GateSpec::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)),
                spec1: GateSpec::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)),
            };
            assert!(build_two_qubit(spec).commutator(&zc).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn commutation_examples() {
        let a = GateSpec::new(0.0, FRAC_PI_2);
        let b = GateSpec::new(FRAC_PI_2, FRAC_PI_2);
        assert!(noncommutable(a, b));
        assert!(commutator_max(a, b) > COMMUTATOR_TOLERANCE);
        assert!(!noncommutable(GateSpec::new(0.4, 1.0), GateSpec::new(0.4, 2.0)));
        assert!(!noncommutable(GateSpec::new(0.1, PI), GateSpec::new(1.4, 0.8)));
        assert!(commutator_max(GateSpec::new(0.1, PI), GateSpec::new(1.4, 0.8)) <= COMMUTATOR_TOLERANCE);
    }

    #[test]
    fn nontriviality_examples() {
        let a = GateSpec::new(0.5, 0.2);
        assert!(!nontrivial_two_qubit(TwoQubitGateSpec { spec0: a, spec1: a }));
        let fig = TwoQubitGateSpec {
            spec0: GateSpec::new(0.5, TAU),
            spec1: GateSpec::new(0.5, 1.5 * PI),
        };
        assert!(nontrivial_two_qubit(fig));
        let wrapped = TwoQubitGateSpec {
            spec0: GateSpec::new(0.5, 0.0),
            spec1: GateSpec::new(0.5, TAU),
        };
        assert!(!nontrivial_two_qubit(wrapped));
    }

    #[test]
    fn fidelity_examples() {
        let u = build_gate(GateSpec::new(0.9, 0.3));
        assert!((gate_fidelity(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        let flip = CMat2::pauli_x().scale(c(0.0, 1.0));
        assert!(gate_fidelity(&CMat2::identity(), &flip).unwrap() < 1e-15);
        let shifted = u.scale(C64::from_polar(1.0, 2.2));
        assert!((gate_fidelity(&shifted, &u).unwrap() - 1.0).abs() < 1e-15);
        assert!(phase_aligned_distance(&shifted, &u) < 1e-15);
        let bad = CMat2::identity().scale(c(1.1, 0.0));
        assert!(matches!(gate_fidelity(&bad, &u), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn product_test_on_known_operators() {
        let a = build_gate(GateSpec::new(0.3, 0.9));
        let b = build_gate(GateSpec::new(2.1, -0.4));
        assert!(is_product_operator(&crate::linalg::kron(&a, &b), 1e-12));
        let cnot = block_diag(&CMat2::identity(), &CMat2::pauli_x());
        assert!(!is_product_operator(&cnot, 1e-3));
    }

    #[test]
    fn constant_field_protocol_is_identity() {
        let s = FieldSchedule::constant("z", Vec3::new(0.0, 0.0, 1.3), 2.0);
        let pair = CyclicPair::from_chi(0.0);
        let r = synthesize_double_loop(&s, &pair, &PhaseConfig::default(), ReversalRule::Literal).unwrap();
        assert!(r.identity_distance < 1e-9);
        assert!((r.identity_fidelity - 1.0).abs() < 1e-12);
        for p in r.protocol {
            assert!(p.dynamical_sum.abs() < 1e-12);
            assert!((p.dynamical_first + 1.3).abs() < 1e-12 || (p.dynamical_first - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn literal_reversal_undoes_the_first_period() {
        let p = NmrParams {
            omega0: 2.0 * 15f64.sqrt(),
            omega1: 1.0 - 1.4,
            omega: 1.4,
            coupling: 1.0,
            delta: 1,
        };
        let s = nmr_conditional_schedule(&p).unwrap();
        let pair = cyclic_pair_nmr(&p).unwrap();
        let r = synthesize_double_loop(&s, &pair, &PhaseConfig::default(), ReversalRule::Literal).unwrap();
        assert!(r.inverse_defect < 1e-9);
        assert!(r.identity_distance < 1e-8);
        assert!(r.cyclic);
        for ph in r.protocol {
            assert!(ph.dynamical_sum.abs() <= 1e-6);
            assert!(phase_distance(ph.geometric, 0.0) < 1e-8);
        }
        assert!(r.nontrivial);
        assert!(r.target_fidelity < 0.9);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"rule\":\"literal\""));
    }

    #[test]
    fn repeat_rule_doubles_both_phases() {
        let p = NmrParams::single(1.2, 0.4, 0.9);
        let s = nmr_schedule(&p).unwrap();
        let pair = cyclic_pair_nmr(&p).unwrap();
        let r = synthesize_double_loop(&s, &pair, &PhaseConfig::default(), ReversalRule::Repeat).unwrap();
        let one = r.one_loop[0];
        assert!((r.protocol[0].dynamical_second - one.dynamical).abs() < 1e-8);
        assert!(phase_distance(r.protocol[0].geometric, 2.0 * one.geometric) < 1e-8);
    }

    #[test]
    fn retrace_and_negate_rules_run() {
        let jp = JosephsonParams {
            e1: 1.5625,
            e2: 6.25,
            ech: 39.0625,
            ei: 0.0,
            chi0: 0.75f64.acos(),
            omega: 1.1,
            nxc: 0.0,
            delta: 0,
        };
        let s = josephson_schedule(&jp).unwrap();
        let pair = cyclic_pair_josephson(&jp).unwrap();
        for rule in [ReversalRule::Retrace, ReversalRule::Negate] {
            let r = synthesize_double_loop(&s, &pair, &PhaseConfig::default(), rule).unwrap();
            assert!(r.target_fidelity <= 1.0 && r.identity_fidelity <= 1.0);
            assert_eq!(r.protocol.len(), 2);
        }
    }

    #[test]
    fn reconstruction_examples() {
        let cfg = PhaseConfig::default();
        let zero = FieldSchedule::constant("zero", Vec3::ZERO, 1.0);
        let u = reconstruct_gate_from_runs(&zero, &CyclicPair::from_chi(0.0), &cfg, DynamicalPhase::Keep).unwrap();
        assert!(u.max_abs_diff(&CMat2::identity()) < 1e-15);

        let s = FieldSchedule::constant("z", Vec3::new(0.0, 0.0, 0.8), 1.5);
        let pair = CyclicPair::from_chi(0.0);
        let u = reconstruct_gate_from_runs(&s, &pair, &cfg, DynamicalPhase::Remove).unwrap();
        let g = measured_gamma(&s, &pair, &cfg).unwrap();
        assert!(phase_aligned_distance(&u, &build_gate(GateSpec::new(0.0, g))) < 1e-6);

        let p = NmrParams::single(1.0, 0.3, 0.7);
        let s = nmr_schedule(&p).unwrap();
        let pair = cyclic_pair_nmr(&p).unwrap();
        let geo = reconstruct_gate_from_runs(&s, &pair, &cfg, DynamicalPhase::Remove).unwrap();
        let g = measured_gamma(&s, &pair, &cfg).unwrap();
        assert!(phase_aligned_distance(&geo, &build_gate(GateSpec::new(pair.chi, g))) < 1e-6);
        let raw = reconstruct_gate_from_runs(&s, &pair, &cfg, DynamicalPhase::Keep).unwrap();
        let total = decompose(&s, &pair.psi_plus, &cfg).unwrap().total;
        assert!(phase_aligned_distance(&raw, &build_gate(GateSpec::new(pair.chi, total))) < 1e-6);
        assert!(phase_aligned_distance(&raw, &build_gate(GateSpec::new(pair.chi, g))) > 1e-3);
    }

    #[test]
    fn two_qubit_reconstruction_is_block_consistent() {
        let cfg = PhaseConfig::default();
        let p = NmrParams {
            omega0: 2.0 * 15f64.sqrt(),
            omega1: 1.0 - 2.0,
            omega: 2.0,
            coupling: 1.0,
            delta: 0,
        };
        let m = TwoQubitModel::nmr(&p, 30.0, false).unwrap();
        let pairs = [cyclic_pair_nmr(&p).unwrap(), cyclic_pair_nmr(&p.with_delta(1)).unwrap()];
        let u = reconstruct_two_qubit(&m, &pairs, &cfg, TwoQubitRoute::Dense).unwrap();
        assert!(u.unitarity_defect() < 1e-9);
        let mut gammas = [0.0; 2];
        for d in 0..2u8 {
            let s = nmr_conditional_schedule(&p.with_delta(d)).unwrap();
            gammas[d as usize] = measured_gamma(&s, &pairs[d as usize], &cfg).unwrap();
        }
        let want = build_two_qubit(TwoQubitGateSpec {
            spec0: GateSpec::new(pairs[0].chi, gammas[0]),
            spec1: GateSpec::new(pairs[1].chi, gammas[1]),
        });
        assert!(u.max_abs_diff(&want) < 1e-6);
        let twice = two_qubit_protocol(&m, ReversalRule::Repeat);
        let u2 = two_qubit_operator(&twice, &cfg.propagator, TwoQubitRoute::Block).unwrap();
        assert!(u2.unitarity_defect() < 1e-9);
    }

    #[test]
    fn random_pairs_agree_with_commutator() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
        let mut disagreements = 0;
        for _ in 0..10_000 {
            let a = GateSpec::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let b = GateSpec::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            if noncommutable(a, b) != (commutator_max(a, b) > COMMUTATOR_TOLERANCE) {
                disagreements += 1;
            }
        }
        assert_eq!(disagreements, 0);
    }

    proptest! {
        #[test]
        fn built_gates_are_unitary(chi in -10.0f64..10.0, g in -10.0f64..10.0) {
            prop_assert!(build_gate(GateSpec::new(chi, g)).unitarity_defect() <= 1e-12);
        }

        #[test]
        fn commutator_vanishes_on_zero_set(chi in -PI..PI, g1 in -PI..PI, g2 in -PI..PI, k in -3i32..3) {
            let a = GateSpec::new(chi, g1);
            let b = GateSpec::new(chi + k as f64 * PI, g2);
            prop_assert!(commutator_max(a, b) <= COMMUTATOR_TOLERANCE);
            let c = GateSpec::new(chi + 0.7, k as f64 * PI);
            prop_assert!(commutator_max(a, c) <= COMMUTATOR_TOLERANCE);
        }

        #[test]
        fn fidelity_is_phase_invariant(chi in -PI..PI, g in -PI..PI, phi in -PI..PI) {
            let u = build_gate(GateSpec::new(chi, g));
            let f = gate_fidelity(&u.scale(C64::from_polar(1.0, phi)), &u).unwrap();
            prop_assert!((f - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gates_with_shared_axis_commute(chi in -PI..PI, g1 in -PI..PI, g2 in -PI..PI) {
            prop_assert!(!noncommutable(GateSpec::new(chi, g1), GateSpec::new(chi, g2)));
        }
    }
}
