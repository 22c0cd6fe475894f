//! Cyclic states and the split of their phases into dynamical and geometric
//! parts.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * `total = arg <psi(0)|psi(T)>`
//! * `dynamical = -integral of <psi|H|psi> dt`
//! * `geometric = total - dynamical`, reduced to `(-pi, pi]`
//! * the solid-angle route evaluates `-1/2 closed-integral (1 - cos theta) dphi`
//!   along the Bloch path.
//!
//! For the rotating NMR field the Bloch vector of `psi_plus` circles the
//! z axis in the positive sense, so its one-loop phase is `-pi (1 - cos chi)`.
//! The charge-qubit drive rotates the other way and gives `+pi (1 - cos chi0)`.
//! Comparisons against the closed-form law are made mod `2 pi` and up to
//! the sign of the label.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{
    evolution_operator, propagate, propagate_two_qubit, BlochPath, PropagatorConfig, Trajectory, Trajectory2,
    TwoQubitRoute,
};
use crate::fields::{josephson_conditional_schedule, FieldSchedule, JosephsonParams, NmrParams, TwoQubitModel};
use crate::linalg::{bloch_unchecked, expm_pauli, kron_state, BlochVector, CVec, CVec2, Vec3, C64};

/// Reduces a phase to `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// `|a - b|` measured on the circle.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// Distance of `gamma` from `+target` or `-target`, whichever is closer, mod `2 pi`.
pub fn signed_law_distance(gamma: f64, target: f64) -> f64 {
    phase_distance(gamma, target).min(phase_distance(gamma, -target))
}

/// Adds multiples of `2 pi` so consecutive values never jump by more than `pi`.
pub fn unwrap_phases(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &v in values {
        if let Some(p) = prev {
            offset -= TAU * ((v + offset - p) / TAU).round();
        }
        let u = v + offset;
        out.push(u);
        prev = Some(u);
    }
    out
}

/// Orthogonal pair `psi_+ = cos(chi/2)|0> + e^{i phi} sin(chi/2)|1>`,
/// `psi_- = -e^{-i phi} sin(chi/2)|0> + cos(chi/2)|1>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CyclicPair {
    pub chi: f64,
    pub azimuth: f64,
    pub psi_plus: CVec2,
    pub psi_minus: CVec2,
    pub n0: BlochVector,
}

impl CyclicPair {
    pub fn from_chi(chi: f64) -> Self {
        Self::from_angles(chi, 0.0)
    }

    pub fn from_angles(chi: f64, azimuth: f64) -> Self {
        let (s, c) = (chi / 2.0).sin_cos();
        let psi_plus = CVec2::new(C64::new(c, 0.0), C64::from_polar(s, azimuth));
        let psi_minus = CVec2::new(-C64::from_polar(s, -azimuth), C64::new(c, 0.0));
        let (ss, cc) = chi.sin_cos();
        let n0 = BlochVector(Vec3::new(ss * azimuth.cos(), ss * azimuth.sin(), cc));
        CyclicPair {
            chi,
            azimuth,
            psi_plus,
            psi_minus,
            n0,
        }
    }

    /// The pair carried along by a rotation of the field by `dchi` about y.
    pub fn rotated(&self, dchi: f64) -> Self {
        if self.azimuth == 0.0 {
            return Self::from_chi(self.chi + dchi);
        }
        let r = expm_pauli(Vec3::new(0.0, 1.0, 0.0), -dchi / 2.0);
        let (p, m) = (r.apply(&self.psi_plus), r.apply(&self.psi_minus));
        let (theta, phi) = bloch_unchecked(&p).angles();
        CyclicPair {
            chi: theta,
            azimuth: phi,
            psi_plus: p,
            psi_minus: m,
            n0: bloch_unchecked(&p),
        }
    }

    pub fn overlap(&self) -> C64 {
        self.psi_plus.inner(&self.psi_minus)
    }
}

/// `chi = atan2(w0, w1 + (2 delta - 1) J + w)`, so `chi` lies in `(0, pi)`
/// whenever `w0 > 0` and exceeds `pi/2` for negative denominators.
pub fn cyclic_pair_nmr(p: &NmrParams) -> Result<CyclicPair> {
    p.validate()?;
    let denom = p.conditional_z() + p.omega;
    if p.omega0 == 0.0 && denom == 0.0 {
        return Err(Error::InvalidParams("w0 = 0 and w1 + w = 0: no preferred axis".into()));
    }
    Ok(CyclicPair::from_chi(p.omega0.atan2(denom)))
}

/// Samples per period used to verify the cone-preserving drive.
const DRIVE_CHECK_SAMPLES: usize = 4096;

/// The designed charge-qubit drive keeps `atan(E_J / (B_z - w)) = chi0`;
/// this checks it on a dense grid before returning the pair.
pub fn cyclic_pair_josephson(p: &JosephsonParams) -> Result<CyclicPair> {
    let s = josephson_conditional_schedule(p)?;
    let dev = s
        .grid(DRIVE_CHECK_SAMPLES)
        .into_iter()
        .map(|t| {
            let b = s.sample(t);
            (b.x.hypot(b.y).atan2(b.z - p.omega) - p.chi0).abs()
        })
        .fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(Error::DriveInconsistent(dev));
    }
    Ok(CyclicPair::from_chi(p.chi0))
}

/// Cyclic pair from the eigenvectors of the one-period evolution operator.
/// Works for any periodic schedule; `psi_plus` is the eigenvector with the
/// larger `<sigma_z>`.
pub fn cyclic_pair_floquet(s: &FieldSchedule, cfg: &PropagatorConfig) -> Result<CyclicPair> {
    let u = evolution_operator(s, cfg)?;
    let [[a, b], [c, d]] = u.0;
    if b.norm() < 1e-13 && c.norm() < 1e-13 {
        return Ok(CyclicPair::from_chi(0.0));
    }
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - det * 4.0).sqrt();
    let lambda = (tr + disc) / 2.0;
    let v1 = CVec2::new(b, lambda - a);
    let v2 = CVec2::new(lambda - d, c);
    let v = if v1.norm() >= v2.norm() { v1 } else { v2 }.normalized();
    let mut n = bloch_unchecked(&v);
    if n.0.z < 0.0 {
        n = BlochVector(-n.0);
    }
    let (chi, phi) = n.angles();
    Ok(CyclicPair::from_angles(chi, phi))
}

/// `max(1 - |<psi(0)|psi(T)>|)` over both pair members.
pub fn verify_cyclic(s: &FieldSchedule, pair: &CyclicPair, cfg: &PropagatorConfig) -> Result<f64> {
    let mut worst = 0.0f64;
    for psi in [pair.psi_plus, pair.psi_minus] {
        let traj = propagate(s, &psi, cfg)?;
        worst = worst.max(1.0 - psi.inner(traj.final_state()).norm());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub propagator: PropagatorConfig,
    /// Accepted change of the dynamical-phase quadrature under grid halving (rad).
    pub quadrature_tolerance: f64,
    /// Largest cyclicity defect for which a decomposition is marked valid.
    pub cyclic_threshold: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            propagator: PropagatorConfig::default(),
            quadrature_tolerance: 1e-9,
            cyclic_threshold: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecomposition {
    pub total: f64,
    pub dynamical: f64,
    pub geometric: f64,
    pub cyclicity_defect: f64,
    pub valid: bool,
}

/// Energy samples of each grid segment. The field is read a hair inside the
/// segment at both ends, so jumps at breakpoints land on the correct side.
pub(crate) fn segment_energies<const N: usize>(
    traj: &Trajectory<N>,
    energy: impl Fn(f64, &CVec<N>) -> f64,
) -> Vec<Vec<f64>> {
    traj.segment_ends
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let nudge = 1e-9 * (traj.times[b] - traj.times[a]) / (b - a) as f64;
            (a..=b)
                .map(|k| {
                    let t = if k == a {
                        traj.times[k] + nudge
                    } else if k == b {
                        traj.times[k] - nudge
                    } else {
                        traj.times[k]
                    };
                    energy(t, &traj.states[k])
                })
                .collect()
        })
        .collect()
}

pub(crate) fn spin_energies(s: &FieldSchedule, traj: &Trajectory2) -> Vec<Vec<f64>> {
    segment_energies(traj, |t, psi| -0.5 * s.sample(t).dot(bloch_unchecked(psi).0))
}

/// Composite Simpson over the segments lying between samples `from` and
/// `to` (both segment ends). `coarse` uses every other sample.
pub(crate) fn integrate_segments(
    times: &[f64],
    segments: &[Vec<f64>],
    ends: &[usize],
    from: usize,
    to: usize,
    coarse: bool,
) -> f64 {
    let mut total = 0.0;
    for (w, f) in ends.windows(2).zip(segments) {
        let (a, b) = (w[0], w[1]);
        if a < from || b > to {
            continue;
        }
        let t = &times[a..=b];
        if coarse && (b - a) % 2 == 0 && b - a >= 4 {
            let tc: Vec<f64> = t.iter().step_by(2).copied().collect();
            let fc: Vec<f64> = f.iter().step_by(2).copied().collect();
            total += simpson_uniform(&tc, &fc);
        } else {
            total += simpson_uniform(t, f);
        }
    }
    total
}

fn simpson_uniform(t: &[f64], f: &[f64]) -> f64 {
    let n = t.len() - 1;
    if n == 1 {
        return 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
    }
    let h = (t[n] - t[0]) / n as f64;
    // odd counts finish with the 3/8 rule over the last three intervals
    let even = if n % 2 == 0 { n } else { n - 3 };
    let mut sum = 0.0;
    if even > 0 {
        let mut acc = f[0] + f[even];
        for k in 1..even {
            acc += if k % 2 == 1 { 4.0 * f[k] } else { 2.0 * f[k] };
        }
        sum += acc * h / 3.0;
    }
    if n % 2 == 1 {
        sum += 3.0 * h / 8.0 * (f[n - 3] + 3.0 * f[n - 2] + 3.0 * f[n - 1] + f[n]);
    }
    sum
}

/// Decomposition of an already propagated trajectory between samples
/// `from` and `to` (both on segment ends).
pub fn decompose_span(s: &FieldSchedule, traj: &Trajectory2, from: usize, to: usize) -> PhaseDecomposition {
    let e = spin_energies(s, traj);
    let dynamical = -integrate_segments(&traj.times, &e, &traj.segment_ends, from, to, false);
    let ov = traj.states[from].inner(&traj.states[to]);
    let total = ov.arg();
    PhaseDecomposition {
        total,
        dynamical,
        geometric: wrap_phase(total - dynamical),
        cyclicity_defect: 1.0 - ov.norm(),
        valid: true,
    }
}

/// Propagates `psi0` over the schedule and splits the acquired phase.
/// The grid is refined until the dynamical-phase quadrature is stable.
pub fn decompose(s: &FieldSchedule, psi0: &CVec2, cfg: &PhaseConfig) -> Result<PhaseDecomposition> {
    let (traj, _) = propagate_for_phase(s, psi0, cfg)?;
    let mut d = decompose_span(s, &traj, 0, traj.times.len() - 1);
    d.valid = d.cyclicity_defect <= cfg.cyclic_threshold;
    Ok(d)
}

/// Extra grid doublings allowed for the dynamical-phase quadrature.
const QUADRATURE_DOUBLINGS: u32 = 4;

/// Trajectory whose dynamical-phase quadrature is converged, plus the
/// per-segment energies.
pub(crate) fn propagate_for_phase(
    s: &FieldSchedule,
    psi0: &CVec2,
    cfg: &PhaseConfig,
) -> Result<(Trajectory2, Vec<Vec<f64>>)> {
    let mut pcfg = cfg.propagator;
    loop {
        let traj = propagate(s, psi0, &pcfg)?;
        let e = spin_energies(s, &traj);
        let last = traj.times.len() - 1;
        let fine = integrate_segments(&traj.times, &e, &traj.segment_ends, 0, last, false);
        let coarse = integrate_segments(&traj.times, &e, &traj.segment_ends, 0, last, true);
        let change = (fine - coarse).abs();
        if change <= cfg.quadrature_tolerance {
            return Ok((traj, e));
        }
        if pcfg.steps_per_period >= (cfg.propagator.steps_per_period << QUADRATURE_DOUBLINGS) {
            return Err(Error::NonConvergence {
                steps_per_period: pcfg.steps_per_period,
                change,
            });
        }
        pcfg.steps_per_period *= 2;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolidAngleResult {
    /// `-1/2 closed-integral (1 - cos theta) dphi`.
    pub gamma: f64,
    pub winding: i64,
    pub theta_range: (f64, f64),
}

/// Largest endpoint gap accepted as a closed path.
pub const CLOSURE_TOLERANCE: f64 = 1e-6;
const POLE_EPS: f64 = 1e-7;

/// Evaluates `-1/2 closed-integral (1 - cos theta) dphi` along the path with an
/// unwrapped azimuth.
///
/// Within each segment, consecutive sample triples are interpolated by
/// quadratics in `t` and `g dphi/dt` is integrated exactly. Where
/// `sin theta < 1e-7` the azimuth is carried over from the neighbouring sample.
pub fn solid_angle(path: &BlochPath) -> Result<SolidAngleResult> {
    let pts = &path.points;
    if pts.len() < 2 {
        return Err(Error::OpenPath(f64::INFINITY));
    }
    let gap = pts[0].0.max_abs_diff(pts[pts.len() - 1].0);
    if gap > CLOSURE_TOLERANCE {
        return Err(Error::OpenPath(gap));
    }
    let units: Vec<Vec3> = pts.iter().map(|p| p.0 * (1.0 / p.0.norm())).collect();
    let g: Vec<f64> = units.iter().map(|n| 1.0 - n.z).collect();

    let raw: Vec<Option<f64>> = units
        .iter()
        .map(|n| (n.x.hypot(n.y) >= POLE_EPS).then(|| n.y.atan2(n.x)))
        .collect();
    let Some(first) = raw.iter().flatten().next().copied() else {
        // the whole path sits on a pole
        let z = units[0].z;
        return Ok(SolidAngleResult {
            gamma: 0.0,
            winding: 0,
            theta_range: (z.acos(), z.acos()),
        });
    };
    let mut phi = Vec::with_capacity(raw.len());
    let mut prev = first;
    for r in &raw {
        let v = match r {
            Some(a) => prev + wrap_phase(a - prev),
            None => prev,
        };
        phi.push(v);
        prev = v;
    }

    let t = &path.times;
    let mut integral = 0.0;
    for w in path.segment_ends.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut k = a;
        while k + 2 <= b {
            integral += panel_integral(&t[k..k + 3], &g[k..k + 3], &phi[k..k + 3]);
            k += 2;
        }
        if k < b {
            // trailing single interval: trapezoid in g against dphi
            integral += 0.5 * (g[k] + g[k + 1]) * (phi[k + 1] - phi[k]);
        }
    }

    let (tmin, tmax) = units
        .iter()
        .map(|n| n.z.clamp(-1.0, 1.0).acos())
        .fold((f64::MAX, f64::MIN), |(lo, hi), th| (lo.min(th), hi.max(th)));
    let winding = ((phi[phi.len() - 1] - phi[0]) / TAU).round() as i64;
    Ok(SolidAngleResult {
        gamma: -0.5 * integral,
        winding,
        theta_range: (tmin, tmax),
    })
}

/// `integral g dphi` over `[t0, t2]` with quadratic interpolants of `g` and
/// `phi`, evaluated by 3-point Gauss-Legendre (exact for the cubic integrand).
fn panel_integral(t: &[f64], g: &[f64], phi: &[f64]) -> f64 {
    const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let (t0, t1, t2) = (t[0], t[1], t[2]);
    let lagrange = |x: f64, f: &[f64]| {
        f[0] * (x - t1) * (x - t2) / ((t0 - t1) * (t0 - t2))
            + f[1] * (x - t0) * (x - t2) / ((t1 - t0) * (t1 - t2))
            + f[2] * (x - t0) * (x - t1) / ((t2 - t0) * (t2 - t1))
    };
    let dlagrange = |x: f64, f: &[f64]| {
        f[0] * (2.0 * x - t1 - t2) / ((t0 - t1) * (t0 - t2))
            + f[1] * (2.0 * x - t0 - t2) / ((t1 - t0) * (t1 - t2))
            + f[2] * (2.0 * x - t0 - t1) / ((t2 - t0) * (t2 - t1))
    };
    let (mid, half) = ((t0 + t2) / 2.0, (t2 - t0) / 2.0);
    NODES
        .iter()
        .zip(WEIGHTS)
        .map(|(&x, w)| {
            let s = mid + half * x;
            w * lagrange(s, g) * dlagrange(s, phi)
        })
        .sum::<f64>()
        * half
}

/// Geometric phases of both pair members.
pub fn antisymmetry_check(s: &FieldSchedule, pair: &CyclicPair, cfg: &PhaseConfig) -> Result<(f64, f64)> {
    let plus = decompose(s, &pair.psi_plus, cfg)?;
    let minus = decompose(s, &pair.psi_minus, cfg)?;
    Ok((plus.geometric, minus.geometric))
}

/// Adiabatic (Berry) phase: the solid-angle integral along the instantaneous
/// field direction, with the same sign convention as [`solid_angle`].
pub fn berry_adiabatic(s: &FieldSchedule, samples_per_period: usize) -> Result<f64> {
    let grid = crate::evolve::Grid::for_schedule(s, samples_per_period);
    let times = grid.points();
    let mut points = Vec::with_capacity(times.len());
    for &t in &times {
        let b = s.sample(t);
        let nb = b.norm();
        if !(nb > 1e-14) {
            return Err(Error::VanishingField(t));
        }
        points.push(BlochVector(b * (1.0 / nb)));
    }
    let path = BlochPath {
        times,
        points,
        label: format!("{} field direction", s.label()),
        segment_ends: grid.segment_ends(),
    };
    Ok(solid_angle(&path)?.gamma)
}

/// Conditional phase of target state `psi` in control block `delta`, from the
/// full two-qubit evolution of `|delta> (x) psi`.
pub fn conditional_decomposition_two_qubit(
    m: &TwoQubitModel,
    delta: u8,
    psi: &CVec2,
    cfg: &PhaseConfig,
    route: TwoQubitRoute,
) -> Result<PhaseDecomposition> {
    let psi0 = kron_state(&CVec2::basis(delta as usize), psi);
    let mut pcfg = cfg.propagator;
    loop {
        let traj = propagate_two_qubit(m, &psi0, &pcfg, route)?;
        let e = segment_energies(&traj, |t, psi| m.hamiltonian(t).expectation(psi).re);
        let last = traj.times.len() - 1;
        let fine = integrate_segments(&traj.times, &e, &traj.segment_ends, 0, last, false);
        let coarse = integrate_segments(&traj.times, &e, &traj.segment_ends, 0, last, true);
        let change = (fine - coarse).abs();
        if change <= cfg.quadrature_tolerance {
            let ov = psi0.inner(traj.final_state());
            let total = ov.arg();
            let defect = 1.0 - ov.norm();
            return Ok(PhaseDecomposition {
                total,
                dynamical: -fine,
                geometric: wrap_phase(total + fine),
                cyclicity_defect: defect,
                valid: defect <= cfg.cyclic_threshold,
            });
        }
        if pcfg.steps_per_period >= (cfg.propagator.steps_per_period << QUADRATURE_DOUBLINGS) {
            return Err(Error::NonConvergence {
                steps_per_period: pcfg.steps_per_period,
                change,
            });
        }
        pcfg.steps_per_period *= 2;
    }
}
