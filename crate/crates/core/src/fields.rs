//! Effective-field schedules for the NMR and charge-qubit platforms.
//!
//! A [`FieldSchedule`] is an analytic map `t -> B(t)` (energy units, `hbar = 1`)
//! together with its loop period and total duration. Schedules compose by
//! rotation, reversal and concatenation; composition never tabulates.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, CMat2, CMat4, Vec3, C64};

type Sampler = Arc<dyn Fn(f64) -> Vec3 + Send + Sync>;

/// Default number of samples per period for tabulation and export.
pub const DEFAULT_SAMPLES_PER_PERIOD: usize = 4096;

#[derive(Clone)]
pub struct FieldSchedule {
    label: String,
    period: f64,
    duration: f64,
    breakpoints: Vec<f64>,
    sampler: Sampler,
}

impl fmt::Debug for FieldSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSchedule")
            .field("label", &self.label)
            .field("period", &self.period)
            .field("duration", &self.duration)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl FieldSchedule {
    /// Single-loop schedule of duration `period`.
    pub fn new(label: impl Into<String>, period: f64, f: impl Fn(f64) -> Vec3 + Send + Sync + 'static) -> Self {
        FieldSchedule {
            label: label.into(),
            period,
            duration: period,
            breakpoints: vec![0.0, period],
            sampler: Arc::new(f),
        }
    }

    pub fn constant(label: impl Into<String>, b: Vec3, period: f64) -> Self {
        Self::new(label, period, move |_| b)
    }

    pub fn sample(&self, t: f64) -> Vec3 {
        (self.sampler)(t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Segment boundaries, including `0` and `duration`. Propagation grids
    /// always contain these points.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Runs the first loop `loops` times back to back.
    pub fn repeated(&self, loops: usize) -> Self {
        let loops = loops.max(1);
        let inner = self.clone();
        let d = self.duration;
        let breakpoints = (0..=loops).map(|k| k as f64 * d).collect();
        FieldSchedule {
            label: format!("{} x{}", self.label, loops),
            period: self.period,
            duration: d * loops as f64,
            breakpoints,
            sampler: Arc::new(move |t| {
                let k = (t / d).floor().clamp(0.0, (loops - 1) as f64);
                inner.sample(t - k * d)
            }),
        }
    }

    /// Uniform grid over each segment with `per_period` points per period.
    pub fn grid(&self, per_period: usize) -> Vec<f64> {
        segment_grid(&self.breakpoints, self.period, per_period, false)
    }

    pub fn sample_grid(&self, per_period: usize) -> Vec<(f64, Vec3)> {
        self.grid(per_period).into_iter().map(|t| (t, self.sample(t))).collect()
    }
}

/// Uniform sub-grid of each segment `[b_k, b_{k+1}]`; with `even` every
/// segment gets an even number of intervals (for Simpson quadrature).
pub(crate) fn segment_grid(breakpoints: &[f64], period: f64, per_period: usize, even: bool) -> Vec<f64> {
    let mut grid = vec![breakpoints[0]];
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let mut n = ((per_period as f64) * len / period).ceil().max(2.0) as usize;
        if even && n % 2 == 1 {
            n += 1;
        }
        let h = len / n as f64;
        for k in 1..n {
            grid.push(a + k as f64 * h);
        }
        grid.push(b);
    }
    grid
}

/// NMR single-qubit drive: `B(t) = (w0 cos wt, w0 sin wt, w1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmrParams {
    pub omega0: f64,
    pub omega1: f64,
    pub omega: f64,
    /// `J` in `H_I = J sigma_z sigma_z / 2`; zero for a lone qubit.
    #[serde(default)]
    pub coupling: f64,
    /// Control-qubit state `delta` in `{0, 1}`.
    #[serde(default)]
    pub delta: u8,
}

impl NmrParams {
    pub fn single(omega0: f64, omega1: f64, omega: f64) -> Self {
        NmrParams {
            omega0,
            omega1,
            omega,
            coupling: 0.0,
            delta: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(self.omega0 >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega0 must be non-negative, got {}",
                self.omega0
            )));
        }
        if self.delta > 1 {
            return Err(Error::InvalidParams(format!(
                "delta must be 0 or 1, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    /// Target z-field seen for control state `delta`: `w1 + (2 delta - 1) J`.
    pub fn conditional_z(&self) -> f64 {
        self.omega1 + (2.0 * self.delta as f64 - 1.0) * self.coupling
    }

    pub fn with_delta(mut self, delta: u8) -> Self {
        self.delta = delta;
        self
    }
}

fn nmr_field(omega0: f64, z: f64, omega: f64) -> impl Fn(f64) -> Vec3 + Send + Sync + 'static {
    move |t| {
        let (s, c) = (omega * t).sin_cos();
        Vec3::new(omega0 * c, omega0 * s, z)
    }
}

pub fn nmr_schedule(p: &NmrParams) -> Result<FieldSchedule> {
    p.validate()?;
    Ok(FieldSchedule::new(
        format!("nmr w0={} w1={} w={}", p.omega0, p.omega1, p.omega),
        p.period(),
        nmr_field(p.omega0, p.omega1, p.omega),
    ))
}

/// Target-qubit schedule for control state `p.delta`.
pub fn nmr_conditional_schedule(p: &NmrParams) -> Result<FieldSchedule> {
    p.validate()?;
    Ok(FieldSchedule::new(
        format!(
            "nmr-conditional w0={} w1={} w={} J={} delta={}",
            p.omega0, p.omega1, p.omega, p.coupling, p.delta
        ),
        p.period(),
        nmr_field(p.omega0, p.conditional_z(), p.omega),
    ))
}

/// Charge qubit in an asymmetric SQUID with the cone-preserving drive.
///
/// All energies in ueV, `hbar = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JosephsonParams {
    pub e1: f64,
    pub e2: f64,
    pub ech: f64,
    /// Inter-qubit coupling energy `E_I`.
    #[serde(default)]
    pub ei: f64,
    pub chi0: f64,
    pub omega: f64,
    /// Control offset charge `n_{x,c}`, held constant.
    #[serde(default)]
    pub nxc: f64,
    #[serde(default)]
    pub delta: u8,
}

impl JosephsonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e1 > 0.0 && self.e2 > 0.0) {
            return Err(Error::InvalidParams("E1 and E2 must be positive".into()));
        }
        if self.e1 == self.e2 {
            return Err(Error::InvalidParams(
                "symmetric SQUID (E1 = E2) cannot realize the flux drive".into(),
            ));
        }
        if !(self.chi0 > 0.0 && self.chi0 < PI) {
            return Err(Error::InvalidParams(format!(
                "chi0 must lie in (0, pi), got {}",
                self.chi0
            )));
        }
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(self.ech > 0.0) {
            return Err(Error::InvalidParams("Ech must be positive".into()));
        }
        if self.delta > 1 {
            return Err(Error::InvalidParams(format!(
                "delta must be 0 or 1, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn e_plus(&self) -> f64 {
        self.e1 + self.e2
    }

    /// Signed `E1 - E2`.
    pub fn e_minus(&self) -> f64 {
        self.e1 - self.e2
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    /// `true` when the largest Josephson energy stays below `Ech / 2`.
    pub fn in_charging_regime(&self) -> bool {
        self.e_plus() < self.ech / 2.0
    }

    /// Reduced flux `pi Phi(t) / Phi_0` on the continuous branch with
    /// `Phi(0) = 0`: `tan x = E+ tan(wt) / E-`.
    pub fn flux_phase(&self, t: f64) -> f64 {
        let wt = self.omega * t;
        let sgn = self.e_minus().signum();
        let principal = (sgn * self.e_plus() * wt.sin()).atan2(self.e_minus().abs() * wt.cos());
        // x shares the quadrant of sgn * wt, so the nearest branch is unambiguous.
        let turns = ((sgn * wt - principal) / TAU).round();
        principal + TAU * turns
    }

    /// `E_J = sqrt(E-^2 + 4 E1 E2 cos^2 x)`.
    pub fn josephson_energy(&self, flux_phase: f64) -> f64 {
        let c = flux_phase.cos();
        (self.e_minus().powi(2) + 4.0 * self.e1 * self.e2 * c * c).sqrt()
    }

    /// SQUID phase with `E_J e^{i alpha} = E+ cos x + i E- sin x`.
    pub fn squid_alpha(&self, flux_phase: f64) -> f64 {
        (self.e_minus() * flux_phase.sin()).atan2(self.e_plus() * flux_phase.cos())
    }

    /// Offset charge `n_x(t) = [1 - (E_J cot chi0 + w) / Ech] / 2`.
    pub fn offset_charge(&self, ej: f64) -> f64 {
        0.5 * (1.0 - (ej / self.chi0.tan() + self.omega) / self.ech)
    }

    /// Time-average of `E_J` over one drive period.
    pub fn mean_josephson_energy(&self) -> f64 {
        let n = 4096;
        let h = TAU / n as f64;
        // periodic integrand: the trapezoid rule converges geometrically
        (0..n)
            .map(|k| {
                let t = k as f64 * h / self.omega;
                self.josephson_energy(self.flux_phase(t))
            })
            .sum::<f64>()
            / n as f64
    }

    pub fn with_delta(mut self, delta: u8) -> Self {
        self.delta = delta;
        self
    }
}

fn josephson_field(p: JosephsonParams, z_shift: f64) -> impl Fn(f64) -> Vec3 + Send + Sync + 'static {
    move |t| {
        let x = p.flux_phase(t);
        let ej = p.josephson_energy(x);
        let alpha = p.squid_alpha(x);
        let nx = p.offset_charge(ej);
        Vec3::new(ej * alpha.cos(), -ej * alpha.sin(), p.ech * (1.0 - 2.0 * nx) + z_shift)
    }
}

pub fn josephson_schedule(p: &JosephsonParams) -> Result<FieldSchedule> {
    p.validate()?;
    Ok(FieldSchedule::new(
        format!("josephson E1={} E2={} chi0={} w={}", p.e1, p.e2, p.chi0, p.omega),
        p.period(),
        josephson_field(*p, 0.0),
    ))
}

/// Target field with the capacitive shift `E_I (n_{x,c} - delta)` on `B_z`.
pub fn josephson_conditional_schedule(p: &JosephsonParams) -> Result<FieldSchedule> {
    p.validate()?;
    let shift = p.ei * (p.nxc - p.delta as f64);
    Ok(FieldSchedule::new(
        format!(
            "josephson-conditional E1={} E2={} chi0={} w={} EI={} nxc={} delta={}",
            p.e1, p.e2, p.chi0, p.omega, p.ei, p.nxc, p.delta
        ),
        p.period(),
        josephson_field(*p, shift),
    ))
}

pub fn rotate_schedule(s: &FieldSchedule, dchi: f64) -> FieldSchedule {
    let inner = s.clone();
    FieldSchedule {
        label: format!("{} rotated {}", s.label, dchi),
        sampler: Arc::new(move |t| inner.sample(t).rotate_y(dchi)),
        ..s.clone()
    }
}

/// Second-period schedule `t' -> -B(D - t')` over the same duration `D`.
pub fn reversed_schedule(s: &FieldSchedule) -> FieldSchedule {
    let inner = s.clone();
    let d = s.duration;
    FieldSchedule {
        label: format!("{} reversed", s.label),
        breakpoints: s.breakpoints.iter().rev().map(|b| d - b).collect(),
        sampler: Arc::new(move |t| -inner.sample(d - t)),
        ..s.clone()
    }
}

/// Second-period schedule `t' -> B(D - t')`: same path, traversed backwards.
pub fn retraced_schedule(s: &FieldSchedule) -> FieldSchedule {
    let inner = s.clone();
    let d = s.duration;
    FieldSchedule {
        label: format!("{} retraced", s.label),
        breakpoints: s.breakpoints.iter().rev().map(|b| d - b).collect(),
        sampler: Arc::new(move |t| inner.sample(d - t)),
        ..s.clone()
    }
}

/// `t -> -B(t)`.
pub fn negated_schedule(s: &FieldSchedule) -> FieldSchedule {
    let inner = s.clone();
    FieldSchedule {
        label: format!("{} negated", s.label),
        sampler: Arc::new(move |t| -inner.sample(t)),
        ..s.clone()
    }
}

/// `s1` on `[0, D1)`, then `s2` shifted to `[D1, D1 + D2]`.
pub fn concat(s1: &FieldSchedule, s2: &FieldSchedule) -> FieldSchedule {
    let (a, b) = (s1.clone(), s2.clone());
    let d1 = s1.duration;
    let mut breakpoints = s1.breakpoints.clone();
    breakpoints.extend(s2.breakpoints.iter().skip(1).map(|t| t + d1));
    FieldSchedule {
        label: format!("{} ++ {}", s1.label, s2.label),
        period: s1.period,
        duration: d1 + s2.duration,
        breakpoints,
        sampler: Arc::new(move |t| if t < d1 { a.sample(t) } else { b.sample(t - d1) }),
    }
}

/// Jump `|B(D1+) - B(D1-)|` at the junction of a concatenation.
pub fn junction_gap(s1: &FieldSchedule, s2: &FieldSchedule) -> f64 {
    (s1.sample(s1.duration) - s2.sample(0.0)).norm()
}

/// Two-qubit Hamiltonian
/// `H = -1/2 B_c . sigma (x) I - 1/2 I (x) B_t . sigma + (J/2) sigma_z (x) sigma_z`
/// with the control as the first factor.
#[derive(Clone, Debug)]
pub struct TwoQubitModel {
    pub control: FieldSchedule,
    pub target: FieldSchedule,
    pub coupling: f64,
}

impl TwoQubitModel {
    /// NMR pair; with `drive_on_control` the rotating transverse field also
    /// acts on the control spin.
    pub fn nmr(p: &NmrParams, omega1_control: f64, drive_on_control: bool) -> Result<Self> {
        p.validate()?;
        let target = nmr_schedule(&NmrParams {
            coupling: 0.0,
            delta: 0,
            ..*p
        })?;
        let w0c = if drive_on_control { p.omega0 } else { 0.0 };
        let control = FieldSchedule::new(
            format!("nmr control w1={} driven={}", omega1_control, drive_on_control),
            p.period(),
            nmr_field(w0c, omega1_control, p.omega),
        );
        Ok(TwoQubitModel {
            control,
            target,
            coupling: p.coupling,
        })
    }

    /// Capacitively coupled charge qubits with a static control offset charge.
    ///
    /// `E_I (n_{x,c} - n_c)` with `n_c = (1 - sigma_z^c)/2` splits into a static
    /// target z-field `E_I (n_{x,c} - 1/2)` and a `zz` term with `J = -E_I / 2`.
    pub fn josephson(p: &JosephsonParams) -> Result<Self> {
        p.validate()?;
        let shift = p.ei * (p.nxc - 0.5);
        let target = FieldSchedule::new(
            format!("josephson target EI={} nxc={}", p.ei, p.nxc),
            p.period(),
            josephson_field(*p, shift),
        );
        let control = FieldSchedule::constant("josephson control (static)", Vec3::ZERO, p.period());
        Ok(TwoQubitModel {
            control,
            target,
            coupling: -p.ei / 2.0,
        })
    }

    pub fn period(&self) -> f64 {
        self.target.period()
    }

    pub fn hamiltonian(&self, t: f64) -> CMat4 {
        let id = CMat2::identity();
        let hc = kron(&CMat2::spin_hamiltonian(self.control.sample(t)), &id);
        let ht = kron(&id, &CMat2::spin_hamiltonian(self.target.sample(t)));
        let zz = kron(&CMat2::pauli_z(), &CMat2::pauli_z()).scale(C64::new(self.coupling / 2.0, 0.0));
        hc.add(&ht).add(&zz)
    }

    /// Largest transverse control field over a dense grid; zero means the
    /// Hamiltonian commutes with `sigma_z` of the control at all times.
    pub fn control_transverse_max(&self) -> f64 {
        self.control
            .grid(256)
            .into_iter()
            .map(|t| {
                let b = self.control.sample(t);
                b.x.hypot(b.y)
            })
            .fold(0.0, f64::max)
    }

    pub fn is_block_diagonal(&self) -> bool {
        self.control_transverse_max() == 0.0
    }

    /// Target field in the control-`delta` block: `B_t + (2 delta - 1) J z`.
    pub fn block_field(&self, delta: u8, t: f64) -> Vec3 {
        let shift = (2.0 * delta as f64 - 1.0) * self.coupling;
        self.target.sample(t) + Vec3::new(0.0, 0.0, shift)
    }

    /// Scalar energy offset of the control-`delta` block, `-1/2 s B_cz`.
    pub fn block_offset(&self, delta: u8, t: f64) -> f64 {
        let s = 1.0 - 2.0 * delta as f64;
        -0.5 * s * self.control.sample(t).z
    }

    /// The conditional single-qubit schedule of the `delta` block, without the
    /// scalar offset.
    pub fn block_schedule(&self, delta: u8) -> FieldSchedule {
        let model = self.clone();
        FieldSchedule::new(
            format!("{} block delta={}", self.target.label(), delta),
            self.period(),
            move |t| model.block_field(delta, t),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn fig1_omega0() -> f64 {
        2.0 * 15f64.sqrt()
    }

    #[test]
    fn nmr_schedule_samples() {
        let s = nmr_schedule(&NmrParams::single(0.0, 0.7, 1.3)).unwrap();
        for t in [0.0, 0.4, 3.0] {
            assert_eq!(s.sample(t), Vec3::new(0.0, 0.0, 0.7));
        }
        let p = NmrParams::single(2.0, 0.5, 3.0);
        let s = nmr_schedule(&p).unwrap();
        assert_eq!(s.sample(0.0), Vec3::new(2.0, 0.0, 0.5));
        let q = s.sample(s.period() / 4.0);
        assert!(q.max_abs_diff(Vec3::new(0.0, 2.0, 0.5)) < 1e-15);
        assert!(s.sample(s.period()).max_abs_diff(s.sample(0.0)) < 1e-10);
    }

    #[test]
    fn fig1_transverse_magnitude_is_constant() {
        let s = nmr_schedule(&NmrParams::single(fig1_omega0(), 1.0, 0.37)).unwrap();
        for (_, b) in s.sample_grid(64) {
            assert!((b.x.hypot(b.y) - fig1_omega0()).abs() < 1e-13);
        }
    }

    #[test]
    fn nmr_conditional_z_shift() {
        let (j, w) = (1.0, 0.3);
        let p = NmrParams {
            omega0: fig1_omega0(),
            omega1: j - w,
            omega: w,
            coupling: j,
            delta: 1,
        };
        let s = nmr_conditional_schedule(&p).unwrap();
        assert!((s.sample(0.2).z - (2.0 * j - w)).abs() < 1e-15);
        let s0 = nmr_conditional_schedule(&p.with_delta(0)).unwrap();
        assert!((s0.sample(0.2).z + w).abs() < 1e-15);
        let free = NmrParams { coupling: 0.0, ..p };
        let a = nmr_conditional_schedule(&free).unwrap();
        let b = nmr_schedule(&free).unwrap();
        for t in a.grid(32) {
            assert_eq!(a.sample(t), b.sample(t));
        }
    }

    #[test]
    fn nmr_rejects_bad_params() {
        assert!(nmr_schedule(&NmrParams::single(1.0, 0.0, 0.0)).is_err());
        assert!(nmr_schedule(&NmrParams::single(-1.0, 0.0, 1.0)).is_err());
        assert!(nmr_schedule(&NmrParams {
            delta: 2,
            ..NmrParams::single(1.0, 0.0, 1.0)
        })
        .is_err());
    }

    fn fig2c() -> JosephsonParams {
        let e1 = 6.25 / 4.0;
        let e2 = 6.25;
        JosephsonParams {
            e1,
            e2,
            ech: 5.0 * (e1 + e2),
            ei: 0.0,
            chi0: (0.75f64).acos(),
            omega: 0.8,
            nxc: 0.0,
            delta: 0,
        }
    }

    #[test]
    fn josephson_start_and_quarter_period() {
        let p = fig2c();
        let s = josephson_schedule(&p).unwrap();
        let cot = 1.0 / p.chi0.tan();
        let b0 = s.sample(0.0);
        assert!(b0.max_abs_diff(Vec3::new(p.e_plus(), 0.0, p.e_plus() * cot + p.omega)) < 1e-12);
        assert!((b0.x - 7.8125).abs() < 1e-12);
        let bq = s.sample(FRAC_PI_2 / p.omega);
        let em = p.e_minus().abs();
        assert!(bq.max_abs_diff(Vec3::new(0.0, -em, em * cot + p.omega)) < 1e-12);
    }

    #[test]
    fn josephson_alpha_tracks_drive_phase() {
        let p = fig2c();
        let n = 2000;
        for k in 0..=n {
            let t = p.period() * k as f64 / n as f64;
            let x = p.flux_phase(t);
            let alpha = p.squid_alpha(x);
            let d = (alpha - p.omega * t).rem_euclid(TAU);
            assert!(d.min(TAU - d) < 1e-12, "t={t} alpha={alpha}");
            // drive formula holds as written, away from tan poles
            let wt = p.omega * t;
            if wt.cos().abs() > 1e-3 && x.cos().abs() > 1e-3 {
                let lhs = x.tan();
                let rhs = p.e_plus() * wt.tan() / p.e_minus();
                assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn josephson_flux_is_continuous() {
        let p = fig2c();
        let n = 20000;
        let mut prev = p.flux_phase(0.0);
        assert_eq!(prev, 0.0);
        for k in 1..=n {
            let x = p.flux_phase(2.0 * p.period() * k as f64 / n as f64);
            assert!((x - prev).abs() < 0.01);
            prev = x;
        }
        // E- < 0 here: the flux winds backwards twice over two periods.
        assert!((prev + 2.0 * TAU).abs() < 1e-9);
    }

    #[test]
    fn josephson_cone_identity() {
        let p = fig2c();
        let s = josephson_schedule(&p).unwrap();
        let cot = 1.0 / p.chi0.tan();
        for (t, b) in s.sample_grid(512) {
            let ej = b.x.hypot(b.y);
            assert!((b.z - p.omega - ej * cot).abs() < 1e-10, "t={t}");
        }
        assert!(s.sample(s.period()).max_abs_diff(s.sample(0.0)) < 1e-10);
    }

    #[test]
    fn josephson_equator_cone_has_constant_z() {
        let p = JosephsonParams {
            chi0: FRAC_PI_2,
            ..fig2c()
        };
        let s = josephson_schedule(&p).unwrap();
        for (_, b) in s.sample_grid(64) {
            assert!((b.z - p.omega).abs() < 1e-12);
        }
    }

    #[test]
    fn josephson_rejects_singular_cone() {
        assert!(josephson_schedule(&JosephsonParams { chi0: 0.0, ..fig2c() }).is_err());
        assert!(josephson_schedule(&JosephsonParams { chi0: PI, ..fig2c() }).is_err());
        assert!(josephson_schedule(&JosephsonParams {
            e2: fig2c().e1,
            ..fig2c()
        })
        .is_err());
    }

    #[test]
    fn josephson_conditional_shift() {
        let p = JosephsonParams {
            ei: 0.9,
            nxc: 0.3,
            ..fig2c()
        };
        let base = josephson_schedule(&p).unwrap();
        let free = josephson_conditional_schedule(&JosephsonParams { ei: 0.0, ..p }).unwrap();
        let d0 = josephson_conditional_schedule(&p.with_delta(0)).unwrap();
        let d1 = josephson_conditional_schedule(&p.with_delta(1)).unwrap();
        for t in base.grid(64) {
            assert_eq!(free.sample(t), base.sample(t));
            let (a, b) = (d0.sample(t), d1.sample(t));
            assert_eq!((a.x, a.y), (b.x, b.y));
            assert!((a.z - b.z - p.ei).abs() < 1e-12);
        }
        let formal = JosephsonParams {
            nxc: 1.0,
            delta: 1,
            ..p
        };
        let s = josephson_conditional_schedule(&formal).unwrap();
        assert!(s.sample(0.3).max_abs_diff(base.sample(0.3)) < 1e-15);
    }

    #[test]
    fn rotation_examples() {
        let s = FieldSchedule::constant("c", Vec3::new(0.0, 0.0, 2.0), 1.0);
        let r = rotate_schedule(&s, FRAC_PI_2);
        assert!(r.sample(0.3).max_abs_diff(Vec3::new(2.0, 0.0, 0.0)) < 1e-15);
        let s = nmr_schedule(&NmrParams::single(1.5, -0.4, 2.0)).unwrap();
        let r0 = rotate_schedule(&s, 0.0);
        let r2pi = rotate_schedule(&s, TAU);
        for t in s.grid(64) {
            assert_eq!(r0.sample(t), s.sample(t));
            assert!(r2pi.sample(t).max_abs_diff(s.sample(t)) < 1e-12);
            let r = rotate_schedule(&s, 0.77).sample(t);
            assert!((r.norm() - s.sample(t).norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn reversal_examples() {
        let s = FieldSchedule::constant("c", Vec3::new(0.0, 0.0, 0.9), 2.0);
        assert_eq!(reversed_schedule(&s).sample(0.7), Vec3::new(0.0, 0.0, -0.9));
        let p = NmrParams::single(1.2, 0.4, 1.7);
        let s = nmr_schedule(&p).unwrap();
        let r = reversed_schedule(&s);
        assert!(r.sample(0.0).max_abs_diff(Vec3::new(-1.2, 0.0, -0.4)) < 1e-12);
        let rr = reversed_schedule(&r);
        for t in s.grid(64) {
            assert!(rr.sample(t).max_abs_diff(s.sample(t)) < 1e-12);
        }
    }

    #[test]
    fn reversal_traces_negated_loop_backwards() {
        let s = nmr_schedule(&NmrParams::single(1.2, 0.4, 1.7)).unwrap();
        let r = reversed_schedule(&s);
        let n = 1000;
        let d = s.duration();
        for k in 0..=n {
            let t = d * k as f64 / n as f64;
            assert!((r.sample(t) + s.sample(d - t)).norm() < 1e-12);
        }
        // point sets of {-B} agree
        let fwd: Vec<Vec3> = (0..n).map(|k| -s.sample(d * k as f64 / n as f64)).collect();
        for k in 0..n {
            let v = r.sample(d * k as f64 / n as f64);
            let best = fwd.iter().map(|w| (v - *w).norm()).fold(f64::MAX, f64::min);
            assert!(best < 1e-9);
        }
    }

    #[test]
    fn concat_piecewise() {
        let a = FieldSchedule::constant("a", Vec3::new(1.0, 0.0, 0.0), 1.0);
        let b = FieldSchedule::constant("b", Vec3::new(0.0, 2.0, 0.0), 1.0);
        let c = concat(&a, &b);
        assert_eq!(c.duration(), 2.0);
        assert_eq!(c.sample(0.5), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(c.sample(1.5), Vec3::new(0.0, 2.0, 0.0));
        assert_eq!(c.breakpoints(), &[0.0, 1.0, 2.0]);
        assert!((junction_gap(&a, &b) - 5f64.sqrt()).abs() < 1e-15);
        let s = nmr_schedule(&NmrParams::single(1.0, 0.2, 1.0)).unwrap();
        assert!(junction_gap(&s, &reversed_schedule(&s)) > 0.0);
        assert!(junction_gap(&s, &s) < 1e-12);
    }

    #[test]
    fn repeated_is_periodic() {
        let s = nmr_schedule(&NmrParams::single(1.0, 0.2, 2.0)).unwrap();
        let r = s.repeated(3);
        assert!((r.duration() - 3.0 * s.period()).abs() < 1e-14);
        assert_eq!(r.breakpoints().len(), 4);
        for t in [0.1, 1.3, 2.9] {
            assert!(r.sample(t + s.period()).max_abs_diff(s.sample(t)) < 1e-12);
        }
    }

    #[test]
    fn grids_contain_breakpoints() {
        let s = nmr_schedule(&NmrParams::single(1.0, 0.2, 2.0)).unwrap();
        let c = concat(&s, &reversed_schedule(&s));
        let g = segment_grid(c.breakpoints(), c.period(), 15, true);
        assert!(g.iter().any(|&t| t == s.period()));
        assert_eq!(*g.last().unwrap(), c.duration());
        assert_eq!((g.len() - 1) % 2, 0);
    }

    #[test]
    fn two_qubit_hamiltonian_is_hermitian_and_blocked() {
        let p = NmrParams {
            omega0: fig1_omega0(),
            omega1: 0.8,
            omega: 0.5,
            coupling: 1.0,
            delta: 0,
        };
        let m = TwoQubitModel::nmr(&p, 12.0, false).unwrap();
        assert!(m.is_block_diagonal());
        let zc = kron(&CMat2::pauli_z(), &CMat2::identity());
        for t in m.target.grid(32) {
            let h = m.hamiltonian(t);
            assert!(h.hermiticity_defect() < 1e-12);
            assert!(h.commutator(&zc).max_abs() < 1e-12);
            // block delta: rows/cols {2 delta, 2 delta + 1}
            for delta in 0..2u8 {
                let o = 2 * delta as usize;
                let mut blk = CMat2::spin_hamiltonian(m.block_field(delta, t));
                let off = m.block_offset(delta, t);
                blk = blk.add(&CMat2::identity().scale(C64::new(off, 0.0)));
                for r in 0..2 {
                    for c in 0..2 {
                        assert!((h.0[o + r][o + c] - blk.0[r][c]).norm() < 1e-13);
                    }
                }
                let cond = nmr_conditional_schedule(&p.with_delta(delta)).unwrap();
                assert!(cond.sample(t).max_abs_diff(m.block_field(delta, t)) < 1e-13);
            }
        }
        let driven = TwoQubitModel::nmr(&p, 12.0, true).unwrap();
        assert!(!driven.is_block_diagonal());
    }

    #[test]
    fn josephson_two_qubit_blocks_match_conditional_schedule() {
        let p = JosephsonParams {
            ei: 1.1,
            nxc: 0.35,
            ..fig2c()
        };
        let m = TwoQubitModel::josephson(&p).unwrap();
        for delta in 0..2u8 {
            let cond = josephson_conditional_schedule(&p.with_delta(delta)).unwrap();
            for t in cond.grid(32) {
                assert!(cond.sample(t).max_abs_diff(m.block_field(delta, t)) < 1e-12);
            }
        }
    }
}
