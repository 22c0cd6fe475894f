//! Time-ordered propagation of one- and two-qubit states.
//!
//! Every step is an exact exponential of a Hermitian generator, so norms are
//! preserved to rounding. Accuracy is controlled by step doubling: the grid is
//! refined until the final state stops moving by more than the tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldSchedule, NmrParams, TwoQubitModel};
use crate::linalg::{
    bloch_unchecked, block_diag, expm_pauli, reduced_bloch, BlochVector, CMat, CMat2, CMat4, CVec, CVec2, CVec4, Vec3,
    C64,
};

/// Stepping rule for one grid interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// `exp(-i H(t + dt/2) dt)`, second order.
    Midpoint,
    /// Midpoint runs on `n` and `2n` grids combined as `(4 psi_2n - psi_n) / 3`
    /// and renormalized. Fourth order in the state, not exactly unitary.
    Richardson,
    /// Two-exponential commutator-free Magnus scheme on Gauss nodes, fourth
    /// order and exactly unitary.
    #[default]
    CommutatorFree4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub steps_per_period: usize,
    pub method: Method,
    /// Max state-component change accepted between successive refinements.
    pub tolerance: f64,
    pub max_doublings: u32,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            steps_per_period: 4096,
            method: Method::default(),
            tolerance: 1e-10,
            max_doublings: 10,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period < 16 {
            return Err(Error::InvalidParams(format!(
                "steps_per_period must be at least 16, got {}",
                self.steps_per_period
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParams("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Piecewise-uniform time grid: `(start, end, intervals)` per segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    segments: Vec<(f64, f64, usize)>,
}

impl Grid {
    /// Even interval counts per segment, about `per_period` per period.
    pub fn new(breakpoints: &[f64], period: f64, per_period: usize) -> Self {
        let segments = breakpoints
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let mut n = ((per_period as f64) * (w[1] - w[0]) / period).ceil().max(2.0) as usize;
                n += n % 2;
                (w[0], w[1], n)
            })
            .collect();
        Grid { segments }
    }

    pub fn for_schedule(s: &FieldSchedule, per_period: usize) -> Self {
        Self::new(s.breakpoints(), s.period(), per_period)
    }

    pub fn refined(&self) -> Self {
        Grid {
            segments: self.segments.iter().map(|&(a, b, n)| (a, b, 2 * n)).collect(),
        }
    }

    pub fn intervals(&self) -> usize {
        self.segments.iter().map(|s| s.2).sum()
    }

    pub fn segment_ends(&self) -> Vec<usize> {
        let mut ends = vec![0];
        for s in &self.segments {
            ends.push(ends.last().unwrap() + s.2);
        }
        ends
    }

    pub fn points(&self) -> Vec<f64> {
        let mut pts = vec![self.segments.first().map_or(0.0, |s| s.0)];
        for &(a, b, n) in &self.segments {
            let h = (b - a) / n as f64;
            pts.extend((1..n).map(|k| a + k as f64 * h));
            pts.push(b);
        }
        pts
    }

    /// Every interval as `(t, dt)`.
    fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.segments.iter().flat_map(|&(a, b, n)| {
            let h = (b - a) / n as f64;
            (0..n).map(move |k| (a + k as f64 * h, h))
        })
    }
}

/// Sampled evolution `psi(t_k)`.
#[derive(Clone, Debug)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<CVec<N>>,
    pub label: String,
    /// Indices of samples that sit on schedule breakpoints, first and last included.
    pub segment_ends: Vec<usize>,
}

pub type Trajectory2 = Trajectory<2>;
pub type Trajectory4 = Trajectory<4>;

impl<const N: usize> Trajectory<N> {
    pub fn initial(&self) -> &CVec<N> {
        &self.states[0]
    }

    pub fn final_state(&self) -> &CVec<N> {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Index of the stored sample at time `t`, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let scale = self.duration().abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= 1e-12 * scale)
    }

    pub fn max_norm_defect(&self) -> f64 {
        self.states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

impl Trajectory2 {
    pub fn bloch_path(&self) -> BlochPath {
        BlochPath {
            times: self.times.clone(),
            points: self.states.iter().map(bloch_unchecked).collect(),
            label: self.label.clone(),
            segment_ends: self.segment_ends.clone(),
        }
    }
}

impl Trajectory4 {
    /// Reduced Bloch path of qubit `0` (control) or `1` (target).
    pub fn reduced_path(&self, qubit: usize) -> BlochPath {
        BlochPath {
            times: self.times.clone(),
            points: self
                .states
                .iter()
                .map(|s| BlochVector(reduced_bloch(s, qubit)))
                .collect(),
            label: format!("{} qubit {}", self.label, qubit),
            segment_ends: self.segment_ends.clone(),
        }
    }
}

/// Curve on the Bloch sphere.
#[derive(Clone, Debug)]
pub struct BlochPath {
    pub times: Vec<f64>,
    pub points: Vec<BlochVector>,
    pub label: String,
    pub segment_ends: Vec<usize>,
}

impl BlochPath {
    /// Single-segment path from raw samples.
    pub fn new(times: Vec<f64>, points: Vec<BlochVector>, label: impl Into<String>) -> Self {
        let last = times.len().saturating_sub(1);
        BlochPath {
            times,
            points,
            label: label.into(),
            segment_ends: vec![0, last],
        }
    }

    pub fn sup_distance(&self, other: &BlochPath) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| a.0.max_abs_diff(b.0))
            .fold(0.0, f64::max)
    }
}

/// A Hamiltonian family `t -> H(t)` whose generators can be linearly combined
/// and exponentiated.
trait Dynamics<const N: usize>: Sync {
    type Gen: Copy;
    fn generator(&self, t: f64) -> Self::Gen;
    fn combine(a: f64, x: Self::Gen, b: f64, y: Self::Gen) -> Self::Gen;
    /// `exp(-i g dt)`.
    fn exp(&self, g: Self::Gen, dt: f64) -> CMat<N>;
}

struct SpinDynamics<'a>(&'a FieldSchedule);

impl Dynamics<2> for SpinDynamics<'_> {
    type Gen = Vec3;
    fn generator(&self, t: f64) -> Vec3 {
        self.0.sample(t)
    }
    fn combine(a: f64, x: Vec3, b: f64, y: Vec3) -> Vec3 {
        x * a + y * b
    }
    fn exp(&self, b: Vec3, dt: f64) -> CMat2 {
        // H = -B.sigma/2, so exp(-i H dt) = exp(i (dt/2) B.sigma)
        expm_pauli(b, dt / 2.0)
    }
}

struct DenseDynamics<'a>(&'a TwoQubitModel);

impl Dynamics<4> for DenseDynamics<'_> {
    type Gen = CMat4;
    fn generator(&self, t: f64) -> CMat4 {
        self.0.hamiltonian(t)
    }
    fn combine(a: f64, x: CMat4, b: f64, y: CMat4) -> CMat4 {
        x.scale(C64::new(a, 0.0)).add(&y.scale(C64::new(b, 0.0)))
    }
    fn exp(&self, h: CMat4, dt: f64) -> CMat4 {
        CMat4::expm_hermitian(&h, dt)
    }
}

struct BlockDynamics<'a>(&'a TwoQubitModel);

impl Dynamics<4> for BlockDynamics<'_> {
    /// Target field and scalar offset of each control block.
    type Gen = ([Vec3; 2], [f64; 2]);
    fn generator(&self, t: f64) -> Self::Gen {
        let m = self.0;
        (
            [m.block_field(0, t), m.block_field(1, t)],
            [m.block_offset(0, t), m.block_offset(1, t)],
        )
    }
    fn combine(a: f64, x: Self::Gen, b: f64, y: Self::Gen) -> Self::Gen {
        (
            [x.0[0] * a + y.0[0] * b, x.0[1] * a + y.0[1] * b],
            [a * x.1[0] + b * y.1[0], a * x.1[1] + b * y.1[1]],
        )
    }
    fn exp(&self, g: Self::Gen, dt: f64) -> CMat4 {
        let blk = |k: usize| expm_pauli(g.0[k], dt / 2.0).scale(C64::from_polar(1.0, -g.1[k] * dt));
        block_diag(&blk(0), &blk(1))
    }
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6
const CF4_A1: f64 = (3.0 - 2.0 * 1.732_050_807_568_877_2) / 12.0;
const CF4_A2: f64 = (3.0 + 2.0 * 1.732_050_807_568_877_2) / 12.0;

fn step_operator<const N: usize, D: Dynamics<N>>(d: &D, method: Method, t: f64, dt: f64) -> CMat<N> {
    match method {
        Method::Midpoint | Method::Richardson => d.exp(d.generator(t + 0.5 * dt), dt),
        Method::CommutatorFree4 => {
            let h1 = d.generator(t + (0.5 - GAUSS_OFFSET) * dt);
            let h2 = d.generator(t + (0.5 + GAUSS_OFFSET) * dt);
            let first = d.exp(D::combine(CF4_A2, h1, CF4_A1, h2), dt);
            let second = d.exp(D::combine(CF4_A1, h1, CF4_A2, h2), dt);
            second.matmul(&first)
        }
    }
}

fn run_plain<const N: usize, D: Dynamics<N>>(d: &D, psi0: &CVec<N>, grid: &Grid, method: Method) -> Vec<CVec<N>> {
    let mut states = Vec::with_capacity(grid.intervals() + 1);
    let mut psi = *psi0;
    states.push(psi);
    for (t, dt) in grid.steps() {
        psi = step_operator(d, method, t, dt).apply(&psi);
        states.push(psi);
    }
    states
}

fn run_fixed<const N: usize, D: Dynamics<N>>(d: &D, psi0: &CVec<N>, grid: &Grid, method: Method) -> Vec<CVec<N>> {
    match method {
        Method::Richardson => {
            let coarse = run_plain(d, psi0, grid, Method::Midpoint);
            let fine = run_plain(d, psi0, &grid.refined(), Method::Midpoint);
            coarse
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let f = fine[2 * k];
                    let mut out = CVec::<N>::zeros();
                    for i in 0..N {
                        out.0[i] = (f.0[i] * 4.0 - c.0[i]) / 3.0;
                    }
                    out.normalized()
                })
                .collect()
        }
        _ => run_plain(d, psi0, grid, method),
    }
}

fn run_refined<const N: usize, D: Dynamics<N>>(
    d: &D,
    psi0: &CVec<N>,
    base: Grid,
    per_period: usize,
    cfg: &PropagatorConfig,
    label: &str,
) -> Result<Trajectory<N>> {
    cfg.validate()?;
    let mut grid = base;
    let mut prev = run_fixed(d, psi0, &grid, cfg.method);
    let mut change = f64::INFINITY;
    let mut per = per_period;
    for _ in 0..cfg.max_doublings {
        grid = grid.refined();
        per *= 2;
        let next = run_fixed(d, psi0, &grid, cfg.method);
        change = next.last().unwrap().max_abs_diff(prev.last().unwrap());
        if change <= cfg.tolerance {
            return Ok(Trajectory {
                times: grid.points(),
                states: next,
                label: label.to_string(),
                segment_ends: grid.segment_ends(),
            });
        }
        prev = next;
    }
    Err(Error::NonConvergence {
        steps_per_period: per,
        change,
    })
}

/// Propagates `psi0` over the whole schedule with step doubling.
pub fn propagate(s: &FieldSchedule, psi0: &CVec2, cfg: &PropagatorConfig) -> Result<Trajectory2> {
    psi0.check_normalized()?;
    let grid = Grid::for_schedule(s, cfg.steps_per_period);
    run_refined(&SpinDynamics(s), psi0, grid, cfg.steps_per_period, cfg, s.label())
}

/// Single pass on a fixed grid, no refinement.
pub fn propagate_fixed(
    s: &FieldSchedule,
    psi0: &CVec2,
    steps_per_period: usize,
    method: Method,
) -> Result<Trajectory2> {
    psi0.check_normalized()?;
    let grid = Grid::for_schedule(s, steps_per_period);
    let states = run_fixed(&SpinDynamics(s), psi0, &grid, method);
    Ok(Trajectory {
        times: grid.points(),
        states,
        label: s.label().to_string(),
        segment_ends: grid.segment_ends(),
    })
}

/// One-period-or-longer evolution operator, assembled column by column.
pub fn evolution_operator(s: &FieldSchedule, cfg: &PropagatorConfig) -> Result<CMat2> {
    let c0 = propagate(s, &CVec2::basis(0), cfg)?;
    let c1 = propagate(s, &CVec2::basis(1), cfg)?;
    Ok(CMat2::from_columns([*c0.final_state(), *c1.final_state()]))
}

/// How the 4x4 problem is stepped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoQubitRoute {
    /// Control-`sigma_z` eigenblocks stepped as two 2x2 problems. Requires a
    /// block-diagonal model.
    Block,
    /// Full 4x4 exponentials by scaling and squaring.
    Dense,
}

pub fn propagate_two_qubit(
    m: &TwoQubitModel,
    psi0: &CVec4,
    cfg: &PropagatorConfig,
    route: TwoQubitRoute,
) -> Result<Trajectory4> {
    psi0.check_normalized()?;
    let grid = Grid::for_schedule(&m.target, cfg.steps_per_period);
    let label = m.target.label();
    match route {
        TwoQubitRoute::Dense => run_refined(&DenseDynamics(m), psi0, grid, cfg.steps_per_period, cfg, label),
        TwoQubitRoute::Block => {
            if !m.is_block_diagonal() {
                return Err(Error::InvalidParams(
                    "block route needs a Hamiltonian that commutes with control sigma_z".into(),
                ));
            }
            run_refined(&BlockDynamics(m), psi0, grid, cfg.steps_per_period, cfg, label)
        }
    }
}

/// Closed-form solution of the rotating-field problem,
/// `psi(t) = e^{-i w t sigma_z / 2} e^{-i H' t} psi0` with
/// `H' = -1/2 (w0 sigma_x + (w1 + w) sigma_z)`.
pub fn rotating_frame_oracle(p: &NmrParams, psi0: &CVec2, t: f64) -> Result<CVec2> {
    p.validate()?;
    psi0.check_normalized()?;
    let frame = expm_pauli(Vec3::new(0.0, 0.0, 1.0), -p.omega * t / 2.0);
    let body = expm_pauli(Vec3::new(p.omega0, 0.0, p.omega1 + p.omega), t / 2.0);
    Ok(frame.matmul(&body).apply(psi0))
}

/// Integrates the Bloch equation `dn/dt = n x B(t)` with classical RK4 and
/// step doubling.
///
/// With `H = -B.sigma/2` and `hbar = 1` the Heisenberg equation gives
/// `d<sigma>/dt = <sigma> x B`, i.e. `-B x n`.
pub fn bloch_integrate(s: &FieldSchedule, n0: BlochVector, cfg: &PropagatorConfig) -> Result<BlochPath> {
    cfg.validate()?;
    check_unit(n0)?;
    let mut grid = Grid::for_schedule(s, cfg.steps_per_period);
    let mut prev = rk4_run(s, n0, &grid);
    let mut change = f64::INFINITY;
    let mut per = cfg.steps_per_period;
    for _ in 0..cfg.max_doublings {
        grid = grid.refined();
        per *= 2;
        let next = rk4_run(s, n0, &grid);
        change = next.last().unwrap().0.max_abs_diff(prev.last().unwrap().0);
        if change <= cfg.tolerance {
            return Ok(BlochPath {
                times: grid.points(),
                points: next,
                label: s.label().to_string(),
                segment_ends: grid.segment_ends(),
            });
        }
        prev = next;
    }
    Err(Error::NonConvergence {
        steps_per_period: per,
        change,
    })
}

pub fn bloch_integrate_fixed(s: &FieldSchedule, n0: BlochVector, steps_per_period: usize) -> Result<BlochPath> {
    check_unit(n0)?;
    let grid = Grid::for_schedule(s, steps_per_period);
    let points = rk4_run(s, n0, &grid);
    Ok(BlochPath {
        times: grid.points(),
        points,
        label: s.label().to_string(),
        segment_ends: grid.segment_ends(),
    })
}

fn check_unit(n0: BlochVector) -> Result<()> {
    let dev = (n0.0.norm() - 1.0).abs();
    if dev > 1e-8 {
        return Err(Error::NotNormalized(dev));
    }
    Ok(())
}

fn rk4_run(s: &FieldSchedule, n0: BlochVector, grid: &Grid) -> Vec<BlochVector> {
    let rhs = |t: f64, n: Vec3| n.cross(s.sample(t));
    let mut n = n0.0;
    let mut out = Vec::with_capacity(grid.intervals() + 1);
    out.push(n0);
    for (t, h) in grid.steps() {
        let k1 = rhs(t, n);
        let k2 = rhs(t + h / 2.0, n + k1 * (h / 2.0));
        let k3 = rhs(t + h / 2.0, n + k2 * (h / 2.0));
        let k4 = rhs(t + h, n + k3 * h);
        n = n + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        n = n * (1.0 / n.norm());
        out.push(BlochVector(n));
    }
    out
}

/// `<psi(t)|H(t)|psi(t)>` along a single-qubit trajectory.
pub fn energies(s: &FieldSchedule, traj: &Trajectory2) -> Vec<f64> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| -0.5 * s.sample(t).dot(bloch_unchecked(psi).0))
        .collect()
}

pub fn energies_two_qubit(m: &TwoQubitModel, traj: &Trajectory4) -> Vec<f64> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| m.hamiltonian(t).expectation(psi).re)
        .collect()
}
