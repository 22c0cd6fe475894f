//! Small fixed-size complex linear algebra plus Pauli/Bloch helpers.
//!
//! Basis ordering is fixed: `{|0>, |1>}` for one qubit and
//! `{|00>, |01>, |10>, |11>}` for two, with the control qubit as the most
//! significant factor.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Tolerance on `|norm - 1|` accepted by operations that require a pure state.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Real 3-vector used for fields and Bloch vectors.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs_diff(self, o: Vec3) -> f64 {
        (self.x - o.x).abs().max((self.y - o.y).abs()).max((self.z - o.z).abs())
    }

    /// Rotation by `angle` about the y axis (right-handed).
    pub fn rotate_y(self, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        Vec3::new(self.x * c + self.z * s, self.y, -self.x * s + self.z * c)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Complex column vector of fixed dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CVec<const N: usize>(pub [C64; N]);

pub type CVec2 = CVec<2>;
pub type CVec4 = CVec<4>;

impl<const N: usize> CVec<N> {
    pub fn zeros() -> Self {
        CVec([ZERO; N])
    }

    /// Computational basis vector `|k>`.
    pub fn basis(k: usize) -> Self {
        let mut v = Self::zeros();
        v.0[k] = ONE;
        v
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        self.scale(C64::new(1.0 / self.norm(), 0.0))
    }

    pub fn scale(&self, s: C64) -> Self {
        CVec(self.0.map(|a| a * s))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `|<self|other>|`, the global-phase-free overlap of two normalized states.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let dev = (self.norm() - 1.0).abs();
        if dev > NORM_TOLERANCE {
            return Err(Error::NotNormalized(dev));
        }
        Ok(())
    }
}

impl<const N: usize> Add for CVec<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        for (a, b) in out.0.iter_mut().zip(o.0.iter()) {
            *a += b;
        }
        out
    }
}

impl<const N: usize> Sub for CVec<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut out = self;
        for (a, b) in out.0.iter_mut().zip(o.0.iter()) {
            *a -= b;
        }
        out
    }
}

impl CVec2 {
    pub fn new(a: C64, b: C64) -> Self {
        CVec([a, b])
    }
}

/// Complex square matrix of fixed dimension, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat<const N: usize>(pub [[C64; N]; N]);

pub type CMat2 = CMat<2>;
pub type CMat4 = CMat<4>;

impl<const N: usize> CMat<N> {
    pub fn zeros() -> Self {
        CMat([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for k in 0..N {
            m.0[k][k] = ONE;
        }
        m
    }

    pub fn from_diag(d: [C64; N]) -> Self {
        let mut m = Self::zeros();
        for k in 0..N {
            m.0[k][k] = d[k];
        }
        m
    }

    /// Matrix whose k-th column is `cols[k]`.
    pub fn from_columns(cols: [CVec<N>; N]) -> Self {
        let mut m = Self::zeros();
        for (c, col) in cols.iter().enumerate() {
            for r in 0..N {
                m.0[r][c] = col.0[r];
            }
        }
        m
    }

    pub fn column(&self, c: usize) -> CVec<N> {
        let mut v = CVec::zeros();
        for r in 0..N {
            v.0[r] = self.0[r][c];
        }
        v
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for r in 0..N {
            for c in 0..N {
                m.0[c][r] = self.0[r][c].conj();
            }
        }
        m
    }

    pub fn matmul(&self, o: &Self) -> Self {
        let mut m = Self::zeros();
        for r in 0..N {
            for c in 0..N {
                let mut acc = ZERO;
                for k in 0..N {
                    acc += self.0[r][k] * o.0[k][c];
                }
                m.0[r][c] = acc;
            }
        }
        m
    }

    pub fn apply(&self, v: &CVec<N>) -> CVec<N> {
        let mut out = CVec::zeros();
        for r in 0..N {
            let mut acc = ZERO;
            for k in 0..N {
                acc += self.0[r][k] * v.0[k];
            }
            out.0[r] = acc;
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        CMat(self.0.map(|row| row.map(|a| a * s)))
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut m = *self;
        for r in 0..N {
            for c in 0..N {
                m.0[r][c] += o.0[r][c];
            }
        }
        m
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(C64::new(-1.0, 0.0)))
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|k| self.0[k][k]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.sub(o).max_abs()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.0
            .iter()
            .map(|row| row.iter().map(|a| a.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max |(U^dagger U - I)_ij|`.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint().matmul(self).max_abs_diff(&Self::identity())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// `<v|self|v>`.
    pub fn expectation(&self, v: &CVec<N>) -> C64 {
        v.inner(&self.apply(v))
    }

    pub fn commutator(&self, o: &Self) -> Self {
        self.matmul(o).sub(&o.matmul(self))
    }

    /// `exp(-i H dt)` for Hermitian `H` by scaling and squaring of a Taylor series.
    pub fn expm_hermitian(h: &Self, dt: f64) -> Self {
        let a = h.scale(C64::new(0.0, -dt));
        let norm = a.norm_inf();
        let mut squarings = 0u32;
        let mut scaled_norm = norm;
        while scaled_norm > 0.25 {
            scaled_norm *= 0.5;
            squarings += 1;
        }
        let a = a.scale(C64::new(0.5f64.powi(squarings as i32), 0.0));
        // scaled_norm <= 0.25, so 18 terms leave a remainder far below 1e-16.
        let mut term = Self::identity();
        let mut sum = Self::identity();
        for k in 1..=18 {
            term = term.matmul(&a).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

impl CMat2 {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        CMat([[a, b], [c, d]])
    }

    pub fn pauli_x() -> Self {
        CMat2::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn pauli_y() -> Self {
        CMat2::new(ZERO, -I, I, ZERO)
    }

    pub fn pauli_z() -> Self {
        CMat2::new(ONE, ZERO, ZERO, -ONE)
    }

    /// `b . sigma`.
    pub fn pauli_dot(b: Vec3) -> Self {
        CMat2::new(
            C64::new(b.z, 0.0),
            C64::new(b.x, -b.y),
            C64::new(b.x, b.y),
            C64::new(-b.z, 0.0),
        )
    }

    /// Two-level Hamiltonian `-1/2 B . sigma` (hbar = mu = 1).
    pub fn spin_hamiltonian(b: Vec3) -> Self {
        Self::pauli_dot(b).scale(C64::new(-0.5, 0.0))
    }
}

/// Unit vector on the Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector(pub Vec3);

impl BlochVector {
    /// Polar angle in `[0, pi]` and azimuth in `(-pi, pi]`.
    pub fn angles(&self) -> (f64, f64) {
        let v = self.0;
        let rho = (v.x * v.x + v.y * v.y).sqrt();
        (rho.atan2(v.z), v.y.atan2(v.x))
    }

    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        BlochVector(Vec3::new(st * cp, st * sp, ct))
    }

    pub fn vector(&self) -> Vec3 {
        self.0
    }
}

/// `(<sigma_x>, <sigma_y>, <sigma_z>)` of a normalized qubit state.
pub fn bloch_of_state(psi: &CVec2) -> Result<BlochVector> {
    psi.check_normalized()?;
    Ok(bloch_unchecked(psi))
}

pub(crate) fn bloch_unchecked(psi: &CVec2) -> BlochVector {
    let [a, b] = psi.0;
    let cross = a.conj() * b;
    BlochVector(Vec3::new(2.0 * cross.re, 2.0 * cross.im, a.norm_sqr() - b.norm_sqr()))
}

/// `[e^{-i phi/2} cos(theta/2), e^{i phi/2} sin(theta/2)]`.
pub fn state_of_angles(theta: f64, phi: f64) -> Result<CVec2> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::PolarAngleOutOfRange(theta));
    }
    let (sh, ch) = (theta / 2.0).sin_cos();
    Ok(CVec2::new(
        C64::from_polar(ch, -phi / 2.0),
        C64::from_polar(sh, phi / 2.0),
    ))
}

/// `exp(i s (b . sigma)) = cos(s|b|) I + i sin(s|b|) (b_hat . sigma)`.
pub fn expm_pauli(b: Vec3, s: f64) -> CMat2 {
    let nb = b.norm();
    if nb == 0.0 {
        return CMat2::identity();
    }
    let (sn, cs) = (s * nb).sin_cos();
    let u = b * (1.0 / nb);
    CMat2::new(
        C64::new(cs, sn * u.z),
        C64::new(sn * u.y, sn * u.x),
        C64::new(-sn * u.y, sn * u.x),
        C64::new(cs, -sn * u.z),
    )
}

/// Tensor product `a (x) b` in the fixed basis order.
pub fn kron(a: &CMat2, b: &CMat2) -> CMat4 {
    let mut m = CMat4::zeros();
    for ar in 0..2 {
        for ac in 0..2 {
            for br in 0..2 {
                for bc in 0..2 {
                    m.0[2 * ar + br][2 * ac + bc] = a.0[ar][ac] * b.0[br][bc];
                }
            }
        }
    }
    m
}

/// Block-diagonal `diag(a, b)`: `a` acts when the control is `|0>`, `b` when `|1>`.
pub fn block_diag(a: &CMat2, b: &CMat2) -> CMat4 {
    let mut m = CMat4::zeros();
    for r in 0..2 {
        for c in 0..2 {
            m.0[r][c] = a.0[r][c];
            m.0[r + 2][c + 2] = b.0[r][c];
        }
    }
    m
}

/// Tensor product of two single-qubit states, control first.
pub fn kron_state(control: &CVec2, target: &CVec2) -> CVec4 {
    let mut v = CVec4::zeros();
    for c in 0..2 {
        for t in 0..2 {
            v.0[2 * c + t] = control.0[c] * target.0[t];
        }
    }
    v
}

/// Reduced Bloch vector of one qubit of a two-qubit pure state (`0` = control).
pub fn reduced_bloch(psi: &CVec4, qubit: usize) -> Vec3 {
    // rho_ab for the selected qubit: sum over the other index.
    let amp = |q: usize, o: usize| {
        if qubit == 0 {
            psi.0[2 * q + o]
        } else {
            psi.0[2 * o + q]
        }
    };
    let mut rho = [[ZERO; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            rho[a][b] = (0..2).map(|o| amp(a, o) * amp(b, o).conj()).sum();
        }
    }
    Vec3::new(2.0 * rho[1][0].re, 2.0 * rho[1][0].im, (rho[0][0] - rho[1][1]).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn bloch_of_basis_states() {
        let n = bloch_of_state(&CVec2::basis(0)).unwrap().0;
        assert!(n.max_abs_diff(Vec3::new(0.0, 0.0, 1.0)) < 1e-15);
        let plus = CVec2::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        let n = bloch_of_state(&plus).unwrap().0;
        assert!(n.max_abs_diff(Vec3::new(1.0, 0.0, 0.0)) < 1e-15);
    }

    #[test]
    fn bloch_of_parameterized_state() {
        let (theta, phi) = (FRAC_PI_3, FRAC_PI_4);
        let psi = CVec2::new(
            C64::from_polar((theta / 2.0).cos(), -phi / 2.0),
            C64::from_polar((theta / 2.0).sin(), phi / 2.0),
        );
        let n = bloch_of_state(&psi).unwrap().0;
        let want = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        assert!(n.max_abs_diff(want) < 1e-15);
    }

    #[test]
    fn bloch_rejects_unnormalized() {
        let psi = CVec2::new(c(1.0, 0.0), c(0.1, 0.0));
        assert!(matches!(bloch_of_state(&psi), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn state_of_angles_special_points() {
        let s = state_of_angles(0.0, 1.234).unwrap();
        assert!((s.fidelity(&CVec2::basis(0)) - 1.0).abs() < 1e-15);
        let s = state_of_angles(PI, 0.0).unwrap();
        assert!((s.fidelity(&CVec2::basis(1)) - 1.0).abs() < 1e-15);
        let s = state_of_angles(FRAC_PI_2, 0.0).unwrap();
        let plus = CVec2::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        assert!((s.fidelity(&plus) - 1.0).abs() < 1e-15);
        assert!(matches!(
            state_of_angles(-0.1, 0.0),
            Err(Error::PolarAngleOutOfRange(_))
        ));
        assert!(state_of_angles(PI + 1e-9, 0.0).is_err());
    }

    #[test]
    fn expm_pauli_examples() {
        let u = expm_pauli(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2);
        let want = CMat2::from_diag([c(0.0, 1.0), c(0.0, -1.0)]);
        assert!(u.max_abs_diff(&want) < 1e-15);
        let u = expm_pauli(Vec3::new(1.0, 0.0, 0.0), PI);
        assert!(u.max_abs_diff(&CMat2::identity().scale(c(-1.0, 0.0))) < 1e-15);
        let u = expm_pauli(Vec3::ZERO, 3.7);
        assert_eq!(u, CMat2::identity());
    }

    #[test]
    fn expm_pauli_matches_dense_exponential() {
        let b = Vec3::new(0.3, -1.2, 0.7);
        let s = 0.9;
        // exp(i s b.sigma) = exp(-i H dt) with H = -b.sigma, dt = s
        let h = CMat2::pauli_dot(b).scale(c(-1.0, 0.0));
        let dense = CMat2::expm_hermitian(&h, s);
        assert!(expm_pauli(b, s).max_abs_diff(&dense) < 1e-14);
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&CMat2::identity(), &CMat2::identity()), CMat4::identity());
        let zz = kron(&CMat2::pauli_z(), &CMat2::pauli_z());
        let want = CMat4::from_diag([c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(zz, want);
        let (a, b) = (c(0.2, 0.5), c(-1.0, 0.3));
        let m = kron(&CMat2::from_diag([a, b]), &CMat2::identity());
        assert_eq!(m, CMat4::from_diag([a, a, b, b]));
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (CMat2::pauli_x(), CMat2::pauli_y(), CMat2::pauli_z());
        // [x, y] = 2 i z
        assert!(x.commutator(&y).max_abs_diff(&z.scale(c(0.0, 2.0))) < 1e-15);
        assert!(x.matmul(&x).max_abs_diff(&CMat2::identity()) < 1e-15);
    }

    #[test]
    fn reduced_bloch_of_product_state() {
        let ctrl = state_of_angles(0.4, 1.1).unwrap();
        let tgt = state_of_angles(2.0, -0.7).unwrap();
        let psi = kron_state(&ctrl, &tgt);
        assert!(reduced_bloch(&psi, 0).max_abs_diff(bloch_of_state(&ctrl).unwrap().0) < 1e-14);
        assert!(reduced_bloch(&psi, 1).max_abs_diff(bloch_of_state(&tgt).unwrap().0) < 1e-14);
    }

    fn arb_state() -> impl Strategy<Value = CVec2> {
        prop::array::uniform4(-1.0f64..1.0).prop_filter_map("nonzero", |a| {
            let v = CVec2::new(c(a[0], a[1]), c(a[2], a[3]));
            (v.norm() > 1e-3).then(|| v.normalized())
        })
    }

    proptest! {
        #[test]
        fn bloch_vectors_of_pure_states_are_unit(psi in arb_state()) {
            let n = bloch_of_state(&psi).unwrap().0;
            prop_assert!((n.norm() - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn angles_round_trip(theta in 1e-3f64..(PI - 1e-3), phi in (1e-3 - PI)..(PI - 1e-3)) {
            let psi = state_of_angles(theta, phi).unwrap();
            let (t2, p2) = bloch_of_state(&psi).unwrap().angles();
            prop_assert!((t2 - theta).abs() <= 1e-9);
            prop_assert!((p2 - phi).abs() <= 1e-9);
        }

        #[test]
        fn expm_pauli_inverse(bx in -5.0f64..5.0, by in -5.0f64..5.0, bz in -5.0f64..5.0, s in -10.0f64..10.0) {
            let b = Vec3::new(bx, by, bz);
            let prod = expm_pauli(b, s).matmul(&expm_pauli(b, -s));
            prop_assert!(prod.max_abs_diff(&CMat2::identity()) <= 1e-12);
            prop_assert!(expm_pauli(b, s).is_unitary(1e-12));
        }
    }
}
