//! Operator algebra of a two-level atom.
//!
//! Matrices are written in the basis `(|e⟩, |g⟩)`, so `σ_z = diag(1, -1)` and
//! `σ₋ = |g⟩⟨e|` has its single non-zero entry in row 1, column 0.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A complex 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Operator2(pub [[Complex64; 2]; 2]);

impl Operator2 {
    pub const fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Operator2([[m00, m01], [m10, m11]])
    }

    pub const fn zero() -> Self {
        Operator2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Operator2([[ONE, ZERO], [ZERO, ONE]])
    }

    /// Lowering operator `σ₋ = |g⟩⟨e|`.
    pub const fn sigma_minus() -> Self {
        Operator2([[ZERO, ZERO], [ONE, ZERO]])
    }

    /// Raising operator `σ₊ = |e⟩⟨g|`.
    pub const fn sigma_plus() -> Self {
        Operator2([[ZERO, ONE], [ZERO, ZERO]])
    }

    /// `σ_x = σ₋ + σ₊`.
    pub const fn sigma_x() -> Self {
        Operator2([[ZERO, ONE], [ONE, ZERO]])
    }

    /// `σ_y = i(σ₋ − σ₊)`.
    pub const fn sigma_y() -> Self {
        Operator2([[ZERO, Complex64::new(0.0, -1.0)], [I, ZERO]])
    }

    /// `σ_z = σ₊σ₋ − σ₋σ₊`.
    pub const fn sigma_z() -> Self {
        Operator2([[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]])
    }

    /// Excited-state projector `P₊ = σ₊σ₋`.
    pub const fn proj_excited() -> Self {
        Operator2([[ONE, ZERO], [ZERO, ZERO]])
    }

    /// Ground-state projector `P₋ = σ₋σ₊`.
    pub const fn proj_ground() -> Self {
        Operator2([[ZERO, ZERO], [ZERO, ONE]])
    }

    /// The three Pauli matrices `(σ_x, σ_y, σ_z)`.
    pub const fn pauli() -> [Operator2; 3] {
        [Self::sigma_x(), Self::sigma_y(), Self::sigma_z()]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Operator2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        Operator2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    /// `{self, other}`
    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (*self - self.adjoint()).max_abs() <= tol
    }

    /// Eigenvalues of a Hermitian operator in ascending order. The
    /// anti-Hermitian part, if any, is ignored.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = 0.5 * (self.0[0][1] + self.0[1][0].conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - radius, mean + radius]
    }

    /// Bloch image `(Tr[σ_x M], Tr[σ_y M], Tr[σ_z M])`, real parts. For a
    /// density matrix this is its Bloch vector; for a traceless Hermitian
    /// operator it is the velocity that operator induces in Bloch space.
    pub fn bloch_image(&self) -> BlochVector {
        let [sx, sy, sz] = Self::pauli();
        BlochVector::new(
            (sx * *self).trace().re,
            (sy * *self).trace().re,
            (sz * *self).trace().re,
        )
    }
}

impl Add for Operator2 {
    type Output = Operator2;
    fn add(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        Operator2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl AddAssign for Operator2 {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for Operator2 {
    type Output = Operator2;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for Operator2 {
    type Output = Operator2;
    fn neg(self) -> Self {
        self.scale_re(-1.0)
    }
}

impl Mul for Operator2 {
    type Output = Operator2;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        Operator2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Mul<Complex64> for Operator2 {
    type Output = Operator2;
    fn mul(self, rhs: Complex64) -> Self {
        self.scale(rhs)
    }
}

impl Mul<f64> for Operator2 {
    type Output = Operator2;
    fn mul(self, rhs: f64) -> Self {
        self.scale_re(rhs)
    }
}

/// `σ_φ = e^{iφ}σ₋ + e^{−iφ}σ₊ = cos φ σ_x + sin φ σ_y`.
pub fn sigma_phi(phi: f64) -> Operator2 {
    let e = Complex64::from_polar(1.0, phi);
    Operator2::sigma_minus() * e + Operator2::sigma_plus() * e.conj()
}

/// A point in (or, within slack, on) the Bloch ball.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub const fn ground() -> Self {
        BlochVector::new(0.0, 0.0, -1.0)
    }

    pub const fn excited() -> Self {
        BlochVector::new(0.0, 0.0, 1.0)
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        BlochVector::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Inside the ball up to [`tolerance::BALL_SLACK`].
    pub fn in_ball(&self) -> bool {
        self.norm_sqr() <= 1.0 + tolerance::BALL_SLACK
    }

    /// `Tr[σ_θ ρ] = x cos θ + y sin θ`.
    pub fn quadrature(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.x * c + self.y * s
    }
}

impl fmt::Display for BlochVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A validated qubit density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(Operator2);

impl DensityMatrix {
    /// Checks unit trace, Hermiticity and positivity.
    pub fn new(op: Operator2) -> Result<Self> {
        let tr = op.trace();
        if (tr.re - 1.0).abs() > tolerance::TRACE || tr.im.abs() > tolerance::TRACE {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        if !op.is_hermitian(tolerance::HERMITIAN) {
            return Err(Error::InvalidState("operator is not Hermitian".into()));
        }
        let [lo, _] = op.hermitian_eigenvalues();
        if lo < tolerance::EIGENVALUE_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {lo}")));
        }
        Ok(DensityMatrix(op))
    }

    pub fn operator(&self) -> &Operator2 {
        &self.0
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Operator2::identity().scale_re(0.5))
    }

    /// `Tr[ρ²]`
    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }
}

/// `ρ = ½(1 + x⃗·σ⃗)`; rejects vectors outside the (slackened) unit ball.
pub fn rho_from_bloch(v: BlochVector) -> Result<DensityMatrix> {
    if !v.is_finite() || !v.in_ball() {
        return Err(Error::InvalidState(format!(
            "Bloch vector {v} lies outside the unit ball"
        )));
    }
    Ok(DensityMatrix(bloch_operator(v)))
}

/// `½(1 + x⃗·σ⃗)` without any validity check.
pub(crate) fn bloch_operator(v: BlochVector) -> Operator2 {
    let half = 0.5;
    Operator2::new(
        Complex64::new(half * (1.0 + v.z), 0.0),
        Complex64::new(half * v.x, -half * v.y),
        Complex64::new(half * v.x, half * v.y),
        Complex64::new(half * (1.0 - v.z), 0.0),
    )
}

/// `x_i = Tr[σ_i ρ]`.
pub fn bloch_from_rho(rho: &DensityMatrix) -> BlochVector {
    rho.0.bloch_image()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use proptest::prelude::*;

    use super::*;

    fn close(a: &Operator2, b: &Operator2, tol: f64) -> bool {
        (*a - *b).max_abs() <= tol
    }

    #[test]
    fn pauli_relations() {
        let sm = Operator2::sigma_minus();
        let sp = Operator2::sigma_plus();
        assert_eq!(sm + sp, Operator2::sigma_x());
        assert!(close(&((sm - sp) * I), &Operator2::sigma_y(), 0.0));
        assert_eq!(sp * sm - sm * sp, Operator2::sigma_z());
        assert_eq!(sp * sm, Operator2::proj_excited());
        assert_eq!(sm * sp, Operator2::proj_ground());
    }

    #[test]
    fn sigma_phi_special_angles() {
        assert!(close(&sigma_phi(0.0), &Operator2::sigma_x(), 1e-15));
        assert!(close(&sigma_phi(FRAC_PI_2), &Operator2::sigma_y(), 1e-15));
        let s = sigma_phi(0.7);
        assert!(close(&(s * s), &Operator2::identity(), 1e-15));
        let expected = Operator2::sigma_x() * 0.7f64.cos() + Operator2::sigma_y() * 0.7f64.sin();
        assert!(close(&s, &expected, 1e-15));
        assert!(s.is_hermitian(1e-15));
    }

    #[test]
    fn rho_from_bloch_examples() {
        let up = rho_from_bloch(BlochVector::excited()).unwrap();
        assert!(close(up.operator(), &Operator2::proj_excited(), 0.0));
        let down = rho_from_bloch(BlochVector::ground()).unwrap();
        assert!(close(down.operator(), &Operator2::proj_ground(), 0.0));
        let mixed = rho_from_bloch(BlochVector::default()).unwrap();
        assert!(close(mixed.operator(), &Operator2::identity().scale_re(0.5), 0.0));
        assert!(rho_from_bloch(BlochVector::new(0.8, 0.7, 0.0)).is_err());
        assert!(rho_from_bloch(BlochVector::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn bloch_from_rho_examples() {
        let v = bloch_from_rho(&DensityMatrix::maximally_mixed());
        assert_eq!(v, BlochVector::default());
        let v = bloch_from_rho(&DensityMatrix::new(Operator2::proj_excited()).unwrap());
        assert_eq!(v, BlochVector::excited());
        let op = (Operator2::identity() + Operator2::sigma_x() * 0.3 - Operator2::sigma_y() * 0.2).scale_re(0.5);
        let v = bloch_from_rho(&DensityMatrix::new(op).unwrap());
        assert!((v.x - 0.3).abs() < 1e-15 && (v.y + 0.2).abs() < 1e-15 && v.z.abs() < 1e-15);
    }

    #[test]
    fn density_matrix_rejects_bad_operators() {
        assert!(DensityMatrix::new(Operator2::identity()).is_err());
        assert!(DensityMatrix::new(Operator2::sigma_minus() + Operator2::proj_ground()).is_err());
        let negative = Operator2::proj_excited() * 1.5 - Operator2::proj_ground() * 0.5;
        assert!(DensityMatrix::new(negative).is_err());
    }

    fn ball_point() -> impl Strategy<Value = BlochVector> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0).prop_map(|(x, y, z, r)| {
            let n = (x * x + y * y + z * z).sqrt().max(1e-3);
            BlochVector::new(x / n * r, y / n * r, z / n * r)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn bloch_map_round_trips(v in ball_point()) {
            let rho = rho_from_bloch(v).unwrap();
            prop_assert!((rho.operator().trace().re - 1.0).abs() < 1e-12);
            let back = bloch_from_rho(&rho);
            prop_assert!((back.x - v.x).abs() < 1e-12);
            prop_assert!((back.y - v.y).abs() < 1e-12);
            prop_assert!((back.z - v.z).abs() < 1e-12);
            let again = rho_from_bloch(back).unwrap();
            prop_assert!(close(again.operator(), rho.operator(), 1e-12));
        }

        #[test]
        fn unit_vectors_give_projectors(v in ball_point()) {
            prop_assume!(v.norm() > 1e-3);
            let n = v.norm();
            let u = BlochVector::new(v.x / n, v.y / n, v.z / n);
            let rho = rho_from_bloch(u).unwrap();
            prop_assert!(rho.operator().det().norm() < 1e-12);
        }

        #[test]
        fn sigma_theta_expectation(v in ball_point(), theta in -3.2f64..3.2) {
            let rho = rho_from_bloch(v).unwrap();
            let expect = (sigma_phi(theta) * *rho.operator()).trace();
            prop_assert!((expect.re - v.quadrature(theta)).abs() < 1e-12);
            prop_assert!(expect.im.abs() < 1e-12);
        }
    }
}
