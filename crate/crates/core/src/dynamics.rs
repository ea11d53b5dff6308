//! Feedback-modified Liouvillian of the driven atom and its Bloch-space form.
//!
//! Everything is written in the frame rotating at the laser frequency, where
//! the evolution is time homogeneous. In Bloch coordinates the a priori state
//! obeys `dx/dt = -A x + b`.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{bloch_operator, sigma_phi, BlochVector, DensityMatrix, Operator2};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::tolerance;

/// Physical and control parameters of one scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Natural line width γ.
    pub gamma: f64,
    /// Dephasing intensity.
    pub k_d: f64,
    /// Thermal occupation n̄.
    pub n_bar: f64,
    /// Rabi frequency Ω.
    pub omega_rabi: f64,
    /// Detuning Δω between atom and laser.
    pub delta_omega: f64,
    /// Fraction |α₀|² lost in the forward channel.
    pub a0sq: f64,
    /// Fraction |α₁|² sent to the feedback detector.
    pub a1sq: f64,
    /// Fraction |α₂|² sent to the second detector.
    pub a2sq: f64,
    /// Local-oscillator phase of detector 1.
    pub theta1: f64,
    /// Local-oscillator phase of detector 2.
    pub theta2: f64,
    /// Feedback strength c ≥ 0.
    pub c: f64,
    /// Phase φ of the feedback drive relative to the laser.
    pub phi: f64,
}

impl Default for ModelParams {
    /// γ = 1, no environment noise, |α₁|² = |α₂|² = 0.45, no drive and no
    /// feedback.
    fn default() -> Self {
        ModelParams {
            gamma: 1.0,
            k_d: 0.0,
            n_bar: 0.0,
            omega_rabi: 0.0,
            delta_omega: 0.0,
            a0sq: 0.1,
            a1sq: 0.45,
            a2sq: 0.45,
            theta1: 0.0,
            theta2: 0.0,
            c: 0.0,
            phi: 0.0,
        }
    }
}

impl ModelParams {
    pub fn alpha1_abs(&self) -> f64 {
        self.a1sq.sqrt()
    }

    pub fn alpha2_abs(&self) -> f64 {
        self.a2sq.sqrt()
    }

    /// Complex amplitude `α₁ = |α₁| e^{iϑ₁}`.
    pub fn alpha1(&self) -> Complex64 {
        Complex64::from_polar(self.alpha1_abs(), self.theta1)
    }

    pub fn alpha2(&self) -> Complex64 {
        Complex64::from_polar(self.alpha2_abs(), self.theta2)
    }

    /// Feedback-shifted detuning `Δω_c = Δω + cγ|α₁| cos(ϑ₁ − φ)`.
    pub fn delta_omega_c(&self) -> f64 {
        self.delta_omega + self.c * self.gamma * self.alpha1_abs() * (self.theta1 - self.phi).cos()
    }

    /// Effective jump operator of the feedback channel, `α₁σ₋ − i c σ_φ`.
    pub fn feedback_jump(&self) -> Operator2 {
        Operator2::sigma_minus() * self.alpha1() - sigma_phi(self.phi) * Complex64::new(0.0, self.c)
    }

    /// Jump operator of the second detector, `α₂σ₋`.
    pub fn second_jump(&self) -> Operator2 {
        Operator2::sigma_minus() * self.alpha2()
    }

    /// Draws a parameter set from the box used by the property tests:
    /// γ ∈ [0.5, 2], angles in [−π, π], c ∈ [0, 1], Ω ∈ [0, 4],
    /// Δω ∈ [−4, 4], n̄ ∈ [0, 2], k_d ∈ [0, 1], |α₁|² ∈ [0.05, 0.9] and
    /// |α₂|² ∈ [0, 0.95 − |α₁|²].
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        use std::f64::consts::PI;
        let a1sq = rng.random_range(0.05..0.9);
        let a2sq = rng.random_range(0.0..(0.95 - a1sq));
        ModelParams {
            gamma: rng.random_range(0.5..2.0),
            k_d: rng.random_range(0.0..1.0),
            n_bar: rng.random_range(0.0..2.0),
            omega_rabi: rng.random_range(0.0..4.0),
            delta_omega: rng.random_range(-4.0..4.0),
            a0sq: 1.0 - a1sq - a2sq,
            a1sq,
            a2sq,
            theta1: rng.random_range(-PI..PI),
            theta2: rng.random_range(-PI..PI),
            c: rng.random_range(0.0..1.0),
            phi: rng.random_range(-PI..PI),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One failed (or, for warnings, merely notable) parameter constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    /// Field or constraint name, e.g. `omega_rabi` or `fractions`.
    pub constraint: String,
    pub message: String,
}

impl Violation {
    fn error(constraint: &str, message: String) -> Self {
        Violation {
            severity: Severity::Error,
            constraint: constraint.to_string(),
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.constraint, self.message)
    }
}

/// Checks every parameter constraint. In strict mode `|α₀|² > 0` is required;
/// otherwise `|α₀|² = 0` only produces a warning entry, which admits the ideal
/// setting where all emitted light reaches the detectors.
pub fn validate(p: &ModelParams, strict: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let fields = [
        ("gamma", p.gamma),
        ("k_d", p.k_d),
        ("n_bar", p.n_bar),
        ("omega_rabi", p.omega_rabi),
        ("delta_omega", p.delta_omega),
        ("a0sq", p.a0sq),
        ("a1sq", p.a1sq),
        ("a2sq", p.a2sq),
        ("theta1", p.theta1),
        ("theta2", p.theta2),
        ("c", p.c),
        ("phi", p.phi),
    ];
    for (name, value) in fields {
        if !value.is_finite() {
            out.push(Violation::error(name, format!("{value} is not finite")));
        }
    }
    if !out.is_empty() {
        return out;
    }

    if p.gamma <= 0.0 {
        out.push(Violation::error("gamma", format!("γ > 0 required, got {}", p.gamma)));
    }
    for (name, value) in [
        ("k_d", p.k_d),
        ("n_bar", p.n_bar),
        ("omega_rabi", p.omega_rabi),
        ("c", p.c),
        ("a2sq", p.a2sq),
    ] {
        if value < 0.0 {
            out.push(Violation::error(name, format!("must be ≥ 0, got {value}")));
        }
    }
    if p.a1sq <= 0.0 {
        out.push(Violation::error("a1sq", format!("|α₁|² > 0 required, got {}", p.a1sq)));
    }
    if p.a0sq < 0.0 {
        out.push(Violation::error("a0sq", format!("must be ≥ 0, got {}", p.a0sq)));
    } else if p.a0sq == 0.0 {
        let message = "|α₀|²>0 required".to_string();
        out.push(if strict {
            Violation::error("a0sq", message)
        } else {
            Violation {
                severity: Severity::Warning,
                constraint: "a0sq".into(),
                message: "|α₀|² = 0: all emitted light is detected (ideal case)".into(),
            }
        });
    }
    let sum = p.a0sq + p.a1sq + p.a2sq;
    if (sum - 1.0).abs() > tolerance::FRACTION_SUM {
        out.push(Violation::error(
            "fractions",
            format!("|α₀|² + |α₁|² + |α₂|² must equal 1, fractions sum {sum}"),
        ));
    }
    out
}

/// `Ok` when `validate` reports no errors (warnings are allowed).
pub fn ensure_valid(p: &ModelParams, strict: bool) -> Result<Vec<Violation>> {
    let v = validate(p, strict);
    if v.iter().any(Violation::is_error) {
        Err(Error::InvalidParams(v))
    } else {
        Ok(v)
    }
}

/// `Lρ` for a density matrix.
pub fn liouvillian_apply(p: &ModelParams, rho: &DensityMatrix) -> Operator2 {
    liouvillian(p, rho.operator())
}

/// `Lρ` evaluated term by term on an arbitrary 2×2 operator. Linear in `rho`.
pub fn liouvillian(p: &ModelParams, rho: &Operator2) -> Operator2 {
    let g = p.gamma;
    let i = Complex64::new(0.0, 1.0);
    let sm = Operator2::sigma_minus();
    let sp = Operator2::sigma_plus();
    let sz = Operator2::sigma_z();
    let p_up = Operator2::proj_excited();
    let p_down = Operator2::proj_ground();
    let r = *rho;

    let h = sz * (0.5 * p.delta_omega_c()) + Operator2::sigma_x() * (0.5 * p.omega_rabi);
    let mut out = -(h.commutator(&r) * i);

    out += (sz * r * sz - r) * (g * p.k_d);
    out += (sp * r * sm - p_down.anticommutator(&r) * 0.5) * (g * p.n_bar);
    out += (sm * r * sp - p_up.anticommutator(&r) * 0.5) * (g * (p.n_bar + 1.0 - p.a1sq));

    let jump = p.feedback_jump();
    out += jump * r * jump.adjoint() * g;
    let loss =
        p_up * (p.a1sq - 2.0 * p.c * p.alpha1_abs() * (p.theta1 - p.phi).sin()) + Operator2::identity() * (p.c * p.c);
    out += -(loss.anticommutator(&r) * (0.5 * g));
    out
}

/// The Bloch form of `L`: `Bloch(Lρ) = −A x + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochAffine {
    pub a: Mat3,
    pub b: Vec3,
}

impl BlochAffine {
    pub fn drift(&self, x: &Vec3) -> Vec3 {
        self.b - self.a * *x
    }

    pub fn is_stable(&self) -> bool {
        self.a.has_positive_spectrum()
    }

    /// Stationary point `A⁻¹ b`.
    pub fn stationary(&self) -> Result<Vec3> {
        self.a.solve(&self.b)
    }

    /// Exact a priori solution `x(t) = x_eq + e^{−At}(x₀ − x_eq)`.
    pub fn evolve(&self, x0: &Vec3, t: f64) -> Result<Vec3> {
        let eq = self.stationary()?;
        Ok(eq + self.a.scale(-t).exp() * (*x0 - eq))
    }
}

/// Builds `(A, b)` entry by entry.
///
/// The diagonal entries and the detuning parts of `a₁₂`, `a₂₁` are the
/// familiar ones. The `c²` contribution to the off-diagonal entries is the
/// one generated by the `γc²(σ_φ ρ σ_φ − ρ)` part of `L`, a dephasing about
/// the axis `(cos φ, sin φ, 0)` whose Bloch matrix is `2γc²(1 − n nᵀ)`; it
/// adds `−γc² sin 2φ` to both `a₁₂` and `a₂₁`.
pub fn bloch_affine(p: &ModelParams) -> BlochAffine {
    let g = p.gamma;
    let c = p.c;
    let a1 = p.alpha1_abs();
    let (sin_phi, cos_phi) = p.phi.sin_cos();
    let dwc = p.delta_omega_c();
    let base = 0.5 + p.n_bar + 2.0 * p.k_d;
    let cross = c * a1 * (p.theta1 + p.phi).cos() + c * c * (2.0 * p.phi).sin();
    let feedback_sin = c * a1 * (p.theta1 - p.phi).sin();

    let a11 = g * (base + 2.0 * c * a1 * p.theta1.cos() * sin_phi + 2.0 * c * c * sin_phi * sin_phi);
    let a12 = dwc - g * cross;
    let a21 = -dwc - g * cross;
    let a22 = g * (base - 2.0 * c * a1 * p.theta1.sin() * cos_phi + 2.0 * c * c * cos_phi * cos_phi);
    let a33 = g * (1.0 + 2.0 * p.n_bar - 2.0 * feedback_sin + 2.0 * c * c);
    let om = p.omega_rabi;

    BlochAffine {
        a: Mat3([[a11, a12, 0.0], [a21, a22, om], [0.0, -om, a33]]),
        b: Vec3::new(0.0, 0.0, -g * (1.0 - 2.0 * feedback_sin)),
    }
}

/// The Bloch drift recovered numerically from [`liouvillian`] by applying it
/// to the maximally mixed state and the three Pauli directions.
pub fn bloch_affine_from_liouvillian(p: &ModelParams) -> BlochAffine {
    let image = |v: BlochVector| Vec3(liouvillian(p, &bloch_operator(v)).bloch_image().to_array());
    let b = image(BlochVector::default());
    let cols = [
        BlochVector::new(1.0, 0.0, 0.0),
        BlochVector::new(0.0, 1.0, 0.0),
        BlochVector::new(0.0, 0.0, 1.0),
    ]
    .map(|e| b - image(e));
    BlochAffine {
        a: Mat3::from_columns(cols),
        b,
    }
}

/// Stationary Bloch vector `x_eq = A⁻¹ b`.
pub fn equilibrium(p: &ModelParams) -> Result<BlochVector> {
    let x = bloch_affine(p).stationary()?;
    Ok(BlochVector::from_array(x.0))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::algebra::rho_from_bloch;

    fn line4() -> ModelParams {
        ModelParams {
            delta_omega: -2.0,
            c: 0.3762,
            theta1: 0.0482,
            phi: 1.9941,
            ..Default::default()
        }
    }

    fn random_state(rng: &mut ChaCha8Rng) -> BlochVector {
        loop {
            let v = BlochVector::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm_sqr() <= 1.0 {
                return v;
            }
        }
    }

    #[test]
    fn validate_examples() {
        let p = ModelParams::default();
        assert!(validate(&p, true).is_empty());

        let bad = ModelParams { a0sq: 0.2, ..p };
        let v = validate(&bad, false);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, "fractions");
        assert!(v[0].message.contains("1.1"));

        let ideal = ModelParams {
            a0sq: 0.0,
            a1sq: 1.0,
            a2sq: 0.0,
            ..p
        };
        let strict = validate(&ideal, true);
        assert_eq!(strict.len(), 1);
        assert!(strict[0].is_error());
        assert!(strict[0].message.contains("|α₀|²>0 required"));
        let lax = validate(&ideal, false);
        assert_eq!(lax.len(), 1);
        assert_eq!(lax[0].severity, Severity::Warning);
        assert!(ensure_valid(&ideal, false).is_ok());
    }

    #[test]
    fn validate_catches_sign_and_finiteness_errors() {
        let p = ModelParams {
            omega_rabi: -1.0,
            c: -0.1,
            gamma: 0.0,
            ..Default::default()
        };
        let names: Vec<_> = validate(&p, true).into_iter().map(|v| v.constraint).collect();
        assert!(names.contains(&"omega_rabi".to_string()));
        assert!(names.contains(&"c".to_string()));
        assert!(names.contains(&"gamma".to_string()));
        let nan = ModelParams {
            phi: f64::NAN,
            ..Default::default()
        };
        assert_eq!(validate(&nan, true)[0].constraint, "phi");
        let no_feedback_light = ModelParams {
            a1sq: 0.0,
            a2sq: 0.9,
            ..Default::default()
        };
        assert!(validate(&no_feedback_light, true)
            .iter()
            .any(|v| v.constraint == "a1sq"));
    }

    #[test]
    fn ground_state_is_stationary_without_drive() {
        let p = ModelParams::default();
        let rho = rho_from_bloch(BlochVector::ground()).unwrap();
        assert!(liouvillian_apply(&p, &rho).max_abs() < 1e-15);
    }

    #[test]
    fn affine_examples() {
        let p = ModelParams::default();
        let ab = bloch_affine(&p);
        let expected = Mat3([[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 1.0]]);
        assert!((ab.a - expected).max_abs() < 1e-15);
        assert_eq!(ab.b, Vec3::new(0.0, 0.0, -1.0));

        let thermal = bloch_affine(&ModelParams { n_bar: 1.0, ..p });
        assert!((thermal.a.0[2][2] - 3.0).abs() < 1e-15);
        assert!((thermal.a.0[0][0] - 1.5).abs() < 1e-15);
        assert!((thermal.a.0[1][1] - 1.5).abs() < 1e-15);
    }

    // Finite differences of the operator-level Liouvillian along each Bloch
    // direction, at a generic interior state.
    #[test]
    fn line4_affine_matches_finite_differences() {
        let p = line4();
        let ab = bloch_affine(&p);
        let x0 = BlochVector::new(0.1, -0.2, 0.3);
        let h = 1e-4;
        for j in 0..3 {
            let mut plus = x0.to_array();
            let mut minus = x0.to_array();
            plus[j] += h;
            minus[j] -= h;
            let lp = liouvillian(&p, &bloch_operator(BlochVector::from_array(plus))).bloch_image();
            let lm = liouvillian(&p, &bloch_operator(BlochVector::from_array(minus))).bloch_image();
            for (i, (a, b)) in lp.to_array().iter().zip(lm.to_array()).enumerate() {
                let column = (a - b) / (2.0 * h);
                assert!(
                    (column + ab.a.0[i][j]).abs() < 1e-8,
                    "A[{i}][{j}]: {} vs {}",
                    -column,
                    ab.a.0[i][j]
                );
            }
        }
    }

    #[test]
    fn feedback_dephasing_enters_off_diagonal_with_sin_2phi() {
        // Only the c² dephasing differs between these two parameter sets.
        let p = ModelParams {
            c: 0.5,
            phi: 0.7,
            a1sq: 0.45,
            ..Default::default()
        };
        let ab = bloch_affine(&p);
        let cross = p.c * p.alpha1_abs() * (p.theta1 + p.phi).cos();
        let dephasing = -p.c * p.c * (2.0 * p.phi).sin();
        assert!((ab.a.0[0][1] - (p.delta_omega_c() - cross + dephasing)).abs() < 1e-15);
        assert!((ab.a.0[1][0] - (-p.delta_omega_c() - cross + dephasing)).abs() < 1e-15);
    }

    #[test]
    fn operator_and_bloch_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = ModelParams::random(&mut rng);
            let x = random_state(&mut rng);
            let rho = rho_from_bloch(x).unwrap();
            let l = liouvillian_apply(&p, &rho);
            assert!(l.trace().norm() < 1e-12);
            assert!(l.is_hermitian(1e-12));
            let ab = bloch_affine(&p);
            let predicted = ab.drift(&Vec3(x.to_array()));
            let got = l.bloch_image();
            for (g, e) in got.to_array().iter().zip(predicted.0) {
                assert!((g - e).abs() < 1e-10, "{p:?}: {got} vs {predicted:?}");
            }
        }
    }

    #[test]
    fn equilibrium_examples() {
        let p = ModelParams::default();
        let x = equilibrium(&p).unwrap();
        assert!(x.x.abs() < 1e-15 && x.y.abs() < 1e-15 && (x.z + 1.0).abs() < 1e-15);
        let x = equilibrium(&ModelParams { n_bar: 1.0, ..p }).unwrap();
        assert!((x.z + 1.0 / 3.0).abs() < 1e-15);
    }

    // Relax dx/dt = -Ax + b with RK4 until it stops moving and compare with
    // the linear solve.
    #[test]
    fn line1_equilibrium_matches_relaxation() {
        let p = ModelParams {
            omega_rabi: 0.2976,
            theta1: -FRAC_PI_2,
            theta2: -FRAC_PI_2,
            ..Default::default()
        };
        let ab = bloch_affine(&p);
        let f = |x: Vec3| ab.drift(&x);
        let mut x = Vec3::zero();
        let h = 0.01;
        for _ in 0..20_000 {
            let k1 = f(x);
            let k2 = f(x + k1.scale(h / 2.0));
            let k3 = f(x + k2.scale(h / 2.0));
            let k4 = f(x + k3.scale(h));
            x = x + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
        }
        let eq = equilibrium(&p).unwrap();
        for (a, b) in x.0.iter().zip(eq.to_array()) {
            assert!((a - b).abs() < 1e-8);
        }
        let rho = rho_from_bloch(eq).unwrap();
        assert!(liouvillian_apply(&p, &rho).max_abs() < 1e-10);
    }

    #[test]
    fn line2_equilibrium_is_stationary() {
        let p = ModelParams {
            c: 0.2936,
            theta1: 0.0,
            phi: FRAC_PI_2,
            ..Default::default()
        };
        let eq = equilibrium(&p).unwrap();
        assert!(eq.in_ball());
        let ab = bloch_affine(&p);
        let residual = ab.a * Vec3(eq.to_array()) - ab.b;
        assert!(residual.max_abs() < 1e-10);
        assert!(liouvillian_apply(&p, &rho_from_bloch(eq).unwrap()).max_abs() < 1e-10);
    }

    #[test]
    fn singular_drift_is_reported() {
        // Every entry of A scales with γ; at this size the determinant underflows.
        let p = ModelParams {
            gamma: 1e-300,
            ..Default::default()
        };
        assert!(matches!(equilibrium(&p), Err(Error::Singular { .. })));
    }

    #[test]
    fn no_feedback_removes_phase_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = ModelParams {
                c: 0.0,
                ..ModelParams::random(&mut rng)
            };
            let q = ModelParams {
                phi: p.phi + 1.3,
                theta1: p.theta1 - 0.4,
                ..p
            };
            assert_eq!(bloch_affine(&p), bloch_affine(&q));
            let rho = rho_from_bloch(random_state(&mut rng)).unwrap();
            let diff = liouvillian_apply(&p, &rho) - liouvillian_apply(&q, &rho);
            assert!(diff.max_abs() < 1e-15);
        }
    }

    #[test]
    fn numeric_and_closed_form_drift_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = ModelParams::random(&mut rng);
            let a = bloch_affine(&p);
            let n = bloch_affine_from_liouvillian(&p);
            assert!((a.a - n.a).max_abs() < 1e-12);
            assert!((a.b - n.b).max_abs() < 1e-12);
        }
    }

    #[test]
    fn evolve_reaches_equilibrium_and_starts_at_x0() {
        let p = line4();
        let ab = bloch_affine(&p);
        let x0 = Vec3::new(0.0, 0.0, 1.0);
        assert!((ab.evolve(&x0, 0.0).unwrap() - x0).max_abs() < 1e-15);
        let late = ab.evolve(&x0, 200.0).unwrap();
        assert!((late - ab.stationary().unwrap()).max_abs() < 1e-12);
    }
}
