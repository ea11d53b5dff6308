//! Numerical tolerances shared across the crate. Every check that compares
//! floating point quantities against a threshold reads it from here.

/// Entrywise tolerance for Hermiticity of operators.
pub const HERMITIAN: f64 = 1e-12;
/// Tolerance on `Tr ρ = 1` for density matrices.
pub const TRACE: f64 = 1e-12;
/// Smallest admissible eigenvalue of a density matrix.
pub const EIGENVALUE_FLOOR: f64 = -1e-9;
/// Slack on the Bloch-ball boundary, `|x|² ≤ 1 + BALL_SLACK`.
pub const BALL_SLACK: f64 = 1e-9;
/// Tolerance on `|α₀|² + |α₁|² + |α₂|² = 1`.
pub const FRACTION_SUM: f64 = 1e-12;
/// Condition number above which a 3×3 matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;
/// Integrand envelope below which the quadrature oracle stops.
pub const QUADRATURE_ENVELOPE: f64 = 1e-12;
/// Per-panel absolute error target of the quadrature oracle.
pub const QUADRATURE_PANEL: f64 = 1e-14;
/// A spectrum value below `-SPECTRUM_NEGATIVE` is reported as suspicious.
pub const SPECTRUM_NEGATIVE: f64 = 1e-9;
/// Relative tolerance used to decide that two grid minima are tied.
pub const EXTREMUM_TIE: f64 = 1e-9;
