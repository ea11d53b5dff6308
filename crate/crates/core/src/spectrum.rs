//! Incoherent homodyne spectrum of the side channels.
//!
//! ```text
//! S_k(μ) = 1 + 2γ|α_k|² (A (A² + μ²)⁻¹ t_k) · s_k
//! ```
//!
//! `S_k = 1` is the shot-noise level; values below one signal squeezing.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{bloch_operator, sigma_phi, BlochVector, Operator2};
use crate::dynamics::{bloch_affine, ModelParams};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::tolerance;

/// Side channel index. Channel 1 feeds the feedback loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Channel {
    One,
    Two,
}

impl Channel {
    pub fn number(self) -> u8 {
        match self {
            Channel::One => 1,
            Channel::Two => 2,
        }
    }

    /// `(|α_k|², ϑ_k)` of this channel.
    pub fn detection(self, p: &ModelParams) -> (f64, f64) {
        match self {
            Channel::One => (p.a1sq, p.theta1),
            Channel::Two => (p.a2sq, p.theta2),
        }
    }
}

impl TryFrom<u8> for Channel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Channel::One),
            2 => Ok(Channel::Two),
            other => Err(Error::Config(format!("channel must be 1 or 2, got {other}"))),
        }
    }
}

impl From<Channel> for u8 {
    fn from(c: Channel) -> u8 {
        c.number()
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// `s = (cos ϑ, sin ϑ, 0)`.
pub fn s_vector(theta: f64) -> Vec3 {
    let (s, c) = theta.sin_cos();
    Vec3::new(c, s, 0.0)
}

/// `t_k` from the Bloch components of the stationary state.
pub fn t_vector(p: &ModelParams, channel: Channel, x_eq: BlochVector) -> Result<Vec3> {
    let (_, theta) = channel.detection(p);
    let (st, ct) = theta.sin_cos();
    let BlochVector { x, y, z } = x_eq;
    let mut t = Vec3::new(
        (1.0 + z - x * x) * ct - x * y * st,
        (1.0 + z - y * y) * st - x * y * ct,
        -(1.0 + z) * (x * ct + y * st),
    );
    if channel == Channel::One {
        if p.a1sq <= 0.0 {
            return Err(Error::ZeroDetectionAmplitude);
        }
        let (sp, cp) = p.phi.sin_cos();
        let k = 2.0 * p.c / p.alpha1_abs();
        t = t + Vec3::new(z * sp, -z * cp, -x * sp + y * cp).scale(k);
    }
    Ok(t)
}

/// `t_k` from its operator definition,
/// `Tr[(e^{iϑ}σ₋ρ + e^{−iϑ}ρσ₊ − Tr[σ_ϑρ]ρ + i(c/|α₁|)[ρ, σ_φ]) σ⃗]`,
/// the commutator term present for channel 1 only.
pub fn t_vector_trace_form(p: &ModelParams, channel: Channel, x_eq: BlochVector) -> Result<Vec3> {
    let (_, theta) = channel.detection(p);
    let rho = bloch_operator(x_eq);
    let phase = Complex64::from_polar(1.0, theta);
    let signal = (sigma_phi(theta) * rho).trace();
    let mut m = Operator2::sigma_minus() * rho * phase + rho * Operator2::sigma_plus() * phase.conj() - rho * signal;
    if channel == Channel::One {
        if p.a1sq <= 0.0 {
            return Err(Error::ZeroDetectionAmplitude);
        }
        let k = Complex64::new(0.0, p.c / p.alpha1_abs());
        m += rho.commutator(&sigma_phi(p.phi)) * k;
    }
    Ok(Vec3(m.bloch_image().to_array()))
}

/// Precomputed pieces of `S_k(μ)` for one parameter set, so that scans over
/// `μ` only pay for a 3×3 solve per point.
#[derive(Clone, Debug)]
pub struct SpectralEvaluator {
    a: Mat3,
    a_sq: Mat3,
    t: Vec3,
    s: Vec3,
    weight: f64,
}

impl SpectralEvaluator {
    pub fn new(p: &ModelParams, channel: Channel) -> Result<Self> {
        let (fraction, theta) = channel.detection(p);
        let affine = bloch_affine(p);
        let weight = 2.0 * p.gamma * fraction;
        if weight == 0.0 {
            return Ok(SpectralEvaluator {
                a: affine.a,
                a_sq: affine.a * affine.a,
                t: Vec3::zero(),
                s: s_vector(theta),
                weight,
            });
        }
        if !affine.is_stable() {
            return Err(Error::Unstable);
        }
        let x_eq = BlochVector::from_array(affine.stationary()?.0);
        Ok(SpectralEvaluator {
            a: affine.a,
            a_sq: affine.a * affine.a,
            t: t_vector(p, channel, x_eq)?,
            s: s_vector(theta),
            weight,
        })
    }

    pub fn drift_matrix(&self) -> &Mat3 {
        &self.a
    }

    pub fn t(&self) -> Vec3 {
        self.t
    }

    pub fn s(&self) -> Vec3 {
        self.s
    }

    /// `2γ|α_k|²`
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Solves `(A² + μ²) y = t` and returns `1 + w (A y)·s`.
    pub fn value(&self, mu: f64) -> Result<f64> {
        if self.weight == 0.0 {
            return Ok(1.0);
        }
        let shifted = self.a_sq + Mat3::identity().scale(mu * mu);
        let y = shifted.solve(&self.t)?;
        Ok(1.0 + self.weight * (self.a * y).dot(&self.s))
    }
}

/// `S_k(μ)` at one frequency.
pub fn spectrum_value(p: &ModelParams, channel: Channel, mu: f64) -> Result<f64> {
    SpectralEvaluator::new(p, channel)?.value(mu)
}

// Gauss–Kronrod 15/7 abscissae and weights on [-1, 1] (non-negative half).
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_KRONROD: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd-indexed nodes 1, 3, 5, 7.
const GK_GAUSS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_BISECTIONS: u32 = 24;
const MAX_HORIZON: f64 = 1e5;

/// One Gauss–Kronrod node mapped onto a panel.
#[derive(Clone, Copy)]
struct Node {
    tau: f64,
    kronrod: f64,
    gauss: f64,
}

/// The 15 nodes on `[lo, hi]`, weights already scaled by the half width.
fn panel_nodes(lo: f64, hi: f64) -> impl Iterator<Item = Node> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..15).map(move |k| {
        // k = 0..7 left half and centre, 8..14 right half.
        let (i, sign) = if k < 8 { (k, -1.0) } else { (14 - k, 1.0) };
        let gauss = if i % 2 == 1 { GK_GAUSS[i / 2] } else { 0.0 };
        Node {
            tau: mid + sign * half * GK_NODES[i],
            kronrod: half * GK_KRONROD[i],
            gauss: half * gauss,
        }
    })
}

/// Kronrod estimate and |Kronrod − Gauss| for one panel, given the integrand.
fn gauss_kronrod(nodes: impl Iterator<Item = Node>, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let (k, g) = nodes.fold((0.0, 0.0), |(k, g), n| {
        let v = f(n.tau);
        (k + n.kronrod * v, g + n.gauss * v)
    });
    (k, (k - g).abs())
}

struct Integrand<'a> {
    a: &'a Mat3,
    t: &'a Vec3,
    s: &'a Vec3,
    mu: f64,
}

impl Integrand<'_> {
    /// `cos(μτ) (e^{−Aτ} t)·s`, with `e^{−Aτ}` split as `e^{−A τ₀} e^{−A(τ−τ₀)}`.
    fn eval(&self, origin: f64, origin_prop: &Mat3, tau: f64) -> f64 {
        let local = self.a.scale(-(tau - origin)).exp();
        (self.mu * tau).cos() * (*origin_prop * (local * *self.t)).dot(self.s)
    }

    fn adaptive(&self, origin: f64, origin_prop: &Mat3, lo: f64, hi: f64, depth: u32) -> Result<f64> {
        let (value, err) = gauss_kronrod(panel_nodes(lo, hi), |tau| self.eval(origin, origin_prop, tau));
        if err <= tolerance::QUADRATURE_PANEL {
            return Ok(value);
        }
        if depth >= MAX_BISECTIONS {
            return Err(Error::Quadrature(format!(
                "panel [{lo}, {hi}] did not reach the error target (estimate {err:.3e})"
            )));
        }
        let mid = 0.5 * (lo + hi);
        Ok(self.adaptive(origin, origin_prop, lo, mid, depth + 1)?
            + self.adaptive(origin, origin_prop, mid, hi, depth + 1)?)
    }
}

/// Evaluates `S_k(μ)` without the resolvent, from
/// `A (A² + μ²)⁻¹ = ∫₀^∞ cos(μτ) e^{−Aτ} dτ`, using matrix exponentials and
/// panel-wise adaptive Gauss–Kronrod quadrature. The integral is truncated
/// once `‖e^{−Aτ}‖ |t|` drops below [`tolerance::QUADRATURE_ENVELOPE`].
pub fn spectrum_quadrature_oracle(p: &ModelParams, channel: Channel, mu: f64) -> Result<f64> {
    let (fraction, theta) = channel.detection(p);
    let weight = 2.0 * p.gamma * fraction;
    if weight == 0.0 {
        return Ok(1.0);
    }
    let affine = bloch_affine(p);
    if !affine.is_stable() {
        return Err(Error::Unstable);
    }
    let x_eq = BlochVector::from_array(affine.stationary()?.0);
    let t = t_vector(p, channel, x_eq)?;
    let s = s_vector(theta);
    let integrand = Integrand {
        a: &affine.a,
        t: &t,
        s: &s,
        mu,
    };

    let width = if mu == 0.0 {
        0.5
    } else {
        0.5f64.min(FRAC_PI_2 / mu.abs())
    };
    let step = affine.a.scale(-width).exp();
    // e^{−Aτ} t on the reference panel [0, width]; every panel reuses these.
    let reference: Vec<(Node, Vec3)> = panel_nodes(0.0, width)
        .map(|n| (n, affine.a.scale(-n.tau).exp() * t))
        .collect();

    let t_norm = t.norm();
    let mut origin = 0.0;
    let mut origin_prop = Mat3::identity();
    let mut total = 0.0;
    loop {
        let (kronrod, gauss) = reference.iter().fold((0.0, 0.0), |(k, g), (n, v)| {
            let f = (mu * (origin + n.tau)).cos() * (origin_prop * *v).dot(&s);
            (k + n.kronrod * f, g + n.gauss * f)
        });
        total += if (kronrod - gauss).abs() <= tolerance::QUADRATURE_PANEL {
            kronrod
        } else {
            integrand.adaptive(origin, &origin_prop, origin, origin + width, 0)?
        };
        origin += width;
        origin_prop = origin_prop * step;
        if origin_prop.frobenius_norm() * t_norm < tolerance::QUADRATURE_ENVELOPE {
            break;
        }
        if origin > MAX_HORIZON || !total.is_finite() {
            return Err(Error::Quadrature(format!(
                "integrand has not decayed by τ = {origin} (μ = {mu})"
            )));
        }
    }
    Ok(1.0 + weight * total)
}

/// `n` equispaced points from `min` to `max` inclusive. Symmetric ranges give
/// grids that are symmetric about zero to rounding.
pub fn uniform_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![min; n];
    }
    let last = (n - 1) as f64;
    // Interpolating from both ends keeps ±μ pairs exact on symmetric ranges.
    (0..n)
        .map(|i| (min * (last - i as f64) + max * i as f64) / last)
        .collect()
}

/// A sampled spectrum, analytic or estimated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSeries {
    pub channel: Channel,
    pub mu: Vec<f64>,
    pub values: Vec<f64>,
    /// Standard errors, present for Monte Carlo estimates.
    pub stderr: Option<Vec<f64>>,
}

/// A located extremum: grid index, parabola-refined position and value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub index: usize,
    pub mu: f64,
    pub value: f64,
}

/// Vertex of the parabola through `(−h, f0), (0, f1), (h, f2)`, as an offset
/// clamped to `[−h, h]`, and the parabola's value there.
pub fn parabolic_vertex(f0: f64, f1: f64, f2: f64, h: f64) -> (f64, f64) {
    let curvature = f0 - 2.0 * f1 + f2;
    if curvature == 0.0 || !curvature.is_finite() {
        return (0.0, f1);
    }
    let offset = (0.5 * h * (f0 - f2) / curvature).clamp(-h, h);
    let u = offset / h;
    let value = f1 + 0.5 * u * (f2 - f0) + 0.5 * u * u * curvature;
    (offset, value)
}

impl SpectrumSeries {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Number of values below `−tolerance::SPECTRUM_NEGATIVE`. The spectrum
    /// is expected to be positive; a non-zero count deserves a warning.
    pub fn negative_count(&self) -> usize {
        self.values
            .iter()
            .filter(|&&v| v < -tolerance::SPECTRUM_NEGATIVE)
            .count()
    }

    fn refine(&self, i: usize) -> Extremum {
        let n = self.len();
        if n < 3 || i == 0 || i + 1 == n {
            return Extremum {
                index: i,
                mu: self.mu[i],
                value: self.values[i],
            };
        }
        let h = 0.5 * (self.mu[i + 1] - self.mu[i - 1]);
        let (offset, value) = parabolic_vertex(self.values[i - 1], self.values[i], self.values[i + 1], h);
        Extremum {
            index: i,
            mu: self.mu[i] + offset,
            value,
        }
    }

    fn local_extrema(&self, sign: f64) -> Vec<usize> {
        let v: Vec<f64> = self.values.iter().map(|x| sign * x).collect();
        let n = v.len();
        (0..n)
            .filter(|&i| {
                let left = i == 0 || v[i] <= v[i - 1];
                let right = i + 1 == n || v[i] <= v[i + 1];
                left && right
            })
            .collect()
    }

    /// All global minima (ties within [`tolerance::EXTREMUM_TIE`] relative),
    /// refined by parabolic interpolation and ordered by `|μ|`.
    pub fn global_minima(&self) -> Vec<Extremum> {
        self.global(1.0)
    }

    pub fn global_maxima(&self) -> Vec<Extremum> {
        let mut out = self.global(-1.0);
        out.iter_mut().for_each(|e| e.value = self.refine(e.index).value);
        out
    }

    fn global(&self, sign: f64) -> Vec<Extremum> {
        let Some(best) = self.values.iter().map(|v| sign * v).min_by(|a, b| a.total_cmp(b)) else {
            return Vec::new();
        };
        let tie = tolerance::EXTREMUM_TIE * best.abs().max(1.0);
        let mut out: Vec<Extremum> = self
            .local_extrema(sign)
            .into_iter()
            .filter(|&i| sign * self.values[i] <= best + tie)
            .map(|i| self.refine(i))
            .collect();
        out.sort_by(|a, b| a.mu.abs().total_cmp(&b.mu.abs()).then(a.mu.total_cmp(&b.mu)));
        out
    }

    /// The global minimum closest to `μ = 0`.
    pub fn minimum(&self) -> Option<Extremum> {
        self.global_minima().into_iter().next()
    }

    /// Whether the grid point nearest `mu` is a strict local maximum.
    pub fn is_local_maximum_near(&self, mu: f64) -> bool {
        let Some(i) = self.nearest_index(mu) else {
            return false;
        };
        i > 0 && i + 1 < self.len() && self.values[i] > self.values[i - 1] && self.values[i] > self.values[i + 1]
    }

    pub fn nearest_index(&self, mu: f64) -> Option<usize> {
        (0..self.len()).min_by(|&a, &b| (self.mu[a] - mu).abs().total_cmp(&(self.mu[b] - mu).abs()))
    }

    /// Largest `|S(μ) − S(−μ)|` over grid pairs `(i, n−1−i)`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.len();
        (0..n / 2)
            .map(|i| (self.values[i] - self.values[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Evaluates `S_k` on `points` uniform grid points over `[mu_min, mu_max]`.
/// Points are evaluated in parallel; the output is ordered by grid index and
/// does not depend on the thread count.
pub fn spectrum_scan(
    p: &ModelParams,
    channel: Channel,
    mu_min: f64,
    mu_max: f64,
    points: usize,
) -> Result<SpectrumSeries> {
    if points < 2 || !(mu_min < mu_max) {
        return Err(Error::Config(format!(
            "spectrum grid needs points ≥ 2 and mu_min < mu_max, got {points} points on [{mu_min}, {mu_max}]"
        )));
    }
    let eval = SpectralEvaluator::new(p, channel)?;
    let mu = uniform_grid(mu_min, mu_max, points);
    let values = mu.par_iter().map(|&m| eval.value(m)).collect::<Result<Vec<_>>>()?;
    Ok(SpectrumSeries {
        channel,
        mu,
        values,
        stderr: None,
    })
}

/// Default frequency window `[−8γ, 8γ]`, 801 points.
pub fn default_grid(p: &ModelParams) -> (f64, f64, usize) {
    (-8.0 * p.gamma, 8.0 * p.gamma, 801)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::dynamics::equilibrium;

    fn line1() -> ModelParams {
        ModelParams {
            omega_rabi: 0.2976,
            theta1: -FRAC_PI_2,
            theta2: -FRAC_PI_2,
            ..Default::default()
        }
    }

    fn line3() -> ModelParams {
        ModelParams {
            delta_omega: -2.0,
            omega_rabi: 2.0526,
            theta1: 0.1449,
            theta2: 0.1449,
            ..Default::default()
        }
    }

    fn frozen() -> ModelParams {
        let c: f64 = 0.25;
        let u = 2.0 * c - 2.0 * c * c;
        ModelParams {
            a0sq: 0.0,
            a1sq: 1.0,
            a2sq: 0.0,
            theta1: FRAC_PI_2,
            phi: 0.0,
            c,
            omega_rabi: ((0.5 - u) * u).sqrt(),
            ..Default::default()
        }
    }

    #[test]
    fn s_vector_examples() {
        assert_eq!(s_vector(0.0), Vec3::new(1.0, 0.0, 0.0));
        let v = s_vector(FRAC_PI_2);
        assert!(v.0[0].abs() < 1e-16 && v.0[1] == 1.0 && v.0[2] == 0.0);
        let v = s_vector(-FRAC_PI_2);
        assert!(v.0[0].abs() < 1e-16 && v.0[1] == -1.0);
    }

    #[test]
    fn t_vectors_coincide_without_feedback() {
        let p = ModelParams {
            theta2: 0.3,
            theta1: 0.3,
            omega_rabi: 1.1,
            delta_omega: 0.4,
            ..Default::default()
        };
        let x = equilibrium(&p).unwrap();
        assert_eq!(
            t_vector(&p, Channel::One, x).unwrap(),
            t_vector(&p, Channel::Two, x).unwrap()
        );
    }

    #[test]
    fn t_vector_vanishes_in_ground_state() {
        let p = ModelParams {
            theta1: 1.2,
            theta2: -0.7,
            ..Default::default()
        };
        for ch in [Channel::One, Channel::Two] {
            assert_eq!(t_vector(&p, ch, BlochVector::ground()).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn frozen_atom_has_pure_equilibrium_and_zero_t() {
        let p = frozen();
        let x = equilibrium(&p).unwrap();
        assert!(x.x.abs() < 1e-14);
        assert!((x.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((2.0 * p.c * p.theta1.sin() - (1.0 + x.z)).abs() < 1e-12);
        assert!(t_vector(&p, Channel::One, x).unwrap().max_abs() < 1e-12);
        let series = spectrum_scan(&p, Channel::One, -8.0, 8.0, 161).unwrap();
        assert!(series.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn channel_one_needs_detected_light() {
        let p = ModelParams {
            a1sq: 0.0,
            a2sq: 0.9,
            ..Default::default()
        };
        assert!(matches!(
            t_vector(&p, Channel::One, BlochVector::default()),
            Err(Error::ZeroDetectionAmplitude)
        ));
        assert!(t_vector_trace_form(&p, Channel::One, BlochVector::default()).is_err());
        // No detected light means shot noise whatever the other parameters are.
        assert_eq!(spectrum_value(&p, Channel::One, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn trace_and_component_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let p = ModelParams::random(&mut rng);
            let x = loop {
                let v = BlochVector::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if v.norm_sqr() <= 1.0 {
                    break v;
                }
            };
            for ch in [Channel::One, Channel::Two] {
                let a = t_vector(&p, ch, x).unwrap();
                let b = t_vector_trace_form(&p, ch, x).unwrap();
                assert!((a - b).max_abs() < 1e-12, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn shot_noise_cases() {
        let no_light = ModelParams {
            a2sq: 0.0,
            a0sq: 0.55,
            ..line1()
        };
        let dark = ModelParams {
            theta1: 0.8,
            ..Default::default()
        };
        for mu in [-3.0, 0.0, 0.5, 7.0] {
            assert_eq!(spectrum_value(&no_light, Channel::Two, mu).unwrap(), 1.0);
            assert_eq!(spectrum_quadrature_oracle(&no_light, Channel::Two, mu).unwrap(), 1.0);
            assert!((spectrum_value(&dark, Channel::One, mu).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn line1_squeezes_at_zero_and_matches_quadrature() {
        let p = line1();
        let s = spectrum_value(&p, Channel::One, 0.0).unwrap();
        assert!(s < 1.0);
        let q = spectrum_quadrature_oracle(&p, Channel::One, 0.0).unwrap();
        assert!((s - q).abs() < 1e-6, "{s} vs {q}");
        for mu in [0.1, 0.7, 2.5, 8.0] {
            let s = spectrum_value(&p, Channel::One, mu).unwrap();
            let q = spectrum_quadrature_oracle(&p, Channel::One, mu).unwrap();
            assert!((s - q).abs() < 1e-6, "μ={mu}: {s} vs {q}");
        }
    }

    #[test]
    fn thermal_light_is_two_lorentzians_at_detuning() {
        let p = ModelParams {
            n_bar: 1.0,
            delta_omega: 2.0,
            theta1: 0.4,
            ..Default::default()
        };
        let series = spectrum_scan(&p, Channel::One, -8.0, 8.0, 801).unwrap();
        assert!(series.values.iter().all(|&v| v > 1.0));

        // Both Lorentzians have half width γ(½ + n̄); fix the common height
        // from μ = 0 and check the shape everywhere else.
        let width = 1.5;
        let pair =
            |mu: f64| width / (width * width + (mu - 2.0).powi(2)) + width / (width * width + (mu + 2.0).powi(2));
        let height = (series.values[400] - 1.0) / pair(0.0);
        for (&mu, &v) in series.mu.iter().zip(&series.values) {
            assert!((v - 1.0 - height * pair(mu)).abs() < 1e-12, "μ={mu}");
        }

        // The overlapping tails pull the maxima of the sum slightly inward.
        let peaks = series.global_maxima();
        assert_eq!(peaks.len(), 2);
        for peak in peaks {
            assert!(peak.mu.abs() < 2.0 && peak.mu.abs() > 1.9, "{peak:?}");
        }

        for mu in [0.0, 1.5, 2.0] {
            let s = spectrum_value(&p, Channel::One, mu).unwrap();
            let q = spectrum_quadrature_oracle(&p, Channel::One, mu).unwrap();
            assert!((s - q).abs() < 1e-6);
        }
        let spread = (0..8)
            .map(|k| {
                let q = ModelParams {
                    theta1: -PI + k as f64 * PI / 4.0,
                    ..p
                };
                spectrum_value(&q, Channel::One, 1.3).unwrap()
            })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        assert!(spread.1 - spread.0 < 1e-10);
    }

    #[test]
    fn scans_are_symmetric() {
        for p in [line1(), line3()] {
            let s = spectrum_scan(&p, Channel::One, -8.0, 8.0, 801).unwrap();
            assert!(s.asymmetry() < 1e-10);
            assert_eq!(s.mu[400], 0.0);
            assert_eq!(s.mu[0], -s.mu[800]);
        }
    }

    #[test]
    fn resonant_drive_gives_single_minimum_at_zero() {
        let s = spectrum_scan(&line1(), Channel::One, -8.0, 8.0, 801).unwrap();
        let minima = s.global_minima();
        assert_eq!(minima.len(), 1);
        assert_eq!(minima[0].mu, 0.0);
        assert!(minima[0].value < 1.0);
    }

    #[test]
    fn detuned_drive_gives_two_minima() {
        let s = spectrum_scan(&line3(), Channel::One, -8.0, 8.0, 801).unwrap();
        let minima = s.global_minima();
        assert_eq!(minima.len(), 2);
        assert!((minima[0].mu + minima[1].mu).abs() < 1e-9);
        assert!(minima[0].mu.abs() > 0.1);
        assert!(minima[0].value < 1.0);
        assert!(s.is_local_maximum_near(0.0));
    }

    #[test]
    fn parabola_vertex_is_exact_for_quadratics() {
        let f = |x: f64| 3.0 * (x - 0.013).powi(2) + 0.5;
        let h = 0.02;
        let (off, val) = parabolic_vertex(f(-h), f(0.0), f(h), h);
        assert!((off - 0.013).abs() < 1e-14);
        assert!((val - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(spectrum_scan(&line1(), Channel::One, 1.0, -1.0, 10).is_err());
        assert!(spectrum_scan(&line1(), Channel::One, -1.0, 1.0, 1).is_err());
    }

    #[test]
    fn channel_serde_uses_numbers() {
        assert_eq!(serde_json::to_string(&Channel::Two).unwrap(), "2");
        assert_eq!(serde_json::from_str::<Channel>("1").unwrap(), Channel::One);
        assert!(serde_json::from_str::<Channel>("3").is_err());
    }
}
