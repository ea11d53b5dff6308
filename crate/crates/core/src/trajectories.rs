//! Quantum trajectories: the stochastic master equation for the state
//! conditioned on both homodyne records, its simulated photocurrents, and
//! Monte Carlo estimates of the spectrum built from them.
//!
//! The state is integrated in Bloch coordinates, where the trace is fixed at
//! one and Hermiticity holds by construction. Currents are only ever handled
//! through their increments `ΔY_k = √γ|α_k| Tr[σ_{ϑ_k} ρ_t] dt + ΔW_k`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{BlochVector, DensityMatrix, Operator2};
use crate::dynamics::{bloch_affine, equilibrium, liouvillian, BlochAffine, ModelParams};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::rng::StreamFactory;
use crate::spectrum::{s_vector, Channel, SpectrumSeries};

/// Where each trajectory starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InitialRepr", into = "InitialRepr")]
pub enum InitialState {
    /// The stationary state of the a priori dynamics.
    Equilibrium,
    Bloch(BlochVector),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum InitialRepr {
    Name(String),
    Vector([f64; 3]),
}

impl TryFrom<InitialRepr> for InitialState {
    type Error = String;
    fn try_from(r: InitialRepr) -> std::result::Result<Self, String> {
        match r {
            InitialRepr::Name(s) if s == "equilibrium" => Ok(InitialState::Equilibrium),
            InitialRepr::Name(s) => Err(format!(
                "initial state must be \"equilibrium\" or [x, y, z], got \"{s}\""
            )),
            InitialRepr::Vector(v) => Ok(InitialState::Bloch(BlochVector::from_array(v))),
        }
    }
}

impl From<InitialState> for InitialRepr {
    fn from(s: InitialState) -> Self {
        match s {
            InitialState::Equilibrium => InitialRepr::Name("equilibrium".into()),
            InitialState::Bloch(v) => InitialRepr::Vector(v.to_array()),
        }
    }
}

impl InitialState {
    pub fn resolve(&self, p: &ModelParams) -> Result<BlochVector> {
        let v = match self {
            InitialState::Equilibrium => equilibrium(p)?,
            InitialState::Bloch(v) => *v,
        };
        if !v.is_finite() || !v.in_ball() {
            return Err(Error::InvalidState(format!(
                "initial Bloch vector {v} is outside the ball"
            )));
        }
        Ok(v)
    }
}

/// Integration settings shared by every trajectory of an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub n_traj: usize,
    pub initial: InitialState,
}

impl SmeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 100.0 * self.dt) || !self.t_final.is_finite() {
            return Err(Error::Config(format!(
                "t_final must be at least 100·dt = {}, got {}",
                100.0 * self.dt,
                self.t_final
            )));
        }
        if self.n_traj == 0 {
            return Err(Error::Config("n_traj must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Duration actually integrated, `steps · dt`.
    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.dt
    }
}

/// `D[a]ρ = aρ + ρa† − ρ Tr[(a + a†)ρ]`.
pub fn measurement_superop(a: &Operator2, rho: &Operator2) -> Operator2 {
    let ad = a.adjoint();
    let kick = ((*a + ad) * *rho).trace();
    *a * *rho + *rho * ad - *rho * kick
}

/// Drift `Lρ` and the two diffusion terms `√γ D[α₁σ₋ − icσ_φ]ρ`,
/// `√γ D[α₂σ₋]ρ` of the stochastic master equation.
pub fn sme_drift_diffusion(p: &ModelParams, rho: &DensityMatrix) -> (Operator2, Operator2, Operator2) {
    let r = rho.operator();
    let sg = p.gamma.sqrt();
    (
        liouvillian(p, r),
        measurement_superop(&p.feedback_jump(), r) * sg,
        measurement_superop(&p.second_jump(), r) * sg,
    )
}

/// Bloch form of `√γ D[a]ρ`: `g + G x − x (h₀ + h·x)`.
#[derive(Clone, Copy)]
struct BlochDiffusion {
    g: Vec3,
    gm: Mat3,
    h0: f64,
    h: Vec3,
}

impl BlochDiffusion {
    fn new(a: &Operator2, scale: f64) -> Self {
        let ad = a.adjoint();
        let herm = *a + ad;
        let pauli = Operator2::pauli();
        let half = |op: Operator2| Vec3(op.bloch_image().to_array()).scale(0.5 * scale);
        BlochDiffusion {
            g: half(herm),
            gm: Mat3::from_columns(pauli.map(|s| half(*a * s + s * ad))),
            h0: 0.5 * scale * herm.trace().re,
            h: Vec3(pauli.map(|s| 0.5 * scale * (herm * s).trace().re)),
        }
    }

    #[inline]
    fn eval(&self, x: &Vec3) -> Vec3 {
        let kick = self.h0 + self.h.dot(x);
        self.g + self.gm * *x - x.scale(kick)
    }
}

/// The stochastic master equation in Bloch coordinates, precomputed for one
/// parameter set.
#[derive(Clone, Debug)]
pub struct BlochSme {
    affine: BlochAffine,
    diffusion: [BlochDiffusion; 2],
    /// `√γ|α_k|` per channel.
    signal_gain: [f64; 2],
    /// `s_k = (cos ϑ_k, sin ϑ_k, 0)`.
    quadrature: [Vec3; 2],
}

impl std::fmt::Debug for BlochDiffusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlochDiffusion")
            .field("g", &self.g)
            .finish_non_exhaustive()
    }
}

impl BlochSme {
    pub fn new(p: &ModelParams) -> Self {
        let sg = p.gamma.sqrt();
        BlochSme {
            affine: bloch_affine(p),
            diffusion: [
                BlochDiffusion::new(&p.feedback_jump(), sg),
                BlochDiffusion::new(&p.second_jump(), sg),
            ],
            signal_gain: [sg * p.alpha1_abs(), sg * p.alpha2_abs()],
            quadrature: [s_vector(p.theta1), s_vector(p.theta2)],
        }
    }

    /// Drift velocity `−A x + b`.
    pub fn drift(&self, x: &Vec3) -> Vec3 {
        self.affine.drift(x)
    }

    /// Diffusion velocity of channel `k` (0 or 1).
    pub fn diffusion(&self, k: usize, x: &Vec3) -> Vec3 {
        self.diffusion[k].eval(x)
    }

    /// Signal part `√γ|α_k| Tr[σ_{ϑ_k} ρ]` of the current of channel `k`.
    pub fn signal(&self, k: usize, x: &Vec3) -> f64 {
        self.signal_gain[k] * self.quadrature[k].dot(x)
    }
}

/// Counts of radial projections back onto the Bloch ball.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BallRepairs {
    pub steps: usize,
    pub projections: usize,
    /// Largest `|x| − 1` seen before projecting.
    pub max_violation: f64,
}

impl BallRepairs {
    pub fn merge(self, other: BallRepairs) -> BallRepairs {
        BallRepairs {
            steps: self.steps + other.steps,
            projections: self.projections + other.projections,
            max_violation: self.max_violation.max(other.max_violation),
        }
    }

    pub fn fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.projections as f64 / self.steps as f64
        }
    }
}

/// Integrates one trajectory with Euler–Maruyama, calling
/// `observe(step, x_before, dY₁, dY₂)` once per step. `x_before` is the state
/// at the start of the step and the increments are those over the step.
/// After `observe` the new state is checked and, if it left the ball,
/// projected radially onto the sphere.
pub fn integrate<F>(
    sme: &BlochSme,
    x0: BlochVector,
    dt: f64,
    steps: usize,
    factory: &StreamFactory,
    traj_index: u64,
    mut observe: F,
) -> Result<(BlochVector, BallRepairs)>
where
    F: FnMut(usize, &Vec3, f64, f64),
{
    let mut noise = factory.stream(traj_index);
    let sqrt_dt = dt.sqrt();
    let mut x = Vec3(x0.to_array());
    let mut repairs = BallRepairs {
        steps,
        ..Default::default()
    };
    for n in 0..steps {
        let dw1 = noise.wiener(sqrt_dt);
        let dw2 = noise.wiener(sqrt_dt);
        let dy1 = sme.signal(0, &x) * dt + dw1;
        let dy2 = sme.signal(1, &x) * dt + dw2;
        observe(n, &x, dy1, dy2);

        let next = x + sme.drift(&x).scale(dt) + sme.diffusion(0, &x).scale(dw1) + sme.diffusion(1, &x).scale(dw2);
        if !next.is_finite() {
            return Err(Error::NonFinite {
                step: n,
                time: n as f64 * dt,
            });
        }
        let r = next.norm();
        x = if r > 1.0 {
            repairs.projections += 1;
            repairs.max_violation = repairs.max_violation.max(r - 1.0);
            next.scale(1.0 / r)
        } else {
            next
        };
    }
    Ok((BlochVector::from_array(x.0), repairs))
}

/// A simulated trajectory with its measurement record.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub params: ModelParams,
    pub seed: u64,
    pub traj_index: u64,
    pub dt: f64,
    /// `steps + 1` time points `n·dt`.
    pub times: Vec<f64>,
    /// A posteriori state at each time point.
    pub states: Vec<BlochVector>,
    /// `ΔY₁` over `[t_n, t_{n+1}]`.
    pub dy1: Vec<f64>,
    pub dy2: Vec<f64>,
    pub repairs: BallRepairs,
}

impl TrajectoryRecord {
    pub fn steps(&self) -> usize {
        self.dy1.len()
    }

    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn increments(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::One => &self.dy1,
            Channel::Two => &self.dy2,
        }
    }

    /// `ΔY_k` minus the recorded signal term, i.e. the Wiener increments.
    pub fn noise_increments(&self, channel: Channel) -> Vec<f64> {
        let sme = BlochSme::new(&self.params);
        let k = channel.number() as usize - 1;
        self.increments(channel)
            .iter()
            .zip(&self.states)
            .map(|(dy, x)| dy - sme.signal(k, &Vec3(x.to_array())) * self.dt)
            .collect()
    }
}

/// Simulates trajectory number `traj_index` of the ensemble described by
/// `cfg`. The result depends only on `(params, cfg, traj_index)`.
pub fn simulate_trajectory(p: &ModelParams, cfg: &SmeConfig, traj_index: u64) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let x0 = cfg.initial.resolve(p)?;
    let steps = cfg.steps();
    let sme = BlochSme::new(p);
    let mut states = Vec::with_capacity(steps + 1);
    let mut dy1 = Vec::with_capacity(steps);
    let mut dy2 = Vec::with_capacity(steps);
    let (last, repairs) = integrate(
        &sme,
        x0,
        cfg.dt,
        steps,
        &StreamFactory::new(cfg.seed),
        traj_index,
        |_, x, a, b| {
            states.push(BlochVector::from_array(x.0));
            dy1.push(a);
            dy2.push(b);
        },
    )?;
    states.push(last);
    Ok(TrajectoryRecord {
        params: *p,
        seed: cfg.seed,
        traj_index,
        dt: cfg.dt,
        times: (0..=steps).map(|n| n as f64 * cfg.dt).collect(),
        states,
        dy1,
        dy2,
        repairs,
    })
}

/// Running Fourier sums `F(μ) = Σ_n e^{iμ t_n} ΔY_n` of one current.
///
/// Only `|μ|` values are tracked: for a real current `F(−μ) = conj F(μ)`.
#[derive(Clone, Debug)]
pub struct FourierAccumulator {
    dt: f64,
    freqs: Vec<f64>,
    /// For each requested μ: index into `freqs` and whether it was negative.
    lookup: Vec<(usize, bool)>,
    rotor: Vec<Complex64>,
    phase: Vec<Complex64>,
    sums: Vec<Complex64>,
    step: usize,
}

// Phases are recomputed exactly this often to stop rounding drift.
const RESYNC: usize = 1024;

impl FourierAccumulator {
    pub fn new(mu: &[f64], dt: f64) -> Self {
        let mut freqs: Vec<f64> = Vec::new();
        let lookup = mu
            .iter()
            .map(|&m| {
                let a = m.abs();
                let idx = match freqs.iter().position(|&f| f == a) {
                    Some(i) => i,
                    None => {
                        freqs.push(a);
                        freqs.len() - 1
                    }
                };
                (idx, m < 0.0)
            })
            .collect();
        let n = freqs.len();
        FourierAccumulator {
            dt,
            rotor: freqs.iter().map(|&f| Complex64::from_polar(1.0, f * dt)).collect(),
            phase: vec![Complex64::new(1.0, 0.0); n],
            sums: vec![Complex64::new(0.0, 0.0); n],
            freqs,
            lookup,
            step: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, dy: f64) {
        if self.step.is_multiple_of(RESYNC) && self.step > 0 {
            let t = self.step as f64 * self.dt;
            for (ph, &f) in self.phase.iter_mut().zip(&self.freqs) {
                *ph = Complex64::from_polar(1.0, f * t);
            }
        }
        for ((s, ph), r) in self.sums.iter_mut().zip(self.phase.iter_mut()).zip(&self.rotor) {
            *s += *ph * dy;
            *ph *= *r;
        }
        self.step += 1;
    }

    /// Sums in the order of the μ values passed to [`FourierAccumulator::new`].
    pub fn finish(&self) -> Vec<Complex64> {
        self.lookup
            .iter()
            .map(|&(i, neg)| if neg { self.sums[i].conj() } else { self.sums[i] })
            .collect()
    }
}

/// `(1/T)` times the sample variance `Σ|F_j − F̄|² / (N − 1)` of the Fourier
/// sums over trajectories, with jackknife standard errors. `sums[j][i]` is
/// trajectory `j` at grid point `i`. With two trajectories the jackknife is
/// undefined and the errors are NaN.
pub fn spectrum_from_sums(sums: &[Vec<Complex64>], duration: f64, channel: Channel, mu: &[f64]) -> SpectrumSeries {
    let n = sums.len();
    let nf = n as f64;
    let mut values = Vec::with_capacity(mu.len());
    let mut errors = Vec::with_capacity(mu.len());
    for i in 0..mu.len() {
        let total: Complex64 = sums.iter().map(|f| f[i]).sum();
        let total_sq: f64 = sums.iter().map(|f| f[i].norm_sqr()).sum();
        let variance = |s1: Complex64, s2: f64, m: f64| (s2 - s1.norm_sqr() / m) / (m - 1.0);
        values.push(variance(total, total_sq, nf) / duration);
        if n < 3 {
            errors.push(f64::NAN);
            continue;
        }
        let leave_out: Vec<f64> = sums
            .iter()
            .map(|f| variance(total - f[i], total_sq - f[i].norm_sqr(), nf - 1.0) / duration)
            .collect();
        let mean = leave_out.iter().sum::<f64>() / nf;
        let spread: f64 = leave_out.iter().map(|v| (v - mean).powi(2)).sum();
        errors.push(((nf - 1.0) / nf * spread).sqrt());
    }
    SpectrumSeries {
        channel,
        mu: mu.to_vec(),
        values,
        stderr: Some(errors),
    }
}

/// Monte Carlo spectrum estimate from stored records. All records must share
/// parameters, step, length and seed family, and start at the stationary state.
pub fn estimate_spectrum(records: &[TrajectoryRecord], channel: Channel, mu: &[f64]) -> Result<SpectrumSeries> {
    let Some(first) = records.first() else {
        return Err(Error::RecordMismatch("no records".into()));
    };
    if records.len() < 2 {
        return Err(Error::RecordMismatch("at least two records are needed".into()));
    }
    for r in records {
        if r.params != first.params {
            return Err(Error::RecordMismatch(format!(
                "trajectory {} has different parameters",
                r.traj_index
            )));
        }
        if r.dt != first.dt || r.steps() != first.steps() {
            return Err(Error::RecordMismatch(format!(
                "trajectory {} has a different time grid",
                r.traj_index
            )));
        }
    }
    let eq = equilibrium(&first.params)?;
    for r in records {
        let x0 = r.states[0];
        let gap = (x0.x - eq.x).abs().max((x0.y - eq.y).abs()).max((x0.z - eq.z).abs());
        if gap > 1e-9 {
            return Err(Error::RecordMismatch(format!(
                "trajectory {} does not start at the stationary state",
                r.traj_index
            )));
        }
    }
    let sums: Vec<Vec<Complex64>> = records
        .par_iter()
        .map(|r| {
            let mut acc = FourierAccumulator::new(mu, r.dt);
            r.increments(channel).iter().for_each(|&dy| acc.push(dy));
            acc.finish()
        })
        .collect();
    Ok(spectrum_from_sums(&sums, first.duration(), channel, mu))
}

/// Result of a streamed ensemble run.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpectrum {
    pub series: SpectrumSeries,
    pub repairs: BallRepairs,
}

/// Same estimator as [`estimate_spectrum`], but trajectories are reduced to
/// their Fourier sums as they are integrated, so nothing of size `steps` is
/// kept. `cfg.initial` must be the stationary state.
pub fn estimate_spectrum_streaming(
    p: &ModelParams,
    cfg: &SmeConfig,
    channel: Channel,
    mu: &[f64],
) -> Result<EnsembleSpectrum> {
    cfg.validate()?;
    if cfg.initial != InitialState::Equilibrium {
        return Err(Error::Config(
            "spectrum estimation starts every trajectory at equilibrium".into(),
        ));
    }
    if cfg.n_traj < 2 {
        return Err(Error::Config("at least two trajectories are needed".into()));
    }
    let x0 = cfg.initial.resolve(p)?;
    let sme = BlochSme::new(p);
    let factory = StreamFactory::new(cfg.seed);
    let steps = cfg.steps();
    let pick = channel.number() as usize - 1;
    let per_traj: Vec<(Vec<Complex64>, BallRepairs)> = (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|j| {
            let mut acc = FourierAccumulator::new(mu, cfg.dt);
            let (_, repairs) = integrate(&sme, x0, cfg.dt, steps, &factory, j, |_, _, a, b| {
                acc.push(if pick == 0 { a } else { b })
            })?;
            Ok((acc.finish(), repairs))
        })
        .collect::<Result<_>>()?;
    let repairs = per_traj
        .iter()
        .fold(BallRepairs::default(), |acc, (_, r)| acc.merge(*r));
    let sums: Vec<Vec<Complex64>> = per_traj.into_iter().map(|(s, _)| s).collect();
    Ok(EnsembleSpectrum {
        series: spectrum_from_sums(&sums, cfg.duration(), channel, mu),
        repairs,
    })
}

/// Ensemble mean of the a posteriori state at checkpoint times, with standard
/// errors of the mean.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMean {
    pub times: Vec<f64>,
    pub mean: Vec<BlochVector>,
    pub stderr: Vec<BlochVector>,
    pub repairs: BallRepairs,
}

/// Runs `cfg.n_traj` trajectories up to the last checkpoint and averages the
/// state at each checkpoint (rounded to the step grid).
pub fn ensemble_mean(p: &ModelParams, cfg: &SmeConfig, checkpoints: &[f64]) -> Result<EnsembleMean> {
    cfg.validate()?;
    let x0 = cfg.initial.resolve(p)?;
    let sme = BlochSme::new(p);
    let factory = StreamFactory::new(cfg.seed);
    let marks: Vec<usize> = checkpoints.iter().map(|t| (t / cfg.dt).round() as usize).collect();
    let steps = marks.iter().copied().max().unwrap_or(0);
    let per_traj: Vec<(Vec<Vec3>, BallRepairs)> = (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|j| {
            let mut seen = vec![Vec3::zero(); marks.len()];
            let (last, repairs) = integrate(&sme, x0, cfg.dt, steps, &factory, j, |n, x, _, _| {
                for (slot, &m) in seen.iter_mut().zip(&marks) {
                    if m == n {
                        *slot = *x;
                    }
                }
            })?;
            for (slot, &m) in seen.iter_mut().zip(&marks) {
                if m == steps {
                    *slot = Vec3(last.to_array());
                }
            }
            Ok((seen, repairs))
        })
        .collect::<Result<_>>()?;

    let nf = per_traj.len() as f64;
    let mut mean = Vec::with_capacity(marks.len());
    let mut stderr = Vec::with_capacity(marks.len());
    for i in 0..marks.len() {
        let m = per_traj
            .iter()
            .fold(Vec3::zero(), |acc, (s, _)| acc + s[i])
            .scale(1.0 / nf);
        let var = per_traj.iter().fold(Vec3::zero(), |acc, (s, _)| {
            let d = s[i] - m;
            acc + Vec3::new(d[0] * d[0], d[1] * d[1], d[2] * d[2])
        });
        let denom = (nf - 1.0).max(1.0) * nf;
        mean.push(BlochVector::from_array(m.0));
        stderr.push(BlochVector::new(
            (var[0] / denom).sqrt(),
            (var[1] / denom).sqrt(),
            (var[2] / denom).sqrt(),
        ));
    }
    let repairs = per_traj
        .iter()
        .fold(BallRepairs::default(), |acc, (_, r)| acc.merge(*r));
    Ok(EnsembleMean {
        times: marks.iter().map(|&m| m as f64 * cfg.dt).collect(),
        mean,
        stderr,
        repairs,
    })
}

/// Time average of the state over the second half of each trajectory,
/// averaged over the ensemble, with the standard error across trajectories.
pub fn late_time_average(p: &ModelParams, cfg: &SmeConfig) -> Result<(BlochVector, BlochVector)> {
    cfg.validate()?;
    let x0 = cfg.initial.resolve(p)?;
    let sme = BlochSme::new(p);
    let factory = StreamFactory::new(cfg.seed);
    let steps = cfg.steps();
    let half = steps / 2;
    let averages: Vec<Vec3> = (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|j| {
            let mut acc = Vec3::zero();
            integrate(&sme, x0, cfg.dt, steps, &factory, j, |n, x, _, _| {
                if n >= half {
                    acc = acc + *x;
                }
            })?;
            Ok(acc.scale(1.0 / (steps - half) as f64))
        })
        .collect::<Result<_>>()?;
    let nf = averages.len() as f64;
    let mean = averages.iter().fold(Vec3::zero(), |a, v| a + *v).scale(1.0 / nf);
    let var = averages.iter().fold(Vec3::zero(), |a, v| {
        let d = *v - mean;
        a + Vec3::new(d[0] * d[0], d[1] * d[1], d[2] * d[2])
    });
    let denom = (nf - 1.0).max(1.0) * nf;
    Ok((
        BlochVector::from_array(mean.0),
        BlochVector::new(
            (var[0] / denom).sqrt(),
            (var[1] / denom).sqrt(),
            (var[2] / denom).sqrt(),
        ),
    ))
}

/// Bloch image of an operator-level SME velocity, for checking [`BlochSme`]
/// against [`sme_drift_diffusion`].
pub fn bloch_velocity(op: &Operator2) -> Vec3 {
    Vec3(op.bloch_image().to_array())
}
