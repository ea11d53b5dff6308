//! Searching the control parameters for the deepest squeezing.
//!
//! The objective is the minimum of `S_k(μ)` over the default μ grid (refined
//! by a parabola through the best three points) or `S_k` at one fixed μ.
//! Parameters that make the drift matrix unstable score `+∞`.
//! [`optimize`] runs Nelder–Mead from Latin-hypercube starts and
//! [`grid_scan`] is the exhaustive version for small problems.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::spectrum::{default_grid, parabolic_vertex, Channel, SpectralEvaluator};

/// A parameter the optimizer may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlParam {
    OmegaRabi,
    DeltaOmega,
    Theta1,
    Theta2,
    C,
    Phi,
}

impl ControlParam {
    pub const ALL: [ControlParam; 6] = [
        ControlParam::OmegaRabi,
        ControlParam::DeltaOmega,
        ControlParam::Theta1,
        ControlParam::Theta2,
        ControlParam::C,
        ControlParam::Phi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControlParam::OmegaRabi => "omega_rabi",
            ControlParam::DeltaOmega => "delta_omega",
            ControlParam::Theta1 => "theta1",
            ControlParam::Theta2 => "theta2",
            ControlParam::C => "c",
            ControlParam::Phi => "phi",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn is_angle(self) -> bool {
        matches!(self, ControlParam::Theta1 | ControlParam::Theta2 | ControlParam::Phi)
    }

    pub fn get(self, p: &ModelParams) -> f64 {
        match self {
            ControlParam::OmegaRabi => p.omega_rabi,
            ControlParam::DeltaOmega => p.delta_omega,
            ControlParam::Theta1 => p.theta1,
            ControlParam::Theta2 => p.theta2,
            ControlParam::C => p.c,
            ControlParam::Phi => p.phi,
        }
    }

    pub fn set(self, p: &mut ModelParams, v: f64) {
        let slot = match self {
            ControlParam::OmegaRabi => &mut p.omega_rabi,
            ControlParam::DeltaOmega => &mut p.delta_omega,
            ControlParam::Theta1 => &mut p.theta1,
            ControlParam::Theta2 => &mut p.theta2,
            ControlParam::C => &mut p.c,
            ControlParam::Phi => &mut p.phi,
        };
        *slot = v;
    }

    /// Search box used when a spec gives none, in units of γ.
    pub fn default_bounds(self, gamma: f64) -> (f64, f64) {
        match self {
            ControlParam::OmegaRabi => (0.0, 4.0 * gamma),
            ControlParam::DeltaOmega => (-4.0 * gamma, 4.0 * gamma),
            ControlParam::C => (0.0, 1.0),
            _ => (-PI, PI),
        }
    }
}

/// Wraps an angle into `[−π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeParam {
    pub param: ControlParam,
    pub lower: f64,
    pub upper: f64,
}

impl FreeParam {
    pub fn new(param: ControlParam, lower: f64, upper: f64) -> Self {
        FreeParam { param, lower, upper }
    }

    pub fn with_default_bounds(param: ControlParam, gamma: f64) -> Self {
        let (lower, upper) = param.default_bounds(gamma);
        FreeParam { param, lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Maps any real number into the admissible set: angles wrap, other
    /// parameters reflect off the box walls.
    pub fn admit(&self, v: f64) -> f64 {
        if self.param.is_angle() {
            return wrap_angle(v);
        }
        let w = self.width();
        if w <= 0.0 {
            return self.lower;
        }
        let period = 2.0 * w;
        let u = (v - self.lower).rem_euclid(period);
        self.lower + if u > w { period - u } else { u }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Objective {
    /// `min_μ S_k(μ)` over the default grid with parabolic refinement.
    MinOverMu,
    /// `S_k(μ₀)`.
    AtMu { mu: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub free: Vec<FreeParam>,
    pub channel: Channel,
    pub objective: Objective,
}

impl ControlSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, f) in self.free.iter().enumerate() {
            if self.free[..i].iter().any(|g| g.param == f.param) {
                return Err(Error::Config(format!("{} is listed twice", f.param.name())));
            }
            if !(f.lower <= f.upper) || !f.lower.is_finite() || !f.upper.is_finite() {
                return Err(Error::Config(format!(
                    "{}: bad bounds [{}, {}]",
                    f.param.name(),
                    f.lower,
                    f.upper
                )));
            }
            let nonneg = matches!(f.param, ControlParam::OmegaRabi | ControlParam::C);
            if nonneg && f.lower < 0.0 {
                return Err(Error::Config(format!("{} must stay non-negative", f.param.name())));
            }
            if f.param.is_angle() && (f.lower < -PI - 1e-12 || f.upper > PI + 1e-12) {
                return Err(Error::Config(format!("{} bounds must lie in [-π, π]", f.param.name())));
            }
        }
        if let Objective::AtMu { mu } = self.objective {
            if !mu.is_finite() {
                return Err(Error::Config("objective mu must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// `base` with the free parameters replaced by `v`.
    pub fn apply(&self, base: &ModelParams, v: &[f64]) -> ModelParams {
        let mut p = *base;
        for (f, &x) in self.free.iter().zip(v) {
            f.param.set(&mut p, x);
        }
        p
    }

    /// Current values of the free parameters in `p`.
    pub fn extract(&self, p: &ModelParams) -> Vec<f64> {
        self.free.iter().map(|f| f.param.get(p)).collect()
    }
}

/// Objective value and where in μ it was attained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub mu_star: f64,
}

impl Evaluation {
    const EXCLUDED: Evaluation = Evaluation {
        value: f64::INFINITY,
        mu_star: f64::NAN,
    };
}

/// Objective at a full parameter set.
pub fn evaluate(p: &ModelParams, channel: Channel, objective: Objective) -> Evaluation {
    let Ok(ev) = SpectralEvaluator::new(p, channel) else {
        return Evaluation::EXCLUDED;
    };
    let at = |mu: f64| ev.value(mu).ok().filter(|v| v.is_finite());
    match objective {
        Objective::AtMu { mu } => match at(mu) {
            Some(value) => Evaluation { value, mu_star: mu },
            None => Evaluation::EXCLUDED,
        },
        Objective::MinOverMu => {
            // S is even in μ, so only the non-negative half of the grid is needed.
            let (_, hi, points) = default_grid(p);
            let half = points / 2;
            let h = hi / half as f64;
            let mut values = Vec::with_capacity(half + 1);
            for i in 0..=half {
                match at(i as f64 * h) {
                    Some(v) => values.push(v),
                    None => return Evaluation::EXCLUDED,
                }
            }
            let best = values
                .iter()
                .enumerate()
                .fold(0, |b, (i, v)| if *v < values[b] { i } else { b });
            let grid_point = Evaluation {
                value: values[best],
                mu_star: best as f64 * h,
            };
            if best == half {
                return grid_point;
            }
            let left = if best == 0 { values[1] } else { values[best - 1] };
            let (offset, _) = parabolic_vertex(left, values[best], values[best + 1], h);
            let mu = (best as f64 * h + offset).abs();
            match at(mu) {
                Some(v) if v < grid_point.value => Evaluation { value: v, mu_star: mu },
                _ => grid_point,
            }
        }
    }
}

/// Objective at free-parameter vector `v`; `+∞` where the dynamics are unstable.
pub fn objective(p: &ModelParams, spec: &ControlSpec, v: &[f64]) -> f64 {
    evaluate(&spec.apply(p, v), spec.channel, spec.objective).value
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    pub starts: usize,
    pub seed: u64,
    /// Stop when the simplex values agree to this.
    pub fatol: f64,
    /// and the vertices agree to this fraction of each box width.
    pub xrtol: f64,
    pub max_evals_per_start: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            starts: 16,
            seed: 0,
            fatol: 1e-8,
            xrtol: 1e-8,
            max_evals_per_start: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub free: Vec<ControlParam>,
    pub values: Vec<f64>,
    pub params: ModelParams,
    pub objective: f64,
    pub mu_star: f64,
    pub evaluations: usize,
    /// Whether the winning start met its tolerances before the budget ran out.
    pub converged: bool,
    pub start_index: usize,
}

struct Run {
    x: Vec<f64>,
    f: f64,
    evals: usize,
    converged: bool,
}

fn nelder_mead(spec: &ControlSpec, f: &dyn Fn(&[f64]) -> f64, x0: Vec<f64>, opts: &OptimizeOptions) -> Run {
    let n = x0.len();
    let admit = |x: Vec<f64>| -> Vec<f64> { x.iter().zip(&spec.free).map(|(v, b)| b.admit(*v)).collect() };
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        f(x)
    };

    let mut simplex = vec![x0.clone()];
    for i in 0..n {
        let mut x = x0.clone();
        let step = 0.1 * spec.free[i].width().max(1e-3);
        // Step inward so the first vertices stay inside the box.
        x[i] += if x[i] + step > spec.free[i].upper { -step } else { step };
        simplex.push(admit(x));
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let centroid = |s: &[Vec<f64>]| -> Vec<f64> {
        (0..n)
            .map(|j| s[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64)
            .collect()
    };
    let along = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> { c.iter().zip(w).map(|(a, b)| a + t * (b - a)).collect() };

    let mut converged = false;
    while evals.get() < opts.max_evals_per_start {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let fspread = values.iter().map(|v| (v - values[0]).abs()).fold(0.0, f64::max);
        let xspread = simplex[1..].iter().all(|x| {
            x.iter()
                .zip(&simplex[0])
                .zip(&spec.free)
                .all(|((a, b), fp)| (a - b).abs() <= opts.xrtol * fp.width().max(1.0))
        });
        if (fspread <= opts.fatol || values[0].is_infinite() && values.iter().all(|v| v.is_infinite())) && xspread {
            converged = values[0].is_finite();
            break;
        }
        // Entirely in the excluded region: nothing to descend.
        if n == 0 || values.iter().all(|v| v.is_infinite()) {
            break;
        }

        let c = centroid(&simplex);
        let worst = simplex[n].clone();
        let xr = admit(along(&c, &worst, -1.0));
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = admit(along(&c, &worst, -2.0));
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let x = admit(along(&c, &worst, -0.5));
            let fx = eval(&x);
            (x, fx)
        } else {
            let x = admit(along(&c, &worst, 0.5));
            let fx = eval(&x);
            (x, fx)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = admit(along(&best, &simplex[i], 0.5));
            values[i] = eval(&simplex[i]);
        }
    }
    let b = (0..=n).fold(0, |b, i| if values[i] < values[b] { i } else { b });
    Run {
        x: simplex[b].clone(),
        f: values[b],
        evals: evals.get(),
        converged,
    }
}

/// `count` Latin-hypercube points in the box of `spec`.
pub fn latin_hypercube(spec: &ControlSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; spec.dim()]; count];
    for (j, fp) in spec.free.iter().enumerate() {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        for (pt, s) in points.iter_mut().zip(strata) {
            let u: f64 = rng.random();
            pt[j] = fp.lower + (s as f64 + u) / count as f64 * fp.width();
        }
    }
    points
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Multi-start Nelder–Mead. Starts run in parallel; the result does not
/// depend on the thread count.
pub fn optimize(p: &ModelParams, spec: &ControlSpec, opts: &OptimizeOptions) -> Result<OptimizationResult> {
    spec.validate()?;
    if opts.starts == 0 {
        return Err(Error::Config("at least one start is needed".into()));
    }
    let f = |v: &[f64]| objective(p, spec, v);
    let starts = latin_hypercube(spec, opts.starts, opts.seed);
    let runs: Vec<Run> = starts
        .into_par_iter()
        .map(|x0| nelder_mead(spec, &f, x0, opts))
        .collect();
    let evaluations = runs.iter().map(|r| r.evals).sum();
    let (start_index, best) = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.f.is_finite())
        .min_by(|(_, a), (_, b)| a.f.total_cmp(&b.f).then_with(|| lexicographic(&a.x, &b.x)))
        .ok_or_else(|| Error::Optimization(format!("all {} starts are in the unstable region", opts.starts)))?;
    let params = spec.apply(p, &best.x);
    let eval = evaluate(&params, spec.channel, spec.objective);
    Ok(OptimizationResult {
        free: spec.free.iter().map(|f| f.param).collect(),
        values: best.x.clone(),
        params,
        objective: eval.value,
        mu_star: eval.mu_star,
        evaluations,
        converged: best.converged,
        start_index,
    })
}

pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScan {
    pub free: Vec<ControlParam>,
    pub axes: Vec<Vec<f64>>,
    /// Row-major: the last axis varies fastest.
    pub values: Vec<f64>,
}

impl GridScan {
    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = axis[rem % axis.len()];
            rem /= axis.len();
        }
        out
    }

    /// Smallest value and its coordinates; ties go to the earlier cell.
    pub fn minimum(&self) -> Option<(Vec<f64>, f64)> {
        let i = (0..self.values.len()).fold(None, |b: Option<usize>, i| match b {
            Some(b) if self.values[b] <= self.values[i] => Some(b),
            _ if self.values[i].is_nan() => b,
            _ => Some(i),
        })?;
        Some((self.point(i), self.values[i]))
    }
}

/// Evaluates the objective on a tensor grid with `resolution[k]` points
/// spanning the bounds of free parameter `k`, ends included.
pub fn grid_scan(p: &ModelParams, spec: &ControlSpec, resolution: &[usize]) -> Result<GridScan> {
    spec.validate()?;
    if resolution.len() != spec.dim() {
        return Err(Error::Config(format!(
            "{} resolutions given for {} free parameters",
            resolution.len(),
            spec.dim()
        )));
    }
    let mut total: usize = 1;
    for &r in resolution {
        if r == 0 {
            return Err(Error::Config("every axis needs at least one point".into()));
        }
        total = total
            .checked_mul(r)
            .filter(|&t| t <= MAX_GRID_POINTS)
            .ok_or_else(|| Error::Config(format!("grid exceeds {MAX_GRID_POINTS} points")))?;
    }
    let axes: Vec<Vec<f64>> = spec
        .free
        .iter()
        .zip(resolution)
        .map(|(f, &r)| {
            if r == 1 {
                vec![f.lower]
            } else {
                (0..r)
                    .map(|i| f.lower + f.width() * i as f64 / (r - 1) as f64)
                    .collect()
            }
        })
        .collect();
    let mut scan = GridScan {
        free: spec.free.iter().map(|f| f.param).collect(),
        axes,
        values: Vec::new(),
    };
    scan.values = (0..total)
        .into_par_iter()
        .map(|i| objective(p, spec, &scan.point(i)))
        .collect();
    Ok(scan)
}
