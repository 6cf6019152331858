//! The free step-2 nilpotent group `G²(ℝ^d)`, enhanced Brownian motion, and
//! the Monte Carlo checks of its fractional Sobolev moments and tails.
//!
//! Elements are pairs `(a, A)` with `a ∈ ℝ^d` and `A` a `d×d` matrix stored
//! row-major. The product is Chen's `(a+b, A+B+a⊗b)`.
//!
//! The Carnot–Carathéodory norm is replaced by the homogeneous norm
//! `max(|a|, √(2‖A‖_F))`, which is equivalent up to dimension constants and
//! exactly homogeneous under dilation.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{MetricSpec, SampledPath, TimeGrid};
use crate::seminorms::{check_besov_params, holder_norm, BesovKernel};
use crate::stats;

pub const SCHEMA_VERSION: u32 = 1;

/// Samples needed before a tail fit is attempted.
pub const MIN_TAIL_SAMPLES: usize = 1000;
/// Empirical tail points with fewer exceedances than this are dropped.
const MIN_TAIL_COUNT: usize = 10;
/// Dimensionless curvature below which a tail counts as Gaussian-like.
pub const CURVATURE_THRESHOLD: f64 = -0.5;

/// `‖x⁻¹⊗y‖` on flat `[a, A]` slices.
#[inline]
pub(crate) fn slice_distance(d: usize, x: &[f64], y: &[f64]) -> f64 {
    // x⁻¹⊗y = (b − a, B − A − a⊗(b − a))
    let (a, am) = x.split_at(d);
    let (b, bm) = y.split_at(d);
    let mut lvl1 = 0.0;
    let mut lvl2 = 0.0;
    for i in 0..d {
        let di = b[i] - a[i];
        lvl1 += di * di;
        for j in 0..d {
            let dj = b[j] - a[j];
            let m = bm[i * d + j] - am[i * d + j] - a[i] * dj;
            lvl2 += m * m;
        }
    }
    lvl1.sqrt().max((2.0 * lvl2.sqrt()).sqrt())
}

/// `max_ij |Sym(A)_ij − a_i a_j / 2|`.
pub(crate) fn geometric_defect(d: usize, x: &[f64]) -> f64 {
    let (a, m) = x.split_at(d);
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let sym = 0.5 * (m[i * d + j] + m[j * d + i]);
            worst = worst.max((sym - 0.5 * a[i] * a[j]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupElement {
    /// Level 1.
    pub a: Vec<f64>,
    /// Level 2, row-major.
    pub m: Vec<f64>,
}

impl GroupElement {
    pub fn new(a: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        let d = a.len();
        if m.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: m.len(),
            });
        }
        Ok(Self { a, m })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            a: vec![0.0; d],
            m: vec![0.0; d * d],
        }
    }

    /// Lift of a straight segment with increment `v`: `(v, v⊗v/2)`.
    pub fn segment(v: &[f64]) -> Self {
        let d = v.len();
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = 0.5 * v[i] * v[j];
            }
        }
        Self { a: v.to_vec(), m }
    }

    pub fn from_flat(d: usize, x: &[f64]) -> Result<Self> {
        if x.len() != d + d * d {
            return Err(Error::DimensionMismatch {
                expected: d + d * d,
                got: x.len(),
            });
        }
        Ok(Self {
            a: x[..d].to_vec(),
            m: x[d..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.a.clone();
        v.extend_from_slice(&self.m);
        v
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// Chen product `self ⊗ other`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let d = self.dim();
        let a = self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect();
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = self.m[i * d + j] + other.m[i * d + j] + self.a[i] * other.a[j];
            }
        }
        Ok(Self { a, m })
    }

    pub fn inverse(&self) -> Self {
        let d = self.dim();
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = -self.m[i * d + j] + self.a[i] * self.a[j];
            }
        }
        Self {
            a: self.a.iter().map(|x| -x).collect(),
            m,
        }
    }

    /// Carnot dilation `(λa, λ²A)`.
    pub fn dilation(&self, lambda: f64) -> Self {
        Self {
            a: self.a.iter().map(|x| lambda * x).collect(),
            m: self.m.iter().map(|x| lambda * lambda * x).collect(),
        }
    }

    pub fn homogeneous_norm(&self) -> f64 {
        let l1 = self.a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let fro = self.m.iter().map(|x| x * x).sum::<f64>().sqrt();
        l1.max((2.0 * fro).sqrt())
    }

    /// `‖self⁻¹ ⊗ other‖`.
    pub fn cc_distance(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(slice_distance(self.dim(), &self.to_flat(), &other.to_flat()))
    }

    /// Largest entry of `Sym(A) − a⊗a/2`.
    pub fn geometric_defect(&self) -> f64 {
        geometric_defect(self.dim(), &self.to_flat())
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.a
            .iter()
            .zip(&other.a)
            .chain(self.m.iter().zip(&other.m))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.a.iter().chain(&self.m).map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Group-valued sampled path starting at the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPath {
    path: SampledPath,
}

impl GroupPath {
    pub fn new(path: SampledPath) -> Result<Self> {
        let MetricSpec::StepTwoGroup(_) = path.metric() else {
            return Err(Error::UnsupportedSpace {
                op: "GroupPath",
                space: path.metric().name(),
            });
        };
        if path.point(0).iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidValue {
                index: 0,
                reason: "group path must start at the identity".into(),
            });
        }
        Ok(Self { path })
    }

    /// Composes the given per-cell elements from the identity.
    pub fn from_increments(grid: TimeGrid, increments: &[GroupElement]) -> Result<Self> {
        if increments.len() != grid.steps() {
            return Err(Error::DimensionMismatch {
                expected: grid.steps(),
                got: increments.len(),
            });
        }
        let d = increments.first().map_or(1, |g| g.dim());
        let mut x = GroupElement::identity(d);
        let mut values = x.to_flat();
        for inc in increments {
            x = x.product(inc)?;
            values.extend(x.to_flat());
        }
        Ok(Self {
            path: SampledPath::from_parts_unchecked(grid, MetricSpec::StepTwoGroup(d), values),
        })
    }

    pub fn dim(&self) -> usize {
        self.path.metric().dim()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.path.grid()
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn element(&self, i: usize) -> GroupElement {
        GroupElement::from_flat(self.dim(), self.path.point(i)).expect("stride matches")
    }

    /// `S_{s,t} = x_s⁻¹ ⊗ x_t` for grid indices.
    pub fn increment_element(&self, i: usize, j: usize) -> GroupElement {
        self.element(i).inverse().product(&self.element(j)).expect("same dimension")
    }

    pub fn as_path(&self) -> &SampledPath {
        &self.path
    }

    pub fn into_path(self) -> SampledPath {
        self.path
    }
}

/// Piecewise-linear lift: each segment contributes `(Δ, Δ⊗Δ/2)`.
pub fn lift_piecewise_linear(path: &SampledPath) -> Result<GroupPath> {
    path.require_euclidean("lift_piecewise_linear")?;
    let incs: Vec<GroupElement> = (0..path.grid().steps())
        .map(|i| {
            let v: Vec<f64> = path.point(i + 1).iter().zip(path.point(i)).map(|(b, a)| b - a).collect();
            GroupElement::segment(&v)
        })
        .collect();
    GroupPath::from_increments(path.grid().clone(), &incs)
}

/// Enhanced Brownian motion for replica `replica` of the stream `seed`.
pub fn enhanced_bm_replica(d: usize, steps: usize, seed: u64, replica: u64) -> Result<GroupPath> {
    if steps < 2 {
        return Err(Error::condition("steps≥2", format!("steps={steps}")));
    }
    if d == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let grid = TimeGrid::uniform(steps)?;
    let mut rng = stats::stream(seed, replica);
    let sd = (1.0 / steps as f64).sqrt();
    let stride = d + d * d;
    let mut values = vec![0.0; (steps + 1) * stride];
    let mut delta = vec![0.0; d];
    for k in 0..steps {
        for v in delta.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = sd * z;
        }
        let (prev, next) = values[k * stride..(k + 2) * stride].split_at_mut(stride);
        for i in 0..d {
            next[i] = prev[i] + delta[i];
            for j in 0..d {
                next[d + i * d + j] = prev[d + i * d + j] + 0.5 * delta[i] * delta[j] + prev[i] * delta[j];
            }
        }
    }
    Ok(GroupPath {
        path: SampledPath::from_parts_unchecked(grid, MetricSpec::StepTwoGroup(d), values),
    })
}

pub fn enhanced_bm(d: usize, steps: usize, seed: u64) -> Result<GroupPath> {
    enhanced_bm_replica(d, steps, seed, 0)
}

/// Largest `d(x,y)/d(y,x)` (or its inverse) over all pairs of elements.
pub fn worst_asymmetry(elements: &[GroupElement]) -> f64 {
    let mut worst = 1.0f64;
    for (i, x) in elements.iter().enumerate() {
        for y in &elements[i + 1..] {
            let (a, b) = (x.cc_distance(y).unwrap(), y.cc_distance(x).unwrap());
            if a > 0.0 && b > 0.0 {
                worst = worst.max(a / b).max(b / a);
            }
        }
    }
    worst
}

/// Exponent of `|t−s|` in the expected Besov integrand of Brownian scale:
/// `θ = p/2 − 1 − δp`.
fn brownian_theta(delta: f64, p: f64) -> f64 {
    p / 2.0 - 1.0 - delta * p
}

/// `∫∫_{[0,1]²} |t−s|^θ ds dt = 2/((θ+1)(θ+2))`.
pub fn double_integral(theta: f64) -> Result<f64> {
    if !(theta > -1.0) {
        return Err(Error::condition("θ>−1", format!("θ={theta}")));
    }
    Ok(2.0 / ((theta + 1.0) * (theta + 2.0)))
}

/// `E‖B‖^p_{W^{δ,p}} / E‖B_{0,1}‖^p` for Brownian scaling.
pub fn brownian_besov_constant(delta: f64, p: f64) -> Result<f64> {
    double_integral(brownian_theta(delta, p))
}

/// Smallest `p` with `brownian_besov_constant(δ, p) ≤ 1`.
///
/// With `x = θ+1 = p(1/2 − δ)` the equation `x(x+1) = 2` has root `x = 1`.
pub fn p0_threshold(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::condition("0<δ<1/2", format!("δ={delta}")));
    }
    let x = (-1.0 + 9f64.sqrt()) / 2.0;
    Ok(x / (0.5 - delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    /// Sample mean of the `p`-th power.
    pub mean_pow_p: f64,
}

impl Moments {
    fn of(x: &[f64], p: f64) -> Self {
        let pw: Vec<f64> = x.iter().map(|v| v.powf(p)).collect();
        Self {
            mean: stats::mean(x),
            std: stats::std_dev(x),
            mean_pow_p: stats::mean(&pw),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConfig {
    pub delta: f64,
    pub p: f64,
    pub replicas: usize,
    pub steps: usize,
    pub seed: u64,
    pub dim: usize,
    pub bootstrap_resamples: usize,
    pub tail_fit: bool,
}

impl TailConfig {
    pub fn new(delta: f64, p: f64, replicas: usize, steps: usize, seed: u64) -> Self {
        Self {
            delta,
            p,
            replicas,
            steps,
            seed,
            dim: 2,
            bootstrap_resamples: 1000,
            tail_fit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub schema_version: u32,
    pub replicas: usize,
    pub steps: usize,
    pub dim: usize,
    pub seed: u64,
    pub delta: f64,
    pub p: f64,
    /// `∫∫|t−s|^{p/2−1−δp}`.
    pub double_integral: f64,
    pub p0: f64,
    /// Moments of `‖B‖_{W^{δ,p};[0,1]}`.
    pub besov_norm: Moments,
    /// Moments of `‖B_{0,1}‖`.
    pub endpoint_norm: Moments,
    pub moment_ratio: f64,
    pub ratio_ci: (f64, f64),
    /// `double_integral` inside the 95% bootstrap interval.
    pub identity_pass: Option<bool>,
    /// Only evaluated when `double_integral ≤ 1`.
    pub inequality_pass: Option<bool>,
    pub scaling_interval: (f64, f64),
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub scaling_pass: Option<bool>,
    pub tail_fit: Option<TailFit>,
}

impl TailReport {
    pub fn passed(&self) -> bool {
        let flags = [
            self.identity_pass,
            self.inequality_pass,
            self.scaling_pass,
            self.tail_fit.as_ref().map(|f| f.gaussian_consistent),
        ];
        flags.iter().all(|f| f.unwrap_or(true))
    }
}

struct ReplicaSample {
    besov_p: f64,
    endpoint: f64,
    scaled: f64,
}

pub fn tail_experiment(cfg: &TailConfig) -> Result<TailReport> {
    if !(cfg.delta > 0.0 && cfg.delta < 0.5) {
        return Err(Error::condition("0<δ<1/2", format!("δ={}", cfg.delta)));
    }
    check_besov_params(cfg.delta, cfg.p)?;
    let theta = brownian_theta(cfg.delta, cfg.p);
    let integral = double_integral(theta)?;
    if cfg.replicas == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if cfg.tail_fit && cfg.replicas < MIN_TAIL_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_TAIL_SAMPLES,
            got: cfg.replicas,
        });
    }
    let grid = TimeGrid::uniform(cfg.steps)?;
    let kernel = BesovKernel::new(&grid, cfg.delta, cfg.p)?;
    let (si, ti) = (cfg.steps / 4, cfg.steps / 2);
    let (s, t) = (grid.time(si), grid.time(ti));
    let scale = (t - s).sqrt();
    let last = cfg.steps;

    let samples: Vec<ReplicaSample> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let b = enhanced_bm_replica(cfg.dim, cfg.steps, cfg.seed, r)?;
            let path = b.as_path();
            Ok(ReplicaSample {
                besov_p: kernel.functional_unchecked(path, 0, last),
                endpoint: path.increment_at(0, last),
                scaled: path.increment_at(si, ti),
            })
        })
        .collect::<Result<_>>()?;

    let besov_p: Vec<f64> = samples.iter().map(|s| s.besov_p).collect();
    let besov: Vec<f64> = besov_p.iter().map(|v| v.powf(1.0 / cfg.p)).collect();
    let endpoint: Vec<f64> = samples.iter().map(|s| s.endpoint).collect();
    let endpoint_p: Vec<f64> = endpoint.iter().map(|v| v.powf(cfg.p)).collect();
    let ratio = besov_p.iter().sum::<f64>() / endpoint_p.iter().sum::<f64>();
    let enough = cfg.replicas >= 2;
    let ci = if enough {
        stats::bootstrap_ratio_ci(&besov_p, &endpoint_p, cfg.bootstrap_resamples, 0.95, cfg.seed)
    } else {
        (ratio, ratio)
    };
    let scaled: Vec<f64> = samples.iter().map(|s| s.scaled).collect();
    let reference: Vec<f64> = endpoint.iter().map(|v| scale * v).collect();
    let ks = stats::ks_statistic(&scaled, &reference);
    let ks_crit = stats::ks_critical_5pct(scaled.len(), reference.len());

    let tail_fit = if cfg.tail_fit { Some(tail_fit(&besov)?) } else { None };
    Ok(TailReport {
        schema_version: SCHEMA_VERSION,
        replicas: cfg.replicas,
        steps: cfg.steps,
        dim: cfg.dim,
        seed: cfg.seed,
        delta: cfg.delta,
        p: cfg.p,
        double_integral: integral,
        p0: p0_threshold(cfg.delta)?,
        besov_norm: Moments::of(&besov, cfg.p),
        endpoint_norm: Moments::of(&endpoint, cfg.p),
        moment_ratio: ratio,
        ratio_ci: ci,
        identity_pass: enough.then_some(ci.0 <= integral && integral <= ci.1),
        inequality_pass: (enough && integral <= 1.0).then_some(ci.0 <= 1.0),
        scaling_interval: (s, t),
        ks_statistic: ks,
        ks_critical: ks_crit,
        scaling_pass: enough.then_some(ks < ks_crit),
        tail_fit,
    })
}

/// α-Hölder norms of independent enhanced Brownian paths.
pub fn ebm_holder_samples(d: usize, steps: usize, alpha: f64, replicas: usize, seed: u64) -> Result<Vec<f64>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let b = enhanced_bm_replica(d, steps, seed, r)?;
            Ok(holder_norm(b.as_path(), alpha, b.as_path().full_interval())?.value)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    /// Slope of `log P(X > λ)` against `λ²` over the top decile.
    pub coefficient: f64,
    /// Quadratic coefficient of `log P(X > λ)` in `λ/λ₀`, `λ₀` the decile.
    pub curvature: f64,
    pub rss_linear: f64,
    pub rss_quadratic: f64,
    pub tail_points: usize,
    pub gaussian_consistent: bool,
}

/// Fits the empirical upper tail. A Gaussian-type tail shows a negative
/// `λ²` slope and a clearly concave log-survival curve; an exponential tail
/// is linear in `λ` and fails the curvature test.
pub fn tail_fit(samples: &[f64]) -> Result<TailFit> {
    let n = samples.len();
    if n < MIN_TAIL_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_TAIL_SAMPLES,
            got: n,
        });
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let k0 = (0.9 * n as f64).floor() as usize;
    let idx: Vec<usize> = (k0..n - MIN_TAIL_COUNT).collect();
    let lam: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| ((n - i) as f64 / n as f64).ln()).collect();
    let lam0 = lam[0];
    if !(lam0 > 0.0) {
        return Err(Error::condition("positive tail threshold", format!("λ₀={lam0}")));
    }
    let ones = vec![1.0; lam.len()];
    let sq: Vec<f64> = lam.iter().map(|l| l * l).collect();
    let c = stats::least_squares(&[ones.clone(), sq], &y)
        .ok_or_else(|| Error::condition("non-degenerate tail", "singular fit"))?;

    // Weighted by √(exceedance count) to even out the noise in log P.
    let w: Vec<f64> = idx.iter().map(|&i| ((n - i) as f64).sqrt()).collect();
    let z: Vec<f64> = lam.iter().map(|l| l / lam0).collect();
    let wcol = |v: &dyn Fn(usize) -> f64| (0..z.len()).map(|k| w[k] * v(k)).collect::<Vec<_>>();
    let c0 = wcol(&|_| 1.0);
    let c1 = wcol(&|k| z[k]);
    let c2 = wcol(&|k| z[k] * z[k]);
    let wy = wcol(&|k| y[k]);
    let lin_cols = [c0.clone(), c1.clone()];
    let quad_cols = [c0, c1, c2];
    let lin = stats::least_squares(&lin_cols, &wy).ok_or_else(|| Error::condition("non-degenerate tail", "singular fit"))?;
    let quad = stats::least_squares(&quad_cols, &wy).ok_or_else(|| Error::condition("non-degenerate tail", "singular fit"))?;
    let curvature = quad[2];
    Ok(TailFit {
        coefficient: c[1],
        curvature,
        rss_linear: stats::residual_ss(&lin_cols, &wy, &lin),
        rss_quadratic: stats::residual_ss(&quad_cols, &wy, &quad),
        tail_points: lam.len(),
        gaussian_consistent: c[1] < 0.0 && curvature < CURVATURE_THRESHOLD,
    })
}
