//! Cameron–Martin paths of fractional Brownian motion with `H < 1/2` as
//! images `h = Kg` of `g ∈ L²[0,1]` under the Volterra operator
//! `K = K₁ + K₂`:
//!
//! ```text
//! K₁(t,s) = (t−s)^{H−1/2}
//! K₂(t,s) = s^{H−1/2} F₁(t/s),   F₁(x) = ∫₀^{x−1} u^{H−3/2} (1 − (1+u)^{H−1/2}) du
//! ```
//!
//! `g` is piecewise constant on uniform cells. `K₁` is integrated exactly
//! cell by cell; `K₂` by Gauss–Legendre with a change of variables on the
//! cell touching `s = 0`, certified by a two-resolution comparison.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{verify_theorem2, VerificationReport};
use crate::error::{Error, Result};
use crate::path::{SampledPath, TimeGrid};
use crate::quadrature::GaussLegendre;
use crate::seminorms::{self, BesovKernel};
use crate::stats;
use crate::variation;

/// Largest allowed relative change of ratios between refinement levels.
pub const STABILITY_TOLERANCE: f64 = 0.05;
/// Cells of the `u`-grid used for the supremum in the `K₁` estimates.
pub const STEP2_SUP_CELLS: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurstParameter(f64);

impl HurstParameter {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 0.5) {
            return Err(Error::condition("0<H<1/2", format!("H={h}")));
        }
        Ok(Self(h))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `H + 1/2`.
    pub fn beta(self) -> f64 {
        self.0 + 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSettings {
    /// Gauss–Legendre nodes per `g` cell for `K₂`; the check uses twice as many.
    pub cell_nodes: usize,
    /// Nodes per `F₁` panel.
    pub f1_nodes: usize,
    /// `F₁` switches from the power substitution to log panels here.
    pub f1_split: f64,
    /// Width of the `F₁` panels in `ln u`.
    pub f1_panel_width: f64,
    /// Relative two-resolution agreement required of the `K₂` weights.
    pub tolerance: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            cell_nodes: 12,
            f1_nodes: 20,
            f1_split: 0.1,
            f1_panel_width: 1.5,
            tolerance: 1e-3,
        }
    }
}

/// The fBM kernel pair with its quadrature rules.
#[derive(Debug, Clone)]
pub struct KernelDecomposition {
    hurst: HurstParameter,
    settings: QuadratureSettings,
    f1_rule: GaussLegendre,
    cell_rule: GaussLegendre,
    check_rule: GaussLegendre,
}

impl KernelDecomposition {
    pub fn new(hurst: HurstParameter, settings: QuadratureSettings) -> Result<Self> {
        let s = settings;
        if s.cell_nodes == 0 || s.f1_nodes == 0 || !(s.f1_split > 0.0) || !(s.f1_panel_width > 0.0) || !(s.tolerance > 0.0) {
            return Err(Error::condition("positive quadrature settings", format!("{s:?}")));
        }
        Ok(Self {
            hurst,
            settings,
            f1_rule: GaussLegendre::new(s.f1_nodes),
            cell_rule: GaussLegendre::new(s.cell_nodes),
            check_rule: GaussLegendre::new(2 * s.cell_nodes),
        })
    }

    pub fn with_hurst(h: f64) -> Result<Self> {
        Self::new(HurstParameter::new(h)?, QuadratureSettings::default())
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    pub fn settings(&self) -> QuadratureSettings {
        self.settings
    }

    pub fn k1(&self, t: f64, s: f64) -> f64 {
        if s >= t {
            0.0
        } else {
            (t - s).powf(self.hurst.0 - 0.5)
        }
    }

    pub fn f1(&self, x: f64) -> Result<f64> {
        if !(x >= 1.0) {
            return Err(Error::condition("x≥1", format!("x={x}")));
        }
        Ok(self.f1_unchecked(x))
    }

    fn f1_unchecked(&self, x: f64) -> f64 {
        let len = x - 1.0;
        if !(len > 0.0) {
            return 0.0;
        }
        let e = self.hurst.0 - 0.5;
        let b = self.hurst.beta();
        // 1 − (1+u)^e, without cancellation for small u.
        let gap = |u: f64| -(e * u.ln_1p()).exp_m1();
        let m = len.min(self.settings.f1_split);
        // u = w^{1/b} turns u^{e−1}·gap(u) du into gap(u)/(b·u) dw.
        let left = self.f1_rule.integrate(0.0, m.powf(b), |w| {
            let u = w.powf(1.0 / b);
            if u == 0.0 {
                -e / b
            } else {
                gap(u) / (b * u)
            }
        });
        if len <= m {
            return left;
        }
        let (lo, hi) = (m.ln(), len.ln());
        let panels = ((hi - lo) / self.settings.f1_panel_width).ceil().max(1.0) as usize;
        let right = self.f1_rule.integrate_composite(lo, hi, panels, |v| {
            let u = v.exp();
            u.powf(e) * gap(u)
        });
        left + right
    }

    /// `s^{H−1/2} F₁(t/s)`; zero for `s ≥ t` and for `s = 0`.
    pub fn k2(&self, t: f64, s: f64) -> f64 {
        if s >= t || s <= 0.0 {
            0.0
        } else {
            s.powf(self.hurst.0 - 0.5) * self.f1_unchecked(t / s)
        }
    }

    /// `∫_lo^hi K₁(t,s) ds` in closed form.
    fn k1_cell(&self, t: f64, lo: f64, hi: f64) -> f64 {
        let hi = hi.min(t);
        if hi <= lo {
            return 0.0;
        }
        let b = self.hurst.beta();
        ((t - lo).powf(b) - (t - hi).powf(b)) / b
    }

    /// `∫_lo^hi K₂(t,s) ds` with the given rule.
    fn k2_cell(&self, rule: &GaussLegendre, t: f64, lo: f64, hi: f64) -> f64 {
        let hi = hi.min(t);
        if hi <= lo {
            return 0.0;
        }
        if lo == 0.0 {
            // s = v^{1/b}: s^{H−1/2} ds = dv / b.
            let b = self.hurst.beta();
            rule.integrate(0.0, hi.powf(b), |v| {
                let s = v.powf(1.0 / b);
                if s <= 0.0 {
                    0.0
                } else {
                    self.f1_unchecked(t / s) / b
                }
            })
        } else {
            rule.integrate(lo, hi, |s| self.k2(t, s))
        }
    }
}

pub fn k1(t: f64, s: f64, h: f64) -> Result<f64> {
    Ok(KernelDecomposition::with_hurst(h)?.k1(t, s))
}

pub fn f1(x: f64, h: f64) -> Result<f64> {
    KernelDecomposition::with_hurst(h)?.f1(x)
}

pub fn k2(t: f64, s: f64, h: f64) -> Result<f64> {
    Ok(KernelDecomposition::with_hurst(h)?.k2(t, s))
}

/// `g ∈ L²[0,1]`, constant on each of `values.len()` uniform cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L2Function {
    values: Vec<f64>,
}

impl L2Function {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue {
                index: i,
                reason: "g must be finite".into(),
            });
        }
        Ok(Self { values })
    }

    pub fn constant(cells: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; cells])
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &L2Function, b: f64) -> Result<Self> {
        if self.cells() != other.cells() {
            return Err(Error::DimensionMismatch {
                expected: self.cells(),
                got: other.cells(),
            });
        }
        Self::new(self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect())
    }
}

/// `count` functions with independent standard normal cell values.
pub fn standard_normal_corpus(cells: usize, count: usize, seed: u64) -> Result<Vec<L2Function>> {
    (0..count as u64)
        .map(|i| {
            let mut rng = stats::stream(seed, i);
            L2Function::new((0..cells).map(|_| StandardNormal.sample(&mut rng)).collect())
        })
        .collect()
}

/// Weight matrices of `K₁` and `K₂` from `g` cells to path grid points:
/// `(K_i g)(t_j) = Σ_c W_i[j][c] g_c`.
#[derive(Debug, Clone)]
pub struct VolterraOperator {
    grid: TimeGrid,
    cells: usize,
    w1: Vec<f64>,
    w2: Vec<f64>,
    discrepancy: f64,
}

impl VolterraOperator {
    pub fn new(kernel: &KernelDecomposition, grid: &TimeGrid, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let n = grid.len();
        let width = 1.0 / cells as f64;
        let bounds = |c: usize| (c as f64 * width, if c + 1 == cells { 1.0 } else { (c + 1) as f64 * width });
        let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = grid
            .points()
            .par_iter()
            .map(|&t| {
                let mut r1 = vec![0.0; cells];
                let mut r2 = vec![0.0; cells];
                let (mut diff, mut norm) = (0.0, 0.0);
                for c in 0..cells {
                    let (lo, hi) = bounds(c);
                    if lo >= t {
                        break;
                    }
                    r1[c] = kernel.k1_cell(t, lo, hi);
                    let coarse = kernel.k2_cell(&kernel.cell_rule, t, lo, hi);
                    r2[c] = kernel.k2_cell(&kernel.check_rule, t, lo, hi);
                    diff += (coarse - r2[c]).powi(2);
                    norm += (r1[c] + r2[c]).powi(2);
                }
                let rel = if norm > 0.0 { (diff / norm).sqrt() } else { 0.0 };
                (r1, r2, rel)
            })
            .collect();
        let mut w1 = Vec::with_capacity(n * cells);
        let mut w2 = Vec::with_capacity(n * cells);
        let mut discrepancy = 0.0f64;
        for (r1, r2, rel) in rows {
            w1.extend(r1);
            w2.extend(r2);
            discrepancy = discrepancy.max(rel);
        }
        if !(discrepancy <= kernel.settings.tolerance) {
            return Err(Error::Quadrature(format!(
                "K₂ weights changed by {discrepancy:e} between {} and {} nodes per cell",
                kernel.settings.cell_nodes,
                2 * kernel.settings.cell_nodes
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            cells,
            w1,
            w2,
            discrepancy,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Worst relative row change of the weights between the two rules. It
    /// bounds `|Δh(t_j)| / (|W_j|₂ |g|₂)` for every `g`.
    pub fn discrepancy(&self) -> f64 {
        self.discrepancy
    }

    fn apply_weights(&self, g: &L2Function, parts: (bool, bool)) -> Result<SampledPath> {
        if g.cells() != self.cells {
            return Err(Error::GridMismatch(format!(
                "g has {} cells, operator expects {}",
                g.cells(),
                self.cells
            )));
        }
        let m = self.cells;
        let values = (0..self.grid.len())
            .map(|j| {
                let mut h = 0.0;
                for (c, gc) in g.values().iter().enumerate() {
                    let w = if parts.0 { self.w1[j * m + c] } else { 0.0 } + if parts.1 { self.w2[j * m + c] } else { 0.0 };
                    h += w * gc;
                }
                h
            })
            .collect();
        SampledPath::scalar(self.grid.clone(), values)
    }

    /// `Kg` on the grid.
    pub fn apply(&self, g: &L2Function) -> Result<SampledPath> {
        self.apply_weights(g, (true, true))
    }

    pub fn apply_k1(&self, g: &L2Function) -> Result<SampledPath> {
        self.apply_weights(g, (true, false))
    }

    pub fn apply_k2(&self, g: &L2Function) -> Result<SampledPath> {
        self.apply_weights(g, (false, true))
    }
}

pub fn cm_path_from_l2(g: &L2Function, h: f64, grid: &TimeGrid) -> Result<SampledPath> {
    let kernel = KernelDecomposition::with_hurst(h)?;
    VolterraOperator::new(&kernel, grid, g.cells())?.apply(g)
}

/// The two `K₁` increment quantities at lag `t`:
/// `sup_u ∫₀^{1−t} |K₁(s+t,u)−K₁(s,u)| ds` and
/// `sup_s ∫₀¹ |K₁(s+t,u)−K₁(s,u)| du`.
///
/// Inner integrals are exact antiderivatives of `(·)^{H−1/2}`; the outer
/// suprema run over a uniform grid of [`STEP2_SUP_CELLS`] cells.
pub fn k1_increment_estimates(h: f64, t: f64) -> Result<(f64, f64)> {
    let hp = HurstParameter::new(h)?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::condition("0<t<1", format!("t={t}")));
    }
    let b = hp.beta();
    let a = |x: f64| x.max(0.0).powf(b) / b;
    let n = STEP2_SUP_CELLS;
    let in_s = |u: f64| {
        // s ∈ (u−t, u]: only K₁(s+t,u) is nonzero.
        let (lo, hi) = ((u - t).max(0.0), u.min(1.0 - t));
        let near = if hi > lo { a(hi + t - u) - a(lo + t - u) } else { 0.0 };
        // s > u: K₁(s,u) > K₁(s+t,u).
        let far = if u < 1.0 - t { a(1.0 - t - u) - a(1.0 - u) + a(t) } else { 0.0 };
        near + far
    };
    let in_u = |s: f64| a(s) - a(s + t) + 2.0 * a(t);
    let q1 = (0..=n).map(|k| in_s(k as f64 / n as f64)).fold(0.0, f64::max);
    let q2 = (0..=n)
        .map(|k| (1.0 - t) * k as f64 / n as f64)
        .map(in_u)
        .fold(0.0, f64::max);
    Ok((q1, q2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step2Fit {
    pub hurst: f64,
    pub lags: Vec<f64>,
    pub sup_over_u: Vec<f64>,
    pub sup_over_s: Vec<f64>,
    pub slope_u: f64,
    pub slope_s: f64,
}

/// Log-log slopes of both quantities over `t = 2^{−k}`.
pub fn step2_slope_fit(h: f64, ks: std::ops::RangeInclusive<i32>) -> Result<Step2Fit> {
    let lags: Vec<f64> = ks.map(|k| 2f64.powi(-k)).collect();
    let (mut qu, mut qs) = (Vec::new(), Vec::new());
    for &t in &lags {
        let (a, b) = k1_increment_estimates(h, t)?;
        qu.push(a);
        qs.push(b);
    }
    let lx: Vec<f64> = lags.iter().map(|t| t.ln()).collect();
    let ln = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
    Ok(Step2Fit {
        hurst: h,
        slope_u: stats::slope(&lx, &ln(&qu)),
        slope_s: stats::slope(&lx, &ln(&qs)),
        lags,
        sup_over_u: qu,
        sup_over_s: qs,
    })
}

fn corpus_cells(corpus: &[L2Function]) -> Result<usize> {
    let cells = corpus.first().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?.cells();
    if let Some(g) = corpus.iter().find(|g| g.cells() != cells) {
        return Err(Error::DimensionMismatch {
            expected: cells,
            got: g.cells(),
        });
    }
    Ok(cells)
}

/// Ratios `norm(Kg)/|g|_{L²}` on `grid` refined `0..=levels` times. Zero
/// `g` are dropped. Returns per-level ratio vectors and the excluded count.
fn ratio_ladder(
    corpus: &[L2Function],
    kernel: &KernelDecomposition,
    grid: &TimeGrid,
    levels: u32,
    norm: &(dyn Fn(&VolterraOperator, &L2Function) -> Result<f64> + Sync),
) -> Result<(Vec<Vec<f64>>, usize)> {
    let cells = corpus_cells(corpus)?;
    let kept: Vec<&L2Function> = corpus.iter().filter(|g| g.l2_norm() > 0.0).collect();
    let excluded = corpus.len() - kept.len();
    let mut ladder = Vec::new();
    for level in 0..=levels {
        let op = VolterraOperator::new(kernel, &grid.refine(level), cells)?;
        let ratios = kept
            .par_iter()
            .map(|g| Ok(norm(&op, g)? / g.l2_norm()))
            .collect::<Result<Vec<f64>>>()?;
        ladder.push(ratios);
    }
    Ok((ladder, excluded))
}

fn stability_report(theorem: &str, params: &[(&str, f64)], ladder: &[Vec<f64>], excluded: usize) -> VerificationReport {
    let mut rep = VerificationReport::new(theorem, params, STABILITY_TOLERANCE);
    let finest = ladder.last().map(Vec::as_slice).unwrap_or(&[]);
    let finite = ladder.iter().flatten().all(|r| r.is_finite());
    let mut growth = 0.0f64;
    for (level, pair) in ladder.windows(2).enumerate() {
        let g = pair[0]
            .iter()
            .zip(&pair[1])
            .map(|(a, b)| (b / a - 1.0).abs())
            .fold(0.0, f64::max);
        rep.parameters.insert(format!("growth_level_{}", level + 1), g);
        growth = growth.max(g);
    }
    rep.parameters.insert("excluded".into(), excluded as f64);
    rep.parameters.insert("levels".into(), ladder.len().saturating_sub(1) as f64);
    rep.inequalities_checked = ladder.iter().map(|l| l.len() as u64).sum();
    rep.max_violation = if finite { growth } else { f64::MAX };
    rep.empirical_constant = finest.iter().copied().fold(0.0, f64::max);
    rep.notes.push("max_violation is the largest relative ratio change between adjacent refinement levels".into());
    rep.finish()
}

/// `|Kg|_{W^{δ,2}} / |g|_{L²}` over the corpus, with refinement stability.
pub fn besov_bound_check(
    corpus: &[L2Function],
    h: f64,
    delta: f64,
    grid: &TimeGrid,
    levels: u32,
) -> Result<VerificationReport> {
    let hp = HurstParameter::new(h)?;
    if !(delta > 0.5 && delta < hp.beta()) {
        return Err(Error::condition("1/2<δ<H+1/2", format!("δ={delta}, H={h}")));
    }
    let kernel = KernelDecomposition::new(hp, QuadratureSettings::default())?;
    let norm = |op: &VolterraOperator, g: &L2Function| {
        let path = op.apply(g)?;
        let k = BesovKernel::new(op.grid(), delta, 2.0)?;
        Ok(k.functional(&path, path.full_interval())?.sqrt())
    };
    let (ladder, excluded) = ratio_ladder(corpus, &kernel, grid, levels, &norm)?;
    Ok(stability_report("besov_bound", &[("H", h), ("delta", delta), ("p", 2.0)], &ladder, excluded))
}

/// `|K₂g|_{W^{1,p}} / |g|_{L²}` over the corpus, with refinement stability.
pub fn h2_w1p_check(corpus: &[L2Function], h: f64, p: f64, grid: &TimeGrid, levels: u32) -> Result<VerificationReport> {
    let hp = HurstParameter::new(h)?;
    let limit = 1.0 / (1.0 - h);
    if !(p > 1.0 && p < limit) {
        return Err(Error::condition("1<p<1/(1−H)", format!("p={p}, 1/(1−H)={limit}")));
    }
    let kernel = KernelDecomposition::new(hp, QuadratureSettings::default())?;
    let norm = |op: &VolterraOperator, g: &L2Function| {
        let path = op.apply_k2(g)?;
        Ok(seminorms::w1p_norm(&path, p, path.full_interval())?.value)
    };
    let (ladder, excluded) = ratio_ladder(corpus, &kernel, grid, levels, &norm)?;
    Ok(stability_report("h2_w1p", &[("H", h), ("p", p)], &ladder, excluded))
}

/// α-Hölder and q-variation norms of `Kg` relative to `|g|_{L²}`, plus the
/// variation embedding with `δ = 1/q`, `p = 2` on every path when `q < 2`.
pub fn corollary_check(corpus: &[L2Function], h: f64, q: f64, alpha: f64, grid: &TimeGrid) -> Result<VerificationReport> {
    let hp = HurstParameter::new(h)?;
    if !(alpha > 0.0 && alpha < h) {
        return Err(Error::condition("0<α<H", format!("α={alpha}, H={h}")));
    }
    if !(q > 1.0 / hp.beta()) || !q.is_finite() {
        return Err(Error::condition("q>1/(H+1/2)", format!("q={q}, H={h}")));
    }
    let cells = corpus_cells(corpus)?;
    let kernel = KernelDecomposition::new(hp, QuadratureSettings::default())?;
    let op = VolterraOperator::new(&kernel, grid, cells)?;
    let delta = 1.0 / q;
    let with_theorem2 = q < 2.0 && delta < hp.beta();
    let mut rep = VerificationReport::new(
        "corollary",
        &[("H", h), ("q", q), ("alpha", alpha)],
        crate::embedding::DEFAULT_TOLERANCE,
    );
    let results: Vec<(f64, f64, Option<VerificationReport>)> = corpus
        .par_iter()
        .filter(|g| g.l2_norm() > 0.0)
        .map(|g| {
            let path = op.apply(g)?;
            let iv = path.full_interval();
            let holder = seminorms::holder_norm(&path, alpha, iv)?.value / g.l2_norm();
            let qvar = variation::q_variation_dp(&path, q, iv)?.value / g.l2_norm();
            let thm2 = if with_theorem2 { Some(verify_theorem2(&path, delta, 2.0)?) } else { None };
            Ok((holder, qvar, thm2))
        })
        .collect::<Result<_>>()?;
    let mut holder_max = 0.0f64;
    let mut qvar_max = 0.0f64;
    let mut finite = true;
    for (hr, qr, thm2) in &results {
        finite &= hr.is_finite() && qr.is_finite();
        holder_max = holder_max.max(*hr);
        qvar_max = qvar_max.max(*qr);
        if let Some(r) = thm2 {
            rep.merge(r);
        }
    }
    rep.parameters.insert("holder_ratio_max".into(), holder_max);
    rep.parameters.insert("qvar_ratio_max".into(), qvar_max);
    rep.parameters.insert("excluded".into(), (corpus.len() - results.len()) as f64);
    if with_theorem2 {
        rep.notes.push(format!("variation embedding checked with δ={delta}, p=2"));
    } else {
        rep.notes.push("variation embedding not applicable for this q".into());
        rep.inequalities_checked = results.len() as u64;
    }
    if !finite {
        rep.max_violation = f64::MAX;
    }
    rep.empirical_constant = holder_max.max(qvar_max);
    Ok(rep.finish())
}
