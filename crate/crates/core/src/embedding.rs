//! Control functions, superadditivity, and the variation embedding checks.
//!
//! All verifiers return a [`VerificationReport`]. A violation is measured
//! relative to the right-hand side, `(lhs − rhs) / max(rhs, 1e−15)`, and the
//! reported maximum is floored at zero.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{SampledPath, TimeGrid};
use crate::seminorms::{self, check_besov_params, BesovKernel, Power};
use crate::stats;
use crate::variation::{self, q_variation_sweep};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
const VIOLATION_FLOOR: f64 = 1e-15;
/// Grids with more points than this get sampled triples.
pub const EXHAUSTIVE_TRIPLE_LIMIT: usize = 300;
pub const SAMPLED_TRIPLES: usize = 100_000;
const TRIPLE_SEED: u64 = 0x7269_706c;
/// Relative growth of the largest ratio after one dyadic refinement above
/// which an embedding is flagged as possibly unbounded.
pub const REFINEMENT_GROWTH_THRESHOLD: f64 = 0.1;

#[inline]
fn violation(lhs: f64, rhs: f64) -> f64 {
    ((lhs - rhs) / rhs.max(VIOLATION_FLOOR)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlKind {
    W1pControl { p: f64 },
    BesovControl { delta: f64, p: f64 },
    /// Supplied from outside, e.g. a CSV of `(s, t, ω)` rows.
    External,
}

/// `ω(s,t)` on all grid pairs `s ≤ t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTable {
    grid: TimeGrid,
    kind: ControlKind,
    omega: Vec<f64>,
}

impl ControlTable {
    /// Tabulates `f(a, b)` over index pairs `a < b`; the diagonal is zero.
    pub fn from_fn(grid: TimeGrid, kind: ControlKind, f: impl Fn(usize, usize) -> f64) -> Self {
        let n = grid.len();
        let mut omega = vec![0.0; n * n];
        for a in 0..n {
            for b in a + 1..n {
                omega[a * n + b] = f(a, b);
            }
        }
        Self { grid, kind, omega }
    }

    /// From `(s, t, ω)` triples; every grid pair `s < t` must be present.
    pub fn from_triples(grid: TimeGrid, rows: &[(f64, f64, f64)]) -> Result<Self> {
        let n = grid.len();
        let mut omega = vec![f64::NAN; n * n];
        for i in 0..n {
            omega[i * n + i] = 0.0;
        }
        for (k, &(s, t, w)) in rows.iter().enumerate() {
            let (a, b) = (grid.index_of(s)?, grid.index_of(t)?);
            if a > b {
                return Err(Error::InvalidInterval { s, t });
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidValue {
                    index: k,
                    reason: format!("ω={w} must be finite and nonnegative"),
                });
            }
            omega[a * n + b] = w;
        }
        for a in 0..n {
            for b in a..n {
                if omega[a * n + b].is_nan() {
                    return Err(Error::InvalidValue {
                        index: a * n + b,
                        reason: format!("missing ω({}, {})", grid.time(a), grid.time(b)),
                    });
                }
            }
        }
        Ok(Self {
            grid,
            kind: ControlKind::External,
            omega,
        })
    }

    /// `ω` by grid index, symmetric in its arguments.
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.omega[a * self.grid.len() + b]
    }

    pub fn at(&self, s: f64, t: f64) -> Result<f64> {
        Ok(self.get(self.grid.index_of(s)?, self.grid.index_of(t)?))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kind(&self) -> ControlKind {
        self.kind
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub theorem: String,
    pub parameters: BTreeMap<String, f64>,
    pub inequalities_checked: u64,
    pub max_violation: f64,
    pub empirical_constant: f64,
    pub pass: bool,
    pub tolerance: f64,
    /// Set when only a random subset of the inequalities was checked.
    pub sampled: bool,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub(crate) fn new(theorem: &str, parameters: &[(&str, f64)], tolerance: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            theorem: theorem.into(),
            parameters: parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            inequalities_checked: 0,
            max_violation: 0.0,
            empirical_constant: 0.0,
            pass: true,
            tolerance,
            sampled: false,
            notes: Vec::new(),
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        self.pass = self.max_violation <= self.tolerance;
        self
    }

    /// Max-merges another report over the same inequality family.
    pub fn merge(&mut self, other: &VerificationReport) {
        self.inequalities_checked += other.inequalities_checked;
        self.max_violation = self.max_violation.max(other.max_violation);
        self.empirical_constant = self.empirical_constant.max(other.empirical_constant);
        self.sampled |= other.sampled;
        self.pass = self.max_violation <= self.tolerance;
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::condition("p>1", format!("p={p}")));
    }
    Ok(())
}

/// `α = δ − 1/p`, which must be positive.
fn besov_alpha(delta: f64, p: f64) -> Result<f64> {
    check_besov_params(delta, p)?;
    let alpha = delta - 1.0 / p;
    if !(alpha > 0.0) {
        return Err(Error::condition("α=δ−1/p>0", format!("δ={delta}, p={p}, α={alpha}")));
    }
    Ok(alpha)
}

/// `Σ |Δ_i|^p w_i^{1−p}` over cells `[a, b)`, for every `b > a`.
fn w1p_rows(path: &SampledPath, p: f64) -> Vec<Vec<f64>> {
    let g = path.grid();
    let pw = Power::new(p);
    let cell: Vec<f64> = (0..g.steps())
        .map(|i| {
            let w = g.cell_width(i);
            pw.apply(path.increment_at(i, i + 1) / w) * w
        })
        .collect();
    (0..g.len())
        .map(|a| {
            let mut acc = 0.0;
            let mut row = vec![0.0];
            for c in &cell[a..] {
                acc += c;
                row.push(acc);
            }
            row
        })
        .collect()
}

/// `ω(s,t) = |h|_{W^{1,p};[s,t]} (t−s)^{1−1/p}`.
pub fn control_w1p(path: &SampledPath, p: f64) -> Result<ControlTable> {
    path.require_euclidean("control_w1p")?;
    check_p(p)?;
    let rows = w1p_rows(path, p);
    let t = path.grid().points();
    let alpha = 1.0 - 1.0 / p;
    Ok(ControlTable::from_fn(path.grid().clone(), ControlKind::W1pControl { p }, |a, b| {
        rows[a][b - a].powf(1.0 / p) * (t[b] - t[a]).powf(alpha)
    }))
}

/// `ω(s,t) = F_{s,t}^{q/p} (t−s)^{αq}` with `q = 1/δ`, `α = δ − 1/p`.
pub fn control_besov(path: &SampledPath, delta: f64, p: f64) -> Result<ControlTable> {
    let alpha = besov_alpha(delta, p)?;
    let q = 1.0 / delta;
    let table = BesovKernel::new(path.grid(), delta, p)?.table(path)?;
    let t = path.grid().points();
    Ok(ControlTable::from_fn(
        path.grid().clone(),
        ControlKind::BesovControl { delta, p },
        |a, b| table.get(a, b).powf(q / p) * (t[b] - t[a]).powf(alpha * q),
    ))
}

fn kind_parameters(kind: ControlKind) -> Vec<(&'static str, f64)> {
    match kind {
        ControlKind::W1pControl { p } => vec![("p", p)],
        ControlKind::BesovControl { delta, p } => vec![("delta", delta), ("p", p)],
        ControlKind::External => vec![],
    }
}

/// `ω(s,t) + ω(t,u) ≤ ω(s,u)` on grid triples `s < t < u`.
pub fn check_superadditivity(ct: &ControlTable) -> VerificationReport {
    let mut rep = VerificationReport::new("superadditivity", &kind_parameters(ct.kind), DEFAULT_TOLERANCE);
    let n = ct.grid.len();
    let triple = |s: usize, t: usize, u: usize| {
        let lhs = ct.get(s, t) + ct.get(t, u);
        let rhs = ct.get(s, u);
        (violation(lhs, rhs), lhs / rhs.max(VIOLATION_FLOOR))
    };
    let fold = |a: (f64, f64), b: (f64, f64)| (a.0.max(b.0), a.1.max(b.1));
    let (worst, ratio) = if n <= EXHAUSTIVE_TRIPLE_LIMIT {
        rep.inequalities_checked = (n as u64) * (n as u64 - 1) * (n as u64).saturating_sub(2) / 6;
        (0..n)
            .into_par_iter()
            .map(|s| {
                let mut acc = (0.0f64, 0.0f64);
                for t in s + 1..n {
                    for u in t + 1..n {
                        acc = fold(acc, triple(s, t, u));
                    }
                }
                acc
            })
            .reduce(|| (0.0, 0.0), fold)
    } else {
        rep.sampled = true;
        rep.inequalities_checked = SAMPLED_TRIPLES as u64;
        rep.notes.push(format!("{SAMPLED_TRIPLES} random triples, seed {TRIPLE_SEED}"));
        let mut rng = stats::stream(TRIPLE_SEED, 0);
        let mut acc = (0.0f64, 0.0f64);
        for _ in 0..SAMPLED_TRIPLES {
            let mut v = [rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)];
            v.sort_unstable();
            if v[0] < v[1] && v[1] < v[2] {
                acc = fold(acc, triple(v[0], v[1], v[2]));
            }
        }
        acc
    };
    rep.max_violation = worst;
    rep.empirical_constant = ratio;
    rep.finish()
}

/// `C(δ,p) = 8·4^{1/p}(δ+1/p)/(δ−1/p)`.
pub fn grr_constant(delta: f64, p: f64) -> Result<f64> {
    besov_alpha(delta, p)?;
    Ok(8.0 * 4f64.powf(1.0 / p) * (delta + 1.0 / p) / (delta - 1.0 / p))
}

/// `C(δ,p) |h|_{W^{δ,p};[s,t]} (t−s)^{δ−1/p}`.
pub fn grr_increment_bound(path: &SampledPath, delta: f64, p: f64, s: f64, t: f64) -> Result<f64> {
    let c = grr_constant(delta, p)?;
    let iv = path.interval(s, t)?;
    let norm = seminorms::besov_seminorm(path, delta, p, iv)?.value;
    Ok(c * norm * iv.length().powf(delta - 1.0 / p))
}

/// Increment bound, one-variation bound, and the resulting Hölder bound
/// for a `W^{1,p}` path, over all grid pairs.
pub fn verify_theorem1(path: &SampledPath, p: f64) -> Result<VerificationReport> {
    path.require_euclidean("verify_theorem1")?;
    check_p(p)?;
    let alpha = 1.0 - 1.0 / p;
    let mut rep = VerificationReport::new("theorem1", &[("p", p), ("alpha", alpha)], DEFAULT_TOLERANCE);
    let rows = w1p_rows(path, p);
    let t = path.grid().points();
    let n = path.len();
    let mut worst = 0.0f64;
    let mut ratio = 0.0f64;
    let mut worst_var = 0.0f64;
    for a in 0..n {
        let mut one_var = 0.0;
        for b in a + 1..n {
            one_var += path.increment_at(b - 1, b);
            let omega = rows[a][b - a].powf(1.0 / p) * (t[b] - t[a]).powf(alpha);
            let inc = path.increment_at(a, b);
            worst = worst.max(violation(inc, omega));
            worst_var = worst_var.max(violation(one_var, omega));
            if omega > 0.0 {
                ratio = ratio.max(inc / omega);
            }
        }
    }
    let full = rows[0][n - 1].powf(1.0 / p);
    let holder = seminorms::holder_norm(path, alpha, path.full_interval())?.value;
    let worst_holder = violation(holder, full);
    rep.inequalities_checked = (n * (n - 1)) as u64 + 1;
    rep.max_violation = worst.max(worst_var).max(worst_holder);
    rep.empirical_constant = ratio;
    rep.notes.push(format!(
        "increment {worst:e}, one-variation {worst_var:e}, hölder {worst_holder:e}"
    ));
    Ok(rep.finish())
}

/// q-variation (`q = 1/δ`) and Hölder bounds with the explicit GRR constant,
/// over all grid pairs. The empirical constant is the largest
/// `q-var / ((b−a)^α |h|_{W^{δ,p}})`.
pub fn verify_theorem2(path: &SampledPath, delta: f64, p: f64) -> Result<VerificationReport> {
    let alpha = besov_alpha(delta, p)?;
    let c = grr_constant(delta, p)?;
    let q = 1.0 / delta;
    let mut rep = VerificationReport::new(
        "theorem2",
        &[("delta", delta), ("p", p), ("alpha", alpha), ("q", q), ("C", c)],
        DEFAULT_TOLERANCE,
    );
    let table = BesovKernel::new(path.grid(), delta, p)?.table(path)?;
    let t = path.grid().points();
    let n = path.len();
    let pw = Power::new(q);
    let per_start: Vec<(f64, f64, f64)> = (0..n - 1)
        .into_par_iter()
        .map(|a| {
            let mut sweep = Vec::new();
            q_variation_sweep(path, pw, a, &mut sweep);
            let mut acc = (0.0f64, 0.0f64, 0.0f64);
            for b in a + 1..n {
                let scale = (t[b] - t[a]).powf(alpha) * table.seminorm(a, b);
                let qvar = sweep[b - a].powf(1.0 / q);
                let inc = path.increment_at(a, b);
                acc.0 = acc.0.max(violation(qvar, c * scale));
                acc.1 = acc.1.max(violation(inc, c * scale));
                if scale > 0.0 {
                    acc.2 = acc.2.max(qvar / scale);
                }
            }
            acc
        })
        .collect();
    let (vq, vh, emp) = per_start
        .iter()
        .fold((0.0f64, 0.0f64, 0.0f64), |x, y| (x.0.max(y.0), x.1.max(y.1), x.2.max(y.2)));
    rep.inequalities_checked = (n * (n - 1)) as u64;
    rep.max_violation = vq.max(vh);
    rep.empirical_constant = emp;
    rep.notes.push(format!("q-variation {vq:e}, hölder {vh:e}"));
    Ok(rep.finish())
}

/// Norms usable as source or target of an embedding experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    Besov { delta: f64, p: f64 },
    W1p { p: f64 },
    Holder { alpha: f64 },
    QVar { q: f64 },
    Sup,
}

impl NormSpec {
    pub fn evaluate(&self, path: &SampledPath) -> Result<f64> {
        let iv = path.full_interval();
        Ok(match *self {
            NormSpec::Besov { delta, p } => seminorms::besov_seminorm(path, delta, p, iv)?.value,
            NormSpec::W1p { p } => seminorms::w1p_norm(path, p, iv)?.value,
            NormSpec::Holder { alpha } => seminorms::holder_norm(path, alpha, iv)?.value,
            NormSpec::QVar { q } => variation::q_variation_dp(path, q, iv)?.value,
            NormSpec::Sup => seminorms::sup_norm(path, iv)?.value,
        })
    }

    fn label(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

struct RatioStats {
    max_ratio: f64,
    max_violation: f64,
    excluded: usize,
}

fn ratio_stats(paths: &[SampledPath], source: NormSpec, target: NormSpec) -> Result<RatioStats> {
    let mut st = RatioStats {
        max_ratio: 0.0,
        max_violation: 0.0,
        excluded: 0,
    };
    for path in paths {
        let s = source.evaluate(path)?;
        let t = target.evaluate(path)?;
        if !s.is_finite() {
            return Err(Error::condition("finite source norm", format!("{s}")));
        }
        if s == 0.0 {
            if t == 0.0 {
                st.excluded += 1;
            } else {
                st.max_violation = st.max_violation.max(violation(t, 0.0));
            }
            continue;
        }
        st.max_ratio = st.max_ratio.max(t / s);
    }
    Ok(st)
}

/// Largest `target / source` over a corpus. Paths with both norms zero are
/// excluded and counted. For Euclidean corpora the experiment is repeated on
/// one dyadic refinement and growth above [`REFINEMENT_GROWTH_THRESHOLD`]
/// fails the report as a sign of an unbounded embedding.
pub fn embedding_ratio_experiment(
    paths: &[SampledPath],
    source: NormSpec,
    target: NormSpec,
) -> Result<VerificationReport> {
    if paths.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut rep = VerificationReport::new("embedding_ratio", &[], DEFAULT_TOLERANCE);
    rep.notes.push(format!("source {}", source.label()));
    rep.notes.push(format!("target {}", target.label()));
    let base = ratio_stats(paths, source, target)?;
    rep.inequalities_checked = (paths.len() - base.excluded) as u64;
    rep.max_violation = base.max_violation;
    rep.empirical_constant = base.max_ratio;
    rep.parameters.insert("excluded".into(), base.excluded as f64);
    let mut unbounded = false;
    if paths.iter().all(|p| p.metric().is_euclidean()) {
        let refined: Vec<SampledPath> = paths.iter().map(|p| p.dyadic_refine(1)).collect::<Result<_>>()?;
        let fine = ratio_stats(&refined, source, target)?;
        let growth = if base.max_ratio > 0.0 {
            fine.max_ratio / base.max_ratio - 1.0
        } else {
            0.0
        };
        rep.parameters.insert("refinement_growth".into(), growth);
        unbounded = growth > REFINEMENT_GROWTH_THRESHOLD;
        if unbounded {
            rep.notes.push(format!("ratio grew by {growth:.3} under refinement; embedding may be unbounded"));
        }
    } else {
        rep.notes.push("refinement check skipped for group-valued paths".into());
    }
    let rep = rep.finish();
    Ok(VerificationReport {
        pass: rep.pass && !unbounded,
        ..rep
    })
}
