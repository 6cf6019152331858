//! Fractional Sobolev, `W^{1,p}`, Hölder and sup norms of sampled paths.
//!
//! The fractional seminorm `|h|_{W^{δ,p};[s,t]}` is discretised cell by
//! cell. For cells `i ≠ j` inside `[s,t]` the integrand is evaluated at the
//! cell-left grid points and weighted by the product of cell widths:
//!
//! ```text
//! F_{s,t} = 2 Σ_{i<j} d(h_i,h_j)^p w_i w_j / (t_j − t_i)^{1+δp}
//!         + Σ_i d(h_i,h_{i+1})^p · 2 w_i^{1−δp} / ((θ+1)(θ+2)),   θ = p(1−δ) − 1
//! ```
//!
//! The second sum is the diagonal block `∫∫_{cell²}`, integrated exactly
//! for a segment whose sub-increments scale linearly (true for piecewise
//! linear Euclidean data and for piecewise-linear group lifts). Every term
//! belongs to exactly one cell or cell pair, so `F` is superadditive over
//! adjacent intervals in exact arithmetic.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{Interval, SampledPath, TimeGrid};

/// `x^p` with shortcuts for the exponents that show up in hot loops.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Power {
    One,
    Two,
    Four,
    Real(f64),
}

impl Power {
    pub(crate) fn new(p: f64) -> Self {
        if p == 1.0 {
            Power::One
        } else if p == 2.0 {
            Power::Two
        } else if p == 4.0 {
            Power::Four
        } else {
            Power::Real(p)
        }
    }

    #[inline]
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Power::One => x,
            Power::Two => x * x,
            Power::Four => {
                let y = x * x;
                y * y
            }
            Power::Real(p) => x.powf(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum NormKind {
    Besov { delta: f64, p: f64 },
    W1p { p: f64 },
    Holder { alpha: f64 },
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormValue {
    #[serde(flatten)]
    pub kind: NormKind,
    pub interval: Interval,
    pub grid_size: usize,
    pub value: f64,
}

pub(crate) fn check_besov_params(delta: f64, p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::condition("p>1", format!("p={p}")));
    }
    if !(delta > 0.0) {
        return Err(Error::condition("δ>0", format!("δ={delta}")));
    }
    if !(delta < 1.0) {
        return Err(Error::condition("δp<p", format!("δ={delta}, p={p}")));
    }
    Ok(())
}

/// Precomputed quadrature weights of the discrete fractional seminorm on a
/// fixed grid. Build once and reuse across many paths on the same grid.
#[derive(Debug, Clone)]
pub struct BesovKernel {
    grid: TimeGrid,
    delta: f64,
    p: f64,
    power: Power,
    /// Packed strict upper triangle over cells: entry for `(i, j)`, `i < j`,
    /// at `offsets[i] + (j − i − 1)`.
    pair_weights: Vec<f64>,
    offsets: Vec<usize>,
    diag_weights: Vec<f64>,
}

impl BesovKernel {
    pub fn new(grid: &TimeGrid, delta: f64, p: f64) -> Result<Self> {
        check_besov_params(delta, p)?;
        let cells = grid.steps();
        let expo = 1.0 + delta * p;
        let theta = p * (1.0 - delta) - 1.0;
        let diag_c = 2.0 / ((theta + 1.0) * (theta + 2.0));
        let t = grid.points();
        let mut offsets = Vec::with_capacity(cells);
        let mut pair_weights = Vec::with_capacity(cells * cells.saturating_sub(1) / 2);
        for i in 0..cells {
            offsets.push(pair_weights.len());
            let wi = grid.cell_width(i);
            for j in i + 1..cells {
                let wj = grid.cell_width(j);
                pair_weights.push(wi * wj / (t[j] - t[i]).powf(expo));
            }
        }
        let diag_weights = (0..cells)
            .map(|i| diag_c * grid.cell_width(i).powf(1.0 - delta * p))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            delta,
            p,
            power: Power::new(p),
            pair_weights,
            offsets,
            diag_weights,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn check_path(&self, path: &SampledPath) -> Result<()> {
        if path.grid() != &self.grid {
            return Err(Error::GridMismatch("path grid differs from kernel grid".into()));
        }
        Ok(())
    }

    /// Un-rooted functional `F_{s,t} = |h|^p_{W^{δ,p};[s,t]}`.
    pub fn functional(&self, path: &SampledPath, iv: Interval) -> Result<f64> {
        self.check_path(path)?;
        Ok(self.functional_unchecked(path, iv.start, iv.end))
    }

    pub(crate) fn functional_unchecked(&self, path: &SampledPath, a: usize, b: usize) -> f64 {
        let pw = self.power;
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in a..b {
            let hi = path.point(i);
            let base = self.offsets[i];
            let mut row = 0.0;
            for j in i + 1..b {
                let d = path.metric().distance(hi, path.point(j));
                row += pw.apply(d) * self.pair_weights[base + j - i - 1];
            }
            off += row;
            diag += pw.apply(path.increment_at(i, i + 1)) * self.diag_weights[i];
        }
        2.0 * off + diag
    }

    /// `F` on every grid interval at once, in `O(n²)`.
    pub fn table(&self, path: &SampledPath) -> Result<FunctionalTable> {
        self.check_path(path)?;
        let n = self.grid.len();
        let pw = self.power;
        let mut values = vec![0.0; n * n];
        // G(a,b) = G(a+1,b) + D_a + 2 Σ_{a<j<b} T_{aj}
        for a in (0..n - 1).rev() {
            let ha = path.point(a);
            let da = pw.apply(path.increment_at(a, a + 1)) * self.diag_weights[a];
            let base = self.offsets[a];
            let mut row = 0.0;
            for b in a + 1..n {
                if b - 1 > a {
                    let j = b - 1;
                    let d = path.metric().distance(ha, path.point(j));
                    row += pw.apply(d) * self.pair_weights[base + j - a - 1];
                }
                let below = values[(a + 1) * n + b];
                values[a * n + b] = below + da + 2.0 * row;
            }
        }
        Ok(FunctionalTable {
            n,
            p: self.p,
            values,
        })
    }
}

/// `F_{a,b}` for all grid index pairs `a ≤ b`.
#[derive(Debug, Clone)]
pub struct FunctionalTable {
    n: usize,
    p: f64,
    values: Vec<f64>,
}

impl FunctionalTable {
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        if a >= b {
            0.0
        } else {
            self.values[a * self.n + b]
        }
    }

    /// Rooted seminorm on `[a, b]`.
    pub fn seminorm(&self, a: usize, b: usize) -> f64 {
        self.get(a, b).powf(1.0 / self.p)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// `F_{s,t}` for a single interval.
pub fn besov_functional(path: &SampledPath, delta: f64, p: f64, iv: Interval) -> Result<f64> {
    check_besov_params(delta, p)?;
    let t = path.grid().points();
    let pw = Power::new(p);
    let expo = 1.0 + delta * p;
    let theta = p * (1.0 - delta) - 1.0;
    let diag_c = 2.0 / ((theta + 1.0) * (theta + 2.0));
    let mut off = 0.0;
    let mut diag = 0.0;
    for i in iv.start..iv.end {
        let wi = t[i + 1] - t[i];
        let hi = path.point(i);
        let mut row = 0.0;
        for j in i + 1..iv.end {
            let wj = t[j + 1] - t[j];
            let d = path.metric().distance(hi, path.point(j));
            row += pw.apply(d) * (wi * wj / (t[j] - t[i]).powf(expo));
        }
        off += row;
        diag += pw.apply(path.increment_at(i, i + 1)) * diag_c * wi.powf(1.0 - delta * p);
    }
    Ok(2.0 * off + diag)
}

pub fn besov_seminorm(path: &SampledPath, delta: f64, p: f64, iv: Interval) -> Result<NormValue> {
    let f = besov_functional(path, delta, p, iv)?;
    Ok(NormValue {
        kind: NormKind::Besov { delta, p },
        interval: iv,
        grid_size: path.len(),
        value: f.powf(1.0 / p),
    })
}

/// Exact `W^{1,p}` norm of the piecewise-linear interpolant on `iv`.
pub fn w1p_norm(path: &SampledPath, p: f64, iv: Interval) -> Result<NormValue> {
    path.require_euclidean("w1p_norm")?;
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::condition("p>1", format!("p={p}")));
    }
    let g = path.grid();
    let pw = Power::new(p);
    let sum: f64 = (iv.start..iv.end)
        .map(|i| {
            let w = g.cell_width(i);
            pw.apply(path.increment_at(i, i + 1) / w) * w
        })
        .sum();
    Ok(NormValue {
        kind: NormKind::W1p { p },
        interval: iv,
        grid_size: path.len(),
        value: sum.powf(1.0 / p),
    })
}

pub fn holder_norm(path: &SampledPath, alpha: f64, iv: Interval) -> Result<NormValue> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::condition("0<α≤1", format!("α={alpha}")));
    }
    if iv.is_degenerate() {
        return Err(Error::InvalidInterval { s: iv.s, t: iv.t });
    }
    let t = path.grid().points();
    let mut best = 0.0f64;
    for i in iv.start..iv.end {
        for j in i + 1..=iv.end {
            let r = path.increment_at(i, j) / (t[j] - t[i]).powf(alpha);
            best = best.max(r);
        }
    }
    Ok(NormValue {
        kind: NormKind::Holder { alpha },
        interval: iv,
        grid_size: path.len(),
        value: best,
    })
}

pub fn sup_norm(path: &SampledPath, iv: Interval) -> Result<NormValue> {
    path.require_euclidean("sup_norm")?;
    let best = (iv.start..=iv.end)
        .map(|i| path.point(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(NormValue {
        kind: NormKind::Sup,
        interval: iv,
        grid_size: path.len(),
        value: best,
    })
}

impl NormKind {
    pub fn params(&self) -> BTreeMap<&'static str, f64> {
        match *self {
            NormKind::Besov { delta, p } => [("delta", delta), ("p", p)].into(),
            NormKind::W1p { p } => [("p", p)].into(),
            NormKind::Holder { alpha } => [("alpha", alpha)].into(),
            NormKind::Sup => BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(steps: usize) -> TimeGrid {
        TimeGrid::uniform(steps).unwrap()
    }

    #[test]
    fn constant_path_is_zero() {
        let p = SampledPath::from_fn(uniform(16), |_| 2.5);
        let iv = p.full_interval();
        assert_eq!(besov_seminorm(&p, 0.75, 2.0, iv).unwrap().value, 0.0);
        assert_eq!(w1p_norm(&p, 3.0, iv).unwrap().value, 0.0);
        assert_eq!(holder_norm(&p, 0.5, iv).unwrap().value, 0.0);
        assert_eq!(sup_norm(&p, iv).unwrap().value, 2.5);
    }

    #[test]
    fn linear_besov_close_to_closed_form() {
        // ∫∫|t−s|^θ = 2/((θ+1)(θ+2)) with θ = −1/2 gives 8/3.
        let p = SampledPath::from_fn(uniform(512), |t| t);
        let v = besov_seminorm(&p, 0.75, 2.0, p.full_interval()).unwrap().value;
        let exact = (8.0f64 / 3.0).sqrt();
        assert!((v / exact - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn single_cell_is_exact_for_segments() {
        let p = SampledPath::from_fn(uniform(1), |t| 3.0 * t);
        let v = besov_functional(&p, 0.6, 3.0, p.full_interval()).unwrap();
        let theta = 3.0 * 0.4 - 1.0;
        let exact = 27.0 * 2.0 / ((theta + 1.0) * (theta + 2.0));
        assert!((v - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn sub_interval_agrees_with_table() {
        let g = uniform(32);
        let p = SampledPath::scalar(g.clone(), (0..=32).map(|i| ((i * 7) % 5) as f64).collect()).unwrap();
        let table = BesovKernel::new(&g, 0.7, 2.0).unwrap().table(&p).unwrap();
        for (a, b) in [(0, 32), (3, 17), (5, 6), (0, 1), (12, 31)] {
            let iv = Interval::from_indices(&g, a, b);
            let direct = besov_functional(&p, 0.7, 2.0, iv).unwrap();
            assert!((direct - table.get(a, b)).abs() <= 1e-12 * direct.max(1e-300), "{a} {b}");
        }
    }

    #[test]
    fn besov_monotone_under_inclusion() {
        let p = SampledPath::from_fn(uniform(64), |t| (9.0 * t).sin() + t * t);
        let full = besov_seminorm(&p, 0.6, 3.0, p.full_interval()).unwrap().value;
        let sub = besov_seminorm(&p, 0.6, 3.0, p.interval(0.25, 0.75).unwrap()).unwrap().value;
        assert!(sub <= full);
    }

    #[test]
    fn besov_parameter_errors() {
        let p = SampledPath::from_fn(uniform(4), |t| t);
        let iv = p.full_interval();
        assert!(matches!(besov_seminorm(&p, 1.0, 2.0, iv), Err(Error::Condition { .. })));
        assert!(matches!(besov_seminorm(&p, 0.5, 1.0, iv), Err(Error::Condition { .. })));
        let deg = p.interval(0.5, 0.5).unwrap();
        assert_eq!(besov_seminorm(&p, 0.5, 2.0, deg).unwrap().value, 0.0);
    }

    #[test]
    fn w1p_examples() {
        let p = SampledPath::from_fn(uniform(8), |t| t);
        for q in [1.5, 2.0, 4.0] {
            assert!((w1p_norm(&p, q, p.full_interval()).unwrap().value - 1.0).abs() < 1e-14);
        }
        let p = SampledPath::from_fn(uniform(8), |t| 2.0 * t.min(0.5));
        let v = w1p_norm(&p, 2.0, p.full_interval()).unwrap().value;
        assert!((v - 2f64.sqrt()).abs() < 1e-14);
        let p = SampledPath::from_fn(uniform(8), |t| -5.0 * t);
        assert!((w1p_norm(&p, 3.0, p.full_interval()).unwrap().value - 5.0).abs() < 1e-13);
    }

    #[test]
    fn holder_examples() {
        let p = SampledPath::from_fn(uniform(16), |t| t);
        let iv = p.full_interval();
        assert!((holder_norm(&p, 0.5, iv).unwrap().value - 1.0).abs() < 1e-15);
        assert!((holder_norm(&p, 0.25, iv).unwrap().value - 1.0).abs() < 1e-15);
        assert!(holder_norm(&p, 0.5, p.interval(0.5, 0.5).unwrap()).is_err());
    }

    #[test]
    fn sup_examples() {
        let p = SampledPath::from_fn(uniform(16), |t| -t);
        assert_eq!(sup_norm(&p, p.full_interval()).unwrap().value, 1.0);
    }

    #[test]
    fn group_paths_reject_linear_norms() {
        use crate::path::MetricSpec;
        let g = uniform(1);
        let p = SampledPath::new(g, MetricSpec::StepTwoGroup(1), vec![0.0, 0.0, 1.0, 0.5]).unwrap();
        assert!(w1p_norm(&p, 2.0, p.full_interval()).is_err());
        assert!(sup_norm(&p, p.full_interval()).is_err());
        assert!(besov_seminorm(&p, 0.5, 2.0, p.full_interval()).is_ok());
    }

    #[test]
    fn norm_value_json_shape() {
        let p = SampledPath::from_fn(uniform(4), |t| t);
        let v = w1p_norm(&p, 2.0, p.full_interval()).unwrap();
        let json = serde_json::to_value(v).unwrap();
        assert_eq!(json["kind"], "w1p");
        assert_eq!(json["params"]["p"], 2.0);
        assert_eq!(json["interval"]["t"], 1.0);
        assert_eq!(json["grid_size"], 5);
    }
}
