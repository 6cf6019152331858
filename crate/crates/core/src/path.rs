//! Sampled paths on `[0, 1]` and the metric abstraction shared by every
//! norm in the crate.
//!
//! A path is a list of samples on a [`TimeGrid`]. Euclidean paths are read
//! as piecewise linear between samples; step-2 group paths are taken as the
//! samples themselves. Distances go through [`MetricSpec`] so the same
//! seminorm and variation code runs on both.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nilpotent;

/// Times closer than this to a grid point are identified with it.
pub const GRID_SNAP: f64 = 1e-12;

/// Largest number of interior points for which partitions are enumerated.
pub const MAX_ENUMERATED_INTERIOR: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if points[0] != 0.0 || *points.last().unwrap() != 1.0 {
            return Err(Error::InvalidGrid(format!(
                "endpoints must be exactly 0 and 1, got {} and {}",
                points[0],
                points.last().unwrap()
            )));
        }
        if let Some(k) = points.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid(format!(
                "not strictly increasing at index {}",
                k + 1
            )));
        }
        Ok(Self { points })
    }

    /// Uniform grid with `steps` cells. Power-of-two step counts give
    /// exactly representable times.
    pub fn uniform(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        let n = steps as f64;
        Self::new((0..=steps).map(|i| i as f64 / n).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of cells.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.points[i]
    }

    pub fn cell_width(&self, i: usize) -> f64 {
        self.points[i + 1] - self.points[i]
    }

    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        if !t.is_finite() {
            return Err(Error::NotOnGrid(t));
        }
        let k = self.points.partition_point(|&x| x < t);
        let near = [k.checked_sub(1), Some(k)];
        near.into_iter()
            .flatten()
            .filter(|&i| i < self.points.len())
            .find(|&i| (self.points[i] - t).abs() <= GRID_SNAP)
            .ok_or(Error::NotOnGrid(t))
    }

    /// Grid with every cell halved `levels` times. Original points are kept
    /// bit for bit.
    pub fn refine(&self, levels: u32) -> TimeGrid {
        let parts = 1usize << levels;
        let mut points = Vec::with_capacity(self.steps() * parts + 1);
        for w in self.points.windows(2) {
            let width = w[1] - w[0];
            for k in 0..parts {
                points.push(w[0] + width * (k as f64 / parts as f64));
            }
        }
        points.push(1.0);
        TimeGrid { points }
    }
}

/// Value space of a path together with its distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "dim")]
pub enum MetricSpec {
    /// `ℝ^d` with the Euclidean distance.
    Euclidean(usize),
    /// The free step-2 nilpotent group over `ℝ^d` with `d(x,y) = ‖x⁻¹⊗y‖`.
    StepTwoGroup(usize),
}

impl MetricSpec {
    pub fn dim(&self) -> usize {
        match *self {
            MetricSpec::Euclidean(d) | MetricSpec::StepTwoGroup(d) => d,
        }
    }

    /// Number of floats per sample.
    pub fn stride(&self) -> usize {
        match *self {
            MetricSpec::Euclidean(d) => d,
            MetricSpec::StepTwoGroup(d) => d + d * d,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, MetricSpec::Euclidean(_))
    }

    pub fn name(&self) -> String {
        match *self {
            MetricSpec::Euclidean(d) => format!("euclidean(d={d})"),
            MetricSpec::StepTwoGroup(d) => format!("step-2 group(d={d})"),
        }
    }

    #[inline]
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            MetricSpec::Euclidean(1) => (y[0] - x[0]).abs(),
            MetricSpec::Euclidean(_) => x
                .iter()
                .zip(y)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt(),
            MetricSpec::StepTwoGroup(d) => nilpotent::slice_distance(d, x, y),
        }
    }
}

/// Closed subinterval `[s, t]` whose endpoints are grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub s: f64,
    pub t: f64,
    #[serde(skip)]
    pub start: usize,
    #[serde(skip)]
    pub end: usize,
}

impl Interval {
    pub fn new(grid: &TimeGrid, s: f64, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) || s > t {
            return Err(Error::InvalidInterval { s, t });
        }
        let start = grid.index_of(s)?;
        let end = grid.index_of(t)?;
        Ok(Self::from_indices(grid, start, end))
    }

    pub fn from_indices(grid: &TimeGrid, start: usize, end: usize) -> Self {
        assert!(start <= end && end < grid.len(), "bad interval indices");
        Self {
            s: grid.time(start),
            t: grid.time(end),
            start,
            end,
        }
    }

    pub fn full(grid: &TimeGrid) -> Self {
        Self::from_indices(grid, 0, grid.len() - 1)
    }

    pub fn length(&self) -> f64 {
        self.t - self.s
    }

    pub fn is_degenerate(&self) -> bool {
        self.start == self.end
    }

    /// Number of grid points strictly inside.
    pub fn interior_points(&self) -> usize {
        (self.end - self.start).saturating_sub(1)
    }
}

/// Increasing list of grid indices running from an interval's start to its
/// end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub indices: Vec<usize>,
}

impl Partition {
    pub fn times(&self, grid: &TimeGrid) -> Vec<f64> {
        self.indices.iter().map(|&i| grid.time(i)).collect()
    }

    /// Sum of `increment^q` over consecutive partition points.
    pub fn q_sum(&self, path: &SampledPath, q: f64) -> f64 {
        self.indices
            .windows(2)
            .map(|w| path.increment_at(w[0], w[1]).powf(q))
            .sum()
    }
}

/// Every partition of `iv` built from grid points: one per subset of the
/// interior points, always containing both endpoints.
pub fn all_partitions(iv: Interval, grid: &TimeGrid) -> Result<impl Iterator<Item = Partition>> {
    if iv.end >= grid.len() {
        return Err(Error::InvalidInterval { s: iv.s, t: iv.t });
    }
    let k = iv.interior_points();
    if k > MAX_ENUMERATED_INTERIOR {
        return Err(Error::TooManyPartitions {
            interior: k,
            limit: MAX_ENUMERATED_INTERIOR,
        });
    }
    let (start, end) = (iv.start, iv.end);
    Ok((0u32..(1u32 << k)).map(move |mask| {
        let mut indices = Vec::with_capacity(k + 2);
        indices.push(start);
        for b in 0..k {
            if mask & (1 << b) != 0 {
                indices.push(start + 1 + b);
            }
        }
        if end != start {
            indices.push(end);
        }
        Partition { indices }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: TimeGrid,
    metric: MetricSpec,
    values: Vec<f64>,
}

impl SampledPath {
    /// `values` is row-major: one block of `metric.stride()` floats per grid
    /// point.
    pub fn new(grid: TimeGrid, metric: MetricSpec, values: Vec<f64>) -> Result<Self> {
        let stride = metric.stride();
        if metric.dim() == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if values.len() != grid.len() * stride {
            return Err(Error::DimensionMismatch {
                expected: grid.len() * stride,
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue {
                index: k / stride,
                reason: "non-finite entry".into(),
            });
        }
        if let MetricSpec::StepTwoGroup(d) = metric {
            for (i, x) in values.chunks(stride).enumerate() {
                let defect = nilpotent::geometric_defect(d, x);
                let a2: f64 = x[..d].iter().map(|v| v * v).sum();
                if defect > 1e-9 * (1.0 + a2) {
                    return Err(Error::InvalidValue {
                        index: i,
                        reason: format!("Sym(A) differs from a⊗a/2 by {defect:e}"),
                    });
                }
            }
        }
        Ok(Self {
            grid,
            metric,
            values,
        })
    }

    /// Scalar path sampled from `f` on `grid`.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self {
            grid,
            metric: MetricSpec::Euclidean(1),
            values,
        }
    }

    /// Scalar path from given samples.
    pub fn scalar(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, MetricSpec::Euclidean(1), values)
    }

    pub(crate) fn from_parts_unchecked(grid: TimeGrid, metric: MetricSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * metric.stride());
        Self {
            grid,
            metric,
            values,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn metric(&self) -> MetricSpec {
        self.metric
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let k = self.metric.stride();
        &self.values[i * k..(i + 1) * k]
    }

    /// Distance between the samples at grid indices `i` and `j`.
    #[inline]
    pub fn increment_at(&self, i: usize, j: usize) -> f64 {
        self.metric.distance(self.point(i), self.point(j))
    }

    /// `d(h_s, h_t)` for grid times `s`, `t`.
    pub fn increment(&self, s: f64, t: f64) -> Result<f64> {
        let i = self.grid.index_of(s)?;
        let j = self.grid.index_of(t)?;
        Ok(self.increment_at(i, j))
    }

    pub fn full_interval(&self) -> Interval {
        Interval::full(&self.grid)
    }

    pub fn interval(&self, s: f64, t: f64) -> Result<Interval> {
        Interval::new(&self.grid, s, t)
    }

    pub(crate) fn require_euclidean(&self, op: &'static str) -> Result<usize> {
        match self.metric {
            MetricSpec::Euclidean(d) => Ok(d),
            other => Err(Error::UnsupportedSpace {
                op,
                space: other.name(),
            }),
        }
    }

    /// Path on the sub-grid of `iv`. The returned grid keeps the original
    /// times, so it lives on `[s, t]` rather than `[0, 1]`.
    pub fn restrict(&self, iv: Interval) -> RestrictedPath {
        let k = self.metric.stride();
        RestrictedPath {
            times: self.grid.points()[iv.start..=iv.end].to_vec(),
            metric: self.metric,
            values: self.values[iv.start * k..(iv.end + 1) * k].to_vec(),
            domain: iv,
        }
    }

    /// Piecewise-linear interpolation onto `grid.refine(levels)`.
    pub fn dyadic_refine(&self, levels: u32) -> Result<SampledPath> {
        let d = self.require_euclidean("dyadic_refine")?;
        if levels == 0 {
            return Ok(self.clone());
        }
        let parts = 1usize << levels;
        let grid = self.grid.refine(levels);
        let mut values = Vec::with_capacity(grid.len() * d);
        for i in 0..self.grid.steps() {
            let (a, b) = (self.point(i), self.point(i + 1));
            for k in 0..parts {
                let r = k as f64 / parts as f64;
                values.extend(a.iter().zip(b).map(|(x, y)| x + (y - x) * r));
            }
        }
        values.extend_from_slice(self.point(self.grid.steps()));
        Ok(Self::from_parts_unchecked(grid, self.metric, values))
    }

    /// Pointwise map of a Euclidean path.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<SampledPath> {
        self.require_euclidean("map_values")?;
        Ok(Self::from_parts_unchecked(
            self.grid.clone(),
            self.metric,
            self.values.iter().map(|&v| f(v)).collect(),
        ))
    }

    /// Samples of one Euclidean coordinate.
    pub fn component(&self, c: usize) -> Result<SampledPath> {
        let d = self.require_euclidean("component")?;
        if c >= d {
            return Err(Error::DimensionMismatch { expected: d, got: c });
        }
        Ok(Self::from_parts_unchecked(
            self.grid.clone(),
            MetricSpec::Euclidean(1),
            self.values.iter().skip(c).step_by(d).copied().collect(),
        ))
    }
}

/// Result of [`SampledPath::restrict`]: the samples inside an interval
/// together with the interval they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedPath {
    pub times: Vec<f64>,
    pub metric: MetricSpec,
    pub values: Vec<f64>,
    pub domain: Interval,
}

impl RestrictedPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Restricts again; `iv` uses indices of the original grid.
    pub fn restrict(&self, iv: Interval) -> RestrictedPath {
        assert!(iv.start >= self.domain.start && iv.end <= self.domain.end);
        let k = self.metric.stride();
        let off = self.domain.start;
        RestrictedPath {
            times: self.times[iv.start - off..=iv.end - off].to_vec(),
            metric: self.metric,
            values: self.values[(iv.start - off) * k..(iv.end - off + 1) * k].to_vec(),
            domain: iv,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(steps: usize) -> SampledPath {
        SampledPath::from_fn(TimeGrid::uniform(steps).unwrap(), |t| t)
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0, 0.5, 1.0]).is_ok());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.9]).is_err());
        assert!(TimeGrid::new(vec![0.0]).is_err());
    }

    #[test]
    fn increments() {
        let p = SampledPath::from_fn(TimeGrid::uniform(4).unwrap(), |_| 3.0);
        assert_eq!(p.increment(0.25, 1.0).unwrap(), 0.0);
        let p = linear(4);
        assert_eq!(p.increment(0.25, 0.75).unwrap(), 0.5);
        assert_eq!(p.increment(0.75, 0.25).unwrap(), 0.5);
        assert_eq!(p.increment(0.3, 0.75), Err(Error::NotOnGrid(0.3)));
    }

    #[test]
    fn group_increment_is_norm_of_second_factor() {
        use crate::nilpotent::GroupElement;
        let a = GroupElement::new(vec![0.3, -1.2], vec![0.0; 4]).unwrap();
        let b = GroupElement::new(vec![0.7, 0.4], vec![0.0; 4]).unwrap();
        let ab = a.product(&b).unwrap();
        let grid = TimeGrid::uniform(1).unwrap();
        // (a,0) is not geometric, so build the path without validation.
        let mut values = a.to_flat();
        values.extend(ab.to_flat());
        let path = SampledPath::from_parts_unchecked(grid, MetricSpec::StepTwoGroup(2), values);
        let got = path.increment(0.0, 1.0).unwrap();
        assert!((got - b.homogeneous_norm()).abs() < 1e-14);
    }

    #[test]
    fn restrict_counts_and_idempotence() {
        let p = linear(4);
        let full = p.restrict(p.full_interval());
        assert_eq!(full.values, p.values());
        assert_eq!(full.times, p.grid().points());
        let iv = p.interval(0.25, 0.75).unwrap();
        let r = p.restrict(iv);
        assert_eq!(r.len(), 3);
        assert_eq!(r.restrict(iv), r);
    }

    #[test]
    fn partition_counts() {
        let g = TimeGrid::uniform(11).unwrap();
        let count = |s: usize, e: usize| all_partitions(Interval::from_indices(&g, s, e), &g).unwrap().count();
        assert_eq!(count(3, 4), 1);
        assert_eq!(count(3, 6), 4);
        assert_eq!(count(0, 11), 1024);
        let g = TimeGrid::uniform(30).unwrap();
        assert!(matches!(
            all_partitions(Interval::full(&g), &g),
            Err(Error::TooManyPartitions { interior: 29, .. })
        ));
        let parts: Vec<_> = all_partitions(Interval::from_indices(&g, 2, 4), &g).unwrap().collect();
        assert_eq!(parts[0].indices, vec![2, 4]);
        assert_eq!(parts[1].indices, vec![2, 3, 4]);
    }

    #[test]
    fn refine_levels() {
        let p = linear(8);
        assert_eq!(p.dyadic_refine(0).unwrap(), p);
        let r = p.dyadic_refine(3).unwrap();
        assert_eq!(r.grid().steps(), 64);
        for (t, v) in r.grid().points().iter().zip(r.values()) {
            assert_eq!(t, v);
        }
        for i in 0..=8 {
            assert_eq!(r.point(8 * i), p.point(i));
        }
    }

    #[test]
    fn refine_nonuniform_keeps_points() {
        let g = TimeGrid::new(vec![0.0, 0.125, 0.5, 1.0]).unwrap();
        let p = SampledPath::scalar(g, vec![0.0, 2.0, -1.0, 0.5]).unwrap();
        let r = p.dyadic_refine(2).unwrap();
        assert_eq!(r.grid().steps(), 12);
        assert_eq!(r.grid().time(4), 0.125);
        assert_eq!(r.point(8), &[-1.0]);
        assert_eq!(r.point(2), &[1.0]);
    }

    #[test]
    fn group_paths_do_not_refine() {
        let g = TimeGrid::uniform(1).unwrap();
        let p = SampledPath::new(g, MetricSpec::StepTwoGroup(1), vec![0.0, 0.0, 2.0, 2.0]).unwrap();
        assert!(matches!(p.dyadic_refine(1), Err(Error::UnsupportedSpace { .. })));
    }

    #[test]
    fn group_constraint_checked() {
        let g = TimeGrid::uniform(1).unwrap();
        let bad = SampledPath::new(g, MetricSpec::StepTwoGroup(1), vec![0.0, 0.0, 2.0, 0.0]);
        assert!(matches!(bad, Err(Error::InvalidValue { index: 1, .. })));
    }
}
