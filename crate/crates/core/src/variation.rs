//! q-variation of sampled paths.
//!
//! Suprema run over partitions made of grid points. For piecewise-linear
//! Euclidean data this is the q-variation of the interpolant; for group
//! paths the samples are the data.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{all_partitions, Interval, Partition, SampledPath};
use crate::seminorms::Power;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationValue {
    pub value: f64,
    pub q: f64,
    pub interval: Interval,
    /// Times of the maximising partition.
    pub argmax_partition: Vec<f64>,
    #[serde(skip)]
    pub partition: Partition,
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::condition("q≥1", format!("q={q}")));
    }
    Ok(())
}

fn value_from(path: &SampledPath, q: f64, iv: Interval, sum: f64, partition: Partition) -> VariationValue {
    VariationValue {
        value: sum.powf(1.0 / q),
        q,
        interval: iv,
        argmax_partition: partition.times(path.grid()),
        partition,
    }
}

/// `V[j] = max_{i<j} (V[i] + d(h_i,h_j)^q)`, smallest `i` on ties.
pub fn q_variation_dp(path: &SampledPath, q: f64, iv: Interval) -> Result<VariationValue> {
    check_q(q)?;
    let (a, b) = (iv.start, iv.end);
    let m = b - a + 1;
    let pw = Power::new(q);
    let mut best = vec![0.0f64; m];
    let mut back = vec![0usize; m];
    for j in 1..m {
        let hj = path.point(a + j);
        let mut v = f64::NEG_INFINITY;
        let mut arg = 0;
        for (i, bi) in best.iter().enumerate().take(j) {
            let cand = bi + pw.apply(path.metric().distance(path.point(a + i), hj));
            if cand > v {
                v = cand;
                arg = i;
            }
        }
        best[j] = v;
        back[j] = arg;
    }
    let mut indices = vec![b];
    let mut k = m - 1;
    while k > 0 {
        k = back[k];
        indices.push(a + k);
    }
    indices.reverse();
    Ok(value_from(path, q, iv, best[m - 1], Partition { indices }))
}

/// Exhaustive search over [`all_partitions`]; the oracle for the DP.
pub fn q_variation_bruteforce(path: &SampledPath, q: f64, iv: Interval) -> Result<VariationValue> {
    check_q(q)?;
    let pw = Power::new(q);
    let mut best: Option<(f64, Partition)> = None;
    for part in all_partitions(iv, path.grid())? {
        let s: f64 = part
            .indices
            .windows(2)
            .map(|w| pw.apply(path.increment_at(w[0], w[1])))
            .sum();
        if best.as_ref().is_none_or(|(v, _)| s > *v) {
            best = Some((s, part));
        }
    }
    let (s, part) = best.expect("at least one partition");
    Ok(value_from(path, q, iv, s, part))
}

/// Sum of increments over consecutive grid points.
pub fn one_variation(path: &SampledPath, iv: Interval) -> Result<VariationValue> {
    let sum: f64 = (iv.start..iv.end).map(|i| path.increment_at(i, i + 1)).sum();
    let partition = Partition {
        indices: (iv.start..=iv.end).collect(),
    };
    Ok(value_from(path, 1.0, iv, sum, partition))
}

/// `q`-th powers of the q-variation on `[a, b]` for every `b > a`, from a
/// single DP sweep started at `a`. Entry `k` holds the interval `[a, a+k]`.
pub(crate) fn q_variation_sweep(path: &SampledPath, pw: Power, a: usize, out: &mut Vec<f64>) {
    let n = path.len();
    out.clear();
    out.push(0.0);
    for j in a + 1..n {
        let hj = path.point(j);
        let mut v = f64::NEG_INFINITY;
        for (k, vk) in out.iter().enumerate() {
            let cand = vk + pw.apply(path.metric().distance(path.point(a + k), hj));
            if cand > v {
                v = cand;
            }
        }
        out.push(v);
    }
}

/// q-variation over the whole of `[0, 1]`.
pub fn q_variation_full(path: &SampledPath, q: f64) -> Result<f64> {
    Ok(q_variation_dp(path, q, path.full_interval())?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::TimeGrid;
    use proptest::prelude::*;

    fn scalar(times: Vec<f64>, values: Vec<f64>) -> SampledPath {
        SampledPath::scalar(TimeGrid::new(times).unwrap(), values).unwrap()
    }

    #[test]
    fn monotone_path_gives_endpoint_increment() {
        let p = SampledPath::from_fn(TimeGrid::uniform(10).unwrap(), |t| t * t * 3.0);
        for q in [1.0, 4.0 / 3.0, 2.0, 3.5] {
            let v = q_variation_dp(&p, q, p.full_interval()).unwrap();
            assert!((v.value - 3.0).abs() < 1e-12, "q={q}: {}", v.value);
        }
    }

    #[test]
    fn hand_computed_example() {
        // The full partition and the bare endpoints both give 2.25; ties go to
        // the smallest backpointer.
        let p = scalar(vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], vec![0.0, 1.0, 0.5, 1.5]);
        let v = q_variation_dp(&p, 2.0, p.full_interval()).unwrap();
        assert!((v.value - 1.5).abs() < 1e-15);
        assert_eq!(v.partition.indices, vec![0, 3]);
        let b = q_variation_bruteforce(&p, 2.0, p.full_interval()).unwrap();
        assert_eq!(b.value, v.value);
    }

    #[test]
    fn constant_path() {
        let p = SampledPath::from_fn(TimeGrid::uniform(6).unwrap(), |_| 1.0);
        let v = q_variation_dp(&p, 2.0, p.full_interval()).unwrap();
        assert_eq!(v.value, 0.0);
        // All partitions tie; the smallest index wins every backpointer.
        assert_eq!(v.partition.indices, vec![0, 6]);
    }

    #[test]
    fn q_below_one_rejected() {
        let p = SampledPath::from_fn(TimeGrid::uniform(6).unwrap(), |t| t);
        assert!(matches!(q_variation_dp(&p, 0.5, p.full_interval()), Err(Error::Condition { .. })));
    }

    #[test]
    fn single_segment_and_degenerate() {
        let p = scalar(vec![0.0, 0.5, 1.0], vec![0.0, -2.0, 1.0]);
        let iv = p.interval(0.5, 1.0).unwrap();
        assert_eq!(q_variation_bruteforce(&p, 2.0, iv).unwrap().value, 3.0);
        let deg = p.interval(0.5, 0.5).unwrap();
        let v = q_variation_dp(&p, 2.0, deg).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.partition.indices, vec![1]);
    }

    #[test]
    fn one_variation_examples() {
        let p = SampledPath::from_fn(TimeGrid::uniform(8).unwrap(), |t| t);
        assert!((one_variation(&p, p.full_interval()).unwrap().value - 1.0).abs() < 1e-15);
        let z = scalar(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]);
        assert_eq!(one_variation(&z, z.full_interval()).unwrap().value, 2.0);
        let q1 = q_variation_bruteforce(&z, 1.0, z.full_interval()).unwrap();
        assert_eq!(q1.value, 2.0);
    }

    #[test]
    fn sweep_matches_dp() {
        let p = scalar(
            (0..=8).map(|i| i as f64 / 8.0).collect(),
            vec![0.0, 0.4, -0.3, 0.9, 0.1, 0.2, -0.8, 0.5, 0.0],
        );
        let mut out = Vec::new();
        q_variation_sweep(&p, Power::new(1.5), 2, &mut out);
        for (k, v) in out.iter().enumerate() {
            let iv = Interval::from_indices(p.grid(), 2, 2 + k);
            let dp = q_variation_dp(&p, 1.5, iv).unwrap().value.powf(1.5);
            assert!((v - dp).abs() < 1e-12);
        }
    }

    fn path_strategy() -> impl Strategy<Value = SampledPath> {
        (2usize..12).prop_flat_map(|n| {
            prop::collection::vec(-2.0f64..2.0, n + 1).prop_map(move |v| {
                SampledPath::scalar(TimeGrid::uniform(n).unwrap(), v).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn argmax_attains_value(p in path_strategy(), q in 1.0f64..4.0) {
            let v = q_variation_dp(&p, q, p.full_interval()).unwrap();
            let s = v.partition.q_sum(&p, q);
            prop_assert!((s.powf(1.0 / q) - v.value).abs() <= 1e-12 * v.value.max(1.0));
        }

        #[test]
        fn non_increasing_in_q(p in path_strategy(), q1 in 1.0f64..3.0, dq in 0.01f64..2.0) {
            let a = q_variation_dp(&p, q1, p.full_interval()).unwrap().value;
            let b = q_variation_dp(&p, q1 + dq, p.full_interval()).unwrap().value;
            prop_assert!(b <= a * (1.0 + 1e-9) + 1e-15);
        }

        #[test]
        fn dominates_endpoint_increment_and_restrictions(p in path_strategy(), q in 1.0f64..3.0) {
            let iv = p.full_interval();
            let v = q_variation_dp(&p, q, iv).unwrap().value;
            prop_assert!(v + 1e-12 >= p.increment_at(iv.start, iv.end));
            let sub = Interval::from_indices(p.grid(), 1, p.len() - 1);
            prop_assert!(q_variation_dp(&p, q, sub).unwrap().value <= v + 1e-12);
        }
    }
}
