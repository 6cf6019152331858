//! Young integrals `∫ f ⊗ dg` of sampled paths, the Young–Loève remainder
//! bound, and the level-2 lift of paths of finite q-variation, `q < 2`.

use serde::Serialize;

use crate::embedding::grr_constant;
use crate::error::{Error, Result};
use crate::nilpotent::{lift_piecewise_linear, GroupPath};
use crate::path::{Interval, MetricSpec, SampledPath};
use crate::seminorms;
use crate::variation::q_variation_dp;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YoungIntegral {
    /// Indefinite integral; component `a·d + b` is `∫ f_a dg_b`.
    #[serde(skip)]
    pub path: SampledPath,
    pub value: Vec<f64>,
    pub f_pvar: f64,
    pub g_qvar: f64,
    pub theta: f64,
    /// Change of the total integral under one midpoint refinement of the
    /// piecewise-linear data, `|¼ Σ Δf ⊗ Δg|`.
    pub refinement_gap: f64,
}

fn check_theta(p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::condition("p,q≥1", format!("p={p}, q={q}")));
    }
    let theta = 1.0 / p + 1.0 / q;
    if !(theta > 1.0) {
        return Err(Error::condition("1/p+1/q>1", format!("θ={theta}")));
    }
    Ok(theta)
}

fn check_pair(f: &SampledPath, g: &SampledPath) -> Result<(usize, usize)> {
    let m = f.require_euclidean("young_integral")?;
    let d = g.require_euclidean("young_integral")?;
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch("f and g live on different grids".into()));
    }
    Ok((m, d))
}

/// `Σ_i f(t_i) ⊗ (g(t_{i+1}) − g(t_i))` over cells in `[a, b)`.
fn left_sum(f: &SampledPath, g: &SampledPath, a: usize, b: usize) -> Vec<f64> {
    let (m, d) = (f.metric().dim(), g.metric().dim());
    let mut acc = vec![0.0; m * d];
    for i in a..b {
        let (fi, g0, g1) = (f.point(i), g.point(i), g.point(i + 1));
        for x in 0..m {
            for y in 0..d {
                acc[x * d + y] += fi[x] * (g1[y] - g0[y]);
            }
        }
    }
    acc
}

/// `Σ Δf ⊗ Δg` over cells in `[a, b)`.
pub fn discrete_correction(f: &SampledPath, g: &SampledPath, iv: Interval) -> Result<Vec<f64>> {
    let (m, d) = check_pair(f, g)?;
    let mut acc = vec![0.0; m * d];
    for i in iv.start..iv.end {
        for x in 0..m {
            let dfx = f.point(i + 1)[x] - f.point(i)[x];
            for y in 0..d {
                acc[x * d + y] += dfx * (g.point(i + 1)[y] - g.point(i)[y]);
            }
        }
    }
    Ok(acc)
}

fn frobenius(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Left-point Riemann–Stieltjes integral, cumulated over the grid.
pub fn young_integral(f: &SampledPath, g: &SampledPath, p: f64, q: f64) -> Result<YoungIntegral> {
    let theta = check_theta(p, q)?;
    let (m, d) = check_pair(f, g)?;
    let f_pvar = q_variation_dp(f, p, f.full_interval())?.value;
    let g_qvar = q_variation_dp(g, q, g.full_interval())?.value;
    let n = f.len();
    let mut values = vec![0.0; m * d];
    let mut acc = vec![0.0; m * d];
    for i in 0..n - 1 {
        for (a, c) in acc.iter_mut().zip(left_sum(f, g, i, i + 1)) {
            *a += c;
        }
        values.extend_from_slice(&acc);
    }
    let path = SampledPath::new(f.grid().clone(), MetricSpec::Euclidean(m * d), values)?;
    let gap = frobenius(&discrete_correction(f, g, f.full_interval())?) / 4.0;
    Ok(YoungIntegral {
        value: acc,
        path,
        f_pvar,
        g_qvar,
        theta,
        refinement_gap: gap,
    })
}

/// `∫_iv f dg − f(s) ⊗ g_{s,t}` in Frobenius norm.
pub fn young_remainder(f: &SampledPath, g: &SampledPath, iv: Interval) -> Result<f64> {
    let (m, d) = check_pair(f, g)?;
    let mut r = left_sum(f, g, iv.start, iv.end);
    let fs = f.point(iv.start);
    for x in 0..m {
        for y in 0..d {
            r[x * d + y] -= fs[x] * (g.point(iv.end)[y] - g.point(iv.start)[y]);
        }
    }
    Ok(frobenius(&r))
}

/// Riemann zeta for `s > 1` by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::condition("s>1", format!("s={s}")));
    }
    const N: usize = 12;
    // B_{2j}/(2j)! for j = 1..=7.
    const B: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
        1.0 / 74724249600.0,
    ];
    let nf = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // Rising factorial s(s+1)…(s+2j−2) times N^{−s−2j+1}.
    let mut rising = s;
    let mut power = nf.powf(-s - 1.0);
    for (j, b) in B.iter().enumerate() {
        sum += b * rising * power;
        let k = 2.0 * j as f64;
        rising *= (s + k + 1.0) * (s + k + 2.0);
        power /= nf * nf;
    }
    Ok(sum)
}

/// `1 + ζ(θ)`.
pub fn young_loeve_constant(theta: f64) -> Result<f64> {
    Ok(1.0 + zeta(theta)?)
}

/// `(1 + ζ(θ)) |f|_{p-var;iv} |g|_{q-var;iv}`.
pub fn young_loeve_bound(f: &SampledPath, g: &SampledPath, p: f64, q: f64, iv: Interval) -> Result<f64> {
    let theta = check_theta(p, q)?;
    check_pair(f, g)?;
    let fp = q_variation_dp(f, p, iv)?.value;
    let gq = q_variation_dp(g, q, iv)?.value;
    Ok(young_loeve_constant(theta)? * fp * gq)
}

/// The Young–Loève bound with both variations replaced by their
/// fractional Sobolev bounds: `q = 1/δ`, `p = 2`, requiring `δ > 1/2`.
pub fn young_besov_bound(f: &SampledPath, g: &SampledPath, delta: f64, iv: Interval) -> Result<f64> {
    check_pair(f, g)?;
    let c = grr_constant(delta, 2.0)?;
    let theta = 2.0 * delta;
    let len = iv.length().powf(delta - 0.5);
    let nf = seminorms::besov_seminorm(f, delta, 2.0, iv)?.value;
    let ng = seminorms::besov_seminorm(g, delta, 2.0, iv)?.value;
    Ok(young_loeve_constant(theta)? * (c * len * nf) * (c * len * ng))
}

/// Geometric level-2 lift: per segment `(Δh, ½ Δh⊗Δh)`, composed with
/// Chen's product. Cross terms are the left-point sums `Σ h_{0,t_i} ⊗ Δh_i`.
pub fn level2_lift(h: &SampledPath, q: f64) -> Result<GroupPath> {
    if !(1.0..2.0).contains(&q) {
        return Err(Error::condition("1≤q<2", format!("q={q}")));
    }
    h.require_euclidean("level2_lift")?;
    lift_piecewise_linear(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nilpotent::GroupElement;
    use crate::path::TimeGrid;
    use proptest::prelude::*;

    fn scalar(n: usize, f: impl Fn(f64) -> f64) -> SampledPath {
        SampledPath::from_fn(TimeGrid::uniform(n).unwrap(), f)
    }

    #[test]
    fn constant_integrand() {
        let g = scalar(16, |t| (3.0 * t).sin());
        let f = scalar(16, |_| 1.0);
        let y = young_integral(&f, &g, 1.5, 1.5).unwrap();
        for j in 0..17 {
            assert!((y.path.point(j)[0] - (g.point(j)[0] - g.point(0)[0])).abs() < 1e-14);
        }
        assert_eq!(young_remainder(&f, &g, g.full_interval()).unwrap(), 0.0);
    }

    #[test]
    fn t_against_t_squared() {
        let y = young_integral(&scalar(1024, |t| t), &scalar(1024, |t| t * t), 1.0, 1.0).unwrap();
        assert!((y.value[0] / (2.0 / 3.0) - 1.0).abs() < 5e-3);
        assert_eq!(y.path.point(0)[0], 0.0);
    }

    #[test]
    fn self_integral() {
        let g = scalar(2048, |t| (5.0 * t).sin() + t);
        let y = young_integral(&g, &g, 1.5, 1.5).unwrap();
        let exact = 0.5 * (g.point(2048)[0].powi(2) - g.point(0)[0].powi(2));
        assert!((y.value[0] - exact).abs() < 2.0 * y.refinement_gap + 1e-12);
    }

    #[test]
    fn rejects_bad_exponents_and_grids() {
        let f = scalar(8, |t| t);
        assert!(young_integral(&f, &f, 2.0, 2.0).is_err());
        assert!(young_integral(&f, &scalar(4, |t| t), 1.5, 1.5).is_err());
        assert!(level2_lift(&f, 2.0).is_err());
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0).unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
        assert!((zeta(1.5).unwrap() - 2.612_375_348_685_488).abs() < 1e-12);
        assert!((young_loeve_constant(1.5).unwrap() - 3.612).abs() < 1e-3);
        assert!(zeta(1.0).is_err());
    }

    #[test]
    fn lift_examples() {
        let g = TimeGrid::uniform(10).unwrap();
        let v = [0.7, -1.2];
        let vals = (0..=10).flat_map(|i| v.map(|c| c * g.time(i))).collect();
        let h = SampledPath::new(g, MetricSpec::Euclidean(2), vals).unwrap();
        let lift = level2_lift(&h, 1.0).unwrap();
        assert!(lift.element(10).max_abs_diff(&GroupElement::segment(&v)) < 1e-14);
        let s = scalar(12, |t| (7.0 * t).cos());
        let l = level2_lift(&s, 1.5).unwrap().element(12);
        let inc = s.point(12)[0] - s.point(0)[0];
        assert!((l.m[0] - 0.5 * inc * inc).abs() < 1e-14);
    }

    fn pl_path() -> impl Strategy<Value = SampledPath> {
        prop::collection::vec(-1.0f64..1.0, 13).prop_map(|v| SampledPath::scalar(TimeGrid::uniform(12).unwrap(), v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn integration_by_parts(f in pl_path(), g in pl_path()) {
            let a = young_integral(&f, &g, 1.0, 1.0).unwrap().value[0];
            let b = young_integral(&g, &f, 1.0, 1.0).unwrap().value[0];
            let c = discrete_correction(&f, &g, f.full_interval()).unwrap()[0];
            let rhs = f.point(12)[0] * g.point(12)[0] - f.point(0)[0] * g.point(0)[0];
            prop_assert!((a + b + c - rhs).abs() <= 1e-12);
        }

        #[test]
        fn linear_and_additive(f1 in pl_path(), f2 in pl_path(), g in pl_path(), k in 1usize..12) {
            let mix = SampledPath::scalar(f1.grid().clone(), f1.values().iter().zip(f2.values()).map(|(a, b)| 2.0 * a - b).collect()).unwrap();
            let i1 = young_integral(&f1, &g, 1.0, 1.0).unwrap().value[0];
            let i2 = young_integral(&f2, &g, 1.0, 1.0).unwrap().value[0];
            let im = young_integral(&mix, &g, 1.0, 1.0).unwrap().value[0];
            prop_assert!((im - 2.0 * i1 + i2).abs() <= 1e-9);
            let left = left_sum(&f1, &g, 0, k)[0];
            let right = left_sum(&f1, &g, k, 12)[0];
            prop_assert!((left + right - left_sum(&f1, &g, 0, 12)[0]).abs() <= 1e-12);
        }

        #[test]
        fn young_loeve_on_subintervals(f in pl_path(), g in pl_path(), a in 0usize..6, b in 7usize..13) {
            let iv = Interval::from_indices(f.grid(), a, b);
            let r = young_remainder(&f, &g, iv).unwrap();
            prop_assert!(r <= young_loeve_bound(&f, &g, 4.0 / 3.0, 4.0 / 3.0, iv).unwrap() * (1.0 + 1e-12));
            prop_assert!(r <= young_besov_bound(&f, &g, 0.75, iv).unwrap());
        }
    }
}
