//! Small statistics helpers: least squares, two-sample KS, bootstrap CIs,
//! and the seeded random streams used by every stochastic experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for `(seed, index)`. Parallel and serial runs draw
/// identical numbers for the same index.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Least-squares coefficients for `y ≈ X c` with at most a handful of
/// columns, via the normal equations. Returns `None` if singular.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = columns.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for r in 0..k {
        for c in 0..k {
            a[r][c] = columns[r].iter().zip(&columns[c]).map(|(x, z)| x * z).sum();
        }
        a[r][k] = columns[r].iter().zip(y).map(|(x, z)| x * z).sum();
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (x, y) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * y;
                }
            }
        }
    }
    Some((0..k).map(|r| a[r][k] / a[r][r]).collect())
}

/// Residual sum of squares of a fitted linear model.
pub fn residual_ss(columns: &[Vec<f64>], y: &[f64], coef: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, yi)| {
            let fit: f64 = columns.iter().zip(coef).map(|(c, b)| c[i] * b).sum();
            (yi - fit) * (yi - fit)
        })
        .sum()
}

/// Slope of the ordinary least-squares line through `(x, y)`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let ones = vec![1.0; x.len()];
    least_squares(&[ones, x.to_vec()], y).map_or(f64::NAN, |c| c[1])
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic 5% critical value of the two-sample KS statistic.
pub fn ks_critical_5pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.358 * ((n + m) / (n * m)).sqrt()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Percentile bootstrap interval for `Σnum / Σden` over paired samples.
pub fn bootstrap_ratio_ci(num: &[f64], den: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    use rand::Rng;
    let n = num.len();
    let mut rng = stream(seed, u64::MAX);
    let mut ratios: Vec<f64> = (0..resamples)
        .map(|_| {
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..n {
                let k = rng.random_range(0..n);
                a += num[k];
                b += den[k];
            }
            a / b
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let lo = ((1.0 - level) / 2.0 * resamples as f64).floor() as usize;
    let hi = (((1.0 + level) / 2.0 * resamples as f64).ceil() as usize).min(resamples) - 1;
    (ratios[lo], ratios[hi])
}
