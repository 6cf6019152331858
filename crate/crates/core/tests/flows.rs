use pathreg::embedding::{embedding_ratio_experiment, verify_theorem2, NormSpec};
use pathreg::io;
use pathreg::nilpotent::{enhanced_bm_replica, GroupElement};
use pathreg::path::{Interval, MetricSpec, SampledPath, TimeGrid};
use pathreg::volterra::{cm_path_from_l2, standard_normal_corpus};
use pathreg::young::{level2_lift, young_besov_bound, young_integral, young_remainder};

#[test]
fn cm_paths_through_csv_satisfy_theorem2() {
    let corpus = standard_normal_corpus(32, 4, 3).unwrap();
    let grid = TimeGrid::uniform(64).unwrap();
    let mut paths = Vec::new();
    for g in &corpus {
        let h = cm_path_from_l2(g, 0.25, &grid).unwrap();
        let mut buf = Vec::new();
        io::write_path(&mut buf, &h).unwrap();
        let back = io::read_path(buf.as_slice()).unwrap();
        assert_eq!(back, h);
        let r = verify_theorem2(&back, 0.7, 2.0).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.empirical_constant < r.parameters["C"]);
        paths.push(back);
    }
    let r = embedding_ratio_experiment(&paths, NormSpec::Besov { delta: 0.7, p: 2.0 }, NormSpec::QVar { q: 1.0 / 0.7 })
        .unwrap();
    assert!(r.empirical_constant.is_finite() && r.empirical_constant > 0.0);
}

#[test]
fn level2_lift_of_cm_path_converges_under_refinement() {
    let gs = standard_normal_corpus(16, 2, 9).unwrap();
    let endpoint = |steps: usize| -> GroupElement {
        let grid = TimeGrid::uniform(steps).unwrap();
        let x = cm_path_from_l2(&gs[0], 0.25, &grid).unwrap();
        let y = cm_path_from_l2(&gs[1], 0.25, &grid).unwrap();
        let values = x.values().iter().zip(y.values()).flat_map(|(a, b)| [*a, *b]).collect();
        let h = SampledPath::new(grid, MetricSpec::Euclidean(2), values).unwrap();
        let lift = level2_lift(&h, 1.5).unwrap();
        lift.element(lift.len() - 1)
    };
    let ends: Vec<GroupElement> = [32, 64, 128, 256, 512].into_iter().map(endpoint).collect();
    let diffs: Vec<f64> = ends.windows(2).map(|w| w[0].max_abs_diff(&w[1])).collect();
    for w in diffs.windows(2) {
        assert!(w[1] < w[0], "{diffs:?}");
    }
    assert!(diffs[diffs.len() - 1] < 1e-2 * ends[4].max_abs(), "{diffs:?}");
    assert!(ends[4].geometric_defect() < 1e-12);
}

#[test]
fn young_integral_of_cm_paths_obeys_besov_bound() {
    let corpus = standard_normal_corpus(16, 4, 21).unwrap();
    let grid = TimeGrid::uniform(32).unwrap();
    let f = cm_path_from_l2(&corpus[0], 0.25, &grid).unwrap();
    let g = cm_path_from_l2(&corpus[1], 0.25, &grid).unwrap();
    let yi = young_integral(&f, &g, 1.4, 1.4).unwrap();
    assert!(yi.value[0].is_finite());
    for a in 0..grid.len() {
        for b in a + 1..grid.len() {
            let iv = Interval::from_indices(&grid, a, b);
            let r = young_remainder(&f, &g, iv).unwrap();
            let bound = young_besov_bound(&f, &g, 0.7, iv).unwrap();
            assert!(r <= bound, "[{a},{b}] {r} > {bound}");
        }
    }
}

#[test]
fn enhanced_bm_paths_satisfy_theorem2() {
    for r in 0..3 {
        let b = enhanced_bm_replica(2, 64, 17, r).unwrap().into_path();
        let rep = verify_theorem2(&b, 0.45, 12.0).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn levy_area_variance_matches_piecewise_linear_value() {
    // For the lift of a 2d random walk with n steps, E[L²] = (1 − 1/n)/4.
    for steps in [8usize, 64] {
        let reps = 4000;
        let mut sum = 0.0;
        let mut sum4 = 0.0;
        for r in 0..reps {
            let m = enhanced_bm_replica(2, steps, 33, r).unwrap().element(steps).m;
            let area = 0.5 * (m[1] - m[2]);
            sum += area * area;
            sum4 += area.powi(4);
        }
        let mean = sum / reps as f64;
        let se = ((sum4 / reps as f64 - mean * mean) / reps as f64).sqrt();
        let expected = 0.25 * (1.0 - 1.0 / steps as f64);
        assert!((mean - expected).abs() < 4.0 * se, "steps {steps}: {mean} vs {expected} ± {se}");
    }
}
