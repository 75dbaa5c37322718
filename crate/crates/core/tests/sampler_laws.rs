use longmem_gp::kernels::{cov, FamilySpec};
use longmem_gp::pd_analysis::TimeGrid;
use longmem_gp::sampling::{
    sample, sample_nsfbm_odd_integrated, sample_sfbm_even, sample_wfbm_b1, PathEnsemble,
};

const N: usize = 20_000;

fn grid() -> TimeGrid {
    TimeGrid::new(vec![0.2, 0.4, 0.6, 0.8, 1.0]).unwrap()
}

// fraction of pairs whose empirical covariances agree within 3 pooled
// standard errors plus `allowance`
fn agreement(x: &PathEnsemble, y: &PathEnsemble, spec: &FamilySpec, allowance: f64) -> f64 {
    let g = x.grid.points();
    let m = g.len();
    let (ex, ey) = (x.second_moments(), y.second_moments());
    let c = |i: usize, j: usize| cov(spec, g[i], g[j]).unwrap();
    let mut ok = 0;
    let mut total = 0;
    for i in 0..m {
        for j in i..m {
            let var = (c(i, i) * c(j, j) + c(i, j).powi(2)) / N as f64;
            let pooled = (2.0 * var).sqrt();
            total += 1;
            if (ex[(i, j)] - ey[(i, j)]).abs() <= 3.0 * pooled + allowance {
                ok += 1;
            }
        }
    }
    ok as f64 / total as f64
}

#[test]
fn even_part_matches_direct() {
    for h in [0.5, 1.0, 1.5] {
        let spec = FamilySpec::Sfbm { h };
        let a = sample(&spec, &grid(), N, 1).unwrap();
        let b = sample_sfbm_even(h, &grid(), N, 2).unwrap();
        let frac = agreement(&a, &b, &spec, 0.0);
        assert!(frac >= 0.95, "h = {h}: {frac}");
    }
}

#[test]
fn odd_part_matches_direct() {
    for h in [2.5, 3.0, 3.5] {
        let spec = FamilySpec::Nsfbm { h };
        let a = sample(&spec, &grid(), N, 1).unwrap();
        let b = sample_nsfbm_odd_integrated(h, &grid(), N, 2, 128).unwrap();
        let scale = cov(&spec, 1.0, 1.0).unwrap();
        let frac = agreement(&a, &b, &spec, 2e-2 * scale);
        assert!(frac >= 0.95, "h = {h}: {frac}");
    }
}

#[test]
fn variance_examples() {
    let one = TimeGrid::new(vec![1.0]).unwrap();
    let e = sample(&FamilySpec::Wfbm { a: 0.0, b: 0.0 }, &one, 100_000, 5).unwrap();
    let v = e.second_moments()[(0, 0)];
    assert!((v - 2.0).abs() <= 3.0 * 2.0 * (2.0 / 100_000f64).sqrt(), "{v}");

    let e = sample_sfbm_even(1.0, &one, N, 6).unwrap();
    let v = e.second_moments()[(0, 0)];
    assert!((v - 1.0).abs() <= 3.0 * (2.0 / N as f64).sqrt(), "{v}");

    let two = TimeGrid::new(vec![1.0, 2.0]).unwrap();
    let e = sample_nsfbm_odd_integrated(3.0, &two, N, 7, 64).unwrap();
    let s = e.second_moments();
    let se = |v: f64| v * (2.0 / N as f64).sqrt();
    assert!((s[(0, 0)] - 2.0).abs() <= 3.0 * se(2.0) + 1e-3, "{}", s[(0, 0)]);
    let se12 = ((2.0 * 16.0 + 25.0) / N as f64).sqrt();
    assert!((s[(0, 1)] - 5.0).abs() <= 3.0 * se12 + 1e-2, "{}", s[(0, 1)]);

    for (a, want) in [(0.0, 1.0), (1.0, 1.0 / 3.0)] {
        let e = sample_wfbm_b1(a, &one, N, 8, 64).unwrap();
        let v = e.second_moments()[(0, 0)];
        assert!((v - want).abs() <= 3.0 * se(want) + 1e-3, "a = {a}: {v}");
    }
}
