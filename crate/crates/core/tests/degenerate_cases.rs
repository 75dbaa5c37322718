use longmem_gp::kernels::{cov, FamilySpec};
use longmem_gp::pd_analysis::{classify, gram, psd_certificate, Degeneracy, Status, TimeGrid};
use longmem_gp::sampling::sample;

#[test]
fn h_two_is_the_zero_process() {
    for spec in [FamilySpec::Sfbm { h: 2.0 }, FamilySpec::Nsfbm { h: 2.0 }] {
        let v = classify(&spec);
        assert_eq!(v.status, Status::Valid);
        assert_eq!(v.degenerate, Some(Degeneracy::H2));
        assert_eq!(cov(&spec, 1.0, 3.0).unwrap(), 0.0);
    }
    for (spec, t) in [(FamilySpec::Sfbm { h: 2.0 - 1e-6 }, 3.0), (FamilySpec::Nsfbm { h: 2.0 + 1e-6 }, 3.0)] {
        assert!(cov(&spec, t, t).unwrap().abs() < 1e-5 * t * t);
    }
}

#[test]
fn h_four_is_rank_one() {
    let spec = FamilySpec::Nsfbm { h: 4.0 };
    assert_eq!(classify(&spec).degenerate, Some(Degeneracy::H4));
    let grid = TimeGrid::new(vec![0.5, 1.0, 2.0]).unwrap();
    let gm = gram(&spec, &grid).unwrap();
    for (i, &s) in grid.points().iter().enumerate() {
        for (j, &t) in grid.points().iter().enumerate() {
            assert_eq!(gm.entries[(i, j)], 12.0 * s * s * t * t);
        }
    }
    assert!(psd_certificate(&gm, 1e-8).unwrap().pass);
    // paths are proportional to t²
    let e = sample(&spec, &grid, 20, 5).unwrap();
    for i in 0..e.n {
        let p = e.path(i);
        assert!((p[1] - 4.0 * p[0]).abs() <= 1e-12 * p[1].abs().max(1.0));
        assert!((p[2] - 16.0 * p[0]).abs() <= 1e-12 * p[2].abs().max(1.0));
    }
}

#[test]
fn b_zero_and_fbm_half_reduce_to_brownian_shapes() {
    let w = FamilySpec::Wfbm { a: 0.0, b: 0.0 };
    assert_eq!(classify(&w).status, Status::Valid);
    assert!((cov(&w, 1.5, 4.0).unwrap() - 3.0).abs() < 1e-14);
    let bm = FamilySpec::Fbm { hurst: 0.5 };
    assert!((cov(&bm, 1.5, 4.0).unwrap() - 1.5).abs() < 1e-14);
}

#[test]
fn zero_time_gives_exact_zeros() {
    let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
    let e = sample(&FamilySpec::Eta, &grid, 10, 1).unwrap();
    assert!((0..e.n).all(|i| e.path(i)[0] == 0.0));
}
