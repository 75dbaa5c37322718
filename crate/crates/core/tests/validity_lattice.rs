use longmem_gp::pd_analysis::{
    classify, gram, gram_unchecked, psd_certificate, witness_grid, Regime, TimeGrid,
};
use longmem_gp::kernels::FamilySpec;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_grid(rng: &mut StdRng, m: usize) -> TimeGrid {
    let pts: Vec<f64> = (0..m).map(|_| rng.gen_range(1e-3..=10.0)).collect();
    TimeGrid::from_unsorted(pts).unwrap()
}

// 41 points per axis over (−1, 3] × (−1, 1.5]
fn lattice() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..=41 {
        for j in 1..=41 {
            out.push((-1.0 + 4.0 * i as f64 / 41.0, -1.0 + 2.5 * j as f64 / 41.0));
        }
    }
    out
}

#[test]
fn classification_agrees_with_psd_on_lattice() {
    let mut rng = StdRng::seed_from_u64(7);
    let mut mismatches = Vec::new();
    for (a, b) in lattice() {
        let spec = FamilySpec::Wfbm { a, b };
        let verdict = classify(&spec);
        let grid = random_grid(&mut rng, 20);
        if verdict.is_valid() {
            let cert = psd_certificate(&gram(&spec, &grid).unwrap(), 1e-8).unwrap();
            if !cert.pass {
                mismatches.push((a, b, "valid point failed", cert.equilibrated_min_eigenvalue));
            }
        } else {
            assert_ne!(verdict.regime, Regime::NonIntegrable);
            let w = verdict.witness.unwrap_or_else(|| panic!("no witness at ({a}, {b})"));
            assert!(w.defect > 0.0);
            let grid = grid.merged(&witness_grid(a, b).unwrap()).unwrap();
            let cert = psd_certificate(&gram_unchecked(&spec, &grid).unwrap(), 1e-8).unwrap();
            if cert.pass {
                mismatches.push((a, b, "invalid point passed", cert.equilibrated_min_eigenvalue));
            }
        }
    }
    assert!(mismatches.is_empty(), "{} mismatches: {:?}", mismatches.len(), mismatches);
}
