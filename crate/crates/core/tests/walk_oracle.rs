use lorentz_core::stats::{exact_distribution, LatticeDistribution};
use lorentz_core::streams::stream;
use lorentz_core::walk::{simulate_walk_with, FiniteLaw, JumpLaw, Site, WalkSpec};
use proptest::prelude::*;
use std::collections::HashMap;

/// Compares empirical laws of `S_2`, `S_4`, `S_8` with the exact convolution
/// on `|x|∞ ≤ 4`, at 3 binomial standard errors.
fn check_against_exact(law: FiniteLaw, seed: u64) {
    let runs = 1_000_000u64;
    let spec = WalkSpec::translation_invariant(JumpLaw::Finite(law.clone()));
    let times = [2usize, 4, 8];
    let mut counts: Vec<HashMap<Site, u64>> = vec![HashMap::new(); 3];
    for i in 0..runs {
        let path = simulate_walk_with(&spec, 8, stream(seed, i));
        for (c, &n) in counts.iter_mut().zip(&times) {
            *c.entry(path.sites[n]).or_default() += 1;
        }
    }
    for (c, &n) in counts.iter().zip(&times) {
        let exact: LatticeDistribution = exact_distribution(&law, n as u64).unwrap();
        for x in -4..=4 {
            for y in -4..=4 {
                let s = Site::new(x, y);
                let p = exact.probability(s);
                let hat = *c.get(&s).unwrap_or(&0) as f64 / runs as f64;
                let se = (p * (1.0 - p) / runs as f64).sqrt();
                if p == 0.0 {
                    assert_eq!(hat, 0.0, "n = {n}, x = {s:?}");
                } else {
                    assert!((hat - p).abs() <= 3.0 * se, "n = {n}, x = {s:?}: {hat} vs {p}");
                }
            }
        }
    }
}

#[test]
fn ssrw_matches_exact_law() {
    check_against_exact(FiniteLaw::simple_symmetric(), 1);
}

#[test]
fn biased_law_matches_exact_law() {
    check_against_exact(FiniteLaw::nearest_neighbour([0.4, 0.2, 0.3, 0.1]).unwrap(), 2);
}

proptest! {
    #[test]
    fn finite_laws_normalize(w in prop::collection::vec(0.01..1.0f64, 4)) {
        let total: f64 = w.iter().sum();
        let p = [w[0] / total, w[1] / total, w[2] / total, w[3] / total];
        let law = FiniteLaw::nearest_neighbour(p).unwrap();
        let sum: f64 = law.entries().map(|e| e.1).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(FiniteLaw::nearest_neighbour([p[0] + 1e-6, p[1], p[2], p[3]]).is_err());
    }
}

#[test]
fn llt_estimate_matches_exact_return_probability() {
    let n = 100u64;
    let runs = 100_000u64;
    let spec = WalkSpec::translation_invariant(JumpLaw::ssrw());
    let ends: Vec<Site> = (0..runs).map(|i| simulate_walk_with(&spec, n, stream(44, i)).endpoint()).collect();
    let est = lorentz_core::stats::llt_origin_estimate(&ends, n, true).unwrap();
    let exact = lorentz_core::stats::exact_return_law(&FiniteLaw::simple_symmetric(), n).unwrap()[n as usize];
    let se = (exact * (1.0 - exact) / runs as f64).sqrt() * n as f64;
    assert!((est.value - n as f64 * exact).abs() < 4.0 * se, "{} vs {}", est.value, n as f64 * exact);
    assert!((est.standard_error - se).abs() < 0.2 * se);
    assert!(lorentz_core::stats::llt_origin_estimate(&ends, n + 1, true).is_err());
}
