use lorentz_core::geometry::{oracle, ray_disk_intersection, reflect, Disk, PlanarVector};
use lorentz_core::lorentz::{sample_initial, LorentzFlow, PhasePoint, Region, ScattererTable, DEFAULT_MAX_FLIGHT};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit() -> impl Strategy<Value = PlanarVector> {
    (0.0..std::f64::consts::TAU).prop_map(PlanarVector::from_angle)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn reflection_is_specular(v in unit(), n in unit()) {
        prop_assume!(v.dot(n) < -1e-6);
        let w = reflect(v, n).unwrap();
        prop_assert!((w.norm() - 1.0).abs() < 1e-12);
        prop_assert!((w.dot(n) + v.dot(n)).abs() < 1e-12);
        prop_assert!((w.cross(n) - v.cross(n)).abs() < 1e-12);
        prop_assert!(reflect(w, n).is_err());
    }

    #[test]
    fn intersection_lies_on_circle(
        ox in -3.0..3.0f64, oy in -3.0..3.0f64, d in unit(),
        cx in -1.0..1.0f64, cy in -1.0..1.0f64, r in 0.05..0.49f64,
    ) {
        let disk = Disk::new(PlanarVector::new(cx, cy), r).unwrap();
        let o = PlanarVector::new(ox, oy);
        prop_assume!((o - disk.center).norm() > r + 1e-6);
        match ray_disk_intersection(o, d, &disk).unwrap() {
            Some(t) => {
                let p = o + d * t;
                prop_assert!(((p - disk.center).norm() - r).abs() < 1e-10);
                let m = oracle::march_disk(o, d, &disk, 10.0).expect("oracle finds the crossing");
                prop_assert!((m - t).abs() < 1e-6);
            }
            None => {
                // Near-tangent rays may graze within the oracle's resolution.
                let miss = ((o - disk.center).cross(d)).abs() - r;
                if miss > 1e-9 || (o - disk.center).dot(d) > 0.0 {
                    prop_assert!(oracle::march_disk(o, d, &disk, 10.0).is_none());
                }
            }
        }
    }
}

fn chain(table: &ScattererTable, seed: u64, n: usize) -> (PhasePoint, Vec<lorentz_core::lorentz::TrajectoryEvent>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = sample_initial(table, &Region::unit_cell(), &mut rng).unwrap();
    let mut flow = LorentzFlow::new(table, init, DEFAULT_MAX_FLIGHT).unwrap();
    let events = (0..n).map(|_| flow.advance().unwrap().expect("finite horizon")).collect();
    (init, events)
}

#[test]
fn energy_is_conserved_along_chains() {
    let table = ScattererTable::finite_horizon_pair(0.4, 0.2).unwrap();
    let (_, events) = chain(&table, 8, 100_000);
    let drift = events.iter().map(|e| (e.v.norm() - 1.0).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-12, "{drift}");
}

#[test]
fn trajectories_are_time_reversible() {
    let table = ScattererTable::finite_horizon_pair(0.4, 0.2).unwrap();
    // Round-off grows by about an order of magnitude per collision, so the
    // check stays within ten collisions.
    for (seed, k) in (1u64..=12).zip([1usize, 2, 3, 5, 8, 10].into_iter().cycle()) {
        let (init, events) = chain(&table, seed, k);
        let last = events[k - 1];
        let incoming = if k >= 2 { events[k - 2].v } else { init.v };
        let mut back = LorentzFlow::resume(&table, PhasePoint { q: last.q, v: -incoming }, Some(last.disk), DEFAULT_MAX_FLIGHT);
        for j in (1..k).rev() {
            let ev = back.advance().unwrap().unwrap();
            assert!((ev.q - events[j - 1].q).norm() < 1e-6 * k as f64, "seed {seed}, step {j}");
        }
        let state = back.state();
        let q0 = state.q + state.v * events[0].flight;
        assert!((q0 - init.q).norm() < 1e-6 * k as f64, "seed {seed}");
        assert!((state.v + init.v).norm() < 1e-6 * k as f64);
    }
}
