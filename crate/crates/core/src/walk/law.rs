//! Jump laws on `Z²`.

use std::ops::{Add, Neg, Sub};
use std::sync::{Arc, OnceLock};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Apéry's constant ζ(3).
pub const ZETA_3: f64 = 1.202_056_903_159_594_3;

/// Normalizing constant of the heavy axis law, `4·c·ζ(3) = 1`.
pub const HEAVY_AXIS_C: f64 = 1.0 / (4.0 * ZETA_3);

/// Largest magnitude covered by the exact tail table.
pub const HEAVY_TABLE_MAX: u64 = 1_000_000;

const NORMALIZATION_EPS: f64 = 1e-12;

/// A lattice point or lattice jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Site {
    pub x: i64,
    pub y: i64,
}

impl Site {
    pub const ORIGIN: Site = Site { x: 0, y: 0 };
    pub const E1: Site = Site { x: 1, y: 0 };
    pub const E2: Site = Site { x: 0, y: 1 };

    pub const fn new(x: i64, y: i64) -> Self {
        Site { x, y }
    }

    pub fn sup_norm(self) -> i64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn l1_norm(self) -> i64 {
        self.x.abs() + self.y.abs()
    }

    pub fn euclidean_norm(self) -> f64 {
        (self.x as f64).hypot(self.y as f64)
    }
}

impl Add for Site {
    type Output = Site;
    fn add(self, o: Site) -> Site {
        Site::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Site {
    type Output = Site;
    fn sub(self, o: Site) -> Site {
        Site::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        Site::new(-self.x, -self.y)
    }
}

/// The four unit jumps in the canonical order `+e₁, −e₁, +e₂, −e₂`.
pub const UNIT_JUMPS: [Site; 4] = [Site::new(1, 0), Site::new(-1, 0), Site::new(0, 1), Site::new(0, -1)];

/// Finite-support law sampled by CDF lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteLaw {
    jumps: Vec<Site>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl FiniteLaw {
    pub fn new(entries: &[(Site, f64)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("jump table is empty".into()));
        }
        let mut jumps = Vec::with_capacity(entries.len());
        let mut probs = Vec::with_capacity(entries.len());
        for &(jump, p) in entries {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidArgument(format!("probability of jump {jump:?} must be positive, got {p}")));
            }
            if jumps.contains(&jump) {
                return Err(Error::InvalidArgument(format!("jump {jump:?} listed twice")));
            }
            jumps.push(jump);
            probs.push(p);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_EPS {
            return Err(Error::InvalidArgument(format!("jump probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(FiniteLaw { jumps, probs, cdf })
    }

    /// Law on the four unit jumps with probabilities in `UNIT_JUMPS` order.
    pub fn nearest_neighbour(probs: [f64; 4]) -> Result<Self> {
        let entries: Vec<_> = UNIT_JUMPS.iter().copied().zip(probs).collect();
        Self::new(&entries)
    }

    pub fn simple_symmetric() -> Self {
        Self::nearest_neighbour([0.25; 4]).expect("uniform table is valid")
    }

    pub fn entries(&self) -> impl Iterator<Item = (Site, f64)> + '_ {
        self.jumps.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn min_probability(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn probability(&self, jump: Site) -> f64 {
        self.jumps.iter().position(|&j| j == jump).map_or(0.0, |i| self.probs[i])
    }

    pub fn support_radius(&self) -> i64 {
        self.jumps.iter().map(|j| j.sup_norm()).max().unwrap_or(0)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Site {
        let u: f64 = rng.random();
        for (i, &c) in self.cdf.iter().enumerate() {
            if u < c {
                return self.jumps[i];
            }
        }
        // Rounding in the last cumulative value.
        *self.jumps.last().unwrap()
    }
}

/// `P(jump = ±m·eᵢ) = c/m³` for `m ≥ 1`, `i ∈ {1, 2}`.
///
/// Sampling inverts the magnitude survival function `T_m = P(|X| ≥ m)`,
/// tabulated exactly up to [`HEAVY_TABLE_MAX`]; beyond it the Euler–Maclaurin
/// tail `4c(1/(2m²) + 1/(2m³) + 1/(4m⁴))` is inverted instead, which affects
/// a probability mass of about `2c·10⁻¹²` per step.
#[derive(Debug, Clone)]
pub struct HeavyAxisLaw {
    survival: Arc<Vec<f64>>,
}

impl PartialEq for HeavyAxisLaw {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

fn euler_maclaurin_tail(m: f64) -> f64 {
    // Σ_{k ≥ m} k⁻³
    1.0 / (2.0 * m * m) + 1.0 / (2.0 * m * m * m) + 1.0 / (4.0 * m * m * m * m)
}

fn survival_table() -> Arc<Vec<f64>> {
    static TABLE: OnceLock<Arc<Vec<f64>>> = OnceLock::new();
    TABLE
        .get_or_init(|| {
            let n = HEAVY_TABLE_MAX as usize;
            let mut t = vec![0.0; n + 2];
            let mut s = euler_maclaurin_tail((n + 1) as f64);
            t[n + 1] = 4.0 * HEAVY_AXIS_C * s;
            for m in (1..=n).rev() {
                let mf = m as f64;
                s += 1.0 / (mf * mf * mf);
                t[m] = 4.0 * HEAVY_AXIS_C * s;
            }
            t[1] = 1.0;
            t[0] = 1.0;
            Arc::new(t)
        })
        .clone()
}

impl HeavyAxisLaw {
    pub fn new() -> Self {
        HeavyAxisLaw { survival: survival_table() }
    }

    pub fn constant(&self) -> f64 {
        HEAVY_AXIS_C
    }

    /// `P(|X| ≥ m)`.
    pub fn magnitude_survival(&self, m: u64) -> f64 {
        if m <= HEAVY_TABLE_MAX + 1 {
            self.survival[m as usize]
        } else {
            4.0 * HEAVY_AXIS_C * euler_maclaurin_tail(m as f64)
        }
    }

    pub fn probability(&self, jump: Site) -> f64 {
        let m = match (jump.x, jump.y) {
            (0, 0) => return 0.0,
            (x, 0) => x.unsigned_abs(),
            (0, y) => y.unsigned_abs(),
            _ => return 0.0,
        };
        let m = m as f64;
        HEAVY_AXIS_C / (m * m * m)
    }

    /// Magnitude `m ≥ 1` with `T_{m+1} < u ≤ T_m`.
    pub fn magnitude_for(&self, u: f64) -> u64 {
        let t = &self.survival;
        for m in 1..16usize {
            if u > t[m + 1] {
                return m as u64;
            }
        }
        let last = HEAVY_TABLE_MAX as usize + 1;
        if u > t[last] {
            // Entries 16..=last; count those ≥ u.
            let ge = t[16..=last].partition_point(|&v| v >= u);
            return (15 + ge) as u64;
        }
        let tail = |m: f64| 4.0 * HEAVY_AXIS_C * euler_maclaurin_tail(m);
        let mut m = (2.0 * HEAVY_AXIS_C / u).sqrt().floor().max(last as f64);
        while tail(m + 1.0) >= u {
            m += 1.0;
        }
        while m > last as f64 && tail(m) < u {
            m -= 1.0;
        }
        m as u64
    }

    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Site {
        let bits = rng.next_u64();
        let u = ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let m = self.magnitude_for(u) as i64;
        match bits & 3 {
            0 => Site::new(m, 0),
            1 => Site::new(-m, 0),
            2 => Site::new(0, m),
            _ => Site::new(0, -m),
        }
    }
}

impl Default for HeavyAxisLaw {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    Finite(FiniteLaw),
    HeavyAxis(HeavyAxisLaw),
}

impl JumpLaw {
    pub fn ssrw() -> Self {
        JumpLaw::Finite(FiniteLaw::simple_symmetric())
    }

    pub fn heavy_axis() -> Self {
        JumpLaw::HeavyAxis(HeavyAxisLaw::new())
    }

    pub fn probability(&self, jump: Site) -> f64 {
        match self {
            JumpLaw::Finite(l) => l.probability(jump),
            JumpLaw::HeavyAxis(l) => l.probability(jump),
        }
    }

    pub fn as_finite(&self) -> Option<&FiniteLaw> {
        match self {
            JumpLaw::Finite(l) => Some(l),
            JumpLaw::HeavyAxis(_) => None,
        }
    }

    /// True when every jump changes the parity of `x + y`, so returns to the
    /// origin happen only at even times.
    pub fn is_bipartite(&self) -> bool {
        match self {
            JumpLaw::Finite(l) => l.jumps.iter().all(|j| (j.x + j.y).rem_euclid(2) == 1),
            JumpLaw::HeavyAxis(_) => false,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Site {
        match self {
            JumpLaw::Finite(l) => l.sample(rng),
            JumpLaw::HeavyAxis(l) => l.sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn zeta3_matches_partial_sums() {
        // Backward partial sum to 10⁷; the omitted tail is below 5·10⁻¹⁵.
        let n = 10_000_000u64;
        let mut s = 0.0;
        for k in (1..=n).rev() {
            let k = k as f64;
            s += 1.0 / (k * k * k);
        }
        s += 1.0 / (2.0 * (n as f64).powi(2));
        assert!((s - ZETA_3).abs() < 1e-14, "{s}");
        assert!((HEAVY_AXIS_C - 1.0 / (4.0 * s)).abs() < 1e-14);
        assert!((HEAVY_AXIS_C - 0.207_985).abs() < 1e-5);
        assert!((4.0 * HEAVY_AXIS_C * ZETA_3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_law_shape() {
        let law = HeavyAxisLaw::new();
        assert!((law.probability(Site::E1) - HEAVY_AXIS_C).abs() < 1e-15);
        assert_eq!(law.probability(Site::new(2, 0)) / law.probability(Site::E1), 0.125);
        assert_eq!(law.probability(Site::new(1, 1)), 0.0);
        // Survival table agrees with direct tail sums.
        for m in [1u64, 2, 3, 10, 1000] {
            let direct: f64 = (m..m + 2_000_000).rev().map(|k| 4.0 * HEAVY_AXIS_C / (k as f64).powi(3)).sum::<f64>()
                + 4.0 * HEAVY_AXIS_C * euler_maclaurin_tail((m + 2_000_000) as f64);
            assert!((law.magnitude_survival(m) - direct).abs() < 1e-13, "m = {m}");
        }
        // Continuity across the end of the table.
        let edge = HEAVY_TABLE_MAX + 1;
        let table = law.magnitude_survival(edge);
        let analytic = 4.0 * HEAVY_AXIS_C * euler_maclaurin_tail(edge as f64);
        assert!((table - analytic).abs() / analytic < 1e-12);
    }

    #[test]
    fn inverse_cdf_brackets() {
        let law = HeavyAxisLaw::new();
        for &u in &[1.0, 0.9, 0.5, 0.2, 0.1681, 0.05, 1e-3, 1e-6, 1e-9, 2.0e-12, 1e-14, 1.2e-16] {
            let m = law.magnitude_for(u);
            assert!(m >= 1);
            assert!(law.magnitude_survival(m) >= u, "u = {u}, m = {m}");
            assert!(law.magnitude_survival(m + 1) < u, "u = {u}, m = {m}");
        }
    }

    #[test]
    fn heavy_tail_frequency_matches_exact_sum() {
        let law = HeavyAxisLaw::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        let mut over10 = 0u64;
        let mut dirs = [0u64; 4];
        let mut sum = (0i64, 0i64);
        let mut sumsq = (0.0f64, 0.0f64);
        for _ in 0..n {
            let j = law.sample(&mut rng);
            let i = UNIT_JUMPS.iter().position(|u| u.x == j.x.signum() && u.y == j.y.signum()).unwrap();
            dirs[i] += 1;
            sum = (sum.0 + j.x, sum.1 + j.y);
            sumsq = (sumsq.0 + (j.x * j.x) as f64, sumsq.1 + (j.y * j.y) as f64);
            if j.sup_norm() > 10 {
                over10 += 1;
            }
        }
        // Exact tail oracle Σ_{k>10} 4c/k³.
        let exact: f64 = (11..2_000_000u64).map(|k| 4.0 * HEAVY_AXIS_C / (k as f64).powi(3)).sum();
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((over10 as f64 / n as f64 - exact).abs() < 3.0 * se);
        let se_dir = (0.25 * 0.75 / n as f64).sqrt();
        for d in dirs {
            assert!((d as f64 / n as f64 - 0.25).abs() < 3.0 * se_dir);
        }
        // Infinite variance, but the law is in the normal domain of
        // attraction, so the self-normalized mean is asymptotically N(0, 1).
        for (s, sq) in [(sum.0, sumsq.0), (sum.1, sumsq.1)] {
            let sd = (sq / n as f64).sqrt();
            assert!((s as f64 / n as f64).abs() < 3.0 * sd / (n as f64).sqrt());
        }
    }

    #[test]
    fn finite_table_chi_square() {
        let law = FiniteLaw::new(&[
            (Site::new(1, 0), 0.4),
            (Site::new(-1, 0), 0.1),
            (Site::new(0, 1), 0.3),
            (Site::new(0, -1), 0.15),
            (Site::new(2, 2), 0.05),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 1_000_000;
        let mut counts = vec![0u64; 5];
        let entries: Vec<_> = law.entries().collect();
        for _ in 0..n {
            let j = law.sample(&mut rng);
            counts[entries.iter().position(|e| e.0 == j).unwrap()] += 1;
        }
        let chi2: f64 = entries
            .iter()
            .zip(&counts)
            .map(|(&(_, p), &c)| {
                let e = p * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        let p_value = 1.0 - ChiSquared::new(4.0).unwrap().cdf(chi2);
        assert!(p_value > 0.001, "chi2 = {chi2}, p = {p_value}");
    }

    #[test]
    fn ssrw_moments() {
        let law = FiniteLaw::simple_symmetric();
        let total: f64 = law.entries().map(|(_, p)| p).sum();
        assert_eq!(total, 1.0);
        let mean_x: f64 = law.entries().map(|(j, p)| j.x as f64 * p).sum();
        let var_x: f64 = law.entries().map(|(j, p)| (j.x * j.x) as f64 * p).sum();
        assert_eq!(mean_x, 0.0);
        assert_eq!(var_x, 0.5);
        assert!(JumpLaw::ssrw().is_bipartite());
        assert!(!JumpLaw::heavy_axis().is_bipartite());
    }

    #[test]
    fn invalid_tables() {
        assert!(FiniteLaw::nearest_neighbour([0.5, 0.5, 0.0, 0.0]).is_err());
        assert!(FiniteLaw::nearest_neighbour([0.3, 0.3, 0.3, 0.3]).is_err());
        assert!(FiniteLaw::new(&[(Site::E1, 0.5), (Site::E1, 0.5)]).is_err());
    }
}
