use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PlanarVector;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Compensated) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// First and second raw moments of `D`-dimensional samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<const D: usize> {
    count: u64,
    sum: [Compensated; D],
    outer: [[Compensated; D]; D],
}

impl<const D: usize> Default for Moments<D> {
    fn default() -> Self {
        Moments { count: 0, sum: [Compensated::default(); D], outer: [[Compensated::default(); D]; D] }
    }
}

impl<const D: usize> Moments<D> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: [f64; D]) {
        self.count += 1;
        for i in 0..D {
            self.sum[i].add(x[i]);
            for j in i..D {
                self.outer[i][j].add(x[i] * x[j]);
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        for i in 0..D {
            self.sum[i].merge(&other.sum[i]);
            for j in i..D {
                self.outer[i][j].merge(&other.outer[i][j]);
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i].value() / self.count as f64
    }

    /// Unbiased sample covariance of coordinates `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> Result<f64> {
        if self.count < 2 {
            return Err(Error::InsufficientData(format!("covariance needs at least 2 samples, got {}", self.count)));
        }
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.count as f64;
        let mut c = self.outer[i][j];
        c.add(-self.sum[i].value() * self.sum[j].value() / n);
        Ok(c.value() / (n - 1.0))
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl CovarianceMatrix {
    pub fn diagonal(a: f64, b: f64) -> Self {
        CovarianceMatrix { xx: a, xy: 0.0, yy: b }
    }

    /// Builds from a full matrix, rejecting asymmetry beyond 1e-12.
    pub fn from_rows(m: [[f64; 2]; 2]) -> Result<Self> {
        if (m[0][1] - m[1][0]).abs() > 1e-12 * (1.0 + m[0][1].abs()) {
            return Err(Error::InvalidArgument(format!("matrix {m:?} is not symmetric")));
        }
        Ok(CovarianceMatrix { xx: m[0][0], xy: 0.5 * (m[0][1] + m[1][0]), yy: m[1][1] })
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn determinant(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = 0.5 * (self.xx + self.yy);
        let d = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        [m - d, m + d]
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.eigenvalues()[0] >= -tol
    }

    pub fn scaled(&self, s: f64) -> Self {
        CovarianceMatrix { xx: self.xx * s, xy: self.xy * s, yy: self.yy * s }
    }

    /// Largest entrywise difference from `reference`, relative to the
    /// reference's largest diagonal entry.
    pub fn relative_deviation(&self, reference: &CovarianceMatrix) -> f64 {
        let scale = reference.xx.abs().max(reference.yy.abs());
        let d = (self.xx - reference.xx).abs().max((self.xy - reference.xy).abs()).max((self.yy - reference.yy).abs());
        d / scale
    }

    /// `|xy|` relative to the smaller diagonal entry.
    pub fn off_diagonal_ratio(&self) -> f64 {
        self.xy.abs() / self.xx.abs().min(self.yy.abs())
    }
}

/// Mergeable per-ensemble accumulator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnsembleSummary {
    endpoints: Moments<2>,
    /// Number of returns → number of trajectories.
    pub return_counts: BTreeMap<u64, u64>,
    /// First-return index → number of trajectories; trajectories without a
    /// return are not listed.
    pub first_returns: BTreeMap<u64, u64>,
    /// `⌊4·log₂ m⌋` → count, for positive magnitudes `m`.
    pub magnitude_bins: BTreeMap<i64, u64>,
}

impl EnsembleSummary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.endpoints.count()
    }

    pub fn moments(&self) -> &Moments<2> {
        &self.endpoints
    }

    pub fn push_endpoint(&mut self, p: PlanarVector) {
        self.endpoints.push([p.x, p.y]);
    }

    pub fn push_returns(&mut self, returns: u64, first: Option<u64>) {
        *self.return_counts.entry(returns).or_default() += 1;
        if let Some(j) = first {
            *self.first_returns.entry(j).or_default() += 1;
        }
    }

    pub fn push_magnitude(&mut self, m: f64) {
        if m > 0.0 && m.is_finite() {
            *self.magnitude_bins.entry((4.0 * m.log2()).floor() as i64).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: &EnsembleSummary) {
        self.endpoints.merge(&other.endpoints);
        for (k, v) in &other.return_counts {
            *self.return_counts.entry(*k).or_default() += v;
        }
        for (k, v) in &other.first_returns {
            *self.first_returns.entry(*k).or_default() += v;
        }
        for (k, v) in &other.magnitude_bins {
            *self.magnitude_bins.entry(*k).or_default() += v;
        }
    }

    pub fn mean(&self) -> PlanarVector {
        PlanarVector::new(self.endpoints.mean(0), self.endpoints.mean(1))
    }
}

/// Unbiased sample covariance of the recorded endpoints.
pub fn endpoint_covariance(summary: &EnsembleSummary) -> Result<CovarianceMatrix> {
    let m = &summary.endpoints;
    Ok(CovarianceMatrix { xx: m.covariance(0, 0)?, xy: m.covariance(0, 1)?, yy: m.covariance(1, 1)? })
}

/// Joint moments of `(L(s), L(t))` over an ensemble of scaled paths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FddSummary {
    moments: Moments<4>,
}

impl FddSummary {
    pub fn push(&mut self, at_s: PlanarVector, at_t: PlanarVector) {
        self.moments.push([at_s.x, at_s.y, at_t.x, at_t.y]);
    }

    pub fn merge(&mut self, other: &FddSummary) {
        self.moments.merge(&other.moments);
    }

    pub fn count(&self) -> u64 {
        self.moments.count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FddCovariance {
    pub s: f64,
    pub t: f64,
    pub cov_s: CovarianceMatrix,
    pub cov_t: CovarianceMatrix,
    /// `E[(L(s) − m_s)(L(t) − m_t)ᵀ]`, row index from `L(s)`.
    pub cross: [[f64; 2]; 2],
    /// `(s/t)·Cov(L(t))`, the Brownian prediction for `cross`.
    pub predicted_cross: CovarianceMatrix,
}

impl FddCovariance {
    /// Largest entrywise gap between `cross` and `reference`, relative to the
    /// reference's largest diagonal entry.
    pub fn cross_deviation(&self, reference: &CovarianceMatrix) -> f64 {
        let r = reference.rows();
        let scale = reference.xx.abs().max(reference.yy.abs());
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.cross[i][j] - r[i][j]).abs());
            }
        }
        d / scale
    }
}

pub const FDD_MIN_ENSEMBLE: u64 = 10_000;

pub fn fdd_covariance(summary: &FddSummary, s: f64, t: f64) -> Result<FddCovariance> {
    if !(s > 0.0 && s <= t && t <= 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 < s ≤ t ≤ 1, got s = {s}, t = {t}")));
    }
    if summary.count() < FDD_MIN_ENSEMBLE {
        return Err(Error::InsufficientData(format!(
            "fdd covariance needs at least {FDD_MIN_ENSEMBLE} paths, got {}",
            summary.count()
        )));
    }
    let m = &summary.moments;
    let cov = |i, j| m.covariance(i, j);
    let cov_s = CovarianceMatrix { xx: cov(0, 0)?, xy: cov(0, 1)?, yy: cov(1, 1)? };
    let cov_t = CovarianceMatrix { xx: cov(2, 2)?, xy: cov(2, 3)?, yy: cov(3, 3)? };
    let cross = [[cov(0, 2)?, cov(0, 3)?], [cov(1, 2)?, cov(1, 3)?]];
    Ok(FddCovariance { s, t, cov_s, cov_t, cross, predicted_cross: cov_t.scaled(s / t) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn summary_from(points: &[(f64, f64)], returns: &[(u64, Option<u64>)]) -> EnsembleSummary {
        let mut s = EnsembleSummary::new();
        for &(x, y) in points {
            s.push_endpoint(PlanarVector::new(x, y));
            s.push_magnitude((x * x + y * y).sqrt());
        }
        for &(r, f) in returns {
            s.push_returns(r, f);
        }
        s
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
    }

    fn summaries_agree(a: &EnsembleSummary, b: &EnsembleSummary) -> bool {
        if a.count() != b.count()
            || a.return_counts != b.return_counts
            || a.first_returns != b.first_returns
            || a.magnitude_bins != b.magnitude_bins
        {
            return false;
        }
        for i in 0..2 {
            if !close(a.endpoints.sum[i].value(), b.endpoints.sum[i].value()) {
                return false;
            }
            for j in i..2 {
                if !close(a.endpoints.outer[i][j].value(), b.endpoints.outer[i][j].value()) {
                    return false;
                }
            }
        }
        true
    }

    fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 0..50)
    }

    fn returns() -> impl Strategy<Value = Vec<(u64, Option<u64>)>> {
        prop::collection::vec((0u64..5, prop::option::of(1u64..20)), 0..10)
    }

    proptest! {
        #[test]
        fn merge_associative(a in points(), b in points(), c in points(), ra in returns(), rb in returns(), rc in returns()) {
            let (sa, sb, sc) = (summary_from(&a, &ra), summary_from(&b, &rb), summary_from(&c, &rc));
            let mut left = sa.clone();
            left.merge(&sb);
            left.merge(&sc);
            let mut bc = sb.clone();
            bc.merge(&sc);
            let mut right = sa.clone();
            right.merge(&bc);
            prop_assert!(summaries_agree(&left, &right));
        }

        #[test]
        fn merge_commutative(a in points(), b in points(), ra in returns(), rb in returns()) {
            let (sa, sb) = (summary_from(&a, &ra), summary_from(&b, &rb));
            let mut ab = sa.clone();
            ab.merge(&sb);
            let mut ba = sb.clone();
            ba.merge(&sa);
            prop_assert!(summaries_agree(&ab, &ba));
        }

        #[test]
        fn covariance_equivariance(a in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..60)) {
            let c = endpoint_covariance(&summary_from(&a, &[])).unwrap();
            let swapped: Vec<_> = a.iter().map(|&(x, y)| (y, x)).collect();
            let cs = endpoint_covariance(&summary_from(&swapped, &[])).unwrap();
            let tol = 1e-9 * (1.0 + c.trace().abs());
            prop_assert!((c.xx - cs.yy).abs() < tol && (c.yy - cs.xx).abs() < tol && (c.xy - cs.xy).abs() < tol);
            let flipped: Vec<_> = a.iter().map(|&(x, y)| (-x, y)).collect();
            let cf = endpoint_covariance(&summary_from(&flipped, &[])).unwrap();
            prop_assert!((c.xx - cf.xx).abs() < tol && (c.yy - cf.yy).abs() < tol && (c.xy + cf.xy).abs() < tol);
            prop_assert!(c.is_positive_semidefinite(tol));
        }
    }

    #[test]
    fn parallel_and_serial_aggregation_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<(f64, f64)> = (0..100_000).map(|_| (rng.random::<f64>() * 1e3 - 400.0, rng.random::<f64>() - 0.5)).collect();
        let serial = summary_from(&pts, &[]);
        let mut chunked = EnsembleSummary::new();
        for chunk in pts.chunks(977).rev() {
            chunked.merge(&summary_from(chunk, &[]));
        }
        let a = endpoint_covariance(&serial).unwrap();
        let b = endpoint_covariance(&chunked).unwrap();
        for (x, y) in [(a.xx, b.xx), (a.xy, b.xy), (a.yy, b.yy)] {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()));
        }
    }

    #[test]
    fn covariance_of_constant_points_is_zero() {
        let s = summary_from(&[(0.5, -1.25); 10], &[]);
        let c = endpoint_covariance(&s).unwrap();
        assert_eq!(c.rows(), [[0.0, 0.0], [0.0, 0.0]]);
        assert!(matches!(endpoint_covariance(&summary_from(&[(1.0, 1.0)], &[])), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn covariance_matches_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<(f64, f64)> = (0..1000).map(|_| (rng.random::<f64>() + 3.0, 2.0 * rng.random::<f64>())).collect();
        let c = endpoint_covariance(&summary_from(&pts, &[])).unwrap();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let xy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / (n - 1.0);
        let xx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((c.xy - xy).abs() < 1e-12 && (c.xx - xx).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_and_symmetry() {
        let c = CovarianceMatrix::from_rows([[2.0, 1.0], [1.0, 2.0]]).unwrap();
        assert_eq!(c.eigenvalues(), [1.0, 3.0]);
        assert!(CovarianceMatrix::from_rows([[1.0, 0.5], [0.4, 1.0]]).is_err());
        assert!(!CovarianceMatrix::from_rows([[1.0, 2.0], [2.0, 1.0]]).unwrap().is_positive_semidefinite(1e-12));
    }

    #[test]
    fn fdd_equal_times_gives_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut f = FddSummary::default();
        for _ in 0..10_000 {
            let p = PlanarVector::new(rng.random(), rng.random());
            f.push(p, p);
        }
        let r = fdd_covariance(&f, 1.0, 1.0).unwrap();
        assert_eq!(r.cross, r.cov_t.rows());
        assert_eq!(r.cov_s, r.cov_t);
        assert!(fdd_covariance(&f, 0.7, 0.5).is_err());
    }

    #[test]
    fn fdd_brownian_cross_covariance() {
        // Discrete Brownian path sampled at s = 0.5 and t = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let normal = rand_distr::StandardNormal;
        let mut f = FddSummary::default();
        let mut shuffled_s = Vec::new();
        for _ in 0..40_000 {
            let a = PlanarVector::new(rng.sample::<f64, _>(normal), rng.sample::<f64, _>(normal)) * 0.5f64.sqrt();
            let b = PlanarVector::new(rng.sample::<f64, _>(normal), rng.sample::<f64, _>(normal)) * 0.5f64.sqrt();
            f.push(a, a + b);
            shuffled_s.push((a, a + b));
        }
        let r = fdd_covariance(&f, 0.5, 1.0).unwrap();
        assert!(r.cross_deviation(&CovarianceMatrix::diagonal(0.5, 0.5)) < 0.05);
        assert!(r.cross_deviation(&r.predicted_cross) < 0.05);
        // Shuffling the t-values across the ensemble keeps the s-marginal.
        let mut g = FddSummary::default();
        let n = shuffled_s.len();
        for i in 0..n {
            g.push(shuffled_s[i].0, shuffled_s[(i * 7919 + 13) % n].1);
        }
        let rs = fdd_covariance(&g, 0.5, 1.0).unwrap();
        assert_eq!(rs.cov_s, r.cov_s);
        assert!(rs.cross[0][0].abs() < 0.05 && rs.cross[1][1].abs() < 0.05);
    }
}
