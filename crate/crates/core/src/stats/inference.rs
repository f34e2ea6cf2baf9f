use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{Error, Result};
use crate::geometry::PlanarVector;
use crate::lorentz::CollisionTrajectory;
use crate::walk::{LatticePath, Site};

/// Return count and first return index of one trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub returns: u64,
    pub first_return: Option<u64>,
}

/// Streaming return counter: a return at index `j ≥ 1` is an entry into the
/// ball from outside it.
#[derive(Debug, Clone, Copy)]
pub struct ReturnCounter {
    inside: bool,
    stats: ReturnStats,
}

impl ReturnCounter {
    /// `inside0` says whether the state at index 0 lies in the ball.
    pub fn new(inside0: bool) -> Self {
        ReturnCounter { inside: inside0, stats: ReturnStats::default() }
    }

    #[inline]
    pub fn push(&mut self, j: u64, inside: bool) {
        if inside && !self.inside {
            self.stats.returns += 1;
            self.stats.first_return.get_or_insert(j);
        }
        self.inside = inside;
    }

    pub fn finish(self) -> ReturnStats {
        self.stats
    }
}

/// Returns of a state sequence to the closed ball of `radius` about the
/// origin.
pub fn return_statistics(states: impl IntoIterator<Item = PlanarVector>, radius: f64) -> ReturnStats {
    let mut it = states.into_iter();
    let inside = |p: PlanarVector| p.norm() <= radius;
    let Some(first) = it.next() else { return ReturnStats::default() };
    let mut c = ReturnCounter::new(inside(first));
    for (j, p) in it.enumerate() {
        c.push(j as u64 + 1, inside(p));
    }
    c.finish()
}

/// Radius 0 means the origin site itself.
pub fn lattice_returns(path: &LatticePath, radius: f64) -> ReturnStats {
    let inside = |s: Site| if radius == 0.0 { s == Site::ORIGIN } else { s.euclidean_norm() <= radius };
    let mut c = ReturnCounter::new(inside(path.sites[0]));
    for (j, s) in path.sites.iter().enumerate().skip(1) {
        c.push(j as u64, inside(*s));
    }
    c.finish()
}

pub fn lorentz_returns(traj: &CollisionTrajectory, radius: f64) -> Result<ReturnStats> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
    }
    Ok(return_statistics(traj.positions(), radius))
}

pub const KS_MIN_SAMPLES: usize = 1000;
const KS_CRITICAL_01: f64 = 1.628;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub count: usize,
    pub pass: bool,
}

/// One-sample Kolmogorov–Smirnov test against `N(0, variance)` at level
/// 0.01, using the asymptotic critical value.
pub fn gaussian_marginal_test(samples: &[f64], variance: f64) -> Result<KsOutcome> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "KS test needs at least {KS_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidArgument(format!("degenerate variance {variance}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let threshold = KS_CRITICAL_01 / n.sqrt();
    Ok(KsOutcome { statistic: d, threshold, count: xs.len(), pass: d < threshold })
}

/// Kolmogorov–Smirnov test of lattice data `k·spacing` against `N(0,
/// variance)` discretized onto the same lattice: the reference puts on `k`
/// the normal mass of `((k − ½)·spacing, (k + ½)·spacing]`.
///
/// Both distribution functions are steps at the lattice points, so the
/// supremum is a maximum over lattice points. Same critical value as
/// [`gaussian_marginal_test`]; for a discrete null it is conservative.
pub fn gaussian_lattice_marginal_test(coords: &[i64], spacing: f64, variance: f64) -> Result<KsOutcome> {
    if coords.len() < KS_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "KS test needs at least {KS_MIN_SAMPLES} samples, got {}",
            coords.len()
        )));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidArgument(format!("degenerate variance {variance}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!("lattice spacing must be positive, got {spacing}")));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut ks = coords.to_vec();
    ks.sort_unstable();
    let n = ks.len() as f64;
    let g = |k: i64| normal.cdf((k as f64 + 0.5) * spacing);
    // Between consecutive distinct values the empirical side is flat and the
    // reference increases, so only the gap ends matter.
    let mut d = g(ks[0] - 1);
    let mut i = 0;
    while i < ks.len() {
        let k = ks[i];
        i += ks[i..].partition_point(|&x| x == k);
        let f = i as f64 / n;
        d = d.max((f - g(k)).abs());
        if let Some(&next) = ks.get(i) {
            d = d.max((f - g(next - 1)).abs());
        }
    }
    let threshold = KS_CRITICAL_01 / n.sqrt();
    Ok(KsOutcome { statistic: d, threshold, count: ks.len(), pass: d < threshold })
}

/// Interquartile range of a normal law over its standard deviation.
const NORMAL_IQR: f64 = 1.348_979_500_392_163_5;

/// `(IQR/1.349)²`: the variance of a normal law with the sample's
/// interquartile range. Finite and stable for samples whose own variance is
/// not.
pub fn quartile_variance(samples: &[f64]) -> Result<f64> {
    if samples.len() < 4 {
        return Err(Error::InsufficientData(format!("quartiles need at least 4 samples, got {}", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    let mut data = Data::new(samples.to_vec());
    let iqr = data.upper_quartile() - data.lower_quartile();
    Ok((iqr / NORMAL_IQR).powi(2))
}

pub const LLT_MIN_ENSEMBLE: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LltEstimate {
    pub n: u64,
    /// `n · P̂(S_n = 0)`.
    pub value: f64,
    pub standard_error: f64,
    pub at_origin: u64,
    pub ensemble: u64,
}

/// `n · P̂(S_n = 0)` from endpoints at time `n`; bipartite laws only return
/// at even times, so odd `n` is refused for them.
pub fn llt_origin_estimate(endpoints: &[Site], n: u64, bipartite: bool) -> Result<LltEstimate> {
    if bipartite && n % 2 == 1 {
        return Err(Error::Parity(format!("n = {n} is odd for a bipartite law")));
    }
    if endpoints.len() < LLT_MIN_ENSEMBLE {
        return Err(Error::InsufficientData(format!(
            "LLT estimate needs at least {LLT_MIN_ENSEMBLE} endpoints, got {}",
            endpoints.len()
        )));
    }
    let m = endpoints.len() as f64;
    let hits = endpoints.iter().filter(|s| **s == Site::ORIGIN).count() as u64;
    let p = hits as f64 / m;
    Ok(LltEstimate {
        n,
        value: n as f64 * p,
        standard_error: n as f64 * (p * (1.0 - p) / m).sqrt(),
        at_origin: hits,
        ensemble: endpoints.len() as u64,
    })
}

/// Estimates above this are reported as a non-heavy tail.
pub const NON_HEAVY_ALPHA: f64 = 10.0;
const HILL_MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub alpha: f64,
    /// Order statistics used.
    pub k: usize,
    pub threshold: f64,
    /// Integer data, estimated with the lattice correction.
    pub lattice: bool,
    pub heavy: bool,
}

/// Hill estimator of the survival exponent over the top `top_fraction` of
/// the sample.
///
/// Integer-valued data use only values strictly above the threshold `u`,
/// with `u + ½` as the reference point.
pub fn hill_tail_index(magnitudes: &[f64], top_fraction: f64) -> Result<HillEstimate> {
    if !(top_fraction > 0.0 && top_fraction <= 0.05) {
        return Err(Error::InvalidArgument(format!("top_fraction must lie in (0, 0.05], got {top_fraction}")));
    }
    if magnitudes.len() < HILL_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "Hill estimator needs at least {HILL_MIN_SAMPLES} samples, got {}",
            magnitudes.len()
        )));
    }
    if magnitudes.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::InvalidArgument("magnitudes must be positive and finite".into()));
    }
    let k = (top_fraction * magnitudes.len() as f64).floor() as usize;
    if k < 2 {
        return Err(Error::InsufficientData(format!("only {k} order statistics in the tail")));
    }
    let mut xs = magnitudes.to_vec();
    xs.sort_by(|a, b| b.total_cmp(a));
    let lattice = xs.iter().all(|m| m.fract() == 0.0);
    let u = xs[k];
    let (tail, reference): (&[f64], f64) = if lattice {
        let above = xs.partition_point(|&m| m > u);
        (&xs[..above], u + 0.5)
    } else {
        (&xs[..k], u)
    };
    let log_sum: f64 = tail.iter().map(|m| (m / reference).ln()).sum();
    let alpha = if tail.is_empty() || log_sum <= 0.0 { f64::INFINITY } else { tail.len() as f64 / log_sum };
    let heavy = alpha < NON_HEAVY_ALPHA;
    if !heavy {
        log::warn!("Hill estimate {alpha} over {} order statistics: tail does not look heavy", tail.len());
    }
    Ok(HillEstimate { alpha, k: tail.len(), threshold: u, lattice, heavy })
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientData("slope needs at least two paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Log–log slope of the empirical survival function `P(X > ℓ)` at `points`
/// log-spaced levels in `[lo, hi]`.
pub fn survival_loglog_slope(values: &[f64], lo: f64, hi: f64, points: usize) -> Result<f64> {
    if !(0.0 < lo && lo < hi) || points < 2 {
        return Err(Error::InvalidArgument(format!("bad survival range [{lo}, {hi}] with {points} points")));
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut lx = Vec::with_capacity(points);
    let mut ly = Vec::with_capacity(points);
    for i in 0..points {
        let l = lo * (hi / lo).powf(i as f64 / (points - 1) as f64);
        let above = xs.len() - xs.partition_point(|&v| v <= l);
        if above == 0 {
            return Err(Error::InsufficientData(format!("no samples above {l}")));
        }
        lx.push(l.ln());
        ly.push((above as f64 / n).ln());
    }
    least_squares_slope(&lx, &ly)
}
