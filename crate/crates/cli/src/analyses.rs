//! Turns an ensemble of trajectory records into verdicts and plot data.

use std::collections::BTreeMap;

use lorentz_core::lorentz::max_free_path_bound;
use lorentz_core::scaling::{diffusive_scale, fmt12, ScaledPath};
use lorentz_core::stats::{
    endpoint_covariance, exact_return_law, fdd_covariance, gaussian_lattice_marginal_test, gaussian_marginal_test, hill_tail_index,
    least_squares_slope, llt_origin_estimate, quartile_variance, survival_loglog_slope, truncated_green, CovarianceMatrix,
    EnsembleSummary, FddSummary, Moments, Outcome, Verdict, VerdictReport,
};
use lorentz_core::walk::Site;
use lorentz_core::{Error as CoreError, PlanarVector};

use crate::config::{AnalysisConfig, Coordinate, ExperimentConfig, LltNormalization, ScalingMode};
use crate::ensemble::{fdd_index, Model, Plan, TrajectoryRecord};
use crate::error::{Error, Result};

/// CSV text: header row, comma separated, LF line endings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// A verdict for an analysis the ensemble is too small for. Fails when a
/// threshold was configured.
fn skipped(test: &str, gated: bool, why: String) -> Verdict {
    let outcome = if gated { Outcome::Fail } else { Outcome::Exploratory };
    Verdict::exploratory(test, f64::NAN).with_outcome(outcome).detail("skipped", why)
}

pub fn f(x: f64) -> String {
    fmt12(x)
}

pub fn i(x: u64) -> String {
    x.to_string()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisOutput {
    pub report: VerdictReport,
    pub csv: BTreeMap<String, String>,
}

fn above(test: &str, statistic: f64, threshold: f64) -> Verdict {
    let v = Verdict::below(test, statistic, threshold);
    v.with_outcome(if statistic > threshold { Outcome::Pass } else { Outcome::Fail })
}

fn within(test: &str, statistic: f64, lo: f64, hi: f64) -> Verdict {
    let ok = (lo..=hi).contains(&statistic);
    Verdict::exploratory(test, statistic)
        .with_outcome(if ok { Outcome::Pass } else { Outcome::Fail })
        .detail("range", [lo, hi])
}

fn matrix(m: [[f64; 2]; 2]) -> Result<CovarianceMatrix> {
    Ok(CovarianceMatrix::from_rows(m)?)
}

/// Largest entrywise gap between two covariance estimates, relative to the
/// mean of their largest diagonal entries.
pub fn relative_gap(a: &CovarianceMatrix, b: &CovarianceMatrix) -> f64 {
    let sa = a.xx.abs().max(a.yy.abs());
    let sb = b.xx.abs().max(b.yy.abs());
    let d = (a.xx - b.xx).abs().max((a.xy - b.xy).abs()).max((a.yy - b.yy).abs());
    d / (0.5 * (sa + sb))
}

/// Covariance of the positions at index `k`, each divided by `scale(k)`.
pub fn checkpoint_covariance(
    records: &[TrajectoryRecord],
    plan: &Plan,
    k: u64,
    scaling: ScalingMode,
) -> Result<CovarianceMatrix> {
    let mut s = EnsembleSummary::new();
    let d = scaling.divisor(k);
    for r in records {
        s.push_endpoint(r.at(plan, k) / d);
    }
    Ok(endpoint_covariance(&s)?)
}

/// Diffusively or superdiffusively scaled path value `L(x)`.
fn scaled_at(r: &TrajectoryRecord, plan: &Plan, x: f64, scale: f64) -> PlanarVector {
    let n = plan.steps;
    let j = fdd_index(x, n);
    let frac = x * n as f64 - j as f64;
    let a = r.at(plan, j);
    if j == n || frac.abs() <= 1e-9 {
        return a / scale;
    }
    let b = r.at(plan, j + 1);
    (a + (b - a) * frac) / scale
}

fn as_site(p: PlanarVector) -> Site {
    Site::new(p.x.round() as i64, p.y.round() as i64)
}

pub fn analyze(cfg: &ExperimentConfig, model: &Model, plan: &Plan, records: &[TrajectoryRecord]) -> Result<AnalysisOutput> {
    let n = cfg.steps;
    let m = records.len() as u64;
    let scale = cfg.scaling.divisor(n);
    let mut out = AnalysisOutput::default();
    let mut summary = EnsembleSummary::new();
    for r in records {
        summary.push_endpoint(r.at(plan, n) / scale);
        if let Some(rs) = r.returns {
            summary.push_returns(rs.returns, rs.first_return);
        }
        for &x in &r.magnitudes {
            summary.push_magnitude(x);
        }
    }
    let truncated = records.iter().filter(|r| r.truncated(plan)).count() as u64;

    let mut moments = Csv::new(&["count", "truncated", "mean_x", "mean_y", "cov_xx", "cov_xy", "cov_yy"]);
    let cov = endpoint_covariance(&summary).ok();
    let mean = summary.mean();
    let c = cov.unwrap_or(CovarianceMatrix { xx: f64::NAN, xy: f64::NAN, yy: f64::NAN });
    moments.row(&[i(m), i(truncated), f(mean.x), f(mean.y), f(c.xx), f(c.xy), f(c.yy)]);
    out.csv.insert("moments.csv".into(), moments.into_string());
    if !summary.magnitude_bins.is_empty() {
        let mut h = Csv::new(&["log2_bin_lo", "count"]);
        for (b, count) in &summary.magnitude_bins {
            h.row(&[f(*b as f64 / 4.0), i(*count)]);
        }
        out.csv.insert("magnitude_histogram.csv".into(), h.into_string());
    }

    let tag = |v: Verdict| v.sample("trajectories", m).seed(cfg.seed);

    for a in &cfg.analyses {
        match a {
            AnalysisConfig::EndpointCovariance { reference, tolerance, max_off_diagonal, min_eigenvalue } => {
                let cov = endpoint_covariance(&summary)?;
                let mut csv = Csv::new(&["entry", "value"]);
                let ev = cov.eigenvalues();
                for (k, v) in [("xx", cov.xx), ("xy", cov.xy), ("yy", cov.yy), ("eig_min", ev[0]), ("eig_max", ev[1])] {
                    csv.row(&[k.into(), f(v)]);
                }
                out.csv.insert("endpoint_covariance.csv".into(), csv.into_string());
                match (reference, tolerance) {
                    (Some(r), Some(t)) => {
                        let r = matrix(*r)?;
                        out.report.push(tag(Verdict::below("endpoint_covariance", cov.relative_deviation(&r), *t)
                            .detail("covariance", cov)
                            .detail("reference", r)));
                    }
                    _ => out.report.push(tag(Verdict::exploratory("endpoint_covariance", cov.trace()).detail("covariance", cov))),
                }
                if let Some(x) = max_off_diagonal {
                    out.report.push(tag(Verdict::below("endpoint_off_diagonal", cov.off_diagonal_ratio(), *x)));
                }
                if let Some(x) = min_eigenvalue {
                    out.report.push(tag(above("endpoint_min_eigenvalue", ev[0], *x)));
                }
            }
            AnalysisConfig::GaussianMarginal { coordinate, variance } => {
                let pick = |p: PlanarVector| match coordinate {
                    Coordinate::X => p.x,
                    Coordinate::Y => p.y,
                };
                let ks = if plan.lattice {
                    let ks: Vec<i64> = records.iter().map(|r| pick(r.at(plan, n)) as i64).collect();
                    gaussian_lattice_marginal_test(&ks, 1.0 / scale, *variance)?
                } else {
                    let xs: Vec<f64> = records.iter().map(|r| pick(r.at(plan, n) / scale)).collect();
                    gaussian_marginal_test(&xs, *variance)?
                };
                let name = match coordinate {
                    Coordinate::X => "gaussian_marginal_x",
                    Coordinate::Y => "gaussian_marginal_y",
                };
                out.report.push(tag(Verdict::below(name, ks.statistic, ks.threshold)
                    .detail("variance", variance)
                    .detail("lattice", plan.lattice)));
            }
            AnalysisConfig::GreenSlope { n_min, n_max, expected, tolerance } => {
                let Model::Walk(spec) = model else { unreachable!("validated") };
                let law = spec
                    .background()
                    .as_finite()
                    .ok_or_else(|| Error::config("analyses.green_slope", "needs a finite-table background law"))?;
                let g = truncated_green(&exact_return_law(law, *n_max)?);
                let (xs, ys): (Vec<f64>, Vec<f64>) =
                    (*n_min..=*n_max).map(|k| ((k as f64).ln(), g[k as usize])).unzip();
                let slope = least_squares_slope(&xs, &ys)?;
                let mut csv = Csv::new(&["n", "green"]);
                for (k, gk) in g.iter().enumerate() {
                    csv.row(&[i(k as u64), f(*gk)]);
                }
                out.csv.insert("green.csv".into(), csv.into_string());
                out.report.push(
                    Verdict::below("green_slope", (slope / expected - 1.0).abs(), *tolerance)
                        .detail("slope", slope)
                        .detail("expected", expected)
                        .sample("n_max", *n_max),
                );
            }
            AnalysisConfig::ReturnFrequency { times, sigmas } => {
                let Model::Walk(spec) = model else { unreachable!("validated") };
                let exact = match (spec.is_translation_invariant(), spec.background().as_finite()) {
                    (true, Some(law)) => Some(exact_return_law(law, *times.iter().max().unwrap_or(&0))?),
                    _ => None,
                };
                let mut csv = Csv::new(&["n", "empirical", "exact", "standard_error", "z"]);
                for &t in times {
                    let hits = records.iter().filter(|r| r.at(plan, t) == PlanarVector::ZERO).count();
                    let p_hat = hits as f64 / m as f64;
                    let name = format!("return_frequency_n{t}");
                    match &exact {
                        Some(e) => {
                            let p = e[t as usize];
                            let se = (p * (1.0 - p) / m as f64).sqrt();
                            let z = if se > 0.0 { (p_hat - p).abs() / se } else if p_hat == p { 0.0 } else { f64::INFINITY };
                            csv.row(&[i(t), f(p_hat), f(p), f(se), f(z)]);
                            out.report.push(tag(Verdict::below(name, z, *sigmas).detail("empirical", p_hat).detail("exact", p)));
                        }
                        None => {
                            csv.row(&[i(t), f(p_hat), "".into(), "".into(), "".into()]);
                            out.report.push(tag(Verdict::exploratory(name, p_hat)));
                        }
                    }
                }
                out.csv.insert("return_frequency.csv".into(), csv.into_string());
            }
            AnalysisConfig::Fdd { s, t, reference, tolerance } => {
                let mut fs = FddSummary::default();
                for r in records {
                    fs.push(scaled_at(r, plan, *s, scale), scaled_at(r, plan, *t, scale));
                }
                let fd = match fdd_covariance(&fs, *s, *t) {
                    Err(CoreError::InsufficientData(why)) => {
                        out.report.push(tag(skipped("fdd_cross_covariance", tolerance.is_some(), why)));
                        continue;
                    }
                    r => r?,
                };
                let mut csv = Csv::new(&["matrix", "entry", "value"]);
                let rows = [("cov_s", fd.cov_s.rows()), ("cov_t", fd.cov_t.rows()), ("cross", fd.cross), ("predicted_cross", fd.predicted_cross.rows())];
                for (name, mtx) in rows {
                    for (a, row) in ["x", "y"].iter().zip(mtx) {
                        for (b, v) in ["x", "y"].iter().zip(row) {
                            csv.row(&[name.into(), format!("{a}{b}"), f(v)]);
                        }
                    }
                }
                out.csv.insert("fdd.csv".into(), csv.into_string());
                let v = match (reference, tolerance) {
                    (Some(r), Some(tol)) => Verdict::below("fdd_cross_covariance", fd.cross_deviation(&matrix(*r)?), *tol),
                    (None, Some(tol)) => Verdict::below("fdd_cross_covariance", fd.cross_deviation(&fd.predicted_cross), *tol),
                    _ => Verdict::exploratory("fdd_cross_covariance", fd.cross_deviation(&fd.predicted_cross)),
                };
                out.report.push(tag(v.detail("cross", fd.cross).detail("s", s).detail("t", t)));
            }
            AnalysisConfig::Llt { time, normalization, expected, tolerance } => {
                let Model::Walk(spec) = model else { unreachable!("validated") };
                let sites: Vec<Site> = records.iter().map(|r| as_site(r.at(plan, *time))).collect();
                let bipartite = spec.background().is_bipartite();
                let est = match llt_origin_estimate(&sites, *time, bipartite) {
                    Err(CoreError::InsufficientData(why)) => {
                        out.report.push(tag(skipped("llt_origin", tolerance.is_some(), why)));
                        continue;
                    }
                    r => r?,
                };
                let factor = match normalization {
                    LltNormalization::N => 1.0,
                    LltNormalization::NLogN => (*time as f64).ln(),
                };
                let value = est.value * factor;
                let se = est.standard_error * factor;
                let v = match (expected, tolerance) {
                    (Some(e), Some(tol)) => Verdict::below("llt_origin", (value / e - 1.0).abs(), *tol).detail("expected", e),
                    _ => Verdict::exploratory("llt_origin", value),
                };
                out.report.push(tag(v
                    .detail("value", value)
                    .detail("standard_error", se)
                    .detail("time", time)
                    .detail("normalization", normalization)
                    .detail("parity_restricted", bipartite)));
            }
            AnalysisConfig::Hill { top_fraction, per_trajectory, range } => {
                let xs: Vec<f64> =
                    records.iter().flat_map(|r| r.magnitudes.iter().take(*per_trajectory as usize).copied()).collect();
                let h = match hill_tail_index(&xs, *top_fraction) {
                    Err(CoreError::InsufficientData(why)) => {
                        out.report.push(tag(skipped("hill_tail_index", range.is_some(), why)));
                        continue;
                    }
                    r => r?,
                };
                let v = match range {
                    Some([lo, hi]) => within("hill_tail_index", h.alpha, *lo, *hi),
                    None => Verdict::exploratory("hill_tail_index", h.alpha),
                };
                out.report.push(tag(v.detail("order_statistics", h.k).detail("heavy", h.heavy).sample("magnitudes", xs.len() as u64)));
            }
            AnalysisConfig::Returns { radius } => {
                let mut csv = Csv::new(&["returns", "trajectories"]);
                for (k, c) in &summary.return_counts {
                    csv.row(&[i(*k), i(*c)]);
                }
                out.csv.insert("return_counts.csv".into(), csv.into_string());
                let mut csv = Csv::new(&["first_return", "trajectories"]);
                for (k, c) in &summary.first_returns {
                    csv.row(&[i(*k), i(*c)]);
                }
                out.csv.insert("first_returns.csv".into(), csv.into_string());
                let total: u64 = summary.return_counts.iter().map(|(k, c)| k * c).sum();
                let returned: u64 = summary.first_returns.values().sum();
                out.report.push(tag(Verdict::exploratory("mean_returns", total as f64 / m as f64)
                    .detail("radius", radius)
                    .detail("fraction_returned", returned as f64 / m as f64)));
            }
            AnalysisConfig::FlightTail { lo, hi, points, slope_range, axis_angle, min_axis_fraction, per_trajectory } => {
                let flights: Vec<(f64, f64)> =
                    records.iter().flat_map(|r| r.flights.iter().take(*per_trajectory as usize).copied()).collect();
                let lengths: Vec<f64> = flights.iter().map(|x| x.0).collect();
                let slope = survival_loglog_slope(&lengths, *lo, *hi, *points)?;
                let mut csv = Csv::new(&["length", "survival"]);
                let mut sorted = lengths.clone();
                sorted.sort_by(f64::total_cmp);
                for k in 0..*points {
                    let l = lo * (hi / lo).powf(k as f64 / (*points - 1) as f64);
                    let above = sorted.len() - sorted.partition_point(|&v| v <= l);
                    csv.row(&[f(l), f(above as f64 / sorted.len() as f64)]);
                }
                out.csv.insert("flight_survival.csv".into(), csv.into_string());
                let v = match slope_range {
                    Some([a, b]) => within("flight_survival_slope", slope, *a, *b),
                    None => Verdict::exploratory("flight_survival_slope", slope),
                };
                out.report.push(tag(v.sample("flights", lengths.len() as u64)));
                let long: Vec<&(f64, f64)> = flights.iter().filter(|x| x.0 > *lo).collect();
                let near_axis = long.iter().filter(|x| x.1 <= *axis_angle).count();
                let frac = if long.is_empty() { 0.0 } else { near_axis as f64 / long.len() as f64 };
                let v = match min_axis_fraction {
                    Some(x) => above("flight_axis_fraction", frac, *x),
                    None => Verdict::exploratory("flight_axis_fraction", frac),
                };
                out.report.push(tag(v.sample("long_flights", long.len() as u64).detail("axis_angle", axis_angle)));
            }
            AnalysisConfig::FreePathBound { angle_step, offset_step } => {
                let Model::Lorentz { table, .. } = model else { unreachable!("validated") };
                let b = max_free_path_bound(&table.background(), *angle_step, *offset_step)?;
                let longest = records.iter().map(|r| r.max_flight).fold(0.0, f64::max);
                let flights: u64 = records.iter().map(|r| r.completed).sum();
                out.report.push(tag(Verdict::below("free_path_bound", longest, b.bound)
                    .detail("sampled_max", b.sampled_max)
                    .sample("flights", flights)));
            }
            AnalysisConfig::Stabilization { times, tolerance, min_eigenvalue } => {
                let mut csv = Csv::new(&["time", "cov_xx", "cov_xy", "cov_yy"]);
                let mut covs = Vec::new();
                for &t in times {
                    let c = checkpoint_covariance(records, plan, t, cfg.scaling)?;
                    csv.row(&[i(t), f(c.xx), f(c.xy), f(c.yy)]);
                    covs.push(c);
                }
                out.csv.insert("stabilization.csv".into(), csv.into_string());
                let gap = covs.windows(2).map(|w| relative_gap(&w[0], &w[1])).fold(0.0, f64::max);
                let v = match tolerance {
                    Some(tol) => Verdict::below("stabilization", gap, *tol),
                    None => Verdict::exploratory("stabilization", gap),
                };
                out.report.push(tag(v.detail("times", times).detail("covariances", &covs)));
                let mut qv = Vec::new();
                for &t in times {
                    let d = cfg.scaling.divisor(t);
                    let xs: Vec<f64> = records.iter().map(|r| r.at(plan, t).x / d).collect();
                    let ys: Vec<f64> = records.iter().map(|r| r.at(plan, t).y / d).collect();
                    qv.push([quartile_variance(&xs)?, quartile_variance(&ys)?]);
                }
                let qgap = qv
                    .windows(2)
                    .flat_map(|w| (0..2).map(move |c| (w[0][c] - w[1][c]).abs() / (0.5 * (w[0][c] + w[1][c]))))
                    .fold(0.0, f64::max);
                out.report.push(tag(Verdict::exploratory("stabilization_quartile", qgap).detail("quartile_variances", &qv)));
                if let Some(x) = min_eigenvalue {
                    let lmin = covs.iter().map(|c| c.eigenvalues()[0]).fold(f64::INFINITY, f64::min);
                    out.report.push(tag(above("stabilization_min_eigenvalue", lmin, *x)));
                }
            }
            AnalysisConfig::PathSamples { count, points } => {
                let mut csv = Csv::new(&["traj", "t", "x", "y"]);
                for r in records.iter().take(*count as usize) {
                    let Some(path) = &r.path else { continue };
                    if path.len() < 2 {
                        continue;
                    }
                    let steps = path.len() - 1;
                    let sp = match cfg.scaling {
                        ScalingMode::Superdiffusive if steps >= 2 => lorentz_core::scaling::superdiffusive_scale(path, steps)?,
                        ScalingMode::None => ScaledPath::new(path, steps, 1.0)?,
                        _ => diffusive_scale(path, steps)?,
                    };
                    for k in 0..=*points {
                        let t = k as f64 / *points as f64;
                        let p = sp.evaluate(t)?;
                        csv.row(&[i(r.index), f(t), f(p.x), f(p.y)]);
                    }
                }
                out.csv.insert("paths.csv".into(), csv.into_string());
            }
        }
    }
    if truncated > 0 {
        out.report.push(Verdict::exploratory("truncated_trajectories", truncated as f64).sample("trajectories", m));
    }
    Ok(out)
}

/// Batch-means estimate with a 95% interval from 20 index-ordered batches.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Interval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

const BATCHES: usize = 20;
/// 97.5% Student quantile with 19 degrees of freedom.
const T19: f64 = 2.093;

pub fn batch_interval(records: &[TrajectoryRecord], stat: impl Fn(&[TrajectoryRecord]) -> Result<f64>) -> Result<Interval> {
    let estimate = stat(records)?;
    let size = records.len() / BATCHES;
    if size < 2 {
        return Ok(Interval { estimate, lo: f64::NAN, hi: f64::NAN });
    }
    let vals = (0..BATCHES).map(|b| stat(&records[b * size..(b + 1) * size])).collect::<Result<Vec<_>>>()?;
    let mut mo = Moments::<1>::new();
    for v in &vals {
        mo.push([*v]);
    }
    let half = T19 * (mo.covariance(0, 0)? / BATCHES as f64).sqrt();
    Ok(Interval { estimate, lo: estimate - half, hi: estimate + half })
}
