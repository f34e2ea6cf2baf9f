//! Side-by-side perturbed/unperturbed comparisons.

use lorentz_core::stats::{endpoint_covariance, EnsembleSummary, Verdict, VerdictReport};
use lorentz_core::PlanarVector;

use crate::analyses::{batch_interval, checkpoint_covariance, f, Csv, Interval};
use crate::config::{AnalysisConfig, ExperimentConfig, ModelConfig, ScalingMode};
use crate::ensemble::{Model, Plan, TrajectoryRecord};
use crate::error::Result;
use crate::runner::simulate;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub statistic: String,
    pub perturbed: Interval,
    pub unperturbed: Interval,
}

impl ProbeRow {
    pub fn overlap(&self) -> bool {
        self.perturbed.lo <= self.unperturbed.hi && self.unperturbed.lo <= self.perturbed.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutput {
    pub rows: Vec<ProbeRow>,
    pub csv: String,
    pub report: VerdictReport,
}

type Stat = Box<dyn Fn(&[TrajectoryRecord]) -> Result<f64>>;

fn statistics(cfg: &ExperimentConfig, plan: &Plan) -> Vec<(String, Stat)> {
    let n = cfg.steps;
    let scaling = cfg.scaling;
    let mut out: Vec<(String, Stat)> = Vec::new();
    let p = plan.clone();
    let cov = move |rs: &[TrajectoryRecord]| {
        let mut s = EnsembleSummary::new();
        let d = scaling.divisor(n);
        for r in rs {
            s.push_endpoint(r.at(&p, n) / d);
        }
        Ok::<_, crate::error::Error>(endpoint_covariance(&s)?)
    };
    let c1 = cov.clone();
    let c2 = cov.clone();
    out.push(("cov_xx".into(), Box::new(move |rs| Ok(c1(rs)?.xx))));
    out.push(("cov_xy".into(), Box::new(move |rs| Ok(c2(rs)?.xy))));
    out.push(("cov_yy".into(), Box::new(move |rs| Ok(cov(rs)?.yy))));
    for a in &cfg.analyses {
        match a {
            AnalysisConfig::Stabilization { times, .. } => {
                for &t in times {
                    let (px, py) = (plan.clone(), plan.clone());
                    out.push((
                        format!("var_x@{t}"),
                        Box::new(move |rs| Ok(checkpoint_covariance(rs, &px, t, scaling)?.xx)),
                    ));
                    out.push((
                        format!("var_y@{t}"),
                        Box::new(move |rs| Ok(checkpoint_covariance(rs, &py, t, scaling)?.yy)),
                    ));
                }
            }
            AnalysisConfig::Returns { .. } => {
                out.push((
                    "mean_returns".into(),
                    Box::new(|rs| {
                        let total: u64 = rs.iter().filter_map(|r| r.returns).map(|x| x.returns).sum();
                        Ok(total as f64 / rs.len() as f64)
                    }),
                ));
                out.push((
                    "fraction_returned".into(),
                    Box::new(|rs| {
                        let k = rs.iter().filter(|r| r.returns.is_some_and(|x| x.returns > 0)).count();
                        Ok(k as f64 / rs.len() as f64)
                    }),
                ));
            }
            _ => {}
        }
    }
    if matches!(cfg.model, ModelConfig::Walk(_)) {
        let norm = match scaling {
            ScalingMode::Superdiffusive => n as f64 * (n as f64).ln(),
            _ => n as f64,
        };
        let p = plan.clone();
        out.push((
            "origin_rate".into(),
            Box::new(move |rs| {
                let k = rs.iter().filter(|r| r.at(&p, n) == PlanarVector::ZERO).count();
                Ok(norm * k as f64 / rs.len() as f64)
            }),
        ));
    }
    out
}

/// Runs the configured model and its unperturbed counterpart under the same
/// seed and tabulates statistics with 95% batch-means intervals.
pub fn probe_conjecture(cfg: &ExperimentConfig) -> Result<ProbeOutput> {
    cfg.validate()?;
    let plan = Plan::for_config(cfg);
    let base = match &cfg.model {
        ModelConfig::Walk(w) => ModelConfig::Walk(w.unperturbed()),
        ModelConfig::Lorentz(l) => ModelConfig::Lorentz(l.unperturbed()),
    };
    let perturbed = simulate(cfg, &Model::from_config(&cfg.model)?, &plan)?;
    let unperturbed = simulate(cfg, &Model::from_config(&base)?, &plan)?;
    let mut rows = Vec::new();
    let mut csv = Csv::new(&["statistic", "perturbed", "perturbed_lo", "perturbed_hi", "unperturbed", "unperturbed_lo", "unperturbed_hi", "overlap"]);
    let mut report = VerdictReport::default();
    for (name, stat) in statistics(cfg, &plan) {
        let row = ProbeRow {
            perturbed: batch_interval(&perturbed, &stat)?,
            unperturbed: batch_interval(&unperturbed, &stat)?,
            statistic: name,
        };
        csv.row(&[
            row.statistic.clone(),
            f(row.perturbed.estimate),
            f(row.perturbed.lo),
            f(row.perturbed.hi),
            f(row.unperturbed.estimate),
            f(row.unperturbed.lo),
            f(row.unperturbed.hi),
            row.overlap().to_string(),
        ]);
        report.push(
            Verdict::exploratory(format!("probe {}", row.statistic), row.perturbed.estimate - row.unperturbed.estimate)
                .detail("perturbed", row.perturbed)
                .detail("unperturbed", row.unperturbed)
                .detail("overlap", row.overlap())
                .sample("trajectories", cfg.ensemble)
                .seed(cfg.seed),
        );
        rows.push(row);
    }
    Ok(ProbeOutput { rows, csv: csv.into_string(), report })
}

pub fn render_table(rows: &[ProbeRow]) -> String {
    let mut s = format!("{:<20} {:>30} {:>30} {:>8}\n", "statistic", "perturbed (95% CI)", "unperturbed (95% CI)", "overlap");
    let cell = |i: &Interval| format!("{:.4} [{:.4}, {:.4}]", i.estimate, i.lo, i.hi);
    for r in rows {
        s.push_str(&format!(
            "{:<20} {:>30} {:>30} {:>8}\n",
            r.statistic,
            cell(&r.perturbed),
            cell(&r.unperturbed),
            if r.overlap() { "yes" } else { "no" }
        ));
    }
    s
}
