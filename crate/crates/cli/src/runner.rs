//! `run_experiment`: simulate, analyze, and persist.

use std::collections::BTreeMap;
use std::path::Path;

use lorentz_core::stats::{endpoint_covariance, EnsembleSummary, Verdict, VerdictReport};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analyses::{analyze, batch_interval, f, AnalysisOutput, Csv};
use crate::config::{ExperimentConfig, ModelConfig};
use crate::ensemble::{simulate_ensemble, Model, Plan, TrajectoryRecord};
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub ensemble: u64,
    pub steps: u64,
    pub workers: usize,
    pub versions: BTreeMap<String, String>,
    /// SHA-256 of every written CSV.
    pub files: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_dump: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: VerdictReport,
    pub csv: BTreeMap<String, String>,
    pub manifest: Manifest,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.report.all_passed()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest(cfg: &ExperimentConfig, csv: &BTreeMap<String, String>, raw_dump: Option<String>) -> Manifest {
    let versions = BTreeMap::from([
        ("lorentz-lab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("lorentz-core".to_string(), lorentz_core::VERSION.to_string()),
        ("config_schema".to_string(), crate::config::CONFIG_SCHEMA_VERSION.to_string()),
        ("report_schema".to_string(), lorentz_core::stats::REPORT_SCHEMA_VERSION.to_string()),
    ]);
    Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        ensemble: cfg.ensemble,
        steps: cfg.steps,
        workers: cfg.workers,
        versions,
        files: csv.iter().map(|(k, v)| (k.clone(), sha256_hex(v.as_bytes()))).collect(),
        raw_dump,
    }
}

pub fn simulate(cfg: &ExperimentConfig, model: &Model, plan: &Plan) -> Result<Vec<TrajectoryRecord>> {
    let start = std::time::Instant::now();
    log::info!("{}: simulating {} trajectories of {} steps on {} workers", cfg.name, cfg.ensemble, cfg.steps, cfg.workers);
    let records = simulate_ensemble(model, plan, cfg.seed, cfg.ensemble, cfg.workers)?;
    log::info!("{}: simulated in {:.1}s", cfg.name, start.elapsed().as_secs_f64());
    Ok(records)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let out = match &cfg.sweep {
        Some(sweep) => run_sweep(cfg, &sweep.alpha)?,
        None => {
            let model = Model::from_config(&cfg.model)?;
            let plan = Plan::for_config(cfg);
            let records = simulate(cfg, &model, &plan)?;
            analyze(cfg, &model, &plan, &records)?
        }
    };
    let manifest = manifest(cfg, &out.csv, None);
    Ok(RunOutput { report: out.report, csv: out.csv, manifest })
}

fn run_sweep(cfg: &ExperimentConfig, alphas: &[f64]) -> Result<AnalysisOutput> {
    let ModelConfig::Walk(w) = &cfg.model else { unreachable!("validated") };
    let plan = Plan::for_config(cfg);
    let n = cfg.steps;
    let scale = cfg.scaling.divisor(n);
    let mut out = AnalysisOutput::default();
    let mut table = Csv::new(&["alpha", "cube_side", "cov_xx", "cov_xx_lo", "cov_xx_hi", "cov_xy", "cov_yy", "cov_yy_lo", "cov_yy_hi"]);
    for &a in alphas {
        let wm = w.with_alpha(a).expect("validated");
        log::info!("{}: sweep alpha = {a}", cfg.name);
        let model = Model::Walk(wm.build()?);
        let records = simulate(cfg, &model, &plan)?;
        let entry = |pick: fn(&lorentz_core::stats::CovarianceMatrix) -> f64| {
            let plan = &plan;
            batch_interval(&records, move |rs| {
                let mut s = EnsembleSummary::new();
                for r in rs {
                    s.push_endpoint(r.at(&plan, n) / scale);
                }
                Ok(pick(&endpoint_covariance(&s)?))
            })
        };
        let xx = entry(|c| c.xx)?;
        let xy = entry(|c| c.xy)?;
        let yy = entry(|c| c.yy)?;
        let Model::Walk(spec) = &model else { unreachable!() };
        let side = spec.cube_side(n, n);
        table.row(&[f(a), f(side), f(xx.estimate), f(xx.lo), f(xx.hi), f(xy.estimate), f(yy.estimate), f(yy.lo), f(yy.hi)]);
        let label = format!("alpha={a}");
        let sub = analyze(cfg, &model, &plan, &records)?;
        for (k, v) in sub.csv {
            out.csv.insert(format!("{label}/{k}"), v);
        }
        for v in sub.report.verdicts {
            out.report.push(Verdict { test: format!("{} [{label}]", v.test), ..v });
        }
        out.report.push(
            Verdict::exploratory(format!("sweep_covariance_trace [{label}]"), xx.estimate + yy.estimate)
                .detail("cov_xx", xx)
                .detail("cov_yy", yy)
                .sample("trajectories", cfg.ensemble)
                .seed(cfg.seed),
        );
    }
    out.csv.insert("covariance_vs_alpha.csv".into(), table.into_string());
    Ok(out)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes every CSV, `summary.json` and `manifest.json` under `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, text) in &out.csv {
        write(&dir.join(name), text.as_bytes())?;
    }
    let summary = serde_json::to_string_pretty(&out.report).expect("report serializes");
    write(&dir.join("summary.json"), format!("{summary}\n").as_bytes())?;
    let manifest = serde_json::to_string_pretty(&out.manifest).expect("manifest serializes");
    write(&dir.join("manifest.json"), format!("{manifest}\n").as_bytes())
}

/// One line per verdict: outcome, test, statistic and threshold.
pub fn verdict_lines(report: &VerdictReport) -> Vec<String> {
    report
        .verdicts
        .iter()
        .map(|v| {
            let outcome = match v.outcome {
                lorentz_core::stats::Outcome::Pass => "PASS",
                lorentz_core::stats::Outcome::Fail => "FAIL",
                lorentz_core::stats::Outcome::Exploratory => "INFO",
            };
            if let Some(why) = v.details.get("skipped").and_then(|w| w.as_str()) {
                return format!("{outcome:4} {} skipped: {why}", v.test);
            }
            match v.threshold {
                Some(t) => format!("{outcome:4} {} statistic={:.6} threshold={:.6}", v.test, v.statistic, t),
                None => format!("{outcome:4} {} statistic={:.6}", v.test, v.statistic),
            }
        })
        .collect()
}
