use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lorentz_core::lorentz::{builtin_configuration, horizon_check, Builtin, Horizon};
use lorentz_lab::analyses::analyze;
use lorentz_lab::config::ModelConfig;
use lorentz_lab::dump::{read_dump, write_dump};
use lorentz_lab::ensemble::{Model, Plan};
use lorentz_lab::probe::render_table;
use lorentz_lab::runner::{manifest, verdict_lines, RunOutput};
use lorentz_lab::{probe_conjecture, run_experiment, shipped_config, write_outputs, Error, ExperimentConfig, Overrides, Result};

#[derive(Parser)]
#[command(name = "lorentz-lab", version, about = "Random walk and Lorentz process experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file, or the name of a shipped config.
    #[arg(long)]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ensemble: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, analyze and write CSVs plus summary.json.
    Run(Common),
    /// Write walk trajectories as JSONL.
    SimulateWalk(Common),
    /// Write Lorentz trajectories as JSONL.
    SimulateLorentz(Common),
    /// Report the corridors of a periodic configuration.
    HorizonCheck {
        #[arg(long, conflicts_with_all = ["single_disk", "pair"])]
        config: Option<String>,
        #[arg(long, value_name = "R")]
        single_disk: Option<f64>,
        #[arg(long, num_args = 2, value_names = ["R1", "R2"])]
        pair: Option<Vec<f64>>,
        #[arg(long, default_value_t = 12)]
        max_denominator: i64,
    },
    /// Run the configured analyses on a trajectory dump.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Compare a perturbed model against its unperturbed counterpart.
    ProbeConjecture(Common),
}

fn load(spec: &str) -> Result<ExperimentConfig> {
    let path = Path::new(spec);
    if path.exists() {
        return ExperimentConfig::load(path);
    }
    shipped_config(spec).ok_or_else(|| Error::Config(format!("{spec}: no such file or shipped config")))
}

fn configured(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = load(&c.config)?;
    cfg.apply(&Overrides { seed: c.seed, workers: c.workers, out: c.out.clone(), ensemble: c.ensemble, steps: c.steps })?;
    cfg.validate()?;
    Ok(cfg)
}

fn report(out: &RunOutput, dir: Option<&Path>) -> Result<ExitCode> {
    for line in verdict_lines(&out.report) {
        println!("{line}");
    }
    if let Some(dir) = dir {
        write_outputs(dir, out)?;
    }
    Ok(if out.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn dump(c: &Common, walk: bool) -> Result<ExitCode> {
    let cfg = configured(c)?;
    if walk != matches!(cfg.model, ModelConfig::Walk(_)) {
        let want = if walk { "walk" } else { "lorentz" };
        return Err(Error::config("model.kind", format!("expected a {want} model")));
    }
    let model = Model::from_config(&cfg.model)?;
    match &cfg.output {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            write_dump(BufWriter::new(file), &model, cfg.steps, cfg.seed, cfg.ensemble, cfg.workers)?;
        }
        None => write_dump(BufWriter::new(std::io::stdout().lock()), &model, cfg.steps, cfg.seed, cfg.ensemble, cfg.workers)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn horizon(config: Option<String>, single_disk: Option<f64>, pair: Option<Vec<f64>>, max_denominator: i64) -> Result<ExitCode> {
    let table = match (config, single_disk, pair) {
        (Some(c), None, None) => match load(&c)?.model {
            ModelConfig::Lorentz(l) => l.build()?.background(),
            ModelConfig::Walk(_) => return Err(Error::config("model.kind", "horizon-check needs a lorentz model")),
        },
        (None, Some(radius), None) => builtin_configuration(&Builtin::SingleDisk { radius })?,
        (None, None, Some(r)) => builtin_configuration(&Builtin::FiniteHorizonPair { r1: r[0], r2: r[1] })?,
        _ => return Err(Error::Config("give exactly one of --config, --single-disk, --pair".into())),
    };
    let h = horizon_check(&table, max_denominator)?;
    let mut stdout = std::io::stdout().lock();
    match &h {
        Horizon::Finite { max_denominator } => {
            writeln!(stdout, "finite horizon (directions with |p|, |q| <= {max_denominator})").ok();
        }
        Horizon::Infinite { corridors } => {
            writeln!(stdout, "infinite horizon: {} corridors", corridors.len()).ok();
            for c in corridors {
                writeln!(stdout, "direction=({}, {}) width={:.6} offset={:.6}", c.direction.0, c.direction.1, c.width, c.offset).ok();
            }
        }
    }
    writeln!(stdout, "{}", serde_json::to_string(&h).expect("horizon serializes")).ok();
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(c) => {
            let cfg = configured(&c)?;
            let out = run_experiment(&cfg)?;
            report(&out, cfg.output.as_deref())
        }
        Command::SimulateWalk(c) => dump(&c, true),
        Command::SimulateLorentz(c) => dump(&c, false),
        Command::HorizonCheck { config, single_disk, pair, max_denominator } => {
            horizon(config, single_disk, pair, max_denominator)
        }
        Command::Analyze { common, input } => {
            let cfg = configured(&common)?;
            if cfg.sweep.is_some() {
                return Err(Error::config("sweep", "analyze works on a single model"));
            }
            let model = Model::from_config(&cfg.model)?;
            let plan = Plan::for_config(&cfg);
            let file = std::fs::File::open(&input).map_err(|e| Error::io(&input, e))?;
            let records = read_dump(BufReader::new(file), &plan)?;
            if records.len() as u64 != cfg.ensemble {
                return Err(Error::Dump {
                    line: 0,
                    message: format!("dump holds {} trajectories, config expects {}", records.len(), cfg.ensemble),
                });
            }
            let out = analyze(&cfg, &model, &plan, &records)?;
            let manifest = manifest(&cfg, &out.csv, Some(input.display().to_string()));
            report(&RunOutput { report: out.report, csv: out.csv, manifest }, cfg.output.as_deref())
        }
        Command::ProbeConjecture(c) => {
            let cfg = configured(&c)?;
            let out = probe_conjecture(&cfg)?;
            print!("{}", render_table(&out.rows));
            if let Some(dir) = &cfg.output {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join("probe.csv");
                std::fs::write(&path, &out.csv).map_err(|e| Error::io(&path, e))?;
                let path = dir.join("summary.json");
                let json = serde_json::to_string_pretty(&out.report).expect("report serializes");
                std::fs::write(&path, format!("{json}\n")).map_err(|e| Error::io(&path, e))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
