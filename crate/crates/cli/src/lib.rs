//! Experiment harness: TOML configs, parallel ensembles with reproducible
//! seeding, verdict reports, plot-ready CSVs and trajectory dumps.

pub mod analyses;
pub mod config;
pub mod dump;
pub mod ensemble;
pub mod error;
pub mod probe;
pub mod runner;

pub use config::{ExperimentConfig, Overrides};
pub use error::{Error, Result};
pub use probe::probe_conjecture;
pub use runner::{run_experiment, write_outputs, RunOutput};

/// Configs shipped with the harness, by file stem.
pub const SHIPPED_CONFIGS: &[(&str, &str)] = &[
    ("polya-baseline", include_str!("../configs/polya-baseline.toml")),
    ("lpsrw-invariance", include_str!("../configs/lpsrw-invariance.toml")),
    ("heavy-superdiffusive", include_str!("../configs/heavy-superdiffusive.toml")),
    ("heavy-origin", include_str!("../configs/heavy-origin.toml")),
    ("lorentz-finite-horizon", include_str!("../configs/lorentz-finite-horizon.toml")),
    ("lorentz-infinite-horizon", include_str!("../configs/lorentz-infinite-horizon.toml")),
    ("lpfhlp", include_str!("../configs/lpfhlp.toml")),
    ("lpihlp", include_str!("../configs/lpihlp.toml")),
    ("strong-sweep", include_str!("../configs/strong-sweep.toml")),
];

pub fn shipped_config(name: &str) -> Option<ExperimentConfig> {
    SHIPPED_CONFIGS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ExperimentConfig::from_toml(text).expect("shipped configs are valid"))
}
