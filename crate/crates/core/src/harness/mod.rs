//! Scenario configuration, Monte-Carlo runs, summary statistics and the
//! file formats used between pipeline stages.

pub mod arrivals;
pub mod config;
pub mod run;
pub mod stats;

pub use arrivals::{parse_arrivals_file, write_arrivals_file, ArrivalMap};
pub use config::{AuthSettings, ChannelSettings, PredictorKind, RnnSection, ScenarioConfig, Trials};
pub use run::{
    build_predictor, generate_trial, run_monte_carlo, simulate, trial_dir, trial_seed, Predictor, RunOutput, RunSummary,
    TrialInput, TrialResult,
};
pub use stats::{load_errors, quantile_sorted, summarize_errors, write_errors, ErrorRecord, ErrorStats};
