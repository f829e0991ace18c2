//! `ctxauth`: stage-by-stage front end to the simulation and
//! authentication pipeline. Every subcommand reads and writes the plain
//! file formats of the core crate, so stages can be chained through files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctxauth_core::auth::{self, RunDecisions, AUTHENTIC};
use ctxauth_core::estimators::load_estimates;
use ctxauth_core::harness::{self, PredictorKind, ScenarioConfig};
use ctxauth_core::kalman::track_predictions;
use ctxauth_core::mobility::load_trace;
use ctxauth_core::predict::{identity_baseline, load_predictions, write_predictions};
use ctxauth_core::rnn::{load_model, predict_next};
use ctxauth_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ctxauth", version, about = "Tracking-based authentication of a moving underwater transmitter")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON). Defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "ctxauth-out")]
    out: PathBuf,
    /// Worker threads for Monte-Carlo trials.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Configuration override, e.g. `--set kalman.q_accel=0.1`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Full Monte-Carlo run: every stage, per-trial artifacts and a summary.
    Run,
    /// Trajectories, position estimates and, if enabled, channel snapshots
    /// and SCM tensors for every trial.
    Simulate,
    /// Runs a predictor over an estimate file and writes a prediction log.
    Track {
        #[arg(long)]
        estimates: PathBuf,
        /// Defaults to the configured predictor.
        #[arg(long, value_enum)]
        predictor: Option<TrackPredictor>,
        /// Trained model for `--predictor rnn`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Applies the authentication test to prediction logs.
    Auth {
        /// One prediction log per run; run ids follow the argument order.
        #[arg(long, num_args = 1.., required = true)]
        predictions: Vec<PathBuf>,
        /// Labelled trajectories giving the true source of each sample, in
        /// the same order. Without them every sample is taken as legitimate.
        #[arg(long, num_args = 1..)]
        trajectory: Vec<PathBuf>,
        /// Threshold in m^2. Defaults to the configured one, else to the
        /// configured false-alarm target on the given runs.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0)]
        first_run_id: u64,
    },
    /// Aggregates decision files into one DET curve.
    Det {
        #[arg(long, num_args = 1.., required = true)]
        decisions: Vec<PathBuf>,
    },
    /// Summarizes error files.
    Stats {
        #[arg(long, num_args = 1.., required = true)]
        errors: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TrackPredictor {
    Kalman,
    Rnn,
    Identity,
}

fn load_config(c: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &c.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let cfg = cfg.with_overrides(&c.overrides)?;
    cfg.validate()?;
    if c.workers == 0 {
        return Err(Error::Config("--workers must be positive".into()));
    }
    Ok(cfg)
}

fn create_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn track(cfg: &ScenarioConfig, out: &Path, estimates: &Path, kind: Option<TrackPredictor>, model: Option<&Path>) -> Result<()> {
    let est = load_estimates(estimates)?;
    let kind = kind.unwrap_or(match cfg.predictor {
        PredictorKind::Kalman => TrackPredictor::Kalman,
        PredictorKind::Rnn => TrackPredictor::Rnn,
        PredictorKind::Identity => TrackPredictor::Identity,
        PredictorKind::Truth => return Err(Error::Config("the truth predictor needs trajectories; use `run`".into())),
    });
    let predictions = match kind {
        TrackPredictor::Kalman => track_predictions(&est, &cfg.kalman.build(cfg.estimator.sigma_pos)?)?,
        TrackPredictor::Rnn => {
            let path = model
                .or(cfg.rnn.model_path.as_deref())
                .ok_or_else(|| Error::Config("--model is required for the rnn predictor".into()))?;
            predict_next(&load_model(path)?, &est)?
        }
        TrackPredictor::Identity => {
            ctxauth_core::predict::check_spacing(&est, cfg.mobility.period)?;
            identity_baseline(&est)
        }
    };
    create_out(out)?;
    write_predictions(&out.join(harness::run::PREDICTIONS_FILE), &predictions)
}

fn authenticate(
    cfg: &ScenarioConfig,
    out: &Path,
    predictions: &[PathBuf],
    trajectories: &[PathBuf],
    lambda: Option<f64>,
    first_run_id: u64,
) -> Result<()> {
    if !trajectories.is_empty() && trajectories.len() != predictions.len() {
        return Err(Error::Config(format!(
            "{} prediction logs but {} trajectories",
            predictions.len(),
            trajectories.len()
        )));
    }
    let mut runs = Vec::with_capacity(predictions.len());
    for (i, path) in predictions.iter().enumerate() {
        let preds = load_predictions(path)?;
        let labels: Vec<u8> = match trajectories.get(i) {
            Some(t) => {
                let trace = load_trace(t)?;
                // Prediction k is for trace instant k + 1.
                trace.labels.iter().skip(1).map(|s| s.label()).collect()
            }
            None => vec![AUTHENTIC; preds.len()],
        };
        runs.push((preds, labels));
    }
    let n_a = cfg.auth.n_a;
    let lambda = match lambda.or(cfg.auth.lambda) {
        Some(l) => l,
        None => {
            let mut legit = Vec::new();
            for (p, l) in &runs {
                legit.extend(auth::split_decided(&auth::run_protocol(p, l, 0.0, n_a)?).0);
            }
            auth::threshold_for_pfa(&legit, cfg.auth.target_pfa)?
        }
    };
    let decided = runs
        .iter()
        .enumerate()
        .map(|(i, (p, l))| {
            Ok(RunDecisions {
                run_id: first_run_id + i as u64,
                samples: auth::run_protocol(p, l, lambda, n_a)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    create_out(out)?;
    auth::write_decisions(&out.join(harness::run::DECISIONS_FILE), &decided)?;
    println!("lambda_m2 {lambda}");
    Ok(())
}

fn det(out: &Path, files: &[PathBuf]) -> Result<()> {
    let mut samples = Vec::new();
    for f in files {
        for run in auth::load_decisions(f)? {
            samples.extend(run.samples);
        }
    }
    let (legit, attack) = auth::split_decided(&samples);
    let curve = auth::det_curve(&legit, &attack)?;
    create_out(out)?;
    auth::write_det(&out.join("det.csv"), &curve)
}

fn stats(out: &Path, files: &[PathBuf]) -> Result<()> {
    let mut pairs = Vec::new();
    for f in files {
        pairs.extend(harness::load_errors(f)?.into_iter().map(|r| (r.truth, r.estimate)));
    }
    let s = harness::summarize_errors(&pairs)?;
    let text = serde_json::to_string_pretty(&s).expect("serializable");
    create_out(out)?;
    write_text(&out.join("stats.json"), &format!("{text}\n"))?;
    println!("{text}");
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    let out = cli.common.out.as_path();
    match cli.command {
        Command::Run => {
            let r = harness::run_monte_carlo(&cfg, cli.common.workers, Some(out))?;
            println!("{}", serde_json::to_string_pretty(&r.summary).expect("serializable"));
            Ok(())
        }
        Command::Simulate => harness::simulate(&cfg, cli.common.workers, out).map(|_| ()),
        Command::Track {
            estimates,
            predictor,
            model,
        } => track(&cfg, out, &estimates, predictor, model.as_deref()),
        Command::Auth {
            predictions,
            trajectory,
            lambda,
            first_run_id,
        } => authenticate(&cfg, out, &predictions, &trajectory, lambda, first_run_id),
        Command::Det { decisions } => det(out, &decisions),
        Command::Stats { errors } => stats(out, &errors),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
