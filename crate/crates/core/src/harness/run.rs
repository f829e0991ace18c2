//! Monte-Carlo orchestration. Every trial is a pure function of the master
//! seed and its index, so results do not depend on the worker count.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arrivals::{write_arrivals_file, ArrivalMap};
use super::config::{PredictorKind, ScenarioConfig};
use super::stats::{summarize_errors, write_errors, ErrorRecord, ErrorStats};
use crate::auth::{self, AuthSample, RunDecisions, AUTHENTIC};
use crate::channel::{self, add_noise, frequency_response, synthesize_arrivals, ChannelSnapshot, Node};
use crate::error::{Error, Result};
use crate::estimators::{oracle_stream, write_estimates, PositionEstimate};
use crate::kalman::{track_predictions, KalmanConfig};
use crate::mobility::{compose_attack_trace, simulate_trajectory, spawn_attacker, write_trace, LabeledTrace};
use crate::predict::{identity_baseline, write_predictions, Prediction};
use crate::rng::{derive_seed, stream, SimRng};
use crate::rnn::{predict_next, save_model, train, Normalization, RnnModel, Sequence, TrainOutcome};
use crate::scm::{preprocess, scm_from_snapshot, write_tensors, FoldedTensor};

/// Seed of trial `index`.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    derive_seed(derive_seed(master, stream::TRIAL), index as u64)
}

/// Directory of trial `index` below a run directory.
pub fn trial_dir(out: &Path, index: usize) -> PathBuf {
    out.join("trials").join(format!("{index:05}"))
}

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const DECISIONS_FILE: &str = "decisions.csv";
pub const ARRIVALS_FILE: &str = "arrivals.jsonl";
pub const SCM_FILE: &str = "scm.f64";
pub const SCM_SIDECAR: &str = "scm.json";

/// Trial input: the received trace and its position estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialInput {
    pub index: usize,
    pub attack: bool,
    pub seed: u64,
    pub trace: LabeledTrace,
    pub estimates: Vec<PositionEstimate>,
}

impl TrialInput {
    /// Labels of the predicted instants `1..M`.
    pub fn prediction_labels(&self) -> Vec<u8> {
        self.trace.labels[1..].iter().map(|s| s.label()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub input: TrialInput,
    pub predictions: Vec<Prediction>,
    pub samples: Vec<AuthSample>,
}

/// Index `i < n_legit` is a legitimate trial, the rest are attacks.
pub fn generate_trial(cfg: &ScenarioConfig, index: usize) -> Result<TrialInput> {
    let seed = trial_seed(cfg.seed, index);
    let attack = index >= cfg.trials.n_legit;
    let alice = simulate_trajectory(&cfg.mobility, cfg.samples, derive_seed(seed, stream::ALICE))?;
    let trace = if attack {
        let eve = spawn_attacker(&alice, &cfg.attack, &cfg.mobility, derive_seed(seed, stream::EVE))?;
        compose_attack_trace(&alice, &eve, cfg.attack.onset_index)?
    } else {
        LabeledTrace::legitimate(&alice)
    };
    let estimates = oracle_stream(
        trace.samples.iter().map(|s| (s.t, s.p)),
        &cfg.estimator,
        derive_seed(seed, stream::ESTIMATOR),
    );
    Ok(TrialInput {
        index,
        attack,
        seed,
        trace,
        estimates,
    })
}

pub enum Predictor {
    Kalman(KalmanConfig),
    Rnn(Box<RnnModel>),
    Identity,
    Truth,
}

impl Predictor {
    pub fn predict(&self, input: &TrialInput) -> Result<Vec<Prediction>> {
        match self {
            Predictor::Kalman(k) => track_predictions(&input.estimates, k),
            Predictor::Rnn(m) => predict_next(m, &input.estimates),
            Predictor::Identity => Ok(identity_baseline(&input.estimates)),
            Predictor::Truth => Ok(input
                .estimates
                .iter()
                .zip(&input.trace.samples)
                .skip(1)
                .map(|(e, s)| Prediction {
                    t: e.t,
                    p_hat: s.p,
                    p_tilde: e.p,
                })
                .collect()),
        }
    }
}

/// Noisy estimate tracks for RNN training, drawn from their own streams.
pub fn training_sequences(cfg: &ScenarioConfig, stream_id: u64, n: usize) -> Result<Vec<Sequence>> {
    let base = derive_seed(cfg.seed, stream_id);
    (0..n)
        .map(|i| {
            let seed = derive_seed(base, i as u64);
            let traj = simulate_trajectory(&cfg.mobility, cfg.samples, derive_seed(seed, stream::ALICE))?;
            let est = oracle_stream(
                traj.samples.iter().map(|s| (s.t, s.p)),
                &cfg.estimator,
                derive_seed(seed, stream::ESTIMATOR),
            );
            Sequence::next_step(&est.iter().map(|e| e.p).collect::<Vec<_>>())
        })
        .collect()
}

/// Trains an RNN predictor from the configuration.
pub fn train_rnn(cfg: &ScenarioConfig) -> Result<TrainOutcome> {
    let model = RnnModel::new(
        &cfg.rnn.model,
        Normalization::from_area(&cfg.mobility.area),
        cfg.mobility.period,
        derive_seed(cfg.seed, stream::INIT),
    )?;
    let train_set = training_sequences(cfg, stream::TRAINING, cfg.rnn.n_train)?;
    let val_set = training_sequences(cfg, stream::VALIDATION, cfg.rnn.n_val)?;
    train(&model, &train_set, &val_set, &cfg.rnn.train)
}

/// Builds the configured predictor. An RNN without a model file is trained
/// here and returned alongside.
pub fn build_predictor(cfg: &ScenarioConfig) -> Result<(Predictor, Option<RnnModel>)> {
    Ok(match cfg.predictor {
        PredictorKind::Kalman => (Predictor::Kalman(cfg.kalman.build(cfg.estimator.sigma_pos)?), None),
        PredictorKind::Identity => (Predictor::Identity, None),
        PredictorKind::Truth => (Predictor::Truth, None),
        PredictorKind::Rnn => match &cfg.rnn.model_path {
            Some(path) => (Predictor::Rnn(Box::new(crate::rnn::load_model(path)?)), None),
            None => {
                let model = train_rnn(cfg)?.model;
                (Predictor::Rnn(Box::new(model.clone())), Some(model))
            }
        },
    })
}

/// Channel and SCM stage of one trial.
pub struct ChannelOutput {
    pub arrivals: ArrivalMap,
    pub tensors: Vec<FoldedTensor>,
}

/// Reference receiver power for the configured noise level; `None` when
/// noiseless.
pub fn calibrate(cfg: &ScenarioConfig) -> Result<Option<Vec<f64>>> {
    if cfg.channel.snr_db.is_none() {
        return Ok(None);
    }
    let positions = channel::calibration_positions(
        &cfg.receivers,
        cfg.channel.calibration_per_rx,
        derive_seed(cfg.seed, stream::CALIBRATION),
    );
    channel::reference_power(&positions, cfg.channel.tx_depth, &cfg.receivers, &cfg.environment, &cfg.grid).map(Some)
}

pub fn channel_stage(cfg: &ScenarioConfig, input: &TrialInput, power: Option<&[f64]>) -> Result<ChannelOutput> {
    let env = if cfg.channel.random_chemistry {
        cfg.environment
            .with_random_chemistry(&mut SimRng::substream(input.seed, stream::ENVIRONMENT))
    } else {
        cfg.environment
    };
    let noise_base = derive_seed(input.seed, stream::CHANNEL_NOISE);
    let mut arrivals = ArrivalMap::new();
    let mut tensors = Vec::with_capacity(input.trace.len());
    for (t_idx, s) in input.trace.samples.iter().enumerate() {
        let tx = Node::new(s.p, cfg.channel.tx_depth);
        let mut rows = Vec::with_capacity(cfg.receivers.len());
        for (r, rx) in cfg.receivers.iter().enumerate() {
            let set = synthesize_arrivals(&tx, rx, &env, cfg.grid.f0)?;
            rows.push(frequency_response(&set, &cfg.grid)?);
            arrivals.insert((t_idx as u64, r), set);
        }
        let mut snap = ChannelSnapshot::from_rows(rows)?;
        if let (Some(snr), Some(p)) = (cfg.channel.snr_db, power) {
            snap = add_noise(&snap, snr, p, derive_seed(noise_base, t_idx as u64))?;
        }
        tensors.push(preprocess(&scm_from_snapshot(&snap)?)?);
    }
    Ok(ChannelOutput { arrivals, tensors })
}

fn with_trial<T>(index: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Trial {
        trial: index,
        source: Box::new(e),
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs `f` over all trial indices on a pool of `workers` threads and
/// returns results in index order. The first failing index wins.
fn par_trials<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| (0..n).into_par_iter().map(|i| with_trial(i, f(i))).collect());
    results.into_iter().collect()
}

fn write_inputs(cfg: &ScenarioConfig, out: &Path, input: &TrialInput, power: Option<&[f64]>) -> Result<()> {
    let dir = trial_dir(out, input.index);
    create_dir(&dir)?;
    write_trace(&dir.join(TRAJECTORY_FILE), &input.trace)?;
    write_estimates(&dir.join(ESTIMATES_FILE), &input.estimates)?;
    if cfg.channel.enabled {
        let ch = channel_stage(cfg, input, power)?;
        write_arrivals_file(&dir.join(ARRIVALS_FILE), &ch.arrivals)?;
        write_tensors(&dir.join(SCM_FILE), &dir.join(SCM_SIDECAR), &ch.tensors)?;
    }
    Ok(())
}

fn checked(cfg: &ScenarioConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.trials.n_attack > 0 && cfg.trials.n_legit == 0 && cfg.auth.lambda.is_none() && cfg.attack.onset_index <= cfg.auth.n_a + 1 {
        return Err(Error::Config(
            "no legitimate decided samples to set the threshold from; give auth.lambda".into(),
        ));
    }
    Ok(())
}

/// Generation stage only: trajectories, estimates and, when enabled, the
/// channel artifacts of every trial, written below `out`.
pub fn simulate(cfg: &ScenarioConfig, workers: usize, out: &Path) -> Result<Vec<TrialInput>> {
    cfg.validate()?;
    create_dir(out)?;
    write_text(&out.join("config.json"), &(cfg.to_json() + "\n"))?;
    let power = if cfg.channel.enabled { calibrate(cfg)? } else { None };
    let n = cfg.trials.n_legit + cfg.trials.n_attack;
    par_trials(n, workers, |i| {
        let input = generate_trial(cfg, i)?;
        write_inputs(cfg, out, &input, power.as_deref())?;
        Ok(input)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub rmse_x_m: f64,
    pub rmse_y_m: f64,
    pub mape_x_pct: Option<f64>,
    pub mape_y_pct: Option<f64>,
    pub median_err_m: f64,
    pub q1_m: f64,
    pub q3_m: f64,
    /// `None` when the class has no decided samples.
    pub p_fa: Option<f64>,
    pub p_md: Option<f64>,
    pub n_excluded_mape: usize,
    pub whisker_lo_m: f64,
    pub whisker_hi_m: f64,
    pub n_error_samples: usize,
    pub lambda_m2: f64,
    pub n_legit_trials: usize,
    pub n_attack_trials: usize,
    pub n_legit_decided: usize,
    pub n_attack_decided: usize,
    pub predictor: PredictorKind,
    /// Statistics of the position estimates themselves.
    pub estimator: ErrorStats,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub trials: Vec<TrialResult>,
    pub det: Option<auth::DetCurve>,
    pub lambda: f64,
    pub predictor_stats: ErrorStats,
}

/// Predicted and estimated positions against the truth, over the
/// legitimately transmitted predicted instants of every trial.
pub fn error_records(trials: &[TrialResult]) -> (Vec<ErrorRecord>, Vec<(crate::geom::Vec2, crate::geom::Vec2)>) {
    let mut pred = Vec::new();
    let mut est = Vec::new();
    for tr in trials {
        let inp = &tr.input;
        for (k, p) in tr.predictions.iter().enumerate() {
            let s = &inp.trace.samples[k + 1];
            if inp.trace.labels[k + 1].label() != AUTHENTIC {
                continue;
            }
            pred.push(ErrorRecord {
                run_id: inp.index as u64,
                t: p.t,
                truth: s.p,
                estimate: p.p_hat,
            });
            est.push((s.p, inp.estimates[k + 1].p));
        }
    }
    (pred, est)
}

fn rate(hits: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Full pipeline. With `out`, the run directory receives `config.json`,
/// `summary.json`, aggregate `det.csv`, `decisions.csv` and `errors.csv`,
/// and one directory per trial.
pub fn run_monte_carlo(cfg: &ScenarioConfig, workers: usize, out: Option<&Path>) -> Result<RunOutput> {
    checked(cfg)?;
    let (predictor, trained) = build_predictor(cfg)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_text(&dir.join("config.json"), &(cfg.to_json() + "\n"))?;
        if let Some(model) = &trained {
            save_model(&dir.join("model.json"), model)?;
        }
    }
    let power = match (out, cfg.channel.enabled) {
        (Some(_), true) => calibrate(cfg)?,
        _ => None,
    };
    let n = cfg.trials.n_legit + cfg.trials.n_attack;
    let n_a = cfg.auth.n_a;
    let stage1 = par_trials(n, workers, |i| {
        let input = generate_trial(cfg, i)?;
        if let Some(dir) = out {
            write_inputs(cfg, dir, &input, power.as_deref())?;
        }
        let predictions = predictor.predict(&input)?;
        let samples = auth::run_protocol(&predictions, &input.prediction_labels(), 0.0, n_a)?;
        Ok((input, predictions, samples))
    })?;

    let all: Vec<AuthSample> = stage1.iter().flat_map(|(_, _, s)| s.iter().copied()).collect();
    let (legit_e, attack_e) = auth::split_decided(&all);
    let lambda = match cfg.auth.lambda {
        Some(l) => l,
        None => auth::threshold_for_pfa(&legit_e, cfg.auth.target_pfa)?,
    };
    let trials: Vec<TrialResult> = stage1
        .into_iter()
        .map(|(input, predictions, _)| {
            let samples = with_trial(
                input.index,
                auth::run_protocol(&predictions, &input.prediction_labels(), lambda, n_a),
            )?;
            Ok(TrialResult {
                input,
                predictions,
                samples,
            })
        })
        .collect::<Result<_>>()?;

    let (records, est_pairs) = error_records(&trials);
    let pairs: Vec<_> = records.iter().map(|r| (r.truth, r.estimate)).collect();
    let stats = summarize_errors(&pairs)?;
    let est_stats = summarize_errors(&est_pairs)?;
    let fa = legit_e.iter().filter(|e| **e >= lambda).count();
    let md = attack_e.iter().filter(|e| **e < lambda).count();
    let det = if !legit_e.is_empty() && !attack_e.is_empty() {
        Some(auth::det_curve(&legit_e, &attack_e)?)
    } else {
        None
    };
    let summary = RunSummary {
        rmse_x_m: stats.rmse_x_m,
        rmse_y_m: stats.rmse_y_m,
        mape_x_pct: stats.mape_x_pct,
        mape_y_pct: stats.mape_y_pct,
        median_err_m: stats.median_err_m,
        q1_m: stats.q1_m,
        q3_m: stats.q3_m,
        p_fa: rate(fa, legit_e.len()),
        p_md: rate(md, attack_e.len()),
        n_excluded_mape: stats.n_excluded_mape,
        whisker_lo_m: stats.whisker_lo_m,
        whisker_hi_m: stats.whisker_hi_m,
        n_error_samples: stats.n,
        lambda_m2: lambda,
        n_legit_trials: cfg.trials.n_legit,
        n_attack_trials: cfg.trials.n_attack,
        n_legit_decided: legit_e.len(),
        n_attack_decided: attack_e.len(),
        predictor: cfg.predictor,
        estimator: est_stats,
    };

    if let Some(dir) = out {
        par_trials(n, workers, |i| {
            let tr = &trials[i];
            let tdir = trial_dir(dir, i);
            write_predictions(&tdir.join(PREDICTIONS_FILE), &tr.predictions)?;
            auth::write_decisions(
                &tdir.join(DECISIONS_FILE),
                &[RunDecisions {
                    run_id: i as u64,
                    samples: tr.samples.clone(),
                }],
            )
        })?;
        let runs: Vec<RunDecisions> = trials
            .iter()
            .map(|t| RunDecisions {
                run_id: t.input.index as u64,
                samples: t.samples.clone(),
            })
            .collect();
        auth::write_decisions(&dir.join(DECISIONS_FILE), &runs)?;
        if let Some(curve) = &det {
            auth::write_det(&dir.join("det.csv"), curve)?;
        }
        write_errors(&dir.join("errors.csv"), &records)?;
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        write_text(&dir.join("summary.json"), &(text + "\n"))?;
    }
    Ok(RunOutput {
        summary,
        trials,
        det,
        lambda,
        predictor_stats: stats,
    })
}
