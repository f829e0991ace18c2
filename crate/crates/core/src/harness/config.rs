//! Scenario configuration: one JSON document, every field optional, plus
//! flat `section.key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{Environment, Node, SubbandGrid};
use crate::error::{Error, Result};
use crate::estimators::OracleConfig;
use crate::geom::Vec2;
use crate::kalman::KalmanSettings;
use crate::mobility::{AttackScenario, GaussMarkovParams};
use crate::rnn::{RnnConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Kalman,
    Rnn,
    /// `p_hat(t) = p_tilde(t - T)`.
    Identity,
    /// The true position of the transmitter; a test double.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnnSection {
    pub model: RnnConfig,
    pub train: TrainConfig,
    /// Trajectories generated for training and validation when no model
    /// file is given.
    pub n_train: usize,
    pub n_val: usize,
    pub model_path: Option<PathBuf>,
}

impl Default for RnnSection {
    fn default() -> Self {
        Self {
            model: RnnConfig::default(),
            train: TrainConfig::default(),
            n_train: 400,
            n_val: 100,
            model_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthSettings {
    /// Pilot length N_a.
    pub n_a: usize,
    /// Fixed threshold, m^2. When unset the threshold is the smallest one
    /// with empirical false-alarm rate at most `target_pfa` on the
    /// legitimate samples.
    pub lambda: Option<f64>,
    pub target_pfa: f64,
}

impl Default for AuthSettings {
    fn default() -> Self {
        Self {
            n_a: crate::auth::DEFAULT_WARMUP,
            lambda: None,
            target_pfa: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSettings {
    /// Run the acoustic channel and SCM stages for every trial.
    pub enabled: bool,
    /// Per-trial water chemistry drawn from the documented ranges.
    pub random_chemistry: bool,
    /// `null` means noiseless.
    pub snr_db: Option<f64>,
    /// Calibration positions per receiver for the reference power.
    pub calibration_per_rx: usize,
    /// Transmitter depth, m.
    pub tx_depth: f64,
}

impl Default for ChannelSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            random_chemistry: true,
            snr_db: Some(20.0),
            calibration_per_rx: 50,
            tx_depth: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Trials {
    pub n_legit: usize,
    pub n_attack: usize,
}

impl Default for Trials {
    fn default() -> Self {
        Self {
            n_legit: 500,
            n_attack: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Samples per trajectory, M.
    pub samples: usize,
    pub mobility: GaussMarkovParams,
    pub receivers: Vec<Node>,
    pub environment: Environment,
    pub grid: SubbandGrid,
    pub channel: ChannelSettings,
    pub estimator: OracleConfig,
    pub predictor: PredictorKind,
    pub kalman: KalmanSettings,
    pub rnn: RnnSection,
    pub attack: AttackScenario,
    pub auth: AuthSettings,
    pub trials: Trials,
}

/// Ten receivers on a vertical line east of the area, 10 m apart.
pub fn default_receivers() -> Vec<Node> {
    (0..10)
        .map(|i| Node::new(Vec2::new(1970.0, 1230.0 + 10.0 * i as f64), 50.0))
        .collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 50,
            mobility: GaussMarkovParams::default(),
            receivers: default_receivers(),
            environment: Environment::default(),
            grid: SubbandGrid::default(),
            channel: ChannelSettings::default(),
            estimator: OracleConfig::default(),
            predictor: PredictorKind::Kalman,
            kalman: KalmanSettings::default(),
            rnn: RnnSection::default(),
            attack: AttackScenario::default(),
            auth: AuthSettings::default(),
            trials: Trials::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::Config(format!("samples {} must be >= 2", self.samples)));
        }
        self.mobility.validate()?;
        if self.receivers.is_empty() {
            return Err(Error::Config("at least one receiver is required".into()));
        }
        if self.receivers.iter().any(|r| !r.p.is_finite() || !r.depth.is_finite()) {
            return Err(Error::Config("receiver coordinates must be finite".into()));
        }
        self.environment.validate()?;
        self.grid.validate()?;
        if let Some(snr) = self.channel.snr_db {
            if !snr.is_finite() {
                return Err(Error::Config("channel.snr_db must be finite or null".into()));
            }
        }
        if self.channel.enabled && self.channel.calibration_per_rx == 0 {
            return Err(Error::Config("channel.calibration_per_rx must be positive".into()));
        }
        if !(self.channel.tx_depth > 0.0 && self.channel.tx_depth < self.environment.depth_water) {
            return Err(Error::Config(format!(
                "channel.tx_depth {} outside the water column",
                self.channel.tx_depth
            )));
        }
        self.estimator.validate()?;
        self.kalman.validate()?;
        if (self.kalman.period - self.mobility.period).abs() > 1e-12 * self.mobility.period {
            return Err(Error::Config(format!(
                "kalman.T {} differs from mobility.T {}",
                self.kalman.period, self.mobility.period
            )));
        }
        if self.predictor == PredictorKind::Rnn {
            self.rnn.model.validate()?;
            self.rnn.train.validate()?;
            if self.rnn.model_path.is_none() && (self.rnn.n_train == 0 || self.rnn.n_val == 0) {
                return Err(Error::Config("rnn.n_train and rnn.n_val must be positive".into()));
            }
        }
        if self.trials.n_attack > 0 {
            self.attack.validate(self.samples)?;
        }
        if let Some(l) = self.auth.lambda {
            if !(l >= 0.0) {
                return Err(Error::Config(format!("auth.lambda {l} must be >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.auth.target_pfa) {
            return Err(Error::Config(format!("auth.target_pfa {} outside [0, 1]", self.auth.target_pfa)));
        }
        if self.trials.n_legit + self.trials.n_attack == 0 {
            return Err(Error::Config("no trials requested".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` overrides such as `kalman.q_accel=0.1` or
    /// `trials.n_attack=0`. Values are parsed as JSON, falling back to a
    /// plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{raw}` is not key=value")))?;
            let value: Value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
            let mut node = &mut doc;
            let parts: Vec<&str> = key.split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let obj = node
                    .as_object_mut()
                    .ok_or_else(|| Error::Config(format!("`{key}`: `{part}` is not inside a section")))?;
                if !obj.contains_key(*part) {
                    return Err(Error::Config(format!("unknown configuration key `{key}`")));
                }
                if i + 1 == parts.len() {
                    obj.insert((*part).to_string(), value.clone());
                    break;
                }
                node = obj.get_mut(*part).expect("checked");
            }
        }
        serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert_eq!(cfg.receivers.len(), 10);
        assert_eq!(cfg.receivers[9].p, Vec2::new(1970.0, 1320.0));
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg = ScenarioConfig::from_json(r#"{"seed": 7, "kalman": {"q_accel": 0.2}, "mobility": {"alpha": 0.9}}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.kalman.q_accel, 0.2);
        assert_eq!(cfg.kalman.period, 10.0);
        assert_eq!(cfg.mobility.alpha, 0.9);
        assert_eq!(cfg.mobility.sigma_v, 2.0);
        assert!(matches!(ScenarioConfig::from_json(r#"{"sede": 7}"#), Err(Error::Config(_))));
    }

    #[test]
    fn flat_overrides() {
        let cfg = ScenarioConfig::default()
            .with_overrides(&["kalman.q_accel=0.5", "kalman.r_std=12", "predictor=rnn", "trials.n_attack=0"])
            .unwrap();
        assert_eq!(cfg.kalman.q_accel, 0.5);
        assert_eq!(cfg.kalman.r_std, Some(12.0));
        assert_eq!(cfg.predictor, PredictorKind::Rnn);
        assert_eq!(cfg.trials.n_attack, 0);
        let t = ScenarioConfig::default().with_overrides(&["kalman.T=5", "mobility.T=5"]).unwrap();
        t.validate().unwrap();
        for bad in ["kalman.nope=1", "kalman", "seed.x=1", "kalman.q_accel=\"x\""] {
            assert!(matches!(ScenarioConfig::default().with_overrides(&[bad]), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn validation_catches_inconsistencies() {
        let mut cfg = ScenarioConfig::default();
        cfg.kalman.period = 5.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.receivers.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.attack.onset_index = 50;
        assert!(cfg.validate().is_err());
        cfg.trials.n_attack = 0;
        cfg.validate().unwrap();
    }
}
