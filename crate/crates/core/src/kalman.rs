//! Constant-velocity Kalman filter with a one-step-ahead position output.
//!
//! The state is `h = (x, vx, y, vy)`. Each instant runs the usual
//! predict/correct cycle; the covariance is corrected in Joseph form. The
//! prediction used for authentication is `p_hat(t) = O F h_corr(t - T)`,
//! i.e. the position part of the time update of the last corrected state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::PositionEstimate;
use crate::geom::Vec2;
use crate::predict::{check_spacing, Prediction};

pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];
pub type Mat2 = [[f64; 2]; 2];
/// Observation matrix, 2 x 4.
pub type Obs = [[f64; 4]; 2];
/// Gain, 4 x 2.
pub type Gain = [[f64; 2]; 4];

/// Initial covariance scale.
pub const P0_SCALE: f64 = 1e3;
/// Initial velocity guess per axis, m/s.
pub const V0_GUESS: f64 = 1.0;
/// Innovation covariances with a larger 1-norm condition number are
/// treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Scalar settings from which the matrices are built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanSettings {
    /// Sampling period, s.
    #[serde(rename = "T")]
    pub period: f64,
    /// White-acceleration standard deviation, m/s^2.
    pub q_accel: f64,
    /// Measurement noise std per axis, m. `None` means "use the estimator's
    /// sigma".
    pub r_std: Option<f64>,
}

impl Default for KalmanSettings {
    fn default() -> Self {
        Self {
            period: 10.0,
            q_accel: 0.05,
            r_std: None,
        }
    }
}

impl KalmanSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::Config(format!("kalman.T {} must be > 0", self.period)));
        }
        if !(self.q_accel >= 0.0 && self.q_accel.is_finite()) {
            return Err(Error::Config(format!("kalman.q_accel {} must be >= 0", self.q_accel)));
        }
        if let Some(r) = self.r_std {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("kalman.r_std {r} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Builds the filter matrices; `fallback_r_std` is used when `r_std`
    /// is unset.
    pub fn build(&self, fallback_r_std: f64) -> Result<KalmanConfig> {
        self.validate()?;
        let r = self.r_std.unwrap_or(fallback_r_std);
        Ok(KalmanConfig::constant_velocity(self.period, self.q_accel, r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    pub period: f64,
    pub f: Mat4,
    pub o: Obs,
    pub qn: Mat4,
    pub r: Mat2,
}

impl KalmanConfig {
    /// `F` with `[1 T; 0 1]` blocks, `O` picking the positions,
    /// white-acceleration `Qn` and isotropic `R`.
    pub fn constant_velocity(period: f64, q_accel: f64, r_std: f64) -> Self {
        let t = period;
        let f = [
            [1.0, t, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, t],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let o = [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];
        let q2 = q_accel * q_accel;
        let (a, b, c) = (q2 * t.powi(4) / 4.0, q2 * t.powi(3) / 2.0, q2 * t * t);
        let qn = [
            [a, b, 0.0, 0.0],
            [b, c, 0.0, 0.0],
            [0.0, 0.0, a, b],
            [0.0, 0.0, b, c],
        ];
        let r2 = r_std * r_std;
        Self {
            period,
            f,
            o,
            qn,
            r: [[r2, 0.0], [0.0, r2]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub h: Vec4,
    pub p: Mat4,
}

impl KalmanState {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.h[0], self.h[2])
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.h[1], self.h[3])
    }
}

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose4(a: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn mat4_vec(a: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = (0..4).map(|k| a[i][k] * v[k]).sum();
    }
    out
}

fn observe(o: &Obs, v: &Vec4) -> [f64; 2] {
    [0, 1].map(|i| (0..4).map(|k| o[i][k] * v[k]).sum())
}

/// Inverse of a 2 x 2 matrix by Gaussian elimination with partial
/// pivoting. Fails when the 1-norm condition number exceeds
/// [`MAX_CONDITION`] or is not finite.
pub fn invert_2x2(s: &Mat2) -> Result<Mat2> {
    let norm1 = |m: &Mat2| (m[0][0].abs() + m[1][0].abs()).max(m[0][1].abs() + m[1][1].abs());
    let (p, q) = if s[0][0].abs() >= s[1][0].abs() { (0, 1) } else { (1, 0) };
    let pivot = s[p][0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let l = s[q][0] / pivot;
    let u11 = s[q][1] - l * s[p][1];
    if u11 == 0.0 || !u11.is_finite() {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let mut inv = [[0.0; 2]; 2];
    for col in 0..2 {
        // Right-hand side is the identity column, permuted.
        let rhs = [if p == col { 1.0 } else { 0.0 }, if q == col { 1.0 } else { 0.0 }];
        let y1 = rhs[1] - l * rhs[0];
        let x1 = y1 / u11;
        let x0 = (rhs[0] - s[p][1] * x1) / pivot;
        inv[0][col] = x0;
        inv[1][col] = x1;
    }
    let condition = norm1(s) * norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular { condition });
    }
    Ok(inv)
}

pub fn init_state(p0: Vec2) -> KalmanState {
    let mut p = [[0.0; 4]; 4];
    for (i, row) in p.iter_mut().enumerate() {
        row[i] = P0_SCALE;
    }
    KalmanState {
        h: [p0.x, V0_GUESS, p0.y, V0_GUESS],
        p,
    }
}

/// `h <- F h`, `P <- F P F' + Qn`.
pub fn time_update(s: &KalmanState, cfg: &KalmanConfig) -> KalmanState {
    let h = mat4_vec(&cfg.f, &s.h);
    let mut p = mat4_mul(&mat4_mul(&cfg.f, &s.p), &transpose4(&cfg.f));
    for i in 0..4 {
        for j in 0..4 {
            p[i][j] += cfg.qn[i][j];
        }
    }
    KalmanState { h, p }
}

/// Kalman gain `K = P O' (O P O' + R)^-1`.
pub fn gain(s: &KalmanState, cfg: &KalmanConfig) -> Result<Gain> {
    let o = &cfg.o;
    // P O', 4 x 2
    let mut po = [[0.0; 2]; 4];
    for i in 0..4 {
        for j in 0..2 {
            po[i][j] = (0..4).map(|k| s.p[i][k] * o[j][k]).sum();
        }
    }
    let mut innov = cfg.r;
    for i in 0..2 {
        for j in 0..2 {
            innov[i][j] += (0..4).map(|k| o[i][k] * po[k][j]).sum::<f64>();
        }
    }
    let inv = invert_2x2(&innov)?;
    let mut k = [[0.0; 2]; 4];
    for i in 0..4 {
        for j in 0..2 {
            k[i][j] = po[i][0] * inv[0][j] + po[i][1] * inv[1][j];
        }
    }
    Ok(k)
}

/// Corrects the state with measurement `z`, Joseph-form covariance.
pub fn measurement_update(s: &KalmanState, z: Vec2, cfg: &KalmanConfig) -> Result<KalmanState> {
    let k = gain(s, cfg)?;
    let zh = observe(&cfg.o, &s.h);
    let innov = [z.x - zh[0], z.y - zh[1]];
    let mut h = s.h;
    for (i, hi) in h.iter_mut().enumerate() {
        *hi += k[i][0] * innov[0] + k[i][1] * innov[1];
    }
    // A = I - K O
    let mut a = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = if i == j { 1.0 } else { 0.0 } - (k[i][0] * cfg.o[0][j] + k[i][1] * cfg.o[1][j]);
        }
    }
    let mut p = mat4_mul(&mat4_mul(&a, &s.p), &transpose4(&a));
    for i in 0..4 {
        for j in 0..4 {
            p[i][j] += (0..2)
                .map(|m| (0..2).map(|n| k[i][m] * cfg.r[m][n] * k[j][n]).sum::<f64>())
                .sum::<f64>();
        }
    }
    Ok(KalmanState { h, p })
}

/// `O F h` for a state already corrected with the estimate at `t - T`.
pub fn predict_position(s: &KalmanState, cfg: &KalmanConfig) -> Vec2 {
    let z = observe(&cfg.o, &mat4_vec(&cfg.f, &s.h));
    Vec2::new(z[0], z[1])
}

/// Streaming filter: feed estimates one at a time.
#[derive(Debug, Clone)]
pub struct KalmanTracker {
    cfg: KalmanConfig,
    state: Option<KalmanState>,
}

impl KalmanTracker {
    pub fn new(cfg: KalmanConfig) -> Self {
        Self { cfg, state: None }
    }

    pub fn state(&self) -> Option<&KalmanState> {
        self.state.as_ref()
    }

    /// Consumes `z`. Returns the prediction that was made for this instant
    /// before `z` was seen, or `None` for the first estimate.
    pub fn step(&mut self, z: Vec2) -> Result<Option<Vec2>> {
        match self.state {
            None => {
                let s = init_state(z);
                self.state = Some(measurement_update(&s, z, &self.cfg)?);
                Ok(None)
            }
            Some(ref s) => {
                let p_hat = predict_position(s, &self.cfg);
                let pred = time_update(s, &self.cfg);
                self.state = Some(measurement_update(&pred, z, &self.cfg)?);
                Ok(Some(p_hat))
            }
        }
    }
}

/// Runs the filter over an equally spaced estimate stream. One prediction
/// per instant from `t = T` onward, each paired with the state after the
/// estimate at that instant was absorbed.
pub fn track(estimates: &[PositionEstimate], cfg: &KalmanConfig) -> Result<Vec<(Prediction, KalmanState)>> {
    check_spacing(estimates, cfg.period)?;
    let mut tracker = KalmanTracker::new(*cfg);
    let mut out = Vec::with_capacity(estimates.len().saturating_sub(1));
    for e in estimates {
        if let Some(p_hat) = tracker.step(e.p)? {
            out.push((
                Prediction {
                    t: e.t,
                    p_hat,
                    p_tilde: e.p,
                },
                *tracker.state().expect("state set by step"),
            ));
        }
    }
    Ok(out)
}

/// [`track`] without the states.
pub fn track_predictions(estimates: &[PositionEstimate], cfg: &KalmanConfig) -> Result<Vec<Prediction>> {
    Ok(track(estimates, cfg)?.into_iter().map(|(p, _)| p).collect())
}
