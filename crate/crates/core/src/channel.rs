//! Synthetic multipath channels.
//!
//! Arrivals come from the image method in a flat, iso-velocity waveguide
//! (pressure-release-like surface and a partially reflecting bottom). Each
//! arrival is frequency flat: absorption is evaluated once at the carrier.
//! Sub-band gains are the usual multipath sum
//! `H_k = Σ_i a_i · exp(−j·2π·f_k·τ_i)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Environment {
    /// Water column depth, m.
    pub depth_water: f64,
    /// m/s
    pub sound_speed: f64,
    pub surface_reflection: Complex64,
    pub bottom_reflection: Complex64,
    /// Maximum number of boundary reflections per path.
    pub max_bounces: u32,
    /// °C
    pub temperature: f64,
    /// ppt
    pub salinity: f64,
    #[serde(rename = "pH")]
    pub ph: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            depth_water: 100.0,
            sound_speed: 1500.0,
            surface_reflection: Complex64::new(-1.0, 0.0),
            bottom_reflection: Complex64::new(0.5, 0.0),
            max_bounces: 4,
            temperature: REFERENCE_TEMPERATURE,
            salinity: REFERENCE_SALINITY,
            ph: REFERENCE_PH,
        }
    }
}

/// Ranges over which the water chemistry is varied for robustness studies.
pub const TEMPERATURE_RANGE: (f64, f64) = (12.0, 24.0);
pub const SALINITY_RANGE: (f64, f64) = (30.0, 35.0);
pub const PH_RANGE: (f64, f64) = (6.0, 9.0);

pub const REFERENCE_TEMPERATURE: f64 = 14.0;
pub const REFERENCE_SALINITY: f64 = 35.0;
pub const REFERENCE_PH: f64 = 8.0;

impl Environment {
    pub fn validate(&self) -> Result<()> {
        if !(self.sound_speed > 0.0 && self.sound_speed.is_finite()) {
            return Err(Error::Config(format!("sound speed {} must be > 0", self.sound_speed)));
        }
        if !(self.depth_water > 0.0 && self.depth_water.is_finite()) {
            return Err(Error::Config(format!("water depth {} must be > 0", self.depth_water)));
        }
        if self.surface_reflection.norm() > 1.0 || self.bottom_reflection.norm() > 1.0 {
            return Err(Error::Config("reflection coefficients must satisfy |R| <= 1".into()));
        }
        if !(self.temperature.is_finite() && self.salinity > 0.0 && self.ph.is_finite()) {
            return Err(Error::Config("invalid water chemistry".into()));
        }
        Ok(())
    }

    /// Copy of `self` with temperature, salinity and pH drawn uniformly from
    /// their variability ranges.
    pub fn with_random_chemistry(&self, rng: &mut SimRng) -> Self {
        Self {
            temperature: rng.uniform_in(TEMPERATURE_RANGE.0, TEMPERATURE_RANGE.1),
            salinity: rng.uniform_in(SALINITY_RANGE.0, SALINITY_RANGE.1),
            ph: rng.uniform_in(PH_RANGE.0, PH_RANGE.1),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubbandGrid {
    /// Centre frequency, Hz.
    pub f0: f64,
    /// Total bandwidth, Hz.
    pub bandwidth: f64,
    /// Number of sub-bands.
    pub k: usize,
}

impl Default for SubbandGrid {
    fn default() -> Self {
        Self {
            f0: 11_500.0,
            bandwidth: 5_000.0,
            k: 48,
        }
    }
}

impl SubbandGrid {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || !(self.bandwidth > 0.0) || !(self.f0 > self.bandwidth / 2.0) {
            return Err(Error::Config(format!("invalid sub-band grid {self:?}")));
        }
        Ok(())
    }
}

/// Centres of `k` equal sub-bands tiling `[f0 − B/2, f0 + B/2]`:
/// `f_k = f0 − B/2 + (k − 1/2)·B/K`, k = 1..K.
pub fn subband_frequencies(grid: &SubbandGrid) -> Vec<f64> {
    let width = grid.bandwidth / grid.k as f64;
    (0..grid.k)
        .map(|i| grid.f0 - grid.bandwidth / 2.0 + (i as f64 + 0.5) * width)
        .collect()
}

/// Thorp absorption in dB/km with chemistry corrections.
///
/// The three Thorp terms are the boric-acid relaxation, the magnesium
/// sulphate relaxation and pure-water viscosity (plus the constant floor).
/// At the reference water (14 °C, 35 ppt, pH 8) the classic formula is
/// returned unchanged. Away from it each relaxation term is scaled by a
/// factor borrowed from the Ainslie–McColm dependencies:
///
/// ```text
/// boric  × exp((pH − 8)/0.56)
/// MgSO4  × (S/35) · (1 + T/43)/(1 + 14/43)
/// water  × exp(−(T − 14)/27)
/// ```
pub fn thorp_absorption(f_hz: f64, env: &Environment) -> f64 {
    let f = f_hz / 1000.0;
    let f2 = f * f;
    let boric = 0.11 * f2 / (1.0 + f2);
    let mgso4 = 44.0 * f2 / (4100.0 + f2);
    let water = 2.75e-4 * f2;
    let t = env.temperature;
    let boric_k = ((env.ph - REFERENCE_PH) / 0.56).exp();
    let mgso4_k = (env.salinity / REFERENCE_SALINITY) * (1.0 + t / 43.0) / (1.0 + REFERENCE_TEMPERATURE / 43.0);
    let water_k = (-(t - REFERENCE_TEMPERATURE) / 27.0).exp();
    boric * boric_k + mgso4 * mgso4_k + water * water_k + 0.003
}

/// A node of the network: horizontal position plus depth (m, positive down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub p: Vec2,
    pub depth: f64,
}

impl Node {
    pub fn new(p: Vec2, depth: f64) -> Self {
        Self { p, depth }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub amplitude: Complex64,
    /// Propagation delay, s.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArrivalSet(pub Vec<Arrival>);

impl ArrivalSet {
    pub fn iter(&self) -> std::slice::Iter<'_, Arrival> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy)]
enum Boundary {
    Surface,
    Bottom,
}

/// Image-method arrivals between `tx` and `rx` with up to
/// `env.max_bounces` reflections, absorption evaluated at `f0`.
///
/// Path amplitude is `Π R · 10^(−a(f0)·r/20000) / r` and delay `r / c`,
/// with `r` the length of the unfolded path in metres. For every bounce
/// count `b ≥ 1` there are two paths, one leaving towards the surface and
/// one towards the bottom.
pub fn synthesize_arrivals(tx: &Node, rx: &Node, env: &Environment, f0: f64) -> Result<ArrivalSet> {
    env.validate()?;
    let inside = |d: f64| d > 0.0 && d < env.depth_water;
    if !inside(tx.depth) || !inside(rx.depth) {
        return Err(Error::Geometry(format!(
            "depths {} / {} outside (0, {})",
            tx.depth, rx.depth, env.depth_water
        )));
    }
    let horizontal = (tx.p - rx.p).norm();
    if horizontal == 0.0 && tx.depth == rx.depth {
        return Err(Error::Geometry("transmitter and receiver coincide".into()));
    }

    let alpha = thorp_absorption(f0, env);
    let path = |z_image: f64, gain: Complex64| {
        let r = horizontal.hypot(z_image - rx.depth);
        Arrival {
            amplitude: gain * (10f64.powf(-alpha * r / 20_000.0) / r),
            delay: r / env.sound_speed,
        }
    };

    let mut arrivals = vec![path(tx.depth, Complex64::new(1.0, 0.0))];
    for first in [Boundary::Surface, Boundary::Bottom] {
        let mut z = tx.depth;
        let mut gain = Complex64::new(1.0, 0.0);
        let mut next = first;
        for _ in 0..env.max_bounces {
            match next {
                Boundary::Surface => {
                    z = -z;
                    gain *= env.surface_reflection;
                    next = Boundary::Bottom;
                }
                Boundary::Bottom => {
                    z = 2.0 * env.depth_water - z;
                    gain *= env.bottom_reflection;
                    next = Boundary::Surface;
                }
            }
            arrivals.push(path(z, gain));
        }
    }
    Ok(ArrivalSet(arrivals))
}

/// Gains of the sub-band centres.
pub fn frequency_response(arrivals: &ArrivalSet, grid: &SubbandGrid) -> Result<Vec<Complex64>> {
    if arrivals.is_empty() {
        return Err(Error::EmptyInput("arrival set has no paths".into()));
    }
    Ok(subband_frequencies(grid)
        .into_iter()
        .map(|f| {
            arrivals
                .iter()
                .map(|a| a.amplitude * Complex64::from_polar(1.0, -std::f64::consts::TAU * f * a.delay))
                .sum()
        })
        .collect())
}

/// `n_rx × k` complex gains at one sampling instant, receivers along rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSnapshot {
    pub n_rx: usize,
    pub k: usize,
    pub gains: Vec<Complex64>,
    pub noisy: bool,
}

impl ChannelSnapshot {
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n_rx = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if n_rx == 0 || k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch("snapshot rows must be non-empty and equal length".into()));
        }
        Ok(Self {
            n_rx,
            k,
            gains: rows.concat(),
            noisy: false,
        })
    }

    pub fn gain(&self, rx: usize, band: usize) -> Complex64 {
        self.gains[rx * self.k + band]
    }

    pub fn row(&self, rx: usize) -> &[Complex64] {
        &self.gains[rx * self.k..(rx + 1) * self.k]
    }

    /// Gains of every receiver at sub-band `band`.
    pub fn column(&self, band: usize) -> Vec<Complex64> {
        (0..self.n_rx).map(|r| self.gain(r, band)).collect()
    }
}

/// Noise-free snapshot for a transmitter at `tx`.
pub fn snapshot(tx: &Node, receivers: &[Node], env: &Environment, grid: &SubbandGrid) -> Result<ChannelSnapshot> {
    let rows = receivers
        .iter()
        .map(|rx| frequency_response(&synthesize_arrivals(tx, rx, env, grid.f0)?, grid))
        .collect::<Result<Vec<_>>>()?;
    ChannelSnapshot::from_rows(rows)
}

/// Calibration ring for reference power: range from each receiver.
pub const CALIBRATION_RANGE: (f64, f64) = (200.0, 300.0);

/// `per_rx` transmitter positions around each receiver, at a range uniform
/// in [200, 300] m and a uniform bearing.
pub fn calibration_positions(receivers: &[Node], per_rx: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = SimRng::new(seed);
    let mut out = Vec::with_capacity(receivers.len() * per_rx);
    for rx in receivers {
        for _ in 0..per_rx {
            let r = rng.uniform_in(CALIBRATION_RANGE.0, CALIBRATION_RANGE.1);
            let theta = rng.uniform_in(0.0, std::f64::consts::TAU);
            out.push(rx.p + Vec2::from_polar(r, theta));
        }
    }
    out
}

/// Average received power `P_r` of every receiver: mean of `|H_{r,k}|²`
/// over sub-bands and over the calibration positions lying 200–300 m from
/// that receiver.
pub fn reference_power(
    positions: &[Vec2],
    tx_depth: f64,
    receivers: &[Node],
    env: &Environment,
    grid: &SubbandGrid,
) -> Result<Vec<f64>> {
    let (lo, hi) = CALIBRATION_RANGE;
    receivers
        .iter()
        .enumerate()
        .map(|(r, rx)| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for p in positions.iter().filter(|p| (lo..=hi).contains(&(**p - rx.p).norm())) {
                let arrivals = synthesize_arrivals(&Node::new(*p, tx_depth), rx, env, grid.f0)?;
                for h in frequency_response(&arrivals, grid)? {
                    sum += h.norm_sqr();
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::EmptyInput(format!(
                    "no calibration position within {lo}-{hi} m of receiver {r}"
                )));
            }
            Ok(sum / count as f64)
        })
        .collect()
}

/// `σ_r² = P_r / 10^(SNR/10)`. An infinite SNR yields zero.
pub fn noise_variance(power: f64, snr_db: f64) -> f64 {
    power / 10f64.powf(snr_db / 10.0)
}

/// Adds circularly-symmetric complex Gaussian noise of variance `σ_r²` per
/// complex sample (`σ_r²/2` per real dimension), i.i.d. across receivers and
/// sub-bands.
pub fn add_noise(snapshot: &ChannelSnapshot, snr_db: f64, power: &[f64], seed: u64) -> Result<ChannelSnapshot> {
    if snapshot.noisy {
        return Err(Error::AlreadyNoisy);
    }
    if power.len() != snapshot.n_rx {
        return Err(Error::DimensionMismatch(format!(
            "{} reference powers for {} receivers",
            power.len(),
            snapshot.n_rx
        )));
    }
    if snr_db.is_nan() {
        return Err(Error::Config("SNR is NaN".into()));
    }
    let mut out = snapshot.clone();
    out.noisy = true;
    if snr_db == f64::INFINITY {
        return Ok(out);
    }
    let mut rng = SimRng::new(seed);
    for (r, &p) in power.iter().enumerate() {
        let std = (noise_variance(p, snr_db) / 2.0).sqrt();
        for g in &mut out.gains[r * out.k..(r + 1) * out.k] {
            let re = rng.normal(0.0, std);
            let im = rng.normal(0.0, std);
            *g += Complex64::new(re, im);
        }
    }
    Ok(out)
}
