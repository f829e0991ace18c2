//! Gauss-Markov mobility for the legitimate transmitter and the attacker.
//!
//! Velocity follows a first-order autoregressive process
//! `v' = α·v + η·sqrt(1 − α²)` with `η ~ N(0, σ_v² I)`, position advances
//! with the pre-update velocity (`p' = p + v·T`). Sources are confined to an
//! axis-aligned rectangle by specular reflection: a coordinate that leaves
//! the rectangle is mirrored about the crossed edge and the matching velocity
//! component changes sign.

use std::f64::consts::{FRAC_PI_4, TAU};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csvio::{self, Cell};
use crate::error::{Error, ParseErrorKind, Result};
use crate::geom::Vec2;
use crate::rng::SimRng;

/// Axis-aligned rectangle, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Area {
    /// Inner transmitter area used throughout the reference scenario.
    pub const REFERENCE: Area = Area {
        x_min: 313.0,
        x_max: 1813.0,
        y_min: 275.0,
        y_max: 2275.0,
    };

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::Config(format!("degenerate area {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.x_min, self.y_min),
            Vec2::new(self.x_min, self.y_max),
            Vec2::new(self.x_max, self.y_min),
            Vec2::new(self.x_max, self.y_max),
        ]
    }

    /// Reflect `p` (and the matching velocity components) back inside.
    fn confine(&self, p: &mut Vec2, v: &mut Vec2) {
        reflect_axis(&mut p.x, &mut v.x, self.x_min, self.x_max);
        reflect_axis(&mut p.y, &mut v.y, self.y_min, self.y_max);
    }
}

fn reflect_axis(p: &mut f64, v: &mut f64, lo: f64, hi: f64) {
    // A single step may cross the strip more than once.
    while *p < lo || *p > hi {
        if *p < lo {
            *p = 2.0 * lo - *p;
        } else {
            *p = 2.0 * hi - *p;
        }
        *v = -*v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussMarkovParams {
    /// Trajectory correlation factor α ∈ [0, 1].
    pub alpha: f64,
    /// Sampling period T in seconds.
    #[serde(rename = "T")]
    pub period: f64,
    /// Per-component speed-noise standard deviation, m/s.
    pub sigma_v: f64,
    /// Initial speed modulus, m/s.
    pub v0: f64,
    /// Source depth in metres. Informational: motion is planar.
    pub depth: f64,
    pub area: Area,
}

impl Default for GaussMarkovParams {
    fn default() -> Self {
        Self {
            alpha: 1.0 - 2e-3,
            period: 10.0,
            sigma_v: 2.0,
            v0: 2.0,
            depth: 50.0,
            area: Area::REFERENCE,
        }
    }
}

impl GaussMarkovParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::Config(format!("period {} must be > 0", self.period)));
        }
        if !(self.sigma_v >= 0.0 && self.sigma_v.is_finite()) {
            return Err(Error::Config(format!("sigma_v {} must be >= 0", self.sigma_v)));
        }
        if !(self.v0 >= 0.0 && self.v0.is_finite()) {
            return Err(Error::Config(format!("v0 {} must be >= 0", self.v0)));
        }
        self.area.validate()
    }

    /// Noise gain sqrt(1 − α²).
    fn innovation_gain(&self) -> f64 {
        (1.0 - self.alpha * self.alpha).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityState {
    pub t: f64,
    pub p: Vec2,
    pub v: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<MobilityState>,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.samples.iter().map(|s| s.p)
    }
}

/// Who transmitted a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Legitimate,
    Attacker,
}

impl Source {
    pub fn label(self) -> u8 {
        match self {
            Source::Legitimate => 0,
            Source::Attacker => 1,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            0 => Some(Source::Legitimate),
            1 => Some(Source::Attacker),
            _ => None,
        }
    }
}

/// A received trace together with the ground-truth transmitter of every
/// sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub samples: Vec<MobilityState>,
    pub labels: Vec<Source>,
}

impl LabeledTrace {
    pub fn legitimate(alice: &Trajectory) -> Self {
        Self {
            samples: alice.samples.clone(),
            labels: vec![Source::Legitimate; alice.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackScenario {
    /// First sample index transmitted by the attacker.
    pub onset_index: usize,
    /// Standoff distance D from the legitimate source, metres.
    pub standoff: f64,
    /// Attacker's initial speed modulus, m/s.
    pub eve_v0: f64,
    /// Half-width of the initial heading cone around the victim's heading, rad.
    pub eve_heading_halfwidth: f64,
}

impl Default for AttackScenario {
    fn default() -> Self {
        Self {
            onset_index: 35,
            standoff: 500.0,
            eve_v0: 1.0,
            eve_heading_halfwidth: FRAC_PI_4,
        }
    }
}

impl AttackScenario {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.onset_index == 0 || self.onset_index >= m {
            return Err(Error::Config(format!(
                "attack onset {} outside (0, {m})",
                self.onset_index
            )));
        }
        if !(self.standoff > 0.0 && self.standoff.is_finite()) {
            return Err(Error::Config(format!("standoff {} must be > 0", self.standoff)));
        }
        if !(self.eve_v0 >= 0.0) || !(self.eve_heading_halfwidth >= 0.0) {
            return Err(Error::Config("attacker speed and heading cone must be >= 0".into()));
        }
        Ok(())
    }
}

/// One Gauss-Markov step. `eta` is the caller's N(0, σ_v²) draw.
pub fn step_gauss_markov(state: &MobilityState, params: &GaussMarkovParams, eta: Vec2) -> MobilityState {
    let mut v = state.v * params.alpha + eta * params.innovation_gain();
    let mut p = state.p + state.v * params.period;
    params.area.confine(&mut p, &mut v);
    MobilityState {
        t: state.t + params.period,
        p,
        v,
    }
}

fn draw_eta(rng: &mut SimRng, sigma: f64) -> Vec2 {
    let x = rng.normal(0.0, sigma);
    let y = rng.normal(0.0, sigma);
    Vec2::new(x, y)
}

fn continue_walk(first: MobilityState, m: usize, params: &GaussMarkovParams, rng: &mut SimRng) -> Vec<MobilityState> {
    let mut samples = Vec::with_capacity(m);
    if m == 0 {
        return samples;
    }
    samples.push(first);
    let mut state = first;
    for _ in 1..m {
        state = step_gauss_markov(&state, params, draw_eta(rng, params.sigma_v));
        samples.push(state);
    }
    samples
}

/// `m` samples starting at a uniform position in the area with a uniform
/// heading in [0, 2π) and speed `v0`.
pub fn simulate_trajectory(params: &GaussMarkovParams, m: usize, seed: u64) -> Result<Trajectory> {
    params.validate()?;
    if m == 0 {
        return Err(Error::Config("trajectory length must be >= 1".into()));
    }
    let mut rng = SimRng::new(seed);
    let a = params.area;
    let p = Vec2::new(rng.uniform_in(a.x_min, a.x_max), rng.uniform_in(a.y_min, a.y_max));
    let heading = rng.uniform_in(0.0, TAU);
    let first = MobilityState {
        t: 0.0,
        p,
        v: Vec2::from_polar(params.v0, heading),
    };
    Ok(Trajectory {
        samples: continue_walk(first, m, params, &mut rng),
        seed,
    })
}

const MAX_PLACEMENT_DRAWS: usize = 100_000;

/// Spawns the attacker at the onset instant.
///
/// The attacker starts on the circle of radius `standoff` around the
/// victim's position at `onset_index − 1`, redrawn until it falls inside the
/// area, with speed `eve_v0` and a heading uniform within
/// `±eve_heading_halfwidth` of the victim's heading. The returned trajectory
/// covers instants `onset_index..alice.len()`.
pub fn spawn_attacker(
    alice: &Trajectory,
    scenario: &AttackScenario,
    params: &GaussMarkovParams,
    seed: u64,
) -> Result<Trajectory> {
    params.validate()?;
    scenario.validate(alice.len())?;
    let last = alice.samples[scenario.onset_index - 1];
    let area = params.area;
    let reach = area
        .corners()
        .iter()
        .map(|c| (*c - last.p).norm())
        .fold(0.0_f64, f64::max);
    if !area.contains(last.p) || reach < scenario.standoff {
        return Err(Error::Geometry(format!(
            "standoff circle of radius {} around ({:.3}, {:.3}) misses the area",
            scenario.standoff, last.p.x, last.p.y
        )));
    }

    let mut rng = SimRng::new(seed);
    let mut start = None;
    for _ in 0..MAX_PLACEMENT_DRAWS {
        let theta = rng.uniform_in(0.0, TAU);
        let candidate = last.p + Vec2::from_polar(scenario.standoff, theta);
        if area.contains(candidate) {
            start = Some(candidate);
            break;
        }
    }
    let start = start.ok_or_else(|| {
        Error::Geometry(format!(
            "no admissible attacker position after {MAX_PLACEMENT_DRAWS} draws"
        ))
    })?;

    let phi = last.v.angle();
    let hw = scenario.eve_heading_halfwidth;
    let heading = if hw > 0.0 { rng.uniform_in(phi - hw, phi + hw) } else { phi };
    let first = MobilityState {
        t: scenario.onset_index as f64 * params.period,
        p: start,
        v: Vec2::from_polar(scenario.eve_v0, heading),
    };
    let m = alice.len() - scenario.onset_index;
    Ok(Trajectory {
        samples: continue_walk(first, m, params, &mut rng),
        seed,
    })
}

/// Samples `0..onset` come from `alice`, the rest from `eve` (whose first
/// sample is the onset instant).
pub fn compose_attack_trace(alice: &Trajectory, eve: &Trajectory, onset: usize) -> Result<LabeledTrace> {
    let m = alice.len();
    if onset > m {
        return Err(Error::DimensionMismatch(format!(
            "onset {onset} beyond trajectory length {m}"
        )));
    }
    if eve.len() < m - onset {
        return Err(Error::DimensionMismatch(format!(
            "attacker trajectory has {} samples, {} needed",
            eve.len(),
            m - onset
        )));
    }
    let mut samples = Vec::with_capacity(m);
    samples.extend_from_slice(&alice.samples[..onset]);
    samples.extend_from_slice(&eve.samples[..m - onset]);
    let mut labels = vec![Source::Legitimate; onset];
    labels.resize(m, Source::Attacker);
    Ok(LabeledTrace { samples, labels })
}

pub const TRAJECTORY_HEADER: [&str; 6] = ["t_s", "x_m", "y_m", "vx_mps", "vy_mps", "label"];

pub fn write_trace(path: &Path, trace: &LabeledTrace) -> Result<()> {
    csvio::write_table(
        path,
        &TRAJECTORY_HEADER,
        trace.samples.iter().zip(&trace.labels).map(|(s, l)| {
            vec![
                Cell::F(s.t),
                Cell::F(s.p.x),
                Cell::F(s.p.y),
                Cell::F(s.v.x),
                Cell::F(s.v.y),
                Cell::U(u64::from(l.label())),
            ]
        }),
    )
}

/// Reads a trajectory file. Times must strictly increase.
pub fn load_trace(path: &Path) -> Result<LabeledTrace> {
    let table = csvio::read_table(path, &TRAJECTORY_HEADER)?;
    let mut samples = Vec::with_capacity(table.rows.len());
    let mut labels = Vec::with_capacity(table.rows.len());
    let mut times = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let f = |i: usize| csvio::f64_field(path, *line, rec, i, TRAJECTORY_HEADER[i]);
        let t = f(0)?;
        times.push((*line, t));
        samples.push(MobilityState {
            t,
            p: Vec2::new(f(1)?, f(2)?),
            v: Vec2::new(f(3)?, f(4)?),
        });
        let raw: u8 = csvio::int_field(path, *line, rec, 5, "label")?;
        let label = Source::from_label(raw)
            .ok_or_else(|| Error::parse(path, *line, ParseErrorKind::Malformed(format!("label {raw} is not 0 or 1"))))?;
        labels.push(label);
    }
    csvio::check_increasing(path, &times)?;
    Ok(LabeledTrace { samples, labels })
}
