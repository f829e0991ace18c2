//! Position estimators.
//!
//! The localization stage is a seam: anything that yields one position
//! estimate per sampling instant can drive the predictors. Two sources ship
//! with the crate, a Gaussian oracle that perturbs the true position and a
//! CSV reader for externally computed estimates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csvio::{self, Cell};
use crate::error::{Error, ParseErrorKind, Result};
use crate::geom::Vec2;
use crate::rng::{splitmix64, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateSource {
    Oracle,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub t: f64,
    pub p: Vec2,
    pub source: EstimateSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Per-component standard deviation of the estimation error, m.
    pub sigma_pos: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { sigma_pos: 25.0 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_pos >= 0.0 && self.sigma_pos.is_finite()) {
            return Err(Error::Config(format!("sigma_pos {} must be >= 0", self.sigma_pos)));
        }
        Ok(())
    }
}

/// True position plus i.i.d. zero-mean Gaussian error per component. The
/// draw is keyed on `(seed, t)` so that it does not depend on call order.
pub fn oracle_estimate(true_p: Vec2, cfg: &OracleConfig, seed: u64, t: f64) -> PositionEstimate {
    let p = if cfg.sigma_pos == 0.0 {
        true_p
    } else {
        let mut rng = SimRng::new(splitmix64(seed ^ splitmix64(t.to_bits())));
        let dx = rng.normal(0.0, cfg.sigma_pos);
        let dy = rng.normal(0.0, cfg.sigma_pos);
        true_p + Vec2::new(dx, dy)
    };
    PositionEstimate {
        t,
        p,
        source: EstimateSource::Oracle,
    }
}

/// Oracle estimates for a sequence of `(t, true position)` pairs.
pub fn oracle_stream<I>(truth: I, cfg: &OracleConfig, seed: u64) -> Vec<PositionEstimate>
where
    I: IntoIterator<Item = (f64, Vec2)>,
{
    truth
        .into_iter()
        .map(|(t, p)| oracle_estimate(p, cfg, seed, t))
        .collect()
}

pub const ESTIMATE_HEADER: [&str; 3] = ["t_s", "x_m", "y_m"];

pub fn write_estimates(path: &Path, estimates: &[PositionEstimate]) -> Result<()> {
    csvio::write_table(
        path,
        &ESTIMATE_HEADER,
        estimates
            .iter()
            .map(|e| vec![Cell::F(e.t), Cell::F(e.p.x), Cell::F(e.p.y)]),
    )
}

/// Reads an estimate file `t_s,x_m,y_m`.
///
/// Times must strictly increase with a constant spacing (relative
/// tolerance 1e-9). Failures name the offending line.
pub fn load_estimates(path: &Path) -> Result<Vec<PositionEstimate>> {
    let table = csvio::read_table(path, &ESTIMATE_HEADER)?;
    let mut out = Vec::with_capacity(table.rows.len());
    let mut times = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let t = csvio::f64_field(path, *line, rec, 0, "t_s")?;
        let x = csvio::f64_field(path, *line, rec, 1, "x_m")?;
        let y = csvio::f64_field(path, *line, rec, 2, "y_m")?;
        times.push((*line, t));
        out.push(PositionEstimate {
            t,
            p: Vec2::new(x, y),
            source: EstimateSource::External,
        });
    }
    csvio::check_increasing(path, &times)?;
    if let Some(err) = spacing_violation(&times) {
        let (line, expected, found) = err;
        return Err(Error::parse(path, line, ParseErrorKind::IrregularSpacing { expected, found }));
    }
    Ok(out)
}

/// First `(line, expected, found)` where the spacing departs from the first
/// one.
fn spacing_violation(times: &[(usize, f64)]) -> Option<(usize, f64, f64)> {
    let period = times.get(1).map(|b| b.1 - times[0].1)?;
    times.windows(2).skip(1).find_map(|w| {
        let dt = w[1].1 - w[0].1;
        ((dt - period).abs() > 1e-9 * period.abs().max(1.0)).then_some((w[1].0, period, dt))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ParseError;

    #[test]
    fn zero_sigma_is_exact() {
        let p = Vec2::new(123.456, -7.0);
        assert_eq!(oracle_estimate(p, &OracleConfig { sigma_pos: 0.0 }, 1, 10.0).p, p);
    }

    #[test]
    fn keyed_on_seed_and_time() {
        let cfg = OracleConfig { sigma_pos: 25.0 };
        let a = oracle_estimate(Vec2::ZERO, &cfg, 5, 30.0);
        assert_eq!(a, oracle_estimate(Vec2::ZERO, &cfg, 5, 30.0));
        assert_ne!(a.p, oracle_estimate(Vec2::ZERO, &cfg, 5, 40.0).p);
        assert_ne!(a.p, oracle_estimate(Vec2::ZERO, &cfg, 6, 30.0).p);
    }

    fn draws(sigma: f64, n: usize) -> Vec<Vec2> {
        let cfg = OracleConfig { sigma_pos: sigma };
        (0..n)
            .map(|i| oracle_estimate(Vec2::ZERO, &cfg, 99, i as f64 * 10.0).p)
            .collect()
    }

    #[test]
    fn rayleigh_mean() {
        let w = draws(50.0, 1_000_000);
        let mean = w.iter().map(|v| v.norm()).sum::<f64>() / w.len() as f64;
        let oracle = 50.0 * (std::f64::consts::PI / 2.0).sqrt();
        assert!((mean / oracle - 1.0).abs() < 0.01, "{mean} vs {oracle}");
    }

    #[test]
    fn per_component_std() {
        let w = draws(25.0, 1_000_000);
        let n = w.len() as f64;
        for comp in [0, 1] {
            let xs: Vec<f64> = w.iter().map(|v| if comp == 0 { v.x } else { v.y }).collect();
            let m = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((sd / 25.0 - 1.0).abs() < 0.01, "std {sd}");
        }
    }

    #[test]
    fn whiteness() {
        let w = draws(50.0, 100_000);
        let xs: Vec<f64> = w.iter().map(|v| v.x).collect();
        let n = xs.len();
        let m = xs.iter().sum::<f64>() / n as f64;
        let var: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
        let lag1: f64 = xs.windows(2).map(|p| (p[0] - m) * (p[1] - m)).sum();
        assert!((lag1 / var).abs() <= 0.01);
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    fn parse_kind(err: Error) -> ParseError {
        match err {
            Error::Parse { source, .. } => source,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("est.csv");
        let cfg = OracleConfig { sigma_pos: 50.0 };
        let est = oracle_stream((0..50).map(|i| (i as f64 * 10.0, Vec2::new(1000.0 + i as f64 / 3.0, 700.1))), &cfg, 3);
        write_estimates(&path, &est).unwrap();
        let back = load_estimates(&path).unwrap();
        assert_eq!(back.len(), est.len());
        for (a, b) in est.iter().zip(&back) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.p.x.to_bits(), b.p.x.to_bits());
            assert_eq!(a.p.y.to_bits(), b.p.y.to_bits());
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t_s,x_m,y_m\n") && !text.contains('\r'));
    }

    #[test]
    fn parse_errors_name_lines() {
        let dir = tempfile::tempdir().unwrap();
        let empty = write(&dir, "empty.csv", "");
        assert_eq!(parse_kind(load_estimates(&empty).unwrap_err()).kind, ParseErrorKind::Empty);
        let header_only = write(&dir, "h.csv", "t_s,x_m,y_m\n");
        assert_eq!(parse_kind(load_estimates(&header_only).unwrap_err()).kind, ParseErrorKind::Empty);

        let shuffled = write(&dir, "s.csv", "t_s,x_m,y_m\n0,1,1\n20,1,1\n10,1,1\n30,1,1\n");
        let e = parse_kind(load_estimates(&shuffled).unwrap_err());
        assert_eq!(e.line, 4);
        assert!(matches!(e.kind, ParseErrorKind::NonMonotoneTime { .. }));

        let nan = write(&dir, "n.csv", "t_s,x_m,y_m\n0,1,1\n10,NaN,1\n");
        let e = parse_kind(load_estimates(&nan).unwrap_err());
        assert_eq!((e.line, e.kind), (3, ParseErrorKind::NonFinite("x_m".into())));

        let bad = write(&dir, "b.csv", "t_s,x_m,y_m\n0,1,1\n10,abc,1\n");
        let e = parse_kind(load_estimates(&bad).unwrap_err());
        assert_eq!(e.line, 3);
        assert!(matches!(e.kind, ParseErrorKind::Malformed(_)));

        let short = write(&dir, "r.csv", "t_s,x_m,y_m\n0,1,1\n10,1\n");
        assert_eq!(parse_kind(load_estimates(&short).unwrap_err()).line, 3);

        let gap = write(&dir, "g.csv", "t_s,x_m,y_m\n0,1,1\n10,1,1\n30,1,1\n");
        let e = parse_kind(load_estimates(&gap).unwrap_err());
        assert_eq!(e.line, 4);
        assert!(matches!(e.kind, ParseErrorKind::IrregularSpacing { .. }));
    }
}
