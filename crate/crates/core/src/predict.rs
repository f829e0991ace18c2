//! Shared vocabulary for the one-step-ahead predictors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csvio::{self, Cell};
use crate::error::{Error, Result};
use crate::estimators::PositionEstimate;
use crate::geom::Vec2;

/// Prediction `p_hat` for instant `t`, issued before the estimate
/// `p_tilde` at `t` was consumed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub t: f64,
    pub p_hat: Vec2,
    pub p_tilde: Vec2,
}

/// Checks that `estimates` are spaced by exactly `period` (relative
/// tolerance 1e-9). Gaps and jitter are reported as stream errors.
pub fn check_spacing(estimates: &[PositionEstimate], period: f64) -> Result<()> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput("estimate stream".into()));
    }
    for (i, w) in estimates.windows(2).enumerate() {
        let dt = w[1].t - w[0].t;
        if (dt - period).abs() > 1e-9 * period.abs().max(1.0) {
            return Err(Error::Stream {
                index: i + 1,
                reason: format!("spacing {dt} s between t={} and t={}, expected {period} s", w[0].t, w[1].t),
            });
        }
    }
    Ok(())
}

/// The trivial predictor `p_hat(t) = p_tilde(t - T)`.
pub fn identity_baseline(estimates: &[PositionEstimate]) -> Vec<Prediction> {
    estimates
        .windows(2)
        .map(|w| Prediction {
            t: w[1].t,
            p_hat: w[0].p,
            p_tilde: w[1].p,
        })
        .collect()
}

pub const PREDICTION_HEADER: [&str; 5] = ["t_s", "xhat_m", "yhat_m", "xtilde_m", "ytilde_m"];

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    csvio::write_table(
        path,
        &PREDICTION_HEADER,
        predictions.iter().map(|p| {
            vec![
                Cell::F(p.t),
                Cell::F(p.p_hat.x),
                Cell::F(p.p_hat.y),
                Cell::F(p.p_tilde.x),
                Cell::F(p.p_tilde.y),
            ]
        }),
    )
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let table = csvio::read_table(path, &PREDICTION_HEADER)?;
    let mut out = Vec::with_capacity(table.rows.len());
    let mut times = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let f = |i: usize| csvio::f64_field(path, *line, rec, i, PREDICTION_HEADER[i]);
        let t = f(0)?;
        times.push((*line, t));
        out.push(Prediction {
            t,
            p_hat: Vec2::new(f(1)?, f(2)?),
            p_tilde: Vec2::new(f(3)?, f(4)?),
        });
    }
    csvio::check_increasing(path, &times)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimateSource;

    fn est(t: f64, x: f64) -> PositionEstimate {
        PositionEstimate {
            t,
            p: Vec2::new(x, -x),
            source: EstimateSource::External,
        }
    }

    #[test]
    fn spacing() {
        let ok: Vec<_> = (0..5).map(|i| est(i as f64 * 10.0, i as f64)).collect();
        check_spacing(&ok, 10.0).unwrap();
        let gap = vec![est(0.0, 0.0), est(10.0, 0.0), est(30.0, 0.0)];
        assert!(matches!(check_spacing(&gap, 10.0), Err(Error::Stream { index: 2, .. })));
        assert!(matches!(check_spacing(&[], 10.0), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn baseline_shifts_by_one() {
        let s: Vec<_> = (0..4).map(|i| est(i as f64 * 10.0, i as f64)).collect();
        let b = identity_baseline(&s);
        assert_eq!(b.len(), 3);
        assert_eq!(b[0].t, 10.0);
        assert_eq!(b[0].p_hat, s[0].p);
        assert_eq!(b[2].p_tilde, s[3].p);
    }

    #[test]
    fn log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.csv");
        let preds = vec![
            Prediction { t: 10.0, p_hat: Vec2::new(0.1, 0.2), p_tilde: Vec2::new(1.0 / 3.0, 2e-17) },
            Prediction { t: 20.0, p_hat: Vec2::new(-5.5, 1e300), p_tilde: Vec2::new(7.0, 8.0) },
        ];
        write_predictions(&path, &preds).unwrap();
        assert_eq!(load_predictions(&path).unwrap(), preds);
    }
}
