//! Error statistics in the reporting convention used for the predictors:
//! per-coordinate RMSE and MAPE, box-plot figures of the Euclidean error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csvio::{self, Cell};
use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Coordinates with a smaller magnitude are left out of the MAPE.
pub const MAPE_MIN_ABS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n: usize,
    pub rmse_x_m: f64,
    pub rmse_y_m: f64,
    /// `None` when every sample was excluded.
    pub mape_x_pct: Option<f64>,
    pub mape_y_pct: Option<f64>,
    /// Coordinates left out of the MAPE, x and y together.
    pub n_excluded_mape: usize,
    pub median_err_m: f64,
    pub q1_m: f64,
    pub q3_m: f64,
    /// Most extreme samples within 1.5 IQR of the box, never inside it.
    pub whisker_lo_m: f64,
    pub whisker_hi_m: f64,
}

/// Quantile of sorted data by linear interpolation between order
/// statistics, position `(n - 1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Statistics of `estimate - truth` over `(truth, estimate)` pairs.
pub fn summarize_errors(pairs: &[(Vec2, Vec2)]) -> Result<ErrorStats> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no error samples".into()));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::Numerical("non-finite position in error samples".into()));
    }
    let n = pairs.len() as f64;
    let rmse = |f: fn(Vec2) -> f64| (pairs.iter().map(|(t, e)| (f(*e) - f(*t)).powi(2)).sum::<f64>() / n).sqrt();
    let mut excluded = 0;
    let mut mape = |f: fn(Vec2) -> f64| {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (t, e) in pairs {
            let truth = f(*t);
            if truth.abs() < MAPE_MIN_ABS {
                excluded += 1;
            } else {
                sum += (f(*e) - truth).abs() / truth.abs();
                count += 1;
            }
        }
        (count > 0).then(|| 100.0 * sum / count as f64)
    };
    let mape_x = mape(|v| v.x);
    let mape_y = mape(|v| v.y);
    let mut err: Vec<f64> = pairs.iter().map(|(t, e)| (*e - *t).norm()).collect();
    err.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&err, 0.25);
    let q3 = quantile_sorted(&err, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    // Few samples can leave no point between a quartile and its fence;
    // the whisker then collapses onto the box.
    let whisker_lo = err.iter().copied().find(|e| *e >= lo_fence).map_or(q1, |e| e.min(q1));
    let whisker_hi = err.iter().rev().copied().find(|e| *e <= hi_fence).map_or(q3, |e| e.max(q3));
    Ok(ErrorStats {
        n: pairs.len(),
        rmse_x_m: rmse(|v| v.x),
        rmse_y_m: rmse(|v| v.y),
        mape_x_pct: mape_x,
        mape_y_pct: mape_y,
        n_excluded_mape: excluded,
        median_err_m: quantile_sorted(&err, 0.5),
        q1_m: q1,
        q3_m: q3,
        whisker_lo_m: whisker_lo,
        whisker_hi_m: whisker_hi,
    })
}

/// One row of an errors file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub run_id: u64,
    pub t: f64,
    pub truth: Vec2,
    pub estimate: Vec2,
}

pub const ERRORS_HEADER: [&str; 6] = ["run_id", "t_s", "x_m", "y_m", "xhat_m", "yhat_m"];

pub fn write_errors(path: &Path, rows: &[ErrorRecord]) -> Result<()> {
    csvio::write_table(
        path,
        &ERRORS_HEADER,
        rows.iter().map(|r| {
            vec![
                Cell::U(r.run_id),
                Cell::F(r.t),
                Cell::F(r.truth.x),
                Cell::F(r.truth.y),
                Cell::F(r.estimate.x),
                Cell::F(r.estimate.y),
            ]
        }),
    )
}

pub fn load_errors(path: &Path) -> Result<Vec<ErrorRecord>> {
    let table = csvio::read_table(path, &ERRORS_HEADER)?;
    table
        .rows
        .iter()
        .map(|(line, rec)| {
            let f = |i: usize| csvio::f64_field(path, *line, rec, i, ERRORS_HEADER[i]);
            Ok(ErrorRecord {
                run_id: csvio::int_field(path, *line, rec, 0, "run_id")?,
                t: f(1)?,
                truth: Vec2::new(f(2)?, f(3)?),
                estimate: Vec2::new(f(4)?, f(5)?),
            })
        })
        .collect()
}
