//! Authentication by prediction error.
//!
//! The metric is the squared distance `E` between the predicted and the
//! estimated position. A sample is flagged as fake when `E >= lambda`.
//! The first `N_a` instants are a pilot phase authenticated by higher
//! layers: they feed the predictor but produce no decision.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csvio::{self, Cell};
use crate::error::{Error, ParseErrorKind, Result};
use crate::estimators::PositionEstimate;
use crate::geom::Vec2;
use crate::predict::Prediction;

pub const AUTHENTIC: u8 = 0;
pub const FAKE: u8 = 1;
/// Default pilot length.
pub const DEFAULT_WARMUP: usize = 10;

pub fn squared_error(p_hat: Vec2, p_tilde: Vec2) -> f64 {
    (p_hat - p_tilde).norm_sq()
}

/// 1 (fake) iff `e >= lambda`.
pub fn decide(e: f64, lambda: f64) -> u8 {
    if e >= lambda {
        FAKE
    } else {
        AUTHENTIC
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuthSample {
    pub t: f64,
    pub e: f64,
    /// `None` during the pilot phase.
    pub decision: Option<u8>,
    pub truth: u8,
}

/// Applies the test to a prediction stream whose `k`-th entry is instant
/// `k + 1`; `truth[k]` labels that instant. Instants up to `n_a` only
/// report `E`.
pub fn run_protocol(predictions: &[Prediction], truth: &[u8], lambda: f64, n_a: usize) -> Result<Vec<AuthSample>> {
    if predictions.len() != truth.len() {
        return Err(Error::Stream {
            index: predictions.len().min(truth.len()),
            reason: format!("{} predictions but {} labels", predictions.len(), truth.len()),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("threshold {lambda} must be >= 0")));
    }
    Ok(predictions
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(k, (p, &label))| {
            let e = squared_error(p.p_hat, p.p_tilde);
            AuthSample {
                t: p.t,
                e,
                decision: (k + 1 > n_a).then(|| decide(e, lambda)),
                truth: label,
            }
        })
        .collect())
}

/// Checks that `predictions` cover `estimates[1..]` instant by instant
/// and carry the same estimates.
pub fn check_alignment(predictions: &[Prediction], estimates: &[PositionEstimate]) -> Result<()> {
    if predictions.len() + 1 != estimates.len() {
        return Err(Error::Stream {
            index: predictions.len().min(estimates.len()),
            reason: format!("{} predictions for {} estimates", predictions.len(), estimates.len()),
        });
    }
    for (k, (p, e)) in predictions.iter().zip(&estimates[1..]).enumerate() {
        if p.t != e.t || p.p_tilde != e.p {
            return Err(Error::Stream {
                index: k + 1,
                reason: format!("prediction at t={} does not match estimate at t={}", p.t, e.t),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub p_fa: f64,
    pub p_md: f64,
    pub n_legit: usize,
    pub n_attack: usize,
}

/// False-alarm and missed-detection rates over the decided samples,
/// re-thresholded at `lambda`.
pub fn empirical_rates(samples: &[AuthSample], lambda: f64) -> Result<Rates> {
    let (mut n_l, mut n_a, mut fa, mut md) = (0usize, 0usize, 0usize, 0usize);
    for s in samples.iter().filter(|s| s.decision.is_some()) {
        let d = decide(s.e, lambda);
        if s.truth == AUTHENTIC {
            n_l += 1;
            fa += usize::from(d == FAKE);
        } else {
            n_a += 1;
            md += usize::from(d == AUTHENTIC);
        }
    }
    if n_l == 0 || n_a == 0 {
        return Err(Error::UndefinedRate(format!(
            "{n_l} legitimate and {n_a} attack samples; both classes are required"
        )));
    }
    Ok(Rates {
        p_fa: fa as f64 / n_l as f64,
        p_md: md as f64 / n_a as f64,
        n_legit: n_l,
        n_attack: n_a,
    })
}

/// Splits decided samples by label into `(legitimate E, attack E)`.
pub fn split_decided(samples: &[AuthSample]) -> (Vec<f64>, Vec<f64>) {
    let mut legit = Vec::new();
    let mut attack = Vec::new();
    for s in samples.iter().filter(|s| s.decision.is_some()) {
        if s.truth == AUTHENTIC {
            legit.push(s.e);
        } else {
            attack.push(s.e);
        }
    }
    (legit, attack)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub lambda: f64,
    pub p_fa: f64,
    pub p_md: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetCurve {
    /// Ascending in `lambda`.
    pub points: Vec<DetPoint>,
}

impl DetCurve {
    /// `p_fa` non-increasing, `p_md` non-decreasing, both in [0, 1].
    pub fn is_monotone(&self) -> bool {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        self.points.iter().all(|p| in_unit(p.p_fa) && in_unit(p.p_md))
            && self
                .points
                .windows(2)
                .all(|w| w[1].lambda > w[0].lambda && w[1].p_fa <= w[0].p_fa && w[1].p_md >= w[0].p_md)
    }
}

fn sorted(values: &[f64], what: &str) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput(format!("{what} E values")));
    }
    if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || v.is_nan()) {
        return Err(Error::Numerical(format!("{what} E value {bad} is not a non-negative number")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Exact empirical DET: one point per distinct threshold among 0, every
/// observed `E` and `+inf`.
pub fn det_curve(legit: &[f64], attack: &[f64]) -> Result<DetCurve> {
    let l = sorted(legit, "legitimate")?;
    let a = sorted(attack, "attack")?;
    let mut grid: Vec<f64> = Vec::with_capacity(l.len() + a.len() + 2);
    grid.push(0.0);
    grid.extend_from_slice(&l);
    grid.extend_from_slice(&a);
    grid.push(f64::INFINITY);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let (nl, na) = (l.len() as f64, a.len() as f64);
    let points = grid
        .into_iter()
        .map(|lambda| {
            let legit_below = l.partition_point(|e| *e < lambda);
            let attack_below = a.partition_point(|e| *e < lambda);
            DetPoint {
                lambda,
                p_fa: (l.len() - legit_below) as f64 / nl,
                p_md: attack_below as f64 / na,
            }
        })
        .collect();
    Ok(DetCurve { points })
}

/// Smallest threshold whose empirical false-alarm rate on `legit` does
/// not exceed `target_pfa`.
pub fn threshold_for_pfa(legit: &[f64], target_pfa: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&target_pfa) {
        return Err(Error::Config(format!("target p_FA {target_pfa} outside [0, 1]")));
    }
    let l = sorted(legit, "legitimate")?;
    let n = l.len() as f64;
    let mut candidates = vec![0.0];
    candidates.extend_from_slice(&l);
    candidates.push(f64::INFINITY);
    candidates.dedup();
    Ok(candidates
        .into_iter()
        .find(|lambda| (l.len() - l.partition_point(|e| e < lambda)) as f64 / n <= target_pfa)
        .expect("+inf always qualifies"))
}

pub const DET_HEADER: [&str; 3] = ["lambda_m2", "p_fa", "p_md"];
pub const DECISION_HEADER: [&str; 5] = ["run_id", "t_s", "E_m2", "decision", "truth"];

pub fn write_det(path: &Path, curve: &DetCurve) -> Result<()> {
    csvio::write_table(
        path,
        &DET_HEADER,
        curve
            .points
            .iter()
            .map(|p| vec![Cell::F(p.lambda), Cell::F(p.p_fa), Cell::F(p.p_md)]),
    )
}

/// Decision rows of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDecisions {
    pub run_id: u64,
    pub samples: Vec<AuthSample>,
}

pub fn write_decisions(path: &Path, runs: &[RunDecisions]) -> Result<()> {
    csvio::write_table(
        path,
        &DECISION_HEADER,
        runs.iter().flat_map(|r| {
            r.samples.iter().map(move |s| {
                vec![
                    Cell::U(r.run_id),
                    Cell::F(s.t),
                    Cell::F(s.e),
                    Cell::OptU(s.decision.map(u64::from)),
                    Cell::U(u64::from(s.truth)),
                ]
            })
        }),
    )
}

/// Reads a decisions file; pilot-phase rows have an empty `decision`.
pub fn load_decisions(path: &Path) -> Result<Vec<RunDecisions>> {
    let table = csvio::read_table(path, &DECISION_HEADER)?;
    let mut runs: Vec<RunDecisions> = Vec::new();
    for (line, rec) in &table.rows {
        let line = *line;
        let run_id: u64 = csvio::int_field(path, line, rec, 0, "run_id")?;
        let t = csvio::f64_field(path, line, rec, 1, "t_s")?;
        let e = csvio::f64_field(path, line, rec, 2, "E_m2")?;
        if e < 0.0 {
            return Err(Error::parse(path, line, ParseErrorKind::Malformed(format!("negative E {e}"))));
        }
        let decision = if rec[3].trim().is_empty() {
            None
        } else {
            Some(flag(path, line, rec, 3, "decision")?)
        };
        let truth = flag(path, line, rec, 4, "truth")?;
        let sample = AuthSample { t, e, decision, truth };
        match runs.last_mut() {
            Some(r) if r.run_id == run_id => {
                let prev = r.samples.last().expect("non-empty run").t;
                if t <= prev {
                    return Err(Error::parse(path, line, ParseErrorKind::NonMonotoneTime { prev, next: t }));
                }
                r.samples.push(sample);
            }
            _ => {
                if runs.iter().any(|r| r.run_id == run_id) {
                    return Err(Error::parse(
                        path,
                        line,
                        ParseErrorKind::Malformed(format!("rows of run {run_id} are not contiguous")),
                    ));
                }
                runs.push(RunDecisions {
                    run_id,
                    samples: vec![sample],
                });
            }
        }
    }
    Ok(runs)
}

fn flag(path: &Path, line: usize, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<u8> {
    let v: u8 = csvio::int_field(path, line, rec, idx, name)?;
    if v > 1 {
        return Err(Error::parse(path, line, ParseErrorKind::Malformed(format!("`{name}` must be 0 or 1"))));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn metric_examples() {
        let a = Vec2::new(3.0, -1.0);
        assert_eq!(squared_error(a, a), 0.0);
        assert_eq!(squared_error(Vec2::ZERO, Vec2::new(3.0, 4.0)), 25.0);
        let b = Vec2::new(-7.5, 2.25);
        assert_eq!(squared_error(a, b), squared_error(b, a));
    }

    #[test]
    fn decision_boundary() {
        assert_eq!(decide(0.0, 1.0), AUTHENTIC);
        assert_eq!(decide(0.0, 0.0), FAKE);
        assert_eq!(decide(123.0, 0.0), FAKE);
        assert_eq!(decide(2.5, 2.5), FAKE);
    }

    fn preds(n: usize, err: f64) -> Vec<Prediction> {
        (1..=n)
            .map(|k| Prediction {
                t: 10.0 * k as f64,
                p_hat: Vec2::new(err, 0.0),
                p_tilde: Vec2::ZERO,
            })
            .collect()
    }

    #[test]
    fn warmup() {
        let p = preds(49, 0.0);
        let out = run_protocol(&p, &[0; 49], 1.0, 10).unwrap();
        let decided: Vec<_> = out.iter().filter(|s| s.decision.is_some()).collect();
        assert_eq!(decided.len(), 39);
        assert_eq!(decided[0].t, 110.0);
        assert!(decided.iter().all(|s| s.decision == Some(AUTHENTIC)));
        let none = run_protocol(&p, &[0; 49], 1.0, 49).unwrap();
        assert!(none.iter().all(|s| s.decision.is_none()));
        assert!(matches!(run_protocol(&p, &[0; 3], 1.0, 10), Err(Error::Stream { .. })));
    }

    #[test]
    fn alignment() {
        let est: Vec<PositionEstimate> = (0..4)
            .map(|k| PositionEstimate {
                t: 10.0 * k as f64,
                p: Vec2::ZERO,
                source: crate::estimators::EstimateSource::Oracle,
            })
            .collect();
        check_alignment(&preds(3, 1.0), &est).unwrap();
        assert!(check_alignment(&preds(2, 1.0), &est).is_err());
        let mut shifted = preds(3, 1.0);
        shifted[1].t = 25.0;
        assert!(matches!(check_alignment(&shifted, &est), Err(Error::Stream { index: 2, .. })));
    }

    fn samples(legit: &[f64], attack: &[f64]) -> Vec<AuthSample> {
        let mk = |e: f64, truth| AuthSample { t: 0.0, e, decision: Some(0), truth };
        legit.iter().map(|e| mk(*e, AUTHENTIC)).chain(attack.iter().map(|e| mk(*e, FAKE))).collect()
    }

    fn brute_rates(legit: &[f64], attack: &[f64], lambda: f64) -> (f64, f64) {
        let mut fa = 0;
        for e in legit {
            if *e >= lambda {
                fa += 1;
            }
        }
        let mut md = 0;
        for e in attack {
            if *e < lambda {
                md += 1;
            }
        }
        (fa as f64 / legit.len() as f64, md as f64 / attack.len() as f64)
    }

    #[test]
    fn rate_examples() {
        let s = samples(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]);
        let r = empirical_rates(&s, 2.5).unwrap();
        assert_eq!((r.p_fa, r.p_md), brute_rates(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], 2.5));
        assert_eq!((r.p_fa, r.p_md), (1.0 / 3.0, 1.0 / 3.0));
        let r = empirical_rates(&s, 100.0).unwrap();
        assert_eq!((r.p_fa, r.p_md), (0.0, 1.0));
        let r = empirical_rates(&s, 0.0).unwrap();
        assert_eq!((r.p_fa, r.p_md), (1.0, 0.0));
        assert!(matches!(empirical_rates(&samples(&[1.0], &[]), 1.0), Err(Error::UndefinedRate(_))));
        let mut pilot = samples(&[1.0], &[2.0]);
        pilot[1].decision = None;
        assert!(matches!(empirical_rates(&pilot, 1.0), Err(Error::UndefinedRate(_))));
    }

    #[test]
    fn det_examples() {
        let same = [1.0, 5.0, 5.0, 9.0];
        let c = det_curve(&same, &same).unwrap();
        assert!(c.is_monotone());
        for p in &c.points {
            assert!((p.p_md - (1.0 - p.p_fa)).abs() < 1e-15);
        }
        let c = det_curve(&[1.0, 2.0], &[10.0, 20.0]).unwrap();
        assert!(c.points.iter().any(|p| p.p_fa == 0.0 && p.p_md == 0.0));
        assert_eq!(c.points.first().unwrap().lambda, 0.0);
        assert_eq!(c.points.last().unwrap().lambda, f64::INFINITY);
        assert!(matches!(det_curve(&[], &[1.0]), Err(Error::EmptyInput(_))));
        assert!(det_curve(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn threshold_selection() {
        let legit: Vec<f64> = (1..=100).map(f64::from).collect();
        let lambda = threshold_for_pfa(&legit, 0.05).unwrap();
        assert_eq!(lambda, 96.0);
        assert_eq!(threshold_for_pfa(&legit, 1.0).unwrap(), 0.0);
        assert_eq!(threshold_for_pfa(&legit, 0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn decisions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut s = samples(&[1.5, 2.0], &[3.0]);
        for (k, x) in s.iter_mut().enumerate() {
            x.t = 10.0 * (k + 1) as f64;
        }
        s[0].decision = None;
        let runs = vec![
            RunDecisions { run_id: 0, samples: s.clone() },
            RunDecisions { run_id: 7, samples: s },
        ];
        write_decisions(&path, &runs).unwrap();
        assert_eq!(load_decisions(&path).unwrap(), runs);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "run_id,t_s,E_m2,decision,truth\n0,10,1,0,0\n1,10,1,0,0\n0,20,1,0,0\n").unwrap();
        assert!(load_decisions(&bad).is_err());
        std::fs::write(&bad, "run_id,t_s,E_m2,decision,truth\n0,10,1,2,0\n").unwrap();
        assert!(load_decisions(&bad).is_err());
    }

    proptest! {
        #[test]
        fn decide_is_monotone(e1 in 0.0..1e6f64, e2 in 0.0..1e6f64, l1 in 0.0..1e6f64, l2 in 0.0..1e6f64) {
            let (elo, ehi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let (llo, lhi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            prop_assert!(decide(elo, l1) <= decide(ehi, l1));
            prop_assert!(decide(e1, llo) >= decide(e1, lhi));
        }

        #[test]
        fn det_matches_brute_force(
            legit in proptest::collection::vec(0u32..50, 1..100),
            attack in proptest::collection::vec(0u32..50, 1..100),
        ) {
            let l: Vec<f64> = legit.iter().map(|v| f64::from(*v)).collect();
            let a: Vec<f64> = attack.iter().map(|v| f64::from(*v)).collect();
            let c = det_curve(&l, &a).unwrap();
            prop_assert!(c.is_monotone());
            for p in &c.points {
                prop_assert_eq!((p.p_fa, p.p_md), brute_rates(&l, &a, p.lambda));
            }
        }
    }
}
