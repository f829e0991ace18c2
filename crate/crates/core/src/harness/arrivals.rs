//! Arrivals interchange: JSON Lines, one record per (time index,
//! receiver) with `{"t_idx", "rx", "arrivals": [{"re", "im", "tau_s"}]}`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{Arrival, ArrivalSet};
use crate::error::{Error, ParseErrorKind, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrivalRecord {
    re: f64,
    im: f64,
    tau_s: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    t_idx: u64,
    rx: usize,
    arrivals: Vec<ArrivalRecord>,
}

/// Keyed by `(t_idx, rx)`.
pub type ArrivalMap = BTreeMap<(u64, usize), ArrivalSet>;

pub fn write_arrivals_file(path: &Path, map: &ArrivalMap) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for (&(t_idx, rx), set) in map {
        let rec = Record {
            t_idx,
            rx,
            arrivals: set
                .iter()
                .map(|a| ArrivalRecord {
                    re: a.amplitude.re,
                    im: a.amplitude.im,
                    tau_s: a.delay,
                })
                .collect(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| Error::Numerical(e.to_string()))?;
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads and validates an arrivals file. Blank lines are skipped; `t_idx`
/// may repeat across receivers but never decrease.
pub fn parse_arrivals_file(path: &Path) -> Result<ArrivalMap> {
    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut map = ArrivalMap::new();
    let mut last_t: Option<u64> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, ParseErrorKind::Malformed(e.to_string())))?;
        for (k, a) in rec.arrivals.iter().enumerate() {
            for (name, v) in [("re", a.re), ("im", a.im), ("tau_s", a.tau_s)] {
                if !v.is_finite() {
                    return Err(Error::parse(path, line_no, ParseErrorKind::NonFinite(format!("arrivals[{k}].{name}"))));
                }
            }
        }
        if let Some(prev) = last_t {
            if rec.t_idx < prev {
                return Err(Error::parse(
                    path,
                    line_no,
                    ParseErrorKind::IndexRegression { prev, next: rec.t_idx },
                ));
            }
        }
        last_t = Some(rec.t_idx);
        let set = ArrivalSet(
            rec.arrivals
                .iter()
                .map(|a| Arrival {
                    amplitude: Complex64::new(a.re, a.im),
                    delay: a.tau_s,
                })
                .collect(),
        );
        if map.insert((rec.t_idx, rec.rx), set).is_some() {
            return Err(Error::parse(
                path,
                line_no,
                ParseErrorKind::DuplicateKey { t_idx: rec.t_idx, rx: rec.rx as u64 },
            ));
        }
    }
    if map.is_empty() {
        return Err(Error::parse(path, 0, ParseErrorKind::Empty));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{frequency_response, synthesize_arrivals, Environment, Node, SubbandGrid};
    use crate::error::ParseError;
    use crate::geom::Vec2;

    fn parse_err(body: &str) -> ParseError {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        std::fs::write(&path, body).unwrap();
        match parse_arrivals_file(&path) {
            Err(Error::Parse { source, .. }) => source,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exporter_round_trip() {
        let env = Environment::default();
        let rxs = [Node::new(Vec2::new(1970.0, 1230.0), 50.0), Node::new(Vec2::new(1970.0, 1240.0), 50.0)];
        let mut map = ArrivalMap::new();
        for t in 0..3u64 {
            let tx = Node::new(Vec2::new(1000.0 + 20.0 * t as f64, 900.0), 50.0);
            for (r, rx) in rxs.iter().enumerate() {
                map.insert((t, r), synthesize_arrivals(&tx, rx, &env, 11_500.0).unwrap());
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        write_arrivals_file(&path, &map).unwrap();
        assert_eq!(parse_arrivals_file(&path).unwrap(), map);
    }

    #[test]
    fn rejects_bad_records() {
        let ok = r#"{"t_idx":0,"rx":0,"arrivals":[{"re":1.0,"im":0.0,"tau_s":0.5}]}"#;
        let e = parse_err(&format!("{ok}\n{ok}\n"));
        assert_eq!((e.line, e.kind), (2, ParseErrorKind::DuplicateKey { t_idx: 0, rx: 0 }));

        let later = r#"{"t_idx":2,"rx":0,"arrivals":[]}"#;
        let e = parse_err(&format!("{later}\n{ok}\n"));
        assert_eq!((e.line, e.kind), (2, ParseErrorKind::IndexRegression { prev: 2, next: 0 }));

        let e = parse_err("{\"t_idx\":0,\"rx\":0,\"arrivals\":[{\"re\":NaN,\"im\":0,\"tau_s\":0}]}\n");
        assert_eq!(e.line, 1);
        assert!(matches!(e.kind, ParseErrorKind::Malformed(_)));

        let e = parse_err("{\"t_idx\":0,\"rx\":0,\"arrivals\":[{\"re\":1e999,\"im\":0,\"tau_s\":0}]}\n");
        assert!(matches!(e.kind, ParseErrorKind::Malformed(_) | ParseErrorKind::NonFinite(_)));

        let e = parse_err(&format!("{ok}\nnot json\n"));
        assert_eq!(e.line, 2);
        assert_eq!(parse_err("\n").kind, ParseErrorKind::Empty);
    }

    #[test]
    fn empty_arrival_list_is_accepted_then_rejected_downstream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        std::fs::write(&path, "{\"t_idx\":0,\"rx\":1,\"arrivals\":[]}\n").unwrap();
        let map = parse_arrivals_file(&path).unwrap();
        let set = &map[&(0, 1)];
        assert!(set.is_empty());
        assert!(matches!(frequency_response(set, &SubbandGrid::default()), Err(Error::EmptyInput(_))));
    }
}
