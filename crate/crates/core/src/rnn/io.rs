//! JSON model file: version header, normalization bounds and every tensor
//! row-major with its shape.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Normalization, RnnModel};
use super::tensor::{DenseLayer, LstmLayerParams, ParamSet};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "ctxauth-rnn";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    period_s: f64,
    dropout: f64,
    residual: bool,
    normalization: Normalization,
    lstm: Vec<LstmLayerParams>,
    dense: Vec<DenseLayer>,
}

pub fn to_json(model: &RnnModel) -> Result<String> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        period_s: model.period,
        dropout: model.dropout_rate,
        residual: model.residual,
        normalization: model.norm,
        lstm: model.params.lstm.clone(),
        dense: model.params.dense.clone(),
    };
    serde_json::to_string(&file).map_err(|e| Error::Model(e.to_string()))
}

pub fn from_json(text: &str) -> Result<RnnModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Model(format!("malformed model file: {e}")))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Model(format!("unknown format `{}`", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::Model(format!(
            "unsupported model version {} (expected {MODEL_VERSION})",
            file.version
        )));
    }
    let model = RnnModel {
        params: ParamSet {
            lstm: file.lstm,
            dense: file.dense,
        },
        dropout_rate: file.dropout,
        residual: file.residual,
        norm: file.normalization,
        period: file.period_s,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(path: &Path, model: &RnnModel) -> Result<()> {
    let text = to_json(model)?;
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    out.write_all(text.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<RnnModel> {
    let mut text = String::new();
    std::io::Read::read_to_string(&mut BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?), &mut text)
        .map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::Area;
    use crate::rnn::model::RnnConfig;

    fn model() -> RnnModel {
        let cfg = RnnConfig {
            hidden: vec![3, 5],
            ..Default::default()
        };
        RnnModel::new(&cfg, Normalization::from_area(&Area::REFERENCE), 10.0, 4).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = model();
        save_model(&path, &m).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn rejects_bad_files() {
        let m = model();
        let json = to_json(&m).unwrap();
        let v2 = json.replace("\"version\":1", "\"version\":2");
        assert!(matches!(from_json(&v2), Err(Error::Model(msg)) if msg.contains("version")));
        let mut broken = m.clone();
        broken.params.lstm[1].w_hi.data.pop();
        assert!(from_json(&to_json(&broken).unwrap()).is_err());
        let mut unchained = m.clone();
        unchained.params.dense.pop();
        assert!(from_json(&to_json(&unchained).unwrap()).is_err());
        assert!(from_json("{").is_err());
    }
}
