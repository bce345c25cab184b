use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::TransolverConfig;
use super::lora::LoraAdapter;
use super::model::TransolverModel;
use crate::diffcore::{read_checkpoint, write_checkpoint};
use crate::{Error, Result};

/// Structured-text companion of a model checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub config: TransolverConfig,
    pub adapters: Vec<LoraAdapter>,
    /// SHA-256 of the parameter store, checked on load.
    pub digest: String,
}

/// `model.pncl` → `model.pncl.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_model(model: &TransolverModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, &model.params)?;
    w.flush()?;
    let header = ModelHeader { config: model.config, adapters: model.adapters.clone(), digest: model.params.digest() };
    let text = serde_json::to_string_pretty(&header).map_err(|e| Error::Malformed(e.to_string()))?;
    std::fs::write(sidecar_path(path), text + "\n")?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TransolverModel> {
    let text = std::fs::read_to_string(sidecar_path(path))?;
    let header: ModelHeader =
        serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("model header: {e}")))?;
    header.config.validate()?;
    let mut params = read_checkpoint(BufReader::new(File::open(path)?))?;
    if params.digest() != header.digest {
        return Err(Error::Malformed("checkpoint digest does not match its header".into()));
    }

    let base = TransolverModel::new(header.config, 0)?;
    let expected = base.params.len() + 2 * header.adapters.len();
    if params.len() != expected {
        return Err(Error::Malformed(format!("expected {expected} tensors, found {}", params.len())));
    }
    for (name, t, _) in base.params.iter() {
        match params.get(name) {
            Some(p) if p.shape() == t.shape() => {}
            _ => return Err(Error::Malformed(format!("parameter `{name}` missing or misshapen"))),
        }
    }
    for a in &header.adapters {
        let w = base
            .params
            .get(&a.target)
            .ok_or_else(|| Error::Malformed(format!("unknown adapter target `{}`", a.target)))?;
        let ok_a = params.get(&a.a_name()).is_some_and(|t| t.shape() == [w.rows(), a.rank]);
        let ok_b = params.get(&a.b_name()).is_some_and(|t| t.shape() == [a.rank, w.cols()]);
        if !(ok_a && ok_b) {
            return Err(Error::Malformed(format!("adapter factors for `{}` missing or misshapen", a.target)));
        }
    }
    if !header.adapters.is_empty() {
        for i in 0..params.len() {
            let name = params.name(i);
            let factor = name.ends_with(".lora_a") || name.ends_with(".lora_b");
            params.set_trainable(i, factor);
        }
    }
    Ok(TransolverModel { config: header.config, params, adapters: header.adapters })
}
