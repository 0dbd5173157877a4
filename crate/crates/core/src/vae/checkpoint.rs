use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::VaeModel;
use crate::error::{Error, Result};

const FORMAT: &str = "nesvae-checkpoint";
const VERSION: u32 = 1;

/// Self-describing JSON container for a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: VaeModel,
}

pub fn save_checkpoint(model: &VaeModel, path: &Path) -> Result<()> {
    let ckpt = Checkpoint {
        format: FORMAT.to_string(),
        version: VERSION,
        model: model.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<VaeModel> {
    let ckpt: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
    if ckpt.format != FORMAT {
        return Err(Error::CorruptFile(format!("not a checkpoint (format `{}`)", ckpt.format)));
    }
    if ckpt.version != VERSION {
        return Err(Error::VersionMismatch {
            found: ckpt.version,
            expected: VERSION,
        });
    }
    ckpt.model.check()?;
    Ok(ckpt.model)
}
