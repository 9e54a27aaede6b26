//! Model checkpoint files: the core codec's flat binary blob on disk.

use std::fs;
use std::path::Path;

use anyhow::Context;
use mtfilter_core::neural::{decode_model, encode_model, ModelTuple};

pub fn save_model(path: &Path, model: &ModelTuple) -> anyhow::Result<()> {
    fs::write(path, encode_model(model))
        .with_context(|| format!("writing checkpoint {}", path.display()))
}

pub fn load_model(path: &Path) -> anyhow::Result<ModelTuple> {
    let bytes =
        fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    decode_model(&bytes).with_context(|| format!("decoding checkpoint {}", path.display()))
}
