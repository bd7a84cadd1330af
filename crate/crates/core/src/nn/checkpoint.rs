//! On-disk critic format: a directory with `manifest.json` and `params.bin`.
//!
//! `params.bin` holds every layer's weight matrix (row-major, `out x in`)
//! followed by its bias, as little-endian `f32`, in layer order.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Dense, Mlp, QNetwork};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub state_dim: usize,
    pub action_dim: usize,
    pub noise_conditioned: bool,
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub parameter_count: usize,
    pub fingerprint: u64,
}

impl CheckpointManifest {
    pub fn describe(q: &QNetwork) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            state_dim: q.state_dim(),
            action_dim: q.action_dim(),
            noise_conditioned: q.is_noise_conditioned(),
            layer_widths: q.mlp().widths().to_vec(),
            activation: q.mlp().activation(),
            parameter_count: q.mlp().parameter_count(),
            fingerprint: q.mlp().fingerprint(),
        }
    }
}

pub fn save_checkpoint(dir: &Path, q: &QNetwork) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = CheckpointManifest::describe(q);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join(MANIFEST_FILE), json + "\n")?;

    let mut bytes = Vec::with_capacity(4 * manifest.parameter_count);
    for x in q.mlp().param_slices().flatten() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(dir.join(PARAMS_FILE), bytes)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let fail = |reason: String| Error::Checkpoint {
        path: dir.to_path_buf(),
        reason,
    };
    let text =
        fs::read_to_string(dir.join(MANIFEST_FILE)).map_err(|e| fail(format!("manifest: {e}")))?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&text).map_err(|e| fail(format!("manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(fail(format!(
            "unsupported format version {}",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<QNetwork> {
    let fail = |reason: String| Error::Checkpoint {
        path: dir.to_path_buf(),
        reason,
    };
    let manifest = read_manifest(dir)?;
    let bytes = fs::read(dir.join(PARAMS_FILE)).map_err(|e| fail(format!("params: {e}")))?;
    if bytes.len() != 4 * manifest.parameter_count {
        return Err(fail(format!(
            "expected {} parameter bytes, found {}",
            4 * manifest.parameter_count,
            bytes.len()
        )));
    }
    if manifest.layer_widths.len() < 2 {
        return Err(fail("manifest lists fewer than two layer widths".into()));
    }
    let mut values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let mut layers = Vec::with_capacity(manifest.layer_widths.len() - 1);
    for w in manifest.layer_widths.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let weight: Vec<f32> = values.by_ref().take(inputs * outputs).collect();
        let bias: Vec<f32> = values.by_ref().take(outputs).collect();
        if weight.len() != inputs * outputs || bias.len() != outputs {
            return Err(fail(
                "parameter file shorter than layer widths imply".into(),
            ));
        }
        layers.push(Dense {
            weight: Array2::from_shape_vec((outputs, inputs), weight).expect("sized above"),
            bias: Array1::from(bias),
        });
    }
    if values.next().is_some() {
        return Err(fail("parameter count disagrees with layer widths".into()));
    }
    let mlp = Mlp::from_layers(layers, manifest.activation)?;
    if mlp.fingerprint() != manifest.fingerprint {
        return Err(fail("parameter fingerprint mismatch".into()));
    }
    QNetwork::from_mlp(
        mlp,
        manifest.state_dim,
        manifest.action_dim,
        manifest.noise_conditioned,
    )
}
