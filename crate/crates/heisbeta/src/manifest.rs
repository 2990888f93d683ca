//! Run manifests: a TOML sidecar written next to every command output.
//!
//! A manifest embeds the full config text, so `heisbeta replay` can rerun it and
//! compare output digests byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    /// Resolution parameters of the run, keyed `section.key`.
    pub grids: BTreeMap<String, String>,
    pub version: String,
    pub wall_clock_secs: f64,
    /// SHA-256 of each output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    pub config: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `<out>.manifest.toml`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}

pub fn grid_parameters(cfg: &RunConfig) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("beta.points", format!("{:?}", cfg.beta.points));
    put("beta.v_grid", format!("{:?}", cfg.beta.v_grid));
    put("trace.step", format!("{:e}", cfg.trace.step));
    put("patchwork.depth_cap", cfg.patchwork.depth_cap.to_string());
    put("patchwork.fit_grid", cfg.patchwork.fit_grid.to_string());
    put("patchwork.curve_steps", cfg.patchwork.curve_steps.to_string());
    put("carleson.spatial_grid", cfg.carleson.spatial_grid.to_string());
    put("carleson.v_grid", format!("{:?}", cfg.carleson.v_grid));
    put("carleson.levels", format!("{:?}", cfg.carleson.levels));
    put("carleson.per_octave", cfg.carleson.per_octave.to_string());
    m
}

impl RunManifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("manifest serialization: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {}", e.to_string().trim())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}
