//! Run configuration.
//!
//! A config is a TOML file with a top-level `seed` and one flat table per module:
//!
//! ```toml
//! seed = 7
//!
//! [graph]
//! kind = "bump"
//! aspect = 4.0
//! amplitude = 1e-4
//! nx = 16
//! nz = 4096
//! refinement = 1
//!
//! [carleson]
//! levels = [0, 24]
//! spatial_grid = 16
//! v_grid = [32, 32]
//! nu = 0.3333333333333333
//! ```
//!
//! Every table except `[graph]` is optional and falls back to its defaults.
//! Random graph kinds take their seed from the top-level `seed`; a `seed` key
//! inside `[graph]` is rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::beta::{Estimator, DEFAULT_GRID};
use crate::error::{Error, Result};
use crate::graph::GraphSpec;
use crate::multiscale::{CarlesonSpec, RootSpec};
use crate::patchwork::{CutRule, PatchworkParams};

const SECTIONS: [&str; 9] = ["graph", "certify", "beta", "trace", "patchwork", "decompose", "root", "carleson", "sweep"];

/// Sampled Lipschitz certification run before every command; `samples = 0` skips it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    pub samples: usize,
}

impl Default for CertifySection {
    fn default() -> Self {
        CertifySection { samples: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSection {
    pub estimator: Estimator,
    pub p: Vec<f64>,
    pub radii: Vec<f64>,
    pub x_range: (f64, f64),
    pub z_range: (f64, f64),
    /// Midpoint sample grid over the region, `(nx, nz)`.
    pub points: (usize, usize),
    pub v_grid: (usize, usize),
}

impl Default for BetaSection {
    fn default() -> Self {
        BetaSection {
            estimator: Estimator::Gamma,
            p: vec![4.0],
            radii: vec![0.25],
            x_range: (-0.5, 0.5),
            z_range: (-0.5, 0.5),
            points: (4, 4),
            v_grid: DEFAULT_GRID,
        }
    }
}

impl BetaSection {
    pub fn sample_points(&self) -> Vec<(f64, f64)> {
        let (nx, nz) = self.points;
        let mut out = Vec::with_capacity(nx * nz);
        for i in 0..nx {
            let x = self.x_range.0 + (i as f64 + 0.5) / nx as f64 * (self.x_range.1 - self.x_range.0);
            for k in 0..nz {
                let z = self.z_range.0 + (k as f64 + 0.5) / nz as f64 * (self.z_range.1 - self.z_range.0);
                out.push((x, z));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.iter().any(|&p| !(p >= 1.0 && p.is_finite())) {
            return Err(Error::Config("beta.p: exponents must be ≥ 1".into()));
        }
        if self.radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Config("beta.radii: radii must be positive".into()));
        }
        if self.points.0 == 0 || self.points.1 == 0 {
            return Err(Error::Config("beta.points: grid must be nonempty".into()));
        }
        if self.v_grid.0 < 2 || self.v_grid.1 < 2 {
            return Err(Error::Config("beta.v_grid: need at least 2 nodes per side".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub x0: f64,
    pub z0: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub step: f64,
}

impl Default for TraceSection {
    fn default() -> Self {
        TraceSection {
            x0: 0.0,
            z0: 0.0,
            t_min: -1.0,
            t_max: 1.0,
            step: 1.0 / 1024.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeSection {
    pub rule: CutRule,
    /// Bound `C` in `Σ α⁻⁴|Q_w| ≤ C|Q_v|` reported by the audit.
    pub carleson_bound: f64,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        DecomposeSection {
            rule: CutRule::Surrogate,
            carleson_bound: 64.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub s_values: Vec<f64>,
    pub refinements: Vec<u32>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            s_values: vec![2.0, 4.0],
            refinements: vec![0, 1, 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub graph: GraphSpec,
    pub certify: CertifySection,
    pub beta: BetaSection,
    pub trace: TraceSection,
    pub patchwork: PatchworkParams,
    pub decompose: DecomposeSection,
    pub root: RootSpec,
    pub carleson: CarlesonSpec,
    pub sweep: SweepSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table: Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(k) = table.keys().find(|k| *k != "seed" && !SECTIONS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let seed = match table.remove("seed") {
            None => return Err(Error::Config("missing key `seed`".into())),
            Some(Value::Integer(i)) if i >= 0 => i as u64,
            Some(_) => return Err(Error::Config("`seed` must be a nonnegative integer".into())),
        };
        let graph = match table.remove("graph") {
            None => return Err(Error::Config("missing key `graph`".into())),
            Some(Value::Table(mut g)) => {
                let random = matches!(g.get("kind").and_then(Value::as_str), Some("perturbed" | "bump"));
                if g.contains_key("seed") {
                    return Err(Error::Config(
                        "`graph.seed` is not allowed; use the top-level `seed`".into(),
                    ));
                }
                if random {
                    g.insert("seed".into(), Value::Integer(seed as i64));
                }
                Value::Table(g)
                    .try_into::<GraphSpec>()
                    .map_err(|e| Error::Config(format!("graph: {}", e.to_string().trim())))?
            }
            Some(_) => return Err(Error::Config("`graph` must be a table".into())),
        };
        Ok(RunConfig {
            seed,
            graph,
            certify: section(&mut table, "certify")?,
            beta: section(&mut table, "beta")?,
            trace: section(&mut table, "trace")?,
            patchwork: section(&mut table, "patchwork")?,
            decompose: section(&mut table, "decompose")?,
            root: section(&mut table, "root")?,
            carleson: section(&mut table, "carleson")?,
            sweep: section(&mut table, "sweep")?,
        })
    }
}

fn section<T: DeserializeOwned + Default>(t: &mut Table, key: &str) -> Result<T> {
    match t.remove(key) {
        None => Ok(T::default()),
        Some(v @ Value::Table(_)) => v
            .try_into()
            .map_err(|e| Error::Config(format!("{key}: {}", e.to_string().trim()))),
        Some(_) => Err(Error::Config(format!("`{key}` must be a table"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        match RunConfig::parse(text) {
            Err(Error::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse("seed = 3\n[graph]\nkind = \"flat\"\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.graph, GraphSpec::Flat);
        assert_eq!(c.patchwork, PatchworkParams::default());
        assert_eq!(c.carleson, CarlesonSpec::default());
        assert_eq!(c.beta, BetaSection::default());
    }

    #[test]
    fn seed_flows_into_random_graphs() {
        let c = RunConfig::parse(
            "seed = 11\n[graph]\nkind = \"bump\"\naspect = 4.0\namplitude = 1e-4\nnx = 16\nnz = 4096\nrefinement = 0\n",
        )
        .unwrap();
        match c.graph {
            GraphSpec::Bump { seed, .. } => assert_eq!(seed, 11),
            g => panic!("{g:?}"),
        }
        assert!(err("seed = 1\n[graph]\nkind = \"perturbed\"\nslope = 0\namplitude = 0.1\nterms = 3\nseed = 2\n")
            .contains("graph.seed"));
    }

    #[test]
    fn errors_name_the_offending_key() {
        assert!(err("seed = 1\n").contains("`graph`"));
        assert!(err("[graph]\nkind = \"flat\"\n").contains("`seed`"));
        assert!(err("seed = 1\n[graph]\nkind = \"affine\"\na = 1.0\n").contains("`b`"));
        assert!(err("seed = 1\n[graph]\nkind = \"affine\"\na = 1.0\nb = 0.0\nc = 2.0\n").contains("`c`"));
        assert!(err("seed = 1\n[graph]\nkind = \"flat\"\n[carleson]\nnus = 0.3\n").contains("`nus`"));
        assert!(err("seed = 1\n[graph]\nkind = \"flat\"\n[extra]\n").contains("`extra`"));
        assert!(err("seed = 1\n[graph]\nkind = \"flat\"\n[patchwork]\nmu = \"x\"\n").starts_with("patchwork"));
    }

    #[test]
    fn beta_points_are_cell_midpoints() {
        let b = BetaSection {
            points: (2, 1),
            x_range: (0.0, 1.0),
            z_range: (-1.0, 1.0),
            ..Default::default()
        };
        assert_eq!(b.sample_points(), vec![(0.25, 0.0), (0.75, 0.0)]);
    }
}
