//! Command-line front end.
//!
//! Each command reads a config, computes its outputs in memory, then writes them
//! together with a [`RunManifest`] sidecar. `replay` reruns a manifest and fails
//! unless every output digest matches.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::beta::{sample_sweep, write_samples_csv};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::trace;
use crate::graph::{certify, IntrinsicGraph};
use crate::manifest::{grid_parameters, manifest_path, sha256_hex, RunManifest};
use crate::multiscale::{carleson_integral, exponent_sweep, write_sweep_csv};
use crate::patchwork::{
    affine_norm_check, build_patchwork_with_rule, carleson_check, horizontal_curve_deviation, structure_check,
    CutLabel,
};

#[derive(Debug, Parser)]
#[command(name = "heisbeta", version, about = "Beta numbers and Carleson sums for intrinsic graphs in the Heisenberg group")]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// γ_p or β_p samples over a grid of points, radii and exponents.
    Beta(RunArgs),
    /// One characteristic curve as (t, g) rows.
    Trace(RunArgs),
    /// Foliated patchwork tree plus an audit report.
    Decompose(RunArgs),
    /// Discretized Carleson integral for one exponent.
    Carleson(RunArgs),
    /// Growth table of normalized totals across bump refinements.
    Sweep(RunArgs),
    /// Rerun a manifest and compare output digests.
    Replay {
        manifest: PathBuf,
        /// Where to write the regenerated primary output; defaults to a temporary name next to the manifest.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output file; stdout when absent, in which case no manifest is written.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Beta,
    Trace,
    Decompose,
    Carleson,
    Sweep,
}

impl CommandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandKind::Beta => "beta",
            CommandKind::Trace => "trace",
            CommandKind::Decompose => "decompose",
            CommandKind::Carleson => "carleson",
            CommandKind::Sweep => "sweep",
        }
    }
}

impl FromStr for CommandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "beta" => CommandKind::Beta,
            "trace" => CommandKind::Trace,
            "decompose" => CommandKind::Decompose,
            "carleson" => CommandKind::Carleson,
            "sweep" => CommandKind::Sweep,
            _ => return Err(Error::Config(format!("manifest: unknown command `{s}`"))),
        })
    }
}

/// Output files of one run: the primary stream and suffixed side files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outputs {
    pub primary: Vec<u8>,
    pub extra: Vec<(&'static str, Vec<u8>)>,
}

#[derive(Debug, Serialize)]
struct Audit {
    vertices: usize,
    horizontal: usize,
    vertical: usize,
    leaves: usize,
    fallbacks: usize,
    carleson_max_ratio: f64,
    carleson_argmax: usize,
    carleson_bound: f64,
    carleson_pass: bool,
    tiling_mismatch: f64,
    split_mismatch: f64,
    horizontal_alpha_error: f64,
    vertical_area_ratio: (f64, f64),
    vertical_dx_error: f64,
    max_rectilinearity_gap: f64,
    affine_norm_max_ratio: f64,
    affine_norm_pass: bool,
    horizontal_curve_deviation: f64,
}

fn build_graph(cfg: &RunConfig) -> Result<IntrinsicGraph> {
    let g = cfg.graph.build()?;
    if cfg.certify.samples > 0 {
        let rep = certify(&g, cfg.certify.samples, cfg.seed)?;
        log::info!("certified: empirical L = {:.6} over {} pairs", rep.empirical, rep.pairs);
    }
    Ok(g)
}

/// Runs one command entirely in memory.
pub fn execute(kind: CommandKind, cfg: &RunConfig) -> Result<Outputs> {
    let g = build_graph(cfg)?;
    let mut primary = Vec::new();
    let mut extra = Vec::new();
    match kind {
        CommandKind::Beta => {
            let b = &cfg.beta;
            b.validate()?;
            let samples = sample_sweep(&g, &b.sample_points(), &b.radii, &b.p, b.estimator, b.v_grid)?;
            write_samples_csv(&mut primary, &samples)?;
        }
        CommandKind::Trace => {
            let t = &cfg.trace;
            trace(&g, t.x0, t.z0, t.t_min, t.t_max, t.step)?.write_csv(&mut primary)?;
        }
        CommandKind::Decompose => {
            let root = cfg.root.build(&g)?;
            let tree = build_patchwork_with_rule(&g, root, &cfg.patchwork, cfg.decompose.rule)?;
            tree.write_records(&mut primary)?;
            let c = carleson_check(&tree, cfg.decompose.carleson_bound);
            let s = structure_check(&tree)?;
            let a = affine_norm_check(&tree);
            let audit = Audit {
                vertices: tree.len(),
                horizontal: tree.count(CutLabel::Horizontal),
                vertical: tree.count(CutLabel::Vertical),
                leaves: tree.count(CutLabel::Leaf),
                fallbacks: tree.vertices.iter().filter(|v| v.fallback).count(),
                carleson_max_ratio: c.max_ratio,
                carleson_argmax: c.argmax,
                carleson_bound: c.bound,
                carleson_pass: c.pass,
                tiling_mismatch: s.tiling_mismatch,
                split_mismatch: s.split_mismatch,
                horizontal_alpha_error: s.horizontal_alpha_error,
                vertical_area_ratio: s.vertical_area_ratio,
                vertical_dx_error: s.vertical_dx_error,
                max_rectilinearity_gap: s.max_gap,
                affine_norm_max_ratio: a.max_ratio,
                affine_norm_pass: a.pass,
                horizontal_curve_deviation: horizontal_curve_deviation(&tree),
            };
            let text = toml::to_string(&audit).map_err(|e| Error::Internal(format!("audit serialization: {e}")))?;
            extra.push(("audit.toml", text.into_bytes()));
        }
        CommandKind::Carleson => {
            carleson_integral(&g, &cfg.root, &cfg.carleson)?.write_csv(&mut primary)?;
        }
        CommandKind::Sweep => {
            let sw = &cfg.sweep;
            if sw.refinements.is_empty() || sw.s_values.is_empty() {
                return Err(Error::Config("sweep: refinements and s_values must be nonempty".into()));
            }
            let rows = exponent_sweep(&cfg.graph, &cfg.root, &cfg.carleson, &sw.s_values, &sw.refinements)?;
            write_sweep_csv(&mut primary, &rows)?;
        }
    }
    Ok(Outputs { primary, extra })
}

fn side_path(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes the outputs under `out` and returns the digest table keyed by file name.
fn write_outputs(out: &Path, o: &Outputs) -> Result<BTreeMap<String, String>> {
    let mut digests = BTreeMap::new();
    std::fs::write(out, &o.primary)?;
    digests.insert(file_name(out), sha256_hex(&o.primary));
    for (suffix, bytes) in &o.extra {
        let p = side_path(out, suffix);
        std::fs::write(&p, bytes)?;
        digests.insert(file_name(&p), sha256_hex(bytes));
    }
    Ok(digests)
}

/// Runs a command from a config file and writes outputs plus manifest.
pub fn run_config(kind: CommandKind, config: &Path, out: Option<&Path>) -> Result<()> {
    let (cfg, text) = RunConfig::load(config)?;
    let started = Instant::now();
    let outputs = execute(kind, &cfg)?;
    let secs = started.elapsed().as_secs_f64();
    match out {
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(&outputs.primary)?;
            for (suffix, bytes) in &outputs.extra {
                writeln!(so, "# {suffix}")?;
                so.write_all(bytes)?;
            }
            so.flush()?;
        }
        Some(out) => {
            let digests = write_outputs(out, &outputs)?;
            let m = RunManifest {
                command: kind.as_str().to_string(),
                config_digest: sha256_hex(text.as_bytes()),
                seed: cfg.seed,
                grids: grid_parameters(&cfg),
                version: env!("CARGO_PKG_VERSION").to_string(),
                wall_clock_secs: secs,
                outputs: digests,
                config: text,
            };
            std::fs::write(manifest_path(out), m.to_toml()?)?;
            log::info!("{} finished in {secs:.2} s", kind.as_str());
        }
    }
    Ok(())
}

/// Reruns a manifest; fails unless the config digest and every output digest match.
pub fn replay(manifest: &Path, out: Option<&Path>) -> Result<()> {
    let m = RunManifest::read(manifest)?;
    if sha256_hex(m.config.as_bytes()) != m.config_digest {
        return Err(Error::Config("manifest: embedded config does not match config_digest".into()));
    }
    let kind: CommandKind = m.command.parse()?;
    let cfg = RunConfig::parse(&m.config)?;
    let outputs = execute(kind, &cfg)?;
    let primary_name = m
        .outputs
        .keys()
        .find(|k| !k.ends_with(".audit.toml"))
        .cloned()
        .ok_or_else(|| Error::Config("manifest: no outputs recorded".into()))?;
    let out = match out {
        Some(p) => p.to_path_buf(),
        None => manifest
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("{primary_name}.replay")),
    };
    let got = write_outputs(&out, &outputs)?;
    // compare by suffix relative to the primary file name
    let by_suffix = |map: &BTreeMap<String, String>, primary: &str| -> BTreeMap<String, String> {
        map.iter()
            .map(|(k, v)| (k.strip_prefix(primary).unwrap_or(k).to_string(), v.clone()))
            .collect()
    };
    let want = by_suffix(&m.outputs, &primary_name);
    if want != by_suffix(&got, &file_name(&out)) {
        return Err(Error::Internal(format!(
            "replay of {} differs from the recorded outputs (written to {})",
            manifest.display(),
            out.display()
        )));
    }
    log::info!("replay matches {} output(s)", want.len());
    Ok(())
}

/// Dispatches parsed arguments.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Beta(a) => run_config(CommandKind::Beta, &a.config, a.out.as_deref()),
        Command::Trace(a) => run_config(CommandKind::Trace, &a.config, a.out.as_deref()),
        Command::Decompose(a) => run_config(CommandKind::Decompose, &a.config, a.out.as_deref()),
        Command::Carleson(a) => run_config(CommandKind::Carleson, &a.config, a.out.as_deref()),
        Command::Sweep(a) => run_config(CommandKind::Sweep, &a.config, a.out.as_deref()),
        Command::Replay { manifest, out } => replay(&manifest, out.as_deref()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::parse(text).unwrap()
    }

    #[test]
    fn command_names_round_trip() {
        for k in [
            CommandKind::Beta,
            CommandKind::Trace,
            CommandKind::Decompose,
            CommandKind::Carleson,
            CommandKind::Sweep,
        ] {
            assert_eq!(k.as_str().parse::<CommandKind>().unwrap(), k);
        }
        assert!(matches!("nope".parse::<CommandKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn trace_of_unit_field_is_slope_minus_one() {
        let c = cfg("seed = 0\n[graph]\nkind = \"affine\"\na = 0.0\nb = 1.0\n[trace]\nstep = 0.125\n");
        let o = execute(CommandKind::Trace, &c).unwrap();
        let text = String::from_utf8(o.primary).unwrap();
        let mut rows = text.lines();
        assert_eq!(rows.next(), Some("t,g"));
        for line in rows {
            let (t, g) = line.split_once(',').unwrap();
            let (t, g): (f64, f64) = (t.parse().unwrap(), g.parse().unwrap());
            assert!((g + t).abs() < 1e-12, "{t} {g}");
        }
    }

    #[test]
    fn decompose_depth_zero_is_single_vertex() {
        let c = cfg("seed = 0\n[graph]\nkind = \"flat\"\n[patchwork]\ndepth_cap = 0\n");
        let o = execute(CommandKind::Decompose, &c).unwrap();
        assert_eq!(String::from_utf8(o.primary).unwrap().lines().count(), 2);
        let audit = String::from_utf8(o.extra[0].1.clone()).unwrap();
        assert!(audit.contains("vertices = 1"), "{audit}");
    }

    #[test]
    fn side_files_append_suffix() {
        assert_eq!(side_path(Path::new("a/t.csv"), "audit.toml"), PathBuf::from("a/t.csv.audit.toml"));
    }
}
