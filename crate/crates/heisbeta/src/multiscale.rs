//! Discretized multiscale Carleson integrals `∫∫ γ_p(x, r)^s dr/r dx` over `(1/3)Q`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{gamma_p, gamma_p_of, VMask};
use crate::error::{Error, Result};
use crate::flow::fmt_f64;
use crate::graph::{GraphSpec, IntrinsicGraph};
use crate::patchwork::{coherent_slice, evaluate_g_s, g_s_error, weight, PatchworkTree};
use crate::quad::{ParabolicRectangle, Pseudoquad};

/// Root pseudoquad through `(center_x, center_z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RootSpec {
    pub center_x: f64,
    pub center_z: f64,
    pub delta_x: f64,
    pub delta_z: f64,
    pub mu: f64,
}

impl Default for RootSpec {
    fn default() -> Self {
        RootSpec {
            center_x: 0.0,
            center_z: 0.0,
            delta_x: 1.0,
            delta_z: 1.0,
            mu: 1.0 / 32.0,
        }
    }
}

impl RootSpec {
    pub fn build(&self, g: &IntrinsicGraph) -> Result<Pseudoquad> {
        Pseudoquad::through(g, self.center_x, self.center_z, self.delta_x, self.delta_z, self.mu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarlesonSpec {
    pub p_exponent: f64,
    pub s_exponent: f64,
    /// Octaves `i₀..=i₁`; radii `r = ν 2^{-k/m}` for `k = m i₀ ..= m i₁`.
    pub levels: (u32, u32),
    /// Radii per octave `m`.
    pub per_octave: u32,
    /// Midpoint grid per side over `(1/3)Q`.
    pub spatial_grid: usize,
    pub v_grid: (usize, usize),
    /// Largest radius; searched for when absent.
    pub nu: Option<f64>,
    pub alpha_min: f64,
}

impl Default for CarlesonSpec {
    fn default() -> Self {
        CarlesonSpec {
            p_exponent: 4.0,
            s_exponent: 4.0,
            levels: (0, 12),
            per_octave: 1,
            spatial_grid: 12,
            v_grid: (32, 32),
            nu: None,
            alpha_min: 0.125,
        }
    }
}

impl CarlesonSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_exponent >= 1.0 && self.p_exponent.is_finite()) {
            return Err(Error::Parameter(format!("p = {} must be ≥ 1", self.p_exponent)));
        }
        if !(self.s_exponent >= 1.0 && self.s_exponent.is_finite()) {
            return Err(Error::Parameter(format!("s = {} must be ≥ 1", self.s_exponent)));
        }
        if self.levels.0 > self.levels.1 || self.per_octave == 0 {
            return Err(Error::Parameter("empty level range".into()));
        }
        if self.spatial_grid == 0 || self.v_grid.0 < 2 || self.v_grid.1 < 2 {
            return Err(Error::Parameter("grids must be nonempty".into()));
        }
        if let Some(nu) = self.nu {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::Parameter(format!("nu = {nu} must be positive")));
            }
        }
        if !(self.alpha_min > 0.0 && self.alpha_min < 1.0) {
            return Err(Error::Parameter("alpha_min must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn radii(&self, nu: f64) -> Vec<f64> {
        let m = self.per_octave;
        (m * self.levels.0..=m * self.levels.1)
            .map(|k| nu * 2f64.powf(-(k as f64) / m as f64))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub s_exponent: f64,
    pub p_exponent: f64,
    pub nu: f64,
    pub tau: f64,
    pub radii: Vec<f64>,
    /// Per-radius contributions to the normalized total.
    pub level_sums: Vec<f64>,
    /// `Σ level_sums`, the integral divided by `|Q|`.
    pub total: f64,
    pub refinement: Option<u32>,
    /// Radii flagged as below the floating-point resolution of the region grid.
    pub warnings: usize,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["level", "r", "s", "p", "level_sum", "cumulative"])?;
        let mut acc = 0.0;
        for (k, (r, v)) in self.radii.iter().zip(&self.level_sums).enumerate() {
            acc += v;
            wr.write_record([
                k.to_string(),
                fmt_f64(*r),
                fmt_f64(self.s_exponent),
                fmt_f64(self.p_exponent),
                fmt_f64(*v),
                fmt_f64(acc),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Midpoint grid over `(1/3)Q`.
pub fn third_grid(q: &Pseudoquad, n: usize) -> (ParabolicRectangle, Vec<(f64, f64)>) {
    let r3 = q.scale(1.0 / 3.0);
    let (a, b) = r3.base;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = a + (b - a) * (i as f64 + 0.5) / n as f64;
        let z0 = r3.lower(x);
        for k in 0..n {
            pts.push((x, z0 + r3.d * (k as f64 + 0.5) / n as f64));
        }
    }
    (r3, pts)
}

/// Largest `ν ≤ δ_x(Q)` such that every mask node of `V(Ψ(x), ν)` lies in `Q` for
/// `x` on a closed 9×9 grid of `(1/3)Q`, by bisection.
pub fn default_nu(g: &IntrinsicGraph, q: &Pseudoquad, mask: &VMask) -> Result<f64> {
    let r3 = q.scale(1.0 / 3.0);
    let (a, b) = r3.base;
    let mut probes = Vec::new();
    for i in 0..=8 {
        let x = a + (b - a) * i as f64 / 8.0;
        for k in 0..=8 {
            let z = r3.lower(x) + r3.d * k as f64 / 8.0;
            probes.push((x, z, g.psi_checked(x, z)?));
        }
    }
    let inside = |nu: f64| {
        probes.iter().all(|&(x, z, y)| {
            mask.nodes
                .iter()
                .all(|&(s, t)| q.contains(x + nu * s, z - y * nu * s + nu * nu * t))
        })
    };
    let mut hi = q.delta_x();
    if inside(hi) {
        return Ok(hi);
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(lo > 0.0) {
        return Err(Error::Coverage("no positive radius keeps V inside Q".into()));
    }
    Ok(lo)
}

/// `γ_p(x, r_k)` for every radius (outer) and grid point (inner), plus the resolution warning count.
fn gamma_table(
    g: &IntrinsicGraph,
    pts: &[(f64, f64)],
    radii: &[f64],
    p: f64,
    mask: &VMask,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let jobs: Vec<(usize, usize)> = (0..radii.len())
        .flat_map(|k| (0..pts.len()).map(move |j| (k, j)))
        .collect();
    let vals: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(k, j)| gamma_p(g, pts[j], radii[k], p, mask).map(|s| s.value))
        .collect();
    let mut table = vec![Vec::with_capacity(pts.len()); radii.len()];
    for (&(k, _), v) in jobs.iter().zip(vals) {
        table[k].push(v?);
    }
    let zmax = pts.iter().fold(1.0f64, |m, p| m.max(p.1.abs()));
    let mut warnings = 0;
    for &r in radii {
        if r * r * 2.0 / mask.grid.1 as f64 <= 64.0 * f64::EPSILON * zmax {
            log::warn!("radius {r:e} is below the z-resolution of the region grid");
            warnings += 1;
        }
    }
    Ok((table, warnings))
}

fn totals_from(table: &[Vec<f64>], s: f64, per_octave: u32, third_ratio: f64) -> (Vec<f64>, f64) {
    let w = std::f64::consts::LN_2 / per_octave as f64;
    let sums: Vec<f64> = table
        .iter()
        .map(|row| w * row.iter().map(|g| g.powf(s)).sum::<f64>() / row.len() as f64 * third_ratio)
        .collect();
    let total = sums.iter().sum();
    (sums, total)
}

struct Prepared {
    q: Pseudoquad,
    pts: Vec<(f64, f64)>,
    nu: f64,
    radii: Vec<f64>,
    mask: VMask,
    third_ratio: f64,
}

fn prepare(g: &IntrinsicGraph, root: &RootSpec, spec: &CarlesonSpec) -> Result<Prepared> {
    spec.validate()?;
    let q = root.build(g)?;
    let mask = VMask::new(spec.v_grid);
    let nu = match spec.nu {
        Some(nu) => nu,
        None => default_nu(g, &q, &mask)?,
    };
    let (r3, pts) = third_grid(&q, spec.spatial_grid);
    let third_ratio = r3.area() / q.area();
    Ok(Prepared {
        radii: spec.radii(nu),
        q,
        pts,
        nu,
        mask,
        third_ratio,
    })
}

/// `Σ_k (ln 2/m) · mean_{(1/3)Q}(γ_p(x, r_k)^s) · |(1/3)Q| / |Q|`.
pub fn carleson_integral(g: &IntrinsicGraph, root: &RootSpec, spec: &CarlesonSpec) -> Result<SweepResult> {
    Ok(carleson_multi(g, root, spec, &[spec.s_exponent])?.remove(0))
}

/// As [`carleson_integral`] for several exponents `s` sharing one table of `γ` values.
pub fn carleson_multi(g: &IntrinsicGraph, root: &RootSpec, spec: &CarlesonSpec, s_values: &[f64]) -> Result<Vec<SweepResult>> {
    for &s in s_values {
        if !(s >= 1.0 && s.is_finite()) {
            return Err(Error::Parameter(format!("s = {s} must be ≥ 1")));
        }
    }
    let prep = prepare(g, root, spec)?;
    let (table, warnings) = gamma_table(g, &prep.pts, &prep.radii, spec.p_exponent, &prep.mask)?;
    log::debug!("gamma table: {} radii × {} points, |Q| = {}", prep.radii.len(), prep.pts.len(), prep.q.area());
    Ok(s_values
        .iter()
        .map(|&s| {
            let (level_sums, total) = totals_from(&table, s, spec.per_octave, prep.third_ratio);
            SweepResult {
                s_exponent: s,
                p_exponent: spec.p_exponent,
                nu: prep.nu,
                tau: prep.nu / (2.0 * spec.alpha_min),
                radii: prep.radii.clone(),
                level_sums,
                total,
                refinement: None,
                warnings,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub refinement: u32,
    pub s_exponent: f64,
    pub total: f64,
}

/// Normalized totals indexed by `(refinement, s)` for a bump family.
pub fn exponent_sweep(
    base: &GraphSpec,
    root: &RootSpec,
    spec: &CarlesonSpec,
    s_values: &[f64],
    refinements: &[u32],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &k in refinements {
        let gs = match base {
            GraphSpec::Bump {
                aspect,
                amplitude,
                nx,
                nz,
                seed,
                ..
            } => GraphSpec::Bump {
                aspect: *aspect,
                amplitude: *amplitude,
                nx: *nx,
                nz: *nz,
                refinement: k,
                seed: *seed,
            },
            _ => return Err(Error::Parameter("exponent sweep needs a bump family".into())),
        };
        let g = gs.build()?;
        for r in carleson_multi(&g, root, spec, s_values)? {
            rows.push(SweepRow {
                refinement: k,
                s_exponent: r.s_exponent,
                total: r.total,
            });
        }
    }
    Ok(rows)
}

/// Growth table: one row per refinement, one column per exponent.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut ss: Vec<f64> = Vec::new();
    for r in rows {
        if !ss.contains(&r.s_exponent) {
            ss.push(r.s_exponent);
        }
    }
    let mut refs: Vec<u32> = rows.iter().map(|r| r.refinement).collect();
    refs.dedup();
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["refinement".to_string()];
    header.extend(ss.iter().map(|s| format!("s={s}")));
    wr.write_record(&header)?;
    for k in refs {
        let mut rec = vec![k.to_string()];
        for s in &ss {
            let v = rows
                .iter()
                .find(|r| r.refinement == k && r.s_exponent == *s)
                .map(|r| r.total)
                .unwrap_or(f64::NAN);
            rec.push(fmt_f64(v));
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaReport {
    pub i: usize,
    pub radius: f64,
    /// `∫_{(1/3)Q} σ_i(x, r)^4 dx`.
    pub integral: f64,
    pub weight: f64,
    pub ratio: f64,
    /// Grid points where `γ_4 ≤ r^{-7/4}‖g_{S_i} - f‖_{L₄(V)} + σ_i` fails.
    pub triangle_violations: usize,
    /// Region nodes outside `Q_root` evaluated through the nearest piece.
    pub flagged: usize,
}

/// Radius used for slice `i`: `ν 2^{-i}` in units where the root has unit height.
pub fn slice_radius(tree: &PatchworkTree, i: usize, nu: f64) -> f64 {
    nu * tree.root().quad.delta_z().sqrt() * 2f64.powi(-(i as i32))
}

/// `σ_i(x, r) = r^{-7/4} inf_h ‖g_{S_i} - h‖_{L₄(V(Ψ_f(x), r))}` integrated over `(1/3)Q`
/// against `W(F_i)`, with the pointwise triangle inequality checked along the way.
pub fn sigma_weight_check(
    tree: &PatchworkTree,
    g: &IntrinsicGraph,
    i: usize,
    nu: f64,
    spatial_grid: usize,
    mask: &VMask,
) -> Result<SigmaReport> {
    let slice = coherent_slice(tree, i)?;
    let w = weight(tree, &slice.minimal);
    let r = slice_radius(tree, i, nu);
    let q = &tree.root().quad;
    let (r3, pts) = third_grid(q, spatial_grid);
    let cell = mask.cell_area(r);
    let rows: Vec<Result<(f64, bool, usize)>> = pts
        .par_iter()
        .map(|&(x, z)| {
            let sigma = gamma_p_of(g, (x, z), r, 4.0, mask, |a, b| evaluate_g_s(tree, &slice.set, a, b).0)?.value;
            let gamma = gamma_p(g, (x, z), r, 4.0, mask)?.value;
            let y0 = g.psi(x, z);
            let mut err4 = 0.0;
            let mut flagged = 0;
            for &(s, t) in &mask.nodes {
                let (a, b) = (x + r * s, z - y0 * r * s + r * r * t);
                let (val, fl) = evaluate_g_s(tree, &slice.set, a, b);
                flagged += fl as usize;
                err4 += cell * (val - g.psi(a, b)).powi(4);
            }
            let bound = r.powf(-1.75) * err4.powf(0.25) + sigma;
            Ok((sigma.powi(4), gamma > bound * (1.0 + 1e-9) + 1e-300, flagged))
        })
        .collect();
    let mut sum = 0.0;
    let (mut viol, mut flagged) = (0, 0);
    for row in rows {
        let (s4, v, f) = row?;
        sum += s4;
        viol += v as usize;
        flagged += f;
    }
    let integral = sum / pts.len() as f64 * r3.area();
    Ok(SigmaReport {
        i,
        radius: r,
        integral,
        weight: w,
        ratio: integral / w,
        triangle_violations: viol,
        flagged,
    })
}

/// `‖g_{S_i} - f‖⁴_{L₄(Q)} / (ℓ_i⁴ W(F_i))` with `ℓ_i² = 4^{-i} δ_z(Q_root)`.
pub fn l4_weight_check(tree: &PatchworkTree, g: &IntrinsicGraph, i: usize, n: usize) -> Result<f64> {
    let slice = coherent_slice(tree, i)?;
    let w = weight(tree, &slice.minimal);
    let err = g_s_error(tree, g, &slice.set, 4.0, n);
    let l2 = slice.threshold;
    Ok(err.powi(4) / (l2 * l2 * w))
}

/// Ids shared by two of the slices `F_0, …, F_imax` that resolve without underflow.
pub fn slice_overlaps(tree: &PatchworkTree, imax: usize) -> usize {
    let slices: Vec<Vec<usize>> = (0..=imax).filter_map(|i| coherent_slice(tree, i).ok()).map(|s| s.minimal).collect();
    let mut shared = 0;
    for a in 0..slices.len() {
        for b in a + 1..slices.len() {
            shared += slices[a].iter().filter(|w| slices[b].contains(w)).count();
        }
    }
    shared
}
