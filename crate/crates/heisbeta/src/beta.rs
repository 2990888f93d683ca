//! Projected balls `V(p, r)`, the parametric numbers `γ_p` and the surface numbers `β_p`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_affine_lp, AffineMap};
use crate::flow::fmt_f64;
use crate::graph::{graph_point, pair_distance, IntrinsicGraph, Rect};
use crate::heis::{project_pi, HPoint};

pub const DEFAULT_GRID: (usize, usize) = (64, 64);

/// Minimizer `u` of `F(u) = (s²+u²)² + 4(2t+su)²`, the real root of `u³ + 3s²u + 4st = 0`.
#[inline]
fn fiber_argmin(s: f64, t: f64) -> f64 {
    let p = s * s;
    let q = 4.0 * s * t;
    // depressed cubic u³ + 3p u + q = 0 with p ≥ 0: a single real root
    let disc = (0.25 * q * q + p * p * p).sqrt();
    (-0.5 * q + disc).cbrt() + (-0.5 * q - disc).cbrt()
}

/// `min_u F(u)^{1/4}`: the Korányi distance from `p` to the fiber over the node with
/// normalized coordinates `(s, t)` of the parallelogram of `V(p, 1)`.
#[inline]
pub fn fiber_gauge(s: f64, t: f64) -> f64 {
    let u = fiber_argmin(s, t);
    let a = s * s + u * u;
    let b = 2.0 * t + s * u;
    (a * a + 4.0 * b * b).sqrt().sqrt()
}

/// Normalized nodes of `V(p, r)`.
///
/// A node `(s, t)` of the `[-1,1]²` midpoint grid stands for
/// `x = x₀ + r s`, `z = z₀ - y(p) r s + r² t` where `(x₀, 0, z₀) = Π(p)`.
/// Membership does not depend on `p` or `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct VMask {
    pub grid: (usize, usize),
    pub nodes: Vec<(f64, f64)>,
}

impl VMask {
    pub fn new(grid: (usize, usize)) -> Self {
        let (nx, nz) = grid;
        let mut nodes = Vec::new();
        for i in 0..nx {
            let s = (i as f64 + 0.5) / nx as f64 * 2.0 - 1.0;
            for k in 0..nz {
                let t = (k as f64 + 0.5) / nz as f64 * 2.0 - 1.0;
                if fiber_gauge(s, t) <= 1.0 {
                    nodes.push((s, t));
                }
            }
        }
        VMask { grid, nodes }
    }

    /// Area of one grid cell of `V(p, r)` in `V₀`.
    pub fn cell_area(&self, r: f64) -> f64 {
        4.0 * r * r * r / (self.grid.0 * self.grid.1) as f64
    }

    /// `|V(p, r)| / r³` as approximated by the mask.
    pub fn unit_area(&self) -> f64 {
        self.cell_area(1.0) * self.nodes.len() as f64
    }
}

/// Bounding parallelogram of `V(p, r)` as the smallest enclosing rectangle.
pub fn parallelogram_bbox(p: HPoint, r: f64) -> Rect {
    let v = project_pi(p);
    let shear = (p.y * r).abs();
    Rect::new(v.x - r, v.x + r, v.z - shear - r * r, v.z + shear + r * r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VRegion {
    pub center: HPoint,
    pub radius: f64,
    /// `(x, z)` nodes in `V₀`.
    pub nodes: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl VRegion {
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn v_region(g: &IntrinsicGraph, p: HPoint, r: f64, mask: &VMask) -> Result<VRegion> {
    if !(r > 0.0) {
        return Err(Error::Parameter(format!("radius must be positive, got {r}")));
    }
    check_cover(g, p, r)?;
    let v = project_pi(p);
    let nodes: Vec<(f64, f64)> = mask
        .nodes
        .iter()
        .map(|&(s, t)| (v.x + r * s, v.z - p.y * r * s + r * r * t))
        .collect();
    if nodes.is_empty() {
        return Err(Error::Internal("empty V region".into()));
    }
    let w = mask.cell_area(r);
    Ok(VRegion {
        center: p,
        radius: r,
        weights: vec![w; nodes.len()],
        nodes,
    })
}

fn check_cover(g: &IntrinsicGraph, p: HPoint, r: f64) -> Result<()> {
    let bb = parallelogram_bbox(p, r);
    if !g.domain.contains_rect(&bb) {
        return Err(Error::Coverage(format!(
            "V region at ({}, {}) with r = {r} leaves the graph domain",
            p.x, p.z
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Gamma,
    BetaSurface,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Gamma => "gamma",
            Estimator::BetaSurface => "beta-surface",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaSample {
    pub point: HPoint,
    pub radius: f64,
    pub p_exponent: f64,
    pub value: f64,
    pub best_fit: AffineMap,
    pub estimator: Estimator,
    /// Number of quadrature nodes that entered the estimate.
    pub nodes: usize,
}

/// `γ_{p,ψ}(v, r) = r^{-(3+p)/p} inf_h ‖ψ - h‖_{L_p(V(Ψ(v), r))}` on the mask nodes.
pub fn gamma_p(g: &IntrinsicGraph, v: (f64, f64), r: f64, p: f64, mask: &VMask) -> Result<BetaSample> {
    gamma_p_of(g, v, r, p, mask, |x, z| g.psi(x, z))
}

/// `r^{-(3+p)/p} inf_h ‖u - h‖_{L_p(V(Ψ_ψ(v), r))}` for an arbitrary function `u` on `V₀`.
pub fn gamma_p_of<U: Fn(f64, f64) -> f64>(
    g: &IntrinsicGraph,
    v: (f64, f64),
    r: f64,
    p: f64,
    mask: &VMask,
    u: U,
) -> Result<BetaSample> {
    if !(r > 0.0) {
        return Err(Error::Parameter(format!("radius must be positive, got {r}")));
    }
    let (x0, z0) = v;
    let y0 = g.psi_checked(x0, z0)?;
    let center = graph_point(x0, z0, y0);
    check_cover(g, center, r)?;
    let ss: Vec<f64> = mask.nodes.iter().map(|n| n.0).collect();
    let ys: Vec<f64> = mask
        .nodes
        .iter()
        .map(|&(s, t)| u(x0 + r * s, z0 - y0 * r * s + r * r * t))
        .collect();
    let ones = vec![1.0; ss.len()];
    let fit = fit_affine_lp(&ss, &ones, &ys, p)?;
    let n = (mask.grid.0 * mask.grid.1) as f64;
    let value = (4.0 / n).powf(1.0 / p) * fit.residual / r;
    Ok(BetaSample {
        point: center,
        radius: r,
        p_exponent: p,
        value,
        best_fit: AffineMap::new(fit.map.a / r, fit.map.b - fit.map.a * x0 / r),
        estimator: Estimator::Gamma,
        nodes: ss.len(),
    })
}

/// Nodes of `Π(B(x, r) ∩ Γ)` on the parallelogram grid, in normalized coordinates,
/// with the graph heights.
fn ball_nodes(g: &IntrinsicGraph, v: (f64, f64), y0: f64, r: f64, grid: (usize, usize)) -> (Vec<f64>, Vec<f64>) {
    let (x0, z0) = v;
    let (nx, nz) = grid;
    let mut ss = Vec::new();
    let mut ys = Vec::new();
    for i in 0..nx {
        let s = (i as f64 + 0.5) / nx as f64 * 2.0 - 1.0;
        for k in 0..nz {
            let t = (k as f64 + 0.5) / nz as f64 * 2.0 - 1.0;
            let (dx, dz) = (r * s, -y0 * r * s + r * r * t);
            let y = g.psi(x0 + dx, z0 + dz);
            if pair_distance(dx, dz, y0, y) <= r {
                ss.push(s);
                ys.push(y);
            }
        }
    }
    (ss, ys)
}

/// Minimizes `f` over the plane by Nelder–Mead from `x0` with initial steps `step`.
pub fn nelder_mead2<F: Fn([f64; 2]) -> f64>(f: F, x0: [f64; 2], step: [f64; 2], tol: f64, max_iter: usize) -> ([f64; 2], f64) {
    let mut simplex = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut vals = simplex.map(&f);
    for _ in 0..max_iter {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = idx.map(|i| simplex[i]);
        vals = idx.map(|i| vals[i]);
        let spread = (vals[2] - vals[0]).abs();
        let size = (0..2)
            .map(|k| (simplex[1][k] - simplex[0][k]).abs().max((simplex[2][k] - simplex[0][k]).abs()))
            .fold(0.0f64, f64::max);
        if spread <= tol * vals[0].abs().max(1e-300) && size <= tol * (1.0 + simplex[0][0].abs().max(simplex[0][1].abs())) {
            break;
        }
        let c = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| [c[0] + t * (simplex[2][0] - c[0]), c[1] + t * (simplex[2][1] - c[1])];
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(xe);
            if fe < fr {
                simplex[2] = xe;
                vals[2] = fe;
            } else {
                simplex[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = xr;
            vals[2] = fr;
        } else {
            let (xc, fc) = if fr < vals[2] {
                let x = along(-0.5);
                (x, f(x))
            } else {
                let x = along(0.5);
                (x, f(x))
            };
            if fc < vals[2].min(fr) {
                simplex[2] = xc;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = [
                        0.5 * (simplex[0][0] + simplex[k][0]),
                        0.5 * (simplex[0][1] + simplex[k][1]),
                    ];
                    vals[k] = f(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    (simplex[best], vals[best])
}

/// `β_{p,Γ}(x, r)` with Lebesgue measure on `V₀` pushed forward by `Ψ_ψ` as surface measure.
///
/// The infimum runs over finite-slope vertical planes `y = a x + b`; the Korányi
/// distance to such a plane is `|y - a x - b| / √(1 + a²)`.
pub fn beta_p_surface(g: &IntrinsicGraph, x: HPoint, r: f64, p: f64, grid: (usize, usize)) -> Result<BetaSample> {
    beta_p_surface_with_starts(g, x, r, p, grid, &[])
}

/// As [`beta_p_surface`], also running the plane search from extra starting planes.
pub fn beta_p_surface_with_starts(
    g: &IntrinsicGraph,
    x: HPoint,
    r: f64,
    p: f64,
    grid: (usize, usize),
    starts: &[AffineMap],
) -> Result<BetaSample> {
    if !(r > 0.0) {
        return Err(Error::Parameter(format!("radius must be positive, got {r}")));
    }
    let v = project_pi(x);
    let y0 = g.psi_checked(v.x, v.z)?;
    let center = graph_point(v.x, v.z, y0);
    check_cover(g, center, r)?;
    let (ss, ys) = ball_nodes(g, (v.x, v.z), y0, r, grid);
    let n = (grid.0 * grid.1) as f64;
    let scale = (4.0 / n).powf(1.0 / p) / r;
    if ss.len() < 3 {
        return Err(Error::Internal("ball contains fewer than three nodes".into()));
    }
    let ones = vec![1.0; ss.len()];
    let fit = fit_affine_lp(&ss, &ones, &ys, p)?;
    // variables: real slope a and normalized intercept β, with y ≈ (a r) s + β
    let obj = |c: [f64; 2]| {
        let (a, beta) = (c[0], c[1]);
        let sum: f64 = ss
            .iter()
            .zip(&ys)
            .map(|(&s, &y)| (y - a * r * s - beta).abs().powf(p))
            .sum();
        sum.powf(1.0 / p) / (1.0 + a * a).sqrt()
    };
    let yspread = ys.iter().fold(0.0f64, |m, y| m.max((y - fit.map.b).abs())).max(1e-300);
    let mut candidates = vec![[fit.map.a / r, fit.map.b]];
    candidates.extend(starts.iter().map(|m| [m.a, m.eval(v.x)]));
    let mut best = ([0.0, 0.0], f64::INFINITY);
    for c0 in candidates {
        let f0 = obj(c0);
        if f0 < best.1 {
            best = (c0, f0);
        }
        if f0 == 0.0 {
            continue;
        }
        let res = nelder_mead2(obj, c0, [0.05 * (1.0 + c0[0].abs()), 0.05 * yspread], 1e-10, 4000);
        if res.1 < best.1 {
            best = res;
        }
    }
    let (a, beta) = (best.0[0], best.0[1]);
    Ok(BetaSample {
        point: center,
        radius: r,
        p_exponent: p,
        value: scale * best.1,
        best_fit: AffineMap::new(a, beta - a * v.x),
        estimator: Estimator::BetaSurface,
        nodes: ss.len(),
    })
}

/// `μ(B(x,r) ∩ Γ) / r³` for the surface measure used by [`beta_p_surface`].
pub fn ball_measure_ratio(g: &IntrinsicGraph, x: HPoint, r: f64, grid: (usize, usize)) -> Result<f64> {
    let v = project_pi(x);
    let y0 = g.psi_checked(v.x, v.z)?;
    let (ss, _) = ball_nodes(g, (v.x, v.z), y0, r, grid);
    Ok(4.0 * ss.len() as f64 / (grid.0 * grid.1) as f64)
}

/// Residual-based `β_p` objective evaluated at a fixed plane; an upper bound for `β_p`.
pub fn beta_p_at_plane(g: &IntrinsicGraph, x: HPoint, r: f64, p: f64, grid: (usize, usize), plane: AffineMap) -> Result<f64> {
    let v = project_pi(x);
    let y0 = g.psi_checked(v.x, v.z)?;
    let (ss, ys) = ball_nodes(g, (v.x, v.z), y0, r, grid);
    let n = (grid.0 * grid.1) as f64;
    let sum: f64 = ss
        .iter()
        .zip(&ys)
        .map(|(&s, &y)| ((y - plane.eval(v.x + r * s)).abs() / (1.0 + plane.a * plane.a).sqrt()).powf(p))
        .sum();
    Ok((4.0 / n * sum).powf(1.0 / p) / r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparabilityRow {
    pub v: (f64, f64),
    pub r: f64,
    pub gamma: f64,
    pub beta: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparabilityReport {
    pub rows: Vec<ComparabilityRow>,
    pub band: (f64, f64),
    pub all_finite: bool,
}

/// `γ_p(v, r/C)` against `β_p(Ψ(v), r)` over a sweep; reports the ratio band.
pub fn comparability_check(
    g: &IntrinsicGraph,
    points: &[(f64, f64)],
    radii: &[f64],
    p: f64,
    c: f64,
    grid: (usize, usize),
) -> Result<ComparabilityReport> {
    let mask = VMask::new(grid);
    let jobs: Vec<((f64, f64), f64)> = points
        .iter()
        .flat_map(|&v| radii.iter().map(move |&r| (v, r)))
        .collect();
    let rows: Vec<Result<ComparabilityRow>> = jobs
        .par_iter()
        .map(|&(v, r)| {
            let gm = gamma_p(g, v, r / c, p, &mask)?;
            let b = beta_p_surface(g, g.graph_map(v.0, v.1)?, r, p, grid)?;
            Ok(ComparabilityRow {
                v,
                r,
                gamma: gm.value,
                beta: b.value,
                ratio: gm.value / b.value,
            })
        })
        .collect();
    let rows: Vec<ComparabilityRow> = rows.into_iter().collect::<Result<_>>()?;
    let mut band = (f64::INFINITY, 0.0f64);
    let mut all_finite = true;
    for row in &rows {
        if row.gamma == 0.0 && row.beta == 0.0 {
            continue;
        }
        if !(row.ratio.is_finite() && row.ratio > 0.0) {
            all_finite = false;
            continue;
        }
        band.0 = band.0.min(row.ratio);
        band.1 = band.1.max(row.ratio);
    }
    Ok(ComparabilityReport { rows, band, all_finite })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionReport {
    /// `max d(p, Ψ(v)) / N(v)` over the nodes, an empirical comparability constant.
    pub c_empirical: f64,
    /// Nodes of `Π(B(p,r) ∩ Γ)` found outside `V(p, r)`.
    pub violations: usize,
}

/// Compares `Π(B(p, r) ∩ Γ)` with `V(p, r)` on the parallelogram grid, where
/// `N(v)` is the distance from `p` to the fiber over `v`.
pub fn projection_comparability(g: &IntrinsicGraph, v: (f64, f64), r: f64, grid: (usize, usize)) -> Result<ProjectionReport> {
    let y0 = g.psi_checked(v.0, v.1)?;
    check_cover(g, graph_point(v.0, v.1, y0), r)?;
    let (nx, nz) = grid;
    let mut c = 1.0f64;
    let mut violations = 0;
    for i in 0..nx {
        let s = (i as f64 + 0.5) / nx as f64 * 2.0 - 1.0;
        for k in 0..nz {
            let t = (k as f64 + 0.5) / nz as f64 * 2.0 - 1.0;
            let (dx, dz) = (r * s, -y0 * r * s + r * r * t);
            let y = g.psi(v.0 + dx, v.1 + dz);
            let d = pair_distance(dx, dz, y0, y);
            let nv = r * fiber_gauge(s, t);
            if d <= r && nv > r * (1.0 + 1e-12) {
                violations += 1;
            }
            if nv > 0.0 {
                c = c.max(d / nv);
            }
        }
    }
    Ok(ProjectionReport {
        c_empirical: c,
        violations,
    })
}

/// Evaluates `estimator` at every `(v, r, p)` in point-major order.
pub fn sample_sweep(
    g: &IntrinsicGraph,
    points: &[(f64, f64)],
    radii: &[f64],
    ps: &[f64],
    estimator: Estimator,
    grid: (usize, usize),
) -> Result<Vec<BetaSample>> {
    let mask = VMask::new(grid);
    let jobs: Vec<((f64, f64), f64, f64)> = points
        .iter()
        .flat_map(|&v| radii.iter().flat_map(move |&r| ps.iter().map(move |&p| (v, r, p))))
        .collect();
    jobs.par_iter()
        .map(|&(v, r, p)| match estimator {
            Estimator::Gamma => gamma_p(g, v, r, p, &mask),
            Estimator::BetaSurface => beta_p_surface(g, g.graph_map(v.0, v.1)?, r, p, grid),
        })
        .collect()
}

/// Streams samples as CSV rows `(x, z, r, p, estimator, value, fit_a, fit_b)`,
/// with `(x, z)` the projection of the sample point.
pub fn write_samples_csv<W: Write>(w: W, samples: &[BetaSample]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x", "z", "r", "p", "estimator", "value", "fit_a", "fit_b"])?;
    for s in samples {
        let v = project_pi(s.point);
        wr.write_record([
            fmt_f64(v.x),
            fmt_f64(v.z),
            fmt_f64(s.radius),
            fmt_f64(s.p_exponent),
            s.estimator.as_str().to_string(),
            fmt_f64(s.value),
            fmt_f64(s.best_fit.a),
            fmt_f64(s.best_fit.b),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
