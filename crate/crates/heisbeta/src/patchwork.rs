//! Rectilinear foliated patchworks: binary trees of pseudoquads cut vertically
//! (left/right halves) or horizontally (along a characteristic curve).

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_affine_lp, AffineMap};
use crate::flow::{fmt_f64, trace};
use crate::graph::{IntrinsicGraph, Rect};
use crate::quad::{fit_rectangle, simpson, ParabolicRectangle, Pseudoquad, SIMPSON_NODES};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchworkParams {
    pub mu: f64,
    /// Approximating-plane tolerance `λ`.
    pub lambda: f64,
    pub depth_cap: usize,
    /// Stand-in for the universal constant `r`; curve tolerance is `ζ = 1/(32 r²)`.
    pub r_const: f64,
    /// Quadrature grid (per side) on `10Q` for the approximating plane.
    pub fit_grid: usize,
    /// Steps per `δ_x` for the 16 probe curves.
    pub probe_steps: usize,
    /// Steps per `δ_x` for cutting curves.
    pub curve_steps: usize,
    /// Vertices with `δ_x < dx_floor·δ_x(root)` become leaves.
    pub dx_floor: f64,
}

impl Default for PatchworkParams {
    fn default() -> Self {
        PatchworkParams {
            mu: 1.0 / 32.0,
            lambda: 0.25,
            depth_cap: 18,
            r_const: 16.0,
            fit_grid: 24,
            probe_steps: 128,
            curve_steps: 4096,
            dx_floor: 2f64.powi(-20),
        }
    }
}

impl PatchworkParams {
    pub fn zeta(&self) -> f64 {
        1.0 / (32.0 * self.r_const * self.r_const)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str| Err(Error::Parameter(format!("patchwork parameter {k} out of range")));
        if !(self.mu > 0.0 && self.mu <= crate::quad::MU_MAX) {
            return bad("mu");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda");
        }
        if !(self.r_const > 0.0) {
            return bad("r_const");
        }
        if self.fit_grid < 2 {
            return bad("fit_grid");
        }
        if self.probe_steps == 0 || self.curve_steps == 0 {
            return bad("probe_steps/curve_steps");
        }
        if !(self.dx_floor > 0.0 && self.dx_floor < 1.0) {
            return bad("dx_floor");
        }
        Ok(())
    }
}

/// How the builder chooses between the two cuts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutRule {
    /// Horizontal iff the plane residual and probe-curve tests both pass.
    Surrogate,
    AlwaysVertical,
    AlwaysHorizontal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutLabel {
    Horizontal,
    Vertical,
    Leaf,
}

impl CutLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CutLabel::Horizontal => "h",
            CutLabel::Vertical => "v",
            CutLabel::Leaf => "leaf",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneFit {
    pub map: AffineMap,
    /// `|Q|⁻¹ ‖l - f‖_{L₁(10Q)}`.
    pub residual: f64,
    /// `δ_z(Q) / δ_x(Q)`.
    pub scale: f64,
}

impl PlaneFit {
    pub fn ratio(&self) -> f64 {
        self.residual / self.scale
    }
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub quad: Pseudoquad,
    pub area: f64,
    pub cut: CutLabel,
    pub children: Option<[usize; 2]>,
    pub plane: PlaneFit,
    /// Largest probe-curve deviation from the plane's parabolas, over `δ_z`; `None` if not probed.
    pub curve_deviation: Option<f64>,
    /// Passed the admissibility test but the horizontal halves were not rectilinear.
    pub fallback: bool,
}

impl Vertex {
    pub fn aspect(&self) -> f64 {
        self.quad.aspect()
    }
}

#[derive(Clone, Debug)]
pub struct PatchworkTree {
    pub params: PatchworkParams,
    pub vertices: Vec<Vertex>,
}

/// Bounding box of a parabolic rectangle.
pub fn rect_bbox(r: &ParabolicRectangle) -> Rect {
    let (a, b) = r.base;
    let mut lo = r.lower(a).min(r.lower(b));
    let mut hi = r.upper(a).max(r.upper(b));
    if r.h1[0] != 0.0 {
        let xv = -r.h1[1] / (2.0 * r.h1[0]);
        if xv > a && xv < b {
            lo = lo.min(r.lower(xv));
            hi = hi.max(r.upper(xv));
        }
    }
    Rect::new(a, b, lo, hi)
}

/// Best `L₁` affine fit of `f` over `10Q` on an `n × n` midpoint grid.
pub fn approximating_plane(g: &IntrinsicGraph, q: &Pseudoquad, area: f64, n: usize) -> Result<PlaneFit> {
    let r10 = q.scale(10.0);
    if !g.domain.contains_rect(&rect_bbox(&r10)) {
        return Err(Error::Coverage("10Q leaves the graph domain".into()));
    }
    let (a, b) = r10.base;
    let cell = (b - a) * r10.d / (n * n) as f64;
    let mut xs = Vec::with_capacity(n * n);
    let mut ys = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = a + (b - a) * (i as f64 + 0.5) / n as f64;
        let z0 = r10.lower(x);
        for k in 0..n {
            let z = z0 + r10.d * (k as f64 + 0.5) / n as f64;
            xs.push(x);
            ys.push(g.psi(x, z));
        }
    }
    let ws = vec![cell; xs.len()];
    let fit = fit_affine_lp(&xs, &ws, &ys, 1.0)?;
    Ok(PlaneFit {
        map: fit.map,
        residual: fit.residual / area,
        scale: q.delta_z() / q.delta_x(),
    })
}

/// Largest deviation, over `δ_z`, of the characteristic curves through a 4×4 grid of
/// `4Q` from the parabolas of the plane `y = l(x)` through the same points, over `4I`.
pub fn probe_deviation(g: &IntrinsicGraph, q: &Pseudoquad, l: AffineMap, steps: usize) -> Result<f64> {
    let r4 = q.scale(4.0);
    let (a4, b4) = r4.base;
    let step = q.delta_x() / steps as f64;
    let mut worst = 0.0f64;
    for i in 0..4 {
        let x0 = a4 + (b4 - a4) * (i as f64 + 0.5) / 4.0;
        for j in 0..4 {
            let z0 = r4.lower(x0) + r4.d * (j as f64 + 0.5) / 4.0;
            let c = trace(g, x0, z0, a4, b4, step)?;
            if !c.covers(a4, b4) {
                return Err(Error::Coverage("probe curve leaves the graph domain".into()));
            }
            for (k, &z) in c.g.iter().enumerate() {
                let t = c.t_at(k);
                let kappa = z0 - 0.5 * l.a * (t * t - x0 * x0) - l.b * (t - x0);
                worst = worst.max((z - kappa).abs());
            }
        }
    }
    Ok(worst / q.delta_z())
}

/// Splits along the characteristic curve through the middle of the center vertical segment.
pub fn cut_horizontal(g: &IntrinsicGraph, q: &Pseudoquad, curve_steps: usize) -> Result<(Pseudoquad, Pseudoquad)> {
    let c = q.rect.center_x();
    let zc = 0.5 * (q.lower.eval(c) + q.upper.eval(c));
    let (a4, b4) = q.rect.base_scaled(4.0);
    let curve = trace(g, c, zc, a4, b4, q.delta_x() / curve_steps as f64)?;
    if !curve.covers(a4, b4) {
        return Err(Error::Coverage("cutting curve leaves the graph domain".into()));
    }
    let curve = Arc::new(curve);
    let half = 0.5 * q.rect.d;
    let h1 = q.rect.h1;
    let lo = ParabolicRectangle::new(q.base, h1, half);
    let hi = ParabolicRectangle::new(q.base, [h1[0], h1[1], h1[2] + half], half);
    Ok((
        Pseudoquad::new(q.lower.clone(), curve.clone(), lo, q.mu)?,
        Pseudoquad::new(curve, q.upper.clone(), hi, q.mu)?,
    ))
}

/// Left and right halves on the same curves. Each half keeps `δ_z` and takes whichever
/// of the parent's quadratic and a refitted one is closer to the curves.
pub fn cut_vertical(q: &Pseudoquad) -> Result<(Pseudoquad, Pseudoquad)> {
    let (a, b) = q.base;
    let m = 0.5 * (a + b);
    let half = |base: (f64, f64)| -> Result<Pseudoquad> {
        let inherited = ParabolicRectangle::new(base, q.rect.h1, q.rect.d);
        let fitted = fit_rectangle(&q.lower, &q.upper, base);
        let shift = 0.5 * (fitted.d - q.rect.d);
        let refit = ParabolicRectangle::new(base, [fitted.h1[0], fitted.h1[1], fitted.h1[2] + shift], q.rect.d);
        let gap = |r: ParabolicRectangle| {
            Pseudoquad {
                base,
                lower: q.lower.clone(),
                upper: q.upper.clone(),
                rect: r,
                mu: q.mu,
            }
            .rectilinearity_gap()
        };
        let rect = if gap(refit)? < gap(inherited)? { refit } else { inherited };
        Pseudoquad::new(q.lower.clone(), q.upper.clone(), rect, q.mu)
    };
    Ok((half((a, m))?, half((m, b))?))
}

pub fn build_patchwork(g: &IntrinsicGraph, root: Pseudoquad, params: &PatchworkParams) -> Result<PatchworkTree> {
    build_patchwork_with_rule(g, root, params, CutRule::Surrogate)
}

/// Breadth-first construction; children always receive consecutive ids.
pub fn build_patchwork_with_rule(
    g: &IntrinsicGraph,
    root: Pseudoquad,
    params: &PatchworkParams,
    rule: CutRule,
) -> Result<PatchworkTree> {
    params.validate()?;
    let gap = root.rectilinearity_gap()?;
    if gap > params.mu {
        return Err(Error::Parameter(format!("root pseudoquad is not {}-rectilinear (gap {gap})", params.mu)));
    }
    let dx_min = params.dx_floor * root.delta_x();
    let mut vertices: Vec<Vertex> = Vec::new();
    let mut queue: VecDeque<(Pseudoquad, Option<usize>, usize)> = VecDeque::new();
    queue.push_back((root, None, 0));
    while let Some((quad, parent, depth)) = queue.pop_front() {
        let id = vertices.len();
        let area = quad.area();
        let plane = approximating_plane(g, &quad, area, params.fit_grid)?;
        let mut v = Vertex {
            id,
            parent,
            depth,
            quad,
            area,
            cut: CutLabel::Leaf,
            children: None,
            plane,
            curve_deviation: None,
            fallback: false,
        };
        if depth < params.depth_cap && v.quad.delta_x() >= dx_min {
            let admissible = match rule {
                CutRule::AlwaysVertical => false,
                CutRule::AlwaysHorizontal => true,
                CutRule::Surrogate => {
                    if plane.residual <= params.lambda * plane.scale {
                        let dev = probe_deviation(g, &v.quad, plane.map, params.probe_steps)?;
                        v.curve_deviation = Some(dev);
                        dev <= params.zeta()
                    } else {
                        false
                    }
                }
            };
            let halves = if admissible {
                match cut_horizontal(g, &v.quad, params.curve_steps) {
                    Ok(h) => {
                        v.cut = CutLabel::Horizontal;
                        Some(h)
                    }
                    Err(Error::Parameter(msg)) => {
                        log::debug!("vertex {id}: horizontal cut rejected ({msg})");
                        v.fallback = true;
                        None
                    }
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            let (w0, w1) = match halves {
                Some(h) => h,
                None => {
                    v.cut = CutLabel::Vertical;
                    cut_vertical(&v.quad)?
                }
            };
            let first = id + 1 + queue.len();
            v.children = Some([first, first + 1]);
            queue.push_back((w0, Some(id), depth + 1));
            queue.push_back((w1, Some(id), depth + 1));
        }
        vertices.push(v);
    }
    Ok(PatchworkTree {
        params: *params,
        vertices,
    })
}

impl PatchworkTree {
    pub fn root(&self) -> &Vertex {
        &self.vertices[0]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter().filter(|v| v.children.is_none())
    }

    pub fn count(&self, label: CutLabel) -> usize {
        self.vertices.iter().filter(|v| v.cut == label).count()
    }

    /// `v` itself, then every descendant.
    pub fn descendants(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut k = 0;
        while k < out.len() {
            if let Some(c) = self.vertices[out[k]].children {
                out.extend(c);
            }
            k += 1;
        }
        out
    }

    /// Writes one CSV record per vertex in id order.
    pub fn write_records<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "id", "parent", "cut", "a", "b", "delta_z", "slope", "alpha", "l_a", "l_b", "residual",
        ])?;
        for v in &self.vertices {
            wr.write_record([
                v.id.to_string(),
                v.parent.map(|p| p.to_string()).unwrap_or_default(),
                v.cut.as_str().to_string(),
                fmt_f64(v.quad.base.0),
                fmt_f64(v.quad.base.1),
                fmt_f64(v.quad.delta_z()),
                fmt_f64(v.quad.rect.slope),
                fmt_f64(v.aspect()),
                fmt_f64(v.plane.map.a),
                fmt_f64(v.plane.map.b),
                fmt_f64(v.plane.residual),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `W(S) = Σ α(Q_w)⁻⁴ |Q_w|`.
pub fn weight(tree: &PatchworkTree, set: &[usize]) -> f64 {
    set.iter()
        .map(|&w| {
            let v = &tree.vertices[w];
            v.aspect().powi(-4) * v.area
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarlesonReport {
    pub max_ratio: f64,
    pub argmax: usize,
    pub bound: f64,
    pub pass: bool,
}

/// `max_v W({w ≤ v vertically cut}) / |Q_v|`.
pub fn carleson_check(tree: &PatchworkTree, bound: f64) -> CarlesonReport {
    let n = tree.len();
    let mut sums = vec![0.0f64; n];
    // children have larger ids, so a reverse sweep accumulates subtrees
    for v in tree.vertices.iter().rev() {
        let mut s = 0.0;
        if v.cut == CutLabel::Vertical {
            s += v.aspect().powi(-4) * v.area;
        }
        if let Some([c0, c1]) = v.children {
            s += sums[c0] + sums[c1];
        }
        sums[v.id] = s;
    }
    let (mut max_ratio, mut argmax) = (0.0f64, 0);
    for v in &tree.vertices {
        let r = sums[v.id] / v.area;
        if r > max_ratio {
            max_ratio = r;
            argmax = v.id;
        }
    }
    CarlesonReport {
        max_ratio,
        argmax,
        bound,
        pass: max_ratio <= bound,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureReport {
    /// `|Σ_leaves |Q_w| - |Q_root|| / |Q_root|`.
    pub tiling_mismatch: f64,
    /// Largest `||Q_w| + |Q_w'| - |Q_v|| / |Q_v|` over internal vertices.
    pub split_mismatch: f64,
    /// Largest `|α(child)/α(parent) - √2|` over horizontal cuts.
    pub horizontal_alpha_error: f64,
    /// Range of `|Q_w|/|Q_v|` over vertical cuts.
    pub vertical_area_ratio: (f64, f64),
    /// Largest `δ_x(child)/δ_x(parent)` deviation from `1/2` over vertical cuts.
    pub vertical_dx_error: f64,
    /// Largest rectilinearity gap over all vertices.
    pub max_gap: f64,
}

pub fn structure_check(tree: &PatchworkTree) -> Result<StructureReport> {
    let root = tree.root();
    let leaf_sum: f64 = tree.leaves().map(|v| v.area).sum();
    let mut rep = StructureReport {
        tiling_mismatch: (leaf_sum - root.area).abs() / root.area,
        split_mismatch: 0.0,
        horizontal_alpha_error: 0.0,
        vertical_area_ratio: (f64::INFINITY, f64::NEG_INFINITY),
        vertical_dx_error: 0.0,
        max_gap: 0.0,
    };
    if !tree.vertices.iter().any(|v| v.cut == CutLabel::Vertical) {
        rep.vertical_area_ratio = (0.5, 0.5);
    }
    let gaps: Vec<Result<f64>> = tree.vertices.par_iter().map(|v| v.quad.rectilinearity_gap()).collect();
    for gp in gaps {
        rep.max_gap = rep.max_gap.max(gp?);
    }
    for v in &tree.vertices {
        let Some([c0, c1]) = v.children else { continue };
        let (w0, w1) = (&tree.vertices[c0], &tree.vertices[c1]);
        rep.split_mismatch = rep.split_mismatch.max((w0.area + w1.area - v.area).abs() / v.area);
        match v.cut {
            CutLabel::Horizontal => {
                for w in [w0, w1] {
                    let e = (w.aspect() / v.aspect() - std::f64::consts::SQRT_2).abs();
                    rep.horizontal_alpha_error = rep.horizontal_alpha_error.max(e);
                }
            }
            CutLabel::Vertical => {
                for w in [w0, w1] {
                    let r = w.area / v.area;
                    rep.vertical_area_ratio.0 = rep.vertical_area_ratio.0.min(r);
                    rep.vertical_area_ratio.1 = rep.vertical_area_ratio.1.max(r);
                    rep.vertical_dx_error = rep
                        .vertical_dx_error
                        .max((w.quad.delta_x() / v.quad.delta_x() - 0.5).abs());
                }
            }
            CutLabel::Leaf => {}
        }
    }
    Ok(rep)
}

/// A vertex set with a unique maximal element, closed between its members and the
/// maximum, and containing either both children of a vertex or neither.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentSet {
    pub members: Vec<bool>,
    pub max: usize,
}

impl CoherentSet {
    pub fn new(tree: &PatchworkTree, ids: &[usize]) -> Result<Self> {
        let mut members = vec![false; tree.len()];
        for &i in ids {
            if i >= tree.len() {
                return Err(Error::Parameter(format!("vertex {i} not in tree")));
            }
            members[i] = true;
        }
        let tops: Vec<usize> = ids
            .iter()
            .copied()
            .filter(|&i| tree.vertices[i].parent.is_none_or(|p| !members[p]))
            .collect();
        let mut tops = tops;
        tops.sort_unstable();
        tops.dedup();
        if tops.len() != 1 {
            return Err(Error::Parameter(format!("set has {} maximal elements", tops.len())));
        }
        for &i in ids {
            if let Some([c0, c1]) = tree.vertices[i].children {
                if members[c0] != members[c1] {
                    return Err(Error::Parameter(format!("vertex {i} has exactly one child in the set")));
                }
            }
        }
        Ok(CoherentSet { members, max: tops[0] })
    }

    pub fn contains(&self, id: usize) -> bool {
        self.members.get(id).copied().unwrap_or(false)
    }

    /// `min(S)`: members without children in `S`, in id order.
    pub fn minimal(&self, tree: &PatchworkTree) -> Vec<usize> {
        (0..tree.len())
            .filter(|&i| self.members[i])
            .filter(|&i| match tree.vertices[i].children {
                Some([c0, _]) => !self.members[c0],
                None => true,
            })
            .collect()
    }
}

/// `R_j`: the vertices of depth at most `j`.
pub fn depth_set(tree: &PatchworkTree, j: usize) -> CoherentSet {
    CoherentSet {
        members: tree.vertices.iter().map(|v| v.depth <= j).collect(),
        max: 0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub i: usize,
    pub threshold: f64,
    pub set: CoherentSet,
    /// `F_i = min(S_i)`.
    pub minimal: Vec<usize>,
    /// `|Σ_{F_i} |Q_w| - |Q_root|| / |Q_root|`.
    pub area_mismatch: f64,
}

/// `S_i = {w : δ_z(Q_w) ≥ 4^{-i} δ_z(Q_root)}` and `F_i = min(S_i)`.
///
/// A leaf in `F_i` means the tree stopped before the slice was resolved; that is
/// reported as underflow.
pub fn coherent_slice(tree: &PatchworkTree, i: usize) -> Result<Slice> {
    let root = tree.root();
    let threshold = root.quad.delta_z() * 4f64.powi(-(i as i32));
    let members: Vec<bool> = tree.vertices.iter().map(|v| v.quad.delta_z() >= threshold).collect();
    let set = CoherentSet { members, max: 0 };
    let minimal = set.minimal(tree);
    if let Some(&leaf) = minimal.iter().find(|&&w| tree.vertices[w].children.is_none()) {
        return Err(Error::Underflow(format!(
            "slice {i} reaches leaf {leaf} at depth {}; raise depth_cap",
            tree.vertices[leaf].depth
        )));
    }
    let area: f64 = minimal.iter().map(|&w| tree.vertices[w].area).sum();
    Ok(Slice {
        i,
        threshold,
        set,
        minimal,
        area_mismatch: (area - root.area).abs() / root.area,
    })
}

/// The element of `min(S)` whose pseudoquad receives `(x, z)` by descending the cuts
/// from `max(S)`; boundary points go to the lower id. The flag is set when the point
/// lies outside `Q_{max(S)}`, in which case the nearest piece along the descent is used.
pub fn locate(tree: &PatchworkTree, s: &CoherentSet, x: f64, z: f64) -> (usize, bool) {
    let mut w = s.max;
    let flagged = !tree.vertices[w].quad.contains(x, z);
    while let Some([c0, c1]) = tree.vertices[w].children {
        if !s.contains(c0) {
            break;
        }
        let v = &tree.vertices[w];
        let first = match v.cut {
            CutLabel::Vertical => x <= tree.vertices[c0].quad.base.1,
            _ => z <= tree.vertices[c0].quad.upper.eval(x),
        };
        w = if first { c0 } else { c1 };
    }
    (w, flagged)
}

/// `g_S(x, z)`, the approximating plane of the piece of `min(S)` containing the point.
pub fn evaluate_g_s(tree: &PatchworkTree, s: &CoherentSet, x: f64, z: f64) -> (f64, bool) {
    let (w, flagged) = locate(tree, s, x, z);
    (tree.vertices[w].plane.map.eval(x), flagged)
}

/// Midpoint nodes `(x, z, weight)` of `Q` on an `n × n` grid between its curves.
pub fn quad_nodes(q: &Pseudoquad, n: usize) -> Vec<(f64, f64, f64)> {
    let (a, b) = q.base;
    let dx = (b - a) / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = a + dx * (i as f64 + 0.5);
        let (lo, hi) = (q.lower.eval(x), q.upper.eval(x));
        let dz = (hi - lo) / n as f64;
        for k in 0..n {
            out.push((x, lo + dz * (k as f64 + 0.5), dx * dz));
        }
    }
    out
}

/// `‖g_S - f‖_{L_p(Q_root)}` on an `n × n` grid.
pub fn g_s_error(tree: &PatchworkTree, g: &IntrinsicGraph, s: &CoherentSet, p: f64, n: usize) -> f64 {
    let nodes = quad_nodes(&tree.root().quad, n);
    let sum: f64 = nodes
        .par_iter()
        .map(|&(x, z, w)| w * (evaluate_g_s(tree, s, x, z).0 - g.psi(x, z)).abs().powf(p))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    sum.powf(1.0 / p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpApproxReport {
    pub p: f64,
    /// `max_v ‖l_v - f‖_{L_p(Q_v)} / (δ_z/δ_x · |Q_v|^{1/p})` over horizontally cut vertices.
    pub max_ratio: f64,
    pub vertices: usize,
    pub all_finite: bool,
}

pub fn lp_approx_check(tree: &PatchworkTree, g: &IntrinsicGraph, p: f64, n: usize) -> Result<LpApproxReport> {
    if !(p >= 1.0 && p < 5.0) {
        return Err(Error::Parameter(format!("p = {p} outside [1, 5)")));
    }
    let ratios: Vec<f64> = tree
        .vertices
        .par_iter()
        .filter(|v| v.cut == CutLabel::Horizontal)
        .map(|v| {
            let l = v.plane.map;
            let sum: f64 = quad_nodes(&v.quad, n)
                .iter()
                .map(|&(x, z, w)| w * (l.eval(x) - g.psi(x, z)).abs().powf(p))
                .sum();
            sum.powf(1.0 / p) / (v.plane.scale * v.area.powf(1.0 / p))
        })
        .collect();
    Ok(LpApproxReport {
        p,
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        vertices: ratios.len(),
        all_finite: ratios.iter().all(|r| r.is_finite()),
    })
}

/// `sup_{x∈I} |l(x)|` for an affine `l`.
fn affine_sup(l: AffineMap, base: (f64, f64)) -> f64 {
    l.eval(base.0).abs().max(l.eval(base.1).abs())
}

/// `max ‖g_S - g_{S∪𝒞(w)}‖_{L∞(Q_w)} / (δ_z(Q_w)/δ_x(Q_w))` over internal `w`.
pub fn refinement_constant(tree: &PatchworkTree) -> f64 {
    tree.vertices
        .iter()
        .filter_map(|v| {
            let [c0, c1] = v.children?;
            let d = [c0, c1]
                .iter()
                .map(|&c| {
                    let w = &tree.vertices[c];
                    let diff = AffineMap::new(v.plane.map.a - w.plane.map.a, v.plane.map.b - w.plane.map.b);
                    affine_sup(diff, w.quad.base)
                })
                .fold(0.0, f64::max);
            Some(d / v.plane.scale)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineNormReport {
    pub max_ratio: f64,
    pub checked: usize,
    pub pass: bool,
}

/// `‖l‖_{L₁(Q)}` with the integrand split at the zero of `l`.
fn affine_l1(l: AffineMap, q: &Pseudoquad) -> f64 {
    let (a, b) = q.base;
    let f = |x: f64| l.eval(x).abs() * (q.upper.eval(x) - q.lower.eval(x));
    if l.a != 0.0 {
        let x0 = -l.b / l.a;
        if x0 > a && x0 < b {
            return simpson((a, x0), SIMPSON_NODES, f) + simpson((x0, b), SIMPSON_NODES, f);
        }
    }
    simpson((a, b), SIMPSON_NODES, f)
}

/// `‖l‖_{L∞(Q)} ≤ 24 ‖l‖_{L₁(Q)}/|Q|` for each stored plane and each parent-child difference.
pub fn affine_norm_check(tree: &PatchworkTree) -> AffineNormReport {
    let ratios: Vec<f64> = tree
        .vertices
        .par_iter()
        .flat_map_iter(|v| {
            let mut ls = vec![v.plane.map];
            if let Some(p) = v.parent {
                let lp = tree.vertices[p].plane.map;
                ls.push(AffineMap::new(v.plane.map.a - lp.a, v.plane.map.b - lp.b));
            }
            ls.into_iter().filter_map(move |l| {
                let sup = affine_sup(l, v.quad.base);
                if sup == 0.0 {
                    return None;
                }
                Some(sup * v.area / affine_l1(l, &v.quad))
            })
        })
        .collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    AffineNormReport {
        max_ratio,
        checked: ratios.len(),
        pass: max_ratio <= 24.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborReport {
    pub pairs: usize,
    /// Neighbouring pairs with `Q_w ⊄ 10Q_v`.
    pub containment_violations: usize,
    /// `max ‖l_w - l_v‖_{L∞(Q_w)} / (δ_z(Q_w)/δ_x(Q_w))` over neighbouring pairs.
    pub max_plane_ratio: f64,
}

fn boundary_samples(q: &Pseudoquad, n: usize) -> Vec<(f64, f64)> {
    let (a, b) = q.base;
    let mut out = Vec::new();
    for i in 0..=n {
        let x = a + (b - a) * i as f64 / n as f64;
        let (lo, hi) = (q.lower.eval(x), q.upper.eval(x));
        for k in 0..=n {
            out.push((x, lo + (hi - lo) * k as f64 / n as f64));
        }
    }
    out
}

fn in_rect_tol(r: &ParabolicRectangle, x: f64, z: f64, tol: f64) -> bool {
    let tx = tol * r.delta_x();
    let tz = tol * r.d;
    x >= r.base.0 - tx && x <= r.base.1 + tx && z >= r.lower(x) - tz && z <= r.upper(x) + tz
}

/// Pairs `w, v ∈ F_i` with `δ_x(Q_w) ≤ δ_x(Q_v)` and `Q_w ∩ 3Q_v ≠ ∅` (by sampling):
/// checks `Q_w ⊂ 10Q_v` and records the plane comparison ratio.
pub fn neighbor_check(tree: &PatchworkTree, slice: &Slice, samples: usize) -> NeighborReport {
    let f = &slice.minimal;
    let pts: Vec<Vec<(f64, f64)>> = f.iter().map(|&w| boundary_samples(&tree.vertices[w].quad, samples)).collect();
    let rows: Vec<(usize, usize, f64)> = (0..f.len())
        .into_par_iter()
        .map(|iw| {
            let w = &tree.vertices[f[iw]];
            let (mut pairs, mut bad, mut worst) = (0usize, 0usize, 0.0f64);
            for v in f.iter().map(|&k| &tree.vertices[k]) {
                if v.id == w.id || w.quad.delta_x() > v.quad.delta_x() {
                    continue;
                }
                let r3 = v.quad.scale(3.0);
                if w.quad.base.1 < r3.base.0 || w.quad.base.0 > r3.base.1 {
                    continue;
                }
                if !pts[iw].iter().any(|&(x, z)| in_rect_tol(&r3, x, z, 0.0)) {
                    continue;
                }
                pairs += 1;
                let r10 = v.quad.scale(10.0);
                if !pts[iw].iter().all(|&(x, z)| in_rect_tol(&r10, x, z, 1e-12)) {
                    bad += 1;
                }
                let diff = AffineMap::new(w.plane.map.a - v.plane.map.a, w.plane.map.b - v.plane.map.b);
                worst = worst.max(affine_sup(diff, w.quad.base) / w.plane.scale);
            }
            (pairs, bad, worst)
        })
        .collect();
    rows.iter().fold(
        NeighborReport {
            pairs: 0,
            containment_violations: 0,
            max_plane_ratio: 0.0,
        },
        |acc, &(p, b, w)| NeighborReport {
            pairs: acc.pairs + p,
            containment_violations: acc.containment_violations + b,
            max_plane_ratio: acc.max_plane_ratio.max(w),
        },
    )
}

/// Largest stored probe deviation over horizontally cut vertices; at most `1/8` is expected.
pub fn horizontal_curve_deviation(tree: &PatchworkTree) -> f64 {
    tree.vertices
        .iter()
        .filter(|v| v.cut == CutLabel::Horizontal)
        .filter_map(|v| v.curve_deviation)
        .fold(0.0, f64::max)
}
