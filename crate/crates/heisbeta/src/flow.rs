//! Characteristic curves `g'(t) = -ψ(t, g(t))` of an intrinsic graph.

use std::io::Write;

use crate::error::{Error, Result};
use crate::graph::IntrinsicGraph;

/// An RK4 trajectory on the uniform grid `t_k = t0 + k·step`, evaluated between
/// nodes by cubic Hermite interpolation with the exact slopes `-ψ(t_k, g_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharCurve {
    pub t0: f64,
    pub step: f64,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
}

impl CharCurve {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn t_at(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn t_min(&self) -> f64 {
        self.t0
    }

    pub fn t_max(&self) -> f64 {
        self.t_at(self.g.len().saturating_sub(1))
    }

    pub fn covers(&self, a: f64, b: f64) -> bool {
        let slack = 1e-9 * self.step;
        !self.is_empty() && self.t_min() <= a + slack && self.t_max() >= b - slack
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.g.len();
        let u = ((t - self.t0) / self.step).clamp(0.0, (n - 1) as f64);
        let k = (u.floor() as usize).min(n.saturating_sub(2));
        (k, u - k as f64)
    }

    /// Interpolated value; clamps to the traced range.
    pub fn eval(&self, t: f64) -> f64 {
        if self.g.len() == 1 {
            return self.g[0];
        }
        let (k, s) = self.locate(t);
        let h = self.step;
        let (y0, y1, m0, m1) = (self.g[k], self.g[k + 1], self.dg[k] * h, self.dg[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }

    pub fn slope(&self, t: f64) -> f64 {
        if self.g.len() == 1 {
            return self.dg[0];
        }
        let (k, s) = self.locate(t);
        let h = self.step;
        let (y0, y1, m0, m1) = (self.g[k], self.g[k + 1], self.dg[k] * h, self.dg[k + 1] * h);
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h
    }

    /// Two-column `(t, g)` CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "g"])?;
        for (k, g) in self.g.iter().enumerate() {
            wr.write_record([fmt_f64(self.t_at(k)), fmt_f64(*g)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

#[inline]
fn rk4(g: &IntrinsicGraph, t: f64, z: f64, h: f64) -> f64 {
    let k1 = -g.psi(t, z);
    let k2 = -g.psi(t + 0.5 * h, z + 0.5 * h * k1);
    let k3 = -g.psi(t + 0.5 * h, z + 0.5 * h * k2);
    let k4 = -g.psi(t + h, z + h * k3);
    z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Traces the characteristic curve through `(x0, z0)` over `[t_min, t_max]`.
///
/// The grid is anchored at `x0` so the curve passes through the seed point exactly,
/// and is extended by at most one node past each end so the interval is covered.
/// Tracing stops at the domain boundary.
pub fn trace(g: &IntrinsicGraph, x0: f64, z0: f64, t_min: f64, t_max: f64, step: f64) -> Result<CharCurve> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Parameter(format!("step must be positive, got {step}")));
    }
    if !(t_min <= x0 && x0 <= t_max) {
        return Err(Error::Parameter(format!("seed abscissa {x0} outside [{t_min}, {t_max}]")));
    }
    if !g.domain.contains(x0, z0) {
        return Err(Error::OutOfDomain { x: x0, z: z0 });
    }
    let n_back = ((x0 - t_min) / step - 1e-9).ceil().max(0.0) as usize;
    let n_fwd = ((t_max - x0) / step - 1e-9).ceil().max(0.0) as usize;

    let march = |n: usize, h: f64| {
        let mut out = Vec::with_capacity(n);
        let mut z = z0;
        for k in 0..n {
            let t = x0 + k as f64 * h;
            let zn = rk4(g, t, z, h);
            let tn = x0 + (k + 1) as f64 * h;
            if !zn.is_finite() || !g.domain.contains(tn, zn) {
                break;
            }
            out.push(zn);
            z = zn;
        }
        out
    };
    let back = march(n_back, -step);
    let fwd = march(n_fwd, step);
    if back.is_empty() && fwd.is_empty() && (n_back + n_fwd) > 0 {
        return Err(Error::EmptyCurve { x: x0, z: z0 });
    }
    let mut gv: Vec<f64> = back.iter().rev().copied().collect();
    gv.push(z0);
    gv.extend(fwd);
    let t0 = x0 - back.len() as f64 * step;
    let dg = gv
        .iter()
        .enumerate()
        .map(|(k, &z)| -g.psi(t0 + k as f64 * step, z))
        .collect();
    Ok(CharCurve { t0, step, g: gv, dg })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearizeReport {
    pub worst_ratio: f64,
    pub witness: (f64, f64),
    pub pairs: usize,
}

/// Checks `|g(t) - g(s) - g'(s)(t-s)| ≤ (L/√(1-L²))·(t-s)²/2` over grid pairs.
///
/// All pairs are used when the curve has at most `max_nodes` nodes; otherwise a
/// uniform stride subsamples the nodes.
pub fn check_linearize(curve: &CharCurve, lip: f64, max_nodes: usize) -> LinearizeReport {
    let n = curve.len();
    let stride = n.div_ceil(max_nodes.max(2)).max(1);
    let c = lip / (1.0 - lip * lip).sqrt() * 0.5;
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut rep = LinearizeReport {
        worst_ratio: 0.0,
        witness: (curve.t0, curve.t0),
        pairs: 0,
    };
    for &i in &idx {
        let (s, gs, ds) = (curve.t_at(i), curve.g[i], curve.dg[i]);
        for &j in &idx {
            if i == j {
                continue;
            }
            let t = curve.t_at(j);
            let dt = t - s;
            let lhs = (curve.g[j] - gs - ds * dt).abs();
            let bound = c * dt * dt;
            rep.pairs += 1;
            let ratio = if bound > 0.0 {
                lhs / bound
            } else if lhs > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if ratio > rep.worst_ratio {
                rep.worst_ratio = ratio;
                rep.witness = (s, t);
            }
        }
    }
    rep
}
