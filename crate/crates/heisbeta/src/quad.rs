//! Parabolic rectangles and pseudoquads.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flow::{fmt_f64, trace, CharCurve};
use crate::graph::IntrinsicGraph;
use crate::heis::{project_pi, HPoint};

pub const SIMPSON_NODES: usize = 513;
pub const GAP_SAMPLES: usize = 2049;
pub const MU_MAX: f64 = 1.0 / 32.0;

/// Region between `h1` and `h2 = h1 + d` over the base `[a, b]`.
/// `h1(x) = c2 x² + c1 x + c0` and `slope = -h1''`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParabolicRectangle {
    pub base: (f64, f64),
    pub h1: [f64; 3],
    pub d: f64,
    pub slope: f64,
}

impl ParabolicRectangle {
    pub fn new(base: (f64, f64), h1: [f64; 3], d: f64) -> Self {
        ParabolicRectangle {
            base,
            h1,
            d,
            slope: -2.0 * h1[0],
        }
    }

    #[inline]
    pub fn lower(&self, x: f64) -> f64 {
        (self.h1[0] * x + self.h1[1]) * x + self.h1[2]
    }

    #[inline]
    pub fn upper(&self, x: f64) -> f64 {
        self.lower(x) + self.d
    }

    #[inline]
    pub fn mid(&self, x: f64) -> f64 {
        self.lower(x) + 0.5 * self.d
    }

    pub fn center_x(&self) -> f64 {
        0.5 * (self.base.0 + self.base.1)
    }

    pub fn delta_x(&self) -> f64 {
        self.base.1 - self.base.0
    }

    pub fn delta_z(&self) -> f64 {
        self.d
    }

    pub fn aspect(&self) -> f64 {
        self.delta_x() / self.d.sqrt()
    }

    pub fn area(&self) -> f64 {
        self.delta_x() * self.d
    }

    /// Concentric rectangle with base `ρI` and height `ρ²δ_z` about the mid-parabola.
    pub fn scaled(&self, rho: f64) -> ParabolicRectangle {
        let c = self.center_x();
        let half = 0.5 * rho * self.delta_x();
        let d = rho * rho * self.d;
        let shift = 0.5 * self.d - 0.5 * d;
        ParabolicRectangle::new((c - half, c + half), [self.h1[0], self.h1[1], self.h1[2] + shift], d)
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.base.0 && x <= self.base.1 && z >= self.lower(x) && z <= self.upper(x)
    }

    /// Enlarged base `ρI`.
    pub fn base_scaled(&self, rho: f64) -> (f64, f64) {
        let c = self.center_x();
        let half = 0.5 * rho * self.delta_x();
        (c - half, c + half)
    }
}

/// Region of `V₀` between two characteristic curves over a base interval,
/// paired with an approximating parabolic rectangle on the same base.
#[derive(Clone, Debug)]
pub struct Pseudoquad {
    pub base: (f64, f64),
    pub lower: Arc<CharCurve>,
    pub upper: Arc<CharCurve>,
    pub rect: ParabolicRectangle,
    pub mu: f64,
}

impl Pseudoquad {
    /// Checks coverage of `4I`, `g₁ ≤ g₂` on `I` and `μ`-rectilinearity.
    pub fn new(lower: Arc<CharCurve>, upper: Arc<CharCurve>, rect: ParabolicRectangle, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= MU_MAX) {
            return Err(Error::Parameter(format!("mu = {mu} outside (0, 1/32]")));
        }
        if !(rect.d > 0.0) || !(rect.base.1 > rect.base.0) {
            return Err(Error::Parameter("degenerate parabolic rectangle".into()));
        }
        let q = Pseudoquad {
            base: rect.base,
            lower,
            upper,
            rect,
            mu,
        };
        let gap = q.rectilinearity_gap()?;
        if gap > mu {
            return Err(Error::Parameter(format!("pseudoquad is not {mu}-rectilinear (gap {gap})")));
        }
        let (a, b) = q.base;
        for k in 0..=64 {
            let x = a + (b - a) * k as f64 / 64.0;
            if q.lower.eval(x) > q.upper.eval(x) {
                return Err(Error::Parameter("lower curve above upper curve".into()));
            }
        }
        Ok(q)
    }

    /// Traces the curves through `(xc, zc ∓ δz/2)` on the enlarged base and fits the rectangle.
    pub fn through(g: &IntrinsicGraph, xc: f64, zc: f64, delta_x: f64, delta_z: f64, mu: f64) -> Result<Self> {
        let step = delta_x / 4096.0;
        let (a4, b4) = (xc - 2.0 * delta_x, xc + 2.0 * delta_x);
        let lo = trace(g, xc, zc - 0.5 * delta_z, a4, b4, step)?;
        let hi = trace(g, xc, zc + 0.5 * delta_z, a4, b4, step)?;
        if !lo.covers(a4, b4) || !hi.covers(a4, b4) {
            return Err(Error::Coverage("graph domain does not cover the enlarged base".into()));
        }
        let base = (xc - 0.5 * delta_x, xc + 0.5 * delta_x);
        let rect = fit_rectangle(&lo, &hi, base);
        Pseudoquad::new(Arc::new(lo), Arc::new(hi), rect, mu)
    }

    pub fn delta_x(&self) -> f64 {
        self.rect.delta_x()
    }

    pub fn delta_z(&self) -> f64 {
        self.rect.d
    }

    /// `α(Q) = δ_x / √δ_z`.
    pub fn aspect(&self) -> f64 {
        self.rect.aspect()
    }

    /// `max_i ‖g_i - h_i‖_{L∞(4I)} / δ_z(R)`.
    pub fn rectilinearity_gap(&self) -> Result<f64> {
        let (a4, b4) = self.rect.base_scaled(4.0);
        if !self.lower.covers(a4, b4) || !self.upper.covers(a4, b4) {
            return Err(Error::Coverage("curves do not cover 4I".into()));
        }
        let mut worst = 0.0f64;
        for k in 0..GAP_SAMPLES {
            let x = a4 + (b4 - a4) * k as f64 / (GAP_SAMPLES - 1) as f64;
            worst = worst
                .max((self.lower.eval(x) - self.rect.lower(x)).abs())
                .max((self.upper.eval(x) - self.rect.upper(x)).abs());
        }
        Ok(worst / self.rect.d)
    }

    /// `|Q|` by Simpson's rule on `g₂ - g₁` over `I`.
    pub fn area(&self) -> f64 {
        simpson(self.base, SIMPSON_NODES, |x| self.upper.eval(x) - self.lower.eval(x))
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.base.0 && x <= self.base.1 && z >= self.lower.eval(x) && z <= self.upper.eval(x)
    }

    /// The region `ρQ`, which is defined through `R` (so `1Q = R`).
    pub fn scale(&self, rho: f64) -> ParabolicRectangle {
        self.rect.scaled(rho)
    }

    /// `δ_x δ_z / |Q|`; lies in `[3/4, 5/4]` for `1/32`-rectilinear pseudoquads.
    pub fn sandwich_ratio(&self) -> f64 {
        self.delta_x() * self.delta_z() / self.area()
    }

    /// Boundary polyline: lower curve left to right, then upper curve right to left.
    pub fn write_boundary_csv<W: Write>(&self, w: W, n: usize) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["part", "x", "z"])?;
        let (a, b) = self.base;
        for k in 0..=n {
            let x = a + (b - a) * k as f64 / n as f64;
            wr.write_record(["lower", &fmt_f64(x), &fmt_f64(self.lower.eval(x))])?;
        }
        for k in (0..=n).rev() {
            let x = a + (b - a) * k as f64 / n as f64;
            wr.write_record(["upper", &fmt_f64(x), &fmt_f64(self.upper.eval(x))])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Composite Simpson rule with `n` (odd) nodes.
pub fn simpson<F: Fn(f64) -> f64>(base: (f64, f64), n: usize, f: F) -> f64 {
    let n = if n % 2 == 0 { n + 1 } else { n.max(3) };
    let h = (base.1 - base.0) / (n - 1) as f64;
    let mut acc = f(base.0) + f(base.1);
    for k in 1..n - 1 {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(base.0 + k as f64 * h);
    }
    acc * h / 3.0
}

/// Least-squares rectangle for two curves over `4I`: the common quadratic
/// fits the mean of the curves and `d` is the mean separation.
pub fn fit_rectangle(lower: &CharCurve, upper: &CharCurve, base: (f64, f64)) -> ParabolicRectangle {
    let probe = ParabolicRectangle::new(base, [0.0; 3], 1.0);
    let (a4, b4) = probe.base_scaled(4.0);
    let c = probe.center_x();
    let half = 0.5 * (b4 - a4);
    let n = GAP_SAMPLES;
    // normal equations in the centered variable u = (x - c)/half
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    let mut dsum = 0.0;
    for k in 0..n {
        let x = a4 + (b4 - a4) * k as f64 / (n - 1) as f64;
        let u = (x - c) / half;
        let (g1, g2) = (lower.eval(x), upper.eval(x));
        let mean = 0.5 * (g1 + g2);
        dsum += g2 - g1;
        let phi = [u * u, u, 1.0];
        for i in 0..3 {
            rhs[i] += phi[i] * mean;
            for j in 0..3 {
                m[i][j] += phi[i] * phi[j];
            }
        }
    }
    let q = solve3(m, rhs);
    let d = dsum / n as f64;
    // back to x: q0 u² + q1 u + q2 with u = (x - c)/half
    let c2 = q[0] / (half * half);
    let c1 = q[1] / half - 2.0 * q[0] * c / (half * half);
    let c0 = q[0] * c * c / (half * half) - q[1] * c / half + q[2] - 0.5 * d;
    ParabolicRectangle::new(base, [c2, c1, c0], d)
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    x
}

/// Largest dyadic `a` with `16a/(1-L) + 8La²/√(1-L²) ≤ 1/16`.
pub fn enclose_constant(lip: f64) -> f64 {
    let ok = |a: f64| 16.0 * a / (1.0 - lip) + 8.0 * lip * a * a / (1.0 - lip * lip).sqrt() <= 1.0 / 16.0;
    let mut a = 0.5;
    while !ok(a) {
        a *= 0.5;
    }
    a
}

/// Rectilinear pseudoquad `Q` with `V(x, r) ⊂ κQ` and `δ_x(Q) = 2r/κ`.
///
/// The curves pass through `Π(x)·(0, 0, ±s)` with `s = 2κ⁻²a⁻²r²`; the rectangle
/// is the image of `[-r/κ, r/κ] × [-s, s]` under the shear `Π(x·)`.
pub fn enclose(g: &IntrinsicGraph, x: HPoint, r: f64, kappa: f64) -> Result<Pseudoquad> {
    if !(r > 0.0) || !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Parameter("enclose needs r > 0 and κ in (0, 1)".into()));
    }
    let a = enclose_constant(g.lip_constant);
    let s = 2.0 * r * r / (kappa * kappa * a * a);
    let v = project_pi(x);
    let (x0, zp, y0) = (v.x, v.z, x.y);
    let half = r / kappa;
    let (a4, b4) = (x0 - 4.0 * half, x0 + 4.0 * half);
    let step = 2.0 * half / 4096.0;
    let lo = trace(g, x0, zp - s, a4, b4, step)?;
    let hi = trace(g, x0, zp + s, a4, b4, step)?;
    if !lo.covers(a4, b4) || !hi.covers(a4, b4) {
        return Err(Error::Coverage("graph domain too small for the enclosing pseudoquad".into()));
    }
    let rect = ParabolicRectangle::new((x0 - half, x0 + half), [0.0, -y0, zp - s + y0 * x0], 2.0 * s);
    Pseudoquad::new(Arc::new(lo), Arc::new(hi), rect, MU_MAX)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeReport {
    pub slope: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

/// `|slope(Q)| ≤ L/√(1-L²) + α(Q)⁻²`.
pub fn slope_bound_check(q: &Pseudoquad, lip: f64) -> SlopeReport {
    let bound = lip / (1.0 - lip * lip).sqrt() + q.aspect().powi(-2);
    let slope = q.rect.slope;
    SlopeReport {
        slope,
        bound,
        slack: bound - slope.abs(),
        pass: slope.abs() <= bound,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NestingReport {
    /// Smallest margin of `(2/3)Q ⊆ Q` over the boundary samples, relative to `δ_z`.
    pub inner_margin: f64,
    /// Smallest margin of `Q ⊆ 2Q`, relative to `δ_z`.
    pub outer_margin: f64,
}

impl NestingReport {
    pub fn pass(&self) -> bool {
        self.inner_margin >= 0.0 && self.outer_margin >= 0.0
    }
}

/// Samples the boundaries of `(2/3)Q`, `Q` and `2Q` on a dense grid.
pub fn nesting_check(q: &Pseudoquad, n: usize) -> NestingReport {
    let inner = q.scale(2.0 / 3.0);
    let outer = q.scale(2.0);
    let d = q.delta_z();
    let mut im = f64::INFINITY;
    for k in 0..=n {
        let x = inner.base.0 + (inner.base.1 - inner.base.0) * k as f64 / n as f64;
        im = im
            .min(inner.lower(x) - q.lower.eval(x))
            .min(q.upper.eval(x) - inner.upper(x));
    }
    let mut om = f64::INFINITY;
    for k in 0..=n {
        let x = q.base.0 + (q.base.1 - q.base.0) * k as f64 / n as f64;
        om = om
            .min(q.lower.eval(x) - outer.lower(x))
            .min(outer.upper(x) - q.upper.eval(x));
    }
    NestingReport {
        inner_margin: im / d,
        outer_margin: om / d,
    }
}
