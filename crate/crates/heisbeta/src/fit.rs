//! Weighted `L_p` fits of affine functions `h(x) = a·x + b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `h(v) = a·x(v) + b`, constant along cosets of `⟨Y⟩`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub a: f64,
    pub b: f64,
}

impl AffineMap {
    pub const ZERO: AffineMap = AffineMap { a: 0.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Self {
        AffineMap { a, b }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub map: AffineMap,
    /// `(Σ w |y - a x - b|^p)^{1/p}` at the returned map.
    pub residual: f64,
    /// Set when all abscissae coincide and only `b` was fitted.
    pub degenerate: bool,
}

/// `Σ w |y - a x - b|^p`.
pub fn lp_objective(xs: &[f64], ws: &[f64], ys: &[f64], map: AffineMap, p: f64) -> f64 {
    xs.iter()
        .zip(ws)
        .zip(ys)
        .map(|((&x, &w), &y)| w * (y - map.eval(x)).abs().powf(p))
        .sum()
}

const REL_TOL: f64 = 1e-10;
const EPS_FLOOR: f64 = 1e-9;
const MAX_ITERS: usize = 200;

/// Minimizes `(Σ w_i |y_i - a x_i - b|^p)^{1/p}` over `(a, b)`.
///
/// `p = 2` uses the normal equations. Other exponents run damped Newton on the
/// smoothed objective `Σ w ((r² + ε²)^{p/2})`, started at the least-squares
/// solution, with `ε` decreased geometrically to `1e-9` times the residual scale.
pub fn fit_affine_lp(xs: &[f64], ws: &[f64], ys: &[f64], p: f64) -> Result<FitResult> {
    let n = xs.len();
    if ws.len() != n || ys.len() != n {
        return Err(Error::Parameter("sample arrays differ in length".into()));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("exponent p = {p} must be ≥ 1")));
    }
    let wsum: f64 = ws.iter().sum();
    if n < 3 || !(wsum > 0.0) {
        return Err(Error::Parameter("need at least 3 samples with positive weight".into()));
    }
    let cx = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / wsum;
    let var = xs.iter().zip(ws).map(|(x, w)| w * (x - cx) * (x - cx)).sum::<f64>() / wsum;
    let sx = var.sqrt();
    let degenerate = !(sx > 1e-14 * (cx.abs() + 1.0));
    // Weights are normalized so the optimizer sees O(1) objectives.
    let wn: Vec<f64> = ws.iter().map(|w| w / wsum).collect();
    let us: Vec<f64> = if degenerate {
        vec![0.0; n]
    } else {
        xs.iter().map(|x| (x - cx) / sx).collect()
    };

    let (mut alpha, mut beta) = least_squares(&us, &wn, ys, degenerate);
    if p != 2.0 {
        let rms = us
            .iter()
            .zip(&wn)
            .zip(ys)
            .map(|((u, w), y)| w * (y - alpha * u - beta).powi(2))
            .sum::<f64>()
            .sqrt();
        let yscale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        if rms > 1e-15 * yscale.max(f64::MIN_POSITIVE) {
            let mut eps = if p < 2.0 { 1e-2 * rms } else { EPS_FLOOR * rms };
            loop {
                (alpha, beta) = newton(&us, &wn, ys, p, eps, alpha, beta, degenerate);
                if eps <= EPS_FLOOR * rms {
                    break;
                }
                eps = (eps * 0.1).max(EPS_FLOOR * rms);
            }
        }
    }
    let map = if degenerate {
        AffineMap::new(0.0, beta)
    } else {
        AffineMap::new(alpha / sx, beta - alpha * cx / sx)
    };
    let obj: f64 = us
        .iter()
        .zip(ws)
        .zip(ys)
        .map(|((u, w), y)| w * (y - alpha * u - beta).abs().powf(p))
        .sum();
    Ok(FitResult {
        map,
        residual: obj.powf(1.0 / p),
        degenerate,
    })
}

fn least_squares(us: &[f64], ws: &[f64], ys: &[f64], degenerate: bool) -> (f64, f64) {
    // us are centered with unit weighted variance, so the system is diagonal.
    let my: f64 = ws.iter().zip(ys).map(|(w, y)| w * y).sum();
    if degenerate {
        return (0.0, my);
    }
    let muy: f64 = us.iter().zip(ws).zip(ys).map(|((u, w), y)| w * u * y).sum();
    let muu: f64 = us.iter().zip(ws).map(|(u, w)| w * u * u).sum();
    let mu: f64 = us.iter().zip(ws).map(|(u, w)| w * u).sum();
    let det = muu - mu * mu;
    let a = (muy - mu * my) / det;
    (a, my - a * mu)
}

fn smoothed(us: &[f64], ws: &[f64], ys: &[f64], p: f64, eps2: f64, a: f64, b: f64) -> f64 {
    us.iter()
        .zip(ws)
        .zip(ys)
        .map(|((u, w), y)| {
            let r = y - a * u - b;
            w * (r * r + eps2).powf(0.5 * p)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn newton(us: &[f64], ws: &[f64], ys: &[f64], p: f64, eps: f64, a0: f64, b0: f64, degenerate: bool) -> (f64, f64) {
    let eps2 = eps * eps;
    let (mut a, mut b) = (a0, b0);
    let mut f = smoothed(us, ws, ys, p, eps2, a, b);
    for _ in 0..MAX_ITERS {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&u, &w), &y) in us.iter().zip(ws).zip(ys) {
            let r = y - a * u - b;
            let q = r * r + eps2;
            let d1 = p * r * q.powf(0.5 * p - 1.0);
            let d2 = p * q.powf(0.5 * p - 2.0) * ((p - 1.0) * r * r + eps2);
            ga -= w * d1 * u;
            gb -= w * d1;
            haa += w * d2 * u * u;
            hab += w * d2 * u;
            hbb += w * d2;
        }
        let (da, db) = if degenerate {
            (0.0, -gb / hbb)
        } else {
            let det = haa * hbb - hab * hab;
            if !(det > 0.0) || !det.is_finite() {
                (-ga / haa.max(f64::MIN_POSITIVE), -gb / hbb.max(f64::MIN_POSITIVE))
            } else {
                ((-ga * hbb + gb * hab) / det, (ga * hab - gb * haa) / det)
            }
        };
        if !(da.is_finite() && db.is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let (na, nb) = (a + t * da, b + t * db);
            let nf = smoothed(us, ws, ys, p, eps2, na, nb);
            if nf <= f {
                a = na;
                b = nb;
                f = nf;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let size = (t * da).abs().max((t * db).abs());
        if !accepted || size <= REL_TOL * (1.0 + a.abs().max(b.abs())) {
            break;
        }
    }
    (a, b)
}
