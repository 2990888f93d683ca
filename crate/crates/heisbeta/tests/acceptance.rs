//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero on any failure.
//!
//! Pass criterion numbers as arguments to run a subset: `cargo test --test acceptance -- 7 8`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use heisbeta::beta::{
    ball_measure_ratio, beta_p_surface, beta_p_surface_with_starts, gamma_p, v_region, VMask,
};
use heisbeta::config::RunConfig;
use heisbeta::fit::{fit_affine_lp, lp_objective, AffineMap};
use heisbeta::flow::trace;
use heisbeta::graph::{certify, make_affine, make_perturbed, make_quadratic, IntrinsicGraph};
use heisbeta::heis::{dilate, dist, inv, koranyi_norm, mul, project_pi};
use heisbeta::multiscale::{carleson_integral, exponent_sweep, CarlesonSpec, RootSpec, SweepRow};
use heisbeta::patchwork::{build_patchwork_with_rule, structure_check, CutLabel, PatchworkTree};
use heisbeta::quad::{Pseudoquad, MU_MAX};
use heisbeta::HPoint;

const ALGEBRA_CASES: usize = 100_000;
const ALGEBRA_REL_TOL: f64 = 1e-10;
const PLANE_TOL: f64 = 1e-9;
const PLANE_CARLESON_TOL: f64 = 1e-8;
const DILATION_SAMPLES: usize = 100;
const DILATION_REL_TOL: f64 = 1e-3;
const LEMMA_CONFIGS: usize = 1000;
const NORMAL_EQ_TOL: f64 = 1e-10;
const L4_FIT_INSTANCES: usize = 50;
const L4_FIT_REL_TOL: f64 = 1e-4;
const TILING_REL_TOL: f64 = 1e-6;
const ALPHA_RATIO_TOL: f64 = 1e-12;
const STABILITY_FACTOR: f64 = 2.0;
const GROWTH_FACTOR: f64 = 2.0;
const RUNTIME_LIMIT_SECS: f64 = 600.0;
const ORACLE_REL_TOL: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("algebra suite", c1_algebra),
        ("exactness on planes", c2_planes),
        ("scale invariance", c3_dilation),
        ("lemma suite", c4_lemmas),
        ("fit-oracle equivalence", c5_fits),
        ("patchwork structure", c6_patchwork),
        ("Carleson stability", c7_stability),
        ("exponent dichotomy", c8_dichotomy),
        ("independent slow-path oracle", c9_oracle),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !wanted.is_empty() && !wanted.contains(&(i + 1)) {
            continue;
        }
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} [{:.1}s] {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

// ---------------------------------------------------------------- 1

/// Group law written out from the coordinate formulas.
mod group_oracle {
    pub type P = [f64; 3];

    pub fn mul(p: P, q: P) -> P {
        [p[0] + q[0], p[1] + q[1], p[2] + q[2] + 0.5 * (p[0] * q[1] - q[0] * p[1])]
    }

    pub fn norm(p: P) -> f64 {
        let h = p[0] * p[0] + p[1] * p[1];
        (h * h + 16.0 * p[2] * p[2]).powf(0.25)
    }

    pub fn dilate(t: f64, p: P) -> P {
        [t * p[0], t * p[1], t * t * p[2]]
    }

    pub fn pi(p: P) -> P {
        [p[0], 0.0, p[2] - 0.5 * p[0] * p[1]]
    }
}

fn arr(p: HPoint) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn pt(a: [f64; 3]) -> HPoint {
    HPoint::new(a[0], a[1], a[2])
}

fn rel_err3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let scale = a.iter().chain(&b).fold(1.0f64, |m, v| m.max(v.abs()));
    (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max) / scale
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn c1_algebra() -> Outcome {
    use group_oracle as o;
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let draw = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        let s = 10f64.powf(rng.gen_range(-2.0..1.0));
        [s * rng.gen_range(-1.0..1.0), s * rng.gen_range(-1.0..1.0), s * s * rng.gen_range(-1.0..1.0)]
    };
    let names = [
        "law", "associativity", "identity/inverse", "left invariance", "dilation", "projection", "triangle",
    ];
    let mut fails = [0usize; 7];
    let mut worst = 0.0f64;
    for _ in 0..ALGEBRA_CASES {
        let (p, q, r) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let t = 2f64.powf(rng.gen_range(-4.0..4.0));
        let u = rng.gen_range(-3.0..3.0);
        let (hp, hq, hr) = (pt(p), pt(q), pt(r));
        let mut check = |k: usize, e: f64| {
            worst = worst.max(e);
            if e > ALGEBRA_REL_TOL {
                fails[k] += 1;
            }
        };
        check(0, rel_err3(arr(mul(hp, hq)), o::mul(p, q)));
        check(1, rel_err3(arr(mul(mul(hp, hq), hr)), arr(mul(hp, mul(hq, hr)))));
        check(2, rel_err3(arr(mul(hp, inv(hp))), [0.0; 3]).max(rel_err3(arr(mul(HPoint::ZERO, hp)), p)));
        check(3, rel_err(dist(mul(hr, hp), mul(hr, hq)), o::norm(o::mul([-p[0], -p[1], -p[2]], q))));
        check(
            4,
            rel_err(koranyi_norm(dilate(t, hp)), t * o::norm(p))
                .max(rel_err3(arr(dilate(t, mul(hp, hq))), o::mul(o::dilate(t, p), o::dilate(t, q))))
                .max(rel_err(dist(dilate(t, hp), dilate(t, hq)), t * dist(hp, hq))),
        );
        let pp = arr(project_pi(hp));
        check(
            5,
            rel_err3(pp, o::pi(p))
                .max(rel_err3(arr(project_pi(project_pi(hp))), pp))
                .max(rel_err3(o::mul(pp, [0.0, p[1], 0.0]), p))
                .max(rel_err3(arr(project_pi(mul(hp, pt([0.0, u, 0.0])))), pp))
                .max(rel_err3(arr(project_pi(mul(hp, hq))), arr(project_pi(mul(hp, project_pi(hq)))))),
        );
        let excess = dist(hp, hr) - dist(hp, hq) - dist(hq, hr);
        check(6, excess.max(0.0) / dist(hp, hr).max(1.0));
    }
    let total: usize = fails.iter().sum();
    let detail = names
        .iter()
        .zip(fails)
        .map(|(n, f)| format!("{n}={f}"))
        .collect::<Vec<_>>()
        .join(" ");
    outcome(
        total == 0,
        format!("{ALGEBRA_CASES} cases per property, failures: {detail}; worst rel err {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 2

fn c2_planes() -> Outcome {
    let planes = [(0.37, -0.21), (-1.3, 0.4)];
    let mask = VMask::new((32, 32));
    let (mut worst_g, mut worst_b, mut count) = (0.0f64, 0.0f64, 0usize);
    for (pi, &(a, b)) in planes.iter().enumerate() {
        let g = make_affine(a, b);
        for i in 0..16 {
            for k in 0..16 {
                let (x, z) = (-1.0 + 2.0 * (i as f64 + 0.5) / 16.0, -1.0 + 2.0 * (k as f64 + 0.5) / 16.0);
                for j in 0..8 {
                    let r = 2f64.powi(-j);
                    for p in [1.0, 2.0, 4.0] {
                        worst_g = worst_g.max(gamma_p(&g, (x, z), r, p, &mask).unwrap().value);
                        count += 1;
                        // surface β on the first plane only; it dominates runtime
                        if pi == 0 {
                            let c = g.graph_map(x, z).unwrap();
                            worst_b = worst_b.max(beta_p_surface(&g, c, r, p, (16, 16)).unwrap().value);
                        }
                    }
                }
            }
        }
    }
    let mut worst_c = 0.0f64;
    for &(a, b) in &planes {
        let res = carleson_integral(&make_affine(a, b), &RootSpec::default(), &CarlesonSpec::default()).unwrap();
        worst_c = worst_c.max(res.total);
    }
    outcome(
        worst_g <= PLANE_TOL && worst_b <= PLANE_TOL && worst_c <= PLANE_CARLESON_TOL,
        format!(
            "{count} γ samples max {worst_g:.1e}, {} β samples max {worst_b:.1e} (tol {PLANE_TOL:e}); Carleson total max {worst_c:.1e} (tol {PLANE_CARLESON_TOL:e})",
            count / 2
        ),
    )
}

// ---------------------------------------------------------------- 3

fn random_perturbed(rng: &mut ChaCha8Rng) -> IntrinsicGraph {
    make_perturbed(
        rng.gen_range(-0.3..0.3),
        rng.gen_range(0.005..0.05),
        rng.gen_range(1..7),
        rng.gen(),
    )
    .unwrap()
}

fn c3_dilation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mask = VMask::new((32, 32));
    let mut worst = 0.0f64;
    let mut uncertified = 0;
    for i in 0..DILATION_SAMPLES {
        let g = random_perturbed(&mut rng);
        if certify(&g, 2048, i as u64).is_err() {
            uncertified += 1;
            continue;
        }
        let v = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let r = 2f64.powf(rng.gen_range(-4.0..-1.0));
        let base = gamma_p(&g, v, r, 4.0, &mask).unwrap().value;
        for t in [0.5, 2.0, 4.0] {
            let gt = g.dilated(t);
            let val = gamma_p(&gt, (t * v.0, t * t * v.1), t * r, 4.0, &mask).unwrap().value;
            worst = worst.max((val - base).abs() / base);
        }
    }
    outcome(
        worst <= DILATION_REL_TOL && uncertified == 0,
        format!(
            "{DILATION_SAMPLES} certified samples × t ∈ {{1/2, 2, 4}}: worst rel diff {worst:.1e} (tol {DILATION_REL_TOL:e}); uncertified {uncertified}"
        ),
    )
}

// ---------------------------------------------------------------- 4

fn random_lip_graph(rng: &mut ChaCha8Rng) -> IntrinsicGraph {
    if rng.gen_bool(0.25) {
        make_affine(rng.gen_range(-1.5..1.5), rng.gen_range(-0.5..0.5))
    } else {
        random_perturbed(rng)
    }
}

/// Random rectilinear pseudoquads; draws are retried until the rectilinearity test passes.
fn random_pseudoquads(rng: &mut ChaCha8Rng, n: usize) -> (Vec<(IntrinsicGraph, Pseudoquad)>, usize) {
    let mut out = Vec::with_capacity(n);
    let mut rejected = 0;
    while out.len() < n {
        let g = random_lip_graph(rng);
        let dx = rng.gen_range(0.1..1.0);
        let alpha = 2f64.powf(rng.gen_range(-1.5..1.0));
        let dz = (dx / alpha) * (dx / alpha);
        match Pseudoquad::through(&g, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), dx, dz, MU_MAX) {
            Ok(q) => out.push((g, q)),
            Err(_) => rejected += 1,
        }
    }
    (out, rejected)
}

fn c4_lemmas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut lines = Vec::new();
    let mut all = true;
    let mut report = |name: &str, violations: usize, extra: String| {
        all &= violations == 0;
        lines.push(format!("{name}: {violations} violations{extra}"));
    };

    // vertical Hölder bound |ψ(v) - ψ(vZ^s)| ≤ 4/(1-L)·√|s|
    let mut v = 0;
    let mut worst = 0.0f64;
    for _ in 0..LEMMA_CONFIGS {
        let g = random_lip_graph(&mut rng);
        let (x, z) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let s = 10f64.powf(rng.gen_range(-6.0..1.0)) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let ratio = (g.psi(x, z) - g.psi(x, z + s)).abs() / (4.0 / (1.0 - g.lip_constant) * s.abs().sqrt());
        worst = worst.max(ratio);
        v += (ratio > 1.0) as usize;
    }
    report("sqrt bound", v, format!(" (worst ratio {worst:.3})"));

    // second-order bound for traced curves, tolerance 1 + 10·step
    let step = 1.0 / 256.0;
    let (mut v, mut worst, mut pairs) = (0, 0.0f64, 0usize);
    for _ in 0..LEMMA_CONFIGS {
        let g = random_lip_graph(&mut rng);
        let (x0, z0) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let c = trace(&g, x0, z0, x0 - 1.0, x0 + 1.0, step).unwrap();
        let l = g.lip_constant;
        let k = l / (1.0 - l * l).sqrt() * 0.5;
        let idx: Vec<usize> = (0..c.len()).step_by(4).collect();
        let mut bad = false;
        for &i in &idx {
            let (s, gs) = (c.t_at(i), c.g[i]);
            let ds = -g.psi(s, gs);
            for &j in &idx {
                if i == j {
                    continue;
                }
                let t = c.t_at(j);
                let ratio = (c.g[j] - gs - ds * (t - s)).abs() / (k * (t - s) * (t - s));
                pairs += 1;
                if k == 0.0 {
                    bad |= (c.g[j] - gs - ds * (t - s)).abs() > 1e-12;
                    continue;
                }
                worst = worst.max(ratio);
                bad |= ratio > 1.0 + 10.0 * step;
            }
        }
        v += bad as usize;
    }
    report("curve linearization", v, format!(" (worst ratio {worst:.4}, {pairs} pairs)"));

    let (quads, rejected) = random_pseudoquads(&mut rng, LEMMA_CONFIGS);

    // (2/3)Q ⊆ Q ⊆ 2Q by dense boundary sampling
    let n = 2000;
    let mut v = 0;
    for (_, q) in &quads {
        let (inner, outer) = (q.scale(2.0 / 3.0), q.scale(2.0));
        let mut ok = true;
        for k in 0..=n {
            let x = inner.base.0 + (inner.base.1 - inner.base.0) * k as f64 / n as f64;
            ok &= q.lower.eval(x) <= inner.lower(x) && inner.upper(x) <= q.upper.eval(x);
            let x = q.base.0 + (q.base.1 - q.base.0) * k as f64 / n as f64;
            ok &= outer.lower(x) <= q.lower.eval(x) && q.upper.eval(x) <= outer.upper(x);
        }
        ok &= outer.base.0 <= q.base.0 && q.base.1 <= outer.base.1;
        v += (!ok) as usize;
    }
    report("nesting", v, format!(" ({rejected} non-rectilinear draws rejected)"));

    // sandwich 3/4 ≤ δ_x δ_z / |Q| ≤ 5/4 with |Q| by midpoint quadrature
    let area = |q: &Pseudoquad| -> f64 {
        let (a, b) = q.base;
        let m = 20_000;
        let h = (b - a) / m as f64;
        (0..m)
            .map(|k| {
                let x = a + (k as f64 + 0.5) * h;
                q.upper.eval(x) - q.lower.eval(x)
            })
            .sum::<f64>()
            * h
    };
    let mut v = 0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (_, q) in &quads {
        let r = q.delta_x() * q.delta_z() / area(q);
        lo = lo.min(r);
        hi = hi.max(r);
        v += !(0.75..=1.25).contains(&r) as usize;
    }
    report("sandwich", v, format!(" (range [{lo:.4}, {hi:.4}])"));

    // parallelogram containment, exact, for random ball points and for mask nodes
    let mask = VMask::new((32, 32));
    let mut v = 0;
    for _ in 0..LEMMA_CONFIGS {
        let g = random_lip_graph(&mut rng);
        let (x, z) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let p = g.graph_map(x, z).unwrap();
        let r = 2f64.powf(rng.gen_range(-6.0..0.0));
        let c = project_pi(p);
        let inside = |xv: f64, zv: f64| (xv - c.x).abs() <= r && (zv - c.z + p.y * (xv - c.x)).abs() <= r * r;
        let mut ok = true;
        let mut hits = 0;
        while hits < 200 {
            let u = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.25..0.25)];
            if group_oracle::norm(u) > 1.0 {
                continue;
            }
            hits += 1;
            let q = group_oracle::mul(arr(p), group_oracle::dilate(r, u));
            let w = group_oracle::pi(q);
            ok &= inside(w[0], w[2]);
        }
        for &(xv, zv) in &v_region(&g, p, r, &mask).unwrap().nodes {
            ok &= inside(xv, zv);
        }
        v += (!ok) as usize;
    }
    report("parallelogram", v, String::new());

    // |slope(Q)| ≤ L/√(1-L²) + α(Q)⁻²
    let mut v = 0;
    let mut min_slack = f64::INFINITY;
    for (g, q) in &quads {
        let l = g.lip_constant;
        let bound = l / (1.0 - l * l).sqrt() + q.aspect().powi(-2);
        min_slack = min_slack.min(bound - q.rect.slope.abs());
        v += (q.rect.slope.abs() > bound) as usize;
    }
    report("slope bound", v, format!(" (min slack {min_slack:.3e})"));

    // ‖l‖_∞(Q) ≤ 24 ‖l‖_1(Q) / |Q| for random affine l
    let mut v = 0;
    let mut worst = 0.0f64;
    for (_, q) in &quads {
        let (a, b) = q.base;
        let root = rng.gen_range(a - q.delta_x()..b + q.delta_x());
        let l = AffineMap::new(rng.gen_range(0.1..10.0), 0.0);
        let l = AffineMap::new(l.a, -l.a * root);
        let sup = l.eval(a).abs().max(l.eval(b).abs());
        let m = 20_000;
        let h = (b - a) / m as f64;
        let (mut l1, mut vol) = (0.0, 0.0);
        for k in 0..m {
            let x = a + (k as f64 + 0.5) * h;
            let w = (q.upper.eval(x) - q.lower.eval(x)) * h;
            l1 += l.eval(x).abs() * w;
            vol += w;
        }
        let ratio = sup / (l1 / vol);
        worst = worst.max(ratio);
        v += (sup > 24.0 * l1 / vol) as usize;
    }
    report("affine norm (factor 24)", v, format!(" (worst ratio {worst:.2})"));

    // β_p ≤ (μ(B)/r³)^{1/p-1/q} β_q for p < q in {1, 2, 4}
    let grid = (16, 16);
    let mut v = 0;
    let mut worst = 0.0f64;
    for _ in 0..LEMMA_CONFIGS {
        let g = random_perturbed(&mut rng);
        let p0 = g.graph_map(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)).unwrap();
        let r = 2f64.powf(rng.gen_range(-4.0..-1.0));
        let b4 = beta_p_surface(&g, p0, r, 4.0, grid).unwrap();
        let b2 = beta_p_surface_with_starts(&g, p0, r, 2.0, grid, &[b4.best_fit]).unwrap();
        let b1 = beta_p_surface_with_starts(&g, p0, r, 1.0, grid, &[b2.best_fit, b4.best_fit]).unwrap();
        let m = ball_measure_ratio(&g, p0, r, grid).unwrap();
        let (b1, b2, b4) = (b1.value, b2.value, b4.value);
        let chain = [
            b1 / (m.powf(0.5) * b2),
            b2 / (m.powf(0.25) * b4),
            b1 / (m.powf(0.75) * b4),
        ];
        let w = chain.iter().copied().fold(0.0, f64::max);
        worst = worst.max(w);
        v += (w > 1.0 + 1e-12) as usize;
    }
    report("Hölder chain", v, format!(" (worst ratio {worst:.6})"));

    outcome(all, format!("{LEMMA_CONFIGS} configurations per lemma; {}", lines.join("; ")))
}

// ---------------------------------------------------------------- 5

/// Weighted least squares by the 2×2 normal equations.
fn normal_equations(xs: &[f64], ws: &[f64], ys: &[f64]) -> (f64, f64) {
    let (mut sw, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&x, &w), &y) in xs.iter().zip(ws).zip(ys) {
        sw += w;
        sx += w * x;
        sxx += w * x * x;
        sy += w * y;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    ((sw * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
}

/// `min (Σ w|y - a x - b|^p)^{1/p}` by grid search over a box with repeated zooming.
fn grid_search_fit(xs: &[f64], ws: &[f64], ys: &[f64], p: f64) -> f64 {
    let obj = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(ws)
            .zip(ys)
            .map(|((&x, &w), &y)| w * (y - a * x - b).abs().powf(p))
            .sum()
    };
    let (ymin, ymax) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |m, &y| (m.0.min(y), m.1.max(y)));
    let (xmin, xmax) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |m, &x| (m.0.min(x), m.1.max(x)));
    let span = (ymax - ymin).max(1e-12);
    let mut ca = 0.0;
    let mut cb = 0.5 * (ymin + ymax);
    let mut ha = 2.0 * span / (xmax - xmin);
    let mut hb = 2.0 * span + ha * xmax.abs().max(xmin.abs());
    let k = 10;
    let mut best = obj(ca, cb);
    for _ in 0..60 {
        let (mut ba, mut bb) = (ca, cb);
        for i in -k..=k {
            for j in -k..=k {
                let (a, b) = (ca + ha * i as f64 / k as f64, cb + hb * j as f64 / k as f64);
                let f = obj(a, b);
                if f < best {
                    best = f;
                    ba = a;
                    bb = b;
                }
            }
        }
        ca = ba;
        cb = bb;
        ha *= 0.5;
        hb *= 0.5;
    }
    best.powf(1.0 / p)
}

fn random_fit_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = rng.gen_range(20..300);
    let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0));
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
    let ys = xs
        .iter()
        .map(|&x| {
            let e: f64 = rng.gen_range(-1.0..1.0);
            a * x + b + 0.3 * e * e * e + 0.2 * (3.0 * x).sin()
        })
        .collect();
    (xs, ws, ys)
}

fn c5_fits() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let mut worst2 = 0.0f64;
    for _ in 0..200 {
        let (xs, ws, ys) = random_fit_instance(&mut rng);
        let fit = fit_affine_lp(&xs, &ws, &ys, 2.0).unwrap();
        let (a, b) = normal_equations(&xs, &ws, &ys);
        worst2 = worst2.max(rel_err(fit.map.a, a)).max(rel_err(fit.map.b, b));
    }
    let mut worst4 = 0.0f64;
    let mut lib_worse = 0;
    for _ in 0..L4_FIT_INSTANCES {
        let (xs, ws, ys) = random_fit_instance(&mut rng);
        let fit = fit_affine_lp(&xs, &ws, &ys, 4.0).unwrap();
        let lib = lp_objective(&xs, &ws, &ys, fit.map, 4.0).powf(0.25);
        let oracle = grid_search_fit(&xs, &ws, &ys, 4.0);
        worst4 = worst4.max((lib - oracle).abs() / oracle);
        lib_worse += (lib > oracle * (1.0 + L4_FIT_REL_TOL)) as usize;
    }
    outcome(
        worst2 <= NORMAL_EQ_TOL && worst4 <= L4_FIT_REL_TOL && lib_worse == 0,
        format!(
            "p=2: 200 instances, worst coefficient error {worst2:.1e} (tol {NORMAL_EQ_TOL:e}); p=4: {L4_FIT_INSTANCES} instances, worst rel residual diff {worst4:.1e} (tol {L4_FIT_REL_TOL:e})"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn shipped_tree(name: &str) -> (IntrinsicGraph, PatchworkTree) {
    let (cfg, _) = RunConfig::load(&configs_dir().join(format!("{name}.toml"))).unwrap();
    let g = cfg.graph.build().unwrap();
    let root = cfg.root.build(&g).unwrap();
    let tree = build_patchwork_with_rule(&g, root, &cfg.patchwork, cfg.decompose.rule).unwrap();
    (g, tree)
}

fn records(tree: &PatchworkTree) -> Vec<u8> {
    let mut out = Vec::new();
    tree.write_records(&mut out).unwrap();
    out
}

fn c6_patchwork() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["flat", "plane", "parabola", "perturbed", "bump"] {
        let (_, tree) = shipped_tree(name);
        let root = tree.root();
        let leaf_sum: f64 = tree.leaves().map(|v| v.area).sum();
        let tiling = (leaf_sum - root.area).abs() / root.area;
        // every sampled point of Q_root lies in exactly one leaf
        let leaves: Vec<_> = tree.leaves().collect();
        let (a, b) = root.quad.base;
        let mut multiplicity_errors = 0;
        for _ in 0..2000 {
            let x = rng.gen_range(a..b);
            let z = rng.gen_range(root.quad.lower.eval(x)..root.quad.upper.eval(x));
            let hits = leaves.iter().filter(|l| l.quad.contains(x, z)).count();
            multiplicity_errors += (hits != 1) as usize;
        }
        let mut alpha_err = 0.0f64;
        for v in &tree.vertices {
            if let (CutLabel::Horizontal, Some(ch)) = (v.cut, v.children) {
                for c in ch {
                    let r = tree.vertices[c].aspect() / v.aspect();
                    alpha_err = alpha_err.max((r - std::f64::consts::SQRT_2).abs());
                }
            }
        }
        let stable = records(&tree) == records(&shipped_tree(name).1);
        let lib = structure_check(&tree).unwrap();
        let pass = tiling <= TILING_REL_TOL
            && lib.tiling_mismatch <= TILING_REL_TOL * root.area
            && multiplicity_errors == 0
            && alpha_err <= ALPHA_RATIO_TOL
            && stable;
        ok &= pass;
        parts.push(format!(
            "{name}: {} vertices ({}h/{}v), tiling {tiling:.1e}, point-in-one-leaf errors {multiplicity_errors}, α ratio err {alpha_err:.1e}, byte-stable {stable}",
            tree.len(),
            tree.count(CutLabel::Horizontal),
            tree.count(CutLabel::Vertical)
        ));
    }
    outcome(ok, parts.join("; "))
}

// ---------------------------------------------------------------- 7, 8

struct SweepRun {
    base: Vec<SweepRow>,
    doubled: Vec<SweepRow>,
    secs: f64,
}

fn sweep_runs() -> &'static SweepRun {
    use std::sync::OnceLock;
    static RUN: OnceLock<SweepRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let (cfg, _) = RunConfig::load(&configs_dir().join("sweep.toml")).unwrap();
        let t = Instant::now();
        let base = exponent_sweep(&cfg.graph, &cfg.root, &cfg.carleson, &cfg.sweep.s_values, &cfg.sweep.refinements)
            .unwrap();
        let mut doubled_spec = cfg.carleson;
        doubled_spec.spatial_grid *= 2;
        doubled_spec.v_grid = (2 * doubled_spec.v_grid.0, 2 * doubled_spec.v_grid.1);
        let doubled = exponent_sweep(&cfg.graph, &cfg.root, &doubled_spec, &cfg.sweep.s_values, &cfg.sweep.refinements)
            .unwrap();
        SweepRun {
            base,
            doubled,
            secs: t.elapsed().as_secs_f64(),
        }
    })
}

fn totals(rows: &[SweepRow], s: f64) -> Vec<f64> {
    rows.iter().filter(|r| r.s_exponent == s).map(|r| r.total).collect()
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn c7_stability() -> Outcome {
    let run = sweep_runs();
    let (b, d) = (totals(&run.base, 4.0), totals(&run.doubled, 4.0));
    let across_refinements = spread(&b).max(spread(&d));
    let across_grids = b.iter().zip(&d).map(|(x, y)| spread(&[*x, *y])).fold(0.0, f64::max);
    let all: Vec<f64> = b.iter().chain(&d).copied().collect();
    let overall = spread(&all);
    outcome(
        b.len() == 3 && overall <= STABILITY_FACTOR && run.secs <= RUNTIME_LIMIT_SECS,
        format!(
            "s=4 totals base [{}], doubled [{}]; max/min across refinements {across_refinements:.2}, across grid doubling {across_grids:.2}, overall {overall:.2} (limit {STABILITY_FACTOR}); runtime {:.0}s (limit {RUNTIME_LIMIT_SECS}s)",
            fmt_list(&b),
            fmt_list(&d),
            run.secs
        ),
    )
}

fn c8_dichotomy() -> Outcome {
    let run = sweep_runs();
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, rows) in [("base", &run.base), ("doubled", &run.doubled)] {
        let s2 = totals(rows, 2.0);
        let s4 = totals(rows, 4.0);
        let monotone = s2.windows(2).all(|w| w[1] > w[0]);
        let growth = s2[s2.len() - 1] / s2[0];
        ok &= s2.len() == 3 && monotone && growth >= GROWTH_FACTOR && spread(&s4) <= STABILITY_FACTOR;
        parts.push(format!(
            "{label}: s=2 [{}] monotone {monotone}, growth {growth:.2} (need ≥ {GROWTH_FACTOR}); s=4 spread {:.2}",
            fmt_list(&s2),
            spread(&s4)
        ));
    }
    outcome(ok, parts.join("; "))
}

// ---------------------------------------------------------------- 9

/// Brute-force Carleson sum for `ψ(x, z) = x²`, written without the library.
mod slow_path {
    use super::group_oracle as grp;
    use std::f64::consts::LN_2;

    pub fn psi(x: f64) -> f64 {
        x * x
    }

    /// Minimum over `u` of the Korányi gauge of `w·(0, u, 0)`, restricted to `|w_y + u| ≤ r`
    /// (outside that window the gauge exceeds `r`). The function is convex in `u`.
    fn fiber_min(w: [f64; 3], r: f64) -> f64 {
        let f = |u: f64| grp::norm(grp::mul(w, [0.0, u, 0.0]));
        let (mut lo, mut hi) = (-w[1] - r, -w[1] + r);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..60 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = f(d);
            }
        }
        fc.min(fd).min(f(lo)).min(f(hi))
    }

    /// `r^{-(3+p)/p} inf_{a,b} ‖ψ - a - b(x - x0)‖_{L_p(V(Ψ(v), r))}` on an `n × n` sheared grid.
    pub fn gamma(x0: f64, z0: f64, r: f64, p: f64, n: usize) -> f64 {
        let y0 = psi(x0);
        // graph point Ψ(v) = (x0, 0, z0)·(0, y0, 0)
        let gp = grp::mul([x0, 0.0, z0], [0.0, y0, 0.0]);
        let gp_inv = [-gp[0], -gp[1], -gp[2]];
        let (hx, hz) = (2.0 * r / n as f64, 2.0 * r * r / n as f64);
        // column weights: ψ depends on x only
        let mut cols: Vec<(f64, f64)> = Vec::new();
        for i in 0..n {
            let x = x0 - r + (i as f64 + 0.5) * hx;
            let zc = z0 - y0 * (x - x0);
            let mut count = 0usize;
            for k in 0..n {
                let z = zc - r * r + (k as f64 + 0.5) * hz;
                let w = grp::mul(gp_inv, [x, 0.0, z]);
                if fiber_min(w, r) <= r {
                    count += 1;
                }
            }
            if count > 0 {
                cols.push((x - x0, count as f64 * hx * hz));
            }
        }
        let obj = |a: f64, b: f64| -> f64 {
            cols.iter()
                .map(|&(dx, w)| w * (psi(x0 + dx) - a - b * dx).abs().powf(p))
                .sum()
        };
        // zooming grid search around the tangent line
        let (mut ca, mut cb) = (y0, 2.0 * x0);
        let (mut ha, mut hb) = (r * r + 1e-300, 2.0 * r + 1e-300);
        let k = 8;
        let mut best = obj(ca, cb);
        for _ in 0..50 {
            let (mut ba, mut bb) = (ca, cb);
            for i in -k..=k {
                for j in -k..=k {
                    let (a, b) = (ca + ha * i as f64 / k as f64, cb + hb * j as f64 / k as f64);
                    let f = obj(a, b);
                    if f < best {
                        best = f;
                        ba = a;
                        bb = b;
                    }
                }
            }
            ca = ba;
            cb = bb;
            ha *= 0.6;
            hb *= 0.6;
        }
        r.powf(-(3.0 + p) / p) * best.powf(1.0 / p)
    }

    pub struct Setup {
        pub center: (f64, f64),
        pub delta_x: f64,
        pub delta_z: f64,
        pub nu: f64,
        pub octaves: u32,
        pub p: f64,
        pub s: f64,
    }

    /// `Σ_k ln2 · (1/|Q|) ∫_{(1/3)Q} γ_p(v, ν2^{-k})^s dv`.
    pub fn carleson(st: &Setup, nx: usize, nz: usize, v_grid: usize) -> f64 {
        let (xc, zc) = st.center;
        // the bounding curves z = c - (t³ - xc³)/3 are parallel, so R has height δ_z and |Q| = δ_x δ_z
        let q_area = st.delta_x * st.delta_z;
        let third_area = (st.delta_x / 3.0) * (st.delta_z / 9.0);
        // mid-curve of the third: least-squares quadratic of the cubic over 4I, sampled densely
        let mid = |t: f64| zc - (t * t * t - xc * xc * xc) / 3.0;
        let (a4, b4) = (xc - 2.0 * st.delta_x, xc + 2.0 * st.delta_x);
        let m = 4001;
        let mut ata = [[0.0f64; 3]; 3];
        let mut atb = [0.0f64; 3];
        for k in 0..m {
            let t = a4 + (b4 - a4) * k as f64 / (m - 1) as f64;
            let u = t - xc;
            let phi = [1.0, u, u * u];
            for i in 0..3 {
                atb[i] += phi[i] * mid(t);
                for j in 0..3 {
                    ata[i][j] += phi[i] * phi[j];
                }
            }
        }
        let coef = solve3(ata, atb);
        let quad = |t: f64| coef[0] + coef[1] * (t - xc) + coef[2] * (t - xc) * (t - xc);
        let mut total = 0.0;
        for k in 0..=st.octaves {
            let r = st.nu * 2f64.powi(-(k as i32));
            let mut acc = 0.0;
            for i in 0..nx {
                let x = xc - st.delta_x / 6.0 + (i as f64 + 0.5) * st.delta_x / 3.0 / nx as f64;
                for j in 0..nz {
                    let z = quad(x) - st.delta_z / 18.0 + (j as f64 + 0.5) * st.delta_z / 9.0 / nz as f64;
                    acc += gamma(x, z, r, st.p, v_grid).powf(st.s);
                }
            }
            total += LN_2 * acc / (nx * nz) as f64 * third_area / q_area;
        }
        total
    }

    fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
        for c in 0..3 {
            let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..3 {
                let f = a[r][c] / a[c][c];
                for k in c..3 {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = [0.0; 3];
        for i in (0..3).rev() {
            x[i] = (b[i] - (i + 1..3).map(|k| a[i][k] * x[k]).sum::<f64>()) / a[i][i];
        }
        x
    }
}

fn c9_oracle() -> Outcome {
    let nu = 1.0 / 3.0;
    let octaves = 8;
    let g = make_quadratic(1.0, 2.5).unwrap();
    let root = RootSpec {
        center_x: 0.0,
        center_z: 0.0,
        delta_x: 1.0,
        delta_z: 64.0,
        mu: MU_MAX,
    };
    let spec = CarlesonSpec {
        p_exponent: 4.0,
        s_exponent: 4.0,
        levels: (0, octaves),
        per_octave: 1,
        spatial_grid: 12,
        v_grid: (64, 64),
        nu: Some(nu),
        alpha_min: 0.125,
    };
    let lib = carleson_integral(&g, &root, &spec).unwrap().total;
    let setup = slow_path::Setup {
        center: (0.0, 0.0),
        delta_x: 1.0,
        delta_z: 64.0,
        nu,
        octaves,
        p: 4.0,
        s: 4.0,
    };
    let oracle = slow_path::carleson(&setup, 24, 2, 160);
    let rel = (lib - oracle).abs() / oracle;
    outcome(
        rel <= ORACLE_REL_TOL,
        format!("ψ = x², δ_x = 1, δ_z = 64: library {lib:.6e}, brute force {oracle:.6e}, rel diff {rel:.2e} (tol {ORACLE_REL_TOL})"),
    )
}
