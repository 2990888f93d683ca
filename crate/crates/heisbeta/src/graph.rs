//! Intrinsic graphs over the vertical plane `V₀` and the generator zoo.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heis::HPoint;

/// Closed rectangle `[x0, x1] × [z0, z1]` in `V₀`; bounds may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl Rect {
    pub const ALL: Rect = Rect {
        x0: f64::NEG_INFINITY,
        x1: f64::INFINITY,
        z0: f64::NEG_INFINITY,
        z1: f64::INFINITY,
    };

    pub fn new(x0: f64, x1: f64, z0: f64, z1: f64) -> Self {
        Rect { x0, x1, z0, z1 }
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x0 && x <= self.x1 && z >= self.z0 && z <= self.z1
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.x0 >= self.x0 && o.x1 <= self.x1 && o.z0 >= self.z0 && o.z1 <= self.z1
    }

    pub fn is_bounded(&self) -> bool {
        self.x0.is_finite() && self.x1.is_finite() && self.z0.is_finite() && self.z1.is_finite()
    }

    /// Intersection with a box, used to pick sampling windows on unbounded domains.
    pub fn clip(&self, o: &Rect) -> Rect {
        Rect {
            x0: self.x0.max(o.x0),
            x1: self.x1.min(o.x1),
            z0: self.z0.max(o.z0),
            z1: self.z1.min(o.z1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Perturbation,
    BumpFamily,
}

/// Parameters of the bump-family generator.
///
/// Refinement `k` superposes `4^k` layers. Layer `j` has width about `2^{-j}/nx`
/// (see [`WIDTH_JITTER`]) and every layer at refinement `k` has aspect
/// `bump_aspect·BUMP_ASPECT_GROWTH^k`. The coarsest layer tiles cells `1/nx` wide
/// and `1/nz` tall.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFamilySpec {
    pub bump_aspect: f64,
    pub amplitude_scale: f64,
    pub grid_counts: (u32, u32),
    pub refinement_level: u32,
}

pub const BUMP_ASPECT_GROWTH: f64 = 1.55;
/// Layer `j ≥ 1` has width `2^{-j-ξ_j}/nx` with `ξ_j` uniform in `(-WIDTH_JITTER, WIDTH_JITTER)`.
pub const WIDTH_JITTER: f64 = 0.15;

impl BumpFamilySpec {
    pub fn layer_count(&self) -> usize {
        4usize.pow(self.refinement_level)
    }

    pub fn aspect(&self) -> f64 {
        self.bump_aspect * BUMP_ASPECT_GROWTH.powi(self.refinement_level as i32)
    }

    /// Ratio of the z-period of a layer to the footprint height of its bumps.
    pub fn fill(&self) -> f64 {
        let (nx, nz) = self.grid_counts;
        let w0 = 1.0 / nx as f64;
        let h0 = (w0 / self.bump_aspect).powi(2);
        (1.0 / nz as f64) / h0
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nz) = self.grid_counts;
        if !(self.bump_aspect > 0.0 && self.bump_aspect.is_finite()) {
            return Err(Error::Parameter("bump_aspect must be positive".into()));
        }
        if !(self.amplitude_scale >= 0.0 && self.amplitude_scale.is_finite()) {
            return Err(Error::Parameter("amplitude_scale must be nonnegative".into()));
        }
        if nx == 0 || nz == 0 {
            return Err(Error::Parameter("grid_counts must be positive".into()));
        }
        if self.fill() < 1.0 - 1e-12 {
            return Err(Error::Parameter(format!(
                "grid_counts {:?}: cell height 1/nz is below the bump height (1/(nx·aspect))²",
                self.grid_counts
            )));
        }
        if self.refinement_level > 4 {
            return Err(Error::Parameter("refinement_level above 4 is not supported".into()));
        }
        Ok(())
    }
}

/// Declarative description of a graph, as read from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Flat,
    Affine {
        a: f64,
        b: f64,
    },
    /// `ψ = c·x²` on `|x| ≤ half_width`.
    Quadratic {
        c: f64,
        half_width: f64,
    },
    /// `ψ = slope·x + Σ c_k sin(ω_k x + ν_k z + φ_k)` with random coefficients.
    Perturbed {
        slope: f64,
        amplitude: f64,
        terms: u32,
        seed: u64,
    },
    Bump {
        aspect: f64,
        amplitude: f64,
        nx: u32,
        nz: u32,
        refinement: u32,
        seed: u64,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<IntrinsicGraph> {
        match *self {
            GraphSpec::Flat => Ok(make_affine(0.0, 0.0)),
            GraphSpec::Affine { a, b } => Ok(make_affine(a, b)),
            GraphSpec::Quadratic { c, half_width } => make_quadratic(c, half_width),
            GraphSpec::Perturbed {
                slope,
                amplitude,
                terms,
                seed,
            } => make_perturbed(slope, amplitude, terms as usize, seed),
            GraphSpec::Bump {
                aspect,
                amplitude,
                nx,
                nz,
                refinement,
                seed,
            } => make_bump_family(
                &BumpFamilySpec {
                    bump_aspect: aspect,
                    amplitude_scale: amplitude,
                    grid_counts: (nx, nz),
                    refinement_level: refinement,
                },
                seed,
            ),
        }
        .map(|g| g.with_spec(self.clone()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Wave {
    c: f64,
    wx: f64,
    wz: f64,
    phase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpLayer {
    pub width: f64,
    pub height: f64,
    pub period_z: f64,
    pub amp: f64,
    pub offset_x: f64,
    pub offset_z: f64,
    /// Seeds the per-column z-phase.
    pub salt: u64,
}

/// SplitMix64 finalizer mapped to `[0, 1)`.
#[inline]
fn unit_hash(k: u64) -> f64 {
    let mut z = k.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl BumpLayer {
    #[inline]
    fn eval(&self, x: f64, z: f64) -> f64 {
        let u = x / self.width + self.offset_x;
        let col = u.floor();
        let s = 2.0 * (u - col) - 1.0;
        // each column gets its own z-phase; bumps vanish at column edges so ψ stays continuous
        let v = z / self.period_z + self.offset_z + unit_hash(col as i64 as u64 ^ self.salt);
        let t = (2.0 * (v - v.floor()) - 1.0) * (self.period_z / self.height);
        let q = 1.0 - s * s - t * t;
        if q > 0.0 {
            self.amp * q * q * q
        } else {
            0.0
        }
    }
}

pub type PsiFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Field {
    Affine { a: f64, b: f64 },
    Quadratic { c: f64 },
    Waves { slope: f64, waves: Vec<Wave> },
    Bumps(Vec<BumpLayer>),
    Dilated { t: f64, inner: Box<Field> },
    Custom(Arc<PsiFn>),
}

impl Field {
    #[inline]
    fn eval(&self, x: f64, z: f64) -> f64 {
        match self {
            Field::Affine { a, b } => a * x + b,
            Field::Quadratic { c } => c * x * x,
            Field::Waves { slope, waves } => {
                let mut s = slope * x;
                for w in waves {
                    s += w.c * (w.wx * x + w.wz * z + w.phase).sin();
                }
                s
            }
            Field::Bumps(layers) => layers.iter().map(|l| l.eval(x, z)).sum(),
            Field::Dilated { t, inner } => t * inner.eval(x / t, z / (t * t)),
            Field::Custom(f) => f(x, z),
        }
    }
}

/// `Γ_ψ` together with a certified intrinsic Lipschitz constant and the domain of `ψ`.
#[derive(Clone)]
pub struct IntrinsicGraph {
    field: Field,
    pub lip_constant: f64,
    pub domain: Rect,
    pub provenance: Provenance,
    pub spec: Option<GraphSpec>,
}

impl fmt::Debug for IntrinsicGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntrinsicGraph")
            .field("lip_constant", &self.lip_constant)
            .field("domain", &self.domain)
            .field("provenance", &self.provenance)
            .field("spec", &self.spec)
            .finish()
    }
}

impl IntrinsicGraph {
    /// Wraps an arbitrary callable. The caller vouches for `lip_constant`;
    /// use [`certify`] to check it by sampling.
    pub fn from_fn<F>(f: F, lip_constant: f64, domain: Rect, provenance: Provenance) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        IntrinsicGraph {
            field: Field::Custom(Arc::new(f)),
            lip_constant,
            domain,
            provenance,
            spec: None,
        }
    }

    fn with_spec(mut self, spec: GraphSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    /// `ψ(x, z)` without a domain check.
    #[inline]
    pub fn psi(&self, x: f64, z: f64) -> f64 {
        self.field.eval(x, z)
    }

    pub fn psi_checked(&self, x: f64, z: f64) -> Result<f64> {
        if !self.domain.contains(x, z) {
            return Err(Error::OutOfDomain { x, z });
        }
        Ok(self.psi(x, z))
    }

    /// `Ψ_ψ(v) = v·Y^{ψ(v)} = (x, ψ, z + xψ/2)`.
    pub fn graph_map(&self, x: f64, z: f64) -> Result<HPoint> {
        let y = self.psi_checked(x, z)?;
        Ok(graph_point(x, z, y))
    }

    /// Derivative of `ψ` along the characteristic direction `(1, -ψ)` in `V₀`.
    pub fn dpsi(&self, x: f64, z: f64, h: f64) -> f64 {
        let p = self.psi(x, z);
        let fwd = self.psi(x + h, z - p * h);
        let bwd = self.psi(x - h, z + p * h);
        (fwd - bwd) / (2.0 * h)
    }

    /// Image of the graph under the dilation `δ_t`; `ψ_t(x, z) = t·ψ(x/t, z/t²)`.
    pub fn dilated(&self, t: f64) -> IntrinsicGraph {
        assert!(t > 0.0);
        IntrinsicGraph {
            field: Field::Dilated {
                t,
                inner: Box::new(self.field.clone()),
            },
            lip_constant: self.lip_constant,
            domain: Rect {
                x0: self.domain.x0 * t,
                x1: self.domain.x1 * t,
                z0: self.domain.z0 * t * t,
                z1: self.domain.z1 * t * t,
            },
            provenance: self.provenance,
            spec: None,
        }
    }

    pub fn bump_layers(&self) -> &[BumpLayer] {
        match &self.field {
            Field::Bumps(l) => l,
            _ => &[],
        }
    }
}

#[inline]
pub fn graph_point(x: f64, z: f64, y: f64) -> HPoint {
    HPoint::new(x, y, z + 0.5 * x * y)
}

/// Exact intrinsic Lipschitz constant of a graph whose `ψ` depends on `x` only
/// with Euclidean Lipschitz constant `m`.
pub fn lip_of_slope(m: f64) -> f64 {
    m.abs() / (1.0 + m * m).sqrt()
}

pub fn make_affine(a: f64, b: f64) -> IntrinsicGraph {
    IntrinsicGraph {
        field: Field::Affine { a, b },
        lip_constant: lip_of_slope(a),
        domain: Rect::ALL,
        provenance: Provenance::ClosedForm,
        spec: Some(GraphSpec::Affine { a, b }),
    }
}

pub fn make_quadratic(c: f64, half_width: f64) -> Result<IntrinsicGraph> {
    if !(half_width > 0.0) {
        return Err(Error::Parameter("half_width must be positive".into()));
    }
    Ok(IntrinsicGraph {
        field: Field::Quadratic { c },
        lip_constant: lip_of_slope(2.0 * c * half_width),
        domain: Rect::new(-half_width, half_width, f64::NEG_INFINITY, f64::INFINITY),
        provenance: Provenance::ClosedForm,
        spec: Some(GraphSpec::Quadratic { c, half_width }),
    })
}

/// Random smooth perturbation of a plane, certified at `L = 1/2`.
pub fn make_perturbed(slope: f64, amplitude: f64, terms: usize, seed: u64) -> Result<IntrinsicGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = terms.max(1) as f64;
    let waves = (0..terms)
        .map(|_| {
            let wx: f64 = rng.gen_range(0.5..4.0);
            let wz: f64 = rng.gen_range(0.5..4.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let c = amplitude / (n * (wx + wz.abs().sqrt())) * rng.gen_range(0.5..1.0);
            Wave {
                c,
                wx,
                wz,
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect();
    let g = IntrinsicGraph {
        field: Field::Waves { slope, waves },
        lip_constant: 0.5,
        domain: Rect::ALL,
        provenance: Provenance::Perturbation,
        spec: Some(GraphSpec::Perturbed {
            slope,
            amplitude,
            terms: terms as u32,
            seed,
        }),
    };
    certify(&g, CERT_SAMPLES, seed ^ 0x5eed)?;
    Ok(g)
}

/// Superposition of periodic `(1 - s² - t²)³₊` bumps aligned with the horizontal
/// characteristics of `V₀`, certified at `L = 1/2`.
pub fn make_bump_family(spec: &BumpFamilySpec, seed: u64) -> Result<IntrinsicGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = spec.aspect();
    let fill = spec.fill();
    let w0 = 1.0 / spec.grid_counts.0 as f64;
    let layers: Vec<BumpLayer> = (0..spec.layer_count())
        .map(|j| {
            // log-width jitter keeps the layer lattices incommensurate
            let xi = if j == 0 { 0.0 } else { rng.gen_range(-WIDTH_JITTER..WIDTH_JITTER) };
            let width = w0 * 2f64.powf(-(j as f64) - xi);
            let height = (width / alpha).powi(2);
            BumpLayer {
                width,
                height,
                period_z: fill * height,
                amp: spec.amplitude_scale * height / width,
                offset_x: rng.gen(),
                offset_z: rng.gen(),
                salt: rng.gen(),
            }
        })
        .filter(|l| l.amp > 0.0)
        .collect();
    let g = IntrinsicGraph {
        field: Field::Bumps(layers),
        lip_constant: 0.5,
        domain: Rect::ALL,
        provenance: Provenance::BumpFamily,
        spec: None,
    };
    certify(&g, CERT_SAMPLES, seed ^ 0x5eed)?;
    Ok(g)
}

pub const CERT_SAMPLES: usize = 20_000;

/// Window used to draw certification samples on unbounded domains.
pub const SAMPLE_WINDOW: Rect = Rect {
    x0: -2.0,
    x1: 2.0,
    z0: -2.0,
    z1: 2.0,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipReport {
    pub empirical: f64,
    pub witness: (HPoint, HPoint),
    pub pairs: usize,
}

/// Largest sampled `|y(p) - y(q)| / d(p, q)` over pairs of graph points.
///
/// Half the pairs are uniform in the sampling window; the rest are local pairs
/// at log-uniform scales from `1e-8` to `1`, drawn with parabolic proportions
/// and with purely horizontal or purely vertical offsets.
pub fn verify_intrinsic_lipschitz(g: &IntrinsicGraph, sample_count: usize, seed: u64) -> Result<LipReport> {
    if sample_count < 2 {
        return Err(Error::Parameter("sample_count must be at least 2".into()));
    }
    let win = g.domain.clip(&SAMPLE_WINDOW);
    if !(win.x0 < win.x1 && win.z0 <= win.z1) {
        return Err(Error::Coverage("empty sampling window".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = LipReport {
        empirical: 0.0,
        witness: (HPoint::ZERO, HPoint::ZERO),
        pairs: 0,
    };
    let draw = |rng: &mut ChaCha8Rng| {
        (
            rng.gen_range(win.x0..=win.x1),
            if win.z0 < win.z1 {
                rng.gen_range(win.z0..=win.z1)
            } else {
                win.z0
            },
        )
    };
    for k in 0..sample_count {
        let (x1, z1) = draw(&mut rng);
        let (x2, z2) = if k % 2 == 0 {
            draw(&mut rng)
        } else {
            let scale = 10f64.powf(rng.gen_range(-8.0..0.0));
            let (dx, dz) = match k % 6 {
                1 => (scale * rng.gen_range(-1.0..1.0), 0.0),
                3 => (0.0, scale * scale * rng.gen_range(-1.0..1.0)),
                _ => (
                    scale * rng.gen_range(-1.0..1.0),
                    scale * scale * rng.gen_range(-1.0..1.0),
                ),
            };
            (x1 + dx, z1 + dz)
        };
        if !g.domain.contains(x2, z2) {
            continue;
        }
        let (dx, dz) = (x2 - x1, z2 - z1);
        if dx == 0.0 && dz == 0.0 {
            continue;
        }
        let p = graph_point(x1, z1, g.psi(x1, z1));
        let q = graph_point(x2, z2, g.psi(x2, z2));
        let d = pair_distance(dx, dz, p.y, q.y);
        best.pairs += 1;
        if d > 0.0 {
            let ratio = (p.y - q.y).abs() / d;
            if ratio > best.empirical {
                best.empirical = ratio;
                best.witness = (p, q);
            }
        }
    }
    Ok(best)
}

/// `d(Ψ(v₁), Ψ(v₂))` from the offsets `v₂ - v₁ = (dx, dz)` and the heights `y₁, y₂`.
///
/// Working with offsets avoids the cancellation in `p⁻¹q` for nearby points.
pub fn pair_distance(dx: f64, dz: f64, y1: f64, y2: f64) -> f64 {
    let dy = y2 - y1;
    let z = dz + 0.5 * dx * (y1 + y2);
    let h = dx * dx + dy * dy;
    (h * h + 16.0 * z * z).sqrt().sqrt()
}

/// Fails with [`Error::Certification`] when the sampled constant exceeds the declared one.
pub fn certify(g: &IntrinsicGraph, sample_count: usize, seed: u64) -> Result<LipReport> {
    let rep = verify_intrinsic_lipschitz(g, sample_count, seed)?;
    if rep.empirical > g.lip_constant + 1e-9 {
        return Err(Error::Certification {
            empirical: rep.empirical,
            bound: g.lip_constant,
            p: rep.witness.0.to_array(),
            q: rep.witness.1.to_array(),
        });
    }
    Ok(rep)
}

/// Worst sampled ratio `|ψ(v) - ψ(vZ^s)| / ((4/(1-L))·√|s|)`; at most 1 for an L-graph.
pub fn vertical_holder_ratio(g: &IntrinsicGraph, samples: usize, seed: u64) -> f64 {
    let win = g.domain.clip(&SAMPLE_WINDOW);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = 4.0 / (1.0 - g.lip_constant);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = rng.gen_range(win.x0..=win.x1);
        let z = rng.gen_range(win.z0..=win.z1);
        let s = 10f64.powf(rng.gen_range(-10.0..1.0)) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        if !g.domain.contains(x, z + s) {
            continue;
        }
        let r = (g.psi(x, z) - g.psi(x, z + s)).abs() / (c * s.abs().sqrt());
        worst = worst.max(r);
    }
    worst
}

/// Mean of `√(1 + (∂_ψψ)²)` over a midpoint grid of `rect`, the density of the
/// graph's surface measure relative to Lebesgue measure on `V₀` up to a constant.
/// For an L-graph it lies in `[1, (1-L²)^{-1/2}]`.
pub fn surface_density(g: &IntrinsicGraph, rect: &Rect, n: usize) -> f64 {
    let h = 1e-5 * (rect.x1 - rect.x0);
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = rect.x0 + (i as f64 + 0.5) / n as f64 * (rect.x1 - rect.x0);
            let z = rect.z0 + (k as f64 + 0.5) / n as f64 * (rect.z1 - rect.z0);
            let d = g.dpsi(x, z, h);
            acc += (1.0 + d * d).sqrt();
        }
    }
    acc / (n * n) as f64
}
