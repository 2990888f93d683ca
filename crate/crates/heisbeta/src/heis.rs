//! Heisenberg group arithmetic in exponential coordinates.

use serde::{Deserialize, Serialize};

/// A point of `ℍ` as `(x, y, z)`; `z` scales like length squared.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HPoint {
    pub const ZERO: HPoint = HPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        HPoint { x, y, z }
    }

    pub fn mul(self, q: HPoint) -> HPoint {
        mul(self, q)
    }

    pub fn inv(self) -> HPoint {
        inv(self)
    }

    pub fn norm(self) -> f64 {
        koranyi_norm(self)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl std::ops::Mul for HPoint {
    type Output = HPoint;
    fn mul(self, rhs: HPoint) -> HPoint {
        mul(self, rhs)
    }
}

/// Group law `(x,y,z)(x',y',z') = (x+x', y+y', z+z'+(xy'-x'y)/2)`.
pub fn mul(p: HPoint, q: HPoint) -> HPoint {
    HPoint {
        x: p.x + q.x,
        y: p.y + q.y,
        z: p.z + q.z + 0.5 * (p.x * q.y - q.x * p.y),
    }
}

pub fn inv(p: HPoint) -> HPoint {
    HPoint {
        x: -p.x,
        y: -p.y,
        z: -p.z,
    }
}

/// `((x²+y²)² + 16z²)^{1/4}`.
pub fn koranyi_norm(p: HPoint) -> f64 {
    let h = p.x * p.x + p.y * p.y;
    (h * h + 16.0 * p.z * p.z).sqrt().sqrt()
}

/// Left-invariant Korányi distance `‖p⁻¹q‖`.
pub fn dist(p: HPoint, q: HPoint) -> f64 {
    koranyi_norm(mul(inv(p), q))
}

pub fn dilate(t: f64, p: HPoint) -> HPoint {
    debug_assert!(t >= 0.0);
    HPoint {
        x: t * p.x,
        y: t * p.y,
        z: t * t * p.z,
    }
}

/// Projection onto `V₀ = {y = 0}` along cosets of `⟨Y⟩`.
pub fn project_pi(p: HPoint) -> HPoint {
    HPoint {
        x: p.x,
        y: 0.0,
        z: p.z - 0.5 * p.x * p.y,
    }
}

/// `v⟨aX + bY⟩` parametrized by `t ↦ v·(ta, tb, 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HorizontalLine {
    pub basepoint: HPoint,
    pub direction: (f64, f64),
}

impl HorizontalLine {
    pub fn new(basepoint: HPoint, a: f64, b: f64) -> Option<Self> {
        if a == 0.0 && b == 0.0 {
            return None;
        }
        Some(HorizontalLine {
            basepoint,
            direction: (a, b),
        })
    }

    pub fn point_at(&self, t: f64) -> HPoint {
        let (a, b) = self.direction;
        mul(self.basepoint, HPoint::new(t * a, t * b, 0.0))
    }

    /// Slope of the projected line in the xy-plane; `None` when vertical.
    pub fn slope(&self) -> Option<f64> {
        let (a, b) = self.direction;
        if a == 0.0 {
            None
        } else {
            Some(b / a)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Slope {
    Finite(f64),
    Infinite,
}

/// A plane parallel to the z-axis, stored through its projection to the xy-plane:
/// `y = slope·x + offset`, or `x = offset` when the slope is infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerticalPlane {
    pub slope: Slope,
    pub offset: f64,
}

impl VerticalPlane {
    pub const V0: VerticalPlane = VerticalPlane {
        slope: Slope::Finite(0.0),
        offset: 0.0,
    };

    pub fn finite(slope: f64, offset: f64) -> Self {
        VerticalPlane {
            slope: Slope::Finite(slope),
            offset,
        }
    }

    pub fn contains(&self, p: HPoint, tol: f64) -> bool {
        self.signed_gap(p).abs() <= tol
    }

    fn signed_gap(&self, p: HPoint) -> f64 {
        match self.slope {
            Slope::Finite(a) => p.y - a * p.x - self.offset,
            Slope::Infinite => p.x - self.offset,
        }
    }

    /// Korányi distance from `p` to the plane.
    ///
    /// Along the plane the z-coordinate of `p⁻¹w` can always be cancelled, so the
    /// distance is the Euclidean distance between the projected point and line.
    pub fn distance(&self, p: HPoint) -> f64 {
        match self.slope {
            Slope::Finite(a) => self.signed_gap(p).abs() / (1.0 + a * a).sqrt(),
            Slope::Infinite => self.signed_gap(p).abs(),
        }
    }

    /// Point of the plane with coordinates `(u, t)`: `(u, a u + b, t)` or `(offset, u, t)`.
    pub fn point(&self, u: f64, t: f64) -> HPoint {
        match self.slope {
            Slope::Finite(a) => HPoint::new(u, a * u + self.offset, t),
            Slope::Infinite => HPoint::new(self.offset, u, t),
        }
    }
}
