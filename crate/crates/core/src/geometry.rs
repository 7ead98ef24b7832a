//! Closed-form Riemannian geometry of the model manifolds: the circle
//! `S¹(r)`, flat rectangular tori `Rᵐ / (L₁Z × … × LₘZ)` and the round
//! sphere `S²(r)`.
//!
//! Points on the circle are angles in `[0, 2π)`, torus points are canonical
//! representatives in `[0, L₁) × … × [0, Lₘ)`, and sphere points are ambient
//! 3-vectors of length `r`. Tangent vectors are stored in length units: for
//! the flat spaces as coordinate displacements, for the sphere as ambient
//! vectors orthogonal to the base point.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Tori up to this dimension are supported.
pub const MAX_TORUS_DIM: usize = 3;

/// Relative distance to the cut locus below which shortest geodesics are
/// treated as non-unique.
pub const CUT_TOLERANCE: f64 = 1e-9;

/// Fixed axis used to build tangent frames on the sphere. Frames are
/// singular only at `±SPHERE_FRAME_AXIS`.
const SPHERE_FRAME_AXIS: [f64; 3] = [
    0.267_261_241_912_424_4,
    0.534_522_483_824_848_8,
    0.801_783_725_737_273_2,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Manifold {
    Circle { radius: f64 },
    Torus { periods: [f64; MAX_TORUS_DIM], dim: usize },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub coords: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub v: [f64; 3],
}

/// Nodes with positive weights discretizing `∫_M … dy`.
#[derive(Debug, Clone)]
pub struct GridQuadrature {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl GridQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(&Point) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn scale3(a: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn axpy3(s: f64, x: &[f64; 3], y: &[f64; 3]) -> [f64; 3] {
    [s * x[0] + y[0], s * x[1] + y[1], s * x[2] + y[2]]
}

pub(crate) mod vec3 {
    pub(crate) use super::{cross, dot, norm3 as norm, scale3 as scale};
}

/// Reduce into `[0, period)`.
#[inline]
fn reduce(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Nearest-image difference in `[-period/2, period/2)`.
#[inline]
fn wrap_centered(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

impl Manifold {
    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("circle radius must be positive, got {radius}"));
        }
        Ok(Manifold::Circle { radius })
    }

    pub fn torus(periods: &[f64]) -> Result<Self> {
        if periods.is_empty() || periods.len() > MAX_TORUS_DIM {
            return invalid(format!(
                "torus dimension must be in 1..={MAX_TORUS_DIM}, got {}",
                periods.len()
            ));
        }
        if periods.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return invalid(format!("torus periods must be positive, got {periods:?}"));
        }
        let mut p = [0.0; MAX_TORUS_DIM];
        p[..periods.len()].copy_from_slice(periods);
        Ok(Manifold::Torus {
            periods: p,
            dim: periods.len(),
        })
    }

    pub fn sphere(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("sphere radius must be positive, got {radius}"));
        }
        Ok(Manifold::Sphere { radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Manifold::Circle { .. } => 1,
            Manifold::Torus { dim, .. } => *dim,
            Manifold::Sphere { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Manifold::Circle { .. } => "circle",
            Manifold::Torus { .. } => "torus",
            Manifold::Sphere { .. } => "sphere",
        }
    }

    pub fn is_flat(&self) -> bool {
        !matches!(self, Manifold::Sphere { .. })
    }

    pub fn periods(&self) -> &[f64] {
        match self {
            Manifold::Torus { periods, dim } => &periods[..*dim],
            _ => &[],
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            Manifold::Circle { radius } | Manifold::Sphere { radius } => PI * radius,
            Manifold::Torus { periods, dim } => periods[..*dim].iter().copied().fold(f64::INFINITY, f64::min) / 2.0,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Manifold::Circle { radius } => 2.0 * PI * radius,
            Manifold::Torus { periods, dim } => periods[..*dim].iter().product(),
            Manifold::Sphere { radius } => 4.0 * PI * radius * radius,
        }
    }

    fn cut_epsilon(&self) -> f64 {
        CUT_TOLERANCE * self.injectivity_radius()
    }

    /// Canonical point from coordinates: an angle for the circle, a
    /// coordinate tuple for the torus, an ambient (nonzero) 3-vector for the
    /// sphere, which is rescaled onto the sphere.
    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        match self {
            Manifold::Circle { .. } => {
                if coords.len() != 1 {
                    return invalid("circle points take one angle");
                }
                Ok(Point {
                    coords: [reduce(coords[0], 2.0 * PI), 0.0, 0.0],
                })
            }
            Manifold::Torus { periods, dim } => {
                if coords.len() != *dim {
                    return invalid(format!("torus points take {dim} coordinates"));
                }
                let mut c = [0.0; 3];
                for i in 0..*dim {
                    c[i] = reduce(coords[i], periods[i]);
                }
                Ok(Point { coords: c })
            }
            Manifold::Sphere { radius } => {
                if coords.len() != 3 {
                    return invalid("sphere points take an ambient 3-vector");
                }
                let v = [coords[0], coords[1], coords[2]];
                let n = norm3(&v);
                if !(n > 0.0 && n.is_finite()) {
                    return invalid("sphere point must be a nonzero finite vector");
                }
                Ok(Point {
                    coords: scale3(&v, radius / n),
                })
            }
        }
    }

    /// Sphere point from polar angle (from +z) and azimuth.
    pub fn sphere_point_polar(&self, polar: f64, azimuth: f64) -> Result<Point> {
        self.point(&[polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()])
    }

    /// First angular coordinate of a point: the circle angle, `2π x₁ / L₁` on
    /// the torus, the polar angle on the sphere.
    pub fn angle(&self, x: &Point) -> f64 {
        match self {
            Manifold::Circle { .. } => x.coords[0],
            Manifold::Torus { periods, .. } => 2.0 * PI * x.coords[0] / periods[0],
            Manifold::Sphere { radius } => (x.coords[2] / radius).clamp(-1.0, 1.0).acos(),
        }
    }

    /// Nearest-image displacement from `x` to `y` in length units (flat spaces).
    fn flat_displacement(&self, x: &Point, y: &Point) -> [f64; 3] {
        match self {
            Manifold::Circle { radius } => [radius * wrap_centered(y.coords[0] - x.coords[0], 2.0 * PI), 0.0, 0.0],
            Manifold::Torus { periods, dim } => {
                let mut d = [0.0; 3];
                for i in 0..*dim {
                    d[i] = wrap_centered(y.coords[i] - x.coords[i], periods[i]);
                }
                d
            }
            Manifold::Sphere { .. } => unreachable!("sphere is not flat"),
        }
    }

    /// Great-circle angle between two sphere points, via `atan2` for accuracy
    /// at both small and near-antipodal separations.
    fn sphere_angle(x: &Point, y: &Point) -> f64 {
        let c = cross(&x.coords, &y.coords);
        norm3(&c).atan2(dot(&x.coords, &y.coords))
    }

    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        match self {
            Manifold::Sphere { radius } => radius * Self::sphere_angle(x, y),
            _ => norm3(&self.flat_displacement(x, y)),
        }
    }

    /// Orthonormal frame of `T_xM`. Only the first `dim()` vectors are
    /// meaningful; on the sphere they are ambient vectors.
    pub fn frame(&self, x: &Point) -> [[f64; 3]; 3] {
        match self {
            Manifold::Sphere { .. } => {
                let n = scale3(&x.coords, 1.0 / norm3(&x.coords));
                let mut axis = SPHERE_FRAME_AXIS;
                let mut e1 = axpy3(-dot(&axis, &n), &n, &axis);
                if norm3(&e1) < 1e-6 {
                    axis = [1.0, 0.0, 0.0];
                    e1 = axpy3(-dot(&axis, &n), &n, &axis);
                }
                let e1 = scale3(&e1, 1.0 / norm3(&e1));
                let e2 = cross(&n, &e1);
                [e1, e2, n]
            }
            _ => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Tangent vector from its coordinates in [`Manifold::frame`].
    pub fn tangent(&self, x: &Point, coords: &[f64]) -> Result<TangentVector> {
        let m = self.dim();
        if coords.len() != m {
            return invalid(format!("tangent coordinates must have length {m}"));
        }
        let v = match self {
            Manifold::Sphere { .. } => {
                let f = self.frame(x);
                axpy3(coords[1], &f[1], &scale3(&f[0], coords[0]))
            }
            _ => {
                let mut v = [0.0; 3];
                v[..m].copy_from_slice(coords);
                v
            }
        };
        Ok(TangentVector { base: *x, v })
    }

    /// Coordinates of `xi` in the frame at its base point.
    pub fn tangent_coords(&self, xi: &TangentVector) -> [f64; 3] {
        match self {
            Manifold::Sphere { .. } => {
                let f = self.frame(&xi.base);
                [dot(&xi.v, &f[0]), dot(&xi.v, &f[1]), 0.0]
            }
            _ => xi.v,
        }
    }

    /// Tangent vector at `x` given as an ambient vector (sphere) or
    /// coordinates (flat); the sphere case is projected onto `T_x`.
    pub fn tangent_ambient(&self, x: &Point, v: [f64; 3]) -> TangentVector {
        let v = match self {
            Manifold::Sphere { radius } => {
                let n = scale3(&x.coords, 1.0 / radius);
                axpy3(-dot(&v, &n), &n, &v)
            }
            _ => v,
        };
        TangentVector { base: *x, v }
    }

    pub fn norm(&self, xi: &TangentVector) -> f64 {
        norm3(&xi.v)
    }

    pub fn exp_map(&self, x: &Point, xi: &TangentVector) -> Point {
        match self {
            Manifold::Circle { radius } => Point {
                coords: [reduce(x.coords[0] + xi.v[0] / radius, 2.0 * PI), 0.0, 0.0],
            },
            Manifold::Torus { periods, dim } => {
                let mut c = [0.0; 3];
                for i in 0..*dim {
                    c[i] = reduce(x.coords[i] + xi.v[i], periods[i]);
                }
                Point { coords: c }
            }
            Manifold::Sphere { radius } => {
                let len = norm3(&xi.v);
                if len == 0.0 {
                    return *x;
                }
                let theta = len / radius;
                let dir = scale3(&xi.v, 1.0 / len);
                let p = axpy3(radius * theta.sin(), &dir, &scale3(&x.coords, theta.cos()));
                let n = norm3(&p);
                Point {
                    coords: scale3(&p, radius / n),
                }
            }
        }
    }

    fn check_cut(&self, x: &Point, y: &Point) -> Result<()> {
        let eps = self.cut_epsilon();
        match self {
            Manifold::Circle { radius } => {
                let d = self.distance(x, y);
                let limit = PI * radius - eps;
                if d >= limit {
                    return Err(Error::CutLocus { distance: d, limit });
                }
            }
            Manifold::Torus { periods, dim } => {
                let disp = self.flat_displacement(x, y);
                for i in 0..*dim {
                    let limit = periods[i] / 2.0 - eps;
                    if disp[i].abs() >= limit {
                        return Err(Error::CutLocus {
                            distance: disp[i].abs(),
                            limit,
                        });
                    }
                }
            }
            Manifold::Sphere { radius } => {
                let d = self.distance(x, y);
                let limit = PI * radius - eps;
                if d >= limit {
                    return Err(Error::CutLocus { distance: d, limit });
                }
            }
        }
        Ok(())
    }

    /// Whether `y` lies within the cut tolerance of the cut locus of `x`.
    pub fn is_cut_pair(&self, x: &Point, y: &Point) -> bool {
        self.check_cut(x, y).is_err()
    }

    pub fn log_map(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        self.check_cut(x, y)?;
        let v = match self {
            Manifold::Sphere { radius } => {
                let n = scale3(&x.coords, 1.0 / radius);
                let yn = scale3(&y.coords, 1.0 / radius);
                let theta = Self::sphere_angle(x, y);
                let perp = axpy3(-dot(&yn, &n), &n, &yn);
                let pn = norm3(&perp);
                if pn == 0.0 {
                    [0.0; 3]
                } else {
                    scale3(&perp, radius * theta / pn)
                }
            }
            _ => self.flat_displacement(x, y),
        };
        Ok(TangentVector { base: *x, v })
    }

    /// Point at time `s` on the constant-speed shortest geodesic `γ` with
    /// `γ(a) = x`, `γ(b) = y`.
    pub fn geodesic_point(&self, x: &Point, y: &Point, a: f64, b: f64, s: f64) -> Result<Point> {
        if !(a < b) {
            return Err(Error::Domain(format!("geodesic interval [{a}, {b}] is empty")));
        }
        if !(a..=b).contains(&s) {
            return Err(Error::Domain(format!("time {s} outside [{a}, {b}]")));
        }
        let xi = self.log_map(x, y)?;
        Ok(self.point_along(x, y, &xi, (s - a) / (b - a)))
    }

    /// `exp_x(f·ξ)` with exact endpoints for `f ∈ {0, 1}`.
    pub(crate) fn point_along(&self, x: &Point, y: &Point, xi: &TangentVector, f: f64) -> Point {
        if f == 0.0 {
            *x
        } else if f == 1.0 {
            *y
        } else {
            let scaled = TangentVector {
                base: xi.base,
                v: scale3(&xi.v, f),
            };
            self.exp_map(x, &scaled)
        }
    }

    /// `μ(x, y) = det(d exp_y)` at `exp_y⁻¹(x)`.
    pub fn volume_distortion(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_cut(x, y)?;
        Ok(match self {
            Manifold::Sphere { radius } => sinc(self.distance(x, y) / radius),
            _ => 1.0,
        })
    }

    /// Volume distortion as a function of geodesic distance (no cut check).
    #[inline]
    pub(crate) fn volume_distortion_at_distance(&self, d: f64) -> f64 {
        match self {
            Manifold::Sphere { radius } => sinc(d / radius),
            _ => 1.0,
        }
    }

    pub fn scalar_curvature(&self, _x: &Point) -> f64 {
        self.constant_scalar_curvature()
    }

    /// All model spaces are homogeneous, so the scalar curvature is constant.
    pub fn constant_scalar_curvature(&self) -> f64 {
        match self {
            Manifold::Sphere { radius } => 2.0 / (radius * radius),
            _ => 0.0,
        }
    }

    /// `ric_x(ξ, ξ)`.
    pub fn ricci(&self, xi: &TangentVector) -> f64 {
        match self {
            // Constant sectional curvature 1/r² in dimension 2.
            Manifold::Sphere { radius } => dot(&xi.v, &xi.v) / (radius * radius),
            _ => 0.0,
        }
    }

    /// Quadrature grid with `n` nodes (`n^m` for an m-torus).
    pub fn make_grid(&self, n: usize) -> Result<GridQuadrature> {
        if n < 2 {
            return invalid(format!("grid resolution must be >= 2, got {n}"));
        }
        match self {
            Manifold::Circle { radius } => {
                let nodes = (0..n)
                    .map(|i| Point {
                        coords: [2.0 * PI * i as f64 / n as f64, 0.0, 0.0],
                    })
                    .collect();
                Ok(GridQuadrature {
                    nodes,
                    weights: vec![2.0 * PI * radius / n as f64; n],
                })
            }
            Manifold::Torus { periods, dim } => {
                let total = n.pow(*dim as u32);
                let w = self.volume() / total as f64;
                let nodes = (0..total)
                    .map(|mut idx| {
                        // Lexicographic with the last coordinate fastest.
                        let mut c = [0.0; 3];
                        for k in (0..*dim).rev() {
                            c[k] = periods[k] * (idx % n) as f64 / n as f64;
                            idx /= n;
                        }
                        Point { coords: c }
                    })
                    .collect();
                Ok(GridQuadrature {
                    nodes,
                    weights: vec![w; total],
                })
            }
            Manifold::Sphere { radius } => {
                let golden_angle = PI * (3.0 - 5.0f64.sqrt());
                let nodes = (0..n)
                    .map(|i| {
                        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                        let rho = (1.0 - z * z).sqrt();
                        let phi = golden_angle * i as f64;
                        Point {
                            coords: [radius * rho * phi.cos(), radius * rho * phi.sin(), radius * z],
                        }
                    })
                    .collect();
                Ok(GridQuadrature {
                    nodes,
                    weights: vec![self.volume() / n as f64; n],
                })
            }
        }
    }
}

/// `sin(θ)/θ`, with its Taylor series near zero.
#[inline]
fn sinc(theta: f64) -> f64 {
    if theta.abs() < 1e-4 {
        let t2 = theta * theta;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        theta.sin() / theta
    }
}
