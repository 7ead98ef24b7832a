//! Vector bundles with metric connections and symmetric potentials.
//!
//! Fibers are identified with `R^k` or `C^k` through fixed frames: the
//! standard frame for product bundles and [`Manifold::frame`] for the tangent
//! bundle of the sphere. All fiber maps are [`SmallMat`]s in these frames.

use crate::error::{invalid, Error, Result};
use crate::geometry::{vec3, Manifold, Point};
use crate::linalg::{SmallMat, C64, MAX_RANK};
use crate::polygon::{GeodesicPolygon, Segment};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Connection {
    Trivial,
    /// `∇ = d + A ⊗ G` with a constant covector `A` (one entry per flat
    /// coordinate, in length units) and an anti-Hermitian generator `G`.
    ConstantForm {
        form: [f64; 3],
        generator: SmallMat,
    },
    /// Levi-Civita connection on the tangent bundle of the sphere.
    LeviCivita,
}

impl Connection {
    /// Constant form with generator block-diagonal in `[[0, −1], [1, 0]]`.
    pub fn rotation_form(form: &[f64], rank: usize) -> Result<Self> {
        if rank == 0 || !rank.is_multiple_of(2) || rank > MAX_RANK {
            return invalid(format!("rotation generator needs an even rank, got {rank}"));
        }
        let mut g = SmallMat::zeros(rank);
        for b in (0..rank).step_by(2) {
            g[(b, b + 1)] = C64::new(-1.0, 0.0);
            g[(b + 1, b)] = C64::new(1.0, 0.0);
        }
        Ok(Connection::ConstantForm {
            form: pad_form(form)?,
            generator: g,
        })
    }

    /// Constant form with generator `i·id` (a U(1) connection).
    pub fn phase_form(form: &[f64], rank: usize) -> Result<Self> {
        if rank == 0 || rank > MAX_RANK {
            return invalid(format!("rank must be in 1..={MAX_RANK}, got {rank}"));
        }
        Ok(Connection::ConstantForm {
            form: pad_form(form)?,
            generator: SmallMat::scalar(rank, C64::new(0.0, 1.0)),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Connection::Trivial => "trivial",
            Connection::ConstantForm { .. } => "constant-form",
            Connection::LeviCivita => "levi-civita",
        }
    }
}

fn pad_form(form: &[f64]) -> Result<[f64; 3]> {
    if form.is_empty() || form.len() > 3 {
        return invalid("connection form needs 1 to 3 components");
    }
    let mut f = [0.0; 3];
    f[..form.len()].copy_from_slice(form);
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `c · id`.
    Constant(f64),
    /// `cos(angle(x)) · id`, with the first angular coordinate of [`Manifold::angle`].
    CosAngle,
    /// The constant rank-2 matrix `diag(1, 2) + 0.3 · offdiag(1)`.
    MatrixDemo,
    /// `λ_min(V(x)) · id` for another potential `V` of the given rank.
    MinEigenvalue {
        inner: Box<Potential>,
        rank: usize,
    },
}

/// A potential `V + shift · id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    pub shift: f64,
}

/// Names accepted by [`Potential::by_name`].
pub const POTENTIAL_NAMES: &[&str] = &["zero", "constant", "cos-theta", "matrix-demo"];

impl Potential {
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::Zero,
            shift: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            kind: PotentialKind::Constant(c),
            shift: 0.0,
        }
    }

    pub fn cos_angle() -> Self {
        Self {
            kind: PotentialKind::CosAngle,
            shift: 0.0,
        }
    }

    pub fn matrix_demo() -> Self {
        Self {
            kind: PotentialKind::MatrixDemo,
            shift: 0.0,
        }
    }

    /// Registered potential; `value` is only used by `constant`.
    pub fn by_name(name: &str, value: f64) -> Result<Self> {
        Ok(match name {
            "zero" => Self::zero(),
            "constant" => Self::constant(value),
            "cos-theta" | "cos-angle" => Self::cos_angle(),
            "matrix-demo" => Self::matrix_demo(),
            other => {
                return invalid(format!(
                    "unknown potential {other:?}; known: {}",
                    POTENTIAL_NAMES.join(", ")
                ))
            }
        })
    }

    /// The scalar comparison potential `λ_min(V) − offset`.
    pub fn min_eigenvalue_of(inner: &Potential, rank: usize, offset: f64) -> Self {
        Self {
            kind: PotentialKind::MinEigenvalue {
                inner: Box::new(inner.clone()),
                rank,
            },
            shift: -offset,
        }
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift += shift;
        self
    }

    pub fn name(&self) -> String {
        let base = match &self.kind {
            PotentialKind::Zero => "zero".to_string(),
            PotentialKind::Constant(c) => format!("constant({c})"),
            PotentialKind::CosAngle => "cos-theta".to_string(),
            PotentialKind::MatrixDemo => "matrix-demo".to_string(),
            PotentialKind::MinEigenvalue { inner, .. } => format!("min-eig({})", inner.name()),
        };
        if self.shift != 0.0 {
            format!("{base}{:+}", self.shift)
        } else {
            base
        }
    }

    pub fn is_zero(&self) -> bool {
        self.shift == 0.0
            && match self.kind {
                PotentialKind::Zero => true,
                PotentialKind::Constant(c) => c == 0.0,
                _ => false,
            }
    }

    /// Whether `V(x)` is a multiple of the identity everywhere.
    pub fn is_scalar(&self) -> bool {
        !matches!(self.kind, PotentialKind::MatrixDemo)
    }

    pub fn is_constant(&self) -> bool {
        match &self.kind {
            PotentialKind::CosAngle => false,
            PotentialKind::MinEigenvalue { inner, .. } => inner.is_constant(),
            _ => true,
        }
    }

    pub fn required_rank(&self) -> Option<usize> {
        matches!(self.kind, PotentialKind::MatrixDemo).then_some(2)
    }

    /// `v(x)` for scalar potentials.
    pub fn scalar_at(&self, m: &Manifold, x: &Point) -> Option<f64> {
        let v = match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant(c) => *c,
            PotentialKind::CosAngle => m.angle(x).cos(),
            PotentialKind::MatrixDemo => return None,
            PotentialKind::MinEigenvalue { inner, rank } => inner.at(m, x, *rank).min_eigenvalue(),
        };
        Some(v + self.shift)
    }

    /// `V(x)` as a `rank × rank` Hermitian matrix.
    pub fn at(&self, m: &Manifold, x: &Point, rank: usize) -> SmallMat {
        match self.scalar_at(m, x) {
            Some(v) => SmallMat::real_scalar(rank, v),
            None => {
                let base = SmallMat::from_real(2, &[1.0, 0.3, 0.3, 2.0]);
                base + SmallMat::real_scalar(2, self.shift)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub manifold: Manifold,
    pub rank: usize,
    pub field: Field,
    pub connection: Connection,
    pub potential: Potential,
}

impl Bundle {
    pub fn new(
        manifold: Manifold,
        rank: usize,
        field: Field,
        connection: Connection,
        potential: Potential,
    ) -> Result<Self> {
        if rank == 0 || rank > MAX_RANK {
            return invalid(format!("bundle rank must be in 1..={MAX_RANK}, got {rank}"));
        }
        if let Some(r) = potential.required_rank() {
            if r != rank {
                return invalid(format!("potential {} needs rank {r}", potential.name()));
            }
        }
        match &connection {
            Connection::Trivial => {}
            Connection::ConstantForm { form, generator } => {
                if !manifold.is_flat() {
                    return invalid("constant-form connections need a flat base");
                }
                if form[manifold.dim()..].iter().any(|&a| a != 0.0) {
                    return invalid("connection form has more components than the base dimension");
                }
                if generator.rank() != rank {
                    return invalid("connection generator rank differs from bundle rank");
                }
                if !(*generator + generator.adjoint()).max_abs().le(&1e-12) {
                    return invalid("connection generator must be anti-Hermitian");
                }
                if field == Field::Real && !generator.is_real(0.0) {
                    return invalid("real bundles need a real generator");
                }
            }
            Connection::LeviCivita => {
                if !matches!(manifold, Manifold::Sphere { .. }) || rank != 2 || field != Field::Real {
                    return invalid("the Levi-Civita bundle is the real rank-2 tangent bundle of the sphere");
                }
            }
        }
        Ok(Self {
            manifold,
            rank,
            field,
            connection,
            potential,
        })
    }

    /// `M × R` with the given potential.
    pub fn scalar(manifold: Manifold, potential: Potential) -> Self {
        Self::new(manifold, 1, Field::Real, Connection::Trivial, potential).expect("scalar bundle is valid")
    }

    pub fn trivial(manifold: Manifold, rank: usize, potential: Potential) -> Result<Self> {
        Self::new(manifold, rank, Field::Real, Connection::Trivial, potential)
    }

    pub fn tangent_sphere(manifold: Manifold, potential: Potential) -> Result<Self> {
        Self::new(manifold, 2, Field::Real, Connection::LeviCivita, potential)
    }

    pub fn is_complex(&self) -> bool {
        self.field == Field::Complex
    }

    /// Real dimension of a fiber: `k` for real, `2k` for complex bundles.
    pub fn real_block(&self) -> usize {
        match self.field {
            Field::Real => self.rank,
            Field::Complex => 2 * self.rank,
        }
    }

    /// Whether every kernel is a scalar multiple of the identity.
    pub fn is_scalar_problem(&self) -> bool {
        self.connection == Connection::Trivial && self.potential.is_scalar()
    }

    pub fn potential_at(&self, x: &Point) -> SmallMat {
        self.potential.at(&self.manifold, x, self.rank)
    }

    /// The scalar bundle `M × R` carrying `λ_min(V) − offset`.
    pub fn comparison(&self, offset: f64) -> Bundle {
        Bundle::scalar(
            self.manifold,
            Potential::min_eigenvalue_of(&self.potential, self.rank, offset),
        )
    }

    /// `τ_s^{s2} : E_{γ(s)} → E_{γ(s2)}` along the segment.
    pub fn transport(&self, seg: &Segment, s: f64, s2: f64) -> SmallMat {
        match &self.connection {
            Connection::Trivial => SmallMat::identity(self.rank),
            Connection::ConstantForm { form, generator } => {
                let vel = seg.initial_velocity();
                let a = form[0] * vel[0] + form[1] * vel[1] + form[2] * vel[2];
                generator.scale(-a * (s2 - s)).expm()
            }
            Connection::LeviCivita => self.sphere_transport(seg, s, s2),
        }
    }

    fn sphere_transport(&self, seg: &Segment, s: f64, s2: f64) -> SmallMat {
        let m = &self.manifold;
        let p = seg.point(m, s);
        let q = seg.point(m, s2);
        let fp = m.frame(&p);
        let fq = m.frame(&q);
        let len = seg.length();
        let rotate = |v: &[f64; 3]| -> [f64; 3] {
            if len == 0.0 {
                return *v;
            }
            // Rotation about the normal of the great circle by the swept angle.
            let Manifold::Sphere { radius } = *m else {
                unreachable!()
            };
            let n = vec3::scale(&seg.x.coords, 1.0 / radius);
            let u = vec3::scale(&seg.xi.v, 1.0 / len);
            let w = vec3::cross(&n, &u);
            let phi = (len / radius) * (s2 - s) / seg.duration();
            let (sn, cs) = phi.sin_cos();
            let wxv = vec3::cross(&w, v);
            let wv = vec3::dot(&w, v);
            [
                v[0] * cs + wxv[0] * sn + w[0] * wv * (1.0 - cs),
                v[1] * cs + wxv[1] * sn + w[1] * wv * (1.0 - cs),
                v[2] * cs + wxv[2] * sn + w[2] * wv * (1.0 - cs),
            ]
        };
        let mut out = SmallMat::zeros(2);
        for j in 0..2 {
            let rv = rotate(&fp[j]);
            for i in 0..2 {
                out[(i, j)] = C64::new(vec3::dot(&fq[i], &rv), 0.0);
            }
        }
        out
    }

    /// Transport along the shortest geodesic from `x` at `a` to `y` at `b`.
    pub fn transport_between(&self, x: Point, y: Point, a: f64, b: f64, s: f64, s2: f64) -> Result<SmallMat> {
        let seg = Segment::new(&self.manifold, x, y, a, b)?;
        for t in [s, s2] {
            if !(a..=b).contains(&t) {
                return Err(Error::Domain(format!("time {t} outside [{a}, {b}]")));
            }
        }
        Ok(self.transport(&seg, s, s2))
    }

    /// Gauss–Legendre approximation of `∫_a^b τ_s^b V(γ(s)) τ_b^s ds` over a
    /// segment, as an endomorphism of `E_{γ(b)}`.
    pub fn conjugated_potential_integral(&self, seg: &Segment, gl: &GaussLegendre) -> SmallMat {
        let m = &self.manifold;
        if self.potential.scalar_at(m, &seg.x).is_some() {
            let v = gl.integrate(seg.a, seg.b, |s| {
                self.potential.scalar_at(m, &seg.point(m, s)).unwrap_or(0.0)
            });
            return SmallMat::real_scalar(self.rank, v);
        }
        let mut acc = SmallMat::zeros(self.rank);
        for (s, w) in gl.on_interval(seg.a, seg.b) {
            let tau = self.transport(seg, s, seg.b);
            let v = self.potential_at(&seg.point(m, s));
            acc = acc + (tau * v * tau.adjoint()).scale(w);
        }
        acc
    }

    /// `exp(−∫_{σ_{j−1}}^{σ_j} τ_s^L V(γ(s)) τ_L^s ds)` on `E_{γ(L)}` for
    /// segment `j` (zero-based) of the polygon.
    pub fn segment_potential_factor(
        &self,
        polygon: &GeodesicPolygon,
        j: usize,
        gl: &GaussLegendre,
    ) -> Result<SmallMat> {
        let segs = polygon.segments();
        if j >= segs.len() {
            return invalid(format!("segment index {j} out of range"));
        }
        if self.potential.is_zero() {
            return Ok(SmallMat::identity(self.rank));
        }
        let seg = &segs[j];
        let mut after = SmallMat::identity(self.rank);
        for later in &segs[j + 1..] {
            after = self.transport(later, later.a, later.b) * after;
        }
        let inner = self.conjugated_potential_integral(seg, gl);
        let integral = after * inner * after.adjoint();
        Ok(integral.scale(-1.0).expm())
    }

    /// Parallel transport once around a closed polygon, `E_{γ(0)} → E_{γ(0)}`.
    pub fn holonomy(&self, polygon: &GeodesicPolygon) -> Result<SmallMat> {
        if !polygon.is_closed() {
            return Err(Error::Precondition("holonomy needs a closed polygon".into()));
        }
        let mut hol = SmallMat::identity(self.rank);
        for seg in polygon.segments() {
            hol = self.transport(seg, seg.a, seg.b) * hol;
        }
        Ok(hol)
    }
}
