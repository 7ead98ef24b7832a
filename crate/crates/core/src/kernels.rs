//! One-step integral kernels and the multi-step pinned kernel `k_T`.

use std::f64::consts::PI;

use crate::bundle::Bundle;
use crate::error::{invalid, Result};
use crate::geometry::{GridQuadrature, Manifold, Point};
use crate::linalg::SmallMat;
use crate::polygon::{Partition, Segment};
use crate::quadrature::GaussLegendre;

/// Default Gauss–Legendre order for line integrals along segments.
pub const DEFAULT_QUAD_ORDER: usize = 4;

/// Smooth monotone cutoff on squared lengths: `1` on `[0, a]`, `0` on
/// `[b, ∞)` with `a = R²/8`, `b = 0.2499 R²`, `R` the injectivity radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffChi {
    pub injrad: f64,
    pub a: f64,
    pub b: f64,
}

impl CutoffChi {
    pub fn new(injrad: f64) -> Self {
        let r2 = injrad * injrad;
        Self {
            injrad,
            a: r2 / 8.0,
            b: 0.2499 * r2,
        }
    }

    pub fn for_manifold(m: &Manifold) -> Self {
        Self::new(m.injectivity_radius())
    }

    /// `χ(u) = ψ((u − a)/(b − a))`.
    pub fn eval(&self, u: f64) -> f64 {
        psi((u - self.a) / (self.b - self.a))
    }
}

#[inline]
fn g(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// `ψ(s) = g(1−s) / (g(s) + g(1−s))`, `g(s) = e^{−1/s}` for `s > 0`.
#[inline]
fn psi(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let (a, b) = (g(1.0 - s), g(s));
        a / (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `χ`, `μ^{−1/2}`, `scal/6` inside the conjugated exponent.
    V,
    /// No cutoff, no `μ`, `scal/3`.
    WHat,
    /// `μ^{(Λ−1)/2}` and `(Λ+1)/6 · scal`; `cutoff` toggles `χ`.
    Lambda { lambda: f64, cutoff: bool },
    /// No cutoff, `t/6 · (scal(x) + scal(y))` outside the potential integral.
    EndpointScal,
}

impl Variant {
    /// Parses `v`, `w-hat`, `lambda:<Λ>`, `lambda:<Λ>:nocut`, `endpoint-scal`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "v" => return Ok(Variant::V),
            "w-hat" | "what" => return Ok(Variant::WHat),
            "endpoint-scal" => return Ok(Variant::EndpointScal),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("lambda:") {
            let (num, cutoff) = match rest.strip_suffix(":nocut") {
                Some(n) => (n, false),
                None => (rest, true),
            };
            let lambda: f64 = num
                .parse()
                .map_err(|_| crate::Error::InvalidArgument(format!("bad Λ in variant {s:?}")))?;
            if !lambda.is_finite() {
                return invalid(format!("Λ must be finite in {s:?}"));
            }
            return Ok(Variant::Lambda { lambda, cutoff });
        }
        invalid(format!(
            "unknown variant {s:?}; expected v, w-hat, lambda:<x>[:nocut] or endpoint-scal"
        ))
    }

    pub fn label(&self) -> String {
        match self {
            Variant::V => "v".into(),
            Variant::WHat => "w-hat".into(),
            Variant::Lambda { lambda, cutoff: true } => format!("lambda:{lambda}"),
            Variant::Lambda { lambda, cutoff: false } => format!("lambda:{lambda}:nocut"),
            Variant::EndpointScal => "endpoint-scal".into(),
        }
    }

    pub fn uses_cutoff(&self) -> bool {
        match self {
            Variant::V => true,
            Variant::Lambda { cutoff, .. } => *cutoff,
            Variant::WHat | Variant::EndpointScal => false,
        }
    }

    /// Exponent `p` of the `μ^p` factor.
    pub fn mu_exponent(&self) -> f64 {
        match self {
            Variant::V => -0.5,
            Variant::Lambda { lambda, .. } => (lambda - 1.0) / 2.0,
            Variant::WHat | Variant::EndpointScal => 0.0,
        }
    }

    /// Coefficient `c` of `c · scal` inside the line integral.
    pub fn scal_coefficient(&self) -> f64 {
        match self {
            Variant::V => 1.0 / 6.0,
            Variant::WHat => 1.0 / 3.0,
            Variant::Lambda { lambda, .. } => (lambda + 1.0) / 6.0,
            Variant::EndpointScal => 0.0,
        }
    }
}

/// `(4πt)^{−m/2} e^{−d(x,y)²/4t}`, times `χ(d²)` when a cutoff is given.
pub fn gauss_factor(m: &Manifold, t: f64, x: &Point, y: &Point, chi: Option<&CutoffChi>) -> f64 {
    let d = m.distance(x, y);
    gauss_at_distance(m.dim(), t, d) * chi.map_or(1.0, |c| c.eval(d * d))
}

#[inline]
fn gauss_at_distance(dim: usize, t: f64, d: f64) -> f64 {
    (4.0 * PI * t).powf(-(dim as f64) / 2.0) * (-d * d / (4.0 * t)).exp()
}

#[derive(Debug, Clone)]
pub struct StepKernelConfig {
    pub bundle: Bundle,
    pub variant: Variant,
    pub chi: CutoffChi,
    gl: GaussLegendre,
}

impl StepKernelConfig {
    pub fn new(bundle: Bundle, variant: Variant) -> Self {
        let chi = CutoffChi::for_manifold(&bundle.manifold);
        Self {
            bundle,
            variant,
            chi,
            gl: GaussLegendre::new(DEFAULT_QUAD_ORDER),
        }
    }

    pub fn with_quadrature_order(mut self, q: usize) -> Result<Self> {
        if q == 0 {
            return invalid("quadrature order must be >= 1");
        }
        self.gl = GaussLegendre::new(q);
        Ok(self)
    }

    pub fn with_bundle(&self, bundle: Bundle) -> Self {
        Self {
            chi: CutoffChi::for_manifold(&bundle.manifold),
            bundle,
            variant: self.variant,
            gl: self.gl.clone(),
        }
    }

    pub fn quadrature_order(&self) -> usize {
        self.gl.nodes.len()
    }

    pub fn quadrature(&self) -> &GaussLegendre {
        &self.gl
    }

    pub fn manifold(&self) -> &Manifold {
        &self.bundle.manifold
    }

    pub fn rank(&self) -> usize {
        self.bundle.rank
    }

    /// `χ(d²) · μ^p` at geodesic distance `d`.
    pub(crate) fn density_factor(&self, d: f64) -> f64 {
        let chi = if self.variant.uses_cutoff() {
            self.chi.eval(d * d)
        } else {
            1.0
        };
        if chi == 0.0 {
            return 0.0;
        }
        let p = self.variant.mu_exponent();
        if p == 0.0 {
            chi
        } else {
            chi * self.manifold().volume_distortion_at_distance(d).powf(p)
        }
    }

    /// Curvature exponent over a step of length `t`; the model spaces have
    /// constant scalar curvature, so the line integral is exact.
    pub(crate) fn curvature_exponent(&self, t: f64) -> f64 {
        let scal = self.manifold().constant_scalar_curvature();
        match self.variant {
            Variant::EndpointScal => t / 6.0 * (scal + scal),
            v => v.scal_coefficient() * scal * t,
        }
    }

    /// `τ_t^0 · exp(∫₀ᵗ (c·scal − τ_s^t V τ_t^s) ds)` for a segment on `[0, t]`.
    pub fn fiber_factor(&self, seg: &Segment) -> SmallMat {
        let b = &self.bundle;
        let t = seg.duration();
        let curv = self.curvature_exponent(t);
        if b.is_scalar_problem() {
            return SmallMat::real_scalar(b.rank, self.scalar_fiber_exponent(seg, curv).exp());
        }
        let exponent = if b.potential.is_zero() {
            SmallMat::real_scalar(b.rank, curv)
        } else {
            SmallMat::real_scalar(b.rank, curv) - b.conjugated_potential_integral(seg, &self.gl)
        };
        b.transport(seg, seg.b, seg.a) * exponent.expm()
    }

    pub(crate) fn scalar_fiber_exponent(&self, seg: &Segment, curv: f64) -> f64 {
        let b = &self.bundle;
        let m = &b.manifold;
        if b.potential.is_zero() {
            curv
        } else if b.potential.is_constant() {
            curv - b.potential.scalar_at(m, &seg.x).unwrap_or(0.0) * seg.duration()
        } else {
            curv - self.gl.integrate(seg.a, seg.b, |s| {
                b.potential.scalar_at(m, &seg.point(m, s)).unwrap_or(0.0)
            })
        }
    }

    /// Scalar kernel value for problems with [`Bundle::is_scalar_problem`].
    pub fn scalar_step_kernel(&self, t: f64, x: &Point, y: &Point) -> f64 {
        if self.manifold().is_cut_pair(x, y) {
            return 0.0;
        }
        self.scalar_step_kernel_off_cut(t, x, y)
    }

    /// [`Self::scalar_step_kernel`] for a pair known not to be cut.
    pub(crate) fn scalar_step_kernel_off_cut(&self, t: f64, x: &Point, y: &Point) -> f64 {
        let m = self.manifold();
        let d = m.distance(x, y);
        let dens = self.density_factor(d);
        if dens == 0.0 {
            return 0.0;
        }
        let gauss = gauss_at_distance(m.dim(), t, d);
        let curv = self.curvature_exponent(t);
        let pot = &self.bundle.potential;
        let exponent = if pot.is_zero() || pot.is_constant() {
            curv - pot.scalar_at(m, x).unwrap_or(0.0) * t
        } else {
            let seg = Segment::new(m, *x, *y, 0.0, t).expect("checked for cut locus");
            self.scalar_fiber_exponent(&seg, curv)
        };
        gauss * dens * exponent.exp()
    }

    /// Step kernel `E_y → E_x`; pairs on the cut locus give the zero map.
    pub fn step_kernel(&self, t: f64, x: &Point, y: &Point) -> SmallMat {
        self.try_step_kernel(t, x, y)
            .unwrap_or_else(|_| SmallMat::zeros(self.rank()))
    }

    /// Step kernel, reporting cut-locus pairs as errors.
    pub fn try_step_kernel(&self, t: f64, x: &Point, y: &Point) -> Result<SmallMat> {
        if !(t > 0.0) {
            return invalid(format!("step duration must be positive, got {t}"));
        }
        let m = self.manifold();
        let seg = Segment::new(m, *x, *y, 0.0, t)?;
        let d = seg.length();
        let dens = self.density_factor(d);
        if dens == 0.0 {
            return Ok(SmallMat::zeros(self.rank()));
        }
        let scalar = gauss_at_distance(m.dim(), t, d) * dens;
        Ok(self.fiber_factor(&seg).scale(scalar))
    }
}

/// `k_T(x, y)`: the single step kernel for `r = 1`, otherwise the grid
/// quadrature over the `r − 1` intermediate vertices.
pub fn pinned_kernel(
    cfg: &StepKernelConfig,
    partition: &Partition,
    x: &Point,
    y: &Point,
    grid: &GridQuadrature,
) -> Result<SmallMat> {
    let steps = partition.steps();
    let r = steps.len();
    if r == 0 {
        return invalid("pinned kernel needs at least one step");
    }
    if r == 1 {
        return Ok(cfg.step_kernel(steps[0], x, y));
    }
    let nodes = &grid.nodes;
    let mut row: Vec<SmallMat> = nodes.iter().map(|z| cfg.step_kernel(steps[0], x, z)).collect();
    for &t in &steps[1..r - 1] {
        let weighted: Vec<SmallMat> = row.iter().zip(&grid.weights).map(|(k, &w)| k.scale(w)).collect();
        row = nodes
            .iter()
            .map(|z| {
                let mut acc = SmallMat::zeros(cfg.rank());
                for (zi, ki) in nodes.iter().zip(&weighted) {
                    acc = acc + *ki * cfg.step_kernel(t, zi, z);
                }
                acc
            })
            .collect();
    }
    let last = steps[r - 1];
    let mut acc = SmallMat::zeros(cfg.rank());
    for ((z, k), &w) in nodes.iter().zip(&row).zip(&grid.weights) {
        acc = acc + k.scale(w) * cfg.step_kernel(last, z, y);
    }
    Ok(acc)
}
