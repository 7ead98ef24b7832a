//! Reference values computed without the kernel machinery: spectral heat
//! kernels and traces, a Fourier-multiplier reference semigroup on the
//! circle, a finite-difference Jacobian of the exponential map, and the
//! Gaussian second-moment identity.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::bundle::{Bundle, Connection};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Manifold, Point};
use crate::linalg::{SmallMat, C64};
use crate::propagator::KernelMatrix;
use crate::quadrature::GaussLegendre;

/// Where a spectral series was cut and a bound on what was dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralTruncation {
    pub max_index: usize,
    pub tail_bound: f64,
}

/// Terms `e^{-x}` below this are dropped.
const TAIL_EXPONENT: f64 = 45.0;

/// Circle heat kernel per unit length from the Fourier series
/// `(1/2πr) Σ_n e^{−n²t/r²} cos(nΔθ)`.
pub fn circle_kernel_modes(radius: f64, t: f64, dtheta: f64) -> (f64, SpectralTruncation) {
    let tau = t / (radius * radius);
    let nmax = (TAIL_EXPONENT / tau).sqrt().ceil() as usize + 1;
    let mut sum = 1.0;
    for n in 1..=nmax {
        let nf = n as f64;
        sum += 2.0 * (-nf * nf * tau).exp() * (nf * dtheta).cos();
    }
    let next = (nmax + 1) as f64;
    let tail = 2.0 * (-next * next * tau).exp() / (1.0 - (-(2.0 * next + 1.0) * tau).exp());
    (
        sum / (2.0 * PI * radius),
        SpectralTruncation {
            max_index: nmax,
            tail_bound: tail / (2.0 * PI * radius),
        },
    )
}

/// Circle heat kernel per unit length from the image sum
/// `(4πt)^{−1/2} Σ_k e^{−(s + 2πrk)²/4t}`, `s` the signed arc length.
pub fn circle_kernel_images(radius: f64, t: f64, dtheta: f64) -> f64 {
    let period = 2.0 * PI * radius;
    let s = radius * (dtheta - 2.0 * PI * (dtheta / (2.0 * PI)).round());
    let kmax = ((4.0 * t * TAIL_EXPONENT).sqrt() / period).ceil() as i64 + 1;
    let norm = (4.0 * PI * t).sqrt();
    (-kmax..=kmax)
        .map(|k| {
            let d = s + period * k as f64;
            (-d * d / (4.0 * t)).exp()
        })
        .sum::<f64>()
        / norm
}

/// Legendre series `Σ_l (2l+1)/(4πr²) e^{−l(l+1)t/r²} P_l(cos θ)`.
pub fn sphere_kernel(radius: f64, t: f64, cos_theta: f64) -> (f64, SpectralTruncation) {
    let tau = t / (radius * radius);
    let lmax = sphere_degree_cutoff(tau);
    let c = cos_theta.clamp(-1.0, 1.0);
    let (mut p_prev, mut p) = (1.0, c);
    let mut sum = 1.0 + 3.0 * (-2.0 * tau).exp() * c;
    for l in 1..lmax {
        let lf = l as f64;
        let p_next = ((2.0 * lf + 1.0) * c * p - lf * p_prev) / (lf + 1.0);
        p_prev = p;
        p = p_next;
        let n = lf + 1.0;
        sum += (2.0 * n + 1.0) * (-n * (n + 1.0) * tau).exp() * p;
    }
    let l = lmax as f64 + 1.0;
    (
        sum / (4.0 * PI * radius * radius),
        SpectralTruncation {
            max_index: lmax,
            tail_bound: (-l * (l + 1.0) * tau).exp() / tau / (4.0 * PI * radius * radius),
        },
    )
}

fn sphere_degree_cutoff(tau: f64) -> usize {
    // Smallest L with e^{−L(L+1)τ}/τ below e^{−45}, which dominates the tail.
    let target = TAIL_EXPONENT + (1.0 / tau).ln().max(0.0);
    let l = (-0.5 + (0.25 + target / tau).sqrt()).ceil() as usize;
    l.max(2)
}

/// Exact heat kernel of the Laplacian on the model manifolds.
pub fn spectral_kernel(m: &Manifold, t: f64, x: &Point, y: &Point) -> f64 {
    match m {
        Manifold::Circle { radius } => circle_kernel_modes(*radius, t, y.coords[0] - x.coords[0]).0,
        Manifold::Torus { periods, dim } => (0..*dim)
            .map(|i| {
                let l = periods[i];
                circle_kernel_modes(l / (2.0 * PI), t, 2.0 * PI * (y.coords[i] - x.coords[i]) / l).0
            })
            .product(),
        Manifold::Sphere { radius } => {
            let c =
                (x.coords[0] * y.coords[0] + x.coords[1] * y.coords[1] + x.coords[2] * y.coords[2]) / (radius * radius);
            sphere_kernel(*radius, t, c).0
        }
    }
}

/// `Tr e^{−tΔ}` on the model manifolds.
pub fn spectral_trace(m: &Manifold, t: f64) -> f64 {
    let circle = |radius: f64| {
        let tau = t / (radius * radius);
        let nmax = (TAIL_EXPONENT / tau).sqrt().ceil() as usize + 1;
        1.0 + 2.0 * (1..=nmax).map(|n| (-((n * n) as f64) * tau).exp()).sum::<f64>()
    };
    match m {
        Manifold::Circle { radius } => circle(*radius),
        Manifold::Torus { periods, dim } => periods[..*dim].iter().map(|l| circle(l / (2.0 * PI))).product(),
        Manifold::Sphere { radius } => {
            let tau = t / (radius * radius);
            let lmax = sphere_degree_cutoff(tau);
            (0..=lmax)
                .map(|l| {
                    let lf = l as f64;
                    (2.0 * lf + 1.0) * (-lf * (lf + 1.0) * tau).exp()
                })
                .sum()
        }
    }
}

/// Reference `e^{−tH}` for a bundle over the circle, with `∇*∇` discretized
/// as a Fourier multiplier on `n` equispaced nodes and `V` acting pointwise.
/// Returned as kernel values on the grid of [`Manifold::make_grid`].
pub fn operator_reference_1d(bundle: &Bundle, n: usize, t: f64) -> Result<KernelMatrix> {
    let Manifold::Circle { radius } = bundle.manifold else {
        return invalid("the reference semigroup is only available on the circle");
    };
    if n < 16 {
        return invalid(format!("reference grid needs at least 16 nodes, got {n}"));
    }
    let k = bundle.rank;
    // ∇ = d/dx + a·G; on the eigenvector of G with eigenvalue iλ this is
    // d/dx + iaλ, whose square has Fourier symbol (n/r + aλ)².
    let (lambdas, basis) = match &bundle.connection {
        Connection::Trivial => (vec![0.0; k], SmallMat::identity(k).to_dmatrix()),
        Connection::ConstantForm { form, generator } => {
            let h = generator.scale_c(C64::new(0.0, -1.0)).to_dmatrix();
            let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
            let eig = SymmetricEigen::new(h);
            let a = form[0];
            (eig.eigenvalues.iter().map(|l| a * l).collect(), eig.eigenvectors)
        }
        Connection::LeviCivita => return invalid("Levi-Civita bundles live on the sphere"),
    };
    let grid = bundle.manifold.make_grid(n)?;
    let half = n / 2;
    let laplacians: Vec<DMatrix<C64>> = lambdas
        .iter()
        .map(|&shift| {
            let symbol = |m: i64| (m as f64 / radius + shift).powi(2);
            DMatrix::from_fn(n, n, |i, j| {
                let dtheta = 2.0 * PI * (i as f64 - j as f64) / n as f64;
                let mut acc = C64::new(0.0, 0.0);
                for m in -(half as i64)..=(half as i64) {
                    let w = if n.is_multiple_of(2) && m.unsigned_abs() as usize == half {
                        0.5
                    } else {
                        1.0
                    };
                    acc += C64::from_polar(w * symbol(m), m as f64 * dtheta);
                }
                acc / n as f64
            })
        })
        .collect();
    let dim = n * k;
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            for a in 0..k {
                for b in 0..k {
                    let mut v = C64::new(0.0, 0.0);
                    for (c, lap) in laplacians.iter().enumerate() {
                        v += basis[(a, c)] * lap[(i, j)] * basis[(b, c)].conj();
                    }
                    h[(i * k + a, j * k + b)] = v;
                }
            }
        }
        let vx = bundle.potential_at(&grid.nodes[i]);
        for a in 0..k {
            for b in 0..k {
                h[(i * k + a, i * k + b)] += vx[(a, b)];
            }
        }
    }
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let u = &eig.eigenvectors;
    let decay = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new((-t * l).exp(), 0.0)));
    let e = u * decay * u.adjoint();
    let w = grid.weights[0];
    let complex = bundle.is_complex();
    let kb = bundle.real_block();
    let mut values = Array2::zeros((n * kb, n * kb));
    for i in 0..n {
        for j in 0..n {
            for a in 0..k {
                for b in 0..k {
                    let z = e[(i * k + a, j * k + b)] / w;
                    values[(i * kb + a, j * kb + b)] = z.re;
                    if complex {
                        values[(i * kb + a, j * kb + k + b)] = -z.im;
                        values[(i * kb + k + a, j * kb + b)] = z.im;
                        values[(i * kb + k + a, j * kb + k + b)] = z.re;
                    }
                }
            }
        }
    }
    Ok(KernelMatrix {
        rank: k,
        complex,
        weights: grid.weights,
        values,
        cut_pairs: 0,
    })
}

/// `|det d exp_y|` at `log_y(x)` by central differences with step
/// `1e−5 · injrad`, in orthonormal frames at `y` and `x`.
pub fn jacobian_mu_oracle(m: &Manifold, x: &Point, y: &Point) -> Result<f64> {
    let xi = m.log_map(y, x)?;
    let dim = m.dim();
    let h = 1e-5 * m.injectivity_radius();
    let base = m.tangent_coords(&xi);
    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    for kcol in 0..dim {
        let mut plus = base;
        let mut minus = base;
        plus[kcol] += h;
        minus[kcol] -= h;
        let p = m.exp_map(y, &m.tangent(y, &plus[..dim])?);
        let q = m.exp_map(y, &m.tangent(y, &minus[..dim])?);
        let vp = m.tangent_coords(&m.log_map(x, &p)?);
        let vq = m.tangent_coords(&m.log_map(x, &q)?);
        for r in 0..dim {
            jac[(r, kcol)] = (vp[r] - vq[r]) / (2.0 * h);
        }
    }
    Ok(jac.determinant().abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMoment {
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
    /// Panels per axis used by the final quadrature.
    pub panels: usize,
}

/// Compares `∫ g_t B(ξ,ξ) f(t,ξ) dξ` with `2t·tr(B) ∫ g_t f(t,ξ) dξ`,
/// `g_t = (4πt)^{−m/2} e^{−|ξ|²/4t}`, for `m ∈ {1, 2}`.
///
/// Integrals run over the box `[−12√t, 12√t]^m`, where the Gaussian tail is
/// below `e^{−36}`, with composite Gauss–Legendre panels doubled until two
/// successive results agree to `1e−14` relative.
pub fn gauss_moment_check(form: &[f64], m: usize, f: &dyn Fn(f64, &[f64]) -> f64, t: f64) -> Result<GaussMoment> {
    if !(1..=2).contains(&m) {
        return invalid(format!("moment check supports m = 1 or 2, got {m}"));
    }
    if form.len() != m * m {
        return invalid("bilinear form must be m × m");
    }
    if (0..m).any(|i| (0..m).any(|j| (form[i * m + j] - form[j * m + i]).abs() > 1e-15)) {
        return invalid("bilinear form must be symmetric");
    }
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    let trace: f64 = (0..m).map(|i| form[i * m + i]).sum();
    let half = 12.0 * t.sqrt();
    let gl = GaussLegendre::new(20);
    let norm = (4.0 * PI * t).powf(-(m as f64) / 2.0);
    let integrate = |panels: usize| -> (f64, f64) {
        let width = 2.0 * half / panels as f64;
        let axis: Vec<(f64, f64)> = (0..panels)
            .flat_map(|p| {
                let a = -half + p as f64 * width;
                gl.on_interval(a, a + width).collect::<Vec<_>>()
            })
            .collect();
        let (mut moment, mut mass) = (0.0, 0.0);
        let mut visit = |xi: &[f64], w: f64| {
            let r2: f64 = xi.iter().map(|v| v * v).sum();
            let g = norm * (-r2 / (4.0 * t)).exp();
            let bq: f64 = (0..m)
                .map(|i| (0..m).map(|j| form[i * m + j] * xi[i] * xi[j]).sum::<f64>())
                .sum();
            let fv = f(t, xi);
            moment += w * g * bq * fv;
            mass += w * g * fv;
        };
        if m == 1 {
            for &(x, w) in &axis {
                visit(&[x], w);
            }
        } else {
            for &(x, wx) in &axis {
                for &(y, wy) in &axis {
                    visit(&[x, y], wx * wy);
                }
            }
        }
        (moment, 2.0 * t * trace * mass)
    };
    let mut panels = 4;
    let mut prev = integrate(panels);
    loop {
        let next = integrate(2 * panels);
        panels *= 2;
        let scale = next.0.abs().max(next.1.abs()).max(f64::MIN_POSITIVE);
        let change = (next.0 - prev.0).abs().max((next.1 - prev.1).abs());
        prev = next;
        if change <= 1e-12 * scale || panels >= 256 {
            break;
        }
    }
    let (lhs, rhs) = prev;
    if !(lhs.is_finite() && rhs.is_finite()) {
        return Err(Error::Domain("moment integrals are not finite".into()));
    }
    Ok(GaussMoment {
        lhs,
        rhs,
        diff: (lhs - rhs).abs(),
        panels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{Field, Potential};
    use crate::stats::{loglog_slope, logspace};

    #[test]
    fn theta_duality() {
        for &t in &logspace(0.01, 10.0, 25) {
            for &d in &[0.0, 0.3, 1.0, 2.5, PI, 4.0] {
                let (a, trunc) = circle_kernel_modes(1.0, t, d);
                let b = circle_kernel_images(1.0, t, d);
                assert!((a - b).abs() < 1e-13, "t={t} d={d}: {a} vs {b}");
                assert!(trunc.tail_bound <= 1e-12 * a.abs().max(1e-300) || trunc.tail_bound < 1e-18);
            }
        }
        assert!((circle_kernel_modes(1.0, 0.5, 0.0).0 - 0.398_942_3).abs() < 1e-7);
    }

    #[test]
    fn torus_kernel_is_product() {
        let t = Manifold::torus(&[1.0, 1.0]).unwrap();
        let c = Manifold::torus(&[1.0]).unwrap();
        let x = t.point(&[0.1, 0.7]).unwrap();
        let y = t.point(&[0.4, 0.2]).unwrap();
        let k = spectral_kernel(&t, 0.05, &x, &y);
        let k1 = spectral_kernel(&c, 0.05, &c.point(&[0.1]).unwrap(), &c.point(&[0.4]).unwrap());
        let k2 = spectral_kernel(&c, 0.05, &c.point(&[0.7]).unwrap(), &c.point(&[0.2]).unwrap());
        assert!((k - k1 * k2).abs() < 1e-14);
    }

    #[test]
    fn sphere_kernel_has_unit_mass() {
        let s = Manifold::sphere(1.0).unwrap();
        let grid = s.make_grid(4096).unwrap();
        let x = s.point(&[0.2, -0.4, 0.7]).unwrap();
        let mass = grid.integrate(|y| spectral_kernel(&s, 0.3, &x, y));
        assert!((mass - 1.0).abs() < 1e-3);
    }

    #[test]
    fn traces() {
        let c = Manifold::circle(1.0).unwrap();
        assert!((spectral_trace(&c, 0.5) - 2.506_628).abs() < 1e-6);
        assert!((spectral_trace(&c, 50.0) - 1.0).abs() < 1e-20 + 2.0 * (-50.0f64).exp());
        let s = Manifold::sphere(1.0).unwrap();
        let direct = 1.0 + 3.0 * (-2.0f64).exp() + 5.0 * (-6.0f64).exp() + 7.0 * (-12.0f64).exp();
        assert!((spectral_trace(&s, 1.0) - direct).abs() < 1e-7);
        assert!((spectral_trace(&s, 1.0) - 1.418_443).abs() < 1e-6);
        let t = Manifold::torus(&[1.0, 2.0]).unwrap();
        let a = spectral_trace(&Manifold::torus(&[1.0]).unwrap(), 0.1);
        let b = spectral_trace(&Manifold::torus(&[2.0]).unwrap(), 0.1);
        assert!((spectral_trace(&t, 0.1) - a * b).abs() < 1e-12);
    }

    #[test]
    fn sphere_truncation_is_small() {
        for &t in &[0.005, 0.05, 0.3, 1.0] {
            let (v, tr) = sphere_kernel(1.0, t, 1.0);
            assert!(tr.tail_bound <= 1e-12 * v, "t={t}");
        }
    }

    #[test]
    fn reference_matches_spectral_kernel() {
        let c = Manifold::circle(1.0).unwrap();
        let b = Bundle::scalar(c, Potential::zero());
        let r = operator_reference_1d(&b, 256, 0.5).unwrap();
        let grid = c.make_grid(256).unwrap();
        let mut worst: f64 = 0.0;
        for i in (0..256).step_by(7) {
            for j in 0..256 {
                let exact = spectral_kernel(&c, 0.5, &grid.nodes[i], &grid.nodes[j]);
                worst = worst.max((r.values[(i, j)] - exact).abs());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn reference_constant_potential_and_direct_sum() {
        let c = Manifold::circle(1.0).unwrap();
        let r0 = operator_reference_1d(&Bundle::scalar(c, Potential::zero()), 32, 0.4).unwrap();
        let rc = operator_reference_1d(&Bundle::scalar(c, Potential::constant(0.9)), 32, 0.4).unwrap();
        let f = (-0.36f64).exp();
        assert!(rc
            .values
            .iter()
            .zip(r0.values.iter())
            .all(|(a, b)| (a - f * b).abs() < 1e-12));

        let one = operator_reference_1d(&Bundle::scalar(c, Potential::cos_angle()), 32, 0.4).unwrap();
        let two = operator_reference_1d(&Bundle::trivial(c, 2, Potential::cos_angle()).unwrap(), 32, 0.4).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                let blk = two.fiber_block(i, j);
                assert!((blk[(0, 0)].re - one.values[(i, j)]).abs() < 1e-12);
                assert!((blk[(1, 1)].re - one.values[(i, j)]).abs() < 1e-12);
                assert!(blk[(0, 1)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn reference_phase_bundle_trace() {
        let c = Manifold::circle(1.0).unwrap();
        let conn = Connection::phase_form(&[0.3], 1).unwrap();
        let b = Bundle::new(c, 1, Field::Complex, conn, Potential::zero()).unwrap();
        let r = operator_reference_1d(&b, 64, 0.5).unwrap();
        let exact: f64 = (-40..=40).map(|n| (-0.5 * (n as f64 + 0.3).powi(2)).exp()).sum();
        assert!((r.weighted_trace() - exact).abs() < 1e-10);
    }

    #[test]
    fn jacobian_oracle_examples() {
        let s = Manifold::sphere(1.0).unwrap();
        let n = s.point(&[0.0, 0.0, 1.0]).unwrap();
        let e = s.point(&[0.0, 1.0, 0.0]).unwrap();
        assert!((jacobian_mu_oracle(&s, &n, &n).unwrap() - 1.0).abs() < 1e-8);
        let mu = jacobian_mu_oracle(&s, &e, &n).unwrap();
        #[allow(clippy::approx_constant)]
        let frozen = 0.636_620;
        assert!((mu - frozen).abs() < 1e-6);
        assert!((mu - s.volume_distortion(&e, &n).unwrap()).abs() < 1e-6);
        let t = Manifold::torus(&[1.0, 2.0]).unwrap();
        let a = t.point(&[0.1, 0.3]).unwrap();
        let b = t.point(&[0.4, 1.9]).unwrap();
        assert!((jacobian_mu_oracle(&t, &a, &b).unwrap() - 1.0).abs() < 1e-8);
        let south = s.point(&[0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(
            jacobian_mu_oracle(&s, &south, &n),
            Err(Error::CutLocus { .. })
        ));
    }

    #[test]
    fn jacobian_matches_closed_form_on_sphere() {
        let s = Manifold::sphere(2.0).unwrap();
        let y = s.point(&[0.3, 0.2, 0.9]).unwrap();
        for polar in [0.2, 0.9, 1.7, 2.6] {
            let x = s.sphere_point_polar(polar, 0.4).unwrap();
            let fd = jacobian_mu_oracle(&s, &x, &y).unwrap();
            let cf = s.volume_distortion(&x, &y).unwrap();
            assert!((fd - cf).abs() < 1e-6, "{fd} vs {cf}");
        }
    }

    #[test]
    fn gauss_moment_trivial_cases() {
        let one = |_: f64, _: &[f64]| 1.0;
        for t in [1e-3, 1e-2, 0.1] {
            let r = gauss_moment_check(&[1.0, 0.0, 0.0, 1.0], 2, &one, t).unwrap();
            assert!(
                (r.lhs - 4.0 * t).abs() <= 1e-12 && (r.rhs - 4.0 * t).abs() <= 1e-12,
                "{r:?}"
            );
            assert!(r.diff <= 1e-12);
        }
        let odd = |_: f64, xi: &[f64]| xi[0] / (1.0 + xi[0] * xi[0] + xi[1] * xi[1]);
        let r = gauss_moment_check(&[2.0, 0.0, 0.0, 0.5], 2, &odd, 0.05).unwrap();
        assert!(r.lhs.abs() < 1e-15 && r.rhs.abs() < 1e-15);
    }

    #[test]
    fn gauss_moment_generic_slope() {
        let f = |_: f64, xi: &[f64]| 1.0 / (1.0 + (xi[0] - 1.0).powi(2) + xi[1] * xi[1]);
        let ts = logspace(1e-3, 1e-1, 9);
        let diffs: Vec<f64> = ts
            .iter()
            .map(|&t| gauss_moment_check(&[1.0, 0.0, 0.0, -1.0], 2, &f, t).unwrap().diff)
            .collect();
        let slope = loglog_slope(&ts, &diffs).unwrap();
        assert!(slope >= 1.4, "slope {slope}");
    }
}
