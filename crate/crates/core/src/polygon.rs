//! Partitions, geodesic polygons and the polygon functionals entering the
//! path integrals: energy, the normalizer `Z(T, m)`, the cutoff and measure
//! products, and Gaussian sampling of start-pinned polygons.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::geometry::{vec3, Manifold, Point, TangentVector};
use crate::kernels::CutoffChi;

/// Step durations `(t₁, …, t_r)`, all positive. The empty partition is
/// allowed and acts as the identity in compositions.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    steps: Vec<f64>,
    sigma: Vec<f64>,
}

impl Partition {
    pub fn new(steps: Vec<f64>) -> Result<Self> {
        if let Some(bad) = steps.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return invalid(format!("partition steps must be positive, got {bad}"));
        }
        let mut sigma = Vec::with_capacity(steps.len() + 1);
        let mut acc = 0.0;
        sigma.push(0.0);
        for &t in &steps {
            acc += t;
            sigma.push(acc);
        }
        Ok(Self { steps, sigma })
    }

    pub fn empty() -> Self {
        Self {
            steps: Vec::new(),
            sigma: vec![0.0],
        }
    }

    /// `r` equal steps of length `t / r`.
    pub fn uniform(t: f64, r: usize) -> Result<Self> {
        if r == 0 {
            return invalid("uniform partition needs r >= 1");
        }
        Self::new(vec![t / r as f64; r])
    }

    /// `r − 1` equal steps covering `[0, t − last]` followed by one step of
    /// length `last`.
    pub fn with_last_step(t: f64, last: f64, r: usize) -> Result<Self> {
        if r < 2 {
            return invalid("partition with a separate last step needs r >= 2");
        }
        if !(last > 0.0 && last < t) {
            return invalid(format!("last step {last} must lie in (0, {t})"));
        }
        let mut steps = vec![(t - last) / (r - 1) as f64; r - 1];
        steps.push(last);
        Self::new(steps)
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Number of steps `r`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `L(T) = Σ t_j`.
    pub fn length(&self) -> f64 {
        self.sigma[self.steps.len()]
    }

    /// `|T| = max t_j`.
    pub fn mesh(&self) -> f64 {
        self.steps.iter().copied().fold(0.0, f64::max)
    }

    /// Cumulative times `σ_0 = 0, …, σ_r = L(T)`.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn concat(&self, other: &Partition) -> Partition {
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&other.steps);
        Partition::new(steps).expect("concatenation of valid partitions")
    }

    pub fn reversed(&self) -> Partition {
        let mut steps = self.steps.clone();
        steps.reverse();
        Partition::new(steps).expect("reversal of a valid partition")
    }

    pub fn scaled(&self, factor: f64) -> Result<Partition> {
        Partition::new(self.steps.iter().map(|t| t * factor).collect())
    }

    pub fn is_uniform(&self) -> bool {
        self.steps.windows(2).all(|w| w[0] == w[1])
    }
}

/// The constant-speed shortest geodesic from `x` at time `a` to `y` at time `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub x: Point,
    pub y: Point,
    pub a: f64,
    pub b: f64,
    /// `log_x(y)`.
    pub xi: TangentVector,
}

impl Segment {
    pub fn new(m: &Manifold, x: Point, y: Point, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Domain(format!("segment interval [{a}, {b}] is empty")));
        }
        let xi = m.log_map(&x, &y)?;
        Ok(Self { x, y, a, b, xi })
    }

    pub fn duration(&self) -> f64 {
        self.b - self.a
    }

    /// Geodesic length `d(x, y)`.
    pub fn length(&self) -> f64 {
        vec3::norm(&self.xi.v)
    }

    /// `γ(s)`, with `s` clamped to `[a, b]` and exact endpoints.
    pub fn point(&self, m: &Manifold, s: f64) -> Point {
        let f = ((s - self.a) / (self.b - self.a)).clamp(0.0, 1.0);
        m.point_along(&self.x, &self.y, &self.xi, f)
    }

    /// `γ̇(a)`, in the same units as tangent vectors.
    pub fn initial_velocity(&self) -> [f64; 3] {
        vec3::scale(&self.xi.v, 1.0 / self.duration())
    }
}

/// A partition together with vertices `x₀, …, x_r`, consecutive vertices
/// joined by unique shortest geodesics.
#[derive(Debug, Clone)]
pub struct GeodesicPolygon {
    manifold: Manifold,
    partition: Partition,
    vertices: Vec<Point>,
    segments: Vec<Segment>,
}

impl GeodesicPolygon {
    pub fn new(manifold: Manifold, partition: Partition, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() != partition.len() + 1 {
            return invalid(format!(
                "polygon over {} steps needs {} vertices, got {}",
                partition.len(),
                partition.len() + 1,
                vertices.len()
            ));
        }
        let sigma = partition.sigma();
        let segments = (0..partition.len())
            .map(|j| Segment::new(&manifold, vertices[j], vertices[j + 1], sigma[j], sigma[j + 1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            manifold,
            partition,
            vertices,
            segments,
        })
    }

    /// Polygon with every vertex equal to `x`.
    pub fn constant(manifold: Manifold, partition: Partition, x: Point) -> Self {
        let vertices = vec![x; partition.len() + 1];
        Self::new(manifold, partition, vertices).expect("constant polygon is valid")
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// `γ(s)` for `s ∈ [0, L(T)]`; `γ(σ_j) = x_j` exactly.
    pub fn eval(&self, s: f64) -> Result<Point> {
        let sigma = self.partition.sigma();
        let len = self.partition.length();
        if !(0.0..=len).contains(&s) {
            return Err(Error::Domain(format!("time {s} outside [0, {len}]")));
        }
        if let Ok(j) = sigma.binary_search_by(|v| v.total_cmp(&s)) {
            return Ok(self.vertices[j]);
        }
        let j = sigma.partition_point(|&v| v < s).clamp(1, self.segments.len());
        Ok(self.segments[j - 1].point(&self.manifold, s))
    }

    /// `E(γ) = ½ Σ d(x_{j−1}, x_j)² / t_j`.
    pub fn energy(&self) -> f64 {
        0.5 * self
            .segments
            .iter()
            .map(|s| s.length().powi(2) / s.duration())
            .sum::<f64>()
    }

    /// Whether the last vertex coincides with the first.
    pub fn is_closed(&self) -> bool {
        match (self.vertices.first(), self.vertices.last()) {
            (Some(a), Some(b)) => self.manifold.distance(a, b) <= 1e-12 * self.manifold.injectivity_radius(),
            _ => false,
        }
    }

    /// A closed polygon traversed from vertex `k` instead of vertex 0.
    pub fn rotated(&self, k: usize) -> Result<Self> {
        if !self.is_closed() {
            return Err(Error::Precondition("only closed polygons can be rotated".into()));
        }
        let r = self.partition.len();
        let k = k % r.max(1);
        let mut steps = self.partition.steps().to_vec();
        steps.rotate_left(k);
        let mut vertices: Vec<Point> = self.vertices[..r].to_vec();
        vertices.rotate_left(k);
        vertices.push(vertices[0]);
        Self::new(self.manifold, Partition::new(steps)?, vertices)
    }
}

/// `Z(T, m) = ∏ (4π t_j)^{m/2}`.
pub fn normalizer(partition: &Partition, m: usize) -> f64 {
    partition
        .steps()
        .iter()
        .map(|t| (4.0 * PI * t).powf(m as f64 / 2.0))
        .product()
}

/// `χ(γ, T) = ∏ χ(d(x_{j−1}, x_j)²)`.
pub fn cutoff_product(polygon: &GeodesicPolygon, chi: &CutoffChi) -> f64 {
    polygon
        .segments()
        .iter()
        .map(|s| chi.eval(s.length().powi(2)))
        .product()
}

/// `μ(γ, T)^{(Λ−1)/2}` with `μ(γ, T) = ∏ μ(x_{j−1}, x_j)`.
pub fn measure_product(polygon: &GeodesicPolygon, lambda: f64) -> Result<f64> {
    let m = polygon.manifold();
    let mut prod = 1.0;
    for s in polygon.segments() {
        prod *= m.volume_distortion(&s.x, &s.y)?;
    }
    Ok(prod.powf((lambda - 1.0) / 2.0))
}

/// A start-pinned polygon drawn with Gaussian tangent steps.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub vertices: Vec<Point>,
    /// `ξ_j ∈ T_{x_{j−1}}M` with `x_j = exp(x_{j−1}, ξ_j)`.
    pub steps: Vec<TangentVector>,
    /// `0` for admissible paths, `-∞` if some step left normal-coordinate range.
    pub log_weight: f64,
}

impl PathSample {
    pub fn is_admissible(&self) -> bool {
        self.log_weight > f64::NEG_INFINITY
    }

    /// `½ Σ |ξ_j|² / t_j`.
    pub fn energy(&self, partition: &Partition) -> f64 {
        0.5 * self
            .steps
            .iter()
            .zip(partition.steps())
            .map(|(xi, t)| vec3::dot(&xi.v, &xi.v) / t)
            .sum::<f64>()
    }

    pub fn polygon(&self, manifold: Manifold, partition: &Partition) -> Result<GeodesicPolygon> {
        GeodesicPolygon::new(manifold, partition.clone(), self.vertices.clone())
    }
}

/// Draws `ξ_j ~ N(0, 2 t_j I_m)` in the tangent space at `x_{j−1}` and sets
/// `x_j = exp(x_{j−1}, ξ_j)`. This samples `(4π t_j)^{−m/2} e^{−|ξ|²/4t_j} dξ`
/// exactly, so `e^{−E/2}/Z` is absorbed into the proposal.
pub fn sample_pinned_start<R: Rng + ?Sized>(m: &Manifold, x0: Point, partition: &Partition, rng: &mut R) -> PathSample {
    let dim = m.dim();
    let injrad = m.injectivity_radius();
    let mut vertices = Vec::with_capacity(partition.len() + 1);
    let mut steps = Vec::with_capacity(partition.len());
    let mut log_weight = 0.0;
    vertices.push(x0);
    let mut x = x0;
    let mut coords = [0.0; 3];
    for &t in partition.steps() {
        let sd = (2.0 * t).sqrt();
        for c in coords.iter_mut().take(dim) {
            let z: f64 = rng.sample(StandardNormal);
            *c = sd * z;
        }
        let xi = m.tangent(&x, &coords[..dim]).expect("dimension matches");
        if vec3::norm(&xi.v) >= injrad {
            log_weight = f64::NEG_INFINITY;
        }
        x = m.exp_map(&x, &xi);
        steps.push(xi);
        vertices.push(x);
    }
    PathSample {
        vertices,
        steps,
        log_weight,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn partition_derived_quantities() {
        let p = Partition::new(vec![0.1, 0.3, 0.2]).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p.length() - 0.6).abs() < 1e-15);
        assert_eq!(p.mesh(), 0.3);
        assert_eq!(p.sigma()[0], 0.0);
        assert!((p.sigma()[2] - 0.4).abs() < 1e-15);
        assert_eq!(p.sigma()[3], p.length());
        assert!(Partition::new(vec![0.1, 0.0]).is_err());
        assert!(Partition::new(vec![-1.0]).is_err());
        let q = Partition::with_last_step(1.0, 0.01, 5).unwrap();
        assert!((q.length() - 1.0).abs() < 1e-15);
        assert_eq!(q.steps()[4], 0.01);
    }

    #[test]
    fn energy_examples() {
        let t = Manifold::torus(&[10.0]).unwrap();
        let p = Partition::new(vec![0.25, 0.25]).unwrap();
        let verts = vec![
            t.point(&[0.0]).unwrap(),
            t.point(&[1.0]).unwrap(),
            t.point(&[1.0]).unwrap(),
        ];
        let g = GeodesicPolygon::new(t, p.clone(), verts.clone()).unwrap();
        assert!((g.energy() - 2.0).abs() < 1e-14);
        let g2 = GeodesicPolygon::new(t, p.scaled(2.0).unwrap(), verts).unwrap();
        assert!((g2.energy() - 1.0).abs() < 1e-14);
        let c = GeodesicPolygon::constant(t, p, t.point(&[3.0]).unwrap());
        assert_eq!(c.energy(), 0.0);
    }

    #[test]
    fn normalizer_examples() {
        let p = Partition::new(vec![1.0 / (4.0 * PI)]).unwrap();
        assert!((normalizer(&p, 1) - 1.0).abs() < 1e-15);
        let q = Partition::new(vec![0.25, 0.25]).unwrap();
        assert!((normalizer(&q, 2) - 9.869_604_401_089_358).abs() < 1e-12);
        let pq = p.concat(&q);
        assert!((normalizer(&pq, 3) - normalizer(&p, 3) * normalizer(&q, 3)).abs() < 1e-12);
    }

    #[test]
    fn cutoff_product_examples() {
        let s = Manifold::sphere(1.0).unwrap();
        let chi = CutoffChi::for_manifold(&s);
        let x = s.point(&[0.0, 0.0, 1.0]).unwrap();
        let p = Partition::uniform(1.0, 3).unwrap();
        assert_eq!(cutoff_product(&GeodesicPolygon::constant(s, p, x), &chi), 1.0);

        let far = s.sphere_point_polar(PI / 2.0, 0.3).unwrap();
        let g = GeodesicPolygon::new(s, Partition::uniform(1.0, 2).unwrap(), vec![x, far, far]).unwrap();
        assert_eq!(cutoff_product(&g, &chi), 0.0);

        let mid_u = 0.5 * (chi.a + chi.b);
        let y = s.sphere_point_polar(mid_u.sqrt(), 1.0).unwrap();
        let g = GeodesicPolygon::new(s, Partition::uniform(1.0, 1).unwrap(), vec![x, y]).unwrap();
        let got = cutoff_product(&g, &chi);
        assert!((got - chi.eval(s.distance(&x, &y).powi(2))).abs() < 1e-15);
        assert!((got - 0.5).abs() < 1e-9);
    }

    #[test]
    fn measure_product_examples() {
        let s = Manifold::sphere(1.0).unwrap();
        let x = s.point(&[0.0, 0.0, 1.0]).unwrap();
        let y = s.point(&[1.0, 0.0, 0.0]).unwrap();
        let g = GeodesicPolygon::new(s, Partition::uniform(1.0, 1).unwrap(), vec![x, y]).unwrap();
        assert!((measure_product(&g, -1.0).unwrap() - PI / 2.0).abs() < 1e-14);
        assert_eq!(measure_product(&g, 1.0).unwrap(), 1.0);
        let t = Manifold::torus(&[1.0, 1.0]).unwrap();
        let g = GeodesicPolygon::new(
            t,
            Partition::uniform(1.0, 1).unwrap(),
            vec![t.point(&[0.0, 0.0]).unwrap(), t.point(&[0.3, 0.1]).unwrap()],
        )
        .unwrap();
        assert_eq!(measure_product(&g, -0.3).unwrap(), 1.0);
    }

    #[test]
    fn polygon_rejects_cut_pairs() {
        let s = Manifold::sphere(1.0).unwrap();
        let n = s.point(&[0.0, 0.0, 1.0]).unwrap();
        let south = s.point(&[0.0, 0.0, -1.0]).unwrap();
        let err = GeodesicPolygon::new(s, Partition::uniform(1.0, 1).unwrap(), vec![n, south]);
        assert!(matches!(err, Err(Error::CutLocus { .. })));
    }

    #[test]
    fn eval_hits_vertices_exactly() {
        let s = Manifold::sphere(1.0).unwrap();
        let verts = vec![
            s.point(&[0.0, 0.0, 1.0]).unwrap(),
            s.point(&[1.0, 0.0, 0.0]).unwrap(),
            s.point(&[0.0, 1.0, 0.0]).unwrap(),
        ];
        let g = GeodesicPolygon::new(s, Partition::new(vec![0.3, 0.7]).unwrap(), verts.clone()).unwrap();
        assert_eq!(g.eval(0.0).unwrap(), verts[0]);
        assert_eq!(g.eval(0.3).unwrap(), verts[1]);
        assert_eq!(g.eval(1.0).unwrap(), verts[2]);
        let mid = g.eval(0.15).unwrap();
        assert!((s.distance(&mid, &verts[0]) - PI / 4.0).abs() < 1e-12);
        assert!(g.eval(1.5).is_err());
    }

    #[test]
    fn flat_sampler_variance() {
        let t = Manifold::torus(&[100.0]).unwrap();
        let x0 = t.point(&[50.0]).unwrap();
        let p = Partition::uniform(0.3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_pinned_start(&t, x0, &p, &mut rng).steps[0].v[0])
            .collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // Var of the sample variance of a Gaussian is 2σ⁴/n.
        let se = (2.0f64).sqrt() * 0.6 / (n as f64).sqrt();
        assert!((var - 0.6).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn sphere_sampler_zero_weight_fraction() {
        let s = Manifold::sphere(1.0).unwrap();
        let x0 = s.point(&[0.0, 0.0, 1.0]).unwrap();
        let p = Partition::uniform(1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| !sample_pinned_start(&s, x0, &p, &mut rng).is_admissible())
            .count();
        // |ξ|²/2t ~ χ²₂.
        let prob = 1.0 - ChiSquared::new(2.0).unwrap().cdf(PI * PI / 2.0);
        let frac = zeros as f64 / n as f64;
        let se = (prob * (1.0 - prob) / n as f64).sqrt();
        assert!(frac > 0.0);
        assert!((frac - prob).abs() < 3.0 * se, "{frac} vs {prob}");
    }

    #[test]
    fn short_steps_stay_close() {
        let s = Manifold::sphere(1.0).unwrap();
        let x0 = s.point(&[0.0, 0.0, 1.0]).unwrap();
        let p = Partition::uniform(1e-10, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let path = sample_pinned_start(&s, x0, &p, &mut rng);
            assert!(s.distance(&x0, &path.vertices[1]) < 1e-3);
        }
    }

    proptest! {
        #[test]
        fn sampled_energy_matches_polygon(seed in 0u64..1000, r in 1usize..6) {
            let s = Manifold::sphere(1.0).unwrap();
            let x0 = s.point(&[0.2, 0.3, 0.9]).unwrap();
            let p = Partition::uniform(0.05 * r as f64, r).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let path = sample_pinned_start(&s, x0, &p, &mut rng);
            if path.is_admissible() {
                let g = path.polygon(s, &p).unwrap();
                prop_assert!((g.energy() - path.energy(&p)).abs() < 1e-9 * (1.0 + g.energy()));
                for (j, seg) in g.segments().iter().enumerate() {
                    for k in 0..3 {
                        prop_assert!((seg.xi.v[k] - path.steps[j].v[k]).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn energy_nonnegative_and_scales(a in -3.0f64..3.0, b in -3.0f64..3.0, f in 0.1f64..10.0) {
            let t = Manifold::torus(&[7.0]).unwrap();
            let p = Partition::new(vec![0.2, 0.5]).unwrap();
            let verts = vec![t.point(&[0.0]).unwrap(), t.point(&[a]).unwrap(), t.point(&[a + b]).unwrap()];
            let g = GeodesicPolygon::new(t, p.clone(), verts.clone()).unwrap();
            prop_assert!(g.energy() >= 0.0);
            let gs = GeodesicPolygon::new(t, p.scaled(f).unwrap(), verts).unwrap();
            prop_assert!((gs.energy() * f - g.energy()).abs() < 1e-9 * (1.0 + g.energy()));
        }
    }
}
