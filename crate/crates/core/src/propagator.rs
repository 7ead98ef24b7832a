//! Compositions of step kernels: application to sections on a grid, kernel
//! matrices, Monte Carlo over start-pinned polygons, traces and the
//! domination check against a scalar comparison problem.
//!
//! Fibers are stored realified: a complex rank-`k` fiber becomes a real block
//! of size `2k` (`z ↦ (Re z, Im z)`, `A + iB ↦ [[A, −B], [B, A]]`), so every
//! kernel matrix is real. Work is split into chunks whose boundaries depend
//! only on the problem size, which makes all results independent of the
//! number of worker threads.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayViewMut2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bundle::{Bundle, Potential};
use crate::error::{invalid, Error, Result};
use crate::geometry::{vec3, GridQuadrature, Point};
use crate::kernels::StepKernelConfig;
use crate::linalg::{SmallMat, C64};
use crate::polygon::{sample_pinned_start, Partition, Segment};

/// Rows per task in matrix products.
pub const ROW_CHUNK: usize = 64;
/// Columns per task when a product has few rows.
pub const COL_CHUNK: usize = 512;
/// Monte Carlo paths per task.
pub const PATH_CHUNK: usize = 4096;

/// Realified fiber values at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub rank: usize,
    pub complex: bool,
    pub values: Vec<f64>,
}

impl Section {
    pub fn from_fn(grid: &GridQuadrature, bundle: &Bundle, f: impl Fn(&Point) -> Vec<C64>) -> Result<Self> {
        let kb = bundle.real_block();
        let mut values = Vec::with_capacity(grid.len() * kb);
        for p in &grid.nodes {
            let v = f(p);
            if v.len() != bundle.rank {
                return invalid(format!(
                    "section value has length {}, expected {}",
                    v.len(),
                    bundle.rank
                ));
            }
            values.extend(v.iter().map(|z| z.re));
            if bundle.is_complex() {
                values.extend(v.iter().map(|z| z.im));
            }
        }
        Ok(Self {
            rank: bundle.rank,
            complex: bundle.is_complex(),
            values,
        })
    }

    /// Section with the scalar `f` in every fiber component.
    pub fn from_scalar_fn(grid: &GridQuadrature, bundle: &Bundle, f: impl Fn(&Point) -> f64) -> Self {
        let k = bundle.rank;
        Self::from_fn(grid, bundle, |p| vec![C64::new(f(p), 0.0); k]).expect("lengths match")
    }

    pub fn block(&self) -> usize {
        if self.complex {
            2 * self.rank
        } else {
            self.rank
        }
    }

    pub fn node_count(&self) -> usize {
        self.values.len() / self.block()
    }

    pub fn value(&self, i: usize) -> Vec<C64> {
        let kb = self.block();
        let v = &self.values[i * kb..(i + 1) * kb];
        (0..self.rank)
            .map(|a| C64::new(v[a], if self.complex { v[self.rank + a] } else { 0.0 }))
            .collect()
    }

    /// `max_i |u(x_i) − w(x_i)|` with the Euclidean fiber norm.
    pub fn sup_distance(&self, other: &Section) -> f64 {
        let kb = self.block();
        self.values
            .chunks(kb)
            .zip(other.values.chunks(kb))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.block())
            .map(|a| a.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Node-sampled kernel `K(x_i, x_j)` in realified blocks, with the grid
/// weights needed to apply it.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub rank: usize,
    pub complex: bool,
    pub weights: Vec<f64>,
    pub values: Array2<f64>,
    /// Node pairs on each other's cut locus, valued zero.
    pub cut_pairs: usize,
}

impl KernelMatrix {
    pub fn block(&self) -> usize {
        if self.complex {
            2 * self.rank
        } else {
            self.rank
        }
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }

    /// `K(x_i, x_j)` as a fiber map.
    pub fn fiber_block(&self, i: usize, j: usize) -> SmallMat {
        let kb = self.block();
        let k = self.rank;
        let v = &self.values;
        let mut m = SmallMat::zeros(k);
        for a in 0..k {
            for b in 0..k {
                let re = v[(i * kb + a, j * kb + b)];
                let im = if self.complex {
                    v[(i * kb + k + a, j * kb + b)]
                } else {
                    0.0
                };
                m[(a, b)] = C64::new(re, im);
            }
        }
        m
    }

    /// `Σ_i w_i tr K(x_i, x_i)` (real part).
    pub fn weighted_trace(&self) -> f64 {
        let kb = self.block();
        let mut tr = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            let mut d = 0.0;
            for a in 0..kb {
                d += self.values[(i * kb + a, i * kb + a)];
            }
            tr += w * d;
        }
        if self.complex {
            tr / 2.0
        } else {
            tr
        }
    }

    /// `(K u)(x_i) = Σ_j w_j K(x_i, x_j) u(x_j)`.
    pub fn apply(&self, u: &Section) -> Section {
        let weighted = weight_vector(&self.weights, self.block(), &u.values);
        Section {
            rank: u.rank,
            complex: u.complex,
            values: par_matvec(&self.values, &weighted),
        }
    }
}

fn weight_vector(weights: &[f64], kb: usize, v: &[f64]) -> Vec<f64> {
    v.iter().enumerate().map(|(i, x)| x * weights[i / kb]).collect()
}

fn scale_columns(mut a: Array2<f64>, weights: &[f64], kb: usize) -> Array2<f64> {
    for mut row in a.rows_mut() {
        for (j, x) in row.iter_mut().enumerate() {
            *x *= weights[j / kb];
        }
    }
    a
}

fn par_matvec(a: &Array2<f64>, v: &[f64]) -> Vec<f64> {
    let m = a.nrows();
    let mut out = vec![0.0; m];
    out.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, chunk)| {
        for (r, o) in chunk.iter_mut().enumerate() {
            let row = a.row(c * ROW_CHUNK + r);
            *o = row.iter().zip(v).map(|(x, y)| x * y).sum();
        }
    });
    out
}

/// Matrix product with a fixed, size-determined task decomposition.
pub fn par_matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    assert_eq!(k, b.nrows(), "inner dimensions differ");
    let n = b.ncols();
    if m >= 2 * ROW_CHUNK {
        let mut out = vec![0.0; m * n];
        out.par_chunks_mut(ROW_CHUNK * n).enumerate().for_each(|(c, chunk)| {
            let r0 = c * ROW_CHUNK;
            let rows = chunk.len() / n;
            let mut cv = ArrayViewMut2::from_shape((rows, n), chunk).expect("chunk shape");
            general_mat_mul(1.0, &a.slice(s![r0..r0 + rows, ..]), b, 0.0, &mut cv);
        });
        Array2::from_shape_vec((m, n), out).expect("product shape")
    } else {
        let blocks: Vec<Array2<f64>> = (0..n.div_ceil(COL_CHUNK))
            .into_par_iter()
            .map(|c| {
                let c0 = c * COL_CHUNK;
                let c1 = (c0 + COL_CHUNK).min(n);
                a.dot(&b.slice(s![.., c0..c1]))
            })
            .collect();
        let mut out = Array2::zeros((m, n));
        for (c, blk) in blocks.into_iter().enumerate() {
            let c0 = c * COL_CHUNK;
            out.slice_mut(s![.., c0..c0 + blk.ncols()]).assign(&blk);
        }
        out
    }
}

fn write_block(dst: &mut [f64], stride: usize, col0: usize, m: &SmallMat, complex: bool) {
    let k = m.rank();
    for a in 0..k {
        for b in 0..k {
            let z = m[(a, b)];
            dst[a * stride + col0 + b] = z.re;
            if complex {
                dst[a * stride + col0 + k + b] = -z.im;
                dst[(k + a) * stride + col0 + b] = z.im;
                dst[(k + a) * stride + col0 + k + b] = z.re;
            }
        }
    }
}

/// Step-kernel matrix `K_t(x_i, x_j)`.
pub fn step_kernel_matrix(cfg: &StepKernelConfig, t: f64, grid: &GridQuadrature) -> Result<KernelMatrix> {
    if !(t > 0.0) {
        return invalid(format!("step duration must be positive, got {t}"));
    }
    let b = &cfg.bundle;
    let m = &b.manifold;
    let (k, kb, complex) = (b.rank, b.real_block(), b.is_complex());
    let n = grid.len();
    let dim = n * kb;
    let scalar = b.is_scalar_problem();
    let nodes = &grid.nodes;
    if scalar {
        return Ok(scalar_step_matrix(cfg, t, grid));
    }
    let mut data = vec![0.0; dim * dim];
    let cut_pairs: usize = data
        .par_chunks_mut(kb * dim)
        .enumerate()
        .map(|(i, rows)| {
            let x = &nodes[i];
            let mut cut = 0;
            for (j, y) in nodes.iter().enumerate() {
                if m.is_cut_pair(x, y) {
                    cut += 1;
                    continue;
                }
                let kij = cfg.step_kernel(t, x, y);
                write_block(rows, dim, j * kb, &kij, complex);
            }
            cut
        })
        .sum();
    Ok(KernelMatrix {
        rank: k,
        complex,
        weights: grid.weights.clone(),
        values: Array2::from_shape_vec((dim, dim), data).expect("kernel shape"),
        cut_pairs,
    })
}

/// Scalar step kernels are symmetric, so only the upper triangle is evaluated.
fn scalar_step_matrix(cfg: &StepKernelConfig, t: f64, grid: &GridQuadrature) -> KernelMatrix {
    let b = &cfg.bundle;
    let m = &b.manifold;
    let kb = b.real_block();
    let n = grid.len();
    let nodes = &grid.nodes;
    let upper: Vec<(Vec<f64>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = &nodes[i];
            let mut cut = 0;
            let row = nodes[i..]
                .iter()
                .map(|y| {
                    if m.is_cut_pair(x, y) {
                        cut += 1;
                        0.0
                    } else {
                        cfg.scalar_step_kernel_off_cut(t, x, y)
                    }
                })
                .collect();
            (row, cut)
        })
        .collect();
    let mut k = Array2::zeros((n, n));
    let mut cut_pairs = 0;
    for (i, (row, cut)) in upper.iter().enumerate() {
        cut_pairs += 2 * cut;
        for (o, &v) in row.iter().enumerate() {
            k[(i, i + o)] = v;
            k[(i + o, i)] = v;
        }
    }
    let values = if kb == 1 {
        k
    } else {
        let mut full = Array2::zeros((n * kb, n * kb));
        for ((i, j), &v) in k.indexed_iter() {
            for a in 0..kb {
                full[(i * kb + a, j * kb + a)] = v;
            }
        }
        full
    };
    KernelMatrix {
        rank: b.rank,
        complex: b.is_complex(),
        weights: grid.weights.clone(),
        values,
        cut_pairs,
    }
}

/// Step matrices for a partition, reusing the previous one for repeated durations.
struct StepCache<'a> {
    cfg: &'a StepKernelConfig,
    grid: &'a GridQuadrature,
    last: Option<(f64, KernelMatrix)>,
}

impl<'a> StepCache<'a> {
    fn new(cfg: &'a StepKernelConfig, grid: &'a GridQuadrature) -> Self {
        Self { cfg, grid, last: None }
    }

    fn get(&mut self, t: f64) -> Result<&KernelMatrix> {
        if self.last.as_ref().is_none_or(|(tl, _)| *tl != t) {
            self.last = Some((t, step_kernel_matrix(self.cfg, t, self.grid)?));
        }
        Ok(&self.last.as_ref().expect("just filled").1)
    }
}

/// Node-sampled `k_T` as the chain `K_{t₁} W K_{t₂} W ⋯ K_{t_r}`.
pub fn heat_kernel_matrix(
    cfg: &StepKernelConfig,
    partition: &Partition,
    grid: &GridQuadrature,
) -> Result<KernelMatrix> {
    let steps = partition.steps();
    if steps.is_empty() {
        return invalid("kernel matrix needs at least one step");
    }
    let mut cache = StepCache::new(cfg, grid);
    let mut acc = cache.get(steps[0])?.clone();
    let kb = acc.block();
    let mut cut_pairs = acc.cut_pairs;
    for &t in &steps[1..] {
        let kj = cache.get(t)?;
        cut_pairs = cut_pairs.max(kj.cut_pairs);
        let left = scale_columns(std::mem::take(&mut acc.values), &grid.weights, kb);
        acc.values = par_matmul(&left, &kj.values);
    }
    acc.cut_pairs = cut_pairs;
    Ok(acc)
}

/// Rows `k_T(x_s, ·)` for the given source nodes, in realified blocks.
pub fn kernel_rows(
    cfg: &StepKernelConfig,
    partition: &Partition,
    grid: &GridQuadrature,
    sources: &[usize],
) -> Result<Array2<f64>> {
    let steps = partition.steps();
    if steps.is_empty() {
        return invalid("kernel rows need at least one step");
    }
    if let Some(&bad) = sources.iter().find(|&&s| s >= grid.len()) {
        return invalid(format!("source node {bad} outside grid of {} nodes", grid.len()));
    }
    let kb = cfg.bundle.real_block();
    let mut cache = StepCache::new(cfg, grid);
    let first = cache.get(steps[0])?;
    let dim = first.values.ncols();
    let mut rows = Array2::zeros((sources.len() * kb, dim));
    for (r, &s) in sources.iter().enumerate() {
        rows.slice_mut(s![r * kb..(r + 1) * kb, ..])
            .assign(&first.values.slice(s![s * kb..(s + 1) * kb, ..]));
    }
    for &t in &steps[1..] {
        let kj = cache.get(t)?;
        let left = scale_columns(rows, &grid.weights, kb);
        rows = par_matmul(&left, &kj.values);
    }
    Ok(rows)
}

/// `Ŵ_{t₁} ⋯ Ŵ_{t_r} u` on the grid; the empty partition returns `u`.
pub fn compose_apply(
    cfg: &StepKernelConfig,
    partition: &Partition,
    u: &Section,
    grid: &GridQuadrature,
) -> Result<Section> {
    if u.block() != cfg.bundle.real_block() || u.node_count() != grid.len() {
        return invalid("section does not match bundle and grid");
    }
    let mut cache = StepCache::new(cfg, grid);
    let mut v = u.clone();
    for &t in partition.steps().iter().rev() {
        v = cache.get(t)?.apply(&v);
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: Vec<C64>,
    /// Standard error per component, from `E|z − mean|²`.
    pub stderr: Vec<f64>,
    pub paths: usize,
    /// Fraction of paths with weight zero.
    pub zero_weight_fraction: f64,
    /// Probability that some step leaves normal-coordinate range; bounds the
    /// mass neglected by zeroing such paths.
    pub escape_probability: f64,
}

#[derive(Clone)]
struct McAcc {
    sum: Vec<C64>,
    sumsq: f64,
    sumsq_comp: Vec<f64>,
    zeros: usize,
}

impl McAcc {
    fn new(k: usize) -> Self {
        Self {
            sum: vec![C64::new(0.0, 0.0); k],
            sumsq: 0.0,
            sumsq_comp: vec![0.0; k],
            zeros: 0,
        }
    }

    fn merge(&mut self, o: &McAcc) {
        for (a, b) in self.sum.iter_mut().zip(&o.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq_comp.iter_mut().zip(&o.sumsq_comp) {
            *a += b;
        }
        self.sumsq += o.sumsq;
        self.zeros += o.zeros;
    }
}

fn mc_path_value(
    cfg: &StepKernelConfig,
    partition: &Partition,
    u: &(dyn Fn(&Point) -> Vec<C64> + Sync),
    x0: Point,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<C64>> {
    let b = &cfg.bundle;
    let m = &b.manifold;
    let path = sample_pinned_start(m, x0, partition, rng);
    if !path.is_admissible() {
        return None;
    }
    let scalar = b.is_scalar_problem();
    let mut weight = 1.0;
    let mut log_fiber = 0.0;
    let mut fiber = SmallMat::identity(b.rank);
    for (j, (&t, xi)) in partition.steps().iter().zip(&path.steps).enumerate() {
        let d = vec3::norm(&xi.v);
        // Kernel density times the Jacobian of exp absorbed by the sampler.
        weight *= cfg.density_factor(d) * m.volume_distortion_at_distance(d);
        if weight == 0.0 {
            return None;
        }
        let seg = Segment {
            x: path.vertices[j],
            y: path.vertices[j + 1],
            a: 0.0,
            b: t,
            xi: *xi,
        };
        if scalar {
            log_fiber += cfg.scalar_fiber_exponent(&seg, cfg.curvature_exponent(t));
        } else {
            fiber = fiber * cfg.fiber_factor(&seg);
        }
    }
    let end = u(path.vertices.last().expect("nonempty path"));
    Some(if scalar {
        let f = weight * log_fiber.exp();
        end.iter().map(|z| z * f).collect()
    } else {
        fiber.apply(&end).iter().map(|z| z * weight).collect()
    })
}

/// Monte Carlo estimate of `(Ŵ_{t₁} ⋯ Ŵ_{t_r} u)(x₀)` over start-pinned
/// Gaussian polygons. Path `p` draws from ChaCha8 stream `p` of `seed`.
pub fn compose_apply_mc(
    cfg: &StepKernelConfig,
    partition: &Partition,
    u: &(dyn Fn(&Point) -> Vec<C64> + Sync),
    x0: Point,
    paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if paths < 2 {
        return invalid("Monte Carlo needs at least 2 paths");
    }
    let k = cfg.bundle.rank;
    if u(&x0).len() != k {
        return invalid("section value length differs from bundle rank");
    }
    let chunks = paths.div_ceil(PATH_CHUNK);
    let partial: Vec<McAcc> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = McAcc::new(k);
            let start = c * PATH_CHUNK;
            let end = (start + PATH_CHUNK).min(paths);
            for p in start..end {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(p as u64);
                match mc_path_value(cfg, partition, u, x0, &mut rng) {
                    Some(v) => {
                        for (a, z) in v.iter().enumerate() {
                            acc.sum[a] += z;
                            acc.sumsq_comp[a] += z.norm_sqr();
                            acc.sumsq += z.norm_sqr();
                        }
                    }
                    None => acc.zeros += 1,
                }
            }
            acc
        })
        .collect();
    let mut total = McAcc::new(k);
    for p in &partial {
        total.merge(p);
    }
    let n = paths as f64;
    let mean: Vec<C64> = total.sum.iter().map(|s| s / n).collect();
    let stderr = mean
        .iter()
        .zip(&total.sumsq_comp)
        .map(|(mu, &sq)| (((sq - n * mu.norm_sqr()) / (n - 1.0)).max(0.0) / n).sqrt())
        .collect();
    let m = cfg.manifold();
    let chi2 = ChiSquared::new(m.dim() as f64).expect("positive degrees of freedom");
    let r2 = m.injectivity_radius().powi(2);
    let stay: f64 = partition.steps().iter().map(|&t| chi2.cdf(r2 / (2.0 * t))).product();
    Ok(McEstimate {
        mean,
        stderr,
        paths,
        zero_weight_fraction: total.zeros as f64 / n,
        escape_probability: 1.0 - stay,
    })
}

/// `Σ_i w_i tr k_T(x_i, x_i)`.
pub fn trace_estimate(cfg: &StepKernelConfig, partition: &Partition, grid: &GridQuadrature) -> Result<f64> {
    Ok(heat_kernel_matrix(cfg, partition, grid)?.weighted_trace())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsuReport {
    /// `max_{i,j} (|k_T(x_i, x_j)|_op − k̃_T(x_i, x_j))`.
    pub max_violation: f64,
    /// `max_{i,j} k̃_T(x_i, x_j)`, for scale.
    pub max_comparison: f64,
}

/// Compares `k_T` of the bundle problem with `k̃_T` of the scalar problem
/// `Δ + v` built with the same variant, partition and grid.
pub fn hsu_compare(
    cfg: &StepKernelConfig,
    v: &Potential,
    partition: &Partition,
    grid: &GridQuadrature,
) -> Result<HsuReport> {
    let b = &cfg.bundle;
    let m = &b.manifold;
    if !v.is_scalar() {
        return invalid("comparison potential must be scalar");
    }
    for x in &grid.nodes {
        let lo = b.potential_at(x).min_eigenvalue();
        let vx = v.scalar_at(m, x).expect("scalar potential");
        if vx > lo + 1e-12 {
            return Err(Error::Precondition(format!(
                "comparison potential {vx} exceeds the smallest eigenvalue {lo} of V"
            )));
        }
    }
    let k = heat_kernel_matrix(cfg, partition, grid)?;
    let cmp_cfg = cfg.with_bundle(Bundle::scalar(*m, v.clone()));
    let kc = heat_kernel_matrix(&cmp_cfg, partition, grid)?;
    let n = grid.len();
    let rows: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst = f64::NEG_INFINITY;
            let mut top = 0.0f64;
            for j in 0..n {
                let c = kc.values[(i, j)];
                worst = worst.max(k.fiber_block(i, j).op_norm() - c);
                top = top.max(c);
            }
            (worst, top)
        })
        .collect();
    Ok(HsuReport {
        max_violation: rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max),
        max_comparison: rows.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}
