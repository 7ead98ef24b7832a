//! Named experiments. Each returns its CSV and a pass/fail verdict.

use std::f64::consts::PI;

use polyheat::oracle::{gauss_moment_check, operator_reference_1d, spectral_kernel, spectral_trace};
use polyheat::propagator::{
    compose_apply, compose_apply_mc, heat_kernel_matrix, hsu_compare, kernel_rows, step_kernel_matrix,
};
use polyheat::stats::{loglog_slope, logspace};
use polyheat::{
    Bundle, Connection, GeodesicPolygon, GridQuadrature, Manifold, Partition, Point, Potential, Section,
    StepKernelConfig, C64,
};

use crate::config::{Config, ConfigError, ConfigResult};
use crate::csv::{Cell, Csv};

pub const EXPERIMENTS: &[&str] = &["converge", "hsu", "trace", "lemma-a", "kernel", "propagate", "holonomy"];

#[derive(Debug, Clone)]
pub struct Outcome {
    pub csv: String,
    pub passed: bool,
    pub summary: String,
}

pub fn run(cfg: &Config) -> ConfigResult<Outcome> {
    match cfg.require("experiment")? {
        "converge" => run_converge(cfg),
        "hsu" => run_hsu(cfg),
        "trace" => run_trace(cfg),
        "lemma-a" => run_lemma_a(cfg),
        "kernel" => run_kernel(cfg),
        "propagate" => run_propagate(cfg),
        "holonomy" => run_holonomy(cfg),
        other => Err(ConfigError::Value {
            key: "experiment".into(),
            msg: format!("unknown experiment {other:?}; known: {}", EXPERIMENTS.join(", ")),
        }),
    }
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.into(),
        msg: msg.into(),
    }
}

/// `e^{−cT}` when the exact kernel is the scalar heat kernel times a
/// constant, `None` when no closed form is available.
fn scalar_factor(b: &Bundle, t: f64) -> Option<f64> {
    if b.connection != Connection::Trivial || !b.potential.is_scalar() || !b.potential.is_constant() {
        return None;
    }
    let x = b.manifold.make_grid(2).ok()?.nodes[0];
    Some((-b.potential.scalar_at(&b.manifold, &x)? * t).exp())
}

/// Named test sections and, for eigenfunctions of the Laplacian, their eigenvalue.
type SectionFn = Box<dyn Fn(&Point) -> f64 + Sync>;

fn section_fn(name: &str, m: &Manifold) -> ConfigResult<(SectionFn, Option<f64>)> {
    let m = *m;
    Ok(match name {
        "constant" => (Box::new(|_| 1.0), Some(0.0)),
        "first-mode" => match m {
            Manifold::Circle { radius } => (Box::new(move |p| m.angle(p).cos()), Some(radius.powi(-2))),
            Manifold::Torus { periods, .. } => (
                Box::new(move |p| m.angle(p).cos()),
                Some((2.0 * PI / periods[0]).powi(2)),
            ),
            Manifold::Sphere { radius } => (Box::new(move |p| p.coords[2] / radius), Some(2.0 / (radius * radius))),
        },
        "smooth" => (Box::new(move |p| m.angle(p).sin().exp()), None),
        other => return Err(bad("propagate.u", format!("unknown section {other:?}"))),
    })
}

fn sources(cfg: &Config, n: usize) -> ConfigResult<Option<Vec<usize>>> {
    let Some(count) = cfg.get("kernel.sources") else {
        return Ok(None);
    };
    let count: usize = count.parse().map_err(|e| bad("kernel.sources", format!("{e}")))?;
    if count == 0 || count > n {
        return Err(bad("kernel.sources", format!("need 1..={n} sources")));
    }
    Ok(Some((0..count).map(|i| i * n / count).collect()))
}

/// Scalar kernel values `k(x_s, x_j)` for the chosen sources (all nodes when `None`).
fn scalar_rows(
    cfg: &StepKernelConfig,
    p: &Partition,
    grid: &GridQuadrature,
    src: &Option<Vec<usize>>,
) -> ConfigResult<Vec<Vec<f64>>> {
    if cfg.bundle.real_block() != 1 {
        return Err(bad("bundle.rank", "kernel comparison needs a real line bundle"));
    }
    Ok(match src {
        Some(s) => {
            let rows = kernel_rows(cfg, p, grid, s)?;
            rows.rows().into_iter().map(|r| r.to_vec()).collect()
        }
        None => {
            let k = heat_kernel_matrix(cfg, p, grid)?;
            k.values.rows().into_iter().map(|r| r.to_vec()).collect()
        }
    })
}

fn oracle_rows(m: &Manifold, t: f64, factor: f64, grid: &GridQuadrature, src: &Option<Vec<usize>>) -> Vec<Vec<f64>> {
    let idx: Vec<usize> = src.clone().unwrap_or_else(|| (0..grid.len()).collect());
    idx.iter()
        .map(|&i| {
            grid.nodes
                .iter()
                .map(|y| factor * spectral_kernel(m, t, &grid.nodes[i], y))
                .collect()
        })
        .collect()
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

fn sup_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn exact_factor(b: &Bundle, t: f64) -> ConfigResult<f64> {
    scalar_factor(b, t).ok_or_else(|| bad("bundle.connection", "no closed-form oracle for this bundle"))
}

pub fn run_converge(cfg: &Config) -> ConfigResult<Outcome> {
    match cfg.str_or("converge.mode", "kernel") {
        "kernel" => converge_kernel(cfg),
        "section" => converge_section(cfg),
        "variants" => converge_variants(cfg),
        other => Err(bad("converge.mode", format!("unknown mode {other:?}"))),
    }
}

fn ladder_verdict(cfg: &Config, errors: &[f64], what: &str) -> ConfigResult<(bool, String)> {
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let last = *errors.last().expect("non-empty ladder");
    let mut passed = true;
    if cfg.bool_or("accept.monotone", false)? && !monotone {
        passed = false;
    }
    let limit = cfg.f64_or("accept.rel_error", f64::INFINITY)?;
    passed &= last <= limit;
    Ok((
        passed,
        format!("final {what} {last:e} (limit {limit:e}), strictly decreasing: {monotone}"),
    ))
}

fn converge_kernel(cfg: &Config) -> ConfigResult<Outcome> {
    let step = cfg.step_config(cfg.variant()?)?;
    let m = *step.manifold();
    let t = cfg.time()?;
    let grid = cfg.grid(&m)?;
    let src = sources(cfg, grid.len())?;
    let exact = oracle_rows(&m, t, exact_factor(&step.bundle, t)?, &grid, &src);
    let scale = sup_abs(&exact);
    let mut csv = Csv::new(&["r", "mesh", "sup_error", "rel_error", "ratio"]);
    let mut errors = Vec::new();
    for r in cfg.ladder()? {
        let p = cfg.partition_for(r)?;
        let approx = scalar_rows(&step, &p, &grid, &src)?;
        let err = sup_diff(&approx, &exact);
        let ratio = errors.last().map(|prev: &f64| err / scale / prev);
        csv.row(vec![
            p.len().into(),
            p.mesh().into(),
            err.into(),
            (err / scale).into(),
            ratio.into(),
        ]);
        errors.push(err / scale);
    }
    let (passed, summary) = ladder_verdict(cfg, &errors, "relative kernel error")?;
    Ok(Outcome {
        csv: csv.into_string(),
        passed,
        summary,
    })
}

fn converge_section(cfg: &Config) -> ConfigResult<Outcome> {
    let step = cfg.step_config(cfg.variant()?)?;
    let m = *step.manifold();
    let t = cfg.time()?;
    let grid = cfg.grid(&m)?;
    let (f, eig) = section_fn(cfg.str_or("converge.u", "constant"), &m)?;
    let eig = eig.ok_or_else(|| bad("converge.u", "section has no closed-form evolution"))?;
    let decay = exact_factor(&step.bundle, t)? * (-eig * t).exp();
    let u = Section::from_scalar_fn(&grid, &step.bundle, &f);
    let expect = Section::from_scalar_fn(&grid, &step.bundle, |p| decay * f(p));
    let mut csv = Csv::new(&["r", "mesh", "sup_error", "ratio"]);
    let mut errors = Vec::new();
    for r in cfg.ladder()? {
        let p = cfg.partition_for(r)?;
        let err = compose_apply(&step, &p, &u, &grid)?.sup_distance(&expect);
        let ratio = errors.last().map(|prev: &f64| err / prev);
        csv.row(vec![p.len().into(), p.mesh().into(), err.into(), ratio.into()]);
        errors.push(err);
    }
    let (passed, summary) = ladder_verdict(cfg, &errors, "sup error")?;
    Ok(Outcome {
        csv: csv.into_string(),
        passed,
        summary,
    })
}

fn converge_variants(cfg: &Config) -> ConfigResult<Outcome> {
    let variants = cfg.variants()?;
    let t = cfg.time()?;
    let r = *cfg.ladder()?.last().expect("non-empty ladder");
    let p = cfg.partition_for(r)?;
    let first = cfg.step_config(variants[0])?;
    let m = *first.manifold();
    let grid = cfg.grid(&m)?;
    let src = sources(cfg, grid.len())?;
    let exact = oracle_rows(&m, t, exact_factor(&first.bundle, t)?, &grid, &src);
    let scale = sup_abs(&exact);
    let rows: Vec<Vec<Vec<f64>>> = variants
        .iter()
        .map(|v| scalar_rows(&cfg.step_config(*v)?, &p, &grid, &src))
        .collect::<ConfigResult<_>>()?;
    let mut csv = Csv::new(&["a", "b", "rel_distance"]);
    let mut worst_pair = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for (i, ri) in rows.iter().enumerate() {
        let d = sup_diff(ri, &exact) / scale;
        worst_oracle = worst_oracle.max(d);
        csv.row(vec![variants[i].label().into(), "oracle".into(), d.into()]);
    }
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let d = sup_diff(&rows[i], &rows[j]) / scale;
            worst_pair = worst_pair.max(d);
            csv.row(vec![variants[i].label().into(), variants[j].label().into(), d.into()]);
        }
    }
    let pair_limit = cfg.f64_or("accept.pairwise", f64::INFINITY)?;
    let oracle_limit = cfg.f64_or("accept.oracle", f64::INFINITY)?;
    Ok(Outcome {
        csv: csv.into_string(),
        passed: worst_pair <= pair_limit && worst_oracle <= oracle_limit,
        summary: format!(
            "max pairwise {worst_pair:e} (limit {pair_limit:e}), max vs oracle {worst_oracle:e} (limit {oracle_limit:e})"
        ),
    })
}

pub fn run_hsu(cfg: &Config) -> ConfigResult<Outcome> {
    let step = cfg.step_config(cfg.variant()?)?;
    let b = &step.bundle;
    let grid = cfg.grid(&b.manifold)?;
    let v = Potential::min_eigenvalue_of(&b.potential, b.rank, cfg.f64_or("hsu.offset", 0.0)?);
    let limit = cfg.f64_or("accept.violation", 1e-10)?;
    let mut csv = Csv::new(&["r", "max_violation", "max_comparison"]);
    let mut worst = f64::NEG_INFINITY;
    for r in cfg.ladder()? {
        let p = cfg.partition_for(r)?;
        let rep = hsu_compare(&step, &v, &p, &grid)?;
        worst = worst.max(rep.max_violation);
        csv.row(vec![
            p.len().into(),
            rep.max_violation.into(),
            rep.max_comparison.into(),
        ]);
    }
    Ok(Outcome {
        csv: csv.into_string(),
        passed: worst <= limit,
        summary: format!("max violation {worst:e} (limit {limit:e})"),
    })
}

pub fn run_trace(cfg: &Config) -> ConfigResult<Outcome> {
    let step = cfg.step_config(cfg.variant()?)?;
    let b = &step.bundle;
    let t = cfg.time()?;
    let grid = cfg.grid(&b.manifold)?;
    let target = scalar_factor(b, t).map(|f| f * b.rank as f64 * spectral_trace(&b.manifold, t));
    let mut csv = Csv::new(&["r", "trace", "spectral", "rel_error"]);
    let mut last_rel = None;
    for r in cfg.ladder()? {
        let p = cfg.partition_for(r)?;
        let tr = heat_kernel_matrix(&step, &p, &grid)?.weighted_trace();
        let rel = target.map(|s| (tr - s).abs() / s);
        csv.row(vec![p.len().into(), tr.into(), target.into(), rel.into()]);
        last_rel = rel;
    }
    let limit = cfg.f64_or("accept.rel_error", f64::INFINITY)?;
    let (passed, summary) = match last_rel {
        Some(e) => (e <= limit, format!("final relative error {e:e} (limit {limit:e})")),
        None => (true, "no spectral oracle for this bundle".to_string()),
    };
    Ok(Outcome {
        csv: csv.into_string(),
        passed,
        summary,
    })
}

type MomentFn = Box<dyn Fn(f64, &[f64]) -> f64>;

fn moment_fn(name: &str) -> ConfigResult<MomentFn> {
    Ok(match name {
        "one" => Box::new(|_, _| 1.0),
        "odd" => Box::new(|_, xi| xi[0] / (1.0 + xi.iter().map(|v| v * v).sum::<f64>())),
        "generic" => Box::new(|_, xi| {
            let d2: f64 = xi
                .iter()
                .enumerate()
                .map(|(i, v)| if i == 0 { (v - 1.0).powi(2) } else { v * v })
                .sum();
            1.0 / (1.0 + d2)
        }),
        other => return Err(bad("lemma.f", format!("unknown test function {other:?}"))),
    })
}

pub fn run_lemma_a(cfg: &Config) -> ConfigResult<Outcome> {
    let m = cfg.usize_or("lemma.m", 2)?;
    let form: Vec<f64> = cfg.list("lemma.form")?.unwrap_or_else(|| {
        let mut id = vec![0.0; m * m];
        (0..m).for_each(|i| id[i * m + i] = 1.0);
        id
    });
    let fname = cfg.str_or("lemma.f", "generic");
    let f = moment_fn(fname)?;
    let ts = logspace(
        cfg.f64_or("lemma.t_min", 1e-3)?,
        cfg.f64_or("lemma.t_max", 1e-1)?,
        cfg.usize_or("lemma.count", 9)?,
    );
    let mut csv = Csv::new(&["t", "lhs", "rhs", "abs_diff"]);
    let mut diffs = Vec::new();
    let mut worst = 0.0f64;
    for &t in &ts {
        let r = gauss_moment_check(&form, m, &*f, t)?;
        worst = worst.max(r.diff);
        diffs.push(r.diff);
        csv.row(vec![t.into(), r.lhs.into(), r.rhs.into(), r.diff.into()]);
    }
    let tol = cfg.f64_or("accept.tolerance", 1e-12)?;
    let (passed, summary) = if fname == "generic" {
        let slope = loglog_slope(&ts, &diffs);
        csv.footer("slope", slope.into());
        let limit = cfg.f64_or("accept.slope", 1.4)?;
        match slope {
            Some(s) => (s >= limit, format!("fitted slope {s:.4} (limit {limit})")),
            None => (false, "slope undefined".to_string()),
        }
    } else {
        csv.footer("slope", Cell::Empty);
        (
            worst <= tol,
            format!("max |lhs - rhs| {worst:e} (limit {tol:e}), slope skipped"),
        )
    };
    Ok(Outcome {
        csv: csv.into_string(),
        passed,
        summary,
    })
}

pub fn run_kernel(cfg: &Config) -> ConfigResult<Outcome> {
    let step = cfg.step_config(cfg.variant()?)?;
    let b = &step.bundle;
    let t = cfg.time()?;
    let grid = cfg.grid(&b.manifold)?;
    let src = sources(cfg, grid.len())?.unwrap_or_else(|| vec![0]);
    let p = cfg.partition_for(*cfg.ladder()?.last().expect("non-empty ladder"))?;
    let rows = kernel_rows(&step, &p, &grid, &src)?;
    let kb = b.real_block();
    let factor = if kb == 1 { scalar_factor(b, t) } else { None };
    let mut csv = Csv::new(&["source", "node", "a", "b", "value", "oracle"]);
    for (s, &i) in src.iter().enumerate() {
        for j in 0..grid.len() {
            for a in 0..kb {
                for c in 0..kb {
                    let oracle = factor.map(|f| f * spectral_kernel(&b.manifold, t, &grid.nodes[i], &grid.nodes[j]));
                    csv.row(vec![
                        i.into(),
                        j.into(),
                        a.into(),
                        c.into(),
                        rows[(s * kb + a, j * kb + c)].into(),
                        oracle.into(),
                    ]);
                }
            }
        }
    }
    Ok(Outcome {
        csv: csv.into_string(),
        passed: true,
        summary: format!("{} kernel rows over {} nodes", src.len(), grid.len()),
    })
}

pub fn run_propagate(cfg: &Config) -> ConfigResult<Outcome> {
    match cfg.str_or("propagate.mode", "grid") {
        "grid" => propagate_grid(cfg),
        "mc" => propagate_mc(cfg),
        "defect" => propagate_defect(cfg),
        other => Err(bad("propagate.mode", format!("unknown mode {other:?}"))),
    }
}

fn propagate_grid(cfg: &Config) -> ConfigResult<Outcome> {
    let step = cfg.step_config(cfg.variant()?)?;
    let b = &step.bundle;
    let t = cfg.time()?;
    let grid = cfg.grid(&b.manifold)?;
    let (f, eig) = section_fn(cfg.str_or("propagate.u", "first-mode"), &b.manifold)?;
    let p = cfg.partition_for(*cfg.ladder()?.last().expect("non-empty ladder"))?;
    let u = Section::from_scalar_fn(&grid, b, &f);
    let v = compose_apply(&step, &p, &u, &grid)?;
    let decay = eig.and_then(|e| scalar_factor(b, t).map(|c| c * (-e * t).exp()));
    let mut csv = Csv::new(&["node", "component", "re", "im", "exact"]);
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        let ui = f(&grid.nodes[i]);
        for (a, z) in v.value(i).iter().enumerate() {
            let exact = decay.map(|d| d * ui);
            if let Some(e) = exact {
                worst = worst.max((z - C64::new(e, 0.0)).norm());
            }
            csv.row(vec![i.into(), a.into(), z.re.into(), z.im.into(), exact.into()]);
        }
    }
    let tol = cfg.f64_or("accept.tolerance", f64::INFINITY)?;
    let (passed, summary) = match decay {
        Some(_) => (worst <= tol, format!("sup error {worst:e} (limit {tol:e})")),
        None => (true, "no closed-form evolution".to_string()),
    };
    Ok(Outcome {
        csv: csv.into_string(),
        passed,
        summary,
    })
}

fn propagate_mc(cfg: &Config) -> ConfigResult<Outcome> {
    let step = cfg.step_config(cfg.variant()?)?;
    let b = &step.bundle;
    let m = b.manifold;
    let t = cfg.time()?;
    let (f, eig) = section_fn(cfg.str_or("propagate.u", "first-mode"), &m)?;
    let x0: Vec<f64> = cfg
        .list("propagate.x0")?
        .ok_or_else(|| ConfigError::Missing("propagate.x0".into()))?;
    let x0 = m.point(&x0)?;
    let p = cfg.partition_for(*cfg.ladder()?.last().expect("non-empty ladder"))?;
    let rank = b.rank;
    let u = move |x: &Point| vec![C64::new(f(x), 0.0); rank];
    let paths = cfg.usize_or("mc.paths", 100_000)?;
    let est = compose_apply_mc(&step, &p, &u, x0, paths, cfg.u64_or("mc.seed", 0)?)?;
    let exact = eig.and_then(|e| scalar_factor(b, t).map(|c| c * (-e * t).exp() * u(&x0)[0].re));
    let sigmas = cfg.f64_or("accept.sigmas", 3.0)?;
    let max_se = cfg.f64_or("accept.stderr", f64::INFINITY)?;
    let mut csv = Csv::new(&[
        "component",
        "estimate_re",
        "estimate_im",
        "stderr",
        "exact",
        "z_score",
        "zero_weight_fraction",
        "escape_probability",
    ]);
    let mut passed = true;
    let mut worst_z = 0.0f64;
    for a in 0..rank {
        let z = exact.map(|e| (est.mean[a].re - e).abs() / est.stderr[a]);
        if let Some(z) = z {
            worst_z = worst_z.max(z);
            passed &= z <= sigmas;
        }
        passed &= est.stderr[a] < max_se;
        csv.row(vec![
            a.into(),
            est.mean[a].re.into(),
            est.mean[a].im.into(),
            est.stderr[a].into(),
            exact.into(),
            z.into(),
            est.zero_weight_fraction.into(),
            est.escape_probability.into(),
        ]);
    }
    let se = est.stderr.iter().cloned().fold(0.0, f64::max);
    Ok(Outcome {
        csv: csv.into_string(),
        passed,
        summary: format!("{paths} paths, max |z| {worst_z:.3} (limit {sigmas}), max stderr {se:e} (limit {max_se:e})"),
    })
}

fn propagate_defect(cfg: &Config) -> ConfigResult<Outcome> {
    let step = cfg.step_config(cfg.variant()?)?;
    let b = &step.bundle;
    if !matches!(b.manifold, Manifold::Circle { .. }) {
        return Err(bad("manifold.kind", "the defect experiment runs on the circle"));
    }
    let grid = cfg.grid(&b.manifold)?;
    let (f, _) = section_fn(cfg.str_or("propagate.u", "smooth"), &b.manifold)?;
    let u = Section::from_scalar_fn(&grid, b, &f);
    let times: Vec<f64> = cfg.list("propagate.times")?.unwrap_or_else(|| vec![0.02, 0.08]);
    if times.len() < 2 {
        return Err(bad("propagate.times", "need at least two times"));
    }
    let mut csv = Csv::new(&["t", "defect", "defect_over_t"]);
    let mut ratios = Vec::new();
    for &t in &times {
        let w = step_kernel_matrix(&step, t, &grid)?.apply(&u);
        let e = operator_reference_1d(b, grid.len(), t)?.apply(&u);
        let d = w.sup_distance(&e);
        ratios.push((t, d / t));
        csv.row(vec![t.into(), d.into(), (d / t).into()]);
    }
    let lo = ratios
        .iter()
        .cloned()
        .fold((f64::INFINITY, 0.0), |a, r| if r.0 < a.0 { r } else { a });
    let hi = ratios
        .iter()
        .cloned()
        .fold((f64::NEG_INFINITY, 0.0), |a, r| if r.0 > a.0 { r } else { a });
    let q = lo.1 / hi.1;
    csv.footer("ratio", q.into());
    let limit = cfg.f64_or("accept.ratio", 0.6)?;
    Ok(Outcome {
        csv: csv.into_string(),
        passed: q < limit,
        summary: format!("defect/t at t={} over t={} is {q:.4} (limit {limit})", lo.0, hi.0),
    })
}

pub fn run_holonomy(cfg: &Config) -> ConfigResult<Outcome> {
    let b = cfg.bundle()?;
    let m = b.manifold;
    let (name, polygon, expected_trace) = match cfg.str_or("holonomy.loop", "octant") {
        "octant" => {
            let Manifold::Sphere { radius: r } = m else {
                return Err(bad("holonomy.loop", "the octant loop lives on the sphere"));
            };
            let verts = vec![
                m.point(&[0.0, 0.0, r])?,
                m.point(&[r, 0.0, 0.0])?,
                m.point(&[0.0, r, 0.0])?,
                m.point(&[0.0, 0.0, r])?,
            ];
            // The excess π/2 rotates the tangent plane by a quarter turn.
            (
                "octant",
                GeodesicPolygon::new(m, Partition::uniform(3.0, 3)?, verts)?,
                0.0,
            )
        }
        "square" => {
            if m.is_flat() && m.dim() == 2 {
                let verts = [[0.1, 0.1], [0.3, 0.1], [0.3, 0.3], [0.1, 0.3], [0.1, 0.1]]
                    .iter()
                    .map(|c| m.point(c))
                    .collect::<polyheat::Result<Vec<_>>>()?;
                (
                    "square",
                    GeodesicPolygon::new(m, Partition::uniform(1.0, 4)?, verts)?,
                    b.rank as f64,
                )
            } else {
                return Err(bad("holonomy.loop", "the square loop needs a 2-torus"));
            }
        }
        other => return Err(bad("holonomy.loop", format!("unknown loop {other:?}"))),
    };
    let hol = b.holonomy(&polygon)?;
    let tr = hol.trace();
    let id_dist = hol.distance(&polyheat::SmallMat::identity(b.rank));
    let tol = cfg.f64_or("accept.tolerance", 1e-10)?;
    let err = if name == "square" {
        id_dist
    } else {
        (tr - C64::new(expected_trace, 0.0)).norm()
    };
    let mut csv = Csv::new(&[
        "loop",
        "trace_re",
        "trace_im",
        "identity_distance",
        "expected_trace",
        "error",
    ]);
    csv.row(vec![
        name.into(),
        tr.re.into(),
        tr.im.into(),
        id_dist.into(),
        expected_trace.into(),
        err.into(),
    ]);
    Ok(Outcome {
        csv: csv.into_string(),
        passed: err <= tol,
        summary: format!("{name} loop error {err:e} (limit {tol:e})"),
    })
}
