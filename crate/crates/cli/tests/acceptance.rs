//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use polyheat_cli::{run_with_threads, Config, Outcome};

fn config(name: &str) -> Config {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.cfg"));
    Config::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

struct Run {
    name: &'static str,
    outcome: Outcome,
    elapsed: Duration,
}

fn run(name: &'static str, threads: usize) -> Run {
    let start = Instant::now();
    let outcome = run_with_threads(&config(name), Some(threads)).unwrap_or_else(|e| panic!("{name}: {e}"));
    Run {
        name,
        outcome,
        elapsed: start.elapsed(),
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, title: &str, runs: &[&Run], budget: Option<Duration>) {
        let elapsed: Duration = runs.iter().map(|r| r.elapsed).sum();
        let in_time = budget.is_none_or(|b| elapsed < b);
        let ok = in_time && runs.iter().all(|r| r.outcome.passed);
        let detail: Vec<String> = runs
            .iter()
            .map(|r| format!("{}: {}", r.name, r.outcome.summary))
            .collect();
        let budget = budget.map_or(String::new(), |b| format!(" of {} s", b.as_secs()));
        println!(
            "criterion {id} {title}: {} [{}; {:.2} s{budget}]",
            if ok { "PASS" } else { "FAIL" },
            detail.join("; "),
            elapsed.as_secs_f64()
        );
        if !ok {
            self.failures += 1;
        }
    }
}

const CONFIGS: &[&str] = &[
    "circle_converge",
    "circle_converge_last_step",
    "sphere_variants",
    "circle_hsu",
    "circle_trace",
    "sphere_trace",
    "octant_holonomy",
    "square_holonomy",
    "torus_mc",
    "circle_defect",
    "lemma_a",
];

fn main() {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let runs: Vec<Run> = CONFIGS.iter().map(|&c| run(c, threads)).collect();
    let get = |name: &str| runs.iter().find(|r| r.name == name).expect("config ran");
    let secs = Duration::from_secs;
    let mut report = Report { failures: 0 };

    report.line(
        1,
        "circle convergence",
        &[get("circle_converge"), get("circle_converge_last_step")],
        Some(secs(10)),
    );
    report.line(2, "variant equivalence", &[get("sphere_variants")], Some(secs(120)));
    report.line(3, "domination inequality", &[get("circle_hsu")], Some(secs(30)));
    report.line(
        4,
        "trace formula",
        &[get("circle_trace"), get("sphere_trace")],
        Some(secs(60)),
    );
    report.line(5, "holonomy", &[get("octant_holonomy"), get("square_holonomy")], None);
    report.line(6, "monte carlo", &[get("torus_mc")], Some(secs(60)));
    report.line(7, "single-step defect", &[get("circle_defect")], None);
    report.line(8, "gaussian moment slope", &[get("lemma_a")], Some(secs(10)));

    let mut mismatches = Vec::new();
    let start = Instant::now();
    for t in [1, 4, 8] {
        for r in &runs {
            if t == threads {
                continue;
            }
            let again = run(r.name, t);
            if again.outcome.csv != r.outcome.csv {
                mismatches.push(format!("{} at {t} threads", r.name));
            }
        }
    }
    let ok = mismatches.is_empty();
    println!(
        "criterion 9 determinism: {} [{} configs at 1, 4 and 8 threads vs {threads}; {}; {:.2} s]",
        if ok { "PASS" } else { "FAIL" },
        runs.len(),
        if ok {
            "byte-identical".to_string()
        } else {
            format!("differs: {}", mismatches.join(", "))
        },
        start.elapsed().as_secs_f64()
    );
    if !ok {
        report.failures += 1;
    }

    if report.failures > 0 {
        eprintln!("{} acceptance criteria failed", report.failures);
        std::process::exit(1);
    }
}
