use std::process::Command;

use polyheat_cli::{run_with_threads, Config};

fn polyheat(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_polyheat"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn exit_codes() {
    let ok = polyheat(&["lemma-a", "--set", "lemma.f=one", "--set", "lemma.count=3"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let csv = String::from_utf8(ok.stdout).unwrap();
    assert!(csv.starts_with("t,lhs,rhs,abs_diff\n"));
    assert!(!csv.contains('\r'));

    let fail = polyheat(&["lemma-a", "--set", "accept.slope=5", "--set", "lemma.count=4"]);
    assert_eq!(fail.status.code(), Some(1));

    let unknown = polyheat(&["trace", "--set", "grid.size=3"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown key"));

    let missing = polyheat(&["trace", "--set", "manifold.kind=circle"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn subcommand_must_match_config() {
    let dir = std::env::temp_dir().join(format!("polyheat-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("t.cfg");
    std::fs::write(&cfg, "experiment = trace\nmanifold.kind = circle\ntime = 0.5\n").unwrap();
    let out = polyheat(&["hsu", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let csv = dir.join("t.csv");
    let out = polyheat(&[
        "trace",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "grid.n=64",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("r,trace,spectral,rel_error\n1,"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn single_row_ladder_has_empty_ratio() {
    let cfg = Config::parse(
        "experiment = converge\nmanifold.kind = circle\ntime = 0.5\ngrid.n = 64\npartition.r = 4\nvariant = v",
    )
    .unwrap();
    let out = run_with_threads(&cfg, Some(1)).unwrap();
    let row = out.csv.lines().nth(1).unwrap();
    assert!(row.ends_with(','), "{row}");
}

#[test]
fn torus_constants_are_preserved() {
    let cfg = Config::parse(
        "experiment = converge\nconverge.mode = section\nconverge.u = constant\nmanifold.kind = torus\n\
         time = 0.01\ngrid.n = 32\npartition.ladder = 1, 2, 4\nvariant = w-hat\naccept.rel_error = 1e-10",
    )
    .unwrap();
    let out = run_with_threads(&cfg, Some(1)).unwrap();
    assert!(out.passed, "{}", out.summary);
}

#[test]
fn hsu_equality_and_shifted_cases() {
    let base = "experiment = hsu\nmanifold.kind = circle\npotential.name = cos-theta\ntime = 0.5\ngrid.n = 64\n\
                partition.ladder = 2, 4\nvariant = v\n";
    let out = run_with_threads(&Config::parse(base).unwrap(), Some(1)).unwrap();
    assert!(out.passed);
    for line in out.csv.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(v.abs() <= 1e-12);
    }
    // Without the cutoff every entry is positive, so the margin is visible everywhere.
    let shifted = Config::parse(&format!("{base}potential.shift = 1\nhsu.offset = 1\nvariant = w-hat\n")).unwrap();
    let out = run_with_threads(&shifted, Some(1)).unwrap();
    for line in out.csv.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(v < -1e-3, "{v}");
    }
    let bad = Config::parse(&format!("{base}hsu.offset = -0.5\n")).unwrap();
    assert!(run_with_threads(&bad, Some(1)).is_err());
}

#[test]
fn trace_of_doubled_bundle_and_long_times() {
    let base = "experiment = trace\nmanifold.kind = circle\ntime = 0.5\ngrid.n = 128\npartition.r = 8\nvariant = v\n";
    let one = run_with_threads(&Config::parse(base).unwrap(), Some(1)).unwrap();
    let two = run_with_threads(&Config::parse(&format!("{base}bundle.rank = 2\n")).unwrap(), Some(1)).unwrap();
    let tr = |o: &polyheat_cli::Outcome| -> f64 {
        o.csv
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((tr(&two) - 2.0 * tr(&one)).abs() < 1e-12 * tr(&one));
    let long = Config::parse(&format!("{base}time = 10\npartition.r = 100\nvariant = w-hat\n")).unwrap();
    let out = run_with_threads(&long, Some(1)).unwrap();
    assert!((tr(&out) - 1.0).abs() < 1e-3, "{}", out.csv);
}

#[test]
fn lemma_symmetric_cases() {
    let odd = Config::parse("experiment = lemma-a\nlemma.form = 2, 0, 0, 0.5\nlemma.f = odd\nlemma.count = 3").unwrap();
    let out = run_with_threads(&odd, Some(1)).unwrap();
    assert!(out.passed, "{}", out.summary);
    assert!(out.csv.ends_with("# slope,\n"));
}
