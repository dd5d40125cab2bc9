use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tsring::bench::random_walk;
use tsring::io::{parse_csv, parse_xml, write_csv, write_xml};
use tsring_core::expr::{evaluate, parse};
use tsring_core::peer::parse_metrics;
use tsring_core::{TimeSeries, TsValue};

fn tsring(args: &[&str]) -> Output {
    tsring_env(args, None)
}

fn tsring_env(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tsring"));
    cmd.args(args).env_remove("TSRING_CONFIG");
    if let Some(c) = config {
        cmd.env("TSRING_CONFIG", c);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// A daily series with weekend gaps and a few unknowns.
fn fixture(dir: &Path) -> (PathBuf, TimeSeries) {
    let walk = random_walk(400, 3);
    let values: Vec<TsValue> = walk
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| match i % 7 {
            5 | 6 => TsValue::Empty,
            _ if i % 97 == 3 => TsValue::Unknown,
            _ => *v,
        })
        .collect();
    let start = chrono::NaiveDate::from_ymd_opt(2003, 1, 6)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let cal = tsring_core::Calendar::new(start, tsring_core::Granularity::Day, values.len());
    let s = TimeSeries::new(cal, values).unwrap();
    let path = dir.join("LVMH.xml");
    std::fs::write(&path, write_xml(&s)).unwrap();
    (path, s)
}

fn close(a: &TimeSeries, b: &TimeSeries) -> bool {
    a.calendar() == b.calendar()
        && a.values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| match (x, y) {
                (TsValue::Real(x), TsValue::Real(y)) => {
                    (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0)
                }
                _ => x == y,
            })
}

#[test]
fn central_run_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (path, s) = fixture(dir.path());
    let out = stdout(&tsring(&[
        "run",
        "--expr",
        "MAVG(LVMH,12)",
        "--central",
        "--data",
        path.to_str().unwrap(),
    ]));
    let got = parse_xml(&out, None).unwrap();
    let store: BTreeMap<String, TimeSeries> = [("LVMH".to_string(), s)].into();
    let want = evaluate(&parse("MAVG(LVMH,12)").unwrap(), &store).unwrap();
    assert!(close(&got, &want));
}

#[test]
fn central_equals_distributed_for_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let (path, s) = fixture(dir.path());
    let other = dir.path().join("other.csv");
    let mut shifted = s.map(|v| tsring_core::value::value_scale(0.5, v));
    shifted = shifted
        .with_values(shifted.values().iter().rev().copied().collect())
        .unwrap();
    std::fs::write(&other, write_csv(&shifted)).unwrap();
    let data = format!("LVMH={}", path.display());
    let data2 = format!("CAC={}", other.display());
    for expr in [
        "LVMH",
        "MAVG(LVMH,12)",
        "MAVG(LVMH,40)",
        "EMA(LVMH,0.8,10)",
        "MOM(LVMH,5)",
        "SCALE(MOM(LVMH,5),100)",
        "MACD(LVMH,12,26,9)",
        "MSUB(LVMH,CAC)",
        "SEL(LVMH,>100)",
        "PROJ(LVMH,NEG)",
        "WIN(LVMH,7,MIN)",
        "JOIN(LVMH,CAC,MAX)",
        "UNION(LVMH,CAC)",
        "INTERSECT(LVMH,CAC)",
    ] {
        let base = [
            "run", "--expr", expr, "--format", "csv", "--data", &data, &data2,
        ];
        let central = stdout(&tsring(&[&base[..], &["--central"]].concat()));
        let dist = stdout(&tsring(
            &[&base[..], &["--peers", "9", "--core", "32", "--halo", "16"]].concat(),
        ));
        let (a, b) = (
            parse_csv(&central, None).unwrap(),
            parse_csv(&dist, None).unwrap(),
        );
        assert!(close(&a, &b), "{expr}");
    }
}

#[test]
fn distributed_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = fixture(dir.path());
    let run = |tag: &str| {
        let m = dir.path().join(format!("m{tag}.txt"));
        let t = dir.path().join(format!("t{tag}.tsv"));
        let out = stdout(&tsring(&[
            "run",
            "--expr",
            "MACD(LVMH,12,26,9)",
            "--peers",
            "128",
            "--seed",
            "7",
            "--core",
            "16",
            "--halo",
            "8",
            "--data",
            path.to_str().unwrap(),
            "--metrics",
            m.to_str().unwrap(),
            "--trace",
            t.to_str().unwrap(),
        ]));
        (
            out,
            std::fs::read_to_string(m).unwrap(),
            std::fs::read_to_string(t).unwrap(),
        )
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    assert!(a.1.contains("trace_digest: "));
    assert!(a.2.starts_with(tsring::TRACE_HEADER));
    assert!(a.2.lines().count() > 100);
    let m = parse_metrics(&a.1);
    assert!(m.messages > 0 && m.segments_computed > 0);
}

#[test]
fn interval_flags_clip_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = fixture(dir.path());
    for mode in [&["--central"][..], &["--peers", "4"][..]] {
        let args = [
            &[
                "run",
                "--expr",
                "MAVG(LVMH,3)",
                "--from",
                "2003-02-03",
                "--to",
                "2003-02-10",
                "--data",
            ][..],
            &[path.to_str().unwrap()][..],
            mode,
        ]
        .concat();
        let s = parse_xml(&stdout(&tsring(&args)), None).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s.calendar().start.to_string(), "2003-02-03 00:00:00");
    }
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = fixture(dir.path());
    let p = path.to_str().unwrap();
    for (args, needle) in [
        (
            vec!["run", "--expr", "MAVG(X)", "--data", p],
            "MAVG expects 2 arguments",
        ),
        (
            vec!["run", "--expr", "MAVG(NOPE,3)", "--data", p],
            "unknown series NOPE",
        ),
        (
            vec!["run", "--expr", "MAVG(LVMH,3", "--data", p],
            "syntax error at 11",
        ),
        (
            vec!["run", "--expr", "LVMH", "--data", "/nonexistent.csv"],
            "/nonexistent.csv",
        ),
        (
            vec!["run", "--expr", "LVMH", "--data", p, "--from", "yesterday"],
            "--from",
        ),
        (vec!["bench", "--values", "0"], "configuration error"),
    ] {
        let o = tsring(&args);
        assert!(!o.status.success(), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.contains(needle), "{args:?}: {err}");
    }
}

#[test]
fn workload_script_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let script = dir.path().join("w.txt");
    std::fs::write(
        &script,
        "# warm-up\nload LVMH LVMH.xml --core 64 --halo 32\nquery \"MACD(LVMH,12,26,9)\"\nquery \"MAVG(LVMH,12)\" --from 2003-02-03\nstats\n",
    )
    .unwrap();
    let out = stdout(&tsring(&[
        "sim",
        "--script",
        script.to_str().unwrap(),
        "--peers",
        "8",
    ]));
    assert!(out.contains("load LVMH: 400 values, 7 segments"), "{out}");
    assert!(
        out.contains("query MAVG(LVMH,12): 372 values, computed 0"),
        "{out}"
    );
    assert!(out.contains("stats\n  routing_hops: "), "{out}");
    assert!(out
        .trim_end()
        .lines()
        .last()
        .unwrap()
        .starts_with("trace_digest: "));

    let config = dir.path().join("tsring.toml");
    std::fs::write(&config, "capacity = 0\npeers = 3\n").unwrap();
    let out = stdout(&tsring_env(
        &["sim", "--script", script.to_str().unwrap()],
        Some(&config),
    ));
    assert!(
        out.contains("query MAVG(LVMH,12): 372 values, computed 7, cache hits 0"),
        "{out}"
    );

    std::fs::write(&config, "capacty = 0\n").unwrap();
    let o = tsring_env(
        &["sim", "--script", script.to_str().unwrap()],
        Some(&config),
    );
    assert!(!o.status.success());

    std::fs::write(&script, "load LVMH LVMH.xml\nquery \"MAVG(LVMH,2)\" --to\n").unwrap();
    let o = tsring(&["sim", "--script", script.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("script line 2"));
}

#[test]
fn bench_table_and_document() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("bench.txt");
    let out = stdout(&tsring(&[
        "bench",
        "--values",
        "30000",
        "--peers",
        "1,16",
        "--window",
        "20",
        "--repeat",
        "2",
        "--seed",
        "3",
        "--metrics",
        m.to_str().unwrap(),
    ]));
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 1 + 2 + 2 * 5);
    for row in rows.iter().filter(|r| r.contains(" warm ")) {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols[6], "0", "warm runs compute nothing: {row}");
    }
    let doc = std::fs::read_to_string(m).unwrap();
    assert!(doc.contains("peers16.mavg.warm.segments_computed: 0\n"));
    assert!(doc.contains("peers16.trace_digest: "));
}
