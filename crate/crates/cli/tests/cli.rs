use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn tdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn solve_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    for (inst, method, phi) in [
        ("two-client.json", "ilp", "0.8"),
        ("two-client.json", "bnp", "0.8"),
        ("hd-video.json", "bnp", "0.921875"),
        ("hd-video.json", "ilp", "0.921875"),
    ] {
        let out = dir.path().join(format!("{method}-{inst}"));
        let r = tdm(&["solve", &data(inst), "--method", method, "--out", s(&out)]);
        assert_eq!(
            r.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&r.stderr)
        );
        let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["status"], "optimal");
        assert_eq!(v["objective"], phi);
        let r = tdm(&["verify", &data(inst), s(&out)]);
        assert_eq!(r.status.code(), Some(0));
        let report = json(&r);
        assert_eq!(report["feasible"], true);
        assert_eq!(report["objective"], phi);
    }
}

#[test]
fn heuristic_finds_the_two_client_optimum() {
    let r = tdm(&[
        "solve",
        &data("two-client.json"),
        "--method",
        "heuristic",
        "--heuristic-runs",
        "3",
    ]);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(json(&r)["objective"], "0.8");
}

#[test]
fn continuous_fails_on_the_two_client() {
    let r = tdm(&["solve", &data("two-client.json"), "--method", "continuous"]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(json(&r)["status"], "no_feasible");
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        tdm(&["solve", "/nonexistent/instance.json"]).status.code(),
        Some(1)
    );
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"frame_size\": 4}").unwrap();
    assert_eq!(tdm(&["solve", s(&bad)]).status.code(), Some(1));
    assert_eq!(
        tdm(&["solve", &data("two-client.json"), "--method", "magic"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        tdm(&["solve", &data("two-client.json"), "--time-limit", "0"])
            .status
            .code(),
        Some(1)
    );

    let sched = dir.path().join("short.json");
    fs::write(
        &sched,
        r#"{"frame_size": 4, "slots": ["c1", null, "c2", null]}"#,
    )
    .unwrap();
    assert_eq!(
        tdm(&["verify", &data("two-client.json"), s(&sched)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn verify_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("shared.json");
    fs::write(
        &sched,
        r#"{"frame_size": 10, "slots": [["c1", "c2"], "c2", "c1", "c1", null, "c2", "c2", "c1", "c1", "c1"]}"#,
    )
    .unwrap();
    let r = tdm(&["verify", &data("two-client.json"), s(&sched)]);
    assert_eq!(r.status.code(), Some(2));
    let report = json(&r);
    assert_eq!(report["collisions"][0]["kind"], "collision");
    assert_eq!(report["collisions"][0]["slot"], 1);

    // rates are met but c1's slots {1, 5, 6} leave a latency of 14/3 > 3
    let inst = dir.path().join("one.json");
    fs::write(
        &inst,
        r#"{"frame_size": 10, "clients": [{"name": "c1", "rate": "0.3", "latency_slots": "3"}]}"#,
    )
    .unwrap();
    fs::write(
        &sched,
        r#"{"frame_size": 10, "slots": ["c1", null, null, null, "c1", "c1", null, null, null, null]}"#,
    )
    .unwrap();
    let r = tdm(&["verify", s(&inst), s(&sched)]);
    assert_eq!(r.status.code(), Some(2));
    let report = json(&r);
    assert_eq!(report["feasible"], false);
    assert!(report["clients"][0]["violation"].is_object(), "{report}");
}

#[test]
fn timeout_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("ld");
    let r = tdm(&[
        "generate",
        "--class",
        "LD",
        "--n",
        "8",
        "--count",
        "1",
        "--seed",
        "0",
        "--out",
        s(&gen),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let inst = gen.join("LD-n8-s0-0000.json");
    let r = tdm(&["solve", s(&inst), "--method", "ilp", "--time-limit", "0.2"]);
    assert_eq!(r.status.code(), Some(3));
    assert_eq!(json(&r)["status"], "timed_out");
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p.file_name().unwrap().into(), bytes)
        })
        .collect();
    v.sort();
    v
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let r = tdm(&[
            "generate",
            "--class",
            "BD",
            "--n",
            "8",
            "--count",
            "5",
            "--seed",
            "7",
            "--out",
            s(out),
        ]);
        assert_eq!(r.status.code(), Some(0));
    }
    let fa = files(&a);
    assert_eq!(fa.len(), 6);
    assert_eq!(fa, files(&b));
    let mut manifest = csv::Reader::from_path(a.join("manifest.csv")).unwrap();
    for row in manifest.records() {
        let row = row.unwrap();
        let total: f64 = row[4].parse().unwrap();
        assert!((0.8..=0.95).contains(&total), "{total}");
    }
}

#[test]
fn empty_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let r = tdm(&[
        "generate",
        "--class",
        "MD",
        "--n",
        "8",
        "--count",
        "0",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let manifest = dir.path().join("manifest.csv");
    assert_eq!(fs::read_to_string(&manifest).unwrap().lines().count(), 1);
    let out = dir.path().join("bench.csv");
    let r = tdm(&["bench", s(&manifest), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("instance,class,n,method,status"));
}

#[test]
fn bench_smoke_all_classes() {
    let dir = tempfile::tempdir().unwrap();
    let all = dir.path().join("manifest.csv");
    let mut w = csv::Writer::from_path(&all).unwrap();
    w.write_record(["path", "class", "n", "f", "total_rate", "latency_load"])
        .unwrap();
    for class in ["BD", "LD", "MD"] {
        let sub = dir.path().join(class);
        let r = tdm(&[
            "generate",
            "--class",
            class,
            "--n",
            "8",
            "--count",
            "2",
            "--seed",
            "1",
            "--out",
            s(&sub),
        ]);
        assert_eq!(r.status.code(), Some(0));
        let mut rd = csv::Reader::from_path(sub.join("manifest.csv")).unwrap();
        for row in rd.records() {
            let mut row = row.unwrap().iter().map(String::from).collect::<Vec<_>>();
            row[0] = format!("{class}/{}", row[0]);
            w.write_record(&row).unwrap();
        }
    }
    w.flush().unwrap();
    let out = dir.path().join("bench.csv");
    let r = tdm(&[
        "bench",
        s(&all),
        "--methods",
        "bnp,heuristic,continuous",
        "--time-limit",
        "2",
        "--workers",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let mut rd = csv::Reader::from_path(&out).unwrap();
    let header = rd.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6 * 3 + 3);
    for row in &rows {
        assert_eq!(row.len(), header.len());
    }
    let continuous = rows
        .iter()
        .find(|r| &r[0] == "summary" && &r[3] == "continuous")
        .unwrap();
    assert_eq!(&continuous[9], "6");
    for r in rows
        .iter()
        .filter(|r| &r[1] == "BD" && &r[3] == "heuristic" && !r[5].is_empty())
    {
        let best = rows
            .iter()
            .filter(|b| b[0] == r[0] && &b[3] == "bnp" && &b[4] == "optimal")
            .map(|b| b[5].to_string())
            .next();
        if let Some(best) = best {
            assert_eq!(r[5], best, "heuristic off the optimum on {}", &r[0]);
        }
    }
}
