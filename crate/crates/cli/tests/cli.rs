use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fjet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fjet"))
        .args(args)
        .output()
        .expect("spawn fjet")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

fn json_lines(o: &Output) -> Vec<Value> {
    stdout(o)
        .lines()
        .map(|l| serde_json::from_str(l).expect("json line"))
        .collect()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn coefficients(text: &str) -> Vec<(u64, i64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let mut w = l.split_whitespace().map(|x| x.parse::<i64>().unwrap());
            (w.next().unwrap() as u64, w.next().unwrap())
        })
        .collect()
}

#[test]
fn list_and_unknown_suite() {
    let o = fjet(&["run", "list"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "order-one-pipeline"));
    let o = fjet(&["run", "no-such-suite"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn passing_suite_reports_json_lines() {
    let o = fjet(&["run", "valuation-bound", "--p", "5", "--e", "4", "--r", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let lines = json_lines(&o);
    assert_eq!(lines[0]["record"], "suite");
    assert_eq!(lines[0]["params"]["p"], "5");
    let last = lines.last().unwrap();
    assert_eq!(last["record"], "summary");
    assert_eq!(last["pass"], true);
    assert!(lines
        .iter()
        .filter(|l| l["record"] == "check")
        .all(|l| l["detail"].as_str().unwrap().contains("margin")));
}

#[test]
fn failing_check_exits_one_with_witness() {
    let o = fjet(&[
        "run",
        "order-one-pipeline",
        "--p",
        "5",
        "--N",
        "7",
        "--pi",
        "cyclotomic",
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let lines = json_lines(&o);
    let failed: Vec<&Value> = lines
        .iter()
        .filter(|l| l["record"] == "check" && l["pass"] == false)
        .collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["check"], "defect(E(f♯_p)) = 0");
    assert!(failed[0]["detail"]
        .as_str()
        .unwrap()
        .contains("Q=50 D=6 K=8"));
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(
        fjet(&["run", "psi", "--pi", "bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(
        fjet(&["run", "psi", "--p", "5", "--e", "2", "--pi", "cyclotomic"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fjet(&["run", "hecke-identities", "--p", "5", "--N", "10"])
            .status
            .code(),
        Some(2)
    );
    let cfg = scratch("bad.cfg");
    fs::write(&cfg, "p = 5\ncolour = blue\n").unwrap();
    assert_eq!(
        fjet(&["run", "psi", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn reports_are_deterministic() {
    let args = [
        "run",
        "hecke-identities",
        "--p",
        "7",
        "--N",
        "11",
        "--seed",
        "9",
    ];
    let a = fjet(&args);
    let b = fjet(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn flags_override_the_config_file() {
    let cfg = scratch("run.cfg");
    fs::write(&cfg, "# suite settings\np = 7\nN = 11\nseed = 3\n").unwrap();
    let o = fjet(&[
        "run",
        "hecke-identities",
        "--config",
        cfg.to_str().unwrap(),
        "--p",
        "5",
    ]);
    assert!(o.status.success());
    let head = &json_lines(&o)[0];
    assert_eq!(head["params"]["p"], "5");
    assert_eq!(head["params"]["N"], "11");
}

#[test]
fn out_appends_report_lines() {
    let out = scratch("append.jsonl");
    let _ = fs::remove_file(&out);
    for _ in 0..2 {
        assert!(fjet(&["run", "gram", "--out", out.to_str().unwrap()])
            .status
            .success());
    }
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(
        text.lines().filter(|l| l.contains("\"summary\"")).count(),
        2
    );
}

#[test]
fn expand_psi_prints_the_leading_monomials() {
    let o = fjet(&["expand", "psi-p", "--p", "5", "--terms", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate() {
        let n = i as i32 + 1;
        let (lhs, rhs) = row.split_once(':').unwrap();
        let exps: Vec<i32> = lhs.split_whitespace().map(|x| x.parse().unwrap()).collect();
        assert_eq!(exps, vec![-5 * n, n]);
        // (-1)^{n-1} p^{n-1}/n has valuation n-1 for n < p
        if n > 1 {
            assert!(rhs.trim().starts_with(&format!("p^{}*", n - 1)), "{row}");
        }
    }
    assert!(rows[0].ends_with("(00000001,00000000,00000000,00000000)"));
}

#[test]
fn hecke_operators_on_a_synthetic_system() {
    let f = scratch("f7.txt");
    let o = fjet(&[
        "synth",
        "--p",
        "5",
        "--N",
        "7",
        "--q-prec",
        "40",
        "--primes",
        "2=-1,3=2,5=1,7=1",
        "--out",
        f.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a: Vec<i64> = std::iter::once(0)
        .chain(
            coefficients(&fs::read_to_string(&f).unwrap())
                .into_iter()
                .map(|x| x.1),
        )
        .collect();
    assert_eq!(a[2], -1);
    assert_eq!(a[4], 1 - 2);

    // T(5) at level 35 is U_5, so it returns a_{5m} = a_5 a_m = a_m
    let o = fjet(&[
        "hecke",
        "--op",
        "T",
        "--kappa",
        "2",
        "--M",
        "35",
        "--n",
        "5",
        "--in",
        f.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let b = coefficients(&stdout(&o));
    assert_eq!(b.len(), 8);
    assert!(b.iter().all(|&(m, v)| v == a[m as usize]));

    // T(2) at level 7 acts by a_2
    let o = fjet(&["hecke", "--M", "7", "--n", "2", "--in", f.to_str().unwrap()]);
    let b = coefficients(&stdout(&o));
    assert_eq!(b.len(), 20);
    assert!(b.iter().all(|&(m, v)| v == a[2] * a[m as usize]));
}

#[test]
fn ingest_flags_violations_and_malformed_files() {
    let f = scratch("ok.txt");
    assert!(fjet(&[
        "synth",
        "--p",
        "7",
        "--N",
        "11",
        "--q-prec",
        "30",
        "--seed",
        "4",
        "--out",
        f.to_str().unwrap()
    ])
    .status
    .success());
    let o = fjet(&["ingest", "--in", f.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(json_lines(&o)[0]["pass"], true);

    let text = fs::read_to_string(&f).unwrap();
    let bad = scratch("bad.txt");
    let a6: i64 = coefficients(&text)[5].1;
    fs::write(
        &bad,
        text.replace(&format!("\n6 {a6}\n"), &format!("\n6 {}\n", a6 + 1)),
    )
    .unwrap();
    let o = fjet(&["ingest", "--in", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let line = &json_lines(&o)[0];
    assert_eq!(line["pass"], false);
    assert!(line["detail"].as_str().unwrap().contains("n=6"));

    fs::write(&bad, "11 7 2 3 synthetic\n1 1\n2 x\n").unwrap();
    let o = fjet(&["ingest", "--in", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn overconv_and_radius_read_dumps() {
    let f = scratch("f11.txt");
    assert!(fjet(&[
        "synth",
        "--p",
        "5",
        "--N",
        "11",
        "--q-prec",
        "12",
        "--out",
        f.to_str().unwrap()
    ])
    .status
    .success());
    let d = scratch("sharp_p.dump");
    let o = fjet(&[
        "expand",
        "sharp-p",
        "--in",
        f.to_str().unwrap(),
        "--q-prec",
        "12",
        "--jet-deg",
        "3",
        "--out",
        d.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = fjet(&[
        "overconv",
        "--in",
        d.to_str().unwrap(),
        "--pi",
        "cyclotomic",
    ]);
    assert!(o.status.success());
    let rep = &json_lines(&o)[0];
    assert_eq!(rep["defect"], 1);
    assert_eq!(rep["min_valuation"], "-3/4");
    assert_eq!(rep["D"], 3);
    assert!(rep["witness"]
        .as_str()
        .unwrap()
        .starts_with("# r=1 Q=12 D=3\n"));

    let o = fjet(&["radius", "--in", d.to_str().unwrap()]);
    assert!(o.status.success());
    let rep = &json_lines(&o)[0];
    assert_eq!(rep["record"], "radius");
    assert!(!rep["hull"].as_array().unwrap().is_empty());

    let sp = scratch("sharp_pi.dump");
    assert!(fjet(&[
        "expand",
        "sharp-pi",
        "--in",
        f.to_str().unwrap(),
        "--q-prec",
        "12",
        "--jet-deg",
        "3",
        "--out",
        sp.to_str().unwrap()
    ])
    .status
    .success());
    assert!(fs::read_to_string(&sp)
        .unwrap()
        .starts_with("# r=1 Q=12 D=3\n"));
}
