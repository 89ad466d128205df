use std::io::Write;
use std::process::{Command, Output};

fn sclkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sclkit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn file(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn field<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
}

#[test]
fn pipeline_on_commutator() {
    let o = sclkit(&["action", "pipeline", "--backend", "cayley:2", "--g", "abAB"]);
    assert_eq!(o.status.code(), Some(0));
    let t = stdout(&o);
    assert_eq!(field(&t, "lower_bound"), Some("1/48"));
    assert_eq!(field(&t, "N"), Some("1"));
}

#[test]
fn reports_are_reproducible() {
    let args = ["action", "wwpd", "--backend", "cayley:2", "--g", "aab", "--seed", "7"];
    let (a, b) = (sclkit(&args), sclkit(&args));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(field(&stdout(&a), "seed"), Some("7"));
}

#[test]
fn inessential_class_is_zero_with_witness() {
    let f = file("N 1\ncomp g1 pa complexity 2 chiral rep g1 m 1 r 1\ncomp g2 pa complexity 2 chiral rep g1 m -1 r 1\n");
    let o = sclkit(&["classify", "--in", f.path().to_str().unwrap(), "--witness"]);
    assert_eq!(o.status.code(), Some(0));
    let t = stdout(&o);
    assert_eq!(field(&t, "verdict"), Some("Zero"));
    assert!(field(&t, "witnesses").unwrap().contains("\"verified\":true"));
}

#[test]
fn essential_class_exits_ten() {
    let f = file("N 2\ncomp g1 pa complexity 2 chiral rep g1 m 1 r 1\ncomp g2 pa complexity 2 chiral rep g1 m 2 r 1\n");
    let o = sclkit(&["classify", "--in", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(10));
    assert_eq!(field(&stdout(&o), "verdict"), Some("Positive"));
}

#[test]
fn malformed_decomposition_reports_position() {
    let f = file("N 1\ncomp g1 pa complexity x chiral\n");
    let o = sclkit(&["classify", "--in", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn graph_commands() {
    let tree = file("v 5\ne 0 1\ne 1 2\ne 2 3\ne 1 4\n");
    let p = tree.path().to_str().unwrap();
    assert_eq!(field(&stdout(&sclkit(&["graph", "delta", "--in", p])), "delta"), Some("0/1"));
    assert_eq!(field(&stdout(&sclkit(&["graph", "bottleneck", "--in", p])), "bottleneck"), Some("0"));
    let m = stdout(&sclkit(&["graph", "manning", "--in", p]));
    assert_eq!(field(&m, "inequalities"), Some("hold"));
    let bad = file("v 3\ne 0 7\n");
    let o = sclkit(&["graph", "delta", "--in", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn explicit_backend() {
    let g = file("v 4\ne 0 1\ne 1 2\ne 2 3\ne 3 0\ngen 1 2 3 0\ngen 2 3 0 1\n");
    let o = sclkit(&["action", "classify", "--backend", g.path().to_str().unwrap(), "--g", "ab"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Elliptic"));
}

#[test]
fn json_and_qm_eval() {
    let o = sclkit(&["--json", "qm-eval", "--w", "ab", "--g", "abAB", "--n-max", "50"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["subcommand"], "qm-eval");
    assert_eq!(v["results"]["defect_certified"], 12);
    assert_eq!(sclkit(&["qm-eval", "--w", "ab", "--g", "x?"]).status.code(), Some(2));
}

#[test]
fn projection_between_axes() {
    let o = sclkit(&["action", "project", "--backend", "cayley:2", "--g", "ab", "--h", "aB"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(field(&stdout(&o), "diameter").is_some());
}
