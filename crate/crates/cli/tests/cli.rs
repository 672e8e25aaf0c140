use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eulersums"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("EULERSUMS_DIGITS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn temp_catalog(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("catalog.json");
    std::fs::write(&p, body).unwrap();
    p
}

const GOOD: &str = r#"{"id":"eq1","kind":"infinite-identity","family":"auxiliary","lhs":"[H / k^2]","rhs":"2*z3","class":"A","status":"core"}"#;
const BAD: &str = r#"{"id":"eq2","kind":"infinite-identity","family":"auxiliary","lhs":"[H / k^2]","rhs":"2*z3 + 1/1000000000000","class":"A","status":"core"}"#;

#[test]
fn verify_known_entry_passes() {
    let o = run(&["verify", "eq124", "--digits", "40"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("pass"));
}

#[test]
fn unknown_id_is_a_usage_error() {
    let o = run(&["verify", "nosuch"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nosuch"));
}

#[test]
fn bad_flags_exit_2() {
    assert_eq!(run(&["verify-all", "--kind", "nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["--frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "H / k^"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "H / k^2", "--k", "4"]).status.code(), Some(2));
}

#[test]
fn failing_entry_sets_exit_1_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cat = temp_catalog(&dir, &format!("[{GOOD},{BAD}]"));
    let out = dir.path().join("report.jsonl");
    let o = run(&[
        "verify-all",
        "--catalog",
        cat.to_str().unwrap(),
        "--k",
        "400",
        "--format",
        "jsonl",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.contains(r#""verdict":"fail""#));
    // the passing entry alone exits 0
    let o = run(&["verify", "eq1", "--catalog", cat.to_str().unwrap(), "--k", "400"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn exit_code_tracks_verdicts_for_random_catalogs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let dir = tempfile::tempdir().unwrap();
    for _ in 0..6 {
        let n = rng.gen_range(1..=4);
        let mut any_bad = false;
        let mut entries = Vec::new();
        for i in 1..=n {
            let bad = rng.gen_bool(0.4);
            any_bad |= bad;
            let rhs = if bad { "2*z3 + 1/1000000000000" } else { "2*z3" };
            entries.push(format!(
                r#"{{"id":"eq{i}","kind":"infinite-identity","family":"auxiliary","lhs":"[H / k^2]","rhs":"{rhs}","class":"B","status":"core"}}"#
            ));
        }
        let cat = temp_catalog(&dir, &format!("[{}]", entries.join(",")));
        let o = run(&["verify-all", "--catalog", cat.to_str().unwrap(), "--k", "400"]);
        assert_eq!(o.status.code(), Some(if any_bad { 1 } else { 0 }), "{}", stdout(&o));
    }
}

#[test]
fn jsonl_is_byte_identical_without_timing() {
    let args = ["verify-all", "--identity-order", "4", "--format", "jsonl", "--no-timing", "--k", "1000"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(!text.contains("wall_ms"));
    assert!(text.lines().next().unwrap().contains("catalog_hash"));
}

#[test]
fn lemmas_sweep() {
    let o = run(&["lemmas", "--kmax", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.contains("50/50 pass")).count(), 6);
}

#[test]
fn eval_prints_value_and_bound() {
    let o = run(&["eval", "H / k^2", "--digits", "30"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("2.4041138063191885707994763230"), "{text}");
    assert!(text.contains('±'));
    let o = run(&["eval", "H / k (k+p)", "--p", "1", "--format", "jsonl"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["value"].as_str().unwrap().starts_with("1.64493406684822643"));
}

#[test]
fn discover_and_constants() {
    let o = run(&["discover", "h^3 / k^2", "--weight", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "[h^3 / k^2] = 21/8*z2*z3");
    assert_eq!(run(&["discover", "h^3 / k^2"]).status.code(), Some(2));
    let o = run(&["constants", "--digits", "20"]);
    assert!(stdout(&o).contains("z3      1.2020569031595942854"));
}

#[test]
fn digits_from_environment() {
    let o = bin().args(["eval", "1 / k^2"]).env("EULERSUMS_DIGITS", "20").output().unwrap();
    let text = stdout(&o);
    assert!(text.starts_with("1.6449340668482264365e+00"), "{text}");
}

#[test]
fn consistency_subcommand() {
    let o = run(&["consistency", "eq127"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("consistent"));
    assert_eq!(run(&["consistency", "eq124"]).status.code(), Some(2));
}
