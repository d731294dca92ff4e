use std::path::Path;
use std::process::{Command, Output};

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn nehari(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nehari")).args(args).output().unwrap()
}

fn run(cmd: &str, cfg: &Path, out: &Path) -> Output {
    nehari(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

const SQUARE: &str = "[geometry]\nh = 0.0625\nchambers = [[0.0, 0.0, 1.0, 1.0]]\n\n\
                      [potential]\nkind = \"cubic\"\nmu = [1.0]\n";

fn dumbbell(beta: f64, width: f64) -> String {
    format!(
        "[geometry]\nh = 0.0625\nchambers = [[0.0, 0.0, 1.0, 1.0], [1.5, 0.0, 2.5, 1.0]]\n\
         channels = [[1.0, {:?}, 1.5, {:?}]]\n\n[potential]\nkind = \"cubic\"\nmu = [1.0, 1.0]\n\
         beta = [[0.0, {beta:?}], [{beta:?}, 0.0]]\n",
        0.5 - width / 2.0,
        0.5 + width / 2.0
    )
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_decoupled_cubic_reports_zero_ar_margin() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "c.toml", &dumbbell(0.0, 0.25));
    let o = run("check", &cfg, t.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ar = stdout(&o).lines().find(|l| l.contains("name=AR")).unwrap().to_string();
    assert!(ar.contains("max_abs_raw=0.0000000000000000e0"), "{ar}");
    assert!(t.path().join("check.txt").exists());
}

#[test]
fn check_positive_coupling_warns_and_prints_surrogate() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "c.toml", &dumbbell(5.0, 0.25));
    let o = run("check", &cfg, t.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("F3 fails"));
    assert!(stdout(&o).contains("record=surrogate"));
}

#[test]
fn overlapping_chambers_fail() {
    let t = tempfile::tempdir().unwrap();
    let text = SQUARE.replace("[[0.0, 0.0, 1.0, 1.0]]", "[[0.0, 0.0, 1.0, 1.0], [0.5, 0.0, 1.5, 1.0]]");
    let cfg = write_config(t.path(), "c.toml", &text);
    let o = run("check", &cfg, t.path());
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("geometry"), "{}", stderr(&o));
}

#[test]
fn unknown_field_is_located() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "c.toml", &SQUARE.replace("mu = [1.0]", "mu = [1.0]\nmuu = 1"));
    let o = run("ground", &cfg, t.path());
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("muu") && e.contains("line"), "{e}");
}

#[test]
fn missing_config_flag_is_a_usage_error() {
    let o = nehari(&["ground"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn ground_converges_writes_grids_and_is_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "c.toml", SQUARE);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    let oa = run("ground", &cfg, &a);
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert!(stdout(&oa).contains("status=converged"));
    run("ground", &cfg, &b);
    for f in ["report.txt", "u_1.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("u_1.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 17);
    assert!(rows.iter().all(|r| r.split(',').count() == 17));
    assert!(csv.starts_with("# config_hash="));
}

#[test]
fn ground_from_zero_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let text = format!("{SQUARE}\n[experiment]\ninitial = \"zero\"\n");
    let cfg = write_config(t.path(), "c.toml", &text);
    let o = run("ground", &cfg, t.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("precondition"), "{}", stderr(&o));
}

#[test]
fn seed_flag_is_recorded() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "c.toml", SQUARE);
    let o = nehari(&["constants", "--config", cfg.to_str().unwrap(), "--out", t.path().to_str().unwrap(), "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).lines().all(|l| l.contains("seed=42") && l.contains("config_hash=")));
}

#[test]
fn single_chamber_sweep_counts_one() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "c.toml", SQUARE);
    let o = run("multibump", &cfg, t.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("count=1,expected=1"));
}

#[test]
fn wide_channel_sweep_reports_every_entry() {
    let t = tempfile::tempdir().unwrap();
    let text = dumbbell(0.0, 0.5).replace("mu = [1.0, 1.0]", "mu = [1.0]").replace(
        "beta = [[0.0, 0.0], [0.0, 0.0]]",
        "beta = [[0.0]]",
    );
    let cfg = write_config(t.path(), "c.toml", &text);
    let o = run("multibump", &cfg, t.path());
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
    let entries = std::fs::read_to_string(t.path().join("entries.txt")).unwrap();
    let lines: Vec<&str> = entries.lines().filter(|l| l.starts_with("record=entry")).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.contains("signature=") && l.contains("status=")));
    let bumps = std::fs::read_to_string(t.path().join("bumps.csv")).unwrap();
    assert_eq!(bumps.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 2);
}
