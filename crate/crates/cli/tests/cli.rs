use std::process::{Command, Output};

const HEADER: &str = "k,h,p,N,bc,alpha,beta,delta,Nh,err_vs_exact,err_vs_truncated,cond_est,seconds";

fn pwdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwdg")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn solve_prints_csv() {
    let o = pwdg(&["solve", "--mesh", "1x12", "--p", "5", "--n", "6", "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], HEADER);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), 13);
    assert_eq!(fields[4], "dtn");
    assert_eq!(fields[8], "120");
    assert!(lines[2].starts_with("# schema=1 config_hash="));
}

#[test]
fn dof_cap_exits_with_four() {
    let o = pwdg(&["solve", "--mesh", "10x100", "--p", "7"]);
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.contains("14000") && err.contains("6000"), "{err}");
    assert!(stdout(&o).is_empty());
}

#[test]
fn config_errors_exit_with_two() {
    assert_eq!(pwdg(&["solve", "--k", "-1"]).status.code(), Some(2));
    assert_eq!(pwdg(&["solve", "--p", "2"]).status.code(), Some(2));
    assert_eq!(pwdg(&["solve", "--delta", "0"]).status.code(), Some(2));
    assert_eq!(pwdg(&["solve", "--mesh", "nonsense"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "p = 7\nunknown_key = 1\n").unwrap();
    let o = pwdg(&["solve", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown_key"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let csv = dir.path().join("out.csv");
    let svg = dir.path().join("out.svg");
    std::fs::write(
        &cfg,
        r#"
p = 4
n = 5
deterministic = true

[problem]
k = 3.0

[mesh.structured]
layers = 1
sectors = 12

[sweep]
n = [2, 4]
"#,
    )
    .unwrap();
    let o = pwdg(&[
        "sweep-n",
        "--config",
        cfg.to_str().unwrap(),
        "--p",
        "5",
        "--csv",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let written = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(written, stdout(&o));
    let rows: Vec<Vec<&str>> = written.lines().skip(1).take(2).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][0], "3");
    assert_eq!(rows[0][2], "5");
    assert_eq!((rows[0][3], rows[1][3]), ("2", "4"));
    assert_eq!(rows[0][12], "0");
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn deterministic_reruns_are_byte_identical() {
    let args = [
        "sweep-p", "--mesh", "1x12", "--values", "3,4,5", "--n", "6", "--deterministic", "--quiet",
    ];
    let a = pwdg(&args);
    let b = pwdg(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("# p_exponential_rate="));
}

#[test]
fn compare_bc_emits_both_conditions() {
    let o = pwdg(&["compare-bc", "--mesh", "1x12", "--p", "5", "--k", "2", "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let bcs: Vec<&str> = out.lines().skip(1).take(2).map(|l| l.split(',').nth(4).unwrap()).collect();
    assert_eq!(bcs, ["dtn", "impedance"]);
}

#[test]
fn selftest_passes() {
    let o = pwdg(&["selftest", "--seed", "3"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 6);
    assert!(out.lines().all(|l| l.starts_with("PASS")));
}
