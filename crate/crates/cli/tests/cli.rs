use std::path::Path;
use std::process::Command;

fn arp(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_arp")).args(args).current_dir(cwd).output().expect("spawn arp")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_top_panel_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "top.cfg",
        "name = \"top\"\nobjective = \"exampleA\", p = 3\npolicy = \"component\"\nx0 = \"1.1\"\ndist_tol = \"1e-100\"\noutputs = [\"trace_csv\", \"audit_report\", \"plotdata\"]\n",
    );
    let out = arp(&["run", &cfg, "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("res/top.trace.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    // lands on x* = 1 exactly, or within the distance tolerance
    assert!(last.starts_with("T,dist_tol,") || last.starts_with("T,zero_gradient,"), "{last}");
    let audit = std::fs::read_to_string(dir.path().join("res/top.audit.txt")).unwrap();
    assert!(audit.starts_with("ok: true"), "{audit}");
    assert!(dir.path().join("res/top.plot.csv").exists());
}

#[test]
fn malformed_decimal_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "objective = \"exampleA\"\np = 3\nx0 = \"1.1\"\nsigma0 = \"1.2.3\"\n");
    let out = arp(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4") && err.contains("sigma0"), "{err}");
}

#[test]
fn unknown_key_and_missing_file_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "objective = \"exampleA\"\nspeed = 3\n");
    assert_eq!(arp(&["run", &cfg], dir.path()).status.code(), Some(2));
    assert_eq!(arp(&["run", "nope.cfg"], dir.path()).status.code(), Some(2));
    assert_eq!(arp(&["reproduce", "fig-middle"], dir.path()).status.code(), Some(2));
}

#[test]
fn contract_violation_exits_with_code_3() {
    // x^3 has a zero second derivative at the origin, so Newton cannot step
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "flat.cfg",
        "objective = \"poly1d\", coeffs = [\"0\", \"1\", \"0\", \"0\"]\nsolver = \"newton\"\nx0 = \"0\"\n",
    );
    let out = arp(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oscillation_cycle_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = arp(&["reproduce", "example-2-1", "--out", "ex"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cyc = std::fs::read_to_string(dir.path().join("ex/oscillation.cycle.txt")).unwrap();
    assert!(cyc.contains("period: 2"), "{cyc}");
    assert!(cyc.contains("ratio: 1:1"), "{cyc}");
}

#[test]
fn reproduce_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (out, extra) in [("a", None), ("b", Some("--sequential"))] {
        let mut args = vec!["reproduce", "fig-top", "--out", out];
        args.extend(extra);
        assert!(arp(&args, dir.path()).status.success());
    }
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 12);
    for n in names {
        let a = std::fs::read(dir.path().join("a").join(&n)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(&n)).unwrap();
        assert_eq!(a, b, "{n:?} differs");
    }
}

#[test]
fn sigma_star_file() {
    let dir = tempfile::tempdir().unwrap();
    assert!(arp(&["reproduce", "sigma-star", "--out", "s"], dir.path()).status.success());
    let s = std::fs::read_to_string(dir.path().join("s/sigma_star.txt")).unwrap();
    assert!(s.contains("sigma_star: 2.666666"), "{s}");
}
