use std::path::Path;
use std::process::Command;

use fekan_bench::report::read_summary;

fn fekan(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fekan"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FEKAN_OUT")
        .output()
        .unwrap()
}

/// Record CSV with the timing column dropped.
fn metrics(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let t = header.iter().position(|h| *h == "sec_per_iter").unwrap();
    text.lines()
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells.remove(t);
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn unknown_subcommand_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = fekan(&["bogus"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mismatched_preset_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = fekan(&["solve-pde", "--preset", "funfit-kan-spline"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = fekan(&["fit-function", "--preset", "no-such-preset"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_reference_names_the_fix() {
    let dir = tempfile::tempdir().unwrap();
    let o = fekan(&["solve-pde", "--preset", "ac-kan-spline-6000", "--epochs", "2", "--seeds", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("make-reference"));
}

#[test]
fn repeated_runs_write_identical_metrics() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "solve-pde",
        "--preset",
        "helm2d-fekan-spline",
        "--epochs",
        "12",
        "--n-res",
        "40",
        "--log-every",
        "3",
        "--seeds",
        "2",
    ];
    for d in [&a, &b] {
        let o = fekan(&args, d.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for seed in 0..2 {
        let f = format!("helm2d-fekan-spline/records_{seed}.csv");
        assert_eq!(metrics(&a.path().join(&f)), metrics(&b.path().join(&f)));
    }
    let s = read_summary(&a.path().join("helm2d-fekan-spline/summary.json")).unwrap();
    assert_eq!((s.epochs.preset, s.epochs.effective), (100_000, 12));
    assert_eq!((s.n_res.preset, s.n_res.effective), (10_000, 40));
    assert_eq!(s.seeds, vec![0, 1]);
}

#[test]
fn compare_of_identical_summaries_has_zero_delta() {
    let dir = tempfile::tempdir().unwrap();
    let o = fekan(&["fit-function", "--preset", "funfit-kan-relu", "--epochs", "3", "--seeds", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = dir.path().join("funfit-kan-relu/summary.json");
    let o = Command::new(env!("CARGO_BIN_EXE_fekan")).arg("compare").arg(&s).arg(&s).output().unwrap();
    assert!(o.status.success());
    let table = String::from_utf8_lossy(&o.stdout);
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().nth(2).unwrap().contains("+0.00000 (+0)"));
}

#[test]
fn env_var_sets_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fekan"))
        .args(["fit-function", "--preset", "funfit-kan-rbf", "--epochs", "2", "--seeds", "1"])
        .env("FEKAN_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("funfit-kan-rbf/records_0.csv").exists());
}

#[test]
fn ntk_run_writes_one_spectrum_per_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = fekan(&["ntk", "--preset", "ntk-kan-spline", "--epochs", "8", "--seeds", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for tau in [0, 2, 4, 8] {
        let p = dir.path().join(format!("ntk-kan-spline/spectra_{tau}.csv"));
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("seed,tau,index,eigenvalue\n"));
        assert_eq!(text.lines().count(), 1 + 128);
    }
}
