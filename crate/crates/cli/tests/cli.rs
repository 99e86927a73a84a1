use std::path::Path;
use std::process::{Command, Output};

fn cfhj(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfhj"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn solve_hj_writes_trajectory_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfhj(
        &["solve-hj", "m=0.4", "scheme=viscous", "epsilon=0.05", "L=10", "N=201", "t_end=0.5", "times=0.25,0.5", "out=runs/a"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("runs/a.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,F"));
    assert_eq!(lines.count(), 3 * 201);
    let meta = std::fs::read_to_string(dir.path().join("runs/a.meta")).unwrap();
    for key in ["m=0.4", "scheme=viscous", "epsilon=0.05", "N=201", "fixture=exp(0.4,1)", "shock_time=none"] {
        assert!(meta.contains(key), "{key} missing:\n{meta}");
    }
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["x", "y"] {
        let prefix = format!("out={name}");
        let out = cfhj(&["solve-hj", "m=0.7", "N=201", "L=10", "t_end=0.3", &prefix], dir.path());
        assert_eq!(code(&out), 0);
    }
    let a = std::fs::read(dir.path().join("x.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("y.csv")).unwrap());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# base run\nm=0.4\nN=101\nL=5\nt_end=0.2\nout=cfg\n").unwrap();
    let out = cfhj(&["solve-hj", "config=run.cfg", "N=121"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let meta = std::fs::read_to_string(dir.path().join("cfg.meta")).unwrap();
    assert!(meta.contains("N=121"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["solve-hj", "m=0.4", "bogus=1"][..],
        &["solve-hj", "N=101"],
        &["solve-hj", "m=-0.4"],
        &["solve-hj", "m=0.4", "cfl=2"],
        &["solve-hj", "m=0.4", "fixture=exp(0.9,1)"],
        &["validate", "nonsense"],
        &["sweep", "param=L", "values=1,2", "m=0.4"],
        &["frobnicate"],
    ] {
        let out = cfhj(args, dir.path());
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn stability_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfhj(&["solve-hj", "m=0.4", "N=401", "L=10", "t_end=0.1", "dt=0.05"], dir.path());
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_equilibrium_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfhj(&["validate", "equilibrium"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert!(stdout.contains("[PASS]"));
    assert!(stdout.contains("1 passed, 0 failed"));
}

#[test]
fn validate_with_coarse_override_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfhj(&["validate", "invariants", "N=64"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(matches!(code(&out), 0 | 1), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with('[')).count(), 4, "{stdout}");
    let failed = stdout.contains("[FAIL]");
    assert_eq!(code(&out) == 1, failed);
}

#[test]
fn sweep_over_cutoff_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfhj(
        &["sweep", "param=n", "values=8,16,32", "m=0.4", "L=10", "N=401", "t_end=0.5", "out=sw"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("sw/summary.csv")).unwrap();
    let rows: Vec<Vec<f64>> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(summary.starts_with("value,ok,shock,shock_time,F_at_1,sup_gap,change,ratio"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![8.0, 16.0, 32.0]);
    assert!(rows.iter().all(|r| r[1] == 1.0));
    // Refining the cutoff changes the solution less and less.
    assert!(rows[2][6] < rows[1][6]);
    for k in 0..3 {
        let meta = std::fs::read_to_string(dir.path().join(format!("sw/run_{k:03}.meta"))).unwrap();
        assert!(meta.contains("dt="), "{meta}");
    }
    // All runs share one step.
    let dt_line = |k: usize| {
        std::fs::read_to_string(dir.path().join(format!("sw/run_{k:03}.meta")))
            .unwrap()
            .lines()
            .find(|l| l.starts_with("dt="))
            .unwrap()
            .to_string()
    };
    assert_eq!(dt_line(0), dt_line(2));
}

#[test]
fn sweep_partial_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfhj(
        &["sweep", "param=epsilon", "values=0.05,-1", "m=0.4", "L=10", "N=201", "t_end=0.2", "out=sw"],
        dir.path(),
    );
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("sw/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().nth(2).unwrap().contains(",0.0000000000000000e0,"));
}
