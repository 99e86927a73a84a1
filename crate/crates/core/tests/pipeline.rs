use std::sync::Arc;

use cfhj::analysis::{audit, compare_with_kinetic, AssumptionLevel};
use cfhj::bernstein::{transform, BernsteinSample};
use cfhj::cf_kinetic::{KineticModel, Truncation, DEFAULT_CFL};
use cfhj::equilibrium::equilibrium_profile;
use cfhj::fixtures::Fixture;
use cfhj::hj_solver::{solve, HjGrid, Scheme, SolverConfig};
use cfhj::io;
use cfhj::measures::{DiscreteMeasure, SizeGrid};
use cfhj::Error;

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("cfhj-pipeline-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn trajectory_files_are_deterministic() {
    let dir = scratch("det");
    let fx: Fixture = "exp(0.4,1)".parse().unwrap();
    let grid = HjGrid::new(10.0, 201).unwrap();
    let cfg = SolverConfig::new(0.4, Scheme::Cutoff { n: 32 }, 0.5).unwrap();
    for name in ["a", "b"] {
        let traj = solve(|x| fx.value(x), grid, &cfg, &[0.25, 0.5]).unwrap();
        traj.save(
            &dir.join(format!("{name}.csv")),
            &dir.join(format!("{name}.meta")),
            &[("fixture", fx.to_string())],
        )
        .unwrap();
    }
    let a = std::fs::read(dir.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.join("b.csv")).unwrap());
    let meta = std::fs::read_to_string(dir.join("a.meta")).unwrap();
    for key in ["m=0.4", "scheme=cutoff", "n=32", "dx=", "cfl=", "fixture=exp(0.4,1)"] {
        assert!(meta.contains(key), "{key} missing from\n{meta}");
    }
    let rows = io::read_csv_file(&dir.join("a.csv"), &["t", "x", "F"]).unwrap();
    assert_eq!(rows.len(), 3 * 201);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn kinetic_snapshot_feeds_grid_solver() {
    let grid = Arc::new(SizeGrid::geometric(1e-3, 50.0, 200).unwrap());
    let mu = Fixture::Exp { m: 0.4, b: 1.0 }.measure(grid).unwrap();
    let model = KineticModel::new(mu.shared_grid(), Truncation::Outflux).unwrap();
    let kinetic = model.run(mu.clone(), 0.5, &[0.25], DEFAULT_CFL).unwrap();

    // Snapshot round trip through the measures CSV format.
    let mut buf = Vec::new();
    kinetic.last().measure.write_csv(&mut buf).unwrap();
    let back = DiscreteMeasure::read_csv(&buf[..]).unwrap();
    assert_eq!(back.weights(), kinetic.last().measure.weights());

    let hj_grid = HjGrid::new(20.0, 2001).unwrap();
    let cfg = SolverConfig::new(mu.moment(1), Scheme::singular(), 0.5).unwrap();
    let hj = solve(|x| transform(&mu, x), hj_grid, &cfg, &[0.25, 0.5]).unwrap();
    let cmp = compare_with_kinetic(&hj, &kinetic, 5.0).unwrap();
    assert!(cmp.discrepancy < 2e-3, "{cmp:?}");
    assert!(audit(&hj, mu.moment(1), AssumptionLevel::A1A2A3, Some(5.0)).all_pass());

    // Different initial data are refused.
    let other = solve(|x| 0.5 * transform(&mu, x), hj_grid, &cfg, &[0.25]).unwrap();
    assert!(matches!(
        compare_with_kinetic(&other, &kinetic, 5.0),
        Err(Error::IncompatibleInitialData { .. })
    ));
}

#[test]
fn equilibrium_profile_samples_round_trip() {
    let x: Vec<f64> = (0..101).map(|i| 0.1 * i as f64).collect();
    let p = equilibrium_profile(&x, 1.0).unwrap();
    let sample = BernsteinSample::new(p.x.clone(), p.f.clone()).unwrap();
    let mut buf = Vec::new();
    sample.write_csv(&mut buf).unwrap();
    let back = BernsteinSample::read_csv(&buf[..]).unwrap();
    assert_eq!(back.values, p.f);
    assert!((back.eval(0.05) - 0.5 * (p.f[0] + p.f[1])).abs() < 1e-15);
}
