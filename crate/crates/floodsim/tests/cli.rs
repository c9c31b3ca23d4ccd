use std::fs;
use std::process::Command;

fn floodsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_floodsim"))
}

#[test]
fn layouts_lists_factorisations() {
    let out = floodsim().args(["layouts", "--workers", "8"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows, vec![vec!["1", "8", "7"], vec!["2", "4", "10"], vec!["4", "2", "10"], vec!["8", "1", "7"]]);
}

#[test]
fn bench_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let curve = dir.path().join("curve.csv");
    let out = floodsim()
        .args(["bench", "--resolutions", "16,32", "--workers", "1,2,4", "--steps", "10", "--warmup", "2"])
        .args(["--extent", "512x256", "--out"])
        .arg(&csv)
        .arg("--curve")
        .arg(&curve)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "resolution_m,grid_points,workers,cx,cy,steps_per_s,exchange_pct,t_1M_steps_s"
    );
    // layouts of 1, 2 and 4 workers: 1 + 2 + 3, at two resolutions
    assert_eq!(lines.count(), 12);
    assert_eq!(fs::read_to_string(&curve).unwrap().lines().count(), 13);

    let out = floodsim().arg("report").arg("--csv").arg(&csv).output().unwrap();
    assert!(out.status.success());
    let report = String::from_utf8(out.stdout).unwrap();
    for title in ["Time to compute 1 million steps", "Weak scaling efficiency", "Strong scaling efficiency", "Layout sweep", "Exchange share"] {
        assert!(report.contains(title), "{title}\n{report}");
    }
}

#[test]
fn simulate_from_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("dem.asc"), "ncols 4\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 5\n3 2 1 0\n3 2 1 0\n").unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "[dem]\npath = \"dem.asc\"\n[time]\nduration = 1.0\n[inflow]\nside = \"west\"\nslope = 0.01\ndischarge = 1.0\n[output]\ndir = \"out\"\n",
    )
    .unwrap();
    let out = floodsim().arg("simulate").arg("--config").arg(dir.path().join("run.toml")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/report.txt").exists());
    assert!(dir.path().join("out/h_1.r32").exists());
}

#[test]
fn failures_exit_nonzero() {
    let missing = floodsim().args(["simulate", "--config", "/nonexistent/run.toml"]).output().unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/run.toml"));
    assert!(!floodsim().args(["bench", "--resolutions", "8"]).output().unwrap().status.success());
    assert!(!floodsim().args(["frobnicate"]).output().unwrap().status.success());
    assert!(!floodsim().args(["layouts", "--workers", "0"]).output().unwrap().status.success());
}
