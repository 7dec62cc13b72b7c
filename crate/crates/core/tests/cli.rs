use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multihop"))
}

#[test]
fn run_with_overrides_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--preset", "desk-fig1", "--quiet", "--threads", "2"])
        .args(["--num_topologies", "2", "--trials_per_topology", "4", "--num_relays", "30"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("LDR") && stdout.contains("NNR") && stdout.contains("MPR"));
    let metrics = fs::read_to_string(dir.path().join("metrics_LDR.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
    let echoed = fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(echoed.contains("num_relays = 30"));
}

#[test]
fn invalid_override_is_reported() {
    let out = bin()
        .args(["run", "--path_loss_exponent", "1.5", "--quiet", "--out-dir", "/nonexistent"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("path-loss exponent must be ≥ 2"));
}

#[test]
fn outage_prints_both_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let link = dir.path().join("link.toml");
    fs::write(
        &link,
        "desired_omega = 1.0\ndesired_m = 1\ninv_snr = 0.0\nthreshold = 1.0\n\
         [[interferer]]\nomega = 0.5\nm = 1\nactivity = 1.0\n",
    )
    .unwrap();
    let out = bin()
        .args(["outage", "--draws", "200000", "--config"])
        .arg(&link)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[0] - 1.0 / 3.0).abs() < 1e-12);
    assert!((row[1] - row[0]).abs() < 4.0 * row[2]);
}

#[test]
fn topology_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let shadow = dir.path().join("shadow.csv");
    let out = bin()
        .args(["topology", "--preset", "desk-fig1", "--num_relays", "10", "--topology-id", "3"])
        .arg("--dump-shadowing")
        .arg(&shadow)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("index,x,y"));
    assert_eq!(text.lines().count(), 1 + 12);
    let topo = multihop::topology::Topology::read_csv(text.as_bytes()).unwrap();
    assert_eq!(topo.position(11).x, 1.0);
    assert_eq!(fs::read_to_string(&shadow).unwrap().lines().count(), 1 + 12 * 11);
}

#[test]
fn unknown_preset_fails() {
    let out = bin().args(["run", "--preset", "fig9", "--quiet"]).output().unwrap();
    assert!(!out.status.success());
}
