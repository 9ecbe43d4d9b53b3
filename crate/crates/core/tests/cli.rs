use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn onebit(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_onebit"));
    c.args(args);
    if let Some(t) = threads {
        c.env("ONEBIT_THREADS", t);
    }
    c.output().unwrap()
}

const THREE_USERS: &str = r#"
n_blocks = 20000
seed = 4

[sweep]
snr_db_start = 0.0
snr_db_stop = 10.0
snr_db_step = 5.0

[[user]]
weight = 1.1
[[user]]
weight = 1.05
[[user]]
weight = 1.0
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sweep_outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), THREE_USERS);
    let mut outputs = Vec::new();
    for t in ["1", "4", "8"] {
        let out = dir.path().join(format!("out{t}"));
        let o = onebit(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()], Some(t));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(
            ["thresholds.csv", "simulation.csv", "metadata.txt"].map(|f| fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let th = String::from_utf8(outputs[0][0].clone()).unwrap();
    let mut lines = th.lines();
    assert_eq!(
        lines.next().unwrap(),
        "snr_db,r_1,r_2,r_3,phi_analytic,region,phi_fixed_point,phi_gap"
    );
    assert_eq!(lines.count(), 3);
    let sim = String::from_utf8(outputs[0][1].clone()).unwrap();
    assert!(sim.starts_with(
        "snr_db,phi_analytic,phi_mc,phi_mc_stderr,phi_full_csi,phi_full_csi_stderr,rate_1,rate_2,rate_3,frac_1,frac_2,frac_3\n0,"
    ));
}

#[test]
fn simulate_reuses_optimized_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), THREE_USERS);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(onebit(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap()], None).status.success());
    assert!(onebit(&["optimize", "--config", &cfg, "--out", b.to_str().unwrap()], None).status.success());
    let th = b.join("thresholds.csv");
    let o = onebit(
        &["simulate", "--config", &cfg, "--out", b.to_str().unwrap(), "--thresholds", th.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(a.join("simulation.csv")).unwrap(), fs::read(b.join("simulation.csv")).unwrap());
}

#[test]
fn compare_peaks_writes_losses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), THREE_USERS);
    let out = dir.path().join("p");
    let o = onebit(&["compare-peaks", "--config", &cfg, "--out", out.to_str().unwrap(), "--draws", "5"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("peaks.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "snr_db,phi_bruteforce,phi_random,phi_heuristic,loss_random_percent,loss_heuristic_percent,loss_random_worst_percent"
    );
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[1] >= v[2] && v[1] >= v[3]);
        assert!(v[6] >= v[4] && v[4] >= 0.0);
    }
}

#[test]
fn config_errors_exit_with_code_two_and_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n_blocks = 10\n[[user]]\nweight = -1.0\navg_snr_db = 3.0\n");
    let out = dir.path().join("o");
    let o = onebit(&["optimize", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));

    let missing = dir.path().join("nope.toml");
    let o = onebit(&["optimize", "--config", missing.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));

    let o = onebit(&["optimize", "--out", out.to_str().unwrap()], Some("zero"));
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(dir.path(), THREE_USERS);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "snr_db,r_1,r_2\n0,1,1\n").unwrap();
    let o = onebit(
        &["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--thresholds", bad.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), THREE_USERS);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = onebit(&["optimize", "--config", &cfg, "--out", blocker.join("x").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
}
