use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mmwlan::dbfile;

fn mmwlan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmwlan")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("in.toml");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SMALL: &str = "\
[environment]
num_aps = 2
num_ues = 4
num_lps = 20

[run]
protocols = [\"baseline\", \"rrh\", \"dualband\"]
ap_counts = [1, 2]
seeds = [3, 4]
horizon_s = 0.05

[mac]
beacon_interval_s = 0.01
";

#[test]
fn build_db_round_trips_and_rebuilds_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("a");
    let o = mmwlan(&["build-db", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let file = out.join("fingerprints.db");
    let db = dbfile::read(&file).unwrap();
    assert_eq!((db.num_lps(), db.num_aps()), (20, 2));
    assert_eq!(dbfile::to_string(&db), fs::read_to_string(&file).unwrap());

    // Per-AP group sizes add up to the LPs the AP covers.
    let stdout = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<usize>> = stdout
        .lines()
        .skip_while(|l| !l.starts_with("ap,"))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let covered = (0..db.num_lps()).filter(|&l| db.phi(l, r[0]).is_some()).count();
        assert_eq!(r[1], covered);
        assert!(r[2] <= r[3] && r[3] <= r[1], "{r:?}");
    }

    let again = dir.path().join("b");
    assert!(mmwlan(&["build-db", "--config", &cfg, "--out", again.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(&file).unwrap(), fs::read(again.join("fingerprints.db")).unwrap());
}

#[test]
fn one_ap_one_lp_gives_one_group() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[environment]\nnum_aps = 1\nnum_lps = 1\nnum_ues = 1\n");
    let out = dir.path().join("o");
    let o = mmwlan(&["build-db", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().ends_with("0,1,1,1\n"));
}

#[test]
fn sweep_writes_rows_traces_and_reproduces_from_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("s");
    let o = mmwlan(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--trace"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 2);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")), "{csv}");
    for name in ["baseline_1ap_seed3.csv", "rrh_2ap_seed4.csv", "dualband_2ap_seed3.csv"] {
        let t = fs::read_to_string(out.join("traces").join(name)).unwrap();
        assert!(t.starts_with("time_s,kind,band,src,dst,sector,duration_s,outcome\n"));
    }

    let echo = out.join("config.toml");
    let rerun = dir.path().join("r");
    let o = mmwlan(&["sweep", "--config", echo.to_str().unwrap(), "--out", rerun.to_str().unwrap(), "--trace"]);
    assert!(o.status.success());
    assert_eq!(csv, fs::read_to_string(rerun.join("results.csv")).unwrap());
}

#[test]
fn run_uses_configured_ap_count_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("r");
    let o = mmwlan(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.contains(",2,4,9,")), "{csv}");
}

#[test]
fn bad_config_names_key_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[mac]\nmax_retx = -1\n");
    let o = mmwlan(&["run", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("max_retx") && err.contains("line 2"), "{err}");
}
