use std::process::{Command, Output};

fn carleman(args: &[&str], cache: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carleman"))
        .args(args)
        .env("CARLEMAN_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn psi_of_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = carleman(&["maps", "eval", "--fn", "psi", "--w", "1", "--R", "2.5"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("2.166666666666666666666666666"), "{}", stdout(&o));
}

#[test]
fn classify_grid_partition() {
    let dir = tempfile::tempdir().unwrap();
    let o = carleman(&["classify", "--grid", "-4", "3", "-3", "3", "8", "7"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,label"));
    assert_eq!(lines.count(), 56);
    // x = -1 and x = 1 are grid columns on the row y = 0
    assert!(text.contains("-1,0,sigma0\n"));
    assert!(text.contains("1,0,sigma2\n"));
    assert!(text.contains("3,0,exterior\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let domain = carleman(&["maps", "eval", "--fn", "phi", "--z", "0,0"], dir.path());
    assert_eq!(domain.status.code(), Some(1));
    let usage = carleman(&["maps", "eval", "--fn", "nope"], dir.path());
    assert_eq!(usage.status.code(), Some(64));
    let bad_r = carleman(&["--R", "2", "chi", "--t", "1"], dir.path());
    assert_eq!(bad_r.status.code(), Some(64));
    let bad_z = carleman(&["pn", "eval", "--n", "2", "--z", "1,2,3"], dir.path());
    assert_eq!(bad_z.status.code(), Some(64));
    let pole = carleman(&["maps", "eval", "--fn", "tpm", "--z", "4.25"], dir.path());
    assert_eq!(pole.status.code(), Some(1));
    let unknown = carleman(&["verify", "nothing"], dir.path());
    assert_eq!(unknown.status.code(), Some(1));
    // a tiny precision budget makes the root finder give up
    let budget = carleman(&["--bits", "64", "pn", "zeros", "--n", "30"], dir.path());
    assert_eq!(budget.status.code(), Some(2), "{}", String::from_utf8_lossy(&budget.stderr));
    let help = carleman(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn warm_cache_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = carleman(&["pn", "zeros", "--n", "10"], dir.path());
    assert!(a.status.success());
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
    let b = carleman(&["pn", "zeros", "--n", "10"], dir.path());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 11);
    let e1 = carleman(&["pn", "eval", "--n", "8", "--z", "-1,0.25"], dir.path());
    let e2 = carleman(&["pn", "eval", "--n", "8", "--z", "-1,0.25"], dir.path());
    assert_eq!(e1.stdout, e2.stdout);
}

#[test]
fn ortho_build_reports_area() {
    let dir = tempfile::tempdir().unwrap();
    let o = carleman(&["ortho", "build", "--n", "6", "--bits", "128"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["degree"], 6);
    assert!(v["area_over_pi"].as_str().unwrap().starts_with("6.0232"));
}

#[test]
fn verify_residue_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = carleman(&["verify", "residue"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["experiment_id"], "residue");
    assert_eq!(v["pass"], true);
    assert_eq!(v["points"][1][1], "1.5");
    let csv = carleman(&["verify", "residue", "--format", "csv"], dir.path());
    let text = stdout(&csv);
    assert!(text.starts_with("experiment_id,point,re,im,degree,error\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn verify_with_config_file_and_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"points": [[0.0, 1.5]], "degrees": [8, 12, 16]}"#).unwrap();
    let out = dir.path().join("report.json");
    let o = carleman(
        &["verify", "sigma1", "--config", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["degrees"], serde_json::json!([8, 12, 16]));
    assert_eq!(v["pass"], true);
}

#[test]
fn sweeps_emit_polylines() {
    let dir = tempfile::tempdir().unwrap();
    let o = carleman(&["sweep", "regions", "--points", "16"], dir.path());
    let text = stdout(&o);
    assert!(text.starts_with("curve,index,x,y\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("L1,")).count(), 17);
    assert!(text.contains("interval,0,-0.4375,0\n"));
    let o = carleman(&["sweep", "level-curves", "--radii", "0.9,1", "--points", "8"], dir.path());
    assert_eq!(stdout(&o).lines().count(), 1 + 2 * 9);
}

#[test]
fn zero_cluster_sweep_small() {
    let dir = tempfile::tempdir().unwrap();
    let o = carleman(&["sweep", "zero-cluster", "--n", "12,16"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["zero_cluster"]["fractions"].as_array().unwrap().len(), 2);
    assert_eq!(v["zero_cluster"]["kernel"].as_array().unwrap().len(), 4);
}
