use std::process::{Command, Output};

fn rsk(args: &[&str], out_dir: Option<&std::path::Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rsk"));
    cmd.args(args).env_remove("RSK_OUT_DIR");
    if let Some(d) = out_dir {
        cmd.env("RSK_OUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn header_carries_digest_and_defaults() {
    let o = rsk(&["constellation", "--mod", "rsk"], None);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text
        .lines()
        .any(|l| l.starts_with("# manifest: ") && l.len() == "# manifest: ".len() + 64));
    let params = text.lines().find_map(|l| l.strip_prefix("# params: ")).unwrap();
    let v: serde_json::Value = serde_json::from_str(params).unwrap();
    assert_eq!(v["n_r"], 1000);
    assert_eq!(v["k1_off"], 10.0);
    assert_eq!(v["t_s"], 60.0);
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "symbol,level,transmit_count,mean,variance,lower_threshold");
    assert_eq!(body.len(), 5);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(
        rsk(&["sep", "--mod", "rsk", "--mode", "simulate"], None).status.code(),
        Some(2)
    );
    assert_eq!(rsk(&["sep", "--mod", "qam"], None).status.code(), Some(2));
    assert_eq!(
        rsk(&["sep", "--mod", "rsk", "--sweep", "gamma=1:2"], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(rsk(&["isi", "--mod", "rsk"], None).status.code(), Some(2));
}

#[test]
fn no_information_oid_fails() {
    let o = rsk(&["oid", "--model", "rsk-opt", "--gamma", "1"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-information"));
}

#[test]
fn oid_shapes() {
    let body = |args: &[&str]| -> Vec<f64> {
        stdout(&rsk(args, None))
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let csk = body(&["oid", "--model", "csk", "--grid", "201"]);
    assert!(csk.windows(2).all(|w| w[1] < w[0]));
    let rsk_opt = body(&["oid", "--model", "rsk-opt", "--grid", "201"]);
    assert_eq!(rsk_opt.len(), 201);
    let mass: f64 = rsk_opt.windows(2).map(|w| (w[0] + w[1]) / 2.0 / 200.0).sum();
    assert!((mass - 1.0).abs() < 1e-2, "{mass}");
}

#[test]
fn out_dir_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = rsk(
        &["capacity", "--model", "csk", "--cmax", "5,50", "--quiet"],
        Some(dir.path()),
    );
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("capacity.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("capacity.csv.manifest.json")).unwrap()).unwrap();
    assert!(csv.contains(manifest["digest"].as_str().unwrap()));
    assert_eq!(manifest["rows"], 2);

    // output location does not enter the digest
    let other = dir.path().join("elsewhere.csv");
    rsk(
        &[
            "capacity",
            "--model",
            "csk",
            "--cmax",
            "5,50",
            "--quiet",
            "--out",
            other.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(std::fs::read_to_string(other).unwrap(), csv);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.toml");
    std::fs::write(&cfg, "n_r = 200\nr0 = 30.0\n").unwrap();
    let text = stdout(&rsk(
        &[
            "constellation",
            "--mod",
            "csk",
            "--config",
            cfg.to_str().unwrap(),
            "--r0",
            "20",
        ],
        None,
    ));
    let params = text.lines().find_map(|l| l.strip_prefix("# params: ")).unwrap();
    let v: serde_json::Value = serde_json::from_str(params).unwrap();
    assert_eq!(v["n_r"], 200);
    assert_eq!(v["r0"], 20.0);
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(
        rsk(
            &["constellation", "--mod", "csk", "--config", cfg.to_str().unwrap()],
            None
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn isi_off_rows_match_sep_simulation() {
    let common = ["--messages", "40", "--runs", "32", "--seed", "5", "--nr", "200"];
    let isi: Vec<String> = stdout(&rsk(
        &[&["isi", "--mod", "rsk", "--ts", "30"][..], &common].concat(),
        None,
    ))
    .lines()
    .filter(|l| !l.starts_with('#'))
    .skip(1)
    .map(String::from)
    .collect();
    assert_eq!(isi.len(), 2);
    let sep: Vec<String> = stdout(&rsk(
        &[
            &["sep", "--mod", "rsk", "--mode", "simulate", "--ts", "30"][..],
            &common,
        ]
        .concat(),
        None,
    ))
    .lines()
    .filter(|l| !l.starts_with('#'))
    .skip(1)
    .map(String::from)
    .collect();
    let off: Vec<&str> = isi[0].split(',').collect();
    let row: Vec<&str> = sep[0].split(',').collect();
    assert_eq!(off[2], "0");
    assert_eq!(&off[3..], &row[2..]);
}
