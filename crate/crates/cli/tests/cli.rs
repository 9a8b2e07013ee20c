use std::path::Path;
use std::process::{Command, Output};

fn dme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dme"))
        .args(args)
        .env_remove("DME_SEED")
        .output()
        .expect("spawn dme")
}

fn rows(csv: &[u8]) -> Vec<Vec<String>> {
    String::from_utf8(csv.to_vec())
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(table: &[Vec<String>], name: &str) -> Vec<String> {
    let idx = table[0].iter().position(|h| h == name).expect(name);
    table[1..].iter().map(|r| r[idx].clone()).collect()
}

#[test]
fn estimate_worst_case_binary() {
    let out = dme(&[
        "estimate",
        "--protocol",
        "sb",
        "--n",
        "16",
        "--d",
        "128",
        "--source",
        "lemma4",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = rows(&out.stdout);
    assert_eq!(table.len(), 2);
    let mse: f64 = column(&table, "empirical_mse")[0].parse().unwrap();
    let se: f64 = column(&table, "mse_std_error")[0].parse().unwrap();
    assert!((mse - 3.9375).abs() <= 4.0 * se, "mse {mse} se {se}");
    assert_eq!(column(&table, "trials")[0], "1000");
}

#[test]
fn exact_sweep_from_spec_has_zero_mse() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    let out = dir.path().join("out.csv");
    std::fs::write(&spec, "protocol = \"exact\"\nn = 5\nd = 9\ntrials = 20\n").unwrap();
    let res = dme(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let table = rows(&std::fs::read(&out).unwrap());
    for v in column(&table, "empirical_mse") {
        assert_eq!(v.parse::<f64>().unwrap(), 0.0);
    }
    assert_eq!(column(&table, "n"), vec!["5"]);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let out = dme(&[
        "estimate",
        "--protocol",
        "sk",
        "--k",
        "4",
        "--n",
        "3",
        "--d",
        "8",
        "--trials",
        "5",
    ]);
    let table = rows(&out.stdout);
    let mse = &column(&table, "empirical_mse")[0];
    let mantissa = mse.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{mse}");
}

#[test]
fn seed_flag_env_and_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    std::fs::write(
        &spec,
        "seed = 7\nprotocol = \"sk\"\nk = 4\nn = 4\nd = 16\ntrials = 10\n",
    )
    .unwrap();
    let spec = spec.to_str().unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dme"));
        cmd.args(["estimate", "--spec", spec])
            .args(extra)
            .env_remove("DME_SEED");
        if let Some(v) = env {
            cmd.env("DME_SEED", v);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let file_seed = run(&[], None);
    assert_eq!(file_seed, run(&["--seed", "7"], None));
    assert_ne!(file_seed, run(&["--seed", "8"], None));
    assert_eq!(run(&[], Some("8")), run(&["--seed", "8"], None));
    assert_eq!(run(&["--seed", "7"], Some("8")), file_seed);
}

#[test]
fn unknown_spec_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    std::fs::write(&spec, "protocols = [\"sk\"]\n").unwrap();
    let out = dme(&["sweep", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("protocols"));
}

#[test]
fn exit_codes() {
    assert_eq!(dme(&["estimate", "--bogus"]).status.code(), Some(1));
    assert_eq!(dme(&[]).status.code(), Some(1));
    assert_eq!(
        dme(&["estimate", "--protocol", "sk", "--k", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(dme(&["estimate", "--p", "0"]).status.code(), Some(2));
    assert_eq!(
        dme(&["estimate", "--protocol", "sk,svk"]).status.code(),
        Some(2)
    );
    assert_eq!(
        dme(&["estimate", "--spec", "/nonexistent/x.toml"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        dme(&["estimate", "--source", "file:/nonexistent/data.csv"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(dme(&["--help"]).status.code(), Some(0));
}

#[test]
fn estimate_from_dataset_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    std::fs::write(&data, "1,2,3\n4,5,6\n").unwrap();
    let source = format!("file:{}", data.display());
    let out = dme(&[
        "estimate",
        "--protocol",
        "exact",
        "--source",
        &source,
        "--trials",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = rows(&out.stdout);
    assert_eq!(column(&table, "d"), vec!["3"]);
    assert_eq!(column(&table, "n"), vec!["2"]);
}

fn trajectory(args: &[&str], dir: &Path) -> Vec<Vec<String>> {
    let out = dir.join("t.csv");
    let mut all = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    let res = dme(&all);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    rows(&std::fs::read(out).unwrap())
}

#[test]
fn kmeans_and_poweriter_write_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let km = trajectory(
        &[
            "kmeans",
            "--protocol",
            "svk",
            "--k",
            "9",
            "--n",
            "4",
            "--d",
            "32",
            "--centers",
            "3",
            "--points-per-client",
            "20",
            "--iterations",
            "4",
        ],
        dir.path(),
    );
    assert_eq!(km[0], ["iteration", "cumulative_bits_per_dim", "metric"]);
    assert_eq!(km.len(), 6);
    let pw = trajectory(
        &[
            "poweriter",
            "--protocol",
            "sk",
            "--k",
            "16",
            "--n",
            "5",
            "--d",
            "24",
            "--points-per-client",
            "30",
            "--iterations",
            "6",
        ],
        dir.path(),
    );
    assert_eq!(pw.len(), 8);
    let bits: Vec<f64> = column(&pw, "cumulative_bits_per_dim")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(bits.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn apps_reject_sampling() {
    let out = dme(&[
        "kmeans",
        "--protocol",
        "sk",
        "--p",
        "0.5",
        "--n",
        "2",
        "--d",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let out = dme(&["selftest"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAILED"));
}
