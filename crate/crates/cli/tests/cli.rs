use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cran_cli::HEADER;

fn cran(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cran")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
schemes = ["joint-multivariate", "joint-independent"]
cutset = true
[network]
n_bs = 2
n_ms = 2
bs_antennas = 1
power_db = 5.0
backhaul = 2.0
[channel]
kind = "fading"
alpha_db = 0.0
"#;

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = cran(&["run", "--config", &cfg, "--trials", "1", "--seed", "9", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn row_count_covers_sweep_schemes_trials_and_cutset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("rows.csv");
    let o = cran(&[
        "run", "--config", &cfg, "--sweep", "C=1,3", "--trials", "2", "--seed", "4", "--out", out.to_str().unwrap(), "--timing",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), HEADER);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * (2 + 1) * 2);
    assert!(rows.iter().all(|r| r[2] == "C" && !r[9].is_empty()));
    assert_eq!(rows.iter().filter(|r| r[1] == "cutset").count(), 4);
    assert_eq!(rows[0][5], "4");
    assert_eq!(rows[1][5], "5");
}

#[test]
fn malformed_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let cases = [
        ("[network]\nbackhual = 2.0\n", "backhual"),
        ("[network]\nn_bs = \"three\"\n", "n_bs"),
        ("trials = 0\n", "trials"),
        ("[sweep]\nvariable = \"Q\"\nvalues = [1]\n", "sweep.variable"),
    ];
    for (text, key) in cases {
        let cfg = write(dir.path(), "bad.toml", text);
        let o = cran(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(key), "{err}");
    }
    let o = cran(&["run", "--preset", "fig4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig4"));
}

#[test]
fn universal_infeasibility_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sep.toml",
        "schemes = [\"separate-multivariate\"]\n[network]\nn_bs = 2\nn_ms = 2\nbs_antennas = 1\n[sweep]\nvariable = \"gamma\"\nvalues = [0.999]\n",
    );
    let out = dir.path().join("sep.csv");
    let o = cran(&["run", "--config", &cfg, "--trials", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&out).unwrap().contains(",infeasible,"));
}

#[test]
fn decoupled_wyner_cells_reach_single_link_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "wyner.toml",
        "[network]\nbs_antennas = 1\npower_db = 10.0\nbackhaul = 40.0\n[channel]\nkind = \"wyner\"\ng = 0.0\n",
    );
    let o = cran(&["solve", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("wyner.result.json")).unwrap()).unwrap();
    let rates = rec["per_ms_rate_bits"].as_array().unwrap();
    assert_eq!(rates.len(), 3);
    for r in rates {
        assert!((r.as_f64().unwrap() - 11f64.log2()).abs() < 1e-3);
    }
}

#[test]
fn scalar_desk_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "scalar.toml",
        "scheme = \"joint-multivariate\"\n[network]\nn_bs = 1\nn_ms = 1\nbs_antennas = 1\npower = 3.0\nbackhaul = 2.0\n[channel]\nkind = \"wyner\"\ng = 0.0\n",
    );
    let json = dir.path().join("scalar.json");
    let o = cran(&["solve", "--config", &cfg, "--out", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("sum rate") && text.contains("ordering"));
    let rec: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!((rec["sum_rate_bits"].as_f64().unwrap() - 1.1926).abs() < 1e-3);
    assert_eq!(rec["status"], "Converged");
    assert_eq!(rec["active_backhaul"][0][0], 0);
}

#[test]
fn solve_rejects_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "scheme = \"joint-multivariate\"\n[sweep]\nvariable = \"C\"\nvalues = [1]\n");
    let o = cran(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep"));
}
