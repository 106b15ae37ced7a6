mod common;

use common::{four_cell, rel, Oracle, OracleParams};
use gridscc::Region;
use std::path::Path;
use std::process::{Command, Output};

fn gridscc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridscc"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, extra: serde_json::Value) {
    let mut config = serde_json::json!({
        "scenario": "scenario.csv",
        "patterns": ["pattern.csv"],
        "trajectory": "global.csv",
        "horizon": 2012,
    });
    for (k, v) in extra.as_object().unwrap() {
        config[k] = v.clone();
    }
    std::fs::write(dir.join("config.json"), config.to_string()).unwrap();
}

fn read_csv(path: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().clone();
    (header, reader.records().map(|r| r.unwrap()).collect())
}

fn run_ok(dir: &Path, args: &[&str]) {
    let out = gridscc(args, dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn table1_matches_oracle_and_fractions_sum_to_100() {
    let dir = tempfile::tempdir().unwrap();
    four_cell().write_files(dir.path());
    write_config(dir.path(), serde_json::json!({"discount_rates": [0.015, 0.03]}));
    run_ok(dir.path(), &["run", "--config", "config.json", "--out", "out"]);

    let (header, rows) = read_csv(&dir.path().join("out/table1.csv"));
    assert_eq!(&header, vec!["rate", "region", "R", "R_pct", "RP", "RP_pct", "RU", "RU_pct", "RPU", "RPU_pct"]);
    assert_eq!(rows.len(), 2 * 14);
    let fixture = four_cell();
    let oracle = Oracle {
        fixture: &fixture,
        params: OracleParams {
            horizon: 2012,
            ..OracleParams::default()
        },
    };
    for block in rows.chunks(14) {
        let rate: f64 = block[0][0].parse().unwrap();
        assert_eq!(&block[13][1], "WORLD");
        for (col, (uhi, persistence)) in [(2, (false, false)), (4, (false, true)), (6, (true, false)), (8, (true, true))] {
            let pct: f64 = block[..13].iter().map(|r| r[col + 1].parse::<f64>().unwrap()).sum();
            assert!((pct - 100.0).abs() < 0.05, "fractions sum to {pct}");
            assert_eq!(&block[13][col + 1], "100.00");
            let want = oracle.evaluate(uhi, persistence, rate);
            for r in [Region::Us, Region::India] {
                let row = block.iter().find(|row| &row[1] == r.code()).unwrap();
                let got: f64 = row[col].parse().unwrap();
                assert!((got - want.scc[&r]).abs() < 1e-6, "{} col {col}: {got} vs {}", r.code(), want.scc[&r]);
            }
        }
    }

    let (header, rows) = read_csv(&dir.path().join("out/table2.csv"));
    assert_eq!(&header, vec!["rate", "variant", "region", "nu", "u", "u_nouhi", "exposure", "uhi_int", "total"]);
    assert_eq!(rows.len(), 2 * 2 * 14);
    for d in ["scuhi.csv", "percentiles.csv", "manifest.json"] {
        assert!(dir.path().join("out").join(d).exists(), "{d}");
    }
}

#[test]
fn single_region_holds_the_whole_scc() {
    let dir = tempfile::tempdir().unwrap();
    let mut fixture = four_cell();
    fixture.regions = vec![Region::Africa; 4];
    fixture.write_files(dir.path());
    write_config(dir.path(), serde_json::json!({}));
    run_ok(dir.path(), &["run", "--config", "config.json", "--out", "out"]);
    let (_, rows) = read_csv(&dir.path().join("out/table1.csv"));
    let africa = rows.iter().find(|r| &r[1] == "AFRICA").unwrap();
    for col in [3, 5, 7, 9] {
        assert_eq!(&africa[col], "100.00");
    }
    let us = rows.iter().find(|r| &r[1] == "US").unwrap();
    assert_eq!(&us[2], "0.000000");
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    let warnings = manifest["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("no cells for regions")));
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    four_cell().write_files(dir.path());
    write_config(dir.path(), serde_json::json!({"ecs": {"kind": "sample", "draws": 6}}));
    run_ok(dir.path(), &["run", "--config", "config.json", "--out", "a", "--seed", "7", "--threads", "1"]);
    run_ok(dir.path(), &["run", "--config", "config.json", "--out", "b", "--seed", "7", "--threads", "3"]);
    run_ok(dir.path(), &["run", "--config", "config.json", "--out", "c", "--seed", "8"]);
    for f in ["table1.csv", "table2.csv", "scuhi.csv", "percentiles.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let a = std::fs::read(dir.path().join("a/percentiles.csv")).unwrap();
    let c = std::fs::read(dir.path().join("c/percentiles.csv")).unwrap();
    assert_ne!(a, c);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["ecs_draws"].as_array().unwrap().len(), 6);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
}

#[test]
fn invalid_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    four_cell().write_files(dir.path());
    write_config(dir.path(), serde_json::json!({"discount_rates": [-2.0]}));
    let out = gridscc(&["run", "--config", "config.json", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());

    write_config(dir.path(), serde_json::json!({"variants": ["RX"]}));
    assert_eq!(gridscc(&["validate", "--config", "config.json"], dir.path()).status.code(), Some(2));

    std::fs::remove_file(dir.path().join("pattern.csv")).unwrap();
    write_config(dir.path(), serde_json::json!({}));
    assert_eq!(gridscc(&["run", "--config", "config.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn bad_data_exits_3_and_leaves_no_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    four_cell().write_files(dir.path());
    std::fs::write(dir.path().join("scenario.csv"), "cell_id,lat,lon,region,year,population,gdp\n1,0,0,NOWHERE,2010,1,1\n").unwrap();
    write_config(dir.path(), serde_json::json!({}));
    std::fs::create_dir(dir.path().join("out")).unwrap();
    let out = gridscc(&["run", "--config", "config.json", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(dir.path().join("out")).unwrap().count(), 0);
}

#[test]
fn sidecar_threshold_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    four_cell().write_files(dir.path());
    std::fs::write(dir.path().join("scenario.meta.json"), r#"{"threshold": 1000000}"#).unwrap();
    write_config(dir.path(), serde_json::json!({}));
    run_ok(dir.path(), &["run", "--config", "config.json", "--out", "out"]);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["urban_threshold"], 1_000_000.0);
    let (_, rows) = read_csv(&dir.path().join("out/table2.csv"));
    let india = rows.iter().find(|r| &r[1] == "RU" && &r[2] == "INDIA").unwrap();
    assert_eq!(&india[4], "0.000000");
}

#[test]
fn validate_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    four_cell().write_files(dir.path());
    write_config(dir.path(), serde_json::json!({}));
    let out = gridscc(&["validate", "--config", "config.json"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["discount_rates"], serde_json::json!([0.015]));
    assert_eq!(v["urban_threshold"], 250_000.0);
    assert_eq!(v["pulse"]["year"], 2010);
    assert_eq!(v["pulse"]["size_gtc"], 1.0);
    assert_eq!(v["variants"], serde_json::json!(["R", "RP", "RU", "RPU"]));
}

#[test]
fn pulse_subcommand_prints_response() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridscc(&["pulse", "--year", "2010", "--horizon", "2030"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "year,elapsed,delta_t_degC");
    assert_eq!(lines.len(), 22);
    let values: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(values[0], 0.0);
    let peak = values.iter().cloned().fold(f64::MIN, f64::max);
    assert!(rel(peak, values[10]) < 1e-12);
}
