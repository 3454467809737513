use std::path::PathBuf;

use recutil_cli::config::{DriftConfig, DriverConfig, UtilityConfig};
use recutil_cli::{load_config, parse_config, ConfigError};

const BASE: &str = r#"
name = "small"
seed = 3

[grid]
n_steps = 20
n_paths = 500

[drift]
kind = "constant"
value = 0.2

[utility]
kind = "cara"
alpha = 1.0

[driver]
kind = "k-ignorance"
k = 0.1
"#;

#[test]
fn explicit_values_and_echoed_defaults() {
    let c = parse_config(BASE).unwrap();
    assert_eq!(c.name, "small");
    assert_eq!(c.seed, 3);
    assert_eq!((c.grid.n_steps, c.grid.n_paths), (20, 500));
    assert_eq!(c.drift, DriftConfig::Constant { value: 0.2 });
    assert_eq!(c.utility, UtilityConfig::Cara { alpha: 1.0 });
    assert_eq!(c.driver, DriverConfig::KIgnorance { k: 0.1 });
    assert_eq!(c.checks.alternatives, 32);
    assert_eq!(c.tolerances.sigmas, 4.0);
    for key in ["wealth", "grid.horizon", "market.sigma", "checks.alternatives", "bsde.basis_degree"] {
        assert!(c.defaulted.iter().any(|d| d == key), "default for {key} not echoed: {:?}", c.defaulted);
    }
    assert!(!c.defaulted.iter().any(|d| d == "seed"));
}

#[test]
fn negative_ambiguity_is_a_range_error() {
    let text = BASE.replace("k = 0.1", "k = -0.1");
    let errs = parse_config(&text).unwrap_err();
    assert!(errs.0.iter().any(|e| matches!(e, ConfigError::Range { key, .. } if key == "driver.k")), "{errs}");
    assert!(errs.to_string().contains("K >= 0"));
}

#[test]
fn duplicate_keys_report_both_lines() {
    let text = BASE.replace("alpha = 1.0", "alpha = 1.0\nalpha = 2.0");
    let errs = parse_config(&text).unwrap_err();
    let dup = errs.0.iter().find_map(|e| match e {
        ConfigError::DuplicateKey { key, first, second } => Some((key.clone(), *first, *second)),
        _ => None,
    });
    let (key, first, second) = dup.expect("duplicate reported");
    assert_eq!(key, "utility.alpha");
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[first - 1].starts_with("alpha = 1.0"));
    assert!(lines[second - 1].starts_with("alpha = 2.0"));
}

#[test]
fn every_problem_is_reported_at_once() {
    let text = BASE
        .replace("seed = 3", "seed = 3\ncolour = \"blue\"")
        .replace("n_paths = 500", "n_paths = 0")
        .replace("alpha = 1.0", "alpha = \"one\"");
    let errs = parse_config(&text).unwrap_err();
    assert!(errs.mentions("colour"), "{errs}");
    assert!(errs.mentions("grid.n_paths"), "{errs}");
    assert!(errs.mentions("utility.alpha"), "{errs}");
    assert!(errs.0.len() >= 3);
}

#[test]
fn missing_sections_and_kinds() {
    let no_driver = BASE.split("[driver]").next().unwrap();
    assert!(parse_config(no_driver).unwrap_err().mentions("driver"));
    let bad_kind = BASE.replace("kind = \"cara\"", "kind = \"quadratic\"");
    assert!(parse_config(&bad_kind).unwrap_err().mentions("utility.kind"));
    assert!(parse_config("name = ").is_err());
}

#[test]
fn log_utility_needs_positive_wealth() {
    let text = BASE
        .replace("seed = 3", "seed = 3\nwealth = -1.0")
        .replace("kind = \"cara\"\nalpha = 1.0", "kind = \"log\"");
    assert!(parse_config(&text).unwrap_err().mentions("wealth"));
}

#[test]
fn linear_driver_matches_the_market_dimension() {
    let text = BASE
        .replace("[drift]", "[market]\nsigma = [1.0, 0.5]\n\n[drift]")
        .replace("kind = \"k-ignorance\"\nk = 0.1", "kind = \"linear\"\nbeta = -0.05\ngamma = [0.1]");
    assert!(parse_config(&text).unwrap_err().mentions("driver.gamma"));
}

#[test]
fn command_line_overrides_are_recorded() {
    let c = parse_config(BASE).unwrap().with_seed(9).with_paths(1000).unwrap().with_steps(40).unwrap();
    assert_eq!((c.seed, c.grid.n_paths, c.grid.n_steps), (9, 1000, 40));
    assert_eq!(c.overrides, ["seed=9", "grid.n_paths=1000", "grid.n_steps=40"]);
    assert!(parse_config(BASE).unwrap().with_paths(0).is_err());
}

#[test]
fn shipped_scenarios_are_valid() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 7);
}
