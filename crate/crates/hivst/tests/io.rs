mod common;

use hivst::io::output::{report_table, sig6, Table, REPORT_COLUMNS};
use hivst::io::{read_jurisdictions, RunConfig};
use hivst::scenario::{CohortRow, CohortTable, ThresholdResult};
use hivst::{Error, ErrorKind};
use proptest::prelude::*;

fn reference_toml() -> String {
    std::fs::read_to_string(common::data_dir().join("reference.toml")).unwrap()
}

fn without_lines(text: &str, prefixes: &[&str]) -> String {
    text.lines()
        .filter(|l| !prefixes.iter().any(|p| l.trim_start().starts_with(p)))
        .collect::<Vec<_>>()
        .join("\n")
}

const HEADER: &str = "name,lambda_bar_per_year,mu_bar_per_year,aware_fraction,phi_bar_per_month,p_nocare,p_art,p_vls\n";

#[test]
fn reference_config_loads() {
    let cfg = common::reference_config();
    assert_eq!(cfg.horizon_months, 120.0);
    assert_eq!(cfg.tests, common::reference_tests());
    assert_eq!(cfg.threshold_gammas, vec![0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn every_missing_key_is_named() {
    let mut text = reference_toml();
    text = text.replace("[transmission_multipliers]", "[transmission_multipliers_gone]");
    let err = RunConfig::from_toml_str(&text).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
    let Error::MissingKeys(keys) = &err else { panic!("{err}") };
    for k in ["acute", "aids", "nocare", "art", "vls"] {
        assert!(keys.contains(&format!("transmission_multipliers.{k}")), "{keys:?}");
    }
    assert!(err.to_string().contains("transmission_multipliers.vls"));
}

#[test]
fn unknown_keys_are_rejected() {
    let text = reference_toml() + "\n[extra]\nfoo = 1\n";
    let err = RunConfig::from_toml_str(&text).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
    assert!(err.to_string().contains("extra.foo"), "{err}");
}

#[test]
fn run_settings_have_defaults() {
    let text = without_lines(&reference_toml(), &["horizon_months", "step_months", "grid_step"]);
    let cfg = RunConfig::from_toml_str(&text).unwrap();
    assert_eq!((cfg.horizon_months, cfg.step_months, cfg.grid_step), (120.0, 0.25, 0.05));
}

#[test]
fn bad_config_values_are_config_errors() {
    for (from, to) in [("horizon_months = 120", "horizon_months = 121.1"), ("grid_step = 0.05", "grid_step = 0.3")] {
        let text = reference_toml().replace(from, to);
        assert_ne!(text, reference_toml(), "{from}");
        assert_eq!(RunConfig::from_toml_str(&text).unwrap_err().kind(), ErrorKind::Config);
    }
    assert_eq!(RunConfig::from_toml_str("not = [toml").unwrap_err().kind(), ErrorKind::Config);
}

#[test]
fn reference_table_loads() {
    let recs = common::reference_records();
    assert_eq!(recs.len(), 38);
    let alameda = recs.iter().find(|r| r.jurisdiction.starts_with("Alameda")).unwrap();
    assert!((alameda.lambda_bar * 12.0 - 0.028).abs() < 1e-12);
}

#[test]
fn out_of_range_share_names_the_field() {
    let csv = format!("{HEADER}A,0.03,0.01,1.2,0.016,0.1,0.1,0.6\n");
    let err = read_jurisdictions(csv.as_bytes(), "t.csv").unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
    let msg = err.to_string();
    assert!(msg.contains("aware_fraction") && msg.contains("line 2"), "{msg}");
}

#[test]
fn header_only_file_is_empty() {
    let f = read_jurisdictions(HEADER.as_bytes(), "t.csv").unwrap();
    assert!(f.is_empty());
    assert!(read_jurisdictions("".as_bytes(), "t.csv").is_err());
}

#[test]
fn raw_counts_give_rates() {
    let csv = "name,incidence_per_year,prevalence,deaths_per_year,new_diagnoses_per_year,unaware_prev_year,aware_fraction,p_nocare,p_art,p_vls\n\
               A,280,10000,90,306,1000,0.9,0.2,0.1,0.6\n";
    let f = read_jurisdictions(csv.as_bytes(), "t.csv").unwrap();
    let r = &f.records[0];
    assert!((r.lambda_bar - 0.028 / 12.0).abs() < 1e-15);
    assert!((r.mu_bar - 0.009).abs() < 1e-15);
    assert!((r.phi_bar - 306.0 / 12.0 / 1280.0).abs() < 1e-15);
}

#[test]
fn direct_rate_wins_over_raw_counts() {
    let csv = "name,lambda_bar_per_month,incidence_per_year,prevalence,mu_bar_per_year,phi_bar_per_month,aware_fraction,p_nocare,p_art,p_vls\n\
               A,0.002,280,10000,0.01,0.016,0.9,0.2,0.1,0.6\n";
    let r = &read_jurisdictions(csv.as_bytes(), "t.csv").unwrap().records[0];
    assert_eq!(r.lambda_bar, 0.002);
}

#[test]
fn both_lambda_units_are_rejected() {
    let csv = "name,lambda_bar_per_month,lambda_bar_per_year,mu_bar_per_year,phi_bar_per_month,aware_fraction,p_nocare,p_art,p_vls\n";
    assert!(read_jurisdictions(csv.as_bytes(), "t.csv").is_err());
}

#[test]
fn row_errors_carry_line_numbers() {
    let csv = format!("{HEADER}A,0.03,0.01,0.9,0.016,0.1,0.1,0.6\nA,0.03,0.01,0.9,0.016,0.1,0.1,0.6\n");
    let msg = read_jurisdictions(csv.as_bytes(), "t.csv").unwrap_err().to_string();
    assert!(msg.contains("duplicate") && msg.contains("line 3"), "{msg}");

    let csv = format!("{HEADER}A,0.03,0.01,0.9,abc,0.1,0.1,0.6\n");
    let msg = read_jurisdictions(csv.as_bytes(), "t.csv").unwrap_err().to_string();
    assert!(msg.contains("phi_bar_per_month") && msg.contains("abc"), "{msg}");

    let csv = format!("{HEADER}A,0.03,0.01,0.9,,0.1,0.1,0.6\n");
    assert!(read_jurisdictions(csv.as_bytes(), "t.csv").is_err());
}

#[test]
fn split_columns_come_in_pairs() {
    let head = HEADER.trim_end().to_string() + ",p_acute_given_unaware\n";
    let csv = format!("{head}A,0.03,0.01,0.9,0.016,0.1,0.1,0.6,0.03\n");
    assert!(read_jurisdictions(csv.as_bytes(), "t.csv").is_err());
}

#[test]
fn filter_by_name() {
    let f = hivst::io::load_jurisdictions(&common::data_dir().join("reference_jurisdictions.csv")).unwrap();
    let name = f.records[3].jurisdiction.clone();
    assert_eq!(f.clone().filter(Some(&name)).unwrap().len(), 1);
    assert_eq!(f.clone().filter(None).unwrap().len(), 38);
    assert_eq!(f.filter(Some("Atlantis")).unwrap_err().kind(), ErrorKind::Data);
}

#[test]
fn six_significant_digits() {
    let cases = [
        (0.0, "0"),
        (1.0, "1"),
        (0.073, "0.073"),
        (1.0 / 3.0, "0.333333"),
        (2.0 / 3.0 * 1e3, "666.667"),
        (123456.7, "123457"),
        (-0.0123456789, "-0.0123457"),
        (1.23456789e-7, "1.23457e-7"),
        (9.9999996, "10"),
        (2.5e9, "2.5e9"),
    ];
    for (x, want) in cases {
        assert_eq!(sig6(x).unwrap(), want, "{x}");
    }
    for bad in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
        assert_eq!(sig6(bad).unwrap_err().kind(), ErrorKind::Numerical);
    }
}

fn row(name: &str, red: f64) -> CohortRow {
    CohortRow {
        jurisdiction: name.into(),
        lambda_bar_per_year: 0.028,
        phi_bar_per_month: 0.016,
        r_t: 1.2,
        r_awr: 0.15,
        diagnosed_term: 0.3,
        pct_inc_red: red,
        thresholds: [0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&g| ThresholdResult { gamma: g, chi_threshold: 0.2 * g, bracket: (0.0, 0.0), iterations: 0 })
            .collect(),
    }
}

#[test]
fn report_columns_and_units() {
    let t = report_table(&CohortTable { rows: vec![row("A, CA", 7.3)] }).unwrap();
    assert_eq!(
        REPORT_COLUMNS,
        ["jurisdiction", "lambda_bar", "phi_bar", "r_t", "r_awr", "pct_inc_red", "chi_025", "chi_050", "chi_075", "chi_100"]
    );
    let csv = t.to_csv().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), REPORT_COLUMNS.join(","));
    assert_eq!(lines.next().unwrap(), "\"A, CA\",0.028,0.016,1.2,0.15,0.073,0.05,0.1,0.15,0.2");
    assert!(!csv.contains('\r'));
}

#[test]
fn non_finite_cells_fail_the_report() {
    assert!(report_table(&CohortTable { rows: vec![row("A", f64::NAN)] }).is_err());
    let mut t = Table::new(&["x"]);
    t.push(vec!["1".into()]);
    assert_eq!(t.to_csv().unwrap(), "x\n1\n");
}

proptest! {
    #[test]
    fn sig6_round_trips_to_six_digits(x in -1e12..1e12f64) {
        let s = sig6(x).unwrap();
        let y: f64 = s.parse().unwrap();
        prop_assert!((x - y).abs() <= 5e-6 * x.abs() + 1e-300, "{} -> {}", x, s);
        let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect::<String>();
        prop_assert!(digits.trim_start_matches('0').len() <= 6, "{}", s);
    }
}
