#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use hivst::calibration::{calibrate_with, CalibratedJurisdiction, SurveillanceRecord, UnawareSplit};
use hivst::io::{load_jurisdictions, RunConfig};
use hivst::model::{
    DetectionRates, PerStage, StageMortality, StageProgression, StageTransmission, TestPerformance,
};
use rand::Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn reference_config() -> RunConfig {
    RunConfig::load(&data_dir().join("reference.toml")).expect("reference config loads")
}

pub fn reference_records() -> Vec<SurveillanceRecord> {
    load_jurisdictions(&data_dir().join("reference_jurisdictions.csv"))
        .expect("reference jurisdictions load")
        .records
}

pub fn reference_cohort() -> (RunConfig, Vec<CalibratedJurisdiction>) {
    let cfg = reference_config();
    let settings = cfg.calibration_settings();
    let cohort = reference_records()
        .iter()
        .map(|r| calibrate_with(r, &settings).expect("reference row calibrates"))
        .collect();
    (cfg, cohort)
}

pub fn find<'a>(cohort: &'a [CalibratedJurisdiction], prefix: &str) -> &'a CalibratedJurisdiction {
    cohort
        .iter()
        .find(|c| c.name.starts_with(prefix))
        .unwrap_or_else(|| panic!("no jurisdiction {prefix}"))
}

/// A published table keyed by jurisdiction name, one map of columns per row.
pub fn published(file: &str) -> HashMap<String, HashMap<String, f64>> {
    let path = data_dir().join("published").join(file);
    let mut rdr = csv::Reader::from_path(&path).expect("published table opens");
    let headers = rdr.headers().unwrap().clone();
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let mut row = HashMap::new();
        for (h, v) in headers.iter().zip(rec.iter()).skip(1) {
            row.insert(h.to_string(), v.parse::<f64>().unwrap());
        }
        out.insert(rec[0].to_string(), row);
    }
    out
}

pub fn reference_tests() -> TestPerformance {
    TestPerformance {
        kappa_self: PerStage { acute: 0.0, chronic: 0.92, aids: 0.92 },
        kappa_care: PerStage { acute: 0.83, chronic: 1.0, aids: 1.0 },
        t_confirm_au: 90.0 / 30.4375,
        t_confirm_s: 30.0 / 30.4375,
    }
}

/// A plausible jurisdiction drawn from ranges that cover the reference
/// cohort.
pub fn random_record<R: Rng>(rng: &mut R, name: String) -> SurveillanceRecord {
    let aware: f64 = rng.gen_range(0.78..0.95);
    let vls = rng.gen_range(0.5..0.8);
    let nocare = rng.gen_range(0.5..1.0);
    SurveillanceRecord {
        jurisdiction: name,
        lambda_bar: rng.gen_range(0.012..0.055) / 12.0,
        mu_bar: rng.gen_range(0.006..0.02),
        aware_fraction: aware,
        phi_bar: rng.gen_range(0.013..0.032),
        p_nocare: nocare * (1.0 - vls) * aware,
        p_art: (1.0 - nocare) * (1.0 - vls) * aware,
        p_vls: vls * aware,
        split: Some(UnawareSplit {
            p_acute_given_unaware: rng.gen_range(0.0..0.06),
            p_aids_given_unaware: rng.gen_range(0.06..0.15),
        }),
    }
}

/// Raw stage parameters satisfying the model's structural invariants.
pub struct RawParams {
    pub trans: StageTransmission,
    pub prog: StageProgression,
    pub mort: StageMortality,
    pub det: DetectionRates,
}

pub fn random_params<R: Rng>(rng: &mut R) -> RawParams {
    let mut mort = StageMortality {
        mu_a: rng.gen_range(1e-4..5e-3),
        mu_u: rng.gen_range(1e-4..5e-3),
        mu_s: 0.0,
        mu_d: rng.gen_range(1e-4..5e-3),
    };
    mort.mu_s = mort.mu_a.max(mort.mu_u).max(mort.mu_d) * rng.gen_range(1.0..4.0);
    let mut trans = StageTransmission {
        lambda_a: 0.0,
        lambda_u: rng.gen_range(0.0..0.01),
        lambda_s: rng.gen_range(0.0..0.01),
        lambda_d: rng.gen_range(0.0..0.01),
    };
    trans.lambda_a = trans.lambda_u.max(trans.lambda_s).max(trans.lambda_d) * rng.gen_range(1.0..12.0);
    RawParams {
        trans,
        prog: StageProgression {
            sigma_a_to_u: rng.gen_range(0.2..1.0),
            sigma_u_to_s: rng.gen_range(0.003..0.05),
        },
        mort,
        det: DetectionRates {
            a: rng.gen_range(0.0..0.1),
            u: rng.gen_range(0.0..0.1),
            s: rng.gen_range(0.0..0.3),
        },
    }
}
