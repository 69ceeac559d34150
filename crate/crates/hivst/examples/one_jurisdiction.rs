//! Calibrate one jurisdiction from the reference data and print its
//! reproduction numbers and a few policy outcomes.
//!
//! cargo run -p hivst --example one_jurisdiction -- "King County, WA"

use std::path::Path;

use hivst::calibration::calibrate_with;
use hivst::io::{load_jurisdictions, RunConfig};
use hivst::model::{detection_rates, SelfTestPolicy};
use hivst::ngm::ngm_report;
use hivst::scenario::{ScenarioRunner, ThresholdOptions};

fn main() -> hivst::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "Alameda County, CA".into());
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let cfg = RunConfig::load(&data.join("reference.toml"))?;
    let records = load_jurisdictions(&data.join("reference_jurisdictions.csv"))?.filter(Some(&name))?;
    let cal = calibrate_with(&records.records[0], &cfg.calibration_settings())?;

    let det = detection_rates(&cal.testing, &SelfTestPolicy::baseline(cfg.tests))?;
    let ngm = ngm_report(&cal.transmission, &cal.progression, &cal.mortality, &det)?;
    println!("{name}: R_t = {:.3}, R_Awr = {:.3}", ngm.r_t, ngm.r_awr);

    let runner = ScenarioRunner::new(&cal, cfg.tests, cfg.horizon_months, cfg.step_months)?;
    for (gamma, chi) in [(0.0, 0.1), (0.5, 0.0), (0.5, 0.1), (1.0, 0.2)] {
        let o = runner.run(gamma, chi)?;
        println!("  gamma {gamma:.2} chi {chi:.2}: incidence {:+.2}%", o.pct_change);
    }
    for gamma in [0.25, 1.0] {
        let th = runner.threshold_chi(gamma, &ThresholdOptions::default())?;
        println!("  break-even testing increase at gamma {gamma:.2}: {:.1}%", 100.0 * th.chi_threshold);
    }
    Ok(())
}
