use std::path::{Path, PathBuf};

use hivst::calibration::{calibrate_with, validate_against_surveillance, CalibratedJurisdiction};
use hivst::engine::{integrate_linear, integrate_nonlinear, linearization_certificate, nonlinear_shell, ShellConfig};
use hivst::io::config::{
    DEFAULT_GRID_STEP, DEFAULT_HORIZON_MONTHS, DEFAULT_STEP_MONTHS, DEFAULT_THRESHOLD_GAMMAS, DEFAULT_VALIDATION_MONTHS,
};
use hivst::io::output::{self, CertificateSummary, Table};
use hivst::io::{load_jurisdictions, RunConfig};
use hivst::model::{detection_rates, SelfTestPolicy, TestPerformance};
use hivst::ngm::ngm_report;
use hivst::par::{self, Execution};
use hivst::scenario::{benefit_risk_table, unit_grid, CohortOptions, ScenarioRunner, SweepOptions, ThresholdOptions};
use hivst::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::{Cli, Command, GlobalOpts};

const CALIBRATED_FORMAT: &str = "hivst-calibrated-v1";

/// What `calibrate` writes as JSON and `--calibrated` reads back.
#[derive(Debug, Serialize, Deserialize)]
struct CalibratedFile {
    format: String,
    tests: TestPerformance,
    jurisdictions: Vec<CalibratedJurisdiction>,
}

/// Run settings after applying command-line overrides.
struct Settings {
    tests: TestPerformance,
    horizon: f64,
    step: f64,
    validation_months: f64,
    grid_step: f64,
    sweep: SweepOptions,
    threshold_gammas: Vec<f64>,
    threshold: ThresholdOptions,
    shell: ShellConfig,
    out: PathBuf,
    exec: Execution,
}

impl Settings {
    fn new(opts: &GlobalOpts, config: Option<&RunConfig>, tests: TestPerformance) -> Result<Self> {
        let mut s = match config {
            Some(c) => Settings {
                tests,
                horizon: c.horizon_months,
                step: c.step_months,
                validation_months: c.validation_months,
                grid_step: c.grid_step,
                sweep: c.sweep,
                threshold_gammas: c.threshold_gammas.clone(),
                threshold: c.threshold,
                shell: c.shell,
                out: c.output_dir.clone().unwrap_or_else(|| "out".into()),
                exec: Execution::default(),
            },
            None => Settings {
                tests,
                horizon: DEFAULT_HORIZON_MONTHS,
                step: DEFAULT_STEP_MONTHS,
                validation_months: DEFAULT_VALIDATION_MONTHS,
                grid_step: DEFAULT_GRID_STEP,
                sweep: SweepOptions::default(),
                threshold_gammas: DEFAULT_THRESHOLD_GAMMAS.to_vec(),
                threshold: ThresholdOptions::default(),
                shell: ShellConfig::default(),
                out: "out".into(),
                exec: Execution::default(),
            },
        };
        if let Some(h) = opts.horizon_months {
            s.horizon = h;
        }
        if let Some(h) = opts.step_months {
            s.step = h;
        }
        if let Some(g) = opts.grid_step {
            s.grid_step = g;
        }
        if let Some(out) = &opts.out {
            s.out = out.clone();
        }
        if opts.sequential {
            s.exec = Execution::Sequential;
        }
        let as_config = |e: Error| Error::Config(e.to_string());
        hivst::engine::step_count(s.horizon, s.step).map_err(as_config)?;
        hivst::engine::step_count(s.validation_months, s.step).map_err(as_config)?;
        unit_grid(s.grid_step).map_err(as_config)?;
        Ok(s)
    }

    fn cohort_options(&self) -> CohortOptions {
        CohortOptions {
            horizon: self.horizon,
            step: self.step,
            grid_step: self.grid_step,
            sweep: self.sweep,
            threshold_gammas: self.threshold_gammas.clone(),
            threshold: self.threshold,
        }
    }

    fn write(&self, name: &str, table: &Table) -> Result<()> {
        let path = self.out.join(name);
        table.write(&path)?;
        println!("wrote {} ({} rows)", path.display(), table.rows.len());
        Ok(())
    }

    fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let path = self.out.join(name);
        output::write_text(&path, text)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn load_config(path: Option<&Path>) -> Result<Option<RunConfig>> {
    path.map(RunConfig::load).transpose()
}

fn read_calibrated(path: &Path) -> Result<CalibratedFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: CalibratedFile =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    if file.format != CALIBRATED_FORMAT {
        return Err(Error::Data(format!(
            "{}: expected format `{CALIBRATED_FORMAT}`, found `{}`",
            path.display(),
            file.format
        )));
    }
    file.tests.validate()?;
    for c in &file.jurisdictions {
        c.validate().map_err(|e| Error::Data(format!("{}: {}: {e}", path.display(), c.name)))?;
    }
    Ok(file)
}

/// The cohort and settings for a run, from either a jurisdiction table plus
/// configuration or a calibrated JSON file.
fn prepare(opts: &GlobalOpts) -> Result<(Vec<CalibratedJurisdiction>, Settings)> {
    let config = load_config(opts.config.as_deref())?;
    let (mut cohort, tests) = match (&opts.calibrated, &opts.jurisdictions) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("give --jurisdictions or --calibrated, not both".into()));
        }
        (Some(path), None) => {
            let file = read_calibrated(path)?;
            if let Some(c) = &config {
                if c.tests != file.tests {
                    log::warn!("test performance in --config differs from the calibrated file; using the calibrated file");
                }
            }
            (file.jurisdictions, file.tests)
        }
        (None, Some(path)) => {
            let Some(cfg) = &config else {
                return Err(Error::Config("--jurisdictions needs --config".into()));
            };
            let records = load_jurisdictions(path)?.filter(opts.jurisdiction.as_deref())?;
            let settings = cfg.calibration_settings();
            let exec = if opts.sequential { Execution::Sequential } else { Execution::default() };
            let cohort = par::try_map(exec, &records.records, |r| calibrate_with(r, &settings))?;
            (cohort, cfg.tests)
        }
        (None, None) => return Err(Error::Config("need --jurisdictions (with --config) or --calibrated".into())),
    };
    if let Some(name) = &opts.jurisdiction {
        cohort.retain(|c| &c.name == name);
        if cohort.is_empty() {
            return Err(Error::Data(format!("no jurisdiction named `{name}`")));
        }
    }
    let settings = Settings::new(opts, config.as_ref(), tests)?;
    Ok((cohort, settings))
}

fn flag_policy(opts: &GlobalOpts, tests: TestPerformance) -> Result<SelfTestPolicy> {
    let gamma = opts.gamma.unwrap_or(0.0);
    let chi = opts.chi.unwrap_or(0.0);
    SelfTestPolicy::new(gamma, chi, tests).map_err(|e| Error::Config(format!("--gamma/--chi: {e}")))
}

pub fn run(cli: &Cli) -> Result<()> {
    let opts = &cli.opts;
    if matches!(cli.command, Command::Calibrate) && opts.calibrated.is_some() {
        return Err(Error::Config("calibrate reads --jurisdictions, not --calibrated".into()));
    }
    let (cohort, s) = prepare(opts)?;
    log::info!("{} jurisdictions, horizon {} months, step {}", cohort.len(), s.horizon, s.step);
    match cli.command {
        Command::Calibrate => calibrate(&cohort, &s),
        Command::Ngm => ngm(&cohort, &s),
        Command::Simulate => simulate(&cohort, &s, flag_policy(opts, s.tests)?),
        Command::Sweep => sweep(&cohort, &s),
        Command::Threshold => threshold(&cohort, &s, opts.gamma),
        Command::Validate => validate(&cohort, &s),
        Command::Report => report(&cohort, &s),
    }
}

fn calibrate(cohort: &[CalibratedJurisdiction], s: &Settings) -> Result<()> {
    s.write("calibrated.csv", &output::calibrated_table(cohort)?)?;
    let file = CalibratedFile {
        format: CALIBRATED_FORMAT.into(),
        tests: s.tests,
        jurisdictions: cohort.to_vec(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| Error::NonFinite(e.to_string()))?;
    s.write_text("calibrated.json", &(json + "\n"))
}

fn ngm(cohort: &[CalibratedJurisdiction], s: &Settings) -> Result<()> {
    let baseline = SelfTestPolicy::baseline(s.tests);
    let rows = par::try_map(s.exec, cohort, |c| {
        let det = detection_rates(&c.testing, &baseline)?;
        Ok::<_, Error>((c.name.clone(), ngm_report(&c.transmission, &c.progression, &c.mortality, &det)?))
    })?;
    s.write("ngm.csv", &output::ngm_table(&rows)?)
}

fn simulate(cohort: &[CalibratedJurisdiction], s: &Settings, policy: SelfTestPolicy) -> Result<()> {
    let results = par::try_map(s.exec, cohort, |c| {
        let runner = ScenarioRunner::new(c, s.tests, s.horizon, s.step)?;
        let outcome = runner.run(policy.gamma, policy.chi)?;
        let traj = integrate_linear(&c.matrices(&policy)?, &c.initial, s.horizon, s.step)?;
        Ok::<_, Error>((c.name.clone(), runner.baseline(), outcome, traj))
    })?;
    let mut summary = Table::new(&[
        "jurisdiction",
        "gamma",
        "chi",
        "baseline_incidence",
        "cumulative_incidence",
        "pct_change",
        "aware_end",
    ]);
    let mut paths = Table::new(&["jurisdiction", "month", "a", "u", "s", "d", "cumulative_incidence", "aware"]);
    for (name, base, o, traj) in &results {
        let mut row = vec![name.clone()];
        for x in [
            policy.gamma,
            policy.chi,
            base.cumulative_incidence,
            o.cumulative_incidence,
            o.pct_change / 100.0,
            o.aware_pct_end / 100.0,
        ] {
            row.push(output::sig6(x)?);
        }
        summary.push(row);
        for cells in output::trajectory_table(traj)?.rows {
            let mut row = vec![name.clone()];
            row.extend(cells);
            paths.push(row);
        }
    }
    s.write("simulate.csv", &summary)?;
    s.write("trajectories.csv", &paths)
}

fn sweep(cohort: &[CalibratedJurisdiction], s: &Settings) -> Result<()> {
    let grid = unit_grid(s.grid_step)?;
    let results = par::try_map(s.exec, cohort, |c| {
        ScenarioRunner::new(c, s.tests, s.horizon, s.step)?.sweep(&grid, &grid, &s.sweep, Execution::Sequential)
    })?;
    s.write("sweep.csv", &output::sweep_table(&results)?)?;
    s.write("sweep_summary.csv", &output::sweep_summary_table(&results)?)
}

fn threshold(cohort: &[CalibratedJurisdiction], s: &Settings, gamma: Option<f64>) -> Result<()> {
    let gammas = match gamma {
        Some(g) if g > 0.0 && g <= 1.0 => vec![g],
        Some(g) => return Err(Error::Config(format!("--gamma must lie in (0, 1] for a threshold, got {g}"))),
        None => s.threshold_gammas.clone(),
    };
    let per = par::try_map(s.exec, cohort, |c| {
        let runner = ScenarioRunner::new(c, s.tests, s.horizon, s.step)?;
        gammas
            .iter()
            .map(|&g| Ok((c.name.clone(), runner.threshold_chi(g, &s.threshold)?)))
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<_> = per.into_iter().flatten().collect();
    s.write("thresholds.csv", &output::threshold_table(&rows)?)
}

fn validate(cohort: &[CalibratedJurisdiction], s: &Settings) -> Result<()> {
    let baseline = SelfTestPolicy::baseline(s.tests);
    let results = par::try_map(s.exec, cohort, |c| {
        let report = validate_against_surveillance(c, &c.record, &s.tests, s.validation_months, s.step)?;
        let p = nonlinear_shell(c, &s.shell)?;
        let det = detection_rates(&c.testing, &baseline)?;
        let nl = integrate_nonlinear(&p, &det, s.horizon, s.step)?;
        let lin = integrate_linear(&c.matrices(&baseline)?, &c.initial, s.horizon, s.step)?;
        let cert = CertificateSummary {
            jurisdiction: c.name.clone(),
            certificate: linearization_certificate(&p, &nl),
            linear_incidence: lin.total_incidence(),
            nonlinear_incidence: *nl.cumulative_incidence.last().unwrap_or(&0.0),
        };
        Ok::<_, Error>((report, cert))
    })?;
    let (reports, certs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    for c in certs.iter().filter(|c| !c.certificate.passes()) {
        log::warn!("{}: susceptible drift exceeds the linearization bound", c.jurisdiction);
    }
    s.write("validation.csv", &output::validation_table(&reports)?)?;
    s.write("certificate.csv", &output::certificate_table(&certs)?)
}

fn report(cohort: &[CalibratedJurisdiction], s: &Settings) -> Result<()> {
    let table = benefit_risk_table(cohort, &s.tests, &s.cohort_options(), s.exec)?;
    s.write("report.csv", &output::report_table(&table)?)?;
    s.write_text("report.txt", &output::report_text(&table)?)?;
    s.write("reduction_scatter.csv", &output::scatter_table(&table.reduction_scatter())?)?;
    s.write("threshold_scatter.csv", &output::scatter_table(&table.threshold_scatter())?)
}
