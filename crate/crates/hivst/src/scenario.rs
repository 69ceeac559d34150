//! Self-testing policy experiments over a fixed horizon.
//!
//! Every outcome is relative to the same jurisdiction's baseline run
//! (`gamma = chi = 0`), which is computed once per [`ScenarioRunner`].

use serde::{Deserialize, Serialize};

use crate::calibration::CalibratedJurisdiction;
use crate::engine;
use crate::error::{ensure_finite, Error, Result};
use crate::model::{detection_rates, SelfTestPolicy, TestPerformance};
use crate::ngm;
use crate::par::{self, Execution};

/// Relative incidence changes this small count as "no increase". It absorbs
/// roundoff when self-tests and lab tests are exact substitutes.
pub const NEUTRAL_CHANGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub gamma: f64,
    pub chi: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub cumulative_incidence: f64,
    /// Percent change in cumulative incidence against baseline.
    pub pct_change: f64,
    /// Percent of people with HIV who are diagnosed at the horizon.
    pub aware_pct_end: f64,
}

/// Evaluates policies for one jurisdiction against its cached baseline.
#[derive(Debug, Clone)]
pub struct ScenarioRunner<'a> {
    cal: &'a CalibratedJurisdiction,
    tests: TestPerformance,
    horizon: f64,
    step: f64,
    baseline: ScenarioOutcome,
}

impl<'a> ScenarioRunner<'a> {
    pub fn new(cal: &'a CalibratedJurisdiction, tests: TestPerformance, horizon: f64, step: f64) -> Result<Self> {
        engine::step_count(horizon, step)?;
        let mut runner = ScenarioRunner {
            cal,
            tests,
            horizon,
            step,
            baseline: ScenarioOutcome {
                cumulative_incidence: 0.0,
                pct_change: 0.0,
                aware_pct_end: 0.0,
            },
        };
        let (incidence, aware) = runner.simulate(0.0, 0.0)?;
        if !(incidence > 0.0) {
            return Err(Error::DegenerateJurisdiction {
                jurisdiction: cal.name.clone(),
                reason: "baseline incidence is zero".into(),
            });
        }
        runner.baseline = ScenarioOutcome {
            cumulative_incidence: incidence,
            pct_change: 0.0,
            aware_pct_end: aware,
        };
        Ok(runner)
    }

    pub fn jurisdiction(&self) -> &CalibratedJurisdiction {
        self.cal
    }

    pub fn baseline(&self) -> ScenarioOutcome {
        self.baseline
    }

    fn simulate(&self, gamma: f64, chi: f64) -> Result<(f64, f64)> {
        let policy = SelfTestPolicy::new(gamma, chi, self.tests)?;
        let m = self.cal.matrices(&policy)?;
        let (end, incidence) = engine::cumulative_incidence(&m, &self.cal.initial, self.horizon, self.step)?;
        Ok((incidence, 100.0 * end.d / end.total()))
    }

    pub fn run(&self, gamma: f64, chi: f64) -> Result<ScenarioOutcome> {
        if gamma == 0.0 && chi == 0.0 {
            return Ok(self.baseline);
        }
        let (incidence, aware) = self.simulate(gamma, chi)?;
        let base = self.baseline.cumulative_incidence;
        let pct_change = ensure_finite("pct_change", 100.0 * (incidence - base) / base)?;
        Ok(ScenarioOutcome {
            cumulative_incidence: incidence,
            pct_change,
            aware_pct_end: aware,
        })
    }

    /// Relative change in cumulative incidence (a fraction, not percent).
    pub fn incidence_change(&self, gamma: f64, chi: f64) -> Result<f64> {
        let (incidence, _) = self.simulate(gamma, chi)?;
        let base = self.baseline.cumulative_incidence;
        ensure_finite("incidence change", (incidence - base) / base)
    }

    pub fn sweep(&self, gamma_grid: &[f64], chi_grid: &[f64], options: &SweepOptions, exec: Execution) -> Result<SweepResult> {
        check_grid("gamma grid", gamma_grid)?;
        check_grid("chi grid", chi_grid)?;
        let cells: Vec<(f64, f64)> = gamma_grid
            .iter()
            .flat_map(|&g| chi_grid.iter().map(move |&c| (g, c)))
            .collect();
        let outcomes = par::try_map(exec, &cells, |&(g, c)| self.run(g, c))?;
        let nc = chi_grid.len();
        let pct_change: Vec<Vec<f64>> = outcomes.chunks(nc).map(|row| row.iter().map(|o| o.pct_change).collect()).collect();
        let awareness_end: Vec<Vec<f64>> =
            outcomes.chunks(nc).map(|row| row.iter().map(|o| o.aware_pct_end).collect()).collect();
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, &g) in gamma_grid.iter().enumerate() {
            if options.exclude_gamma_zero && g == 0.0 {
                continue;
            }
            for (j, &c) in chi_grid.iter().enumerate() {
                if g == 0.0 && c == 0.0 {
                    continue;
                }
                total -= pct_change[i][j];
                count += 1;
            }
        }
        let mean_reduction = if count == 0 { 0.0 } else { total / count as f64 };
        Ok(SweepResult {
            jurisdiction: self.cal.name.clone(),
            gamma_grid: gamma_grid.to_vec(),
            chi_grid: chi_grid.to_vec(),
            pct_change,
            mean_reduction,
            awareness_end,
        })
    }

    /// Smallest `chi` at which the policy with self-test share `gamma` no
    /// longer increases incidence. Brackets by doubling, then bisects.
    pub fn threshold_chi(&self, gamma: f64, options: &ThresholdOptions) -> Result<ThresholdResult> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid("gamma", format!("threshold search needs gamma in (0, 1], got {gamma}")));
        }
        options.validate()?;
        let harmful = |chi: f64| -> Result<bool> { Ok(self.incidence_change(gamma, chi)? > NEUTRAL_CHANGE) };
        if !harmful(0.0)? {
            return Ok(ThresholdResult {
                gamma,
                chi_threshold: 0.0,
                bracket: (0.0, 0.0),
                iterations: 0,
            });
        }
        let mut lo = 0.0;
        let mut hi = options.initial_bracket.min(options.chi_cap);
        let mut iterations = 0usize;
        while harmful(hi)? {
            iterations += 1;
            if hi >= options.chi_cap {
                return Err(Error::NoSignChange { gamma, cap: options.chi_cap });
            }
            lo = hi;
            hi = (2.0 * hi).min(options.chi_cap);
        }
        while hi - lo > options.tolerance {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            if harmful(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(ThresholdResult {
            gamma,
            chi_threshold: hi,
            bracket: (lo, hi),
            iterations,
        })
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(Error::invalid(name, "must start at 0"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(name, "must be strictly increasing"));
    }
    Ok(())
}

/// Evenly spaced points from 0 to 1 inclusive.
pub fn unit_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid("grid_step", format!("must lie in (0, 1], got {step}")));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("grid_step", format!("{step} does not divide 1")));
    }
    let n = n as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

pub fn run_scenario(
    cal: &CalibratedJurisdiction,
    spec: &ScenarioSpec,
    tests: &TestPerformance,
    step: f64,
) -> Result<ScenarioOutcome> {
    ScenarioRunner::new(cal, *tests, spec.horizon, step)?.run(spec.gamma, spec.chi)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Leave the pure testing-expansion column out of the mean.
    pub exclude_gamma_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub jurisdiction: String,
    pub gamma_grid: Vec<f64>,
    pub chi_grid: Vec<f64>,
    /// `pct_change[i][j]` is for `gamma_grid[i]`, `chi_grid[j]`, in percent.
    pub pct_change: Vec<Vec<f64>>,
    /// Mean of `-pct_change` over non-baseline cells, in percent.
    pub mean_reduction: f64,
    pub awareness_end: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub tolerance: f64,
    pub chi_cap: f64,
    pub initial_bracket: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            tolerance: 1e-4,
            chi_cap: 2.0,
            initial_bracket: 0.0625,
        }
    }
}

impl ThresholdOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", "must be positive"));
        }
        if !(self.chi_cap > 0.0 && self.initial_bracket > 0.0) {
            return Err(Error::invalid("chi_cap", "search bounds must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub gamma: f64,
    pub chi_threshold: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

pub fn sweep(
    cal: &CalibratedJurisdiction,
    tests: &TestPerformance,
    horizon: f64,
    step: f64,
    gamma_grid: &[f64],
    chi_grid: &[f64],
    exec: Execution,
) -> Result<SweepResult> {
    ScenarioRunner::new(cal, *tests, horizon, step)?.sweep(gamma_grid, chi_grid, &SweepOptions::default(), exec)
}

pub fn threshold_chi(
    cal: &CalibratedJurisdiction,
    tests: &TestPerformance,
    horizon: f64,
    step: f64,
    gamma: f64,
    options: &ThresholdOptions,
) -> Result<ThresholdResult> {
    ScenarioRunner::new(cal, *tests, horizon, step)?.threshold_chi(gamma, options)
}

/// Settings for the cohort table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortOptions {
    pub horizon: f64,
    pub step: f64,
    pub grid_step: f64,
    pub sweep: SweepOptions,
    pub threshold_gammas: Vec<f64>,
    pub threshold: ThresholdOptions,
}

/// One row per jurisdiction. `pct_inc_red` is in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub jurisdiction: String,
    pub lambda_bar_per_year: f64,
    pub phi_bar_per_month: f64,
    pub r_t: f64,
    pub r_awr: f64,
    pub diagnosed_term: f64,
    pub pct_inc_red: f64,
    pub thresholds: Vec<ThresholdResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub jurisdiction: String,
    pub indicator: &'static str,
    pub indicator_value: f64,
    pub outcome: String,
    pub outcome_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTable {
    pub rows: Vec<CohortRow>,
}

impl CohortTable {
    fn indicators(row: &CohortRow) -> [(&'static str, f64); 4] {
        [
            ("lambda_bar", row.lambda_bar_per_year),
            ("phi_bar", row.phi_bar_per_month),
            ("r_t", row.r_t),
            ("r_awr", row.r_awr),
        ]
    }

    /// Baseline indicators against the mean incidence reduction.
    pub fn reduction_scatter(&self) -> Vec<ScatterPoint> {
        let mut out = Vec::new();
        for row in &self.rows {
            for (indicator, value) in Self::indicators(row) {
                out.push(ScatterPoint {
                    jurisdiction: row.jurisdiction.clone(),
                    indicator,
                    indicator_value: value,
                    outcome: "pct_inc_red".into(),
                    outcome_value: row.pct_inc_red,
                });
            }
        }
        out
    }

    /// Baseline indicators against each threshold testing level.
    pub fn threshold_scatter(&self) -> Vec<ScatterPoint> {
        let mut out = Vec::new();
        for row in &self.rows {
            for th in &row.thresholds {
                for (indicator, value) in Self::indicators(row) {
                    out.push(ScatterPoint {
                        jurisdiction: row.jurisdiction.clone(),
                        indicator,
                        indicator_value: value,
                        outcome: format!("chi_{:03}", (th.gamma * 100.0).round() as i64),
                        outcome_value: th.chi_threshold,
                    });
                }
            }
        }
        out
    }

    pub fn column(&self, f: impl Fn(&CohortRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn threshold_column(&self, gamma: f64) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                r.thresholds
                    .iter()
                    .find(|t| (t.gamma - gamma).abs() < 1e-12)
                    .map_or(f64::NAN, |t| t.chi_threshold)
            })
            .collect()
    }
}

pub fn cohort_row(cal: &CalibratedJurisdiction, tests: &TestPerformance, options: &CohortOptions) -> Result<CohortRow> {
    let runner = ScenarioRunner::new(cal, *tests, options.horizon, options.step)?;
    let grid = unit_grid(options.grid_step)?;
    let sweep = runner.sweep(&grid, &grid, &options.sweep, Execution::Sequential)?;
    let thresholds = options
        .threshold_gammas
        .iter()
        .map(|&g| runner.threshold_chi(g, &options.threshold))
        .collect::<Result<Vec<_>>>()?;
    let det = detection_rates(&cal.testing, &SelfTestPolicy::baseline(*tests))?;
    let report = ngm::ngm_report(&cal.transmission, &cal.progression, &cal.mortality, &det)?;
    Ok(CohortRow {
        jurisdiction: cal.name.clone(),
        lambda_bar_per_year: crate::units::per_month_to_per_year(cal.record.lambda_bar),
        phi_bar_per_month: cal.record.phi_bar,
        r_t: report.r_t,
        r_awr: report.r_awr,
        diagnosed_term: report.diagnosed_term,
        pct_inc_red: sweep.mean_reduction,
        thresholds,
    })
}

/// The per-jurisdiction results table, one row per input in input order.
pub fn benefit_risk_table(
    cohort: &[CalibratedJurisdiction],
    tests: &TestPerformance,
    options: &CohortOptions,
    exec: Execution,
) -> Result<CohortTable> {
    if cohort.is_empty() {
        return Err(Error::Data("cohort is empty".into()));
    }
    let rows = par::try_map(exec, cohort, |cal| cohort_row(cal, tests, options))?;
    Ok(CohortTable { rows })
}
