//! Result tables.
//!
//! Machine-readable numbers carry six significant digits and shares are
//! decimals (0.073, not 7.3). Cells are formatted eagerly so that a
//! non-finite value fails the run before anything is written.

use std::fmt::Write as _;
use std::path::Path;

use crate::calibration::{CalibratedJurisdiction, ValidationReport};
use crate::engine::{ErrorCertificate, Trajectory};
use crate::error::{Error, Result};
use crate::ngm::NgmReport;
use crate::scenario::{CohortTable, ScatterPoint, SweepResult, ThresholdResult};

/// `x` with six significant digits, trailing zeros dropped.
pub fn sig6(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("refusing to write {x}")));
    }
    if x == 0.0 {
        return Ok("0".into());
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        Ok(trim(&format!("{x:.decimals$}")))
    } else {
        Ok(format!("{}e{exp}", trim(mantissa)))
    }
}

/// A rectangular table of preformatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Data(format!("csv: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv()?)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn nums(xs: &[f64]) -> Result<Vec<String>> {
    xs.iter().map(|&x| sig6(x)).collect()
}

fn row(name: &str, xs: &[f64]) -> Result<Vec<String>> {
    let mut r = vec![name.to_string()];
    r.extend(nums(xs)?);
    Ok(r)
}

pub const REPORT_COLUMNS: [&str; 10] = [
    "jurisdiction",
    "lambda_bar",
    "phi_bar",
    "r_t",
    "r_awr",
    "pct_inc_red",
    "chi_025",
    "chi_050",
    "chi_075",
    "chi_100",
];

/// Per-jurisdiction results. Reductions and thresholds are decimals.
pub fn report_table(table: &CohortTable) -> Result<Table> {
    let mut t = Table::new(&REPORT_COLUMNS);
    let gammas = [0.25, 0.5, 0.75, 1.0];
    for r in &table.rows {
        let mut xs = vec![r.lambda_bar_per_year, r.phi_bar_per_month, r.r_t, r.r_awr, r.pct_inc_red / 100.0];
        for g in gammas {
            let th = r
                .thresholds
                .iter()
                .find(|t| (t.gamma - g).abs() < 1e-12)
                .ok_or_else(|| Error::Config(format!("report needs a threshold at gamma = {g}")))?;
            xs.push(th.chi_threshold);
        }
        t.push(row(&r.jurisdiction, &xs)?);
    }
    Ok(t)
}

/// The same table for people: one decimal on percentages.
pub fn report_text(table: &CohortTable) -> Result<String> {
    let mut s = String::new();
    let width = table.rows.iter().map(|r| r.jurisdiction.len()).max().unwrap_or(12).max(12);
    let _ = writeln!(
        s,
        "{:<width$}  {:>7}  {:>7}  {:>6}  {:>6}  {:>10}  {:>6}  {:>6}  {:>6}  {:>6}",
        "Jurisdiction", "lambda", "phi", "R_t", "R_Awr", "% inc red", "chi25", "chi50", "chi75", "chi100"
    );
    for r in &table.rows {
        for x in [r.lambda_bar_per_year, r.phi_bar_per_month, r.r_t, r.r_awr, r.pct_inc_red] {
            crate::error::ensure_finite(&r.jurisdiction, x)?;
        }
        let _ = write!(
            s,
            "{:<width$}  {:>7.3}  {:>7.3}  {:>6.3}  {:>6.3}  {:>9.1}%",
            r.jurisdiction, r.lambda_bar_per_year, r.phi_bar_per_month, r.r_t, r.r_awr, r.pct_inc_red
        );
        for th in &r.thresholds {
            crate::error::ensure_finite(&r.jurisdiction, th.chi_threshold)?;
            let _ = write!(s, "  {:>5.1}%", 100.0 * th.chi_threshold);
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn scatter_table(points: &[ScatterPoint]) -> Result<Table> {
    let mut t = Table::new(&["jurisdiction", "indicator", "indicator_value", "outcome", "outcome_value"]);
    for p in points {
        // Reductions are carried in percent internally.
        let outcome = if p.outcome == "pct_inc_red" { p.outcome_value / 100.0 } else { p.outcome_value };
        t.push(vec![
            p.jurisdiction.clone(),
            p.indicator.to_string(),
            sig6(p.indicator_value)?,
            p.outcome.clone(),
            sig6(outcome)?,
        ]);
    }
    Ok(t)
}

pub fn sweep_table(results: &[SweepResult]) -> Result<Table> {
    let mut t = Table::new(&["jurisdiction", "gamma", "chi", "pct_change", "aware_end"]);
    for r in results {
        for (i, g) in r.gamma_grid.iter().enumerate() {
            for (j, c) in r.chi_grid.iter().enumerate() {
                t.push(row(
                    &r.jurisdiction,
                    &[*g, *c, r.pct_change[i][j] / 100.0, r.awareness_end[i][j] / 100.0],
                )?);
            }
        }
    }
    Ok(t)
}

pub fn sweep_summary_table(results: &[SweepResult]) -> Result<Table> {
    let mut t = Table::new(&["jurisdiction", "pct_inc_red"]);
    for r in results {
        t.push(row(&r.jurisdiction, &[r.mean_reduction / 100.0])?);
    }
    Ok(t)
}

pub fn threshold_table(rows: &[(String, ThresholdResult)]) -> Result<Table> {
    let mut t = Table::new(&["jurisdiction", "gamma", "chi_threshold", "bracket_lo", "bracket_hi", "iterations"]);
    for (name, th) in rows {
        let mut r = row(name, &[th.gamma, th.chi_threshold, th.bracket.0, th.bracket.1])?;
        r.push(th.iterations.to_string());
        t.push(r);
    }
    Ok(t)
}

pub fn ngm_table(rows: &[(String, NgmReport)]) -> Result<Table> {
    let mut t = Table::new(&["jurisdiction", "r_t", "r_awr", "diagnosed_term"]);
    for (name, r) in rows {
        t.push(row(name, &[r.r_t, r.r_awr, r.diagnosed_term])?);
    }
    Ok(t)
}

pub fn calibrated_table(cohort: &[CalibratedJurisdiction]) -> Result<Table> {
    let mut t = Table::new(&[
        "jurisdiction",
        "lambda_a",
        "lambda_u",
        "lambda_s",
        "lambda_d",
        "mu_a",
        "mu_u",
        "mu_s",
        "mu_d",
        "phi_a",
        "phi_u",
        "phi_s",
        "sigma_a_to_u",
        "sigma_u_to_s",
        "p_a",
        "p_u",
        "p_s",
        "p_d",
    ]);
    for c in cohort {
        let (l, m, f, o) = (&c.transmission, &c.mortality, &c.testing, &c.occupancy);
        t.push(row(
            &c.name,
            &[
                l.lambda_a,
                l.lambda_u,
                l.lambda_s,
                l.lambda_d,
                m.mu_a,
                m.mu_u,
                m.mu_s,
                m.mu_d,
                f.phi_a,
                f.phi_u,
                f.phi_s,
                c.progression.sigma_a_to_u,
                c.progression.sigma_u_to_s,
                o.p_a,
                o.p_u,
                o.p_s,
                o.p_d,
            ],
        )?);
    }
    Ok(t)
}

pub fn validation_table(reports: &[ValidationReport]) -> Result<Table> {
    let mut t = Table::new(&[
        "jurisdiction",
        "surv_lambda_bar",
        "sim_lambda_bar",
        "delta_lambda_bar",
        "surv_mu_bar",
        "sim_mu_bar",
        "delta_mu_bar",
        "surv_aware",
        "sim_aware",
        "delta_aware",
        "surv_phi_bar",
        "sim_phi_bar",
        "delta_phi_bar",
    ]);
    for r in reports {
        let (a, b, d) = (&r.surveillance, &r.simulated, &r.delta);
        t.push(row(
            &r.jurisdiction,
            &[
                a.lambda_bar_per_year,
                b.lambda_bar_per_year,
                d.lambda_bar_per_year,
                a.mu_bar_per_year,
                b.mu_bar_per_year,
                d.mu_bar_per_year,
                a.aware_pct / 100.0,
                b.aware_pct / 100.0,
                d.aware_pct / 100.0,
                a.phi_bar_per_month,
                b.phi_bar_per_month,
                d.phi_bar_per_month,
            ],
        )?);
    }
    Ok(t)
}

/// Summary of one linearization check.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateSummary {
    pub jurisdiction: String,
    pub certificate: ErrorCertificate,
    pub linear_incidence: f64,
    pub nonlinear_incidence: f64,
}

impl CertificateSummary {
    pub fn incidence_rel_diff(&self) -> f64 {
        (self.nonlinear_incidence - self.linear_incidence).abs() / self.linear_incidence
    }
}

pub fn certificate_table(rows: &[CertificateSummary]) -> Result<Table> {
    let mut t = Table::new(&[
        "jurisdiction",
        "sigma0",
        "max_drift",
        "final_bound_a7",
        "final_bound_a8",
        "min_margin",
        "passes",
        "linear_incidence",
        "nonlinear_incidence",
        "incidence_rel_diff",
    ]);
    for r in rows {
        let c = &r.certificate;
        let a7 = *c.bound_a7.last().unwrap_or(&0.0);
        let a8 = *c.bound_a8.last().unwrap_or(&0.0);
        let mut cells = row(&r.jurisdiction, &[c.sigma0, c.max_drift(), a7, a8])?;
        // No drift at all leaves the margin unbounded; the cell stays empty.
        let margin = c.min_margin();
        cells.push(if margin.is_finite() { sig6(margin)? } else { String::new() });
        cells.push(c.passes().to_string());
        cells.extend(nums(&[r.linear_incidence, r.nonlinear_incidence, r.incidence_rel_diff()])?);
        t.push(cells);
    }
    Ok(t)
}

pub fn trajectory_table(traj: &Trajectory) -> Result<Table> {
    let mut t = Table::new(&["month", "a", "u", "s", "d", "cumulative_incidence", "aware"]);
    for (k, x) in traj.states.iter().enumerate() {
        t.push(nums(&[
            traj.times[k],
            x.a,
            x.u,
            x.s,
            x.d,
            traj.cumulative_incidence[k],
            x.d / x.total(),
        ])?);
    }
    Ok(t)
}
