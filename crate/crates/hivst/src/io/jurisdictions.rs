//! Jurisdiction table in CSV.
//!
//! One header line, then one row per jurisdiction. Columns are matched by
//! name: `name`, `aware_fraction`, `p_nocare`, `p_art`, `p_vls` are required.
//! Each aggregate rate is given either directly or as raw annual counts:
//!
//! | rate | direct column | raw columns |
//! |------|---------------|-------------|
//! | transmission | `lambda_bar_per_month` or `lambda_bar_per_year` | `incidence_per_year`, `prevalence` |
//! | mortality | `mu_bar_per_year` | `deaths_per_year`, `prevalence` |
//! | testing | `phi_bar_per_month` | `new_diagnoses_per_year`, `unaware_prev_year`, `incidence_per_year` |
//!
//! A direct rate wins over raw counts (with a warning). The optional pair
//! `p_acute_given_unaware`, `p_aids_given_unaware` overrides the configured
//! unaware split for that row. Empty cells count as absent.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use crate::calibration::{
    aggregate_mortality_rate, aggregate_testing_rate, aggregate_transmission_rate, SurveillanceRecord, UnawareSplit,
};
use crate::error::{Error, Result};
use crate::units::per_year_to_per_month;

const KNOWN: &[&str] = &[
    "name",
    "lambda_bar_per_month",
    "lambda_bar_per_year",
    "mu_bar_per_year",
    "aware_fraction",
    "phi_bar_per_month",
    "p_nocare",
    "p_art",
    "p_vls",
    "incidence_per_year",
    "prevalence",
    "deaths_per_year",
    "new_diagnoses_per_year",
    "unaware_prev_year",
    "p_acute_given_unaware",
    "p_aids_given_unaware",
];

#[derive(Debug, Clone, PartialEq)]
pub struct JurisdictionFile {
    pub records: Vec<SurveillanceRecord>,
}

impl JurisdictionFile {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&SurveillanceRecord> {
        self.records.iter().find(|r| r.jurisdiction == name)
    }

    /// Keeps only the named jurisdiction; unknown names are a data error.
    pub fn filter(self, name: Option<&str>) -> Result<Self> {
        match name {
            None => Ok(self),
            Some(n) => {
                let records: Vec<_> = self.records.into_iter().filter(|r| r.jurisdiction == n).collect();
                if records.is_empty() {
                    Err(Error::Data(format!("no jurisdiction named `{n}`")))
                } else {
                    Ok(JurisdictionFile { records })
                }
            }
        }
    }
}

pub fn load_jurisdictions(path: &Path) -> Result<JurisdictionFile> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_jurisdictions(file, &path.display().to_string())
}

struct Row<'a> {
    cols: &'a HashMap<String, usize>,
    rec: &'a csv::StringRecord,
    origin: &'a str,
    line: u64,
}

impl Row<'_> {
    fn err(&self, message: String) -> Error {
        Error::Row {
            path: self.origin.to_string(),
            line: self.line,
            message,
        }
    }

    fn get(&self, name: &str) -> Result<Option<f64>> {
        let Some(&i) = self.cols.get(name) else { return Ok(None) };
        let cell = self.rec.get(i).unwrap_or("").trim();
        if cell.is_empty() {
            return Ok(None);
        }
        let x: f64 = cell
            .parse()
            .map_err(|_| self.err(format!("field `{name}`: cannot parse `{cell}` as a number")))?;
        if !x.is_finite() {
            return Err(self.err(format!("field `{name}`: value must be finite")));
        }
        Ok(Some(x))
    }

    fn require(&self, name: &str) -> Result<f64> {
        self.get(name)?.ok_or_else(|| self.err(format!("field `{name}` is required")))
    }

    fn raw<const N: usize>(&self, names: [&str; N]) -> Result<Option<[f64; N]>> {
        let vals: Vec<Option<f64>> = names.iter().map(|n| self.get(n)).collect::<Result<_>>()?;
        if vals.iter().all(Option::is_some) {
            Ok(Some(std::array::from_fn(|i| vals[i].unwrap_or_default())))
        } else {
            Ok(None)
        }
    }

    /// A direct rate if present, else one computed from raw counts.
    fn rate(
        &self,
        label: &str,
        direct: Option<f64>,
        raw: Option<Result<f64>>,
        raw_desc: &str,
    ) -> Result<f64> {
        match (direct, raw) {
            (Some(v), Some(_)) => {
                log::warn!("{}: line {}: both {label} and {raw_desc} given; using {label}", self.origin, self.line);
                Ok(v)
            }
            (Some(v), None) => Ok(v),
            (None, Some(r)) => r.map_err(|e| self.err(format!("{label} from {raw_desc}: {e}"))),
            (None, None) => Err(self.err(format!("need {label} or all of {raw_desc}"))),
        }
    }
}

pub fn read_jurisdictions<R: Read>(reader: R, origin: &str) -> Result<JurisdictionFile> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::Data(format!("{origin}: cannot read header: {e}")))?
        .clone();
    let mut cols = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if cols.insert(h.to_string(), i).is_some() {
            return Err(Error::Data(format!("{origin}: duplicate column `{h}`")));
        }
    }
    if headers.is_empty() || (headers.len() == 1 && headers.get(0) == Some("")) {
        return Err(Error::Data(format!("{origin}: missing header line")));
    }
    for required in ["name", "aware_fraction", "p_nocare", "p_art", "p_vls"] {
        if !cols.contains_key(required) {
            return Err(Error::Data(format!("{origin}: missing required column `{required}`")));
        }
    }
    if cols.contains_key("lambda_bar_per_month") && cols.contains_key("lambda_bar_per_year") {
        return Err(Error::Data(format!(
            "{origin}: give lambda_bar_per_month or lambda_bar_per_year, not both"
        )));
    }
    for h in headers.iter() {
        if !KNOWN.contains(&h) {
            log::warn!("{origin}: ignoring unknown column `{h}`");
        }
    }

    let mut records = Vec::new();
    let mut names = BTreeSet::new();
    for result in csv.records() {
        let rec = result.map_err(|e| Error::Data(format!("{origin}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = Row {
            cols: &cols,
            rec: &rec,
            origin,
            line,
        };
        let name = rec.get(cols["name"]).unwrap_or("").trim().to_string();
        if name.is_empty() {
            return Err(row.err("field `name` is required".into()));
        }
        if !names.insert(name.clone()) {
            return Err(row.err(format!("duplicate jurisdiction `{name}`")));
        }

        let incidence_raw = row.raw(["incidence_per_year", "prevalence"])?;
        let lambda_direct = match (row.get("lambda_bar_per_month")?, row.get("lambda_bar_per_year")?) {
            (Some(m), _) => Some(m),
            (None, Some(y)) => Some(per_year_to_per_month(y)),
            (None, None) => None,
        };
        let lambda_bar = row.rate(
            "lambda_bar",
            lambda_direct,
            incidence_raw.map(|[i, p]| aggregate_transmission_rate(i, p)),
            "incidence_per_year, prevalence",
        )?;
        let mu_bar = row.rate(
            "mu_bar_per_year",
            row.get("mu_bar_per_year")?,
            row.raw(["deaths_per_year", "prevalence"])?
                .map(|[d, p]| aggregate_mortality_rate(d, p)),
            "deaths_per_year, prevalence",
        )?;
        let phi_bar = row.rate(
            "phi_bar_per_month",
            row.get("phi_bar_per_month")?,
            row.raw(["new_diagnoses_per_year", "unaware_prev_year", "incidence_per_year"])?
                .map(|[n, u, i]| aggregate_testing_rate(n, u, i)),
            "new_diagnoses_per_year, unaware_prev_year, incidence_per_year",
        )?;
        let split = match (row.get("p_acute_given_unaware")?, row.get("p_aids_given_unaware")?) {
            (Some(a), Some(s)) => Some(UnawareSplit::new(a, s).map_err(|e| row.err(e.to_string()))?),
            (None, None) => None,
            _ => {
                return Err(row.err(
                    "p_acute_given_unaware and p_aids_given_unaware must be given together".into(),
                ))
            }
        };
        let record = SurveillanceRecord {
            jurisdiction: name,
            lambda_bar,
            mu_bar,
            aware_fraction: row.require("aware_fraction")?,
            phi_bar,
            p_nocare: row.require("p_nocare")?,
            p_art: row.require("p_art")?,
            p_vls: row.require("p_vls")?,
            split,
        };
        record.validate().map_err(|e| row.err(e.to_string()))?;
        records.push(record);
    }
    if records.is_empty() {
        log::warn!("{origin}: no jurisdictions");
    }
    Ok(JurisdictionFile { records })
}
