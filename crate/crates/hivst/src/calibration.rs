//! From surveillance aggregates to stage-specific parameters.
//!
//! A jurisdiction is described by four aggregate rates (transmission,
//! mortality, testing, and the aware fraction) plus the care-continuum
//! shares of the diagnosed. Stage rates are tied together by fixed
//! multipliers, so each aggregate pins down one free scale, and the
//! compartment occupancies provide the weights.

use serde::{Deserialize, Serialize};

use crate::engine::{self, Trajectory};
use crate::error::{Error, Result};
use crate::model::{
    detection_rates, ModelMatrices, PerStage, SelfTestPolicy, StageMortality, StageProgression, StageTesting,
    StageTransmission, StateVector, TestPerformance,
};
use crate::units::{per_month_to_per_year, per_year_to_per_month, MONTHS_PER_YEAR};

/// Jurisdiction-level inputs. `lambda_bar` and `phi_bar` are per month,
/// `mu_bar` per year. The `p_*` shares are fractions of all people with HIV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveillanceRecord {
    pub jurisdiction: String,
    pub lambda_bar: f64,
    pub mu_bar: f64,
    pub aware_fraction: f64,
    pub phi_bar: f64,
    pub p_nocare: f64,
    pub p_art: f64,
    pub p_vls: f64,
    /// Per-jurisdiction override of the configured unaware split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<UnawareSplit>,
}

impl SurveillanceRecord {
    pub fn validate(&self) -> Result<()> {
        let fractions = [
            ("aware_fraction", self.aware_fraction),
            ("p_nocare", self.p_nocare),
            ("p_art", self.p_art),
            ("p_vls", self.p_vls),
        ];
        for (name, x) in fractions {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::invalid(name, format!("must lie in [0, 1], got {x}")));
            }
        }
        for (name, x) in [("lambda_bar", self.lambda_bar), ("mu_bar", self.mu_bar), ("phi_bar", self.phi_bar)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {x}")));
            }
        }
        if self.p_nocare + self.p_art + self.p_vls > self.aware_fraction + 1e-9 {
            return Err(Error::invalid(
                "p_nocare + p_art + p_vls",
                format!("care-continuum shares exceed the aware fraction {}", self.aware_fraction),
            ));
        }
        if let Some(split) = &self.split {
            split.validate()?;
        }
        Ok(())
    }
}

/// Multipliers relative to a reference stage: transmission relative to
/// chronic-unaware, mortality relative to acute, testing relative to
/// chronic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumMultipliers {
    pub alpha_a: f64,
    pub alpha_s: f64,
    pub alpha_nocare: f64,
    pub alpha_art: f64,
    pub alpha_vls: f64,
    pub beta_u: f64,
    pub beta_s: f64,
    pub beta_nocare: f64,
    pub beta_art: f64,
    pub beta_vls: f64,
    pub nu_a: f64,
    pub nu_s: f64,
}

impl ContinuumMultipliers {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("alpha_a", self.alpha_a),
            ("alpha_s", self.alpha_s),
            ("alpha_nocare", self.alpha_nocare),
            ("alpha_art", self.alpha_art),
            ("alpha_vls", self.alpha_vls),
            ("beta_u", self.beta_u),
            ("beta_s", self.beta_s),
            ("beta_nocare", self.beta_nocare),
            ("beta_art", self.beta_art),
            ("beta_vls", self.beta_vls),
            ("nu_a", self.nu_a),
            ("nu_s", self.nu_s),
        ];
        for (name, x) in all {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {x}")));
            }
        }
        if self.beta_s < self.beta_u.max(self.beta_nocare).max(self.beta_art).max(self.beta_vls).max(1.0) {
            return Err(Error::invalid("beta_s", "AIDS must carry the largest mortality multiplier"));
        }
        Ok(())
    }
}

/// Shares of the undiagnosed population in the acute and AIDS stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnawareSplit {
    pub p_acute_given_unaware: f64,
    pub p_aids_given_unaware: f64,
}

impl UnawareSplit {
    pub fn new(p_acute_given_unaware: f64, p_aids_given_unaware: f64) -> Result<Self> {
        let s = UnawareSplit { p_acute_given_unaware, p_aids_given_unaware };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, s) = (self.p_acute_given_unaware, self.p_aids_given_unaware);
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid("unaware split", format!("shares must lie in [0, 1], got ({a}, {s})")));
        }
        if a + s >= 1.0 {
            return Err(Error::invalid("unaware split", "acute and AIDS shares must sum to less than 1"));
        }
        Ok(())
    }

    pub fn chronic(&self) -> f64 {
        1.0 - self.p_acute_given_unaware - self.p_aids_given_unaware
    }
}

/// Probability that a person with HIV is in each compartment, with the
/// diagnosed compartment further split by care status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub p_a: f64,
    pub p_u: f64,
    pub p_s: f64,
    pub p_d: f64,
    pub p_nocare: f64,
    pub p_art: f64,
    pub p_vls: f64,
}

impl Occupancy {
    pub fn state(&self) -> StateVector {
        StateVector::new(self.p_a, self.p_u, self.p_s, self.p_d)
    }
}

/// Annual incidence over prevalence, returned per month.
pub fn aggregate_transmission_rate(incidence_per_year: f64, prevalence: f64) -> Result<f64> {
    if !(prevalence > 0.0) {
        return Err(Error::invalid("prevalence", "must be positive"));
    }
    Ok(per_year_to_per_month(incidence_per_year / prevalence))
}

/// Annual deaths over prevalence, per year.
pub fn aggregate_mortality_rate(deaths_per_year: f64, prevalence: f64) -> Result<f64> {
    if !(prevalence > 0.0) {
        return Err(Error::invalid("prevalence", "must be positive"));
    }
    Ok(deaths_per_year / prevalence)
}

/// Annual diagnoses over the people who could have been diagnosed that year
/// (unaware at its start plus newly infected), returned per month.
pub fn aggregate_testing_rate(new_diagnoses_per_year: f64, unaware_prev_year: f64, new_infections: f64) -> Result<f64> {
    let denom = unaware_prev_year + new_infections;
    if !(denom > 0.0) {
        return Err(Error::invalid("unaware_prev_year + incidence", "must be positive"));
    }
    Ok(per_year_to_per_month(new_diagnoses_per_year / denom))
}

pub fn stage_occupancy(
    aware_fraction: f64,
    split: &UnawareSplit,
    p_nocare: f64,
    p_art: f64,
    p_vls: f64,
) -> Result<Occupancy> {
    split.validate()?;
    if !(0.0..=1.0).contains(&aware_fraction) {
        return Err(Error::invalid("aware_fraction", format!("must lie in [0, 1], got {aware_fraction}")));
    }
    let unaware = 1.0 - aware_fraction;
    let p_a = split.p_acute_given_unaware * unaware;
    let p_s = split.p_aids_given_unaware * unaware;
    let p_u = unaware - p_a - p_s;
    if p_u < 0.0 {
        return Err(Error::invalid("P(U)", format!("negative chronic occupancy {p_u}")));
    }
    let care = p_nocare + p_art + p_vls;
    let (p_nocare, p_art, p_vls) = if aware_fraction == 0.0 {
        (0.0, 0.0, 0.0)
    } else if care > 0.0 {
        let k = aware_fraction / care;
        (p_nocare * k, p_art * k, p_vls * k)
    } else {
        return Err(Error::invalid("care continuum", "diagnosed population has no care-status shares"));
    };
    Ok(Occupancy { p_a, p_u, p_s, p_d: aware_fraction, p_nocare, p_art, p_vls })
}

pub fn derive_stage_transmission(lambda_bar: f64, mult: &ContinuumMultipliers, occ: &Occupancy) -> Result<StageTransmission> {
    let diagnosed_weight = mult.alpha_nocare * occ.p_nocare + mult.alpha_art * occ.p_art + mult.alpha_vls * occ.p_vls;
    let denom = mult.alpha_a * occ.p_a + occ.p_u + mult.alpha_s * occ.p_s + diagnosed_weight;
    if !(denom > 0.0) {
        return Err(Error::invalid("transmission weights", "weighted occupancy is zero"));
    }
    let lambda_u = lambda_bar / denom;
    let lambda_d = if occ.p_d > 0.0 {
        lambda_u * diagnosed_weight / occ.p_d
    } else {
        return Err(Error::invalid("P(D)", "no diagnosed population to carry a diagnosed transmission rate"));
    };
    Ok(StageTransmission {
        lambda_a: mult.alpha_a * lambda_u,
        lambda_u,
        lambda_s: mult.alpha_s * lambda_u,
        lambda_d,
    })
}

/// Stage mortality per month from the annual aggregate `mu_bar`.
pub fn derive_stage_mortality(mu_bar_per_year: f64, mult: &ContinuumMultipliers, occ: &Occupancy) -> Result<StageMortality> {
    let diagnosed_weight = mult.beta_nocare * occ.p_nocare + mult.beta_art * occ.p_art + mult.beta_vls * occ.p_vls;
    let denom = occ.p_a + mult.beta_u * occ.p_u + mult.beta_s * occ.p_s + diagnosed_weight;
    if !(denom > 0.0) {
        return Err(Error::invalid("mortality weights", "weighted occupancy is zero"));
    }
    let mu_a = per_year_to_per_month(mu_bar_per_year / denom);
    if !(occ.p_d > 0.0) {
        return Err(Error::invalid("P(D)", "no diagnosed population to carry a diagnosed mortality rate"));
    }
    Ok(StageMortality {
        mu_a,
        mu_u: mult.beta_u * mu_a,
        mu_s: mult.beta_s * mu_a,
        mu_d: mu_a * diagnosed_weight / occ.p_d,
    })
}

/// Chronic testing rate such that the sensitivity-weighted average over the
/// undiagnosed stages equals `phi_bar`.
pub fn derive_stage_testing(
    phi_bar: f64,
    kappa_care: &PerStage,
    mult: &ContinuumMultipliers,
    split: &UnawareSplit,
) -> Result<StageTesting> {
    let denom = kappa_care.acute * mult.nu_a * split.p_acute_given_unaware
        + mult.nu_s * kappa_care.aids * split.p_aids_given_unaware
        + kappa_care.chronic * split.chronic();
    if !(denom > 0.0) {
        return Err(Error::invalid("testing weights", "weighted undiagnosed share is zero"));
    }
    StageTesting::from_chronic(phi_bar / denom, mult.nu_a, mult.nu_s)
}

/// Fully specified jurisdiction, ready to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedJurisdiction {
    pub name: String,
    pub progression: StageProgression,
    pub mortality: StageMortality,
    pub transmission: StageTransmission,
    pub testing: StageTesting,
    pub split: UnawareSplit,
    pub occupancy: Occupancy,
    pub initial: StateVector,
    pub record: SurveillanceRecord,
}

impl CalibratedJurisdiction {
    pub fn matrices(&self, policy: &SelfTestPolicy) -> Result<ModelMatrices> {
        let det = detection_rates(&self.testing, policy)?;
        Ok(ModelMatrices::new(&self.transmission, &self.progression, &self.mortality, &det))
    }

    pub fn validate(&self) -> Result<()> {
        self.progression.validate()?;
        self.mortality.validate()?;
        self.transmission.validate()?;
        self.testing.validate()?;
        self.initial.validate()?;
        let total = self.initial.total();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("initial", format!("state must be normalized, total is {total}")));
        }
        Ok(())
    }
}

/// Everything calibration needs besides the record itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub multipliers: ContinuumMultipliers,
    pub progression: StageProgression,
    pub tests: TestPerformance,
    pub split: SplitMode,
}

/// Where the unaware split comes from when a record does not carry one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitMode {
    Fixed(UnawareSplit),
    /// Solve for the split that balances stage inflow and outflow at t = 0,
    /// starting from the given guess.
    Stationary(UnawareSplit),
}

pub fn calibrate(
    record: &SurveillanceRecord,
    mult: &ContinuumMultipliers,
    split: &UnawareSplit,
    kappa_care: &PerStage,
    progression: &StageProgression,
) -> Result<CalibratedJurisdiction> {
    let degenerate = |reason: String| Error::DegenerateJurisdiction {
        jurisdiction: record.jurisdiction.clone(),
        reason,
    };
    record.validate()?;
    if record.aware_fraction >= 1.0 {
        return Err(degenerate("everyone is diagnosed; nothing seeds the undiagnosed stages".into()));
    }
    if record.aware_fraction <= 0.0 {
        return Err(degenerate("no one is diagnosed; diagnosed rates are undefined".into()));
    }
    let split = record.split.unwrap_or(*split);
    let occupancy = stage_occupancy(record.aware_fraction, &split, record.p_nocare, record.p_art, record.p_vls)?;
    let transmission = derive_stage_transmission(record.lambda_bar, mult, &occupancy)?;
    let mortality = derive_stage_mortality(record.mu_bar, mult, &occupancy)?;
    let testing = derive_stage_testing(record.phi_bar, kappa_care, mult, &split)?;
    let total = occupancy.p_a + occupancy.p_u + occupancy.p_s + occupancy.p_d;
    let cal = CalibratedJurisdiction {
        name: record.jurisdiction.clone(),
        progression: *progression,
        mortality,
        transmission,
        testing,
        split,
        occupancy,
        initial: occupancy.state().scaled(1.0 / total),
        record: record.clone(),
    };
    cal.validate().map_err(|e| degenerate(e.to_string()))?;
    Ok(cal)
}

/// Unaware split at which the chronic and AIDS compartments are in flow
/// balance at baseline: `sigma_au a = (sigma_us + phi_u + mu_u) u` and
/// `sigma_us u = (phi_s + mu_s) s`. Stage rates depend on the split through
/// the calibration weights, so this is a fixed-point iteration.
pub fn fit_stationary_split(
    record: &SurveillanceRecord,
    mult: &ContinuumMultipliers,
    guess: &UnawareSplit,
    tests: &TestPerformance,
    progression: &StageProgression,
) -> Result<UnawareSplit> {
    let mut split = *guess;
    let mut r = record.clone();
    r.split = None;
    for _ in 0..200 {
        let cal = calibrate(&r, mult, &split, &tests.kappa_care, progression)?;
        let det = detection_rates(&cal.testing, &SelfTestPolicy::baseline(*tests))?;
        let p = &cal.progression;
        let m = &cal.mortality;
        let a_over_u = (p.sigma_u_to_s + det.u + m.mu_u) / p.sigma_a_to_u;
        let s_over_u = p.sigma_u_to_s / (det.s + m.mu_s);
        let norm = 1.0 + a_over_u + s_over_u;
        let next = UnawareSplit::new(a_over_u / norm, s_over_u / norm)?;
        let change = (next.p_acute_given_unaware - split.p_acute_given_unaware)
            .abs()
            .max((next.p_aids_given_unaware - split.p_aids_given_unaware).abs());
        split = next;
        if change < 1e-14 {
            return Ok(split);
        }
    }
    Err(Error::NonFinite(format!(
        "stationary split for {} did not converge",
        record.jurisdiction
    )))
}

pub fn calibrate_with(record: &SurveillanceRecord, settings: &CalibrationSettings) -> Result<CalibratedJurisdiction> {
    let split = match (&record.split, settings.split) {
        (Some(s), _) => *s,
        (None, SplitMode::Fixed(s)) => s,
        (None, SplitMode::Stationary(guess)) => {
            fit_stationary_split(record, &settings.multipliers, &guess, &settings.tests, &settings.progression)?
        }
    };
    calibrate(record, &settings.multipliers, &split, &settings.tests.kappa_care, &settings.progression)
}

/// The four surveillance aggregates in the units they are reported in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub lambda_bar_per_year: f64,
    pub mu_bar_per_year: f64,
    pub aware_pct: f64,
    pub phi_bar_per_month: f64,
}

impl Aggregates {
    pub fn of_record(r: &SurveillanceRecord) -> Self {
        Aggregates {
            lambda_bar_per_year: per_month_to_per_year(r.lambda_bar),
            mu_bar_per_year: r.mu_bar,
            aware_pct: 100.0 * r.aware_fraction,
            phi_bar_per_month: r.phi_bar,
        }
    }

    pub fn minus(&self, other: &Aggregates) -> Aggregates {
        Aggregates {
            lambda_bar_per_year: self.lambda_bar_per_year - other.lambda_bar_per_year,
            mu_bar_per_year: self.mu_bar_per_year - other.mu_bar_per_year,
            aware_pct: self.aware_pct - other.aware_pct,
            phi_bar_per_month: self.phi_bar_per_month - other.phi_bar_per_month,
        }
    }
}

/// Re-derives the aggregates from a simulated trajectory.
///
/// Each year of the window contributes incidence and deaths over the
/// year-end prevalence, the year-end aware share, and diagnoses per
/// undiagnosed person-month. The yearly values are then averaged.
pub fn aggregates_from_trajectory(traj: &Trajectory, years: usize) -> Result<Aggregates> {
    let per_year = steps_per_year(traj)?;
    if years == 0 || years * per_year >= traj.times.len() {
        return Err(Error::invalid("validation window", "trajectory is shorter than the window"));
    }
    let mut acc = [0.0; 4];
    for y in 0..years {
        let (i0, i1) = (y * per_year, (y + 1) * per_year);
        let prevalence = traj.states[i1].total();
        let incidence = traj.cumulative_incidence[i1] - traj.cumulative_incidence[i0];
        let deaths = traj.cumulative_deaths[i1] - traj.cumulative_deaths[i0];
        let diagnoses = traj.cumulative_diagnoses[i1] - traj.cumulative_diagnoses[i0];
        let exposure = traj.undiagnosed_time[i1] - traj.undiagnosed_time[i0];
        acc[0] += incidence / prevalence;
        acc[1] += deaths / prevalence;
        acc[2] += 100.0 * traj.states[i1].d / prevalence;
        acc[3] += diagnoses / exposure;
    }
    let n = years as f64;
    let out = Aggregates {
        lambda_bar_per_year: acc[0] / n,
        mu_bar_per_year: acc[1] / n,
        aware_pct: acc[2] / n,
        phi_bar_per_month: acc[3] / n,
    };
    for (name, x) in [
        ("simulated lambda_bar", out.lambda_bar_per_year),
        ("simulated mu_bar", out.mu_bar_per_year),
        ("simulated aware", out.aware_pct),
        ("simulated phi_bar", out.phi_bar_per_month),
    ] {
        crate::error::ensure_finite(name, x)?;
    }
    Ok(out)
}

fn steps_per_year(traj: &Trajectory) -> Result<usize> {
    let step = traj.step();
    let n = (MONTHS_PER_YEAR / step).round();
    if n < 1.0 || (n * step - MONTHS_PER_YEAR).abs() > 1e-9 {
        return Err(Error::invalid("step_months", format!("{step} does not divide a year")));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub jurisdiction: String,
    pub surveillance: Aggregates,
    pub simulated: Aggregates,
    /// Simulated minus surveillance.
    pub delta: Aggregates,
}

/// Simulates the baseline over `horizon_months` (whole years) and compares
/// the re-derived aggregates with the record.
pub fn validate_against_surveillance(
    cal: &CalibratedJurisdiction,
    record: &SurveillanceRecord,
    tests: &TestPerformance,
    horizon_months: f64,
    step: f64,
) -> Result<ValidationReport> {
    let years = (horizon_months / MONTHS_PER_YEAR).round();
    if years < 1.0 || (years * MONTHS_PER_YEAR - horizon_months).abs() > 1e-9 {
        return Err(Error::invalid("validation horizon", "must be a whole number of years"));
    }
    let m = cal.matrices(&SelfTestPolicy::baseline(*tests))?;
    let traj = engine::integrate_linear(&m, &cal.initial, horizon_months, step)?;
    let simulated = aggregates_from_trajectory(&traj, years as usize)?;
    let surveillance = Aggregates::of_record(record);
    Ok(ValidationReport {
        jurisdiction: cal.name.clone(),
        surveillance,
        simulated,
        delta: simulated.minus(&surveillance),
    })
}
