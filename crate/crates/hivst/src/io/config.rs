//! Run configuration in TOML.
//!
//! Model constants and multipliers are required; a missing key is reported
//! together with every other missing key rather than one at a time. Run
//! settings (horizon, step, grids, search bounds, output) have defaults.
//! Unknown keys are rejected so that typos do not silently fall back to a
//! default. See `data/reference.toml` for a complete example.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::calibration::{CalibrationSettings, ContinuumMultipliers, SplitMode, UnawareSplit};
use crate::engine::ShellConfig;
use crate::error::{Error, Result};
use crate::model::{PerStage, StageProgression, TestPerformance};
use crate::scenario::{CohortOptions, SweepOptions, ThresholdOptions};
use crate::units::{days_to_months, years_to_months};

pub const DEFAULT_HORIZON_MONTHS: f64 = 120.0;
pub const DEFAULT_STEP_MONTHS: f64 = 0.25;
pub const DEFAULT_VALIDATION_MONTHS: f64 = 36.0;
pub const DEFAULT_GRID_STEP: f64 = 0.05;
pub const DEFAULT_THRESHOLD_GAMMAS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub progression: StageProgression,
    pub tests: TestPerformance,
    pub multipliers: ContinuumMultipliers,
    pub split: SplitMode,
    pub horizon_months: f64,
    pub step_months: f64,
    pub validation_months: f64,
    pub grid_step: f64,
    pub sweep: SweepOptions,
    pub threshold_gammas: Vec<f64>,
    pub threshold: ThresholdOptions,
    pub shell: ShellConfig,
    pub output_dir: Option<PathBuf>,
}

struct Reader<'a> {
    root: &'a Table,
    seen: BTreeSet<String>,
    missing: Vec<String>,
    invalid: Vec<String>,
}

impl<'a> Reader<'a> {
    fn lookup(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.insert(key.to_string());
        let mut parts = key.split('.');
        let mut cur = self.root.get(parts.next()?)?;
        for p in parts {
            cur = cur.as_table()?.get(p)?;
        }
        Some(cur)
    }

    fn number(v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn required(&mut self, key: &str) -> f64 {
        match self.lookup(key) {
            None => {
                self.missing.push(key.to_string());
                f64::NAN
            }
            Some(v) => Self::number(v).unwrap_or_else(|| {
                self.invalid.push(format!("{key} must be a number"));
                f64::NAN
            }),
        }
    }

    fn optional(&mut self, key: &str, default: f64) -> f64 {
        match self.lookup(key) {
            None => default,
            Some(v) => Self::number(v).unwrap_or_else(|| {
                self.invalid.push(format!("{key} must be a number"));
                default
            }),
        }
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        match self.lookup(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.invalid.push(format!("{key} must be true or false"));
                default
            }
        }
    }

    fn text(&mut self, key: &str) -> Option<String> {
        match self.lookup(key) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.invalid.push(format!("{key} must be a string"));
                None
            }
        }
    }

    fn numbers(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.lookup(key) {
            None => default.to_vec(),
            Some(Value::Array(items)) => {
                let parsed: Option<Vec<f64>> = items.iter().map(Self::number).collect();
                parsed.unwrap_or_else(|| {
                    self.invalid.push(format!("{key} must be an array of numbers"));
                    default.to_vec()
                })
            }
            Some(_) => {
                self.invalid.push(format!("{key} must be an array of numbers"));
                default.to_vec()
            }
        }
    }

    /// Every leaf key present in the file that was never looked up.
    fn unknown_keys(&self) -> Vec<String> {
        fn walk(prefix: &str, t: &Table, out: &mut Vec<String>) {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match v {
                    Value::Table(inner) => walk(&key, inner, out),
                    _ => out.push(key),
                }
            }
        }
        let mut all = Vec::new();
        walk("", self.root, &mut all);
        all.into_iter().filter(|k| !self.seen.contains(k)).collect()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut r = Reader {
            root: &root,
            seen: BTreeSet::new(),
            missing: Vec::new(),
            invalid: Vec::new(),
        };

        let acute_days = r.required("progression.acute_duration_days");
        let chronic_years = r.required("progression.chronic_to_aids_years");

        let nu_a = r.required("testing.nu_a");
        let nu_s = r.required("testing.nu_s");

        let kappa_care = PerStage {
            acute: r.required("sensitivity.care.acute"),
            chronic: r.required("sensitivity.care.chronic"),
            aids: r.required("sensitivity.care.aids"),
        };
        let kappa_self = PerStage {
            acute: r.required("sensitivity.self.acute"),
            chronic: r.required("sensitivity.self.chronic"),
            aids: r.required("sensitivity.self.aids"),
        };
        let delay_au = r.required("confirmation_delay_days.acute_chronic");
        let delay_s = r.required("confirmation_delay_days.aids");

        let beta_u = r.required("mortality_multipliers.chronic");
        let beta_s = r.required("mortality_multipliers.aids");
        let beta_nocare = r.required("mortality_multipliers.nocare");
        let beta_art = r.required("mortality_multipliers.art");
        let beta_vls = r.required("mortality_multipliers.vls");

        let alpha_a = r.required("transmission_multipliers.acute");
        let alpha_s = r.required("transmission_multipliers.aids");
        let alpha_nocare = r.required("transmission_multipliers.nocare");
        let alpha_art = r.required("transmission_multipliers.art");
        let alpha_vls = r.required("transmission_multipliers.vls");

        let split_mode = r.text("unaware_split.mode").unwrap_or_else(|| "fixed".into());
        let split_acute = r.required("unaware_split.acute");
        let split_aids = r.required("unaware_split.aids");

        let horizon_months = r.optional("simulation.horizon_months", DEFAULT_HORIZON_MONTHS);
        let step_months = r.optional("simulation.step_months", DEFAULT_STEP_MONTHS);
        let validation_months = r.optional("simulation.validation_months", DEFAULT_VALIDATION_MONTHS);

        let grid_step = r.optional("sweep.grid_step", DEFAULT_GRID_STEP);
        let exclude_gamma_zero = r.flag("sweep.exclude_gamma_zero", false);

        let defaults = ThresholdOptions::default();
        let threshold_gammas = r.numbers("threshold.gammas", &DEFAULT_THRESHOLD_GAMMAS);
        let threshold = ThresholdOptions {
            tolerance: r.optional("threshold.tolerance", defaults.tolerance),
            chi_cap: r.optional("threshold.chi_cap", defaults.chi_cap),
            initial_bracket: r.optional("threshold.initial_bracket", defaults.initial_bracket),
        };

        let shell_defaults = ShellConfig::default();
        let shell = ShellConfig {
            initial_susceptible_fraction: r.optional(
                "shell.initial_susceptible_fraction",
                shell_defaults.initial_susceptible_fraction,
            ),
            eligible_mortality_factor: r.optional("shell.eligible_mortality_factor", shell_defaults.eligible_mortality_factor),
        };
        let output_dir = r.text("output.dir").map(PathBuf::from);

        if !r.missing.is_empty() {
            return Err(Error::MissingKeys(r.missing));
        }
        let unknown = r.unknown_keys();
        if !unknown.is_empty() {
            r.invalid.push(format!("unknown keys: {}", unknown.join(", ")));
        }
        if !r.invalid.is_empty() {
            return Err(Error::Config(r.invalid.join("; ")));
        }

        let as_config = |e: Error| Error::Config(e.to_string());
        let progression = StageProgression::new(1.0 / days_to_months(acute_days), 1.0 / years_to_months(chronic_years))
            .map_err(as_config)?;
        let tests = TestPerformance {
            kappa_self,
            kappa_care,
            t_confirm_au: days_to_months(delay_au),
            t_confirm_s: days_to_months(delay_s),
        };
        tests.validate().map_err(as_config)?;
        let multipliers = ContinuumMultipliers {
            alpha_a,
            alpha_s,
            alpha_nocare,
            alpha_art,
            alpha_vls,
            beta_u,
            beta_s,
            beta_nocare,
            beta_art,
            beta_vls,
            nu_a,
            nu_s,
        };
        multipliers.validate().map_err(as_config)?;
        let split0 = UnawareSplit::new(split_acute, split_aids).map_err(as_config)?;
        let split = match split_mode.as_str() {
            "fixed" => SplitMode::Fixed(split0),
            "stationary" => SplitMode::Stationary(split0),
            other => {
                return Err(Error::Config(format!(
                    "unaware_split.mode must be \"fixed\" or \"stationary\", got \"{other}\""
                )))
            }
        };
        shell.validate().map_err(as_config)?;
        threshold.validate().map_err(as_config)?;
        let cfg = RunConfig {
            progression,
            tests,
            multipliers,
            split,
            horizon_months,
            step_months,
            validation_months,
            grid_step,
            sweep: SweepOptions { exclude_gamma_zero },
            threshold_gammas,
            threshold,
            shell,
            output_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the run settings, including any command-line overrides.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        crate::engine::step_count(self.horizon_months, self.step_months).map_err(|e| Error::Config(e.to_string()))?;
        crate::engine::step_count(self.validation_months, self.step_months).map_err(|e| Error::Config(e.to_string()))?;
        crate::scenario::unit_grid(self.grid_step).map_err(|e| Error::Config(e.to_string()))?;
        if self.threshold_gammas.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
            return bad("threshold.gammas must lie in (0, 1]".into());
        }
        Ok(())
    }

    pub fn calibration_settings(&self) -> CalibrationSettings {
        CalibrationSettings {
            multipliers: self.multipliers,
            progression: self.progression,
            tests: self.tests,
            split: self.split,
        }
    }

    pub fn cohort_options(&self) -> CohortOptions {
        CohortOptions {
            horizon: self.horizon_months,
            step: self.step_months,
            grid_step: self.grid_step,
            sweep: self.sweep,
            threshold_gammas: self.threshold_gammas.clone(),
            threshold: self.threshold,
        }
    }
}
