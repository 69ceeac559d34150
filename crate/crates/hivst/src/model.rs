//! Stage parameters and the linear system `dx/dt = (F - V) x`.
//!
//! The state is `x = (a, u, s, d)`: acute, chronic-unaware, AIDS-unaware and
//! diagnosed people with HIV. `F` holds the new-infection terms and `V` the
//! progression, detection and death terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat4 = [[f64; 4]; 4];

/// Undiagnosed stages, the only ones that can be detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Acute,
    Chronic,
    Aids,
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {x}")))
    }
}

fn check_nonnegative(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be nonnegative and finite, got {x}")))
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in [0, 1], got {x}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageProgression {
    pub sigma_a_to_u: f64,
    pub sigma_u_to_s: f64,
}

impl StageProgression {
    pub fn new(sigma_a_to_u: f64, sigma_u_to_s: f64) -> Result<Self> {
        let p = StageProgression { sigma_a_to_u, sigma_u_to_s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("sigma_a_to_u", self.sigma_a_to_u)?;
        check_positive("sigma_u_to_s", self.sigma_u_to_s)?;
        if self.sigma_a_to_u <= self.sigma_u_to_s {
            return Err(Error::invalid(
                "sigma_a_to_u",
                "acute progression must be faster than chronic progression",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageMortality {
    pub mu_a: f64,
    pub mu_u: f64,
    pub mu_s: f64,
    pub mu_d: f64,
}

impl StageMortality {
    pub fn validate(&self) -> Result<()> {
        check_positive("mu_a", self.mu_a)?;
        check_positive("mu_u", self.mu_u)?;
        check_positive("mu_s", self.mu_s)?;
        check_positive("mu_d", self.mu_d)?;
        if self.mu_s < self.mu_a.max(self.mu_u).max(self.mu_d) {
            return Err(Error::invalid("mu_s", "AIDS mortality must be the largest stage mortality"));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.mu_a, self.mu_u, self.mu_s, self.mu_d]
    }

    pub fn min(&self) -> f64 {
        self.as_array().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Transmission rates per infected person per month, already scaled by the
/// initial susceptible fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTransmission {
    pub lambda_a: f64,
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub lambda_d: f64,
}

impl StageTransmission {
    pub fn validate(&self) -> Result<()> {
        check_nonnegative("lambda_a", self.lambda_a)?;
        check_nonnegative("lambda_u", self.lambda_u)?;
        check_nonnegative("lambda_s", self.lambda_s)?;
        check_nonnegative("lambda_d", self.lambda_d)?;
        if self.lambda_a < self.lambda_u.max(self.lambda_s).max(self.lambda_d) {
            return Err(Error::invalid("lambda_a", "acute transmission must be the largest"));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.lambda_a, self.lambda_u, self.lambda_s, self.lambda_d]
    }

    pub fn scaled(&self, c: f64) -> Self {
        StageTransmission {
            lambda_a: self.lambda_a * c,
            lambda_u: self.lambda_u * c,
            lambda_s: self.lambda_s * c,
            lambda_d: self.lambda_d * c,
        }
    }
}

/// Baseline testing rates per month for undiagnosed stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTesting {
    pub phi_a: f64,
    pub phi_u: f64,
    pub phi_s: f64,
    pub nu_a: f64,
    pub nu_s: f64,
}

impl StageTesting {
    pub fn from_chronic(phi_u: f64, nu_a: f64, nu_s: f64) -> Result<Self> {
        let t = StageTesting {
            phi_a: nu_a * phi_u,
            phi_u,
            phi_s: nu_s * phi_u,
            nu_a,
            nu_s,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("phi_u", self.phi_u)?;
        check_positive("nu_a", self.nu_a)?;
        check_positive("nu_s", self.nu_s)?;
        let tol = 1e-12 * self.phi_u;
        if (self.phi_a - self.nu_a * self.phi_u).abs() > tol
            || (self.phi_s - self.nu_s * self.phi_u).abs() > tol * self.nu_s.max(1.0)
        {
            return Err(Error::invalid("phi", "stage testing rates must equal nu * phi_u"));
        }
        Ok(())
    }

    pub fn rate(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Acute => self.phi_a,
            Stage::Chronic => self.phi_u,
            Stage::Aids => self.phi_s,
        }
    }
}

/// One value per undiagnosed stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerStage {
    pub acute: f64,
    pub chronic: f64,
    pub aids: f64,
}

impl PerStage {
    pub fn get(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Acute => self.acute,
            Stage::Chronic => self.chronic,
            Stage::Aids => self.aids,
        }
    }
}

/// Test sensitivities and the delay from a positive self-test to a formal
/// diagnosis. Delays are in months.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPerformance {
    pub kappa_self: PerStage,
    pub kappa_care: PerStage,
    pub t_confirm_au: f64,
    pub t_confirm_s: f64,
}

impl TestPerformance {
    pub fn validate(&self) -> Result<()> {
        for (name, k) in [
            ("kappa_self.acute", self.kappa_self.acute),
            ("kappa_self.chronic", self.kappa_self.chronic),
            ("kappa_self.aids", self.kappa_self.aids),
            ("kappa_care.acute", self.kappa_care.acute),
            ("kappa_care.chronic", self.kappa_care.chronic),
            ("kappa_care.aids", self.kappa_care.aids),
        ] {
            check_unit(name, k)?;
        }
        if self.kappa_self.acute > self.kappa_care.acute {
            return Err(Error::invalid(
                "kappa_self.acute",
                "self-tests cannot be more sensitive to acute infection than lab tests",
            ));
        }
        check_nonnegative("t_confirm_au", self.t_confirm_au)?;
        check_nonnegative("t_confirm_s", self.t_confirm_s)?;
        Ok(())
    }

    pub fn delay(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Acute | Stage::Chronic => self.t_confirm_au,
            Stage::Aids => self.t_confirm_s,
        }
    }
}

/// A testing policy: `gamma` is the share of tests that are self-tests and
/// `chi` the relative increase in overall testing. Both apply to every stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfTestPolicy {
    pub gamma: f64,
    pub chi: f64,
    pub tests: TestPerformance,
}

impl SelfTestPolicy {
    pub fn new(gamma: f64, chi: f64, tests: TestPerformance) -> Result<Self> {
        let p = SelfTestPolicy { gamma, chi, tests };
        p.validate()?;
        Ok(p)
    }

    pub fn baseline(tests: TestPerformance) -> Self {
        SelfTestPolicy { gamma: 0.0, chi: 0.0, tests }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("gamma", self.gamma)?;
        check_nonnegative("chi", self.chi)?;
        self.tests.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub a: f64,
    pub u: f64,
    pub s: f64,
    pub d: f64,
}

impl StateVector {
    pub fn new(a: f64, u: f64, s: f64, d: f64) -> Self {
        StateVector { a, u, s, d }
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        StateVector { a: x[0], u: x[1], s: x[2], d: x[3] }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a, self.u, self.s, self.d]
    }

    pub fn total(&self) -> f64 {
        self.a + self.u + self.s + self.d
    }

    pub fn undiagnosed(&self) -> f64 {
        self.a + self.u + self.s
    }

    pub fn scaled(&self, c: f64) -> Self {
        StateVector::new(self.a * c, self.u * c, self.s * c, self.d * c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("u", self.u), ("s", self.s), ("d", self.d)] {
            check_nonnegative(name, v)?;
        }
        Ok(())
    }
}

/// Effective per-month detection rates for the undiagnosed stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRates {
    pub a: f64,
    pub u: f64,
    pub s: f64,
}

impl DetectionRates {
    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.u, self.s]
    }
}

/// Rate at which undiagnosed people in `stage` are formally diagnosed.
///
/// Self-tests find infections at the sensitivity-weighted boosted testing
/// rate but add a confirmation delay, so their contribution is the inverse
/// of the mean time to diagnosis. Lab tests act at the boosted rate
/// directly. With `gamma = chi = 0` this is `kappa_care * phi`.
pub fn effective_detection_rate(stage: Stage, testing: &StageTesting, policy: &SelfTestPolicy) -> Result<f64> {
    let phi = testing.rate(stage);
    let gamma = policy.gamma;
    let chi = policy.chi;
    let boosted = (1.0 + chi) * phi;
    let self_part = if gamma > 0.0 {
        let k = policy.tests.kappa_self.get(stage);
        if k == 0.0 {
            0.0
        } else {
            if boosted <= 0.0 {
                return Err(Error::invalid("phi", format!("zero testing rate for {stage:?} with self-testing")));
            }
            k * gamma / (1.0 / boosted + policy.tests.delay(stage))
        }
    } else {
        0.0
    };
    let care_part = policy.tests.kappa_care.get(stage) * (1.0 - gamma) * boosted;
    let rate = self_part + care_part;
    if rate.is_finite() && rate >= 0.0 {
        Ok(rate)
    } else {
        Err(Error::NonFinite(format!("detection rate for {stage:?}: {rate}")))
    }
}

pub fn detection_rates(testing: &StageTesting, policy: &SelfTestPolicy) -> Result<DetectionRates> {
    Ok(DetectionRates {
        a: effective_detection_rate(Stage::Acute, testing, policy)?,
        u: effective_detection_rate(Stage::Chronic, testing, policy)?,
        s: effective_detection_rate(Stage::Aids, testing, policy)?,
    })
}

pub fn assemble_f(trans: &StageTransmission) -> Mat4 {
    let mut f = [[0.0; 4]; 4];
    f[0] = trans.as_array();
    f
}

pub fn assemble_v(prog: &StageProgression, mort: &StageMortality, det: &DetectionRates) -> Mat4 {
    let mut v = [[0.0; 4]; 4];
    v[0][0] = prog.sigma_a_to_u + det.a + mort.mu_a;
    v[1][0] = -prog.sigma_a_to_u;
    v[1][1] = prog.sigma_u_to_s + det.u + mort.mu_u;
    v[2][1] = -prog.sigma_u_to_s;
    v[2][2] = det.s + mort.mu_s;
    v[3] = [-det.a, -det.u, -det.s, mort.mu_d];
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMatrices {
    pub f: Mat4,
    pub v: Mat4,
}

impl ModelMatrices {
    pub fn new(
        trans: &StageTransmission,
        prog: &StageProgression,
        mort: &StageMortality,
        det: &DetectionRates,
    ) -> Self {
        ModelMatrices {
            f: assemble_f(trans),
            v: assemble_v(prog, mort, det),
        }
    }

    /// The system matrix `F - V`.
    pub fn generator(&self) -> Mat4 {
        let mut a = self.f;
        for (row, vrow) in a.iter_mut().zip(self.v.iter()) {
            for (x, v) in row.iter_mut().zip(vrow.iter()) {
                *x -= v;
            }
        }
        a
    }

    /// Transmission rates, read back from the first row of `F`.
    pub fn lambda(&self) -> [f64; 4] {
        self.f[0]
    }

    /// Detection rates, read back from the last row of `V`.
    pub fn detection(&self) -> [f64; 3] {
        [-self.v[3][0], -self.v[3][1], -self.v[3][2]]
    }

    /// Per-stage death rates. Progression and detection cancel within each
    /// column of `V`, so the column sums are the mortalities.
    pub fn mortality(&self) -> [f64; 4] {
        let mut m = [0.0; 4];
        for row in &self.v {
            for (j, x) in row.iter().enumerate() {
                m[j] += x;
            }
        }
        m
    }
}

pub fn mat_vec(m: &Mat4, x: &[f64; 4]) -> [f64; 4] {
    let mut y = [0.0; 4];
    for (yi, row) in y.iter_mut().zip(m.iter()) {
        *yi = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3] * x[3];
    }
    y
}

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn identity() -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn derivative(state: &StateVector, m: &ModelMatrices) -> StateVector {
    StateVector::from_array(mat_vec(&m.generator(), &state.as_array()))
}

/// New infections per month generated by `state`.
pub fn incidence_rate(state: &StateVector, trans: &StageTransmission) -> f64 {
    let l = trans.as_array();
    let x = state.as_array();
    l[0] * x[0] + l[1] * x[1] + l[2] * x[2] + l[3] * x[3]
}
