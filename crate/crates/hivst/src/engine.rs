//! Fixed-step classical Runge-Kutta integration.
//!
//! Running totals (incidence, diagnoses, deaths, undiagnosed person-time)
//! are integrated as extra state components, so they are advanced by the
//! same scheme as the compartments.

use serde::{Deserialize, Serialize};

use crate::calibration::CalibratedJurisdiction;
use crate::error::{Error, Result};
use crate::model::{DetectionRates, ModelMatrices, StageMortality, StageProgression, StageTransmission, StateVector};

/// One classical fourth-order Runge-Kutta step for an autonomous system.
pub fn rk4_step<const N: usize, F>(f: &F, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let axpy = |y: &[f64; N], k: &[f64; N], c: f64| -> [f64; N] { std::array::from_fn(|i| y[i] + c * k[i]) };
    let k1 = f(y);
    let k2 = f(&axpy(y, &k1, 0.5 * h));
    let k3 = f(&axpy(y, &k2, 0.5 * h));
    let k4 = f(&axpy(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Number of steps of size `step` covering `horizon`.
pub fn step_count(horizon: f64, step: f64) -> Result<usize> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("step", format!("must be positive, got {step}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon", format!("must be positive, got {horizon}")));
    }
    let n = (horizon / step).round();
    if (n * step - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::invalid("horizon", format!("{horizon} is not a multiple of step {step}")));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub cumulative_incidence: Vec<f64>,
    pub cumulative_diagnoses: Vec<f64>,
    pub cumulative_deaths: Vec<f64>,
    /// Integral of `a + u + s` over time, in person-months.
    pub undiagnosed_time: Vec<f64>,
}

impl Trajectory {
    pub fn step(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn total_incidence(&self) -> f64 {
        *self.cumulative_incidence.last().unwrap_or(&0.0)
    }
}

fn check_state(t: f64, y: &[f64]) -> Result<()> {
    if y.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("state at t = {t} months: {y:?}")))
    }
}

/// Integrates `dx/dt = (F - V) x` and the running totals.
pub fn integrate_linear(m: &ModelMatrices, x0: &StateVector, horizon: f64, step: f64) -> Result<Trajectory> {
    let n = step_count(horizon, step)?;
    let a = m.generator();
    let lambda = m.lambda();
    let det = m.detection();
    let mu = m.mortality();
    let rhs = |y: &[f64; 8]| -> [f64; 8] {
        let x = [y[0], y[1], y[2], y[3]];
        let dx = crate::model::mat_vec(&a, &x);
        [
            dx[0],
            dx[1],
            dx[2],
            dx[3],
            lambda[0] * x[0] + lambda[1] * x[1] + lambda[2] * x[2] + lambda[3] * x[3],
            det[0] * x[0] + det[1] * x[1] + det[2] * x[2],
            mu[0] * x[0] + mu[1] * x[1] + mu[2] * x[2] + mu[3] * x[3],
            x[0] + x[1] + x[2],
        ]
    };
    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        cumulative_incidence: Vec::with_capacity(n + 1),
        cumulative_diagnoses: Vec::with_capacity(n + 1),
        cumulative_deaths: Vec::with_capacity(n + 1),
        undiagnosed_time: Vec::with_capacity(n + 1),
    };
    let mut y = [x0.a, x0.u, x0.s, x0.d, 0.0, 0.0, 0.0, 0.0];
    check_state(0.0, &y)?;
    for k in 0..=n {
        if k > 0 {
            y = rk4_step(&rhs, &y, step);
            check_state(k as f64 * step, &y)?;
        }
        traj.times.push(k as f64 * step);
        traj.states.push(StateVector::new(y[0], y[1], y[2], y[3]));
        traj.cumulative_incidence.push(y[4]);
        traj.cumulative_diagnoses.push(y[5]);
        traj.cumulative_deaths.push(y[6]);
        traj.undiagnosed_time.push(y[7]);
    }
    Ok(traj)
}

/// Final state and cumulative incidence only, without storing the path.
/// This is the hot loop of the policy sweeps.
pub fn cumulative_incidence(m: &ModelMatrices, x0: &StateVector, horizon: f64, step: f64) -> Result<(StateVector, f64)> {
    let n = step_count(horizon, step)?;
    let a = m.generator();
    let lambda = m.lambda();
    let rhs = |y: &[f64; 5]| -> [f64; 5] {
        let x = [y[0], y[1], y[2], y[3]];
        let dx = crate::model::mat_vec(&a, &x);
        [
            dx[0],
            dx[1],
            dx[2],
            dx[3],
            lambda[0] * x[0] + lambda[1] * x[1] + lambda[2] * x[2] + lambda[3] * x[3],
        ]
    };
    let mut y = [x0.a, x0.u, x0.s, x0.d, 0.0];
    for _ in 0..n {
        y = rk4_step(&rhs, &y, step);
    }
    check_state(horizon, &y)?;
    Ok((StateVector::new(y[0], y[1], y[2], y[3]), y[4]))
}

/// The five-compartment system with an explicit susceptible pool `e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearParams {
    /// Recruitment into `e`, persons per month.
    pub recruitment: f64,
    pub mu_e: f64,
    /// Unscaled transmission rates; new infections are `lambda_tilde . x * e / n`.
    pub lambda_tilde: StageTransmission,
    pub progression: StageProgression,
    pub mortality: StageMortality,
    pub eligible0: f64,
    pub infected0: StateVector,
}

impl NonlinearParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.recruitment >= 0.0) {
            return Err(Error::invalid("recruitment", "must be nonnegative"));
        }
        if !(self.mu_e >= 0.0 && self.mu_e < self.mortality.min()) {
            return Err(Error::invalid("mu_e", "must be below every infected-stage mortality"));
        }
        if !(self.eligible0 >= 0.0) {
            return Err(Error::invalid("eligible0", "must be nonnegative"));
        }
        self.infected0.validate()?;
        if !(self.eligible0 + self.infected0.total() > 0.0) {
            return Err(Error::invalid("n0", "initial population must be positive"));
        }
        Ok(())
    }

    pub fn sigma0(&self) -> f64 {
        self.eligible0 / (self.eligible0 + self.infected0.total())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearTrajectory {
    pub times: Vec<f64>,
    pub eligible: Vec<f64>,
    pub states: Vec<StateVector>,
    pub population: Vec<f64>,
    pub susceptible_fraction: Vec<f64>,
    pub cumulative_incidence: Vec<f64>,
}

pub fn integrate_nonlinear(p: &NonlinearParams, det: &DetectionRates, horizon: f64, step: f64) -> Result<NonlinearTrajectory> {
    p.validate()?;
    let n_steps = step_count(horizon, step)?;
    let l = p.lambda_tilde.as_array();
    let pr = p.progression;
    let mo = p.mortality;
    let rhs = |y: &[f64; 6]| -> [f64; 6] {
        let (e, a, u, s, d) = (y[0], y[1], y[2], y[3], y[4]);
        let n = e + a + u + s + d;
        let force = l[0] * a + l[1] * u + l[2] * s + l[3] * d;
        let inf = force * e / n;
        [
            p.recruitment - p.mu_e * e - inf,
            inf - (pr.sigma_a_to_u + det.a + mo.mu_a) * a,
            pr.sigma_a_to_u * a - (pr.sigma_u_to_s + det.u + mo.mu_u) * u,
            pr.sigma_u_to_s * u - (det.s + mo.mu_s) * s,
            det.a * a + det.u * u + det.s * s - mo.mu_d * d,
            inf,
        ]
    };
    let x = p.infected0;
    let mut y = [p.eligible0, x.a, x.u, x.s, x.d, 0.0];
    let mut out = NonlinearTrajectory {
        times: Vec::with_capacity(n_steps + 1),
        eligible: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        population: Vec::with_capacity(n_steps + 1),
        susceptible_fraction: Vec::with_capacity(n_steps + 1),
        cumulative_incidence: Vec::with_capacity(n_steps + 1),
    };
    for k in 0..=n_steps {
        if k > 0 {
            y = rk4_step(&rhs, &y, step);
        }
        let t = k as f64 * step;
        check_state(t, &y)?;
        let n: f64 = y[..5].iter().sum();
        if !(n > 0.0) {
            return Err(Error::NonFinite(format!("population vanished at t = {t}")));
        }
        out.times.push(t);
        out.eligible.push(y[0]);
        out.states.push(StateVector::new(y[1], y[2], y[3], y[4]));
        out.population.push(n);
        out.susceptible_fraction.push(y[0] / n);
        out.cumulative_incidence.push(y[5]);
    }
    Ok(out)
}

/// Observed drift of the susceptible fraction against two a-priori bounds.
///
/// Both bounds integrate `|dSigma/dt| <= (Lambda/n + lambda_a + mu_s - mu_e) |1 - Sigma|`.
/// `bound_a7` takes the bracket times `1 - Sigma` at its worst point seen
/// so far along the path; `bound_a8` replaces `n` by its minimum and
/// `1 - Sigma` by one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCertificate {
    pub sigma0: f64,
    pub n_min: f64,
    pub times: Vec<f64>,
    pub observed_drift: Vec<f64>,
    pub bound_a7: Vec<f64>,
    pub a8_rate: f64,
    pub bound_a8: Vec<f64>,
}

impl ErrorCertificate {
    /// Indices where the observed drift exceeds the path bound.
    pub fn violations(&self) -> Vec<usize> {
        self.observed_drift
            .iter()
            .zip(&self.bound_a7)
            .enumerate()
            .filter(|(_, (d, b))| d > b)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn passes(&self) -> bool {
        self.violations().is_empty()
    }

    pub fn max_drift(&self) -> f64 {
        self.observed_drift.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest ratio of bound to drift over samples with nonzero drift.
    pub fn min_margin(&self) -> f64 {
        self.observed_drift
            .iter()
            .zip(&self.bound_a7)
            .filter(|(d, _)| **d > 0.0)
            .map(|(d, b)| b / d)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn linearization_certificate(p: &NonlinearParams, traj: &NonlinearTrajectory) -> ErrorCertificate {
    // Drift is measured from the path's own starting point so that the
    // first sample is exactly zero.
    let sigma0 = traj.susceptible_fraction.first().copied().unwrap_or_else(|| p.sigma0());
    let t0 = traj.times.first().copied().unwrap_or(0.0);
    let base = p.lambda_tilde.lambda_a + p.mortality.mu_s - p.mu_e;
    let n_min = traj.population.iter().copied().fold(f64::INFINITY, f64::min);
    let a8_rate = p.recruitment / n_min + base;
    let mut worst = 0.0_f64;
    let mut cert = ErrorCertificate {
        sigma0,
        n_min,
        times: traj.times.clone(),
        observed_drift: Vec::with_capacity(traj.times.len()),
        bound_a7: Vec::with_capacity(traj.times.len()),
        a8_rate,
        bound_a8: Vec::with_capacity(traj.times.len()),
    };
    for ((t, sigma), n) in traj.times.iter().zip(&traj.susceptible_fraction).zip(&traj.population) {
        worst = worst.max((p.recruitment / n + base) * (1.0 - sigma).abs());
        let elapsed = t - t0;
        cert.observed_drift.push((sigma - sigma0).abs());
        cert.bound_a7.push(worst * elapsed);
        cert.bound_a8.push(a8_rate * elapsed);
    }
    cert
}

/// How a calibrated jurisdiction is embedded in the nonlinear model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellConfig {
    /// Initial susceptible fraction of the population.
    pub initial_susceptible_fraction: f64,
    /// `mu_e` as a fraction of the smallest infected-stage mortality.
    pub eligible_mortality_factor: f64,
}

impl Default for ShellConfig {
    fn default() -> Self {
        ShellConfig {
            initial_susceptible_fraction: 0.99,
            eligible_mortality_factor: 0.5,
        }
    }
}

impl ShellConfig {
    pub fn validate(&self) -> Result<()> {
        let s = self.initial_susceptible_fraction;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::invalid("initial_susceptible_fraction", "must lie in (0, 1)"));
        }
        let f = self.eligible_mortality_factor;
        if !(0.0..1.0).contains(&f) {
            return Err(Error::invalid("eligible_mortality_factor", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Nonlinear model whose linearization at `t = 0` is the calibrated model,
/// with recruitment balancing susceptible deaths.
pub fn nonlinear_shell(cal: &CalibratedJurisdiction, shell: &ShellConfig) -> Result<NonlinearParams> {
    shell.validate()?;
    let sigma0 = shell.initial_susceptible_fraction;
    let infected = cal.initial;
    let eligible0 = sigma0 / (1.0 - sigma0) * infected.total();
    let mu_e = shell.eligible_mortality_factor * cal.mortality.min();
    let p = NonlinearParams {
        recruitment: mu_e * eligible0,
        mu_e,
        lambda_tilde: cal.transmission.scaled(1.0 / sigma0),
        progression: cal.progression,
        mortality: cal.mortality,
        eligible0,
        infected0: infected,
    };
    p.validate()?;
    Ok(p)
}
