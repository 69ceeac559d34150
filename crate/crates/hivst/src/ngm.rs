//! Next-generation-matrix analytics.
//!
//! `K = F V^-1` has rank one because only the acute compartment receives new
//! infections, so its spectral radius is the `(1,1)` entry. Two independent
//! routes are provided: the closed form of that entry, and a generic
//! eigenvalue computation on `K` built from a dense inverse of `V`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    mat_mul, DetectionRates, Mat4, ModelMatrices, StageMortality, StageProgression, StageTransmission,
};

/// Inverse of the lower-triangular `V` by forward substitution written out
/// entry by entry.
#[allow(clippy::needless_range_loop)]
pub fn invert_v_closed_form(v: &Mat4) -> Result<Mat4> {
    for i in 0..4 {
        for j in (i + 1)..4 {
            if v[i][j] != 0.0 {
                return Err(Error::Singular(format!("V is not lower-triangular at ({i},{j})")));
            }
        }
        if !(v[i][i] > 0.0 && v[i][i].is_finite()) {
            return Err(Error::Singular(format!("V diagonal entry {i} is {}", v[i][i])));
        }
    }
    let (v11, v22, v33, v44) = (v[0][0], v[1][1], v[2][2], v[3][3]);
    let mut inv = [[0.0; 4]; 4];
    inv[0][0] = 1.0 / v11;
    inv[1][1] = 1.0 / v22;
    inv[2][2] = 1.0 / v33;
    inv[3][3] = 1.0 / v44;
    inv[1][0] = -v[1][0] / (v11 * v22);
    inv[2][1] = -v[2][1] / (v22 * v33);
    inv[2][0] = (v[1][0] * v[2][1] - v[2][0] * v22) / (v11 * v22 * v33);
    inv[3][2] = -v[3][2] / (v33 * v44);
    inv[3][1] = -(v[3][1] * inv[1][1] + v[3][2] * inv[2][1]) / v44;
    inv[3][0] = -(v[3][0] * inv[0][0] + v[3][1] * inv[1][0] + v[3][2] * inv[2][0]) / v44;
    Ok(inv)
}

/// Gauss-Jordan inverse with partial pivoting, for any nonsingular 4x4.
pub fn invert_dense(m: &Mat4) -> Result<Mat4> {
    let mut a = *m;
    let mut inv = crate::model::identity();
    let scale = m.iter().flatten().fold(0.0_f64, |s, x| s.max(x.abs()));
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() <= f64::EPSILON * scale * 4.0 || !a[pivot][col].is_finite() {
            return Err(Error::Singular(format!("pivot {col} vanishes")));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..4 {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..4 {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..4 {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// Effective reproduction number as the sum of the acute, chronic, AIDS and
/// diagnosed contributions.
pub fn r_t_closed_form(
    trans: &StageTransmission,
    prog: &StageProgression,
    mort: &StageMortality,
    det: &DetectionRates,
) -> f64 {
    let v11 = prog.sigma_a_to_u + det.a + mort.mu_a;
    let v22 = prog.sigma_u_to_s + det.u + mort.mu_u;
    let v33 = det.s + mort.mu_s;
    let (sau, sus) = (prog.sigma_a_to_u, prog.sigma_u_to_s);

    let acute = trans.lambda_a / v11;
    let chronic = trans.lambda_u * sau / (v11 * v22);
    let aids = trans.lambda_s * sau * sus / (v11 * v22 * v33);
    let diagnosed = trans.lambda_d * (det.a * v22 * v33 + det.u * sau * v33 + det.s * sau * sus)
        / (mort.mu_d * v11 * v22 * v33);
    acute + chronic + aids + diagnosed
}

/// Coefficients `c[0..4]` of the monic characteristic polynomial
/// `z^4 + c[3] z^3 + c[2] z^2 + c[1] z + c[0]` (Faddeev-LeVerrier).
pub fn characteristic_polynomial(a: &Mat4) -> [f64; 4] {
    let mut c = [0.0; 5];
    c[4] = 1.0;
    let mut mk = [[0.0; 4]; 4];
    for k in 1..=4 {
        let mut next = mat_mul(a, &mk);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += c[5 - k];
        }
        mk = next;
        let am = mat_mul(a, &mk);
        let tr: f64 = (0..4).map(|i| am[i][i]).sum();
        c[4 - k] = -tr / k as f64;
    }
    [c[0], c[1], c[2], c[3]]
}

fn poly_eval(c: &[f64; 4], z: Complex64) -> (Complex64, Complex64) {
    // Horner for p and p'.
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// All four roots of the monic quartic by Aberth-Ehrlich iteration.
pub fn quartic_roots(c: &[f64; 4]) -> [Complex64; 4] {
    let bound = 1.0 + c.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut z: [Complex64; 4] =
        std::array::from_fn(|k| Complex64::from_polar(bound * 0.5, 0.4 + k as f64 * std::f64::consts::FRAC_PI_2));
    for _ in 0..500 {
        let mut biggest = 0.0_f64;
        for i in 0..4 {
            let (p, dp) = poly_eval(c, z[i]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..4).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * repulsion);
            if w.is_finite() {
                z[i] -= w;
                biggest = biggest.max(w.norm() / z[i].norm().max(1e-300));
            }
        }
        if biggest < 1e-15 {
            break;
        }
    }
    z
}

/// Largest eigenvalue modulus of a general 4x4 matrix.
pub fn spectral_radius(a: &Mat4) -> f64 {
    let c = characteristic_polynomial(a);
    let roots = quartic_roots(&c);
    let mut top = roots
        .into_iter()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .unwrap_or_default();
    // Polish a real dominant root with Newton steps on the polynomial.
    if top.im.abs() <= 1e-9 * top.norm().max(1e-300) {
        let mut x = Complex64::new(top.re, 0.0);
        for _ in 0..4 {
            let (p, dp) = poly_eval(&c, x);
            if dp.norm() == 0.0 {
                break;
            }
            x -= p / dp;
        }
        top = x;
    }
    top.norm()
}

pub fn next_generation_matrix(m: &ModelMatrices) -> Result<Mat4> {
    Ok(mat_mul(&m.f, &invert_dense(&m.v)?))
}

/// Spectral radius of `F V^-1`, computed without using its rank-one shape.
pub fn r_t_spectral(m: &ModelMatrices) -> Result<f64> {
    let k = next_generation_matrix(m)?;
    Ok(spectral_radius(&k))
}

/// `R_t` minus the transmissions made after diagnosis.
pub fn awareness_reproduction_number(r_t: f64, lambda_d: f64, mu_d: f64) -> Result<f64> {
    if !(mu_d > 0.0) {
        return Err(Error::invalid("mu_d", "diagnosed mortality must be positive"));
    }
    Ok(r_t - lambda_d / mu_d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgmReport {
    pub k: Mat4,
    pub r_t: f64,
    pub r_awr: f64,
    pub diagnosed_term: f64,
}

pub fn ngm_report(
    trans: &StageTransmission,
    prog: &StageProgression,
    mort: &StageMortality,
    det: &DetectionRates,
) -> Result<NgmReport> {
    let m = ModelMatrices::new(trans, prog, mort, det);
    let vinv = invert_v_closed_form(&m.v)?;
    let k = mat_mul(&m.f, &vinv);
    let r_t = r_t_closed_form(trans, prog, mort, det);
    let diagnosed_term = k[0][3];
    let r_awr = awareness_reproduction_number(r_t, trans.lambda_d, mort.mu_d)?;
    crate::error::ensure_finite("r_t", r_t)?;
    Ok(NgmReport { k, r_t, r_awr, diagnosed_term })
}
