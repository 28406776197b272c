//! Joint cumulants of log-likelihood derivatives for the binary Emax model.
//!
//! With `w = pi(1-pi)` and `s3 = pi(1-pi)(1-2pi)` per subject, and `g`, `h` the
//! first and second derivatives of `eta`:
//!
//! * `k3[r][j][l]   = E[d3 l]        = sum -s3 g_r g_j g_l - w (h_rl g_j + g_r h_jl + h_rj g_l)`
//! * `k2_1[r][j][l] = E[H_rj U_l]    = sum w h_rj g_l`
//! * `p[r][j][s]    = E[U_r U_j U_s] = sum s3 g_r g_j g_s`
//! * `di[r][j][s]   = dI_rj / dtheta_s`, differentiated directly
//!
//! `di` decomposes as `p + k2_1_sym + k2_1_sym`, where
//! `k2_1_sym[r][j][s] = (E[H_rs U_j] + E[H_js U_r]) / 2` is the symmetrized
//! mixed cumulant. The plain slice `k2_1[.][.][s]` only satisfies that
//! decomposition under a trace against a symmetric matrix, not entrywise.

use crate::linalg::{Tensor3, ZERO_TENSOR};
use crate::model::{deriv_tensors, DerivTensors, EmaxParams, ObservationSet, UnitDerivs};

#[derive(Debug, Clone, PartialEq)]
pub struct CumulantBundle {
    pub k3: Tensor3,
    pub k2_1: Tensor3,
    pub k2_1_sym: Tensor3,
    pub p: Tensor3,
    pub di: Tensor3,
}

impl CumulantBundle {
    pub fn from_derivs(d: &DerivTensors) -> Self {
        let mut k3 = ZERO_TENSOR;
        let mut k2_1 = ZERO_TENSOR;
        let mut k2_1_sym = ZERO_TENSOR;
        let mut p = ZERO_TENSOR;
        let mut di = ZERO_TENSOR;
        for u in &d.units {
            add_info_derivative(&mut di, u);
            let w = u.n * u.var();
            let s3 = u.n * u.skew();
            let g = &u.g;
            let h = &u.h;
            for r in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        let ggg = g[r] * g[j] * g[l];
                        p[r][j][l] += s3 * ggg;
                        k3[r][j][l] -= s3 * ggg + w * (h[(r, l)] * g[j] + g[r] * h[(j, l)] + h[(r, j)] * g[l]);
                        k2_1[r][j][l] += w * h[(r, j)] * g[l];
                        k2_1_sym[r][j][l] += 0.5 * w * (h[(r, l)] * g[j] + h[(j, l)] * g[r]);
                    }
                }
            }
        }
        Self { k3, k2_1, k2_1_sym, p, di }
    }

    pub fn new(params: &EmaxParams, data: &ObservationSet) -> Self {
        Self::from_derivs(&deriv_tensors(params, data))
    }
}

pub fn kappa_rjl(params: &EmaxParams, data: &ObservationSet) -> Tensor3 {
    CumulantBundle::new(params, data).k3
}

pub fn kappa_rj_l(params: &EmaxParams, data: &ObservationSet) -> Tensor3 {
    CumulantBundle::new(params, data).k2_1
}

pub fn p_tensor(params: &EmaxParams, data: &ObservationSet) -> Tensor3 {
    CumulantBundle::new(params, data).p
}

fn add_info_derivative(di: &mut Tensor3, u: &UnitDerivs) {
    let w = u.n * u.var();
    let s3 = u.n * u.skew();
    for r in 0..3 {
        for j in 0..3 {
            for s in 0..3 {
                di[r][j][s] += s3 * u.g[s] * u.g[r] * u.g[j] + w * (u.h[(r, s)] * u.g[j] + u.g[r] * u.h[(j, s)]);
            }
        }
    }
}

/// Analytic `dI/dtheta_s`, stacked over `s` in the last index.
pub fn info_derivative(params: &EmaxParams, data: &ObservationSet) -> Tensor3 {
    let mut di = ZERO_TENSOR;
    for u in &deriv_tensors(params, data).units {
        add_info_derivative(&mut di, u);
    }
    di
}

/// Largest entrywise deviation from `di = p + 2 k2_1_sym`, relative to the scale of `di`.
pub fn info_identity_residual(b: &CumulantBundle) -> f64 {
    let mut scale = 0.0_f64;
    let mut worst = 0.0_f64;
    for r in 0..3 {
        for j in 0..3 {
            for s in 0..3 {
                scale = scale.max(b.di[r][j][s].abs());
                worst = worst.max((b.di[r][j][s] - b.p[r][j][s] - 2.0 * b.k2_1_sym[r][j][s]).abs());
            }
        }
    }
    worst / scale.max(f64::MIN_POSITIVE)
}
