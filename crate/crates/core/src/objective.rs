//! Capacity, power consumption, energy efficiency and constraint slacks.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::ObjectiveError;
use crate::sysmodel::{ChannelRealization, SystemParams};

/// Relative slack tolerance used when classifying an allocation as feasible.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-6;

/// Per-subcarrier transmit powers (Watt) and the receiver splitting ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p_w: Vec<f64>,
    pub rho: f64,
}

impl PowerAllocation {
    pub fn new(p_w: Vec<f64>, rho: f64) -> Result<Self, ObjectiveError> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(ObjectiveError::InvalidAllocation(format!(
                "rho = {rho} outside [0, 1]"
            )));
        }
        if let Some(p) = p_w.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(ObjectiveError::InvalidAllocation(format!(
                "negative or non-finite power {p}"
            )));
        }
        Ok(Self { p_w, rho })
    }

    pub fn zeros(n: usize, rho: f64) -> Self {
        Self {
            p_w: vec![0.0; n],
            rho,
        }
    }

    pub fn total_w(&self) -> f64 {
        self.p_w.iter().sum()
    }
}

/// Signed slacks of C1 (both sides), C2, C3 and C4. Non-negative means satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    pub c1_lo: f64,
    pub c1_hi: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub feasible: bool,
}

/// Natural magnitudes of the five constraints, used to turn slacks into
/// relative quantities. Order: C1 lower, C2, C4, C3, C1 upper (the order of
/// the multipliers alpha, beta, gamma, lambda, theta).
pub fn constraint_scales(params: &SystemParams) -> [f64; 5] {
    let c1_lo = if params.p_min_req_w > 0.0 {
        params.p_min_req_w
    } else {
        params.p_max_req_w
    };
    let c4 = if params.r_min_bps > 0.0 {
        params.r_min_bps
    } else {
        params.bandwidth_hz
    };
    [c1_lo, params.p_max_w, c4, params.p_pg_w, params.p_max_req_w]
}

impl ConstraintResiduals {
    /// Slacks in multiplier order (alpha, beta, gamma, lambda, theta).
    pub fn as_multiplier_order(&self) -> [f64; 5] {
        [self.c1_lo, self.c2, self.c4, self.c3, self.c1_hi]
    }

    /// Worst slack relative to its constraint scale (negative when violated).
    pub fn worst_relative(&self, params: &SystemParams) -> f64 {
        let scales = constraint_scales(params);
        self.as_multiplier_order()
            .iter()
            .zip(scales)
            .map(|(s, sc)| s / sc)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Receive SINR per Watt of transmit power on subcarrier `i`.
pub fn sinr_factor(rho: f64, ch: &ChannelRealization, params: &SystemParams, i: usize) -> f64 {
    let keep = 1.0 - rho;
    let num = keep * ch.gain(i);
    if num == 0.0 {
        return 0.0;
    }
    num / (keep * (params.sigma_za_w + ch.sigma_i_w[i]) + params.sigma_zs_w)
}

/// `W log2(1 + p * gamma)` in bit/s.
#[inline]
pub fn subcarrier_capacity(p_w: f64, gamma: f64, w_hz: f64) -> f64 {
    w_hz * (p_w * gamma).ln_1p() / LN_2
}

fn check_len(alloc: &PowerAllocation, ch: &ChannelRealization) -> Result<(), ObjectiveError> {
    if alloc.p_w.len() != ch.n_subcarriers() {
        return Err(ObjectiveError::LengthMismatch {
            expected: ch.n_subcarriers(),
            got: alloc.p_w.len(),
        });
    }
    Ok(())
}

/// Sum capacity `U` (bit/s).
pub fn system_capacity(
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    params: &SystemParams,
) -> f64 {
    let w = params.subcarrier_bw_hz();
    alloc
        .p_w
        .iter()
        .enumerate()
        .map(|(i, &p)| subcarrier_capacity(p, sinr_factor(alloc.rho, ch, params, i), w))
        .sum()
}

/// Harvested power split into the desired-signal part `P_D` and the
/// interference-plus-antenna-noise part `P_I` (both Watt).
pub fn harvested_power(
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    params: &SystemParams,
) -> (f64, f64) {
    let scale = params.eta * alloc.rho;
    let desired: f64 = alloc
        .p_w
        .iter()
        .enumerate()
        .map(|(i, &p)| p * ch.gain(i))
        .sum();
    let noise: f64 = ch.sigma_i_w.iter().map(|s| params.sigma_za_w + s).sum();
    (scale * desired, scale * noise)
}

/// Harvest independent of transmit power, `P_I`.
pub fn interference_harvest(rho: f64, ch: &ChannelRealization, params: &SystemParams) -> f64 {
    params.eta * rho * ch.sigma_i_w.iter().map(|s| params.sigma_za_w + s).sum::<f64>()
}

/// Net consumption `U_TP = P_C + eps * sum(P) - P_D - P_I` without the sign check.
pub fn total_power_unchecked(
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    params: &SystemParams,
) -> f64 {
    let (pd, pi) = harvested_power(alloc, ch, params);
    params.p_c_w + params.epsilon * alloc.total_w() - pd - pi
}

/// Net consumption `U_TP`; a non-positive value is reported as an error.
pub fn total_power(
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    params: &SystemParams,
) -> Result<f64, ObjectiveError> {
    check_len(alloc, ch)?;
    let utp = total_power_unchecked(alloc, ch, params);
    if utp > 0.0 {
        Ok(utp)
    } else {
        Err(ObjectiveError::NonPositiveConsumption(utp))
    }
}

/// Energy efficiency `U / U_TP` in bit/Joule.
pub fn energy_efficiency(
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    params: &SystemParams,
) -> Result<f64, ObjectiveError> {
    let utp = total_power(alloc, ch, params)?;
    Ok(system_capacity(alloc, ch, params) / utp)
}

/// Slacks of every constraint, with the default relative tolerance.
pub fn constraint_residuals(
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    params: &SystemParams,
) -> ConstraintResiduals {
    constraint_residuals_with_tol(alloc, ch, params, DEFAULT_FEASIBILITY_TOL)
}

pub fn constraint_residuals_with_tol(
    alloc: &PowerAllocation,
    ch: &ChannelRealization,
    params: &SystemParams,
    tol: f64,
) -> ConstraintResiduals {
    let (pd, pi) = harvested_power(alloc, ch, params);
    let harvest = pd + pi;
    let total = alloc.total_w();
    let rate = system_capacity(alloc, ch, params);
    residuals_from_parts(harvest, total, rate, alloc, params, tol)
}

pub(crate) fn residuals_from_parts(
    harvest_w: f64,
    total_w: f64,
    rate_bps: f64,
    alloc: &PowerAllocation,
    params: &SystemParams,
    tol: f64,
) -> ConstraintResiduals {
    let mut r = ConstraintResiduals {
        c1_lo: harvest_w - params.p_min_req_w,
        c1_hi: params.p_max_req_w - harvest_w,
        c2: params.p_max_w - total_w,
        c3: params.p_pg_w - params.p_c_w - params.epsilon * total_w,
        c4: rate_bps - params.r_min_bps,
        feasible: false,
    };
    let domain_ok = (0.0..=1.0).contains(&alloc.rho) && alloc.p_w.iter().all(|&p| p >= 0.0);
    r.feasible = domain_ok && r.worst_relative(params) >= -tol;
    r
}
