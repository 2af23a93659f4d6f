//! Power allocation for a fixed Dinkelbach parameter `q` and splitting ratio `rho`.
//!
//! For fixed `(q, rho)` the subtractive problem is concave in the transmit
//! powers, so it is solved through its Lagrange dual. Layer 1 maximises the
//! Lagrangian in closed form, one subcarrier at a time (a water-filling
//! profile whose level differs per subcarrier). Layer 2 moves the five
//! multipliers along the constraint slacks and projects them onto the
//! non-negative orthant.

mod kkt;
mod layer2;
mod linear;

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::objective::{
    constraint_scales, interference_harvest, residuals_from_parts, sinr_factor,
    subcarrier_capacity, ConstraintResiduals, PowerAllocation,
};
use crate::sysmodel::{ChannelRealization, SystemParams};

pub use kkt::{kkt_check, KktReport};
pub use layer2::{update_multipliers, StepSizes};

/// Dual variables. `alpha`: C1 lower, `beta`: C2, `gamma`: C4, `lambda`: C3,
/// `theta`: C1 upper.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub theta: f64,
}

impl Multipliers {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.alpha, self.beta, self.gamma, self.lambda, self.theta]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            alpha: a[0],
            beta: a[1],
            gamma: a[2],
            lambda: a[3],
            theta: a[4],
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|&m| m >= 0.0)
    }
}

/// How Layer 2 chooses its step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Gradient steps scaled by the dual Hessian (projected Newton) with a
    /// backtracking line search on the dual function.
    ScaledNewton,
    /// `xi_u(m) = c_u / (1 + m)`. With `c = None` each `c_u` is set to the
    /// inverse dual curvature along `u` at the first iterate where it is
    /// positive.
    Diminishing { c: Option<[f64; 5]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Relative constraint tolerance.
    pub tol_residual: f64,
    /// Relative multiplier movement below which the diminishing rule stops.
    pub tol_dual: f64,
    /// Per-subcarrier power used when the Layer-1 subproblem is unbounded.
    /// `None` means `min(P_max, (P_PG - P_C) / eps)`.
    pub p_cap_w: Option<f64>,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            step_rule: StepRule::ScaledNewton,
            tol_residual: 1e-6,
            tol_dual: 1e-7,
            p_cap_w: None,
        }
    }
}

impl InnerOptions {
    pub fn cap_w(&self, params: &SystemParams) -> f64 {
        self.p_cap_w.unwrap_or_else(|| params.transmit_cap_w())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStatus {
    Converged,
    /// A certificate of infeasibility was found (dual value below any
    /// feasible objective, or a necessary condition fails outright).
    Infeasible,
    IterationLimit,
    /// The line search could not decrease the dual any further.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub alloc: PowerAllocation,
    pub mults: Multipliers,
    /// `U - q * U_TP` at the final primal iterate.
    pub objective: f64,
    pub capacity_bps: f64,
    pub u_tp_w: f64,
    pub harvested_w: f64,
    pub dual_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: InnerStatus,
    pub residuals: ConstraintResiduals,
}

/// Per-(q, rho) constants shared by both layers.
#[derive(Debug, Clone)]
pub struct Subproblem<'a> {
    pub(crate) params: &'a SystemParams,
    pub(crate) q: f64,
    pub(crate) rho: f64,
    /// SINR per Watt, `Gamma_i`.
    pub(crate) gamma: Vec<f64>,
    /// Harvest per transmitted Watt, `eta * rho * l g |H_i|^2`.
    pub(crate) harvest: Vec<f64>,
    /// `P_I`.
    pub(crate) p_interf: f64,
    /// `W / ln 2`.
    pub(crate) w_ln2: f64,
    pub(crate) w_hz: f64,
    pub(crate) cap: f64,
    pub(crate) scales: [f64; 5],
}

/// Primal quantities at a Layer-1 solution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Evaluation {
    /// Slacks in multiplier order; also the dual gradient.
    pub slacks: [f64; 5],
    pub rate: f64,
    pub harvest: f64,
    pub total: f64,
    pub objective: f64,
    pub u_tp: f64,
    pub dual: f64,
}

impl<'a> Subproblem<'a> {
    pub fn new(
        q: f64,
        rho: f64,
        ch: &ChannelRealization,
        params: &'a SystemParams,
        opts: &InnerOptions,
    ) -> Self {
        let n = ch.n_subcarriers();
        let gamma = (0..n).map(|i| sinr_factor(rho, ch, params, i)).collect();
        let harvest = (0..n)
            .map(|i| params.eta * rho * ch.gain(i))
            .collect();
        let w_hz = params.subcarrier_bw_hz();
        Self {
            params,
            q,
            rho,
            gamma,
            harvest,
            p_interf: interference_harvest(rho, ch, params),
            w_ln2: w_hz / LN_2,
            w_hz,
            cap: opts.cap_w(params),
            scales: constraint_scales(params),
        }
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    /// `Lambda_i`, the per-subcarrier price of one transmitted Watt.
    #[inline]
    pub fn lambda_factor(&self, m: &Multipliers, i: usize) -> f64 {
        let p = self.params;
        let b = self.harvest[i];
        self.q * (p.epsilon - b) + m.lambda * p.epsilon + m.beta + (m.theta - m.alpha) * b
    }

    /// Layer 1: the Lagrangian maximiser for every subcarrier.
    pub fn waterfill_into(&self, m: &Multipliers, p_w: &mut [f64]) {
        let level = self.w_ln2 * (1.0 + m.gamma);
        for (i, p) in p_w.iter_mut().enumerate() {
            let lam = self.lambda_factor(m, i);
            let g = self.gamma[i];
            *p = if g <= 0.0 {
                if lam < 0.0 {
                    self.cap
                } else {
                    0.0
                }
            } else if lam <= 0.0 {
                self.cap
            } else {
                (level / lam - 1.0 / g).clamp(0.0, self.cap)
            };
        }
    }

    pub(crate) fn evaluate(&self, m: &Multipliers, p_w: &[f64]) -> Evaluation {
        let params = self.params;
        let mut rate = 0.0;
        let mut desired = 0.0;
        let mut total = 0.0;
        for (i, &p) in p_w.iter().enumerate() {
            rate += subcarrier_capacity(p, self.gamma[i], self.w_hz);
            desired += self.harvest[i] * p;
            total += p;
        }
        let harvest = desired + self.p_interf;
        let u_tp = params.p_c_w + params.epsilon * total - harvest;
        let objective = rate - self.q * u_tp;
        let slacks = [
            harvest - params.p_min_req_w,
            params.p_max_w - total,
            rate - params.r_min_bps,
            params.p_pg_w - params.p_c_w - params.epsilon * total,
            params.p_max_req_w - harvest,
        ];
        let dual = objective
            + m.to_array()
                .iter()
                .zip(slacks.iter())
                .map(|(mu, s)| mu * s)
                .sum::<f64>();
        Evaluation {
            slacks,
            rate,
            harvest,
            total,
            objective,
            u_tp,
            dual,
        }
    }

    /// Magnitude of the objective, used for relative tests.
    pub(crate) fn objective_scale(&self, e: &Evaluation) -> f64 {
        e.rate.abs() + self.q * e.u_tp.abs() + self.w_ln2
    }

    /// Lower bound on `U - q U_TP` over the feasible set; a dual value below
    /// it certifies infeasibility.
    pub(crate) fn feasible_objective_floor(&self) -> f64 {
        let p = self.params;
        p.r_min_bps - self.q * (p.p_c_w + p.epsilon * self.cap)
    }

    pub(crate) fn residuals(&self, p_w: &[f64], e: &Evaluation, tol: f64) -> ConstraintResiduals {
        let alloc = PowerAllocation {
            p_w: p_w.to_vec(),
            rho: self.rho,
        };
        residuals_from_parts(e.harvest, e.total, e.rate, &alloc, self.params, tol)
    }

    pub(crate) fn finish(
        &self,
        p_w: Vec<f64>,
        mults: Multipliers,
        iterations: usize,
        status: InnerStatus,
        tol: f64,
    ) -> InnerSolution {
        let e = self.evaluate(&mults, &p_w);
        let residuals = self.residuals(&p_w, &e, tol);
        let converged = status == InnerStatus::Converged;
        debug_assert!(!converged || residuals.feasible);
        InnerSolution {
            alloc: PowerAllocation {
                p_w,
                rho: self.rho,
            },
            mults,
            objective: e.objective,
            capacity_bps: e.rate,
            u_tp_w: e.u_tp,
            harvested_w: e.harvest,
            dual_value: e.dual,
            iterations,
            converged,
            status,
            residuals,
        }
    }

    /// Cheap necessary conditions. `false` means no allocation can be feasible.
    pub(crate) fn passes_prefilter(&self, tol: f64) -> bool {
        let p = self.params;
        let max_b = self.harvest.iter().copied().fold(0.0, f64::max);
        let max_harvest = self.p_interf + self.cap * max_b;
        if max_harvest < p.p_min_req_w - tol * self.scales[0] {
            return false;
        }
        if self.p_interf > p.p_max_req_w + tol * self.scales[4] {
            return false;
        }
        if p.r_min_bps > 0.0 && self.gamma.iter().all(|&g| g <= 0.0) {
            return false;
        }
        true
    }
}

/// `Lambda_i` for the given multipliers.
pub fn lambda_factor(
    q: f64,
    rho: f64,
    mults: &Multipliers,
    ch: &ChannelRealization,
    params: &SystemParams,
    i: usize,
) -> f64 {
    let b = params.eta * rho * ch.gain(i);
    q * (params.epsilon - b) + mults.lambda * params.epsilon + mults.beta + (mults.theta - mults.alpha) * b
}

/// Layer-1 power profile for fixed multipliers.
pub fn waterfill(
    q: f64,
    rho: f64,
    mults: &Multipliers,
    ch: &ChannelRealization,
    params: &SystemParams,
    opts: &InnerOptions,
) -> Vec<f64> {
    let sub = Subproblem::new(q, rho, ch, params, opts);
    let mut p = vec![0.0; sub.n()];
    sub.waterfill_into(mults, &mut p);
    p
}

/// Solves the subtractive problem for fixed `(q, rho)` from zero multipliers.
pub fn solve_fixed_q_rho(
    q: f64,
    rho: f64,
    ch: &ChannelRealization,
    params: &SystemParams,
    opts: &InnerOptions,
) -> InnerSolution {
    solve_fixed_q_rho_from(q, rho, ch, params, opts, Multipliers::zero())
}

/// As [`solve_fixed_q_rho`], starting Layer 2 from `init`.
pub fn solve_fixed_q_rho_from(
    q: f64,
    rho: f64,
    ch: &ChannelRealization,
    params: &SystemParams,
    opts: &InnerOptions,
    init: Multipliers,
) -> InnerSolution {
    let sub = Subproblem::new(q, rho, ch, params, opts);
    if !sub.passes_prefilter(opts.tol_residual) {
        let p = vec![0.0; sub.n()];
        return sub.finish(p, Multipliers::zero(), 0, InnerStatus::Infeasible, opts.tol_residual);
    }
    if sub.gamma.iter().all(|&g| g <= 0.0) {
        return linear::solve(&sub, opts);
    }
    let init = Multipliers::from_array(init.to_array().map(|m| m.max(0.0)));
    match opts.step_rule {
        StepRule::ScaledNewton => layer2::solve_newton(&sub, opts, init),
        StepRule::Diminishing { c } => layer2::solve_diminishing(&sub, opts, init, c),
    }
}
