//! Outer fractional-programming loop, the splitting-ratio search and the
//! capacity-maximising baseline.
//!
//! For a parameter `q` the subtractive problem `max U - q U_TP` is solved over
//! the powers for every `rho` on the grid `{0, 1/M, ..., 1}`; the best grid
//! point defines `F(q)`. Starting from `q = 0`, `q` is replaced by the energy
//! efficiency of the maximiser until `F(q)` drops below the tolerance.

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::innersolver::{
    solve_fixed_q_rho, solve_fixed_q_rho_from, InnerOptions, InnerSolution, InnerStatus, Multipliers,
};
use crate::objective::PowerAllocation;
use crate::sysmodel::{ChannelRealization, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopOrder {
    /// The splitting-ratio search runs inside every outer iteration.
    RhoInside,
    /// A complete outer loop per grid point, then the best point. Slower;
    /// kept for cross-checking.
    RhoOutside,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterOptions {
    pub l_max: usize,
    /// Stopping tolerance on `F(q)`, relative to `q * P_C`.
    pub eps: f64,
    /// Number of grid intervals `M`; `None` uses `SystemParams::rho_grid_m`.
    pub rho_grid_m: Option<usize>,
    pub inner: InnerOptions,
    pub loop_order: LoopOrder,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self {
            l_max: 20,
            eps: 1e-4,
            rho_grid_m: None,
            inner: InnerOptions::default(),
            loop_order: LoopOrder::RhoInside,
        }
    }
}

impl OuterOptions {
    pub fn grid(&self, params: &SystemParams) -> Vec<f64> {
        let m = self.rho_grid_m.unwrap_or(params.rho_grid_m).max(1);
        (0..=m).map(|k| k as f64 / m as f64).collect()
    }

    /// Absolute stopping threshold for parameter `q`.
    pub fn eps_abs(&self, q: f64, params: &SystemParams) -> f64 {
        self.eps * q * params.p_c_w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub alloc: PowerAllocation,
    /// Energy efficiency of `alloc` (bit/Joule); zero when infeasible.
    pub q_star: f64,
    pub capacity_bps: f64,
    /// `P_D + P_I`.
    pub harvested_w: f64,
    pub u_tp_w: f64,
    pub feasible: bool,
    /// `F(q) < eps` was reached within `l_max` iterations.
    pub converged: bool,
    /// Energy efficiency of the incumbent after each outer iteration.
    pub outer_trace: Vec<f64>,
    /// Best subtractive objective per grid point in the last iteration
    /// (`NaN` where the inner problem was infeasible or unsolved).
    pub rho_trace: Vec<f64>,
    pub iterations: usize,
    /// `F(q)` at the last parameter used.
    pub final_gap: f64,
    /// The stopping threshold belonging to that parameter.
    pub eps_abs: f64,
    /// Grid points skipped because the inner solver did not converge for a
    /// reason other than a certificate of infeasibility (last iteration).
    pub unconverged_rho: usize,
}

impl SolveResult {
    fn infeasible(n: usize, outer_trace: Vec<f64>, rho_trace: Vec<f64>, iterations: usize) -> Self {
        Self {
            alloc: PowerAllocation::zeros(n, 0.0),
            q_star: 0.0,
            capacity_bps: 0.0,
            harvested_w: 0.0,
            u_tp_w: 0.0,
            feasible: false,
            converged: false,
            outer_trace,
            rho_trace,
            iterations,
            final_gap: f64::NAN,
            eps_abs: f64::NAN,
            unconverged_rho: 0,
        }
    }

    pub fn energy_efficiency(&self) -> f64 {
        self.q_star
    }
}

/// Outcome of one splitting-ratio search.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoSearch {
    pub best: InnerSolution,
    pub rho: f64,
    pub rho_trace: Vec<f64>,
    pub unconverged: usize,
    /// Final multipliers per grid point, reused as warm starts.
    pub mults: Vec<Option<Multipliers>>,
}

/// Solves the subtractive problem on every grid point of `rhos` and returns
/// the best; ties go to the smaller `rho`.
pub fn solve_inner_over_rho_on(
    q: f64,
    rhos: &[f64],
    ch: &ChannelRealization,
    params: &SystemParams,
    inner: &InnerOptions,
    warm: Option<&[Option<Multipliers>]>,
) -> Result<RhoSearch, SolveError> {
    let mut best: Option<(InnerSolution, f64)> = None;
    let mut trace = Vec::with_capacity(rhos.len());
    let mut mults = Vec::with_capacity(rhos.len());
    let mut unconverged = 0;
    let mut prev = Multipliers::zero();
    for (k, &rho) in rhos.iter().enumerate() {
        let init = warm
            .and_then(|w| w.get(k).copied().flatten())
            .unwrap_or(prev);
        let mut sol = solve_fixed_q_rho_from(q, rho, ch, params, inner, init);
        if !sol.converged && sol.status != InnerStatus::Infeasible && init != Multipliers::zero() {
            sol = solve_fixed_q_rho(q, rho, ch, params, inner);
        }
        if !sol.converged {
            if sol.status != InnerStatus::Infeasible {
                unconverged += 1;
            }
            trace.push(f64::NAN);
            mults.push(None);
            continue;
        }
        trace.push(sol.objective);
        mults.push(Some(sol.mults));
        prev = sol.mults;
        if best.as_ref().is_none_or(|(b, _)| sol.objective > b.objective) {
            best = Some((sol, rho));
        }
    }
    let (best, rho) = best.ok_or(SolveError::Infeasible)?;
    Ok(RhoSearch {
        best,
        rho,
        rho_trace: trace,
        unconverged,
        mults,
    })
}

/// [`solve_inner_over_rho_on`] over the configured grid.
pub fn solve_inner_over_rho(
    q: f64,
    ch: &ChannelRealization,
    params: &SystemParams,
    opts: &OuterOptions,
) -> Result<RhoSearch, SolveError> {
    solve_inner_over_rho_on(q, &opts.grid(params), ch, params, &opts.inner, None)
}

fn ee_of(sol: &InnerSolution) -> f64 {
    sol.capacity_bps / sol.u_tp_w
}

fn outer_loop(
    rhos: &[f64],
    ch: &ChannelRealization,
    params: &SystemParams,
    opts: &OuterOptions,
) -> SolveResult {
    let n = ch.n_subcarriers();
    let mut q = 0.0;
    let mut incumbent: Option<InnerSolution> = None;
    let mut trace = Vec::new();
    let mut warm: Option<Vec<Option<Multipliers>>> = None;
    let mut last = None;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.l_max.max(1) {
        let search = match solve_inner_over_rho_on(q, rhos, ch, params, &opts.inner, warm.as_deref()) {
            Ok(s) => s,
            Err(_) => break,
        };
        iterations += 1;
        let gap = search.best.objective;
        let eps_abs = opts.eps_abs(q, params);
        let cand = search.best.clone();
        if incumbent.as_ref().is_none_or(|inc| ee_of(&cand) > ee_of(inc)) {
            incumbent = Some(cand);
        }
        let inc_ee = ee_of(incumbent.as_ref().unwrap());
        trace.push(inc_ee);
        warm = Some(search.mults.clone());
        last = Some((gap, eps_abs, search.rho_trace, search.unconverged));
        if gap < eps_abs {
            converged = true;
            break;
        }
        q = inc_ee;
    }
    let Some(sol) = incumbent else {
        return SolveResult::infeasible(n, trace, Vec::new(), iterations);
    };
    let (final_gap, eps_abs, rho_trace, unconverged_rho) = last.unwrap();
    SolveResult {
        q_star: ee_of(&sol),
        capacity_bps: sol.capacity_bps,
        harvested_w: sol.harvested_w,
        u_tp_w: sol.u_tp_w,
        alloc: sol.alloc,
        feasible: true,
        converged,
        outer_trace: trace,
        rho_trace,
        iterations,
        final_gap,
        eps_abs,
        unconverged_rho,
    }
}

/// The energy-efficiency maximising allocation.
pub fn dinkelbach_solve(ch: &ChannelRealization, params: &SystemParams, opts: &OuterOptions) -> SolveResult {
    let rhos = opts.grid(params);
    match opts.loop_order {
        LoopOrder::RhoInside => outer_loop(&rhos, ch, params, opts),
        LoopOrder::RhoOutside => {
            let mut best: Option<SolveResult> = None;
            let mut rho_trace = Vec::with_capacity(rhos.len());
            for &rho in &rhos {
                let r = outer_loop(&[rho], ch, params, opts);
                rho_trace.push(if r.feasible { r.q_star } else { f64::NAN });
                if r.feasible && best.as_ref().is_none_or(|b| r.q_star > b.q_star) {
                    best = Some(r);
                }
            }
            match best {
                Some(mut b) => {
                    b.rho_trace = rho_trace;
                    b
                }
                None => SolveResult::infeasible(ch.n_subcarriers(), Vec::new(), rho_trace, 0),
            }
        }
    }
}

/// Maximises the capacity alone (`q = 0`) and reports its energy efficiency.
pub fn baseline_capacity_solve(
    ch: &ChannelRealization,
    params: &SystemParams,
    opts: &OuterOptions,
) -> SolveResult {
    let n = ch.n_subcarriers();
    match solve_inner_over_rho(0.0, ch, params, opts) {
        Ok(s) => {
            let ee = ee_of(&s.best);
            SolveResult {
                q_star: ee,
                capacity_bps: s.best.capacity_bps,
                harvested_w: s.best.harvested_w,
                u_tp_w: s.best.u_tp_w,
                alloc: s.best.alloc,
                feasible: true,
                converged: true,
                outer_trace: vec![ee],
                rho_trace: s.rho_trace,
                iterations: 1,
                final_gap: f64::NAN,
                eps_abs: f64::NAN,
                unconverged_rho: s.unconverged,
            }
        }
        Err(_) => SolveResult::infeasible(n, Vec::new(), Vec::new(), 1),
    }
}

/// Whether any grid point admits a feasible allocation.
pub fn feasibility_check(ch: &ChannelRealization, params: &SystemParams, opts: &OuterOptions) -> bool {
    solve_inner_over_rho(0.0, ch, params, opts).is_ok()
}
