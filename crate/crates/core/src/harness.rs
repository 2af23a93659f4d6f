//! Monte-Carlo sweeps over transmit-power limits and interference levels,
//! the convergence trace of the outer loop, and an exhaustive-grid oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dinkelbach::{baseline_capacity_solve, dinkelbach_solve, OuterOptions, SolveResult};
use crate::error::SolveError;
use crate::objective::{
    constraint_residuals, constraint_scales, energy_efficiency, interference_harvest, sinr_factor,
    subcarrier_capacity, PowerAllocation, DEFAULT_FEASIBILITY_TOL,
};
use crate::sysmodel::{dbm_to_watt, generate_channel, watt_to_dbm, ChannelRealization, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    Baseline,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Baseline => "baseline",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSelection {
    Proposed,
    Baseline,
    Both,
}

impl SchemeSelection {
    pub fn schemes(self) -> &'static [Scheme] {
        match self {
            SchemeSelection::Proposed => &[Scheme::Proposed],
            SchemeSelection::Baseline => &[Scheme::Baseline],
            SchemeSelection::Both => &[Scheme::Proposed, Scheme::Baseline],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub params: SystemParams,
    pub p_max_dbm_grid: Vec<f64>,
    pub inr_db_list: Vec<f64>,
    pub n_trials: usize,
    pub base_seed: u64,
    pub scheme: SchemeSelection,
    pub outer: OuterOptions,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), crate::ParamError> {
        use crate::ParamError;
        if self.n_trials == 0 {
            return Err(ParamError::invalid("n_trials", "must be at least 1"));
        }
        if self.p_max_dbm_grid.is_empty() {
            return Err(ParamError::invalid("p_max_dbm_grid", "must not be empty"));
        }
        if self.inr_db_list.is_empty() {
            return Err(ParamError::invalid("inr_db_list", "must not be empty"));
        }
        self.params.validate()
    }

    /// Parameters at one sweep point.
    pub fn params_at(&self, p_max_dbm: f64, inr_db: f64) -> SystemParams {
        SystemParams {
            p_max_w: dbm_to_watt(p_max_dbm),
            inr_db,
            ..self.params.clone()
        }
    }
}

/// Trial averages at one `(P_max, INR, scheme)` point.
///
/// Energy efficiency and capacity average over all trials with infeasible
/// trials counted as zero. Splitting ratio and harvested power average over
/// feasible trials only and are `NaN` when there are none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_max_dbm: f64,
    pub inr_db: f64,
    pub scheme: Scheme,
    pub avg_ee_bit_per_joule: f64,
    pub avg_capacity_bps: f64,
    pub avg_harvested_dbm: f64,
    pub avg_rho: f64,
    pub feasibility_rate: f64,
    pub n_trials: usize,
}

pub fn solve_scheme(
    scheme: Scheme,
    ch: &ChannelRealization,
    params: &SystemParams,
    opts: &OuterOptions,
) -> SolveResult {
    match scheme {
        Scheme::Proposed => dinkelbach_solve(ch, params, opts),
        Scheme::Baseline => baseline_capacity_solve(ch, params, opts),
    }
}

/// Seed of trial `t`.
pub fn trial_seed(base_seed: u64, t: usize) -> u64 {
    base_seed.wrapping_add(t as u64)
}

/// Solves every trial at one sweep point. Results are in trial order.
pub fn trial_results(cfg: &SweepConfig, p_max_dbm: f64, inr_db: f64, scheme: Scheme) -> Vec<SolveResult> {
    let params = cfg.params_at(p_max_dbm, inr_db);
    (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| {
            let ch = generate_channel(&params, trial_seed(cfg.base_seed, t));
            solve_scheme(scheme, &ch, &params, &cfg.outer)
        })
        .collect()
}

/// Serial reduction of per-trial results into a row.
pub fn summarize(p_max_dbm: f64, inr_db: f64, scheme: Scheme, results: &[SolveResult]) -> SweepRow {
    let n = results.len();
    let mut ee = 0.0;
    let mut cap = 0.0;
    let mut harvest = 0.0;
    let mut rho = 0.0;
    let mut feasible = 0usize;
    for r in results {
        if !r.feasible {
            continue;
        }
        feasible += 1;
        ee += r.q_star;
        cap += r.capacity_bps;
        harvest += r.harvested_w;
        rho += r.alloc.rho;
    }
    let (avg_harvested_dbm, avg_rho) = if feasible == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let h = harvest / feasible as f64;
        (watt_to_dbm(h).unwrap_or(f64::NEG_INFINITY), rho / feasible as f64)
    };
    SweepRow {
        p_max_dbm,
        inr_db,
        scheme,
        avg_ee_bit_per_joule: ee / n as f64,
        avg_capacity_bps: cap / n as f64,
        avg_harvested_dbm,
        avg_rho,
        feasibility_rate: feasible as f64 / n as f64,
        n_trials: n,
    }
}

pub fn run_trials(cfg: &SweepConfig, p_max_dbm: f64, inr_db: f64, scheme: Scheme) -> SweepRow {
    summarize(p_max_dbm, inr_db, scheme, &trial_results(cfg, p_max_dbm, inr_db, scheme))
}

/// Rows ordered by INR, then scheme, then `P_max`.
pub fn sweep(cfg: &SweepConfig) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &inr in &cfg.inr_db_list {
        for &scheme in cfg.scheme.schemes() {
            for &p in &cfg.p_max_dbm_grid {
                rows.push(run_trials(cfg, p, inr, scheme));
            }
        }
    }
    rows
}

/// Trial-averaged energy efficiency of the incumbent after each outer
/// iteration, `l_max` entries long. Converged trials carry their last value
/// forward; infeasible trials contribute zero.
pub fn convergence_trace(
    params: &SystemParams,
    inr_db: f64,
    p_max_dbm: f64,
    n_trials: usize,
    seed: u64,
    opts: &OuterOptions,
) -> Vec<f64> {
    let params = SystemParams {
        p_max_w: dbm_to_watt(p_max_dbm),
        inr_db,
        ..params.clone()
    };
    let len = opts.l_max.max(1);
    let traces: Vec<Vec<f64>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let ch = generate_channel(&params, trial_seed(seed, t));
            let r = dinkelbach_solve(&ch, &params, opts);
            r.outer_trace
        })
        .collect();
    let mut avg = vec![0.0; len];
    for tr in &traces {
        let Some(&last) = tr.last() else { continue };
        for (k, a) in avg.iter_mut().enumerate() {
            *a += tr.get(k).copied().unwrap_or(last);
        }
    }
    for a in &mut avg {
        *a /= n_trials.max(1) as f64;
    }
    avg
}

/// Relative energy-efficiency tolerance between solver and oracle, on top of
/// the oracle's grid-resolution allowance.
pub const ORACLE_REL_TOL: f64 = 5e-3;

/// `base` cut down to `n` subcarriers, keeping the subcarrier bandwidth and
/// the rate requirement per subcarrier.
pub fn scaled_params(base: &SystemParams, n: usize) -> SystemParams {
    let w = base.subcarrier_bw_hz();
    SystemParams {
        n_subcarriers: n,
        bandwidth_hz: w * n as f64,
        r_min_bps: base.r_min_bps * n as f64 / base.n_subcarriers as f64,
        ..base.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub n_subcarriers: usize,
    pub p_max_dbm: f64,
    pub inr_db: f64,
    pub seed: u64,
    pub solver_feasible: bool,
    pub oracle_feasible: bool,
    pub solver_ee: f64,
    pub oracle_ee: f64,
    /// `|q_solver - q_oracle| / q_oracle`; zero when both are infeasible.
    pub rel_gap: f64,
    pub allowance: f64,
    pub passed: bool,
}

/// Solves one small instance with both the solver and the exhaustive grid.
/// The solver uses the oracle's splitting-ratio grid.
#[allow(clippy::too_many_arguments)]
pub fn compare_with_oracle(
    base: &SystemParams,
    n: usize,
    p_max_dbm: f64,
    inr_db: f64,
    seed: u64,
    grid_steps: usize,
    rho_grid_m: usize,
    opts: &OuterOptions,
) -> OracleComparison {
    let params = SystemParams {
        p_max_w: dbm_to_watt(p_max_dbm),
        inr_db,
        ..scaled_params(base, n)
    };
    let ch = generate_channel(&params, seed);
    let opts = OuterOptions {
        rho_grid_m: Some(rho_grid_m),
        ..*opts
    };
    let solver = dinkelbach_solve(&ch, &params, &opts);
    let oracle = brute_force_solve(&ch, &params, grid_steps, rho_grid_m);
    let (oracle_feasible, oracle_ee, allowance) = match &oracle {
        Ok(b) => (true, b.ee, b.resolution_rel),
        Err(_) => (false, 0.0, 0.0),
    };
    let rel_gap = if oracle_feasible {
        (solver.q_star - oracle_ee).abs() / oracle_ee
    } else if solver.feasible {
        f64::INFINITY
    } else {
        0.0
    };
    let passed = solver.feasible == oracle_feasible && rel_gap <= ORACLE_REL_TOL + allowance;
    OracleComparison {
        n_subcarriers: n,
        p_max_dbm,
        inr_db,
        seed,
        solver_feasible: solver.feasible,
        oracle_feasible,
        solver_ee: solver.q_star,
        oracle_ee,
        rel_gap,
        allowance,
        passed,
    }
}

/// The `k`-th instance of the standard oracle suite: alternating two and
/// four subcarriers over a spread of power limits and interference levels.
pub fn oracle_suite_point(k: usize) -> (usize, f64, f64) {
    const P: [f64; 5] = [10.0, 14.0, 18.0, 22.0, 30.0];
    const INR: [f64; 3] = [0.0, 10.0, 50.0];
    let n = if k % 2 == 0 { 2 } else { 4 };
    (n, P[(k / 2) % P.len()], INR[k % INR.len()])
}

/// Best point of the exhaustive grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForce {
    pub alloc: PowerAllocation,
    pub ee: f64,
    /// Power grid spacing (Watt).
    pub step_w: f64,
    /// First-order bound on the energy efficiency lost to the power grid,
    /// relative to `ee`.
    pub resolution_rel: f64,
}

/// Exhaustive search over `p_w` on a uniform grid of `grid_steps` intervals
/// in `[0, cap]` per subcarrier (with `sum p <= cap`) and `rho` on the
/// `rho_grid_m` grid. Intended for at most four subcarriers.
pub fn brute_force_solve(
    ch: &ChannelRealization,
    params: &SystemParams,
    grid_steps: usize,
    rho_grid_m: usize,
) -> Result<BruteForce, SolveError> {
    let n = ch.n_subcarriers();
    let cap = params.transmit_cap_w();
    let g = grid_steps.max(1);
    let h = cap / g as f64;
    let w = params.subcarrier_bw_hz();
    let scales = constraint_scales(params);
    let tol = DEFAULT_FEASIBILITY_TOL;
    let lo = params.p_min_req_w - tol * scales[0];
    let hi = params.p_max_req_w + tol * scales[4];
    let r_min = params.r_min_bps - tol * scales[2];

    let mut best: Option<(f64, Vec<usize>, f64)> = None;
    let m = rho_grid_m.max(1);
    let mut idx = vec![0usize; n];
    for k in 0..=m {
        let rho = k as f64 / m as f64;
        let rate: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let gamma = sinr_factor(rho, ch, params, i);
                (0..=g).map(|j| subcarrier_capacity(j as f64 * h, gamma, w)).collect()
            })
            .collect();
        let harvest: Vec<f64> = (0..n).map(|i| params.eta * rho * ch.gain(i) * h).collect();
        let p_i = interference_harvest(rho, ch, params);
        let grid = Grid {
            n,
            g,
            h,
            rate: &rate,
            harvest: &harvest,
            p_i,
            lo,
            hi,
            r_min,
            params,
        };
        grid.walk(0, 0, 0.0, 0.0, &mut idx, &mut |ee, idx| {
            if best.as_ref().is_none_or(|(b, _, _)| ee > *b) {
                best = Some((ee, idx.to_vec(), rho));
            }
        });
    }
    let (_, idx, rho) = best.ok_or(SolveError::Infeasible)?;
    let alloc = PowerAllocation {
        p_w: idx.iter().map(|&j| j as f64 * h).collect(),
        rho,
    };
    if !constraint_residuals(&alloc, ch, params).feasible {
        return Err(SolveError::Infeasible);
    }
    let ee = energy_efficiency(&alloc, ch, params)?;
    let resolution_rel = ee_gradient_l1(&alloc, ch, params) * h / ee;
    Ok(BruteForce {
        alloc,
        ee,
        step_w: h,
        resolution_rel,
    })
}

/// `sum_i |d EE / d P_i|` at `alloc`.
fn ee_gradient_l1(alloc: &PowerAllocation, ch: &ChannelRealization, params: &SystemParams) -> f64 {
    let w = params.subcarrier_bw_hz();
    let u: f64 = (0..alloc.p_w.len())
        .map(|i| subcarrier_capacity(alloc.p_w[i], sinr_factor(alloc.rho, ch, params, i), w))
        .sum();
    let utp = crate::objective::total_power_unchecked(alloc, ch, params);
    (0..alloc.p_w.len())
        .map(|i| {
            let gamma = sinr_factor(alloc.rho, ch, params, i);
            let du = w / std::f64::consts::LN_2 * gamma / (1.0 + gamma * alloc.p_w[i]);
            let dutp = params.epsilon - params.eta * alloc.rho * ch.gain(i);
            ((du * utp - u * dutp) / (utp * utp)).abs()
        })
        .sum()
}

struct Grid<'a> {
    n: usize,
    g: usize,
    h: f64,
    rate: &'a [Vec<f64>],
    harvest: &'a [f64],
    p_i: f64,
    lo: f64,
    hi: f64,
    r_min: f64,
    params: &'a SystemParams,
}

impl Grid<'_> {
    fn walk(
        &self,
        i: usize,
        used: usize,
        rate: f64,
        desired: f64,
        idx: &mut [usize],
        visit: &mut impl FnMut(f64, &[usize]),
    ) {
        if i == self.n {
            let p = self.params;
            let total = used as f64 * self.h;
            let harvest = desired + self.p_i;
            let scales = constraint_scales(p);
            let tol = DEFAULT_FEASIBILITY_TOL;
            if harvest < self.lo
                || harvest > self.hi
                || rate < self.r_min
                || total > p.p_max_w + tol * scales[1]
                || p.p_c_w + p.epsilon * total > p.p_pg_w + tol * scales[3]
            {
                return;
            }
            let utp = p.p_c_w + p.epsilon * total - harvest;
            if utp > 0.0 {
                visit(rate / utp, idx);
            }
            return;
        }
        for j in 0..=(self.g - used) {
            idx[i] = j;
            self.walk(
                i + 1,
                used + j,
                rate + self.rate[i][j],
                desired + self.harvest[i] * j as f64,
                idx,
                visit,
            );
        }
    }
}
