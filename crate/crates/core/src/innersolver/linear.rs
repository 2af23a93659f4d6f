//! The `rho = 1` corner: every `Gamma_i` is zero, the rate is identically
//! zero and the subtractive objective is linear in the powers.
//!
//! The feasible set is a polytope cut by the sum-power bound and the two
//! harvesting bounds, so (with the per-subcarrier cap at least the sum cap)
//! some optimal vertex has at most two positive entries. Those vertices are
//! enumerated directly, then the multipliers are recovered by minimising the
//! dual over the matching breakpoints.

use super::layer2::redundant_sum_multiplier;
use super::{InnerOptions, InnerSolution, InnerStatus, Multipliers, Subproblem};

const BETA: usize = 1;

pub(super) fn solve(sub: &Subproblem, opts: &InnerOptions) -> InnerSolution {
    let tol = opts.tol_residual;
    let n = sub.n();
    let p = sub.params;
    if p.r_min_bps > 0.0 {
        return sub.finish(vec![0.0; n], Multipliers::zero(), 0, InnerStatus::Infeasible, tol);
    }
    let t = p.transmit_cap_w().min(sub.cap * n as f64);
    let box_cap = sub.cap.min(t);
    let lo = p.p_min_req_w - sub.p_interf;
    let hi = p.p_max_req_w - sub.p_interf;
    let b = &sub.harvest;
    let cost: Vec<f64> = b.iter().map(|&b| sub.q * (p.epsilon - b)).collect();

    let slack_p = tol * p.p_max_w.max(t);
    let slack_h = tol * sub.scales[4];
    let ok_power = |x: f64| x >= -slack_p && x <= box_cap + slack_p;
    let ok_harvest = |h: f64| h >= lo - slack_h && h <= hi + slack_h;

    // (cost, total, support)
    let mut best: Option<(f64, f64, Vec<(usize, f64)>)> = None;
    let mut offer = |support: Vec<(usize, f64)>| {
        let c: f64 = support.iter().map(|&(i, x)| cost[i] * x).sum();
        let tot: f64 = support.iter().map(|&(_, x)| x).sum();
        let better = match &best {
            None => true,
            Some((bc, bt, _)) => {
                let margin = 1e-12 * (bc.abs() + c.abs()).max(1e-300);
                c < bc - margin || (c <= bc + margin && tot < *bt)
            }
        };
        if better {
            best = Some((c, tot, support));
        }
    };

    if ok_harvest(0.0) {
        offer(Vec::new());
    }
    for i in 0..n {
        let mut xs = vec![box_cap];
        if b[i] > 0.0 {
            xs.extend([lo / b[i], hi / b[i]]);
        }
        for x in xs {
            if x > 0.0 && ok_power(x) && ok_harvest(b[i] * x) {
                offer(vec![(i, x.min(box_cap))]);
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let db = b[i] - b[j];
            if db == 0.0 {
                continue;
            }
            for level in [lo, hi] {
                let xi = (level - b[j] * t) / db;
                let xj = t - xi;
                if xi > 0.0 && xj > 0.0 && ok_power(xi) && ok_power(xj) {
                    offer(vec![(i, xi.min(box_cap)), (j, xj.min(box_cap))]);
                }
            }
        }
    }

    let Some((_, _, support)) = best else {
        return sub.finish(vec![0.0; n], Multipliers::zero(), 0, InnerStatus::Infeasible, tol);
    };
    let mut p_w = vec![0.0; n];
    for &(i, x) in &support {
        p_w[i] = x;
    }
    let mults = recover_multipliers(sub, &cost, &support);
    let e = sub.evaluate(&mults, &p_w);
    let status = if sub.residuals(&p_w, &e, tol).feasible {
        InnerStatus::Converged
    } else {
        InnerStatus::Infeasible
    };
    sub.finish(p_w, mults, 1, status, tol)
}

/// The dual is piecewise linear in `(sum price, theta - alpha)`; its minimum
/// sits where the prices of the support subcarriers vanish.
fn recover_multipliers(sub: &Subproblem, cost: &[f64], support: &[(usize, f64)]) -> Multipliers {
    let b = &sub.harvest;
    let eps = sub.params.epsilon;
    let fixed = redundant_sum_multiplier(sub);
    let build = |sum_price: f64, nu: f64| {
        let mut m = Multipliers {
            alpha: (-nu).max(0.0),
            theta: nu.max(0.0),
            ..Multipliers::zero()
        };
        if fixed == BETA {
            m.lambda = sum_price / eps;
        } else {
            m.beta = sum_price;
        }
        m
    };

    let mut cands = vec![(0.0, 0.0)];
    for i in 0..b.len() {
        if b[i] > 0.0 {
            cands.push((0.0, -cost[i] / b[i]));
        }
    }
    for &(i, _) in support {
        if -cost[i] >= 0.0 {
            cands.push((-cost[i], 0.0));
        }
        for j in 0..b.len() {
            let db = b[i] - b[j];
            if j == i || db == 0.0 {
                continue;
            }
            let nu = -(cost[i] - cost[j]) / db;
            let sum_price = -cost[i] - nu * b[i];
            if sum_price >= 0.0 {
                cands.push((sum_price, nu));
            }
        }
    }

    let mut p = vec![0.0; b.len()];
    let mut best = (f64::INFINITY, Multipliers::zero());
    for (sp, nu) in cands {
        let m = build(sp, nu);
        sub.waterfill_into(&m, &mut p);
        let g = sub.evaluate(&m, &p).dual;
        if g < best.0 {
            best = (g, m);
        }
    }
    best.1
}
