use serde::{Deserialize, Serialize};

use super::{InnerOptions, InnerSolution, Subproblem};
use crate::sysmodel::{ChannelRealization, SystemParams};

/// Relative KKT residuals of an inner solution. Every field is
/// dimensionless; zero means the condition holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementary: f64,
    pub duality_gap_rel: f64,
    pub max_violation: f64,
}

/// Checks the KKT conditions of `sol` for the subtractive problem at `q`.
///
/// Stationarity compares the marginal rate of subcarrier `i` with its price
/// `Lambda_i`; at the bounds `0` and `cap` only the sign that would move the
/// power inwards counts.
pub fn kkt_check(
    sol: &InnerSolution,
    q: f64,
    ch: &ChannelRealization,
    params: &SystemParams,
    opts: &InnerOptions,
) -> KktReport {
    let sub = Subproblem::new(q, sol.alloc.rho, ch, params, opts);
    let m = &sol.mults;
    let p = &sol.alloc.p_w;
    let level = sub.w_ln2 * (1.0 + m.gamma);

    let mut stationarity: f64 = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        let g = sub.gamma[i];
        let lam = sub.lambda_factor(m, i);
        let marginal = level * g / (1.0 + g * pi);
        let scale = marginal.abs() + lam.abs() + q * params.epsilon + f64::MIN_POSITIVE;
        let d = (marginal - lam) / scale;
        let r = if pi <= 0.0 {
            d.max(0.0)
        } else if pi >= sub.cap {
            (-d).max(0.0)
        } else {
            d.abs()
        };
        stationarity = stationarity.max(r);
    }

    let e = sub.evaluate(m, p);
    let obj_scale = sub.objective_scale(&e);
    let mu = m.to_array();
    let primal = (0..5)
        .map(|u| (-e.slacks[u] / sub.scales[u]).max(0.0))
        .fold(0.0, f64::max);
    let dual = mu.iter().map(|&x| (-x).max(0.0)).fold(0.0, f64::max);
    let complementary = (0..5)
        .map(|u| mu[u].abs() * e.slacks[u].abs() / obj_scale)
        .fold(0.0, f64::max);
    let duality_gap_rel = (e.dual - e.objective).abs() / obj_scale;
    let max_violation = stationarity
        .max(primal)
        .max(dual)
        .max(complementary)
        .max(duality_gap_rel);
    KktReport {
        stationarity,
        primal,
        dual,
        complementary,
        duality_gap_rel,
        max_violation,
    }
}
