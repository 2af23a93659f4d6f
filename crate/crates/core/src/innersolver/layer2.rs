//! Layer 2: projected gradient updates of the multipliers.
//!
//! The dual function `g(mu) = max_P L(P, mu)` is convex and differentiable,
//! and its gradient with respect to each multiplier is the corresponding
//! constraint slack. Every update therefore has the form
//! `mu <- [mu - xi * slack]^+`; the two step rules differ only in how `xi`
//! is chosen.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{Evaluation, InnerOptions, InnerSolution, InnerStatus, Multipliers, Subproblem};
use crate::objective::ConstraintResiduals;

const ALPHA: usize = 0;
const BETA: usize = 1;
const LAMBDA: usize = 3;
const THETA: usize = 4;

/// Positive step sizes, one per multiplier (alpha, beta, gamma, lambda, theta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes(pub [f64; 5]);

impl StepSizes {
    /// `xi_u(m) = c_u / (1 + m)`.
    pub fn diminishing(c: [f64; 5], m: usize) -> Self {
        let k = 1.0 / (1.0 + m as f64);
        Self(c.map(|c| c * k))
    }
}

/// One projected gradient step: `mu_u <- [mu_u - xi_u * slack_u]^+`.
pub fn update_multipliers(
    mults: &Multipliers,
    residuals: &ConstraintResiduals,
    steps: &StepSizes,
) -> Multipliers {
    let mu = mults.to_array();
    let s = residuals.as_multiplier_order();
    Multipliers::from_array(std::array::from_fn(|u| (mu[u] - steps.0[u] * s[u]).max(0.0)))
}

/// Dual Hessian `sum_i u_i J_i J_i^T` over subcarriers strictly inside `(0, cap)`.
fn hessian(sub: &Subproblem, m: &Multipliers, p: &[f64]) -> [[f64; 5]; 5] {
    let eps = sub.params.epsilon;
    let one_g = 1.0 + m.gamma;
    let level = sub.w_ln2 * one_g;
    let mut h = [[0.0; 5]; 5];
    for (i, &pi) in p.iter().enumerate() {
        if sub.gamma[i] <= 0.0 || pi <= 0.0 || pi >= sub.cap {
            continue;
        }
        let lam = sub.lambda_factor(m, i);
        let b = sub.harvest[i];
        let u = level / (lam * lam);
        let j = [-b, 1.0, -lam / one_g, eps, b];
        for r in 0..5 {
            let ur = u * j[r];
            for c in r..5 {
                h[r][c] += ur * j[c];
            }
        }
    }
    for r in 0..5 {
        for c in 0..r {
            h[r][c] = h[c][r];
        }
    }
    h
}

fn kkt_satisfied(sub: &Subproblem, mu: &[f64; 5], e: &Evaluation, tol: f64) -> bool {
    let obj = sub.objective_scale(e);
    (0..5).all(|u| {
        let s = e.slacks[u];
        s >= -tol * sub.scales[u] && mu[u] * s.abs() <= tol * obj
    })
}

/// Which of beta / lambda carries the sum-power price. The other constraint
/// is implied and its multiplier stays at zero.
pub(super) fn redundant_sum_multiplier(sub: &Subproblem) -> usize {
    let p = sub.params;
    if p.p_max_w <= (p.p_pg_w - p.p_c_w) / p.epsilon {
        LAMBDA
    } else {
        BETA
    }
}

struct Point {
    mu: [f64; 5],
    p: Vec<f64>,
    e: Evaluation,
}

impl Point {
    fn at(sub: &Subproblem, mu: [f64; 5], buf: Vec<f64>) -> Self {
        let mut p = buf;
        let m = Multipliers::from_array(mu);
        sub.waterfill_into(&m, &mut p);
        let e = sub.evaluate(&m, &p);
        Self { mu, p, e }
    }
}

fn project(mu: &[f64; 5], d: &[f64; 5], t: f64, fixed: usize) -> [f64; 5] {
    std::array::from_fn(|u| {
        if u == fixed {
            0.0
        } else {
            (mu[u] + t * d[u]).max(0.0)
        }
    })
}

/// Armijo test along the projection arc, with an allowance at rounding level.
fn sufficient_decrease(cur: &Point, cand: &Point, scale: f64) -> bool {
    let lin: f64 = (0..5)
        .map(|u| cur.e.slacks[u] * (cand.mu[u] - cur.mu[u]))
        .sum();
    let mass: f64 = (0..5).map(|u| (cur.mu[u] * cur.e.slacks[u]).abs()).sum();
    let slop = 1e-15 * (cur.e.dual.abs() + scale + mass);
    cand.e.dual <= cur.e.dual + 1e-4 * lin + slop && lin <= 0.0
}

enum Search {
    Accepted(Point),
    Failed,
}

/// Backtracking from `t = 1`; when `expand` is set and the unit step is
/// accepted, the step is doubled while the dual keeps decreasing.
fn line_search(
    sub: &Subproblem,
    cur: &Point,
    d: &[f64; 5],
    fixed: usize,
    expand: bool,
    scale: f64,
) -> Search {
    let n = cur.p.len();
    let mut t = 1.0;
    let mut best: Option<Point> = None;
    for _ in 0..80 {
        let cand = Point::at(sub, project(&cur.mu, d, t, fixed), vec![0.0; n]);
        if cand.mu != cur.mu && sufficient_decrease(cur, &cand, scale) {
            best = Some(cand);
            break;
        }
        t *= 0.5;
    }
    let Some(mut best) = best else {
        return Search::Failed;
    };
    if expand && t == 1.0 {
        for _ in 0..200 {
            t *= 2.0;
            let cand = Point::at(sub, project(&cur.mu, d, t, fixed), vec![0.0; n]);
            if cand.mu == best.mu || !sufficient_decrease(cur, &cand, scale) || cand.e.dual >= best.e.dual {
                break;
            }
            best = cand;
        }
    }
    Search::Accepted(best)
}

/// Newton and scaled-gradient directions over the free multipliers.
///
/// The free coordinates are Jacobi-scaled (coordinates without curvature use
/// the natural price scale instead) and the scaled Hessian is split by its
/// eigenvalues: the well-curved subspace gets the Newton step, the flat
/// remainder only a gradient component.
fn directions(
    h: &[[f64; 5]; 5],
    s: &[f64; 5],
    free: &[bool; 5],
    price_scale: &[f64; 5],
) -> ([f64; 5], [f64; 5], f64) {
    let idx: Vec<usize> = (0..5).filter(|&u| free[u]).collect();
    let k = idx.len();
    let mut newton = [0.0; 5];
    let mut flat = [0.0; 5];
    if k == 0 {
        return (newton, flat, 0.0);
    }
    let diag: Vec<f64> = idx
        .iter()
        .map(|&u| {
            let huu = h[u][u];
            if huu > 0.0 {
                huu.sqrt()
            } else {
                1.0 / price_scale[u]
            }
        })
        .collect();
    let hs = DMatrix::from_fn(k, k, |r, c| h[idx[r]][idx[c]] / (diag[r] * diag[c]));
    let gs = DVector::from_fn(k, |r, _| s[idx[r]] / diag[r]);
    let eig = SymmetricEigen::new(hs);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cut = 1e-14 * top.max(1e-300);
    let mut dn = DVector::zeros(k);
    let mut df = DVector::zeros(k);
    let mut flat_norm2 = 0.0;
    for j in 0..k {
        let v = eig.eigenvectors.column(j);
        let proj = v.dot(&gs);
        let ev = eig.eigenvalues[j];
        if ev > cut {
            dn -= v * (proj / ev);
        } else {
            df -= v * proj;
            flat_norm2 += proj * proj;
        }
    }
    let total2 = gs.norm_squared();
    for (r, &u) in idx.iter().enumerate() {
        newton[u] = dn[r] / diag[r];
        flat[u] = df[r] / diag[r];
    }
    let flat_share = if total2 > 0.0 { flat_norm2 / total2 } else { 0.0 };
    (newton, flat, flat_share)
}

pub(super) fn solve_newton(sub: &Subproblem, opts: &InnerOptions, init: Multipliers) -> InnerSolution {
    let tol = opts.tol_residual;
    let fixed = redundant_sum_multiplier(sub);
    let mut mu = init.to_array();
    mu[fixed] = 0.0;
    let floor = sub.feasible_objective_floor();
    let mut cur = Point::at(sub, mu, vec![0.0; sub.n()]);

    for it in 0..opts.max_iters {
        // alpha and theta act only through their difference; cancelling the
        // common part leaves the Layer-1 solution unchanged and lowers g.
        let common = cur.mu[ALPHA].min(cur.mu[THETA]);
        if common > 0.0 {
            let mut m = cur.mu;
            m[ALPHA] -= common;
            m[THETA] -= common;
            cur = Point::at(sub, m, cur.p);
        }

        if kkt_satisfied(sub, &cur.mu, &cur.e, tol) {
            return finish(sub, cur, it, InnerStatus::Converged, tol);
        }
        let scale = sub.objective_scale(&cur.e);
        let mass: f64 = (0..5).map(|u| (cur.mu[u] * cur.e.slacks[u]).abs()).sum();
        if cur.e.dual < floor - 1e-9 * scale - 1e-12 * mass {
            return finish(sub, cur, it, InnerStatus::Infeasible, tol);
        }

        let s = cur.e.slacks;
        let mut free: [bool; 5] = std::array::from_fn(|u| cur.mu[u] > 0.0 || s[u] < 0.0);
        free[fixed] = false;
        if cur.mu[ALPHA] > 0.0 {
            free[THETA] = false;
        } else if cur.mu[THETA] > 0.0 {
            free[ALPHA] = false;
        }
        let price_scale: [f64; 5] = std::array::from_fn(|u| scale / sub.scales[u]);
        let m = Multipliers::from_array(cur.mu);
        let h = hessian(sub, &m, &cur.p);
        let (newton, flat, flat_share) = directions(&h, &s, &free, &price_scale);

        let use_newton = newton.iter().any(|&d| d != 0.0) && flat_share < 0.5;
        let mut next = None;
        if use_newton {
            if let Search::Accepted(p) = line_search(sub, &cur, &newton, fixed, false, scale) {
                next = Some(p);
            }
        }
        if next.is_none() {
            // Scaled gradient over all free coordinates.
            let grad: [f64; 5] = std::array::from_fn(|u| {
                if !free[u] {
                    0.0
                } else if h[u][u] > 0.0 {
                    -s[u] / h[u][u]
                } else {
                    -s[u] / sub.scales[u] * price_scale[u]
                }
            });
            let dir = if flat.iter().any(|&d| d != 0.0) && flat_share >= 0.5 {
                flat
            } else {
                grad
            };
            next = match line_search(sub, &cur, &dir, fixed, true, scale) {
                Search::Accepted(p) => Some(p),
                Search::Failed if dir != grad => match line_search(sub, &cur, &grad, fixed, true, scale) {
                    Search::Accepted(p) => Some(p),
                    Search::Failed => None,
                },
                Search::Failed => None,
            };
        }
        match next {
            Some(p) => cur = p,
            None => return finish(sub, cur, it, InnerStatus::Stalled, tol),
        }
    }
    let status = if kkt_satisfied(sub, &cur.mu, &cur.e, tol) {
        InnerStatus::Converged
    } else {
        InnerStatus::IterationLimit
    };
    finish(sub, cur, opts.max_iters, status, tol)
}

pub(super) fn solve_diminishing(
    sub: &Subproblem,
    opts: &InnerOptions,
    init: Multipliers,
    c: Option<[f64; 5]>,
) -> InnerSolution {
    let tol = opts.tol_residual;
    let floor = sub.feasible_objective_floor();
    let mut cur = Point::at(sub, init.to_array(), vec![0.0; sub.n()]);
    let c = c.unwrap_or_else(|| {
        let h = hessian(sub, &init, &cur.p);
        let scale = sub.objective_scale(&cur.e);
        std::array::from_fn(|u| {
            if h[u][u] > 0.0 {
                1.0 / h[u][u]
            } else {
                scale / (sub.scales[u] * sub.scales[u])
            }
        })
    });
    for m in 0..opts.max_iters {
        let scale = sub.objective_scale(&cur.e);
        if cur.e.dual < floor - 1e-9 * scale {
            return finish(sub, cur, m, InnerStatus::Infeasible, tol);
        }
        let residuals = sub.residuals(&cur.p, &cur.e, tol);
        let next = update_multipliers(
            &Multipliers::from_array(cur.mu),
            &residuals,
            &StepSizes::diminishing(c, m),
        )
        .to_array();
        let movement = (0..5)
            .map(|u| (next[u] - cur.mu[u]).abs() / (cur.mu[u].abs() + scale / sub.scales[u]))
            .fold(0.0, f64::max);
        if m > 0 && movement < opts.tol_dual && residuals.feasible {
            return finish(sub, cur, m, InnerStatus::Converged, tol);
        }
        cur = Point::at(sub, next, cur.p);
    }
    finish(sub, cur, opts.max_iters, InnerStatus::IterationLimit, tol)
}

fn finish(sub: &Subproblem, pt: Point, iterations: usize, status: InnerStatus, tol: f64) -> InnerSolution {
    let mut sol = sub.finish(pt.p, Multipliers::from_array(pt.mu), iterations, status, tol);
    if sol.converged && !sol.residuals.feasible {
        sol.converged = false;
        sol.status = InnerStatus::Stalled;
    }
    sol
}
