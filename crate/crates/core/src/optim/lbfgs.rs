//! Limited-memory BFGS with a strong-Wolfe line search (bracketing phase
//! followed by a cubic-interpolation zoom).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbfgsConfig {
    pub history: usize,
    pub max_iter: usize,
    /// Hard cap on objective evaluations, line search included.
    pub max_evals: usize,
    pub lr: f64,
    pub tol_grad: f64,
    pub tol_change: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_ls: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            history: 20,
            max_iter: 100,
            max_evals: 125,
            lr: 1.0,
            tol_grad: 1e-10,
            tol_change: 1e-12,
            c1: 1e-4,
            c2: 0.9,
            max_ls: 25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxIter,
    MaxEvals,
    GradTol,
    ChangeTol,
    NotDescent,
    NonFinite,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LbfgsReport {
    pub iterations: usize,
    pub evals: usize,
    pub f_initial: f64,
    pub f_final: f64,
    /// Objective after each accepted step.
    pub history: Vec<f64>,
    pub stop: StopReason,
}

struct Objective<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Objective<F> {
    fn eval(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        self.evals += 1;
        let (v, g) = (self.f)(x);
        if v.is_finite() && g.iter().all(|gi| gi.is_finite()) {
            (v, g)
        } else {
            // non-finite trial points look like infinitely bad steps
            (f64::INFINITY, vec![0.0; x.len()])
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + t * di).collect()
}

/// Minimizer of the cubic through `(x1, f1, g1)` and `(x2, f2, g2)`,
/// clamped to `bounds`.
fn cubic_interpolate(
    x1: f64,
    f1: f64,
    g1: f64,
    x2: f64,
    f2: f64,
    g2: f64,
    bounds: Option<(f64, f64)>,
) -> f64 {
    let (lo, hi) = bounds.unwrap_or(if x1 <= x2 { (x1, x2) } else { (x2, x1) });
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq >= 0.0 && d2_sq.is_finite() {
        let d2 = d2_sq.sqrt();
        let pos = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if pos.is_finite() {
            return pos.max(lo).min(hi);
        }
    }
    (lo + hi) / 2.0
}

struct LineSearch {
    f: f64,
    g: Vec<f64>,
    t: f64,
}

#[allow(clippy::too_many_arguments)]
fn strong_wolfe<F: FnMut(&[f64]) -> (f64, Vec<f64>)>(
    obj: &mut Objective<F>,
    x: &[f64],
    mut t: f64,
    d: &[f64],
    f: f64,
    g: &[f64],
    gtd: f64,
    cfg: &LbfgsConfig,
) -> LineSearch {
    let d_norm = max_abs(d);
    let (mut f_new, mut g_new) = obj.eval(&axpy(x, t, d));
    let mut gtd_new = dot(&g_new, d);

    let (mut t_prev, mut f_prev, mut g_prev, mut gtd_prev) = (0.0, f, g.to_vec(), gtd);
    let mut done = false;
    let mut ls_iter = 0;

    // bracket entries: (t, f, g, gtd)
    let mut bracket: Vec<(f64, f64, Vec<f64>, f64)>;
    loop {
        if f_new > f + cfg.c1 * t * gtd || (ls_iter > 1 && f_new >= f_prev) {
            bracket = vec![(t_prev, f_prev, g_prev, gtd_prev), (t, f_new, g_new, gtd_new)];
            break;
        }
        if gtd_new.abs() <= -cfg.c2 * gtd {
            bracket = vec![(t, f_new, g_new, gtd_new)];
            done = true;
            break;
        }
        if gtd_new >= 0.0 {
            bracket = vec![(t_prev, f_prev, g_prev, gtd_prev), (t, f_new, g_new, gtd_new)];
            break;
        }
        let min_step = t + 0.01 * (t - t_prev);
        let max_step = t * 10.0;
        let next = cubic_interpolate(t_prev, f_prev, gtd_prev, t, f_new, gtd_new, Some((min_step, max_step)));
        t_prev = t;
        f_prev = f_new;
        g_prev = g_new;
        gtd_prev = gtd_new;
        t = next;
        let (fv, gv) = obj.eval(&axpy(x, t, d));
        f_new = fv;
        g_new = gv;
        gtd_new = dot(&g_new, d);
        ls_iter += 1;
        if ls_iter == cfg.max_ls {
            bracket = vec![(0.0, f, g.to_vec(), gtd), (t, f_new, g_new, gtd_new)];
            break;
        }
    }

    // zoom
    let mut insuf_progress = false;
    let (mut low, mut high) = if bracket.len() == 2 && bracket[0].1 > bracket[1].1 { (1, 0) } else { (0, 1) };
    while !done && ls_iter < cfg.max_ls && bracket.len() == 2 {
        let (b0, b1) = (bracket[0].0, bracket[1].0);
        if (b1 - b0).abs() * d_norm < cfg.tol_change {
            break;
        }
        t = cubic_interpolate(b0, bracket[0].1, bracket[0].3, b1, bracket[1].1, bracket[1].3, None);
        let (b_min, b_max) = (b0.min(b1), b0.max(b1));
        let eps = 0.1 * (b_max - b_min);
        if (b_max - t).min(t - b_min) < eps {
            if insuf_progress || t >= b_max || t <= b_min {
                t = if (t - b_max).abs() < (t - b_min).abs() { b_max - eps } else { b_min + eps };
                insuf_progress = false;
            } else {
                insuf_progress = true;
            }
        } else {
            insuf_progress = false;
        }
        let (fv, gv) = obj.eval(&axpy(x, t, d));
        let gtdv = dot(&gv, d);
        ls_iter += 1;
        if fv > f + cfg.c1 * t * gtd || fv >= bracket[low].1 {
            bracket[high] = (t, fv, gv, gtdv);
            if bracket[0].1 <= bracket[1].1 {
                low = 0;
                high = 1;
            } else {
                low = 1;
                high = 0;
            }
        } else {
            if gtdv.abs() <= -cfg.c2 * gtd {
                done = true;
            } else if gtdv * (bracket[high].0 - bracket[low].0) >= 0.0 {
                bracket[high] = bracket[low].clone();
            }
            bracket[low] = (t, fv, gv, gtdv);
        }
    }
    let (t, f, g, _) = bracket.swap_remove(low.min(bracket.len() - 1));
    LineSearch { f, g, t }
}

/// Minimize `f` starting from `x` (updated in place). `f` returns the value
/// and gradient.
pub fn minimize<F>(x: &mut Vec<f64>, f: F, cfg: &LbfgsConfig) -> LbfgsReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut obj = Objective { f, evals: 0 };
    let (mut fx, mut g) = obj.eval(x);
    let f_initial = fx;
    let mut history = Vec::new();
    let finish = |iterations, evals, fx, history, stop| LbfgsReport {
        iterations,
        evals,
        f_initial,
        f_final: fx,
        history,
        stop,
    };
    if !fx.is_finite() {
        return finish(0, obj.evals, fx, history, StopReason::NonFinite);
    }
    if max_abs(&g) <= cfg.tol_grad {
        return finish(0, obj.evals, fx, history, StopReason::GradTol);
    }

    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.history);
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut t = cfg.lr * (1.0f64).min(1.0 / g.iter().map(|v| v.abs()).sum::<f64>());
    let mut stop = StopReason::MaxIter;
    let mut iterations = 0;

    for iter in 0..cfg.max_iter {
        iterations = iter + 1;
        if iter > 0 {
            // two-loop recursion
            let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
            let mut alphas = Vec::with_capacity(mem.len());
            for (s, y, rho) in mem.iter().rev() {
                let a = rho * dot(s, &q);
                for (qi, yi) in q.iter_mut().zip(y) {
                    *qi -= a * yi;
                }
                alphas.push(a);
            }
            let h_diag = mem
                .back()
                .map(|(s, y, _)| dot(s, y) / dot(y, y))
                .unwrap_or(1.0);
            for qi in q.iter_mut() {
                *qi *= h_diag;
            }
            for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &q);
                for (qi, si) in q.iter_mut().zip(s) {
                    *qi += (a - b) * si;
                }
            }
            d = q;
            t = cfg.lr;
        }
        let gtd = dot(&g, &d);
        if gtd > -cfg.tol_change {
            stop = StopReason::NotDescent;
            break;
        }
        let ls = strong_wolfe(&mut obj, x, t, &d, fx, &g, gtd, cfg);
        if !ls.f.is_finite() {
            stop = StopReason::NonFinite;
            break;
        }
        if ls.f > fx {
            // line search failed to find any decrease; keep the current point
            stop = StopReason::ChangeTol;
            break;
        }
        let s: Vec<f64> = d.iter().map(|di| di * ls.t).collect();
        let y: Vec<f64> = ls.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        let ys = dot(&y, &s);
        if ys > 1e-10 {
            if mem.len() == cfg.history {
                mem.pop_front();
            }
            mem.push_back((s.clone(), y, 1.0 / ys));
        }
        let f_old = fx;
        fx = ls.f;
        g = ls.g;
        history.push(fx);

        if obj.evals >= cfg.max_evals {
            stop = StopReason::MaxEvals;
            break;
        }
        if max_abs(&g) <= cfg.tol_grad {
            stop = StopReason::GradTol;
            break;
        }
        if max_abs(&s) <= cfg.tol_change || (fx - f_old).abs() < cfg.tol_change {
            stop = StopReason::ChangeTol;
            break;
        }
    }
    finish(iterations, obj.evals, fx, history, stop)
}
