//! Limited-memory BFGS with a strong Wolfe line search.

use super::{LbfgsConfig, TrainState};
use crate::error::Result;

/// Objective value and gradient at a point, with caller data attached.
#[derive(Clone, Debug)]
pub struct Eval<E> {
    pub f: f64,
    pub g: Vec<f64>,
    pub extra: E,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbfgsStatus {
    GradientTolerance,
    LossTolerance,
    IterationLimit,
    /// No acceptable step along the quasi-Newton or the steepest-descent
    /// direction.
    LineSearchFailed,
}

impl LbfgsStatus {
    pub fn name(self) -> &'static str {
        match self {
            LbfgsStatus::GradientTolerance => "gradient-tolerance",
            LbfgsStatus::LossTolerance => "loss-tolerance",
            LbfgsStatus::IterationLimit => "iteration-limit",
            LbfgsStatus::LineSearchFailed => "line-search-failed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsReport {
    pub iterations: usize,
    pub status: LbfgsStatus,
    pub loss: f64,
    pub grad_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two-loop recursion: `-H g` from the stored pairs.
fn direction(pairs: &std::collections::VecDeque<(Vec<f64>, Vec<f64>)>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alpha.push((a, rho));
    }
    if let Some((s, y)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y), (a, rho)) in pairs.iter().zip(alpha.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, kept
/// inside the bracket; falls back to bisection.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let w = hi - lo;
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mid = 0.5 * (a + b);
    if !disc.is_finite() || disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    if t.is_finite() && t > lo + 0.1 * w && t < hi - 0.1 * w {
        t
    } else {
        mid
    }
}

/// Strong Wolfe line search along `d` from `x` (Nocedal and Wright,
/// algorithms 3.5 and 3.6). Returns the accepted step and its evaluation.
#[allow(clippy::too_many_arguments)]
pub fn line_search<E>(
    x: &[f64],
    start: &Eval<E>,
    d: &[f64],
    alpha0: f64,
    cfg: &LbfgsConfig,
    objective: &mut impl FnMut(&[f64]) -> Result<Eval<E>>,
) -> Result<Option<(f64, Eval<E>)>> {
    let f0 = start.f;
    let dphi0 = dot(&start.g, d);
    if !(dphi0 < 0.0) {
        return Ok(None);
    }
    let mut trial = vec![0.0; x.len()];
    let mut eval_at = |a: f64, objective: &mut dyn FnMut(&[f64]) -> Result<Eval<E>>| -> Result<(Eval<E>, f64)> {
        for ((t, xi), di) in trial.iter_mut().zip(x).zip(d) {
            *t = xi + a * di;
        }
        let e = objective(&trial)?;
        let dphi = dot(&e.g, d);
        Ok((e, dphi))
    };
    let armijo = |a: f64, f: f64| f.is_finite() && f <= f0 + cfg.c1 * a * dphi0;
    let curvature = |dphi: f64| dphi.abs() <= -cfg.c2 * dphi0;

    let mut evals = 0;
    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, f0, dphi0);
    let mut a = alpha0;
    // bracket [lo, hi] with the lower value at lo
    let mut bracket = None;
    while evals < cfg.max_line_search {
        let (e, dphi) = eval_at(a, objective)?;
        evals += 1;
        if !armijo(a, e.f) || (evals > 1 && e.f >= f_prev) {
            bracket = Some(((a_prev, f_prev, d_prev), (a, e.f, dphi)));
            break;
        }
        if curvature(dphi) {
            return Ok(Some((a, e)));
        }
        if dphi >= 0.0 {
            bracket = Some(((a, e.f, dphi), (a_prev, f_prev, d_prev)));
            break;
        }
        (a_prev, f_prev, d_prev) = (a, e.f, dphi);
        a *= 2.0;
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Ok(None);
    };
    while evals < cfg.max_line_search {
        let a = if hi.1.is_finite() && hi.2.is_finite() {
            cubic_step(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2)
        } else {
            0.5 * (lo.0 + hi.0)
        };
        let (e, dphi) = eval_at(a, objective)?;
        evals += 1;
        if !armijo(a, e.f) || e.f >= lo.1 {
            hi = (a, e.f, dphi);
        } else {
            if curvature(dphi) {
                return Ok(Some((a, e)));
            }
            if dphi * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, e.f, dphi);
        }
        if (hi.0 - lo.0).abs() <= 1e-16 * lo.0.abs().max(1e-300) {
            break;
        }
    }
    // an Armijo point inside the bracket is still progress
    if lo.0 > 0.0 {
        let (e, _) = eval_at(lo.0, objective)?;
        if armijo(lo.0, e.f) {
            return Ok(Some((lo.0, e)));
        }
    }
    Ok(None)
}

/// Runs L-BFGS from `state.params`, whose objective evaluation is `start`.
///
/// `on_iter` sees every accepted iterate; `state.iteration` counts them.
pub fn lbfgs_run<E>(
    state: &mut TrainState,
    start: Eval<E>,
    cfg: &LbfgsConfig,
    mut objective: impl FnMut(&[f64]) -> Result<Eval<E>>,
    mut on_iter: impl FnMut(&TrainState, &Eval<E>) -> Result<()>,
) -> Result<LbfgsReport> {
    let mut cur = start;
    let mut done = 0;
    let report = |status, e: &Eval<E>, done| LbfgsReport {
        iterations: done,
        status,
        loss: e.f,
        grad_norm: norm(&e.g),
    };
    loop {
        let gn = norm(&cur.g);
        if gn < cfg.tol_grad {
            return Ok(report(LbfgsStatus::GradientTolerance, &cur, done));
        }
        if done >= cfg.max_iterations {
            return Ok(report(LbfgsStatus::IterationLimit, &cur, done));
        }
        let mut d = direction(&state.pairs, &cur.g);
        if !(dot(&d, &cur.g) < 0.0) {
            state.pairs.clear();
            d = cur.g.iter().map(|v| -v).collect();
        }
        let alpha0 = if state.pairs.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };
        let mut found = line_search(&state.params, &cur, &d, alpha0, cfg, &mut objective)?;
        let mut fallback = false;
        if found.is_none() && !state.pairs.is_empty() {
            log::warn!("line search failed; trying one steepest-descent step");
            state.pairs.clear();
            d = cur.g.iter().map(|v| -v).collect();
            found = line_search(&state.params, &cur, &d, (1.0 / gn).min(1.0), cfg, &mut objective)?;
            fallback = true;
        }
        let Some((alpha, next)) = found else {
            return Ok(report(LbfgsStatus::LineSearchFailed, &cur, done));
        };
        let s: Vec<f64> = d.iter().map(|v| alpha * v).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        for (p, si) in state.params.iter_mut().zip(&s) {
            *p += si;
        }
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            state.pairs.push_back((s, y));
            if state.pairs.len() > cfg.memory {
                state.pairs.pop_front();
            }
        }
        done += 1;
        state.iteration += 1;
        on_iter(state, &next)?;
        let rel = (cur.f - next.f) / cur.f.abs().max(f64::MIN_POSITIVE);
        cur = next;
        if fallback {
            return Ok(report(LbfgsStatus::LineSearchFailed, &cur, done));
        }
        if rel < cfg.tol_f {
            return Ok(report(LbfgsStatus::LossTolerance, &cur, done));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(h: [f64; 2], c: [f64; 2]) -> impl FnMut(&[f64]) -> Result<Eval<()>> {
        move |x: &[f64]| {
            let g = vec![h[0] * (x[0] - c[0]), h[1] * (x[1] - c[1])];
            let f = 0.5 * (h[0] * (x[0] - c[0]).powi(2) + h[1] * (x[1] - c[1]).powi(2));
            Ok(Eval { f, g, extra: () })
        }
    }

    fn run(x0: Vec<f64>, mut f: impl FnMut(&[f64]) -> Result<Eval<()>>, cfg: LbfgsConfig) -> (TrainState, LbfgsReport) {
        let start = f(&x0).unwrap();
        let mut state = TrainState::new(x0);
        let r = lbfgs_run(&mut state, start, &cfg, f, |_, _| Ok(())).unwrap();
        (state, r)
    }

    fn cfg(iters: usize) -> LbfgsConfig {
        LbfgsConfig {
            max_iterations: iters,
            tol_f: 0.0,
            ..LbfgsConfig::default()
        }
    }

    #[test]
    fn scalar_quadratic() {
        let f = |x: &[f64]| {
            Ok(Eval {
                f: 0.5 * (x[0] - 3.0).powi(2),
                g: vec![x[0] - 3.0],
                extra: (),
            })
        };
        let (s, r) = run(vec![0.0], f, cfg(2));
        assert!((s.params[0] - 3.0).abs() < 1e-10, "{:?}", s.params);
        assert!(r.iterations <= 2);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let (s, r) = run(vec![1.0, 1.0], quad([1.0, 100.0], [0.5, -0.2]), cfg(25));
        assert!(r.grad_norm < 1e-8, "{r:?}");
        assert!(r.iterations <= 25);
        assert!((s.params[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn start_at_minimum() {
        let (s, r) = run(vec![0.5, -0.2], quad([1.0, 100.0], [0.5, -0.2]), cfg(10));
        assert_eq!(r.iterations, 0);
        assert_eq!(r.status, LbfgsStatus::GradientTolerance);
        assert_eq!(s.params, vec![0.5, -0.2]);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            Ok(Eval {
                f: (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2),
                g: vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)],
                extra: (),
            })
        };
        let (s, r) = run(vec![-1.2, 1.0], f, cfg(200));
        assert_eq!(r.status, LbfgsStatus::GradientTolerance, "{r:?}");
        assert!((s.params[0] - 1.0).abs() < 1e-6 && (s.params[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn memory_is_bounded() {
        let mut c = cfg(30);
        c.memory = 3;
        c.tol_grad = 0.0;
        let f = |x: &[f64]| {
            let f: f64 = x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v.powi(4)).sum();
            let g = x.iter().enumerate().map(|(i, v)| 4.0 * (i + 1) as f64 * v.powi(3)).collect();
            Ok(Eval { f, g, extra: () })
        };
        let x0 = vec![1.0; 6];
        let start = f(&x0).unwrap();
        let mut state = TrainState::new(x0);
        lbfgs_run(&mut state, start, &c, f, |s, _| {
            assert!(s.pairs.len() <= 3);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn non_descent_objective_fails_cleanly() {
        // gradient that points the wrong way: no step can satisfy Armijo
        let f = |x: &[f64]| Ok(Eval { f: x[0], g: vec![-1.0], extra: () });
        let (s, r) = run(vec![0.0], f, cfg(10));
        assert_eq!(r.status, LbfgsStatus::LineSearchFailed);
        assert_eq!(s.params, vec![0.0]);
    }
}
