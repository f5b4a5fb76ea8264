use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm};

/// Limited-memory inverse-Hessian approximation.
#[derive(Debug, Clone)]
pub struct LbfgsMemory {
    m: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl LbfgsMemory {
    pub fn new(m: usize) -> Self {
        LbfgsMemory {
            m: m.max(1),
            pairs: VecDeque::with_capacity(m),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores `(s, y)`; returns false when the pair fails `yᵀs > 0`.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let ys = dot(&y, &s);
        if !(ys > 0.0) {
            return false;
        }
        if self.pairs.len() == self.m {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / ys));
        true
    }

    /// Two-loop recursion: `−ℋ⁻¹∇ε` with `ℋ₀ = (sᵀy / yᵀy) I` from the
    /// newest pair, or `I` with an empty memory.
    pub fn direction(&self, grad: &[f64]) -> Vec<f64> {
        let mut q = grad.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let h0 = match self.pairs.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0,
        };
        let mut r: Vec<f64> = q.iter().map(|v| h0 * v).collect();
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &r);
            r.iter_mut().zip(s).for_each(|(ri, si)| *ri += si * (a - b));
        }
        r.iter().map(|v| -v).collect()
    }
}

/// Clamps `d` so that `x + d` lies in `[lo, hi]`, component by component.
pub fn project_direction(x: &[f64], d: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..d.len() {
        if x[i] + d[i] <= lo[i] {
            d[i] = lo[i] - x[i];
        } else if x[i] + d[i] >= hi[i] {
            d[i] = hi[i] - x[i];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineSearchParams {
    pub c1: f64,
    pub c2: f64,
    pub tau: f64,
    pub min_step: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams {
            c1: 1e-4,
            c2: 0.9,
            tau: 0.25,
            min_step: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub evaluations: usize,
    /// Whether the curvature condition held at the accepted step.
    pub wolfe: bool,
}

/// Backtracking from `α = 1` by factors `τ` until the Wolfe conditions and
/// the bounds hold.
///
/// Shrinking the step cannot repair a failed curvature condition, so the
/// first step that satisfies sufficient decrease and the bounds is accepted
/// with `wolfe = false` when curvature fails.
pub fn line_search<F>(
    mut f: F,
    x: &[f64],
    fx: f64,
    gx: &[f64],
    d: &[f64],
    params: &LineSearchParams,
    bounds: Option<(&[f64], &[f64])>,
) -> Result<LineSearchOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    check_len("search direction", x.len(), d.len())?;
    let slope = dot(d, gx);
    if !(slope < 0.0) {
        return Err(Error::LineSearchStalled {
            min_step: params.min_step,
        });
    }
    let mut alpha = 1.0;
    let mut evaluations = 0;
    while alpha >= params.min_step {
        let trial: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let feasible = match bounds {
            Some((lo, hi)) => trial
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(t, (l, h))| *t >= *l && *t <= *h),
            None => true,
        };
        if feasible {
            // a failed evaluation (e.g. non-positive coefficients) counts as no decrease
            if let Ok((ft, gt)) = f(&trial) {
                evaluations += 1;
                if ft <= fx + params.c1 * alpha * slope {
                    let wolfe = dot(d, &gt) >= params.c2 * slope;
                    return Ok(LineSearchOutcome {
                        alpha,
                        x: trial,
                        f: ft,
                        grad: gt,
                        evaluations,
                        wolfe,
                    });
                }
            } else {
                evaluations += 1;
            }
        }
        alpha *= params.tau;
    }
    Err(Error::LineSearchStalled {
        min_step: params.min_step,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once `‖∇f‖ ≤ tol · ‖∇f(x₀)‖`.
    pub tol: f64,
    pub line_search: LineSearchParams,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 5,
            max_iterations: 10,
            tol: 1e-8,
            line_search: LineSearchParams::default(),
        }
    }
}

#[derive(Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Set when the line search gave up; `x` is the last accepted iterate.
    pub stalled: Option<Error>,
}

/// Bound-constrained L-BFGS from `x0` with known `(f, ∇f)` there.
pub fn lbfgs_minimize<F>(
    mut f: F,
    x0: Vec<f64>,
    f0: f64,
    g0: Vec<f64>,
    cfg: &LbfgsConfig,
    bounds: Option<(&[f64], &[f64])>,
) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut mem = LbfgsMemory::new(cfg.memory);
    let (mut x, mut fx, mut g) = (x0, f0, g0);
    let g_ref = norm(&g);
    let mut evaluations = 0;
    let mut iterations = 0;
    let mut stalled = None;
    while iterations < cfg.max_iterations && norm(&g) > cfg.tol * g_ref {
        let mut d = mem.direction(&g);
        if let Some((lo, hi)) = bounds {
            project_direction(&x, &mut d, lo, hi);
        }
        if !(dot(&d, &g) < 0.0) && !mem.is_empty() {
            // lost descent under projection; restart from steepest descent
            mem.clear();
            d = mem.direction(&g);
            if let Some((lo, hi)) = bounds {
                project_direction(&x, &mut d, lo, hi);
            }
        }
        match line_search(&mut f, &x, fx, &g, &d, &cfg.line_search, bounds) {
            Ok(ls) => {
                evaluations += ls.evaluations;
                let s: Vec<f64> = ls.x.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = ls.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
                mem.push(s, y);
                x = ls.x;
                fx = ls.f;
                g = ls.grad;
                iterations += 1;
            }
            Err(e) => {
                stalled = Some(e);
                break;
            }
        }
    }
    Ok(LbfgsOutcome {
        x,
        f: fx,
        grad: g,
        iterations,
        evaluations,
        stalled,
    })
}
