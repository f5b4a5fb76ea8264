//! Priorconditioned inexact Gauss-Newton drivers with log scaling.

use serde::{Deserialize, Serialize};

use super::pcg::{pcg_solve, PcgConfig};
use super::trace::{Monitor, Recorder};
use super::Reconstruction;
use crate::composite::{Evaluation, ProblemSetup, Scaling, ScalingKind};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::optical::CoefficientPair;
use crate::regularization::{apply_dual_step, dual_update, TvOperator, TvPreconditioner};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdConfig {
    pub beta: f64,
    pub gamma: f64,
    pub pcg: PcgConfig,
    pub tol_out: f64,
    pub max_outer: usize,
    /// Backtrack the outer step until sufficient decrease holds.
    pub armijo: bool,
    pub record_timing: bool,
}

impl Default for LdConfig {
    fn default() -> Self {
        LdConfig {
            beta: 2e-5,
            gamma: 1e-6,
            pcg: PcgConfig::default(),
            tol_out: 1e-3,
            max_outer: 20,
            armijo: false,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdIpmConfig {
    pub beta: f64,
    pub gamma: f64,
    pub pcg: PcgConfig,
    /// `k'_max`, inner primal-dual iterations per linearisation.
    pub k_max: usize,
    pub tol_med: f64,
    pub tol_out: f64,
    pub max_outer: usize,
    pub armijo: bool,
    pub record_timing: bool,
}

impl Default for PdIpmConfig {
    fn default() -> Self {
        PdIpmConfig {
            beta: 1e-6,
            gamma: 1e-6,
            pcg: PcgConfig::default(),
            k_max: 20,
            tol_med: 1e-3,
            tol_out: 1e-3,
            max_outer: 20,
            armijo: false,
            record_timing: false,
        }
    }
}

impl LdConfig {
    pub fn with_timing(mut self, on: bool) -> Self {
        self.record_timing = on;
        self
    }
}

impl PdIpmConfig {
    pub fn with_timing(mut self, on: bool) -> Self {
        self.record_timing = on;
        self
    }
}

fn validate(beta: f64, gamma: f64, tol_out: f64, pcg: &PcgConfig) -> Result<()> {
    pcg.validate()?;
    if !(beta > 0.0 && gamma > 0.0 && tol_out >= 0.0) {
        return Err(Error::config("need beta > 0, gamma > 0 and tol_out >= 0"));
    }
    Ok(())
}

enum Step {
    Accepted(Evaluation),
    Rejected(f64),
}

/// `X̄ + αd` with `α = 1`, or the largest `α = 2^{-j}` meeting sufficient
/// decrease when `armijo` is set.
fn take_step(setup: &ProblemSetup, scaling: &Scaling, eval: &Evaluation, grad: &[f64], d: &[f64], armijo: bool) -> Result<Step> {
    let slope = dot(grad, d);
    let mut alpha = 1.0;
    for _ in 0..if armijo { 10 } else { 1 } {
        let x: Vec<f64> = eval.xbar.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        let next = setup.evaluate(scaling, &x)?;
        let ok = if armijo {
            next.epsilon <= eval.epsilon + 1e-4 * alpha * slope
        } else {
            next.epsilon < eval.epsilon
        };
        if ok && next.epsilon < eval.epsilon {
            return Ok(Step::Accepted(next));
        }
        if !armijo {
            return Ok(Step::Rejected(next.epsilon));
        }
        alpha *= 0.5;
    }
    Ok(Step::Rejected(eval.epsilon))
}

/// `1 − ε_new/ε_old ≤ tol` after an accepted step.
fn converged(eps_old: f64, eps_new: f64, tol: f64) -> bool {
    eps_old == 0.0 || 1.0 - eps_new / eps_old <= tol
}

/// Inexact Newton with a lagged-diffusivity TV priorconditioner.
pub fn run_ld(
    setup: &ProblemSetup,
    cfg: &LdConfig,
    x0: &CoefficientPair,
    tv: &TvOperator,
    monitor: Option<&Monitor<'_>>,
) -> Result<Reconstruction> {
    validate(cfg.beta, cfg.gamma, cfg.tol_out, &cfg.pcg)?;
    let scaling = Scaling::new(ScalingKind::Log, x0.clone())?;
    let mut rec = Recorder::new(setup, monitor, cfg.record_timing);
    let mut eval = setup.evaluate(&scaling, &vec![0.0; scaling.len()])?;
    rec.record(setup, 0, eval.epsilon, &eval.coeffs, 0, true, 0.0);
    for k in 1..=cfg.max_outer {
        let grad = setup.gradient(&scaling, &eval)?;
        let pre = TvPreconditioner::lagged(tv, &eval.xbar, cfg.beta, cfg.gamma)?;
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let out = pcg_solve(
            &cfg.pcg,
            |v| setup.gn_hessian_apply(&scaling, &eval, v),
            |r| pre.solve(r),
            &rhs,
        )?;
        match take_step(setup, &scaling, &eval, &grad, &out.solution, cfg.armijo)? {
            Step::Accepted(next) => {
                let done = converged(eval.epsilon, next.epsilon, cfg.tol_out);
                eval = next;
                rec.record(setup, k, eval.epsilon, &eval.coeffs, out.iterations, true, 0.0);
                if done {
                    break;
                }
            }
            Step::Rejected(eps) => {
                let trial = scaling.to_physical(&eval.xbar.iter().zip(&out.solution).map(|(a, b)| a + b).collect::<Vec<_>>());
                rec.record(setup, k, eps, &trial, out.iterations, false, 0.0);
                break;
            }
        }
    }
    Ok(Reconstruction {
        coeffs: eval.coeffs,
        xbar: eval.xbar,
        trace: rec.trace,
    })
}

/// Inexact Newton with TV applied to each linearised subproblem through a
/// primal-dual inner iteration.
pub fn run_pdipm(
    setup: &ProblemSetup,
    cfg: &PdIpmConfig,
    x0: &CoefficientPair,
    tv: &TvOperator,
    monitor: Option<&Monitor<'_>>,
) -> Result<Reconstruction> {
    validate(cfg.beta, cfg.gamma, cfg.tol_out, &cfg.pcg)?;
    if cfg.k_max < 1 {
        return Err(Error::config("PD-IPM needs k_max >= 1"));
    }
    let scaling = Scaling::new(ScalingKind::Log, x0.clone())?;
    let n = scaling.len();
    let mut rec = Recorder::new(setup, monitor, cfg.record_timing);
    let mut eval = setup.evaluate(&scaling, &vec![0.0; n])?;
    rec.record(setup, 0, eval.epsilon, &eval.coeffs, 0, true, 0.0);
    for k in 1..=cfg.max_outer {
        let grad = setup.gradient(&scaling, &eval)?;
        let mut d = vec![0.0; n];
        let mut chi = vec![0.0; tv.rows()];
        // ∇ε̃ at the current increment d
        let mut grad_t = grad.clone();
        let mut r_prev: Option<f64> = None;
        let mut inner = 0;
        let mut max_dual: f64 = 0.0;
        for _ in 0..cfg.k_max {
            let pre = TvPreconditioner::primal_dual(tv, &d, &chi, cfg.beta, cfg.gamma)?;
            let rhs: Vec<f64> = grad_t.iter().map(|g| -g).collect();
            let out = pcg_solve(
                &cfg.pcg,
                |v| setup.gn_hessian_apply(&scaling, &eval, v),
                |r| pre.solve(r),
                &rhs,
            )?;
            inner += out.iterations;
            let (delta_chi, s) = dual_update(tv, &d, &chi, &out.solution, cfg.beta)?;
            d.iter_mut().zip(&out.solution).for_each(|(a, b)| *a += b);
            apply_dual_step(&mut chi, &delta_chi, s);
            max_dual = chi.iter().fold(max_dual, |m, v| m.max(v.abs()));
            // ℋδd = rhs − r, so the new ∇ε̃ is −r
            grad_t = out.residual.iter().map(|r| -r).collect();
            let r_star = out.rz;
            let stop = match r_prev {
                Some(prev) => prev == 0.0 || 1.0 - r_star / prev <= cfg.tol_med,
                None => r_star == 0.0,
            };
            r_prev = Some(r_star);
            if stop {
                break;
            }
        }
        match take_step(setup, &scaling, &eval, &grad, &d, cfg.armijo)? {
            Step::Accepted(next) => {
                let done = converged(eval.epsilon, next.epsilon, cfg.tol_out);
                eval = next;
                rec.record(setup, k, eval.epsilon, &eval.coeffs, inner, true, max_dual);
                if done {
                    break;
                }
            }
            Step::Rejected(eps) => {
                let trial = scaling.to_physical(&eval.xbar.iter().zip(&d).map(|(a, b)| a + b).collect::<Vec<_>>());
                rec.record(setup, k, eps, &trial, inner, false, max_dual);
                break;
            }
        }
    }
    Ok(Reconstruction {
        coeffs: eval.coeffs,
        xbar: eval.xbar,
        trace: rec.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_settings() {
        let ld = LdConfig::default();
        assert_eq!((ld.beta, ld.gamma, ld.tol_out), (2e-5, 1e-6, 1e-3));
        assert_eq!((ld.pcg.i_max, ld.pcg.i_m, ld.pcg.tol_in), (30, 5, 0.0));
        assert!(!ld.armijo);
        let pd = PdIpmConfig::default();
        assert_eq!((pd.beta, pd.gamma, pd.k_max, pd.tol_med, pd.tol_out), (1e-6, 1e-6, 20, 1e-3, 1e-3));
    }

    #[test]
    fn convergence_test_cases() {
        assert!(converged(1.0, 0.9995, 1e-3));
        assert!(!converged(1.0, 0.9, 1e-3));
        assert!(converged(0.0, 0.0, 1e-3));
    }
}
