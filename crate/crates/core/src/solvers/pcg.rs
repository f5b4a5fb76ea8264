use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcgConfig {
    pub i_max: usize,
    pub i_m: usize,
    pub tol_in: f64,
}

impl Default for PcgConfig {
    fn default() -> Self {
        PcgConfig {
            i_max: 30,
            i_m: 5,
            tol_in: 0.0,
        }
    }
}

impl PcgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.i_max < 1 || self.i_m < 1 {
            return Err(Error::config("PCG needs i_max >= 1 and i_m >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub solution: Vec<f64>,
    /// Residual `rhs − ℋx` at return.
    pub residual: Vec<f64>,
    /// `rᵀz` at return.
    pub rz: f64,
    pub iterations: usize,
    /// `rᵢᵀzᵢ` for every computed residual, starting with `r₀`.
    pub rz_history: Vec<f64>,
    /// Stopped because `dᵀℋd ≤ 0`.
    pub negative_curvature: bool,
    /// Value of `½xᵀℋx − rhsᵀx` after each update.
    pub model_values: Vec<f64>,
}

/// Preconditioned CG on `ℋx = rhs` from `x₀ = 0`.
///
/// Runs at most `i_max` iterations; after `i_m` of them it also stops once
/// `1 − rᵢᵀzᵢ / rᵢ₋ᵢₘᵀzᵢ₋ᵢₘ ≤ tol_in`.
pub fn pcg_solve<H, P>(cfg: &PcgConfig, mut apply: H, mut precond: P, rhs: &[f64]) -> Result<PcgOutcome>
where
    H: FnMut(&[f64]) -> Result<Vec<f64>>,
    P: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z = precond(&r)?;
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = vec![rz];
    let mut model = Vec::new();
    let mut model_value = 0.0;
    let mut i = 0;
    let mut negative_curvature = false;
    if rz == 0.0 {
        return Ok(PcgOutcome {
            solution: x,
            residual: r,
            rz,
            iterations: 0,
            rz_history: history,
            negative_curvature,
            model_values: model,
        });
    }
    while i < cfg.i_max && (i < cfg.i_m || 1.0 - rz / history[i - cfg.i_m] > cfg.tol_in) {
        let hd = apply(&d)?;
        let curv = dot(&d, &hd);
        if !(curv > 0.0) {
            negative_curvature = true;
            break;
        }
        let alpha = rz / curv;
        axpy(&mut x, alpha, &d);
        axpy(&mut r, -alpha, &hd);
        // q(x + αd) − q(x) = −α rᵀz/2 for the CG step length
        model_value -= 0.5 * alpha * rz;
        model.push(model_value);
        z = precond(&r)?;
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + beta * *di;
        }
        rz = rz_next;
        history.push(rz);
        i += 1;
        if rz == 0.0 {
            break;
        }
    }
    Ok(PcgOutcome {
        solution: x,
        residual: r,
        rz,
        iterations: i,
        rz_history: history,
        negative_curvature,
        model_values: model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    fn run(a: &DMatrix<f64>, b: &[f64], cfg: PcgConfig, pre: Option<&DMatrix<f64>>) -> PcgOutcome {
        pcg_solve(
            &cfg,
            |v| Ok((a * DVector::from_column_slice(v)).as_slice().to_vec()),
            |r| {
                Ok(match pre {
                    Some(m) => m.clone().lu().solve(&DVector::from_column_slice(r)).unwrap().as_slice().to_vec(),
                    None => r.to_vec(),
                })
            },
            b,
        )
        .unwrap()
    }

    #[test]
    fn zero_rhs_needs_no_iterations() {
        let a = spd(5, 1);
        let out = run(&a, &[0.0; 5], PcgConfig::default(), None);
        assert_eq!(out.iterations, 0);
        assert!(out.solution.iter().all(|&v| v == 0.0));
    }

    pub(crate) fn finite_termination_error(seed: u64) -> f64 {
        let a = spd(5, seed);
        let b: Vec<f64> = (0..5).map(|i| (i as f64 + 1.0).sin()).collect();
        let cfg = PcgConfig {
            i_max: 5,
            i_m: 5,
            tol_in: -1.0,
        };
        let out = run(&a, &b, cfg, None);
        let exact = a.clone().lu().solve(&DVector::from_column_slice(&b)).unwrap();
        (DVector::from_vec(out.solution) - &exact).amax()
    }

    #[test]
    fn five_by_five_terminates_exactly() {
        for seed in 0..5 {
            assert!(finite_termination_error(seed) < 1e-10);
        }
    }

    #[test]
    fn quadratic_model_decreases_and_rz_positive() {
        let a = spd(12, 7);
        let pre = DMatrix::from_diagonal(&a.diagonal());
        let b: Vec<f64> = (0..12).map(|i| (i as f64).cos()).collect();
        let out = run(
            &a,
            &b,
            PcgConfig {
                i_max: 12,
                i_m: 12,
                tol_in: -1.0,
            },
            Some(&pre),
        );
        for w in out.model_values.windows(2) {
            assert!(w[1] <= w[0] + 1e-14);
        }
        // direct evaluation of the model at the final iterate agrees
        let x = DVector::from_vec(out.solution.clone());
        let direct = 0.5 * x.dot(&(&a * &x)) - x.dot(&DVector::from_column_slice(&b));
        assert!((direct - out.model_values.last().unwrap()).abs() < 1e-10);
        assert!(out.rz_history.iter().take(out.rz_history.len() - 1).all(|&v| v > 0.0));
    }

    #[test]
    fn stagnation_test_stops_early() {
        let a = spd(30, 3);
        let b = vec![1.0; 30];
        let out = run(
            &a,
            &b,
            PcgConfig {
                i_max: 30,
                i_m: 2,
                tol_in: 0.9,
            },
            None,
        );
        assert!(out.iterations < 30);
        assert!(out.iterations >= 2);
    }

    #[test]
    fn indefinite_operator_returns_current_iterate() {
        let a = -DMatrix::<f64>::identity(3, 3);
        let out = run(&a, &[1.0, 2.0, 3.0], PcgConfig::default(), None);
        assert!(out.negative_curvature);
        assert_eq!(out.iterations, 0);
        assert!(out.solution.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = PcgConfig { i_max: 0, i_m: 1, tol_in: 0.0 };
        assert!(cfg.validate().unwrap_err().is_config_error());
    }
}
