use serde::{Deserialize, Serialize};

use super::lbfgs::{lbfgs_minimize, LbfgsConfig};
use super::trace::{Monitor, Recorder};
use super::Reconstruction;
use crate::acoustic::MeasurementSeries;
use crate::composite::{Evaluation, ProblemSetup, Scaling, ScalingKind};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::optical::CoefficientPair;
use crate::regularization::{shrink, TvOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    /// Penalty weight `ϱ`.
    pub rho: f64,
    /// Shrinkage threshold `ν`.
    pub nu: f64,
    pub tol_out: f64,
    pub max_outer: usize,
    pub lbfgs: LbfgsConfig,
    /// Physical bounds on `κ` (mm).
    pub kappa_bounds: [f64; 2],
    /// Physical bounds on `μ` (1/mm).
    pub mu_bounds: [f64; 2],
    pub record_timing: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            rho: 1.0,
            nu: 1e-3,
            tol_out: 1e-2,
            max_outer: 10,
            lbfgs: LbfgsConfig::default(),
            kappa_bounds: [1e-3, 10.0],
            mu_bounds: [1e-4, 10.0],
            record_timing: false,
        }
    }
}

impl AdmmConfig {
    pub fn with_timing(mut self, on: bool) -> Self {
        self.record_timing = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !(self.nu >= 0.0) || !(self.tol_out >= 0.0) {
            return Err(Error::config("ADMM needs rho > 0, nu >= 0, tol_out >= 0"));
        }
        for b in [self.kappa_bounds, self.mu_bounds] {
            if !(b[0] > 0.0 && b[1] > b[0]) {
                return Err(Error::config("ADMM bounds must satisfy 0 < lower < upper"));
            }
        }
        Ok(())
    }
}

/// `r_q + U_{p,q}` for every illumination.
fn shifted(res: &[MeasurementSeries], u: &[MeasurementSeries]) -> Vec<MeasurementSeries> {
    res.iter()
        .zip(u)
        .map(|(r, uq)| {
            let mut s = r.clone();
            s.data.iter_mut().zip(&uq.data).for_each(|(a, b)| *a += b);
            s
        })
        .collect()
}

/// ADMM outer loop with L-BFGS on the `X̄` subproblem, linear scaling.
pub fn run_admm(
    setup: &ProblemSetup,
    cfg: &AdmmConfig,
    x0: &CoefficientPair,
    tv: &TvOperator,
    monitor: Option<&Monitor<'_>>,
) -> Result<Reconstruction> {
    cfg.validate()?;
    let scaling = Scaling::new(ScalingKind::Linear, x0.clone())?;
    let ne = x0.len();
    let lo_phys = CoefficientPair {
        kappa: vec![cfg.kappa_bounds[0]; ne],
        mu: vec![cfg.mu_bounds[0]; ne],
    };
    let hi_phys = CoefficientPair {
        kappa: vec![cfg.kappa_bounds[1]; ne],
        mu: vec![cfg.mu_bounds[1]; ne],
    };
    let lo = scaling.to_scaled(&lo_phys);
    let hi = scaling.to_scaled(&hi_phys);
    let mut rec = Recorder::new(setup, monitor, cfg.record_timing);

    let mut xbar: Vec<f64> = scaling.to_scaled(x0).iter().zip(lo.iter().zip(&hi)).map(|(x, (l, h))| x.clamp(*l, *h)).collect();
    let mut w = vec![0.0; tv.rows()];
    let mut uw = vec![0.0; tv.rows()];
    let mut up: Vec<MeasurementSeries> = setup.data.iter().map(|d| MeasurementSeries::zeros(d.n_s, d.n_t, d.dt)).collect();

    let mut eval = setup.evaluate(&scaling, &xbar)?;
    rec.record(setup, 0, eval.epsilon, &eval.coeffs, 0, true, 0.0);
    let penalty_grad = |x: &[f64], w: &[f64], uw: &[f64]| -> (f64, Vec<f64>) {
        let t: Vec<f64> = tv.apply(x).iter().zip(w).zip(uw).map(|((a, b), c)| a - b + c).collect();
        let value = cfg.rho * (0.5 * dot(&t, &t) + cfg.nu * w.iter().map(|v| v.abs()).sum::<f64>());
        let g = tv.transpose_apply(&t).iter().map(|v| cfg.rho * v).collect();
        (value, g)
    };
    let total_grad = |data_grad: &[f64], x: &[f64], w: &[f64], uw: &[f64]| -> Vec<f64> {
        let (_, pg) = penalty_grad(x, w, uw);
        pg.iter().zip(data_grad).map(|(a, b)| a + b).collect()
    };

    let mut data_grad = setup.gradient_for(&scaling, &eval, &shifted(&eval.residuals, &up))?;
    let g_ref = norm(&total_grad(&data_grad, &xbar, &w, &uw));
    let mut k = 0;
    while k < cfg.max_outer && norm(&total_grad(&data_grad, &xbar, &w, &uw)) > cfg.tol_out * g_ref {
        let dx = tv.apply(&xbar);
        let v: Vec<f64> = dx.iter().zip(&uw).map(|(a, b)| a + b).collect();
        w = shrink(&v, cfg.nu);

        let fa = |x: &[f64], e: &Evaluation, up: &[MeasurementSeries], w: &[f64], uw: &[f64]| -> f64 {
            let s = shifted(&e.residuals, up);
            0.5 * s.iter().map(|r| dot(&r.data, &r.data)).sum::<f64>() + penalty_grad(x, w, uw).0
        };
        let f0 = fa(&xbar, &eval, &up, &w, &uw);
        let g0 = total_grad(&data_grad, &xbar, &w, &uw);
        let mut last: Option<Evaluation> = None;
        let out = {
            let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
                let e = setup.evaluate(&scaling, x)?;
                let f = fa(x, &e, &up, &w, &uw);
                let dg = setup.gradient_for(&scaling, &e, &shifted(&e.residuals, &up))?;
                let g = total_grad(&dg, x, &w, &uw);
                last = Some(e);
                Ok((f, g))
            };
            lbfgs_minimize(objective, xbar.clone(), f0, g0, &cfg.lbfgs, Some((&lo, &hi)))?
        };
        if let Some(e) = &out.stalled {
            rec.warn(format!("outer iteration {}: L-BFGS stopped early: {e}", k + 1));
        }
        if out.iterations > 0 {
            xbar = out.x;
            eval = match last {
                Some(e) if e.xbar == xbar => e,
                _ => setup.evaluate(&scaling, &xbar)?,
            };
        }

        let dx = tv.apply(&xbar);
        for i in 0..uw.len() {
            uw[i] += dx[i] - w[i];
        }
        for (u, r) in up.iter_mut().zip(&eval.residuals) {
            u.data.iter_mut().zip(&r.data).for_each(|(a, b)| *a += b);
        }
        data_grad = setup.gradient_for(&scaling, &eval, &shifted(&eval.residuals, &up))?;
        k += 1;
        rec.record(setup, k, eval.epsilon, &eval.coeffs, out.iterations, true, 0.0);
    }
    Ok(Reconstruction {
        coeffs: eval.coeffs,
        xbar,
        trace: rec.trace,
    })
}
