use std::ops::Range;

use rayon::prelude::*;

use super::model::TrpoModel;
use super::TrpoConfig;
use crate::base::{axpy, dot, norm};
use crate::error::{check_finite, Error, Result};
use crate::policy::MlpCache;

/// Samples per reduction chunk; fixed so summation order never depends on
/// the thread count.
const CHUNK: usize = 256;
pub const MAX_LOG_RATIO: f64 = 80.0;

/// Flattened samples for one update: policy inputs (latent already embedded
/// where applicable), actions, log-probabilities at collection, advantages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleBatch<A> {
    pub inputs: Vec<Vec<f64>>,
    pub actions: Vec<A>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl<A> SampleBatch<A> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.inputs.len();
        for (what, got) in [
            ("sample actions", self.actions.len()),
            ("sample log-probs", self.old_log_probs.len()),
            ("sample advantages", self.advantages.len()),
        ] {
            if got != n {
                return Err(Error::Dimension {
                    what,
                    expected: n,
                    got,
                });
            }
        }
        if n == 0 {
            return Err(Error::InvalidArgument("empty sample batch".into()));
        }
        check_finite("advantage", &self.advantages)?;
        check_finite("old log-prob", &self.old_log_probs)
    }
}

fn pairwise_sum(mut parts: Vec<Vec<f64>>, dim: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; dim];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Sum `f` over fixed sample chunks in parallel, combining chunk results in a
/// deterministic pairwise tree.
pub(crate) fn chunked_sum<F>(n: usize, dim: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(Range<usize>, &mut [f64]) -> Result<()> + Sync,
{
    let parts = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; dim];
            f(c * CHUNK..((c + 1) * CHUNK).min(n), &mut acc)?;
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(parts, dim))
}

fn log_ratio(new_lp: f64, old_lp: f64, index: usize) -> Result<f64> {
    let d = new_lp - old_lp;
    if !d.is_finite() || d.abs() > MAX_LOG_RATIO {
        return Err(Error::RatioOverflow {
            index,
            log_ratio: d,
        });
    }
    Ok(d)
}

/// `mean(exp(log pi_params - log pi_old) * A)`.
pub fn surrogate_loss<M: TrpoModel>(model: &M, params: &[f64], batch: &SampleBatch<M::Action>) -> Result<f64> {
    let sum = chunked_sum(batch.len(), 1, |range, acc| {
        let mut cache = MlpCache::default();
        for i in range {
            let d = model.dist(params, &batch.inputs[i], &mut cache)?;
            let r = log_ratio(model.log_prob(&d, &batch.actions[i]), batch.old_log_probs[i], i)?;
            acc[0] += r.exp() * batch.advantages[i];
        }
        Ok(())
    })?;
    Ok(sum[0] / batch.len() as f64)
}

/// Gradient of `surrogate_loss` with respect to `params`.
pub fn surrogate_grad<M: TrpoModel>(
    model: &M,
    params: &[f64],
    batch: &SampleBatch<M::Action>,
) -> Result<Vec<f64>> {
    let n = batch.len() as f64;
    let g = chunked_sum(batch.len(), params.len(), |range, acc| {
        let mut cache = MlpCache::default();
        for i in range {
            let a = batch.advantages[i];
            if a == 0.0 {
                continue;
            }
            let d = model.dist(params, &batch.inputs[i], &mut cache)?;
            let r = log_ratio(model.log_prob(&d, &batch.actions[i]), batch.old_log_probs[i], i)?;
            model.backprop_log_prob(params, &cache, &d, &batch.actions[i], r.exp() * a / n, acc);
        }
        Ok(())
    })?;
    check_finite("surrogate gradient", &g)?;
    Ok(g)
}

/// Forward passes at fixed parameters, reused across Fisher-vector products.
pub struct FisherContext<'a, M: TrpoModel> {
    model: &'a M,
    params: &'a [f64],
    caches: Vec<MlpCache>,
    dists: Vec<M::Dist>,
}

impl<'a, M: TrpoModel> FisherContext<'a, M> {
    pub fn new(model: &'a M, params: &'a [f64], inputs: &[Vec<f64>]) -> Result<Self> {
        let evaluated = inputs
            .par_iter()
            .map(|x| {
                let mut cache = MlpCache::default();
                let d = model.dist(params, x, &mut cache)?;
                Ok((cache, d))
            })
            .collect::<Result<Vec<_>>>()?;
        let (caches, dists) = evaluated.into_iter().unzip();
        Ok(Self {
            model,
            params,
            caches,
            dists,
        })
    }

    pub fn dists(&self) -> &[M::Dist] {
        &self.dists
    }

    /// `H v + damping v`, `H` the Hessian of the mean KL from these
    /// distributions, evaluated at the context parameters.
    pub fn fvp(&self, v: &[f64], damping: f64) -> Result<Vec<f64>> {
        if v.len() != self.params.len() {
            return Err(Error::Dimension {
                what: "fisher-vector product direction",
                expected: self.params.len(),
                got: v.len(),
            });
        }
        check_finite("fisher-vector product direction", v)?;
        let n = self.caches.len();
        let scale = 1.0 / n as f64;
        let mut out = chunked_sum(n, v.len(), |range, acc| {
            for i in range {
                self.model
                    .backprop_fvp(self.params, &self.caches[i], &self.dists[i], v, scale, acc);
            }
            Ok(())
        })?;
        axpy(damping, v, &mut out);
        Ok(out)
    }

    /// Mean `KL(context || params)` and surrogate at `params` in one pass.
    pub fn kl_and_surrogate(&self, params: &[f64], batch: &SampleBatch<M::Action>) -> Result<(f64, f64)> {
        let sums = chunked_sum(batch.len(), 2, |range, acc| {
            let mut cache = MlpCache::default();
            for i in range {
                let d = self.model.dist(params, &batch.inputs[i], &mut cache)?;
                acc[0] += self.model.kl(&self.dists[i], &d);
                let lp = self.model.log_prob(&d, &batch.actions[i]);
                acc[1] += log_ratio(lp, batch.old_log_probs[i], i)?.exp() * batch.advantages[i];
            }
            Ok(())
        })?;
        let n = batch.len() as f64;
        Ok((sums[0] / n, sums[1] / n))
    }
}

/// Fisher-vector product of the mean KL at the model's current parameters.
pub fn fisher_vector_product<M: TrpoModel>(
    model: &M,
    inputs: &[Vec<f64>],
    v: &[f64],
    damping: f64,
) -> Result<Vec<f64>> {
    FisherContext::new(model, model.params(), inputs)?.fvp(v, damping)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    /// Norm of the recursively updated residual `b - A x`.
    pub residual: f64,
    pub iterations: usize,
}

/// Conjugate gradient for `A x = b` with symmetric positive-definite `A`.
/// Stops early once the squared residual drops below `tol`.
pub fn conjugate_gradient<F>(mut op: F, b: &[f64], iters: usize, tol: f64) -> Result<CgResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    check_finite("cg right-hand side", b)?;
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    let mut done = 0;
    for _ in 0..iters {
        if rr < tol {
            break;
        }
        let z = op(&p)?;
        let pz = dot(&p, &z);
        let alpha = rr / pz;
        if !alpha.is_finite() {
            return Err(Error::NonFinite {
                what: "cg step length",
                index: done,
                value: alpha,
            });
        }
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &z, &mut r);
        let rr_new = dot(&r, &r);
        let mu = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + mu * *pi;
        }
        rr = rr_new;
        done += 1;
    }
    check_finite("cg solution", &x)?;
    Ok(CgResult {
        x,
        residual: rr.sqrt(),
        iterations: done,
    })
}

/// Outcome of one constrained update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDiagnostics {
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub kl: f64,
    pub step_norm: f64,
    pub grad_norm: f64,
    /// Number of shrinkings applied to the accepted step (or tried, if none
    /// was accepted).
    pub backtracks: usize,
    pub cg_residual: f64,
    pub accepted: bool,
}

/// Natural-gradient step under a mean-KL trust region with backtracking.
/// On rejection the parameters are left unchanged.
pub fn trpo_step<M: TrpoModel>(
    model: &mut M,
    batch: &SampleBatch<M::Action>,
    config: &TrpoConfig,
) -> Result<StepDiagnostics> {
    config.validate()?;
    batch.validate()?;
    let old = model.params().to_vec();
    let (accepted, diag) = {
        let ctx = FisherContext::new(&*model, &old, &batch.inputs)?;
        let g = surrogate_grad(&*model, &old, batch)?;
        let (_, surrogate_before) = ctx.kl_and_surrogate(&old, batch)?;
        let grad_norm = norm(&g);
        let mut diag = StepDiagnostics {
            surrogate_before,
            surrogate_after: surrogate_before,
            kl: 0.0,
            step_norm: 0.0,
            grad_norm,
            backtracks: 0,
            cg_residual: 0.0,
            accepted: false,
        };
        if grad_norm < 1e-12 {
            return Ok(diag);
        }
        let cg = conjugate_gradient(|v| ctx.fvp(v, config.cg_damping), &g, config.cg_iters, 1e-10)?;
        diag.cg_residual = cg.residual;
        let s = cg.x;
        let shs = dot(&s, &ctx.fvp(&s, config.cg_damping)?);
        if !(shs.is_finite() && shs > 0.0) {
            return Ok(diag);
        }
        let beta = (2.0 * config.step_kl / shs).sqrt();
        let mut accepted = None;
        let mut candidate = old.clone();
        for k in 0..=config.max_backtracks {
            let frac = beta * config.backtrack_ratio.powi(k as i32);
            for ((c, o), si) in candidate.iter_mut().zip(&old).zip(&s) {
                *c = o + frac * si;
            }
            diag.backtracks = k;
            let (kl, surr) = match ctx.kl_and_surrogate(&candidate, batch) {
                Ok(v) => v,
                // far-off candidates may overflow the ratio; shrink further
                Err(Error::RatioOverflow { .. }) | Err(Error::NonFinite { .. }) => continue,
                Err(e) => return Err(e),
            };
            if kl.is_finite() && kl <= config.step_kl && surr > surrogate_before {
                diag.kl = kl;
                diag.surrogate_after = surr;
                diag.step_norm = frac * norm(&s);
                diag.accepted = true;
                accepted = Some(candidate.clone());
                break;
            }
        }
        (accepted, diag)
    };
    if let Some(p) = accepted {
        model.set_params(&p)?;
    }
    Ok(diag)
}
