use std::sync::Arc;

use rand::Rng;

use super::mlp::{Mlp, MlpCache, MlpSpec};
use crate::base::{ParamVector, RngStream};
use crate::error::{check_finite, Error, Result};

/// Categorical policy over `k` skills, fed the full observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ManagerPolicy {
    pub k: usize,
    pub obs_dim: usize,
    pub spec: MlpSpec,
    mlp: Mlp,
    pub params: ParamVector,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `KL(p || q)` for categorical distributions.
pub fn categorical_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi.ln() - qi.ln()))
        .sum()
}

impl ManagerPolicy {
    pub fn new(obs_dim: usize, k: usize, spec: MlpSpec, rng: &mut RngStream) -> Result<Self> {
        let mut m = Self::zeros(obs_dim, k, spec)?;
        m.mlp.init(&mut m.params.values, rng);
        Ok(m)
    }

    /// Zero weights: uniform over skills for every observation.
    pub fn zeros(obs_dim: usize, k: usize, spec: MlpSpec) -> Result<Self> {
        if k < 1 {
            return Err(Error::Config {
                field: "k".into(),
                constraint: "manager needs at least one skill".into(),
            });
        }
        let mlp = Mlp::new(obs_dim, &spec, k)?;
        let params = ParamVector::zeros(Arc::new(mlp.shape_table()));
        Ok(Self {
            k,
            obs_dim,
            spec,
            mlp,
            params,
        })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Dimension {
                what: "manager parameters",
                expected: self.params.len(),
                got: values.len(),
            });
        }
        self.params.values.copy_from_slice(values);
        Ok(())
    }

    pub(crate) fn probs_with(&self, params: &[f64], obs: &[f64], cache: &mut MlpCache) -> Result<Vec<f64>> {
        self.mlp.forward(params, obs, cache)?;
        Ok(softmax(cache.output()))
    }

    pub fn logits(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut cache = MlpCache::default();
        self.mlp.forward(&self.params.values, obs, &mut cache)?;
        Ok(cache.output().to_vec())
    }

    /// Skill probabilities for an observation.
    pub fn manager_forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim {
            return Err(Error::Dimension {
                what: "manager observation",
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        check_finite("manager observation", obs)?;
        let mut cache = MlpCache::default();
        self.probs_with(&self.params.values, obs, &mut cache)
    }

    /// Sample a skill; returns it with its log-probability.
    pub fn act(&self, obs: &[f64], rng: &mut RngStream) -> Result<(usize, f64)> {
        let probs = self.manager_forward(obs)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut choice = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                choice = i;
                break;
            }
        }
        Ok((choice, probs[choice].ln()))
    }

    /// Accumulate `scale * d log p(skill | obs) / d params`.
    pub(crate) fn accumulate_grad_log_prob(
        &self,
        params: &[f64],
        obs: &[f64],
        skill: usize,
        scale: f64,
        grad: &mut [f64],
        cache: &mut MlpCache,
    ) -> Result<()> {
        let probs = self.probs_with(params, obs, cache)?;
        let d_logits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(i, p)| scale * (if i == skill { 1.0 } else { 0.0 } - p))
            .collect();
        self.mlp.backward(params, cache, &d_logits, grad);
        Ok(())
    }

    pub fn grad_log_prob(&self, obs: &[f64], skill: usize) -> Result<ParamVector> {
        if skill >= self.k {
            return Err(Error::LatentOutOfRange {
                latent: skill,
                k: self.k,
            });
        }
        let mut g = ParamVector::zeros(self.params.shapes.clone());
        let mut cache = MlpCache::default();
        self.accumulate_grad_log_prob(&self.params.values, obs, skill, 1.0, &mut g.values, &mut cache)?;
        Ok(g)
    }

    pub fn descriptor(&self) -> String {
        format!(
            "manager k={} obs_dim={} hidden={:?}",
            self.k, self.obs_dim, self.spec.hidden
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_manager_is_uniform() {
        let m = ManagerPolicy::zeros(5, 6, MlpSpec::default()).unwrap();
        let p = m.manager_forward(&[1.0, -2.0, 0.3, 0.0, 4.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let logits = [0.3, -1.2, 2.5, 0.0];
        let shifted: Vec<f64> = logits.iter().map(|l| l + 17.25).collect();
        let (a, b) = (softmax(&logits), softmax(&shifted));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_logit() {
        let mut logits = vec![0.0; 6];
        logits[3] = 10.0;
        let p = softmax(&logits);
        // direct evaluation: e^10 / (e^10 + 5)
        let oracle = 10f64.exp() / (10f64.exp() + 5.0);
        assert!((p[3] - oracle).abs() < 1e-15);
        assert!(p[3] > 0.99);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = RngStream::new(2, 2);
        let m = ManagerPolicy::new(7, 6, MlpSpec::default(), &mut rng).unwrap();
        let p = m.manager_forward(&[0.1, 0.9, -0.4, 0.3, 0.2, 1.5, -2.0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn kl_identical_is_zero() {
        let p = softmax(&[0.2, 0.5, -1.0]);
        assert_eq!(categorical_kl(&p, &p), 0.0);
        assert!(categorical_kl(&p, &softmax(&[0.0, 0.0, 0.0])) > 0.0);
    }

    #[test]
    fn wrong_obs_dim_rejected() {
        let m = ManagerPolicy::zeros(3, 2, MlpSpec::default()).unwrap();
        assert!(m.manager_forward(&[0.0; 4]).is_err());
    }
}
