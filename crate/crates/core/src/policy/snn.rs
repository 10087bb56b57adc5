use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::gaussian::GaussianActionDist;
use super::mlp::{Mlp, MlpCache, MlpSpec};
use crate::base::{ParamVector, RngStream};
use crate::error::{check_finite, Error, Result};

/// How the latent code enters the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integration {
    /// No latent input (plain Gaussian MLP, `K = 1`).
    Plain,
    Concat,
    Bilinear,
}

impl Integration {
    pub fn tag(self) -> u8 {
        match self {
            Integration::Plain => 0,
            Integration::Concat => 1,
            Integration::Bilinear => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Integration::Plain),
            1 => Some(Integration::Concat),
            2 => Some(Integration::Bilinear),
            _ => None,
        }
    }
}

pub fn one_hot(z: usize, k: usize) -> Result<Vec<f64>> {
    if z >= k {
        return Err(Error::LatentOutOfRange { latent: z, k });
    }
    let mut v = vec![0.0; k];
    v[z] = 1.0;
    Ok(v)
}

fn check_one_hot(z: &[f64]) -> Result<()> {
    let ones = z.iter().filter(|&&v| v == 1.0).count();
    let zeros = z.iter().filter(|&&v| v == 0.0).count();
    if ones != 1 || ones + zeros != z.len() {
        return Err(Error::InvalidArgument(format!("latent {z:?} is not one-hot")));
    }
    Ok(())
}

/// `[obs ; z]`
pub fn embed_concat(obs: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    check_one_hot(z)?;
    let mut out = Vec::with_capacity(obs.len() + z.len());
    out.extend_from_slice(obs);
    out.extend_from_slice(z);
    Ok(out)
}

/// Row-major `obs ⊗ z`: entry `i * K + k` is `obs[i] * z[k]`.
pub fn embed_bilinear(obs: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    check_one_hot(z)?;
    let mut out = Vec::with_capacity(obs.len() * z.len());
    for &o in obs {
        out.extend(z.iter().map(|&zk| o * zk));
    }
    Ok(out)
}

/// Stochastic neural network policy: a Gaussian MLP whose input integrates
/// the observation with a one-hot latent code. `log_std` is state- and
/// latent-independent and stored after the network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnPolicy {
    pub k: usize,
    pub integration: Integration,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub spec: MlpSpec,
    mlp: Mlp,
    pub params: ParamVector,
}

impl SnnPolicy {
    pub fn new(
        obs_dim: usize,
        action_dim: usize,
        k: usize,
        integration: Integration,
        spec: MlpSpec,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut policy = Self::zeros(obs_dim, action_dim, k, integration, spec)?;
        let n = policy.mlp.n_params();
        policy.mlp.init(&mut policy.params.values[..n], rng);
        Ok(policy)
    }

    /// All weights, biases and log-stds zero.
    pub fn zeros(
        obs_dim: usize,
        action_dim: usize,
        k: usize,
        integration: Integration,
        spec: MlpSpec,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config {
                field: "k".into(),
                constraint: "latent count must be >= 1".into(),
            });
        }
        if integration == Integration::Plain && k != 1 {
            return Err(Error::Config {
                field: "k".into(),
                constraint: "plain policies have exactly one latent".into(),
            });
        }
        let input = match integration {
            Integration::Plain => obs_dim,
            Integration::Concat => obs_dim + k,
            Integration::Bilinear => obs_dim * k,
        };
        let mlp = Mlp::new(input, &spec, action_dim)?;
        let mut table = mlp.shape_table();
        table.push(("log_std".into(), vec![action_dim]));
        let params = ParamVector::zeros(Arc::new(table));
        Ok(Self {
            k,
            integration,
            obs_dim,
            action_dim,
            spec,
            mlp,
            params,
        })
    }

    /// Plain Gaussian MLP (no latent).
    pub fn plain(obs_dim: usize, action_dim: usize, spec: MlpSpec, rng: &mut RngStream) -> Result<Self> {
        Self::new(obs_dim, action_dim, 1, Integration::Plain, spec, rng)
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn mlp_params<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[..self.mlp.n_params()]
    }

    pub(crate) fn log_std_of<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.mlp.n_params()..]
    }

    pub fn log_std(&self) -> &[f64] {
        self.log_std_of(&self.params.values)
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Dimension {
                what: "policy parameters",
                expected: self.params.len(),
                got: values.len(),
            });
        }
        self.params.values.copy_from_slice(values);
        Ok(())
    }

    /// Network input for `(obs, z)`.
    pub fn embed(&self, obs: &[f64], z: usize) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim {
            return Err(Error::Dimension {
                what: "observation",
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        check_finite("observation", obs)?;
        match self.integration {
            Integration::Plain => {
                if z != 0 {
                    return Err(Error::LatentOutOfRange { latent: z, k: 1 });
                }
                Ok(obs.to_vec())
            }
            Integration::Concat => embed_concat(obs, &one_hot(z, self.k)?),
            Integration::Bilinear => embed_bilinear(obs, &one_hot(z, self.k)?),
        }
    }

    pub(crate) fn dist_for_input(
        &self,
        params: &[f64],
        input: &[f64],
        cache: &mut MlpCache,
    ) -> Result<GaussianActionDist> {
        self.mlp.forward(self.mlp_params(params), input, cache)?;
        Ok(GaussianActionDist {
            mean: cache.output().to_vec(),
            log_std: self.log_std_of(params).to_vec(),
        })
    }

    pub fn forward(&self, obs: &[f64], z: usize) -> Result<GaussianActionDist> {
        let input = self.embed(obs, z)?;
        let mut cache = MlpCache::default();
        let dist = self.dist_for_input(&self.params.values, &input, &mut cache)?;
        check_finite("policy mean", &dist.mean)?;
        Ok(dist)
    }

    /// Sample an action; returns it with its log-probability.
    pub fn act(&self, obs: &[f64], z: usize, rng: &mut RngStream) -> Result<(Vec<f64>, f64)> {
        let dist = self.forward(obs, z)?;
        let a = dist.sample(rng);
        let lp = dist.log_prob_unchecked(&a);
        Ok((a, lp))
    }

    /// Accumulate `scale * d log pi(action | input) / d params` into `grad`.
    pub(crate) fn accumulate_grad_log_prob(
        &self,
        params: &[f64],
        input: &[f64],
        action: &[f64],
        scale: f64,
        grad: &mut [f64],
        cache: &mut MlpCache,
    ) -> Result<()> {
        let dist = self.dist_for_input(params, input, cache)?;
        let n = self.mlp.n_params();
        let mut d_mean = vec![0.0; self.action_dim];
        for i in 0..self.action_dim {
            let inv_var = (-2.0 * dist.log_std[i]).exp();
            let diff = action[i] - dist.mean[i];
            d_mean[i] = scale * diff * inv_var;
            grad[n + i] += scale * (diff * diff * inv_var - 1.0);
        }
        self.mlp
            .backward(self.mlp_params(params), cache, &d_mean, &mut grad[..n]);
        Ok(())
    }

    pub fn grad_log_prob(&self, obs: &[f64], z: usize, action: &[f64]) -> Result<ParamVector> {
        if action.len() != self.action_dim {
            return Err(Error::Dimension {
                what: "action",
                expected: self.action_dim,
                got: action.len(),
            });
        }
        let input = self.embed(obs, z)?;
        let mut grad = ParamVector::zeros(self.params.shapes.clone());
        let mut cache = MlpCache::default();
        self.accumulate_grad_log_prob(
            &self.params.values,
            &input,
            action,
            1.0,
            &mut grad.values,
            &mut cache,
        )?;
        Ok(grad)
    }

    /// Human-readable architecture descriptor.
    pub fn descriptor(&self) -> String {
        format!(
            "gaussian integration={:?} k={} obs_dim={} action_dim={} hidden={:?}",
            self.integration, self.k, self.obs_dim, self.action_dim, self.spec.hidden
        )
    }
}
