use crate::error::{Error, Result};
use crate::policy::{categorical_kl, softmax, GaussianActionDist, ManagerPolicy, MlpCache, SnnPolicy};

/// What the optimizer needs from a parameterized stochastic policy.
///
/// `dist` runs a forward pass and leaves the activations in `cache`; the
/// `backprop_*` methods must be handed that same cache and distribution.
pub trait TrpoModel: Sync {
    type Action: Sync;
    type Dist: Send + Sync;

    fn params(&self) -> &[f64];
    fn set_params(&mut self, values: &[f64]) -> Result<()>;
    fn input_dim(&self) -> usize;

    fn dist(&self, params: &[f64], input: &[f64], cache: &mut MlpCache) -> Result<Self::Dist>;
    fn log_prob(&self, dist: &Self::Dist, action: &Self::Action) -> f64;
    /// `KL(old || new)`.
    fn kl(&self, old: &Self::Dist, new: &Self::Dist) -> f64;

    /// Accumulate `scale * d log pi(action) / d params`.
    fn backprop_log_prob(
        &self,
        params: &[f64],
        cache: &MlpCache,
        dist: &Self::Dist,
        action: &Self::Action,
        scale: f64,
        grad: &mut [f64],
    );

    /// Accumulate `scale * J^T F J v`, with `F` the Fisher information of the
    /// output distribution in its natural coordinates.
    fn backprop_fvp(
        &self,
        params: &[f64],
        cache: &MlpCache,
        dist: &Self::Dist,
        v: &[f64],
        scale: f64,
        out: &mut [f64],
    );
}

impl TrpoModel for SnnPolicy {
    type Action = Vec<f64>;
    type Dist = GaussianActionDist;

    fn params(&self) -> &[f64] {
        &self.params.values
    }

    fn set_params(&mut self, values: &[f64]) -> Result<()> {
        SnnPolicy::set_params(self, values)
    }

    fn input_dim(&self) -> usize {
        SnnPolicy::input_dim(self)
    }

    fn dist(&self, params: &[f64], input: &[f64], cache: &mut MlpCache) -> Result<GaussianActionDist> {
        let d = self.dist_for_input(params, input, cache)?;
        if let Some(i) = d.mean.iter().position(|m| !m.is_finite()) {
            return Err(Error::NonFinite {
                what: "policy mean",
                index: i,
                value: d.mean[i],
            });
        }
        Ok(d)
    }

    fn log_prob(&self, dist: &GaussianActionDist, action: &Vec<f64>) -> f64 {
        dist.log_prob_unchecked(action)
    }

    fn kl(&self, old: &GaussianActionDist, new: &GaussianActionDist) -> f64 {
        old.kl_unchecked(new)
    }

    fn backprop_log_prob(
        &self,
        params: &[f64],
        cache: &MlpCache,
        dist: &GaussianActionDist,
        action: &Vec<f64>,
        scale: f64,
        grad: &mut [f64],
    ) {
        let n = self.mlp().n_params();
        let mut d_mean = vec![0.0; self.action_dim];
        for i in 0..self.action_dim {
            let inv_var = (-2.0 * dist.log_std[i]).exp();
            let diff = action[i] - dist.mean[i];
            d_mean[i] = scale * diff * inv_var;
            grad[n + i] += scale * (diff * diff * inv_var - 1.0);
        }
        self.mlp()
            .backward(self.mlp_params(params), cache, &d_mean, &mut grad[..n]);
    }

    fn backprop_fvp(
        &self,
        params: &[f64],
        cache: &MlpCache,
        dist: &GaussianActionDist,
        v: &[f64],
        scale: f64,
        out: &mut [f64],
    ) {
        let n = self.mlp().n_params();
        let mut d_mean = self.mlp().jvp(self.mlp_params(params), cache, &v[..n]);
        for (i, d) in d_mean.iter_mut().enumerate() {
            *d *= scale * (-2.0 * dist.log_std[i]).exp();
            out[n + i] += scale * 2.0 * v[n + i];
        }
        self.mlp()
            .backward(self.mlp_params(params), cache, &d_mean, &mut out[..n]);
    }
}

impl TrpoModel for ManagerPolicy {
    type Action = usize;
    /// Skill probabilities.
    type Dist = Vec<f64>;

    fn params(&self) -> &[f64] {
        &self.params.values
    }

    fn set_params(&mut self, values: &[f64]) -> Result<()> {
        ManagerPolicy::set_params(self, values)
    }

    fn input_dim(&self) -> usize {
        self.obs_dim
    }

    fn dist(&self, params: &[f64], input: &[f64], cache: &mut MlpCache) -> Result<Vec<f64>> {
        self.mlp().forward(params, input, cache)?;
        let logits = cache.output();
        if let Some(i) = logits.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite {
                what: "manager logits",
                index: i,
                value: logits[i],
            });
        }
        Ok(softmax(logits))
    }

    fn log_prob(&self, dist: &Vec<f64>, action: &usize) -> f64 {
        dist[*action].ln()
    }

    fn kl(&self, old: &Vec<f64>, new: &Vec<f64>) -> f64 {
        categorical_kl(old, new)
    }

    fn backprop_log_prob(
        &self,
        params: &[f64],
        cache: &MlpCache,
        dist: &Vec<f64>,
        action: &usize,
        scale: f64,
        grad: &mut [f64],
    ) {
        let d_logits: Vec<f64> = dist
            .iter()
            .enumerate()
            .map(|(i, p)| scale * (f64::from(u8::from(i == *action)) - p))
            .collect();
        self.mlp().backward(params, cache, &d_logits, grad);
    }

    fn backprop_fvp(
        &self,
        params: &[f64],
        cache: &MlpCache,
        dist: &Vec<f64>,
        v: &[f64],
        scale: f64,
        out: &mut [f64],
    ) {
        // (diag(p) - p p^T) applied to the logit tangent
        let dl = self.mlp().jvp(params, cache, v);
        let mean: f64 = dist.iter().zip(&dl).map(|(p, d)| p * d).sum();
        let f: Vec<f64> = dist
            .iter()
            .zip(&dl)
            .map(|(p, d)| scale * p * (d - mean))
            .collect();
        self.mlp().backward(params, cache, &f, out);
    }
}
