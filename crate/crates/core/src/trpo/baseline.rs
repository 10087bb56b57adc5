use nalgebra::{DMatrix, DVector};

use crate::base::{discounted_return, normalize};
use crate::error::{Error, Result};

pub const BASELINE_RIDGE: f64 = 1e-5;
/// Diagonal jitter on the time-polynomial and bias coefficients, which are
/// otherwise left unpenalized.
pub const TIME_JITTER: f64 = 1e-10;

/// Observations and rewards of one episode, as seen by the baseline.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeView<'a> {
    pub obs: &'a [Vec<f64>],
    pub rewards: &'a [f64],
}

/// Ridge regression of discounted returns on
/// `(obs, obs^2, t/H, (t/H)^2, (t/H)^3, 1)`. Only the observation
/// coefficients carry the ridge penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBaseline {
    pub horizon: usize,
    pub obs_dim: usize,
    /// `None` until the first fit; predicts zero meanwhile.
    pub coefficients: Option<Vec<f64>>,
}

impl LinearBaseline {
    pub fn new(obs_dim: usize, horizon: usize) -> Self {
        Self {
            horizon: horizon.max(1),
            obs_dim,
            coefficients: None,
        }
    }

    pub fn n_features(&self) -> usize {
        2 * self.obs_dim + 4
    }

    /// Diagonal penalty per feature.
    pub fn penalty(&self, ridge: f64) -> Vec<f64> {
        let k = 2 * self.obs_dim;
        (0..self.n_features())
            .map(|i| if i < k { ridge } else { TIME_JITTER * ridge / BASELINE_RIDGE })
            .collect()
    }

    pub fn features_into(&self, obs: &[f64], t: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(obs);
        out.extend(obs.iter().map(|o| o * o));
        let s = t as f64 / self.horizon as f64;
        out.extend_from_slice(&[s, s * s, s * s * s, 1.0]);
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim {
            return Err(Error::Dimension {
                what: "baseline observation",
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, obs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let Some(w) = &self.coefficients else {
            return Ok(vec![0.0; obs.len()]);
        };
        let mut f = Vec::with_capacity(self.n_features());
        obs.iter()
            .enumerate()
            .map(|(t, o)| {
                self.check_obs(o)?;
                self.features_into(o, t, &mut f);
                Ok(f.iter().zip(w).map(|(a, b)| a * b).sum())
            })
            .collect()
    }

    /// Fit against precomputed per-episode returns.
    pub fn fit_returns(&mut self, obs: &[&[Vec<f64>]], returns: &[Vec<f64>]) -> Result<()> {
        let d = self.n_features();
        let mut xtx = DMatrix::<f64>::zeros(d, d);
        let mut xty = DVector::<f64>::zeros(d);
        let mut f = Vec::with_capacity(d);
        let mut rows = 0usize;
        for (ep_obs, ep_ret) in obs.iter().zip(returns) {
            for (t, (o, &g)) in ep_obs.iter().zip(ep_ret).enumerate() {
                self.check_obs(o)?;
                self.features_into(o, t, &mut f);
                for i in 0..d {
                    let fi = f[i];
                    if fi == 0.0 {
                        continue;
                    }
                    xty[i] += fi * g;
                    for j in i..d {
                        xtx[(i, j)] += fi * f[j];
                    }
                }
                rows += 1;
            }
        }
        if rows == 0 {
            return Err(Error::InvalidArgument("baseline fit on an empty batch".into()));
        }
        for i in 0..d {
            for j in 0..i {
                xtx[(i, j)] = xtx[(j, i)];
            }
        }
        // Grow the ridge until the system factorizes.
        let mut ridge = BASELINE_RIDGE;
        for _ in 0..10 {
            let mut a = xtx.clone();
            for (i, p) in self.penalty(ridge).into_iter().enumerate() {
                a[(i, i)] += p;
            }
            if let Some(chol) = a.cholesky() {
                let w = chol.solve(&xty);
                if w.iter().all(|v| v.is_finite()) {
                    self.coefficients = Some(w.iter().copied().collect());
                    return Ok(());
                }
            }
            ridge *= 10.0;
        }
        Err(Error::InvalidArgument("baseline normal equations are singular".into()))
    }
}

/// Fit the baseline to the discounted returns of `episodes`.
pub fn fit_baseline(baseline: &mut LinearBaseline, episodes: &[EpisodeView], gamma: f64) -> Result<()> {
    let returns = episodes
        .iter()
        .map(|e| discounted_return(e.rewards, gamma))
        .collect::<Result<Vec<_>>>()?;
    let obs: Vec<&[Vec<f64>]> = episodes.iter().map(|e| e.obs).collect();
    baseline.fit_returns(&obs, &returns)
}

/// Normalized `return - baseline` per timestep, episodes concatenated in
/// order. Predicts with the current coefficients, then refits on this batch.
pub fn advantages(baseline: &mut LinearBaseline, episodes: &[EpisodeView], gamma: f64) -> Result<Vec<f64>> {
    let mut returns = Vec::with_capacity(episodes.len());
    let mut raw = Vec::new();
    for e in episodes {
        if e.obs.len() != e.rewards.len() {
            return Err(Error::Dimension {
                what: "episode observations",
                expected: e.rewards.len(),
                got: e.obs.len(),
            });
        }
        let g = discounted_return(e.rewards, gamma)?;
        let b = baseline.predict(e.obs)?;
        raw.extend(g.iter().zip(&b).map(|(g, b)| g - b));
        returns.push(g);
    }
    let obs: Vec<&[Vec<f64>]> = episodes.iter().map(|e| e.obs).collect();
    baseline.fit_returns(&obs, &returns)?;
    normalize(&raw)
}
