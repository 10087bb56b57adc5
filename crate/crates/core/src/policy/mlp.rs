//! Fully connected tanh network over a flat parameter slice, with exact
//! reverse-mode (vector-Jacobian) and forward-mode (Jacobian-vector) passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::base::{RngStream, ShapeTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    Tanh,
}

/// Hidden-layer architecture; input and output sizes come from the policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSpec {
    pub hidden: Vec<usize>,
    pub nonlinearity: Nonlinearity,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            nonlinearity: Nonlinearity::Tanh,
        }
    }
}

impl MlpSpec {
    pub fn new(hidden: Vec<usize>) -> Self {
        Self {
            hidden,
            nonlinearity: Nonlinearity::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config {
                field: "mlp.hidden".into(),
                constraint: "at least one hidden layer, all sizes >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Layer sizes `[input, hidden..., output]`; parameters per layer are the
/// row-major weight matrix (out x in) followed by the bias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    sizes: Vec<usize>,
}

/// Post-activation values of every layer from one forward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    pub acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn new(input: usize, spec: &MlpSpec, output: usize) -> Result<Self> {
        spec.validate()?;
        if output == 0 {
            return Err(Error::InvalidArgument("network output size must be >= 1".into()));
        }
        let mut sizes = Vec::with_capacity(spec.hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(&spec.hidden);
        sizes.push(output);
        Ok(Self { sizes })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sizes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn n_params(&self) -> usize {
        self.layers().map(|(i, o)| o * i + o).sum()
    }

    pub fn shape_table(&self) -> ShapeTable {
        let mut table = Vec::new();
        for (l, (i, o)) in self.layers().enumerate() {
            table.push((format!("layer{l}.weight"), vec![o, i]));
            table.push((format!("layer{l}.bias"), vec![o]));
        }
        table
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(&self, params: &mut [f64], rng: &mut RngStream) {
        let mut off = 0;
        for (i, o) in self.layers() {
            let limit = (6.0 / (i + o) as f64).sqrt();
            for w in &mut params[off..off + o * i] {
                *w = rng.random_range(-limit..=limit);
            }
            off += o * i;
            params[off..off + o].fill(0.0);
            off += o;
        }
    }

    pub fn forward(&self, params: &[f64], input: &[f64], cache: &mut MlpCache) -> Result<()> {
        if input.len() != self.sizes[0] {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.sizes[0],
                got: input.len(),
            });
        }
        debug_assert_eq!(params.len(), self.n_params());
        let n_layers = self.sizes.len() - 1;
        cache.acts.resize(self.sizes.len(), Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        let mut off = 0;
        for (l, (ni, no)) in self.layers().enumerate() {
            let (w, rest) = params[off..].split_at(no * ni);
            let b = &rest[..no];
            off += no * ni + no;
            let (prev, next) = cache.acts.split_at_mut(l + 1);
            let x = &prev[l];
            let z = &mut next[0];
            z.clear();
            z.extend_from_slice(b);
            if l == 0 {
                // Embedded inputs are mostly zeros (one-hot latent blocks).
                for (j, &xj) in x.iter().enumerate() {
                    if xj != 0.0 {
                        for (o, zo) in z.iter_mut().enumerate() {
                            *zo += w[o * ni + j] * xj;
                        }
                    }
                }
            } else {
                for (o, zo) in z.iter_mut().enumerate() {
                    *zo += dot(&w[o * ni..(o + 1) * ni], x);
                }
            }
            if l + 1 < n_layers {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
            }
        }
        Ok(())
    }

    /// Accumulate `d_out^T * d(output)/d(params)` into `grad`.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, d_out: &[f64], grad: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let offsets = self.offsets();
        let mut delta = d_out.to_vec();
        for l in (0..n_layers).rev() {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let x = &cache.acts[l];
            {
                let (gw, gb) = grad[off..off + no * ni + no].split_at_mut(no * ni);
                for o in 0..no {
                    let d = delta[o];
                    gb[o] += d;
                    if d != 0.0 {
                        let row = &mut gw[o * ni..(o + 1) * ni];
                        if l == 0 {
                            for (j, &xj) in x.iter().enumerate() {
                                if xj != 0.0 {
                                    row[j] += d * xj;
                                }
                            }
                        } else {
                            for (r, &xj) in row.iter_mut().zip(x) {
                                *r += d * xj;
                            }
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &params[off..off + no * ni];
            let mut prev = vec![0.0; ni];
            for o in 0..no {
                let d = delta[o];
                if d != 0.0 {
                    for (p, &wv) in prev.iter_mut().zip(&w[o * ni..(o + 1) * ni]) {
                        *p += d * wv;
                    }
                }
            }
            // tanh' = 1 - a^2 on the hidden layer feeding this one
            for (p, &a) in prev.iter_mut().zip(&cache.acts[l]) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }

    /// Directional derivative of the output along parameter direction `v`.
    pub fn jvp(&self, params: &[f64], cache: &MlpCache, v: &[f64]) -> Vec<f64> {
        let n_layers = self.sizes.len() - 1;
        let offsets = self.offsets();
        let mut dx = vec![0.0; self.sizes[0]];
        for l in 0..n_layers {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let w = &params[off..off + no * ni];
            let vw = &v[off..off + no * ni];
            let vb = &v[off + no * ni..off + no * ni + no];
            let x = &cache.acts[l];
            let mut dz = vb.to_vec();
            for o in 0..no {
                let mut acc = 0.0;
                let wrow = &w[o * ni..(o + 1) * ni];
                let vrow = &vw[o * ni..(o + 1) * ni];
                if l == 0 {
                    for (j, &xj) in x.iter().enumerate() {
                        if xj != 0.0 {
                            acc += vrow[j] * xj;
                        }
                    }
                } else {
                    acc += dot(vrow, x) + dot(wrow, &dx);
                }
                dz[o] += acc;
            }
            if l + 1 < n_layers {
                for (d, &a) in dz.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            dx = dz;
        }
        dx
    }

    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.sizes.len());
        let mut off = 0;
        for (i, o) in self.layers() {
            out.push(off);
            off += o * i + o;
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> (Mlp, Vec<f64>) {
        let mlp = Mlp::new(3, &MlpSpec::new(vec![5, 4]), 2).unwrap();
        let mut p = vec![0.0; mlp.n_params()];
        mlp.init(&mut p, &mut RngStream::new(1, 2));
        // non-zero biases so the test exercises them
        for (i, v) in p.iter_mut().enumerate() {
            *v += 0.01 * (i % 7) as f64;
        }
        (mlp, p)
    }

    fn out(mlp: &Mlp, p: &[f64], x: &[f64]) -> Vec<f64> {
        let mut c = MlpCache::default();
        mlp.forward(p, x, &mut c).unwrap();
        c.output().to_vec()
    }

    #[test]
    fn shape_table_matches_param_count() {
        let (mlp, _) = net();
        let n: usize = mlp
            .shape_table()
            .iter()
            .map(|(_, d)| d.iter().product::<usize>())
            .sum();
        assert_eq!(n, mlp.n_params());
        assert_eq!(n, 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::new(3, &MlpSpec::default(), 2).unwrap();
        let p = vec![0.0; mlp.n_params()];
        assert_eq!(out(&mlp, &p, &[1.0, -2.0, 3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_wrong_input() {
        let (mlp, p) = net();
        let mut c = MlpCache::default();
        assert!(mlp.forward(&p, &[1.0, 2.0], &mut c).is_err());
    }

    #[test]
    fn backward_and_jvp_match_finite_differences() {
        let (mlp, p) = net();
        let x = [0.3, 0.0, -0.8];
        let mut c = MlpCache::default();
        mlp.forward(&p, &x, &mut c).unwrap();
        let d_out = [0.7, -1.3];
        let mut g = vec![0.0; p.len()];
        mlp.backward(&p, &c, &d_out, &mut g);
        let h = 1e-6;
        for i in 0..p.len() {
            let mut pp = p.clone();
            pp[i] += h;
            let up = out(&mlp, &pp, &x);
            pp[i] -= 2.0 * h;
            let dn = out(&mlp, &pp, &x);
            let fd: f64 = (0..2).map(|k| d_out[k] * (up[k] - dn[k]) / (2.0 * h)).sum();
            assert!((fd - g[i]).abs() < 1e-7, "param {i}: fd {fd} vs {}", g[i]);
        }
        let v: Vec<f64> = (0..p.len()).map(|i| ((i * 31 % 17) as f64 - 8.0) / 10.0).collect();
        let j = mlp.jvp(&p, &c, &v);
        let plus: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let (up, dn) = (out(&mlp, &plus, &x), out(&mlp, &minus, &x));
        for k in 0..2 {
            let fd = (up[k] - dn[k]) / (2.0 * h);
            assert!((fd - j[k]).abs() < 1e-7);
        }
    }
}
