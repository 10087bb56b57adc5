use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_finite, Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianActionDist {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianActionDist {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        if mean.len() != log_std.len() {
            return Err(Error::Dimension {
                what: "gaussian log_std",
                expected: mean.len(),
                got: log_std.len(),
            });
        }
        check_finite("gaussian mean", &mean)?;
        check_finite("gaussian log_std", &log_std)?;
        Ok(Self { mean, log_std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_prob(&self, action: &[f64]) -> Result<f64> {
        if action.len() != self.dim() {
            return Err(Error::Dimension {
                what: "action",
                expected: self.dim(),
                got: action.len(),
            });
        }
        check_finite("action", action)?;
        Ok(self.log_prob_unchecked(action))
    }

    pub(crate) fn log_prob_unchecked(&self, action: &[f64]) -> f64 {
        let mut lp = 0.0;
        for ((a, m), ls) in action.iter().zip(&self.mean).zip(&self.log_std) {
            let z = (a - m) * (-ls).exp();
            lp += -0.5 * z * z - ls - HALF_LN_2PI;
        }
        lp
    }

    /// `KL(self || other)` in closed form.
    pub fn kl(&self, other: &Self) -> Result<f64> {
        if other.dim() != self.dim() {
            return Err(Error::Dimension {
                what: "gaussian kl",
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.kl_unchecked(other))
    }

    pub(crate) fn kl_unchecked(&self, other: &Self) -> f64 {
        let mut kl = 0.0;
        for i in 0..self.dim() {
            let (m0, ls0) = (self.mean[i], self.log_std[i]);
            let (m1, ls1) = (other.mean[i], other.log_std[i]);
            let var0 = (2.0 * ls0).exp();
            let var1 = (2.0 * ls1).exp();
            kl += ls1 - ls0 + (var0 + (m0 - m1).powi(2)) / (2.0 * var1) - 0.5;
        }
        kl
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + HALF_LN_2PI + 0.5).sum()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let e: f64 = rng.sample(StandardNormal);
                m + ls.exp() * e
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::RngStream;
    use proptest::prelude::*;

    fn d(mean: &[f64], log_std: &[f64]) -> GaussianActionDist {
        GaussianActionDist::new(mean.to_vec(), log_std.to_vec()).unwrap()
    }

    #[test]
    fn standard_normal_log_density() {
        let s = d(&[0.0], &[0.0]);
        assert!((s.log_prob(&[0.0]).unwrap() + 0.918_938_5).abs() < 1e-7);
        assert!((s.log_prob(&[1.0]).unwrap() + 1.418_938_5).abs() < 1e-7);
    }

    /// Trapezoid-rule normalisation of the 1-d density, independent of the
    /// closed-form constant.
    fn quadrature_log_density(m: f64, sd: f64, a: f64) -> f64 {
        let unnorm = |x: f64| (-0.5 * ((x - m) / sd).powi(2)).exp();
        let (lo, hi, n) = (m - 12.0 * sd, m + 12.0 * sd, 200_000);
        let h = (hi - lo) / n as f64;
        let mut z = 0.5 * (unnorm(lo) + unnorm(hi));
        for i in 1..n {
            z += unnorm(lo + i as f64 * h);
        }
        z *= h;
        (unnorm(a) / z).ln()
    }

    #[test]
    fn three_dim_matches_quadrature_product() {
        let mean = [0.3, -1.2, 2.0];
        let log_std = [-0.4, 0.2, 0.7];
        let a = [0.1, -0.5, 3.3];
        let dist = d(&mean, &log_std);
        let oracle: f64 = (0..3)
            .map(|i| quadrature_log_density(mean[i], log_std[i].exp(), a[i]))
            .sum();
        assert!((dist.log_prob(&a).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn density_integrates_to_one() {
        for (m, ls) in [(0.0, 0.0), (1.5, -1.0), (-3.0, 1.2)] {
            let dist = d(&[m], &[ls]);
            let sd = f64::exp(ls);
            let (lo, hi, n) = (m - 8.0 * sd, m + 8.0 * sd, 100_000);
            let h = (hi - lo) / n as f64;
            let f = |x: f64| dist.log_prob(&[x]).unwrap().exp();
            let mut total = 0.5 * (f(lo) + f(hi));
            for i in 1..n {
                total += f(lo + i as f64 * h);
            }
            total *= h;
            assert!((total - 1.0).abs() < 1e-6, "{total}");
        }
    }

    #[test]
    fn kl_examples() {
        let a = d(&[0.0], &[0.0]);
        assert_eq!(a.kl(&a).unwrap(), 0.0);
        assert!((a.kl(&d(&[1.0], &[0.0])).unwrap() - 0.5).abs() < 1e-15);
        let wide = d(&[0.0], &[std::f64::consts::LN_2]);
        let exact = std::f64::consts::LN_2 + 0.125 - 0.5;
        assert!((a.kl(&wide).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn kl_matches_monte_carlo() {
        let old = d(&[0.0], &[0.0]);
        let new = d(&[0.0], &[std::f64::consts::LN_2]);
        let mut rng = RngStream::new(11, 0);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let x = old.sample(&mut rng);
            acc += old.log_prob(&x).unwrap() - new.log_prob(&x).unwrap();
        }
        let mc = acc / n as f64;
        assert!((mc - 0.3181).abs() < 1e-2, "{mc}");
        assert!((old.kl(&new).unwrap() - mc).abs() < 1e-2);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(GaussianActionDist::new(vec![f64::NAN], vec![0.0]).is_err());
        assert!(d(&[0.0], &[0.0]).log_prob(&[f64::INFINITY]).is_err());
        assert!(d(&[0.0], &[0.0]).log_prob(&[0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn kl_non_negative_and_zero_on_self(
            m0 in prop::collection::vec(-3.0f64..3.0, 3),
            m1 in prop::collection::vec(-3.0f64..3.0, 3),
            s0 in prop::collection::vec(-2.0f64..2.0, 3),
            s1 in prop::collection::vec(-2.0f64..2.0, 3),
        ) {
            let a = d(&m0, &s0);
            let b = d(&m1, &s1);
            prop_assert!(a.kl(&b).unwrap() >= -1e-12);
            prop_assert!(a.kl(&a).unwrap().abs() < 1e-12);
        }
    }
}
