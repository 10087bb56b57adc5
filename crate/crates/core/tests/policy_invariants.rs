use proptest::prelude::*;
use rand::Rng;
use snn_hrl::base::RngStream;
use snn_hrl::policy::{Integration, MlpSpec, SnnPolicy};

const OBS: usize = 4;
const K: usize = 6;

fn bilinear(seed: u64) -> SnnPolicy {
    let mut rng = RngStream::new(seed, 0);
    let mut p = SnnPolicy::new(OBS, 2, K, Integration::Bilinear, MlpSpec::new(vec![8, 8]), &mut rng).unwrap();
    // non-zero biases and log-stds so every block matters
    let v: Vec<f64> = p.params.values.iter().map(|w| w + rng.random_range(-0.3..0.3)).collect();
    p.set_params(&v).unwrap();
    p
}

/// Plain network whose first layer is the `z`-th slice of the bilinear one.
fn slice_policy(p: &SnnPolicy, z: usize) -> SnnPolicy {
    let h = p.spec.hidden[0];
    let wide = OBS * K;
    let mut plain = SnnPolicy::zeros(OBS, 2, 1, Integration::Plain, p.spec.clone()).unwrap();
    let src = &p.params.values;
    let mut dst = Vec::with_capacity(plain.n_params());
    for row in 0..h {
        for i in 0..OBS {
            dst.push(src[row * wide + i * K + z]);
        }
    }
    dst.extend_from_slice(&src[h * wide..]);
    plain.set_params(&dst).unwrap();
    plain
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn bilinear_equals_first_layer_slice(seed in 0u64..8, z in 0..K, obs in prop::collection::vec(-3.0f64..3.0, OBS)) {
        let p = bilinear(seed);
        let a = p.forward(&obs, z).unwrap();
        let b = slice_policy(&p, z).forward(&obs, 0).unwrap();
        for i in 0..2 {
            prop_assert_eq!(a.mean[i].to_bits(), b.mean[i].to_bits());
            prop_assert_eq!(a.log_std[i].to_bits(), b.log_std[i].to_bits());
        }
    }
}

#[test]
fn score_function_has_zero_mean() {
    let p = bilinear(3);
    let obs = [0.4, -0.2, 0.8, 0.6];
    let mut rng = RngStream::new(11, 0);
    let n = 100_000;
    let d = p.n_params();
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for _ in 0..n {
        let (a, _) = p.act(&obs, 2, &mut rng).unwrap();
        let g = p.grad_log_prob(&obs, 2, &a).unwrap();
        for (j, v) in g.values.iter().enumerate() {
            sum[j] += v;
            sq[j] += v * v;
        }
    }
    let nf = n as f64;
    let mean_norm = sum.iter().map(|s| (s / nf).powi(2)).sum::<f64>().sqrt();
    let se_norm = sum
        .iter()
        .zip(&sq)
        .map(|(s, q)| (q / nf - (s / nf).powi(2)) / nf)
        .sum::<f64>()
        .sqrt();
    assert!(se_norm > 0.0);
    assert!(mean_norm < 3.0 * se_norm, "|mean| {mean_norm} vs se {se_norm}");
}
