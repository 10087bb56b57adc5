use crate::error::{Error, Result};

/// Discounted suffix sums: `out[t] = r[t] + gamma * out[t + 1]`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "discount {gamma} outside [0, 1]"
        )));
    }
    crate::error::check_finite("reward", rewards)?;
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    Ok(out)
}

/// Standardize to zero mean and unit (population) standard deviation.
///
/// Degenerate inputs with standard deviation below `1e-8` map to zeros.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "normalize needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-8 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(rewards: &[f64], gamma: f64) -> Vec<f64> {
        (0..rewards.len())
            .map(|t| {
                rewards[t..]
                    .iter()
                    .enumerate()
                    .map(|(k, r)| gamma.powi(k as i32) * r)
                    .sum()
            })
            .collect()
    }

    #[test]
    fn two_term_recurrence() {
        let out = discounted_return(&[1.0, 1.0], 0.99).unwrap();
        assert!((out[0] - 1.99).abs() < 1e-15);
        assert_eq!(out[1], 1.0);
    }

    #[test]
    fn single_step() {
        assert_eq!(discounted_return(&[5.0], 0.0).unwrap(), vec![5.0]);
    }

    #[test]
    fn half_discount_matches_brute_force() {
        let r = [1.0, 1.0, 1.0, 1.0];
        let expected = brute_force(&r, 0.5);
        assert_eq!(expected, vec![1.875, 1.75, 1.5, 1.0]);
        assert_eq!(discounted_return(&r, 0.5).unwrap(), expected);
    }

    #[test]
    fn non_finite_reward_names_timestep() {
        let err = discounted_return(&[1.0, f64::NAN, 2.0], 0.9).unwrap_err();
        match err {
            Error::NonFinite { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_two_points() {
        assert_eq!(normalize(&[1.0, 3.0]).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn normalize_degenerate() {
        assert_eq!(normalize(&[4.0, 4.0, 4.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn normalize_moments() {
        let out = normalize(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        let mean = out.iter().sum::<f64>() / 4.0;
        let std = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_short_input() {
        assert!(normalize(&[1.0]).is_err());
        assert!(normalize(&[]).is_err());
    }

    proptest! {
        #[test]
        fn undiscounted_is_suffix_sum(rewards in prop::collection::vec(-10.0f64..10.0, 1..50)) {
            let out = discounted_return(&rewards, 1.0).unwrap();
            for t in 0..rewards.len() {
                let suffix: f64 = rewards[t..].iter().sum();
                prop_assert!((out[t] - suffix).abs() < 1e-9);
            }
        }

        #[test]
        fn recurrence_holds(rewards in prop::collection::vec(-10.0f64..10.0, 1..50), gamma in 0.0f64..=1.0) {
            let out = discounted_return(&rewards, gamma).unwrap();
            let l = rewards.len();
            prop_assert_eq!(out[l - 1], rewards[l - 1]);
            for t in 0..l - 1 {
                prop_assert!((out[t] - (rewards[t] + gamma * out[t + 1])).abs() < 1e-12);
            }
        }
    }
}
