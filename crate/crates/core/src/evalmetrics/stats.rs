use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean, sample standard deviation and coefficient of variation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// `100 sd / mean`; absent when the mean is zero.
    pub cv_percent: Option<f64>,
}

pub fn cv_percent(mean: f64, sd: f64) -> Option<f64> {
    (mean != 0.0).then(|| 100.0 * sd / mean)
}

pub fn descriptive_stats(values: &[f64]) -> Result<Descriptive> {
    if values.is_empty() {
        return Err(Error::invalid("descriptive statistics of an empty list"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(Descriptive {
        n,
        mean,
        sd,
        cv_percent: cv_percent(mean, sd),
    })
}

impl fmt::Display for Descriptive {
    /// `2.632 ± 1.647 %CV: 62.58`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3} %CV: ", self.mean, self.sd)?;
        match self.cv_percent {
            Some(cv) => write!(f, "{cv:.2}"),
            None => f.write_str("n/a"),
        }
    }
}

/// `(x - min) / (max - min)`. With fewer than two distinct values every
/// entry maps to 0 and a warning is logged.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Vec::new();
    }
    if max <= min {
        log::warn!(
            "min-max normalization of {} identical values; mapping all to 0",
            values.len()
        );
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sample_sd_and_cv() {
        let d = descriptive_stats(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!((d.mean, d.sd), (0.5, 0.5));
        assert_eq!(d.cv_percent, Some(100.0));
        let c = descriptive_stats(&[3.0; 4]).unwrap();
        assert_eq!((c.sd, c.cv_percent), (0.0, Some(0.0)));
        assert_eq!(descriptive_stats(&[7.0]).unwrap().sd, 0.0);
        assert!(descriptive_stats(&[]).is_err());
        assert_eq!(descriptive_stats(&[-1.0, 1.0]).unwrap().cv_percent, None);
    }

    #[test]
    fn display_matches_table_layout() {
        let d = Descriptive {
            n: 10,
            mean: 2.117,
            sd: 1.096,
            cv_percent: cv_percent(2.117, 1.096),
        };
        assert_eq!(d.to_string(), "2.117 ± 1.096 %CV: 51.77");
    }

    #[test]
    fn normalization_cases() {
        assert_eq!(min_max_normalize(&[1.0, 2.0, 3.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(min_max_normalize(&[4.0, 4.0]), vec![0.0, 0.0]);
        let n = min_max_normalize(&[0.046, 0.058, 0.107]);
        assert!((n[1] - 0.012 / 0.061).abs() < 1e-12);
        assert!((n[1] - 0.1967).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn cv_is_scale_invariant(xs in prop::collection::vec(0.1f64..100.0, 2..30), c in 0.01f64..1000.0) {
            let a = descriptive_stats(&xs).unwrap().cv_percent.unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let b = descriptive_stats(&scaled).unwrap().cv_percent.unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn normalized_values_span_unit_interval(xs in prop::collection::vec(-1e3f64..1e3, 2..30)) {
            let n = min_max_normalize(&xs);
            prop_assert!(n.iter().all(|v| (0.0..=1.0).contains(v)));
            let distinct = xs.iter().any(|&x| x != xs[0]);
            if distinct {
                prop_assert!(n.contains(&0.0) && n.contains(&1.0));
            }
        }
    }
}
