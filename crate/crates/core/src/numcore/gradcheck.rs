use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter, flat index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates_checked: usize,
}

/// Compare the analytic gradients held in `store` against central
/// differences of `loss_fn`.
///
/// At most `max_coords` coordinates per tensor are probed (a seeded random
/// subsample when the tensor is larger). The error of one coordinate is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check<F>(
    store: &mut ParamStore,
    epsilon: f64,
    max_coords: usize,
    seed: u64,
    mut loss_fn: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates_checked: 0,
    };
    let names: Vec<(String, usize)> = store
        .iter()
        .map(|p| (p.name.clone(), p.value.len()))
        .collect();
    for (pi, (name, len)) in names.into_iter().enumerate() {
        let coords: Vec<usize> = if len <= max_coords {
            (0..len).collect()
        } else {
            let mut v = sample(&mut rng, len, max_coords).into_vec();
            v.sort_unstable();
            v
        };
        for k in coords {
            let (orig, analytic) = {
                let p = store.iter().nth(pi).expect("index in range");
                (p.value.data()[k], p.grad.data()[k])
            };
            let set = |s: &mut ParamStore, v: f64| {
                s.iter_mut()
                    .nth(pi)
                    .expect("index in range")
                    .value
                    .data_mut()[k] = v;
            };
            set(store, orig + epsilon);
            let up = loss_fn(store)?;
            set(store, orig - epsilon);
            let down = loss_fn(store)?;
            set(store, orig);
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite(format!("loss while probing {name}[{k}]")));
            }
            let numeric = (up - down) / (2.0 * epsilon);
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            report.coordinates_checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), k));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let mut s = ParamStore::new();
        s.add(
            "theta",
            Tensor::from_vec(&[5], vec![1.0, -2.0, 0.5, 3.0, -0.25]).unwrap(),
        )
        .unwrap();
        let values: Vec<f64> = s.iter().next().unwrap().value.data().to_vec();
        s.iter_mut()
            .next()
            .unwrap()
            .grad
            .data_mut()
            .copy_from_slice(&values);
        let report = gradient_check(&mut s, 1e-5, 200, 0, |s| {
            Ok(0.5
                * s.iter()
                    .next()
                    .unwrap()
                    .value
                    .data()
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>())
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert_eq!(report.coordinates_checked, 5);
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let mut s = ParamStore::new();
        s.add("theta", Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap())
            .unwrap();
        s.iter_mut()
            .next()
            .unwrap()
            .grad
            .data_mut()
            .copy_from_slice(&[1.0, 0.0]);
        let report = gradient_check(&mut s, 1e-5, 200, 0, |s| {
            Ok(0.5
                * s.iter()
                    .next()
                    .unwrap()
                    .value
                    .data()
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>())
        })
        .unwrap();
        assert!(report.max_rel_error > 0.5);
        assert_eq!(report.worst, Some(("theta".to_string(), 1)));
    }

    #[test]
    fn subsamples_large_tensors() {
        let mut s = ParamStore::new();
        s.add("big", Tensor::zeros(&[1000])).unwrap();
        let report = gradient_check(&mut s, 1e-5, 200, 0, |_| Ok(0.0)).unwrap();
        assert_eq!(report.coordinates_checked, 200);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut s = ParamStore::new();
        s.add("x", Tensor::zeros(&[1])).unwrap();
        assert!(gradient_check(&mut s, 1e-5, 200, 0, |_| Ok(f64::NAN)).is_err());
        assert!(gradient_check(&mut s, 0.0, 200, 0, |_| Ok(0.0)).is_err());
    }
}
