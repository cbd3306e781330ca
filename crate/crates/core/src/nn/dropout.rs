use super::{NnError, Rng, Tensor};

fn check_rate(rate: f64) -> Result<(), NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::InvalidSpec(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

/// Inverted-dropout mask: each entry is `0` with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut Rng) -> Result<Vec<f64>, NnError> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let scale = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.bernoulli(rate) { 0.0 } else { scale })
        .collect())
}

/// Identity at inference or `rate == 0`, inverted dropout otherwise.
pub fn dropout_apply(x: &Tensor, rate: f64, training: bool, rng: &mut Rng) -> Result<Tensor, NnError> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.len(), rate, rng)?;
    let data = x.data().iter().zip(mask).map(|(v, m)| v * m).collect();
    Tensor::new(x.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_cases() {
        let mut rng = Rng::new(0);
        let x = Tensor::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(dropout_apply(&x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(dropout_apply(&x, 0.5, false, &mut rng).unwrap(), x);
        assert!(dropout_apply(&x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn expectation_preserved() {
        let mut rng = Rng::new(99);
        let x = Tensor::from_vec(vec![1.0; 1_000_000]);
        let y = dropout_apply(&x, 0.5, true, &mut rng).unwrap();
        let mean = y.data().iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
