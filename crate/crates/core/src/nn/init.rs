use super::{NnError, Rng, Tensor};

/// Glorot/Xavier uniform: i.i.d. draws on `[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform_init(
    fan_in: usize,
    fan_out: usize,
    shape: &[usize],
    rng: &mut Rng,
) -> Result<Tensor, NnError> {
    if fan_in == 0 || fan_out == 0 {
        return Err(NnError::InvalidSpec(format!(
            "glorot init needs positive fans, got fan_in {fan_in} fan_out {fan_out}"
        )));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.uniform(-limit, limit)).collect();
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_limit_bounds() {
        let mut rng = Rng::new(3);
        let t = glorot_uniform_init(3, 3, &[50, 40], &mut rng).unwrap();
        assert!(t.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn zero_fan_rejected() {
        let mut rng = Rng::new(3);
        assert!(glorot_uniform_init(600, 0, &[4], &mut rng).is_err());
    }

    #[test]
    fn sample_mean_near_zero() {
        let mut rng = Rng::new(2024);
        let t = glorot_uniform_init(3, 3, &[100_000], &mut rng).unwrap();
        let mean = t.data().iter().sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn seeded_init_reproducible() {
        let a = glorot_uniform_init(10, 20, &[20, 10], &mut Rng::new(9)).unwrap();
        let b = glorot_uniform_init(10, 20, &[20, 10], &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }
}
