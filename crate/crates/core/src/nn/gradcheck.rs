//! Central finite-difference gradient checking.

/// Central differences of `f` around `values`, one coordinate at a time.
pub fn numeric_gradient(values: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = values.to_vec();
    (0..values.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = f(&probe);
            probe[i] = orig - h;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Denominator floor below which differences are treated as absolute.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// `max_i |a_i - n_i| / max(|a_i|, |n_i|, RELATIVE_FLOOR)`
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_FLOOR))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let g = numeric_gradient(&[1.0, -2.0, 3.0], 1e-5, |v| v.iter().map(|x| x * x).sum());
        assert!(max_relative_error(&g, &[2.0, -4.0, 6.0]) < 1e-9);
    }
}
