pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sum of squared deviations from `center`.
pub(crate) fn sum_sq_dev(xs: &[f64], center: f64) -> f64 {
    xs.iter().map(|x| (x - center).powi(2)).sum()
}

/// Sample variance with an `n − 1` denominator.
pub(crate) fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    sum_sq_dev(xs, m) / (xs.len() as f64 - 1.0)
}

/// Sample covariance with an `n − 1` denominator, `ys` centered at `y_center`.
pub(crate) fn sample_cov_about(xs: &[f64], ys: &[f64], y_center: f64) -> f64 {
    let mx = mean(xs);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - y_center))
        .sum::<f64>()
        / (xs.len() as f64 - 1.0)
}
