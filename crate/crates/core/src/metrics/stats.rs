//! Small summary statistics used when comparing methods.

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sum_sq_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum()
}

/// Cohen's d with the pooled (n - 1) standard deviation. `None` when either
/// sample is empty, there are fewer than three values in total, or the pooled
/// variance is zero.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() || a.len() + b.len() < 3 {
        return None;
    }
    let pooled = (sum_sq_dev(a) + sum_sq_dev(b)) / (a.len() + b.len() - 2) as f64;
    if pooled <= 0.0 {
        return None;
    }
    Some((mean(a) - mean(b)) / pooled.sqrt())
}

/// Maximum-likelihood mean of an exponential distribution shifted by `offset`
/// (e.g. the minimum count a detection requires), returned on the original scale.
pub fn exp_mean_fit(sample: &[f64], offset: f64) -> Option<f64> {
    if sample.is_empty() {
        return None;
    }
    Some(mean(sample) - offset)
}

/// Mean and sample standard deviation; SD is `None` below two values.
pub fn mean_sd(x: &[f64]) -> Option<(f64, Option<f64>)> {
    if x.is_empty() {
        return None;
    }
    let sd = (x.len() > 1).then(|| (sum_sq_dev(x) / (x.len() - 1) as f64).sqrt());
    Some((mean(x), sd))
}
