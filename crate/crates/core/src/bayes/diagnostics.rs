//! Convergence diagnostics for scalar chain traces.

/// Two-sided 1% critical value of the standard normal.
pub const GEWEKE_CRITICAL_1PCT: f64 = 2.576;

/// Long-run variance at frequency zero with Bartlett weights and the
/// Newey-West bandwidth `⌊4 (n/100)^{2/9}⌋`.
pub fn bartlett_long_run_variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let autocov = |lag: usize| -> f64 { (lag..n).map(|t| (x[t] - mean) * (x[t - lag] - mean)).sum::<f64>() / n as f64 };
    let bw = ((4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize).min(n - 1);
    let mut s = autocov(0);
    for lag in 1..=bw {
        s += 2.0 * (1.0 - lag as f64 / (bw + 1) as f64) * autocov(lag);
    }
    s.max(0.0)
}

/// Geweke z-score comparing the mean of the first `first` fraction of the
/// trace with the mean of the last `last` fraction.
pub fn geweke_z(trace: &[f64], first: f64, last: f64) -> Option<f64> {
    let n = trace.len();
    let na = (n as f64 * first).floor() as usize;
    let nb = (n as f64 * last).floor() as usize;
    if na < 2 || nb < 2 || na + nb > n {
        return None;
    }
    let a = &trace[..na];
    let b = &trace[n - nb..];
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let var = bartlett_long_run_variance(a) / na as f64 + bartlett_long_run_variance(b) / nb as f64;
    if var <= 0.0 {
        return None;
    }
    Some((mean(a) - mean(b)) / var.sqrt())
}
