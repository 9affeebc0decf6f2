//! Small regression helpers.

/// Ordinary least-squares fit `y ≈ intercept + slope·x`. Returns
/// `(slope, intercept)`, or `None` with fewer than two distinct abscissae.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for k in 0..n {
        let dx = x[k] - mx;
        sxx += dx * dx;
        sxy += dx * (y[k] - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Slope of `ln y` against `ln x`; every value must be positive.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_inputs() {
        assert_eq!(linear_fit(&[1.0], &[2.0]), None);
        assert_eq!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]), None);
        assert_eq!(log_log_slope(&[1.0, 2.0], &[0.0, 1.0]), None);
    }

    proptest! {
        #[test]
        fn recovers_exact_lines(a in -10.0..10.0f64, b in -10.0..10.0f64) {
            let x: Vec<f64> = (0..9).map(|k| k as f64 * 0.7 - 2.0).collect();
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let (s, c) = linear_fit(&x, &y).unwrap();
            prop_assert!((s - a).abs() < 1e-10 && (c - b).abs() < 1e-10);
        }

        #[test]
        fn power_law_exponent(p in -3.0..3.0f64) {
            let x: Vec<f64> = (1..20).map(|k| k as f64).collect();
            let y: Vec<f64> = x.iter().map(|v| 2.5 * v.powf(p)).collect();
            prop_assert!((log_log_slope(&x, &y).unwrap() - p).abs() < 1e-10);
        }
    }
}
