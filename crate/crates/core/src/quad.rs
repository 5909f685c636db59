//! Composite quadrature on uniform nodes.

/// Composite Simpson rule for `f` on `[a, b]` with `intervals` subintervals
/// (rounded up to an even count).
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2) + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson rule applied to samples on a uniform grid of spacing `h`.
/// An odd number of intervals falls back to the 3/8 rule on the last three.
pub fn simpson_samples(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals.is_multiple_of(2) {
                (n - 1, 0.0)
            } else {
                let k = n - 4;
                let tail = 3.0 * h / 8.0 * (values[k] + 3.0 * values[k + 1] + 3.0 * values[k + 2] + values[k + 3]);
                (k, tail)
            };
            let mut acc = values[0] + values[even_end];
            for (i, v) in values.iter().enumerate().take(even_end).skip(1) {
                acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            acc * h / 3.0 + tail
        }
    }
}

/// Trapezoid rule for nodal samples with spacing `h`.
pub fn trapezoid_samples(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 6);
        assert!((v - 3.75).abs() < 1e-13, "{v}");
    }

    #[test]
    fn simpson_samples_odd_interval_count() {
        let h = 0.1;
        let xs: Vec<f64> = (0..=7).map(|i| (i as f64 * h).powi(3)).collect();
        let exact = 0.7f64.powi(4) / 4.0;
        assert!((simpson_samples(&xs, h) - exact).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_of_linear_is_exact() {
        let xs: Vec<f64> = (0..=10).map(|i| 3.0 * i as f64 * 0.1 + 1.0).collect();
        assert!((trapezoid_samples(&xs, 0.1) - 2.5).abs() < 1e-13);
    }
}
