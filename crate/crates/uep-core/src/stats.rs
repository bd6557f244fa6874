//! Small numeric helpers: compensated summation and sample moments.

/// Kahan-Babuska compensated sum. Keeps reductions over large collections
/// accurate to a few ulps regardless of length.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Incremental form of [`kahan_sum`] for accumulation across loops.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    kahan_sum(values.iter().copied()) / values.len() as f64
}

/// Population standard deviation (divides by N).
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = mean(values);
    let var = kahan_sum(values.iter().map(|v| (v - m) * (v - m))) / values.len() as f64;
    var.max(0.0).sqrt()
}

/// Coefficient of variation: population std over mean.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let m = mean(values);
    if m == 0.0 {
        return f64::NAN;
    }
    std_dev(values) / m
}

/// Moment-based sample skewness g1 = m3 / m2^(3/2).
pub fn skewness(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let n = values.len() as f64;
    let m2 = kahan_sum(values.iter().map(|v| (v - m).powi(2))) / n;
    let m3 = kahan_sum(values.iter().map(|v| (v - m).powi(3))) / n;
    if m2 <= 0.0 {
        return f64::NAN;
    }
    m3 / m2.powf(1.5)
}

/// Median of a sorted slice; even lengths average the middle pair.
pub fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_handles_cancellation() {
        // 1 + 1e-16 repeated: naive summation loses the tail entirely.
        let mut values = vec![1.0];
        values.extend(std::iter::repeat_n(1e-16, 10_000));
        let s = kahan_sum(values.iter().copied());
        assert!((s - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median_of_sorted(&[0.4, 0.8, 1.6]), 0.8);
        assert_eq!(median_of_sorted(&[0.4, 0.8]), 0.6000000000000001);
        assert!(median_of_sorted(&[]).is_nan());
    }

    #[test]
    fn cv_of_constant_is_zero() {
        assert_eq!(coefficient_of_variation(&[2.0, 2.0, 2.0]), 0.0);
    }

    #[test]
    fn skewness_sign() {
        // Right-tailed data skews positive.
        let right = [0.0, 0.0, 0.0, 0.1, 0.2, 10.0];
        assert!(skewness(&right) > 1.0);
        let symmetric = [-1.0, 0.0, 1.0];
        assert!(skewness(&symmetric).abs() < 1e-12);
    }
}
